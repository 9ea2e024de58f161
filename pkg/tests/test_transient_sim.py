import numpy as np
import pytest

from igbtdrive.device_model import miller_plateau_voltage
from igbtdrive.gate_drive import (
    TURN_OFF,
    TURN_ON,
    CatsProfile,
    CspDesignInputs,
    CspProfile,
    ResistorDrive,
    design_csp,
    mirror_for_turn_off,
)
from igbtdrive.transient_sim import (
    AssemblyError,
    IncompleteEdgeError,
    SimConfig,
    SimConfigError,
    Waveforms,
    build_pwm_cycle,
    edge_stage_times,
    ideal_edge,
    on_state_charge,
    simulate_edge,
)

from conftest import make_edge


def first_time(w, mask):
    return w.t[np.flatnonzero(mask)[0]]


def plateau_current_drive(i3, dev, circ):
    """Constant current held just long enough to finish the Miller plateau."""
    q_end = on_state_charge(dev, circ) - dev.c_gate_total * (dev.v_ge_max - miller_plateau_voltage(dev, circ.i_load))
    return CspProfile(((i3, (q_end + 1e-9) / i3),))


@pytest.fixture(scope="module")
def csp_pair(dev, circ, cfg):
    p = design_csp(dev, circ, CspDesignInputs())
    on = simulate_edge(p, dev, circ, cfg, TURN_ON)
    off = simulate_edge(mirror_for_turn_off(p), dev, circ, cfg, TURN_OFF, initial_charge=on.q_g[-1])
    return p, on, off


def test_sim_config_validation():
    with pytest.raises(SimConfigError):
        SimConfig(dt=0.0)
    with pytest.raises(SimConfigError):
        SimConfig(dt=-1e-10)
    with pytest.raises(SimConfigError):
        SimConfig(dt=2e-9)
    assert SimConfig().dt == 100e-12


def test_threshold_crossing_time(dev, circ, cfg):
    p = CspProfile(((143.55e-3, 1e-6),))
    w = simulate_edge(p, dev, circ, cfg, TURN_ON)
    t_th = first_time(w, w.v_ge >= dev.v_geth)
    assert t_th == pytest.approx(100e-9, abs=cfg.dt)


def test_first_fall_segment_duration(dev, circ, cfg):
    w = simulate_edge(plateau_current_drive(20e-3, dev, circ), dev, circ, cfg, TURN_ON)
    t0 = first_time(w, w.v_ce < circ.v_bus)
    t1 = first_time(w, w.v_ce <= 0.5 * circ.v_bus)
    # 25 pF * 65 V / 20 mA
    assert t1 - t0 == pytest.approx(81.25e-9, abs=2 * cfg.dt)


def test_no_drive_leaves_state_unchanged(dev, circ):
    p = CspProfile(((0.0, 100e-9),))
    with pytest.raises(IncompleteEdgeError) as info:
        simulate_edge(p, dev, circ, SimConfig(t_max=1e-6), TURN_ON)
    w = info.value.waveforms
    assert np.all(w.v_ce == circ.v_bus)
    assert np.all(w.i_c == 0.0)
    assert np.all(w.v_ge == 0.0)


def test_charge_balance(csp_pair):
    _, on, _ = csp_pair
    injected = np.sum(on.i_g[:-1]) * on.dt
    assert injected == pytest.approx(on.q_g[-1] - on.q_g[0], rel=1e-6)


def test_turn_on_stage_monotonicity(csp_pair, circ):
    _, on, _ = csp_pair
    assert np.all(np.diff(on.v_ce) <= 0)
    clamp = np.flatnonzero(on.i_c >= circ.i_load)[0]
    assert np.all(np.diff(on.i_c[: clamp + 1]) >= 0)
    plateau = (on.v_ce < circ.v_bus) & (on.v_ce > circ.v_ce_sat)
    outside = ~plateau[1:] & ~plateau[:-1]
    assert np.all(np.diff(on.v_ge)[outside] >= 0)


def test_mirrored_turn_off_restores_off_state(csp_pair, circ):
    _, on, off = csp_pair
    assert off.v_ce[-1] == pytest.approx(circ.v_bus, rel=1e-2)
    assert off.i_c[-1] == 0.0
    assert off.q_g[-1] == pytest.approx(0.0, abs=1e-15)


def test_turn_off_is_time_reverse_of_turn_on(csp_pair, circ):
    p, on, off = csp_pair
    # both traverse the plateau over the same charge with the same |i_g| at each charge
    t_on = edge_stage_times(on, *_dev_circ(circ))
    t_off = edge_stage_times(off, *_dev_circ(circ))
    d_on = t_on["plateau_end"] - t_on["plateau_start"]
    d_off = t_off["plateau_start"] - t_off["plateau_end"]
    assert d_off == pytest.approx(d_on, abs=2 * on.dt)


def _dev_circ(circ):
    from igbtdrive.device_model import DeviceParams

    return DeviceParams(), circ


def test_waveform_bounds(csp_pair, circ):
    for w in csp_pair[1:]:
        assert len(w) >= 2
        assert np.all((w.v_ce >= -1.0) & (w.v_ce <= 1.2 * circ.v_bus))
        assert np.all((w.i_c >= -0.2 * circ.i_load) & (w.i_c <= 1.2 * circ.i_load))


def test_settling_margin(csp_pair):
    _, on, _ = csp_pair
    t_end = on.t[-1]
    assert on.t_complete is not None
    assert t_end == pytest.approx(1.1 * on.t_complete, abs=2 * on.dt)


def test_current_source_compliance(dev, circ, cfg):
    p = CspProfile(((1.0, 400e-9),))
    w = simulate_edge(p, dev, circ, cfg, TURN_ON)
    assert w.v_ge.max() <= dev.v_ge_max + 1e-12
    assert np.sum(w.i_g[:-1]) * w.dt == pytest.approx(w.q_g[-1], rel=1e-9)


@pytest.mark.parametrize("drive", [CatsProfile(), ResistorDrive(r_g=20.0)])
def test_voltage_drives_complete(drive, dev, circ, cfg):
    on = simulate_edge(drive, dev, circ, cfg, TURN_ON)
    off = simulate_edge(drive, dev, circ, cfg, TURN_OFF)
    assert on.v_ce[-1] == circ.v_ce_sat
    assert on.v_ge[-1] >= 0.99 * dev.v_ge_max
    assert off.v_ce[-1] == circ.v_bus
    assert off.i_c[-1] == 0.0


def test_cats_gate_current_through_resistor(dev, circ, cfg):
    cats = CatsProfile()
    w = simulate_edge(cats, dev, circ, cfg, TURN_ON)
    assert w.i_g[0] == pytest.approx(7.5 / cats.r_g)
    on_plateau = (w.v_ce < circ.v_bus) & (w.v_ce > circ.v_ce_sat)
    v_gem = miller_plateau_voltage(dev, circ.i_load)
    assert np.allclose(w.i_g[on_plateau], (7.5 - v_gem) / cats.r_g)


def test_incomplete_edge_carries_partial_waveforms(dev, circ):
    with pytest.raises(IncompleteEdgeError) as info:
        simulate_edge(CatsProfile(), dev, circ, SimConfig(t_max=50e-9), TURN_ON)
    assert len(info.value.waveforms) == 501


def test_initial_state_checked(dev, circ, cfg):
    with pytest.raises(SimConfigError):
        simulate_edge(CatsProfile(), dev, circ, cfg, TURN_OFF, initial_charge=1e-9)
    with pytest.raises(SimConfigError):
        simulate_edge(CatsProfile(), dev, circ, cfg, TURN_ON, initial_charge=100e-9)


def test_halving_dt_completion_time(dev, circ):
    p = design_csp(dev, circ, CspDesignInputs(i_3=30e-3))
    for drive in (p, CatsProfile()):
        a = simulate_edge(drive, dev, circ, SimConfig(dt=100e-12), TURN_ON).t_complete
        b = simulate_edge(drive, dev, circ, SimConfig(dt=50e-12), TURN_ON).t_complete
        assert abs(a - b) / b < 0.01


def test_waveform_csv_roundtrip(csp_pair):
    _, on, _ = csp_pair
    text = on.to_csv()
    assert text.splitlines()[0] == "t_s,v_ge_V,v_ce_V,i_c_A,i_g_A"
    assert "\r" not in text
    back = Waveforms.from_csv(text)
    assert np.array_equal(back.v_ce, on.v_ce)
    assert np.array_equal(back.i_g, on.i_g)
    assert back.dt == pytest.approx(on.dt, rel=1e-9)


class TestPwmCycle:
    def test_sample_count(self, csp_pair, circ):
        _, on, off = csp_pair
        pwm = build_pwm_cycle(on, off, 50e-6, 0.5)
        assert len(pwm) == 500_000
        assert pwm.v_ce[0] == circ.v_bus
        assert pwm.v_ce[249_999] == circ.v_ce_sat
        assert pwm.v_ce[-1] == circ.v_bus

    def test_ideal_edges_give_rectangle(self):
        dt = 1e-9
        on = ideal_edge(130.0, 2.0, 0.0, 10.0, TURN_ON, dt)
        off = ideal_edge(2.0, 130.0, 10.0, 0.0, TURN_OFF, dt)
        pwm = build_pwm_cycle(on, off, 1e-6, 0.25)
        assert set(np.unique(pwm.v_ce)) == {2.0, 130.0}
        assert np.count_nonzero(pwm.v_ce == 2.0) == 250
        assert pwm.v_ce.max() - pwm.v_ce.min() == 128.0

    def test_swapped_edges_invert_polarity(self):
        dt = 1e-9
        on = ideal_edge(130.0, 2.0, 0.0, 10.0, TURN_ON, dt)
        off = ideal_edge(2.0, 130.0, 10.0, 0.0, TURN_OFF, dt)
        a = build_pwm_cycle(on, off, 1e-6, 0.5)
        on_s = ideal_edge(2.0, 130.0, 10.0, 0.0, TURN_ON, dt)
        off_s = ideal_edge(130.0, 2.0, 0.0, 10.0, TURN_OFF, dt)
        b = build_pwm_cycle(on_s, off_s, 1e-6, 0.5)
        assert np.array_equal(a.v_ce + b.v_ce, np.full(1000, 132.0))

    def test_edges_too_long(self, csp_pair):
        _, on, off = csp_pair
        with pytest.raises(AssemblyError):
            build_pwm_cycle(on, off, 1e-6, 0.5)

    def test_edge_order_checked(self, csp_pair):
        _, on, off = csp_pair
        with pytest.raises(AssemblyError):
            build_pwm_cycle(off, on, 50e-6, 0.5)
