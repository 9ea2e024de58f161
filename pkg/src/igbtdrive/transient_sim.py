"""Fixed-step simulation of one switching edge of the clamped inductive test
circuit, and assembly of a full PWM period from two edges.

The gate is a single state variable, the injected charge ``q``.  Outside the
Miller plateau ``v_ge`` follows the gate charge curve and ``v_ce`` sits at a
rail; on the plateau ``v_ge`` is pinned and the charge flows through the
gate-collector capacitance, so ``dv_ce = -dq / C_gc(v_ce)``.  The plateau width
in charge is the exact integral of C_gc over the collector swing, which keeps
the turn-on and turn-off stage sequences mirror images of each other.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .device_model import (
    CircuitParams,
    DeviceParams,
    GateChargeCurve,
    collector_current,
    default_gate_charge_curve,
    gate_collector_capacitance,
    miller_plateau_voltage,
)
from .gate_drive import (
    TURN_OFF,
    TURN_ON,
    CspProfile,
    GateDriveProfile,
    check_edge,
    drive_current,
    drive_voltage,
    final_drive_voltage,
    is_current_drive,
)

# completion tolerances
V_CE_TOL = 1e-3
V_GE_FRACTION = 0.01
SETTLE_MARGIN = 0.10


class SimConfigError(ValueError):
    pass


class AssemblyError(ValueError):
    pass


class IncompleteEdgeError(RuntimeError):
    """The edge did not complete within ``t_max``; ``waveforms`` holds what was computed."""

    def __init__(self, message: str, waveforms: "Waveforms"):
        super().__init__(message)
        self.waveforms = waveforms


@dataclass(frozen=True)
class SimConfig:
    dt: float = 100e-12
    t_max: float = 20e-6

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise SimConfigError(f"dt must be positive, got {self.dt!r}")
        if self.dt > 1e-9:
            raise SimConfigError(f"dt must not exceed 1 ns, got {self.dt!r}")
        if not (math.isfinite(self.t_max) and self.t_max > self.dt):
            raise SimConfigError(f"t_max must exceed dt, got {self.t_max!r}")
        if self.t_max / self.dt > 5e7:
            raise SimConfigError("t_max/dt exceeds 5e7 samples")


@dataclass(frozen=True, eq=False)
class Waveforms:
    dt: float
    t0: float
    v_ge: np.ndarray
    v_ce: np.ndarray
    i_c: np.ndarray
    i_g: np.ndarray
    edge: str
    q_g: np.ndarray | None = None
    t_complete: float | None = field(default=None)

    def __post_init__(self):
        n = len(self.v_ce)
        if n < 2:
            raise ValueError("waveforms need at least two samples")
        for name in ("v_ge", "i_c", "i_g") + (("q_g",) if self.q_g is not None else ()):
            if len(getattr(self, name)) != n:
                raise ValueError(f"channel {name} length differs from v_ce")

    def __len__(self) -> int:
        return len(self.v_ce)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def power(self) -> np.ndarray:
        return self.v_ce * self.i_c

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_s", "v_ge_V", "v_ce_V", "i_c_A", "i_g_A"])
        for row in zip(self.t, self.v_ge, self.v_ce, self.i_c, self.i_g):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, edge: str = TURN_ON) -> "Waveforms":
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        t = data[:, 0]
        if len(t) < 2:
            raise ValueError("waveform CSV needs at least two rows")
        dt = float(np.mean(np.diff(t)))
        if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=0):
            raise ValueError("waveform CSV is not uniformly sampled")
        return cls(dt, float(t[0]), data[:, 1], data[:, 2], data[:, 3], data[:, 4], check_edge(edge))


class _GateMap:
    """Algebraic maps from gate charge to (v_ge, v_ce, i_c) for one operating point."""

    def __init__(self, dev: DeviceParams, circ: CircuitParams):
        self.dev, self.circ = dev, circ
        self.v_gem = miller_plateau_voltage(dev, circ.i_load)
        if self.v_gem >= dev.v_ge_max:
            raise SimConfigError("Miller plateau lies above v_ge_max")
        half = 0.5 * circ.v_bus
        self.c_hi = gate_collector_capacitance(circ.v_bus, dev, circ.v_bus)
        self.c_lo = gate_collector_capacitance(half, dev, circ.v_bus)
        self.curve = default_gate_charge_curve(dev, circ)
        q = self.curve.charges
        self.q_pl0, self.q_pl1, self.q_tot = float(q[2]), float(q[3]), float(q[4])
        self.q_mid = self.q_pl0 + self.c_hi * (circ.v_bus - half)
        self._q = [p[0] for p in self.curve.points]
        self._v = [p[1] for p in self.curve.points]

    def v_ge(self, q: float) -> float:
        if q <= 0.0:
            # negative gate bias discharges C_ies linearly
            return q / self.dev.c_ies
        if q >= self.q_tot:
            return self.dev.v_ge_max + (q - self.q_tot) / self.dev.c_gate_total
        k = bisect.bisect_right(self._q, q) - 1
        q0, q1 = self._q[k], self._q[k + 1]
        v0, v1 = self._v[k], self._v[k + 1]
        return v0 + (v1 - v0) * (q - q0) / (q1 - q0)

    def v_ce(self, q: float) -> float:
        if q <= self.q_pl0:
            return self.circ.v_bus
        if q <= self.q_mid:
            return self.circ.v_bus - (q - self.q_pl0) / self.c_hi
        if q < self.q_pl1:
            return 0.5 * self.circ.v_bus - (q - self.q_mid) / self.c_lo
        return self.circ.v_ce_sat

    def i_c(self, q: float, v_ge: float) -> float:
        if self.q_pl0 <= q:
            return self.circ.i_load
        return collector_current(v_ge, self.dev, self.circ.i_load)

    def stage(self, q: float) -> int:
        """Switching stage 1..4 of the charge ``q``."""
        if q < self.dev.c_ies * self.dev.v_geth:
            return 1
        if q < self.q_pl0:
            return 2
        if q < self.q_pl1:
            return 3
        return 4


def gate_charge_curve(dev: DeviceParams, circ: CircuitParams) -> GateChargeCurve:
    """Gate charge curve used by the simulator at this operating point."""
    return _GateMap(dev, circ).curve


def on_state_charge(dev: DeviceParams, circ: CircuitParams) -> float:
    """Gate charge of the fully-on device (v_ge = v_ge_max)."""
    return _GateMap(dev, circ).q_tot


def simulate_edge(
    drive: GateDriveProfile,
    dev: DeviceParams,
    circ: CircuitParams,
    cfg: SimConfig,
    edge: str,
    initial_charge: float | None = None,
) -> Waveforms:
    """Simulate one switching edge with explicit Euler at step ``cfg.dt``.

    The device starts blocked for a turn-on and fully on for a turn-off;
    ``initial_charge`` overrides the starting gate charge (e.g. the end state
    of a preceding turn-on) but must still lie on the proper side of the
    plateau.  Current drives saturate at the driver rails (0 and v_ge_max).
    """
    check_edge(edge)
    gm = _GateMap(dev, circ)
    if initial_charge is None:
        q = 0.0 if edge == TURN_ON else gm.q_tot
    else:
        q = float(initial_charge)
        if edge == TURN_ON and q > gm.q_pl0:
            raise SimConfigError("turn-on must start with the device blocked")
        if edge == TURN_OFF and q < gm.q_pl1:
            raise SimConfigError("turn-off must start with the device fully on")

    dt = cfg.dt
    n_max = int(math.floor(cfg.t_max / dt + 1e-9)) + 1
    current_mode = is_current_drive(drive)
    if current_mode:
        profile_end = drive.duration
        hold = drive.hold_current
        # precomputed step edges avoid per-sample scans of the profile
        bounds = np.cumsum([d for _, d in drive.steps]).tolist()
        amps = [a for a, _ in drive.steps]
    else:
        r_g = drive.r_g
        v_target = final_drive_voltage(drive, edge)

    v_ge_s = np.empty(n_max)
    v_ce_s = np.empty(n_max)
    i_c_s = np.empty(n_max)
    i_g_s = np.empty(n_max)
    q_s = np.empty(n_max)

    v_ge_tol = V_GE_FRACTION * dev.v_ge_max
    if edge == TURN_ON:
        v_ce_done = circ.v_ce_sat + V_CE_TOL
    else:
        v_ce_done = circ.v_bus - V_CE_TOL

    n_stop = n_max
    t_complete = None
    k = 0
    for n in range(n_max):
        t = n * dt
        v_ge = gm.v_ge(q)
        v_ce = gm.v_ce(q)
        if current_mode:
            while k < len(bounds) and t >= bounds[k]:
                k += 1
            i_g = amps[k] if k < len(bounds) else hold
            # compliance of the current source at its supply rails
            if i_g > 0 and q + i_g * dt > gm.q_tot:
                i_g = max(gm.q_tot - q, 0.0) / dt
            elif i_g < 0 and q + i_g * dt < 0.0:
                i_g = min(-q, 0.0) / dt
        else:
            i_g = (drive_voltage(drive, t, edge) - v_ge) / r_g

        v_ge_s[n] = v_ge
        v_ce_s[n] = v_ce
        i_c_s[n] = gm.i_c(q, v_ge)
        i_g_s[n] = i_g
        q_s[n] = q

        if t_complete is None:
            if edge == TURN_ON:
                ce_ok = v_ce <= v_ce_done
            else:
                ce_ok = v_ce >= v_ce_done and i_c_s[n] <= 0.0
            if ce_ok:
                if current_mode:
                    # profile exhausted, or the source pinned at a rail
                    rail = dev.v_ge_max if edge == TURN_ON else 0.0
                    gate_ok = t >= profile_end or abs(v_ge - rail) <= v_ge_tol
                else:
                    gate_ok = abs(v_ge - v_target) <= v_ge_tol
                if gate_ok:
                    t_complete = t
                    n_stop = min(n_max, n + 1 + int(math.ceil(SETTLE_MARGIN * n)))
        if n + 1 >= n_stop:
            break
        q += i_g * dt

    n_used = min(n_stop, n + 1)
    w = Waveforms(
        dt,
        0.0,
        v_ge_s[:n_used].copy(),
        v_ce_s[:n_used].copy(),
        i_c_s[:n_used].copy(),
        i_g_s[:n_used].copy(),
        edge,
        q_g=q_s[:n_used].copy(),
        t_complete=t_complete,
    )
    if t_complete is None:
        raise IncompleteEdgeError(
            f"{edge} edge did not complete within t_max = {cfg.t_max:g} s "
            f"(stage {gm.stage(q)} at the end, v_ce = {gm.v_ce(q):.4g} V)",
            w,
        )
    return w


def edge_stage_times(w: Waveforms, dev: DeviceParams, circ: CircuitParams) -> dict[str, float]:
    """Times at which v_ge crosses threshold, the plateau starts, v_ce crosses
    v_bus/2 and the plateau ends (turn-on ordering)."""
    gm = _GateMap(dev, circ)
    t = w.t
    q = w.q_g
    if q is None:
        raise ValueError("stage timing needs the q_g channel")
    marks = {
        "threshold": dev.c_ies * dev.v_geth,
        "plateau_start": gm.q_pl0,
        "v_ce_half": gm.q_mid,
        "plateau_end": gm.q_pl1,
    }
    out = {}
    for name, level in marks.items():
        idx = np.flatnonzero(q >= level) if w.edge == TURN_ON else np.flatnonzero(q <= level)
        out[name] = float(t[idx[0]]) if idx.size else math.nan
    return out


def build_pwm_cycle(on_edge: Waveforms, off_edge: Waveforms, t_s: float, duty: float = 0.5) -> Waveforms:
    """One switching period: on-edge at t = 0, off-edge at duty*t_s, rails elsewhere."""
    if on_edge.edge != TURN_ON or off_edge.edge != TURN_OFF:
        raise AssemblyError("need a turn-on edge followed by a turn-off edge")
    if not math.isclose(on_edge.dt, off_edge.dt, rel_tol=1e-12):
        raise AssemblyError("edges use different sample intervals")
    if not 0 < duty < 1:
        raise AssemblyError(f"duty must lie in (0, 1), got {duty}")
    dt = on_edge.dt
    n = int(round(t_s / dt))
    n_on = int(round(duty * t_s / dt))
    if len(on_edge) > n_on or len(off_edge) > n - n_on:
        raise AssemblyError(
            f"edges ({len(on_edge)} and {len(off_edge)} samples) do not fit the "
            f"{n_on}/{n - n_on} sample on/off intervals"
        )
    channels = {}
    for name in ("v_ge", "v_ce", "i_c", "i_g"):
        a = getattr(on_edge, name)
        b = getattr(off_edge, name)
        x = np.empty(n)
        x[: len(a)] = a
        x[len(a) : n_on] = a[-1]
        x[n_on : n_on + len(b)] = b
        x[n_on + len(b) :] = b[-1]
        channels[name] = x
    return Waveforms(dt, 0.0, edge=TURN_ON, **channels)


def ideal_edge(v_from: float, v_to: float, i_from: float, i_to: float, edge: str, dt: float, n: int = 2) -> Waveforms:
    """Instantaneous switching edge (one sample at each level, padded to ``n``)."""
    v = np.full(n, float(v_to))
    v[0] = v_from
    i = np.full(n, float(i_to))
    i[0] = i_from
    z = np.zeros(n)
    return Waveforms(dt, 0.0, z.copy(), v, i, z.copy(), check_edge(edge))
