"""Studies built on the simulator: the I3 sweep, loss calibration of the CSP
and the equal-loss comparison against a reference drive (CATS by default)."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Union

from .analysis import Spectrum, build_spectrum, edge_signature, fom, switching_energy
from .device_model import CircuitParams, DeviceParams
from .gate_drive import (
    TURN_OFF,
    TURN_ON,
    CatsProfile,
    CspDesignInputs,
    CspProfile,
    ResistorDrive,
    design_csp,
    mirror_for_turn_off,
)
from .transient_sim import SimConfig, Waveforms, simulate_edge

TUNABLE = ("i_3", "dt_3")
DEFAULT_BOUNDS = {"i_3": (5e-3, 1.0), "dt_3": (50e-9, 2e-6)}
CALIBRATION_RTOL = 0.005
CALIBRATION_MAX_ITER = 40
MATCH_RTOL = 0.02

CONVENTION = (
    "equal-loss convention: the reference drive is simulated as given and the "
    "CSP step-3 parameter is calibrated toward the target loss"
)


class SweepError(RuntimeError):
    pass


class CalibrationError(ValueError):
    pass


class ComparisonError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class TradeoffRecord:
    drive_id: str
    i_3: float | None
    p_sw: float
    fom: float
    e_on: float
    e_off: float
    spectrum: Spectrum | None = None

    def row(self) -> list[str]:
        i3 = "" if self.i_3 is None else repr(float(self.i_3))
        return [self.drive_id, i3] + [repr(float(x)) for x in (self.p_sw, self.fom, self.e_on, self.e_off)]

    def same_values(self, other: "TradeoffRecord") -> bool:
        return self.row()[1:] == other.row()[1:]


TRADEOFF_HEADER = ["drive_id", "i3_A", "p_sw_W", "fom", "e_on_J", "e_off_J"]


def tradeoff_csv(records: Sequence[TradeoffRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRADEOFF_HEADER)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


@dataclass(frozen=True, eq=False)
class DriveResult:
    on: Waveforms
    off: Waveforms
    record: TradeoffRecord


def simulate_pair(drive, dev: DeviceParams, circ: CircuitParams, cfg: SimConfig) -> tuple[Waveforms, Waveforms]:
    """Turn-on then turn-off.  A CSP turns off with its mirrored profile,
    starting from the gate charge left by its own turn-on."""
    on = simulate_edge(drive, dev, circ, cfg, TURN_ON)
    if isinstance(drive, CspProfile):
        off = simulate_edge(mirror_for_turn_off(drive), dev, circ, cfg, TURN_OFF, initial_charge=float(on.q_g[-1]))
    else:
        off = simulate_edge(drive, dev, circ, cfg, TURN_OFF)
    return on, off


def evaluate_drive(
    drive,
    dev: DeviceParams,
    circ: CircuitParams,
    cfg: SimConfig,
    drive_id: str,
    i_3: float | None = None,
    duty: float = 0.5,
    with_spectrum: bool = True,
) -> DriveResult:
    on, off = simulate_pair(drive, dev, circ, cfg)
    loss = switching_energy(on, off, dev, circ)
    swing = circ.v_bus - circ.v_ce_sat
    f = fom(edge_signature(on, swing), edge_signature(off, swing))
    spectrum = build_spectrum(on, off, circ.t_s, duty) if with_spectrum else None
    rec = TradeoffRecord(drive_id, i_3, loss.p_sw, f, loss.e_on, loss.e_off, spectrum)
    return DriveResult(on, off, rec)


def evaluate_csp(
    inputs: CspDesignInputs,
    dev: DeviceParams,
    circ: CircuitParams,
    cfg: SimConfig,
    drive_id: str | None = None,
    duty: float = 0.5,
    with_spectrum: bool = True,
) -> DriveResult:
    profile = design_csp(dev, circ, inputs)
    label = drive_id or f"csp_i3_{inputs.i_3 * 1e3:g}mA"
    return evaluate_drive(profile, dev, circ, cfg, label, inputs.i_3, duty, with_spectrum)


def _sweep_point(args) -> TradeoffRecord:
    inputs, dev, circ, cfg, duty, with_spectrum = args
    try:
        return evaluate_csp(inputs, dev, circ, cfg, duty=duty, with_spectrum=with_spectrum).record
    except Exception as exc:
        raise SweepError(f"I3 = {inputs.i_3:g} A: {exc}") from exc


def sweep_i3(
    base: CspDesignInputs,
    values: Sequence[float],
    dev: DeviceParams,
    circ: CircuitParams,
    cfg: SimConfig,
    duty: float = 0.5,
    with_spectrum: bool = True,
    workers: int = 1,
) -> list[TradeoffRecord]:
    """One trade-off record per step-3 amplitude, in input order."""
    if not values:
        raise SweepError("no I3 values to sweep")
    for v in values:
        if not (math.isfinite(v) and v > 0):
            raise SweepError(f"I3 values must be positive, got {v!r}")
    jobs = [(replace(base, i_3=float(v)), dev, circ, cfg, duty, with_spectrum) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(j) for j in jobs]


def bisect_monotone(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    target: float,
    rtol: float = CALIBRATION_RTOL,
    max_iter: int = CALIBRATION_MAX_ITER,
) -> tuple[float, float]:
    """Bisection for f(x) = target with f monotone on [lo, hi].

    Returns (x, f(x)) for the best point seen.  Raises CalibrationError when
    the target is not bracketed by f(lo) and f(hi).
    """
    f_lo, f_hi = f(lo), f(hi)
    for x, fx in ((lo, f_lo), (hi, f_hi)):
        if abs(fx - target) <= rtol * abs(target):
            return x, fx
    if not min(f_lo, f_hi) <= target <= max(f_lo, f_hi):
        raise CalibrationError(
            f"target {target:.6g} outside the achievable range "
            f"[{min(f_lo, f_hi):.6g}, {max(f_lo, f_hi):.6g}] over [{lo:g}, {hi:g}]"
        )
    increasing = f_hi > f_lo
    best = min(((lo, f_lo), (hi, f_hi)), key=lambda p: abs(p[1] - target))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid - target) < abs(best[1] - target):
            best = (mid, f_mid)
        if abs(f_mid - target) <= rtol * abs(target):
            break
        if (f_mid < target) == increasing:
            lo = mid
        else:
            hi = mid
    return best


def calibrate_to_loss(
    target_p: float,
    dev: DeviceParams,
    circ: CircuitParams,
    cfg: SimConfig,
    base: CspDesignInputs = CspDesignInputs(),
    tune: str = "i_3",
    bounds: tuple[float, float] | None = None,
    rtol: float = CALIBRATION_RTOL,
    max_iter: int = CALIBRATION_MAX_ITER,
) -> CspDesignInputs:
    """Tune one step-3 parameter of ``base`` so the CSP switching power hits ``target_p``.

    If ``base`` already meets the target within ``rtol`` it is returned as is.
    """
    if tune not in TUNABLE:
        raise CalibrationError(f"tune must be one of {TUNABLE}, got {tune!r}")
    if not (math.isfinite(target_p) and target_p > 0):
        raise CalibrationError(f"target loss must be positive, got {target_p!r}")
    lo, hi = bounds or DEFAULT_BOUNDS[tune]
    if not 0 < lo < hi:
        raise CalibrationError(f"bad tuning bounds ({lo}, {hi})")

    def loss(x: float) -> float:
        inputs = replace(base, **{tune: x})
        return evaluate_csp(inputs, dev, circ, cfg, with_spectrum=False).record.p_sw

    if abs(loss(getattr(base, tune)) - target_p) <= rtol * target_p:
        return base
    x, _ = bisect_monotone(loss, lo, hi, target_p, rtol, max_iter)
    return replace(base, **{tune: x})


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    target_loss: float
    csp_inputs: CspDesignInputs
    csp_record: TradeoffRecord
    cats_record: TradeoffRecord
    loss_mismatch: float
    spectra: tuple[Spectrum, Spectrum]

    def summary(self) -> str:
        c, r = self.csp_record, self.cats_record
        lines = [
            f"# {CONVENTION}",
            f"target_loss_W = {self.target_loss!r}",
            f"calibrated_i3_A = {self.csp_inputs.i_3!r}",
            f"calibrated_dt3_s = {self.csp_inputs.dt_3!r}",
            f"{c.drive_id}: p_sw_W = {c.p_sw!r}, fom = {c.fom!r}",
            f"{r.drive_id}: p_sw_W = {r.p_sw!r}, fom = {r.fom!r}",
            f"loss_mismatch = {self.loss_mismatch!r}",
            f"lower_fom = {c.drive_id if c.fom < r.fom else r.drive_id}",
        ]
        return "\n".join(lines) + "\n"


ReferenceDrive = Union[CatsProfile, ResistorDrive, CspDesignInputs]


def compare_at_equal_loss(
    csp: CspDesignInputs,
    reference: ReferenceDrive,
    dev: DeviceParams,
    circ: CircuitParams,
    cfg: SimConfig,
    target_p: float | None = None,
    tune: str = "i_3",
    bounds: tuple[float, float] | None = None,
    duty: float = 0.5,
) -> ComparisonReport:
    """Compare the CSP with a reference drive at equal switching loss.

    The reference runs as given; ``target_p`` defaults to its measured loss.
    """
    if isinstance(reference, CspDesignInputs):
        ref = evaluate_csp(reference, dev, circ, cfg, drive_id="reference_csp", duty=duty)
    else:
        if isinstance(reference, CatsProfile):
            reference.validate_for(dev)
        label = "cats" if isinstance(reference, CatsProfile) else "resistor"
        ref = evaluate_drive(reference, dev, circ, cfg, label, duty=duty)
    target = ref.record.p_sw if target_p is None else float(target_p)
    tuned = calibrate_to_loss(target, dev, circ, cfg, csp, tune, bounds)
    res = evaluate_csp(tuned, dev, circ, cfg, drive_id="csp", duty=duty)
    mismatch = abs(res.record.p_sw - ref.record.p_sw) / ref.record.p_sw
    if mismatch > MATCH_RTOL:
        raise ComparisonError(
            f"loss mismatch {mismatch:.2%} exceeds {MATCH_RTOL:.0%}: csp {res.record.p_sw:.4g} W "
            f"vs {ref.record.drive_id} {ref.record.p_sw:.4g} W (target {target:.4g} W)"
        )
    return ComparisonReport(target, tuned, res.record, ref.record, mismatch, (res.record.spectrum, ref.record.spectrum))
