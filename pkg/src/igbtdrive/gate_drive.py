"""Gate-drive profiles: the current step profile (CSP), CATS and a plain
voltage source behind a resistor.

Current drives are evaluated with :func:`drive_current`, voltage drives with
:func:`drive_voltage`; the simulator picks the right one from the type.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Union

from .device_model import CircuitParams, DeviceParams

TURN_ON = "turn_on"
TURN_OFF = "turn_off"
EDGES = (TURN_ON, TURN_OFF)


class DesignError(ValueError):
    pass


class ProfileError(ValueError):
    pass


def check_edge(edge: str) -> str:
    if edge not in EDGES:
        raise ValueError(f"edge must be one of {EDGES}, got {edge!r}")
    return edge


@dataclass(frozen=True)
class CspProfile:
    """Piecewise-constant gate current: ``steps`` is a tuple of (amplitude A, duration s)."""

    steps: tuple[tuple[float, float], ...]
    hold_current: float = 0.0

    def __post_init__(self):
        steps = tuple((float(a), float(d)) for a, d in self.steps)
        if not steps:
            raise ProfileError("a current profile needs at least one step")
        for k, (a, d) in enumerate(steps, 1):
            if not math.isfinite(a):
                raise ProfileError(f"step {k}: amplitude must be finite")
            if not (math.isfinite(d) and d > 0):
                raise ProfileError(f"step {k}: duration must be positive, got {d!r}")
        if not math.isfinite(self.hold_current):
            raise ProfileError("hold_current must be finite")
        object.__setattr__(self, "steps", steps)

    @property
    def duration(self) -> float:
        return sum(d for _, d in self.steps)

    @property
    def charge(self) -> float:
        return sum(a * d for a, d in self.steps)

    @property
    def amplitudes(self) -> list[float]:
        return [a for a, _ in self.steps]

    @property
    def durations(self) -> list[float]:
        return [d for _, d in self.steps]


@dataclass(frozen=True)
class CspDesignInputs:
    dt_s1: float = 100e-9
    alpha: float = 0.8
    i2_ratio: float = 0.1
    dt_3: float = 400e-9
    i_3: float = 20e-3
    dt_4: float = 500e-9
    dv_4: float = 7.4
    c_eff2: float = 250e-12

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise DesignError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 < self.i2_ratio < 1:
            raise DesignError(f"i2_ratio must lie in (0, 1), got {self.i2_ratio}")
        for name in ("dt_s1", "dt_3", "dt_4", "c_eff2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DesignError(f"{name} must be positive, got {value!r}")
        if not math.isfinite(self.i_3) or not math.isfinite(self.dv_4):
            raise DesignError("i_3 and dv_4 must be finite")


@dataclass(frozen=True)
class CatsProfile:
    """Multi-level gate voltage held near threshold, applied through ``r_g``."""

    v_int: float = 7.5
    t_int: float = 400e-9
    v_final: float = 15.0
    v_off: float = 0.0
    t_0: float = 200e-9
    v_int0: float = 3.75
    t_int0: float = 400e-9
    v_end: float = 0.0
    r_g: float = 10.0

    def __post_init__(self):
        for name in ("t_int", "t_0", "t_int0", "r_g"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ProfileError(f"{name} must be positive, got {value!r}")
        if not self.v_int < self.v_final:
            raise ProfileError("need v_int < v_final")
        if not self.v_int0 < self.v_int:
            raise ProfileError("need v_int0 < v_int")

    def validate_for(self, dev: DeviceParams) -> None:
        if not dev.v_geth < self.v_int:
            raise ProfileError(
                f"v_int ({self.v_int} V) must sit above the threshold ({dev.v_geth} V)"
            )


@dataclass(frozen=True)
class ResistorDrive:
    """Conventional drive: a two-level voltage source behind a gate resistor."""

    v_on: float = 15.0
    v_off: float = 0.0
    r_g: float = 10.0

    def __post_init__(self):
        if not (math.isfinite(self.r_g) and self.r_g > 0):
            raise ProfileError(f"r_g must be positive, got {self.r_g!r}")
        if not self.v_off < self.v_on:
            raise ProfileError("need v_off < v_on")


GateDriveProfile = Union[CspProfile, CatsProfile, ResistorDrive]


def is_current_drive(drive: GateDriveProfile) -> bool:
    return isinstance(drive, CspProfile)


def design_csp(dev: DeviceParams, circ: CircuitParams, inputs: CspDesignInputs) -> CspProfile:
    """Size the four current steps of the turn-on CSP.

    Step 1 charges C_ies to threshold in ``dt_s1`` and then raises the
    collector current to ``alpha * i_load``; step 2 carries the remaining
    current rise at ``i2_ratio * I1`` through the effective capacitance
    ``c_eff2``; step 3 is the free dv/dt-setting step; step 4 finishes the
    gate charge through ``c_gate_total``.
    """
    i1 = dev.c_ies * dev.v_geth / inputs.dt_s1
    dt_s2 = (dev.c_ies / dev.g_m) * (inputs.alpha * circ.i_load) / i1
    dt1 = inputs.dt_s1 + dt_s2
    i2 = inputs.i2_ratio * i1
    dt2 = (inputs.c_eff2 / dev.g_m) * ((1.0 - inputs.alpha) * circ.i_load) / i2
    i4 = dev.c_gate_total * inputs.dv_4 / inputs.dt_4
    if inputs.alpha == 1.0:
        # no current rise left for step 2: keep it as a vanishing step
        dt2 = 0.0
    for name, d in (("dt_s2", dt_s2), ("dt_1", dt1)):
        if not (math.isfinite(d) and d > 0):
            raise DesignError(f"computed {name} = {d!r} is not a positive duration")
    if not (math.isfinite(dt2) and dt2 >= 0):
        raise DesignError(f"computed dt_2 = {dt2!r} is not a valid duration")
    steps = [(i1, dt1)]
    if dt2 > 0:
        steps.append((i2, dt2))
    steps += [(inputs.i_3, inputs.dt_3), (i4, inputs.dt_4)]
    return CspProfile(tuple(steps), hold_current=0.0)


def drive_current(profile: CspProfile, t: float) -> float:
    """Gate current at time ``t``; a step boundary belongs to the later step."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t!r}")
    end = 0.0
    for amplitude, duration in profile.steps:
        end += duration
        if t < end:
            return amplitude
    return profile.hold_current


def mirror_for_turn_off(profile: CspProfile) -> CspProfile:
    """Reverse the step order and negate amplitudes (hold current is negated too)."""
    steps = tuple((-a, d) for a, d in reversed(profile.steps))
    return replace(profile, steps=steps, hold_current=-profile.hold_current)


def cats_drive_voltage(profile: CatsProfile, t: float, edge: str) -> float:
    check_edge(edge)
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t!r}")
    if edge == TURN_ON:
        return profile.v_int if t < profile.t_int else profile.v_final
    if t < profile.t_0:
        return profile.v_off
    if t < profile.t_0 + profile.t_int0:
        return profile.v_int0
    return profile.v_end


def drive_voltage(drive: GateDriveProfile, t: float, edge: str) -> float:
    """Source voltage of a voltage-mode drive."""
    if isinstance(drive, CatsProfile):
        return cats_drive_voltage(drive, t, edge)
    if isinstance(drive, ResistorDrive):
        return drive.v_on if check_edge(edge) == TURN_ON else drive.v_off
    raise TypeError(f"{type(drive).__name__} is not a voltage drive")


def final_drive_voltage(drive: GateDriveProfile, edge: str) -> float:
    return drive_voltage(drive, math.inf, edge)


def csp_steps_csv(profile: CspProfile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step_index", "amplitude_A", "duration_s"])
    for k, (a, d) in enumerate(profile.steps, 1):
        w.writerow([k, repr(a), repr(d)])
    return buf.getvalue()


def csp_from_csv(text: str) -> CspProfile:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ProfileError("CSP table is empty")
    rows.sort(key=lambda r: int(r["step_index"]))
    return CspProfile(tuple((float(r["amplitude_A"]), float(r["duration_s"])) for r in rows))
