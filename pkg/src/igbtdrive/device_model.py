"""Behavioral IGBT model.

Maps injected gate charge to gate voltage through a piecewise-linear gate
charge curve, gate voltage to collector current through a clamped linear
transfer characteristic, and collector voltage to the gate-collector
(Miller) capacitance through a two-segment model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np


class DeviceError(ValueError):
    """Raised for invalid device parameters or out-of-domain queries."""


@dataclass(frozen=True)
class DeviceParams:
    c_ies: float = 2.475e-9
    c_gc: float = 25e-12
    g_m: float = 21.0
    v_geth: float = 5.8
    v_ge_max: float = 15.0
    c_gate_total: float = 20e-9
    c_gc_lowv: float = 250e-12

    def __post_init__(self):
        for name in ("c_ies", "c_gc", "c_gate_total", "c_gc_lowv", "g_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DeviceError(f"{name} must be positive and finite, got {value!r}")
        if not 0 < self.v_geth < self.v_ge_max:
            raise DeviceError(
                f"need 0 < v_geth < v_ge_max, got v_geth={self.v_geth}, v_ge_max={self.v_ge_max}"
            )
        if self.c_gc >= self.c_ies:
            raise DeviceError("c_gc must be smaller than c_ies")


@dataclass(frozen=True)
class CircuitParams:
    v_bus: float = 130.0
    i_load: float = 10.0
    t_s: float = 50e-6
    v_ce_sat: float = 2.0

    def __post_init__(self):
        for name in ("v_bus", "i_load", "t_s"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DeviceError(f"{name} must be positive and finite, got {value!r}")
        # "much smaller" is taken as below a tenth of the bus
        if not 0 <= self.v_ce_sat < 0.1 * self.v_bus:
            raise DeviceError(f"v_ce_sat must lie in [0, v_bus/10), got {self.v_ce_sat}")


@dataclass(frozen=True)
class GateChargeCurve:
    """Ordered (charge, voltage) breakpoints of the v_ge(Q_g) characteristic."""

    points: tuple[tuple[float, float], ...]
    _q: np.ndarray = field(init=False, repr=False, compare=False)
    _v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = tuple((float(q), float(v)) for q, v in self.points)
        if len(pts) < 2:
            raise DeviceError("a gate charge curve needs at least two points")
        if pts[0] != (0.0, 0.0):
            raise DeviceError(f"first point must be (0, 0), got {pts[0]}")
        q = np.array([p[0] for p in pts])
        v = np.array([p[1] for p in pts])
        if np.any(np.diff(q) <= 0):
            raise DeviceError("charge breakpoints must be strictly increasing")
        if np.any(np.diff(v) < 0):
            raise DeviceError("voltage breakpoints must be non-decreasing")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_q", q)
        object.__setattr__(self, "_v", v)

    @property
    def charges(self) -> np.ndarray:
        return self._q.copy()

    @property
    def voltages(self) -> np.ndarray:
        return self._v.copy()

    @property
    def total_charge(self) -> float:
        return float(self._q[-1])

    def plateau(self) -> tuple[float, float, float]:
        """Return (q_start, q_end, v) of the widest flat segment."""
        widths = np.where(np.diff(self._v) == 0, np.diff(self._q), 0.0)
        if not np.any(widths > 0):
            raise DeviceError("curve has no flat (Miller plateau) segment")
        k = int(np.argmax(widths))
        return float(self._q[k]), float(self._q[k + 1]), float(self._v[k])


def vge_from_charge(q_g: float, curve: GateChargeCurve) -> float:
    """Gate voltage for an injected charge, clamped past the last breakpoint."""
    if q_g < 0:
        raise DeviceError(f"gate charge must be non-negative, got {q_g!r}")
    return float(np.interp(q_g, curve._q, curve._v))


def collector_current(v_ge: float, dev: DeviceParams, i_load: float) -> float:
    return min(max(dev.g_m * (v_ge - dev.v_geth), 0.0), i_load)


def miller_plateau_voltage(dev: DeviceParams, i_load: float) -> float:
    if i_load <= 0:
        raise DeviceError(f"i_load must be positive, got {i_load!r}")
    return dev.v_geth + i_load / dev.g_m


def gate_collector_capacitance(v_ce: float, dev: DeviceParams, v_bus: float) -> float:
    # boundary belongs to the low-voltage segment
    return dev.c_gc if v_ce > 0.5 * v_bus else dev.c_gc_lowv


def miller_charge(dev: DeviceParams, circ: CircuitParams) -> float:
    """Charge moved through the Miller capacitance while v_ce swings v_bus -> v_ce_sat."""
    half = 0.5 * circ.v_bus
    return dev.c_gc * (circ.v_bus - half) + dev.c_gc_lowv * (half - circ.v_ce_sat)


def default_gate_charge_curve(dev: DeviceParams, circ: CircuitParams) -> GateChargeCurve:
    """Synthesize v_ge(Q_g) from device parameters at the given operating point.

    Breakpoints: threshold reached through C_ies, plateau voltage reached
    through C_ies, a flat plateau carrying the Miller charge of the full
    collector swing, then a final ramp to v_ge_max through c_gate_total.
    """
    v_gem = miller_plateau_voltage(dev, circ.i_load)
    if v_gem >= dev.v_ge_max:
        raise DeviceError("Miller plateau lies above v_ge_max at this load current")
    q_th = dev.c_ies * dev.v_geth
    q_pl0 = dev.c_ies * v_gem
    q_pl1 = q_pl0 + miller_charge(dev, circ)
    q_tot = q_pl1 + dev.c_gate_total * (dev.v_ge_max - v_gem)
    return GateChargeCurve(
        ((0.0, 0.0), (q_th, dev.v_geth), (q_pl0, v_gem), (q_pl1, v_gem), (q_tot, dev.v_ge_max))
    )
