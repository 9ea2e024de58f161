"""Switching losses, edge signatures with their Heisenberg-Gabor spreads, the
figure of merit built on them, and harmonic spectra of a PWM period."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .device_model import CircuitParams, DeviceParams
from .gate_drive import TURN_OFF, TURN_ON
from .transient_sim import Waveforms

ON_VGE_FRACTION = 0.10
ON_VCE_FRACTION = 0.02
OFF_VGE_FRACTION = 0.90
OFF_IC_FRACTION = 0.02

PAD_FACTOR = 8
MIN_SWING_FRACTION = 0.96


class ProtocolError(ValueError):
    pass


class SignatureError(ValueError):
    pass


class FramingError(ValueError):
    pass


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


@dataclass(frozen=True)
class LossReport:
    e_on: float
    e_off: float
    p_sw: float
    window_on: tuple[float, float]
    window_off: tuple[float, float]

    def to_csv(self) -> str:
        return _rows_csv(["e_on_J", "e_off_J", "p_sw_W"], [(self.e_on, self.e_off, self.p_sw)])


def _first_index(mask: np.ndarray, start: int, what: str) -> int:
    idx = np.flatnonzero(mask[start:])
    if idx.size == 0:
        raise ProtocolError(f"threshold never crossed: {what}")
    return start + int(idx[0])


def _window_energy(w: Waveforms, i0: int, i1: int) -> float:
    p = w.power[i0 : i1 + 1]
    if p.size < 2:
        return 0.0
    return float(np.trapezoid(p, dx=w.dt))


def turn_on_window(w: Waveforms, dev: DeviceParams, circ: CircuitParams) -> tuple[int, int]:
    i0 = _first_index(w.v_ge >= ON_VGE_FRACTION * dev.v_ge_max, 0, "turn-on v_ge >= 10% of v_ge_max")
    i1 = _first_index(w.v_ce <= ON_VCE_FRACTION * circ.v_bus, i0, "turn-on v_ce <= 2% of v_bus")
    return i0, i1


def turn_off_window(w: Waveforms, dev: DeviceParams, circ: CircuitParams) -> tuple[int, int]:
    i0 = _first_index(w.v_ge <= OFF_VGE_FRACTION * dev.v_ge_max, 0, "turn-off v_ge <= 90% of v_ge_max")
    i1 = _first_index(w.i_c <= OFF_IC_FRACTION * circ.i_load, i0, "turn-off i_c <= 2% of i_load")
    return i0, i1


def switching_energy(on: Waveforms, off: Waveforms, dev: DeviceParams, circ: CircuitParams) -> LossReport:
    """Datasheet-style switching energies and the resulting switching power.

    Turn-on is integrated from v_ge = 10 % of v_ge_max until v_ce falls to 2 %
    of the bus; turn-off from v_ge = 90 % of v_ge_max until i_c falls to 2 %
    of the load current.
    """
    a0, a1 = turn_on_window(on, dev, circ)
    b0, b1 = turn_off_window(off, dev, circ)
    e_on = max(_window_energy(on, a0, a1), 0.0)
    e_off = max(_window_energy(off, b0, b1), 0.0)
    t_on, t_off = on.t, off.t
    return LossReport(
        e_on,
        e_off,
        (e_on + e_off) / circ.t_s,
        (float(t_on[a0]), float(t_on[a1])),
        (float(t_off[b0]), float(t_off[b1])),
    )


@dataclass(frozen=True, eq=False)
class EdgeSignature:
    dt: float
    t0: float
    lam: np.ndarray
    sigma_t: float
    sigma_w: float

    @property
    def product(self) -> float:
        return self.sigma_t * self.sigma_w

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.lam))

    def to_csv(self) -> str:
        return _rows_csv(["t_s", "lambda_per_s"], zip(self.t, self.lam))


def time_spread(lam: np.ndarray, dt: float) -> float:
    """RMS duration of ``lam`` under energy (|lam|^2) weighting."""
    e = lam * lam
    t = dt * np.arange(len(lam))
    w = e / e.sum()
    mean = float(np.dot(t, w))
    return math.sqrt(float(np.dot((t - mean) ** 2, w)))


def padded_spectrum(lam: np.ndarray, dt: float, pad_factor: int = PAD_FACTOR) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided angular frequencies and continuous-time spectrum dt*DFT of
    ``lam`` zero-padded to at least ``pad_factor`` times its length."""
    n_pad = sfft.next_fast_len(pad_factor * len(lam))
    spec = dt * sfft.fft(lam, n_pad)
    omega = 2 * np.pi * sfft.fftfreq(n_pad, dt)
    return omega, spec


def frequency_spread(lam: np.ndarray, dt: float, pad_factor: int = PAD_FACTOR) -> float:
    omega, spec = padded_spectrum(lam, dt, pad_factor)
    e = (spec * spec.conj()).real
    w = e / e.sum()
    mean = float(np.dot(omega, w))
    return math.sqrt(float(np.dot((omega - mean) ** 2, w)))


def signature_from_lambda(lam: np.ndarray, dt: float, t0: float = 0.0, pad_factor: int = PAD_FACTOR) -> EdgeSignature:
    lam = np.asarray(lam, dtype=float)
    area = lam.sum() * dt
    if not np.isfinite(area) or area == 0:
        raise SignatureError("signature has zero or non-finite area")
    lam = lam / area
    return EdgeSignature(dt, t0, lam, time_spread(lam, dt), frequency_spread(lam, dt, pad_factor))


def edge_signature(w: Waveforms, full_swing: float | None = None, pad_factor: int = PAD_FACTOR) -> EdgeSignature:
    """Unit-area edge kernel of the collector voltage and its spreads.

    ``full_swing`` (normally v_bus - v_ce_sat) enables the check that the edge
    traverses at least 96 % of it.
    """
    v = np.asarray(w.v_ce, dtype=float)
    v_start, v_end = float(v[0]), float(v[-1])
    swing = v_start - v_end
    if swing == 0 or (full_swing is not None and abs(swing) < MIN_SWING_FRACTION * full_swing):
        raise SignatureError(
            f"edge swings {abs(swing):.4g} V, short of {MIN_SWING_FRACTION:.0%} of the full swing"
        )
    g = (v - v_end) / swing
    lam = -np.gradient(g, w.dt)
    return signature_from_lambda(lam, w.dt, w.t0, pad_factor)


def fom(on_sig: EdgeSignature, off_sig: EdgeSignature) -> float:
    return on_sig.product + off_sig.product


@dataclass(frozen=True, eq=False)
class Spectrum:
    f: np.ndarray
    mag_db: np.ndarray
    envelope_db: np.ndarray

    def to_csv(self) -> str:
        return _rows_csv(["f_Hz", "mag_dbuv", "envelope_dbuv"], zip(self.f, self.mag_db, self.envelope_db))


DBUV_FLOOR = -200.0
F_LIMIT = 500e6


def harmonic_amplitudes(x: np.ndarray) -> np.ndarray:
    """Single-sided harmonic amplitudes (volts) of one exactly periodic frame."""
    n = len(x)
    amp = np.abs(sfft.rfft(x)) / n
    amp[1:] *= 2
    if n % 2 == 0:
        amp[-1] /= 2
    return amp


def to_dbuv(volts: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(np.asarray(volts) / 1e-6)
    return np.maximum(db, DBUV_FLOOR)


def spectrum_envelope(pwm: Waveforms, t_s: float, points_per_decade: int = 100, f_max: float = F_LIMIT) -> Spectrum:
    """Harmonic spectrum of one period of v_ce and its upper envelope.

    The envelope at a harmonic is the largest harmonic at or above it, so it is
    non-increasing.  Values are reported on a log-spaced grid of harmonic
    indices from the fundamental up to min(Nyquist, ``f_max``).
    """
    n_expected = int(round(t_s / pwm.dt))
    if len(pwm) != n_expected:
        raise FramingError(f"waveform has {len(pwm)} samples, one period needs {n_expected}")
    amp = harmonic_amplitudes(pwm.v_ce)
    f1 = 1.0 / t_s
    k_max = int(math.floor(min(0.5 / pwm.dt, f_max) / f1 + 1e-9))
    k_max = min(k_max, len(amp) - 1)
    if k_max < 1:
        raise FramingError("no harmonic below the frequency limit")
    mag = to_dbuv(amp[1:])
    # taken up to Nyquist so the reported band has no edge effect at f_max
    env = np.maximum.accumulate(mag[::-1])[::-1]
    n_grid = max(2, int(math.ceil(points_per_decade * math.log10(k_max))) + 1)
    k = np.unique(np.round(np.logspace(0, math.log10(k_max), n_grid)).astype(int))
    return Spectrum(k * f1, mag[k - 1], env[k - 1])


def build_spectrum(on: Waveforms, off: Waveforms, t_s: float, duty: float = 0.5, **kwargs) -> Spectrum:
    """Spectrum envelope of the PWM period assembled from two edges."""
    from .transient_sim import build_pwm_cycle

    return spectrum_envelope(build_pwm_cycle(on, off, t_s, duty), t_s, **kwargs)
