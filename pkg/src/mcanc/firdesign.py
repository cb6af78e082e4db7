"""Window-method bandpass FIR design (Hamming window, band-center normalized).

Reproduces the classic windowed-sinc bandpass recipe: an ideal bandpass
impulse response truncated to ``order + 1`` taps, shaped by a Hamming window,
then scaled so the magnitude response at the band center is exactly 1. Edge
frequencies are normalized so 1.0 is the Nyquist frequency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import FirFilter

__all__ = ["BandSpec", "bandpass_prototype", "design_bandpass", "magnitude_response"]


@dataclass(frozen=True)
class BandSpec:
    """Bandpass design request: even filter order and normalized band edges."""

    order: int
    lo: float
    hi: float

    def __post_init__(self):
        if not isinstance(self.order, (int, np.integer)) or self.order <= 0:
            raise ValueError(f"filter order must be a positive integer, got {self.order!r}")
        if self.order % 2 != 0:
            raise ValueError(
                f"filter order must be even for a type-I bandpass, got {self.order}"
            )
        if not (0.0 < self.lo < self.hi < 1.0):
            raise ValueError(
                f"band edges must satisfy 0 < lo < hi < 1, got lo={self.lo}, hi={self.hi}"
            )


def bandpass_prototype(spec: BandSpec) -> np.ndarray:
    """Hamming-windowed ideal bandpass taps, before gain normalization.

    h[n] = (sin(pi*hi*(n-M)) - sin(pi*lo*(n-M))) / (pi*(n-M)) * w[n]
    with M = order/2, the n == M limit (hi - lo), and Hamming window
    w[n] = 0.54 - 0.46*cos(2*pi*n/order).
    """
    order = spec.order
    mid = order // 2
    n = np.arange(order + 1, dtype=np.float64)
    shifted = n - mid
    ideal = np.empty(order + 1, dtype=np.float64)
    nz = shifted != 0
    ideal[nz] = (
        np.sin(np.pi * spec.hi * shifted[nz]) - np.sin(np.pi * spec.lo * shifted[nz])
    ) / (np.pi * shifted[nz])
    ideal[mid] = spec.hi - spec.lo
    window = 0.54 - 0.46 * np.cos(2.0 * np.pi * n / order)
    return ideal * window


def design_bandpass(spec: BandSpec) -> FirFilter:
    """Design the bandpass filter, normalized to unit gain at (lo+hi)/2."""
    taps = bandpass_prototype(spec)
    center = 0.5 * (spec.lo + spec.hi)
    gain = _response_at(taps, np.array([center]))[0]
    return FirFilter(taps / gain)


def magnitude_response(fir: FirFilter, n_points: int) -> np.ndarray:
    """|H| sampled at n_points frequencies evenly spaced over [0, 1] (Nyquist = 1)."""
    if not isinstance(n_points, (int, np.integer)) or n_points < 2:
        raise ValueError(f"n_points must be an integer >= 2, got {n_points!r}")
    freqs = np.arange(n_points, dtype=np.float64) / (n_points - 1)
    return _response_at(fir.taps, freqs)


def _response_at(taps: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    lags = np.arange(taps.shape[0], dtype=np.float64)
    phases = np.pi * np.outer(freqs, lags)
    h = np.exp(-1j * phases) @ taps
    return np.abs(h)
