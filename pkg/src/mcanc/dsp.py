"""Streaming DSP primitives: delay lines, FIR taps, path grids, convolution.

All samples are 64-bit floats. Every inner-product reduction in this package
goes through a single pinned primitive, :func:`taps_dot` (one ``np.dot`` call
on C-contiguous 1-D float64 operands), so that streaming filters, batch
filters, and the naive verification engine produce bit-identical results on a
given platform. A "frame" is a plain 1-D float64 vector with one entry per
channel; :func:`as_frame` validates one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DelayLine",
    "FirFilter",
    "PathMatrix",
    "as_frame",
    "dot",
    "filter_batch",
    "taps_dot",
]


def taps_dot(a: np.ndarray, b: np.ndarray) -> float:
    """Pinned inner-product reduction: ``np.dot`` on contiguous operands.

    Both operands must already be C-contiguous 1-D float64 arrays of equal
    length; callers are responsible for materializing windows contiguously.
    np.dot on strided views can take a different BLAS path and round
    differently, which would break the bit-equivalence contracts.
    """
    return np.dot(a, b)


class DelayLine:
    """Fixed-length newest-first sample history.

    ``data[0]`` is the most recent sample, ``data[i]`` the sample i steps
    ago. A fresh line is all zeros and its length never changes. Stored as a
    physical shift so ``data`` is always contiguous in newest-first order,
    ready for :func:`taps_dot`.
    """

    __slots__ = ("data",)

    def __init__(self, length: int):
        if not isinstance(length, (int, np.integer)) or length < 1:
            raise ValueError(f"delay line length must be a positive integer, got {length!r}")
        self.data = np.zeros(int(length), dtype=np.float64)

    def __len__(self) -> int:
        return self.data.shape[0]

    def push(self, sample: float) -> None:
        """Shift the line one step and insert ``sample`` at index 0."""
        if not np.isfinite(sample):
            raise ValueError(f"delay line input must be finite, got {sample!r}")
        d = self.data
        d[1:] = d[:-1]
        d[0] = sample

    def copy(self) -> "DelayLine":
        out = DelayLine(len(self))
        out.data[:] = self.data
        return out


@dataclass(frozen=True)
class FirFilter:
    """One FIR impulse response; ``taps[i]`` is the gain at lag i."""

    taps: np.ndarray

    def __post_init__(self):
        taps = np.ascontiguousarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.shape[0] < 1:
            raise ValueError("FIR taps must be a non-empty 1-D vector")
        if not np.all(np.isfinite(taps)):
            raise ValueError("FIR taps must be finite")
        object.__setattr__(self, "taps", taps)

    def __len__(self) -> int:
        return self.taps.shape[0]


@dataclass(frozen=True)
class PathMatrix:
    """Grid of equal-length impulse responses, indexed ``[mic, source]``.

    ``data`` has shape (num_mics, num_sources, taps_len). Houses both true
    acoustic paths and their estimates.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(
                f"path matrix must have shape (num_mics, num_sources, taps_len), got {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("path matrix taps must be finite")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_filters(cls, grid: list[list[FirFilter]]) -> "PathMatrix":
        """Build from an M×K nested list of equal-length :class:`FirFilter`."""
        lengths = {len(f) for row in grid for f in row}
        if len(lengths) != 1:
            raise ValueError(f"all path filters must share one tap length, got {sorted(lengths)}")
        return cls(np.stack([np.stack([f.taps for f in row]) for row in grid]))

    @property
    def num_mics(self) -> int:
        return self.data.shape[0]

    @property
    def num_sources(self) -> int:
        return self.data.shape[1]

    @property
    def taps_len(self) -> int:
        return self.data.shape[2]

    def path(self, mic: int, source: int) -> FirFilter:
        return FirFilter(self.data[mic, source])

    def source_column(self, source: int) -> np.ndarray:
        """Contiguous (num_mics, taps_len) block of paths from one source."""
        return np.ascontiguousarray(self.data[:, source, :])


def as_frame(values, n_channels: int) -> np.ndarray:
    """Validate a per-channel sample vector and return it as float64."""
    frame = np.asarray(values, dtype=np.float64)
    if frame.ndim != 1 or frame.shape[0] != n_channels:
        raise ValueError(f"frame must be a vector of {n_channels} channel values, got shape {frame.shape}")
    return frame


def dot(line: DelayLine, fir: FirFilter) -> float:
    """Inner product of a delay line with FIR taps, newest sample first."""
    if len(line) != len(fir):
        raise ValueError(f"taps length {len(fir)} does not match delay line length {len(line)}")
    return taps_dot(line.data, fir.taps)


def filter_batch(fir: FirFilter, x) -> np.ndarray:
    """Causal FIR filtering with zero initial state, output length == input length.

    out[n] = sum_i taps[i] * x[n-i], with x[n-i] = 0 for n-i < 0. Each output
    sample is one :func:`taps_dot` over a newest-first window, so streaming a
    signal through a DelayLine and calling :func:`dot` per sample yields
    bit-identical output.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"filter input must be a 1-D vector, got shape {x.shape}")
    if x.size and not np.all(np.isfinite(x)):
        raise ValueError("filter input must be finite")
    taps = fir.taps
    L = taps.shape[0]
    padded = np.zeros(x.shape[0] + L - 1, dtype=np.float64)
    if x.shape[0]:
        padded[L - 1 :] = x
    out = np.empty(x.shape[0], dtype=np.float64)
    for n in range(x.shape[0]):
        window = np.ascontiguousarray(padded[n : n + L][::-1])
        out[n] = taps_dot(window, taps)
    return out
