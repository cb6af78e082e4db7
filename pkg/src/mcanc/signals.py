"""Deterministic scenario inputs: seeded noise, references, paths, disturbances.

All randomness is pinned to one portable pipeline so fixtures are bit-stable
across runs and platforms:

* uniform bits come from the Philox 4x64 counter-based generator
  (``np.random.Philox(key=seed)``, raw stream), one 64-bit word per sample,
  so a length-1 draw is always the prefix of a longer draw from the same
  seed;
* each word maps to a double in (0, 1) via ``(word >> 11 + 0.5) * 2**-53``;
* Gaussian samples come from the inverse normal CDF, evaluated with the
  AS 241 rational approximations (central and intermediate branches) and a
  Newton-refined asymptotic expansion in the far tail (p < e^-25).

Per-path seeds are derived additively from a base seed:
``seed(mic, source) = base + mic * num_sources + source`` (mod 2^64).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dsp import FirFilter, PathMatrix, filter_batch

__all__ = [
    "PathSynthSpec",
    "SignalMatrix",
    "make_disturbance",
    "make_reference",
    "normal_inverse_cdf",
    "path_seed",
    "read_path_csv",
    "synth_path",
    "white_gaussian",
    "write_path_csv",
]

_U64_MAX = 2**64 - 1

# AS 241 (PPND16) rational-approximation coefficients, central region |p-0.5| <= 0.425.
_CENTRAL_NUM = (
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
)
_CENTRAL_DEN = (
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
)
# Intermediate tail, r = sqrt(-log(min(p, 1-p))) in (sqrt(-log(0.075)), 5].
_MID_NUM = (
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
)
_MID_DEN = (
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)

_LOG_2PI = math.log(2.0 * math.pi)
_SQRT_2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _rational(num, den, x):
    p = np.full_like(x, num[-1])
    for c in reversed(num[:-1]):
        p = p * x + c
    q = np.full_like(x, den[-1])
    for c in reversed(den[:-1]):
        q = q * x + c
    return p / q


def _far_tail_quantile(p: float) -> float:
    """|z| for left-tail probability p < e^-25, Newton-refined asymptotic."""
    big = -2.0 * math.log(p)
    x = math.sqrt(big)
    for _ in range(2):
        x = math.sqrt(big - _LOG_2PI - 2.0 * math.log(x))
    for _ in range(3):
        f = 0.5 * math.erfc(x / _SQRT_2) - p
        pdf = math.exp(-0.5 * x * x) / _SQRT_2PI
        x = x + f / pdf
    return x


def normal_inverse_cdf(p) -> np.ndarray:
    """Standard normal quantile function for p strictly inside (0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    if p.size and (np.min(p) <= 0.0 or np.max(p) >= 1.0):
        raise ValueError("quantile argument must lie strictly in (0, 1)")
    q = p - 0.5
    out = np.empty_like(p)

    central = np.abs(q) <= 0.425
    r = 0.180625 - q[central] * q[central]
    out[central] = q[central] * _rational(_CENTRAL_NUM, _CENTRAL_DEN, r)

    tails = ~central
    if np.any(tails):
        pt = p[tails]
        lower = q[tails] < 0.0
        r = np.sqrt(-np.log(np.where(lower, pt, 1.0 - pt)))
        mag = np.empty_like(r)
        mid = r <= 5.0
        mag[mid] = _rational(_MID_NUM, _MID_DEN, r[mid] - 1.6)
        far = ~mid
        if np.any(far):
            pfar = np.where(lower, pt, 1.0 - pt)[far]
            mag[far] = [_far_tail_quantile(v) for v in pfar]
        out[tails] = np.where(lower, -mag, mag)
    return out


def white_gaussian(n: int, seed: int) -> np.ndarray:
    """n i.i.d. standard-normal samples, a pure and prefix-stable function of seed."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"sample count must be a positive integer, got {n!r}")
    if not isinstance(seed, (int, np.integer)) or not (0 <= seed <= _U64_MAX):
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    raw = np.random.Philox(key=int(seed)).random_raw(int(n))
    uniforms = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return normal_inverse_cdf(uniforms)


def path_seed(base: int, mic: int, source: int, num_sources: int) -> int:
    """Pinned per-path seed derivation from a base seed."""
    return (base + mic * num_sources + source) % 2**64


@dataclass(frozen=True)
class SignalMatrix:
    """Multichannel signal block: ``data[channel, sample]`` plus its sample rate."""

    data: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"signal matrix must be (channels, samples), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("signal matrix must be finite")
        if not (self.sample_rate_hz > 0):
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz!r}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def samples_per_channel(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class PathSynthSpec:
    """Synthetic impulse response recipe: delayed, exponentially decaying noise."""

    length: int
    delay: int
    decay: float
    seed: int

    def __post_init__(self):
        if not isinstance(self.length, (int, np.integer)) or self.length < 1:
            raise ValueError(f"path length must be a positive integer, got {self.length!r}")
        if not isinstance(self.delay, (int, np.integer)) or self.delay < 0:
            raise ValueError(f"path delay must be a non-negative integer, got {self.delay!r}")
        if self.delay >= self.length:
            raise ValueError(f"path delay {self.delay} must be smaller than length {self.length}")
        if not (0.0 < self.decay < 1.0):
            raise ValueError(f"path decay must lie in (0, 1), got {self.decay!r}")
        if not isinstance(self.seed, (int, np.integer)) or not (0 <= self.seed <= _U64_MAX):
            raise ValueError(f"path seed must be an unsigned 64-bit integer, got {self.seed!r}")


def synth_path(spec: PathSynthSpec) -> FirFilter:
    """Room-impulse surrogate: seeded noise under an exponential envelope.

    The first ``delay`` taps are exactly zero; the rest are standard-normal
    draws scaled by ``decay**(i - delay)``; the result is normalized to unit
    peak magnitude.
    """
    taps = np.zeros(spec.length, dtype=np.float64)
    active = spec.length - spec.delay
    gains = white_gaussian(active, spec.seed)
    envelope = np.power(spec.decay, np.arange(active, dtype=np.float64))
    taps[spec.delay :] = gains * envelope
    return FirFilter(taps / np.max(np.abs(taps)))


def make_reference(
    noise,
    bandpass: FirFilter,
    num_refs: int,
    mode: str,
    sample_rate_hz: float,
    seeds=None,
) -> SignalMatrix:
    """Band-limited reference signals for ``num_refs`` channels.

    ``replicate`` filters the supplied noise once and copies the row to every
    channel; ``independent`` draws one seeded noise vector per channel (the
    supplied noise only fixes the length) and filters each.
    """
    noise = np.asarray(noise, dtype=np.float64)
    if not isinstance(num_refs, (int, np.integer)) or num_refs < 1:
        raise ValueError(f"reference channel count must be a positive integer, got {num_refs!r}")
    if mode == "replicate":
        row = filter_batch(bandpass, noise)
        data = np.tile(row, (int(num_refs), 1))
    elif mode == "independent":
        if seeds is None or len(seeds) != num_refs:
            got = 0 if seeds is None else len(seeds)
            raise ValueError(f"independent mode needs {num_refs} seeds, got {got}")
        data = np.stack(
            [filter_batch(bandpass, white_gaussian(noise.shape[0], s)) for s in seeds]
        )
    else:
        raise ValueError(f"reference mode must be 'replicate' or 'independent', got {mode!r}")
    return SignalMatrix(data, sample_rate_hz)


def make_disturbance(primary: PathMatrix, reference: SignalMatrix) -> SignalMatrix:
    """Propagate references through the primary paths: d_m = sum_j p_mj * x_j."""
    if primary.num_sources != reference.channels:
        raise ValueError(
            f"primary path matrix has {primary.num_sources} source columns but the "
            f"reference has {reference.channels} channels"
        )
    out = np.zeros((primary.num_mics, reference.samples_per_channel), dtype=np.float64)
    for m in range(primary.num_mics):
        for j in range(primary.num_sources):
            out[m] += filter_batch(primary.path(m, j), reference.data[j])
    return SignalMatrix(out, reference.sample_rate_hz)


def write_path_csv(paths: PathMatrix, file_path) -> None:
    """Write a path grid as CSV: header ``tap,m1_k1,...``, one row per tap."""
    m_count, k_count = paths.num_mics, paths.num_sources
    header = "tap," + ",".join(
        f"m{m + 1}_k{k + 1}" for m in range(m_count) for k in range(k_count)
    )
    lines = [header]
    for t in range(paths.taps_len):
        vals = (
            repr(float(paths.data[m, k, t]))
            for m in range(m_count)
            for k in range(k_count)
        )
        lines.append(f"{t}," + ",".join(vals))
    with open(file_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_path_csv(file_path) -> PathMatrix:
    """Read a path grid written by :func:`write_path_csv`."""
    with open(file_path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"path CSV {file_path} is empty")
    labels = lines[0].split(",")
    if labels[0] != "tap" or len(labels) < 2:
        raise ValueError(f"path CSV {file_path} must start with a 'tap,m1_k1,...' header")
    pairs = []
    for label in labels[1:]:
        try:
            m_part, k_part = label.split("_")
            pairs.append((int(m_part.removeprefix("m")), int(k_part.removeprefix("k"))))
        except ValueError as exc:
            raise ValueError(f"path CSV {file_path}: bad column label {label!r}") from exc
    m_count = max(p[0] for p in pairs)
    k_count = max(p[1] for p in pairs)
    expected = [(m + 1, k + 1) for m in range(m_count) for k in range(k_count)]
    if pairs != expected:
        raise ValueError(f"path CSV {file_path}: columns must be m-major over k, got {labels[1:]}")
    data = np.empty((m_count, k_count, len(lines) - 1), dtype=np.float64)
    for t, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != len(labels):
            raise ValueError(f"path CSV {file_path}: row {t} has {len(cells)} cells, expected {len(labels)}")
        if int(cells[0]) != t:
            raise ValueError(f"path CSV {file_path}: row {t} has tap index {cells[0]}")
        for idx, (m, k) in enumerate(pairs):
            data[m - 1, k - 1, t] = float(cells[idx + 1])
    return PathMatrix(data)
