"""Naive reference engine for certifying the optimized controller.

Test support only. Every convolution is recomputed per sample from the full
signal history, straight from the defining sums, with no delay lines, no
shared buffers and no code shared with the streaming engine beyond
``np.dot``. Costs O(T * filter_len * path_len * units * mics) and is meant
for short certification scenarios (T <= 1000).

To stay bit-identical with the streaming engine, every tap-space reduction
is a single ``np.dot`` over a freshly materialized contiguous newest-first
window, cross-mic sums accumulate in ascending mic order, and units reduce
in speaker-major order.
"""

from __future__ import annotations

import numpy as np

from .controller import DivergenceError

__all__ = ["naive_run"]


def _window(series: np.ndarray, upto: int, length: int) -> np.ndarray:
    """Newest-first window [series[upto], series[upto-1], ...], zero-padded."""
    out = np.zeros(length, dtype=np.float64)
    if upto >= 0:
        lo = max(0, upto - length + 1)
        chunk = series[lo : upto + 1]
        out[: chunk.shape[0]] = chunk[::-1]
    return out


def naive_run(
    topology: str,
    num_refs: int,
    num_speakers: int,
    num_mics: int,
    filter_len: int,
    step_size: float,
    sec_estimate: np.ndarray,
    plant: np.ndarray,
    reference: np.ndarray,
    disturbance: np.ndarray,
) -> np.ndarray:
    """Run the cancellation loop literally from the defining equations.

    ``sec_estimate`` and ``plant`` are (num_mics, num_speakers, path_len)
    arrays, ``reference`` is (num_refs, T), ``disturbance`` (num_mics, T).
    Returns the (num_mics, T) error matrix; raises
    :class:`~mcanc.controller.DivergenceError` if any weight vector turns
    non-finite.
    """
    sec_estimate = np.asarray(sec_estimate, dtype=np.float64)
    plant = np.asarray(plant, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    disturbance = np.asarray(disturbance, dtype=np.float64)
    path_len = sec_estimate.shape[2]
    total = reference.shape[1]

    if topology == "collocated":
        if num_speakers != num_refs:
            raise ValueError("collocated control requires one speaker per reference")
        pairs = [(j, j) for j in range(num_refs)]
    elif topology == "fully_connected":
        pairs = [(k, j) for k in range(num_speakers) for j in range(num_refs)]
    else:
        raise ValueError(f"unknown topology {topology!r}")

    est_rows = {
        (m, k): np.ascontiguousarray(sec_estimate[m, k])
        for m in range(num_mics)
        for k in range(num_speakers)
    }
    plant_rows = {
        (m, k): np.ascontiguousarray(plant[m, k])
        for m in range(num_mics)
        for k in range(num_speakers)
    }

    weights = {pair: np.zeros(filter_len, dtype=np.float64) for pair in pairs}
    outputs = {pair: np.zeros(total, dtype=np.float64) for pair in pairs}
    error = np.empty((num_mics, total), dtype=np.float64)

    # overflow on the way to divergence is anticipated and detected below
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(total):
            e_prev = error[:, n - 1] if n > 0 else np.zeros(num_mics, dtype=np.float64)
            y_prime = np.zeros(num_mics, dtype=np.float64)
            for k, j in pairs:
                w = weights[(k, j)]

                rows = np.zeros((num_mics, filter_len), dtype=np.float64)
                for lag in range(filter_len):
                    t = n - 1 - lag
                    if t < 0:
                        break
                    x_win = _window(reference[j], t, path_len)
                    for m in range(num_mics):
                        rows[m, lag] = np.dot(x_win, est_rows[(m, k)])
                acc = e_prev[0] * rows[0]
                for m in range(1, num_mics):
                    acc += e_prev[m] * rows[m]
                w += step_size * acc
                if not np.all(np.isfinite(w)):
                    raise DivergenceError(
                        f"naive engine diverged at sample {n}", sample_index=n
                    )

                y = np.dot(_window(reference[j], n, filter_len), w)
                if not np.isfinite(y):
                    raise DivergenceError(
                        f"naive engine output overflowed at sample {n}", sample_index=n
                    )
                outputs[(k, j)][n] = y

                for m in range(num_mics):
                    y_prime[m] += np.dot(
                        _window(outputs[(k, j)], n, path_len), plant_rows[(m, k)]
                    )
            error[:, n] = disturbance[:, n] - y_prime
    return error
