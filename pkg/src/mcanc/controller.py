"""Multichannel filtered-reference LMS control engine.

One :class:`ControlUnit` adapts a single FIR control filter from one
reference channel to one speaker. A :class:`McFxLmsController` owns a grid of
units (one per reference for the collocated structure, one per
speaker/reference pair for the fully connected structure) plus the true
secondary-path matrix used for physical propagation, and :func:`run` drives
the sample-synchronous cancellation loop.

The per-sample update ordering inside a unit is pinned:

1. push the reference sample into both reference histories;
2. update the weights with the previous error frame against the stored
   filtered-reference history (the error reaches the controller one sample
   late, mirroring real-time causality);
3. emit the unit output from the updated weights;
4. push the output into the output history;
5. form the unit's share of the anti-noise at each mic;
6. filter the reference through the secondary-path estimate and prepend the
   result to the filtered-reference history.

Sign convention: the loop computes e = d - y' and the update adds
mu * sum_m e_m * (filtered reference); negating both the true and estimated
secondary paths reproduces the mirrored convention (e = d + y', subtractive
update) exactly.

All cross-channel and cross-unit sums run in ascending index order (m
ascending inside a unit; units in speaker-major order) and every tap-space
reduction is a single ``taps_dot`` on contiguous buffers, so two runs on
equal inputs are bit-identical and the naive verification engine can
reproduce them exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import DelayLine, PathMatrix, as_frame, taps_dot
from .signals import SignalMatrix

__all__ = [
    "COLLOCATED",
    "FULLY_CONNECTED",
    "ControlUnit",
    "ControllerInfo",
    "DivergenceError",
    "McFxLmsController",
    "RunResult",
    "run",
    "write_coefficients_csv",
]

COLLOCATED = "collocated"
FULLY_CONNECTED = "fully_connected"


class DivergenceError(RuntimeError):
    """Adaptive weights turned non-finite; the step size is too large.

    ``sample_index`` is the loop index at which the check tripped;
    ``error_prefix`` (when raised from :func:`run`) holds the finite error
    columns accumulated before the failure.
    """

    def __init__(self, message: str, sample_index: int | None = None, error_prefix=None):
        super().__init__(message)
        self.sample_index = sample_index
        self.error_prefix = error_prefix


class ControlUnit:
    """One adaptive control filter with its state buffers.

    Buffers: ``x_hist`` (reference history feeding the control filter,
    length ``filter_len``), ``xs_hist`` (reference history feeding the
    secondary-path estimate, length ``path_len``), ``y_hist`` (output history
    for secondary propagation, length ``path_len``) and ``fx_hist``
    (filtered-reference history, shape (num_mics, filter_len), column 0
    newest). ``sec_estimate`` is the (num_mics, path_len) block of estimated
    secondary paths from this unit's speaker.
    """

    def __init__(self, sec_estimate: np.ndarray, filter_len: int, step_size: float):
        sec_estimate = np.ascontiguousarray(sec_estimate, dtype=np.float64)
        if sec_estimate.ndim != 2:
            raise ValueError(
                f"secondary-path estimate block must be (num_mics, path_len), got {sec_estimate.shape}"
            )
        if not isinstance(filter_len, (int, np.integer)) or filter_len < 1:
            raise ValueError(f"filter length must be a positive integer, got {filter_len!r}")
        if not (step_size >= 0) or not np.isfinite(step_size):
            raise ValueError(f"step size must be finite and non-negative, got {step_size!r}")
        self.sec_estimate = sec_estimate
        self.num_mics = sec_estimate.shape[0]
        self.path_len = sec_estimate.shape[1]
        self.filter_len = int(filter_len)
        self.step_size = float(step_size)
        self.weights = np.zeros(self.filter_len, dtype=np.float64)
        self.x_hist = DelayLine(self.filter_len)
        self.xs_hist = DelayLine(self.path_len)
        self.y_hist = DelayLine(self.path_len)
        self.fx_hist = np.zeros((self.num_mics, self.filter_len), dtype=np.float64)
        self.steps_done = 0

    def step(self, x_in: float, e_prev: np.ndarray) -> np.ndarray:
        """Advance one sample; returns this unit's anti-noise share per mic.

        The returned contribution uses the secondary-path *estimate*; when
        the true path differs, the controller recomputes the physical share
        from ``y_hist`` with the true path block.
        """
        w = self.weights
        fx = self.fx_hist
        self.x_hist.push(x_in)
        self.xs_hist.push(x_in)

        acc = e_prev[0] * fx[0]
        for m in range(1, self.num_mics):
            acc += e_prev[m] * fx[m]
        w += self.step_size * acc
        if not np.all(np.isfinite(w)):
            raise DivergenceError(
                f"control weights turned non-finite at unit step {self.steps_done} "
                f"(step size {self.step_size} too large)",
                sample_index=self.steps_done,
            )

        y = taps_dot(self.x_hist.data, w)
        if not np.isfinite(y):
            raise DivergenceError(
                f"control output overflowed at unit step {self.steps_done} "
                f"(step size {self.step_size} too large)",
                sample_index=self.steps_done,
            )
        self.y_hist.push(y)

        contribution = np.empty(self.num_mics, dtype=np.float64)
        for m in range(self.num_mics):
            contribution[m] = taps_dot(self.y_hist.data, self.sec_estimate[m])

        fx_new = np.empty(self.num_mics, dtype=np.float64)
        for m in range(self.num_mics):
            fx_new[m] = taps_dot(self.xs_hist.data, self.sec_estimate[m])
        fx[:, 1:] = fx[:, :-1]
        fx[:, 0] = fx_new

        self.steps_done += 1
        return contribution


@dataclass(frozen=True)
class ControllerInfo:
    """Queryable structure and dimension summary of a controller."""

    structure: str
    num_refs: int
    num_speakers: int
    num_mics: int
    filter_len: int
    path_len: int
    num_units: int
    step_size: float


class McFxLmsController:
    """Grid of control units plus the true secondary-path matrix.

    ``collocated`` requires one speaker per reference and binds unit j to
    speaker j; ``fully_connected`` builds one unit per (speaker, reference)
    pair. ``plant`` defaults to the estimate (perfect-model assumption); pass
    a different matrix to simulate estimation mismatch, in which case the
    physical propagation uses the true paths while the units keep using the
    estimate for their filtered references.
    """

    def __init__(
        self,
        topology: str,
        num_refs: int,
        num_speakers: int,
        num_mics: int,
        filter_len: int,
        step_size: float,
        sec_estimate: PathMatrix,
        plant: PathMatrix | None = None,
    ):
        if topology not in (COLLOCATED, FULLY_CONNECTED):
            raise ValueError(
                f"topology must be {COLLOCATED!r} or {FULLY_CONNECTED!r}, got {topology!r}"
            )
        if topology == COLLOCATED and num_speakers != num_refs:
            raise ValueError(
                f"collocated control requires one speaker per reference, "
                f"got {num_speakers} speakers for {num_refs} references"
            )
        plant = sec_estimate if plant is None else plant
        for name, pm in (("sec_estimate", sec_estimate), ("plant", plant)):
            if pm.num_mics != num_mics or pm.num_sources != num_speakers:
                raise ValueError(
                    f"{name} must be a {num_mics}x{num_speakers} path grid, "
                    f"got {pm.num_mics}x{pm.num_sources}"
                )
        if plant.taps_len != sec_estimate.taps_len:
            raise ValueError(
                f"plant tap length {plant.taps_len} differs from estimate "
                f"tap length {sec_estimate.taps_len}"
            )
        self.topology = topology
        self.num_refs = int(num_refs)
        self.num_speakers = int(num_speakers)
        self.num_mics = int(num_mics)
        self.filter_len = int(filter_len)
        self.step_size = float(step_size)
        self.sec_estimate = sec_estimate
        self.plant = plant
        self.plant_is_estimate = plant is sec_estimate or np.array_equal(
            plant.data, sec_estimate.data
        )
        self._plant_blocks = [plant.source_column(k) for k in range(self.num_speakers)]
        if topology == COLLOCATED:
            self.units = [
                [ControlUnit(sec_estimate.source_column(j), filter_len, step_size)]
                for j in range(self.num_refs)
            ]
        else:
            self.units = [
                [
                    ControlUnit(sec_estimate.source_column(k), filter_len, step_size)
                    for _ in range(self.num_refs)
                ]
                for k in range(self.num_speakers)
            ]

    @property
    def info(self) -> ControllerInfo:
        n_units = sum(len(row) for row in self.units)
        return ControllerInfo(
            structure=self.topology,
            num_refs=self.num_refs,
            num_speakers=self.num_speakers,
            num_mics=self.num_mics,
            filter_len=self.filter_len,
            path_len=self.sec_estimate.taps_len,
            num_units=n_units,
            step_size=self.step_size,
        )

    def step(self, x: np.ndarray, e_prev: np.ndarray) -> np.ndarray:
        """One loop sample: returns the total anti-noise frame y'(n).

        Unit contributions are reduced in speaker-major ascending order.
        """
        x = as_frame(x, self.num_refs)
        e_prev = as_frame(e_prev, self.num_mics)
        y_prime = np.zeros(self.num_mics, dtype=np.float64)
        if self.topology == COLLOCATED:
            for j in range(self.num_refs):
                unit = self.units[j][0]
                contribution = unit.step(x[j], e_prev)
                if not self.plant_is_estimate:
                    contribution = self._plant_share(unit, j)
                y_prime += contribution
        else:
            for k in range(self.num_speakers):
                for j in range(self.num_refs):
                    unit = self.units[k][j]
                    contribution = unit.step(x[j], e_prev)
                    if not self.plant_is_estimate:
                        contribution = self._plant_share(unit, k)
                    y_prime += contribution
        return y_prime

    def _plant_share(self, unit: ControlUnit, speaker: int) -> np.ndarray:
        block = self._plant_blocks[speaker]
        out = np.empty(self.num_mics, dtype=np.float64)
        for m in range(self.num_mics):
            out[m] = taps_dot(unit.y_hist.data, block[m])
        return out

    def coefficients(self) -> np.ndarray:
        """Current control-filter weights, copied.

        Collocated: (filter_len, num_refs). Fully connected:
        (filter_len, num_speakers, num_refs).
        """
        if self.topology == COLLOCATED:
            out = np.empty((self.filter_len, self.num_refs), dtype=np.float64)
            for j in range(self.num_refs):
                out[:, j] = self.units[j][0].weights
        else:
            out = np.empty((self.filter_len, self.num_speakers, self.num_refs), dtype=np.float64)
            for k in range(self.num_speakers):
                for j in range(self.num_refs):
                    out[:, k, j] = self.units[k][j].weights
        return out


@dataclass
class RunResult:
    """Output of one cancellation loop: residual errors and final weights."""

    error: np.ndarray
    coefficients: np.ndarray
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)


def run(
    controller: McFxLmsController,
    reference: SignalMatrix,
    disturbance: SignalMatrix,
    snapshot_stride: int = 0,
) -> RunResult:
    """Drive the cancellation loop over a whole scenario.

    Per sample: y'(n) = step(x(n), e(n-1)) with e(-1) = 0, then
    e(n) = d(n) - y'(n). Weight snapshots are recorded after every
    ``snapshot_stride``-th sample when the stride is positive. On divergence
    the raised error carries the finite error-column prefix.
    """
    if reference.channels != controller.num_refs:
        raise ValueError(
            f"reference has {reference.channels} channels, controller expects {controller.num_refs}"
        )
    if disturbance.channels != controller.num_mics:
        raise ValueError(
            f"disturbance has {disturbance.channels} channels, controller expects {controller.num_mics}"
        )
    if reference.samples_per_channel != disturbance.samples_per_channel:
        raise ValueError(
            f"reference ({reference.samples_per_channel} samples) and disturbance "
            f"({disturbance.samples_per_channel} samples) must have equal length"
        )
    if snapshot_stride < 0:
        raise ValueError(f"snapshot stride must be >= 0, got {snapshot_stride}")

    ref = reference.data
    dist = disturbance.data
    total = ref.shape[1]
    error = np.empty((controller.num_mics, total), dtype=np.float64)
    e_prev = np.zeros(controller.num_mics, dtype=np.float64)
    snapshots: list[tuple[int, np.ndarray]] = []
    # overflow on the way to divergence is anticipated and turned into a
    # typed error by the per-step weight check, so silence numpy's warning
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(total):
            try:
                y_prime = controller.step(ref[:, n], e_prev)
            except DivergenceError as exc:
                # the error columns themselves may have overflowed just
                # before the weight check tripped; keep only the finite part
                prefix = error[:, :n]
                finite_cols = np.all(np.isfinite(prefix), axis=0)
                cut = n if bool(finite_cols.all()) else int(np.argmin(finite_cols))
                raise DivergenceError(
                    f"diverged at sample {n}: {exc}",
                    sample_index=n,
                    error_prefix=prefix[:, :cut].copy(),
                ) from exc
            error[:, n] = dist[:, n] - y_prime
            e_prev = error[:, n]
            if snapshot_stride > 0 and n % snapshot_stride == 0:
                snapshots.append((n, controller.coefficients()))
    return RunResult(error=error, coefficients=controller.coefficients(), snapshots=snapshots)


def write_coefficients_csv(coefficients: np.ndarray, file_path) -> None:
    """Write a coefficient tensor as CSV, one row per tap.

    Collocated (2-D) input gets columns ``j1..jJ``; fully connected (3-D)
    input gets speaker-major columns ``k1_j1, k1_j2, ...``.
    """
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if coefficients.ndim == 2:
        headers = [f"j{j + 1}" for j in range(coefficients.shape[1])]
        columns = [coefficients[:, j] for j in range(coefficients.shape[1])]
    elif coefficients.ndim == 3:
        headers = [
            f"k{k + 1}_j{j + 1}"
            for k in range(coefficients.shape[1])
            for j in range(coefficients.shape[2])
        ]
        columns = [
            coefficients[:, k, j]
            for k in range(coefficients.shape[1])
            for j in range(coefficients.shape[2])
        ]
    else:
        raise ValueError(f"coefficient tensor must be 2-D or 3-D, got shape {coefficients.shape}")
    lines = [",".join(headers)]
    for t in range(coefficients.shape[0]):
        lines.append(",".join(repr(float(col[t])) for col in columns))
    with open(file_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
