"""Scenario assembly: config parsing, orchestration, metrics, result export.

A scenario is a JSON document mirroring :class:`ScenarioConfig` field for
field (snake_case keys, unknown keys rejected). :func:`run_scenario` is a
pure function of the config: signals and paths are generated from the
config's seeds, the cancellation loop runs, and metrics are computed, so
equal configs export byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .controller import (
    COLLOCATED,
    FULLY_CONNECTED,
    DivergenceError,
    McFxLmsController,
    run,
    write_coefficients_csv,
)
from .dsp import PathMatrix
from .firdesign import BandSpec, design_bandpass
from .signals import (
    PathSynthSpec,
    SignalMatrix,
    make_disturbance,
    make_reference,
    path_seed,
    read_path_csv,
    synth_path,
    white_gaussian,
)

__all__ = [
    "MetricsReport",
    "PathSourceConfig",
    "EstimateSourceConfig",
    "ScenarioConfig",
    "SimResult",
    "compute_metrics",
    "export_result",
    "load_config",
    "read_signal_csv",
    "run_scenario",
]

_U64 = 2**64


def _check_keys(raw: dict, allowed: set[str], context: str) -> None:
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"unknown {context} keys: {sorted(unknown)}")


@dataclass(frozen=True)
class PathSourceConfig:
    """Where a path grid comes from: seeded synthesis or a CSV file.

    ``cross_gain`` scales synthetic paths whose mic and source indices
    differ; values below 1 model the collocated-rig dominance of each
    speaker at its own mic, which is what keeps the path matrix well
    conditioned in-band.
    """

    source: str
    wiring: str = "full"
    delay: int | None = None
    decay: float | None = None
    seed: int | None = None
    cross_gain: float = 1.0
    file: str | None = None

    def validate(self, context: str) -> None:
        if self.source == "synthetic":
            if self.delay is None or self.decay is None or self.seed is None:
                raise ValueError(f"{context}: synthetic paths need delay, decay and seed")
            if self.file is not None:
                raise ValueError(f"{context}: synthetic paths take no file")
            if self.wiring not in ("full", "diagonal"):
                raise ValueError(f"{context}: wiring must be 'full' or 'diagonal', got {self.wiring!r}")
            if not (self.cross_gain >= 0) or not math.isfinite(self.cross_gain):
                raise ValueError(f"{context}: cross_gain must be finite and >= 0, got {self.cross_gain!r}")
        elif self.source == "csv":
            if self.file is None:
                raise ValueError(f"{context}: csv paths need a file")
            if self.delay is not None or self.decay is not None or self.seed is not None:
                raise ValueError(f"{context}: csv paths take no synthesis fields")
            if self.wiring != "full" or self.cross_gain != 1.0:
                raise ValueError(f"{context}: csv paths fix their own wiring and gains")
        else:
            raise ValueError(f"{context}: source must be 'synthetic' or 'csv', got {self.source!r}")

    def to_dict(self) -> dict:
        out = {"source": self.source}
        if self.source == "synthetic":
            out.update(
                wiring=self.wiring,
                delay=self.delay,
                decay=self.decay,
                seed=self.seed,
                cross_gain=self.cross_gain,
            )
        else:
            out["file"] = self.file
        return out

    @classmethod
    def from_dict(cls, raw: dict, context: str) -> "PathSourceConfig":
        _check_keys(raw, {"source", "wiring", "delay", "decay", "seed", "cross_gain", "file"}, context)
        cfg = cls(**raw)
        cfg.validate(context)
        return cfg


@dataclass(frozen=True)
class EstimateSourceConfig:
    """Secondary-path estimate source: the plant itself, or a CSV file."""

    source: str
    file: str | None = None

    def validate(self) -> None:
        if self.source == "same_as_plant":
            if self.file is not None:
                raise ValueError("sec_estimate: same_as_plant takes no file")
        elif self.source == "csv":
            if self.file is None:
                raise ValueError("sec_estimate: csv source needs a file")
        else:
            raise ValueError(
                f"sec_estimate: source must be 'same_as_plant' or 'csv', got {self.source!r}"
            )

    def to_dict(self) -> dict:
        out = {"source": self.source}
        if self.source == "csv":
            out["file"] = self.file
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "EstimateSourceConfig":
        _check_keys(raw, {"source", "file"}, "sec_estimate")
        cfg = cls(**raw)
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class ScenarioConfig:
    """Declarative experiment description; all randomness is in the seeds."""

    duration_s: float
    num_refs: int
    num_speakers: int
    num_mics: int
    filter_len: int
    path_len: int
    step_size: float
    topology: str
    band_lo: float
    band_hi: float
    fir_order: int
    noise_seed: int
    primary_paths: PathSourceConfig
    secondary_paths: PathSourceConfig
    sec_estimate: EstimateSourceConfig = EstimateSourceConfig("same_as_plant")
    sample_rate_hz: float = 16000.0
    reference_mode: str = "replicate"
    snapshot_stride: int = 0
    metrics_block_s: float = 0.1

    def validate(self) -> None:
        for name in ("num_refs", "num_speakers", "num_mics", "filter_len", "path_len", "fir_order"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not (self.sample_rate_hz > 0):
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz!r}")
        if not (self.duration_s > 0) or self.duration_s * self.sample_rate_hz < 1.0:
            raise ValueError(
                f"duration_s must cover at least one sample period, got {self.duration_s!r}"
            )
        if not (self.step_size >= 0) or not math.isfinite(self.step_size):
            raise ValueError(f"step_size must be finite and non-negative, got {self.step_size!r}")
        if self.topology not in (COLLOCATED, FULLY_CONNECTED):
            raise ValueError(
                f"topology must be {COLLOCATED!r} or {FULLY_CONNECTED!r}, got {self.topology!r}"
            )
        if self.topology == COLLOCATED and self.num_speakers != self.num_refs:
            raise ValueError("collocated topology requires num_speakers == num_refs")
        if not (0.0 < self.band_lo < self.band_hi < 1.0):
            raise ValueError(
                f"band edges must satisfy 0 < lo < hi < 1, got {self.band_lo}, {self.band_hi}"
            )
        if self.fir_order % 2 != 0:
            raise ValueError(f"fir_order must be even, got {self.fir_order}")
        if self.reference_mode not in ("replicate", "independent"):
            raise ValueError(
                f"reference_mode must be 'replicate' or 'independent', got {self.reference_mode!r}"
            )
        if not isinstance(self.noise_seed, int) or not (0 <= self.noise_seed < _U64):
            raise ValueError(f"noise_seed must be an unsigned 64-bit integer, got {self.noise_seed!r}")
        if not isinstance(self.snapshot_stride, int) or self.snapshot_stride < 0:
            raise ValueError(f"snapshot_stride must be a non-negative integer, got {self.snapshot_stride!r}")
        if not (self.metrics_block_s > 0):
            raise ValueError(f"metrics_block_s must be positive, got {self.metrics_block_s!r}")
        self.primary_paths.validate("primary_paths")
        self.secondary_paths.validate("secondary_paths")
        self.sec_estimate.validate()
        for source_cfg, square_dims, context in (
            (self.primary_paths, (self.num_mics, self.num_refs), "primary_paths"),
            (self.secondary_paths, (self.num_mics, self.num_speakers), "secondary_paths"),
        ):
            if source_cfg.source == "synthetic":
                if source_cfg.delay >= self.path_len:
                    raise ValueError(
                        f"{context}: delay {source_cfg.delay} must be smaller than path_len {self.path_len}"
                    )
                if source_cfg.wiring == "diagonal" and square_dims[0] != square_dims[1]:
                    raise ValueError(
                        f"{context}: diagonal wiring needs a square grid, got {square_dims}"
                    )

    @property
    def num_samples(self) -> int:
        """Sample count including the endpoint: round(duration * fs) + 1."""
        return int(round(self.duration_s * self.sample_rate_hz)) + 1

    @property
    def metrics_block_samples(self) -> int:
        return max(1, int(round(self.metrics_block_s * self.sample_rate_hz)))

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = value.to_dict() if hasattr(value, "to_dict") else value
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> "ScenarioConfig":
        _check_keys(raw, {f.name for f in fields(cls)}, "config")
        raw = dict(raw)
        for key in ("primary_paths", "secondary_paths"):
            if key in raw:
                if not isinstance(raw[key], dict):
                    raise ValueError(f"{key} must be an object")
                raw[key] = PathSourceConfig.from_dict(raw[key], key)
                raw[key] = _resolve_file(raw[key], base_dir)
        if "sec_estimate" in raw:
            if not isinstance(raw["sec_estimate"], dict):
                raise ValueError("sec_estimate must be an object")
            raw["sec_estimate"] = EstimateSourceConfig.from_dict(raw["sec_estimate"])
            raw["sec_estimate"] = _resolve_file(raw["sec_estimate"], base_dir)
        missing = {
            f.name
            for f in fields(cls)
            if f.default is dataclasses.MISSING
            and f.default_factory is dataclasses.MISSING
            and f.name not in raw
        }
        if missing:
            raise ValueError(f"missing config keys: {sorted(missing)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg


def _resolve_file(cfg, base_dir: Path | None):
    if base_dir is not None and getattr(cfg, "file", None) is not None:
        p = Path(cfg.file)
        if not p.is_absolute():
            cfg = replace(cfg, file=str((base_dir / p).resolve()))
    return cfg


def load_config(file_path) -> ScenarioConfig:
    """Load and validate a scenario config; relative CSV paths resolve
    against the config file's directory."""
    file_path = Path(file_path)
    try:
        raw = json.loads(file_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {file_path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"config {file_path} must be a JSON object")
    return ScenarioConfig.from_dict(raw, base_dir=file_path.parent)


@dataclass
class MetricsReport:
    """Residual-error summaries: blockwise MSE, tail noise reduction, cost trace."""

    block_mse: np.ndarray
    noise_reduction_db: np.ndarray
    block_len: int
    cost_stride: int
    cost_trace: np.ndarray

    def csv_lines(self) -> list[str]:
        lines = ["metric,channel,index,value"]
        mics, blocks = self.block_mse.shape
        for m in range(mics):
            for b in range(blocks):
                lines.append(f"block_mse,{m + 1},{b},{float(self.block_mse[m, b])!r}")
        for m in range(mics):
            lines.append(f"noise_reduction_db,{m + 1},,{float(self.noise_reduction_db[m])!r}")
        if self.cost_stride > 0:
            for p, value in enumerate(self.cost_trace):
                lines.append(f"cost,,{p * self.cost_stride},{float(value)!r}")
        return lines


def compute_metrics(
    error: np.ndarray,
    disturbance: np.ndarray,
    block_len: int,
    cost_stride: int = 0,
) -> MetricsReport:
    """Blockwise error MSE, final-10% noise reduction, and the cost trace.

    Noise reduction per mic is 10*log10(mean d^2 / mean e^2) over the final
    tenth of the samples; a zero-power error tail reports +inf. The trailing
    partial block is dropped from the block MSE.
    """
    error = np.asarray(error, dtype=np.float64)
    disturbance = np.asarray(disturbance, dtype=np.float64)
    if error.shape != disturbance.shape or error.ndim != 2:
        raise ValueError(
            f"error and disturbance must be matching (mics, samples) matrices, "
            f"got {error.shape} and {disturbance.shape}"
        )
    if not isinstance(block_len, (int, np.integer)) or block_len < 1:
        raise ValueError(f"block length must be a positive integer, got {block_len!r}")
    mics, total = error.shape

    num_blocks = total // block_len
    trimmed = error[:, : num_blocks * block_len]
    block_mse = np.mean(
        trimmed.reshape(mics, num_blocks, block_len) ** 2, axis=2
    ) if num_blocks else np.zeros((mics, 0))

    tail = max(1, total // 10)
    nr = np.empty(mics, dtype=np.float64)
    for m in range(mics):
        d_power = np.mean(disturbance[m, total - tail :] ** 2)
        e_power = np.mean(error[m, total - tail :] ** 2)
        nr[m] = np.inf if e_power == 0.0 else 10.0 * np.log10(d_power / e_power)

    if cost_stride > 0:
        idx = np.arange(0, total, cost_stride)
        cost = np.sum(error[:, idx] ** 2, axis=0)
    else:
        cost = np.zeros(0, dtype=np.float64)
    return MetricsReport(
        block_mse=block_mse,
        noise_reduction_db=nr,
        block_len=int(block_len),
        cost_stride=int(cost_stride),
        cost_trace=cost,
    )


@dataclass
class SimResult:
    """Everything one scenario run produced.

    On divergence ``error``/``disturbance`` hold the finite prefix,
    ``diverged`` is set and ``divergence_sample`` names the failing index.
    """

    error: np.ndarray
    disturbance: np.ndarray
    coefficients: np.ndarray
    metrics: MetricsReport | None
    config: ScenarioConfig
    wall_time_s: float
    diverged: bool = False
    divergence_sample: int | None = None
    snapshots: list = field(default_factory=list)


def _build_paths(source_cfg: PathSourceConfig, num_mics: int, num_sources: int, length: int,
                 context: str) -> PathMatrix:
    if source_cfg.source == "csv":
        paths = read_path_csv(source_cfg.file)
        if (paths.num_mics, paths.num_sources, paths.taps_len) != (num_mics, num_sources, length):
            raise ValueError(
                f"{context}: CSV grid is {paths.num_mics}x{paths.num_sources} with "
                f"{paths.taps_len} taps, expected {num_mics}x{num_sources} with {length}"
            )
        return paths
    data = np.zeros((num_mics, num_sources, length), dtype=np.float64)
    for m in range(num_mics):
        for k in range(num_sources):
            if source_cfg.wiring == "diagonal" and m != k:
                continue
            spec = PathSynthSpec(
                length=length,
                delay=source_cfg.delay,
                decay=source_cfg.decay,
                seed=path_seed(source_cfg.seed, m, k, num_sources),
            )
            taps = synth_path(spec).taps
            if m != k and source_cfg.cross_gain != 1.0:
                taps = taps * source_cfg.cross_gain
            data[m, k] = taps
    return PathMatrix(data)


def run_scenario(cfg: ScenarioConfig) -> SimResult:
    """Assemble and run one scenario; a pure function of the config."""
    cfg.validate()
    started = time.perf_counter()
    total = cfg.num_samples

    bandpass = design_bandpass(BandSpec(cfg.fir_order, cfg.band_lo, cfg.band_hi))
    noise = white_gaussian(total, cfg.noise_seed)
    ref_seeds = None
    if cfg.reference_mode == "independent":
        ref_seeds = [(cfg.noise_seed + j) % _U64 for j in range(cfg.num_refs)]
    reference = make_reference(
        noise, bandpass, cfg.num_refs, cfg.reference_mode, cfg.sample_rate_hz, seeds=ref_seeds
    )

    primary = _build_paths(cfg.primary_paths, cfg.num_mics, cfg.num_refs, cfg.path_len,
                           "primary_paths")
    disturbance = make_disturbance(primary, reference)

    plant = _build_paths(cfg.secondary_paths, cfg.num_mics, cfg.num_speakers, cfg.path_len,
                         "secondary_paths")
    if cfg.sec_estimate.source == "same_as_plant":
        estimate = plant
    else:
        estimate = read_path_csv(cfg.sec_estimate.file)
        if (estimate.num_mics, estimate.num_sources, estimate.taps_len) != (
            cfg.num_mics, cfg.num_speakers, cfg.path_len,
        ):
            raise ValueError(
                f"sec_estimate: CSV grid is {estimate.num_mics}x{estimate.num_sources} with "
                f"{estimate.taps_len} taps, expected {cfg.num_mics}x{cfg.num_speakers} "
                f"with {cfg.path_len}"
            )

    controller = McFxLmsController(
        cfg.topology,
        cfg.num_refs,
        cfg.num_speakers,
        cfg.num_mics,
        cfg.filter_len,
        cfg.step_size,
        sec_estimate=estimate,
        plant=plant,
    )

    diverged = False
    divergence_sample = None
    snapshots: list = []
    try:
        outcome = run(controller, reference, disturbance, snapshot_stride=cfg.snapshot_stride)
        error = outcome.error
        coefficients = outcome.coefficients
        snapshots = outcome.snapshots
    except DivergenceError as exc:
        diverged = True
        divergence_sample = exc.sample_index
        error = exc.error_prefix if exc.error_prefix is not None else np.zeros((cfg.num_mics, 0))
        coefficients = controller.coefficients()

    kept = error.shape[1]
    metrics = None
    if kept > 0:
        metrics = compute_metrics(
            error,
            disturbance.data[:, :kept],
            cfg.metrics_block_samples,
            cost_stride=cfg.snapshot_stride,
        )
    return SimResult(
        error=error,
        disturbance=disturbance.data[:, :kept],
        coefficients=coefficients,
        metrics=metrics,
        config=cfg,
        wall_time_s=time.perf_counter() - started,
        diverged=diverged,
        divergence_sample=divergence_sample,
        snapshots=snapshots,
    )


def _write_signal_csv(data: np.ndarray, file_path: Path) -> None:
    mics, total = data.shape
    lines = [",".join(f"mic{m + 1}" for m in range(mics))]
    for n in range(total):
        lines.append(",".join(repr(float(data[m, n])) for m in range(mics)))
    file_path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_signal_csv(file_path) -> np.ndarray:
    """Read a per-mic signal CSV (header ``mic1,..,micM``) as a (M, T) matrix."""
    file_path = Path(file_path)
    with open(file_path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"signal CSV {file_path} is empty")
    headers = lines[0].split(",")
    if headers != [f"mic{m + 1}" for m in range(len(headers))]:
        raise ValueError(f"signal CSV {file_path} must have a 'mic1,..' header, got {lines[0]!r}")
    mics = len(headers)
    data = np.empty((mics, len(lines) - 1), dtype=np.float64)
    for n, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != mics:
            raise ValueError(f"signal CSV {file_path}: row {n} has {len(cells)} cells, expected {mics}")
        for m in range(mics):
            data[m, n] = float(cells[m])
    return data


def export_result(result: SimResult, out_dir) -> list[Path]:
    """Write error.csv, disturbance.csv, coefficients.csv, metrics.csv and the
    config echo; byte-stable for equal configs. Divergent runs get a
    divergence.txt marker alongside the finite prefix."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    error_path = out_dir / "error.csv"
    _write_signal_csv(result.error, error_path)
    written.append(error_path)

    disturbance_path = out_dir / "disturbance.csv"
    _write_signal_csv(result.disturbance, disturbance_path)
    written.append(disturbance_path)

    coeff_path = out_dir / "coefficients.csv"
    write_coefficients_csv(result.coefficients, coeff_path)
    written.append(coeff_path)

    metrics_path = out_dir / "metrics.csv"
    metrics_lines = result.metrics.csv_lines() if result.metrics else ["metric,channel,index,value"]
    metrics_path.write_text("\n".join(metrics_lines) + "\n", encoding="utf-8")
    written.append(metrics_path)

    config_path = out_dir / "config.json"
    config_path.write_text(result.config.canonical_json(), encoding="utf-8")
    written.append(config_path)

    if result.diverged:
        marker = out_dir / "divergence.txt"
        marker.write_text(
            f"diverged at sample {result.divergence_sample}\n", encoding="utf-8"
        )
        written.append(marker)
    return written
