"""Multichannel feedforward active noise control simulation toolkit."""

from .controller import (
    COLLOCATED,
    FULLY_CONNECTED,
    ControlUnit,
    ControllerInfo,
    DivergenceError,
    McFxLmsController,
    RunResult,
    run,
    write_coefficients_csv,
)
from .dsp import DelayLine, FirFilter, PathMatrix, as_frame, dot, filter_batch
from .firdesign import BandSpec, design_bandpass, magnitude_response
from .harness import (
    EstimateSourceConfig,
    MetricsReport,
    PathSourceConfig,
    ScenarioConfig,
    SimResult,
    compute_metrics,
    export_result,
    load_config,
    read_signal_csv,
    run_scenario,
)
from .signals import (
    PathSynthSpec,
    SignalMatrix,
    make_disturbance,
    make_reference,
    path_seed,
    read_path_csv,
    synth_path,
    white_gaussian,
    write_path_csv,
)

__version__ = "0.1.0"
