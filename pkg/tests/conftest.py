import json

import pytest


@pytest.fixture
def small_config_dict():
    """Desk-scale 2x2x2 scenario that runs in well under a second."""
    return {
        "duration_s": 0.02,
        "sample_rate_hz": 16000.0,
        "num_refs": 2,
        "num_speakers": 2,
        "num_mics": 2,
        "filter_len": 16,
        "path_len": 8,
        "step_size": 1e-3,
        "topology": "collocated",
        "band_lo": 0.05,
        "band_hi": 0.1,
        "fir_order": 32,
        "reference_mode": "replicate",
        "noise_seed": 7,
        "primary_paths": {"source": "synthetic", "wiring": "diagonal", "delay": 2, "decay": 0.8, "seed": 21},
        "secondary_paths": {"source": "synthetic", "delay": 1, "decay": 0.8, "seed": 22},
        "sec_estimate": {"source": "same_as_plant"},
        "snapshot_stride": 0,
        "metrics_block_s": 0.005,
    }


@pytest.fixture
def write_config(tmp_path):
    def _write(config_dict, name="scenario.cfg"):
        path = tmp_path / name
        path.write_text(json.dumps(config_dict, indent=2) + "\n", encoding="utf-8")
        return path

    return _write
