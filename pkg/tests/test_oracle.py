import numpy as np
import pytest

from mcanc.controller import DivergenceError, McFxLmsController, run
from mcanc.dsp import PathMatrix
from mcanc.oracle import naive_run
from mcanc.signals import PathSynthSpec, SignalMatrix, make_disturbance, path_seed, synth_path, white_gaussian

FS = 16000.0


def path_grid(num_mics, num_sources, taps, base_seed, delay=1, decay=0.7):
    return np.stack(
        [
            np.stack(
                [
                    synth_path(
                        PathSynthSpec(taps, delay, decay, seed=path_seed(base_seed, m, k, num_sources))
                    ).taps
                    for k in range(num_sources)
                ]
            )
            for m in range(num_mics)
        ]
    )


class TestOracleExamples:
    def test_scalar_geometric(self):
        ones = np.ones((1, 20))
        error = naive_run("collocated", 1, 1, 1, 1, 0.1, np.ones((1, 1, 1)), np.ones((1, 1, 1)), ones, ones)
        np.testing.assert_allclose(error[0], 0.9 ** np.arange(20), rtol=0, atol=1e-12)

    def test_zero_step_size_is_passthrough(self):
        ref = np.stack([white_gaussian(80, 1), white_gaussian(80, 2)])
        dist = np.stack([white_gaussian(80, 3), white_gaussian(80, 4)])
        sec = path_grid(2, 2, 4, base_seed=50)
        error = naive_run("fully_connected", 2, 2, 2, 8, 0.0, sec, sec, ref, dist)
        assert np.array_equal(error, dist)

    def test_unknown_topology(self):
        with pytest.raises(ValueError, match="topology"):
            naive_run("ring", 1, 1, 1, 1, 0.1, np.ones((1, 1, 1)), np.ones((1, 1, 1)),
                      np.ones((1, 4)), np.ones((1, 4)))

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_divergence_contract(self):
        ones = np.ones((1, 2000))
        with pytest.raises(DivergenceError) as info:
            naive_run("collocated", 1, 1, 1, 1, 10.0, np.ones((1, 1, 1)), np.ones((1, 1, 1)), ones, ones)
        assert info.value.sample_index > 0


class TestEngineEquivalence:
    @pytest.mark.parametrize("topology", ["fully_connected", "collocated"])
    def test_bit_identical_small_random(self, topology):
        num_refs = num_speakers = num_mics = 2
        filter_len, path_len, total, mu = 6, 3, 150, 2e-3
        sec = path_grid(num_mics, num_speakers, path_len, base_seed=60)
        pri = path_grid(num_mics, num_refs, path_len, base_seed=61, delay=0, decay=0.5)
        ref = SignalMatrix(np.stack([white_gaussian(total, 70 + j) for j in range(num_refs)]), FS)
        dist = make_disturbance(PathMatrix(pri), ref)
        controller = McFxLmsController(
            topology, num_refs, num_speakers, num_mics, filter_len, mu, PathMatrix(sec)
        )
        engine_error = run(controller, ref, dist).error
        naive_error = naive_run(
            topology, num_refs, num_speakers, num_mics, filter_len, mu, sec, sec, ref.data, dist.data
        )
        assert np.array_equal(engine_error, naive_error)

    def test_bit_identical_rectangular_dims(self):
        # J=2 refs, K=3 speakers, M=2 mics exercises non-square unit grids
        num_refs, num_speakers, num_mics = 2, 3, 2
        filter_len, path_len, total, mu = 4, 3, 120, 1e-3
        sec = path_grid(num_mics, num_speakers, path_len, base_seed=80)
        ref = SignalMatrix(np.stack([white_gaussian(total, 90 + j) for j in range(num_refs)]), FS)
        dist = SignalMatrix(np.stack([white_gaussian(total, 95 + m) for m in range(num_mics)]), FS)
        controller = McFxLmsController(
            "fully_connected", num_refs, num_speakers, num_mics, filter_len, mu, PathMatrix(sec)
        )
        engine_error = run(controller, ref, dist).error
        naive_error = naive_run(
            "fully_connected", num_refs, num_speakers, num_mics, filter_len, mu,
            sec, sec, ref.data, dist.data,
        )
        assert np.array_equal(engine_error, naive_error)

    def test_bit_identical_with_plant_mismatch(self):
        # separated estimate/plant: units filter references with the estimate
        # while physical propagation uses the true paths
        num = 2
        filter_len, path_len, total, mu = 5, 4, 140, 1e-3
        estimate = path_grid(num, num, path_len, base_seed=62)
        plant = estimate + 0.05 * path_grid(num, num, path_len, base_seed=63)
        ref = SignalMatrix(np.stack([white_gaussian(total, 71 + j) for j in range(num)]), FS)
        dist = SignalMatrix(np.stack([white_gaussian(total, 81 + m) for m in range(num)]), FS)
        controller = McFxLmsController(
            "fully_connected", num, num, num, filter_len, mu,
            PathMatrix(estimate), plant=PathMatrix(plant),
        )
        engine_error = run(controller, ref, dist).error
        naive_error = naive_run(
            "fully_connected", num, num, num, filter_len, mu, estimate, plant, ref.data, dist.data
        )
        assert np.array_equal(engine_error, naive_error)

    def test_sign_convention_mirror(self):
        # negating both the true and estimated paths flips the anti-noise
        # sign; with the mirrored pair the error sequence is identical
        num = 2
        filter_len, path_len, total, mu = 4, 3, 100, 1e-3
        sec = path_grid(num, num, path_len, base_seed=64)
        ref = SignalMatrix(np.stack([white_gaussian(total, 72 + j) for j in range(num)]), FS)
        dist = SignalMatrix(np.stack([white_gaussian(total, 82 + m) for m in range(num)]), FS)
        base = run(
            McFxLmsController("collocated", num, num, num, filter_len, mu, PathMatrix(sec)),
            ref, dist,
        )
        mirrored = run(
            McFxLmsController("collocated", num, num, num, filter_len, mu, PathMatrix(-sec)),
            ref, dist,
        )
        assert np.array_equal(base.error, mirrored.error)
        assert np.array_equal(base.coefficients, -mirrored.coefficients)
