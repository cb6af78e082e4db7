import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcanc.dsp import FirFilter, PathMatrix, filter_batch
from mcanc.signals import (
    PathSynthSpec,
    SignalMatrix,
    make_disturbance,
    make_reference,
    normal_inverse_cdf,
    path_seed,
    read_path_csv,
    synth_path,
    white_gaussian,
    write_path_csv,
)

DELTA = FirFilter([1.0, 0.0, 0.0])


class TestWhiteGaussian:
    def test_deterministic(self):
        assert np.array_equal(white_gaussian(4, 42), white_gaussian(4, 42))

    def test_seeds_differ(self):
        assert not np.array_equal(white_gaussian(4, 42), white_gaussian(4, 43))

    @pytest.mark.parametrize("k", [1, 2, 7, 100])
    def test_prefix_stability(self, k):
        assert white_gaussian(1, 5)[0] == white_gaussian(k, 5)[0]
        assert np.array_equal(white_gaussian(k, 5), white_gaussian(100, 5)[:k])

    def test_moments(self):
        z = white_gaussian(100000, 7)
        assert abs(z.mean()) <= 0.02
        assert 0.97 <= z.var() <= 1.03

    @pytest.mark.parametrize("bad", [0, -3, 1.5])
    def test_bad_count(self, bad):
        with pytest.raises(ValueError):
            white_gaussian(bad, 1)

    @pytest.mark.parametrize("bad", [-1, 2**64, 0.5])
    def test_bad_seed(self, bad):
        with pytest.raises(ValueError):
            white_gaussian(4, bad)


class TestNormalInverseCdf:
    def test_against_scipy(self):
        ndtri = pytest.importorskip("scipy.special").ndtri
        p = np.concatenate(
            [
                np.linspace(1e-9, 1 - 1e-9, 20001),
                np.logspace(-300, -10, 500),
                1.0 - np.logspace(-16, -10, 500),
                [2.0**-54, 0.5, 0.425 + 0.5],
            ]
        )
        ours = normal_inverse_cdf(p)
        ref = ndtri(p)
        rel = np.abs(ours - ref) / np.maximum(np.abs(ref), 1e-300)
        assert np.max(rel) < 1e-13

    def test_median_is_zero(self):
        assert normal_inverse_cdf(np.array([0.5]))[0] == 0.0

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.1])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            normal_inverse_cdf(np.array([bad]))


class TestMakeReference:
    def test_replicate_rows_identical(self):
        noise = white_gaussian(64, 1)
        ref = make_reference(noise, DELTA, 4, "replicate", 16000.0)
        assert ref.channels == 4
        for j in range(1, 4):
            assert np.array_equal(ref.data[j], ref.data[0])

    def test_replicate_single_row_equals_filter(self):
        noise = white_gaussian(64, 1)
        fir = FirFilter([0.5, 0.25])
        ref = make_reference(noise, fir, 1, "replicate", 16000.0)
        assert np.array_equal(ref.data[0], filter_batch(fir, noise))

    def test_independent_equal_seeds_equal_rows(self):
        noise = np.zeros(32)
        ref = make_reference(noise, DELTA, 3, "independent", 16000.0, seeds=[9, 9, 9])
        assert np.array_equal(ref.data[1], ref.data[0])
        assert np.array_equal(ref.data[2], ref.data[0])

    def test_independent_needs_seeds(self):
        with pytest.raises(ValueError, match="seeds"):
            make_reference(np.zeros(8), DELTA, 2, "independent", 16000.0)
        with pytest.raises(ValueError, match="seeds"):
            make_reference(np.zeros(8), DELTA, 2, "independent", 16000.0, seeds=[1])

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="mode"):
            make_reference(np.zeros(8), DELTA, 2, "both", 16000.0)

    def test_band_power_concentration(self):
        # the 400-800 Hz at 16 kHz scenario band: >= 95% of power in [0.04, 0.11]
        from mcanc.firdesign import BandSpec, design_bandpass

        bandpass = design_bandpass(BandSpec(512, 0.05, 0.1))
        ref = make_reference(white_gaussian(16001, 1234), bandpass, 1, "replicate", 16000.0)
        spectrum = np.abs(np.fft.rfft(ref.data[0])) ** 2
        freqs = np.linspace(0.0, 1.0, spectrum.shape[0])
        in_band = spectrum[(freqs >= 0.04) & (freqs <= 0.11)].sum()
        assert in_band / spectrum.sum() >= 0.95


class TestMakeDisturbance:
    def test_diagonal_delta_passthrough(self):
        ref = SignalMatrix(np.vstack([white_gaussian(32, 3), white_gaussian(32, 4)]), 16000.0)
        primary = PathMatrix(
            np.stack(
                [
                    np.stack([DELTA.taps, np.zeros(3)]),
                    np.stack([np.zeros(3), DELTA.taps]),
                ]
            )
        )
        d = make_disturbance(primary, ref)
        assert np.array_equal(d.data, ref.data)

    def test_superposition_by_hand(self):
        # M=1, J=2, both paths delta: d = x1 + x2 = [1, 1]
        ref = SignalMatrix(np.array([[1.0, 0.0], [0.0, 1.0]]), 16000.0)
        primary = PathMatrix(np.array([[[1.0], [1.0]]]))
        d = make_disturbance(primary, ref)
        assert np.array_equal(d.data, [[1.0, 1.0]])

    def test_diagonal_unit_delay_shifts(self):
        x = white_gaussian(16, 5)
        ref = SignalMatrix(x[np.newaxis, :], 16000.0)
        primary = PathMatrix(np.array([[[0.0, 1.0]]]))
        d = make_disturbance(primary, ref)
        assert np.array_equal(d.data[0], np.concatenate([[0.0], x[:-1]]))

    def test_dimension_mismatch(self):
        ref = SignalMatrix(np.zeros((2, 8)), 16000.0)
        primary = PathMatrix(np.zeros((1, 3, 4)))
        with pytest.raises(ValueError, match="channels"):
            make_disturbance(primary, ref)

    @given(scale=st.floats(min_value=-4.0, max_value=4.0, allow_nan=False))
    @settings(max_examples=20)
    def test_linearity(self, scale):
        x = np.vstack([white_gaussian(32, 8), white_gaussian(32, 9)])
        primary = PathMatrix(
            np.stack([np.stack([synth_path(PathSynthSpec(4, 0, 0.5, seed=s)).taps for s in (1, 2)])])
        )
        base = make_disturbance(primary, SignalMatrix(x, 16000.0)).data
        if scale == 0.0:
            return
        scaled = make_disturbance(primary, SignalMatrix(scale * x, 16000.0)).data
        np.testing.assert_allclose(scaled, scale * base, rtol=1e-9, atol=1e-12)


class TestSynthPath:
    def test_leading_zeros(self):
        fir = synth_path(PathSynthSpec(8, 3, 0.9, seed=11))
        assert np.array_equal(fir.taps[:3], np.zeros(3))
        assert np.all(fir.taps[3:] != 0.0)

    def test_unit_peak(self):
        fir = synth_path(PathSynthSpec(64, 2, 0.8, seed=12))
        assert np.max(np.abs(fir.taps)) == 1.0

    def test_tiny_decay_collapses(self):
        fir = synth_path(PathSynthSpec(16, 4, 1e-6, seed=13))
        peak = np.abs(fir.taps) == 1.0
        assert peak.sum() == 1 and peak[4]
        assert np.all(np.abs(fir.taps[5:]) <= 1e-6)

    def test_deterministic(self):
        spec = PathSynthSpec(32, 1, 0.7, seed=99)
        assert np.array_equal(synth_path(spec).taps, synth_path(spec).taps)

    @pytest.mark.parametrize(
        "length,delay,decay",
        [(8, 8, 0.5), (8, 9, 0.5), (0, 0, 0.5), (8, -1, 0.5), (8, 0, 0.0), (8, 0, 1.0)],
    )
    def test_invalid_spec(self, length, delay, decay):
        with pytest.raises(ValueError):
            PathSynthSpec(length, delay, decay, seed=1)


class TestPathCsv:
    def test_round_trip_bitwise(self, tmp_path):
        data = np.stack(
            [
                np.stack([synth_path(PathSynthSpec(12, 1, 0.6, seed=path_seed(7, m, k, 3))).taps for k in range(3)])
                for m in range(2)
            ]
        )
        paths = PathMatrix(data)
        out = tmp_path / "paths.csv"
        write_path_csv(paths, out)
        back = read_path_csv(out)
        assert np.array_equal(back.data, paths.data)

    def test_header_layout(self, tmp_path):
        out = tmp_path / "paths.csv"
        write_path_csv(PathMatrix(np.zeros((2, 2, 1))), out)
        header = out.read_text().splitlines()[0]
        assert header == "tap,m1_k1,m1_k2,m2_k1,m2_k2"

    def test_rejects_bad_header(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("taps,m1_k1\n0,1.0\n")
        with pytest.raises(ValueError, match="header"):
            read_path_csv(bad)

    def test_rejects_shuffled_columns(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("tap,m2_k1,m1_k1\n0,1.0,1.0\n")
        with pytest.raises(ValueError, match="columns"):
            read_path_csv(bad)


def test_path_seed_derivation():
    assert path_seed(100, 0, 0, 4) == 100
    assert path_seed(100, 2, 3, 4) == 111
    assert path_seed(2**64 - 1, 0, 1, 4) == 0
