import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from silsynth.audio_io import Waveform, scale_amplitude
from silsynth.errors import FormatError, SilhouetteError
from silsynth.silhouette import (
    MU_LAW,
    LINEAR,
    QuantizationScheme,
    SilhouetteTrack,
    bin_index,
    extract_silhouette,
    frame_count,
    mu_law_compress,
    mu_law_expand,
    parse_silhouette,
    quantize,
    quantize_values,
    serialize_silhouette,
    silhouette_mse,
    track_to_document,
)


def naive_silhouette(samples, window, hop):
    frames = []
    i = 0
    while i + window <= len(samples):
        chunk = samples[i : i + window]
        frames.append((chunk.min(), chunk.max()))
        i += hop
    return np.array(frames)


class TestExtraction:
    def test_all_zero_waveform(self):
        track = extract_silhouette(Waveform(np.zeros(4096), 24000), 1024, 256)
        assert np.all(track.frames == 0.0)

    def test_sine_envelope(self):
        t = np.arange(24000) / 24000
        w = Waveform(0.5 * np.sin(2 * np.pi * 100 * t), 24000)
        track = extract_silhouette(w, 1024, 256)
        # each 1024-sample window spans more than 4 full periods
        assert np.all(np.abs(track.mins() + 0.5) < 1e-3)
        assert np.all(np.abs(track.maxs() - 0.5) < 1e-3)
        assert np.array_equal(track.frames, naive_silhouette(w.samples, 1024, 256))

    def test_frame_count_formula(self):
        track = extract_silhouette(Waveform(np.zeros(24000), 24000), 1024, 256)
        assert track.num_frames == 90
        assert frame_count(24000, 1024, 256) == 90

    def test_matches_naive_scan(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(1100, 50000))
            window = int(rng.integers(2, 2049))
            hop = int(rng.integers(1, 513))
            if n < window:
                continue
            samples = rng.uniform(-1, 1, n)
            track = extract_silhouette(Waveform(samples, 24000), window, hop)
            assert np.array_equal(track.frames, naive_silhouette(samples, window, hop))

    def test_too_short_waveform(self):
        with pytest.raises(SilhouetteError):
            extract_silhouette(Waveform(np.zeros(1000), 24000), 1024, 256)

    def test_scaling_equivariance_exact(self):
        rng = np.random.default_rng(5)
        w = Waveform(rng.uniform(-1, 1, 9000), 24000)
        lam = 0.4375
        scaled = extract_silhouette(scale_amplitude(w, lam), 1024, 256)
        base = extract_silhouette(w, 1024, 256)
        assert np.array_equal(scaled.frames, lam * base.frames)

    def test_span_samples(self):
        track = extract_silhouette(Waveform(np.zeros(24000), 24000), 1024, 256)
        assert track.span_samples == 89 * 256 + 1024


class TestQuantization:
    def test_mu_law_worked_value(self):
        # scalar oracle: evaluate the compressor and bin formula directly
        mu = 255.0
        compressed = math.copysign(math.log1p(mu * 0.1) / math.log1p(mu), 0.1)
        assert compressed == pytest.approx(math.log(26.5) / math.log(256))
        assert compressed == pytest.approx(0.5910, abs=5e-5)
        expected_bin = math.floor((compressed + 1) / 2 * 256)
        assert expected_bin == 203
        scheme = QuantizationScheme(MU_LAW, 256)
        assert bin_index(np.array([0.1]), scheme)[0] == 203

    def test_linear_worked_value(self):
        scheme = QuantizationScheme(LINEAR, 256)
        assert bin_index(np.array([0.37]), scheme)[0] == 175
        value = quantize_values(np.array([0.37]), scheme)[0]
        assert value == 175 * (2 / 256) - 1 + 1 / 256
        assert value == pytest.approx(0.3711, abs=5e-5)
        # brute force over all 256 centers: the chosen one is the nearest
        centers = (np.arange(256) + 0.5) * (2 / 256) - 1
        assert value == centers[np.argmin(np.abs(centers - 0.37))]

    def test_zero_maps_near_zero(self):
        scheme = QuantizationScheme(MU_LAW, 256)
        value = quantize_values(np.array([0.0]), scheme)[0]
        half_local_bin = mu_law_expand(np.array([1 / 256]), scheme.mu)[0]
        assert abs(value) <= half_local_bin

    @given(
        x=st.floats(min_value=-1.0, max_value=1.0),
        y=st.floats(min_value=-1.0, max_value=1.0),
        bins=st.sampled_from([16, 256]),
        kind=st.sampled_from([LINEAR, MU_LAW]),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotonicity(self, x, y, bins, kind):
        if x > y:
            x, y = y, x
        scheme = QuantizationScheme(kind, bins)
        if kind == MU_LAW:
            assert mu_law_compress(np.array([x]), scheme.mu)[0] <= mu_law_compress(np.array([y]), scheme.mu)[0]
        assert bin_index(np.array([x]), scheme)[0] <= bin_index(np.array([y]), scheme)[0]
        qx, qy = quantize_values(np.array([x, y]), scheme)
        assert qx <= qy

    @pytest.mark.parametrize("kind,bins", [(LINEAR, 256), (MU_LAW, 256), (MU_LAW, 16)])
    def test_error_bound_companded_domain(self, kind, bins):
        scheme = QuantizationScheme(kind, bins)
        x = np.linspace(-1, 1, 20001)
        q = quantize_values(x, scheme)
        if kind == MU_LAW:
            gap = np.abs(mu_law_compress(q, scheme.mu) - mu_law_compress(x, scheme.mu))
        else:
            gap = np.abs(q - x)
        assert np.max(gap) <= 1 / bins + 1e-12

    def test_mu_expand_inverts_compress(self):
        x = np.linspace(-1, 1, 1001)
        for mu in (15.0, 255.0):
            assert np.max(np.abs(mu_law_expand(mu_law_compress(x, mu), mu) - x)) < 1e-12

    def test_quantize_track_tags_and_preserves_order(self):
        rng = np.random.default_rng(2)
        w = Waveform(rng.uniform(-1, 1, 6000), 24000)
        track = extract_silhouette(w, 1024, 256)
        q = quantize(track, QuantizationScheme(MU_LAW, 16))
        assert q.quantization == QuantizationScheme(MU_LAW, 16)
        assert np.all(q.mins() <= q.maxs())
        with pytest.raises(SilhouetteError, match="already quantized"):
            quantize(q, QuantizationScheme(LINEAR, 256))

    def test_scheme_validation(self):
        with pytest.raises(SilhouetteError):
            QuantizationScheme("a_law", 256)
        with pytest.raises(SilhouetteError):
            QuantizationScheme(LINEAR, 1)


class TestMse:
    def _track(self, frames):
        return SilhouetteTrack(frames=np.asarray(frames, dtype=float))

    def test_identical_tracks(self):
        t = self._track([[0.0, 0.5]] * 10)
        assert silhouette_mse(t, t) == 0.0

    def test_constant_offset(self):
        a = self._track([[0.0, 0.0]] * 8)
        b = self._track([[0.1, 0.1]] * 8)
        assert silhouette_mse(a, b) == pytest.approx(0.01)

    def test_symmetric_and_nonnegative(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            fa = np.sort(rng.uniform(-1, 1, (12, 2)), axis=1)
            fb = np.sort(rng.uniform(-1, 1, (12, 2)), axis=1)
            a, b = self._track(fa), self._track(fb)
            assert silhouette_mse(a, b) == silhouette_mse(b, a) >= 0.0

    def test_truncation_tolerance(self):
        a = self._track([[0.0, 0.0]] * 10)
        b = self._track([[0.0, 0.0]] * 8)
        assert silhouette_mse(a, b) == 0.0
        c = self._track([[0.0, 0.0]] * 7)
        with pytest.raises(SilhouetteError, match="differ by 3"):
            silhouette_mse(a, c)

    def test_rejects_quantized_inputs(self):
        t = extract_silhouette(Waveform(np.random.default_rng(0).uniform(-1, 1, 4096), 24000))
        q = quantize(t, QuantizationScheme(LINEAR, 256))
        with pytest.raises(SilhouetteError, match="unquantized"):
            silhouette_mse(q, q)

    def test_rejects_mismatched_framing(self):
        a = extract_silhouette(Waveform(np.zeros(4096), 24000), 1024, 256)
        b = extract_silhouette(Waveform(np.zeros(4096), 24000), 512, 256)
        with pytest.raises(SilhouetteError, match="window"):
            silhouette_mse(a, b)


class TestSerialization:
    @given(
        n=st.integers(min_value=1, max_value=40),
        quantized=st.booleans(),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=60, deadline=None)
    def test_round_trip(self, n, quantized, seed):
        rng = np.random.default_rng(seed)
        frames = np.sort(rng.uniform(-1, 1, (n, 2)), axis=1)
        track = SilhouetteTrack(
            frames=frames,
            window_len=1024,
            hop_len=256,
            sample_rate_hz=24000,
            quantization=QuantizationScheme(MU_LAW, 256) if quantized else None,
        )
        restored = parse_silhouette(serialize_silhouette(track))
        assert np.array_equal(restored.frames, track.frames)
        assert restored.quantization == track.quantization
        assert (restored.window_len, restored.hop_len, restored.sample_rate_hz) == (1024, 256, 24000)

    def test_min_above_max_rejected(self):
        doc = {
            "version": 1,
            "sample_rate_hz": 24000,
            "window_len": 1024,
            "hop_len": 256,
            "quantization": None,
            "frames": [[0.0, 0.1], [0.5, 0.2]],
        }
        with pytest.raises(FormatError, match="min <= max") as exc:
            parse_silhouette(json.dumps(doc))
        assert exc.value.frame_index == 1

    def test_empty_frames_rejected(self):
        doc = track_to_document(SilhouetteTrack(frames=np.zeros((1, 2))))
        doc["frames"] = []
        with pytest.raises(FormatError):
            parse_silhouette(json.dumps(doc))

    def test_malformed_document(self):
        with pytest.raises(FormatError):
            parse_silhouette(b"{not json")
        with pytest.raises(FormatError, match="version"):
            parse_silhouette(json.dumps({"version": 9, "frames": [[0, 0]]}))

    def test_out_of_range_rejected(self):
        doc = track_to_document(SilhouetteTrack(frames=np.zeros((1, 2))))
        doc["frames"] = [[-1.5, 0.0]]
        with pytest.raises(FormatError, match="outside"):
            parse_silhouette(json.dumps(doc))


def test_track_validation():
    with pytest.raises(SilhouetteError):
        SilhouetteTrack(frames=np.zeros((0, 2)))
    with pytest.raises(SilhouetteError, match="min <= max"):
        SilhouetteTrack(frames=np.array([[0.5, 0.2]]))
    with pytest.raises(SilhouetteError):
        SilhouetteTrack(frames=np.array([[0.0, 1.2]]))
    with pytest.raises(SilhouetteError):
        SilhouetteTrack(frames=np.array([[0.0, 0.1]]), window_len=0)
