import numpy as np
import pytest

from silsynth.audio_io import Waveform, scale_amplitude
from silsynth.errors import FeatureError
from silsynth.features import (
    LOG_FLOOR,
    hann_periodic,
    mel_filterbank,
    mel_spectrogram,
    mel_to_document,
    pad_for_frames,
    stft_magnitude,
)


def test_all_zero_waveform_hits_floor():
    mel = mel_spectrogram(Waveform(np.zeros(4096), 24000))
    assert np.all(mel.frames == np.log(LOG_FLOOR))


def test_frame_count_is_ceil():
    for n in (4096, 4097, 24000, 24001, 25000):
        mel = mel_spectrogram(Waveform(np.zeros(n), 24000))
        assert mel.num_frames == -(-n // 256), n


def test_pure_tone_peaks_in_expected_band():
    sr = 24000
    t = np.arange(sr) / sr
    w = Waveform(0.6 * np.sin(2 * np.pi * 1000 * t), sr)
    mel = mel_spectrogram(w)
    # oracle: the band with the largest filter response at the 1 kHz FFT bin
    fb = mel_filterbank(sr, 1024, 80)
    freqs = np.fft.rfftfreq(1024, 1 / sr)
    tone_bin = int(np.argmin(np.abs(freqs - 1000.0)))
    expected_band = int(np.argmax(fb[:, tone_bin]))
    interior = mel.frames[2:-2]
    assert np.all(np.argmax(interior, axis=1) == expected_band)


def test_parseval_energy_identity():
    rng = np.random.default_rng(13)
    w = Waveform(rng.uniform(-1, 1, 6000), 24000)
    mags = stft_magnitude(w, 1024, 256)
    # oracle: frame the padded signal independently and compare energies
    pad_left, pad_right = pad_for_frames(6000, 1024, 256)
    padded = np.pad(w.samples, (pad_left, pad_right), mode="reflect")
    window = hann_periodic(1024)
    for i in range(mags.shape[0]):
        frame = padded[i * 256 : i * 256 + 1024] * window
        spectral = (mags[i, 0] ** 2 + 2 * np.sum(mags[i, 1:-1] ** 2) + mags[i, -1] ** 2) / 1024
        time_domain = np.sum(frame**2)
        assert spectral == pytest.approx(time_domain, rel=1e-6)


def test_deterministic():
    rng = np.random.default_rng(1)
    w = Waveform(rng.uniform(-1, 1, 5000), 24000)
    a = mel_spectrogram(w)
    b = mel_spectrogram(w)
    assert np.array_equal(a.frames, b.frames)


def test_scaling_adds_log_lambda_above_floor():
    rng = np.random.default_rng(2)
    w = Waveform(rng.uniform(-0.9, 0.9, 8192), 24000)
    lam = 0.5
    base = mel_spectrogram(w).frames
    scaled = mel_spectrogram(scale_amplitude(w, lam)).frames
    active = (base > np.log(LOG_FLOOR) + 1.0) & (scaled > np.log(LOG_FLOOR) + 1.0)
    assert active.any()
    assert np.allclose(scaled[active], base[active] + np.log(lam), atol=1e-9)


def test_too_short_waveform():
    with pytest.raises(FeatureError):
        mel_spectrogram(Waveform(np.zeros(512), 24000))


def test_fmax_beyond_nyquist():
    with pytest.raises(FeatureError):
        mel_filterbank(16000, 1024, 80, fmax_hz=12000.0)


def test_filterbank_shape_and_coverage():
    fb = mel_filterbank(24000, 1024, 80)
    assert fb.shape == (80, 513)
    assert np.all(fb >= 0.0)
    assert np.all(fb.max(axis=1) > 0.0)  # every band has support


def test_mel_document_fields():
    mel = mel_spectrogram(Waveform(np.zeros(2048), 24000))
    doc = mel_to_document(mel)
    assert doc["kind"] == "mel_spectrogram"
    assert doc["mel_bins"] == 80
    assert len(doc["frames"]) == mel.num_frames
