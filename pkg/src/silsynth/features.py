"""Log mel-spectrogram extraction used by the spectral training loss.

The framing mirrors the silhouette configuration (window 1024, hop 256 at
24 kHz by default).  The pipeline is:

1. reflection-pad ``(fft_len - hop_len) / 2`` samples on both ends, plus
   whatever the right edge needs so the frame count is exactly
   ``ceil(num_samples / hop_len)``;
2. magnitude STFT with a periodic Hann window;
3. triangular mel filterbank, HTK-style spacing, 0 Hz to ``fmax``;
4. ``log(max(magnitude, 1e-5))``.

This is the NumPy reference implementation.  The training loop carries a
differentiable twin (:class:`silsynth.training.MelTransform`) that is
parity-tested against this one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import Waveform
from .errors import FeatureError

DEFAULT_FFT_LEN = 1024
DEFAULT_HOP_LEN = 256
DEFAULT_MEL_BINS = 80
DEFAULT_FMAX_HZ = 12000.0
LOG_FLOOR = 1e-5


@dataclass(frozen=True)
class MelSpectrogram:
    """Log-amplitude mel frames, ``(num_frames, mel_bins)``."""

    frames: np.ndarray
    fft_len: int
    hop_len: int
    mel_bins: int
    sample_rate_hz: int

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != self.mel_bins:
            raise FeatureError(f"mel frames must have shape (n, {self.mel_bins}), got {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise FeatureError("mel spectrogram contains non-finite values")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


def hann_periodic(length: int) -> np.ndarray:
    """Periodic Hann window, ``0.5 - 0.5*cos(2*pi*k/length)``."""
    k = np.arange(length, dtype=np.float64)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / length)


def hz_to_mel(freq_hz: np.ndarray | float) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz, dtype=np.float64) / 700.0)


def mel_to_hz(mels: np.ndarray | float) -> np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(mels, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    sample_rate_hz: int,
    fft_len: int = DEFAULT_FFT_LEN,
    mel_bins: int = DEFAULT_MEL_BINS,
    fmin_hz: float = 0.0,
    fmax_hz: float = DEFAULT_FMAX_HZ,
) -> np.ndarray:
    """Triangular filters on FFT bin frequencies, shape ``(mel_bins, fft_len//2 + 1)``."""
    if fmax_hz > sample_rate_hz / 2:
        raise FeatureError(f"fmax {fmax_hz} Hz exceeds Nyquist of {sample_rate_hz} Hz audio")
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), mel_bins + 2))
    bin_freqs = np.fft.rfftfreq(fft_len, d=1.0 / sample_rate_hz)
    lower = edges_hz[:-2][:, None]
    center = edges_hz[1:-1][:, None]
    upper = edges_hz[2:][:, None]
    rising = (bin_freqs[None, :] - lower) / (center - lower)
    falling = (upper - bin_freqs[None, :]) / (upper - center)
    return np.clip(np.minimum(rising, falling), 0.0, None)


def pad_for_frames(num_samples: int, fft_len: int, hop_len: int) -> tuple[int, int]:
    """Left/right padding yielding ``ceil(num_samples / hop_len)`` frames."""
    if (fft_len - hop_len) % 2 != 0:
        raise FeatureError("fft_len - hop_len must be even for symmetric padding")
    base = (fft_len - hop_len) // 2
    deficit = (-num_samples) % hop_len
    return base, base + deficit


def stft_magnitude(
    waveform: Waveform,
    fft_len: int = DEFAULT_FFT_LEN,
    hop_len: int = DEFAULT_HOP_LEN,
) -> np.ndarray:
    """Magnitude STFT, shape ``(num_frames, fft_len//2 + 1)``."""
    samples = waveform.samples
    if samples.size < fft_len:
        raise FeatureError(f"waveform of {samples.size} samples is shorter than fft_len {fft_len}")
    pad_left, pad_right = pad_for_frames(samples.size, fft_len, hop_len)
    padded = np.pad(samples, (pad_left, pad_right), mode="reflect")
    n_frames = (padded.size - fft_len) // hop_len + 1
    offsets = np.arange(n_frames)[:, None] * hop_len + np.arange(fft_len)[None, :]
    frames = padded[offsets] * hann_periodic(fft_len)[None, :]
    return np.abs(np.fft.rfft(frames, axis=1))


def mel_spectrogram(
    waveform: Waveform,
    fft_len: int = DEFAULT_FFT_LEN,
    hop_len: int = DEFAULT_HOP_LEN,
    mel_bins: int = DEFAULT_MEL_BINS,
    fmax_hz: float = DEFAULT_FMAX_HZ,
) -> MelSpectrogram:
    """Log-compressed magnitude mel spectrogram of a waveform."""
    magnitudes = stft_magnitude(waveform, fft_len=fft_len, hop_len=hop_len)
    filterbank = mel_filterbank(waveform.sample_rate_hz, fft_len, mel_bins, fmax_hz=fmax_hz)
    mel = magnitudes @ filterbank.T
    return MelSpectrogram(
        frames=np.log(np.maximum(mel, LOG_FLOOR)),
        fft_len=fft_len,
        hop_len=hop_len,
        mel_bins=mel_bins,
        sample_rate_hz=waveform.sample_rate_hz,
    )


def mel_to_document(mel: MelSpectrogram) -> dict:
    """Silhouette-style structured document for inspection dumps."""
    return {
        "version": 1,
        "kind": "mel_spectrogram",
        "sample_rate_hz": mel.sample_rate_hz,
        "fft_len": mel.fft_len,
        "hop_len": mel.hop_len,
        "mel_bins": mel.mel_bins,
        "frames": [[float(v) for v in row] for row in mel.frames],
    }
