"""Silhouette-controlled neural waveform synthesis toolkit."""

from .audio_io import Waveform, load_wav, save_wav, scale_amplitude
from .errors import SilsynthError
from .features import MelSpectrogram, mel_spectrogram
from .silhouette import (
    QuantizationScheme,
    SilhouetteTrack,
    extract_silhouette,
    parse_silhouette,
    quantize,
    serialize_silhouette,
    silhouette_mse,
)

__version__ = "0.1.0"

__all__ = [
    "MelSpectrogram",
    "QuantizationScheme",
    "SilhouetteTrack",
    "SilsynthError",
    "Waveform",
    "extract_silhouette",
    "load_wav",
    "mel_spectrogram",
    "parse_silhouette",
    "quantize",
    "save_wav",
    "scale_amplitude",
    "serialize_silhouette",
    "silhouette_mse",
    "__version__",
]
