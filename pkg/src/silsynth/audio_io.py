"""Mono waveform container and PCM WAV input/output.

All other modules consume :class:`Waveform`.  Loading normalizes integer
PCM to ``[-1, 1]`` by the format's full-scale value and averages
multichannel material down to mono; saving always writes 16-bit mono PCM.
Sample rates are carried through untouched: nothing here resamples.
"""

from __future__ import annotations

import io
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AudioIoError

# full-scale divisors for signed PCM widths (bytes -> 2^(bits-1))
_PCM_FULL_SCALE = {2: 2**15, 3: 2**23, 4: 2**31}


@dataclass(frozen=True)
class Waveform:
    """Mono sample sequence in ``[-1, 1]`` with its sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioIoError(f"waveform must be one-dimensional, got shape {samples.shape}")
        if samples.size < 1:
            raise AudioIoError("waveform must contain at least one sample")
        if not np.all(np.isfinite(samples)):
            raise AudioIoError("waveform contains non-finite samples")
        if int(self.sample_rate_hz) <= 0:
            raise AudioIoError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_seconds(self) -> float:
        return self.samples.size / self.sample_rate_hz


def _decode_pcm(raw: bytes, sample_width: int) -> np.ndarray:
    if sample_width == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    elif sample_width == 3:
        triples = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        data = triples[:, 0] | (triples[:, 1] << 8) | (triples[:, 2] << 16)
        data = ((data ^ 0x800000) - 0x800000).astype(np.float64)  # sign extension
    elif sample_width == 4:
        data = np.frombuffer(raw, dtype="<i4").astype(np.float64)
    else:
        raise AudioIoError(f"unsupported PCM sample width: {sample_width * 8} bits")
    return data / _PCM_FULL_SCALE[sample_width]


def _load_from_reader(reader: wave.Wave_read, origin: str) -> Waveform:
    num_channels = reader.getnchannels()
    sample_width = reader.getsampwidth()
    sample_rate = reader.getframerate()
    num_frames = reader.getnframes()
    if num_frames == 0:
        raise AudioIoError(f"zero-length audio: {origin}")
    data = _decode_pcm(reader.readframes(num_frames), sample_width)
    if num_channels > 1:
        data = data.reshape(-1, num_channels).mean(axis=1)
    return Waveform(samples=data, sample_rate_hz=sample_rate)


def load_wav(path: str | Path) -> Waveform:
    """Load a PCM WAV file as a mono :class:`Waveform`.

    Accepts 16/24/32-bit PCM, mono or multichannel (averaged to mono).
    Raises :class:`AudioIoError` for missing files, non-PCM encodings, and
    zero-length audio.
    """
    path = Path(path)
    if not path.is_file():
        raise AudioIoError(f"file does not exist: {path}")
    try:
        with wave.open(str(path), "rb") as reader:
            return _load_from_reader(reader, str(path))
    except (wave.Error, EOFError) as exc:
        raise AudioIoError(f"unreadable or non-PCM WAV file {path}: {exc}") from exc


def load_wav_bytes(data: bytes) -> Waveform:
    """Decode in-memory WAV bytes on the same contract as :func:`load_wav`."""
    if not data:
        raise AudioIoError("empty WAV payload")
    try:
        with wave.open(io.BytesIO(data), "rb") as reader:
            return _load_from_reader(reader, "<bytes>")
    except (wave.Error, EOFError) as exc:
        raise AudioIoError(f"unreadable or non-PCM WAV payload: {exc}") from exc


def _encode_int16(samples: np.ndarray) -> np.ndarray:
    clipped = np.clip(samples, -1.0, 1.0)
    return np.clip(np.round(clipped * 32768.0), -32768, 32767).astype("<i2")


def save_wav(waveform: Waveform, path: str | Path) -> None:
    """Write 16-bit PCM mono WAV. Samples outside ``[-1, 1]`` clip."""
    path = Path(path)
    try:
        with wave.open(str(path), "wb") as writer:
            writer.setnchannels(1)
            writer.setsampwidth(2)
            writer.setframerate(waveform.sample_rate_hz)
            writer.writeframes(_encode_int16(waveform.samples).tobytes())
    except OSError as exc:
        raise AudioIoError(f"cannot write WAV file {path}: {exc}") from exc


def wav_bytes(waveform: Waveform) -> bytes:
    """Render a waveform to in-memory 16-bit PCM mono WAV bytes."""
    buffer = io.BytesIO()
    with wave.open(buffer, "wb") as writer:
        writer.setnchannels(1)
        writer.setsampwidth(2)
        writer.setframerate(waveform.sample_rate_hz)
        writer.writeframes(_encode_int16(waveform.samples).tobytes())
    return buffer.getvalue()


def scale_amplitude(waveform: Waveform, factor: float) -> Waveform:
    """Multiply every sample by ``factor`` with ``0 < factor <= 1``."""
    if not 0.0 < factor <= 1.0:
        raise AudioIoError(f"amplitude factor must be in (0, 1], got {factor}")
    return Waveform(samples=waveform.samples * factor, sample_rate_hz=waveform.sample_rate_hz)
