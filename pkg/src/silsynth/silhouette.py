"""Waveform silhouettes: extraction, quantization, comparison, serialization.

A silhouette is a per-frame ``(min, max)`` envelope obtained by sliding a
window of ``window_len`` samples over the waveform in steps of ``hop_len``
and pooling the extremes of each window.  Frames that would run past the
end of the waveform are dropped (no padding), so the frame count is exactly
``floor((num_samples - window_len) / hop_len) + 1``.

Quantization abstracts the envelope further.  Both codecs bin the value
range ``[-1, 1]`` into ``num_bins`` equal-width bins and replace each value
with its bin center, mapped back to the original domain:

* ``linear`` bins the raw value directly.
* ``mu_law`` first compresses through
  ``F(x) = sign(x) * ln(1 + mu*|x|) / ln(1 + mu)`` with ``mu = num_bins - 1``,
  bins ``F(x)``, and expands the bin center back through ``F^-1``.

``F`` is strictly monotone, so quantizing min and max independently can
never produce ``min > max``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .audio_io import Waveform
from .errors import FormatError, SilhouetteError

DEFAULT_WINDOW_LEN = 1024
DEFAULT_HOP_LEN = 256

LINEAR = "linear"
MU_LAW = "mu_law"
_KINDS = (LINEAR, MU_LAW)

# largest frame-count mismatch silhouette_mse repairs by truncation
MSE_FRAME_TOLERANCE = 2

FORMAT_VERSION = 1


@dataclass(frozen=True)
class QuantizationScheme:
    """Codec descriptor: companding kind plus bin count."""

    kind: str
    num_bins: int

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise SilhouetteError(f"unknown quantization kind: {self.kind!r} (expected one of {_KINDS})")
        if int(self.num_bins) < 2:
            raise SilhouetteError(f"num_bins must be >= 2, got {self.num_bins}")
        object.__setattr__(self, "num_bins", int(self.num_bins))

    @property
    def mu(self) -> float:
        """Companding constant; ``num_bins - 1`` by convention."""
        return float(self.num_bins - 1)


@dataclass(frozen=True)
class SilhouetteTrack:
    """Per-frame ``(min, max)`` pairs plus the framing that produced them."""

    frames: np.ndarray
    window_len: int = DEFAULT_WINDOW_LEN
    hop_len: int = DEFAULT_HOP_LEN
    sample_rate_hz: int = 24000
    quantization: QuantizationScheme | None = None

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != 2:
            raise SilhouetteError(f"frames must have shape (n, 2), got {frames.shape}")
        if frames.shape[0] < 1:
            raise SilhouetteError("silhouette must contain at least one frame")
        if not np.all(np.isfinite(frames)):
            raise SilhouetteError("silhouette contains non-finite values")
        if np.any(frames < -1.0) or np.any(frames > 1.0):
            raise SilhouetteError("silhouette values must lie in [-1, 1]")
        bad = np.nonzero(frames[:, 0] > frames[:, 1])[0]
        if bad.size:
            raise SilhouetteError(f"frame {int(bad[0])} violates min <= max")
        if int(self.window_len) < 1 or int(self.hop_len) < 1:
            raise SilhouetteError("window_len and hop_len must be positive")
        if int(self.sample_rate_hz) <= 0:
            raise SilhouetteError("sample rate must be positive")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "window_len", int(self.window_len))
        object.__setattr__(self, "hop_len", int(self.hop_len))
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def span_samples(self) -> int:
        """Number of waveform samples the framed windows cover."""
        return (self.num_frames - 1) * self.hop_len + self.window_len

    def mins(self) -> np.ndarray:
        return self.frames[:, 0]

    def maxs(self) -> np.ndarray:
        return self.frames[:, 1]


def frame_count(num_samples: int, window_len: int, hop_len: int) -> int:
    """Frame count under the tail-dropping policy."""
    if num_samples < window_len:
        raise SilhouetteError(
            f"waveform of {num_samples} samples is shorter than one window ({window_len})"
        )
    return (num_samples - window_len) // hop_len + 1


def extract_silhouette(
    waveform: Waveform,
    window_len: int = DEFAULT_WINDOW_LEN,
    hop_len: int = DEFAULT_HOP_LEN,
) -> SilhouetteTrack:
    """Min/max-pool overlapping windows into an unquantized silhouette."""
    if window_len < 1 or hop_len < 1:
        raise SilhouetteError("window_len and hop_len must be positive")
    samples = waveform.samples
    n_frames = frame_count(samples.size, window_len, hop_len)
    windows = sliding_window_view(samples, window_len)[:: hop_len][:n_frames]
    frames = np.stack([windows.min(axis=1), windows.max(axis=1)], axis=1)
    return SilhouetteTrack(
        frames=frames,
        window_len=window_len,
        hop_len=hop_len,
        sample_rate_hz=waveform.sample_rate_hz,
        quantization=None,
    )


def mu_law_compress(values: np.ndarray, mu: float) -> np.ndarray:
    """``F(x) = sign(x) * ln(1 + mu*|x|) / ln(1 + mu)``, monotone on [-1, 1]."""
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.log1p(mu * np.abs(values)) / np.log1p(mu)


def mu_law_expand(values: np.ndarray, mu: float) -> np.ndarray:
    """Inverse of :func:`mu_law_compress`."""
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.expm1(np.abs(values) * np.log1p(mu)) / mu


def _compress(values: np.ndarray, scheme: QuantizationScheme) -> np.ndarray:
    if scheme.kind == MU_LAW:
        return mu_law_compress(values, scheme.mu)
    return np.asarray(values, dtype=np.float64)


def _expand(values: np.ndarray, scheme: QuantizationScheme) -> np.ndarray:
    if scheme.kind == MU_LAW:
        return mu_law_expand(values, scheme.mu)
    return np.asarray(values, dtype=np.float64)


def bin_index(values: np.ndarray, scheme: QuantizationScheme) -> np.ndarray:
    """Bin index ``floor((F(x) + 1) / 2 * N)`` clipped to ``[0, N - 1]``."""
    compressed = _compress(values, scheme)
    idx = np.floor((compressed + 1.0) / 2.0 * scheme.num_bins).astype(np.int64)
    return np.clip(idx, 0, scheme.num_bins - 1)


def quantize_values(values: np.ndarray, scheme: QuantizationScheme) -> np.ndarray:
    """Replace each value by its bin center, expanded back to the original domain."""
    centers = (bin_index(values, scheme) + 0.5) * (2.0 / scheme.num_bins) - 1.0
    return _expand(centers, scheme)


def quantize(track: SilhouetteTrack, scheme: QuantizationScheme) -> SilhouetteTrack:
    """Quantize min and max channels independently with the same codec.

    The compressor is monotone, so frame ordering (min <= max) survives.
    Raises on already-quantized input: quantization is not idempotent
    across schemes and re-quantizing is almost always a pipeline bug.
    """
    if track.quantization is not None:
        raise SilhouetteError("silhouette is already quantized")
    frames = quantize_values(track.frames, scheme)
    return replace(track, frames=frames, quantization=scheme)


def silhouette_mse(a: SilhouetteTrack, b: SilhouetteTrack) -> float:
    """Mean squared difference over all frames and both channels.

    Both tracks must be unquantized and share framing.  Frame counts that
    differ by at most ``MSE_FRAME_TOLERANCE`` are reconciled by truncating
    to the shorter track; larger mismatches signal a pipeline bug.
    """
    if a.quantization is not None or b.quantization is not None:
        raise SilhouetteError("silhouette_mse requires unquantized tracks")
    if (a.window_len, a.hop_len, a.sample_rate_hz) != (b.window_len, b.hop_len, b.sample_rate_hz):
        raise SilhouetteError("silhouette_mse requires identical window, hop and sample rate")
    diff = abs(a.num_frames - b.num_frames)
    if diff > MSE_FRAME_TOLERANCE:
        raise SilhouetteError(
            f"frame counts differ by {diff} (> {MSE_FRAME_TOLERANCE}): {a.num_frames} vs {b.num_frames}"
        )
    n = min(a.num_frames, b.num_frames)
    delta = a.frames[:n] - b.frames[:n]
    return float(np.mean(delta * delta))


def track_to_document(track: SilhouetteTrack) -> dict:
    quantization = None
    if track.quantization is not None:
        quantization = {"kind": track.quantization.kind, "num_bins": track.quantization.num_bins}
    return {
        "version": FORMAT_VERSION,
        "sample_rate_hz": track.sample_rate_hz,
        "window_len": track.window_len,
        "hop_len": track.hop_len,
        "quantization": quantization,
        "frames": [[float(lo), float(hi)] for lo, hi in track.frames],
    }


def track_from_document(doc: dict) -> SilhouetteTrack:
    if not isinstance(doc, dict):
        raise FormatError("silhouette document must be an object")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatError(f"unsupported silhouette format version: {doc.get('version')!r}")
    for key in ("sample_rate_hz", "window_len", "hop_len", "frames"):
        if key not in doc:
            raise FormatError(f"silhouette document missing field: {key}")
    raw_frames = doc["frames"]
    if not isinstance(raw_frames, list) or not raw_frames:
        raise FormatError("silhouette document must contain a non-empty frames list")
    frames = np.empty((len(raw_frames), 2), dtype=np.float64)
    for i, pair in enumerate(raw_frames):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise FormatError(f"frame {i} must be a [min, max] pair", frame_index=i)
        lo, hi = float(pair[0]), float(pair[1])
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise FormatError(f"frame {i} contains non-finite values", frame_index=i)
        if lo > hi:
            raise FormatError(f"frame {i} violates min <= max: [{lo}, {hi}]", frame_index=i)
        if lo < -1.0 or hi > 1.0:
            raise FormatError(f"frame {i} outside [-1, 1]: [{lo}, {hi}]", frame_index=i)
        frames[i] = (lo, hi)
    raw_scheme = doc.get("quantization")
    scheme = None
    if raw_scheme is not None:
        if not isinstance(raw_scheme, dict) or "kind" not in raw_scheme or "num_bins" not in raw_scheme:
            raise FormatError("quantization must be null or {kind, num_bins}")
        try:
            scheme = QuantizationScheme(kind=raw_scheme["kind"], num_bins=raw_scheme["num_bins"])
        except SilhouetteError as exc:
            raise FormatError(str(exc)) from exc
    try:
        return SilhouetteTrack(
            frames=frames,
            window_len=doc["window_len"],
            hop_len=doc["hop_len"],
            sample_rate_hz=doc["sample_rate_hz"],
            quantization=scheme,
        )
    except SilhouetteError as exc:
        raise FormatError(str(exc)) from exc


def serialize_silhouette(track: SilhouetteTrack) -> bytes:
    """Lossless textual serialization (JSON, shortest round-tripping floats)."""
    return (json.dumps(track_to_document(track)) + "\n").encode("utf-8")


def parse_silhouette(data: bytes | str) -> SilhouetteTrack:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed silhouette document: {exc}") from exc
    return track_from_document(doc)


def write_silhouette(track: SilhouetteTrack, path: str | Path) -> None:
    Path(path).write_bytes(serialize_silhouette(track))


def read_silhouette(path: str | Path) -> SilhouetteTrack:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"silhouette file does not exist: {path}")
    return parse_silhouette(path.read_bytes())
