import numpy as np
import pytest
import torch

from silsynth.audio_io import Waveform
from silsynth.models import load_profile


def burst_clip(duration_s: float = 1.2, sample_rate: int = 24000) -> Waveform:
    """Deterministic burst-train clip: AM tone bursts separated by silence."""
    t = np.arange(int(duration_s * sample_rate)) / sample_rate
    env = np.zeros_like(t)
    for k, (start, dur) in enumerate([(0.05, 0.18), (0.33, 0.16), (0.58, 0.14), (0.82, 0.12)]):
        mask = (t >= start) & (t < start + dur)
        phase = (t[mask] - start) / dur
        env[mask] = np.sin(np.pi * phase) ** 0.8 * (0.85 - 0.12 * k)
    samples = env * np.sin(2 * np.pi * 210 * t) * 0.9 + env * 0.15 * np.sin(2 * np.pi * 430 * t)
    return Waveform(samples=samples, sample_rate_hz=sample_rate)


@pytest.fixture
def clip():
    return burst_clip()


@pytest.fixture
def tiny_profile():
    return load_profile("tiny")


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)
