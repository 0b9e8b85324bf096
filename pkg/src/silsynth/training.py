"""GAN losses, data pipeline, and the two-stage training schedule.

Stage one pretrains on a multi-utterance corpus; stage two fine-tunes on a
single target utterance (typically a one-item corpus).  Both stages run the
same alternating game: a discriminator update on real vs detached-fake
waveforms, then a generator update combining least-squares adversarial,
feature-matching, and mel-spectrogram terms.

Everything stochastic draws from one ``numpy`` generator seeded by the
plan, and that generator's state travels inside checkpoints, so a resumed
run replays the exact batch stream of an unbroken one.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn

from . import features as feat
from .audio_io import Waveform
from .checkpoints import Checkpoint, save_checkpoint
from .errors import ConfigError, TrainingError
from .models import (
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    MultiPeriodDiscriminator,
    MultiScaleDiscriminator,
    build_models,
)
from .silhouette import QuantizationScheme, SilhouetteTrack, extract_silhouette, quantize

STAGE_PRETRAIN = "pretrain"
STAGE_FINETUNE = "finetune"
_STAGES = (STAGE_PRETRAIN, STAGE_FINETUNE)


@dataclass(frozen=True)
class TrainPlan:
    """Stage descriptor: schedule, batch geometry, augmentation, loss weights."""

    stage: str
    total_steps: int
    batch_size: int = 16
    segment_seconds: float = 6.0
    aug_lambda_range: tuple = (0.3, 1.0)
    fm_weight: float = 2.0
    mel_weight: float = 45.0
    learning_rate: float = 2e-4
    adam_betas: tuple = (0.8, 0.99)
    lr_decay: float = 0.999
    lr_decay_every_steps: int = 1000
    rng_seed: int = 0
    checkpoint_every: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "aug_lambda_range", tuple(float(v) for v in self.aug_lambda_range))
        object.__setattr__(self, "adam_betas", tuple(float(v) for v in self.adam_betas))
        if self.stage not in _STAGES:
            raise ConfigError(f"stage must be one of {_STAGES}, got {self.stage!r}")
        if self.total_steps < 1:
            raise ConfigError("total_steps must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.segment_seconds <= 0:
            raise ConfigError("segment_seconds must be positive")
        low, high = self.aug_lambda_range
        if not (0.0 < low <= high <= 1.0):
            raise ConfigError(f"aug_lambda_range must satisfy 0 < low <= high <= 1, got {self.aug_lambda_range}")
        if self.fm_weight < 0 or self.mel_weight < 0:
            raise ConfigError("loss weights must be >= 0")
        if self.lr_decay_every_steps < 1:
            raise ConfigError("lr_decay_every_steps must be >= 1")


def plan_to_dict(plan: TrainPlan) -> dict:
    return {
        "stage": plan.stage,
        "total_steps": plan.total_steps,
        "batch_size": plan.batch_size,
        "segment_seconds": plan.segment_seconds,
        "aug_lambda_range": list(plan.aug_lambda_range),
        "loss_weights": {"fm": plan.fm_weight, "mel": plan.mel_weight},
        "learning_rate": plan.learning_rate,
        "adam_betas": list(plan.adam_betas),
        "lr_decay": plan.lr_decay,
        "lr_decay_every_steps": plan.lr_decay_every_steps,
        "rng_seed": plan.rng_seed,
        "checkpoint_every": plan.checkpoint_every,
    }


def plan_from_dict(doc: dict) -> TrainPlan:
    doc = dict(doc)
    weights = doc.pop("loss_weights", None)
    if weights is not None:
        doc["fm_weight"] = weights.get("fm", 2.0)
        doc["mel_weight"] = weights.get("mel", 45.0)
    try:
        return TrainPlan(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad train plan: {exc}") from exc


class MelTransform(nn.Module):
    """Differentiable twin of :func:`silsynth.features.mel_spectrogram`.

    Kept numerically in lockstep with the NumPy reference (parity-tested);
    the reference stays the oracle, this one carries gradients.
    """

    def __init__(
        self,
        sample_rate_hz: int,
        fft_len: int = feat.DEFAULT_FFT_LEN,
        hop_len: int = feat.DEFAULT_HOP_LEN,
        mel_bins: int = feat.DEFAULT_MEL_BINS,
        fmax_hz: float = feat.DEFAULT_FMAX_HZ,
        dtype: torch.dtype = torch.float32,
    ):
        super().__init__()
        self.fft_len = fft_len
        self.hop_len = hop_len
        self.mel_bins = mel_bins
        filterbank = feat.mel_filterbank(sample_rate_hz, fft_len, mel_bins, fmax_hz=fmax_hz)
        self.register_buffer("filterbank", torch.from_numpy(filterbank).to(dtype))
        self.register_buffer("window", torch.from_numpy(feat.hann_periodic(fft_len)).to(dtype))

    def forward(self, wave: torch.Tensor) -> torch.Tensor:
        """(batch, samples) -> (batch, frames, mel_bins) log-mel."""
        if wave.shape[-1] < self.fft_len:
            raise TrainingError(f"waveform of {wave.shape[-1]} samples too short for fft_len {self.fft_len}")
        pad_left, pad_right = feat.pad_for_frames(wave.shape[-1], self.fft_len, self.hop_len)
        padded = torch.nn.functional.pad(wave.unsqueeze(1), (pad_left, pad_right), mode="reflect").squeeze(1)
        frames = padded.unfold(-1, self.fft_len, self.hop_len) * self.window
        magnitude = torch.abs(torch.fft.rfft(frames, dim=-1))
        mel = magnitude @ self.filterbank.T
        return torch.log(torch.clamp(mel, min=feat.LOG_FLOOR))


def sample_batch(
    corpus: Sequence[Waveform],
    plan: TrainPlan,
    rng: np.random.Generator,
    scheme: QuantizationScheme | None = None,
    window_len: int = 1024,
    hop_len: int = 256,
) -> list[tuple[Waveform, SilhouetteTrack]]:
    """Draw one batch of (scaled segment, conditioned silhouette) pairs.

    Utterances shorter than the segment length are zero-padded on the
    right; silhouettes are extracted after amplitude scaling so input and
    target stay consistent.
    """
    if not corpus:
        raise TrainingError("training corpus is empty")
    for i, utterance in enumerate(corpus):
        if len(utterance) < window_len:
            raise TrainingError(f"corpus item {i} is shorter than one silhouette window")
    batch = []
    for _ in range(plan.batch_size):
        utterance = corpus[int(rng.integers(len(corpus)))]
        seg_len = int(round(plan.segment_seconds * utterance.sample_rate_hz))
        samples = utterance.samples
        if samples.size < seg_len:
            samples = np.pad(samples, (0, seg_len - samples.size))
        else:
            offset = int(rng.integers(samples.size - seg_len + 1))
            samples = samples[offset : offset + seg_len]
        low, high = plan.aug_lambda_range
        lam = float(rng.uniform(low, high))
        segment = Waveform(samples=samples * lam, sample_rate_hz=utterance.sample_rate_hz)
        track = extract_silhouette(segment, window_len, hop_len)
        if scheme is not None:
            track = quantize(track, scheme)
        batch.append((segment, track))
    return batch


def _check_finite(value: torch.Tensor, label: str) -> torch.Tensor:
    if not torch.isfinite(value).all():
        raise TrainingError(f"non-finite {label}")
    return value


def adversarial_loss(fake_scores: Sequence[torch.Tensor]) -> torch.Tensor:
    """Least-squares generator term: sum over discriminators of E[(D(fake) - 1)^2]."""
    total = sum(torch.mean((scores - 1.0) ** 2) for scores in fake_scores)
    return _check_finite(total, "adversarial loss")


def feature_matching_loss(
    real_features: Sequence[Sequence[torch.Tensor]],
    fake_features: Sequence[Sequence[torch.Tensor]],
) -> torch.Tensor:
    """Sum over discriminators and layers of mean |f_real - f_fake|."""
    if len(real_features) != len(fake_features):
        raise TrainingError("feature-matching loss: discriminator count mismatch")
    total = None
    for real_list, fake_list in zip(real_features, fake_features):
        if len(real_list) != len(fake_list):
            raise TrainingError("feature-matching loss: layer count mismatch")
        for real, fake in zip(real_list, fake_list):
            if real.shape != fake.shape:
                raise TrainingError(f"feature-matching loss: shape mismatch {tuple(real.shape)} vs {tuple(fake.shape)}")
            term = torch.mean(torch.abs(real.detach() - fake))
            total = term if total is None else total + term
    if total is None:
        raise TrainingError("feature-matching loss: no features")
    return _check_finite(total, "feature-matching loss")


def mel_loss(mel_real: torch.Tensor, mel_fake: torch.Tensor) -> torch.Tensor:
    """Mean |mel(x) - mel(x_fake)| over all frames and bands."""
    if mel_real.shape != mel_fake.shape:
        raise TrainingError(f"mel loss: shape mismatch {tuple(mel_real.shape)} vs {tuple(mel_fake.shape)}")
    return _check_finite(torch.mean(torch.abs(mel_real.detach() - mel_fake)), "mel loss")


def generator_loss(
    fake_scores: Sequence[torch.Tensor],
    real_features: Sequence[Sequence[torch.Tensor]],
    fake_features: Sequence[Sequence[torch.Tensor]],
    mel_real: torch.Tensor,
    mel_fake: torch.Tensor,
    plan: TrainPlan,
) -> tuple[torch.Tensor, dict]:
    """Total generator objective plus per-component values for logging."""
    adv = adversarial_loss(fake_scores)
    fm = feature_matching_loss(real_features, fake_features)
    mel = mel_loss(mel_real, mel_fake)
    total = adv + plan.fm_weight * fm + plan.mel_weight * mel
    components = {
        "adv": float(adv.detach()),
        "fm": float(fm.detach()),
        "mel": float(mel.detach()),
        "total": float(total.detach()),
    }
    return total, components


def discriminator_loss(
    real_scores: Sequence[torch.Tensor],
    fake_scores: Sequence[torch.Tensor],
) -> torch.Tensor:
    """Least-squares objective: sum over discriminators of E[(D(x)-1)^2 + D(fake)^2].

    Callers must produce ``fake_scores`` from a generator output that was
    detached (or computed under ``no_grad``) so discriminator updates never
    reach generator parameters.
    """
    if len(real_scores) != len(fake_scores):
        raise TrainingError("discriminator loss: output count mismatch")
    total = sum(
        torch.mean((real - 1.0) ** 2) + torch.mean(fake**2)
        for real, fake in zip(real_scores, fake_scores)
    )
    return _check_finite(total, "discriminator loss")


@dataclass
class TrainState:
    """Mutable training-loop state: step counter, modules, optimizers, RNG."""

    step: int
    generator: Generator
    mpd: MultiPeriodDiscriminator
    msd: MultiScaleDiscriminator
    g_optimizer: torch.optim.Optimizer
    d_optimizer: torch.optim.Optimizer
    g_scheduler: torch.optim.lr_scheduler.ExponentialLR
    d_scheduler: torch.optim.lr_scheduler.ExponentialLR
    rng: np.random.Generator
    quantization: QuantizationScheme | None = None
    last_losses: dict = field(default_factory=dict)


def _make_optimizers(generator, mpd, msd, plan):
    g_opt = torch.optim.AdamW(generator.parameters(), lr=plan.learning_rate, betas=plan.adam_betas)
    d_opt = torch.optim.AdamW(
        list(mpd.parameters()) + list(msd.parameters()), lr=plan.learning_rate, betas=plan.adam_betas
    )
    g_sched = torch.optim.lr_scheduler.ExponentialLR(g_opt, gamma=plan.lr_decay)
    d_sched = torch.optim.lr_scheduler.ExponentialLR(d_opt, gamma=plan.lr_decay)
    return g_opt, d_opt, g_sched, d_sched


def init_train_state(
    gen_cfg: GeneratorConfig,
    disc_cfg: DiscriminatorConfig,
    plan: TrainPlan,
    quantization: QuantizationScheme | None = None,
) -> TrainState:
    """Fresh state at step 0 with seeded parameter initialization."""
    torch.manual_seed(plan.rng_seed)
    generator, mpd, msd = build_models(gen_cfg, disc_cfg)
    g_opt, d_opt, g_sched, d_sched = _make_optimizers(generator, mpd, msd, plan)
    return TrainState(
        step=0,
        generator=generator,
        mpd=mpd,
        msd=msd,
        g_optimizer=g_opt,
        d_optimizer=d_opt,
        g_scheduler=g_sched,
        d_scheduler=d_sched,
        rng=np.random.default_rng(plan.rng_seed),
        quantization=quantization,
    )


def state_from_checkpoint(ckpt: Checkpoint, plan: TrainPlan) -> TrainState:
    """Rebuild a resumable state from a full training checkpoint."""
    generator = ckpt.build_generator()
    generator.train()
    mpd, msd = ckpt.build_discriminators()
    g_opt, d_opt, g_sched, d_sched = _make_optimizers(generator, mpd, msd, plan)
    extra = ckpt.payload.get("extra_state", {})
    rng = np.random.default_rng(plan.rng_seed)
    if extra:
        try:
            g_opt.load_state_dict(extra["g_optimizer"])
            d_opt.load_state_dict(extra["d_optimizer"])
            g_sched.load_state_dict(extra["g_scheduler"])
            d_sched.load_state_dict(extra["d_scheduler"])
            rng.bit_generator.state = json.loads(extra["numpy_rng_state"])
            torch.set_rng_state(extra["torch_rng_state"])
        except KeyError as exc:
            raise TrainingError(f"checkpoint {ckpt.path} is not resumable: missing {exc}") from exc
    return TrainState(
        step=ckpt.step,
        generator=generator,
        mpd=mpd,
        msd=msd,
        g_optimizer=g_opt,
        d_optimizer=d_opt,
        g_scheduler=g_sched,
        d_scheduler=d_sched,
        rng=rng,
        quantization=ckpt.quantization,
    )


def warm_start_from_checkpoint(
    ckpt: Checkpoint,
    plan: TrainPlan,
    quantization: QuantizationScheme | None = None,
) -> TrainState:
    """Fresh stage (step 0, fresh optimizers) initialized from checkpoint parameters."""
    torch.manual_seed(plan.rng_seed)
    generator = ckpt.build_generator()
    generator.train()
    mpd, msd = ckpt.build_discriminators()
    g_opt, d_opt, g_sched, d_sched = _make_optimizers(generator, mpd, msd, plan)
    return TrainState(
        step=0,
        generator=generator,
        mpd=mpd,
        msd=msd,
        g_optimizer=g_opt,
        d_optimizer=d_opt,
        g_scheduler=g_sched,
        d_scheduler=d_sched,
        rng=np.random.default_rng(plan.rng_seed),
        quantization=quantization if quantization is not None else ckpt.quantization,
    )


def _extra_state(state: TrainState) -> dict:
    return {
        "g_optimizer": state.g_optimizer.state_dict(),
        "d_optimizer": state.d_optimizer.state_dict(),
        "g_scheduler": state.g_scheduler.state_dict(),
        "d_scheduler": state.d_scheduler.state_dict(),
        "numpy_rng_state": json.dumps(state.rng.bit_generator.state),
        "torch_rng_state": torch.get_rng_state(),
    }


def write_train_checkpoint(state: TrainState, directory: str | Path, name: str | None = None) -> Path:
    directory = Path(directory)
    return save_checkpoint(
        directory / (name or f"ckpt_{state.step}"),
        step=state.step,
        generator=state.generator,
        mpd=state.mpd,
        msd=state.msd,
        quantization=state.quantization,
        extra_state=_extra_state(state),
    )


def _batch_tensors(batch, hop_len: int):
    tracks = np.stack([track.frames.T for _, track in batch])  # (B, 2, F)
    n_frames = tracks.shape[2]
    target_len = n_frames * hop_len
    segments = np.stack([segment.samples[:target_len] for segment, _ in batch])
    y = torch.from_numpy(tracks).to(torch.float32)
    x = torch.from_numpy(segments).to(torch.float32).unsqueeze(1)
    return y, x


def _truncate_log(log_path: Path, step: int) -> None:
    if not log_path.is_file():
        return
    kept = [
        line
        for line in log_path.read_text().splitlines()
        if line.strip() and json.loads(line).get("step", 0) <= step
    ]
    log_path.write_text("".join(f"{line}\n" for line in kept))


def run_stage(
    state: TrainState,
    plan: TrainPlan,
    corpus: Sequence[Waveform],
    checkpoint_dir: str | Path | None = None,
    window_len: int = 1024,
    hop_len: int = 256,
    step_hook=None,
) -> TrainState:
    """Alternate discriminator/generator updates until ``plan.total_steps``.

    Writes ``ckpt_<step>`` archives every ``plan.checkpoint_every`` steps
    (and at the end) plus one ``log.ndjson`` record per step when a
    checkpoint directory is given.  A non-finite loss aborts with a
    diagnostic snapshot.  ``step_hook(step, losses, state)`` runs after
    each step when provided.
    """
    if state.step >= plan.total_steps:
        return state
    if not corpus:
        raise TrainingError("training corpus is empty")
    sample_rate = corpus[0].sample_rate_hz
    mel_transform = MelTransform(sample_rate, fft_len=window_len, hop_len=hop_len)
    log_file = None
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
        log_path = checkpoint_dir / "log.ndjson"
        _truncate_log(log_path, state.step)
        log_file = log_path.open("a")

    generator, mpd, msd = state.generator, state.mpd, state.msd
    generator.train()
    mpd.train()
    msd.train()
    try:
        while state.step < plan.total_steps:
            started = time.perf_counter()
            step = state.step + 1
            batch = sample_batch(corpus, plan, state.rng, state.quantization, window_len, hop_len)
            y, x = _batch_tensors(batch, hop_len)

            # discriminator update; fake path detached from generator
            with torch.no_grad():
                x_fake = generator(y)
            real_out = mpd(x) + msd(x)
            fake_out = mpd(x_fake) + msd(x_fake)
            d_loss = discriminator_loss([s for s, _ in real_out], [s for s, _ in fake_out])
            state.d_optimizer.zero_grad()
            d_loss.backward()
            state.d_optimizer.step()
            d_loss_value = float(d_loss.detach())

            # generator update against the refreshed discriminators
            x_fake = generator(y)
            with torch.no_grad():
                real_out = mpd(x) + msd(x)
                mel_real = mel_transform(x.squeeze(1))
            fake_out = mpd(x_fake) + msd(x_fake)
            mel_fake = mel_transform(x_fake.squeeze(1))
            g_loss, components = generator_loss(
                [s for s, _ in fake_out],
                [f for _, f in real_out],
                [f for _, f in fake_out],
                mel_real,
                mel_fake,
                plan,
            )
            state.g_optimizer.zero_grad()
            g_loss.backward()
            state.g_optimizer.step()

            state.step = step
            if step % plan.lr_decay_every_steps == 0:
                state.g_scheduler.step()
                state.d_scheduler.step()

            losses = {
                "step": step,
                "L_G": components["total"],
                "L_D": d_loss_value,
                "fm": components["fm"],
                "mel": components["mel"],
                "adv": components["adv"],
                "wall_ms": (time.perf_counter() - started) * 1000.0,
            }
            if not all(np.isfinite(v) for v in losses.values()):
                if checkpoint_dir is not None:
                    write_train_checkpoint(state, checkpoint_dir, name=f"diagnostic_{step}")
                raise TrainingError(f"non-finite loss at step {step}: {losses}")
            state.last_losses = losses
            if log_file is not None:
                log_file.write(json.dumps(losses) + "\n")
                log_file.flush()
            if checkpoint_dir is not None and (
                step % plan.checkpoint_every == 0 or step == plan.total_steps
            ):
                write_train_checkpoint(state, checkpoint_dir)
            if step_hook is not None:
                step_hook(step, losses, state)
    finally:
        if log_file is not None:
            log_file.close()
    return state
