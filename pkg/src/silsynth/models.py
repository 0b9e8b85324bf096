"""Silhouette-conditioned generator and the period/scale discriminator families.

The generator turns a frame-rate (min, max) envelope into a raw waveform by
stacked transposed convolutions whose rates multiply to the hop length
(256), each followed by a multi-receptive-field fusion block that averages
residual sub-blocks of different kernel sizes and dilations.  Realism is
judged by two discriminator families: one reshapes the waveform into a
(time/period, period) lattice and convolves it in 2-D, the other convolves
progressively average-pooled copies in 1-D.

Architecture hyperparameters are never hard-coded here; the stock "v1" and
"tiny" profiles live in packaged JSON files (see :func:`load_profile`).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.parametrizations import spectral_norm, weight_norm

from .audio_io import Waveform
from .errors import ModelError
from .silhouette import SilhouetteTrack

HOP_PRODUCT = 256  # upsample rates must multiply to the silhouette hop

# per-stage signal gain of a conv initialized with normal(0, std):
# std * sqrt(fan_in); the stock 512-wide profile pins std = 0.01, which is
# gain 0.9 at its widths, so width-scaled init uses that same gain
SCALED_INIT_GAIN = 0.9


@dataclass(frozen=True)
class GeneratorConfig:
    in_channels: int = 2
    initial_channels: int = 512
    upsample_rates: tuple = (8, 8, 2, 2)
    upsample_kernel_sizes: tuple = (16, 16, 4, 4)
    mrf_kernel_sizes: tuple = (3, 7, 11)
    mrf_dilations: tuple = ((1, 3, 5), (1, 3, 5), (1, 3, 5))
    io_kernel_size: int = 7
    leaky_slope: float = 0.1
    weight_init_std: float | None = 0.01  # None: width-scaled, gain/sqrt(fan_in)

    def __post_init__(self):
        object.__setattr__(self, "upsample_rates", tuple(int(r) for r in self.upsample_rates))
        object.__setattr__(self, "upsample_kernel_sizes", tuple(int(k) for k in self.upsample_kernel_sizes))
        object.__setattr__(self, "mrf_kernel_sizes", tuple(int(k) for k in self.mrf_kernel_sizes))
        object.__setattr__(self, "mrf_dilations", tuple(tuple(int(d) for d in group) for group in self.mrf_dilations))
        if math.prod(self.upsample_rates) != HOP_PRODUCT:
            raise ModelError(f"upsample rates {self.upsample_rates} must multiply to {HOP_PRODUCT}")
        if len(self.upsample_rates) != len(self.upsample_kernel_sizes):
            raise ModelError("upsample_rates and upsample_kernel_sizes must have equal length")
        for rate, kernel in zip(self.upsample_rates, self.upsample_kernel_sizes):
            if kernel < rate or (kernel - rate) % 2 != 0:
                raise ModelError(f"upsample kernel {kernel} incompatible with rate {rate} (need k >= r, k - r even)")
        if len(self.mrf_kernel_sizes) != len(self.mrf_dilations):
            raise ModelError("mrf_kernel_sizes and mrf_dilations must have equal length")
        if any(k % 2 == 0 for k in self.mrf_kernel_sizes):
            raise ModelError(f"mrf kernels must be odd, got {self.mrf_kernel_sizes}")
        if self.io_kernel_size % 2 == 0:
            raise ModelError("io_kernel_size must be odd")
        if self.in_channels < 1 or self.initial_channels < 1:
            raise ModelError("channel counts must be positive")


@dataclass(frozen=True)
class DiscriminatorConfig:
    mpd_periods: tuple = (2, 3, 5, 7, 11)
    msd_scales: int = 3
    mpd_channels: int = 32
    mpd_max_channels: int = 1024
    msd_channels: int = 128
    msd_max_channels: int = 1024
    msd_groups: int = 16
    msd_spectral_norm_first: bool = True
    mpd_padding: str = "reflect"
    leaky_slope: float = 0.1
    weight_init_std: float | None = 0.01  # None: width-scaled, gain/sqrt(fan_in)

    def __post_init__(self):
        object.__setattr__(self, "mpd_periods", tuple(int(p) for p in self.mpd_periods))
        if len(set(self.mpd_periods)) != len(self.mpd_periods):
            raise ModelError(f"periods must be distinct, got {self.mpd_periods}")
        if any(p < 1 for p in self.mpd_periods):
            raise ModelError("periods must be positive")
        if self.msd_scales < 1:
            raise ModelError("msd_scales must be >= 1")
        if self.mpd_padding not in ("reflect", "zero"):
            raise ModelError(f"mpd_padding must be 'reflect' or 'zero', got {self.mpd_padding!r}")


def _conv_fan_in(conv: nn.Module) -> int:
    if isinstance(conv, (nn.ConvTranspose1d, nn.ConvTranspose2d)):
        return conv.weight.shape[0] * conv.weight[0, 0].numel()
    return conv.weight[0].numel()


def _init_conv(conv: nn.Module, std: float | None) -> nn.Module:
    if std is None:
        std = SCALED_INIT_GAIN / math.sqrt(_conv_fan_in(conv))
    nn.init.normal_(conv.weight, mean=0.0, std=std)
    return conv


def _wn(conv: nn.Module, std: float | None) -> nn.Module:
    return weight_norm(_init_conv(conv, std))


def _sn(conv: nn.Module, std: float | None) -> nn.Module:
    return spectral_norm(_init_conv(conv, std))


class ResidualUnit(nn.Module):
    """Dilated conv followed by a unit-dilation conv, with a skip connection."""

    def __init__(self, channels, kernel_size, dilation, leaky_slope, init_std):
        super().__init__()
        self.leaky_slope = leaky_slope
        pad_dilated = dilation * (kernel_size - 1) // 2
        pad_unit = (kernel_size - 1) // 2
        self.conv_dilated = _wn(
            nn.Conv1d(channels, channels, kernel_size, dilation=dilation, padding=pad_dilated), init_std
        )
        self.conv_unit = _wn(nn.Conv1d(channels, channels, kernel_size, padding=pad_unit), init_std)

    def forward(self, x):
        y = self.conv_dilated(F.leaky_relu(x, self.leaky_slope))
        y = self.conv_unit(F.leaky_relu(y, self.leaky_slope))
        return x + y


class MrfBlock(nn.Module):
    """Multi-receptive-field fusion: average of per-kernel residual stacks."""

    def __init__(self, channels, kernel_sizes, dilation_groups, leaky_slope, init_std):
        super().__init__()
        self.branches = nn.ModuleList()
        for kernel_size, dilations in zip(kernel_sizes, dilation_groups):
            self.branches.append(
                nn.Sequential(
                    *[ResidualUnit(channels, kernel_size, d, leaky_slope, init_std) for d in dilations]
                )
            )

    def forward(self, x):
        acc = None
        for branch in self.branches:
            out = branch(x)
            acc = out if acc is None else acc + out
        return acc / len(self.branches)


class Generator(nn.Module):
    """Frame-rate envelope to waveform, output length = frames * 256."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        ch = config.initial_channels
        std = config.weight_init_std
        pad_io = (config.io_kernel_size - 1) // 2
        self.input_conv = _wn(nn.Conv1d(config.in_channels, ch, config.io_kernel_size, padding=pad_io), std)
        self.upsamples = nn.ModuleList()
        self.mrfs = nn.ModuleList()
        for i, (rate, kernel) in enumerate(zip(config.upsample_rates, config.upsample_kernel_sizes)):
            in_ch = ch // (2**i)
            out_ch = ch // (2 ** (i + 1))
            self.upsamples.append(
                _wn(nn.ConvTranspose1d(in_ch, out_ch, kernel, stride=rate, padding=(kernel - rate) // 2), std)
            )
            self.mrfs.append(
                MrfBlock(out_ch, config.mrf_kernel_sizes, config.mrf_dilations, config.leaky_slope, std)
            )
        final_ch = ch // (2 ** len(config.upsample_rates))
        if final_ch < 1:
            raise ModelError("initial_channels too small for the number of upsample stages")
        self.output_conv = _wn(nn.Conv1d(final_ch, 1, config.io_kernel_size, padding=pad_io), std)

    def forward(self, x):
        if x.ndim != 3 or x.shape[1] != self.config.in_channels:
            raise ModelError(f"generator input must be (batch, {self.config.in_channels}, frames), got {tuple(x.shape)}")
        if x.shape[2] < 1:
            raise ModelError("generator input must contain at least one frame")
        x = self.input_conv(x)
        for upsample, mrf in zip(self.upsamples, self.mrfs):
            x = F.leaky_relu(x, self.config.leaky_slope)
            x = upsample(x)
            x = mrf(x)
        x = F.leaky_relu(x, self.config.leaky_slope)
        return torch.tanh(self.output_conv(x))


class PeriodDiscriminator(nn.Module):
    """Judges the waveform reshaped to a (time/period, period) lattice."""

    def __init__(self, period: int, config: DiscriminatorConfig):
        super().__init__()
        self.period = period
        self.padding = config.mpd_padding
        self.leaky_slope = config.leaky_slope
        chans = [1]
        for i in range(4):
            chans.append(min(config.mpd_channels * 4**i, config.mpd_max_channels))
        chans.append(chans[-1])
        self.convs = nn.ModuleList()
        std = config.weight_init_std
        for i in range(5):
            stride = 3 if i < 4 else 1
            self.convs.append(_wn(nn.Conv2d(chans[i], chans[i + 1], (5, 1), (stride, 1), padding=(2, 0)), std))
        self.output_conv = _wn(nn.Conv2d(chans[-1], 1, (3, 1), padding=(1, 0)), std)

    @property
    def num_feature_layers(self) -> int:
        return len(self.convs) + 1

    def forward(self, x):
        b, c, t = x.shape
        if t < 1:
            raise ModelError("empty input to period discriminator")
        remainder = t % self.period
        if remainder:
            pad = self.period - remainder
            mode = "reflect" if (self.padding == "reflect" and pad < t) else "constant"
            x = F.pad(x, (0, pad), mode=mode)
            t += pad
        x = x.view(b, c, t // self.period, self.period)
        features = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), self.leaky_slope)
            features.append(x)
        x = self.output_conv(x)
        features.append(x)
        return torch.flatten(x, 1, -1), features


class MultiPeriodDiscriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        self.discriminators = nn.ModuleList(
            [PeriodDiscriminator(p, config) for p in config.mpd_periods]
        )

    def run(self, x, period: int):
        try:
            idx = self.config.mpd_periods.index(period)
        except ValueError:
            raise ModelError(f"period {period} not configured (have {self.config.mpd_periods})") from None
        return self.discriminators[idx](x)

    def forward(self, x):
        return [d(x) for d in self.discriminators]


class ScaleDiscriminator(nn.Module):
    """Judges the raw (or pooled) waveform with grouped 1-D convolutions."""

    def __init__(self, config: DiscriminatorConfig, use_spectral_norm: bool = False):
        super().__init__()
        self.leaky_slope = config.leaky_slope
        norm = _sn if use_spectral_norm else _wn
        ch, cap = config.msd_channels, config.msd_max_channels
        outs = [ch, ch, min(2 * ch, cap), min(4 * ch, cap), min(8 * ch, cap), min(8 * ch, cap), min(8 * ch, cap)]
        kernels = [15, 41, 41, 41, 41, 41, 5]
        strides = [1, 2, 2, 4, 4, 1, 1]
        groups = [1, 4, config.msd_groups, config.msd_groups, config.msd_groups, config.msd_groups, 1]
        self.convs = nn.ModuleList()
        std = config.weight_init_std
        in_ch = 1
        for out_ch, k, s, g in zip(outs, kernels, strides, groups):
            g = math.gcd(g, math.gcd(in_ch, out_ch))
            self.convs.append(norm(nn.Conv1d(in_ch, out_ch, k, s, padding=(k - 1) // 2, groups=g), std))
            in_ch = out_ch
        self.output_conv = norm(nn.Conv1d(in_ch, 1, 3, padding=1), std)

    @property
    def num_feature_layers(self) -> int:
        return len(self.convs) + 1

    def forward(self, x):
        if x.shape[-1] < 1:
            raise ModelError("empty input to scale discriminator")
        features = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), self.leaky_slope)
            features.append(x)
        x = self.output_conv(x)
        features.append(x)
        return torch.flatten(x, 1, -1), features


class MultiScaleDiscriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        self.discriminators = nn.ModuleList(
            [
                ScaleDiscriminator(config, use_spectral_norm=(i == 0 and config.msd_spectral_norm_first))
                for i in range(config.msd_scales)
            ]
        )
        self.pooling = nn.AvgPool1d(kernel_size=4, stride=2, padding=2)

    def run(self, x, scale: int):
        if not 0 <= scale < self.config.msd_scales:
            raise ModelError(f"scale {scale} out of range (have {self.config.msd_scales} scales)")
        for _ in range(scale):
            x = self.pooling(x)
        if x.shape[-1] < 2:
            raise ModelError(f"input too short for scale {scale}")
        return self.discriminators[scale](x)

    def forward(self, x):
        outputs = []
        for i, disc in enumerate(self.discriminators):
            if i > 0:
                x = self.pooling(x)
            outputs.append(disc(x))
        return outputs


def build_models(gen_cfg: GeneratorConfig, disc_cfg: DiscriminatorConfig):
    return Generator(gen_cfg), MultiPeriodDiscriminator(disc_cfg), MultiScaleDiscriminator(disc_cfg)


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def track_to_tensor(track: SilhouetteTrack, dtype=torch.float32) -> torch.Tensor:
    """Silhouette frames as a (1, 2, frames) conditioning tensor."""
    return torch.from_numpy(np.ascontiguousarray(track.frames.T)).to(dtype).unsqueeze(0)


def synthesize(generator: Generator, track: SilhouetteTrack) -> Waveform:
    """Run the generator on one silhouette; output has frames * 256 samples."""
    was_training = generator.training
    generator.eval()
    try:
        with torch.no_grad():
            dtype = next(generator.parameters()).dtype
            out = generator(track_to_tensor(track, dtype=dtype))
    finally:
        generator.train(was_training)
    samples = out[0, 0].detach().cpu().numpy().astype(np.float64)
    return Waveform(samples=samples, sample_rate_hz=track.sample_rate_hz)


def discriminate_mpd(mpd: MultiPeriodDiscriminator, waveform: Waveform, period: int):
    """Score a waveform with one period discriminator; returns (scores, features)."""
    x = torch.from_numpy(waveform.samples).to(torch.float32).view(1, 1, -1)
    with torch.no_grad():
        scores, features = mpd.run(x, period)
    return scores[0].numpy(), [f[0].numpy() for f in features]


def discriminate_msd(msd: MultiScaleDiscriminator, waveform: Waveform, scale: int):
    """Score a waveform with one scale discriminator; returns (scores, features)."""
    x = torch.from_numpy(waveform.samples).to(torch.float32).view(1, 1, -1)
    with torch.no_grad():
        scores, features = msd.run(x, scale)
    return scores[0].numpy(), [f[0].numpy() for f in features]


def load_profile(name: str) -> tuple[GeneratorConfig, DiscriminatorConfig]:
    """Load a named architecture profile from the packaged JSON files."""
    try:
        text = resources.files("silsynth.profiles").joinpath(f"{name}.json").read_text()
    except FileNotFoundError:
        raise ModelError(f"unknown model profile: {name!r}") from None
    doc = json.loads(text)
    return generator_config_from_dict(doc["generator"]), discriminator_config_from_dict(doc["discriminator"])


def generator_config_from_dict(doc: dict) -> GeneratorConfig:
    return GeneratorConfig(**doc)


def discriminator_config_from_dict(doc: dict) -> DiscriminatorConfig:
    return DiscriminatorConfig(**doc)


def generator_config_to_dict(cfg: GeneratorConfig) -> dict:
    return json.loads(json.dumps(asdict(cfg)))


def discriminator_config_to_dict(cfg: DiscriminatorConfig) -> dict:
    return json.loads(json.dumps(asdict(cfg)))
