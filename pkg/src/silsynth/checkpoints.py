"""Self-describing checkpoint archives.

A checkpoint stores the architecture configs, the quantization scheme the
model was trained with, all parameter tensors, and (for resumable training
checkpoints) optimizer and RNG state.  A fingerprint over the configs is
stored alongside and re-verified on load, so stale or mismatched archives
are rejected instead of silently misloading.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import torch

from .errors import CheckpointError
from .models import (
    DiscriminatorConfig,
    GeneratorConfig,
    Generator,
    MultiPeriodDiscriminator,
    MultiScaleDiscriminator,
    discriminator_config_from_dict,
    discriminator_config_to_dict,
    generator_config_from_dict,
    generator_config_to_dict,
)
from .silhouette import QuantizationScheme

FORMAT_VERSION = 1


def _quantization_doc(scheme: QuantizationScheme | None) -> dict | None:
    if scheme is None:
        return None
    return {"kind": scheme.kind, "num_bins": scheme.num_bins}


def _quantization_from_doc(doc: dict | None) -> QuantizationScheme | None:
    if doc is None:
        return None
    return QuantizationScheme(kind=doc["kind"], num_bins=doc["num_bins"])


def config_fingerprint(
    gen_cfg: GeneratorConfig,
    disc_cfg: DiscriminatorConfig,
    quantization: QuantizationScheme | None,
) -> str:
    """Stable hash of the architecture plus codec configuration."""
    canonical = json.dumps(
        {
            "generator": generator_config_to_dict(gen_cfg),
            "discriminator": discriminator_config_to_dict(disc_cfg),
            "quantization": _quantization_doc(quantization),
        },
        sort_keys=True,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass
class Checkpoint:
    path: Path
    step: int
    generator_config: GeneratorConfig
    discriminator_config: DiscriminatorConfig
    quantization: QuantizationScheme | None
    fingerprint: str
    payload: dict

    def build_generator(self) -> Generator:
        generator = Generator(self.generator_config)
        try:
            generator.load_state_dict(self.payload["generator_state"])
        except RuntimeError as exc:
            raise CheckpointError(f"generator parameters do not match config: {exc}") from exc
        generator.eval()
        return generator

    def build_discriminators(self) -> tuple[MultiPeriodDiscriminator, MultiScaleDiscriminator]:
        mpd = MultiPeriodDiscriminator(self.discriminator_config)
        msd = MultiScaleDiscriminator(self.discriminator_config)
        try:
            mpd.load_state_dict(self.payload["mpd_state"])
            msd.load_state_dict(self.payload["msd_state"])
        except RuntimeError as exc:
            raise CheckpointError(f"discriminator parameters do not match config: {exc}") from exc
        return mpd, msd


def save_checkpoint(
    path: str | Path,
    *,
    step: int,
    generator: Generator,
    mpd: MultiPeriodDiscriminator | None = None,
    msd: MultiScaleDiscriminator | None = None,
    quantization: QuantizationScheme | None = None,
    extra_state: dict | None = None,
) -> Path:
    """Write a checkpoint archive; ``extra_state`` holds optimizer/RNG state."""
    path = Path(path)
    gen_cfg = generator.config
    disc_cfg = mpd.config if mpd is not None else DiscriminatorConfig()
    archive = {
        "format_version": FORMAT_VERSION,
        "fingerprint": config_fingerprint(gen_cfg, disc_cfg, quantization),
        "generator_config": generator_config_to_dict(gen_cfg),
        "discriminator_config": discriminator_config_to_dict(disc_cfg),
        "quantization": _quantization_doc(quantization),
        "step": int(step),
        "generator_state": generator.state_dict(),
        "mpd_state": mpd.state_dict() if mpd is not None else None,
        "msd_state": msd.state_dict() if msd is not None else None,
        "extra_state": extra_state or {},
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(archive, path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint does not exist: {path}")
    try:
        archive = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:  # torch raises a zoo of unpickling errors
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(archive, dict) or archive.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format in {path}")
    gen_cfg = generator_config_from_dict(archive["generator_config"])
    disc_cfg = discriminator_config_from_dict(archive["discriminator_config"])
    quantization = _quantization_from_doc(archive.get("quantization"))
    expected = config_fingerprint(gen_cfg, disc_cfg, quantization)
    if archive.get("fingerprint") != expected:
        raise CheckpointError(
            f"fingerprint mismatch in {path}: stored {archive.get('fingerprint')!r}, config implies {expected!r}"
        )
    return Checkpoint(
        path=path,
        step=int(archive["step"]),
        generator_config=gen_cfg,
        discriminator_config=disc_cfg,
        quantization=quantization,
        fingerprint=archive["fingerprint"],
        payload=archive,
    )
