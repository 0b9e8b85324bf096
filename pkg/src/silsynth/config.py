"""Textual (JSON) run configurations for the train/finetune/eval commands.

Relative paths inside a config resolve against the config file's directory.
A corpus or source entry may be a WAV file or a directory, in which case
every ``*.wav`` inside (sorted) is used.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .audio_io import Waveform, load_wav
from .errors import ConfigError
from .models import (
    DiscriminatorConfig,
    GeneratorConfig,
    discriminator_config_from_dict,
    generator_config_from_dict,
    load_profile,
)
from .silhouette import QuantizationScheme
from .training import TrainPlan, plan_from_dict


def quantization_from_doc(doc: dict | None) -> QuantizationScheme | None:
    if doc is None:
        return None
    if not isinstance(doc, dict) or "kind" not in doc or "num_bins" not in doc:
        raise ConfigError("quantization must be null or {kind, num_bins}")
    return QuantizationScheme(kind=doc["kind"], num_bins=doc["num_bins"])


def _expand_audio_paths(entries, base: Path) -> list[Path]:
    paths: list[Path] = []
    for entry in entries:
        path = Path(entry)
        if not path.is_absolute():
            path = base / path
        if path.is_dir():
            found = sorted(path.glob("*.wav"))
            if not found:
                raise ConfigError(f"no .wav files in directory {path}")
            paths.extend(found)
        else:
            paths.append(path)
    return paths


def load_corpus(paths: list[Path]) -> list[Waveform]:
    return [load_wav(p) for p in paths]


@dataclass(frozen=True)
class TrainingConfig:
    plan: TrainPlan
    generator: GeneratorConfig
    discriminator: DiscriminatorConfig
    quantization: QuantizationScheme | None
    corpus_paths: tuple
    checkpoint_dir: Path
    window_len: int = 1024
    hop_len: int = 256


def _read_json(path: Path) -> dict:
    if not path.is_file():
        raise ConfigError(f"config file does not exist: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return doc


def load_training_config(path: str | Path, seed_override: int | None = None) -> TrainingConfig:
    path = Path(path)
    doc = _read_json(path)
    base = path.parent
    for key in ("stage", "corpus", "plan", "checkpoint_dir"):
        if key not in doc:
            raise ConfigError(f"training config missing field: {key}")
    if "profile" in doc:
        gen_cfg, disc_cfg = load_profile(doc["profile"])
        if "generator" in doc or "discriminator" in doc:
            raise ConfigError("give either a profile name or inline generator/discriminator configs, not both")
    else:
        try:
            gen_cfg = generator_config_from_dict(doc["generator"])
            disc_cfg = discriminator_config_from_dict(doc["discriminator"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad model config: {exc}") from exc
    plan_doc = dict(doc["plan"])
    plan_doc["stage"] = doc["stage"]
    if seed_override is not None:
        plan_doc["rng_seed"] = seed_override
    plan = plan_from_dict(plan_doc)
    checkpoint_dir = Path(doc["checkpoint_dir"])
    if not checkpoint_dir.is_absolute():
        checkpoint_dir = base / checkpoint_dir
    return TrainingConfig(
        plan=plan,
        generator=gen_cfg,
        discriminator=disc_cfg,
        quantization=quantization_from_doc(doc.get("quantization")),
        corpus_paths=tuple(_expand_audio_paths(doc["corpus"], base)),
        checkpoint_dir=checkpoint_dir,
        window_len=int(doc.get("window_len", 1024)),
        hop_len=int(doc.get("hop_len", 256)),
    )


@dataclass(frozen=True)
class EvalSystemConfig:
    name: str
    quantization: QuantizationScheme | None
    checkpoint_paths: tuple


@dataclass(frozen=True)
class EvalConfig:
    seed: int
    source_paths: tuple
    output_dir: Path
    systems: tuple
    window_len: int = 1024
    hop_len: int = 256
    segment_seconds: float = 6.0
    max_overlays: int = 0


def load_eval_config(path: str | Path, seed_override: int | None = None) -> EvalConfig:
    path = Path(path)
    doc = _read_json(path)
    base = path.parent
    for key in ("seed", "sources", "output_dir", "systems"):
        if key not in doc:
            raise ConfigError(f"eval config missing field: {key}")
    systems = []
    for i, sys_doc in enumerate(doc["systems"]):
        if "name" not in sys_doc or "checkpoints" not in sys_doc:
            raise ConfigError(f"eval system {i} needs name and checkpoints")
        checkpoints = []
        for entry in sys_doc["checkpoints"]:
            ckpt = Path(entry)
            checkpoints.append(ckpt if ckpt.is_absolute() else base / ckpt)
        systems.append(
            EvalSystemConfig(
                name=sys_doc["name"],
                quantization=quantization_from_doc(sys_doc.get("quantization")),
                checkpoint_paths=tuple(checkpoints),
            )
        )
    if not systems:
        raise ConfigError("eval config lists no systems")
    output_dir = Path(doc["output_dir"])
    if not output_dir.is_absolute():
        output_dir = base / output_dir
    return EvalConfig(
        seed=int(doc["seed"]) if seed_override is None else seed_override,
        source_paths=tuple(_expand_audio_paths(doc["sources"], base)),
        output_dir=output_dir,
        systems=tuple(systems),
        window_len=int(doc.get("window_len", 1024)),
        hop_len=int(doc.get("hop_len", 256)),
        segment_seconds=float(doc.get("segment_seconds", 6.0)),
        max_overlays=int(doc.get("max_overlays", 0)),
    )
