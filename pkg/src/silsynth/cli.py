"""Command-line entry point: the whole pipeline behind one binary.

Every subcommand is a thin composition of module operations; no logic lives
only here.  Exit codes: 0 success, 1 runtime failure (one machine-parseable
line on stderr), 2 usage errors (argparse).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import evaluation
from .audio_io import load_wav, save_wav
from .checkpoints import load_checkpoint
from .config import load_corpus, load_eval_config, load_training_config, quantization_from_doc
from .errors import ConfigError, SilsynthError
from .features import mel_spectrogram, mel_to_document
from .models import synthesize
from .silhouette import (
    QuantizationScheme,
    extract_silhouette,
    quantize,
    read_silhouette,
    silhouette_mse,
    write_silhouette,
)
from .training import (
    init_train_state,
    run_stage,
    state_from_checkpoint,
    warm_start_from_checkpoint,
)

_KIND_ALIASES = {"linear": "linear", "mu": "mu_law", "mu_law": "mu_law"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="silsynth", description="Silhouette-controlled waveform synthesis toolkit")
    parser.add_argument("--seed", type=int, default=None, help="override every stochastic seed in the invoked command")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract a silhouette from a WAV file")
    p.add_argument("wav", type=Path)
    p.add_argument("--window", type=int, default=1024)
    p.add_argument("--hop", type=int, default=256)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("quantize", help="quantize a silhouette file")
    p.add_argument("silhouette", type=Path)
    p.add_argument("--kind", choices=("linear", "mu"), required=True)
    p.add_argument("--bins", type=int, required=True)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("mse", help="silhouette MSE between two unquantized silhouette files")
    p.add_argument("silhouette_a", type=Path)
    p.add_argument("silhouette_b", type=Path)

    p = sub.add_parser("mel", help="dump the log mel-spectrogram of a WAV file")
    p.add_argument("wav", type=Path)
    p.add_argument("--fft", type=int, default=1024)
    p.add_argument("--hop", type=int, default=256)
    p.add_argument("--bins", type=int, default=80)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("synth", help="synthesize a waveform from a silhouette with a checkpoint")
    p.add_argument("checkpoint", type=Path)
    p.add_argument("silhouette", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("train", help="run the training stage described by a config file")
    p.add_argument("config", type=Path)
    p.add_argument("--resume", type=Path, default=None, help="resume from a training checkpoint")

    p = sub.add_parser("finetune", help="fine-tune from a pretrained checkpoint")
    p.add_argument("config", type=Path)
    p.add_argument("--init", type=Path, required=True, help="checkpoint providing the initial parameters")

    p = sub.add_parser("eval", help="evaluate systems and write the report plus overlay figures")
    p.add_argument("config", type=Path)

    p = sub.add_parser("plot-overlay", help="render the input-vs-achieved silhouette overlay")
    p.add_argument("silhouette_in", type=Path)
    p.add_argument("silhouette_out", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("serve", help="serve extract/synthesize over HTTP")
    p.add_argument("checkpoint", type=Path, help="checkpoint file or directory of checkpoints")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")

    return parser


def _cmd_extract(args) -> int:
    track = extract_silhouette(load_wav(args.wav), args.window, args.hop)
    write_silhouette(track, args.output)
    return 0


def _cmd_quantize(args) -> int:
    scheme = QuantizationScheme(kind=_KIND_ALIASES[args.kind], num_bins=args.bins)
    write_silhouette(quantize(read_silhouette(args.silhouette), scheme), args.output)
    return 0


def _cmd_mse(args) -> int:
    value = silhouette_mse(read_silhouette(args.silhouette_a), read_silhouette(args.silhouette_b))
    print(value)
    return 0


def _cmd_mel(args) -> int:
    import json

    mel = mel_spectrogram(load_wav(args.wav), fft_len=args.fft, hop_len=args.hop, mel_bins=args.bins)
    args.output.write_text(json.dumps(mel_to_document(mel)) + "\n")
    return 0


def _cmd_synth(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    track = read_silhouette(args.silhouette)
    if track.quantization is None and ckpt.quantization is not None:
        track = quantize(track, ckpt.quantization)
    generator = ckpt.build_generator()
    save_wav(synthesize(generator, track), args.output)
    return 0


def _cmd_train(args, seed: int | None) -> int:
    cfg = load_training_config(args.config, seed_override=seed)
    corpus = load_corpus(list(cfg.corpus_paths))
    if args.resume is not None:
        state = state_from_checkpoint(load_checkpoint(args.resume), cfg.plan)
    else:
        state = init_train_state(cfg.generator, cfg.discriminator, cfg.plan, cfg.quantization)
    state = run_stage(state, cfg.plan, corpus, cfg.checkpoint_dir, cfg.window_len, cfg.hop_len)
    print(f"finished at step {state.step}; checkpoints in {cfg.checkpoint_dir}")
    return 0


def _cmd_finetune(args, seed: int | None) -> int:
    cfg = load_training_config(args.config, seed_override=seed)
    if cfg.plan.stage != "finetune":
        raise ConfigError("finetune expects a config with stage set to 'finetune'")
    corpus = load_corpus(list(cfg.corpus_paths))
    ckpt = load_checkpoint(args.init)
    state = warm_start_from_checkpoint(ckpt, cfg.plan, quantization=cfg.quantization)
    state = run_stage(state, cfg.plan, corpus, cfg.checkpoint_dir, cfg.window_len, cfg.hop_len)
    print(f"finished at step {state.step}; checkpoints in {cfg.checkpoint_dir}")
    return 0


def _cmd_eval(args, seed: int | None) -> int:
    cfg = load_eval_config(args.config, seed_override=seed)
    sources = [(path.stem, load_wav(path)) for path in cfg.source_paths]
    reports = []
    for system in cfg.systems:
        test_set = evaluation.build_test_set(
            sources,
            seed=cfg.seed,
            scheme=system.quantization,
            window_len=cfg.window_len,
            hop_len=cfg.hop_len,
            segment_seconds=cfg.segment_seconds,
        )
        models = [
            evaluation.CheckpointSynthesizer(load_checkpoint(path)) for path in system.checkpoint_paths
        ]
        overlay_dir = cfg.output_dir / "overlays" / system.name
        budget = {"left": cfg.max_overlays}

        def draw_overlay(model, case, output, achieved, mse, _dir=overlay_dir, _budget=budget):
            if _budget["left"] <= 0:
                return
            _budget["left"] -= 1
            name = f"{model.name}__{case.source_id}_{case.segment_index}.png"
            evaluation.render_overlay(case.reference, achieved, _dir / name, title=f"mse={mse:.4f}")

        reports.append(
            evaluation.evaluate_system(
                models,
                test_set,
                system_name=system.name,
                scheme=system.quantization,
                seed=cfg.seed,
                on_pair=draw_overlay if cfg.max_overlays > 0 else None,
            )
        )
    report = evaluation.merge_reports(reports)
    evaluation.write_report(report, cfg.output_dir)
    sys.stdout.write(evaluation.format_report_table(report))
    return 0


def _cmd_plot_overlay(args) -> int:
    evaluation.render_overlay(
        read_silhouette(args.silhouette_in), read_silhouette(args.silhouette_out), args.output
    )
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import build_registry, create_app

    registry = build_registry(args.checkpoint)
    uvicorn.run(create_app(registry), host=args.host, port=args.port, log_level="info")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            return _cmd_extract(args)
        if args.command == "quantize":
            return _cmd_quantize(args)
        if args.command == "mse":
            return _cmd_mse(args)
        if args.command == "mel":
            return _cmd_mel(args)
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "train":
            return _cmd_train(args, args.seed)
        if args.command == "finetune":
            return _cmd_finetune(args, args.seed)
        if args.command == "eval":
            return _cmd_eval(args, args.seed)
        if args.command == "plot-overlay":
            return _cmd_plot_overlay(args)
        if args.command == "serve":
            return _cmd_serve(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except SilsynthError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
