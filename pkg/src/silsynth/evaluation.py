"""Objective control-fidelity evaluation.

Builds a test set of silhouettes from source utterances, synthesizes each
with every fine-tuned model, re-extracts the silhouette of the output, and
reports the mean squared error against the *unquantized* input silhouette.
The model consumes the quantized-then-dequantized track; the unquantized
reference exists only for scoring, and the two are never conflated.

A generated waveform spans ``frames * hop`` samples while the input
silhouette's windows cover ``window - hop`` samples more, so outputs are
reflection-padded (or trimmed) to the reference span before re-extraction;
both tracks then have identical frame counts and an identity model scores
exactly zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from hashlib import sha1
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .audio_io import Waveform
from .checkpoints import Checkpoint
from .errors import EvaluationError
from .models import synthesize
from .silhouette import (
    QuantizationScheme,
    SilhouetteTrack,
    extract_silhouette,
    quantize,
    silhouette_mse,
)


@dataclass(frozen=True)
class EvalCase:
    """One evaluation input: a source segment plus both silhouette views."""

    source_id: str
    segment_index: int
    offset: int
    padded: bool
    segment: Waveform
    conditioned: SilhouetteTrack
    reference: SilhouetteTrack


@dataclass(frozen=True)
class EvalRecord:
    system: str
    target_id: str
    source_id: str
    segment_index: int
    mse: float


@dataclass(frozen=True)
class SystemRow:
    name: str
    kind: str
    num_bins: int
    num_tests: int
    mse: float

    def __post_init__(self):
        if self.mse < 0:
            raise EvaluationError("system MSE must be non-negative")


@dataclass(frozen=True)
class EvalReport:
    rows: tuple
    records: tuple
    provenance: dict

    def __post_init__(self):
        for row in self.rows:
            count = sum(1 for r in self.records if r.system == row.name)
            if count != row.num_tests:
                raise EvaluationError(f"row {row.name} claims {row.num_tests} tests but has {count} records")


class SynthesisModel(Protocol):
    name: str

    def synthesize(self, track: SilhouetteTrack) -> Waveform: ...


class CheckpointSynthesizer:
    """Synthesis model backed by a frozen generator checkpoint."""

    def __init__(self, checkpoint: Checkpoint, name: str | None = None):
        self.name = name or checkpoint.path.stem
        self.fingerprint = checkpoint.fingerprint
        self.checkpoint_path = str(checkpoint.path)
        self._generator = checkpoint.build_generator()

    def synthesize(self, track: SilhouetteTrack) -> Waveform:
        return synthesize(self._generator, track)


def _track_key(track: SilhouetteTrack) -> str:
    return sha1(track.frames.tobytes()).hexdigest()


class IdentitySynthesizer:
    """Sanity-harness model that returns each test case's source segment.

    An accurate control interface cannot beat this: its achieved silhouette
    is the reference itself, so its MSE is exactly zero.
    """

    def __init__(self, name: str, test_set: Sequence[EvalCase]):
        self.name = name
        self.fingerprint = "identity"
        self._segments = {_track_key(case.conditioned): case.segment for case in test_set}

    def synthesize(self, track: SilhouetteTrack) -> Waveform:
        key = _track_key(track)
        if key not in self._segments:
            raise EvaluationError("identity model received an unknown silhouette")
        return self._segments[key]


def build_test_set(
    sources: Sequence[tuple[str, Waveform]],
    seed: int,
    scheme: QuantizationScheme | None = None,
    window_len: int = 1024,
    hop_len: int = 256,
    segment_seconds: float = 6.0,
    segments_per_source: int = 2,
) -> list[EvalCase]:
    """Extract seeded-random fixed-length segments and their silhouettes.

    Two segments per source by default; sources shorter than the segment
    length are zero-padded on the right and flagged on the test case.
    """
    if not sources:
        raise EvaluationError("no source utterances given")
    rng = np.random.default_rng(seed)
    cases = []
    for source_id, waveform in sources:
        seg_len = int(round(segment_seconds * waveform.sample_rate_hz))
        for seg_idx in range(segments_per_source):
            samples = waveform.samples
            padded = samples.size < seg_len
            if padded:
                offset = 0
                samples = np.pad(samples, (0, seg_len - samples.size))
            else:
                offset = int(rng.integers(samples.size - seg_len + 1))
                samples = samples[offset : offset + seg_len]
            segment = Waveform(samples=samples, sample_rate_hz=waveform.sample_rate_hz)
            reference = extract_silhouette(segment, window_len, hop_len)
            conditioned = quantize(reference, scheme) if scheme is not None else reference
            cases.append(
                EvalCase(
                    source_id=source_id,
                    segment_index=seg_idx,
                    offset=offset,
                    padded=padded,
                    segment=segment,
                    conditioned=conditioned,
                    reference=reference,
                )
            )
    return cases


def achieved_silhouette(output: Waveform, reference: SilhouetteTrack) -> SilhouetteTrack:
    """Silhouette of a synthesized waveform aligned to the reference framing.

    The output is trimmed or reflection-padded to the reference's window
    span so both tracks have the same frame count.
    """
    span = reference.span_samples
    samples = output.samples
    if samples.size > span:
        samples = samples[:span]
    elif samples.size < span:
        pad = span - samples.size
        mode = "reflect" if pad <= samples.size - 1 else "edge"
        samples = np.pad(samples, (0, pad), mode=mode)
    aligned = Waveform(samples=samples, sample_rate_hz=output.sample_rate_hz)
    return extract_silhouette(aligned, reference.window_len, reference.hop_len)


def control_mse(reference: SilhouetteTrack, output: Waveform) -> float:
    """Silhouette MSE of a synthesized waveform against its unquantized input."""
    return silhouette_mse(reference, achieved_silhouette(output, reference))


PairHook = Callable[[SynthesisModel, EvalCase, Waveform, SilhouetteTrack, float], None]


def evaluate_system(
    models: Sequence[SynthesisModel],
    test_set: Sequence[EvalCase],
    system_name: str,
    scheme: QuantizationScheme | None = None,
    seed: int | None = None,
    on_pair: PairHook | None = None,
) -> EvalReport:
    """Score every (model, silhouette) pair and aggregate the mean MSE."""
    if not models:
        raise EvaluationError("no models to evaluate")
    if not test_set:
        raise EvaluationError("empty test set")
    records = []
    for model in models:
        for case in test_set:
            output = model.synthesize(case.conditioned)
            achieved = achieved_silhouette(output, case.reference)
            mse = silhouette_mse(case.reference, achieved)
            records.append(
                EvalRecord(
                    system=system_name,
                    target_id=model.name,
                    source_id=case.source_id,
                    segment_index=case.segment_index,
                    mse=mse,
                )
            )
            if on_pair is not None:
                on_pair(model, case, output, achieved, mse)
    records.sort(key=lambda r: (r.target_id, r.source_id, r.segment_index))
    row = SystemRow(
        name=system_name,
        kind=scheme.kind if scheme else "none",
        num_bins=scheme.num_bins if scheme else 0,
        num_tests=len(records),
        mse=float(np.mean([r.mse for r in records])),
    )
    provenance = {
        "seed": seed,
        "checkpoints": sorted({getattr(m, "checkpoint_path", m.name) for m in models}),
        "padded_sources": sorted({c.source_id for c in test_set if c.padded}),
    }
    return EvalReport(rows=(row,), records=tuple(records), provenance=provenance)


def merge_reports(reports: Sequence[EvalReport]) -> EvalReport:
    if not reports:
        raise EvaluationError("nothing to merge")
    rows = tuple(row for report in reports for row in report.rows)
    records = tuple(record for report in reports for record in report.records)
    provenance = {
        "seed": reports[0].provenance.get("seed"),
        "checkpoints": sorted({c for r in reports for c in r.provenance.get("checkpoints", [])}),
        "padded_sources": sorted({s for r in reports for s in r.provenance.get("padded_sources", [])}),
    }
    return EvalReport(rows=rows, records=records, provenance=provenance)


def report_to_document(report: EvalReport) -> dict:
    return {
        "version": 1,
        "provenance": report.provenance,
        "rows": [
            {
                "name": row.name,
                "kind": row.kind,
                "num_bins": row.num_bins,
                "num_tests": row.num_tests,
                "mse": row.mse,
            }
            for row in report.rows
        ],
        "records": [
            {
                "system": r.system,
                "target": r.target_id,
                "source": r.source_id,
                "segment": r.segment_index,
                "mse": r.mse,
            }
            for r in report.records
        ],
    }


def format_report_table(report: EvalReport) -> str:
    """Fixed-width text table with the Name/Type/nBins/nTests/MSE columns."""
    lines = [f"{'Name':<10} {'Type':<8} {'nBins':>6} {'nTests':>7} {'MSE':>9}"]
    for row in report.rows:
        bins = str(row.num_bins) if row.num_bins else "-"
        lines.append(f"{row.name:<10} {row.kind:<8} {bins:>6} {row.num_tests:>7} {row.mse:>9.4f}")
    return "\n".join(lines) + "\n"


def format_records_tsv(report: EvalReport) -> str:
    lines = ["system\ttarget\tsource\tsegment\tmse"]
    for r in report.records:
        lines.append(f"{r.system}\t{r.target_id}\t{r.source_id}\t{r.segment_index}\t{r.mse!r}")
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, output_dir: str | Path) -> dict:
    """Write the structured, tabular, and delimited report files."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": output_dir / "report.json",
        "table": output_dir / "report.txt",
        "tsv": output_dir / "report.tsv",
    }
    paths["json"].write_text(json.dumps(report_to_document(report), indent=2) + "\n")
    paths["table"].write_text(format_report_table(report))
    paths["tsv"].write_text(format_records_tsv(report))
    return paths


def render_overlay(
    input_track: SilhouetteTrack,
    output_track: SilhouetteTrack,
    path: str | Path,
    title: str | None = None,
) -> Path:
    """Plot the input silhouette as a black outline over filled output bars."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    diff = abs(input_track.num_frames - output_track.num_frames)
    if diff > 2:
        raise EvaluationError(f"overlay frame counts differ by {diff} (> 2)")
    n = min(input_track.num_frames, output_track.num_frames)
    x = np.arange(n)
    in_lo, in_hi = input_track.frames[:n, 0], input_track.frames[:n, 1]
    out_lo, out_hi = output_track.frames[:n, 0], output_track.frames[:n, 1]

    fig, ax = plt.subplots(figsize=(10, 3.2))
    ax.bar(x, out_hi - out_lo, bottom=out_lo, width=1.0, color="#e8923a", label="synthesized")
    ax.step(np.append(x, n) - 0.5, np.append(in_hi, in_hi[-1]), where="post", color="black", linewidth=0.9)
    ax.step(np.append(x, n) - 0.5, np.append(in_lo, in_lo[-1]), where="post", color="black", linewidth=0.9, label="input")
    ax.set_xlim(-0.5, n - 0.5)
    ax.set_ylim(-1.05, 1.05)
    ax.set_xlabel("frame")
    ax.set_ylabel("amplitude")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
