"""Local HTTP facade over extract / quantize / synthesize.

Drives the iterate-listen-redraw loop for the browser editor (or any
client).  Request handling is stateless apart from the loaded-model
registry; the registry swaps frozen parameter sets atomically, so every
in-flight request is served by exactly one coherent model.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from pathlib import Path

from fastapi import FastAPI, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .audio_io import load_wav_bytes, wav_bytes
from .checkpoints import Checkpoint, load_checkpoint
from .errors import (
    AudioIoError,
    CheckpointError,
    FormatError,
    SilhouetteError,
    SilsynthError,
)
from .evaluation import control_mse
from .models import Generator, synthesize
from .silhouette import (
    QuantizationScheme,
    extract_silhouette,
    quantize,
    track_from_document,
    track_to_document,
)

DEFAULT_PORT = 8765


@dataclass(frozen=True)
class LoadedModel:
    """Frozen inference bundle; replaced wholesale on load, never mutated."""

    model_id: str
    path: Path
    fingerprint: str
    step: int
    quantization: QuantizationScheme | None
    generator: Generator


class ModelRegistry:
    """Checkpoint inventory plus the single currently-loaded model.

    Many readers, one writer: ``current`` is an immutable snapshot and
    loading swaps it in one assignment under a lock.
    """

    def __init__(self, checkpoint_dir: Path | None = None):
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self._lock = threading.Lock()
        self._current: LoadedModel | None = None

    @property
    def current(self) -> LoadedModel | None:
        return self._current

    def _model_id(self, path: Path) -> str:
        if self.checkpoint_dir is not None:
            try:
                return path.relative_to(self.checkpoint_dir).as_posix()
            except ValueError:
                pass
        return str(path)

    def _candidates(self) -> list[Path]:
        if self.checkpoint_dir is None:
            return []
        return sorted(p for p in self.checkpoint_dir.rglob("ckpt_*") if p.is_file())

    def inventory(self) -> list[dict]:
        current = self._current
        entries = []
        for path in self._candidates():
            try:
                ckpt = load_checkpoint(path)
            except CheckpointError:
                continue
            entries.append(
                {
                    "id": self._model_id(path),
                    "path": str(path),
                    "step": ckpt.step,
                    "fingerprint": ckpt.fingerprint,
                    "quantization": track_quantization_doc(ckpt.quantization),
                    "loaded": current is not None and current.path == path,
                }
            )
        return entries

    def resolve(self, ident: str) -> Path:
        path = Path(ident)
        if path.is_file():
            return path
        if self.checkpoint_dir is not None:
            candidate = self.checkpoint_dir / ident
            if candidate.is_file():
                return candidate
        raise FileNotFoundError(ident)

    def load(self, ident: str) -> LoadedModel:
        path = self.resolve(ident)
        ckpt = load_checkpoint(path)
        model = LoadedModel(
            model_id=self._model_id(path),
            path=path,
            fingerprint=ckpt.fingerprint,
            step=ckpt.step,
            quantization=ckpt.quantization,
            generator=ckpt.build_generator(),
        )
        with self._lock:
            self._current = model
        return model


def track_quantization_doc(scheme: QuantizationScheme | None) -> dict | None:
    if scheme is None:
        return None
    return {"kind": scheme.kind, "num_bins": scheme.num_bins}


def _error_response(status: int, code: str, detail: str, frame_index: int | None = None) -> JSONResponse:
    body = {"error": code, "detail": detail}
    if frame_index is not None:
        body["frame_index"] = frame_index
    return JSONResponse(status_code=status, content=body)


def create_app(registry: ModelRegistry) -> FastAPI:
    app = FastAPI(title="silsynth service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["X-Silhouette-Mse", "X-Model-Fingerprint", "X-Model-Id"],
    )

    @app.exception_handler(SilsynthError)
    async def _handle_toolkit_error(_request, exc: SilsynthError):
        return _error_response(500, exc.code, str(exc))

    @app.post("/v1/extract")
    async def extract(request: Request, window: int = Query(1024, ge=1), hop: int = Query(256, ge=1)):
        body = await request.body()
        try:
            waveform = load_wav_bytes(body)
        except AudioIoError as exc:
            return _error_response(400, exc.code, str(exc))
        try:
            track = extract_silhouette(waveform, window, hop)
        except SilhouetteError as exc:
            return _error_response(422, exc.code, str(exc))
        return JSONResponse(content=track_to_document(track))

    @app.post("/v1/synthesize")
    async def synthesize_endpoint(request: Request):
        model = registry.current
        try:
            payload = await request.json()
        except Exception:
            return _error_response(400, "format", "request body is not valid JSON")
        if not isinstance(payload, dict) or "silhouette" not in payload:
            return _error_response(400, "format", "request must carry a 'silhouette' document")
        requested_model = payload.get("model")
        if model is None:
            return _error_response(409, "no-model", "no model loaded; POST /v1/models/load first")
        if requested_model is not None and requested_model != model.model_id:
            return _error_response(
                409, "no-model", f"model {requested_model!r} is not loaded (current: {model.model_id!r})"
            )
        try:
            track = track_from_document(payload["silhouette"])
        except FormatError as exc:
            if exc.frame_index is not None:
                return _error_response(422, exc.code, str(exc), frame_index=exc.frame_index)
            return _error_response(400, exc.code, str(exc))
        try:
            override = payload.get("quantization")
            scheme = (
                QuantizationScheme(kind=override["kind"], num_bins=override["num_bins"])
                if override
                else model.quantization
            )
            conditioned = track
            if track.quantization is None and scheme is not None:
                conditioned = quantize(track, scheme)
        except (KeyError, TypeError):
            return _error_response(400, "format", "quantization override must be {kind, num_bins}")
        except SilhouetteError as exc:
            return _error_response(422, exc.code, str(exc))
        output = synthesize(model.generator, conditioned)
        reference = replace(track, quantization=None)
        mse = control_mse(reference, output)
        return Response(
            content=wav_bytes(output),
            media_type="audio/wav",
            headers={
                "X-Silhouette-Mse": f"{mse:.9g}",
                "X-Model-Fingerprint": model.fingerprint,
                "X-Model-Id": model.model_id,
            },
        )

    @app.get("/v1/models")
    async def list_models():
        current = registry.current
        return {
            "models": registry.inventory(),
            "loaded": current.model_id if current else None,
        }

    @app.post("/v1/models/load")
    async def load_model(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return _error_response(400, "format", "request body is not valid JSON")
        ident = payload.get("id") or payload.get("path")
        if not ident:
            return _error_response(400, "format", "request must carry 'id' or 'path'")
        try:
            model = registry.load(str(ident))
        except FileNotFoundError:
            return _error_response(404, "checkpoint", f"unknown checkpoint: {ident}")
        except CheckpointError as exc:
            return _error_response(409, exc.code, str(exc))
        return {"id": model.model_id, "fingerprint": model.fingerprint, "step": model.step}

    return app


def build_registry(checkpoint_path: str | Path) -> ModelRegistry:
    """Registry over a directory, preloading the checkpoint when given a file."""
    checkpoint_path = Path(checkpoint_path)
    if checkpoint_path.is_dir():
        return ModelRegistry(checkpoint_dir=checkpoint_path)
    registry = ModelRegistry(checkpoint_dir=checkpoint_path.parent)
    registry.load(str(checkpoint_path))
    return registry
