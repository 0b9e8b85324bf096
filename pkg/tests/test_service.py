import io
import json
import threading
import wave
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from fastapi.testclient import TestClient

from silsynth.audio_io import Waveform, wav_bytes
from silsynth.checkpoints import save_checkpoint
from silsynth.models import build_models
from silsynth.service import ModelRegistry, build_registry, create_app
from silsynth.silhouette import QuantizationScheme, SilhouetteTrack, track_to_document

SR = 24000


def make_checkpoint(directory, tiny_profile, name="ckpt_1", step=1, scheme=None, seed=0):
    import torch

    torch.manual_seed(seed)
    gen_cfg, disc_cfg = tiny_profile
    generator, mpd, msd = build_models(gen_cfg, disc_cfg)
    return save_checkpoint(
        directory / name, step=step, generator=generator, mpd=mpd, msd=msd, quantization=scheme
    )


@pytest.fixture
def service(tmp_path, tiny_profile):
    ckpt_dir = tmp_path / "ckpts"
    ckpt_dir.mkdir()
    make_checkpoint(ckpt_dir, tiny_profile, "ckpt_1", 1, QuantizationScheme("mu_law", 256), seed=0)
    make_checkpoint(ckpt_dir, tiny_profile, "ckpt_2", 2, QuantizationScheme("mu_law", 256), seed=1)
    registry = ModelRegistry(checkpoint_dir=ckpt_dir)
    return TestClient(create_app(registry)), registry


def silhouette_payload(n_frames=12, value=0.4):
    frames = [[-value, value]] * n_frames
    track = SilhouetteTrack(frames=np.array(frames))
    return {"silhouette": track_to_document(track)}


class TestExtract:
    def test_one_second_of_zeros(self, service):
        client, _ = service
        body = wav_bytes(Waveform(np.zeros(SR), SR))
        resp = client.post("/v1/extract", content=body)
        assert resp.status_code == 200
        doc = resp.json()
        assert len(doc["frames"]) == 90
        assert all(frame == [0.0, 0.0] for frame in doc["frames"])

    def test_stereo_mixdown(self, service):
        client, _ = service
        pcm = np.zeros((SR // 4, 2), dtype="<i2")
        pcm[:, 0] = 16384
        pcm[:, 1] = -16384
        buf = io.BytesIO()
        with wave.open(buf, "wb") as w:
            w.setnchannels(2)
            w.setsampwidth(2)
            w.setframerate(SR)
            w.writeframes(pcm.tobytes())
        resp = client.post("/v1/extract", content=buf.getvalue())
        assert resp.status_code == 200
        assert all(frame == [0.0, 0.0] for frame in resp.json()["frames"])

    def test_empty_body(self, service):
        client, _ = service
        resp = client.post("/v1/extract", content=b"")
        assert resp.status_code == 400

    def test_too_short_audio(self, service):
        client, _ = service
        body = wav_bytes(Waveform(np.zeros(512), SR))
        resp = client.post("/v1/extract", content=body)
        assert resp.status_code == 422

    def test_custom_window(self, service):
        client, _ = service
        body = wav_bytes(Waveform(np.zeros(SR), SR))
        resp = client.post("/v1/extract", params={"window": 512, "hop": 128}, content=body)
        assert resp.status_code == 200
        assert resp.json()["window_len"] == 512


class TestSynthesize:
    def test_requires_loaded_model(self, service):
        client, _ = service
        resp = client.post("/v1/synthesize", json=silhouette_payload())
        assert resp.status_code == 409

    def test_length_law_and_headers(self, service):
        client, registry = service
        registry.load("ckpt_1")
        resp = client.post("/v1/synthesize", json=silhouette_payload(n_frames=16))
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "audio/wav"
        with wave.open(io.BytesIO(resp.content), "rb") as w:
            assert w.getnframes() == 16 * 256
            assert w.getframerate() == SR
        assert float(resp.headers["X-Silhouette-Mse"]) >= 0.0
        assert resp.headers["X-Model-Fingerprint"]
        assert resp.headers["X-Model-Id"] == "ckpt_1"

    def test_deterministic_bytes(self, service):
        client, registry = service
        registry.load("ckpt_1")
        a = client.post("/v1/synthesize", json=silhouette_payload())
        b = client.post("/v1/synthesize", json=silhouette_payload())
        assert a.content == b.content

    def test_invariant_violation_reports_frame(self, service):
        client, registry = service
        registry.load("ckpt_1")
        payload = silhouette_payload(n_frames=4)
        payload["silhouette"]["frames"][2] = [0.5, 0.2]
        resp = client.post("/v1/synthesize", json=payload)
        assert resp.status_code == 422
        assert resp.json()["frame_index"] == 2

    def test_parse_failure(self, service):
        client, registry = service
        registry.load("ckpt_1")
        resp = client.post("/v1/synthesize", content=b"{oops")
        assert resp.status_code == 400
        resp = client.post("/v1/synthesize", json={"nothing": 1})
        assert resp.status_code == 400

    def test_mismatched_model_id(self, service):
        client, registry = service
        registry.load("ckpt_1")
        payload = silhouette_payload()
        payload["model"] = "ckpt_2"
        resp = client.post("/v1/synthesize", json=payload)
        assert resp.status_code == 409

    def test_quantization_override(self, service):
        client, registry = service
        registry.load("ckpt_1")
        payload = silhouette_payload()
        payload["quantization"] = {"kind": "linear", "num_bins": 16}
        resp = client.post("/v1/synthesize", json=payload)
        assert resp.status_code == 200


class TestModels:
    def test_inventory_and_load(self, service):
        client, _ = service
        doc = client.get("/v1/models").json()
        assert {m["id"] for m in doc["models"]} == {"ckpt_1", "ckpt_2"}
        assert doc["loaded"] is None

        resp = client.post("/v1/models/load", json={"id": "ckpt_2"})
        assert resp.status_code == 200
        assert resp.json()["step"] == 2
        doc = client.get("/v1/models").json()
        assert doc["loaded"] == "ckpt_2"
        loaded = [m for m in doc["models"] if m["loaded"]]
        assert [m["id"] for m in loaded] == ["ckpt_2"]

    def test_empty_dir_inventory(self, tmp_path):
        registry = ModelRegistry(checkpoint_dir=tmp_path)
        client = TestClient(create_app(registry))
        assert client.get("/v1/models").json()["models"] == []
        resp = client.post("/v1/synthesize", json=silhouette_payload())
        assert resp.status_code == 409

    def test_unknown_checkpoint_404(self, service):
        client, _ = service
        resp = client.post("/v1/models/load", json={"id": "ckpt_missing"})
        assert resp.status_code == 404

    def test_corrupt_checkpoint_409(self, service, tmp_path):
        client, registry = service
        bad = registry.checkpoint_dir / "ckpt_bad"
        bad.write_bytes(b"junk")
        resp = client.post("/v1/models/load", json={"id": "ckpt_bad"})
        assert resp.status_code == 409

    def test_load_then_synthesize_echoes_new_fingerprint(self, service):
        client, _ = service
        client.post("/v1/models/load", json={"id": "ckpt_1"})
        first = client.post("/v1/synthesize", json=silhouette_payload())
        client.post("/v1/models/load", json={"id": "ckpt_2"})
        second = client.post("/v1/synthesize", json=silhouette_payload())
        assert second.headers["X-Model-Id"] == "ckpt_2"
        # same architecture, same fingerprint, but different parameters
        assert first.content != second.content


class TestConcurrency:
    def test_synthesize_during_load_serves_coherent_models(self, service):
        client, registry = service
        registry.load("ckpt_1")
        payload = silhouette_payload(n_frames=8)
        reference = {}
        for name in ("ckpt_1", "ckpt_2"):
            registry.load(name)
            reference[client.post("/v1/synthesize", json=payload).content] = name
        registry.load("ckpt_1")

        stop = threading.Event()

        def flood():
            results = []
            while not stop.is_set():
                resp = client.post("/v1/synthesize", json=payload)
                results.append((resp.status_code, resp.content))
            return results

        with ThreadPoolExecutor(max_workers=4) as pool:
            futures = [pool.submit(flood) for _ in range(3)]
            for name in ("ckpt_2", "ckpt_1", "ckpt_2", "ckpt_1"):
                registry.load(name)
            stop.set()
            all_results = [r for f in futures for r in f.result()]

        assert all_results
        for status, content in all_results:
            assert status == 200
            assert content in reference  # exactly one coherent parameter set per response


def test_build_registry_from_file(tmp_path, tiny_profile):
    path = make_checkpoint(tmp_path, tiny_profile, "ckpt_9", 9)
    registry = build_registry(path)
    assert registry.current is not None
    assert registry.current.step == 9


def test_build_registry_from_dir(tmp_path, tiny_profile):
    make_checkpoint(tmp_path, tiny_profile, "ckpt_3", 3)
    registry = build_registry(tmp_path)
    assert registry.current is None
    assert len(registry.inventory()) == 1
