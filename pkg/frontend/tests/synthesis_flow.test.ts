// The synthesize-and-render loop against a faked service (wire-accurate
// responses), plus an optional run against a live service when
// SILSYNTH_SERVICE is set.

import { readFileSync } from 'node:fs';
import { fileURLToPath } from 'node:url';
import { describe, expect, it } from 'vitest';

import { ServiceClient, ServiceError } from '../src/api.js';
import { EditorDocument } from '../src/document.js';
import { parseSilhouette } from '../src/format.js';
import { computeOverlay } from '../src/overlay.js';
import { extractSilhouette } from '../src/silhouette.js';
import { decodeWav, encodeWavPcm16 } from '../src/wav.js';

const fixturePath = fileURLToPath(new URL('./fixtures/clip.silh.json', import.meta.url));

function fakeService(): typeof fetch {
  return (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    if (url.includes('/v1/synthesize')) {
      const payload = JSON.parse(String(init?.body));
      const frames: [number, number][] = payload.silhouette.frames;
      // wire-accurate fake: audio spans frames * hop samples
      const samples = new Float32Array(frames.length * 256);
      for (let i = 0; i < frames.length; i++) {
        const amp = (frames[i][1] - frames[i][0]) / 2;
        const mid = (frames[i][1] + frames[i][0]) / 2;
        for (let j = 0; j < 256; j++) {
          samples[i * 256 + j] = mid + amp * Math.sin((2 * Math.PI * j) / 64);
        }
      }
      return new Response(encodeWavPcm16(samples, 24000), {
        status: 200,
        headers: {
          'content-type': 'audio/wav',
          'X-Silhouette-Mse': '0.0123',
          'X-Model-Fingerprint': 'abc123',
          'X-Model-Id': 'ckpt_1',
        },
      });
    }
    if (url.includes('/v1/models/load')) {
      return new Response(JSON.stringify({ id: 'ckpt_1', fingerprint: 'abc123', step: 1 }), {
        status: 200,
        headers: { 'content-type': 'application/json' },
      });
    }
    if (url.includes('/v1/models')) {
      return new Response(
        JSON.stringify({
          models: [{ id: 'ckpt_1', path: 'x', step: 1, fingerprint: 'abc123', quantization: null, loaded: true }],
          loaded: 'ckpt_1',
        }),
        { status: 200, headers: { 'content-type': 'application/json' } },
      );
    }
    return new Response(JSON.stringify({ error: 'not-found', detail: url }), { status: 404 });
  }) as typeof fetch;
}

describe('synthesize-and-render flow (faked service)', () => {
  it('drawn document -> audio -> achieved overlay + MSE without error', async () => {
    const doc = EditorDocument.blank(24);
    doc.beginStroke();
    for (let i = 4; i < 20; i++) doc.drawAt(i, 0.3 + 0.02 * i, 'symmetric');
    doc.endStroke();

    const client = new ServiceClient('http://fake', fakeService());
    const result = await client.synthesize(doc.toDocument());
    expect(result.mse).toBeCloseTo(0.0123, 10);
    expect(result.fingerprint).toBe('abc123');

    const audio = decodeWav(result.wav);
    expect(audio.samples.length).toBe(24 * 256);
    const achieved = extractSilhouette(audio.samples, doc.windowLen, doc.hopLen);
    const geometry = computeOverlay(doc.frames.slice(0, achieved.length), achieved, 960, 240);
    expect(geometry.bars.length).toBe(achieved.length);
    expect(geometry.outlineUpper.length).toBe(achieved.length * 2);
    for (const bar of geometry.bars) {
      expect(Number.isFinite(bar.y)).toBe(true);
      expect(bar.h).toBeGreaterThanOrEqual(0);
    }
  });

  it('maps backend errors to typed failures', async () => {
    const failing = (async () =>
      new Response(JSON.stringify({ error: 'silhouette', detail: 'frame 2 violates min <= max', frame_index: 2 }), {
        status: 422,
      })) as unknown as typeof fetch;
    const client = new ServiceClient('http://fake', failing);
    try {
      await client.synthesize(EditorDocument.blank(4).toDocument());
      expect.unreachable('should have thrown');
    } catch (err) {
      expect(err).toBeInstanceOf(ServiceError);
      expect((err as ServiceError).status).toBe(422);
      expect((err as ServiceError).frameIndex).toBe(2);
    }
  });

  it('identical-tracks overlay inscribes the bars in the outline', () => {
    const doc = parseSilhouette(readFileSync(fixturePath, 'utf-8'));
    const geometry = computeOverlay(doc.frames, doc.frames, 960, 240);
    for (let i = 0; i < geometry.bars.length; i++) {
      expect(geometry.bars[i].y).toBeCloseTo(geometry.outlineUpper[2 * i].y, 10);
      expect(geometry.bars[i].y + geometry.bars[i].h).toBeCloseTo(geometry.outlineLower[2 * i].y, 10);
    }
  });

  it('rejects overlay frame mismatch > 2', () => {
    const a: [number, number][] = Array.from({ length: 10 }, () => [-0.1, 0.1]);
    const b: [number, number][] = Array.from({ length: 6 }, () => [-0.1, 0.1]);
    expect(() => computeOverlay(a, b, 100, 100)).toThrow(/differ/);
  });
});

const liveUrl = process.env.SILSYNTH_SERVICE;
describe.skipIf(!liveUrl)('synthesize against a live service', () => {
  it('round-trips a drawn document end to end', async () => {
    const client = new ServiceClient(liveUrl!);
    const doc = EditorDocument.blank(16);
    for (let i = 0; i < 16; i++) doc.drawAt(i, 0.2 + 0.03 * i, 'symmetric');
    const result = await client.synthesize(doc.toDocument());
    const audio = decodeWav(result.wav);
    expect(audio.samples.length).toBe(16 * 256);
    expect(Number.isFinite(result.mse)).toBe(true);
    const achieved = extractSilhouette(audio.samples, doc.windowLen, doc.hopLen);
    expect(() => computeOverlay(doc.frames.slice(0, achieved.length), achieved, 960, 240)).not.toThrow();
  });
});
