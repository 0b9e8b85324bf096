// App wiring: toolbar, frame-grid editor, overlay pane, service calls.

import { ServiceClient, ServiceError } from './api.js';
import { playSamples } from './audio.js';
import { DrawChannel, EditorDocument } from './document.js';
import { SilhouetteEditor } from './editor.js';
import { parseSilhouette, serializeSilhouette } from './format.js';
import { computeOverlay, drawOverlay } from './overlay.js';
import { extractSilhouette } from './silhouette.js';
import { decodeWav } from './wav.js';

const SERVICE_URL = new URLSearchParams(location.search).get('service') ?? 'http://127.0.0.1:8765';

function element<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const client = new ServiceClient(SERVICE_URL);
const statusLine = element<HTMLSpanElement>('status');
const mseLine = element<HTMLSpanElement>('mse');
const editorCanvas = element<HTMLCanvasElement>('editor');
const overlayCanvas = element<HTMLCanvasElement>('overlay');
const modelSelect = element<HTMLSelectElement>('model');

let doc = EditorDocument.blank(96);
let synthesisInFlight = false;
let rerunQueued = false;
let lastAudio: { samples: Float32Array; sampleRate: number } | null = null;

function setStatus(text: string, isError = false): void {
  statusLine.textContent = text;
  statusLine.className = isError ? 'error' : '';
}

const editor = new SilhouetteEditor(editorCanvas, doc, () => {
  lastAudio = null;
});

function adoptDocument(next: EditorDocument): void {
  doc = next;
  editor.setDocument(doc);
  lastAudio = null;
}

async function refreshModels(): Promise<void> {
  try {
    const inventory = await client.listModels();
    modelSelect.innerHTML = '';
    for (const model of inventory.models) {
      const option = document.createElement('option');
      option.value = model.id;
      option.textContent = `${model.id} (step ${model.step})`;
      option.selected = model.loaded;
      modelSelect.appendChild(option);
    }
    if (!inventory.models.length) setStatus('no checkpoints found on the service', true);
  } catch (err) {
    setStatus(`cannot reach service at ${SERVICE_URL}: ${(err as Error).message}`, true);
  }
}

async function synthesizeAndPlay(): Promise<void> {
  if (synthesisInFlight) {
    rerunQueued = true;
    return;
  }
  synthesisInFlight = true;
  setStatus('synthesizing...');
  try {
    const result = await client.synthesize(doc.toDocument());
    const audio = decodeWav(result.wav);
    lastAudio = audio;
    playSamples(audio.samples, audio.sampleRate);
    const achieved = extractSilhouette(audio.samples, doc.windowLen, doc.hopLen);
    const padded = achieved.length ? achieved : ([[0, 0]] as [number, number][]);
    const geometry = computeOverlay(
      doc.frames.slice(0, Math.max(padded.length, 1)),
      padded,
      overlayCanvas.width,
      overlayCanvas.height,
    );
    const ctx = overlayCanvas.getContext('2d');
    if (ctx) drawOverlay(ctx, geometry);
    mseLine.textContent = `silhouette MSE ${result.mse.toExponential(3)} (model ${result.modelId})`;
    setStatus('done');
  } catch (err) {
    if (err instanceof ServiceError) {
      if (err.status === 409) setStatus('no model loaded on the service', true);
      else if (err.frameIndex !== undefined) setStatus(`frame ${err.frameIndex}: ${err.message}`, true);
      else setStatus(err.message, true);
    } else {
      setStatus(`network failure: ${(err as Error).message} (retry)`, true);
    }
  } finally {
    synthesisInFlight = false;
    if (rerunQueued) {
      rerunQueued = false;
      void synthesizeAndPlay();
    }
  }
}

element<HTMLButtonElement>('synthesize').addEventListener('click', () => void synthesizeAndPlay());
element<HTMLButtonElement>('replay').addEventListener('click', () => {
  if (lastAudio) playSamples(lastAudio.samples, lastAudio.sampleRate);
});
element<HTMLButtonElement>('undo').addEventListener('click', () => {
  doc.undo();
  editor.render();
});
element<HTMLSelectElement>('channel').addEventListener('change', (e) => {
  editor.channel = (e.target as HTMLSelectElement).value as DrawChannel;
});
element<HTMLButtonElement>('load-model').addEventListener('click', async () => {
  if (!modelSelect.value) return;
  try {
    const loaded = await client.loadModel(modelSelect.value);
    setStatus(`loaded ${loaded.id} (${loaded.fingerprint})`);
  } catch (err) {
    setStatus((err as Error).message, true);
  }
});

element<HTMLInputElement>('import-wav').addEventListener('change', async (e) => {
  const file = (e.target as HTMLInputElement).files?.[0];
  if (!file) return;
  try {
    const extracted = await client.extract(await file.arrayBuffer(), doc.windowLen, doc.hopLen);
    adoptDocument(EditorDocument.fromDocument(extracted));
    setStatus(`imported ${file.name}: ${extracted.frames.length} frames`);
  } catch (err) {
    setStatus((err as Error).message, true);
  }
});

element<HTMLInputElement>('open-silh').addEventListener('change', async (e) => {
  const file = (e.target as HTMLInputElement).files?.[0];
  if (!file) return;
  try {
    adoptDocument(EditorDocument.fromDocument(parseSilhouette(await file.text())));
    setStatus(`opened ${file.name}`);
  } catch (err) {
    setStatus((err as Error).message, true);
  }
});

element<HTMLButtonElement>('export-silh').addEventListener('click', () => {
  const blob = new Blob([serializeSilhouette(doc.toDocument())], { type: 'application/json' });
  const link = document.createElement('a');
  link.href = URL.createObjectURL(blob);
  link.download = 'silhouette.json';
  link.click();
  URL.revokeObjectURL(link.href);
});

element<HTMLButtonElement>('blank').addEventListener('click', () => {
  const count = Number(element<HTMLInputElement>('frame-count').value) || 96;
  adoptDocument(EditorDocument.blank(Math.max(1, Math.min(2000, count))));
});

void refreshModels();
