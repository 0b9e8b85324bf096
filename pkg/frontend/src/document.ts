// Editor document: a silhouette plus a bounded undo stack. Every editing
// gesture keeps min <= max by clamping the opposite channel, so the
// document is exportable (and synthesizable) after any interaction.

import { Frame, QuantizationScheme, SilhouetteDocument } from './format.js';

export type DrawChannel = 'min' | 'max' | 'symmetric';

const UNDO_LIMIT = 64;

function clampAmplitude(value: number): number {
  return Math.min(1, Math.max(-1, value));
}

export class EditorDocument {
  frames: Frame[];
  windowLen: number;
  hopLen: number;
  sampleRateHz: number;
  quantization: QuantizationScheme | null;

  private undoStack: Frame[][] = [];
  private strokeOpen = false;

  constructor(
    frames: Frame[],
    windowLen = 1024,
    hopLen = 256,
    sampleRateHz = 24000,
    quantization: QuantizationScheme | null = null,
  ) {
    if (frames.length < 1) throw new Error('document needs at least one frame');
    this.frames = frames.map((f) => [f[0], f[1]]);
    this.windowLen = windowLen;
    this.hopLen = hopLen;
    this.sampleRateHz = sampleRateHz;
    this.quantization = quantization;
  }

  static blank(numFrames: number): EditorDocument {
    const frames: Frame[] = [];
    for (let i = 0; i < numFrames; i++) frames.push([0, 0]);
    return new EditorDocument(frames);
  }

  static fromDocument(doc: SilhouetteDocument): EditorDocument {
    return new EditorDocument(doc.frames, doc.window_len, doc.hop_len, doc.sample_rate_hz, doc.quantization);
  }

  toDocument(): SilhouetteDocument {
    return {
      version: 1,
      sample_rate_hz: this.sampleRateHz,
      window_len: this.windowLen,
      hop_len: this.hopLen,
      quantization: this.quantization,
      frames: this.frames.map((f) => [f[0], f[1]]),
    };
  }

  get numFrames(): number {
    return this.frames.length;
  }

  beginStroke(): void {
    if (this.strokeOpen) return;
    this.undoStack.push(this.frames.map((f) => [f[0], f[1]]));
    if (this.undoStack.length > UNDO_LIMIT) this.undoStack.shift();
    this.strokeOpen = true;
  }

  endStroke(): void {
    this.strokeOpen = false;
  }

  get canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  undo(): boolean {
    const snapshot = this.undoStack.pop();
    if (!snapshot) return false;
    this.frames = snapshot;
    this.strokeOpen = false;
    return true;
  }

  // Set one channel of one frame; the opposite channel is clamped so that
  // min <= max always holds. Editing quantized documents drops the tag
  // (hand-drawn values are no longer bin centers).
  drawAt(frameIndex: number, value: number, channel: DrawChannel): void {
    if (frameIndex < 0 || frameIndex >= this.frames.length) return;
    const v = clampAmplitude(value);
    const frame = this.frames[frameIndex];
    if (channel === 'symmetric') {
      const magnitude = Math.abs(v);
      frame[0] = -magnitude;
      frame[1] = magnitude;
    } else if (channel === 'max') {
      frame[1] = v;
      if (frame[0] > v) frame[0] = v;
    } else {
      frame[0] = v;
      if (frame[1] < v) frame[1] = v;
    }
    this.quantization = null;
  }
}
