// Canvas frame-grid editor: one column per silhouette frame, drag to draw
// the min/max envelope. The rendered document is exactly the wire format;
// no resampling happens between what is drawn and what is synthesized.

import { DrawChannel, EditorDocument } from './document.js';

export class SilhouetteEditor {
  channel: DrawChannel = 'symmetric';

  private ctx: CanvasRenderingContext2D;
  private drawing = false;
  private lastFrame = -1;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    public document: EditorDocument,
    private readonly onChange: () => void,
  ) {
    const ctx = canvas.getContext('2d');
    if (!ctx) throw new Error('canvas 2d context unavailable');
    this.ctx = ctx;
    canvas.addEventListener('pointerdown', (e) => this.pointerDown(e));
    canvas.addEventListener('pointermove', (e) => this.pointerMove(e));
    window.addEventListener('pointerup', () => this.pointerUp());
    this.render();
  }

  setDocument(doc: EditorDocument): void {
    this.document = doc;
    this.render();
  }

  private frameAt(xPixel: number): number {
    const rect = this.canvas.getBoundingClientRect();
    const relative = (xPixel - rect.left) / rect.width;
    return Math.min(this.document.numFrames - 1, Math.max(0, Math.floor(relative * this.document.numFrames)));
  }

  private valueAt(yPixel: number): number {
    const rect = this.canvas.getBoundingClientRect();
    const relative = (yPixel - rect.top) / rect.height;
    return 1 - 2 * relative;
  }

  private pointerDown(event: PointerEvent): void {
    this.drawing = true;
    this.lastFrame = -1;
    this.document.beginStroke();
    this.applyAt(event);
    this.canvas.setPointerCapture(event.pointerId);
  }

  private pointerMove(event: PointerEvent): void {
    if (!this.drawing) return;
    this.applyAt(event);
  }

  private pointerUp(): void {
    if (!this.drawing) return;
    this.drawing = false;
    this.document.endStroke();
    this.onChange();
  }

  private applyAt(event: PointerEvent): void {
    const frame = this.frameAt(event.clientX);
    const value = this.valueAt(event.clientY);
    // fill every column the pointer skipped over for continuous strokes
    const from = this.lastFrame < 0 ? frame : this.lastFrame;
    const step = frame >= from ? 1 : -1;
    for (let i = from; i !== frame + step; i += step) {
      this.document.drawAt(i, value, this.channel);
    }
    this.lastFrame = frame;
    this.render();
  }

  render(): void {
    const { width, height } = this.canvas;
    const n = this.document.numFrames;
    const barWidth = width / n;
    const toY = (v: number) => ((1 - v) / 2) * height;
    this.ctx.fillStyle = '#ffffff';
    this.ctx.fillRect(0, 0, width, height);
    this.ctx.strokeStyle = '#e3e3e3';
    this.ctx.beginPath();
    this.ctx.moveTo(0, height / 2);
    this.ctx.lineTo(width, height / 2);
    this.ctx.stroke();
    this.ctx.fillStyle = '#4a7fb5';
    for (let i = 0; i < n; i++) {
      const [lo, hi] = this.document.frames[i];
      const top = toY(hi);
      this.ctx.fillRect(i * barWidth, top, Math.max(barWidth - 0.5, 0.5), Math.max(toY(lo) - top, 1));
    }
  }
}
