// Input-vs-achieved overlay: filled bars for the achieved silhouette,
// black outline for the input. Geometry is computed as pure data so the
// layout logic is testable without a canvas.

import { Frame } from './format.js';

export interface BarRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface OverlayGeometry {
  width: number;
  height: number;
  bars: BarRect[];
  outlineUpper: { x: number; y: number }[];
  outlineLower: { x: number; y: number }[];
}

export function amplitudeToY(value: number, height: number): number {
  return ((1 - value) / 2) * height;
}

export function computeOverlay(
  input: Frame[],
  achieved: Frame[],
  width: number,
  height: number,
): OverlayGeometry {
  const diff = Math.abs(input.length - achieved.length);
  if (diff > 2) throw new Error(`overlay frame counts differ by ${diff} (> 2)`);
  const n = Math.min(input.length, achieved.length);
  if (n === 0) throw new Error('nothing to render');
  const barWidth = width / n;
  const bars: BarRect[] = [];
  const outlineUpper: { x: number; y: number }[] = [];
  const outlineLower: { x: number; y: number }[] = [];
  for (let i = 0; i < n; i++) {
    const [aLo, aHi] = achieved[i];
    const top = amplitudeToY(aHi, height);
    bars.push({ x: i * barWidth, y: top, w: barWidth, h: amplitudeToY(aLo, height) - top });
    const [iLo, iHi] = input[i];
    outlineUpper.push({ x: i * barWidth, y: amplitudeToY(iHi, height) });
    outlineUpper.push({ x: (i + 1) * barWidth, y: amplitudeToY(iHi, height) });
    outlineLower.push({ x: i * barWidth, y: amplitudeToY(iLo, height) });
    outlineLower.push({ x: (i + 1) * barWidth, y: amplitudeToY(iLo, height) });
  }
  return { width, height, bars, outlineUpper, outlineLower };
}

export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  geometry: OverlayGeometry,
  barColor = '#e8923a',
): void {
  ctx.clearRect(0, 0, geometry.width, geometry.height);
  ctx.fillStyle = '#fafafa';
  ctx.fillRect(0, 0, geometry.width, geometry.height);
  ctx.strokeStyle = '#ddd';
  ctx.beginPath();
  ctx.moveTo(0, geometry.height / 2);
  ctx.lineTo(geometry.width, geometry.height / 2);
  ctx.stroke();
  ctx.fillStyle = barColor;
  for (const bar of geometry.bars) {
    ctx.fillRect(bar.x, bar.y, bar.w, Math.max(bar.h, 1));
  }
  ctx.strokeStyle = '#000';
  ctx.lineWidth = 1;
  for (const outline of [geometry.outlineUpper, geometry.outlineLower]) {
    ctx.beginPath();
    outline.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
    ctx.stroke();
  }
}
