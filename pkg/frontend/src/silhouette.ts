// Client-side silhouette extraction, matching the backend's tail-dropping
// policy. Used to render the achieved silhouette of synthesized audio.

import { Frame } from './format.js';

export function frameCount(numSamples: number, windowLen: number, hopLen: number): number {
  if (numSamples < windowLen) return 0;
  return Math.floor((numSamples - windowLen) / hopLen) + 1;
}

export function extractSilhouette(
  samples: Float32Array | number[],
  windowLen: number,
  hopLen: number,
): Frame[] {
  const n = frameCount(samples.length, windowLen, hopLen);
  const frames: Frame[] = [];
  for (let i = 0; i < n; i++) {
    const start = i * hopLen;
    let lo = samples[start];
    let hi = samples[start];
    for (let j = start + 1; j < start + windowLen; j++) {
      const v = samples[j];
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
    frames.push([lo, hi]);
  }
  return frames;
}
