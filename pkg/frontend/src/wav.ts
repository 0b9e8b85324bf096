// Minimal RIFF/PCM WAV codec for the 16-bit mono files the service emits.
// Decoding tolerates multichannel input (averaged to mono) so imported
// user files behave like the backend's loader.

export interface DecodedWav {
  sampleRate: number;
  samples: Float32Array;
}

export class WavError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'WavError';
  }
}

export function decodeWav(buffer: ArrayBuffer): DecodedWav {
  const view = new DataView(buffer);
  const tag = (offset: number) =>
    String.fromCharCode(view.getUint8(offset), view.getUint8(offset + 1), view.getUint8(offset + 2), view.getUint8(offset + 3));
  if (buffer.byteLength < 44 || tag(0) !== 'RIFF' || tag(8) !== 'WAVE') {
    throw new WavError('not a RIFF/WAVE file');
  }
  let offset = 12;
  let sampleRate = 0;
  let numChannels = 0;
  let bitsPerSample = 0;
  let dataOffset = -1;
  let dataLength = 0;
  while (offset + 8 <= buffer.byteLength) {
    const chunkId = tag(offset);
    const chunkSize = view.getUint32(offset + 4, true);
    const body = offset + 8;
    if (chunkId === 'fmt ') {
      const audioFormat = view.getUint16(body, true);
      if (audioFormat !== 1) throw new WavError(`unsupported WAV encoding (format ${audioFormat})`);
      numChannels = view.getUint16(body + 2, true);
      sampleRate = view.getUint32(body + 4, true);
      bitsPerSample = view.getUint16(body + 14, true);
    } else if (chunkId === 'data') {
      dataOffset = body;
      dataLength = chunkSize;
    }
    offset = body + chunkSize + (chunkSize % 2);
  }
  if (sampleRate === 0 || dataOffset < 0) throw new WavError('missing fmt or data chunk');
  if (bitsPerSample !== 16) throw new WavError(`unsupported bit depth: ${bitsPerSample}`);
  const frameCount = Math.floor(dataLength / (2 * numChannels));
  if (frameCount === 0) throw new WavError('zero-length audio');
  const samples = new Float32Array(frameCount);
  for (let i = 0; i < frameCount; i++) {
    let acc = 0;
    for (let c = 0; c < numChannels; c++) {
      acc += view.getInt16(dataOffset + 2 * (i * numChannels + c), true);
    }
    samples[i] = acc / numChannels / 32768;
  }
  return { sampleRate, samples };
}

export function encodeWavPcm16(samples: Float32Array | number[], sampleRate: number): ArrayBuffer {
  const n = samples.length;
  const buffer = new ArrayBuffer(44 + 2 * n);
  const view = new DataView(buffer);
  const writeTag = (offset: number, text: string) => {
    for (let i = 0; i < text.length; i++) view.setUint8(offset + i, text.charCodeAt(i));
  };
  writeTag(0, 'RIFF');
  view.setUint32(4, 36 + 2 * n, true);
  writeTag(8, 'WAVE');
  writeTag(12, 'fmt ');
  view.setUint32(16, 16, true);
  view.setUint16(20, 1, true); // PCM
  view.setUint16(22, 1, true); // mono
  view.setUint32(24, sampleRate, true);
  view.setUint32(28, sampleRate * 2, true);
  view.setUint16(32, 2, true);
  view.setUint16(34, 16, true);
  writeTag(36, 'data');
  view.setUint32(40, 2 * n, true);
  for (let i = 0; i < n; i++) {
    const clipped = Math.min(1, Math.max(-1, samples[i]));
    const quantized = Math.min(32767, Math.max(-32768, Math.round(clipped * 32768)));
    view.setInt16(44 + 2 * i, quantized, true);
  }
  return buffer;
}
