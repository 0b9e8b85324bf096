// WebAudio playback of decoded mono samples.

let sharedContext: AudioContext | null = null;

function context(): AudioContext {
  if (!sharedContext) sharedContext = new AudioContext();
  return sharedContext;
}

export function playSamples(samples: Float32Array, sampleRate: number): void {
  const ctx = context();
  const buffer = ctx.createBuffer(1, samples.length, sampleRate);
  buffer.getChannelData(0).set(samples);
  const source = ctx.createBufferSource();
  source.buffer = buffer;
  source.connect(ctx.destination);
  source.start();
}
