// Silhouette document wire format: must stay byte-compatible with the CLI
// and service. Parsing enforces the same invariants the backend does, so a
// document that round-trips here is exactly what the service would accept.

export interface QuantizationScheme {
  kind: 'linear' | 'mu_law';
  num_bins: number;
}

export type Frame = [number, number];

export interface SilhouetteDocument {
  version: 1;
  sample_rate_hz: number;
  window_len: number;
  hop_len: number;
  quantization: QuantizationScheme | null;
  frames: Frame[];
}

export class FormatError extends Error {
  readonly frameIndex?: number;

  constructor(message: string, frameIndex?: number) {
    super(message);
    this.name = 'FormatError';
    this.frameIndex = frameIndex;
  }
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === 'object' && value !== null && !Array.isArray(value);
}

export function validateDocument(raw: unknown): SilhouetteDocument {
  if (!isRecord(raw)) throw new FormatError('silhouette document must be an object');
  if (raw.version !== 1) throw new FormatError(`unsupported silhouette format version: ${String(raw.version)}`);
  for (const key of ['sample_rate_hz', 'window_len', 'hop_len'] as const) {
    const value = raw[key];
    if (typeof value !== 'number' || !Number.isInteger(value) || value <= 0) {
      throw new FormatError(`field ${key} must be a positive integer`);
    }
  }
  const framesRaw = raw.frames;
  if (!Array.isArray(framesRaw) || framesRaw.length === 0) {
    throw new FormatError('silhouette document must contain a non-empty frames list');
  }
  const frames: Frame[] = framesRaw.map((pair, i) => {
    if (!Array.isArray(pair) || pair.length !== 2) {
      throw new FormatError(`frame ${i} must be a [min, max] pair`, i);
    }
    const lo = Number(pair[0]);
    const hi = Number(pair[1]);
    if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
      throw new FormatError(`frame ${i} contains non-finite values`, i);
    }
    if (lo > hi) throw new FormatError(`frame ${i} violates min <= max: [${lo}, ${hi}]`, i);
    if (lo < -1 || hi > 1) throw new FormatError(`frame ${i} outside [-1, 1]: [${lo}, ${hi}]`, i);
    return [lo, hi];
  });
  let quantization: QuantizationScheme | null = null;
  const q = raw.quantization;
  if (q !== null && q !== undefined) {
    if (!isRecord(q) || (q.kind !== 'linear' && q.kind !== 'mu_law') || typeof q.num_bins !== 'number') {
      throw new FormatError('quantization must be null or {kind, num_bins}');
    }
    if (!Number.isInteger(q.num_bins) || q.num_bins < 2) {
      throw new FormatError('num_bins must be an integer >= 2');
    }
    quantization = { kind: q.kind, num_bins: q.num_bins };
  }
  return {
    version: 1,
    sample_rate_hz: raw.sample_rate_hz as number,
    window_len: raw.window_len as number,
    hop_len: raw.hop_len as number,
    quantization,
    frames,
  };
}

export function parseSilhouette(text: string): SilhouetteDocument {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new FormatError(`malformed silhouette document: ${(err as Error).message}`);
  }
  return validateDocument(raw);
}

export function serializeSilhouette(doc: SilhouetteDocument): string {
  validateDocument(doc);
  return JSON.stringify({
    version: doc.version,
    sample_rate_hz: doc.sample_rate_hz,
    window_len: doc.window_len,
    hop_len: doc.hop_len,
    quantization: doc.quantization,
    frames: doc.frames,
  }) + '\n';
}
