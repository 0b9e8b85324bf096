// Typed client for the local synthesis service. Errors surface the
// backend's machine-parseable {error, detail, frame_index} bodies.

import { SilhouetteDocument, validateDocument } from './format.js';

export interface ModelInfo {
  id: string;
  path: string;
  step: number;
  fingerprint: string;
  quantization: { kind: string; num_bins: number } | null;
  loaded: boolean;
}

export interface SynthesisResponse {
  wav: ArrayBuffer;
  mse: number;
  fingerprint: string;
  modelId: string;
}

export class ServiceError extends Error {
  readonly status: number;
  readonly code: string;
  readonly frameIndex?: number;

  constructor(status: number, code: string, detail: string, frameIndex?: number) {
    super(detail);
    this.name = 'ServiceError';
    this.status = status;
    this.code = code;
    this.frameIndex = frameIndex;
  }
}

type FetchLike = typeof fetch;

async function raiseServiceError(response: Response): Promise<never> {
  let code = 'error';
  let detail = `service responded with ${response.status}`;
  let frameIndex: number | undefined;
  try {
    const body = (await response.json()) as { error?: string; detail?: string; frame_index?: number };
    code = body.error ?? code;
    detail = body.detail ?? detail;
    frameIndex = body.frame_index;
  } catch {
    // non-JSON error body; keep the generic message
  }
  throw new ServiceError(response.status, code, detail, frameIndex);
}

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  async extract(wavBytes: ArrayBuffer, windowLen = 1024, hopLen = 256): Promise<SilhouetteDocument> {
    const url = `${this.baseUrl}/v1/extract?window=${windowLen}&hop=${hopLen}`;
    const response = await this.fetchImpl(url, { method: 'POST', body: wavBytes });
    if (!response.ok) await raiseServiceError(response);
    return validateDocument(await response.json());
  }

  async synthesize(doc: SilhouetteDocument, modelId?: string): Promise<SynthesisResponse> {
    const payload: Record<string, unknown> = { silhouette: doc };
    if (modelId) payload.model = modelId;
    const response = await this.fetchImpl(`${this.baseUrl}/v1/synthesize`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
    if (!response.ok) await raiseServiceError(response);
    const mse = Number(response.headers.get('X-Silhouette-Mse'));
    if (!Number.isFinite(mse)) throw new ServiceError(500, 'format', 'missing X-Silhouette-Mse header');
    return {
      wav: await response.arrayBuffer(),
      mse,
      fingerprint: response.headers.get('X-Model-Fingerprint') ?? '',
      modelId: response.headers.get('X-Model-Id') ?? '',
    };
  }

  async listModels(): Promise<{ models: ModelInfo[]; loaded: string | null }> {
    const response = await this.fetchImpl(`${this.baseUrl}/v1/models`);
    if (!response.ok) await raiseServiceError(response);
    return (await response.json()) as { models: ModelInfo[]; loaded: string | null };
  }

  async loadModel(id: string): Promise<{ id: string; fingerprint: string; step: number }> {
    const response = await this.fetchImpl(`${this.baseUrl}/v1/models/load`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ id }),
    });
    if (!response.ok) await raiseServiceError(response);
    return (await response.json()) as { id: string; fingerprint: string; step: number };
  }
}
