import {
  AddObjectBody,
  AddObjectResponse,
  BBoxDto,
  CreateSessionBody,
  CreateSessionResponse,
  MutationAck,
  SessionState,
  TransformParams,
} from "./types.js";

export class ServiceError extends Error {
  constructor(public readonly status: number, detail: string) {
    super(`service returned ${status}: ${detail}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ComposerClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      ...init,
      headers: { "Content-Type": "application/json", ...init?.headers },
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        detail = (await response.json()).detail ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ServiceError(response.status, detail);
    }
    return response.json() as Promise<T>;
  }

  createSession(body: CreateSessionBody): Promise<CreateSessionResponse> {
    return this.request("/sessions", { method: "POST", body: JSON.stringify(body) });
  }

  getState(sessionId: string): Promise<SessionState> {
    return this.request(`/sessions/${sessionId}`);
  }

  deleteSession(sessionId: string): Promise<{ deleted: string }> {
    return this.request(`/sessions/${sessionId}`, { method: "DELETE" });
  }

  addObject(sessionId: string, body: AddObjectBody): Promise<AddObjectResponse> {
    return this.request(`/sessions/${sessionId}/objects`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  resampleObject(sessionId: string, objectId: string, seed: number): Promise<MutationAck> {
    return this.request(`/sessions/${sessionId}/objects/${objectId}/resample`, {
      method: "POST",
      body: JSON.stringify({ seed }),
    });
  }

  transformObject(
    sessionId: string,
    objectId: string,
    params: TransformParams,
  ): Promise<MutationAck & { mask_rle: string; bbox: BBoxDto }> {
    return this.request(`/sessions/${sessionId}/objects/${objectId}/transform`, {
      method: "POST",
      body: JSON.stringify(params),
    });
  }

  reorder(sessionId: string, ids: string[]): Promise<MutationAck & { order: string[] }> {
    return this.request(`/sessions/${sessionId}/order`, {
      method: "PUT",
      body: JSON.stringify({ ids }),
    });
  }

  canvasUrl(sessionId: string, step?: number): string {
    const suffix = step === undefined ? "" : `?step=${step}`;
    return `${this.baseUrl}/sessions/${sessionId}/canvas${suffix}`;
  }

  async fetchCanvas(sessionId: string, step?: number): Promise<Uint8Array> {
    const response = await this.fetchImpl(this.canvasUrl(sessionId, step));
    if (!response.ok) {
      throw new ServiceError(response.status, response.statusText);
    }
    return new Uint8Array(await response.arrayBuffer());
  }
}
