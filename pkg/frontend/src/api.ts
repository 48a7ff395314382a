import type {
  InterpolateResponse,
  Schema,
  SynthesisRequest,
  SynthesisResponse,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

/** Thin typed client over the synthesis service endpoints. */
export class StudioApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      throw new ApiError(response.status, `${path} failed: ${response.status}`);
    }
    return (await response.json()) as T;
  }

  getSchema(): Promise<Schema> {
    return this.request<Schema>("/schema");
  }

  synthesize(req: SynthesisRequest): Promise<SynthesisResponse> {
    return this.request<SynthesisResponse>("/synthesize", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  interpolate(
    from: SynthesisRequest,
    to: SynthesisRequest,
    steps: number,
  ): Promise<InterpolateResponse> {
    return this.request<InterpolateResponse>("/interpolate", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ from, to, steps }),
    });
  }
}
