// Typed client for the study service. The fetch implementation is
// injectable so tests can fake the network.

export interface SessionInfo {
  session_id: string;
  trial_count: number;
  button_order: string[];
}

export interface TrialPayload {
  left_url: string;
  right_url: string;
  display_ms: number;
}

export interface ResponseAck {
  accepted: boolean;
  count: number;
}

export type Choice = "identical" | "different";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class StudyApi {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path, init);
    if (!res.ok) {
      throw new ApiError(res.status, `${init?.method ?? "GET"} ${path} -> ${res.status}`);
    }
    return (await res.json()) as T;
  }

  createSession(seed?: number): Promise<SessionInfo> {
    return this.request<SessionInfo>("/api/session", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(seed === undefined ? {} : { seed }),
    });
  }

  getTrial(sessionId: string, index: number): Promise<TrialPayload> {
    return this.request<TrialPayload>(`/api/trial/${sessionId}/${index}`);
  }

  postResponse(
    sessionId: string,
    index: number,
    choice: Choice,
    latencyMs: number,
  ): Promise<ResponseAck> {
    return this.request<ResponseAck>(`/api/response/${sessionId}/${index}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ choice, latency_ms: latencyMs }),
    });
  }

  imageUrl(path: string): string {
    return this.baseUrl + path;
  }
}
