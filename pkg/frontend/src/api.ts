// Typed client for the documented service endpoints. The UI talks to the
// agent exclusively through this module; nothing here mutates state except
// createSession / postMessage / closeSession.

import type {
  CacheView,
  CsoView,
  RegistryInfo,
  SessionRecord,
  TrajectoryView,
  Turn,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "Content-Type": "application/json" } };
    if (body !== undefined) init.body = JSON.stringify(body);
    const res = await this.fetchImpl(this.baseUrl + path, init);
    if (!res.ok) {
      let code = `http_${res.status}`;
      let message = res.statusText;
      try {
        const payload = await res.json();
        code = payload.code ?? code;
        message = payload.message ?? message;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(res.status, code, message);
    }
    return res.json() as Promise<T>;
  }

  createSession(mode: string, registryId?: string): Promise<SessionRecord> {
    return this.request("POST", "/sessions", registryId ? { mode, registryId } : { mode });
  }

  listSessions(): Promise<{ sessions: SessionRecord[] }> {
    return this.request("GET", "/sessions");
  }

  postMessage(sessionId: string, text: string): Promise<{ turns: Turn[] }> {
    return this.request("POST", `/sessions/${sessionId}/message`, { text });
  }

  getCso(sessionId: string): Promise<CsoView> {
    return this.request("GET", `/sessions/${sessionId}/cso?format=json`);
  }

  getCache(sessionId: string): Promise<CacheView> {
    return this.request("GET", `/sessions/${sessionId}/cache`);
  }

  getTrajectory(sessionId: string): Promise<TrajectoryView> {
    return this.request("GET", `/sessions/${sessionId}/trajectory`);
  }

  listRegistries(): Promise<{ default: string; registries: RegistryInfo[] }> {
    return this.request("GET", "/registries");
  }

  listModes(): Promise<{ modes: string[] }> {
    return this.request("GET", "/modes");
  }

  closeSession(sessionId: string): Promise<SessionRecord> {
    return this.request("DELETE", `/sessions/${sessionId}`);
  }
}
