/**
 * Typed client for the preference-session HTTP API.
 *
 * All shapes mirror the service wire format exactly; outcome values are
 * -1 (first worse), 0 (equivalent), 1 (first better).
 */

export type Order = -1 | 0 | 1;

export interface SessionInfo {
  id: string;
  dim: number;
  labels: string[];
  init_points: number;
}

export interface NextPair {
  pair: [number[], number[]];
  iteration: number;
  phase: 'initializing' | 'active';
}

export interface PreferenceResult {
  best: number[];
  n_points: number;
  n_comparisons: number;
}

export interface HistoryEntry {
  i: number;
  j: number;
  order: Order;
  x1: number[];
  x2: number[];
}

export interface SessionHistory {
  comparisons: HistoryEntry[];
  best_trace: number[][];
  best: number[] | null;
  labels: string[];
}

export interface CreateSessionRequest {
  box: number[][];
  labels?: string[];
  seed?: number;
  fit_max_steps?: number;
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    private baseUrl: string = '',
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { 'Content-Type': 'application/json' } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const doc = await response.json();
        if (doc && typeof doc.detail === 'string') detail = doc.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  createSession(body: CreateSessionRequest): Promise<SessionInfo> {
    return this.request<SessionInfo>('POST', '/sessions', body);
  }

  nextPair(id: string): Promise<NextPair> {
    return this.request<NextPair>('GET', `/sessions/${id}/next`);
  }

  postPreference(id: string, x1: number[], x2: number[], order: Order): Promise<PreferenceResult> {
    return this.request<PreferenceResult>('POST', `/sessions/${id}/preference`, { x1, x2, order });
  }

  history(id: string): Promise<SessionHistory> {
    return this.request<SessionHistory>('GET', `/sessions/${id}/history`);
  }
}
