// Thin typed client over the session service's HTTP/JSON contract.
// The console talks to these six endpoints and nothing else.

export interface PendingDownlink {
  option: number;
  emitted_step: number;
}

export interface OptionSummary {
  option: number;
  success_prob: number;
  components: number;
}

export interface OutcomeTerm {
  o: number;
  q: number;
  term1: number;
  term2: number;
}

export interface EfeScore {
  option: number;
  total: number;
  per_outcome: OutcomeTerm[];
}

export interface ObservationRecord {
  step: number;
  option: number;
  source: string;
  label: number;
  gamma0: number | null;
  gamma1: number | null;
  lambda: number;
  components_before: number;
  components_after: number;
}

export interface SessionState {
  id: string;
  step: number;
  config: Record<string, unknown>;
  options: OptionSummary[];
  efe: EfeScore[];
  regret: number[];
  pending: PendingDownlink[];
  observations: ObservationRecord[];
}

export interface FusionReply {
  gamma0: number;
  gamma1: number;
}

export interface ServiceError {
  error: string;
  code: string;
}

export class ApiError extends Error {
  constructor(public status: number, public body: ServiceError) {
    super(body.error);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  const body = await response.json();
  if (!response.ok) {
    throw new ApiError(response.status, body as ServiceError);
  }
  return body as T;
}

export class SessionClient {
  constructor(private baseUrl: string) {}

  createSession(config: Record<string, unknown>): Promise<{ id: string }> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    });
  }

  getState(id: string): Promise<SessionState> {
    return request(`${this.baseUrl}/sessions/${id}`);
  }

  advance(id: string, steps: number): Promise<SessionState> {
    return request(`${this.baseUrl}/sessions/${id}/advance`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ steps }),
    });
  }

  listPending(id: string): Promise<{ pending: PendingDownlink[] }> {
    return request(`${this.baseUrl}/sessions/${id}/pending`);
  }

  submitObservation(id: string, option: number, label: number): Promise<FusionReply> {
    return request(`${this.baseUrl}/sessions/${id}/observations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ option, label }),
    });
  }

  getEfe(id: string): Promise<{ efe: EfeScore[] }> {
    return request(`${this.baseUrl}/sessions/${id}/efe`);
  }
}
