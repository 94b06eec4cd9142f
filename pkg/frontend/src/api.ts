/** Typed client for the review service.
 *
 * Every mutation carries the revision the client last saw; a 409 surfaces
 * as ConflictError so views can offer a reload-and-retry prompt instead of
 * silently overwriting someone else's work.
 */

import type {
  GoldRecord,
  MatchSetView,
  Metrics,
  ResolutionItem,
  SpeechView,
  SupergoldView,
  TaskView,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ConflictError extends ApiError {
  constructor(message: string) {
    super(409, message);
  }
}

export class OfflineError extends Error {}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ReviewApi {
  constructor(
    private baseUrl: string,
    private coder: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const headers: Record<string, string> = {
      "Content-Type": "application/json",
      "X-Coder": this.coder,
      ...((init.headers as Record<string, string>) ?? {}),
    };
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, { ...init, headers });
    } catch {
      throw new OfflineError(`network unreachable for ${path}`);
    }
    if (response.status === 409) {
      const body = await response.json().catch(() => ({ detail: "conflict" }));
      throw new ConflictError(String((body as { detail?: string }).detail ?? "conflict"));
    }
    if (!response.ok) {
      const body = await response.text().catch(() => "");
      throw new ApiError(response.status, `${path} failed (${response.status}): ${body}`);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("/health");
  }

  sample(k?: number, seed?: number): Promise<SpeechView[]> {
    const params = new URLSearchParams();
    if (k !== undefined) params.set("k", String(k));
    if (seed !== undefined) params.set("seed", String(seed));
    const query = params.toString();
    return this.request(`/speeches/sample${query ? `?${query}` : ""}`);
  }

  gold(speechId: string): Promise<GoldRecord[]> {
    return this.request(`/gold?speech_id=${encodeURIComponent(speechId)}`);
  }

  postGold(speechId: string, actor: string, sentiment: number): Promise<{ record: GoldRecord }> {
    return this.request("/gold", {
      method: "POST",
      body: JSON.stringify({ speech_id: speechId, actor, sentiment }),
    });
  }

  matches(): Promise<MatchSetView> {
    return this.request("/matches");
  }

  rejectMatch(matchId: string, revision: number): Promise<{ revision: number }> {
    return this.request(`/matches/${encodeURIComponent(matchId)}`, {
      method: "PATCH",
      body: JSON.stringify({ op: "reject", revision }),
    });
  }

  dropGold(matchId: string, goldId: string, revision: number): Promise<{ revision: number }> {
    return this.request(`/matches/${encodeURIComponent(matchId)}`, {
      method: "PATCH",
      body: JSON.stringify({ op: "drop-gold", gold_id: goldId, revision }),
    });
  }

  supergold(): Promise<SupergoldView[]> {
    return this.request("/supergold");
  }

  confirmSupergold(
    supergoldId: string,
    confirmed: boolean,
    revision: number,
  ): Promise<{ supergold_id: string; confirmed: boolean; revision: number }> {
    return this.request(`/supergold/${encodeURIComponent(supergoldId)}/confirm`, {
      method: "POST",
      body: JSON.stringify({ confirmed, revision }),
    });
  }

  resolutionQueue(): Promise<ResolutionItem[]> {
    return this.request("/resolution-queue");
  }

  decideResolution(
    mentionId: string,
    action: "approve" | "reject",
    partyId: string,
    revision: number,
  ): Promise<{ item_id: string; status: string; revision: number }> {
    return this.request(`/resolution-queue/${mentionId}`, {
      method: "POST",
      body: JSON.stringify({ action, party_id: partyId, revision }),
    });
  }

  metrics(): Promise<Metrics> {
    return this.request("/metrics");
  }

  tasks(kind?: string, status?: string): Promise<TaskView[]> {
    const params = new URLSearchParams();
    if (kind) params.set("kind", kind);
    if (status) params.set("status", status);
    const query = params.toString();
    return this.request(`/tasks${query ? `?${query}` : ""}`);
  }

  completeTask(taskId: string, status: "done" | "skipped", revision: number): Promise<unknown> {
    return this.request(`/tasks/${taskId}/complete`, {
      method: "POST",
      body: JSON.stringify({ status, revision }),
    });
  }
}
