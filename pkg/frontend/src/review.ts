/** Match correction, reference-file confirmation, and resolution approval.
 *
 * Every action re-reads the metrics panel afterwards; stale revisions come
 * back as a "conflict" result the view turns into a reload-and-retry prompt.
 */

import { ConflictError, ReviewApi } from "./api.js";
import type { Metrics } from "./types.js";

export type ActionResult =
  | { outcome: "applied"; metrics: Metrics }
  | { outcome: "conflict"; detail: string };

async function withMetrics(
  api: ReviewApi,
  action: () => Promise<unknown>,
): Promise<ActionResult> {
  try {
    await action();
  } catch (err) {
    if (err instanceof ConflictError) {
      return { outcome: "conflict", detail: err.message };
    }
    throw err;
  }
  return { outcome: "applied", metrics: await api.metrics() };
}

export function rejectMatch(
  api: ReviewApi,
  matchId: string,
  revision: number,
): Promise<ActionResult> {
  return withMetrics(api, () => api.rejectMatch(matchId, revision));
}

export function mergeDuplicateGold(
  api: ReviewApi,
  matchId: string,
  duplicateGoldId: string,
  revision: number,
): Promise<ActionResult> {
  return withMetrics(api, () => api.dropGold(matchId, duplicateGoldId, revision));
}

export function confirmSupergold(
  api: ReviewApi,
  supergoldId: string,
  confirmed: boolean,
  revision: number,
): Promise<ActionResult> {
  return withMetrics(api, () => api.confirmSupergold(supergoldId, confirmed, revision));
}

export function decideResolution(
  api: ReviewApi,
  mentionId: string,
  action: "approve" | "reject",
  partyId: string,
  revision: number,
): Promise<ActionResult> {
  return withMetrics(api, () => api.decideResolution(mentionId, action, partyId, revision));
}
