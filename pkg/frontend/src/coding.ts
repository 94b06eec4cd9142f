/** Gold-coding workflow: validate locally, save optimistically, queue when
 * offline.  A save is blocked client-side unless the actor is non-empty and
 * the sentiment is an integer in [-5, +5]. */

import { OfflineError, ReviewApi } from "./api.js";
import { OfflineQueue } from "./queue.js";
import type { GoldRecord } from "./types.js";

export interface DraftEntry {
  speech_id: string;
  actor: string;
  sentiment: number;
}

export type SaveResult =
  | { outcome: "saved"; record: GoldRecord }
  | { outcome: "queued" }
  | { outcome: "blocked"; reason: string };

export function validateDraft(draft: DraftEntry): string | null {
  if (!draft.actor.trim()) {
    return "actor must not be empty";
  }
  if (!Number.isInteger(draft.sentiment)) {
    return "sentiment must be an integer";
  }
  if (draft.sentiment < -5 || draft.sentiment > 5) {
    return "sentiment must be between -5 and +5";
  }
  return null;
}

export async function saveGold(
  api: ReviewApi,
  queue: OfflineQueue,
  draft: DraftEntry,
): Promise<SaveResult> {
  const problem = validateDraft(draft);
  if (problem !== null) {
    return { outcome: "blocked", reason: problem };
  }
  const actor = draft.actor.trim();
  try {
    const response = await api.postGold(draft.speech_id, actor, draft.sentiment);
    return { outcome: "saved", record: response.record };
  } catch (err) {
    if (err instanceof OfflineError) {
      queue.push({ speech_id: draft.speech_id, actor, sentiment: draft.sentiment });
      return { outcome: "queued" };
    }
    throw err;
  }
}

/** Completed entries for a coding screen: acknowledged server rows plus the
 * locally queued ones, so the view is a pure function of both sources. */
export function visibleEntries(
  serverRows: GoldRecord[],
  queue: OfflineQueue,
  speechId: string,
): Array<GoldRecord & { pending: boolean }> {
  const acked = serverRows
    .filter((row) => row.speech_id === speechId)
    .map((row) => ({ ...row, pending: false }));
  const queued = queue
    .entries()
    .filter((entry) => entry.speech_id === speechId)
    .map((entry) => ({
      speech_id: entry.speech_id,
      coder: "(pending)",
      actor_surface: entry.actor,
      sentiment: entry.sentiment,
      pending: true,
    }));
  return [...acked, ...queued];
}
