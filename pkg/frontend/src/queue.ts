/** Offline queue for gold entries.
 *
 * Saves that fail with a network error are parked here and flushed in order
 * once the service is reachable again.  Acknowledged entries are dropped,
 * so a reload never loses acknowledged data and never double-posts.
 */

import { OfflineError, ReviewApi } from "./api.js";

export interface PendingGold {
  speech_id: string;
  actor: string;
  sentiment: number;
}

export class OfflineQueue {
  private pending: PendingGold[] = [];

  get size(): number {
    return this.pending.length;
  }

  entries(): readonly PendingGold[] {
    return this.pending;
  }

  push(entry: PendingGold): void {
    this.pending.push(entry);
  }

  /** Replays queued saves; stops at the first entry that is still offline.
   * Returns the number of entries acknowledged by the service. */
  async flush(api: ReviewApi): Promise<number> {
    let acknowledged = 0;
    while (this.pending.length > 0) {
      const entry = this.pending[0];
      try {
        await api.postGold(entry.speech_id, entry.actor, entry.sentiment);
      } catch (err) {
        if (err instanceof OfflineError) {
          return acknowledged; // still offline, keep the rest queued
        }
        // a definitive server rejection must not wedge the queue
        this.pending.shift();
        throw err;
      }
      this.pending.shift();
      acknowledged += 1;
    }
    return acknowledged;
  }
}
