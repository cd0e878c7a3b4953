import type { AssignmentBody } from "./types.js";

export interface PendingSubmission {
  videoId: string;
  body: AssignmentBody;
  queuedAt: number;
}

/** Holds submissions that could not reach the service. Nothing is dropped:
 * entries stay queued (and visibly flagged) until a flush succeeds. */
export class PendingQueue {
  private readonly items: PendingSubmission[] = [];

  get size(): number {
    return this.items.length;
  }

  get entries(): readonly PendingSubmission[] {
    return this.items;
  }

  push(videoId: string, body: AssignmentBody, queuedAt = Date.now()): void {
    this.items.push({ videoId, body, queuedAt });
  }

  /** Re-sends queued submissions in order. Stops at the first failure so
   * ordering is preserved; returns how many went through. */
  async flush(
    send: (videoId: string, body: AssignmentBody) => Promise<unknown>,
  ): Promise<number> {
    let sent = 0;
    while (this.items.length > 0) {
      const head = this.items[0]!;
      try {
        await send(head.videoId, head.body);
      } catch {
        break;
      }
      this.items.shift();
      sent += 1;
    }
    return sent;
  }
}
