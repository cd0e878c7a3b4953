import { ApiUnreachable, TriageApiClient } from "./api.js";
import { PendingQueue } from "./offline.js";
import type {
  AssignmentBody,
  CaseFilter,
  CaseJson,
  ReportJson,
} from "./types.js";

export interface Conflict {
  videoId: string;
  /** what this client last saw for the case */
  seenHistoryLength: number;
  /** the assignment that is now current (someone else's, last write wins) */
  current: { reviewer: string; categories: string[]; timestamp: number };
}

export type SessionListener = () => void;

/** The UI's brain: review queue, current selection, submissions (queued
 * locally when the service is unreachable), palette, and the live report.
 * Counts and percentages are whatever the service reported last; this
 * class never recomputes them. */
export class ReviewSession {
  cases: CaseJson[] = [];
  index = 0;
  palette: string[] = [];
  report: ReportJson | null = null;
  sourceSplit = "";
  selected = new Set<string>();
  comment = "";
  reviewer = "";
  conflict: Conflict | null = null;
  offline = false;
  readonly pending = new PendingQueue();

  private readonly seenHistory = new Map<string, number>();
  private readonly listeners: SessionListener[] = [];

  constructor(
    readonly api: TriageApiClient,
    private readonly filter: CaseFilter = {},
  ) {}

  subscribe(listener: SessionListener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  get current(): CaseJson | null {
    return this.cases[this.index] ?? null;
  }

  get coverage(): { reviewed: number; total: number } {
    return {
      reviewed: this.report?.reviewed ?? 0,
      total: this.report?.total_errors ?? this.cases.length,
    };
  }

  async load(): Promise<void> {
    const meta = await this.api.meta();
    this.palette = meta.categories;
    this.sourceSplit = meta.source_split;
    this.cases = await this.api.cases(this.filter);
    for (const c of this.cases) {
      this.seenHistory.set(c.video_id, c.history_length);
    }
    this.report = await this.api.report();
    this.index = 0;
    this.offline = false;
    this.notify();
  }

  next(): void {
    if (this.index < this.cases.length - 1) {
      this.index += 1;
      this.resetSelection();
    }
  }

  prev(): void {
    if (this.index > 0) {
      this.index -= 1;
      this.resetSelection();
    }
  }

  goTo(videoId: string): void {
    const i = this.cases.findIndex((c) => c.video_id === videoId);
    if (i >= 0) {
      this.index = i;
      this.resetSelection();
    }
  }

  private resetSelection(): void {
    this.selected.clear();
    this.comment = "";
    this.conflict = null;
    this.notify();
  }

  toggleCategory(name: string): void {
    if (this.selected.has(name)) this.selected.delete(name);
    else this.selected.add(name);
    this.notify();
  }

  /** Hotkeys 1..9 map to palette positions. */
  toggleByIndex(position: number): void {
    const name = this.palette[position];
    if (name !== undefined) this.toggleCategory(name);
  }

  async addCategory(name: string): Promise<void> {
    this.palette = await this.api.addCategory(name);
    this.notify();
  }

  /** Submit the current selection. Unreachable service queues the body
   * locally (flagged via `offline`/`pending`), anything else propagates. */
  async submit(): Promise<"sent" | "queued"> {
    const target = this.current;
    if (target === null) throw new Error("no case selected");
    if (this.selected.size === 0) throw new Error("select at least one category");
    const body: AssignmentBody = {
      categories: [...this.selected],
      comment: this.comment,
      reviewer: this.reviewer,
    };
    try {
      const updated = await this.api.submitAssignment(target.video_id, body);
      this.absorbCase(updated, true);
      this.selected.clear();
      this.comment = "";
      await this.refreshReport();
      return "sent";
    } catch (err) {
      if (err instanceof ApiUnreachable) {
        this.pending.push(target.video_id, body);
        this.offline = true;
        this.notify();
        return "queued";
      }
      throw err;
    }
  }

  /** Re-send queued submissions, then bring the report back in sync. */
  async retryPending(): Promise<number> {
    const sent = await this.pending.flush((id, body) =>
      this.api.submitAssignment(id, body).then((c) => this.absorbCase(c, true)),
    );
    if (this.pending.size === 0) this.offline = false;
    if (sent > 0) await this.refreshReport();
    this.notify();
    return sent;
  }

  async refreshReport(): Promise<void> {
    this.report = await this.api.report();
    this.notify();
  }

  /** Re-fetch the current case; if its history grew beyond what this
   * client has seen, someone else wrote to it and the conflict is
   * surfaced (their entry is current until our next write). */
  async refreshCurrentCase(): Promise<void> {
    const target = this.current;
    if (target === null) return;
    const fresh = await this.api.getCase(target.video_id);
    const seen = this.seenHistory.get(fresh.video_id) ?? 0;
    if (fresh.history_length > seen && fresh.current !== null) {
      this.conflict = {
        videoId: fresh.video_id,
        seenHistoryLength: seen,
        current: {
          reviewer: fresh.current.reviewer,
          categories: fresh.current.categories,
          timestamp: fresh.current.timestamp,
        },
      };
    }
    this.absorbCase(fresh, false);
  }

  private absorbCase(updated: CaseJson, ours: boolean): void {
    const i = this.cases.findIndex((c) => c.video_id === updated.video_id);
    if (i >= 0) this.cases[i] = updated;
    this.seenHistory.set(updated.video_id, updated.history_length);
    if (ours) this.conflict = null;
    this.notify();
  }

  /** The whole assignment log as tab-delimited text, one row per log
   * entry, oldest first per case in queue order. */
  async exportAssignmentLog(): Promise<string> {
    const lines = ["video_id\tcategories\tcomment\treviewer\ttimestamp"];
    for (const c of this.cases) {
      const history = await this.api.history(c.video_id);
      for (const a of history) {
        lines.push(
          [
            a.video_id,
            a.categories.join(";"),
            a.comment.replaceAll("\t", " ").replaceAll("\n", " "),
            a.reviewer,
            String(a.timestamp),
          ].join("\t"),
        );
      }
    }
    return lines.join("\n") + "\n";
  }
}
