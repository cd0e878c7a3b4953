import {
  renderBanner,
  renderCasePanel,
  renderDashboard,
  renderQueue,
} from "./render.js";
import type { ReviewSession } from "./session.js";

function isTypingTarget(target: EventTarget | null): boolean {
  return (
    target instanceof HTMLInputElement || target instanceof HTMLTextAreaElement
  );
}

/** Full-page shell: renders the session into a root node and wires the
 * keyboard-only review path (1-9 toggle categories, n/p or arrows move,
 * Enter submits). */
export class TriageApp {
  classNames: string[] = [];

  constructor(
    readonly root: HTMLElement,
    readonly session: ReviewSession,
  ) {
    session.subscribe(() => this.render());
  }

  async start(): Promise<void> {
    const meta = await this.session.api.meta();
    this.classNames = meta.class_names;
    await this.session.load();
  }

  handleKey(event: KeyboardEvent): void {
    if (isTypingTarget(event.target)) return;
    const s = this.session;
    if (event.key >= "1" && event.key <= "9") {
      s.toggleByIndex(Number(event.key) - 1);
    } else if (event.key === "n" || event.key === "ArrowRight") {
      s.next();
    } else if (event.key === "p" || event.key === "ArrowLeft") {
      s.prev();
    } else if (event.key === "Enter") {
      void s.submit().catch(() => {});
    }
  }

  attachKeyboard(target: { addEventListener: Window["addEventListener"] }): void {
    target.addEventListener("keydown", (e) => this.handleKey(e as KeyboardEvent));
  }

  render(): void {
    const s = this.session;
    this.root.replaceChildren(
      renderBanner(s),
      renderQueue(s),
      renderCasePanel(s, this.classNames),
      renderDashboard(s.report),
    );
  }
}
