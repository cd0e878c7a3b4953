import type { ReviewSession } from "./session.js";
import type { CaseJson, ReportJson } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderScoreBars(c: CaseJson, classNames: string[]): HTMLElement {
  const wrap = el("div", { class: "score-bars", "data-testid": "score-bars" });
  const max = Math.max(...c.score_vector, 1e-9);
  c.score_vector.forEach((score, i) => {
    const name = classNames[i] ?? `class ${i}`;
    const row = el("div", { class: "score-row" });
    const kind =
      name === c.true_label ? "true" : name === c.predicted_label ? "pred" : "";
    const bar = el("div", {
      class: `score-bar ${kind}`.trim(),
      "data-testid": `bar-${name}`,
    });
    bar.style.width = `${Math.max((score / max) * 100, 0).toFixed(1)}%`;
    row.append(el("span", { class: "score-label" }, name), bar,
               el("span", { class: "score-value" }, score.toFixed(3)));
    wrap.append(row);
  });
  return wrap;
}

export function renderQueue(session: ReviewSession): HTMLElement {
  const list = el("ol", { class: "queue", "data-testid": "queue" });
  session.cases.forEach((c, i) => {
    const item = el(
      "li",
      {
        class:
          (i === session.index ? "active " : "") +
          (c.review_status === "reviewed" ? "reviewed" : "unreviewed"),
        "data-video-id": c.video_id,
      },
      `${c.video_id}  ${c.true_label} → ${c.predicted_label}`,
    );
    item.addEventListener("click", () => session.goTo(c.video_id));
    list.append(item);
  });
  return list;
}

export function renderDashboard(report: ReportJson | null): HTMLElement {
  const panel = el("section", { class: "dashboard", "data-testid": "dashboard" });
  panel.append(el("h2", {}, "category shares"));
  if (report === null) {
    panel.append(el("p", {}, "report not loaded"));
    return panel;
  }
  const coverage = el(
    "p",
    { "data-testid": "coverage" },
    `coverage ${report.reviewed}/${report.total_errors}` +
      (report.source_split ? ` (${report.source_split} split)` : ""),
  );
  panel.append(coverage);

  const table = el("table", { "data-testid": "report-table" });
  const head = el("tr");
  head.append(el("th", {}, "category"), el("th", {}, "count"), el("th", {}, "%"));
  table.append(head);
  for (const row of report.rows) {
    const tr = el("tr", { "data-category": row.category });
    // percent comes from the service verbatim; only formatting happens here
    tr.append(
      el("td", {}, row.category),
      el("td", {}, String(row.count)),
      el("td", { "data-testid": `pct-${row.category}` }, row.percent.toFixed(1)),
    );
    table.append(tr);
  }
  panel.append(table);

  panel.append(el("h2", {}, "fix next"));
  const ranked = el("ol", { "data-testid": "ranked" });
  for (const name of report.ranked) ranked.append(el("li", {}, name));
  panel.append(ranked);
  return panel;
}

export function renderCasePanel(
  session: ReviewSession,
  classNames: string[],
): HTMLElement {
  const panel = el("section", { class: "case-panel", "data-testid": "case-panel" });
  const c = session.current;
  if (c === null) {
    panel.append(el("p", { "data-testid": "empty-state" }, "no errors to review"));
    return panel;
  }

  const header = el("header");
  header.append(
    el("h2", {}, c.video_id),
    el("p", { "data-testid": "labels" },
       `true: ${c.true_label}   predicted: ${c.predicted_label}`),
    el("p", {}, `status: ${c.review_status}, ` +
       `wrong confidence ${(c.wrong_confidence * 100).toFixed(1)}%`),
  );
  panel.append(header);

  if (session.conflict !== null && session.conflict.videoId === c.video_id) {
    const k = session.conflict;
    panel.append(
      el(
        "p",
        { class: "conflict", "data-testid": "conflict" },
        `updated by ${k.current.reviewer || "another reviewer"} while you were ` +
          `reviewing: now ${k.current.categories.join(", ")} ` +
          `(their entry is current; submitting keeps both in the history)`,
      ),
    );
  }

  const video = el("video", {
    src: session.api.mediaUrl(c.media_url),
    controls: "controls",
    loop: "loop",
    "data-testid": "player",
    "data-video-id": c.video_id,
  });
  panel.append(video);
  panel.append(renderScoreBars(c, classNames));

  const palette = el("fieldset", { class: "palette", "data-testid": "palette" });
  palette.append(el("legend", {}, "error categories (hotkeys 1-9)"));
  session.palette.forEach((name, i) => {
    const label = el("label", { class: session.selected.has(name) ? "on" : "" });
    const box = el("input", { type: "checkbox", "data-category": name });
    (box as HTMLInputElement).checked = session.selected.has(name);
    box.addEventListener("change", () => session.toggleCategory(name));
    label.append(box, el("span", {}, `${i < 9 ? `[${i + 1}] ` : ""}${name}`));
    palette.append(label);
  });
  panel.append(palette);

  const addRow = el("div", { class: "add-category" });
  const addInput = el("input", {
    type: "text",
    placeholder: "new category",
    "data-testid": "add-category-input",
  }) as HTMLInputElement;
  const addButton = el("button", { "data-testid": "add-category" }, "add");
  addButton.addEventListener("click", () => {
    const name = addInput.value.trim();
    if (name) void session.addCategory(name).then(() => (addInput.value = ""));
  });
  addRow.append(addInput, addButton);
  panel.append(addRow);

  const comment = el("textarea", {
    placeholder: "comment",
    "data-testid": "comment",
  }) as HTMLTextAreaElement;
  comment.value = session.comment;
  comment.addEventListener("input", () => (session.comment = comment.value));
  panel.append(comment);

  const controls = el("div", { class: "controls" });
  const prev = el("button", { "data-testid": "prev" }, "prev [p]");
  const submit = el("button", { "data-testid": "submit" }, "submit [enter]");
  const next = el("button", { "data-testid": "next" }, "next [n]");
  prev.addEventListener("click", () => session.prev());
  next.addEventListener("click", () => session.next());
  submit.addEventListener("click", () => void session.submit().catch(() => {}));
  controls.append(prev, submit, next);
  panel.append(controls);
  return panel;
}

export function renderBanner(session: ReviewSession): HTMLElement {
  const banner = el("div", { class: "banner" });
  if (session.offline || session.pending.size > 0) {
    const note = el(
      "p",
      { class: "offline", "data-testid": "offline-banner" },
      `service unreachable: ${session.pending.size} submission(s) queued locally`,
    );
    const retry = el("button", { "data-testid": "retry" }, "retry");
    retry.addEventListener("click", () => void session.retryPending());
    note.append(" ", retry);
    banner.append(note);
  }
  return banner;
}
