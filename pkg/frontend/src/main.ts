import { TriageApiClient } from "./api.js";
import { TriageApp } from "./app.js";
import { ReviewSession } from "./session.js";

// ?api=http://host:port overrides the service location (default: wherever
// this page is served from, matching `shotclass triage-serve`).
const apiBase =
  new URLSearchParams(window.location.search).get("api") ??
  window.location.origin;

const session = new ReviewSession(new TriageApiClient(apiBase));
const app = new TriageApp(document.getElementById("app")!, session);
app.attachKeyboard(window);

const REFRESH_MS = 5000;

app
  .start()
  .then(() => {
    // one refresh cycle: dashboard and current case stay live, queued
    // submissions retry automatically once the service is back
    setInterval(() => {
      void session.refreshReport().catch(() => {});
      void session.refreshCurrentCase().catch(() => {});
      if (session.pending.size > 0) void session.retryPending();
    }, REFRESH_MS);
  })
  .catch((err) => {
    document.getElementById("app")!.textContent =
      `cannot reach the triage service at ${apiBase}: ${String(err)}`;
  });
