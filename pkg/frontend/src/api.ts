import type {
  AssignmentBody,
  AssignmentJson,
  CaseFilter,
  CaseJson,
  ConfusionJson,
  MetaJson,
  ReportJson,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Network-level failure (service down, DNS, aborted). Distinguished from
 * ApiError so callers can queue work for retry instead of surfacing it as
 * a rejected submission. */
export class ApiUnreachable extends Error {
  constructor(cause: unknown) {
    super(`triage service unreachable: ${String(cause)}`);
    this.name = "ApiUnreachable";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

function detailOf(payload: unknown): string {
  if (payload && typeof payload === "object" && "detail" in payload) {
    const d = (payload as { detail: unknown }).detail;
    if (typeof d === "string") return d;
    if (Array.isArray(d) && d.length > 0) {
      const first = d[0];
      if (first && typeof first === "object" && "msg" in first) {
        return String((first as { msg: unknown }).msg);
      }
    }
  }
  return "request failed";
}

export class TriageApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  mediaUrl(relative: string): string {
    return this.baseUrl + relative;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (cause) {
      throw new ApiUnreachable(cause);
    }
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      throw new ApiError(response.status, detailOf(body));
    }
    return body as T;
  }

  meta(): Promise<MetaJson> {
    return this.request<MetaJson>("/meta");
  }

  cases(filter: CaseFilter = {}): Promise<CaseJson[]> {
    const params = new URLSearchParams();
    if (filter.status) params.set("status", filter.status);
    if (filter.true_class) params.set("true_class", filter.true_class);
    const query = params.toString();
    return this.request<CaseJson[]>("/cases" + (query ? `?${query}` : ""));
  }

  getCase(videoId: string): Promise<CaseJson> {
    return this.request<CaseJson>(`/cases/${encodeURIComponent(videoId)}`);
  }

  history(videoId: string): Promise<AssignmentJson[]> {
    return this.request<AssignmentJson[]>(
      `/cases/${encodeURIComponent(videoId)}/history`,
    );
  }

  submitAssignment(videoId: string, body: AssignmentBody): Promise<CaseJson> {
    return this.request<CaseJson>(
      `/cases/${encodeURIComponent(videoId)}/assignments`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      },
    );
  }

  categories(): Promise<string[]> {
    return this.request<{ categories: string[] }>("/categories").then(
      (r) => r.categories,
    );
  }

  addCategory(name: string): Promise<string[]> {
    return this.request<{ categories: string[] }>("/categories", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ name }),
    }).then((r) => r.categories);
  }

  report(): Promise<ReportJson> {
    return this.request<ReportJson>("/report");
  }

  confusion(): Promise<ConfusionJson> {
    return this.request<ConfusionJson>("/confusion");
  }
}
