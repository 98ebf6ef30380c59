/**
 * Typed client for the content service HTTP API.
 *
 * Every method wraps one endpoint and returns the parsed JSON payload.
 * Failures arrive as the service's {status, code, message} envelope and
 * are rethrown as ApiError so callers can branch on `code`. The fetch
 * function is injected, which keeps every view testable against an
 * in-memory stand-in.
 */

export interface DifficultySummary {
  label: string;
  probs: number[];
}

export interface ReadabilitySummary {
  gfi: number;
  ari: number;
  fkgl: number;
}

export interface ItemSummary {
  id: string;
  kind: string;
  title: string;
  url: string;
  language: string;
  description: string;
  published_at: string | null;
  topics: string[];
  difficulty: DifficultySummary | null;
  readability: ReadabilitySummary | null;
  score?: number;
}

export interface Cue {
  start: number;
  end: number;
  text: string;
}

export interface TopicAssignmentDto {
  topic: string;
  confidence: number;
  origin: string;
  accepted: boolean;
}

export interface ItemDetail {
  id: string;
  kind: string;
  url: string;
  title: string;
  language: string;
  source_id: string;
  description: string;
  body: string;
  published_at: string | null;
  topics: TopicAssignmentDto[];
  difficulty: DifficultySummary | null;
  readability: ReadabilitySummary | null;
  cues: Cue[];
}

export interface SearchResponse {
  items: ItemSummary[];
}

export interface FeedResponse {
  items: ItemSummary[];
  level_estimate: number;
}

export interface InterestsResponse {
  interests: string[];
  non_interests: string[];
  level_estimate: number;
}

export interface FeedbackResponse {
  level_estimate: number;
}

export interface TranslateResponse {
  translation: string;
  pronunciation_url: string | null;
}

export interface SearchParams {
  q?: string;
  topics?: string;
  min_level?: string;
  max_level?: string;
  kind?: string;
  limit?: number;
}

export type Verdict = "too_easy" | "ok" | "too_hard";

/** The slice of a fetch Response the client actually touches. */
export interface ResponseLike {
  ok: boolean;
  status: number;
  headers: { get(name: string): string | null };
  json(): Promise<unknown>;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<ResponseLike>;

interface ErrorEnvelope {
  status?: number;
  code?: string;
  message?: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(
    private fetchFn: FetchLike,
    private base = "",
    private token = "",
  ) {}

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const headers: Record<string, string> = {};
    if (init.body !== undefined) {
      headers["Content-Type"] = "application/json";
    }
    if (this.token) {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    const response = await this.fetchFn(this.base + path, { ...init, headers });
    if (response.status === 204) {
      return undefined as T;
    }
    const payload = await response.json();
    if (!response.ok) {
      const envelope = payload as ErrorEnvelope;
      throw new ApiError(
        response.status,
        envelope.code ?? "unknown",
        envelope.message ?? `request failed (${response.status})`,
      );
    }
    return payload as T;
  }

  search(params: SearchParams = {}): Promise<SearchResponse> {
    const query = new URLSearchParams();
    if (params.q) query.set("q", params.q);
    if (params.topics) query.set("topics", params.topics);
    if (params.min_level) query.set("min_level", params.min_level);
    if (params.max_level) query.set("max_level", params.max_level);
    if (params.kind) query.set("kind", params.kind);
    if (params.limit !== undefined) query.set("limit", String(params.limit));
    const qs = query.toString();
    return this.request<SearchResponse>(`/api/search${qs ? `?${qs}` : ""}`);
  }

  feed(userId: string, limit?: number): Promise<FeedResponse> {
    const qs = limit !== undefined ? `?limit=${limit}` : "";
    return this.request<FeedResponse>(`/api/users/${encodeURIComponent(userId)}/feed${qs}`);
  }

  interests(userId: string): Promise<InterestsResponse> {
    return this.request<InterestsResponse>(`/api/users/${encodeURIComponent(userId)}/interests`);
  }

  putInterests(userId: string, interests: string[], nonInterests: string[]): Promise<void> {
    return this.request<void>(`/api/users/${encodeURIComponent(userId)}/interests`, {
      method: "PUT",
      body: JSON.stringify({ interests, non_interests: nonInterests }),
    });
  }

  sendFeedback(userId: string, itemId: string, verdict: Verdict): Promise<FeedbackResponse> {
    return this.request<FeedbackResponse>(`/api/users/${encodeURIComponent(userId)}/feedback`, {
      method: "POST",
      body: JSON.stringify({ item_id: itemId, verdict }),
    });
  }

  item(itemId: string): Promise<ItemDetail> {
    return this.request<ItemDetail>(`/api/items/${encodeURIComponent(itemId)}`);
  }

  translate(text: string, sourceLang = "fr", targetLang = "en"): Promise<TranslateResponse> {
    return this.request<TranslateResponse>("/api/translate", {
      method: "POST",
      body: JSON.stringify({ text, source_lang: sourceLang, target_lang: targetLang }),
    });
  }
}
