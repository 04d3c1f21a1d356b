/**
 * Typed client for the quandary service JSON API.
 *
 * The UI consumes only these endpoints; it never sees or caches the blinding
 * map, so annotation views are label-blind by construction.
 */

export interface QuandaryRecord {
  id: string;
  context: string[];
  question: string;
  source?: string;
}

export interface Candidate {
  id: string;
  text: string;
  provenance: "retrieved" | "generated" | "handcrafted" | "human";
  score: number;
}

export interface CandidatesResponse {
  quandary_id: string;
  scorer_id: string;
  polarity: "higher_better" | "lower_better";
  threshold: number;
  top_k: number;
  token: string;
  scorer_fallback: boolean;
  requested_scorer?: string;
  candidates: Candidate[];
  dropped: { id: string; reason: string }[];
}

export interface SelectionRecord {
  quandary_id: string;
  mode: "automatic" | "human";
  selected_by: string | null;
  principles: { id: string; text: string; provenance: string }[];
}

export interface AnswerSegment {
  index: number;
  principle_id: string;
  text: string;
}

export interface AnswerRecord {
  answer_id: string;
  quandary_id: string;
  concatenated: string;
  disclaimer_wrapped: string;
  segments: AnswerSegment[];
  selection: SelectionRecord;
}

export type Criterion = "multi_perspective" | "coherence" | "justification";
export type Choice = "A" | "B" | "Both" | "None";

export interface SessionCreated {
  session_id: string;
  kind: string;
  total: number;
}

export interface SessionSummary {
  session_id: string;
  kind: string;
  total: number;
  completed: number;
  done: boolean;
}

export interface SessionNext {
  done: boolean;
  completed?: number;
  position?: number;
  total?: number;
  pair_id?: string;
  quandary?: { context: string[]; question: string } | null;
  answers?: { A: string; B: string };
  questions?: Record<Criterion, string>;
  choices?: Choice[];
}

export type ChosenEntry = string | { text: string };

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(private baseUrl: string = "", private fetchFn: FetchLike = (...a) => fetch(...a)) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      const message = payload?.error?.message ?? `HTTP ${response.status}`;
      throw new ApiError(response.status, message);
    }
    return payload as T;
  }

  createQuandary(record: QuandaryRecord): Promise<{ id: string }> {
    return this.request("POST", "/quandaries", record);
  }

  getQuandary(id: string): Promise<QuandaryRecord> {
    return this.request("GET", `/quandaries/${encodeURIComponent(id)}`);
  }

  getCandidates(id: string, topK?: number): Promise<CandidatesResponse> {
    const query = topK === undefined ? "" : `?top_k=${topK}`;
    return this.request("GET", `/quandaries/${encodeURIComponent(id)}/candidates${query}`);
  }

  postSelection(id: string, token: string, chosen: ChosenEntry[], annotator: string): Promise<SelectionRecord> {
    return this.request("POST", `/quandaries/${encodeURIComponent(id)}/selection`, {
      token,
      chosen,
      annotator,
    });
  }

  postAnswer(id: string, seed: number, backend: string = "mock"): Promise<AnswerRecord> {
    return this.request("POST", `/quandaries/${encodeURIComponent(id)}/answer`, { backend, seed });
  }

  createSession(body: unknown): Promise<SessionCreated> {
    return this.request("POST", "/sessions", body);
  }

  sessionSummary(sessionId: string): Promise<SessionSummary> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}`);
  }

  sessionNext(sessionId: string): Promise<SessionNext> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/next`);
  }

  postVote(
    sessionId: string,
    pairId: string,
    annotator: string,
    choices: Partial<Record<Criterion, Choice>>,
  ): Promise<{ recorded: number; remaining: number; done: boolean }> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/votes`, {
      pair_id: pairId,
      annotator,
      choices,
    });
  }
}
