/**
 * Thin typed client for the engine's JSON endpoints.
 *
 * Server errors arrive as {code, message}; they surface here as ApiError so
 * views can render an inline banner without losing their state.
 */

export interface PageHit {
  item_id: string;
  hamming_distance: number;
  matched_subcodes: number;
  cosine_score: number | null;
  product_id: string;
  title: string;
}

export interface ResultPage {
  hits: PageHit[];
}

export interface SimulationReport {
  sample_size: number;
  hit_count: number;
  selectivity: number;
  top_hits: { item_id: string; score: number; title: string }[];
  elapsed_ms: number;
}

export interface RuleDoc {
  rule_id: string;
  name: string;
  tau: number | null;
  sigma: number | null;
  combine: string;
  status: 'draft' | 'finalized';
}

export interface FlaggedItem {
  item_id: string;
  rule_id: string;
  best_seed_id: string;
  score: number;
  predicate_matched: boolean;
}

export interface SweepStatus {
  scanned: number;
  flagged: FlaggedItem[];
  malformed: number;
  fraction: number;
  done: boolean;
  error?: string;
}

export class ApiError extends Error {
  constructor(public code: string, message: string, public status: number) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = '',
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { 'content-type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const data = await res.json();
    if (!res.ok) {
      throw new ApiError(data.code ?? 'Unknown', data.message ?? res.statusText, res.status);
    }
    return data as T;
  }

  search(body: object): Promise<ResultPage> {
    return this.request('POST', '/search', body);
  }

  createRule(body: object): Promise<RuleDoc> {
    return this.request('POST', '/rules', body);
  }

  simulateRule(ruleId: string, limit = 20): Promise<SimulationReport> {
    return this.request('POST', `/rules/${ruleId}/simulate`, { limit });
  }

  finalizeRule(ruleId: string): Promise<RuleDoc> {
    return this.request('POST', `/rules/${ruleId}/finalize`);
  }

  startSweep(ruleIds: string[]): Promise<{ job_id: string }> {
    return this.request('POST', '/sweeps', { rule_ids: ruleIds });
  }

  getSweep(jobId: string): Promise<SweepStatus> {
    return this.request('GET', `/sweeps/${jobId}`);
  }
}
