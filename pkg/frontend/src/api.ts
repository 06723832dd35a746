/**
 * Typed client for the workbench HTTP API. All analysis numbers rendered by
 * the UI come from these payloads; the client computes no statistics itself.
 */

export interface HeadRef {
  layer: number;
  head: number;
  family: string;
}

export interface Info {
  checkpoint: string;
  model: {
    n_layers: number;
    n_heads: number;
    d_model: number;
    [key: string]: number;
  };
  pal: { n_pal_heads: number } | null;
  heads: HeadRef[];
  splits: Record<string, number>;
  split: string;
  significance: number;
}

export interface DocSummary {
  id: string;
  n_sentences: number;
  n_tokens: number;
}

export interface DocDetail {
  id: string;
  split: string;
  tokens: string[];
  spans: [number, number][];
  sentences: string[][];
  gold_summary: string[][];
  oracle_labels: number[] | null;
}

export interface ImportanceHead extends HeadRef {
  raw: number;
  normalized: number;
}

export interface ImportanceReport {
  method: string;
  dataset: string;
  baseline_loss: number;
  heads: ImportanceHead[];
}

export interface AttentionPayload {
  doc: string;
  layer: number;
  head: number;
  family: string;
  tokens: string[];
  matrix: number[][];
}

export interface PatternSpec {
  name: string;
  kind: 'matching_token' | 'intra_sentence' | 'relative_position';
  offset?: number;
}

export interface RelevanceHead extends HeadRef {
  gr: number;
  samples: number[];
  t: number | string;
  df: number;
  p: number;
  reject: boolean;
}

export interface RelevanceReport {
  pattern: PatternSpec;
  population_mean: number;
  significance: number;
  heads: RelevanceHead[];
}

export interface JobStatus {
  id: string;
  status: 'running' | 'done' | 'error';
  pattern: string;
  split: string;
  result?: RelevanceReport;
  error?: string;
}

export interface Assignment {
  head: number;
  layer: number | null;
  pattern: PatternSpec;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, init);
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      detail = body.error ?? JSON.stringify(body);
    } catch {
      /* not JSON */
    }
    throw new ApiError(response.status, detail);
  }
  return response.json() as Promise<T>;
}

export const api = {
  info: () => request<Info>('/api/info'),
  docs: (split: string) =>
    request<{ split: string; docs: DocSummary[] }>(
      `/api/docs?split=${encodeURIComponent(split)}`,
    ),
  doc: (id: string) => request<DocDetail>(`/api/doc/${encodeURIComponent(id)}`),
  importance: (method: string) =>
    request<ImportanceReport>(`/api/importance?method=${encodeURIComponent(method)}`),
  attention: (doc: string, head: HeadRef) =>
    request<AttentionPayload>(
      `/api/attention?doc=${encodeURIComponent(doc)}&layer=${head.layer}` +
        `&head=${head.head}&family=${encodeURIComponent(head.family)}`,
    ),
  patterns: () => request<{ patterns: PatternSpec[] }>('/api/patterns'),
  registerPattern: (spec: PatternSpec) =>
    request<{ registered: PatternSpec }>('/api/patterns', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(spec),
    }),
  evaluatePattern: (name: string, split?: string) =>
    request<{ job: string }>(`/api/patterns/${encodeURIComponent(name)}/evaluate`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(split ? { split } : {}),
    }),
  job: (id: string) => request<JobStatus>(`/api/jobs/${encodeURIComponent(id)}`),
  exportInjection: (assignments: Assignment[]) =>
    request<{ written: string; assignments: Assignment[] }>('/api/injection-config', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ assignments }),
    }),
  runs: () => request<{ runs: { id: string }[] }>('/api/runs'),
};

/** Poll a job until it leaves the running state. */
export async function pollJob(
  jobId: string,
  intervalMs = 300,
  timeoutMs = 120_000,
): Promise<JobStatus> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const job = await api.job(jobId);
    if (job.status !== 'running') return job;
    if (Date.now() > deadline) throw new ApiError(408, 'evaluation timed out');
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
}
