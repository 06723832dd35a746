/** Shared fetch mock + payload fixtures mirroring the service schema. */

import { vi } from 'vitest';
import type {
  AttentionPayload,
  DocDetail,
  ImportanceReport,
  RelevanceReport,
} from '../src/api';

export interface FetchLog {
  calls: { url: string; init?: RequestInit }[];
}

type Responder = (url: string, init?: RequestInit) => unknown;

export function installFetch(routes: Record<string, unknown | Responder>): FetchLog {
  const log: FetchLog = { calls: [] };
  vi.stubGlobal('fetch', async (url: string, init?: RequestInit) => {
    log.calls.push({ url, init });
    const path = url.split('?')[0];
    for (const [route, value] of Object.entries(routes)) {
      if (path === route || url === route) {
        const body = typeof value === 'function' ? (value as Responder)(url, init) : value;
        if (body instanceof Error) {
          return new Response(JSON.stringify({ error: body.message }), { status: 400 });
        }
        return new Response(JSON.stringify(body), { status: 200 });
      }
    }
    return new Response(JSON.stringify({ error: `no route for ${url}` }), { status: 404 });
  });
  return log;
}

export function importanceFixture(): ImportanceReport {
  // 2 layers x (2 encoder + 2 pal) heads, already globally min-max normalized
  const heads = [];
  const raws = [
    [0.4, 0.1, 0.0, 0.05],
    [0.2, 0.9, 0.02, 0.3],
  ];
  for (let layer = 0; layer < 2; layer++) {
    for (let head = 0; head < 2; head++) {
      heads.push({ layer, head, family: 'encoder', raw: raws[layer][head],
                   normalized: raws[layer][head] / 0.9 });
      heads.push({ layer, head, family: 'pal', raw: raws[layer][head + 2],
                   normalized: raws[layer][head + 2] / 0.9 });
    }
  }
  heads.find((h) => h.raw === 0.9)!.normalized = 1;
  return { method: 'taylor', dataset: 'val', baseline_loss: 1.23, heads };
}

/** Document "a b a" with markers: tokens [<s> a b a </s>]. */
export function docFixture(): DocDetail {
  return {
    id: 'doc-0',
    split: 'val',
    tokens: ['<s>', 'a', 'b', 'a', '</s>'],
    spans: [[0, 5]],
    sentences: [['a', 'b', 'a']],
    gold_summary: [['a', 'b']],
    oracle_labels: [1],
  };
}

export function attentionFixture(): AttentionPayload {
  const matrix = [
    [0.2, 0.2, 0.2, 0.2, 0.2],
    [0.1, 0.4, 0.1, 0.3, 0.1],
    [0.25, 0.25, 0.25, 0.125, 0.125],
    [0.05, 0.45, 0.05, 0.4, 0.05],
    [0.2, 0.1, 0.3, 0.2, 0.2],
  ];
  return {
    doc: 'doc-0', layer: 0, head: 1, family: 'encoder',
    tokens: ['<s>', 'a', 'b', 'a', '</s>'],
    matrix,
  };
}

export function relevanceFixture(withReject: boolean): RelevanceReport {
  const heads = [0, 1, 2, 3].map((head) => ({
    layer: 0,
    head,
    family: 'encoder',
    gr: [0.61, 0.22, 0.18, 0.2][head],
    samples: [0.6, 0.62],
    t: head === 0 ? 12.5 : -1.0,
    df: 1,
    p: head === 0 ? (withReject ? 0.002 : 0.5) : 0.8,
    reject: head === 0 ? withReject : false,
  }));
  return {
    pattern: { name: 'match', kind: 'matching_token' },
    population_mean: 0.3025,
    significance: 0.01,
    heads,
  };
}
