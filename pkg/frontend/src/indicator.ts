/**
 * Client-side pattern indicators, used only to tint attention cells so the
 * expert can eyeball pattern fit before running a server-side evaluation.
 * Mirrors the service's definitions: matching-token counts non-marker tokens
 * only (markers are <pad>/<s>/</s>), intra-sentence includes the markers of
 * the shared sentence span, relative position is offset on raw positions.
 */

import type { DocDetail, PatternSpec } from './api';

const MARKERS = new Set(['<pad>', '<s>', '</s>']);

export function isMarker(token: string): boolean {
  return MARKERS.has(token);
}

export type Indicator = (i: number, j: number) => boolean;

export function patternIndicator(spec: PatternSpec, doc: DocDetail): Indicator {
  if (spec.kind === 'matching_token') {
    const freq = new Map<string, number>();
    for (const token of doc.tokens) {
      if (!isMarker(token)) freq.set(token, (freq.get(token) ?? 0) + 1);
    }
    return (i, j) => {
      const a = doc.tokens[i];
      const b = doc.tokens[j];
      if (isMarker(a) || isMarker(b)) return false;
      return a === b && (freq.get(a) ?? 0) > 1;
    };
  }
  if (spec.kind === 'intra_sentence') {
    const sentenceOf = new Array<number>(doc.tokens.length).fill(-1);
    doc.spans.forEach(([start, end], s) => {
      for (let k = start; k < end; k++) sentenceOf[k] = s;
    });
    return (i, j) => sentenceOf[i] >= 0 && sentenceOf[i] === sentenceOf[j];
  }
  const offset = spec.offset ?? 0;
  return (i, j) => j === i + offset;
}

/** Number of indicator hits in a window; handy for overlay legends. */
export function countHits(
  indicator: Indicator,
  start: number,
  end: number,
): number {
  let hits = 0;
  for (let i = start; i < end; i++) {
    for (let j = start; j < end; j++) if (indicator(i, j)) hits++;
  }
  return hits;
}
