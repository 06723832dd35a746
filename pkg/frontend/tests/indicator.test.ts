import { describe, expect, it } from 'vitest';

import { patternIndicator } from '../src/indicator';
import { docFixture } from './helpers';

function hits(indicator: (i: number, j: number) => boolean, n: number): string[] {
  const out: string[] = [];
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) if (indicator(i, j)) out.push(`${i},${j}`);
  }
  return out;
}

describe('client-side pattern indicators', () => {
  it('matching token fires only on repeated non-marker tokens', () => {
    const ind = patternIndicator({ name: 'm', kind: 'matching_token' }, docFixture());
    expect(hits(ind, 5).sort()).toEqual(['1,1', '1,3', '3,1', '3,3']);
  });

  it('intra-sentence covers whole spans including markers', () => {
    const doc = {
      ...docFixture(),
      tokens: ['<s>', 'a', '</s>', '<s>', 'b', '</s>'],
      spans: [[0, 3], [3, 6]] as [number, number][],
    };
    const ind = patternIndicator({ name: 'i', kind: 'intra_sentence' }, doc);
    expect(hits(ind, 6).length).toBe(9 + 9);
    expect(ind(0, 2)).toBe(true);
    expect(ind(0, 3)).toBe(false);
  });

  it('relative position respects the offset and bounds', () => {
    const doc = docFixture();
    const next = patternIndicator(
      { name: 'p', kind: 'relative_position', offset: 1 }, doc);
    expect(hits(next, 5)).toEqual(['0,1', '1,2', '2,3', '3,4']);
    const prev = patternIndicator(
      { name: 'p', kind: 'relative_position', offset: -1 }, doc);
    expect(prev(0, 0)).toBe(false);
    expect(prev(1, 0)).toBe(true);
  });
});
