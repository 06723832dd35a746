/**
 * Attention-matrix inspector: an n x n grid with token strips, an exact
 * hover readout (alpha to 4 decimals), per-row sum readouts, and optional
 * pattern overlays that tint cells where the selected pattern's indicator
 * holds. Matrices above the window size are windowed (never downsampled)
 * behind a range selector, preserving exact values.
 */

import type { AttentionPayload, DocDetail, PatternSpec } from './api';
import { clear, el, fmt } from './dom';
import { patternIndicator } from './indicator';

export const DEFAULT_WINDOW = 256;

export interface AttentionViewState {
  overlay: PatternSpec | null;
  windowStart: number;
  windowSize: number;
}

export function rowSums(matrix: number[][]): number[] {
  return matrix.map((row) => row.reduce((acc, value) => acc + value, 0));
}

export function renderAttention(
  container: HTMLElement,
  payload: AttentionPayload,
  doc: DocDetail,
  state: AttentionViewState,
  rerender: () => void,
): void {
  clear(container);
  const n = payload.tokens.length;
  const windowed = n > state.windowSize;
  const start = windowed ? Math.min(state.windowStart, n - state.windowSize) : 0;
  const end = windowed ? start + state.windowSize : n;

  const title = el('div', { class: 'attention-title' }, [
    `${payload.family}:${payload.layer}:${payload.head} on ${payload.doc}`,
  ]);
  container.append(title);

  if (windowed) {
    const input = el('input', {
      type: 'number',
      min: 0,
      max: n - state.windowSize,
      value: start,
      class: 'window-start',
    });
    input.addEventListener('change', () => {
      state.windowStart = Math.max(0, Math.min(n - state.windowSize, Number(input.value)));
      rerender();
    });
    container.append(
      el('div', { class: 'window-bar' }, [
        `showing ${start}..${end - 1} of ${n} `,
        input,
      ]),
    );
  }

  const readout = el('div', { class: 'readout' }, ['hover a cell']);
  container.append(readout);

  const indicator = state.overlay ? patternIndicator(state.overlay, doc) : null;
  const sums = rowSums(payload.matrix);

  const table = el('table', { class: 'attention' });
  const header = el('tr', {}, [el('th', {}, [''])]);
  for (let j = start; j < end; j++) {
    header.append(el('th', { class: 'token-col' }, [payload.tokens[j]]));
  }
  header.append(el('th', {}, ['row sum']));
  table.append(header);

  for (let i = start; i < end; i++) {
    const row = el('tr', {}, [el('th', { class: 'token-row' }, [payload.tokens[i]])]);
    for (let j = start; j < end; j++) {
      const alpha = payload.matrix[i][j];
      const tinted = indicator ? indicator(i, j) : false;
      const cell = el('td', {
        class: `alpha-cell${tinted ? ' on-pattern' : ''}`,
        'data-i': i,
        'data-j': j,
        'data-alpha': String(alpha),
        style: `background: rgba(214, 39, 40, ${Math.min(1, alpha).toFixed(3)})`,
      });
      cell.addEventListener('mouseenter', () => {
        readout.textContent =
          `${payload.tokens[i]} → ${payload.tokens[j]}  α=${fmt(alpha, 4)}`;
      });
      row.append(cell);
    }
    row.append(el('td', { class: 'row-sum', 'data-row': i }, [fmt(sums[i], 3)]));
    table.append(row);
  }
  container.append(table);

  if (indicator && state.overlay) {
    const hits = countTinted(table);
    container.append(
      el('div', { class: 'overlay-legend' }, [
        `overlay ${state.overlay.name}: ${hits} cells on-pattern in window`,
      ]),
    );
  }
}

function countTinted(table: HTMLTableElement): number {
  return table.querySelectorAll('td.on-pattern').length;
}
