/**
 * Importance heatmap: one layer x head grid per estimator, colored by the
 * service's normalized scores. Encoder and PAL families share one color
 * scale (the normalization is global on the server) but render as visually
 * separated column groups. Clicking a cell opens the attention view.
 */

import type { HeadRef, ImportanceReport } from './api';
import { clear, el, fmt } from './dom';

export const ESTIMATORS = ['loo', 'sensitivity', 'taylor'] as const;

export interface HeatmapHandlers {
  onSelectHead(head: HeadRef): void;
  onSwitchEstimator(method: string): void;
}

/** Background for a normalized score in [0, 1]; 1 is fully saturated. */
export function heatColor(normalized: number): string {
  const alpha = Math.max(0, Math.min(1, normalized));
  return `rgba(31, 119, 180, ${alpha.toFixed(3)})`;
}

export function renderHeatmap(
  container: HTMLElement,
  report: ImportanceReport,
  handlers: HeatmapHandlers,
): void {
  clear(container);
  const layers = [...new Set(report.heads.map((h) => h.layer))].sort((a, b) => a - b);
  const families = [...new Set(report.heads.map((h) => h.family))].sort();

  const picker = el('select', { class: 'estimator-picker' });
  for (const method of ESTIMATORS) {
    picker.append(el('option', { value: method, selected: method === report.method }, [method]));
  }
  picker.addEventListener('change', () => handlers.onSwitchEstimator(picker.value));
  container.append(
    el('div', { class: 'heatmap-toolbar' }, [
      el('label', {}, ['estimator ', picker]),
      el('span', { class: 'dataset-tag' }, [` ${report.dataset}`]),
    ]),
  );

  const grid = el('table', { class: 'heatmap' });
  const header = el('tr', {}, [el('th', {}, ['layer'])]);
  for (const family of families) {
    const heads = report.heads.filter((h) => h.family === family && h.layer === layers[0]);
    heads.sort((a, b) => a.head - b.head);
    heads.forEach((h, idx) => {
      header.append(
        el('th', { class: idx === 0 && family !== families[0] ? 'family-start' : '' }, [
          `${family[0]}${h.head}`,
        ]),
      );
    });
  }
  grid.append(header);

  for (const layer of layers) {
    const row = el('tr', {}, [el('th', {}, [String(layer)])]);
    for (const family of families) {
      const heads = report.heads
        .filter((h) => h.family === family && h.layer === layer)
        .sort((a, b) => a.head - b.head);
      heads.forEach((h, idx) => {
        const saturated = h.normalized === 1 ? ' saturated' : '';
        const sep = idx === 0 && family !== families[0] ? ' family-start' : '';
        const cell = el(
          'td',
          {
            class: `cell${saturated}${sep}`,
            'data-layer': h.layer,
            'data-head': h.head,
            'data-family': h.family,
            'data-normalized': String(h.normalized),
            'data-raw': String(h.raw),
            title: `${family}:${h.layer}:${h.head} raw=${h.raw} normalized=${fmt(h.normalized)}`,
            style: `background:${heatColor(h.normalized)}`,
          },
          [fmt(h.normalized, 2)],
        );
        cell.addEventListener('click', () =>
          handlers.onSelectHead({ layer: h.layer, head: h.head, family: h.family }),
        );
        row.append(cell);
      });
    }
    grid.append(row);
  }
  container.append(grid);
}
