/**
 * Pattern studio: author candidate pattern specs, run server-side global
 * relevance evaluations (polled jobs), read per-head GR bars with
 * significance stars, and export head->pattern assignments as an injection
 * config the trainer consumes unmodified. Export stays disabled until the
 * evaluated pattern is kept (at least one head rejects the null).
 */

import type { Assignment, PatternSpec, RelevanceReport } from './api';
import { api, pollJob } from './api';
import { clear, el, fmt } from './dom';

export interface StudioState {
  registered: PatternSpec[];
  lastReport: RelevanceReport | null;
  draftAssignments: Assignment[];
  busy: boolean;
}

export interface StudioHandlers {
  onError(message: string): void;
  onExported(path: string): void;
  rerender(): void;
}

export function patternKept(report: RelevanceReport): boolean {
  return report.heads.some((h) => h.reject);
}

export function renderStudio(
  container: HTMLElement,
  state: StudioState,
  handlers: StudioHandlers,
): void {
  clear(container);
  container.append(renderForm(state, handlers));
  container.append(renderRegistered(state, handlers));
  if (state.lastReport) {
    container.append(renderReport(state.lastReport, state, handlers));
  }
  container.append(renderExport(state, handlers));
}

function renderForm(state: StudioState, handlers: StudioHandlers): HTMLElement {
  const name = el('input', { type: 'text', placeholder: 'name', class: 'pattern-name' });
  const kind = el('select', { class: 'pattern-kind' });
  for (const value of ['matching_token', 'intra_sentence', 'relative_position']) {
    kind.append(el('option', { value }, [value]));
  }
  const offset = el('input', {
    type: 'number',
    class: 'pattern-offset',
    placeholder: 'offset',
    disabled: true,
  });
  kind.addEventListener('change', () => {
    if (kind.value === 'relative_position') offset.removeAttribute('disabled');
    else offset.setAttribute('disabled', '');
  });
  const button = el('button', { class: 'register' }, ['register']);
  button.addEventListener('click', async () => {
    const spec: PatternSpec = { name: name.value, kind: kind.value as PatternSpec['kind'] };
    if (kind.value === 'relative_position') spec.offset = Number(offset.value);
    try {
      await api.registerPattern(spec);
      state.registered = (await api.patterns()).patterns;
      handlers.rerender();
    } catch (err) {
      handlers.onError(String(err));
    }
  });
  return el('div', { class: 'pattern-form' }, [name, kind, offset, button]);
}

function renderRegistered(state: StudioState, handlers: StudioHandlers): HTMLElement {
  const list = el('ul', { class: 'registered' });
  for (const spec of state.registered) {
    const label = spec.offset !== undefined
      ? `${spec.name} (${spec.kind} ${spec.offset >= 0 ? '+' : ''}${spec.offset})`
      : `${spec.name} (${spec.kind})`;
    const evaluate = el('button', { class: 'evaluate', disabled: state.busy }, ['evaluate']);
    evaluate.addEventListener('click', async () => {
      state.busy = true;
      handlers.rerender();
      try {
        const { job } = await api.evaluatePattern(spec.name);
        const done = await pollJob(job);
        if (done.status === 'error') throw new Error(done.error);
        state.lastReport = done.result ?? null;
      } catch (err) {
        handlers.onError(String(err));
      } finally {
        state.busy = false;
        handlers.rerender();
      }
    });
    list.append(el('li', { 'data-pattern': spec.name }, [label, ' ', evaluate]));
  }
  return list;
}

function renderReport(
  report: RelevanceReport,
  state: StudioState,
  handlers: StudioHandlers,
): HTMLElement {
  const panel = el('div', { class: 'relevance-report' });
  panel.append(
    el('div', { class: 'relevance-header' }, [
      `GR of ${report.pattern.name}; population mean `,
      el('span', { class: 'population-mean' }, [fmt(report.population_mean, 4)]),
    ]),
  );
  const maxGr = Math.max(...report.heads.map((h) => h.gr), 1e-12);
  for (const head of report.heads) {
    const bar = el('div', {
      class: 'gr-bar',
      style: `width:${((head.gr / maxGr) * 100).toFixed(1)}%`,
      'data-gr': String(head.gr),
    });
    const star = head.reject ? el('span', { class: 'significant' }, ['★']) : '';
    const assign = el('button', { class: 'assign' }, ['assign']);
    assign.addEventListener('click', () => {
      state.draftAssignments.push({
        head: head.head,
        layer: null,
        pattern: report.pattern,
      });
      handlers.rerender();
    });
    panel.append(
      el(
        'div',
        {
          class: `gr-row${head.reject ? ' rejecting' : ''}`,
          'data-layer': head.layer,
          'data-head': head.head,
          'data-family': head.family,
        },
        [
          el('span', { class: 'head-label' }, [`${head.family}:${head.layer}:${head.head} `]),
          bar,
          el('span', { class: 'gr-value' }, [fmt(head.gr, 4)]),
          el('span', { class: 'p-value', title: `t=${head.t} df=${head.df}` }, [
            ` p=${fmt(head.p, 4)} `,
          ]),
          star,
          ' ',
          assign,
        ],
      ),
    );
  }
  return panel;
}

function renderExport(state: StudioState, handlers: StudioHandlers): HTMLElement {
  const box = el('div', { class: 'export-box' });
  const drafts = el('ul', { class: 'draft-assignments' });
  state.draftAssignments.forEach((assignment, index) => {
    const remove = el('button', { class: 'remove' }, ['x']);
    remove.addEventListener('click', () => {
      state.draftAssignments.splice(index, 1);
      handlers.rerender();
    });
    drafts.append(
      el('li', {}, [
        `head ${assignment.head} (all layers) ← ${assignment.pattern.name} `,
        remove,
      ]),
    );
  });
  box.append(drafts);

  const kept = state.lastReport !== null && patternKept(state.lastReport);
  const exportable = state.draftAssignments.length > 0;
  const button = el(
    'button',
    { class: 'export', disabled: !(kept && exportable) },
    ['export injection config'],
  );
  button.addEventListener('click', async () => {
    try {
      const result = await api.exportInjection(state.draftAssignments);
      handlers.onExported(result.written);
    } catch (err) {
      handlers.onError(String(err));
    }
  });
  box.append(button);
  if (state.lastReport && !kept) {
    box.append(el('div', { class: 'export-note' }, ['pattern not kept']));
  }
  return box;
}
