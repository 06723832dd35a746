/**
 * Workbench shell: loads session info, wires the three views (heatmap,
 * attention inspector, pattern studio), and surfaces service errors in a
 * banner without leaving stale data on screen.
 */

import type { DocDetail, HeadRef, Info, PatternSpec } from './api';
import { api } from './api';
import { DEFAULT_WINDOW, renderAttention } from './attention';
import { clear, el } from './dom';
import { renderHeatmap } from './heatmap';
import { renderStudio, StudioState } from './patterns';

interface ViewState {
  info: Info | null;
  estimator: string;
  selectedDoc: string | null;
  selectedHead: HeadRef | null;
  overlay: PatternSpec | null;
  windowStart: number;
  studio: StudioState;
}

const state: ViewState = {
  info: null,
  estimator: 'taylor',
  selectedDoc: null,
  selectedHead: null,
  overlay: null,
  windowStart: 0,
  studio: { registered: [], lastReport: null, draftAssignments: [], busy: false },
};

function banner(message: string): void {
  const box = document.getElementById('banner')!;
  box.textContent = message;
  box.classList.toggle('hidden', message === '');
}

async function refreshHeatmap(): Promise<void> {
  const container = document.getElementById('heatmap')!;
  try {
    const report = await api.importance(state.estimator);
    banner('');
    renderHeatmap(container, report, {
      onSelectHead: (head) => {
        state.selectedHead = head;
        void refreshAttention();
      },
      onSwitchEstimator: (method) => {
        state.estimator = method;
        void refreshHeatmap();
      },
    });
    if (!state.selectedHead && report.heads.length) {
      const top = report.heads.reduce((a, b) => (b.normalized > a.normalized ? b : a));
      state.selectedHead = { layer: top.layer, head: top.head, family: top.family };
      void refreshAttention();
    }
  } catch (err) {
    clear(container);
    banner(`service error: ${String(err)}`);
  }
}

async function refreshAttention(): Promise<void> {
  const container = document.getElementById('attention')!;
  if (!state.selectedDoc || !state.selectedHead) return;
  try {
    const [payload, doc] = await Promise.all([
      api.attention(state.selectedDoc, state.selectedHead),
      api.doc(state.selectedDoc),
    ]);
    banner('');
    const view = {
      overlay: state.overlay,
      windowStart: state.windowStart,
      windowSize: DEFAULT_WINDOW,
    };
    renderAttention(container, payload, doc, view, () => {
      state.windowStart = view.windowStart;
      void refreshAttention();
    });
    renderOverlayPicker(doc);
  } catch (err) {
    clear(container);
    banner(`service error: ${String(err)}`);
  }
}

function renderOverlayPicker(_doc: DocDetail): void {
  const box = document.getElementById('overlay-picker')!;
  clear(box);
  const select = el('select', { class: 'overlay-select' });
  select.append(el('option', { value: '' }, ['no overlay']));
  for (const spec of state.studio.registered) {
    select.append(el('option', { value: spec.name }, [spec.name]));
  }
  if (state.overlay) select.value = state.overlay.name;
  select.addEventListener('change', () => {
    state.overlay =
      state.studio.registered.find((p) => p.name === select.value) ?? null;
    void refreshAttention();
  });
  box.append(el('label', {}, ['pattern overlay ', select]));
}

async function refreshDocPicker(): Promise<void> {
  const box = document.getElementById('doc-picker')!;
  if (!state.info) return;
  const { docs } = await api.docs(state.info.split);
  clear(box);
  const select = el('select', { class: 'doc-select' });
  for (const doc of docs) {
    select.append(el('option', { value: doc.id }, [`${doc.id} (${doc.n_sentences} sents)`]));
  }
  if (state.selectedDoc) select.value = state.selectedDoc;
  select.addEventListener('change', () => {
    state.selectedDoc = select.value;
    void refreshAttention();
  });
  box.append(el('label', {}, ['document ', select]));
  if (!state.selectedDoc && docs.length) {
    state.selectedDoc = docs[0].id;
  }
}

function refreshStudio(): void {
  const container = document.getElementById('studio')!;
  renderStudio(container, state.studio, {
    onError: (message) => banner(message),
    onExported: (path) => banner(`injection config written: ${path}`),
    rerender: refreshStudio,
  });
}

export async function boot(): Promise<void> {
  try {
    state.info = await api.info();
    state.studio.registered = (await api.patterns()).patterns;
    banner('');
  } catch (err) {
    banner(`service unreachable: ${String(err)}`);
    return;
  }
  const header = document.getElementById('session')!;
  header.textContent =
    `${state.info.checkpoint} | ${state.info.model.n_layers} layers x ` +
    `${state.info.model.n_heads} heads | split ${state.info.split}`;
  await refreshDocPicker();
  await refreshHeatmap();
  await refreshAttention();
  refreshStudio();
}

if (typeof document !== 'undefined' && document.getElementById('heatmap')) {
  void boot();
}
