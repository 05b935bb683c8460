/**
 * Single-page client for live preference sessions.
 *
 * Screens: a start form (bounding box + labels) and the session screen
 * (current pair, three judgment buttons, best badge, history with a
 * sparkline of best-point changes).  The client never fabricates state:
 * everything rendered comes from a service response, and at most one
 * preference POST is in flight at a time.
 */

import { ApiError, NextPair, Order, ServiceClient, SessionHistory, SessionInfo } from './api.js';

const KEY_TO_ORDER: Record<string, Order> = { '1': 1, '2': 0, '3': -1 };

export function formatValue(v: number): string {
  // fixed significant digits for display only; raw values are submitted
  return Number(v.toPrecision(6)).toString();
}

interface DimensionRow {
  label: string;
  low: string;
  high: string;
}

export class App {
  private session: SessionInfo | null = null;
  private pair: NextPair | null = null;
  private history: SessionHistory | null = null;
  private best: number[] | null = null;
  private busy = false;
  private notice = '';
  private formError = '';
  private rows: DimensionRow[] = [
    { label: '', low: '', high: '' },
    { label: '', low: '', high: '' },
  ];

  constructor(private root: HTMLElement, private client: ServiceClient) {}

  mount(): void {
    this.root.addEventListener('keydown', (event) => this.onKey(event as KeyboardEvent));
    this.renderStart();
  }

  // ----------------------------------------------------------------- start

  private renderStart(): void {
    this.root.innerHTML = '';
    const form = el('div', 'start-form');
    form.appendChild(el('h1', '', 'New preference session'));
    form.appendChild(el('p', 'hint',
      'Define one row per parameter: a display label plus the search range.'));
    const table = el('table', 'box-table');
    const head = el('tr');
    for (const caption of ['label', 'low', 'high', '']) {
      head.appendChild(el('th', '', caption));
    }
    table.appendChild(head);
    this.rows.forEach((row, index) => {
      const tr = el('tr');
      tr.appendChild(tdInput(row.label, `label-${index}`, (v) => (row.label = v)));
      tr.appendChild(tdInput(row.low, `low-${index}`, (v) => (row.low = v)));
      tr.appendChild(tdInput(row.high, `high-${index}`, (v) => (row.high = v)));
      const remove = button('×', `remove-${index}`, () => {
        this.rows.splice(index, 1);
        this.renderStart();
      });
      remove.disabled = this.rows.length <= 1;
      tr.appendChild(wrap('td', remove));
      table.appendChild(tr);
    });
    form.appendChild(table);
    form.appendChild(button('Add parameter', 'add-dimension', () => {
      this.rows.push({ label: '', low: '', high: '' });
      this.renderStart();
    }));
    form.appendChild(button('Start session', 'start-session', () => {
      void this.startSession();
    }));
    if (this.formError) {
      form.appendChild(el('p', 'error', this.formError));
    }
    this.root.appendChild(form);
  }

  async startSession(): Promise<void> {
    const box: number[][] = [];
    for (const row of this.rows) {
      const low = Number(row.low);
      const high = Number(row.high);
      if (row.low.trim() === '' || row.high.trim() === ''
          || !Number.isFinite(low) || !Number.isFinite(high)) {
        this.formError = 'Every dimension needs numeric low and high bounds.';
        this.renderStart();
        return;
      }
      if (low > high) {
        this.formError = `Low bound ${row.low} exceeds high bound ${row.high}.`;
        this.renderStart();
        return;
      }
      box.push([low, high]);
    }
    const labels = this.rows.map((r, i) => r.label.trim() || `x${i + 1}`);
    this.formError = '';
    try {
      this.session = await this.client.createSession({ box, labels });
      window.history.replaceState(null, '', `#${this.session.id}`);
      await this.refresh();
    } catch (err) {
      this.formError = err instanceof ApiError ? err.detail : 'Could not reach the service.';
      this.renderStart();
    }
  }

  // --------------------------------------------------------------- session

  private async refresh(): Promise<void> {
    if (!this.session) return;
    this.pair = await this.client.nextPair(this.session.id);
    this.history = await this.client.history(this.session.id);
    this.best = this.history.best;
    this.renderSession();
  }

  async submitChoice(order: Order): Promise<void> {
    if (!this.session || !this.pair || this.busy) return;
    this.busy = true;
    this.renderSession();
    const [x1, x2] = this.pair.pair;
    try {
      const result = await this.client.postPreference(this.session.id, x1, x2, order);
      this.best = result.best;
      this.notice = '';
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.notice = 'This pair was already answered elsewhere; showing the current one.';
      } else if (err instanceof ApiError) {
        this.notice = err.detail;
      } else {
        this.notice = 'Network problem: the judgment was not recorded. Use Refresh to retry.';
        this.busy = false;
        this.renderSession();
        return;
      }
    }
    try {
      await this.refresh();
    } finally {
      this.busy = false;
    }
    this.renderSession();
  }

  private onKey(event: KeyboardEvent): void {
    const order = KEY_TO_ORDER[event.key];
    if (order !== undefined && this.session && !this.busy) {
      void this.submitChoice(order);
    }
  }

  private renderSession(): void {
    if (!this.session || !this.pair) return;
    this.root.innerHTML = '';
    const labels = this.history?.labels ?? this.session.labels;
    const screen = el('div', 'session');

    const header = el('div', 'header');
    header.appendChild(el('h1', '', 'Which configuration is better?'));
    const phase = el('span', 'phase-badge', this.pair.phase);
    phase.id = 'phase';
    header.appendChild(phase);
    const iteration = el('span', 'iteration', `comparison #${this.pair.iteration + 1}`);
    iteration.id = 'iteration';
    header.appendChild(iteration);
    screen.appendChild(header);

    const pairView = el('div', 'pair');
    pairView.appendChild(paramTable('A', labels, this.pair.pair[0]));
    pairView.appendChild(paramTable('B', labels, this.pair.pair[1]));
    screen.appendChild(pairView);

    const controls = el('div', 'controls');
    const choices: Array<[string, string, Order]> = [
      ['A is better (1)', 'choose-first', 1],
      ['Equivalent (2)', 'choose-equivalent', 0],
      ['B is better (3)', 'choose-second', -1],
    ];
    for (const [caption, id, order] of choices) {
      const btn = button(caption, id, () => {
        void this.submitChoice(order);
      });
      btn.disabled = this.busy;
      controls.appendChild(btn);
    }
    screen.appendChild(controls);

    if (this.notice) {
      const note = el('p', 'notice', this.notice);
      note.id = 'notice';
      const retry = button('Refresh', 'refresh-pair', () => {
        this.notice = '';
        void this.refresh();
      });
      note.appendChild(retry);
      screen.appendChild(note);
    }

    const bestBadge = el('div', 'best-badge');
    bestBadge.id = 'best';
    if (this.best) {
      bestBadge.textContent =
        `Current best: ${this.best.map(formatValue).join(', ')}`;
    } else {
      bestBadge.textContent = 'Current best: none yet';
    }
    screen.appendChild(bestBadge);

    screen.appendChild(this.renderHistory());
    this.root.appendChild(screen);
  }

  private renderHistory(): HTMLElement {
    const container = el('div', 'history');
    container.id = 'history';
    container.appendChild(el('h2', '', 'History'));
    const entries = this.history?.comparisons ?? [];
    container.appendChild(sparkline(this.history?.best_trace ?? []));
    const list = el('ol', 'history-list');
    const captions: Record<number, string> = { 1: 'A better', 0: 'equivalent', '-1': 'B better' };
    for (const entry of entries) {
      const text = `${entry.x1.map(formatValue).join(', ')} vs ` +
        `${entry.x2.map(formatValue).join(', ')} — ${captions[entry.order]}`;
      list.appendChild(el('li', '', text));
    }
    container.appendChild(list);
    return container;
  }
}

// ------------------------------------------------------------------ helpers

function el(tag: string, className = '', text = ''): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function wrap(tag: string, child: HTMLElement): HTMLElement {
  const node = document.createElement(tag);
  node.appendChild(child);
  return node;
}

function button(caption: string, id: string, onClick: () => void): HTMLButtonElement {
  const btn = document.createElement('button');
  btn.textContent = caption;
  btn.id = id;
  btn.addEventListener('click', onClick);
  return btn;
}

function tdInput(value: string, id: string, onChange: (v: string) => void): HTMLElement {
  const input = document.createElement('input');
  input.id = id;
  input.value = value;
  input.addEventListener('input', () => onChange(input.value));
  return wrap('td', input);
}

function paramTable(title: string, labels: string[], values: number[]): HTMLElement {
  const card = el('div', 'param-card');
  card.appendChild(el('h2', '', title));
  const table = el('table', 'param-table');
  values.forEach((value, index) => {
    const tr = el('tr');
    tr.appendChild(el('td', 'param-label', labels[index] ?? `x${index + 1}`));
    tr.appendChild(el('td', 'param-value', formatValue(value)));
    table.appendChild(tr);
  });
  card.appendChild(table);
  return card;
}

/** Sparkline of cumulative best-point changes over comparisons. */
function sparkline(bestTrace: number[][]): HTMLElement {
  const holder = el('div', 'sparkline');
  const changes: number[] = [0];
  for (let k = 1; k < bestTrace.length; k += 1) {
    const moved = JSON.stringify(bestTrace[k]) !== JSON.stringify(bestTrace[k - 1]);
    changes.push(changes[k - 1] + (moved ? 1 : 0));
  }
  const width = 160;
  const height = 36;
  const svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
  svg.setAttribute('width', String(width));
  svg.setAttribute('height', String(height));
  if (changes.length > 1) {
    const maxY = Math.max(...changes, 1);
    const points = changes
      .map((c, k) => {
        const x = (k / (changes.length - 1)) * (width - 4) + 2;
        const y = height - 2 - (c / maxY) * (height - 8);
        return `${x.toFixed(1)},${y.toFixed(1)}`;
      })
      .join(' ');
    const line = document.createElementNS('http://www.w3.org/2000/svg', 'polyline');
    line.setAttribute('points', points);
    line.setAttribute('fill', 'none');
    line.setAttribute('stroke', '#3366aa');
    svg.appendChild(line);
  }
  holder.appendChild(svg);
  return holder;
}
