/**
 * Instructor view: lecture picks first, then the per-question completion
 * grid. Picked rows are flagged straight from the server's picks list;
 * fractions display as whole percents.
 */

import { ApiClient, Overview } from "./api.js";
import { escapeHtml } from "./html.js";

export interface OverviewRow {
  question: string;
  completed_count: number;
  fraction: number;
  picked: boolean;
}

export type SortDirection = "asc" | "desc";

export function buildGrid(overview: Overview): OverviewRow[] {
  const picked = new Set(overview.picks);
  return overview.questions.map((q) => ({
    question: q.id,
    completed_count: q.completed_count,
    fraction: q.fraction,
    picked: picked.has(q.id),
  }));
}

export function sortRows(rows: OverviewRow[], direction: SortDirection): OverviewRow[] {
  const sorted = [...rows];
  sorted.sort((a, b) =>
    direction === "asc" ? a.fraction - b.fraction : b.fraction - a.fraction,
  );
  return sorted;
}

export function percent(fraction: number): string {
  return `${Math.round(fraction * 100)}%`;
}

export function renderOverview(
  overview: Overview,
  direction: SortDirection = "asc",
): string {
  const rows = sortRows(buildGrid(overview), direction);
  const picksList = overview.picks.length
    ? `<ol class="picks">${overview.picks
        .map((id) => `<li>${escapeHtml(id)}</li>`)
        .join("")}</ol>`
    : `<p class="picks-empty">No questions in the discussion band.</p>`;
  const body = rows
    .map(
      (row) => `
    <tr class="${row.picked ? "picked" : ""}" data-question-id="${escapeHtml(row.question)}">
      <td>${escapeHtml(row.question)}</td>
      <td>${row.completed_count}</td>
      <td>${percent(row.fraction)}</td>
    </tr>`,
    )
    .join("");
  return `
<section class="overview">
  <h2>Progress overview (${overview.cohort_size} students)</h2>
  <h3>Suggested for next lecture</h3>
  ${picksList}
  <table class="grid">
    <thead>
      <tr><th>Question</th><th>Completed</th><th><button class="sort">Fraction</button></th></tr>
    </thead>
    <tbody>${body}</tbody>
  </table>
</section>`;
}

type Scheduler = (callback: () => void, ms: number) => unknown;
type Canceller = (handle: unknown) => void;

/** Refresh the overview on a fixed cadence (30s by default, no push). */
export class OverviewPoller {
  private handle: unknown = null;
  private stopped = false;

  constructor(
    private readonly client: ApiClient,
    private readonly onData: (overview: Overview) => void,
    private readonly onError: (err: unknown) => void,
    private readonly intervalMs = 30_000,
    private readonly schedule: Scheduler = (cb, ms) => setTimeout(cb, ms),
    private readonly cancel: Canceller = (h) => clearTimeout(h as number),
  ) {}

  async start(): Promise<void> {
    this.stopped = false;
    await this.tick();
  }

  stop(): void {
    this.stopped = true;
    if (this.handle !== null) {
      this.cancel(this.handle);
      this.handle = null;
    }
  }

  private async tick(): Promise<void> {
    try {
      this.onData(await this.client.getOverview());
    } catch (err) {
      this.onError(err);
    }
    if (!this.stopped) {
      this.handle = this.schedule(() => void this.tick(), this.intervalMs);
    }
  }
}
