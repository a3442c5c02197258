/**
 * Two-pane question view: template on the left (verbatim, monospace, with
 * the placeholder highlighted), answer textarea and submit on the right.
 * All state comes from gateway responses; nothing is computed client-side.
 */

import { ApiClient, ApiError } from "./api.js";
import { escapeHtml } from "./html.js";

export const PLACEHOLDER = "[???]";

export interface QuestionView {
  id: string;
  title: string;
  template_text: string;
  completed: boolean;
  last_feedback: string;
}

export interface Notice {
  kind: "info" | "error" | "retry";
  message: string;
}

function highlightPlaceholder(template: string): string {
  return escapeHtml(template).replace(
    escapeHtml(PLACEHOLDER),
    `<mark class="placeholder">${escapeHtml(PLACEHOLDER)}</mark>`,
  );
}

export function renderQuestion(view: QuestionView, notice: Notice | null = null): string {
  const tick = view.completed ? `<span class="tick" title="completed">&#10003;</span>` : "";
  const banner = notice
    ? `<div class="banner banner-${notice.kind}">${escapeHtml(notice.message)}` +
      (notice.kind === "retry" ? ` <button class="retry">Retry</button>` : "") +
      `</div>`
    : "";
  const feedback = view.last_feedback
    ? `<pre class="feedback">${escapeHtml(view.last_feedback)}</pre>`
    : "";
  return `
<section class="question" data-question-id="${escapeHtml(view.id)}">
  <h2>${escapeHtml(view.title)} ${tick}</h2>
  ${banner}
  <div class="panes">
    <pre class="template mono">${highlightPlaceholder(view.template_text)}</pre>
    <div class="answer-pane">
      <textarea class="answer mono" rows="10" spellcheck="false"></textarea>
      <button class="submit">Submit</button>
      ${feedback}
    </div>
  </div>
</section>`;
}

export class QuestionController {
  private inFlight = false;

  constructor(
    private readonly client: ApiClient,
    readonly view: QuestionView,
    private readonly onChange: (view: QuestionView, notice: Notice | null) => void,
  ) {}

  get busy(): boolean {
    return this.inFlight;
  }

  /** Submit the current answer; empty answers are allowed (server decides). */
  async submit(answer: string): Promise<void> {
    if (this.inFlight) {
      this.onChange(this.view, { kind: "info", message: "attempt in progress" });
      return;
    }
    this.inFlight = true;
    try {
      const result = await this.client.submitAttempt(this.view.id, answer);
      // Completion is sticky: a later failing attempt never clears the tick.
      this.view.completed = this.view.completed || result.completed;
      this.view.last_feedback = result.feedback;
      this.onChange(this.view, null);
    } catch (err) {
      if (err instanceof ApiError) {
        const message = err.status === 429 ? "attempt in progress" : err.message;
        this.onChange(this.view, { kind: "info", message });
      } else {
        this.onChange(this.view, {
          kind: "retry",
          message: "network problem; your attempt was not judged",
        });
      }
    } finally {
      this.inFlight = false;
    }
  }
}
