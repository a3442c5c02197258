/**
 * Browser entry point: token handling, hash routing, and DOM wiring around
 * the pure render/controller modules.
 *
 * Routes: #/questions (list), #/question/<id>, #/overview.
 */

import { ApiClient, ApiError, QuestionSummary } from "./api.js";
import { escapeHtml } from "./html.js";
import { OverviewPoller, renderOverview, SortDirection } from "./overview.js";
import { QuestionController, QuestionView, renderQuestion } from "./question.js";

const app = document.getElementById("app") as HTMLElement;
let poller: OverviewPoller | null = null;

function client(): ApiClient {
  const token = localStorage.getItem("verigrade-token") ?? "";
  return new ApiClient("", token);
}

function renderLogin(message: string): void {
  app.innerHTML = `
<section class="login">
  <p>${escapeHtml(message)}</p>
  <input id="token" type="password" placeholder="access token" />
  <button id="save-token">Sign in</button>
</section>`;
  document.getElementById("save-token")?.addEventListener("click", () => {
    const token = (document.getElementById("token") as HTMLInputElement).value;
    localStorage.setItem("verigrade-token", token.trim());
    void route();
  });
}

function renderQuestionList(questions: QuestionSummary[]): void {
  const items = questions
    .map(
      (q) => `
    <li>
      <a href="#/question/${encodeURIComponent(q.id)}">${escapeHtml(q.title)}</a>
      <span class="week">week ${q.week}</span>
      ${q.completed ? '<span class="tick">&#10003;</span>' : ""}
    </li>`,
    )
    .join("");
  app.innerHTML = `
<section class="question-list">
  <h2>Weekly questions</h2>
  <ul>${items}</ul>
  <p><a href="#/overview">Instructor overview</a></p>
</section>`;
}

async function showQuestion(id: string): Promise<void> {
  const api = client();
  const [detail, listing] = await Promise.all([
    api.getQuestion(id),
    api.listQuestions(),
  ]);
  const summary = listing.find((q) => q.id === id);
  const view: QuestionView = {
    id,
    title: detail.title,
    template_text: detail.template_text,
    completed: summary?.completed ?? false,
    last_feedback: "",
  };
  const controller = new QuestionController(api, view, (v, notice) => {
    const answer = (app.querySelector(".answer") as HTMLTextAreaElement)?.value ?? "";
    draw(v, notice, answer);
  });
  const draw = (v: QuestionView, notice = null as Parameters<typeof renderQuestion>[1], answer = "") => {
    app.innerHTML = renderQuestion(v, notice);
    const textarea = app.querySelector(".answer") as HTMLTextAreaElement;
    textarea.value = answer;
    app.querySelector(".submit")?.addEventListener("click", () => {
      void controller.submit(textarea.value);
    });
    app.querySelector(".retry")?.addEventListener("click", () => {
      void controller.submit(textarea.value);
    });
  };
  draw(view);
}

async function showOverview(): Promise<void> {
  let direction: SortDirection = "asc";
  poller = new OverviewPoller(
    client(),
    (overview) => {
      app.innerHTML = renderOverview(overview, direction);
      app.querySelector(".sort")?.addEventListener("click", () => {
        direction = direction === "asc" ? "desc" : "asc";
        app.innerHTML = renderOverview(overview, direction);
      });
    },
    (err) => {
      if (err instanceof ApiError && (err.status === 403 || err.status === 401)) {
        poller?.stop();
        renderLogin("Instructor access required; sign in with an instructor token.");
      }
    },
  );
  await poller.start();
}

async function route(): Promise<void> {
  poller?.stop();
  poller = null;
  const hash = window.location.hash || "#/questions";
  try {
    if (hash.startsWith("#/question/")) {
      await showQuestion(decodeURIComponent(hash.slice("#/question/".length)));
    } else if (hash === "#/overview") {
      await showOverview();
    } else {
      renderQuestionList(await client().listQuestions());
    }
  } catch (err) {
    if (err instanceof ApiError && (err.status === 401 || err.status === 403)) {
      renderLogin("Sign in with your access token.");
    } else {
      app.innerHTML = `<p class="banner banner-retry">Could not reach the server.
        <button onclick="location.reload()">Retry</button></p>`;
    }
  }
}

window.addEventListener("hashchange", () => void route());
void route();
