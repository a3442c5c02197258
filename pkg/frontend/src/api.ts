/**
 * Typed client for the question gateway. Every endpoint string lives here
 * and nowhere else; the rest of the UI never touches fetch directly.
 */

export interface QuestionSummary {
  id: string;
  title: string;
  week: number;
  completed: boolean;
}

export interface QuestionDetail {
  template_text: string;
  title: string;
}

export interface AttemptResponse {
  completed: boolean;
  feedback: string;
  verified_count: number;
  error_count: number;
}

export interface OverviewQuestion {
  id: string;
  completed_count: number;
  fraction: number;
}

export interface Overview {
  cohort_size: number;
  questions: OverviewQuestion[];
  picks: string[];
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = {
      method,
      headers: { Authorization: `Bearer ${this.token}` },
    };
    if (body !== undefined) {
      init.headers = { ...init.headers, "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      const message =
        typeof payload === "object" && payload !== null && "error" in payload
          ? String((payload as { error: unknown }).error)
          : `request failed with status ${response.status}`;
      throw new ApiError(response.status, message);
    }
    return payload as T;
  }

  listQuestions(): Promise<QuestionSummary[]> {
    return this.request("GET", "/questions");
  }

  getQuestion(id: string): Promise<QuestionDetail> {
    return this.request("GET", `/questions/${encodeURIComponent(id)}`);
  }

  submitAttempt(id: string, answer: string, testMode = false): Promise<AttemptResponse> {
    const body: Record<string, unknown> = { answer };
    if (testMode) {
      body.test_mode = true;
    }
    return this.request("POST", `/questions/${encodeURIComponent(id)}/attempts`, body);
  }

  getOverview(): Promise<Overview> {
    return this.request("GET", "/overview");
  }
}
