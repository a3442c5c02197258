import { describe, expect, it } from "vitest";

import type { ApiClient, Overview } from "../src/api.js";
import { ApiError } from "../src/api.js";
import {
  OverviewPoller,
  buildGrid,
  percent,
  renderOverview,
  sortRows,
} from "../src/overview.js";

const FIXTURE: Overview = {
  cohort_size: 100,
  questions: [
    { id: "a", completed_count: 15, fraction: 0.15 },
    { id: "b", completed_count: 95, fraction: 0.95 },
  ],
  picks: ["a"],
};

describe("buildGrid", () => {
  it("flags picked rows from the server's picks list", () => {
    const rows = buildGrid(FIXTURE);
    expect(rows.find((r) => r.question === "a")?.picked).toBe(true);
    expect(rows.find((r) => r.question === "b")?.picked).toBe(false);
  });
});

describe("percent", () => {
  it("renders whole percents", () => {
    expect(percent(0.15)).toBe("15%");
    expect(percent(0.954)).toBe("95%");
    expect(percent(0)).toBe("0%");
    expect(percent(1)).toBe("100%");
  });
});

describe("sortRows", () => {
  const rows = buildGrid({
    cohort_size: 10,
    questions: [
      { id: "mid", completed_count: 5, fraction: 0.5 },
      { id: "tie1", completed_count: 2, fraction: 0.2 },
      { id: "tie2", completed_count: 2, fraction: 0.2 },
      { id: "high", completed_count: 9, fraction: 0.9 },
    ],
    picks: [],
  });

  it("sorts ascending and descending by fraction", () => {
    expect(sortRows(rows, "asc").map((r) => r.question)).toEqual(
      ["tie1", "tie2", "mid", "high"]);
    expect(sortRows(rows, "desc").map((r) => r.question)).toEqual(
      ["high", "mid", "tie1", "tie2"]);
  });

  it("keeps tied rows in stable order across toggles", () => {
    const once = sortRows(rows, "asc");
    const twice = sortRows(sortRows(rows, "desc"), "asc");
    expect(twice.map((r) => r.question)).toEqual(once.map((r) => r.question));
  });

  it("does not mutate its input", () => {
    const before = rows.map((r) => r.question);
    sortRows(rows, "desc");
    expect(rows.map((r) => r.question)).toEqual(before);
  });
});

describe("renderOverview", () => {
  it("highlights picked rows", () => {
    const html = renderOverview(FIXTURE);
    expect(html).toMatch(/class="picked" data-question-id="a"/);
    expect(html).toMatch(/class="" data-question-id="b"/);
  });

  it("shows the picks list before the grid", () => {
    const html = renderOverview(FIXTURE);
    expect(html.indexOf('class="picks"')).toBeGreaterThan(-1);
    expect(html.indexOf('class="picks"')).toBeLessThan(html.indexOf("<table"));
  });

  it("renders fractions as whole percents", () => {
    const html = renderOverview(FIXTURE);
    expect(html).toContain("<td>15%</td>");
    expect(html).toContain("<td>95%</td>");
  });

  it("survives an empty cohort with zero counts", () => {
    const html = renderOverview({
      cohort_size: 0,
      questions: [{ id: "a", completed_count: 0, fraction: 0 }],
      picks: [],
    });
    expect(html).toContain("0 students");
    expect(html).toContain("<td>0%</td>");
  });

  it("sort direction changes row order", () => {
    const asc = renderOverview(FIXTURE, "asc");
    const desc = renderOverview(FIXTURE, "desc");
    expect(asc.indexOf('data-question-id="a"'))
      .toBeLessThan(asc.indexOf('data-question-id="b"'));
    expect(desc.indexOf('data-question-id="b"'))
      .toBeLessThan(desc.indexOf('data-question-id="a"'));
  });
});

describe("OverviewPoller", () => {
  function makePoller(results: (Overview | ApiError)[], intervalMs = 30_000) {
    const scheduled: { cb: () => void; ms: number }[] = [];
    const data: Overview[] = [];
    const errors: unknown[] = [];
    let call = 0;
    const client = {
      getOverview: async () => {
        const result = results[Math.min(call++, results.length - 1)];
        if (result instanceof ApiError) throw result;
        return result;
      },
    } as unknown as ApiClient;
    const poller = new OverviewPoller(
      client,
      (o) => data.push(o),
      (e) => errors.push(e),
      intervalMs,
      (cb, ms) => {
        scheduled.push({ cb, ms });
        return scheduled.length - 1;
      },
      () => undefined,
    );
    return { poller, scheduled, data, errors };
  }

  it("fetches immediately and reschedules every 30 seconds", async () => {
    const { poller, scheduled, data } = makePoller([FIXTURE]);
    await poller.start();
    expect(data).toHaveLength(1);
    expect(scheduled).toHaveLength(1);
    expect(scheduled[0].ms).toBe(30_000);
    scheduled[0].cb();
    await Promise.resolve();
    expect(data.length).toBeGreaterThan(1);
  });

  it("stops rescheduling once stopped", async () => {
    const { poller, scheduled } = makePoller([FIXTURE]);
    await poller.start();
    poller.stop();
    const count = scheduled.length;
    scheduled[0].cb();
    await Promise.resolve();
    expect(scheduled.length).toBe(count);
  });

  it("routes authorization failures to the error handler", async () => {
    const { poller, errors } = makePoller([new ApiError(403, "instructor role required")]);
    await poller.start();
    expect(errors).toHaveLength(1);
    expect((errors[0] as ApiError).status).toBe(403);
  });
});
