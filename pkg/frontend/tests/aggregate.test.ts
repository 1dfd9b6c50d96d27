import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { aggregate, aggregatesToCsv, meanStd, parseAggregatesCsv } from "../src/aggregate.js";
import { parseResultsCsv } from "../src/csv.js";

const FIXTURE = new URL("./fixtures/handbuilt.csv", import.meta.url).pathname;

describe("meanStd", () => {
  it("matches hand-computed values", () => {
    const { mean, std } = meanStd([2.0, 2.5, 3.0]);
    expect(mean).toBeCloseTo(2.5, 12);
    expect(std).toBeCloseTo(Math.sqrt(1 / 6), 12);
  });

  it("single value gives zero-width band", () => {
    const { mean, std } = meanStd([1.7]);
    expect(mean).toBe(1.7);
    expect(std).toBe(0);
  });

  it("identical values give zero std", () => {
    expect(meanStd([4.2, 4.2]).std).toBe(0);
  });
});

describe("aggregate", () => {
  it("groups by series and x across seeds", () => {
    const rows = parseResultsCsv(readFileSync(FIXTURE, "utf8"));
    const points = aggregate(
      rows.filter((r) => r.train_samples !== ""),
      (r) => r.model,
      (r) => r.train_samples,
    );
    const causal100 = points.find((p) => p.series === "exp_causal" && p.x === "100")!;
    expect(causal100.count).toBe(3);
    expect(causal100.mean).toBeCloseTo(2.5, 12);
    const causal1000 = points.find((p) => p.series === "exp_causal" && p.x === "1000")!;
    expect(causal1000.mean).toBeCloseTo((1.5 + 1.5 + 1.8) / 3, 12);
  });
});

describe("aggregates csv round trip", () => {
  it("preserves full float precision", () => {
    const points = [
      { series: "a", x: "1", mean: 1 / 3, std: Math.sqrt(2) / 7, count: 10 },
      { series: "b", x: "", mean: -0, std: 0, count: 1 },
    ];
    const back = parseAggregatesCsv(aggregatesToCsv(points));
    expect(back[0].mean).toBe(points[0].mean);
    expect(back[0].std).toBe(points[0].std);
    expect(back[1].mean).toBe(0);
  });
});
