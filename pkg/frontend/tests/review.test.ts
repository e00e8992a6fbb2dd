import { describe, expect, it } from "vitest";

import { ReviewQueue } from "../src/review.js";
import { CODEBOOK, FakeApi } from "./fixtures.js";

function apiWithConflict() {
  const api = new FakeApi();
  api.getDisagreements = async (round: number) => ({
    round,
    conflicts: [
      {
        post_id: "p42",
        records: [
          {
            annotator_id: "a",
            topic: "curfew",
            measure_support: "too-strict",
            government_support: "not-applicable",
            relevance: "relevant",
          },
          {
            annotator_id: "b",
            topic: "curfew",
            measure_support: "ok",
            government_support: "not-applicable",
            relevance: "relevant",
          },
        ],
      },
    ],
  });
  return api;
}

describe("ReviewQueue", () => {
  it("shows side-by-side records and resolves with the chosen values", async () => {
    const api = apiWithConflict();
    const queue = new ReviewQueue(api, CODEBOOK, "lead");
    let state = await queue.load(1);
    expect(state.conflicts).toHaveLength(1);
    expect(state.current?.records.map((r) => r.annotator_id)).toEqual(["a", "b"]);

    queue.adopt("a");
    state = queue.choose("measure_support", "ok");
    expect(state.canResolve).toBe(true);
    state = await queue.resolveCurrent();
    expect(api.resolved).toEqual([
      {
        postId: "p42",
        values: {
          topic: "curfew",
          measure_support: "ok",
          government_support: "not-applicable",
          relevance: "relevant",
        },
        resolverId: "lead",
      },
    ]);
    expect(state.conflicts).toHaveLength(0);
    expect(state.current).toBeNull();
  });

  it("blocks resolution while the choice violates the codebook", async () => {
    const api = apiWithConflict();
    const queue = new ReviewQueue(api, CODEBOOK, "lead");
    await queue.load(1);
    queue.adopt("a");
    const state = queue.choose("relevance", "irrelevant"); // topic still set -> invalid
    expect(state.canResolve).toBe(false);
    await queue.resolveCurrent();
    expect(api.resolved).toHaveLength(0);
  });
});
