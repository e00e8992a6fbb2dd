import { describe, expect, it } from "vitest";

import { LabelingSession } from "../src/labeling.js";
import { buildKeymap, lookupKey } from "../src/keymap.js";
import { CODEBOOK, FakeApi, makePost } from "./fixtures.js";

function keyFor(axis: string, value: string): string {
  const binding = buildKeymap(CODEBOOK).find((b) => b.axis === axis && b.value === value);
  if (!binding) throw new Error(`no key for ${axis}=${value}`);
  return binding.key;
}

describe("keymap", () => {
  it("assigns one distinct key per axis value", () => {
    const bindings = buildKeymap(CODEBOOK);
    const totalValues = CODEBOOK.axes.reduce((n, axis) => n + axis.values.length, 0);
    expect(bindings).toHaveLength(totalValues);
    expect(new Set(bindings.map((b) => b.key)).size).toBe(totalValues);
  });

  it("looks keys up case-insensitively", () => {
    const bindings = buildKeymap(CODEBOOK);
    expect(lookupKey(bindings, "Q")).toMatchObject({ axis: "measure_support" });
  });
});

describe("LabelingSession", () => {
  it("claims a batch and tracks progress through submissions", async () => {
    const api = new FakeApi({ posts: [makePost("p1"), makePost("p2"), makePost("p3")] });
    const session = new LabelingSession(api, CODEBOOK, "ann-1", { batchSize: 3 });
    let state = await session.start();
    expect(state.kind).toBe("labeling");
    if (state.kind !== "labeling") return;
    expect(state.total).toBe(3);
    expect(state.done).toBe(0);
    expect(state.canSubmit).toBe(false);

    for (const expected of [1, 2]) {
      session.handleKey(keyFor("topic", "curfew"));
      session.handleKey(keyFor("measure_support", "too-strict"));
      session.handleKey(keyFor("government_support", "not-applicable"));
      state = session.handleKey(keyFor("relevance", "relevant"));
      expect(state.kind === "labeling" && state.canSubmit).toBe(true);
      state = await session.submit();
      expect(state.kind === "labeling" && state.done === expected).toBe(true);
    }
    expect(api.submissions).toHaveLength(2);
  });

  it("keyboard shortcuts map one key to one axis value", async () => {
    const api = new FakeApi({ posts: [makePost("p1")] });
    const session = new LabelingSession(api, CODEBOOK, "ann-1", { batchSize: 1 });
    await session.start();
    const state = session.handleKey("2");
    expect(state.kind === "labeling" && state.selection["topic"]).toBe("curfew");
  });

  it("marking a post irrelevant auto-fills the constrained axes", async () => {
    const api = new FakeApi({ posts: [makePost("p1")] });
    const session = new LabelingSession(api, CODEBOOK, "ann-1", { batchSize: 1 });
    await session.start();
    const state = session.handleKey(keyFor("relevance", "irrelevant"));
    if (state.kind !== "labeling") throw new Error("expected labeling state");
    expect(state.selection).toMatchObject({
      relevance: "irrelevant",
      topic: null,
      measure_support: "not-applicable",
      government_support: "not-applicable",
    });
    expect(state.canSubmit).toBe(true);
  });

  it("blocks submission while the selection violates the codebook", async () => {
    const api = new FakeApi({ posts: [makePost("p1")] });
    const session = new LabelingSession(api, CODEBOOK, "ann-1", { batchSize: 1 });
    await session.start();
    // irrelevant first, then a topic on top: now invalid
    session.handleKey(keyFor("relevance", "irrelevant"));
    const state = session.select("topic", "curfew");
    if (state.kind !== "labeling") throw new Error("expected labeling state");
    expect(state.canSubmit).toBe(false);
    expect(state.violations.map((v) => v.axis)).toContain("topic");
    const after = await session.submit(); // no-op
    expect(api.submissions).toHaveLength(0);
    expect(after.kind).toBe("labeling");
  });

  it("submits the exact selected values", async () => {
    const api = new FakeApi({ posts: [makePost("p9")] });
    const session = new LabelingSession(api, CODEBOOK, "ann-7", { batchSize: 1, round: 2 });
    await session.start();
    session.select("topic", "vaccine");
    session.select("measure_support", "too-loose");
    session.select("government_support", "unsupportive");
    session.select("relevance", "relevant");
    await session.submit();
    expect(api.submissions).toEqual([
      {
        post_id: "p9",
        annotator_id: "ann-7",
        round: 2,
        topic: "vaccine",
        measure_support: "too-loose",
        government_support: "unsupportive",
        relevance: "relevant",
      },
    ]);
  });

  it("shows the drained screen when the pool is empty", async () => {
    const api = new FakeApi({ posts: [] });
    const session = new LabelingSession(api, CODEBOOK, "ann-1");
    const state = await session.start();
    expect(state.kind).toBe("drained");
  });

  it("keeps the selection and retries after a network failure", async () => {
    const api = new FakeApi({ posts: [makePost("p1")], failSubmissions: 1 });
    const session = new LabelingSession(api, CODEBOOK, "ann-1", { batchSize: 1 });
    await session.start();
    session.select("topic", "curfew");
    session.select("measure_support", "ok");
    session.select("government_support", "supportive");
    session.select("relevance", "relevant");
    let state = await session.submit();
    if (state.kind !== "labeling") throw new Error("expected labeling state");
    expect(state.notice).toContain("retry");
    expect(state.selection["topic"]).toBe("curfew"); // nothing lost
    expect(api.submissions).toHaveLength(0);
    state = await session.retry();
    expect(api.submissions).toHaveLength(1);
    expect(api.submissions[0]).toMatchObject({ topic: "curfew", measure_support: "ok" });
    expect(state.kind).toBe("drained");
  });

  it("skips a post whose lease expired server-side", async () => {
    const api = new FakeApi({
      posts: [makePost("p1"), makePost("p2")],
      submitResults: [{ kind: "no-lease" }],
    });
    const session = new LabelingSession(api, CODEBOOK, "ann-1", { batchSize: 2 });
    await session.start();
    session.handleKey(keyFor("relevance", "irrelevant"));
    const state = await session.submit();
    if (state.kind !== "labeling") throw new Error("expected labeling state");
    expect(state.post.id).toBe("p2");
    expect(state.done).toBe(0);
    expect(state.notice).toContain("expired");
  });

  it("continues with a fresh batch after draining one", async () => {
    const api = new FakeApi({ posts: [makePost("p1"), makePost("p2")] });
    const session = new LabelingSession(api, CODEBOOK, "ann-1", { batchSize: 1 });
    await session.start();
    session.handleKey(keyFor("relevance", "irrelevant"));
    let state = await session.submit();
    expect(state.kind).toBe("drained");
    state = await session.continueLabeling();
    expect(state.kind === "labeling" && state.post.id === "p2").toBe(true);
    expect(api.claims).toHaveLength(2);
  });
});
