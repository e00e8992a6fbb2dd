import type {
  AnnotationApi,
  ClaimResponse,
  CodebookDoc,
  LabelSubmission,
  PostRecord,
  SubmitResult,
  TimelinePayload,
} from "../src/api.js";

/** Mirrors the server's default codebook document. */
export const CODEBOOK: CodebookDoc = {
  version: "1.0",
  axes: [
    {
      name: "topic",
      values: [
        "masks",
        "curfew",
        "quarantine",
        "lockdown",
        "schools",
        "testing",
        "closing-horeca",
        "vaccine",
        "other-measure",
      ],
      definitions: { curfew: "The nightly curfew." },
    },
    {
      name: "measure_support",
      values: ["too-strict", "ok", "too-loose", "not-applicable"],
      definitions: {},
    },
    {
      name: "government_support",
      values: ["supportive", "unsupportive", "not-applicable"],
      definitions: {},
    },
    {
      name: "relevance",
      values: ["relevant", "irrelevant"],
      definitions: {},
    },
  ],
  constraints: [
    {
      when: { axis: "relevance", value: "irrelevant" },
      require: {
        topic: null,
        measure_support: "not-applicable",
        government_support: "not-applicable",
      },
    },
  ],
};

export function makePost(id: string, text = "avondklok draconisch corona"): PostRecord {
  return {
    id,
    text,
    lang: "nl",
    created_at: "2020-11-01T12:00:00Z",
    place_country: "BE",
    author_ref: "abcd",
  };
}

export interface FakeApiOptions {
  posts?: PostRecord[];
  submitResults?: SubmitResult[];
  failSubmissions?: number;
  timeline?: TimelinePayload | null;
}

/** In-memory AnnotationApi: records every call, scriptable failures. */
export class FakeApi implements AnnotationApi {
  claims: { annotatorId: string; count: number }[] = [];
  submissions: LabelSubmission[] = [];
  resolved: { postId: string; values: Record<string, string | null>; resolverId: string }[] = [];
  timelineRequests: { topic: string; smoothing: number }[] = [];
  private failRemaining: number;

  constructor(private readonly options: FakeApiOptions = {}) {
    this.failRemaining = options.failSubmissions ?? 0;
  }

  async health() {
    return { status: "ok", pool_size: this.options.posts?.length ?? 0, codebook_version: "1.0" };
  }

  async getCodebook(): Promise<CodebookDoc> {
    return CODEBOOK;
  }

  async claim(annotatorId: string, count: number): Promise<ClaimResponse> {
    this.claims.push({ annotatorId, count });
    const posts = (this.options.posts ?? []).slice(0, count);
    this.options.posts = (this.options.posts ?? []).slice(posts.length);
    return {
      status: posts.length > 0 ? "ok" : "pool-drained",
      round: 1,
      lease_expires_at: posts.length > 0 ? "2020-11-01T13:00:00Z" : null,
      posts,
    };
  }

  async submitLabel(submission: LabelSubmission): Promise<SubmitResult> {
    if (this.failRemaining > 0) {
      this.failRemaining -= 1;
      throw new TypeError("network down");
    }
    this.submissions.push(submission);
    const scripted = this.options.submitResults?.shift();
    return scripted ?? { kind: "stored", storedId: this.submissions.length };
  }

  async getAgreement(round: number, axis: string) {
    return { status: "no-overlap" as const, round, axis };
  }

  async getDisagreements(round: number) {
    return { round, conflicts: [] };
  }

  async resolve(postId: string, values: Record<string, string | null>, resolverId: string) {
    this.resolved.push({ postId, values, resolverId });
    return { status: "resolved", gold: { post_id: postId, ...values } };
  }

  async getTimelines(topic: string, smoothing: number) {
    this.timelineRequests.push({ topic, smoothing });
    const payload = this.options.timeline;
    if (!payload) {
      return { kind: "not-ready" as const };
    }
    return { kind: "ready" as const, payload: { ...payload, topic, smoothing } };
  }
}

export const TIMELINE_PAYLOAD: TimelinePayload = {
  topic: "curfew",
  smoothing: 1,
  timezone: "Europe/Brussels",
  topic_rate: {
    name: "topic_rate:curfew",
    unit: "share of relevant posts",
    points: [
      ["2020-11-01", 0.25],
      ["2020-11-02", 0.4],
      ["2020-11-03", 0.1],
    ],
  },
  stance: {
    "too-strict": {
      name: "stance:too-strict",
      unit: "fraction of topic posts",
      points: [
        ["2020-11-01", 0.5],
        ["2020-11-02", 0.25],
        ["2020-11-03", 0.625],
      ],
    },
    ok: {
      name: "stance:ok",
      unit: "fraction of topic posts",
      points: [
        ["2020-11-01", 0.25],
        ["2020-11-02", 0.25],
        ["2020-11-03", 0.125],
      ],
    },
    "too-loose": {
      name: "stance:too-loose",
      unit: "fraction of topic posts",
      points: [
        ["2020-11-01", 0.0],
        ["2020-11-02", 0.25],
        ["2020-11-03", 0.0],
      ],
    },
    "not-applicable": {
      name: "stance:not-applicable",
      unit: "fraction of topic posts",
      points: [
        ["2020-11-01", 0.25],
        ["2020-11-02", 0.25],
        ["2020-11-03", 0.25],
      ],
    },
  },
  cases: {
    name: "cases",
    unit: "cases/day",
    points: [
      ["2020-11-01", 520],
      ["2020-11-02", 640],
      ["2020-11-03", 480],
    ],
  },
  markers: [{ day: "2020-11-02", caption: "lockdown begins" }],
};
