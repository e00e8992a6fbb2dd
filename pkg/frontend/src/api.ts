/** Typed client for the /v1 annotation and timeline endpoints. */

export interface PostRecord {
  id: string;
  text: string;
  lang: string;
  created_at: string;
  place_country: string | null;
  author_ref: string;
}

export interface ClaimResponse {
  status: "ok" | "pool-drained";
  round: number;
  lease_expires_at: string | null;
  posts: PostRecord[];
}

export interface Violation {
  axis: string;
  message: string;
}

export interface LabelSubmission {
  post_id: string;
  annotator_id: string;
  round?: number;
  topic: string | null;
  measure_support: string;
  government_support: string;
  relevance: string;
}

export type SubmitResult =
  | { kind: "stored"; storedId: number }
  | { kind: "violations"; violations: Violation[] }
  | { kind: "no-lease" };

export interface AxisDoc {
  name: string;
  values: string[];
  definitions: Record<string, string>;
}

export interface ConstraintDoc {
  when: { axis: string; value: string };
  require: Record<string, string | null>;
}

export interface CodebookDoc {
  version: string;
  axes: AxisDoc[];
  constraints: ConstraintDoc[];
}

export interface SeriesPayload {
  name: string;
  unit: string;
  points: [string, number][];
}

export interface MarkerPayload {
  day: string;
  caption: string;
}

export interface TimelinePayload {
  topic: string;
  smoothing: number;
  timezone: string;
  topic_rate: SeriesPayload;
  stance: Record<string, SeriesPayload>;
  cases: SeriesPayload | null;
  markers: MarkerPayload[];
}

export type TimelineResult =
  | { kind: "ready"; payload: TimelinePayload }
  | { kind: "not-ready" };

export interface DisagreementRecord {
  annotator_id: string;
  topic: string | null;
  measure_support: string;
  government_support: string;
  relevance: string;
}

export interface Disagreement {
  post_id: string;
  records: DisagreementRecord[];
}

export type AgreementSummary =
  | {
      status: "ok";
      round: number;
      axis: string;
      n_posts: number;
      n_pairs: number;
      percent_agreement: number;
      kappa: number;
    }
  | { status: "no-overlap"; round: number; axis: string };

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: unknown,
  ) {
    super(`service responded ${status}`);
  }
}

/** The surface the view models depend on; ServiceClient is the HTTP implementation. */
export interface AnnotationApi {
  health(): Promise<{ status: string; pool_size: number; codebook_version: string }>;
  getCodebook(): Promise<CodebookDoc>;
  claim(annotatorId: string, count: number, round?: number): Promise<ClaimResponse>;
  submitLabel(submission: LabelSubmission): Promise<SubmitResult>;
  getAgreement(round: number, axis: string): Promise<AgreementSummary>;
  getDisagreements(round: number): Promise<{ round: number; conflicts: Disagreement[] }>;
  resolve(
    postId: string,
    values: Record<string, string | null>,
    resolverId: string,
  ): Promise<{ status: string; gold: Record<string, unknown> }>;
  getTimelines(
    topic: string,
    smoothing: number,
    window?: { start?: string; end?: string },
  ): Promise<TimelineResult>;
}

export class ServiceClient implements AnnotationApi {
  constructor(
    private readonly base: string,
    private readonly token?: string,
  ) {}

  private async request(path: string, init: RequestInit = {}): Promise<Response> {
    const headers: Record<string, string> = {
      "Content-Type": "application/json",
      ...((init.headers as Record<string, string>) ?? {}),
    };
    if (this.token) {
      headers["X-Annotator-Token"] = this.token;
    }
    return fetch(`${this.base}${path}`, { ...init, headers });
  }

  private async json<T>(response: Response): Promise<T> {
    if (!response.ok) {
      const detail = await response.json().catch(() => null);
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async health(): Promise<{ status: string; pool_size: number; codebook_version: string }> {
    return this.json(await this.request("/v1/health"));
  }

  async getCodebook(): Promise<CodebookDoc> {
    return this.json(await this.request("/v1/codebook"));
  }

  async claim(annotatorId: string, count: number, round?: number): Promise<ClaimResponse> {
    return this.json(
      await this.request("/v1/claim", {
        method: "POST",
        body: JSON.stringify({ annotator_id: annotatorId, count, round }),
      }),
    );
  }

  async submitLabel(submission: LabelSubmission): Promise<SubmitResult> {
    const response = await this.request("/v1/labels", {
      method: "POST",
      body: JSON.stringify(submission),
    });
    if (response.ok) {
      const body = (await response.json()) as { stored_id: number };
      return { kind: "stored", storedId: body.stored_id };
    }
    const detail = (await response.json().catch(() => null)) as {
      detail?: { status?: string; violations?: Violation[] };
    } | null;
    if (response.status === 409) {
      return { kind: "no-lease" };
    }
    if (response.status === 422 && detail?.detail?.violations) {
      return { kind: "violations", violations: detail.detail.violations };
    }
    throw new ApiError(response.status, detail);
  }

  async getAgreement(round: number, axis: string): Promise<AgreementSummary> {
    return this.json(
      await this.request(`/v1/agreement?round=${round}&axis=${encodeURIComponent(axis)}`),
    );
  }

  async getDisagreements(round: number): Promise<{ round: number; conflicts: Disagreement[] }> {
    return this.json(await this.request(`/v1/disagreements?round=${round}`));
  }

  async resolve(
    postId: string,
    values: Record<string, string | null>,
    resolverId: string,
  ): Promise<{ status: string; gold: Record<string, unknown> }> {
    return this.json(
      await this.request("/v1/resolve", {
        method: "POST",
        body: JSON.stringify({ post_id: postId, values, resolver_id: resolverId }),
      }),
    );
  }

  async getTimelines(
    topic: string,
    smoothing: number,
    window?: { start?: string; end?: string },
  ): Promise<TimelineResult> {
    const params = new URLSearchParams({ topic, smoothing: String(smoothing) });
    if (window?.start) params.set("window_start", window.start);
    if (window?.end) params.set("window_end", window.end);
    const response = await this.request(`/v1/timelines?${params.toString()}`);
    if (response.status === 503) {
      return { kind: "not-ready" };
    }
    const payload = await this.json<TimelinePayload>(response);
    return { kind: "ready", payload };
  }
}
