/** Disagreement review: all annotators' values side by side, resolver posts a choice. */

import type { AnnotationApi, CodebookDoc, Disagreement, Violation } from "./api.js";
import { validateSelection, type Selection } from "./codebook.js";

export interface ReviewState {
  status: "idle" | "loading" | "ready" | "error";
  round: number;
  conflicts: Disagreement[];
  current: Disagreement | null;
  choice: Selection;
  violations: Violation[];
  canResolve: boolean;
  error: string | null;
}

type Listener = (state: ReviewState) => void;

export class ReviewQueue {
  private state_: ReviewState = {
    status: "idle",
    round: 1,
    conflicts: [],
    current: null,
    choice: {},
    violations: [],
    canResolve: false,
    error: null,
  };
  private listeners: Listener[] = [];

  constructor(
    private readonly api: AnnotationApi,
    private readonly codebook: CodebookDoc,
    private readonly resolverId: string,
  ) {}

  get state(): ReviewState {
    return this.state_;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(partial: Partial<ReviewState>): void {
    this.state_ = { ...this.state_, ...partial };
    for (const listener of this.listeners) {
      listener(this.state_);
    }
  }

  private revalidate(): void {
    const violations = validateSelection(this.state_.choice, this.codebook);
    this.emit({ violations, canResolve: violations.length === 0 });
  }

  async load(round: number): Promise<ReviewState> {
    this.emit({ status: "loading", round });
    try {
      const body = await this.api.getDisagreements(round);
      this.emit({
        status: "ready",
        conflicts: body.conflicts,
        current: body.conflicts[0] ?? null,
        choice: {},
        violations: [],
        canResolve: false,
        error: null,
      });
    } catch (error) {
      this.emit({ status: "error", error: String(error) });
    }
    return this.state_;
  }

  open(postId: string): ReviewState {
    const conflict = this.state_.conflicts.find((c) => c.post_id === postId) ?? null;
    this.emit({ current: conflict, choice: {}, violations: [], canResolve: false });
    return this.state_;
  }

  /** Adopt one annotator's record wholesale as the starting choice. */
  adopt(annotatorId: string): ReviewState {
    const record = this.state_.current?.records.find((r) => r.annotator_id === annotatorId);
    if (record) {
      this.emit({
        choice: {
          topic: record.topic,
          measure_support: record.measure_support,
          government_support: record.government_support,
          relevance: record.relevance,
        },
      });
      this.revalidate();
    }
    return this.state_;
  }

  choose(axis: string, value: string | null): ReviewState {
    this.emit({ choice: { ...this.state_.choice, [axis]: value } });
    this.revalidate();
    return this.state_;
  }

  async resolveCurrent(): Promise<ReviewState> {
    const current = this.state_.current;
    if (!current || !this.state_.canResolve) {
      return this.state_;
    }
    const values: Record<string, string | null> = {};
    for (const axis of this.codebook.axes) {
      values[axis.name] = this.state_.choice[axis.name] ?? null;
    }
    try {
      await this.api.resolve(current.post_id, values, this.resolverId);
      const remaining = this.state_.conflicts.filter((c) => c.post_id !== current.post_id);
      this.emit({
        conflicts: remaining,
        current: remaining[0] ?? null,
        choice: {},
        violations: [],
        canResolve: false,
      });
    } catch (error) {
      this.emit({ error: String(error) });
    }
    return this.state_;
  }
}
