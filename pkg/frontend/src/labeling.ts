/** Labeling screen state machine: claim a batch, label one post at a time by
 * keyboard, submit only when the selection passes codebook validation.
 *
 * All durable state lives in the service; on a network failure the current
 * selection is kept and the same submission can be retried.
 */

import type {
  AnnotationApi,
  CodebookDoc,
  PostRecord,
  Violation,
} from "./api.js";
import { constraintFills, emptySelection, validateSelection, type Selection } from "./codebook.js";
import { buildKeymap, lookupKey, type KeyBinding } from "./keymap.js";

export type LabelingState =
  | { kind: "idle" }
  | { kind: "loading" }
  | {
      kind: "labeling";
      post: PostRecord;
      selection: Selection;
      violations: Violation[];
      canSubmit: boolean;
      done: number;
      total: number;
      focusedAxis: string;
      leaseExpiresAt: string | null;
      notice: string | null;
    }
  | { kind: "drained"; done: number }
  | { kind: "error"; message: string; recoverable: boolean };

export interface LabelingOptions {
  batchSize?: number;
  round?: number;
}

type Listener = (state: LabelingState) => void;

export class LabelingSession {
  readonly keymap: KeyBinding[];
  private batch: PostRecord[] = [];
  private index = 0;
  private done = 0;
  private selection: Selection;
  private focusedAxis: string;
  private leaseExpiresAt: string | null = null;
  private notice: string | null = null;
  private state_: LabelingState = { kind: "idle" };
  private listeners: Listener[] = [];

  constructor(
    private readonly api: AnnotationApi,
    private readonly codebook: CodebookDoc,
    private readonly annotatorId: string,
    private readonly options: LabelingOptions = {},
  ) {
    this.keymap = buildKeymap(codebook);
    this.selection = emptySelection(codebook);
    this.focusedAxis = codebook.axes[0]?.name ?? "";
  }

  get state(): LabelingState {
    return this.state_;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(state: LabelingState): void {
    this.state_ = state;
    for (const listener of this.listeners) {
      listener(state);
    }
  }

  private labelingState(): LabelingState {
    const post = this.batch[this.index];
    if (!post) {
      return { kind: "drained", done: this.done };
    }
    const violations = validateSelection(this.selection, this.codebook);
    return {
      kind: "labeling",
      post,
      selection: { ...this.selection },
      violations,
      canSubmit: violations.length === 0,
      done: this.done,
      total: this.batch.length,
      focusedAxis: this.focusedAxis,
      leaseExpiresAt: this.leaseExpiresAt,
      notice: this.notice,
    };
  }

  async start(): Promise<LabelingState> {
    this.emit({ kind: "loading" });
    return this.claimBatch();
  }

  private async claimBatch(): Promise<LabelingState> {
    try {
      const response = await this.api.claim(
        this.annotatorId,
        this.options.batchSize ?? 10,
        this.options.round,
      );
      if (response.status === "pool-drained" || response.posts.length === 0) {
        this.emit({ kind: "drained", done: this.done });
        return this.state_;
      }
      this.batch = response.posts;
      this.index = 0;
      this.done = 0;
      this.leaseExpiresAt = response.lease_expires_at;
      this.resetSelection();
      this.emit(this.labelingState());
    } catch (error) {
      this.emit({
        kind: "error",
        message: `could not claim a batch: ${String(error)}`,
        recoverable: true,
      });
    }
    return this.state_;
  }

  private resetSelection(): void {
    this.selection = emptySelection(this.codebook);
    this.focusedAxis = this.codebook.axes[0]?.name ?? "";
    this.notice = null;
  }

  /** Apply one keystroke; unknown keys are ignored. */
  handleKey(key: string): LabelingState {
    if (this.state_.kind !== "labeling") {
      return this.state_;
    }
    const binding = lookupKey(this.keymap, key);
    if (!binding) {
      return this.state_;
    }
    this.select(binding.axis, binding.value);
    return this.state_;
  }

  /** Select a value; constraint-required values are auto-filled from codebook data. */
  select(axis: string, value: string): LabelingState {
    this.selection[axis] = value;
    this.focusedAxis = axis;
    for (const [name, required] of Object.entries(constraintFills(axis, value, this.codebook))) {
      this.selection[name] = required;
    }
    this.notice = null;
    if (this.state_.kind === "labeling") {
      this.emit(this.labelingState());
    }
    return this.state_;
  }

  clearAxis(axis: string): LabelingState {
    this.selection[axis] = undefined;
    this.focusedAxis = axis;
    if (this.state_.kind === "labeling") {
      this.emit(this.labelingState());
    }
    return this.state_;
  }

  focusAxis(axis: string): LabelingState {
    this.focusedAxis = axis;
    if (this.state_.kind === "labeling") {
      this.emit(this.labelingState());
    }
    return this.state_;
  }

  /** Submit the current selection; a no-op while the selection is invalid. */
  async submit(): Promise<LabelingState> {
    if (this.state_.kind !== "labeling" || !this.state_.canSubmit) {
      return this.state_;
    }
    const post = this.batch[this.index];
    if (!post) {
      return this.state_;
    }
    const submission = {
      post_id: post.id,
      annotator_id: this.annotatorId,
      round: this.options.round,
      topic: this.selection["topic"] ?? null,
      measure_support: this.selection["measure_support"] ?? "",
      government_support: this.selection["government_support"] ?? "",
      relevance: this.selection["relevance"] ?? "",
    };
    try {
      const result = await this.api.submitLabel(submission);
      if (result.kind === "stored") {
        this.done += 1;
        this.index += 1;
        this.resetSelection();
        if (this.index >= this.batch.length) {
          this.emit({ kind: "drained", done: this.done });
        } else {
          this.emit(this.labelingState());
        }
      } else if (result.kind === "no-lease") {
        // lease expired server-side: skip this post, it returns to the pool
        this.index += 1;
        this.resetSelection();
        this.notice = `lease on ${post.id} expired; the post returned to the pool`;
        if (this.index >= this.batch.length) {
          this.emit({ kind: "drained", done: this.done });
        } else {
          this.emit(this.labelingState());
        }
      } else {
        // the client-side mirror should have blocked this; show server truth
        this.notice = result.violations
          .map((violation) => `${violation.axis}: ${violation.message}`)
          .join("; ");
        this.emit(this.labelingState());
      }
    } catch (error) {
      // network failure: keep the selection, offer retry, lose nothing
      this.notice = `submission failed (${String(error)}); selection kept, retry to resend`;
      this.emit(this.labelingState());
    }
    return this.state_;
  }

  /** Resend after a network failure; the selection is untouched. */
  async retry(): Promise<LabelingState> {
    if (this.state_.kind === "error") {
      return this.claimBatch();
    }
    return this.submit();
  }

  /** Claim the next batch once the current one is finished. */
  async continueLabeling(): Promise<LabelingState> {
    if (this.state_.kind !== "drained") {
      return this.state_;
    }
    this.emit({ kind: "loading" });
    return this.claimBatch();
  }
}
