/** Timeline dashboard state plus the pure chart geometry it renders from.
 *
 * The UI computes no aggregates: every plotted value comes verbatim from the
 * /v1/timelines payload, and the chart model keeps the original values next
 * to their pixel positions so tests (and tooltips) can trace them back.
 */

import type { AnnotationApi, TimelinePayload } from "./api.js";

export type DashboardStatus = "idle" | "loading" | "ready" | "not-ready" | "error";

export interface DashboardState {
  status: DashboardStatus;
  topic: string;
  smoothing: number;
  payload: TimelinePayload | null;
  error: string | null;
}

export interface LinePoint {
  day: string;
  value: number;
  x: number;
  y: number;
}

export interface StackSlice {
  day: string;
  x: number;
  /** bands in codebook order: fraction plus the cumulative top after stacking */
  bands: { label: string; value: number; cumulative: number }[];
}

export interface MarkerModel {
  day: string;
  caption: string;
  x: number;
}

export interface PanelModel {
  title: string;
  unit: string;
  kind: "line" | "stack";
  points?: LinePoint[];
  slices?: StackSlice[];
  yMax: number;
}

export interface ChartModel {
  width: number;
  height: number;
  panelHeight: number;
  days: string[];
  panels: PanelModel[];
  markers: MarkerModel[];
}

function xScale(days: string[], width: number): (day: string) => number {
  const index = new Map(days.map((day, i) => [day, i]));
  const step = days.length > 1 ? width / (days.length - 1) : 0;
  return (day: string) => (index.get(day) ?? 0) * step;
}

/** Build the three-panel layout: cases on top, topic rate, then stance bands. */
export function buildChartModel(
  payload: TimelinePayload,
  width = 900,
  panelHeight = 160,
): ChartModel {
  const daySet = new Set<string>();
  for (const [day] of payload.topic_rate.points) daySet.add(day);
  for (const series of Object.values(payload.stance)) {
    for (const [day] of series.points) daySet.add(day);
  }
  if (payload.cases) {
    for (const [day] of payload.cases.points) daySet.add(day);
  }
  const days = [...daySet].sort();
  const toX = xScale(days, width);

  const panels: PanelModel[] = [];

  const caseValues = payload.cases?.points.map(([, value]) => value) ?? [];
  const caseMax = Math.max(1, ...caseValues);
  panels.push({
    title: "daily cases",
    unit: payload.cases?.unit ?? "",
    kind: "line",
    yMax: caseMax,
    points:
      payload.cases?.points.map(([day, value]) => ({
        day,
        value,
        x: toX(day),
        y: panelHeight - (value / caseMax) * panelHeight,
      })) ?? [],
  });

  const rateValues = payload.topic_rate.points.map(([, value]) => value);
  const rateMax = Math.max(1e-9, ...rateValues);
  panels.push({
    title: payload.topic_rate.name,
    unit: payload.topic_rate.unit,
    kind: "line",
    yMax: rateMax,
    points: payload.topic_rate.points.map(([day, value]) => ({
      day,
      value,
      x: toX(day),
      y: panelHeight - (value / rateMax) * panelHeight,
    })),
  });

  const stanceLabels = Object.keys(payload.stance);
  const byDay = new Map<string, { label: string; value: number }[]>();
  for (const label of stanceLabels) {
    const series = payload.stance[label];
    if (!series) continue;
    for (const [day, value] of series.points) {
      const bucket = byDay.get(day) ?? [];
      bucket.push({ label, value });
      byDay.set(day, bucket);
    }
  }
  const slices: StackSlice[] = [];
  for (const day of days) {
    const entries = byDay.get(day);
    if (!entries) continue;
    let cumulative = 0;
    slices.push({
      day,
      x: toX(day),
      bands: entries.map(({ label, value }) => {
        cumulative += value;
        return { label, value, cumulative };
      }),
    });
  }
  panels.push({
    title: "stance fractions",
    unit: "fraction of topic posts",
    kind: "stack",
    yMax: 1,
    slices,
  });

  return {
    width,
    height: panels.length * panelHeight,
    panelHeight,
    days,
    panels,
    markers: payload.markers
      .filter((marker) => daySet.has(marker.day) || days.length === 0 ||
        (marker.day >= (days[0] ?? "") && marker.day <= (days[days.length - 1] ?? "")))
      .map((marker) => ({ day: marker.day, caption: marker.caption, x: toX(marker.day) })),
  };
}

type Listener = (state: DashboardState) => void;

export class Dashboard {
  private state_: DashboardState = {
    status: "idle",
    topic: "curfew",
    smoothing: 7,
    payload: null,
    error: null,
  };
  private listeners: Listener[] = [];

  constructor(private readonly api: AnnotationApi) {}

  get state(): DashboardState {
    return this.state_;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(partial: Partial<DashboardState>): void {
    this.state_ = { ...this.state_, ...partial };
    for (const listener of this.listeners) {
      listener(this.state_);
    }
  }

  /** Fetch (or refetch) the payload; changing smoothing refetches, never rescales. */
  async load(topic?: string, smoothing?: number): Promise<DashboardState> {
    const nextTopic = topic ?? this.state_.topic;
    const nextSmoothing = smoothing ?? this.state_.smoothing;
    this.emit({ status: "loading", topic: nextTopic, smoothing: nextSmoothing });
    try {
      const result = await this.api.getTimelines(nextTopic, nextSmoothing);
      if (result.kind === "not-ready") {
        this.emit({ status: "not-ready", payload: null, error: null });
      } else {
        this.emit({ status: "ready", payload: result.payload, error: null });
      }
    } catch (error) {
      this.emit({ status: "error", error: String(error) });
    }
    return this.state_;
  }

  chartModel(width = 900, panelHeight = 160): ChartModel | null {
    if (!this.state_.payload) {
      return null;
    }
    return buildChartModel(this.state_.payload, width, panelHeight);
  }
}
