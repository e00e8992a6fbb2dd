/** Thin DOM layer: state in, elements out. No aggregate is computed here. */

import type { CodebookDoc } from "./api.js";
import type { ChartModel } from "./dashboard.js";
import type { LabelingState } from "./labeling.js";
import { bindingsByAxis, type KeyBinding } from "./keymap.js";
import type { ReviewState } from "./review.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderLabeling(
  container: HTMLElement,
  state: LabelingState,
  codebook: CodebookDoc,
  keymap: KeyBinding[],
  handlers: {
    onSelect: (axis: string, value: string) => void;
    onSubmit: () => void;
    onContinue: () => void;
    onRetry: () => void;
  },
): void {
  container.replaceChildren();
  if (state.kind === "idle" || state.kind === "loading") {
    container.append(el("p", "status", "loading batch…"));
    return;
  }
  if (state.kind === "drained") {
    const box = el("div", "empty-state");
    box.append(el("h2", undefined, "no posts remaining"));
    box.append(el("p", undefined, `${state.done} labeled in this session`));
    const again = el("button", "primary", "check for more");
    again.addEventListener("click", handlers.onContinue);
    box.append(again);
    container.append(box);
    return;
  }
  if (state.kind === "error") {
    const box = el("div", "error-state");
    box.append(el("p", undefined, state.message));
    const retry = el("button", "primary", "retry");
    retry.addEventListener("click", handlers.onRetry);
    box.append(retry);
    container.append(box);
    return;
  }

  const progress = el("div", "progress", `${state.done}/${state.total}`);
  container.append(progress);

  const card = el("div", "post-card");
  card.append(el("p", "post-text", state.post.text));
  card.append(el("p", "post-meta", `${state.post.lang} · ${state.post.created_at}`));
  container.append(card);

  const grouped = bindingsByAxis(keymap);
  for (const axis of codebook.axes) {
    const block = el("div", axis.name === state.focusedAxis ? "axis focused" : "axis");
    block.append(el("h3", undefined, axis.name.replace("_", " ")));
    const row = el("div", "values");
    for (const binding of grouped.get(axis.name) ?? []) {
      const selected = state.selection[axis.name] === binding.value;
      const button = el("button", selected ? "value selected" : "value");
      button.append(el("kbd", undefined, binding.key));
      button.append(document.createTextNode(` ${binding.value}`));
      button.addEventListener("click", () => handlers.onSelect(binding.axis, binding.value));
      row.append(button);
    }
    block.append(row);
    if (axis.name === state.focusedAxis) {
      const selectedValue = state.selection[axis.name];
      const excerpt =
        (selectedValue != null ? axis.definitions[selectedValue] : undefined) ??
        Object.entries(axis.definitions)
          .map(([value, text]) => `${value}: ${text}`)
          .join(" ");
      block.append(el("p", "codebook-excerpt", excerpt));
    }
    container.append(block);
  }

  if (state.violations.length > 0) {
    const list = el("ul", "violations");
    for (const violation of state.violations) {
      list.append(el("li", undefined, `${violation.axis}: ${violation.message}`));
    }
    container.append(list);
  }
  if (state.notice) {
    container.append(el("p", "notice", state.notice));
  }
  const submit = el("button", "primary submit", "submit (enter)");
  submit.disabled = !state.canSubmit;
  submit.addEventListener("click", handlers.onSubmit);
  container.append(submit);
}

function polyline(points: { x: number; y: number }[], stroke: string): SVGPolylineElement {
  const node = document.createElementNS(SVG_NS, "polyline");
  node.setAttribute("points", points.map((p) => `${p.x},${p.y}`).join(" "));
  node.setAttribute("fill", "none");
  node.setAttribute("stroke", stroke);
  node.setAttribute("stroke-width", "1.5");
  return node;
}

const BAND_COLORS = ["#c0392b", "#27ae60", "#2980b9", "#bdc3c7"];

export function renderChart(svg: SVGSVGElement, model: ChartModel): void {
  svg.replaceChildren();
  svg.setAttribute("viewBox", `0 0 ${model.width} ${model.height}`);
  model.panels.forEach((panel, panelIndex) => {
    const offsetY = panelIndex * model.panelHeight;
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("transform", `translate(0,${offsetY})`);
    group.setAttribute("data-panel", panel.title);
    const title = document.createElementNS(SVG_NS, "text");
    title.setAttribute("x", "4");
    title.setAttribute("y", "12");
    title.setAttribute("class", "panel-title");
    title.textContent = panel.title;
    group.append(title);
    if (panel.kind === "line" && panel.points) {
      group.append(polyline(panel.points, panelIndex === 0 ? "#7f8c8d" : "#2c3e50"));
    }
    if (panel.kind === "stack" && panel.slices) {
      const labels = panel.slices[0]?.bands.map((band) => band.label) ?? [];
      labels.forEach((label, bandIndex) => {
        const upper = panel.slices!.map((slice) => ({
          x: slice.x,
          y: model.panelHeight * (1 - (slice.bands[bandIndex]?.cumulative ?? 0)),
        }));
        const lower = panel.slices!
          .map((slice) => ({
            x: slice.x,
            y: model.panelHeight * (1 - (bandIndex > 0 ? slice.bands[bandIndex - 1]?.cumulative ?? 0 : 0)),
          }))
          .reverse();
        const polygon = document.createElementNS(SVG_NS, "polygon");
        polygon.setAttribute(
          "points",
          [...upper, ...lower].map((p) => `${p.x},${p.y}`).join(" "),
        );
        polygon.setAttribute("fill", BAND_COLORS[bandIndex % BAND_COLORS.length] ?? "#999");
        polygon.setAttribute("fill-opacity", "0.8");
        polygon.setAttribute("data-band", label);
        group.append(polygon);
      });
    }
    svg.append(group);
  });
  for (const marker of model.markers) {
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(marker.x));
    line.setAttribute("x2", String(marker.x));
    line.setAttribute("y1", "0");
    line.setAttribute("y2", String(model.height));
    line.setAttribute("stroke", "#000");
    line.setAttribute("stroke-dasharray", "3,3");
    svg.append(line);
    const caption = document.createElementNS(SVG_NS, "text");
    caption.setAttribute("x", String(marker.x + 3));
    caption.setAttribute("y", "24");
    caption.setAttribute("class", "marker-caption");
    caption.textContent = marker.caption;
    svg.append(caption);
  }
}

export function renderReview(
  container: HTMLElement,
  state: ReviewState,
  codebook: CodebookDoc,
  handlers: {
    onOpen: (postId: string) => void;
    onAdopt: (annotatorId: string) => void;
    onChoose: (axis: string, value: string | null) => void;
    onResolve: () => void;
  },
): void {
  container.replaceChildren();
  if (state.status === "loading") {
    container.append(el("p", "status", "loading disagreements…"));
    return;
  }
  if (state.status === "error") {
    container.append(el("p", "error-state", state.error ?? "failed"));
    return;
  }
  if (state.conflicts.length === 0) {
    container.append(el("p", "empty-state", "no open disagreements"));
    return;
  }
  const list = el("ul", "conflict-list");
  for (const conflict of state.conflicts) {
    const item = el("li", state.current?.post_id === conflict.post_id ? "open" : undefined);
    const link = el("button", "link", conflict.post_id);
    link.addEventListener("click", () => handlers.onOpen(conflict.post_id));
    item.append(link);
    list.append(item);
  }
  container.append(list);

  const current = state.current;
  if (!current) return;
  const table = el("table", "side-by-side");
  const head = el("tr");
  head.append(el("th", undefined, "axis"));
  for (const record of current.records) {
    const cell = el("th");
    const adopt = el("button", "link", record.annotator_id);
    adopt.addEventListener("click", () => handlers.onAdopt(record.annotator_id));
    cell.append(adopt);
    head.append(cell);
  }
  head.append(el("th", undefined, "resolution"));
  table.append(head);
  for (const axis of codebook.axes) {
    const row = el("tr");
    row.append(el("td", undefined, axis.name));
    for (const record of current.records) {
      const value = (record as unknown as Record<string, string | null>)[axis.name];
      row.append(el("td", undefined, value ?? "—"));
    }
    const cell = el("td");
    const select = el("select");
    const blank = el("option", undefined, "—");
    blank.setAttribute("value", "");
    select.append(blank);
    for (const value of axis.values) {
      const option = el("option", undefined, value);
      option.setAttribute("value", value);
      if (state.choice[axis.name] === value) option.setAttribute("selected", "selected");
      select.append(option);
    }
    select.addEventListener("change", () =>
      handlers.onChoose(axis.name, select.value === "" ? null : select.value),
    );
    cell.append(select);
    row.append(cell);
    table.append(row);
  }
  container.append(table);
  if (state.violations.length > 0) {
    const list2 = el("ul", "violations");
    for (const violation of state.violations) {
      list2.append(el("li", undefined, `${violation.axis}: ${violation.message}`));
    }
    container.append(list2);
  }
  const resolve = el("button", "primary", "resolve");
  resolve.disabled = !state.canResolve;
  resolve.addEventListener("click", handlers.onResolve);
  container.append(resolve);
}
