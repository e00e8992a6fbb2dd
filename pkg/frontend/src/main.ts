/** Bootstrap: connect to the service, wire keyboard handling and the three views. */

import { ServiceClient, type CodebookDoc } from "./api.js";
import { Dashboard } from "./dashboard.js";
import { LabelingSession } from "./labeling.js";
import { renderChart, renderLabeling, renderReview } from "./render.js";
import { ReviewQueue } from "./review.js";

const app = document.getElementById("app");
if (!app) {
  throw new Error("missing #app container");
}

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

const base = param("service", "");
const annotatorId = param("annotator", "anonymous");
const token = param("token", "") || undefined;
const api = new ServiceClient(base, token);

async function boot(): Promise<void> {
  let codebook: CodebookDoc;
  try {
    codebook = await api.getCodebook();
  } catch (error) {
    app!.textContent = `cannot reach the annotation service: ${String(error)}`;
    return;
  }

  const tabs = document.createElement("nav");
  const panes: Record<string, HTMLElement> = {};
  for (const name of ["label", "review", "dashboard"]) {
    const button = document.createElement("button");
    button.textContent = name;
    button.addEventListener("click", () => show(name));
    tabs.append(button);
    const pane = document.createElement("section");
    pane.id = `pane-${name}`;
    pane.hidden = true;
    panes[name] = pane;
  }
  app!.replaceChildren(tabs, ...Object.values(panes));

  const session = new LabelingSession(api, codebook, annotatorId, { batchSize: 10 });
  const labelPane = panes["label"]!;
  const handlers = {
    onSelect: (axis: string, value: string) => void session.select(axis, value),
    onSubmit: () => void session.submit(),
    onContinue: () => void session.continueLabeling(),
    onRetry: () => void session.retry(),
  };
  session.subscribe((state) => renderLabeling(labelPane, state, codebook, session.keymap, handlers));
  document.addEventListener("keydown", (event) => {
    if (panes["label"]!.hidden) return;
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "SELECT")) return;
    if (event.key === "Enter") {
      event.preventDefault();
      void session.submit();
      return;
    }
    if (session.handleKey(event.key).kind === "labeling") {
      event.preventDefault();
    }
  });

  const review = new ReviewQueue(api, codebook, annotatorId);
  const reviewPane = panes["review"]!;
  review.subscribe((state) =>
    renderReview(reviewPane, state, codebook, {
      onOpen: (postId) => void review.open(postId),
      onAdopt: (who) => void review.adopt(who),
      onChoose: (axis, value) => void review.choose(axis, value),
      onResolve: () => void review.resolveCurrent(),
    }),
  );

  const dashboard = new Dashboard(api);
  const dashboardPane = panes["dashboard"]!;
  const controls = document.createElement("div");
  controls.className = "dashboard-controls";
  const smoothing = document.createElement("select");
  for (const window of [1, 3, 7]) {
    const option = document.createElement("option");
    option.value = String(window);
    option.textContent = window === 1 ? "raw" : `${window}-day mean`;
    if (window === 7) option.selected = true;
    smoothing.append(option);
  }
  smoothing.addEventListener("change", () => void dashboard.load(undefined, Number(smoothing.value)));
  controls.append(smoothing);
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  const status = document.createElement("p");
  dashboardPane.append(controls, status, svg);
  dashboard.subscribe((state) => {
    status.textContent =
      state.status === "not-ready"
        ? "no classified corpus loaded yet; run the sieve first"
        : state.status === "error"
          ? (state.error ?? "failed")
          : "";
    const model = dashboard.chartModel();
    if (model) renderChart(svg, model);
  });

  function show(name: string): void {
    for (const [paneName, pane] of Object.entries(panes)) {
      pane.hidden = paneName !== name;
    }
    if (name === "label" && session.state.kind === "idle") void session.start();
    if (name === "review") void review.load(1);
    if (name === "dashboard") void dashboard.load();
  }

  show("label");
}

void boot();
