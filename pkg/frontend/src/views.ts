// DOM builders for the four panels: model graph, live debugging,
// details, warnings. Pure functions of wire data + view state; all
// interaction is delivered through the callbacks argument.

import { layoutGraph, rootName, scaleParents } from "./graph.js";
import { CHAIN_COLORS, drawHistogram, drawPair, drawRank, drawTrace } from "./plots.js";
import type { ViewState } from "./state.js";
import type {
  Descriptor,
  HistogramData,
  PairData,
  RankData,
  RunInfo,
  StatsRow,
  TraceData,
  Warning,
  WarningFeed,
} from "./types.js";

export interface Callbacks {
  onSelectVariable(name: string): void;
  onSelectChain(chain: "ALL" | number): void;
  onOpenDetails(name: string | null): void;
  onToggleWarning(id: string): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function canvas(cls: string, width = 420, height = 200): HTMLCanvasElement {
  const c = el("canvas", cls);
  c.width = width;
  c.height = height;
  return c;
}

function drawable(c: HTMLCanvasElement): boolean {
  return typeof c.getContext === "function" && c.getContext("2d") !== null;
}

// --- model view -----------------------------------------------------------------

const KIND_FILL: Record<string, string> = {
  latent: "#e8f0fe",
  deterministic: "#fef7e0",
  observed: "#e6e6e6",
};

export function renderModelView(container: HTMLElement, descriptor: Descriptor): void {
  container.replaceChildren();
  const nodes = layoutGraph(descriptor);
  const colW = 170;
  const rowH = 64;
  const nodeW = 120;
  const nodeH = 36;
  const maxLayer = Math.max(0, ...nodes.map((n) => n.layer));
  const maxRow = Math.max(0, ...nodes.map((n) => n.row));
  const svgNS = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNS, "svg");
  svg.setAttribute("width", String((maxLayer + 1) * colW + 40));
  svg.setAttribute("height", String((maxRow + 1) * rowH + 40));
  svg.setAttribute("class", "model-graph");

  const pos = new Map(nodes.map((n) => [n.name, n]));
  const cx = (n: { layer: number }) => 20 + n.layer * colW + nodeW / 2;
  const cy = (n: { row: number }) => 20 + n.row * rowH + nodeH / 2;

  for (const e of descriptor.edges) {
    const a = pos.get(e.parent);
    const b = pos.get(e.child);
    if (!a || !b) continue;
    const line = document.createElementNS(svgNS, "line");
    line.setAttribute("x1", String(cx(a)));
    line.setAttribute("y1", String(cy(a)));
    line.setAttribute("x2", String(cx(b)));
    line.setAttribute("y2", String(cy(b)));
    line.setAttribute("class", `edge edge-${e.slot}`);
    line.setAttribute("stroke", e.slot === "scale" ? "#d62728" : "#999");
    line.setAttribute("stroke-width", e.slot === "scale" ? "2" : "1");
    svg.appendChild(line);
    const label = document.createElementNS(svgNS, "text");
    label.setAttribute("x", String((cx(a) + cx(b)) / 2));
    label.setAttribute("y", String((cy(a) + cy(b)) / 2 - 4));
    label.setAttribute("class", "edge-label");
    label.setAttribute("font-size", "9");
    label.setAttribute("fill", e.slot === "scale" ? "#d62728" : "#777");
    label.textContent = e.slot;
    svg.appendChild(label);
  }

  for (const v of descriptor.variables) {
    const n = pos.get(v.name)!;
    const g = document.createElementNS(svgNS, "g");
    const rect = document.createElementNS(svgNS, "rect");
    rect.setAttribute("x", String(cx(n) - nodeW / 2));
    rect.setAttribute("y", String(cy(n) - nodeH / 2));
    rect.setAttribute("width", String(nodeW));
    rect.setAttribute("height", String(nodeH));
    rect.setAttribute("rx", "6");
    rect.setAttribute("fill", KIND_FILL[v.kind] ?? "#fff");
    rect.setAttribute("stroke", "#555");
    rect.setAttribute("class", `node node-${v.kind}`);
    g.appendChild(rect);
    const label = document.createElementNS(svgNS, "text");
    label.setAttribute("x", String(cx(n)));
    label.setAttribute("y", String(cy(n) + 1));
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("font-size", "11");
    const shape = v.shape.length > 0 ? `[${v.shape.join(",")}]` : "";
    const dist = v.distribution ? ` ~ ${v.distribution}` : "";
    label.textContent = `${v.name}${shape}${dist}`;
    g.appendChild(label);
    if (v.source_span) {
      const src = document.createElementNS(svgNS, "text");
      src.setAttribute("x", String(cx(n)));
      src.setAttribute("y", String(cy(n) + 13));
      src.setAttribute("text-anchor", "middle");
      src.setAttribute("font-size", "8");
      src.setAttribute("fill", "#888");
      src.textContent = `${v.source_span.file}:${v.source_span.line_start}`;
      g.appendChild(src);
    }
    svg.appendChild(g);
  }
  container.appendChild(svg);
}

// --- live view ------------------------------------------------------------------

export interface LiveData {
  info: RunInfo;
  variables: string[];
  statsRows: StatsRow[];
  trace: TraceData | null;
  histogram: HistogramData | null;
}

function fmtStat(v: number | null, digits = 3): string {
  if (v === null || v === undefined) return "-";
  return Number(v).toFixed(digits);
}

export function renderLiveView(
  container: HTMLElement,
  state: ViewState,
  data: LiveData,
  cb: Callbacks,
): void {
  container.replaceChildren();

  const tabs = el("div", "variable-tabs");
  for (const name of data.variables) {
    const b = el("button", "variable-tab" + (name === state.variable ? " active" : ""), name);
    b.addEventListener("click", () => cb.onSelectVariable(name));
    tabs.appendChild(b);
  }
  container.appendChild(tabs);

  const controls = el("div", "live-controls");
  const chainSel = el("select", "chain-select");
  const optAll = el("option", undefined, "ALL");
  optAll.setAttribute("value", "ALL");
  chainSel.appendChild(optAll);
  for (let c = 0; c < data.info.metadata.n_chains; c++) {
    const opt = el("option", undefined, `chain ${c}`);
    opt.setAttribute("value", String(c));
    chainSel.appendChild(opt);
  }
  chainSel.value = String(state.chain);
  chainSel.addEventListener("change", () => {
    cb.onSelectChain(chainSel.value === "ALL" ? "ALL" : Number(chainSel.value));
  });
  controls.appendChild(chainSel);

  if (state.variable) {
    const details = el("button", "details-button", "Details");
    details.addEventListener("click", () => cb.onOpenDetails(state.variable));
    controls.appendChild(details);
  }
  container.appendChild(controls);

  const row = data.statsRows.find(
    (r) => r.variable === state.variable && (state.chain === "ALL" ? r.chain === "ALL" : r.chain === state.chain),
  );
  const summary = el("div", "stat-summary");
  if (row) {
    const bits = [
      `n=${row.n}`,
      `mean=${fmtStat(row.mean)}`,
      `sd=${fmtStat(row.sd)}`,
      `rhat=${fmtStat(row.rhat, 4)}`,
      `ess_bulk=${fmtStat(row.ess_bulk, 0)}`,
    ];
    if (row.acceptance_rate !== null) bits.push(`acceptance=${fmtStat(row.acceptance_rate)}`);
    summary.textContent = bits.join("   ");
  } else {
    summary.textContent = "no data yet";
  }
  container.appendChild(summary);

  const plots = el("div", "plot-row");
  const traceCanvas = canvas("trace-plot");
  const histCanvas = canvas("histogram-plot");
  plots.append(traceCanvas, histCanvas);
  container.appendChild(plots);
  if (data.trace && drawable(traceCanvas)) drawTrace(traceCanvas, data.trace);
  if (data.histogram && drawable(histCanvas)) drawHistogram(histCanvas, data.histogram);

  const legend = el("div", "chain-legend");
  for (let c = 0; c < data.info.metadata.n_chains; c++) {
    const item = el("span", "legend-item", `chain ${c}`);
    item.style.color = CHAIN_COLORS[c % CHAIN_COLORS.length];
    legend.appendChild(item);
  }
  container.appendChild(legend);
}

// --- details view ---------------------------------------------------------------

export interface DetailsData {
  descriptor: Descriptor;
  trace: TraceData | null;
  histogram: HistogramData | null;
  rank: RankData | null;
  pairs: { parent: string; data: PairData }[];
}

export function renderDetailsView(
  container: HTMLElement,
  state: ViewState,
  data: DetailsData,
  cb: Callbacks,
): void {
  container.replaceChildren();
  const head = el("div", "details-head");
  head.appendChild(el("h3", undefined, `Details: ${state.detailsVariable}`));
  const close = el("button", "close-details", "Back");
  close.addEventListener("click", () => cb.onOpenDetails(null));
  head.appendChild(close);
  container.appendChild(head);

  const grid = el("div", "details-grid");
  const add = (title: string, c: HTMLCanvasElement) => {
    const cell = el("div", "details-cell");
    cell.appendChild(el("h4", undefined, title));
    cell.appendChild(c);
    grid.appendChild(cell);
    return c;
  };
  const t = add("Trace", canvas("trace-plot"));
  if (data.trace && drawable(t)) drawTrace(t, data.trace);
  const h = add("Histogram", canvas("histogram-plot"));
  if (data.histogram && drawable(h)) drawHistogram(h, data.histogram);
  const r = add("Rank histogram", canvas("rank-plot"));
  if (data.rank && drawable(r)) drawRank(r, data.rank);

  const parents = state.detailsVariable
    ? scaleParents(data.descriptor, rootName(state.detailsVariable))
    : [];
  for (const pair of data.pairs) {
    const c = add(`Pair: ${pair.data.x_variable} vs ${pair.data.y_variable}`, canvas("pair-plot"));
    if (drawable(c)) drawPair(c, pair.data);
    if (pair.data.funnel_hint !== null) {
      const hint = el(
        "div",
        "funnel-hint",
        `potential funnel: scale of ${state.detailsVariable} tracks ${pair.parent} ` +
          `(score ${pair.data.funnel_hint.toFixed(2)})`,
      );
      grid.appendChild(hint);
    }
  }
  if (parents.length === 0) {
    grid.appendChild(el("div", "no-pair-note", "no scale dependencies for this variable"));
  }
  container.appendChild(grid);
}

// --- warnings view ----------------------------------------------------------------

const SEVERITY_ORDER: Record<string, number> = { critical: 0, warn: 1, info: 2 };

function variablesText(w: Warning): string {
  const parts = w.variables.map((v) =>
    v.indices.length > 0 ? `${v.name}[${v.indices.join(",")}]` : v.name,
  );
  if (parts.length === 0 && w.chains.length > 0) parts.push(`chains ${w.chains.join(",")}`);
  return parts.join(", ") || "run";
}

export function renderWarningsView(
  container: HTMLElement,
  state: ViewState,
  feed: WarningFeed,
  cb: Callbacks,
): void {
  container.replaceChildren();
  const active = [...feed.new, ...feed.persisting].sort(
    (a, b) =>
      SEVERITY_ORDER[a.severity] - SEVERITY_ORDER[b.severity] ||
      a.kind.localeCompare(b.kind) ||
      a.id.localeCompare(b.id),
  );
  container.appendChild(
    el("div", "warnings-summary", `${active.length} active, ${feed.resolved.length} resolved`),
  );
  const list = el("ul", "warning-list");
  for (const w of active) {
    list.appendChild(renderWarning(w, state.expandedWarning === w.id, cb));
  }
  for (const w of feed.resolved) {
    const item = renderWarning(w, state.expandedWarning === w.id, cb);
    item.classList.add("resolved");
    list.appendChild(item);
  }
  container.appendChild(list);
}

function renderWarning(w: Warning, expanded: boolean, cb: Callbacks): HTMLLIElement {
  const item = el("li", `warning severity-${w.severity}` + (expanded ? " expanded" : ""));
  item.dataset.warningId = w.id;
  const head = el("button", "warning-head");
  head.appendChild(el("span", "warning-kind", w.kind));
  head.appendChild(el("span", "warning-vars", variablesText(w)));
  head.appendChild(el("span", `badge badge-${w.status}`, w.status));
  head.addEventListener("click", () => cb.onToggleWarning(w.id));
  item.appendChild(head);
  if (expanded) {
    const body = el("div", "warning-body");
    body.appendChild(el("p", "warning-message", w.message));
    body.appendChild(el("p", "warning-suggestion", w.suggestion));
    const evidence = Object.entries(w.evidence)
      .map(([k, v]) => `${k}=${v === null ? "-" : Number(v).toFixed(3)}`)
      .join("  ");
    body.appendChild(el("p", "warning-evidence", evidence));
    if (w.suggested_code) {
      body.appendChild(el("pre", "suggested-code", w.suggested_code));
    }
    if (w.source_span) {
      body.appendChild(
        el(
          "p",
          "source-span",
          `source: ${w.source_span.file}:${w.source_span.line_start}-${w.source_span.line_end}`,
        ),
      );
    }
    item.appendChild(body);
  }
  return item;
}
