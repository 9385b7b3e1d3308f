// Application shell: run selector, stop control, tab routing, event loop.

import { EngineClient } from "./api.js";
import { rootName, scaleParents } from "./graph.js";
import { EventLoop } from "./poll.js";
import {
  clampToSnapshot,
  initialState,
  openDetails,
  selectChain,
  selectRun,
  selectTab,
  selectVariable,
  toggleWarning,
  type Tab,
  type ViewState,
} from "./state.js";
import type { Callbacks, DetailsData, LiveData } from "./views.js";
import { renderDetailsView, renderLiveView, renderModelView, renderWarningsView } from "./views.js";
import type { Descriptor, PairData, RunInfo, WarningFeed } from "./types.js";

const engineBase = new URLSearchParams(location.search).get("engine") ?? "";
const client = new EngineClient(engineBase);

let state: ViewState = initialState();
let loop: EventLoop | null = null;
let descriptor: Descriptor | null = null;
let info: RunInfo | null = null;
let feed: WarningFeed = { new: [], persisting: [], resolved: [] };

const app = document.getElementById("app")!;
const header = document.createElement("div");
header.className = "header";
const runSelect = document.createElement("select");
runSelect.className = "run-select";
const statusBadge = document.createElement("span");
statusBadge.className = "status-badge";
const stopButton = document.createElement("button");
stopButton.className = "stop-button";
stopButton.textContent = "Stop inference";
const tabBar = document.createElement("div");
tabBar.className = "tab-bar";
const panel = document.createElement("div");
panel.className = "panel";
header.append(runSelect, statusBadge, stopButton);
app.append(header, tabBar, panel);

const TABS: Tab[] = ["model", "live", "warnings"];

runSelect.addEventListener("change", () => {
  state = selectRun(state, runSelect.value);
  void switchRun();
});

stopButton.addEventListener("click", () => {
  if (!state.runId) return;
  void client.stop(state.runId).then(() => refresh(new Set(["progress"])));
});

const callbacks: Callbacks = {
  onSelectVariable(name) {
    state = selectVariable(state, name);
    void render();
  },
  onSelectChain(chain) {
    state = selectChain(state, chain);
    void render();
  },
  onOpenDetails(name) {
    state = openDetails(state, name);
    void render();
  },
  onToggleWarning(id) {
    state = toggleWarning(state, id);
    void render();
  },
};

function renderTabs(): void {
  tabBar.replaceChildren();
  for (const tab of TABS) {
    const b = document.createElement("button");
    b.className = "tab" + (tab === state.tab ? " active" : "");
    b.textContent = { model: "Model", live: "Live Debugging", warnings: "Warnings" }[tab];
    if (tab === "warnings") {
      const n = feed.new.length + feed.persisting.length;
      if (n > 0) b.textContent += ` (${n})`;
    }
    b.addEventListener("click", () => {
      state = selectTab(state, tab);
      void render();
    });
    tabBar.appendChild(b);
  }
}

async function refreshRunList(): Promise<void> {
  const { runs } = await client.listRuns();
  runSelect.replaceChildren();
  for (const run of runs) {
    const opt = document.createElement("option");
    opt.value = run.run_id;
    opt.textContent = `${run.run_id} [${run.status}]`;
    runSelect.appendChild(opt);
  }
  const ids = runs.map((r) => r.run_id);
  state = clampToSnapshot(state, ids, variableNames(), info?.metadata.n_chains ?? 0);
  if (state.runId) runSelect.value = state.runId;
}

function variableNames(): string[] {
  if (!descriptor) return [];
  const out: string[] = [];
  for (const v of descriptor.variables) {
    if (v.kind === "observed") continue;
    const size = v.shape.reduce((a, b) => a * b, 1);
    if (v.shape.length === 0) out.push(v.name);
    else for (let i = 0; i < size; i++) out.push(`${v.name}[${i}]`);
  }
  return out;
}

async function switchRun(): Promise<void> {
  if (!state.runId) return;
  descriptor = await client.model(state.runId);
  info = await client.runInfo(state.runId);
  feed = await client.warnings(state.runId);
  loop?.stop();
  loop = new EventLoop(client, state.runId, refresh, 20);
  void loop.run();
  await render();
}

async function refresh(kinds: Set<string>): Promise<void> {
  if (!state.runId) return;
  if (kinds.has("progress")) info = await client.runInfo(state.runId);
  if (kinds.has("warning-diff")) feed = await client.warnings(state.runId);
  await render();
}

async function render(): Promise<void> {
  if (!state.runId || !descriptor || !info) {
    panel.replaceChildren(document.createTextNode("no runs yet"));
    return;
  }
  state = clampToSnapshot(
    state,
    Array.from(runSelect.options).map((o) => o.value),
    variableNames(),
    info.metadata.n_chains,
  );
  statusBadge.textContent = info.status;
  statusBadge.className = `status-badge status-${info.status}`;
  stopButton.toggleAttribute("disabled", info.status !== "running");
  renderTabs();

  const runId = state.runId;
  if (runId === null) {
    panel.replaceChildren(document.createTextNode("no runs yet"));
    return;
  }
  if (state.detailsVariable) {
    const data = await loadDetails(runId, state.detailsVariable);
    renderDetailsView(panel, state, data, callbacks);
    return;
  }
  if (state.tab === "model") {
    renderModelView(panel, descriptor);
  } else if (state.tab === "warnings") {
    renderWarningsView(panel, state, feed, callbacks);
  } else {
    const data = await loadLive(runId);
    renderLiveView(panel, state, data, callbacks);
  }
}

async function loadLive(runId: string): Promise<LiveData> {
  const chain = state.chain === "ALL" ? undefined : state.chain;
  const [stats, trace, histogram] = await Promise.all([
    client.stats(runId, state.variable ? { variable: state.variable } : {}),
    state.variable ? client.trace(runId, state.variable, chain) : Promise.resolve(null),
    state.variable ? client.histogram(runId, state.variable, chain) : Promise.resolve(null),
  ]);
  return { info: info!, variables: variableNames(), statsRows: stats.rows, trace, histogram };
}

async function loadDetails(runId: string, variable: string): Promise<DetailsData> {
  const chain = state.chain === "ALL" ? undefined : state.chain;
  const [trace, histogram, rank] = await Promise.all([
    client.trace(runId, variable, chain),
    client.histogram(runId, variable, chain),
    client.rank(runId, variable),
  ]);
  const pairs: { parent: string; data: PairData }[] = [];
  for (const parent of scaleParents(descriptor!, rootName(variable))) {
    const direct = descriptor!.edges.find((e) => e.child === rootName(variable) && e.slot === "scale");
    const x = direct ? direct.parent : parent;
    pairs.push({ parent, data: await client.pair(runId, x, variable, 4) });
  }
  return { descriptor: descriptor!, trace, histogram, rank, pairs };
}

async function boot(): Promise<void> {
  await refreshRunList();
  if (state.runId) await switchRun();
  else panel.replaceChildren(document.createTextNode("no runs yet — start a demo or attach a sampler"));
  setInterval(() => void refreshRunList(), 5000);
}

void boot();
