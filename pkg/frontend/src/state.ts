// View-state container with invariant clamping: selections must always
// reference entities present in the latest fetched snapshot.

export type Tab = "model" | "live" | "warnings";

export interface ViewState {
  runId: string | null;
  tab: Tab;
  variable: string | null;
  chain: "ALL" | number;
  detailsVariable: string | null;
  expandedWarning: string | null;
}

export function initialState(): ViewState {
  return {
    runId: null,
    tab: "live",
    variable: null,
    chain: "ALL",
    detailsVariable: null,
    expandedWarning: null,
  };
}

/** Reconcile selections against what the engine currently reports. */
export function clampToSnapshot(
  state: ViewState,
  runIds: string[],
  variables: string[],
  nChains: number,
): ViewState {
  const next = { ...state };
  if (next.runId === null || !runIds.includes(next.runId)) {
    next.runId = runIds.length > 0 ? runIds[runIds.length - 1] : null;
    next.detailsVariable = null;
    next.expandedWarning = null;
    next.variable = null;
  }
  if (next.variable === null || !variables.includes(next.variable)) {
    next.variable = variables.length > 0 ? variables[0] : null;
  }
  if (next.chain !== "ALL" && (next.chain < 0 || next.chain >= nChains)) {
    next.chain = "ALL";
  }
  if (next.detailsVariable !== null && !variables.includes(next.detailsVariable)) {
    next.detailsVariable = null;
  }
  return next;
}

export function selectRun(state: ViewState, runId: string): ViewState {
  return { ...state, runId, variable: null, detailsVariable: null, expandedWarning: null };
}

export function selectTab(state: ViewState, tab: Tab): ViewState {
  return { ...state, tab };
}

export function selectVariable(state: ViewState, variable: string): ViewState {
  return { ...state, variable };
}

export function selectChain(state: ViewState, chain: "ALL" | number): ViewState {
  return { ...state, chain };
}

export function openDetails(state: ViewState, variable: string | null): ViewState {
  return { ...state, detailsVariable: variable };
}

export function toggleWarning(state: ViewState, id: string): ViewState {
  return { ...state, expandedWarning: state.expandedWarning === id ? null : id };
}
