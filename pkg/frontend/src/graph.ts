// Model-graph helpers: layered layout for the DAG view and scale-parent
// lookup (which drives the conditional pair plots in the details view).

import type { Descriptor, WireEdge } from "./types.js";

export interface NodeLayout {
  name: string;
  kind: string;
  layer: number;
  row: number;
}

/** Longest-path layering: parents always sit in an earlier layer. */
export function layoutGraph(descriptor: Descriptor): NodeLayout[] {
  const depth = new Map<string, number>();
  const parents = new Map<string, string[]>();
  for (const v of descriptor.variables) parents.set(v.name, []);
  for (const e of descriptor.edges) parents.get(e.child)?.push(e.parent);

  const resolve = (name: string, seen: Set<string>): number => {
    if (depth.has(name)) return depth.get(name)!;
    if (seen.has(name)) return 0; // defensive: descriptor is validated acyclic upstream
    seen.add(name);
    const ps = parents.get(name) ?? [];
    const d = ps.length === 0 ? 0 : Math.max(...ps.map((p) => resolve(p, seen))) + 1;
    depth.set(name, d);
    return d;
  };

  const rows = new Map<number, number>();
  return descriptor.variables.map((v) => {
    const layer = resolve(v.name, new Set());
    const row = rows.get(layer) ?? 0;
    rows.set(layer, row + 1);
    return { name: v.name, kind: v.kind, layer, row };
  });
}

/**
 * Latent ancestors that control `variable`'s scale, walking scale edges
 * backwards through deterministic nodes — the statically identified
 * variance dependencies shown as pair plots.
 */
export function scaleParents(descriptor: Descriptor, variable: string): string[] {
  const kind = new Map(descriptor.variables.map((v) => [v.name, v.kind]));
  const out: string[] = [];
  const intoScale: WireEdge[] = descriptor.edges.filter(
    (e) => e.child === variable && e.slot === "scale",
  );
  const queue = intoScale.map((e) => e.parent);
  const seen = new Set(queue);
  while (queue.length > 0) {
    const node = queue.shift()!;
    if (kind.get(node) === "latent") {
      if (!out.includes(node)) out.push(node);
      continue;
    }
    if (kind.get(node) !== "deterministic") continue;
    for (const e of descriptor.edges) {
      if (e.child === node && e.slot === "deterministic_input" && !seen.has(e.parent)) {
        seen.add(e.parent);
        queue.push(e.parent);
      }
    }
  }
  return out.sort();
}

/** The variable wired directly into `variable`'s scale slot, if any. */
export function directScaleInput(descriptor: Descriptor, variable: string): string | null {
  const edge = descriptor.edges.find((e) => e.child === variable && e.slot === "scale");
  return edge ? edge.parent : null;
}

/** Root name for a flat series: "theta[3]" -> "theta". */
export function rootName(flat: string): string {
  const m = flat.match(/^(.*)\[\d+\]$/);
  return m ? m[1] : flat;
}
