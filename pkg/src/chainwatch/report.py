"""Deterministic run reports assembled from wire payloads.

Both the `report` command (fetching over HTTP) and `replay` (building
payloads locally) feed the same renderer, so a recorded log replayed
twice prints byte-identical output.
"""
from __future__ import annotations

import json


def _fmt(x, width: int = 10) -> str:
    if x is None:
        return "-".rjust(width)
    if isinstance(x, float):
        return f"{x:.4g}".rjust(width)
    return str(x).rjust(width)


def build_report(run_info: dict, stats_rows: list[dict], warnings: dict, fmt: str = "text") -> str:
    active = warnings.get("new", []) + warnings.get("persisting", [])
    active = sorted(active, key=lambda w: (w["severity"], w["kind"], w["id"]))
    resolved = sorted(warnings.get("resolved", []), key=lambda w: (w["kind"], w["id"]))
    cross = [r for r in stats_rows if r["chain"] == "ALL"]
    per_chain = [r for r in stats_rows if r["chain"] != "ALL"]

    if fmt == "json":
        return json.dumps(
            {
                "run": run_info,
                "stats": cross,
                "per_chain": per_chain,
                "warnings": {"active": active, "resolved": resolved},
            },
            indent=2,
            sort_keys=True,
        )

    md = run_info.get("metadata", {})
    lines = [
        f"run {run_info['run_id']} [{run_info['status']}] "
        f"algorithm={md.get('algorithm')} chains={md.get('n_chains')}",
    ]
    progress = run_info.get("progress", {})
    if progress:
        done = ", ".join(f"chain {c}: {p.get('sample', 0)} sample / {p.get('tune', 0)} tune"
                         for c, p in sorted(progress.items()))
        lines.append(f"draws ingested: {done}")
    lines.append("")
    lines.append(f"{'variable':<14}{'n':>8}{'mean':>11}{'sd':>11}{'rhat':>11}{'ess_bulk':>11}")
    for r in cross:
        lines.append(
            f"{r['variable']:<14}{r['n']:>8}{_fmt(r['mean'], 11)}{_fmt(r['sd'], 11)}"
            f"{_fmt(r['rhat'], 11)}{_fmt(r['ess_bulk'], 11)}"
        )
    rates = {r["chain"]: r["acceptance_rate"] for r in per_chain if r["acceptance_rate"] is not None}
    if rates:
        shown = ", ".join(f"chain {c}: {rates[c]:.3f}" for c in sorted(rates, key=int))
        lines.append("")
        lines.append(f"acceptance (windowed): {shown}")
    lines.append("")
    lines.append(f"warnings: {len(active)} active, {len(resolved)} resolved")
    for w in active:
        lines.extend(_warning_block(w))
    for w in resolved:
        lines.append(f"  [resolved] {w['kind']} — {_variables_text(w)}")
    return "\n".join(lines) + "\n"


def _variables_text(w: dict) -> str:
    parts = []
    for v in w.get("variables", []):
        if v.get("indices"):
            parts.append(f"{v['name']}[{','.join(map(str, v['indices']))}]")
        else:
            parts.append(v["name"])
    if not parts and w.get("chains"):
        parts.append("chains " + ",".join(map(str, w["chains"])))
    return ", ".join(parts) if parts else "run"


def _warning_block(w: dict) -> list[str]:
    lines = [f"  [{w['severity']}] {w['kind']} — {_variables_text(w)}"]
    lines.append(f"      {w['message']}")
    lines.append(f"      suggestion: {w['suggestion']}")
    if w.get("suggested_code"):
        for code_line in w["suggested_code"].splitlines():
            lines.append(f"        | {code_line}")
    span = w.get("source_span")
    if span:
        lines.append(f"      source: {span['file']}:{span['line_start']}-{span['line_end']}")
    return lines
