"""Build a wire model descriptor from a PPL model object.

The adapter consumes a small structural protocol rather than any single
PPL's internals: the model exposes ``variables()`` yielding objects with

    name          str
    kind          "latent" | "observed" | "deterministic"
    distribution  str | None            (None for deterministic)
    shape         tuple[int, ...]       (() for scalars)
    params        dict[str, object]     distribution kwargs; values that are
                                        variable names become edges
    parents       list[str]             inputs of a deterministic variable
    support       optional "real"/"positive"/"other"
    source_span   optional (file, line_start, line_end)

Parameter-slot roles are taken from an explicit mapping table and only
for distributions whose constructor argument names unambiguously mark
location or scale; anything else is reported as slot "other".
"""
from __future__ import annotations

from typing import Iterable, Optional

# (distribution, parameter name) -> edge slot; deliberately conservative
SLOT_TABLE: dict[tuple[str, str], str] = {
    ("Normal", "mu"): "location",
    ("Normal", "sigma"): "scale",
    ("Normal", "tau"): "other",  # precision parameterizations are ambiguous
    ("StudentT", "mu"): "location",
    ("StudentT", "sigma"): "scale",
    ("StudentT", "nu"): "shape_param",
    ("Cauchy", "alpha"): "location",
    ("Cauchy", "beta"): "scale",
    ("HalfCauchy", "beta"): "scale",
    ("HalfNormal", "sigma"): "scale",
    ("Laplace", "mu"): "location",
    ("Laplace", "b"): "scale",
    ("LogNormal", "mu"): "location",
    ("LogNormal", "sigma"): "scale",
    ("Uniform", "lower"): "other",
    ("Uniform", "upper"): "other",
    ("Exponential", "lam"): "other",
    ("Gamma", "alpha"): "shape_param",
    ("Gamma", "beta"): "other",
    ("Beta", "alpha"): "shape_param",
    ("Beta", "beta"): "shape_param",
}

POSITIVE_DISTRIBUTIONS = {"HalfCauchy", "HalfNormal", "Exponential", "Gamma", "LogNormal"}


def slot_for(distribution: Optional[str], param: str) -> str:
    if distribution is None:
        return "deterministic_input"
    return SLOT_TABLE.get((distribution, param), "other")


def _support_of(var) -> str:
    support = getattr(var, "support", None)
    if support in ("real", "positive", "other"):
        return support
    if getattr(var, "distribution", None) in POSITIVE_DISTRIBUTIONS:
        return "positive"
    return "real"


def _span_of(var) -> Optional[dict]:
    span = getattr(var, "source_span", None)
    if span is None:
        return None
    file, line_start, line_end = span
    return {"file": file, "line_start": int(line_start), "line_end": int(line_end)}


def build_descriptor(model) -> dict:
    """Translate the model graph into the wire descriptor payload."""
    variables = []
    edges = []
    names = {v.name for v in model.variables()}
    for var in model.variables():
        variables.append({
            "name": var.name,
            "kind": var.kind,
            "distribution": getattr(var, "distribution", None),
            "shape": list(getattr(var, "shape", ()) or ()),
            "support": _support_of(var),
            "source_span": _span_of(var),
        })
        if var.kind == "deterministic":
            for parent in getattr(var, "parents", []) or []:
                if parent in names:
                    edges.append({"parent": parent, "child": var.name,
                                  "slot": "deterministic_input"})
            continue
        for param, value in (getattr(var, "params", {}) or {}).items():
            if isinstance(value, str) and value in names:
                edges.append({"parent": value, "child": var.name,
                              "slot": slot_for(var.distribution, param)})
    return {"variables": variables, "edges": edges}


def sampled_names(model) -> list[str]:
    return [v.name for v in model.variables() if v.kind in ("latent", "deterministic")]
