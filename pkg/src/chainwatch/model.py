"""Model descriptors: the probabilistic model as a typed dependency graph.

A descriptor carries everything the engine needs to know about a model
without seeing its source: variable declarations (kind, distribution,
shape, support, source span) and slot-annotated dependency edges. The
``scale`` slot is what static funnel detection reads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import DescriptorError

VARIABLE_KINDS = ("latent", "observed", "deterministic")
SUPPORTS = ("real", "positive", "other")
EDGE_SLOTS = ("location", "scale", "shape_param", "other", "deterministic_input")


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line_start: int
    line_end: int

    def validate(self) -> None:
        if self.line_start > self.line_end:
            raise DescriptorError(
                f"source span {self.file}:{self.line_start}-{self.line_end} has line_start > line_end"
            )


@dataclass(frozen=True)
class VariableDecl:
    name: str
    kind: str
    distribution: Optional[str] = None
    shape: tuple[int, ...] = ()
    support: str = "real"
    source_span: Optional[SourceSpan] = None

    @property
    def flat_size(self) -> int:
        return math.prod(self.shape) if self.shape else 1

    def flat_names(self) -> list[str]:
        """Row-major scalar series names: shape [8] -> name[0]..name[7], scalar -> name."""
        if not self.shape:
            return [self.name]
        return [f"{self.name}[{i}]" for i in range(self.flat_size)]

    def validate(self) -> None:
        if self.kind not in VARIABLE_KINDS:
            raise DescriptorError(f"variable {self.name!r}: unknown kind {self.kind!r}")
        if self.support not in SUPPORTS:
            raise DescriptorError(f"variable {self.name!r}: unknown support {self.support!r}")
        if any(int(s) < 1 for s in self.shape):
            raise DescriptorError(f"variable {self.name!r}: shape entries must be >= 1, got {self.shape}")
        if self.source_span is not None:
            self.source_span.validate()


@dataclass(frozen=True)
class DependencyEdge:
    parent: str
    child: str
    slot: str

    def validate(self) -> None:
        if self.slot not in EDGE_SLOTS:
            raise DescriptorError(f"edge {self.parent}->{self.child}: unknown slot {self.slot!r}")


@dataclass(frozen=True)
class ModelDescriptor:
    variables: tuple[VariableDecl, ...]
    edges: tuple[DependencyEdge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {v.name: v for v in self.variables})

    def variable(self, name: str) -> VariableDecl:
        return self._by_name[name]

    def has_variable(self, name: str) -> bool:
        return name in self._by_name

    @property
    def latent_names(self) -> list[str]:
        return [v.name for v in self.variables if v.kind == "latent"]

    @property
    def sampled_names(self) -> list[str]:
        """Names the wire may carry draws for: latent plus deterministic."""
        return [v.name for v in self.variables if v.kind in ("latent", "deterministic")]

    def flat_series_names(self) -> list[str]:
        """All scalar series for sampled variables, in declaration order."""
        out: list[str] = []
        for v in self.variables:
            if v.kind in ("latent", "deterministic"):
                out.extend(v.flat_names())
        return out

    def parents_of(self, child: str, slot: Optional[str] = None) -> list[DependencyEdge]:
        return [e for e in self.edges if e.child == child and (slot is None or e.slot == slot)]

    def children_of(self, parent: str) -> list[DependencyEdge]:
        return [e for e in self.edges if e.parent == parent]

    def validate(self) -> None:
        seen = set()
        for v in self.variables:
            v.validate()
            if v.name in seen:
                raise DescriptorError(f"duplicate variable name {v.name!r}")
            seen.add(v.name)
        for e in self.edges:
            e.validate()
            for endpoint in (e.parent, e.child):
                if endpoint not in seen:
                    raise DescriptorError(f"unknown variable {endpoint!r} in edge {e.parent}->{e.child}")
            child_kind = self._by_name[e.child].kind
            if (e.slot == "deterministic_input") != (child_kind == "deterministic"):
                raise DescriptorError(
                    f"edge {e.parent}->{e.child}: slot {e.slot!r} inconsistent with child kind {child_kind!r}"
                )
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        # Only stochastic+deterministic nodes constrain ordering; observed nodes may sit anywhere.
        adj: dict[str, list[str]] = {v.name: [] for v in self.variables}
        for e in self.edges:
            adj[e.parent].append(e.child)
        state: dict[str, int] = {}  # 0 visiting, 1 done

        def visit(node: str, stack: list[str]) -> None:
            if state.get(node) == 1:
                return
            if state.get(node) == 0:
                cycle = stack[stack.index(node):] + [node]
                raise DescriptorError("dependency cycle: " + " -> ".join(cycle))
            state[node] = 0
            stack.append(node)
            for nxt in adj[node]:
                visit(nxt, stack)
            stack.pop()
            state[node] = 1

        for v in self.variables:
            visit(v.name, [])


def split_flat_name(flat: str) -> tuple[str, Optional[int]]:
    """Inverse of flat naming: "theta[3]" -> ("theta", 3), "mu" -> ("mu", None)."""
    if flat.endswith("]") and "[" in flat:
        root, _, idx = flat[:-1].rpartition("[")
        if idx.isdigit():
            return root, int(idx)
    return flat, None
