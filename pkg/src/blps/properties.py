"""Property evaluation: computable (CF), traceable (TF), accessible (AF/NAF) sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .errors import UnknownIndex
from .flow import FlowNode, analyze_paths, backward_slice, build_flow, entry_node
from .model import BF, ElementIndex, ElementKind, LogicModel


@dataclass(frozen=True)
class CostModel:
    default: int = 1
    overrides: tuple[tuple[str, int], ...] = ()  # (kind prefix, weight), sorted

    def __post_init__(self):
        if self.default < 1 or any(w < 1 for _, w in self.overrides):
            raise ValueError("cost weights must be >= 1")

    @classmethod
    def of(cls, default: int = 1, **weights: int) -> CostModel:
        return cls(default, tuple(sorted(weights.items())))

    def weight(self, kind: ElementKind | None) -> int:
        if kind is not None:
            for k, w in self.overrides:
                if k == kind.prefix:
                    return w
        return self.default

    def node_weight(self, node: FlowNode) -> int:
        return self.weight(node.element_kind)

    def scaled(self, factor: int) -> CostModel:
        return CostModel(self.default * factor, tuple((k, w * factor) for k, w in self.overrides))


@dataclass(frozen=True)
class PropertySets:
    cf: frozenset[ElementIndex] = frozenset()
    tf: frozenset[ElementIndex] = frozenset()
    af: frozenset[ElementIndex] = frozenset()
    naf: frozenset[ElementIndex] = frozenset()
    total_cost: int = 0


def eval_computability(model: LogicModel, cost_model: CostModel | None = None,
                       budget: int = 100) -> tuple[frozenset[ElementIndex], int]:
    """Elements whose every path reaches a terminal within ``budget``, and the
    heaviest path cost over the service entries."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    cost_model = cost_model or CostModel()
    graph = build_flow(model)
    facts = analyze_paths(graph, cost_model.node_weight)
    cf = set()
    for e in model.elements():
        f = facts.get(FlowNode.concrete(e.index))
        if f is not None and not f.has_cycle and not f.dead_end and f.cost is not None and f.cost <= budget:
            cf.add(e.index)
    total = 0
    for svc in model.services:
        f = facts.get(entry_node(svc))
        if f is not None and f.cost is not None and not f.dead_end:
            total = max(total, f.cost)
    return frozenset(cf), total


def eval_traceability(model: LogicModel, trace_vars: Iterable[str]) -> frozenset[ElementIndex]:
    return frozenset(backward_slice(model, build_flow(model), trace_vars))


def declared_accessible(model: LogicModel, contract) -> frozenset[ElementIndex]:
    """Contract AF entries that concern services of ``model``; raises on dangling ones."""
    out = set()
    for idx in sorted(contract.accessible):
        svc = model.by_name.get(idx.service)
        if svc is None:
            continue  # a contract may cover partners outside this model
        if idx.local not in svc.table:
            raise UnknownIndex(str(idx))
        out.add(idx)
    return frozenset(out)


def eval_accessibility(model: LogicModel, contract) -> tuple[frozenset[ElementIndex], frozenset[ElementIndex]]:
    af = declared_accessible(model, contract)
    naf = frozenset(e.index for e in model.elements() if e.index not in af)
    return af, naf


def known_variables(model: LogicModel) -> set[str]:
    out: set[str] = set()
    for e in model.elements():
        out |= e.defines() | e.reads()
    return out


def evaluate_all(model: LogicModel, contract) -> PropertySets:
    """All property sets under one contract.

    Trace variables the model never mentions are skipped, so a contract
    written for an integrated service can be applied to each partner alone.
    """
    cf, cost = eval_computability(model, contract.cost_model, contract.budget)
    traced = set(contract.trace_vars) & known_variables(model)
    tf = eval_traceability(model, traced) if traced else frozenset()
    af, naf = eval_accessibility(model, contract)
    return PropertySets(cf, tf, af, naf, cost)


def listing_order(model: LogicModel, indices: Iterable[ElementIndex]) -> list[ElementIndex]:
    """Order used for property lists: functions first (sorted by label within
    each service), then rules in document order; services in model order."""
    wanted = set(indices)
    functions: list[ElementIndex] = []
    rules: list[ElementIndex] = []
    for svc in model.services:
        functions.extend(sorted((e.index for e in svc.elements if e.kind is BF and e.index in wanted),
                                key=lambda i: i.local))
        rules.extend(e.index for e in svc.elements if e.kind is not BF and e.index in wanted)
    return functions + rules


def local_list(model: LogicModel, indices: Iterable[ElementIndex]) -> list[str]:
    return [i.local for i in listing_order(model, indices)]
