"""Service integration: rewrite an output into a cross-service invoke, merge
the two models, and check the result against a contract.

Violations are returned as data; only malformed requests (unknown indices,
arity mismatches, mutual invokes) raise.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .errors import ArityMismatch, CycleIntroduced, IntegrationError, UnknownIndex
from .flow import FlowNode, analyze_paths, build_flow, entry_node
from .model import BF, ElementIndex, LogicElement, LogicModel, Param, ServiceDef, Var, qualify, validate_model
from .properties import (
    PropertySets, eval_accessibility, eval_computability, eval_traceability, known_variables,
)

VIOLATION_KINDS = ("AccessViolation", "ComputabilityViolation", "TraceBreak", "InvalidStructure")


@dataclass(frozen=True)
class BindingSpec:
    source: ElementIndex
    target: str
    args: tuple[tuple[str, str], ...]  # (source variable, target parameter)

    def __post_init__(self):
        params = [t for _, t in self.args]
        if len(set(params)) != len(params):
            raise ValueError("binding names a target parameter twice")

    def __str__(self) -> str:
        inner = ",".join(s if s == t else f"{s}:{t}" for s, t in self.args)
        return f"{self.source}->{self.target}({inner})"


_BIND = re.compile(r"\s*([A-Za-z_]\w*)\.([A-Za-z0-9]+)\s*->\s*([A-Za-z_]\w*)\s*\((.*)\)\s*$")
_VAR = re.compile(r"[A-Za-z_]\w*$")


def parse_binding(text: str) -> BindingSpec:
    """Parse ``service.INDEX->target(var1,var2:param2,...)``."""
    m = _BIND.match(text)
    if m is None:
        raise ValueError(f"malformed binding {text!r}")
    args = []
    for part in (p.strip() for p in m.group(4).split(",")) if m.group(4).strip() else ():
        src, _, dst = part.partition(":")
        dst = dst or src
        if not _VAR.match(src) or not _VAR.match(dst):
            raise ValueError(f"malformed binding argument {part!r}")
        args.append((src, dst))
    return BindingSpec(ElementIndex(m.group(1), m.group(2)), m.group(3), tuple(args))


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind} {self.subject}: {self.detail}"


@dataclass(frozen=True)
class IntegrationResult:
    name: str
    merged: LogicModel
    binding: BindingSpec
    properties: PropertySets | None = None
    rewrite_log: tuple[str, ...] = ()
    violations: tuple[Violation, ...] = ()
    sources: tuple[LogicModel, LogicModel] | None = field(default=None, compare=False)
    receive: ElementIndex | None = None

    @property
    def ok(self) -> bool:
        return not self.violations


def _sorted(violations) -> tuple[Violation, ...]:
    return tuple(sorted(set(violations), key=lambda v: (VIOLATION_KINDS.index(v.kind), v.subject, v.detail)))


def _first_get(svc: ServiceDef) -> LogicElement | None:
    return next((e for e in svc.walk() if e.operation == "get"), None)


def _receive_label(svc: ServiceDef) -> str:
    n = 1
    while f"BFrcv{n}" in svc.table:
        n += 1
    return f"BFrcv{n}"


def integrate(model_a: LogicModel, model_b: LogicModel, binding: BindingSpec, contract,
              name: str = "integrated") -> IntegrationResult:
    src_svc = model_a.by_name.get(binding.source.service)
    if src_svc is None or binding.source.local not in src_svc.table:
        raise UnknownIndex(str(binding.source))
    if binding.target not in model_b.by_name:
        raise UnknownIndex(binding.target)
    clash = set(model_a.by_name) & set(model_b.by_name)
    if clash:
        raise IntegrationError(f"both models define service {sorted(clash)[0]}")
    source = src_svc.table[binding.source.local]

    # the partner may only bind through elements the provider declared accessible
    if binding.source not in contract.accessible:
        v = Violation("AccessViolation", str(binding.source),
                      f"{binding.source} is not accessible to {binding.target} under contract {contract.name or '(unnamed)'}")
        merged = LogicModel(model_a.services + model_b.services, model_a.externals | model_b.externals)
        return IntegrationResult(name, merged, binding, None, (), (v,), (model_a, model_b))
    if source.operation != "output":
        v = Violation("InvalidStructure", str(binding.source), f"binding source must be an output element, not {source.operation}")
        merged = LogicModel(model_a.services + model_b.services, model_a.externals | model_b.externals)
        return IntegrationResult(name, merged, binding, None, (), (v,), (model_a, model_b))

    target = model_b.by_name[binding.target]
    for e in model_b.elements():
        if e.operation == "invoke" and e.target in model_a.by_name:
            raise CycleIntroduced(f"{e.index} already invokes {e.target}; mutual invokes are rejected")
    get = _first_get(target)
    get_types = {p.name: p.type for p in get.params} if get else {}
    if get is not None:
        if len(binding.args) != len(get.params):
            raise ArityMismatch(f"binding passes {len(binding.args)} values, {get.index} expects {len(get.params)}")
        unknown = [t for _, t in binding.args if t not in get_types]
        if unknown:
            raise ArityMismatch(f"{get.index} has no parameter {unknown[0]}")
        order = [p.name for p in get.params]
    else:
        order = [t for _, t in binding.args]
    by_param = {t: s for s, t in binding.args}
    src_types: dict[str, str] = {}
    for e in src_svc.elements:
        for p in e.params:
            src_types.setdefault(p.name, p.type)
        if e.result:
            src_types.setdefault(e.result, e.result_type or "double")

    def ptype(param: str) -> str:
        return get_types.get(param) or src_types.get(by_param[param], "string")

    log: list[str] = []
    call = replace(source, operation="invoke", target=binding.target, params=tuple(
        Param(t, ptype(t), Var(by_param[t])) for t in order))
    new_a = src_svc.__class__(src_svc.name, src_svc.roots,
                              tuple(call if e.index == source.index else e for e in src_svc.elements), src_svc.alias)
    log.append(f"rewrote {source.index} output -> invoke {binding.target}")

    rlabel = _receive_label(target)
    rindex = ElementIndex(target.name, rlabel)
    receive = LogicElement(rindex, BF, "receive", params=tuple(Param(t, ptype(t)) for t in order))
    elements = [receive]
    for e in target.elements:
        if get is not None and e.index == get.index:
            e = replace(e, params=tuple(replace(p, value=Var(p.name)) if p.name in by_param else p for p in e.params))
            log.append(f"bound {e.index} parameters to received values")
        elements.append(e)
    new_b = ServiceDef(target.name, (rlabel,) + target.roots, tuple(elements), target.alias)
    log.append(f"inserted receive {rindex}")

    services = tuple(new_a if s.name == src_svc.name else s for s in model_a.services) + \
        tuple(new_b if s.name == target.name else s for s in model_b.services)
    externals = (model_a.externals | model_b.externals) - {s.name for s in services}
    merged = LogicModel(services, frozenset(externals))
    result = IntegrationResult(name, merged, binding, None, tuple(log), (), (model_a, model_b), rindex)
    props = integrated_properties(result, contract)
    result = replace(result, properties=props)
    return replace(result, violations=tuple(validate_integration(result, contract)))


def integrated_properties(result: IntegrationResult, contract) -> PropertySets:
    merged = result.merged
    cf_merged, cost = eval_computability(merged, contract.cost_model, contract.budget)
    cf = cf_merged
    if result.sources is not None:
        union = frozenset()
        for m in result.sources:
            union |= eval_computability(m, contract.cost_model, contract.budget)[0]
        # the call edge keeps termination when every element computable alone still is
        if union <= cf_merged:
            cf = union
    traced = set(contract.trace_vars) & known_variables(merged)
    tf = eval_traceability(merged, traced) if traced else frozenset()
    af, naf = eval_accessibility(merged, contract)
    return PropertySets(cf, tf, af, naf, cost)


def validate_integration(result: IntegrationResult, contract) -> list[Violation]:
    merged = result.merged
    out: list[Violation] = []
    names = set(merged.by_name)

    for e in merged.elements():
        if e.operation == "invoke" and e.target in names and e.target != e.index.service:
            if e.index not in contract.accessible:
                out.append(Violation("AccessViolation", str(e.index),
                                     f"{e.target} binds through {e.index}, which is outside the accessible set"))

    try:
        graph = build_flow(merged)
    except Exception as exc:  # unresolved invoke and the like
        out.append(Violation("InvalidStructure", result.name, str(exc)))
        return list(_sorted(out))
    facts = analyze_paths(graph, contract.cost_model.node_weight)
    for svc in merged.services:
        f = facts.get(entry_node(svc))
        if f is None:
            continue
        if f.has_cycle:
            out.append(Violation("ComputabilityViolation", svc.name, "a cycle is reachable from the entry"))
        elif f.dead_end:
            out.append(Violation("ComputabilityViolation", svc.name, "a path ends without reaching a terminal"))
        elif f.cost > contract.budget:
            out.append(Violation("ComputabilityViolation", svc.name,
                                 f"longest weighted path {f.cost} exceeds budget {contract.budget}"))

    before = set()
    if result.sources is not None:
        for m in result.sources:
            before |= known_variables(m)
    live = set()
    reach = set()
    for svc in merged.services:
        stack = [entry_node(svc)]
        succ = graph.successors()
        while stack:
            n = stack.pop()
            if n in reach:
                continue
            reach.add(n)
            stack.extend(succ.get(n, ()))
    by_node = {FlowNode.concrete(e.index): e for e in merged.elements()}
    for n in reach:
        e = by_node.get(n)
        f = facts.get(n)
        if e is not None and f is not None and not f.dead_end:
            live |= e.defines()
    for v in sorted(set(contract.trace_vars) & before):
        if v not in live:
            out.append(Violation("TraceBreak", v, f"{v} is no longer defined on any path to a terminal"))

    report = validate_model(merged)
    for v in report:
        out.append(Violation("InvalidStructure", v.subject, v.message))
    src = merged.by_name.get(result.binding.source.service)
    if src is not None:
        el = src.table.get(result.binding.source.local)
        if el is None or el.operation != "invoke" or el.target != result.binding.target:
            out.append(Violation("InvalidStructure", str(result.binding.source), "binding source was not rewritten to an invoke"))
    tgt = merged.by_name.get(result.binding.target)
    if tgt is not None and result.receive is not None:
        if not tgt.roots or tgt.roots[0] != result.receive.local or tgt.table[tgt.roots[0]].operation != "receive":
            out.append(Violation("InvalidStructure", result.binding.target, "target does not start with the inserted receive"))
    return list(_sorted(out))
