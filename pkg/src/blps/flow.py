"""Logic-flow graphs: construction, reachability, termination and slicing.

Graphs are lists of productions ``heads -> {items}``.  Inside one successor
list the items are sequential: ``h -> {a, b}`` means h, then a, then b.  A
fork ``[a, b]`` puts its members in parallel, and a production with several
heads (``{a, b} -> {c}``) joins them.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Union

from .errors import NotFound, UnknownVariable, UnresolvedInvoke
from .model import (
    BF, BL, CR, DR, P,
    ElementIndex, ElementKind, Literal, LogicElement, LogicModel, ServiceDef,
)

ABSTRACT_VOCABULARY = frozenset({"get", "set", "compute", "store", "return", "r:select", "r:cmp"})
_UPDATE_TAG = re.compile(r"r:update\d+$")
_SERVICE_TAG = re.compile(r"[A-Za-z_][\w\-]*$")

CONCRETE, ABSTRACT, PRODUCT = "concrete", "abstract", "product"


@dataclass(frozen=True, order=True)
class FlowNode:
    kind: str
    name: str

    def __str__(self) -> str:
        return self.name

    @classmethod
    def concrete(cls, index: ElementIndex | str) -> FlowNode:
        return cls(CONCRETE, str(index))

    @classmethod
    def abstract(cls, tag: str) -> FlowNode:
        if not is_abstract_tag(tag):
            raise ValueError(f"not an abstract flow tag: {tag!r}")
        return cls(ABSTRACT, tag)

    @classmethod
    def product(cls, service: str, label: str) -> FlowNode:
        return cls(PRODUCT, f"{service}.{label}")

    @classmethod
    def from_text(cls, text: str) -> FlowNode:
        service, dot, local = text.partition(".")
        if dot:
            if re.fullmatch(r"P\d*", local):
                return cls(PRODUCT, text)
            return cls(CONCRETE, text)
        return cls.abstract(text)

    @property
    def element_kind(self) -> ElementKind | None:
        if self.kind == PRODUCT:
            return P
        if self.kind == CONCRETE:
            local = self.name.partition(".")[2]
            for k in (BL, BF, DR, CR):
                if local.startswith(k.prefix):
                    return k
        return None

    @property
    def is_terminal(self) -> bool:
        return self.kind == PRODUCT or (self.kind == ABSTRACT and self.name == "return")


def is_abstract_tag(tag: str) -> bool:
    return tag in ABSTRACT_VOCABULARY or bool(_UPDATE_TAG.match(tag)) or (
        ":" not in tag and bool(_SERVICE_TAG.match(tag))
    )


@dataclass(frozen=True)
class ForkSet:
    members: tuple[FlowNode, ...]

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("a fork set needs at least two members")


Item = Union[FlowNode, ForkSet]


def _members(item: Item) -> tuple[FlowNode, ...]:
    return item.members if isinstance(item, ForkSet) else (item,)


@dataclass(frozen=True)
class Production:
    heads: tuple[FlowNode, ...]
    successors: tuple[Item, ...]
    bindings: tuple[tuple[FlowNode, FlowNode], ...] = ()

    def __post_init__(self):
        if not self.heads:
            raise ValueError("production without head")
        if not self.successors:
            raise ValueError("production without successors")

    @property
    def head(self) -> FlowNode:
        return self.heads[0]


@dataclass(frozen=True)
class FlowGraph:
    productions: tuple[Production, ...] = ()
    # entry nodes are derived metadata; the production text does not carry them
    entries: tuple[FlowNode, ...] = field(default=(), compare=False)

    def successors(self) -> dict[FlowNode, list[FlowNode]]:
        out: dict[FlowNode, list[FlowNode]] = {}
        for p in self.productions:
            prev = p.heads
            for item in p.successors:
                members = _members(item)
                for h in prev:
                    lst = out.setdefault(h, [])
                    for m in members:
                        if m not in lst:
                            lst.append(m)
                prev = members
        return out

    def nodes(self) -> set[FlowNode]:
        out = set(self.entries)
        for p in self.productions:
            out.update(p.heads)
            for item in p.successors:
                out.update(_members(item))
            for a, b in p.bindings:
                out.update((a, b))
        return out


# -- concrete graph ---------------------------------------------------------


def entry_node(service: ServiceDef) -> FlowNode:
    return FlowNode.concrete(f"{service.name}.BL1")


def _next_of(svc: ServiceDef, local: str) -> str | None:
    parent = svc.parents.get(local)
    block = svc.table[parent].children if parent is not None else svc.roots
    pos = block.index(local)
    if pos + 1 < len(block):
        return block[pos + 1]
    if parent is None:
        return None
    return _next_of(svc, parent)


def _service_productions(model: LogicModel, svc: ServiceDef) -> list[Production]:
    prods: list[Production] = []
    outputs = [e for e in svc.elements if e.operation == "output"]
    product_of = {e.local: FlowNode.product(svc.name, f"P{i}") for i, e in enumerate(outputs, 1)}
    exit_node = FlowNode.product(svc.name, f"P{len(outputs) + 1}")

    def node(local: str) -> FlowNode:
        return FlowNode.concrete(f"{svc.name}.{local}")

    def edge(src: FlowNode, dst: FlowNode) -> None:
        prods.append(Production((src,), (dst,)))

    if svc.roots:
        edge(entry_node(svc), node(svc.roots[0]))
    for e in svc.elements:
        here = node(e.local)
        if e.operation == "output":
            edge(here, product_of[e.local])
            continue
        primary: list[FlowNode] = []
        if e.operation == "if" and e.children:
            primary.append(node(e.children[0]))
        elif e.operation == "invoke":
            if e.target in model.by_name:
                if model.by_name[e.target].roots:  # calling an empty service is a no-op
                    primary.append(entry_node(model.by_name[e.target]))
            elif e.target not in model.externals:
                raise UnresolvedInvoke(e.target, str(e.index))
        nxt = _next_of(svc, e.local)
        for dst in primary:
            edge(here, dst)
        if nxt is not None:
            edge(here, node(nxt))
        elif not primary:
            # the false branch of a trailing conditional is not drawn: it only adds a path to the exit
            edge(here, exit_node)
    return prods


def build_flow(model: LogicModel) -> FlowGraph:
    prods: list[Production] = []
    for svc in model.services:
        prods.extend(_service_productions(model, svc))
    return FlowGraph(tuple(prods), tuple(entry_node(s) for s in model.services))


# -- abstract graph ---------------------------------------------------------


def _is_constant_set(e: LogicElement) -> bool:
    return e.operation == "set" and all(p.value is None or isinstance(p.value, Literal) for p in e.params)


def abstract_flow(model: LogicModel) -> FlowGraph:
    """Summarize the concrete graph in the get/r:select/r:cmp/... vocabulary.

    Constant ``set`` elements are dropped, runs of consecutive updates are
    grouped, a receive is folded into its service's entry production, and
    falling off the end of a service reads as ``store -> {return}``.
    """
    concrete = build_flow(model)
    succ = concrete.successors()
    elements = {str(e.index): e for e in model.elements()}
    entries = {entry_node(s): s for s in model.services}
    update_no: dict[str, int] = {}
    for svc in model.services:
        n = 0
        for e in svc.elements:
            if e.operation == "update":
                n += 1
                update_no[str(e.index)] = n

    def skipped(n: FlowNode) -> bool:
        e = elements.get(n.name)
        return e is not None and _is_constant_set(e)

    def contracted(n: FlowNode) -> list[FlowNode]:
        out: list[FlowNode] = []
        seen: set[FlowNode] = set()
        stack = list(reversed(succ.get(n, [])))
        while stack:
            m = stack.pop()
            if m in seen:
                continue
            seen.add(m)
            if skipped(m):
                stack.extend(reversed(succ.get(m, [])))
            elif m not in out:
                out.append(m)
        return out

    csucc = {n: contracted(n) for n in concrete.nodes() if not skipped(n)}
    cpred: dict[FlowNode, list[FlowNode]] = {}
    for n, ms in csucc.items():
        for m in ms:
            cpred.setdefault(m, []).append(n)

    output_products = {FlowNode.product(svc.name, f"P{i}")
                       for svc in model.services
                       for i, _ in enumerate([e for e in svc.elements if e.operation == "output"], 1)}

    def tag(n: FlowNode) -> FlowNode:
        if n in entries:
            return FlowNode.abstract(entries[n].flow_name)
        if n.kind == PRODUCT:
            return FlowNode.abstract("return" if n in output_products else "store")
        e = elements[n.name]
        op = e.operation
        name = {"get": "get", "set": "set", "compute": "compute", "select": "r:select",
                "if": "r:cmp", "output": "store", "invoke": "store", "receive": "set"}.get(op)
        if op == "update":
            name = f"r:update{update_no[n.name]}"
        return FlowNode.abstract(name)

    def is_update(n: FlowNode) -> bool:
        e = elements.get(n.name)
        return e is not None and e.operation == "update"

    productions: list[Production] = []
    for svc in model.services:
        seen: set[Production] = set()

        def emit(p: Production) -> None:
            if p not in seen:
                seen.add(p)
                productions.append(p)

        own = [n for n in csucc if n.name.startswith(svc.name + ".") and n.kind != PRODUCT]
        order = {str(e.index): i for i, e in enumerate(svc.elements)}
        own.sort(key=lambda n: (-1 if n in entries else order.get(n.name, 0)))

        # maximal chains of updates, each joined to the same successor
        in_run: dict[FlowNode, tuple[FlowNode, ...]] = {}
        for n in own:
            if not is_update(n) or n in in_run:
                continue
            preds = cpred.get(n, [])
            if len(preds) == 1 and is_update(preds[0]) and len(csucc.get(preds[0], [])) == 1:
                continue  # not the start of a run
            run = [n]
            while len(csucc.get(run[-1], [])) == 1:
                nxt = csucc[run[-1]][0]
                if not is_update(nxt) or len(cpred.get(nxt, [])) != 1:
                    break
                run.append(nxt)
            if len(run) > 1:
                for r in run:
                    in_run[r] = tuple(run)

        needs_exit = False
        folded: set[FlowNode] = set()
        for n in own:
            if n in in_run and in_run[n][0] != n:
                continue
            targets = csucc.get(n, [])
            heads: tuple[FlowNode, ...] = (tag(n),)
            if n in in_run:
                run = in_run[n]
                heads = tuple(tag(r) for r in run)
                targets = csucc.get(run[-1], [])
            if n in entries and len(targets) == 1 and elements.get(targets[0].name) is not None \
                    and elements[targets[0].name].operation == "receive":
                rcv = targets[0]
                folded.add(rcv)
                after = csucc.get(rcv, [])
                items: list[FlowNode] = [tag(rcv)] + [tag(a) for a in after[:1]]
                bindings = []
                if after:
                    for src in model.elements():
                        if src.operation == "invoke" and src.target == svc.name:
                            for pre in cpred.get(FlowNode.concrete(src.index), []):
                                bindings.append((tag(after[0]), tag(pre)))
                emit(Production(heads, tuple(items), tuple(bindings)))
                if after and after[0].kind == PRODUCT and after[0] not in output_products:
                    needs_exit = True
                continue
            if n in folded:
                continue
            for t in targets:
                if t in in_run:
                    emit(Production(heads, tuple(tag(r) for r in in_run[t])))
                    continue
                emit(Production(heads, (tag(t),)))
                if t.kind == PRODUCT and t not in output_products:
                    needs_exit = True
        if needs_exit:
            emit(Production((FlowNode.abstract("store"),), (FlowNode.abstract("return"),)))
    return FlowGraph(tuple(productions), tuple(FlowNode.abstract(s.flow_name) for s in model.services))


# -- analyses ---------------------------------------------------------------


def reachable(graph: FlowGraph, node: FlowNode) -> set[FlowNode]:
    if node not in graph.nodes():
        raise NotFound(str(node))
    succ = graph.successors()
    seen = {node}
    queue = deque([node])
    while queue:
        n = queue.popleft()
        for m in succ.get(n, ()):
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return seen


@dataclass(frozen=True)
class PathReport:
    terminates: bool
    max_steps: int | None
    has_cycle: bool


@dataclass(frozen=True)
class NodeFacts:
    has_cycle: bool
    dead_end: bool
    cost: int | None  # weighted longest path to a terminal, None when a cycle is reachable


def analyze_paths(graph: FlowGraph, weight: Callable[[FlowNode], int] | None = None) -> dict[FlowNode, NodeFacts]:
    """Per-node cycle reachability, dead ends, and weighted longest path.

    Paths stop at terminal nodes; each traversed edge costs the weight of
    the node it leaves.
    """
    weight = weight or (lambda n: 1)
    succ = graph.successors()
    facts: dict[FlowNode, NodeFacts] = {}
    on_stack: set[FlowNode] = set()
    for root in sorted(graph.nodes()):
        if root in facts:
            continue
        stack: list[tuple[FlowNode, int]] = [(root, 0)]
        on_stack.add(root)
        while stack:
            n, i = stack[-1]
            nexts = [] if n.is_terminal else succ.get(n, [])
            if i < len(nexts):
                stack[-1] = (n, i + 1)
                m = nexts[i]
                if m not in facts and m not in on_stack:
                    on_stack.add(m)
                    stack.append((m, 0))
                continue
            stack.pop()
            on_stack.discard(n)
            if n.is_terminal:
                facts[n] = NodeFacts(False, False, 0)
                continue
            if not nexts:
                facts[n] = NodeFacts(False, True, 0)
                continue
            cyc = dead = False
            best = 0
            for m in nexts:
                f = facts.get(m)
                if f is None:  # m is an ancestor still being explored: back edge
                    cyc = True
                    continue
                cyc |= f.has_cycle
                dead |= f.dead_end
                if f.cost is not None:
                    best = max(best, f.cost)
            facts[n] = NodeFacts(cyc, dead, None if cyc else weight(n) + best)
    return facts


def terminal_paths(graph: FlowGraph, node: FlowNode, budget: int,
                   weight: Callable[[FlowNode], int] | None = None) -> PathReport:
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if node not in graph.nodes():
        raise NotFound(str(node))
    f = analyze_paths(graph, weight)[node]
    ok = not f.has_cycle and not f.dead_end and f.cost is not None and f.cost <= budget
    return PathReport(ok, f.cost, f.has_cycle)


def backward_slice(model: LogicModel, graph: FlowGraph | None, trace_vars: Iterable[str]) -> set[ElementIndex]:
    """Elements the traced variables depend on, by data or control dependence.

    ``graph`` is accepted for interface symmetry; dependences come from the
    model's def/use facts and its conditional nesting.
    """
    trace_vars = set(trace_vars)
    if not trace_vars:
        raise ValueError("trace_vars must be non-empty")
    defs: dict[tuple[str, str], list[LogicElement]] = {}
    mentioned: set[str] = set()
    invokers: dict[str, list[LogicElement]] = {}
    for svc in model.services:
        for e in svc.elements:
            for v in e.defines():
                defs.setdefault((svc.name, v), []).append(e)
            mentioned |= e.defines() | e.reads()
            if e.operation == "invoke" and e.target:
                invokers.setdefault(e.target, []).append(e)
    for v in sorted(trace_vars):
        if v not in mentioned:
            raise UnknownVariable(v)

    result: set[ElementIndex] = set()
    work: list[LogicElement] = [e for e in model.elements() if e.defines() & trace_vars]
    while work:
        e = work.pop()
        if e.index in result:
            continue
        result.add(e.index)
        svc = model.by_name[e.index.service]
        for v in e.reads():
            work.extend(defs.get((svc.name, v), ()))
        work.extend(svc.table[g] for g in svc.guards(e.local))
        if e.operation == "receive":
            work.extend(invokers.get(svc.name, ()))
    return result


# -- text form --------------------------------------------------------------


def _item_text(item: Item) -> str:
    if isinstance(item, ForkSet):
        return "[" + ", ".join(m.name for m in item.members) + "]"
    return item.name


def production_text(p: Production) -> str:
    head = p.heads[0].name if len(p.heads) == 1 else "{" + ", ".join(h.name for h in p.heads) + "}"
    line = f"{head} -> {{{', '.join(_item_text(i) for i in p.successors)}}}"
    for a, b in p.bindings:
        line += f" {a.name}={b.name}"
    return line


def emit_productions(graph: FlowGraph) -> str:
    """One production per line, in the graph's (entry-first) construction order."""
    return "".join(production_text(p) + "\n" for p in graph.productions)


def iter_edges(graph: FlowGraph) -> Iterator[tuple[FlowNode, FlowNode]]:
    for n, ms in graph.successors().items():
        for m in ms:
            yield n, m
