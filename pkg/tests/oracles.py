"""Brute-force reference implementations used to cross-check the library.

Both oracles work from the raw element fields of a model.  They share no
code with the flow builder or the slicer beyond the data classes.
"""

from __future__ import annotations

from blps.model import BinOp, LogicModel, Var

TERMINAL = "<terminal>"


# -- computability ----------------------------------------------------------


def _successors(model: LogicModel) -> tuple[dict[str, list[str]], dict[str, str]]:
    """Node -> successors over qualified names; entries are ``svc#entry``.

    Returns the successor map and the element kind prefix of every node.
    """
    succ: dict[str, list[str]] = {}
    kind: dict[str, str] = {}
    names = {s.name for s in model.services if s.elements}
    for svc in model.services:
        parent: dict[str, str] = {}
        for e in svc.elements:
            for c in e.children:
                parent[c] = e.local
        nested = set(parent)
        top = [e.local for e in svc.elements if e.local not in nested]
        by_local = {e.local: e for e in svc.elements}

        def following(local: str) -> str | None:
            # next sibling, or the next sibling of the closest ancestor that has one
            while True:
                p = parent.get(local)
                siblings = list(by_local[p].children) if p else top
                i = siblings.index(local)
                if i + 1 < len(siblings):
                    return siblings[i + 1]
                if p is None:
                    return None
                local = p

        entry = f"{svc.name}#entry"
        kind[entry] = "BL"
        succ[entry] = [f"{svc.name}.{top[0]}"] if top else []
        for e in svc.elements:
            me = f"{svc.name}.{e.local}"
            kind[me] = e.kind.prefix
            if e.operation == "output":
                succ[me] = [TERMINAL]
                continue
            out = []
            if e.operation == "if" and e.children:
                out.append(f"{svc.name}.{e.children[0]}")
            if e.operation == "invoke" and e.target in names:  # empty services are skipped
                out.append(f"{e.target}#entry")
            nxt = following(e.local)
            if nxt is not None:
                out.append(f"{svc.name}.{nxt}")
            elif not out:
                out.append(TERMINAL)
            succ[me] = out
    return succ, kind


def oracle_cf(model: LogicModel, budget: int, weights: dict[str, int] | None = None,
              default: int = 1) -> set[str]:
    """Qualified labels of elements whose every path terminates within ``budget``.

    Enumerates every simple path explicitly; a path that revisits a node
    witnesses a cycle and disqualifies the start node.
    """
    weights = weights or {}
    succ, kind = _successors(model)

    def w(node: str) -> int:
        return weights.get(kind[node], default)

    def worst(start: str) -> int | None:
        best = 0
        stack = [(start, (start,), w(start))]
        while stack:
            node, path, cost = stack.pop()
            nexts = succ.get(node, [])
            if not nexts:
                return None  # dead end
            for m in nexts:
                if m == TERMINAL:
                    best = max(best, cost)
                elif m in path:
                    return None  # cycle
                else:
                    stack.append((m, path + (m,), cost + w(m)))
        return best

    out = set()
    for svc in model.services:
        for e in svc.elements:
            name = f"{svc.name}.{e.local}"
            c = worst(name)
            if c is not None and c <= budget:
                out.add(name)
    return out


def oracle_entry_cost(model: LogicModel, weights: dict[str, int] | None = None) -> int:
    """Heaviest terminating path from any acyclic service entry."""
    succ, kind = _successors(model)
    weights = weights or {}
    best = 0
    for svc in model.services:
        start = f"{svc.name}#entry"
        if not succ[start]:
            continue
        stack = [(start, (start,), weights.get("BL", 1))]
        local_best, bad = 0, False
        while stack and not bad:
            node, path, cost = stack.pop()
            for m in succ.get(node, []):
                if m == TERMINAL:
                    local_best = max(local_best, cost)
                elif m in path:
                    bad = True
                else:
                    stack.append((m, path + (m,), cost + weights.get(kind[m], 1)))
        if not bad:
            best = max(best, local_best)
    return best


# -- traceability -----------------------------------------------------------


def _vars(op) -> set[str]:
    if isinstance(op, Var):
        return {op.name}
    if isinstance(op, BinOp):
        return _vars(op.left) | _vars(op.right)
    return set()


def oracle_defs(e) -> set[str]:
    op = e.operation
    out = set()
    if op in ("get", "set", "output", "receive"):
        out |= {p.name for p in e.params}
    elif op == "select":
        out |= set(e.retrieves)
    if op in ("compute", "select", "update") and e.result:
        out.add(e.result)
    return out


def oracle_uses(e) -> set[str]:
    out = set()
    for p in e.params:
        if isinstance(p.value, Var):
            out.add(p.value.name)
        elif p.value is None and e.operation == "invoke":
            out.add(p.name)  # pass-through of a same-named variable
    for c in e.conditions:
        out |= _vars(c.lvar) | _vars(c.rvar)
    for a in e.assigns:
        out |= _vars(a.expr)
    for a in e.args:
        out |= _vars(a)
    return out


def oracle_slice(model: LogicModel, trace_vars) -> set[str]:
    """Least set closed under same-service def-use, enclosing guards and
    invoke-to-receive edges, seeded with the definitions of ``trace_vars``."""
    items = [(svc, e) for svc in model.services for e in svc.elements]
    name = lambda svc, e: f"{svc.name}.{e.local}"  # noqa: E731
    chosen = {name(s, e) for s, e in items if oracle_defs(e) & set(trace_vars)}
    changed = True
    while changed:
        changed = False
        for s1, e1 in items:
            if name(s1, e1) not in chosen:
                continue
            for s2, e2 in items:
                n2 = name(s2, e2)
                if n2 in chosen:
                    continue
                data = s1.name == s2.name and bool(oracle_defs(e2) & oracle_uses(e1))
                guard = s1.name == s2.name and e2.operation == "if" and _encloses(s2, e2, e1.local)
                call = e1.operation == "receive" and e2.operation == "invoke" and e2.target == s1.name
                if data or guard or call:
                    chosen.add(n2)
                    changed = True
    return chosen


def _encloses(svc, outer, local: str) -> bool:
    todo = list(outer.children)
    by_local = {e.local: e for e in svc.elements}
    while todo:
        c = todo.pop()
        if c == local:
            return True
        todo.extend(by_local[c].children)
    return False


def oracle_mentions(model: LogicModel) -> set[str]:
    out = set()
    for e in model.elements():
        out |= oracle_defs(e) | oracle_uses(e)
    return out
