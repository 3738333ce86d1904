"""Integration contracts (``.ctr``) and their expansion into constraints.

File format, one directive per line, ``#`` comments::

    contract-version 1          mandatory first directive
    contract <name>
    budget <int >= 1>           default 100
    trace <var>[, <var>...]     repeatable
    weight <BL|BF|DR|CR|P> <int >= 1>
    bind <service.INDEX> <target-service>
    service <name>:             opens an accessibility section
      accessible <LABEL>[, <LABEL>...]
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ContractError, InvalidBudget, UnknownIndex
from .model import ElementIndex, LogicModel
from .properties import CostModel, declared_accessible

CONTRACT_VERSION = "1"
DEFAULT_BUDGET = 100
_NAME = re.compile(r"[A-Za-z_][\w\-]*$")
_LABEL = re.compile(r"(BF|DR|CR|BL|P)[A-Za-z0-9]*$")
_KINDS = ("BL", "BF", "DR", "CR", "P")


@dataclass(frozen=True)
class Contract:
    name: str = ""
    budget: int = DEFAULT_BUDGET
    trace_vars: frozenset[str] = frozenset()
    accessible: frozenset[ElementIndex] = frozenset()
    sections: tuple[str, ...] = ()
    weights: tuple[tuple[str, int], ...] = ()
    bindings: tuple[tuple[ElementIndex, str], ...] = ()

    def __post_init__(self):
        if self.budget < 1:
            raise InvalidBudget(f"budget must be >= 1, got {self.budget}")

    @property
    def cost_model(self) -> CostModel:
        return CostModel(1, self.weights)

    def accessible_in(self, service: str) -> frozenset[ElementIndex]:
        return frozenset(i for i in self.accessible if i.service == service)


@dataclass(frozen=True)
class Constraint:
    kind: str  # accessibility, computability, traceability, binding
    subject: str
    detail: str


def _words(rest: str) -> list[str]:
    return [w for w in re.split(r"[,\s]+", rest.strip()) if w]


def load_contract(text: str) -> Contract:
    fields: dict = {"trace_vars": set(), "accessible": set(), "sections": [], "weights": {}, "bindings": []}
    section: str | None = None
    seen_version = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        if not seen_version:
            if key != "contract-version":
                raise ContractError("missing 'contract-version 1' header", lineno)
            if rest != CONTRACT_VERSION:
                raise ContractError(f"unsupported contract version {rest!r}", lineno)
            seen_version = True
            continue
        if key == "contract":
            if not _NAME.match(rest):
                raise ContractError(f"bad contract name {rest!r}", lineno)
            fields["name"] = rest
        elif key == "budget":
            try:
                budget = int(rest)
            except ValueError:
                raise InvalidBudget(f"budget must be an integer, got {rest!r}", lineno) from None
            if budget < 1:
                raise InvalidBudget(f"budget must be >= 1, got {budget}", lineno)
            fields["budget"] = budget
        elif key == "trace":
            names = _words(rest)
            if not names or not all(re.fullmatch(r"[A-Za-z_]\w*", n) for n in names):
                raise ContractError(f"bad trace variable list {rest!r}", lineno)
            fields["trace_vars"].update(names)
        elif key == "weight":
            parts = rest.split()
            if len(parts) != 2 or parts[0] not in _KINDS or not parts[1].isdigit() or int(parts[1]) < 1:
                raise ContractError(f"bad weight directive {rest!r}", lineno)
            fields["weights"][parts[0]] = int(parts[1])
        elif key == "bind":
            parts = rest.split()
            try:
                src = ElementIndex.parse(parts[0]) if len(parts) == 2 else None
            except ValueError:
                src = None
            if src is None or not _NAME.match(parts[1]) or not _LABEL.match(src.local):
                raise ContractError(f"bad bind directive {rest!r}", lineno)
            fields["bindings"].append((src, parts[1]))
        elif key == "service" and line.endswith(":"):
            name = rest[:-1].strip()
            if not _NAME.match(name):
                raise ContractError(f"bad service name {name!r}", lineno)
            if name in fields["sections"]:
                raise ContractError(f"duplicate section for {name}", lineno)
            section = name
            fields["sections"].append(name)
        elif key == "accessible":
            if section is None:
                raise ContractError("'accessible' outside a service section", lineno)
            for label in _words(rest):
                if not _LABEL.match(label):
                    raise ContractError(f"bad element label {label!r}", lineno)
                fields["accessible"].add(ElementIndex(section, label))
        else:
            raise ContractError(f"unknown key {key!r}", lineno)
    if not seen_version:
        raise ContractError("missing 'contract-version 1' header", 1)
    return Contract(
        name=fields.get("name", ""),
        budget=fields.get("budget", DEFAULT_BUDGET),
        trace_vars=frozenset(fields["trace_vars"]),
        accessible=frozenset(fields["accessible"]),
        sections=tuple(fields["sections"]),
        weights=tuple(sorted(fields["weights"].items())),
        bindings=tuple(fields["bindings"]),
    )


def load_contract_file(path) -> Contract:
    with open(path, encoding="utf-8") as fh:
        return load_contract(fh.read())


def print_contract(c: Contract) -> str:
    lines = [f"contract-version {CONTRACT_VERSION}"]
    if c.name:
        lines.append(f"contract {c.name}")
    lines.append(f"budget {c.budget}")
    if c.trace_vars:
        lines.append("trace " + ", ".join(sorted(c.trace_vars)))
    lines.extend(f"weight {k} {w}" for k, w in c.weights)
    lines.extend(f"bind {src} {target}" for src, target in c.bindings)
    sections = list(c.sections) + sorted({i.service for i in c.accessible} - set(c.sections))
    for name in sections:
        lines.append(f"service {name}:")
        labels = sorted(i.local for i in c.accessible if i.service == name)
        if labels:
            lines.append("  accessible " + ", ".join(labels))
    return "\n".join(lines) + "\n"


def analyze_constraints(contract: Contract, model: LogicModel) -> list[Constraint]:
    """Expand a contract against a model into an ordered constraint list."""
    af = declared_accessible(model, contract)
    for src, target in contract.bindings:
        svc = model.by_name.get(src.service)
        if svc is not None and src.local not in svc.table:
            raise UnknownIndex(str(src))
    out: list[Constraint] = []
    for e in model.elements():
        if e.index not in af:
            out.append(Constraint("accessibility", str(e.index), "not accessible to partner services"))
    for svc in model.services:
        out.append(Constraint("computability", svc.name, f"every path terminates within {contract.budget} steps"))
    for v in sorted(contract.trace_vars):
        out.append(Constraint("traceability", v, "definitions must stay on a terminating path"))
    for src, target in contract.bindings:
        out.append(Constraint("binding", f"{src}->{target}", "permitted integration binding"))
    return out
