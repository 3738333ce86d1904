"""Immutable data model for business-logic services.

A :class:`LogicModel` holds services; each :class:`ServiceDef` is an ordered
tree of labeled :class:`LogicElement` values.  Elements are stored in
document (pre-)order, and conditional rules refer to their body through
``children`` (local labels).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Union

from .errors import NotFound


class ElementKind(enum.Enum):
    BusinessLogic = "BL"
    BusinessFunction = "BF"
    DataRule = "DR"
    ConditionalRule = "CR"
    Product = "P"

    @property
    def prefix(self) -> str:
        return self.value


BL = ElementKind.BusinessLogic
BF = ElementKind.BusinessFunction
DR = ElementKind.DataRule
CR = ElementKind.ConditionalRule
P = ElementKind.Product

OPERATIONS = ("get", "set", "compute", "select", "update", "if", "output", "invoke", "receive")
SEMANTIC_TYPES = ("string", "double", "boolean")
COMPARISONS = ("eq", "ne", "gt", "lt", "ge", "le")


def kind_of_operation(operation: str) -> ElementKind:
    if operation in ("select", "update"):
        return DR
    if operation == "if":
        return CR
    if operation in OPERATIONS:
        return BF
    raise ValueError(f"unknown operation {operation!r}")


@dataclass(frozen=True, order=True)
class ElementIndex:
    service: str
    local: str

    @classmethod
    def parse(cls, text: str) -> ElementIndex:
        service, dot, local = text.partition(".")
        if not dot or not service or not local:
            raise ValueError(f"not a qualified index: {text!r}")
        return cls(service, local)

    def __str__(self) -> str:
        return f"{self.service}.{self.local}"


def qualify(index: ElementIndex | str) -> ElementIndex:
    return index if isinstance(index, ElementIndex) else ElementIndex.parse(index)


# -- operands ---------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class DbField:
    name: str


@dataclass(frozen=True)
class Literal:
    value: Union[str, float, bool]

    @property
    def semantic_type(self) -> str:
        if isinstance(self.value, bool):
            return "boolean"
        if isinstance(self.value, float):
            return "double"
        return "string"


@dataclass(frozen=True)
class BinOp:
    op: str  # "+" or "-"
    left: "Operand"
    right: "Operand"


Operand = Union[Var, DbField, Literal, BinOp]


def format_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


_STRING_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def literal_text(lit: Literal) -> str:
    v = lit.value
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_number(v)
    return '"' + "".join(_STRING_ESCAPES.get(ch, ch) for ch in v) + '"'


def operand_text(op: Operand) -> str:
    if isinstance(op, Var):
        return "$" + op.name
    if isinstance(op, DbField):
        return "db." + op.name
    if isinstance(op, Literal):
        return literal_text(op)
    right = operand_text(op.right)
    if isinstance(op.right, BinOp):
        right = f"({right})"
    return f"{operand_text(op.left)}{op.op}{right}"


def operand_vars(op: Operand) -> Iterator[str]:
    if isinstance(op, Var):
        yield op.name
    elif isinstance(op, BinOp):
        yield from operand_vars(op.left)
        yield from operand_vars(op.right)


def operand_has_db(op: Operand) -> bool:
    if isinstance(op, DbField):
        return True
    if isinstance(op, BinOp):
        return operand_has_db(op.left) or operand_has_db(op.right)
    return False


def operand_well_formed(op: object) -> bool:
    if isinstance(op, (Var, DbField)):
        return bool(op.name)
    if isinstance(op, Literal):
        return isinstance(op.value, (str, float, bool))
    if isinstance(op, BinOp):
        return op.op in "+-" and len(op.op) == 1 and operand_well_formed(op.left) and operand_well_formed(op.right)
    return False


# -- element parts ----------------------------------------------------------


@dataclass(frozen=True)
class Param:
    name: str
    type: str = "string"
    value: Union[Var, Literal, None] = None


@dataclass(frozen=True)
class Condition:
    lvar: Operand
    op: str
    rvar: Operand


@dataclass(frozen=True)
class Assign:
    field: str
    expr: Operand


@dataclass(frozen=True)
class LogicElement:
    index: ElementIndex
    kind: ElementKind
    operation: str
    params: tuple[Param, ...] = ()
    conditions: tuple[Condition, ...] = ()
    children: tuple[str, ...] = ()
    target: str | None = None
    retrieves: tuple[str, ...] = ()
    table: str | None = None
    assigns: tuple[Assign, ...] = ()
    args: tuple[Operand, ...] = ()
    result: str | None = None
    result_type: str | None = None

    @property
    def local(self) -> str:
        return self.index.local

    def defines(self) -> set[str]:
        """Variables written by this element."""
        op = self.operation
        out: set[str] = set()
        if op in ("get", "set", "output", "receive"):
            out.update(p.name for p in self.params)
        if op == "select":
            out.update(self.retrieves)
        if self.result:
            out.add(self.result)
        return out

    def reads(self) -> set[str]:
        """Variables read by this element (params, conditions, expressions)."""
        out: set[str] = set()
        for p in self.params:
            if isinstance(p.value, Var):
                out.add(p.value.name)
            elif p.value is None and self.operation == "invoke":
                out.add(p.name)
        for c in self.conditions:
            out.update(operand_vars(c.lvar))
            out.update(operand_vars(c.rvar))
        for a in self.assigns:
            out.update(operand_vars(a.expr))
        for arg in self.args:
            out.update(operand_vars(arg))
        return out


@dataclass(frozen=True)
class ServiceDef:
    name: str
    roots: tuple[str, ...] = ()
    elements: tuple[LogicElement, ...] = ()
    alias: str | None = None

    @classmethod
    def build(cls, name: str, elements: Iterable[LogicElement], alias: str | None = None) -> ServiceDef:
        elements = tuple(elements)
        nested = {c for e in elements for c in e.children}
        roots = tuple(e.local for e in elements if e.local not in nested)
        return cls(name, roots, elements, alias)

    @cached_property
    def table(self) -> dict[str, LogicElement]:
        return {e.local: e for e in self.elements}

    @cached_property
    def parents(self) -> dict[str, str]:
        return {c: e.local for e in self.elements for c in e.children}

    @property
    def flow_name(self) -> str:
        return self.alias or self.name

    def element(self, local: str) -> LogicElement:
        try:
            return self.table[local]
        except KeyError:
            raise NotFound(f"{self.name}.{local}") from None

    def walk(self) -> Iterator[LogicElement]:
        """Pre-order traversal from the roots."""
        seen: set[str] = set()

        def visit(local: str):
            e = self.table.get(local)
            if e is None or local in seen:
                return
            seen.add(local)
            yield e
            for c in e.children:
                yield from visit(c)
        for r in self.roots:
            yield from visit(r)

    def guards(self, local: str) -> list[str]:
        """Enclosing conditional rules, innermost first."""
        out = []
        cur = self.parents.get(local)
        while cur is not None and cur not in out:
            out.append(cur)
            cur = self.parents.get(cur)
        return out


@dataclass(frozen=True)
class LogicModel:
    services: tuple[ServiceDef, ...] = ()
    externals: frozenset[str] = field(default_factory=frozenset)

    @cached_property
    def by_name(self) -> dict[str, ServiceDef]:
        return {s.name: s for s in self.services}

    def service(self, name: str) -> ServiceDef:
        from .errors import UnknownService
        try:
            return self.by_name[name]
        except KeyError:
            raise UnknownService(name) from None

    def elements(self) -> Iterator[LogicElement]:
        for s in self.services:
            yield from s.elements

    def indices(self) -> list[ElementIndex]:
        return [e.index for e in self.elements()]

    def replace_service(self, service: ServiceDef) -> LogicModel:
        return LogicModel(tuple(service if s.name == service.name else s for s in self.services), self.externals)


def element_lookup(model: LogicModel, index: ElementIndex | str) -> LogicElement:
    idx = qualify(index)
    svc = model.by_name.get(idx.service)
    if svc is None or idx.local not in svc.table:
        raise NotFound(str(idx))
    return svc.table[idx.local]


# -- validation -------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.subject}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def __len__(self) -> int:
        return len(self.violations)


def _literal_matches(value, semantic_type: str) -> bool:
    return not isinstance(value, Literal) or value.semantic_type == semantic_type


def _check_element(model: LogicModel, svc: ServiceDef, e: LogicElement) -> Iterator[str]:
    if e.operation not in OPERATIONS:
        yield f"unknown operation {e.operation!r}"
        return
    if e.kind is not kind_of_operation(e.operation):
        yield f"operation {e.operation} requires kind {kind_of_operation(e.operation).name}"
    if not e.local.startswith(e.kind.prefix) or e.kind in (BL, P):
        yield f"label does not carry the {e.kind.prefix} prefix of a parsed statement"
    if e.index.service != svc.name:
        yield f"index belongs to service {e.index.service}"
    if e.children and e.kind is not CR:
        yield "only conditional rules may have children"
    for c in e.children:
        if c not in svc.table:
            yield f"child {c} is not an element of {svc.name}"
    for p in e.params:
        if not p.name:
            yield "parameter with empty name"
        if p.type not in SEMANTIC_TYPES:
            yield f"parameter {p.name} has unknown type {p.type!r}"
        elif not _literal_matches(p.value, p.type):
            yield f"parameter {p.name} literal does not match type {p.type}"
    for cond in e.conditions:
        if cond.op not in COMPARISONS:
            yield f"unknown comparison {cond.op!r}"
        if not (operand_well_formed(cond.lvar) and operand_well_formed(cond.rvar)):
            yield "malformed condition operand"
        if e.kind is not DR and (operand_has_db(cond.lvar) or operand_has_db(cond.rvar)):
            yield "db fields may only appear inside data rules"
    if e.assigns and e.kind is not DR:
        yield "assignments only belong to data rules"
    for arg in e.args:
        if operand_has_db(arg):
            yield "db fields may only appear inside data rules"
    if e.operation == "invoke":
        if not e.target:
            yield "invoke without target service"
        elif e.target == svc.name:
            yield "invoke targets its own service"
        elif e.target not in model.by_name and e.target not in model.externals:
            yield f"invoke target {e.target} is not in the model"
    if e.operation == "compute" and not e.target:
        yield "compute without a function name"
    if e.operation in ("select", "update") and not e.table:
        yield f"{e.operation} without a table"
    if e.operation == "select" and not e.retrieves:
        yield "select retrieves nothing"
    if e.operation == "update" and not e.assigns:
        yield "update assigns nothing"


def validate_model(model: LogicModel) -> ValidationReport:
    out: list[Violation] = []
    seen_services: set[str] = set()
    for svc in model.services:
        if svc.name in seen_services:
            out.append(Violation(svc.name, "duplicate service name"))
        seen_services.add(svc.name)
        seen: set[str] = set()
        for e in svc.elements:
            subject = f"{svc.name}.{e.local}"
            if e.local in seen:
                out.append(Violation(subject, "duplicate label"))
                continue
            seen.add(e.local)
            out.extend(Violation(subject, msg) for msg in _check_element(model, svc, e))
        # every element must hang off exactly one parent (or be a root), in document order
        refs: dict[str, int] = {}
        for e in svc.elements:
            for c in e.children:
                refs[c] = refs.get(c, 0) + 1
        for r in svc.roots:
            refs[r] = refs.get(r, 0) + 1
        for local, n in refs.items():
            if n > 1:
                out.append(Violation(f"{svc.name}.{local}", "referenced more than once"))
        if not any(v.message == "duplicate label" for v in out if v.subject.startswith(svc.name + ".")):
            order = [e.local for e in svc.walk()]
            if order != [e.local for e in svc.elements]:
                out.append(Violation(svc.name, "elements are not in document order or not all reachable from the roots"))
    return ValidationReport(tuple(out))
