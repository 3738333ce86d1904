"""Recursive-descent parser for ``.blm`` business-logic sources.

Grammar (whitespace-insensitive, ``#`` and ``//`` start comments)::

    file     := (service | extern)*
    extern   := "extern" "service" IDENT [";"]
    service  := "service" IDENT ["as" IDENT] "{" stmt* "}"
    stmt     := [LABEL ":"] op [";"]
    op       := "get" params | "receive" params | "set" vparams
              | "compute" IDENT [":" TYPE] "=" IDENT "(" [operand ("," operand)*] ")"
              | "select" IDENT ("," IDENT)* "from" IDENT ["where" conds] ["returning" IDENT]
              | "update" IDENT "set" IDENT "=" operand ("," IDENT "=" operand)*
                    ["where" conds] ["returning" IDENT]
              | "if" "(" conds ")" "{" stmt* "}"
              | "output" vparams
              | "invoke" IDENT "(" [params] ")"
    params   := param ("," param)*
    param    := IDENT [":" TYPE] ["=" value]
    vparams  := vparam ("," vparam)*        vparam: a param whose "=" value is mandatory
    value    := "$" IDENT | literal
    conds    := cond ("and" cond)*
    cond     := operand CMP operand          CMP in == != > < >= <=
    operand  := term (("+" | "-") term)*
    term     := "$" IDENT | "db" "." IDENT | NUMBER | STRING | "true" | "false" | "(" operand ")"
    LABEL    := ("BF" | "DR" | "CR" | "BL" | "P") [A-Za-z0-9]*
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DuplicateLabel, InvalidModel, ParseError, UnknownStatement
from .flow import FlowGraph, FlowNode, ForkSet, Production
from .model import (
    Assign, BinOp, Condition, DbField, ElementIndex, Literal, LogicElement, LogicModel, Param,
    ServiceDef, Var, kind_of_operation, literal_text, operand_text, validate_model,
)

CMP_TOKENS = {"==": "eq", "!=": "ne", ">": "gt", "<": "lt", ">=": "ge", "<=": "le"}
CMP_TEXT = {v: k for k, v in CMP_TOKENS.items()}
_UNESCAPE = {"n": "\n", "r": "\r", "t": "\t"}
LABEL_RE = re.compile(r"(BF|DR|CR|BL|P)[A-Za-z0-9]*$")
STATEMENTS = ("get", "set", "compute", "select", "update", "if", "output", "invoke", "receive")


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Token:
    kind: str  # ident, number, string, var, op, eof
    text: str
    span: SourceSpan


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*|//[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<var>\$[A-Za-z_]\w*)
  | (?P<ident>[A-Za-z_]\w*)
  | (?P<op>==|!=|>=|<=|->|[{}()\[\],;:=<>+\-.])
""", re.VERBOSE)


def tokenize(text: str, filename: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = SourceSpan(filename, line, pos - line_start + 1, 1)
            raise ParseError(f"unexpected character {text[pos]!r}", span)
        kind = m.lastgroup
        span = SourceSpan(filename, line, pos - line_start + 1, m.end() - pos)
        if kind != "ws":
            tokens.append(Token(kind, m.group(), span))
        newlines = m.group().count("\n")
        if newlines:
            line += newlines
            line_start = pos + m.group().rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", SourceSpan(filename, line, pos - line_start + 1, 0)))
    return tokens


class _Parser:
    def __init__(self, text: str, filename: str):
        self.toks = tokenize(text, filename)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "ident")

    def take(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, *texts: str) -> Token:
        if self.tok.text in texts and self.tok.kind in ("op", "ident"):
            return self.take()
        raise self.error(f"expected {' or '.join(repr(t) for t in texts)}", texts)

    def ident(self, what: str = "identifier") -> str:
        if self.tok.kind != "ident":
            raise self.error(f"expected {what}", (what,))
        return self.take().text

    def error(self, message: str, expected=()) -> ParseError:
        found = self.tok.text or "end of input"
        return ParseError(f"{message}, found {found!r}", self.tok.span, tuple(expected))

    # grammar
    def file(self) -> LogicModel:
        services: list[ServiceDef] = []
        externals: set[str] = set()
        while self.tok.kind != "eof":
            if self.at("extern"):
                self.take()
                self.expect("service")
                externals.add(self.ident("service name"))
                if self.at(";"):
                    self.take()
            elif self.at("service"):
                services.append(self.service())
            else:
                raise self.error("expected 'service'", ("service", "extern"))
        return LogicModel(tuple(services), frozenset(externals))

    def service(self) -> ServiceDef:
        self.expect("service")
        name = self.ident("service name")
        alias = None
        if self.at("as"):
            self.take()
            alias = self.ident("flow name")
        self.expect("{")
        self.name = name
        self.pending: list = []
        self.labels: dict[str, Token | None] = {}
        roots = self.block()
        self.expect("}")
        elements = self._assign_auto_labels(name)
        return ServiceDef(name, tuple(r() for r in roots), tuple(elements), alias)

    def block(self):
        """Parse statements up to a closing brace; returns label thunks of the block's members."""
        members = []
        while not self.at("}") and self.tok.kind != "eof":
            members.append(self.statement())
        return members

    def statement(self):
        label_tok = None
        if self.tok.kind == "ident" and self.peek().text == ":" and self.peek().kind == "op":
            label_tok = self.take()
            self.take()
            if not LABEL_RE.match(label_tok.text):
                raise ParseError(f"bad label {label_tok.text!r}", label_tok.span, ("BF", "DR", "CR"))
        start = self.tok
        if start.kind != "ident" or start.text not in STATEMENTS:
            if start.kind == "ident":
                raise UnknownStatement(start.text, start.span)
            raise self.error("expected a statement", STATEMENTS)
        op = self.take().text
        if label_tok is not None:
            if label_tok.text in self.labels:
                raise DuplicateLabel(f"{self.name}.{label_tok.text}", label_tok.span)
            self.labels[label_tok.text] = label_tok
        # reserve the slot before parsing a nested body so document order is pre-order
        slot = len(self.pending)
        holder = {"label": label_tok.text if label_tok else None}
        self.pending.append(None)
        fields = getattr(self, "op_" + op)()
        thunks = fields.pop("children_thunks", [])
        self.pending[slot] = (op, fields, thunks, holder)
        if self.at(";"):
            self.take()
        return lambda: holder["label"]

    def _assign_auto_labels(self, service: str) -> list[LogicElement]:
        counters: dict[str, int] = {}
        for op, fields, thunks, holder in self.pending:
            if holder["label"] is None:
                prefix = kind_of_operation(op).prefix
                n = counters.get(prefix, 0)
                while True:
                    n += 1
                    if f"{prefix}{n}" not in self.labels:
                        break
                counters[prefix] = n
                holder["label"] = f"{prefix}{n}"
                self.labels[holder["label"]] = None
        out = []
        for op, fields, thunks, holder in self.pending:
            out.append(LogicElement(
                index=ElementIndex(service, holder["label"]),
                kind=kind_of_operation(op),
                operation=op,
                children=tuple(t() for t in thunks),
                **fields,
            ))
        return out

    # statements
    def params(self, typed_default: str = "string", need_value: bool = False) -> tuple[Param, ...]:
        out = [self.param(typed_default, need_value)]
        while self.at(","):
            self.take()
            out.append(self.param(typed_default, need_value))
        return tuple(out)

    def param(self, typed_default: str = "string", need_value: bool = False) -> Param:
        name = self.ident("parameter name")
        ptype = None
        if self.at(":"):
            self.take()
            ptype = self.ident("type")
            if ptype not in ("string", "double", "boolean"):
                raise ParseError(f"unknown type {ptype!r}", self.toks[self.i - 1].span, ("string", "double", "boolean"))
        value = None
        if self.at("="):
            self.take()
            value = self.value()
        elif need_value:
            raise self.error("expected '='", ("=",))
        if ptype is None:
            ptype = value.semantic_type if isinstance(value, Literal) else typed_default
        return Param(name, ptype, value)

    def value(self):
        t = self.tok
        if t.kind == "var":
            self.take()
            return Var(t.text[1:])
        lit = self.literal()
        if lit is None:
            raise self.error("expected a value", ("$var", "literal"))
        return lit

    def literal(self):
        t = self.tok
        if t.kind == "number":
            self.take()
            return Literal(float(t.text))
        if t.kind == "string":
            self.take()
            return Literal(re.sub(r"\\(.)", lambda m: _UNESCAPE.get(m[1], m[1]), t.text[1:-1]))
        if t.kind == "ident" and t.text in ("true", "false"):
            self.take()
            return Literal(t.text == "true")
        if t.kind == "op" and t.text == "-" and self.peek().kind == "number":
            self.take()
            return Literal(-float(self.take().text))
        return None

    def term(self):
        t = self.tok
        if t.kind == "var":
            self.take()
            return Var(t.text[1:])
        if t.kind == "ident" and t.text == "db" and self.peek().text == ".":
            self.take()
            self.take()
            return DbField(self.ident("field name"))
        if self.at("("):
            self.take()
            inner = self.operand()
            self.expect(")")
            return inner
        lit = self.literal()
        if lit is None:
            raise self.error("expected an operand", ("$var", "db.field", "literal", "("))
        return lit

    def operand(self):
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            left = BinOp(op, left, self.term())
        return left

    def conditions(self) -> tuple[Condition, ...]:
        out = [self.condition()]
        while self.at("and"):
            self.take()
            out.append(self.condition())
        return tuple(out)

    def condition(self) -> Condition:
        left = self.operand()
        if self.tok.text not in CMP_TOKENS:
            raise self.error("expected a comparison", tuple(CMP_TOKENS))
        op = CMP_TOKENS[self.take().text]
        return Condition(left, op, self.operand())

    def op_get(self):
        return {"params": self.params()}

    def op_receive(self):
        return {"params": self.params()}

    def op_set(self):
        return {"params": self.params(need_value=True)}

    def op_output(self):
        return {"params": self.params(need_value=True)}

    def op_compute(self):
        result = self.ident("result variable")
        rtype = "double"
        if self.at(":"):
            self.take()
            rtype = self.ident("type")
        self.expect("=")
        fn = self.ident("function name")
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.operand())
            while self.at(","):
                self.take()
                args.append(self.operand())
        self.expect(")")
        return {"target": fn, "args": tuple(args), "result": result, "result_type": rtype}

    def _returning(self):
        if self.at("returning"):
            self.take()
            return self.ident("status variable")
        return None

    def op_select(self):
        names = [self.ident("column")]
        while self.at(","):
            self.take()
            names.append(self.ident("column"))
        self.expect("from")
        table = self.ident("table")
        conds = ()
        if self.at("where"):
            self.take()
            conds = self.conditions()
        return {"retrieves": tuple(names), "table": table, "conditions": conds, "result": self._returning()}

    def op_update(self):
        table = self.ident("table")
        self.expect("set")
        assigns = []
        while True:
            fld = self.ident("field")
            self.expect("=")
            assigns.append(Assign(fld, self.operand()))
            if not self.at(","):
                break
            self.take()
        conds = ()
        if self.at("where"):
            self.take()
            conds = self.conditions()
        return {"table": table, "assigns": tuple(assigns), "conditions": conds, "result": self._returning()}

    def op_if(self):
        self.expect("(")
        conds = self.conditions()
        self.expect(")")
        self.expect("{")
        thunks = self.block()
        self.expect("}")
        return {"conditions": conds, "children_thunks": thunks}

    def op_invoke(self):
        target = self.ident("service name")
        self.expect("(")
        params = ()
        if not self.at(")"):
            params = self.params()
        self.expect(")")
        return {"target": target, "params": params}


def parse_source(text: str, filename: str = "<input>") -> LogicModel:
    """Parse ``.blm`` text into a validated :class:`LogicModel`."""
    model = _Parser(text, filename).file()
    report = validate_model(model)
    if report:
        raise InvalidModel(report.violations)
    return model


def parse_file(path) -> LogicModel:
    with open(path, encoding="utf-8") as fh:
        return parse_source(fh.read(), str(path))


# -- printer ----------------------------------------------------------------


def _value_text(v) -> str:
    return "$" + v.name if isinstance(v, Var) else literal_text(v)


def _param_text(p: Param) -> str:
    s = f"{p.name}: {p.type}"
    if p.value is not None:
        s += f" = {_value_text(p.value)}"
    return s


def _conds_text(conds) -> str:
    return " and ".join(f"{_op(c.lvar)} {CMP_TEXT[c.op]} {_op(c.rvar)}" for c in conds)


def _op(o) -> str:
    if isinstance(o, BinOp):
        right = _op(o.right)
        if isinstance(o.right, BinOp):
            right = f"({right})"
        return f"{_op(o.left)} {o.op} {right}"
    return operand_text(o)


def _statement(svc: ServiceDef, e: LogicElement, depth: int) -> list[str]:
    pad = "  " * depth
    op = e.operation
    if op in ("get", "receive", "set", "output"):
        body = f"{op} " + ", ".join(_param_text(p) for p in e.params)
    elif op == "compute":
        body = f"compute {e.result}: {e.result_type or 'double'} = {e.target}({', '.join(_op(a) for a in e.args)})"
    elif op == "select":
        body = f"select {', '.join(e.retrieves)} from {e.table}"
        if e.conditions:
            body += " where " + _conds_text(e.conditions)
        if e.result:
            body += f" returning {e.result}"
    elif op == "update":
        body = f"update {e.table} set " + ", ".join(f"{a.field} = {_op(a.expr)}" for a in e.assigns)
        if e.conditions:
            body += " where " + _conds_text(e.conditions)
        if e.result:
            body += f" returning {e.result}"
    elif op == "invoke":
        body = f"invoke {e.target}(" + ", ".join(_param_text(p) for p in e.params) + ")"
    elif op == "if":
        lines = [f"{pad}{e.local}: if ({_conds_text(e.conditions)}) {{"]
        for c in e.children:
            lines.extend(_statement(svc, svc.table[c], depth + 1))
        lines.append(pad + "}")
        return lines
    else:
        raise ValueError(op)
    return [f"{pad}{e.local}: {body};"]


def print_model(model: LogicModel) -> str:
    lines: list[str] = []
    for name in sorted(model.externals):
        lines.append(f"extern service {name};")
    for svc in model.services:
        head = f"service {svc.name}" + (f" as {svc.alias}" if svc.alias else "") + " {"
        lines.append(head)
        for r in svc.roots:
            lines.extend(_statement(svc, svc.table[r], 1))
        lines.append("}")
    return "\n".join(lines) + ("\n" if lines else "")


# -- flow production text ---------------------------------------------------

_FLOW_TOKEN = re.compile(r"\s*(->|→|\\rightarrow|[{}\[\],=]|[^\s{}\[\],=]+)")


def parse_flow_productions(text: str, filename: str = "<flow>") -> FlowGraph:
    """Parse ``head -> {a, b}`` lines (``→`` accepted) into a :class:`FlowGraph`."""
    productions: list[Production] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks: list[tuple[str, int]] = []
        pos = 0
        while pos < len(raw):
            m = _FLOW_TOKEN.match(raw, pos)
            if m is None or not m.group(1):
                if raw[pos:].strip() == "":
                    break
                raise ParseError("bad flow token", SourceSpan(filename, lineno, pos + 1, 1))
            toks.append((m.group(1), m.start(1) + 1))
            pos = m.end()
        productions.append(_production(toks, filename, lineno, len(raw)))
    entries = []
    succ_nodes = set()
    for p in productions:
        for item in p.successors:
            succ_nodes.update(item.members if isinstance(item, ForkSet) else (item,))
    for p in productions:
        for h in p.heads:
            if h not in succ_nodes and h not in entries:
                entries.append(h)
    return FlowGraph(tuple(productions), tuple(entries))


def _production(toks, filename, lineno, width) -> Production:
    i = 0

    def err(msg):
        col = toks[i][1] if i < len(toks) else width + 1
        return ParseError(msg, SourceSpan(filename, lineno, max(col, 1), 1))

    def node(text):
        try:
            return FlowNode.from_text(text)
        except ValueError as exc:
            raise err(str(exc)) from None

    def name():
        nonlocal i
        if i >= len(toks) or toks[i][0] in ("{", "}", "[", "]", ",", "=", "->", "→", "\\rightarrow"):
            raise err("expected a node name")
        i += 1
        return node(toks[i - 1][0])

    def punct(p):
        nonlocal i
        if i >= len(toks) or toks[i][0] != p:
            raise err(f"expected {p!r}")
        i += 1

    def names_until(close):
        nonlocal i
        out = [name()]
        while i < len(toks) and toks[i][0] == ",":
            i += 1
            out.append(name())
        punct(close)
        return out

    if toks and toks[0][0] == "{":
        i = 1
        heads = tuple(names_until("}"))
    else:
        heads = (name(),)
    if i >= len(toks) or toks[i][0] not in ("->", "→", "\\rightarrow"):
        raise err("expected '->'")
    i += 1
    punct("{")
    items = []
    while True:
        if i < len(toks) and toks[i][0] == "[":
            i += 1
            members = names_until("]")
            if len(members) < 2:
                raise err("a fork set needs at least two members")
            items.append(ForkSet(tuple(members)))
        else:
            items.append(name())
        if i < len(toks) and toks[i][0] == ",":
            i += 1
            continue
        break
    punct("}")
    bindings = []
    while i < len(toks):
        a = name()
        punct("=")
        b = name()
        bindings.append((a, b))
    return Production(heads, tuple(items), tuple(bindings))
