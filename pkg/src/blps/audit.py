"""Change tracking: model diffs, property impact, and the append-only audit log.

Log format, one record per line (UTF-8)::

    <UTC ISO-8601 timestamp>\t<actor>\t<operation>\t<digest>\t<summary>

Digests are ``sha256:`` hex of the canonical BLPS bytes of each input
model; several inputs are joined with ``,``.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import os
from dataclasses import dataclass, fields

from .errors import IoError
from .model import (
    Assign, BinOp, Condition, DbField, ElementKind, Literal, LogicElement, LogicModel, Param, Var, operand_text,
)
from .properties import PropertySets, evaluate_all

PRESERVED = "PropertiesPreserved"
CHANGED = "PropertiesChanged"


@dataclass(frozen=True)
class FieldDelta:
    field: str
    old: str
    new: str

    def __str__(self) -> str:
        return f"{self.field}: {self.old} -> {self.new}"


@dataclass(frozen=True)
class ChangeSet:
    added: frozenset[str] = frozenset()
    removed: frozenset[str] = frozenset()
    modified: tuple[tuple[str, tuple[FieldDelta, ...]], ...] = ()

    @property
    def modified_indices(self) -> frozenset[str]:
        return frozenset(i for i, _ in self.modified)

    @property
    def empty(self) -> bool:
        return not (self.added or self.removed or self.modified)


def _show(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, (Var, DbField, Literal, BinOp)):
        return operand_text(value)
    if isinstance(value, Param):
        return f"{value.name}:{value.type}" + ("" if value.value is None else "=" + operand_text(value.value))
    if isinstance(value, Condition):
        return f"{operand_text(value.lvar)} {value.op} {operand_text(value.rvar)}"
    if isinstance(value, Assign):
        return f"{value.field}={operand_text(value.expr)}"
    if isinstance(value, ElementKind):
        return value.name
    if isinstance(value, tuple):
        return "[" + ", ".join(_show(v) for v in value) + "]"
    return str(value)


def _element_deltas(old: LogicElement, new: LogicElement) -> list[FieldDelta]:
    out: list[FieldDelta] = []
    for f in fields(LogicElement):
        if f.name == "index":
            continue
        a, b = getattr(old, f.name), getattr(new, f.name)
        if a == b:
            continue
        if f.name in ("params", "conditions", "assigns", "args") and len(a) == len(b):
            for i, (x, y) in enumerate(zip(a, b)):
                if x == y:
                    continue
                changed = [g.name for g in fields(x) if getattr(x, g.name) != getattr(y, g.name)] \
                    if type(x) is type(y) and isinstance(x, (Param, Condition, Assign)) else []
                if changed:
                    for s in changed:
                        out.append(FieldDelta(f"{f.name}[{i}].{s}", _show(getattr(x, s)), _show(getattr(y, s))))
                else:
                    out.append(FieldDelta(f"{f.name}[{i}]", _show(x), _show(y)))
        else:
            out.append(FieldDelta(f.name, _show(a), _show(b)))
    return out


def diff_models(old: LogicModel, new: LogicModel) -> ChangeSet:
    """Element-level diff keyed by qualified index."""
    a = {str(e.index): e for e in old.elements()}
    b = {str(e.index): e for e in new.elements()}
    modified = []
    for key in sorted(a.keys() & b.keys()):
        deltas = _element_deltas(a[key], b[key])
        if deltas:
            modified.append((key, tuple(deltas)))
    return ChangeSet(frozenset(b.keys() - a.keys()), frozenset(a.keys() - b.keys()), tuple(modified))


@dataclass(frozen=True)
class SetDelta:
    entered: frozenset[str] = frozenset()
    left: frozenset[str] = frozenset()

    @property
    def empty(self) -> bool:
        return not (self.entered or self.left)


def _delta(old, new) -> SetDelta:
    o, n = {str(i) for i in old}, {str(i) for i in new}
    return SetDelta(frozenset(n - o), frozenset(o - n))


@dataclass(frozen=True)
class ImpactReport:
    changes: ChangeSet
    cf: SetDelta
    tf: SetDelta
    af: SetDelta
    naf: SetDelta
    cost: tuple[int, int]
    verdict: str

    @property
    def preserved(self) -> bool:
        return self.verdict == PRESERVED


def impact(old: LogicModel, new: LogicModel, contract) -> ImpactReport:
    before: PropertySets = evaluate_all(old, contract)
    after: PropertySets = evaluate_all(new, contract)
    deltas = (_delta(before.cf, after.cf), _delta(before.tf, after.tf),
              _delta(before.af, after.af), _delta(before.naf, after.naf))
    same = all(d.empty for d in deltas) and before.total_cost == after.total_cost
    return ImpactReport(diff_models(old, new), *deltas, (before.total_cost, after.total_cost),
                        PRESERVED if same else CHANGED)


# -- audit log --------------------------------------------------------------


@dataclass(frozen=True)
class AuditRecord:
    timestamp: str
    actor: str
    operation: str
    digest: str
    summary: str

    def line(self) -> str:
        parts = [self.timestamp, self.actor, self.operation, self.digest, self.summary]
        return "\t".join(p.replace("\t", " ").replace("\n", " ") for p in parts) + "\n"

    @classmethod
    def from_line(cls, line: str) -> AuditRecord:
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 5:
            raise ValueError(f"malformed audit line: {line!r}")
        return cls(*parts)


def digest_text(*texts: str) -> str:
    return ",".join("sha256:" + hashlib.sha256(t.encode("utf-8")).hexdigest() for t in texts)


def model_digest(model: LogicModel) -> str:
    """Digest of the model's canonical BLPS bytes (one document per service)."""
    from .codec import generate_blps, serialize
    empty = PropertySets()
    text = "".join(serialize(generate_blps(model, empty, s.name)) for s in model.services)
    return digest_text(text)


def utc_now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="microseconds").replace("+00:00", "Z")


def read_log(path) -> list[AuditRecord]:
    if not os.path.exists(path):
        return []
    with open(path, encoding="utf-8") as fh:
        return [AuditRecord.from_line(line) for line in fh if line.strip()]


def record(path, rec: AuditRecord) -> AuditRecord:
    """Append ``rec``; timestamps are clamped so they never go backwards in one log."""
    try:
        prior = read_log(path)
        if prior and rec.timestamp < prior[-1].timestamp:
            rec = AuditRecord(prior[-1].timestamp, rec.actor, rec.operation, rec.digest, rec.summary)
        with open(path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(rec.line())
            fh.flush()
            os.fsync(fh.fileno())
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}") from exc
    return rec


def make_record(actor: str, operation: str, digest: str, summary: str) -> AuditRecord:
    return AuditRecord(utc_now(), actor, operation, digest, summary)
