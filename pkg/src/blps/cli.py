"""Command-line front end: ``blps parse|flow|eval|integrate|diff``.

Exit codes: 0 success, 1 violations or failed property checks, 2 parse or
schema errors, 3 I/O errors, 4 usage errors.  Every failure writes
``error: <category>: <detail>`` as the first line on stderr.
"""

from __future__ import annotations

import argparse
import getpass
import os
import sys
from collections import Counter

from . import audit
from .codec import deserialize, generate_blps, generate_integrated, serialize, to_model
from .contract import load_contract
from .errors import BlpsError, IntegrationError, ParseError, UnknownIndex, UnknownVariable
from .flow import abstract_flow, build_flow, emit_productions
from .integrator import integrate, parse_binding
from .model import BF, CR, DR, LogicModel
from .parser import parse_source
from .properties import evaluate_all, local_list

EXIT_OK, EXIT_VIOLATION, EXIT_PARSE, EXIT_IO, EXIT_USAGE = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class Failure(Exception):
    def __init__(self, code: int, category: str, detail: str):
        self.code, self.category, self.detail = code, category, detail
        super().__init__(detail)


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise Failure(EXIT_IO, "io", f"{path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError as exc:
        raise Failure(EXIT_PARSE, "parse", f"{path}: not UTF-8 ({exc.reason})") from None


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise Failure(EXIT_IO, "io", f"{path}: {exc.strerror or exc}") from None


def _model(path: str) -> LogicModel:
    """Load a ``.blm`` source, or a ``.xml`` BLPS document."""
    text = _read(path)
    try:
        if path.endswith(".xml"):
            return to_model(deserialize(text))
        return parse_source(text, path)
    except BlpsError as exc:
        raise Failure(EXIT_PARSE, exc.category, str(exc)) from None


def _contract(path: str):
    text = _read(path)
    try:
        return load_contract(text)
    except ParseError as exc:
        raise Failure(EXIT_PARSE, "contract", f"{path}: {exc}") from None


def _kind_counts(svc) -> str:
    n = len(svc.elements)
    if not n:
        return f"{svc.name}: 0 elements"
    counts = Counter(e.kind for e in svc.elements)
    parts = [f"{counts[k]} {k.prefix}" for k in (BF, DR, CR) if counts[k]]
    return f"{svc.name}: {n} element{'s' if n != 1 else ''} ({', '.join(parts)})"


def cmd_parse(args, out) -> tuple[int, list]:
    model = _model(args.file)
    for svc in model.services:
        out.write(_kind_counts(svc) + "\n")
    return EXIT_OK, [model]


def cmd_flow(args, out) -> tuple[int, list]:
    model = _model(args.file)
    try:
        graph = abstract_flow(model) if args.abstract else build_flow(model)
    except BlpsError as exc:
        raise Failure(EXIT_PARSE, exc.category, str(exc)) from None
    out.write(emit_productions(graph))
    return EXIT_OK, [model]


def _props_lines(model, ps, services) -> list[str]:
    lines = []
    for svc in services:
        sub = LogicModel((svc,), model.externals)
        own = {e.index for e in svc.elements}
        lines.append(f"service {svc.name}")
        lines.append("CF=" + ",".join(local_list(sub, ps.cf & own)))
        lines.append("TF=" + ",".join(local_list(sub, ps.tf & own)))
        lines.append("AF=" + ",".join(local_list(sub, ps.af & own)))
        lines.append("NAF=" + ",".join(local_list(sub, ps.naf & own)))
    lines.append(f"cost={ps.total_cost}")
    return lines


def cmd_eval(args, out) -> tuple[int, list]:
    model = _model(args.file)
    contract = _contract(args.contract)
    try:
        ps = evaluate_all(model, contract)
    except (UnknownIndex, UnknownVariable) as exc:
        raise Failure(EXIT_VIOLATION, exc.category, str(exc)) from None
    except BlpsError as exc:
        raise Failure(EXIT_PARSE, exc.category, str(exc)) from None
    if args.blps:
        if args.service:
            name = args.service
        elif len(model.services) == 1:
            name = model.services[0].name
        else:
            raise UsageError("--blps needs --service when the file defines several services")
        if name not in model.by_name:
            raise UsageError(f"no service {name!r} in {args.file}")
        _write(args.blps, serialize(generate_blps(model, ps, name)))
    if args.format == "xml":
        out.write(serialize(generate_integrated(model, ps, "evaluation")))
    else:
        out.write("\n".join(_props_lines(model, ps, model.services)) + "\n")
    all_elements = {e.index for e in model.elements()}
    return (EXIT_OK if ps.cf == all_elements else EXIT_VIOLATION), [model]


def cmd_integrate(args, out, err) -> tuple[int, list]:
    try:
        binding = parse_binding(args.bind)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    model_a, model_b = _model(args.file_a), _model(args.file_b)
    contract = _contract(args.contract)
    try:
        result = integrate(model_a, model_b, binding, contract, args.name)
    except (UnknownIndex, IntegrationError) as exc:
        raise Failure(EXIT_VIOLATION, exc.category, str(exc)) from None
    if result.violations:
        first = result.violations[0]
        err.write(f"error: violation: {len(result.violations)} integration violation(s), first {first.kind} on {first.subject}\n")
        for v in result.violations:
            out.write(f"{v.kind}\t{v.subject}\t{v.detail}\n")
        return EXIT_VIOLATION, [model_a, model_b]
    doc = generate_integrated(result.merged, result.properties, args.name)
    if args.output:
        _write(args.output, serialize(doc))
    ps, merged = result.properties, result.merged
    out.write(f"service {args.name}\n")
    out.write("CF=" + ",".join(local_list(merged, ps.cf)) + "\n")
    out.write("TF=" + ",".join(local_list(merged, ps.tf)) + "\n")
    out.write(f"cost={ps.total_cost}\n")
    return EXIT_OK, [model_a, model_b]


def _set_line(label: str, delta) -> str:
    parts = [f"+{i}" for i in sorted(delta.entered)] + [f"-{i}" for i in sorted(delta.left)]
    return f"{label}: " + (" ".join(parts) if parts else "unchanged")


def cmd_diff(args, out) -> tuple[int, list]:
    old, new = _model(args.old), _model(args.new)
    contract = _contract(args.contract)
    try:
        report = audit.impact(old, new, contract)
    except (UnknownIndex, UnknownVariable) as exc:
        raise Failure(EXIT_VIOLATION, exc.category, str(exc)) from None
    ch = report.changes
    if args.format == "xml":
        lines = [f'<impact verdict="{report.verdict}">']
        lines += [f'  <added index="{i}"/>' for i in sorted(ch.added)]
        lines += [f'  <removed index="{i}"/>' for i in sorted(ch.removed)]
        for idx, deltas in ch.modified:
            lines.append(f'  <modified index="{idx}">')
            lines += [f'    <delta field="{_xml_attr(d.field)}" old="{_xml_attr(d.old)}" new="{_xml_attr(d.new)}"/>' for d in deltas]
            lines.append("  </modified>")
        for name in ("cf", "tf", "af", "naf"):
            d = getattr(report, name)
            lines += [f'  <{name} entered="{i}"/>' for i in sorted(d.entered)]
            lines += [f'  <{name} left="{i}"/>' for i in sorted(d.left)]
        lines.append("</impact>")
        out.write("\n".join(lines) + "\n")
    else:
        lines = []
        if ch.empty:
            lines.append("changes: none")
        lines += [f"added {i}" for i in sorted(ch.added)]
        lines += [f"removed {i}" for i in sorted(ch.removed)]
        for idx, deltas in ch.modified:
            lines += [f"modified {idx} {d}" for d in deltas]
        for label in ("CF", "TF", "AF", "NAF"):
            lines.append(_set_line(label, getattr(report, label.lower())))
        lines.append(f"cost: {report.cost[0]} -> {report.cost[1]}")
        lines.append(report.verdict)
        out.write("\n".join(lines) + "\n")
    return (EXIT_OK if report.preserved else EXIT_VIOLATION), [old, new]


def _xml_attr(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def build_parser() -> argparse.ArgumentParser:
    p = _ArgumentParser(prog="blps", description="Business-logic property analysis and service integration.")
    p.add_argument("--audit", metavar="PATH", help="append an audit record for this invocation")
    p.add_argument("--actor", help="actor name for audit records (default: current user)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    s = sub.add_parser("parse", help="summarize a .blm file")
    s.add_argument("file")

    s = sub.add_parser("flow", help="print flow productions")
    s.add_argument("file")
    s.add_argument("--abstract", action="store_true", help="use the get/r:select/r:cmp vocabulary")

    s = sub.add_parser("eval", help="evaluate CF/TF/AF/NAF under a contract")
    s.add_argument("file")
    s.add_argument("--contract", required=True)
    s.add_argument("--blps", metavar="OUT", help="write the service's BLPS document")
    s.add_argument("--service", help="service to write with --blps")
    s.add_argument("--format", choices=("text", "xml"), default="text")

    s = sub.add_parser("integrate", help="integrate two services through a binding")
    s.add_argument("file_a")
    s.add_argument("file_b")
    s.add_argument("--bind", required=True, help="source.INDEX->target(var1,var2,...)")
    s.add_argument("--contract", required=True)
    s.add_argument("--name", required=True, help="outer name of the integrated service")
    s.add_argument("-o", "--output", help="integrated BLPS output path")

    s = sub.add_parser("diff", help="diff two models and report property impact")
    s.add_argument("old")
    s.add_argument("new")
    s.add_argument("--contract", required=True)
    s.add_argument("--format", choices=("text", "xml"), default="text")
    return p


def _audit(args, code: int, models: list, summary: str) -> None:
    digest = ",".join(audit.model_digest(m) for m in models) or "-"
    actor = args.actor or os.environ.get("USER") or getpass.getuser()
    audit.record(args.audit, audit.make_record(actor, args.command, digest, f"exit={code} {summary}".strip()))


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        err.write(f"error: usage: {exc}\n")
        return EXIT_USAGE
    models: list = []
    summary = ""
    try:
        if args.command == "parse":
            code, models = cmd_parse(args, out)
        elif args.command == "flow":
            code, models = cmd_flow(args, out)
        elif args.command == "eval":
            code, models = cmd_eval(args, out)
            if code:
                err.write("error: property: not every element is computable within the budget\n")
        elif args.command == "integrate":
            code, models = cmd_integrate(args, out, err)
        else:
            code, models = cmd_diff(args, out)
            if code:
                err.write("error: property: the change affects the property sets\n")
    except UsageError as exc:
        err.write(f"error: usage: {exc}\n")
        code, summary = EXIT_USAGE, "usage error"
    except Failure as exc:
        err.write(f"error: {exc.category}: {exc.detail}\n")
        code, summary = exc.code, exc.category
    if args.audit:
        try:
            _audit(args, code, models, summary)
        except OSError as exc:
            err.write(f"error: io: audit log {args.audit}: {exc.strerror or exc}\n")
            return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
