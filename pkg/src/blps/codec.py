"""BLPS documents: a canonical, well-formed XML dialect for service logic
plus its evaluated property lists.

Canonical form: two-space indentation, double-quoted attributes, attribute
order ``index, name, type`` then alphabetical, self-closing empty elements,
one trailing newline.  Property lists are comma-separated local labels.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .errors import BlpsError, ParseError, SchemaError, XmlError, DanglingIndex
from .model import (
    Assign, Condition, ElementIndex, Literal, LogicElement, LogicModel, Param, ServiceDef, Var,
    format_number, kind_of_operation, operand_text, validate_model,
)
from .properties import PropertySets, local_list

BLPS_VERSION = "1.0"

# operation -> (tag, name attribute, type attribute)
_XML_OPS = {
    "get": ("function", "get", "input"),
    "set": ("function", "set", "set"),
    "compute": ("function", "compute", "compute"),
    "output": ("function", "assign", "output"),
    "invoke": ("function", "call", "invoke"),
    "receive": ("function", "receive", "receive"),
    "select": ("rule", "select", "data manipulation"),
    "update": ("rule", "update", "data manipulation"),
    "if": ("rule", "if", "conditional"),
}
_OP_OF = {v: k for k, v in _XML_OPS.items()}
_EXTRA_ATTRS = {
    "compute": {"return-type", "store-result", "target-function"},
    "invoke": {"target-service"},
    "select": {"dbname", "store-result"},
    "update": {"dbname", "store-result"},
}
_CHILD_TAGS = {
    "get": {"param"}, "set": {"param"}, "output": {"param"},
    "invoke": {"arg"}, "receive": {"arg"}, "compute": {"arg"},
    "select": {"conditions", "retrieve"},
    "update": {"conditions", "assign"},
    "if": {"conditions", "function", "rule"},
}
_PROPS = (("computability", "CF", "cf"), ("traceability", "TF", "tf"))


@dataclass(frozen=True)
class PropertyBlock:
    cf: tuple[str, ...] = ()
    tf: tuple[str, ...] = ()
    af: tuple[str, ...] = ()
    naf: tuple[str, ...] = ()


@dataclass(frozen=True)
class BlpsDocument:
    name: str
    properties: PropertyBlock = PropertyBlock()
    services: tuple[ServiceDef, ...] = ()
    nested: bool = False  # True when the body wraps inner <service> elements

    @property
    def body_locals(self) -> set[str]:
        return {e.local for s in self.services for e in s.elements}


# -- generation -------------------------------------------------------------


def _block(model: LogicModel, props: PropertySets) -> PropertyBlock:
    return PropertyBlock(
        tuple(local_list(model, props.cf)), tuple(local_list(model, props.tf)),
        tuple(local_list(model, props.af)), tuple(local_list(model, props.naf)),
    )


def generate_blps(model: LogicModel, property_sets: PropertySets, service: str) -> BlpsDocument:
    svc = model.service(service)
    sub = LogicModel((svc,), model.externals | (set(model.by_name) - {service}))
    own = {e.index for e in svc.elements}
    restricted = PropertySets(property_sets.cf & own, property_sets.tf & own,
                              property_sets.af & own, property_sets.naf & own, property_sets.total_cost)
    return BlpsDocument(service, _block(sub, restricted), (svc,), nested=False)


def generate_integrated(model: LogicModel, property_sets: PropertySets, name: str) -> BlpsDocument:
    """Wrap every service of ``model`` under an outer service called ``name``."""
    return BlpsDocument(name, _block(model, property_sets), model.services, nested=True)


# -- serialization ----------------------------------------------------------

Node = tuple  # (tag, [(attr, value)], [children])


def _attr_order(attrs: dict[str, str]) -> list[tuple[str, str]]:
    first = [(k, attrs[k]) for k in ("index", "name", "type") if k in attrs]
    rest = sorted((k, v) for k, v in attrs.items() if k not in ("index", "name", "type"))
    return first + rest


def _value_text(v) -> str:
    if isinstance(v, Var):
        return "$" + v.name
    x = v.value
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format_number(x)
    return "$" + x if x.startswith("$") else x


def _param_node(tag: str, p: Param) -> Node:
    attrs = {"name": p.name, "datatype": p.type}
    if p.value is not None:
        attrs["value"] = _value_text(p.value)
    return (tag, _attr_order(attrs), [])


def _cond_node(tag: str, lvar, op: str, rvar) -> Node:
    return (tag, _attr_order({"lvar": lvar, "expr": op, "rvar": rvar}), [])


def _element_node(svc: ServiceDef, e: LogicElement) -> Node:
    tag, name, typ = _XML_OPS[e.operation]
    attrs = {"index": e.local, "name": name, "type": typ}
    kids: list[Node] = []
    op = e.operation
    if op in ("get", "set", "output"):
        kids = [_param_node("param", p) for p in e.params]
    elif op in ("invoke", "receive"):
        kids = [_param_node("arg", p) for p in e.params]
        if op == "invoke":
            attrs["target-service"] = e.target or ""
    elif op == "compute":
        attrs["target-function"] = e.target or ""
        attrs["store-result"] = e.result or ""
        attrs["return-type"] = e.result_type or "double"
        kids = [("arg", [("value", operand_text(a))], []) for a in e.args]
    if op in ("select", "update"):
        attrs["dbname"] = e.table or ""
        if e.result:
            attrs["store-result"] = e.result
    if e.conditions:
        kids.append(("conditions", [], [
            _cond_node("condition", operand_text(c.lvar), c.op, operand_text(c.rvar)) for c in e.conditions
        ]))
    if op == "select":
        kids.extend(("retrieve", [("param", r)], []) for r in e.retrieves)
    if op == "update":
        kids.extend(_cond_node("assign", a.field, "eq", operand_text(a.expr)) for a in e.assigns)
    if op == "if":
        kids.extend(_element_node(svc, svc.table[c]) for c in e.children)
    return (tag, _attr_order(attrs), kids)


def _service_attrs(name: str, svc: ServiceDef | None) -> list[tuple[str, str]]:
    attrs = {"name": name}
    if svc is not None and svc.alias:
        attrs["flow-name"] = svc.alias
    return _attr_order(attrs)


def _service_body(svc: ServiceDef) -> list[Node]:
    return [_element_node(svc, svc.table[r]) for r in svc.roots]


def _property_node(pb: PropertyBlock) -> Node:
    kids: list[Node] = []
    for tag, attr, field_ in _PROPS:
        vals = getattr(pb, field_)
        if vals:
            kids.append((tag, [(attr, ",".join(vals))], []))
    if pb.af or pb.naf:
        kids.append(("accessibility", [("AF", ",".join(pb.af)), ("NAF", ",".join(pb.naf))], []))
    return ("property", [], kids)


def _escape(v: str) -> str:
    return (v.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
             .replace("\n", "&#10;").replace("\r", "&#13;").replace("\t", "&#9;"))


def _write(node: Node, depth: int, out: list[str]) -> None:
    tag, attrs, kids = node
    pad = "  " * depth
    a = "".join(f' {k}="{_escape(v)}"' for k, v in attrs)
    if not kids:
        out.append(f"{pad}<{tag}{a}/>")
        return
    out.append(f"{pad}<{tag}{a}>")
    for k in kids:
        _write(k, depth + 1, out)
    out.append(f"{pad}</{tag}>")


def to_tree(doc: BlpsDocument) -> Node:
    kids: list[Node] = [_property_node(doc.properties)]
    if doc.nested:
        kids.extend(("service", _service_attrs(s.name, s), _service_body(s)) for s in doc.services)
        return ("service", _service_attrs(doc.name, None), kids)
    svc = doc.services[0] if doc.services else None
    if svc is not None:
        kids.extend(_service_body(svc))
    return ("service", _service_attrs(doc.name, svc), kids)


def serialize(doc: BlpsDocument) -> str:
    out: list[str] = []
    _write(to_tree(doc), 0, out)
    return "\n".join(out) + "\n"


# -- deserialization --------------------------------------------------------


def _check_attrs(el: ET.Element, allowed: set[str], required: set[str] = frozenset()) -> None:
    for k in el.attrib:
        if k not in allowed:
            raise SchemaError(el.tag, f"unknown attribute {k!r}")
    for k in required:
        if k not in el.attrib:
            raise SchemaError(el.tag, f"missing attribute {k!r}")
    if el.text and el.text.strip():
        raise SchemaError(el.tag, "unexpected text content")
    for child in el:
        if child.tail and child.tail.strip():
            raise SchemaError(el.tag, "unexpected text content")


def _operand(text: str, where: str):
    from .parser import _Parser
    try:
        p = _Parser(text, where)
        op = p.operand()
        if p.tok.kind != "eof":
            raise p.error("trailing input in operand")
        return op
    except ParseError as exc:
        raise SchemaError(where, f"bad operand {text!r}: {exc.message}") from None


def _value(text: str, datatype: str, where: str):
    if text.startswith("$$"):
        return Literal(text[1:])
    if text.startswith("$"):
        name = text[1:]
        if not name.replace("_", "a").isalnum():
            raise SchemaError(where, f"bad variable reference {text!r}")
        return Var(name)
    if datatype == "double":
        try:
            return Literal(float(text))
        except ValueError:
            raise SchemaError(where, f"{text!r} is not a double") from None
    if datatype == "boolean":
        if text not in ("true", "false"):
            raise SchemaError(where, f"{text!r} is not a boolean")
        return Literal(text == "true")
    return Literal(text)


def _params(el: ET.Element, tag: str) -> tuple[Param, ...]:
    out = []
    for child in el:
        if child.tag != tag:
            raise SchemaError(el.tag, f"unexpected <{child.tag}>")
        _check_attrs(child, {"name", "datatype", "value"}, {"name", "datatype"})
        if list(child):
            raise SchemaError(tag, "unexpected children")
        dt = child.get("datatype")
        if dt not in ("string", "double", "boolean"):
            raise SchemaError(tag, f"unknown datatype {dt!r}")
        v = child.get("value")
        out.append(Param(child.get("name"), dt, None if v is None else _value(v, dt, tag)))
    return tuple(out)


def _conditions(el: ET.Element) -> tuple[Condition, ...]:
    _check_attrs(el, set())
    out = []
    for c in el:
        if c.tag != "condition":
            raise SchemaError("conditions", f"unexpected <{c.tag}>")
        _check_attrs(c, {"lvar", "expr", "rvar"}, {"lvar", "expr", "rvar"})
        if c.get("expr") not in ("eq", "ne", "gt", "lt", "ge", "le"):
            raise SchemaError("condition", f"unknown expr {c.get('expr')!r}")
        out.append(Condition(_operand(c.get("lvar"), "condition"), c.get("expr"), _operand(c.get("rvar"), "condition")))
    return tuple(out)


def _element(service: str, el: ET.Element, out: list[LogicElement]) -> str:
    key = (el.tag, el.get("name"), el.get("type"))
    op = _OP_OF.get(key)
    if op is None:
        raise SchemaError(el.tag, f"unknown element kind name={key[1]!r} type={key[2]!r}")
    _check_attrs(el, {"index", "name", "type"} | _EXTRA_ATTRS.get(op, set()), {"index", "name", "type"})
    local = el.get("index")
    slot = len(out)
    out.append(None)
    fields: dict = {}
    for child in el:
        if child.tag not in _CHILD_TAGS[op]:
            raise SchemaError(el.tag, f"unexpected <{child.tag}> in {op}")
    if op in ("get", "set", "output"):
        fields["params"] = _params(el, "param")
    elif op in ("invoke", "receive"):
        fields["params"] = _params(el, "arg")
        if op == "invoke":
            if "target-service" not in el.attrib:
                raise SchemaError(el.tag, "missing attribute 'target-service'")
            fields["target"] = el.get("target-service")
    elif op == "compute":
        for k in ("target-function", "store-result", "return-type"):
            if k not in el.attrib:
                raise SchemaError(el.tag, f"missing attribute {k!r}")
        fields.update(target=el.get("target-function"), result=el.get("store-result"),
                      result_type=el.get("return-type"))
        args = []
        for a in el:
            _check_attrs(a, {"value"}, {"value"})
            args.append(_operand(a.get("value"), "arg"))
        fields["args"] = tuple(args)
    else:
        if op in ("select", "update"):
            if "dbname" not in el.attrib:
                raise SchemaError(el.tag, "missing attribute 'dbname'")
            fields["table"] = el.get("dbname")
            fields["result"] = el.get("store-result")
        retrieves, assigns, children = [], [], []
        conds = [c for c in el if c.tag == "conditions"]
        if len(conds) > 1:
            raise SchemaError(el.tag, "more than one <conditions>")
        if conds:
            fields["conditions"] = _conditions(conds[0])
        for c in el:
            if c.tag == "retrieve":
                _check_attrs(c, {"param"}, {"param"})
                retrieves.append(c.get("param"))
            elif c.tag == "assign":
                _check_attrs(c, {"lvar", "expr", "rvar"}, {"lvar", "expr", "rvar"})
                if c.get("expr") != "eq":
                    raise SchemaError("assign", "assignments use expr=\"eq\"")
                assigns.append(Assign(c.get("lvar"), _operand(c.get("rvar"), "assign")))
            elif c.tag in ("function", "rule"):
                children.append(_element(service, c, out))
        if op == "select":
            fields["retrieves"] = tuple(retrieves)
        if op == "update":
            fields["assigns"] = tuple(assigns)
        fields["children"] = tuple(children)
    out[slot] = LogicElement(ElementIndex(service, local), kind_of_operation(op), op, **fields)
    return local


def _service(el: ET.Element, allow_property: bool) -> tuple[ServiceDef, list[ET.Element]]:
    elements: list[LogicElement] = []
    rest = []
    for child in el:
        if child.tag in ("function", "rule"):
            _element(el.get("name"), child, elements)
        else:
            rest.append(child)
    return ServiceDef.build(el.get("name"), elements, el.get("flow-name")), rest


def _split(value: str) -> tuple[str, ...]:
    return tuple(v for v in value.split(",")) if value else ()


def _property(el: ET.Element) -> PropertyBlock:
    _check_attrs(el, set())
    found: dict[str, tuple[str, ...]] = {}
    for child in el:
        if child.tag == "computability":
            _check_attrs(child, {"CF"}, {"CF"})
            keys = {"cf": child.get("CF")}
        elif child.tag == "traceability":
            _check_attrs(child, {"TF"}, {"TF"})
            keys = {"tf": child.get("TF")}
        elif child.tag == "accessibility":
            _check_attrs(child, {"AF", "NAF"}, {"AF", "NAF"})
            keys = {"af": child.get("AF"), "naf": child.get("NAF")}
        else:
            raise SchemaError("property", f"unexpected <{child.tag}>")
        for k, v in keys.items():
            if k in found:
                raise SchemaError("property", f"duplicate {child.tag}")
            vals = _split(v)
            if any(not x for x in vals):
                raise SchemaError(child.tag, "empty entry in index list")
            found[k] = vals
    return PropertyBlock(**found)


def deserialize(text: str) -> BlpsDocument:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise XmlError(f"malformed XML: {exc.msg if hasattr(exc, 'msg') else exc}", exc.position) from None
    if root.tag != "service":
        raise SchemaError(root.tag, "document root must be <service>")
    _check_attrs(root, {"name", "flow-name"}, {"name"})
    kids = list(root)
    if not kids or kids[0].tag != "property":
        raise SchemaError("service", "first child must be <property>")
    props = _property(kids[0])
    body = kids[1:]
    inner = [k for k in body if k.tag == "service"]
    if inner and len(inner) != len(body):
        raise SchemaError("service", "cannot mix inner services and elements")
    if inner:
        if "flow-name" in root.attrib:
            raise SchemaError("service", "outer service takes no flow-name")
        services = []
        for s in inner:
            _check_attrs(s, {"name", "flow-name"}, {"name"})
            svc, rest = _service(s, allow_property=False)
            if rest:
                raise SchemaError("service", f"unexpected <{rest[0].tag}>")
            services.append(svc)
        doc = BlpsDocument(root.get("name"), props, tuple(services), nested=True)
    else:
        for k in body:
            if k.tag not in ("function", "rule"):
                raise SchemaError("service", f"unexpected <{k.tag}>")
        holder = ET.Element("service", root.attrib)
        holder.extend(body)
        svc, _ = _service(holder, allow_property=False)
        doc = BlpsDocument(root.get("name"), props, (svc,), nested=False)
    locals_ = doc.body_locals
    for attr, vals in (("CF", props.cf), ("TF", props.tf), ("AF", props.af), ("NAF", props.naf)):
        for v in vals:
            if v not in locals_:
                raise DanglingIndex(v, attr)
    return doc


def to_model(doc: BlpsDocument) -> LogicModel:
    names = {s.name for s in doc.services}
    externals = {e.target for s in doc.services for e in s.elements
                 if e.operation == "invoke" and e.target and e.target not in names}
    model = LogicModel(doc.services, frozenset(externals))
    report = validate_model(model)
    if report:
        v = report.violations[0]
        raise SchemaError("service", str(v))
    return model


def read_blps(path) -> BlpsDocument:
    with open(path, encoding="utf-8") as fh:
        return deserialize(fh.read())


def write_blps(doc: BlpsDocument, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize(doc))
