import pytest
from hypothesis import given, settings, strategies as st

from blps.errors import DuplicateLabel, InvalidModel, ParseError, UnknownStatement
from blps.flow import FlowNode, ForkSet, abstract_flow, build_flow, emit_productions
from blps.model import BinOp, Condition, DbField, Literal, Var
from blps.parser import parse_flow_productions, parse_source, print_model, tokenize
from conftest import fixture_text
from strategies import models


def test_billing_labels(billing):
    svc = billing.service("billing")
    assert [e.local for e in svc.elements] == ["BF1", "DR1", "CRr1", "BFr1", "BFr2", "BFf1"]
    assert svc.roots == ("BF1", "DR1", "CRr1")
    assert svc.table["CRr1"].children == ("BFr1", "BFr2", "BFf1")


def test_transact_alias_and_condition(transact):
    svc = transact.service("transact")
    assert svc.flow_name == "transaction"
    cond = svc.table["CRr1"].conditions[0]
    assert cond == Condition(BinOp("-", Var("balance"), Var("amount")), "gt", Literal(1000.0))


def test_empty_service():
    m = parse_source("service s { }")
    assert len(m.services) == 1 and m.services[0].elements == ()


def test_duplicate_label():
    with pytest.raises(DuplicateLabel) as info:
        parse_source("service s {\n  BF1: get a;\n  BF1: get b;\n}")
    assert info.value.index == "s.BF1"
    assert info.value.span.line == 3


def test_unknown_statement():
    with pytest.raises(UnknownStatement) as info:
        parse_source("service s { frob a; }")
    assert info.value.word == "frob"


def test_auto_labels_are_per_kind_ordinals():
    m = parse_source("service s { get a; set b = 1; if ($a == 1) { select x from t; } "
                     "compute c = f($a); update t set x = 1; }")
    assert [e.local for e in m.services[0].elements] == ["BF1", "BF2", "CR1", "DR1", "BF3", "DR2"]


def test_auto_labels_skip_explicit_ones():
    m = parse_source("service s { BF2: get a; get b; get c; }")
    assert [e.local for e in m.services[0].elements] == ["BF2", "BF1", "BF3"]


def test_semicolon_optional_and_comments():
    m = parse_source("// header\nservice s { get a # trailing\n get b }")
    assert len(m.services[0].elements) == 2


def test_db_field_outside_rule_is_invalid():
    with pytest.raises(InvalidModel):
        parse_source("service s { if (db.x == 1) { get a; } }")


def test_invoke_must_resolve():
    with pytest.raises(InvalidModel):
        parse_source("service s { invoke bank(); }")
    m = parse_source("extern service bank;\nservice s { invoke bank(a, b = $c); }")
    assert m.externals == frozenset({"bank"})


@pytest.mark.parametrize("text", [
    "service s { get a, }",
    "service s { if ($a == ) { } }",
    "service { }",
    "service s { get a; ",
    "service s { set x; }",
    'service s { set x = "unterminated; }',
    "service s { get a: int; }",
    "service s { @ }",
])
def test_syntax_errors_carry_spans_inside_input(text):
    with pytest.raises(ParseError) as info:
        parse_source(text)
    span = info.value.span
    assert span is not None and span.line >= 1 and span.column >= 1
    lines = text.split("\n")
    assert span.line <= len(lines)
    assert span.column <= len(lines[span.line - 1]) + 1
    assert info.value.message


def test_comparison_tokens():
    m = parse_source("service s { DR1: select x from t where db.a != $b and db.c >= 2 and db.d <= 3 "
                     "and db.e < 4 and db.f > 5 and db.g == 6; }")
    assert [c.op for c in m.services[0].elements[0].conditions] == ["ne", "ge", "le", "lt", "gt", "eq"]


def test_parenthesized_operand():
    m = parse_source("service s { DR1: update t set x = $a - ($b + db.c); }")
    expr = m.services[0].elements[0].assigns[0].expr
    assert expr == BinOp("-", Var("a"), BinOp("+", Var("b"), DbField("c")))


def test_string_escapes_round_trip():
    m = parse_source('service s { set x = "a\\"b\\\\c\\nd"; }')
    assert m.services[0].elements[0].params[0].value == Literal('a"b\\c\nd')
    assert parse_source(print_model(m)) == m


@pytest.mark.parametrize("name", ["billing.blm", "transact.blm", "transact_5000.blm", "transact_no_drr2.blm",
                                  "empty.blm", "selfloop.blm"])
def test_fixture_round_trip(name):
    m = parse_source(fixture_text(name))
    assert parse_source(print_model(m)) == m
    assert parse_source(fixture_text(name)) == m


@settings(max_examples=200, deadline=None)
@given(models())
def test_print_parse_round_trip(m):
    assert parse_source(print_model(m)) == m


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=st.sampled_from(list("service s{}();:=$ab1\"\n.BFDRCif<>")), max_size=40))
def test_parser_never_crashes_unexpectedly(text):
    try:
        parse_source(text)
    except (ParseError, InvalidModel) as exc:
        span = getattr(exc, "span", None)
        if span is not None:
            assert 1 <= span.line <= text.count("\n") + 1


def test_tokenizer_positions():
    toks = tokenize("service s {\n  get a\n}")
    get = next(t for t in toks if t.text == "get")
    assert (get.span.line, get.span.column, get.span.length) == (2, 3, 3)


# -- flow productions --------------------------------------------------------


def test_flow_two_productions():
    g = parse_flow_productions("billing -> {get}\nget -> {r:select}")
    assert len(g.productions) == 2
    assert g.productions[0].head == FlowNode.abstract("billing")


def test_flow_binding_edge():
    g = parse_flow_productions("transaction -> {set,get} get=compute")
    (p,) = g.productions
    assert p.successors == (FlowNode.abstract("set"), FlowNode.abstract("get"))
    assert p.bindings == ((FlowNode.abstract("get"), FlowNode.abstract("compute")),)


def test_flow_empty():
    g = parse_flow_productions("")
    assert g.productions == () and emit_productions(g) == ""


@pytest.mark.parametrize("arrow", ["->", "→", "\\rightarrow"])
def test_flow_arrow_spellings(arrow):
    g = parse_flow_productions(f"billing {arrow} {{get}}")
    assert emit_productions(g) == "billing -> {get}\n"


def test_flow_fork_and_multihead():
    text = "r:cmp -> {[r:update1, r:update2]}\n{r:update1, r:update2} -> {store}\n"
    g = parse_flow_productions(text)
    assert g.productions[0].successors == (ForkSet((FlowNode.abstract("r:update1"), FlowNode.abstract("r:update2"))),)
    assert len(g.productions[1].heads) == 2
    assert emit_productions(g) == text


def test_flow_parse_errors():
    for bad in ("a -> b", "a {b}", "a -> {b", "-> {b}", "a -> {[b]}"):
        with pytest.raises(ParseError):
            parse_flow_productions(bad)


@settings(max_examples=200, deadline=None)
@given(models())
def test_emitted_flows_parse_back(m):
    for g in (build_flow(m), abstract_flow(m)):
        text = emit_productions(g)
        back = parse_flow_productions(text)
        assert back == g
        assert emit_productions(back) == text
