import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaselab.model import (
    Atom,
    Constant,
    Instance,
    SkolemApp,
    SkolemFunction,
    Variable,
    contains_properly,
    map_term,
    render_term,
    make_rule,
    validate_program,
)
from chaselab.parser import (
    ParseError,
    format_term,
    load_program,
    parse_instance,
    parse_program,
    print_instance,
    print_program,
)

from conftest import random_program

f0 = SkolemFunction("r", 0)


def test_terms_are_hash_consed():
    a = Constant("a")
    assert Constant("a") is a
    assert Variable("X") is Variable("X")
    t = SkolemApp(f0, (a,))
    assert SkolemApp(f0, (Constant("a"),)) is t
    assert t.depth == 1 and t.ground
    assert SkolemApp(f0, (Variable("X"),)).ground is False


def test_deep_terms_format_and_sort_without_recursion():
    t = Constant("a")
    for _ in range(5000):
        t = SkolemApp(f0, (t,))
    assert t.depth == 5000
    assert render_term(t, limit=None).count("(") == 5000
    assert format_term(t).startswith("h_r_0#")
    assert repr(t)
    u = Constant("b")
    for _ in range(5000):
        u = SkolemApp(f0, (u,))
    assert sorted([t, u], key=lambda x: x.sort_key) in ([t, u], [u, t])
    assert t.sort_key != u.sort_key


def test_contains_properly_and_map_term():
    a, b = Constant("a"), Constant("b")
    t = SkolemApp(f0, (SkolemApp(f0, (a,)),))
    assert contains_properly(t, a)
    assert contains_properly(t, SkolemApp(f0, (a,)))
    assert not contains_properly(t, t)
    assert not contains_properly(a, a)
    assert map_term(t, {a: b}) is SkolemApp(f0, (SkolemApp(f0, (b,)),))


def test_rule_parts():
    r = parse_program("[e] G(X,Y), H(Y) -> exists Z: E(Z,X), E(X,Z).").rules[0]
    assert [v.name for v in r.frontier] == ["X"]
    assert [v.name for v in r.existentials] == ["Z"]
    assert not r.is_single_head
    assert make_rule("d", r.body, (Atom("H", (Variable("X"),)),)).is_datalog


def test_unlabeled_rules_get_positional_ids():
    prog = parse_program("E(X,Y) -> E(Y,X).\nE(X,Y) -> exists Z: E(Y,Z).")
    assert prog.rule_ids() == ["r1", "r2"]


def test_print_program_round_trip_on_corpus(corpus):
    for path in sorted(corpus.glob("*.dlge")):
        prog = load_program(path)
        text = print_program(prog)
        assert parse_program(text) == prog, path.name
        assert print_program(parse_program(text)) == text


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_round_trip_random_programs(rng):
    prog = random_program(rng)
    assert parse_program(print_program(prog)) == prog


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.sampled_from(["E", "H", "Rel_2"]),
            st.lists(st.text(alphabet="ab c\"\\1_", min_size=1, max_size=4), min_size=2, max_size=2),
        ),
        max_size=8,
    )
)
def test_instance_round_trip(rows):
    inst = Instance(Atom(rel, tuple(Constant(x) for x in args)) for rel, args in rows)
    assert parse_instance(print_instance(inst)) == inst


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("E(X,Y) -> E(Y,X)", "expected '.'"),
        ("E(X,Y) -> E(Y,X,Z).", "arity"),
        ("@signature E/2.\nE(X) -> E(X,X).", "arity mismatch with @signature"),
        ("E(X,Y) -> exists Y: E(Y,Y).", "existential"),
        ("E(X,", "expected a term"),
    ],
)
def test_parse_errors_carry_diagnostics(text, fragment):
    with pytest.raises(ParseError) as info:
        parse_program(text)
    assert fragment in str(info.value)
    assert info.value.diagnostics


def test_undeclared_relations_are_inferred():
    prog = parse_program("@signature E/2.\nF(X) -> E(X,X).")
    assert prog.signature.arity("F") == 1


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as info:
        parse_program("E(X,Y) -> E(Y,X).\nE(X Y) -> E(X,X).")
    assert info.value.diagnostics[0].line == 2


def test_ground_facts_reject_variables():
    with pytest.raises(ParseError):
        parse_instance("E(a,X).")


def test_domain_variables_need_opt_in(corpus):
    prog = load_program(corpus / "flooding.dlge")
    assert any("unsafe head variable" in str(d) for d in validate_program(prog))
    assert validate_program(prog, allow_domain_variables=True) == []


def test_instance_indexes():
    inst = parse_instance("E(a,b). E(b,c). H(a).")
    a, b = Constant("a"), Constant("b")
    assert [f.args[1] for f in inst.lookup("E", 0, a)] == [b]
    assert len(inst.relation("E")) == 2
    assert inst.adom_ordered()[:2] == [a, b]
    assert len(inst.restrict(["H"])) == 1
    copy = inst.copy()
    copy.add(Atom("H", (b,)))
    assert len(inst) == 3 and len(copy) == 4
