"""Matching and substitution, cross-checked against the brute-force oracle."""

import pytest
from hypothesis import given, strategies as st
from random import Random

from clslr.matching import (
    MatchCapError,
    UnboundVariableError,
    match,
    subst_seq,
    substitute,
)
from clslr.terms import (
    EPS,
    Element,
    ElemVar,
    Loop,
    Par,
    PlainRule,
    Seq,
    SeqVar,
    TermVar,
    equiv,
    normalize,
    seq,
)

from oracles import (
    canonical_results,
    oracle_match,
    random_ground_term,
    random_instantiation,
    random_pattern,
)

a, b, c = Element("a"), Element("b"), Element("c")
u, v = SeqVar("u"), SeqVar("v")
x = ElemVar("x")
X = TermVar("X")


# -- substitution

def test_subst_seq_splices():
    items = (u, a, x)
    inst = {u: (b, c), x: a}
    assert subst_seq(items, inst) == (b, c, a, a)
    assert subst_seq((u,), {u: ()}) == ()


def test_substitute_normalizes_result():
    p = Par((Seq((u,)), X))
    inst = {u: (a,), X: EPS}
    assert substitute(p, inst) == seq("a")


def test_substitute_requires_all_variables():
    with pytest.raises(UnboundVariableError):
        substitute(Seq((u,)), {})


def test_substitute_leaves_rule_bodies_alone():
    r = PlainRule(Seq((x,)), Seq((x,)))
    p = Par((r, Seq((x,))))
    out = substitute(p, {x: a})
    assert normalize(out) == normalize(Par((r, seq("a"))))


# -- basic matching shapes  [DERIVED] by hand

def test_match_element_variable_single_element():
    res = match(Seq((x,)), seq("a"))
    assert res == [{x: a}]
    assert match(Seq((x,)), seq("a", "b")) == []
    assert match(Seq((x,)), EPS) == []


def test_match_seq_variable_all_splits():
    res = match(Seq((u, v)), seq("a", "b"))
    images = {(inst[u], inst[v]) for inst in res}
    assert images == {((), (a, b)), ((a,), (b,)), ((a, b), ())}


def test_match_seq_variable_may_be_empty():
    assert match(Seq((u,)), EPS) == [{u: ()}]


def test_match_nonlinear_seq_variable():
    res = match(Seq((u, a, u)), seq("b", "a", "b"))
    assert res == [{u: (b,)}]
    assert match(Seq((u, a, u)), seq("b", "a", "c")) == []


def test_match_term_variable_whole_and_parts():
    t = normalize(Par((seq("a"), seq("b"))))
    res = match(X, t)
    assert res == [{X: t}]
    res2 = match(Par((X, seq("a"))), t)
    assert res2 == [{X: seq("b")}]


def test_match_term_variable_can_vanish():
    res = match(Par((X, seq("a"))), seq("a"))
    assert res == [{X: EPS}]


def test_match_loop_rotations():
    p = Loop((u,), EPS)
    t = Loop((a, b), EPS)
    images = {inst[u] for inst in match(p, t)}
    assert images == {(a, b), (b, a)}


def test_match_loop_against_eps():
    # the empty loop around the empty term is congruent to eps
    p = Loop((u,), X)
    res = match(p, EPS)
    assert res == [{u: (), X: EPS}]


def test_match_rule_occurrence_by_equality():
    r = PlainRule(seq("a"), seq("b"))
    assert match(r, r) == [{}]
    r2 = PlainRule(Par((seq("a"), seq("c"))), seq("b"))
    r2b = PlainRule(Par((seq("c"), seq("a"))), seq("b"))
    assert match(r2, r2b) == [{}]  # congruent rules are equal occurrences
    assert match(r, r2) == []


def test_match_requires_ground_target():
    with pytest.raises(ValueError):
        match(seq("a"), Seq((u,)))


def test_match_deduplicates_congruent_decompositions():
    # two identical members give one instantiation, not two
    t = normalize(Par((seq("a"), seq("a"))))
    res = match(Par((X, seq("a"))), t)
    assert res == [{X: seq("a")}]


def test_match_order_is_deterministic():
    t = seq("a", "b", "c")
    r1 = match(Seq((u, v)), t)
    r2 = match(Seq((u, v)), t)
    assert r1 == r2
    splits = [(inst[u], inst[v]) for inst in r1]
    assert splits == sorted(splits, key=lambda s: len(s[0]))


def test_match_cap_enforced():
    pat = Seq((SeqVar("u1"), SeqVar("u2"), SeqVar("u3"), SeqVar("u4")))
    t = Seq(tuple(Element("a") for _ in range(12)))
    with pytest.raises(MatchCapError):
        match(pat, t, cap=50)


# -- oracle agreement

def _agree(p, t):
    got = canonical_results(match(p, t))
    want = oracle_match(p, t)
    assert got == want, (str(p), str(t), got, want)


def test_oracle_agreement_handpicked():
    cases = [
        (Seq((u, x)), seq("a", "b")),
        (Seq((u, x, v)), seq("a", "b", "c")),
        (Par((X, Seq((u,)))), normalize(Par((seq("a"), seq("b", "c"))))),
        (Loop((u,), Seq((x,))), Loop((a, b), seq("c"))),
        (Par((X, TermVar("Y"))), normalize(Par((seq("a"), seq("b"))))),
        (Seq((u, v)), EPS),
        (Par((Loop((u,), X), Seq((v,)))),
         normalize(Par((Loop((a,), seq("b")), seq("c"))))),
    ]
    for p, t in cases:
        _agree(p, t)


@given(st.integers(0, 5_000))
def test_oracle_agreement_random_pairs(n):
    rng = Random(n)
    p = random_pattern(rng, 1)
    t = random_ground_term(rng, 1)
    _agree(p, t)


@given(st.integers(0, 5_000))
def test_oracle_agreement_planted_matches(n):
    rng = Random(n)
    p = random_pattern(rng, 1, rules_ok=False)
    inst = random_instantiation(rng, p)
    t = substitute(p, inst)
    _agree(p, t)


# -- soundness and completeness properties

@given(st.integers(0, 5_000))
def test_match_soundness(n):
    rng = Random(n)
    p = random_pattern(rng, 1)
    t = random_ground_term(rng, 1)
    for inst in match(p, t):
        assert substitute(p, inst) == normalize(t)


@given(st.integers(0, 5_000))
def test_match_finds_planted_instantiation(n):
    rng = Random(n)
    p = random_pattern(rng, 1, rules_ok=False)
    inst = random_instantiation(rng, p)
    t = substitute(p, inst)
    results = canonical_results(match(p, t))
    assert frozenset(inst.items()) in results


@given(st.integers(0, 5_000))
def test_match_has_no_duplicates(n):
    rng = Random(n)
    p = random_pattern(rng, 1)
    t = random_ground_term(rng, 1)
    res = match(p, t)
    keys = [frozenset(inst.items()) for inst in res]
    assert len(keys) == len(set(keys))
