"""Redex discovery, the four schemas, freeze discipline, traces."""

import pytest
from hypothesis import given, strategies as st
from random import Random

from clslr.engine import (
    ReductionLabel,
    StaleLabelError,
    StepCapError,
    Trace,
    apply_label,
    compartment_sites,
    find_redexes,
    node_at,
    parallel_reduce,
    replace_at,
    replay,
    run,
    verify_decomposition,
)
from clslr.syntax import parse_global_text, parse_pattern_text
from clslr.terms import (
    EPS,
    Element,
    Frozen,
    GlobalRule,
    Loop,
    Par,
    PlainRule,
    Seq,
    equiv,
    erase,
    has_marks,
    normalize,
    seq,
)

from oracles import random_ground_term

P = parse_pattern_text
G = parse_global_text


def schemas(labels):
    return [lbl.schema for lbl in labels]


# -- context navigation

def test_node_at_and_replace_at():
    t = normalize(P("a | loop(m)[ b | c ]"))
    # members sort canonically: a, loop(m)[b | c]
    assert node_at(t, (1, "loop")) == normalize(P("b | c"))
    assert node_at(t, (1, "loop", 0)) == seq("b")
    got = normalize(replace_at(t, (1, "loop", 0), seq("d")))
    assert got == normalize(P("a | loop(m)[ d | c ]"))
    with pytest.raises(StaleLabelError):
        node_at(t, (0, "loop"))
    with pytest.raises(StaleLabelError):
        node_at(t, (5,))


def test_compartment_sites_innermost_first():
    t = normalize(P("a | loop(m)[ loop(w)[ b ] | c ]"))
    paths = [p for p, _ in compartment_sites(t)]
    assert paths[-1] == ()
    inner = paths.index((1, "loop", 1, "loop"))
    outer = paths.index((1, "loop"))
    assert inner < outer


def test_compartment_sites_skip_frozen_subtrees():
    t = normalize(Par((Frozen(Loop((Element("m"),), seq("a"))), seq("b"))))
    paths = [p for p, _ in compartment_sites(t)]
    assert paths == [()]


# -- global rewrites

def test_global_rewrite_at_root():
    labels = find_redexes([G("a => b")], P("a | c"))
    assert schemas(labels) == ["GRT"]
    mt = apply_label(P("a | c"), labels[0])
    assert has_marks(mt)
    assert normalize(erase(mt)) == normalize(P("b | c"))


def test_global_rewrite_inside_membranes():
    t = P("loop(m)[ a ]")
    labels = find_redexes([G("a => b")], t)
    assert len(labels) == 1
    assert labels[0].path == ("loop",)
    assert normalize(erase(apply_label(t, labels[0]))) == normalize(P("loop(m)[ b ]"))


def test_global_selection_must_be_nonempty():
    # the eps selection of ~u is not a redex
    labels = find_redexes([G("~u => ~u.a")], P("b"))
    assert len(labels) == 1
    (lbl,) = labels
    assert dict(lbl.binding)[list(dict(lbl.binding))[0]] == (Element("b"),)


def test_global_rule_variable_selections_are_separate_labels():
    labels = find_redexes([G("?x => ?x.?x")], P("a | b"))
    assert len(labels) == 2
    finals = {normalize(erase(apply_label(P("a | b"), lbl))) for lbl in labels}
    assert finals == {normalize(P("a.a | b")), normalize(P("a | b.b"))}


def test_global_rhs_needing_unmatchable_binding_is_skipped():
    # ?y occurs only inside a rule literal on the lhs; matching binds nothing
    g = GlobalRule(P("{ ?y => ?y }"), Seq((__import__("clslr").ElemVar("y"),)))
    labels = find_redexes([g], P("{ ?y => ?y }"))
    assert labels == []


def test_global_rewrite_takes_whole_multiset():
    t = P("a | a | b")
    labels = find_redexes([G("a | a => c")], t)
    assert len(labels) == 1
    assert normalize(erase(apply_label(t, labels[0]))) == normalize(P("b | c"))


# -- local plain rewrites

def test_local_rule_rewrites_sibling():
    t = P("c | { c => d }")
    labels = find_redexes([], t)
    assert schemas(labels) == ["LR"]
    mt = apply_label(t, labels[0])
    assert normalize(erase(mt)) == normalize(P("d | { c => d }"))


def test_local_rule_does_not_fire_without_its_material():
    assert find_redexes([], P("{ c => d }")) == []
    # and not on material in another compartment
    assert find_redexes([], P("{ c => d } | loop(m)[ c ]")) == []


def test_local_rule_residue_records_leftover_siblings():
    t = P("a | c | { c => d }")
    (lbl,) = find_redexes([], t)
    assert lbl.residue == seq("a")


def test_identical_redexes_collapse_to_one_label():
    t = P("a | a | { a => b }")
    labels = find_redexes([], t)
    assert len(labels) == 1


def test_rule_occurrence_matches_not_itself():
    # the rule is not part of the matched material
    t = P("{ a => b }")
    assert find_redexes([], t) == []


# -- out rewrites

def test_out_rule_crosses_and_freezes_membrane():
    t = P("loop(m)[ { a ^ m => b ^ m } | a ]")
    labels = find_redexes([], t)
    assert schemas(labels) == ["LR-Out"]
    assert labels[0].path == ()
    mt = apply_label(t, labels[0])
    # the crossed membrane is frozen within the step
    inner = [m for m in mt.parts if isinstance(m, Loop)]
    assert inner[0].mem_frozen
    assert normalize(erase(mt)) == normalize(
        P("b | loop(m)[ { a ^ m => b ^ m } ]"))


def test_out_rule_membrane_variable_binds_membrane():
    t = P("loop(m.w)[ { a ^ ~z => a ^ ~z.~z } | a ]")
    labels = find_redexes([], t)
    # one label per membrane rotation; they land on congruent results here
    assert len(labels) == 2
    finals = {normalize(erase(apply_label(t, lbl))) for lbl in labels}
    assert len(finals) == 1
    mems = [m.membrane for m in finals.pop().parts if isinstance(m, Loop)]
    # ~z bound to a rotation of the membrane, duplicated on exit
    assert len(mems[0]) == 4


def test_out_rule_blocked_by_frozen_membrane():
    t = normalize(Loop((Element("m"),),
                       P("{ a ^ m => b ^ m } | a"), mem_frozen=True))
    assert find_redexes([], t) == []


def test_out_rule_only_crosses_once_per_step():
    t = P("loop(m)[ { a ^ m => a ^ m } | a | a ]")
    tr = parallel_reduce(t, [])
    assert len(tr.rounds[0]) == 1
    # the second copy leaves in the next parallel step
    tr2 = run(t, [], steps=2)
    assert len(tr2.labels) == 2
    assert normalize(tr2.final) == normalize(
        P("a | a | loop(m)[ { a ^ m => a ^ m } ]"))


# -- in rewrites

def test_in_rule_sends_material_into_sibling():
    t = P("{ a @ m => b @ m } | a | loop(m)[ c ]")
    labels = find_redexes([], t)
    assert schemas(labels) == ["LR-In"]
    assert labels[0].residue == seq("c")
    mt = apply_label(t, labels[0])
    assert normalize(erase(mt)) == normalize(
        P("{ a @ m => b @ m } | loop(m)[ b | c ]"))


def test_in_rule_distinguishes_targets_by_residue():
    t = P("{ a @ m => a @ m } | a | loop(m)[ b ] | loop(m)[ c ]")
    labels = find_redexes([], t)
    assert len(labels) == 2
    by_residue = {lbl.residue: lbl for lbl in labels}
    mt = apply_label(t, by_residue[seq("c")])
    assert normalize(erase(mt)) == normalize(
        P("{ a @ m => a @ m } | loop(m)[ b ] | loop(m)[ a | c ]"))


def test_in_rule_identical_targets_one_label():
    t = P("{ a @ m => a @ m } | a | loop(m)[ b ] | loop(m)[ b ]")
    labels = find_redexes([], t)
    assert len(labels) == 1


def test_in_rule_freezes_target_membrane():
    t = P("{ a @ m => a @ m } | a | a | loop(m)[ b ]")
    tr = parallel_reduce(t, [])
    assert len(tr.rounds[0]) == 1  # the second copy finds no unfrozen target


# -- freeze discipline

def test_produced_material_is_not_rematched_within_a_step():
    tr = parallel_reduce(P("c | { c => c }"), [])
    assert len(tr.rounds[0]) == 1
    assert normalize(tr.final) == normalize(P("c | { c => c }"))


def test_produced_rules_fire_only_next_step():
    t = P("a | b")
    tr = run(t, [G("a => { b => c }")], steps=2)
    assert [len(r) for r in tr.rounds] == [1, 1]
    assert normalize(tr.final) == normalize(P("c | { b => c }"))


def test_marks_are_erased_between_steps():
    tr = parallel_reduce(P("a"), [G("a => b")])
    assert not has_marks(tr.final)


# -- strategies

def test_single_strategy_applies_first_label():
    t = P("a | a | { a => b }")
    tr = run(t, [], strategy="single", steps=1)
    assert len(tr.labels) == 1


def test_random_k_is_seeded_and_bounded():
    t = P("a | b | c | { a => d } | { b => d } | { c => d }")
    tr1 = run(t, [], strategy="random-k", k=2, seed=7)
    tr2 = run(t, [], strategy="random-k", k=2, seed=7)
    assert tr1 == tr2
    assert len(tr1.rounds[0]) == 2
    tr3 = run(t, [], strategy="random-k", k=2, seed=8)
    assert len(tr3.rounds[0]) == 2


def test_maximal_strategy_exhausts_redexes():
    t = P("a | b | { a => c } | { b => c }")
    tr = parallel_reduce(t, [])
    assert len(tr.rounds[0]) == 2
    assert normalize(tr.final) == normalize(P("c | c | { a => c } | { b => c }"))


def test_run_stops_early_when_nothing_applies():
    tr = run(P("a"), [G("b => c")], steps=5)
    assert tr.rounds == ()
    assert normalize(tr.final) == seq("a")


def test_empty_rule_set_means_no_steps():
    t = random_ground_term(Random(3), 2, rules_ok=False)
    tr = parallel_reduce(t, [])
    assert tr.rounds == ()
    assert equiv(tr.final, t)


def test_strategy_validation():
    with pytest.raises(ValueError):
        run(P("a"), [], strategy="bogus")
    with pytest.raises(ValueError):
        run(P("a"), [], strategy="random-k")  # k missing
    with pytest.raises(ValueError):
        run(P("a"), [], strategy="maximal", k=3)


def test_step_cap():
    t = P("c | c | c | c | c | { c => d }")
    with pytest.raises(StepCapError):
        parallel_reduce(t, [], step_cap=3)


def test_run_rejects_marked_start():
    with pytest.raises(ValueError):
        run(Frozen(seq("a")), [])


# -- labels, replay, verification

def test_apply_label_is_stale_on_other_terms():
    (lbl,) = find_redexes([], P("c | { c => d }"))
    with pytest.raises(StaleLabelError):
        apply_label(P("a"), lbl)


def test_apply_label_stale_when_material_frozen():
    t = P("c | { c => d }")
    (lbl,) = find_redexes([], t)
    frozen = normalize(Par((Frozen(seq("c")), P("{ c => d }"))))
    with pytest.raises(StaleLabelError):
        apply_label(frozen, lbl)


def test_trace_replays_to_final():
    t = P("loop(m)[ { a ^ m => b ^ m } | a | c | { c => d } ]")
    tr = run(t, [G("d => e")], steps=3)
    assert replay(tr) == normalize(tr.final)
    assert verify_decomposition(tr)


def test_verify_rejects_tampered_final():
    tr = run(P("a"), [G("a => b")], steps=1)
    bad = Trace(tr.initial, tr.rounds, seq("z"), tr.seed, tr.strategy, tr.k)
    assert not verify_decomposition(bad)


def test_verify_rejects_reordered_conflicting_labels():
    # two copies of the same label cannot both consume the single a
    tr = run(P("a"), [G("a => b")], steps=1)
    lbl = tr.rounds[0][0]
    bad = Trace(tr.initial, ((lbl, lbl),), tr.final, tr.seed, tr.strategy, tr.k)
    assert not verify_decomposition(bad)


def test_verify_rejects_marked_initial():
    tr = Trace(Frozen(seq("a")), (), Frozen(seq("a")))
    assert not verify_decomposition(tr)


def test_trace_labels_flatten_rounds():
    tr = run(P("a | b"), [G("a => c"), G("b => c")], steps=1)
    assert len(tr.labels) == len(tr.rounds[0])


@given(st.integers(0, 3_000))
def test_engine_traces_always_verify(n):
    rng = Random(n)
    t = random_ground_term(rng, 2)
    rules = [G("a => b.b"), G("b | c => d")]
    tr = run(t, rules, steps=2, strategy="random-k", k=2, seed=n)
    assert verify_decomposition(tr)
    assert replay(tr) == normalize(tr.final)


@given(st.integers(0, 3_000))
def test_parallel_step_material_is_conserved_or_rewritten(n):
    # a parallel step leaves ground, mark-free output
    rng = Random(n)
    t = random_ground_term(rng, 2)
    tr = parallel_reduce(t, [G("a => b")])
    assert not has_marks(tr.final)
    assert normalize(tr.final) == tr.final
