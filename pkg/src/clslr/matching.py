"""Matching of patterns against ground terms, modulo structural congruence.

Matching works on canonical forms: parallel composition is a multiset,
membranes match up to rotation, sequences split around sequence variables,
and embedded rules match only nodes congruent componentwise (their bodies
are opaque, so a variable written inside a rule never binds anything).

Results are instantiations: plain dicts keyed by variable nodes.  Element
variables map to elements, sequence variables to atom tuples, term variables
to ground patterns.  Enumeration order is deterministic (leftmost splits
first, member candidates by ascending index, subset candidates in
lexicographic index order) and the result list is deduplicated up to
normalized images.

The number of candidate branch points explored is capped; exceeding the cap
raises :class:`MatchCapError` rather than silently truncating.
"""

from __future__ import annotations

import itertools
from collections import Counter

from .terms import (
    EPS,
    Atom,
    Element,
    ElemVar,
    Frozen,
    InRule,
    Loop,
    OutRule,
    Par,
    Pattern,
    PlainRule,
    Seq,
    SeqVar,
    TermVar,
    is_ground,
    members_of,
    normalize,
)

DEFAULT_MATCH_CAP = 10**6

Instantiation = dict


class UnboundVariableError(Exception):
    """A substitution image was required for a variable outside the domain."""

    def __init__(self, variable):
        self.variable = variable
        super().__init__(f"unbound variable: {variable}")


class MatchCapError(Exception):
    """The matcher exceeded its candidate budget."""

    def __init__(self, cap: int):
        self.cap = cap
        super().__init__(f"match exceeded the candidate cap of {cap}")


class _Budget:
    __slots__ = ("remaining", "cap")

    def __init__(self, cap: int):
        self.cap = cap
        self.remaining = cap

    def spend(self, n: int = 1) -> None:
        self.remaining -= n
        if self.remaining < 0:
            raise MatchCapError(self.cap)


# --------------------------------------------------------------------------
# substitution

def subst_seq(items: tuple[Atom, ...], inst: Instantiation) -> tuple[Atom, ...]:
    """Instantiate the atoms of a sequence, splicing sequence-variable images."""
    out: list[Atom] = []
    for a in items:
        if isinstance(a, Element):
            out.append(a)
        elif isinstance(a, ElemVar):
            if a not in inst:
                raise UnboundVariableError(a)
            out.append(inst[a])
        elif isinstance(a, SeqVar):
            if a not in inst:
                raise UnboundVariableError(a)
            out.extend(inst[a])
        else:
            raise TypeError(f"not an atom: {a!r}")
    return tuple(out)


def substitute(p: Pattern, inst: Instantiation) -> Pattern:
    """Apply an instantiation to a pattern and normalize the result.

    Embedded rules are returned verbatim: instantiation never reaches inside
    a rule body.
    """
    return normalize(_subst(p, inst))


def _subst(p: Pattern, inst: Instantiation) -> Pattern:
    if isinstance(p, Seq):
        return Seq(subst_seq(p.items, inst))
    if isinstance(p, Loop):
        return Loop(subst_seq(p.membrane, inst), _subst(p.content, inst), p.mem_frozen)
    if isinstance(p, Par):
        return Par(tuple(_subst(m, inst) for m in p.parts))
    if isinstance(p, TermVar):
        if p not in inst:
            raise UnboundVariableError(p)
        return inst[p]
    if isinstance(p, (PlainRule, OutRule, InRule)):
        return p
    if isinstance(p, Frozen):
        return Frozen(_subst(p.body, inst))
    raise TypeError(f"not a pattern: {p!r}")


# --------------------------------------------------------------------------
# matching

def match(p: Pattern, t: Pattern, cap: int = DEFAULT_MATCH_CAP) -> list[Instantiation]:
    """All instantiations s with ``substitute(p, s)`` congruent to ``t``.

    ``t`` must be ground and mark-free.  The list is deterministic and
    deduplicated up to normalized images.
    """
    t = normalize(t)
    if not is_ground(t):
        raise ValueError("match target must be ground")
    p = normalize(p)
    budget = _Budget(cap)
    out: list[Instantiation] = []
    seen: set = set()
    for inst in _match(p, t, {}, budget):
        key = frozenset(inst.items())
        if key not in seen:
            seen.add(key)
            out.append(dict(inst))
    return out


def _match(p: Pattern, t: Pattern, inst: Instantiation, budget: _Budget):
    if isinstance(p, Frozen) or isinstance(t, Frozen):
        return
    if isinstance(p, TermVar):
        if p in inst:
            if inst[p] == t:
                yield inst
        else:
            yield {**inst, p: t}
        return
    if isinstance(p, Seq):
        if isinstance(t, Seq):
            yield from _match_seq(p.items, t.items, inst, budget)
        return
    if isinstance(p, Loop):
        if isinstance(t, Loop) and not t.mem_frozen:
            for inst2 in match_seq_rotations(p.membrane, t.membrane, inst, budget):
                yield from _match(p.content, t.content, inst2, budget)
        elif t == EPS:
            # the empty membrane around the empty term is congruent to eps
            for inst2 in _match_seq(p.membrane, (), inst, budget):
                yield from _match(p.content, EPS, inst2, budget)
        return
    if isinstance(p, (PlainRule, OutRule, InRule)):
        # rules match rules congruent componentwise; bodies bind nothing
        if p == t:
            yield inst
        return
    if isinstance(p, Par):
        members = members_of(t)
        pool = tuple(range(len(members)))
        for inst2, used in match_parts(list(p.parts), members, pool, inst, budget,
                                       require_all=True):
            yield inst2
        return
    raise TypeError(f"not a pattern: {p!r}")


def _match_seq(pat: tuple[Atom, ...], term: tuple[Atom, ...],
               inst: Instantiation, budget: _Budget):
    """Match a flat atom sequence, leftmost split first."""
    if not pat:
        if not term:
            yield inst
        return
    head, rest = pat[0], pat[1:]
    if isinstance(head, Element):
        if term and term[0] == head:
            yield from _match_seq(rest, term[1:], inst, budget)
        return
    if isinstance(head, ElemVar):
        if head in inst:
            if term and term[0] == inst[head]:
                yield from _match_seq(rest, term[1:], inst, budget)
        elif term:
            budget.spend()
            yield from _match_seq(rest, term[1:], {**inst, head: term[0]}, budget)
        return
    if isinstance(head, SeqVar):
        if head in inst:
            img = inst[head]
            if term[:len(img)] == img:
                yield from _match_seq(rest, term[len(img):], inst, budget)
            return
        for k in range(len(term) + 1):
            budget.spend()
            yield from _match_seq(rest, term[k:], {**inst, head: term[:k]}, budget)
        return
    raise TypeError(f"not an atom: {head!r}")


def match_seq_rotations(pat: tuple[Atom, ...], term: tuple[Atom, ...],
                        inst: Instantiation, budget: _Budget | None = None,
                        cap: int = DEFAULT_MATCH_CAP):
    """Match a membrane sequence against every rotation of a ground membrane."""
    budget = budget or _Budget(cap)
    if not term:
        yield from _match_seq(pat, (), inst, budget)
        return
    for r in range(len(term)):
        budget.spend()
        yield from _match_seq(pat, term[r:] + term[:r], inst, budget)


def match_parts(parts: list[Pattern], members: tuple[Pattern, ...],
                pool: tuple[int, ...], inst: Instantiation, budget: _Budget,
                require_all: bool):
    """Match parallel parts against a pool of member indices.

    Yields ``(inst, used)`` with ``used`` the sorted tuple of consumed
    indices.  With ``require_all`` the pool must be consumed exactly
    (ordinary matching); without it, leftover members are allowed (redex
    selection inside a larger compartment).

    Term-variable parts absorb arbitrary sub-multisets; every other part
    consumes one member or vanishes, when its variables allow the empty
    image.  Candidates that would only repeat an equal member value at the
    same position are skipped: they cannot produce new instantiations.
    """
    concrete = [q for q in parts if not isinstance(q, TermVar)]
    tvars = [q for q in parts if isinstance(q, TermVar)]
    ordered = concrete + tvars

    def recurse(i: int, remaining: tuple[int, ...], cur: Instantiation,
                used: tuple[int, ...]):
        if i == len(ordered):
            if require_all and remaining:
                return
            yield cur, tuple(sorted(used))
            return
        part = ordered[i]
        if isinstance(part, TermVar):
            if part in cur:
                got = _consume(members, remaining, members_of(cur[part]))
                if got is not None:
                    taken, rest = got
                    yield from recurse(i + 1, rest, cur, used + taken)
                return
            seen_values: set = set()
            for r in range(len(remaining) + 1):
                for combo in itertools.combinations(remaining, r):
                    budget.spend()
                    image = normalize(Par(tuple(members[j] for j in combo)))
                    if image in seen_values:
                        continue
                    seen_values.add(image)
                    rest = tuple(j for j in remaining if j not in combo)
                    yield from recurse(i + 1, rest, {**cur, part: image}, used + combo)
            return
        seen_members: set = set()
        for idx in remaining:
            m = members[idx]
            if m in seen_members:
                continue
            seen_members.add(m)
            budget.spend()
            rest = tuple(j for j in remaining if j != idx)
            for cur2 in _match(part, m, cur, budget):
                yield from recurse(i + 1, rest, cur2, used + (idx,))
        # the part may instantiate to eps and consume nothing
        for cur2 in _match(part, EPS, cur, budget):
            yield from recurse(i + 1, remaining, cur2, used)

    yield from recurse(0, pool, inst, ())


def _consume(members: tuple[Pattern, ...], remaining: tuple[int, ...],
             needed: tuple[Pattern, ...]):
    """Greedy first-fit removal of a value multiset from an index pool."""
    need = Counter(needed)
    taken: list[int] = []
    rest: list[int] = []
    for idx in remaining:
        v = members[idx]
        if need[v] > 0:
            need[v] -= 1
            taken.append(idx)
        else:
            rest.append(idx)
    if any(c > 0 for c in need.values()):
        return None
    return tuple(taken), tuple(rest)
