"""Core term syntax: sequences, looping membranes, parallel bags, embedded rules.

The grammar has three layers.  Sequence patterns are flat runs of atoms
(elements, element variables, sequence variables); associativity and the
empty-sequence unit are baked into the tuple representation.  Patterns
combine sequences with looping membranes ``loop(S)[P]``, parallel
composition, term variables and embedded local rules.  Local rules come in
three shapes: plain ``{L => L}``, outbound ``{L ^ S => L ^ S}`` and inbound
``{L @ S => L @ S}``.

Equality of the calculus is structural congruence: ``|`` is an associative,
commutative monoid with unit eps, a membrane may be rotated freely, the
empty membrane around the empty term is the empty term, and rules are
congruent componentwise.  ``normalize`` maps every pattern to a canonical
representative (flattened, members sorted, least membrane rotation) so that
congruence becomes syntactic equality, which is what ``equiv`` checks.

The rewrite engine additionally tracks which material was produced within
the current parallel step.  Such material is wrapped in ``Frozen`` marks;
membranes carry a ``mem_frozen`` flag instead, since a mark never lives
inside a sequence.  ``erase`` strips every mark.  Normalization may push a
mark through parallel composition (marking each member) but never across a
loop or rule boundary.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass


# --------------------------------------------------------------------------
# atoms

@dataclass(frozen=True)
class Element:
    """A basic symbol out of the element alphabet."""

    name: str


@dataclass(frozen=True)
class ElemVar:
    """Variable standing for exactly one element.  Written ``?x``."""

    name: str


@dataclass(frozen=True)
class SeqVar:
    """Variable standing for a (possibly empty) sequence.  Written ``~x``."""

    name: str


Atom = Element | ElemVar | SeqVar

# elements < element variables < sequence variables, then by name
_ATOM_RANK = {Element: 0, ElemVar: 1, SeqVar: 2}


def atom_key(a: Atom) -> tuple[int, str]:
    return (_ATOM_RANK[type(a)], a.name)


def atom_text(a: Atom) -> str:
    if isinstance(a, Element):
        return a.name
    if isinstance(a, ElemVar):
        return "?" + a.name
    return "~" + a.name


# --------------------------------------------------------------------------
# patterns

class Pattern:
    """Base class for every pattern / term node."""

    __slots__ = ()

    def __str__(self) -> str:
        return canonical_text(self)


@dataclass(frozen=True)
class Seq(Pattern):
    """A flat sequence of atoms; the empty tuple is the empty term eps."""

    items: tuple[Atom, ...]


@dataclass(frozen=True)
class Loop(Pattern):
    """A membrane ``loop(S)[P]``: a looping sequence wrapping a content term."""

    membrane: tuple[Atom, ...]
    content: Pattern
    mem_frozen: bool = False


@dataclass(frozen=True)
class Par(Pattern):
    """Parallel composition of two or more patterns."""

    parts: tuple[Pattern, ...]


@dataclass(frozen=True)
class TermVar(Pattern):
    """Variable standing for an arbitrary (possibly empty) term.  Written ``$X``."""

    name: str


class LocalRule(Pattern):
    """Base class for the three local rule shapes."""

    __slots__ = ()


@dataclass(frozen=True)
class PlainRule(LocalRule):
    """``{L1 => L2}``: rewrite L1 to L2 inside the compartment holding the rule."""

    lhs: Pattern
    rhs: Pattern


@dataclass(frozen=True)
class OutRule(LocalRule):
    """``{L1 ^ S1 => L2 ^ S2}``: move L1 out across a membrane matching S1."""

    lhs: Pattern
    lhs_mem: tuple[Atom, ...]
    rhs: Pattern
    rhs_mem: tuple[Atom, ...]


@dataclass(frozen=True)
class InRule(LocalRule):
    """``{L1 @ S1 => L2 @ S2}``: move L1 into a sibling membrane matching S1."""

    lhs: Pattern
    lhs_mem: tuple[Atom, ...]
    rhs: Pattern
    rhs_mem: tuple[Atom, ...]


@dataclass(frozen=True)
class Frozen(Pattern):
    """Mark on a subtree produced during the current parallel step."""

    body: Pattern


EPS = Seq(())


@dataclass(frozen=True)
class GlobalRule:
    """A rewrite rule ``P1 => P2`` applied at evaluation contexts of the whole term."""

    lhs: Pattern
    rhs: Pattern


# --------------------------------------------------------------------------
# convenience constructors (used heavily by the tests)

def el(name: str) -> Element:
    return Element(name)


def seq(*names: str | Atom) -> Seq:
    return Seq(tuple(a if isinstance(a, (Element, ElemVar, SeqVar)) else Element(a)
                     for a in names))


def par(*parts: Pattern) -> Pattern:
    return Par(tuple(parts))


def loop(membrane: Seq | tuple[Atom, ...], content: Pattern) -> Loop:
    mem = membrane.items if isinstance(membrane, Seq) else tuple(membrane)
    return Loop(mem, content)


# --------------------------------------------------------------------------
# canonical text

@functools.lru_cache(maxsize=None)
def canonical_text(p: Pattern) -> str:
    """Grammar-shaped rendering of a node exactly as stored.

    On normalized patterns this is the canonical surface form; it doubles as
    the total order used to sort parallel members.  Marks render with a ``!``
    prefix, which the parser does not accept: serialized terms are mark-free.
    """
    if isinstance(p, Seq):
        return seq_text(p.items)
    if isinstance(p, Loop):
        bang = "!" if p.mem_frozen else ""
        return f"loop({bang}{seq_text(p.membrane)})[{canonical_text(p.content)}]"
    if isinstance(p, Par):
        return " | ".join(canonical_text(m) for m in p.parts)
    if isinstance(p, TermVar):
        return "$" + p.name
    if isinstance(p, PlainRule):
        return f"{{ {canonical_text(p.lhs)} => {canonical_text(p.rhs)} }}"
    if isinstance(p, OutRule):
        return (f"{{ {canonical_text(p.lhs)} ^ {seq_text(p.lhs_mem)}"
                f" => {canonical_text(p.rhs)} ^ {seq_text(p.rhs_mem)} }}")
    if isinstance(p, InRule):
        return (f"{{ {canonical_text(p.lhs)} @ {seq_text(p.lhs_mem)}"
                f" => {canonical_text(p.rhs)} @ {seq_text(p.rhs_mem)} }}")
    if isinstance(p, Frozen):
        body = canonical_text(p.body)
        return f"!({body})" if isinstance(p.body, Par) else "!" + body
    raise TypeError(f"not a pattern: {p!r}")


def seq_text(items: tuple[Atom, ...]) -> str:
    return ".".join(atom_text(a) for a in items) if items else "eps"


# --------------------------------------------------------------------------
# normalization / congruence

def min_rotation(items: tuple[Atom, ...]) -> tuple[Atom, ...]:
    """Lexicographically least rotation of a membrane sequence."""
    if len(items) < 2:
        return items
    rotations = [items[i:] + items[:i] for i in range(len(items))]
    return min(rotations, key=lambda r: tuple(atom_key(a) for a in r))


@functools.lru_cache(maxsize=None)
def normalize(p: Pattern) -> Pattern:
    """Canonical representative of the congruence class of ``p``.

    Flattens parallel composition, drops eps members, sorts members by their
    canonical text, rotates membranes to the least rotation, collapses the
    empty membrane around the empty term, and pushes marks through parallel
    composition.  Idempotent.
    """
    if isinstance(p, Seq):
        return EPS if not p.items else p
    if isinstance(p, TermVar):
        return p
    if isinstance(p, PlainRule):
        return PlainRule(normalize(p.lhs), normalize(p.rhs))
    if isinstance(p, OutRule):
        return OutRule(normalize(p.lhs), p.lhs_mem, normalize(p.rhs), p.rhs_mem)
    if isinstance(p, InRule):
        return InRule(normalize(p.lhs), p.lhs_mem, normalize(p.rhs), p.rhs_mem)
    if isinstance(p, Loop):
        content = normalize(p.content)
        mem = min_rotation(p.membrane)
        if not mem and content == EPS:
            return EPS
        return Loop(mem, content, p.mem_frozen)
    if isinstance(p, Frozen):
        body = normalize(p.body)
        if body == EPS:
            return EPS
        if isinstance(body, Frozen):
            return body
        if isinstance(body, Par):
            return normalize(Par(tuple(Frozen(m) for m in body.parts)))
        return Frozen(body)
    if isinstance(p, Par):
        members: list[Pattern] = []
        for part in p.parts:
            m = normalize(part)
            if m == EPS:
                continue
            if isinstance(m, Par):
                members.extend(m.parts)
            else:
                members.append(m)
        if not members:
            return EPS
        if len(members) == 1:
            return members[0]
        members.sort(key=canonical_text)
        return Par(tuple(members))
    raise TypeError(f"not a pattern: {p!r}")


def equiv(p1: Pattern, p2: Pattern) -> bool:
    """Structural congruence, decided on canonical forms."""
    return normalize(p1) == normalize(p2)


def members_of(p: Pattern) -> tuple[Pattern, ...]:
    """Parallel members of a normalized pattern (eps has none)."""
    if isinstance(p, Par):
        return p.parts
    if p == EPS:
        return ()
    return (p,)


# --------------------------------------------------------------------------
# variables, groundness, well-formedness

def pattern_vars(p: Pattern, include_rule_bodies: bool = True) -> frozenset:
    """Set of variable nodes occurring in ``p``.

    With ``include_rule_bodies=False``, embedded local rules are opaque; this
    is the notion used for groundness.  Well-formedness uses the inclusive
    notion.
    """
    out: set = set()

    def walk_seq(items: tuple[Atom, ...]) -> None:
        for a in items:
            if isinstance(a, (ElemVar, SeqVar)):
                out.add(a)

    def walk(q: Pattern) -> None:
        if isinstance(q, Seq):
            walk_seq(q.items)
        elif isinstance(q, Loop):
            walk_seq(q.membrane)
            walk(q.content)
        elif isinstance(q, Par):
            for m in q.parts:
                walk(m)
        elif isinstance(q, TermVar):
            out.add(q)
        elif isinstance(q, PlainRule):
            if include_rule_bodies:
                walk(q.lhs)
                walk(q.rhs)
        elif isinstance(q, (OutRule, InRule)):
            if include_rule_bodies:
                walk(q.lhs)
                walk_seq(q.lhs_mem)
                walk(q.rhs)
                walk_seq(q.rhs_mem)
        elif isinstance(q, Frozen):
            walk(q.body)
        else:
            raise TypeError(f"not a pattern: {q!r}")

    walk(p)
    return frozenset(out)


def is_ground(p: Pattern) -> bool:
    """True when ``p`` contains variables only inside embedded rules."""
    return not pattern_vars(p, include_rule_bodies=False)


def local_rule_violations(r: LocalRule) -> tuple[str, ...]:
    """Well-formedness defects of a single local rule node.

    Codes: ``empty-lhs`` (the left side is congruent to eps), ``rhs-vars``
    (the right side mentions a variable the left side does not), and
    ``membrane-vars`` (same, for the membrane sides of an in/out rule).
    """
    out: list[str] = []
    if normalize(r.lhs) == EPS:
        out.append("empty-lhs")
    lhs_vars = pattern_vars(r.lhs)
    if isinstance(r, (OutRule, InRule)):
        lhs_vars |= pattern_vars(Seq(r.lhs_mem))
        if not pattern_vars(Seq(r.rhs_mem)) <= pattern_vars(Seq(r.lhs_mem)):
            out.append("membrane-vars")
    if not pattern_vars(r.rhs) <= lhs_vars:
        out.append("rhs-vars")
    return tuple(out)


def well_formed_local_rule(r: LocalRule) -> bool:
    return not local_rule_violations(r)


def global_rule_violations(g: GlobalRule) -> tuple[str, ...]:
    out: list[str] = []
    if normalize(g.lhs) == EPS:
        out.append("empty-lhs")
    if not pattern_vars(g.rhs) <= pattern_vars(g.lhs):
        out.append("rhs-vars")
    return tuple(out)


def rule_nodes(p: Pattern):
    """Every local rule node in ``p``, outermost first, including nested ones."""
    if isinstance(p, (Seq, TermVar)):
        return
    if isinstance(p, Loop):
        yield from rule_nodes(p.content)
    elif isinstance(p, Par):
        for m in p.parts:
            yield from rule_nodes(m)
    elif isinstance(p, PlainRule):
        yield p
        yield from rule_nodes(p.lhs)
        yield from rule_nodes(p.rhs)
    elif isinstance(p, (OutRule, InRule)):
        yield p
        yield from rule_nodes(p.lhs)
        yield from rule_nodes(p.rhs)
    elif isinstance(p, Frozen):
        yield from rule_nodes(p.body)


# --------------------------------------------------------------------------
# marks

@functools.lru_cache(maxsize=None)
def has_marks(p: Pattern) -> bool:
    """True when the subtree carries any frozen mark (node or membrane)."""
    if isinstance(p, Frozen):
        return True
    if isinstance(p, Seq) or isinstance(p, TermVar):
        return False
    if isinstance(p, Loop):
        return p.mem_frozen or has_marks(p.content)
    if isinstance(p, Par):
        return any(has_marks(m) for m in p.parts)
    if isinstance(p, (PlainRule, OutRule, InRule)):
        # marks never appear inside rule bodies
        return False
    raise TypeError(f"not a pattern: {p!r}")


def erase(p: Pattern) -> Pattern:
    """Strip every frozen mark, keeping the tree otherwise intact."""
    if isinstance(p, Frozen):
        return erase(p.body)
    if isinstance(p, Loop):
        return Loop(p.membrane, erase(p.content), False)
    if isinstance(p, Par):
        return Par(tuple(erase(m) for m in p.parts))
    return p
