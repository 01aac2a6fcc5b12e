"""Typed reduction: labels are admitted only when locally well typed.

Each candidate label carries its own match, so the basis for judging it is
inferred from the match images alone.  A global label must satisfy the
containment check for its rule under that basis.  A local label must make
the embedded rule occurrence typable under that basis, and the head of the
rule's type must be granted by the membrane enclosing the occurrence (the
membrane being crossed, for out rules); the root compartment grants
everything.

An untypable label is filtered out, not an error, so typed reduction of a
badly classified model simply gets stuck earlier.  Lookups of elements
missing from a strict classification do raise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import (
    DEFAULT_MATCH_CAP,
    DEFAULT_STEP_CAP,
    SCHEMA_GRT,
    SCHEMA_LR_OUT,
    ReductionLabel,
    Trace,
    find_redexes,
    node_at,
    run,
)
from .matching import UnboundVariableError
from .terms import Loop, Pattern, normalize
from .typecheck import (
    Classification,
    SideConditionError,
    TypingError,
    check_global,
    infer_basis,
    membrane_type,
    pattern_type,
)


@dataclass(frozen=True)
class TypedModel:
    """A term together with its global rules and element classification."""

    term: Pattern
    globals: tuple = ()
    classif: Classification = field(default_factory=lambda: Classification({}))


def _enclosing_membrane(mt: Pattern, label: ReductionLabel):
    """Membrane sequence whose compartment must grant the label, or None at root."""
    if label.schema == SCHEMA_LR_OUT:
        return node_at(mt, label.path).membrane
    path = label.path
    if not path:
        return None
    # label paths into a compartment end with "loop"; the loop node is above
    loop = node_at(mt, path[:-1])
    if not isinstance(loop, Loop):
        return None
    return loop.membrane


def typed_ok(mt: Pattern, label: ReductionLabel, classif: Classification) -> bool:
    """Whether a label is admitted by the type discipline."""
    basis = infer_basis(label.binding_dict(), classif)
    try:
        if label.schema == SCHEMA_GRT:
            return check_global(basis, classif, label.rule)
        ptype = pattern_type(basis, classif, label.rule)
        mem = _enclosing_membrane(mt, label)
        if mem is not None:
            granted = membrane_type({}, classif, mem)
            head = ptype[0] if ptype else frozenset()
            if not head <= granted:
                return False
        return True
    except (SideConditionError, UnboundVariableError):
        return False
    except TypingError as err:
        if err.judgment == "classification":
            raise
        return False


def typed_find_redexes(rules, model_term: Pattern, classif: Classification,
                       match_cap: int = DEFAULT_MATCH_CAP) -> list:
    mt = normalize(model_term)
    return [lbl for lbl in find_redexes(rules, mt, match_cap=match_cap)
            if typed_ok(mt, lbl, classif)]


def typed_run(term: Pattern, rules, classif: Classification, *, steps: int = 1,
              strategy: str = "maximal", seed: int = 0, k: int | None = None,
              match_cap: int = DEFAULT_MATCH_CAP,
              step_cap: int = DEFAULT_STEP_CAP) -> Trace:
    """Like :func:`clslr.engine.run` with untypable labels filtered out.

    The filter consults the current term, so it is re-evaluated as the
    term evolves within a parallel step.
    """

    def fltr(mt, lbl):
        return typed_ok(mt, lbl, classif)

    return run(term, rules, steps=steps, strategy=strategy, seed=seed,
               k=k, match_cap=match_cap, step_cap=step_cap,
               label_filter=fltr)


def typed_parallel_reduce(term: Pattern, rules, classif: Classification,
                          strategy: str = "maximal", seed: int = 0,
                          k: int | None = None,
                          match_cap: int = DEFAULT_MATCH_CAP,
                          step_cap: int = DEFAULT_STEP_CAP) -> Trace:
    """One typed parallel step."""
    return typed_run(term, rules, classif, steps=1, strategy=strategy,
                     seed=seed, k=k, match_cap=match_cap, step_cap=step_cap)


def subject_reduction_check(before: Pattern, after: Pattern,
                            classif: Classification,
                            basis: dict | None = None) -> bool:
    """Whether the type of ``after`` is contained in the type of ``before``."""
    from .typecheck import contained

    basis = basis or {}
    try:
        t_before = pattern_type(basis, classif, normalize(before))
        t_after = pattern_type(basis, classif, normalize(after))
    except TypingError:
        return False
    return contained(t_after, t_before)
