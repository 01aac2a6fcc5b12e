"""Command line front end.

``clslr check``      parse a model (and classification) and report shape
``clslr typecheck``  type the model term and statically check global rules
``clslr run``        reduce a model and emit a trace (text or JSON)
``clslr replay``     re-execute a JSON trace and verify it

Diagnostics go to stderr as ``file:line:col: message`` and exit with 1;
usage errors exit with 2.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import (
    DEFAULT_MATCH_CAP,
    StaleLabelError,
    StepCapError,
    Trace,
    replay as replay_trace,
    run as engine_run,
    verify_decomposition,
)
from .matching import MatchCapError, UnboundVariableError
from .syntax import (
    ModelFile,
    ModelSyntaxError,
    merge_elements,
    parse_model,
    render,
    render_global,
    trace_from_json,
    trace_to_json,
)
from .typecheck import (
    TypingError,
    check_global,
    pattern_type,
    render_ptype,
)
from .typed import typed_run

STRATEGY_CHOICES = ("single", "random-k", "maximal")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="clslr",
        description="Interpreter and type checker for membrane terms with "
                    "embedded rewrite rules.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_lambda_opts(p):
        p.add_argument("--lambda", dest="lambda_path", metavar="FILE",
                       help="element classification file to merge in")
        g = p.add_mutually_exclusive_group()
        g.add_argument("--strict-lambda", dest="strict", action="store_true",
                       help="unclassified elements are an error (default)")
        g.add_argument("--permissive-lambda", dest="strict",
                       action="store_false",
                       help="unclassified elements get the empty type, "
                            "with a warning")
        p.set_defaults(strict=True)

    p = sub.add_parser("check", help="parse and validate a model file")
    p.add_argument("model")
    add_lambda_opts(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("typecheck", help="type the model term and global rules")
    p.add_argument("model")
    add_lambda_opts(p)
    p.set_defaults(func=cmd_typecheck)

    p = sub.add_parser("run", help="reduce the model and emit a trace")
    p.add_argument("model")
    add_lambda_opts(p)
    p.add_argument("--typed", action="store_true",
                   help="admit only well-typed reductions")
    p.add_argument("--strategy", choices=STRATEGY_CHOICES, default="maximal")
    p.add_argument("--k", type=int, default=None,
                   help="applications per step for random-k")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=1,
                   help="number of parallel steps (default 1)")
    p.add_argument("--match-cap", type=int, default=None)
    p.add_argument("--out", metavar="FILE", help="write the trace here")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="re-execute a JSON trace and verify it")
    p.add_argument("trace")
    p.set_defaults(func=cmd_replay)

    return ap


def _load_model(args) -> ModelFile:
    path = args.model
    model = parse_model(Path(path).read_text(), path)
    lam = getattr(args, "lambda_path", None)
    if lam:
        extra = parse_model(Path(lam).read_text(), lam)
        if extra.term is not None or extra.globals:
            raise ModelSyntaxError(
                "classification files hold element statements only", 1, 1, lam)
        model.elements = merge_elements(model.elements, extra.elements, lam)
    return model


def _positioned(err: Exception, path: str) -> str:
    if isinstance(err, ModelSyntaxError):
        if err.path is None:
            err.path = path
        return str(err)
    return f"{path}:1:1: {err}"


def cmd_check(args) -> int:
    model = _load_model(args)
    term = "yes" if model.term is not None else "no"
    print(f"ok: term={term} globals={len(model.globals)} "
          f"elements={len(model.elements)}")
    return 0


def cmd_typecheck(args) -> int:
    model = _load_model(args)
    classif = model.classification(strict=args.strict)
    status = 0
    if model.term is None:
        print("term: none")
    else:
        tau = pattern_type({}, classif, model.term)
        print(f"term: {render_ptype(tau)}")
    for n, rule in enumerate(model.globals, 1):
        text = render_global(rule)
        try:
            ok = check_global({}, classif, rule)
        except UnboundVariableError:
            print(f"global {n}: checked per application ({text})")
            continue
        except TypingError as err:
            print(f"global {n}: does not type ({err})", file=sys.stderr)
            status = 1
            continue
        if ok:
            print(f"global {n}: ok ({text})")
        else:
            print(f"global {n}: does not preserve types ({text})",
                  file=sys.stderr)
            status = 1
    return status


def _match_cap(args, model: ModelFile) -> int:
    if args.match_cap is not None:
        return args.match_cap
    if "match_cap" in model.options:
        try:
            return int(model.options["match_cap"])
        except ValueError:
            raise ModelSyntaxError("option match_cap needs an integer", 1, 1,
                                   args.model) from None
    return DEFAULT_MATCH_CAP


def cmd_run(args) -> int:
    ap_error = args.parser_error
    if (args.strategy == "random-k") != (args.k is not None):
        ap_error("--k is required exactly when --strategy is random-k")
    model = _load_model(args)
    if model.term is None:
        raise ModelSyntaxError("the model declares no term to run", 1, 1,
                               args.model)
    cap = _match_cap(args, model)
    if args.typed:
        trace = typed_run(model.term, model.globals,
                          model.classification(strict=args.strict),
                          steps=args.steps, strategy=args.strategy,
                          seed=args.seed, k=args.k, match_cap=cap)
    else:
        trace = engine_run(model.term, model.globals, steps=args.steps,
                           strategy=args.strategy, seed=args.seed, k=args.k,
                           match_cap=cap)
    text = trace_to_json(trace) if args.format == "json" else _trace_text(trace)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _path_text(path: tuple) -> str:
    return "/" + "/".join(str(s) for s in path)


def _trace_text(trace: Trace) -> str:
    lines = [f"strategy: {trace.strategy}"
             + (f" k={trace.k}" if trace.k is not None else "")
             + f" seed={trace.seed}",
             f"initial: {render(trace.initial)}"]
    for rnum, rnd in enumerate(trace.rounds, 1):
        lines.append(f"round {rnum}:")
        for lbl in rnd:
            rule = (render_global(lbl.rule)
                    if lbl.schema == "GRT" else render(lbl.rule))
            lines.append(f"  [{lbl.schema}] {rule}  at {_path_text(lbl.path)}")
    lines.append(f"final: {render(trace.final)}")
    return "\n".join(lines) + "\n"


def cmd_replay(args) -> int:
    text = Path(args.trace).read_text()
    trace = trace_from_json(text, path=args.trace)
    if not verify_decomposition(trace):
        print(f"{args.trace}:1:1: trace does not replay to its recorded final "
              f"term", file=sys.stderr)
        return 1
    final = replay_trace(trace)
    print(f"ok: {render(final)}")
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    args.parser_error = ap.error
    primary = getattr(args, "model", None) or getattr(args, "trace", "clslr")
    try:
        return args.func(args)
    except ModelSyntaxError as err:
        print(_positioned(err, primary), file=sys.stderr)
        return 1
    except TypingError as err:
        print(_positioned(err, primary), file=sys.stderr)
        return 1
    except (MatchCapError, StepCapError, StaleLabelError,
            UnboundVariableError) as err:
        print(_positioned(err, primary), file=sys.stderr)
        return 1
    except OSError as err:
        print(f"{primary}: {err.strerror or err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
