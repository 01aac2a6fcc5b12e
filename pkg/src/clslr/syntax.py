"""Surface syntax: model files, single patterns, and JSON traces.

Model files hold statements, each optionally terminated by ``;``:

* ``element NAME : { letters }`` classifies an element with feature letters
* ``global P => P`` declares a rewrite rule applied from the outside
* ``option NAME [VALUE]`` carries a tool setting
* a bare term gives the model its initial state (at most one)

Terms use ``|`` for parallel composition, ``.`` for sequencing, ``eps``
for the empty sequence, ``loop(SEQ)[P]`` for a membrane with content,
``{ L => L }`` for an embedded rule, ``{ L ^ SEQ => L ^ SEQ }`` for a rule
sending material outward across a membrane, ``{ L @ SEQ => L @ SEQ }`` for
one sending material into a sibling membrane.  ``?x`` is a one-element
variable, ``~x`` a sequence variable, ``$X`` a term variable.  ``#``
starts a comment.  Membranes cannot occur inside embedded rule sides.

Rendering always emits the canonical form, so parse and render are
mutually inverse on the mark-free grammar.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .engine import ReductionLabel, Trace, _binding_items
from .terms import (
    Element,
    ElemVar,
    GlobalRule,
    InRule,
    LocalRule,
    Loop,
    OutRule,
    Par,
    Pattern,
    PlainRule,
    Seq,
    SeqVar,
    TermVar,
    canonical_text,
    global_rule_violations,
    is_ground,
    local_rule_violations,
    normalize,
    seq_text,
)
from .typecheck import FEATURE_ORDER, Classification

KEYWORDS = frozenset({"loop", "eps", "global", "element", "option"})

_TOKEN_RE = re.compile(r"[ \t\r]+|#[^\n]*|\n|=>|[A-Za-z0-9_]+|[|.()\[\]{}^@~?$:;,]")


class ModelSyntaxError(Exception):
    """A parse failure, carrying the 1-based position it was detected at."""

    def __init__(self, message: str, line: int, col: int, path: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.path = path
        super().__init__(message)

    def __str__(self) -> str:
        where = f"{self.line}:{self.col}: {self.message}"
        return f"{self.path}:{where}" if self.path else where


class IllFormedRuleError(ModelSyntaxError):
    """A rule that parses but breaks a well-formedness clause."""

    def __init__(self, clause: str, message: str, line: int, col: int,
                 path: str | None = None):
        super().__init__(message, line, col, path)
        self.clause = clause


_CLAUSE_MESSAGES = {
    "empty-lhs": "rule left side must not be eps",
    "rhs-vars": "rule right side uses variables not bound on the left",
    "membrane-vars": "rule membrane on the right uses variables not bound on the left",
}


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "kw", "punct", "eof"
    text: str
    line: int
    col: int


def tokenize(text: str, path: str | None = None) -> list:
    tokens = []
    pos, line, bol = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ModelSyntaxError(f"stray character {text[pos]!r}", line,
                                   pos - bol + 1, path)
        tok = m.group()
        col = pos - bol + 1
        pos = m.end()
        if tok == "\n":
            line += 1
            bol = pos
            continue
        if tok[0] in " \t\r#":
            continue
        if tok[0].isalnum() or tok[0] == "_":
            kind = "kw" if tok in KEYWORDS else "ident"
        else:
            kind = "punct"
        tokens.append(Token(kind, tok, line, col))
    tokens.append(Token("eof", "", line, len(text) - bol + 1))
    return tokens


@dataclass
class ModelFile:
    """Parsed model: initial term, global rules, element features, options."""

    term: Pattern | None = None
    globals: tuple = ()
    elements: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def classification(self, strict: bool = True) -> Classification:
        return Classification(dict(self.elements), strict=strict)


class _Parser:
    def __init__(self, text: str, path: str | None = None):
        self.tokens = tokenize(text, path)
        self.path = path
        self.i = 0
        self.rule_depth = 0

    # -- token helpers

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.text == text and tok.kind != "ident"

    def eat(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.text != text or tok.kind == "eof" and text != "":
            self.fail(f"expected {text!r}, found {self._show(tok)}", tok)
        return self.next()

    def expect_ident(self, what: str) -> Token:
        tok = self.peek()
        if tok.kind != "ident":
            self.fail(f"expected {what}, found {self._show(tok)}", tok)
        return self.next()

    @staticmethod
    def _show(tok: Token) -> str:
        return "end of input" if tok.kind == "eof" else repr(tok.text)

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ModelSyntaxError(message, tok.line, tok.col, self.path)

    def expect_eof(self):
        tok = self.peek()
        if tok.kind != "eof":
            self.fail(f"unexpected {self._show(tok)}", tok)

    # -- term grammar

    def parse_par(self) -> Pattern:
        items = [self.parse_item()]
        while self.eat("|"):
            items.append(self.parse_item())
        return items[0] if len(items) == 1 else Par(tuple(items))

    def parse_item(self) -> Pattern:
        tok = self.peek()
        if tok.kind == "kw" and tok.text == "loop":
            return self.parse_loop()
        if tok.kind == "kw" and tok.text == "eps":
            return self.parse_seq()
        if self.at("{"):
            return self.parse_rule()
        if self.at("("):
            self.next()
            inner = self.parse_par()
            self.expect(")")
            return inner
        if self.at("$"):
            self.next()
            name = self.expect_ident("a term variable name")
            return TermVar(name.text)
        if tok.kind == "ident" or self.at("?") or self.at("~"):
            return self.parse_seq()
        self.fail(f"expected a term, found {self._show(tok)}", tok)

    def parse_loop(self) -> Loop:
        tok = self.expect("loop")
        if self.rule_depth:
            self.fail("membranes cannot occur inside embedded rule sides", tok)
        self.expect("(")
        membrane = self.parse_seq_atoms()
        self.expect(")")
        self.expect("[")
        content = self.parse_par()
        self.expect("]")
        return Loop(membrane, content)

    def parse_seq(self) -> Seq:
        return Seq(self.parse_seq_atoms())

    def parse_seq_atoms(self) -> tuple:
        atoms = [*self.parse_seq_atom()]
        while self.eat("."):
            atoms.extend(self.parse_seq_atom())
        return tuple(atoms)

    def parse_seq_atom(self) -> tuple:
        tok = self.peek()
        if tok.kind == "kw" and tok.text == "eps":
            self.next()
            return ()
        if self.eat("?"):
            name = self.expect_ident("an element variable name")
            return (ElemVar(name.text),)
        if self.eat("~"):
            name = self.expect_ident("a sequence variable name")
            return (SeqVar(name.text),)
        if tok.kind == "kw":
            self.fail(f"{tok.text!r} is a reserved word", tok)
        if tok.kind != "ident":
            self.fail(f"expected a sequence element, found {self._show(tok)}", tok)
        self.next()
        return (Element(tok.text),)

    def parse_rule(self) -> LocalRule:
        brace = self.expect("{")
        self.rule_depth += 1
        try:
            lhs = self.parse_par()
            marker = None
            lhs_mem = None
            if self.at("^") or self.at("@"):
                marker = self.next().text
                lhs_mem = self.parse_seq_atoms()
            self.expect("=>")
            rhs = self.parse_par()
            rhs_mem = None
            if marker is not None:
                tok = self.peek()
                if not self.eat(marker):
                    want = "'^'" if marker == "^" else "'@'"
                    self.fail(f"rule right side must repeat {want} and a membrane",
                              tok)
                rhs_mem = self.parse_seq_atoms()
            elif self.at("^") or self.at("@"):
                self.fail("rule left side is missing its membrane", self.peek())
        finally:
            self.rule_depth -= 1
        self.expect("}")
        if marker is None:
            rule: LocalRule = PlainRule(lhs, rhs)
        elif marker == "^":
            rule = OutRule(lhs, lhs_mem, rhs, rhs_mem)
        else:
            rule = InRule(lhs, lhs_mem, rhs, rhs_mem)
        for clause in local_rule_violations(rule):
            raise IllFormedRuleError(clause, _CLAUSE_MESSAGES[clause],
                                     brace.line, brace.col, self.path)
        return rule

    # -- statements

    def parse_model(self) -> ModelFile:
        model = ModelFile()
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.kind == "kw" and tok.text == "element":
                self.parse_element_decl(model)
            elif tok.kind == "kw" and tok.text == "global":
                self.parse_global_decl(model)
            elif tok.kind == "kw" and tok.text == "option":
                self.parse_option_decl(model)
            else:
                if model.term is not None:
                    self.fail("the model already has a term", tok)
                term = self.parse_par()
                if not is_ground(term):
                    self.fail("model terms cannot contain variables", tok)
                model.term = term
                self.eat(";")
        return model

    def parse_element_decl(self, model: ModelFile):
        self.expect("element")
        name = self.expect_ident("an element name")
        if name.text in model.elements:
            self.fail(f"duplicate classification for {name.text!r}", name)
        self.expect(":")
        self.expect("{")
        letters = set()
        if not self.at("}"):
            while True:
                tok = self.expect_ident("a feature letter")
                if tok.text not in FEATURE_ORDER or len(tok.text) != 1:
                    self.fail(f"unknown feature letter {tok.text!r}", tok)
                letters.add(tok.text)
                if not self.eat(","):
                    break
        self.expect("}")
        self.eat(";")
        model.elements[name.text] = frozenset(letters)

    def parse_global_decl(self, model: ModelFile):
        kw = self.expect("global")
        lhs = self.parse_par()
        self.expect("=>")
        rhs = self.parse_par()
        self.eat(";")
        rule = GlobalRule(lhs, rhs)
        for clause in global_rule_violations(rule):
            raise IllFormedRuleError(clause, _CLAUSE_MESSAGES[clause],
                                     kw.line, kw.col, self.path)
        model.globals = (*model.globals, rule)

    def parse_option_decl(self, model: ModelFile):
        self.expect("option")
        name = self.expect_ident("an option name")
        value = ""
        if self.peek().kind == "ident":
            value = self.next().text
        self.eat(";")
        model.options[name.text] = value


# --------------------------------------------------------------------------
# entry points

def parse_model(text: str, path: str | None = None) -> ModelFile:
    p = _Parser(text, path)
    model = p.parse_model()
    p.expect_eof()
    return model


def parse_pattern_text(text: str, path: str | None = None) -> Pattern:
    p = _Parser(text, path)
    pat = p.parse_par()
    p.expect_eof()
    return pat


def parse_seq_text(text: str, path: str | None = None) -> tuple:
    p = _Parser(text, path)
    atoms = p.parse_seq_atoms()
    p.expect_eof()
    return atoms


def parse_global_text(text: str, path: str | None = None) -> GlobalRule:
    p = _Parser(text, path)
    lhs = p.parse_par()
    p.expect("=>")
    rhs = p.parse_par()
    p.expect_eof()
    rule = GlobalRule(lhs, rhs)
    for clause in global_rule_violations(rule):
        raise IllFormedRuleError(clause, _CLAUSE_MESSAGES[clause], 1, 1, path)
    return rule


def parse_local_rule_text(text: str, path: str | None = None) -> LocalRule:
    p = _Parser(text, path)
    rule = p.parse_rule()
    p.expect_eof()
    return rule


def render(p: Pattern) -> str:
    """Canonical surface text of a pattern."""
    return canonical_text(normalize(p))


def render_global(rule: GlobalRule) -> str:
    return f"{render(rule.lhs)} => {render(rule.rhs)}"


def merge_elements(base: dict, extra: dict, path: str | None = None) -> dict:
    merged = dict(base)
    for name, feats in extra.items():
        if name in merged and merged[name] != feats:
            raise ModelSyntaxError(
                f"conflicting classifications for {name!r}", 1, 1, path)
        merged[name] = feats
    return merged


# --------------------------------------------------------------------------
# traces as JSON

def _sigma_to_json(label: ReductionLabel) -> dict:
    out = {}
    for var, image in label.binding:
        if isinstance(var, ElemVar):
            out[f"?{var.name}"] = seq_text((image,))
        elif isinstance(var, SeqVar):
            out[f"~{var.name}"] = seq_text(image)
        else:
            out[f"${var.name}"] = render(image)
    return out


def _rule_to_json(label: ReductionLabel) -> str:
    if isinstance(label.rule, GlobalRule):
        return render_global(label.rule)
    return render(label.rule)


def trace_to_json(trace: Trace) -> str:
    steps = []
    for rnum, rnd in enumerate(trace.rounds, 1):
        for lbl in rnd:
            steps.append({
                "round": rnum,
                "schema": lbl.schema,
                "rule": _rule_to_json(lbl),
                "path": list(lbl.path),
                "sigma": _sigma_to_json(lbl),
                "residue": render(lbl.residue),
            })
    doc = {
        "seed": trace.seed,
        "strategy": trace.strategy,
        "k": trace.k,
        "initial": render(trace.initial),
        "steps": steps,
        "final": render(trace.final),
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _sigma_from_json(sigma: dict) -> dict:
    inst = {}
    for key, value in sigma.items():
        kind, name = key[0], key[1:]
        if kind == "?":
            atoms = parse_seq_text(value)
            if len(atoms) != 1 or not isinstance(atoms[0], Element):
                raise ValueError(f"image of {key} must be a single element")
            inst[ElemVar(name)] = atoms[0]
        elif kind == "~":
            inst[SeqVar(name)] = parse_seq_text(value)
        elif kind == "$":
            inst[TermVar(name)] = normalize(parse_pattern_text(value))
        else:
            raise ValueError(f"unknown variable kind in {key!r}")
    return inst


def trace_from_json(text: str, path: str | None = None) -> Trace:
    try:
        return _trace_from_doc(json.loads(text))
    except ModelSyntaxError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as err:
        raise ModelSyntaxError(f"malformed trace document: {err}", 1, 1,
                               path) from err


def _trace_from_doc(doc: dict) -> Trace:
    rounds: dict[int, list] = {}
    for step in doc["steps"]:
        schema = step["schema"]
        if schema == "GRT":
            rule: GlobalRule | LocalRule = parse_global_text(step["rule"])
        else:
            rule = normalize(parse_local_rule_text(step["rule"]))
        label = ReductionLabel(
            schema=schema,
            rule=rule,
            path=tuple(s if s == "loop" else int(s) for s in step["path"]),
            binding=_binding_items(_sigma_from_json(step["sigma"])),
            residue=normalize(parse_pattern_text(step["residue"])),
        )
        rounds.setdefault(int(step["round"]), []).append(label)
    return Trace(
        initial=normalize(parse_pattern_text(doc["initial"])),
        rounds=tuple(tuple(rounds[r]) for r in sorted(rounds)),
        final=normalize(parse_pattern_text(doc["final"])),
        seed=doc.get("seed", 0),
        strategy=doc.get("strategy", "maximal"),
        k=doc.get("k"),
    )
