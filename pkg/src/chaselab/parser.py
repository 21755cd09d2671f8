"""Text format for programs (``.dlge``) and instances (``.inst``).

Programs::

    @signature E/2, H/1.
    # comment
    [e] G(X,Y), H(Y) -> exists Z: E(Z,X).
    E(X,Y) -> P(X,Y).

Variables start with an uppercase letter, constants are lowercase identifiers,
numbers or double-quoted strings. A bracketed rule label is optional; unlabeled
rules get ``r1``, ``r2``, ... by position. The grammar is in ``GRAMMAR.md``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from chaselab.model import (
    TGD,
    Atom,
    Constant,
    Diagnostic,
    Instance,
    Program,
    Signature,
    SkolemApp,
    Variable,
    render_term,
)

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<newline>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->)
  | (?P<label>\[[A-Za-z0-9_.'\-]+\])
  | (?P<directive>@[A-Za-z]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>[0-9]+)
  | (?P<punct>[(),.:/])
    """,
    re.VERBOSE,
)


class ParseError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError([Diagnostic(f"unexpected character {text[pos]!r}", line=line, column=pos - line_start + 1)])
        kind = m.lastgroup
        if kind == "newline":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message: str, tok: _Tok | None = None) -> ParseError:
        tok = tok or self.tok
        found = tok.text or "end of input"
        return ParseError([Diagnostic(f"{message} (found {found!r})", line=tok.line, column=tok.col)])

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("punct", "arrow") and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        tok = self.tok
        if not self.accept(text):
            raise self.error(f"expected {text!r}")
        return tok

    def ident(self, what: str) -> _Tok:
        tok = self.tok
        if tok.kind != "ident":
            raise self.error(f"expected {what}")
        self.i += 1
        return tok

    def term(self, allow_variables: bool):
        tok = self.tok
        if tok.kind == "string":
            self.i += 1
            return Constant(bytes(tok.text[1:-1], "utf-8").decode("unicode_escape"))
        if tok.kind == "number":
            self.i += 1
            return Constant(tok.text)
        if tok.kind == "ident":
            self.i += 1
            if tok.text[0].isupper():
                if not allow_variables:
                    raise self.error("variables are not allowed in ground facts", tok)
                return Variable(tok.text)
            return Constant(tok.text)
        raise self.error("expected a term")

    def atom(self, allow_variables: bool = True) -> tuple[Atom, _Tok]:
        name = self.ident("relation name")
        self.expect("(")
        args = [self.term(allow_variables)]
        while self.accept(","):
            args.append(self.term(allow_variables))
        self.expect(")")
        return Atom(name.text, tuple(args)), name

    def conjunction(self) -> list[tuple[Atom, _Tok]]:
        atoms = [self.atom()]
        while self.accept(","):
            atoms.append(self.atom())
        return atoms


def _check_arity(arities: dict, pinned: set, a: Atom, tok: _Tok, diags: list, rule_id: str | None = None):
    known = arities.get(a.relation)
    if known is None:
        arities[a.relation] = a.arity
    elif known != a.arity:
        kind = "arity mismatch with @signature" if a.relation in pinned else "arity conflict"
        diags.append(
            Diagnostic(
                f"{kind}: {a.relation} has arity {known}, used with {a.arity}",
                rule_id=rule_id,
                line=tok.line,
                column=tok.col,
            )
        )


def parse_program(text: str) -> Program:
    """Parse program text; raises ``ParseError`` carrying all diagnostics."""
    p = _Parser(text)
    arities: dict[str, int] = {}
    pinned: set[str] = set()
    rules: list[TGD] = []
    diags: list[Diagnostic] = []
    seen_rule = False
    while p.tok.kind != "eof":
        if p.tok.kind == "directive":
            tok = p.tok
            if tok.text != "@signature":
                raise p.error("unknown directive")
            if seen_rule or pinned:
                raise p.error("@signature must appear once, before any rule")
            p.i += 1
            if not p.accept("."):
                while True:
                    name = p.ident("relation name")
                    p.expect("/")
                    if p.tok.kind != "number":
                        raise p.error("expected arity")
                    arity = int(p.tok.text)
                    p.i += 1
                    if arity < 1:
                        diags.append(Diagnostic(f"arity of {name.text} must be >= 1", line=name.line, column=name.col))
                    if name.text in arities:
                        diags.append(Diagnostic(f"duplicate relation {name.text}", line=name.line, column=name.col))
                    arities[name.text] = arity
                    pinned.add(name.text)
                    if p.accept("."):
                        break
                    p.expect(",")
            continue
        seen_rule = True
        label = None
        if p.tok.kind == "label":
            label = p.tok.text[1:-1]
            p.i += 1
        start = p.tok
        body = p.conjunction()
        p.expect("->")
        existentials: list[Variable] = []
        if p.tok.kind == "ident" and p.tok.text == "exists":
            p.i += 1
            existentials.append(_variable(p))
            while p.accept(","):
                existentials.append(_variable(p))
            p.expect(":")
        if p.tok.kind != "ident":
            raise p.error("expected head atom (empty head)")
        head = p.conjunction()
        p.expect(".")
        rule_id = label or f"r{len(rules) + 1}"
        for a, tok in body + head:
            _check_arity(arities, pinned, a, tok, diags, rule_id)
        rule = TGD(rule_id, tuple(a for a, _ in body), tuple(a for a, _ in head), tuple(existentials))
        diags.extend(_rule_diagnostics(rule, start))
        if any(r.rule_id == rule_id for r in rules):
            diags.append(Diagnostic("duplicate rule id", rule_id=rule_id, line=start.line, column=start.col))
        rules.append(rule)
    if diags:
        raise ParseError(diags)
    return Program(Signature(tuple(arities.items())), tuple(rules))


def _variable(p: _Parser) -> Variable:
    tok = p.tok
    if tok.kind != "ident" or not tok.text[0].isupper():
        raise p.error("expected existential variable")
    p.i += 1
    return Variable(tok.text)


def _rule_diagnostics(rule: TGD, tok: _Tok) -> list[Diagnostic]:
    diags = []
    body_vars = set(rule.body_variables)
    for v in rule.existentials:
        if v in body_vars:
            diags.append(Diagnostic(f"existential {v} also occurs in the body", rule.rule_id, tok.line, tok.col))
    return diags


def parse_instance(text: str, signature: Signature | None = None) -> Instance:
    """Parse ground facts ``R(a,b).``; with a signature, unknown relations and arity mismatches are errors."""
    p = _Parser(text)
    facts = []
    diags = []
    arities = signature.as_dict() if signature is not None else {}
    while p.tok.kind != "eof":
        fact, tok = p.atom(allow_variables=False)
        p.expect(".")
        known = arities.get(fact.relation)
        if known is None:
            if signature is not None:
                diags.append(Diagnostic(f"unknown relation {fact.relation}", line=tok.line, column=tok.col))
                continue
            arities[fact.relation] = fact.arity
        elif known != fact.arity:
            diags.append(
                Diagnostic(f"arity mismatch: {fact.relation} has arity {known}, used with {fact.arity}", line=tok.line, column=tok.col)
            )
            continue
        facts.append(fact)
    if diags:
        raise ParseError(diags)
    return Instance(facts)


_PLAIN_CONST = re.compile(r"(?:[a-z][A-Za-z0-9_]*|[0-9]+)\Z")


def _format_leaf(term) -> str:
    if isinstance(term, Variable):
        return term.name
    if isinstance(term, Constant):
        if _PLAIN_CONST.match(term.name):
            return term.name
        escaped = term.name.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    raise TypeError(term)


def format_term(term) -> str:
    if isinstance(term, SkolemApp):
        return render_term(term, _format_leaf)
    return _format_leaf(term)


def format_atom(a: Atom) -> str:
    return f"{a.relation}({','.join(format_term(t) for t in a.args)})"


def format_rule(rule: TGD) -> str:
    body = ", ".join(format_atom(a) for a in rule.body)
    head = ", ".join(format_atom(a) for a in rule.head)
    exists = f"exists {','.join(v.name for v in rule.existentials)}: " if rule.existentials else ""
    return f"[{rule.rule_id}] {body} -> {exists}{head}."


def format_signature(signature: Signature) -> str:
    if not signature.relations:
        return "@signature."
    return "@signature " + ", ".join(f"{n}/{a}" for n, a in signature.relations) + "."


def print_program(program: Program) -> str:
    lines = [format_signature(program.signature)]
    lines.extend(format_rule(r) for r in program.rules)
    return "\n".join(lines) + "\n"


def print_instance(instance: Instance) -> str:
    return "".join(format_atom(f) + ".\n" for f in instance.sorted_facts())


def load_program(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


def load_instance(path, signature: Signature | None = None) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read(), signature)
