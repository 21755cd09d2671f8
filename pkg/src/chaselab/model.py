"""Terms, atoms, instances and tuple-generating dependencies.

Terms and variables are hash-consed: constructing the same term twice returns
the same object, so equality and hashing are identity based and cheap.
"""
from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Union


class Constant:
    __slots__ = ("name", "_key", "_digest", "__weakref__")
    _table: dict[str, Constant] = {}

    name: str
    depth = 0

    def __new__(cls, name: str) -> Constant:
        term = cls._table.get(name)
        if term is None:
            term = object.__new__(cls)
            term.name = name
            term._key = (0, name)
            term._digest = hashlib.blake2b(b"c" + name.encode(), digest_size=16).digest()
            cls._table[name] = term
        return term

    def __reduce__(self):
        return (Constant, (self.name,))

    @property
    def sort_key(self) -> tuple:
        return self._key

    def __repr__(self) -> str:
        return f"Constant({self.name!r})"

    def __str__(self) -> str:
        return self.name


class Variable:
    __slots__ = ("name", "__weakref__")
    _table: dict[str, Variable] = {}

    name: str

    def __new__(cls, name: str) -> Variable:
        var = cls._table.get(name)
        if var is None:
            var = object.__new__(cls)
            var.name = name
            cls._table[name] = var
        return var

    def __reduce__(self):
        return (Variable, (self.name,))

    def __repr__(self) -> str:
        return f"Variable({self.name!r})"

    def __str__(self) -> str:
        return self.name


class SkolemFunction(NamedTuple):
    """Identity of a Skolem function: one per (rule, existential variable)."""

    rule_id: str
    index: int

    def __str__(self) -> str:
        return f"h_{self.rule_id}_{self.index}"


class SkolemApp:
    """Application of a Skolem function.

    Arguments are ground terms for chase elements, or variables when the
    application appears as a template in the head of a skolemized rule.
    """

    __slots__ = ("function", "args", "depth", "ground", "size", "_key", "_digest", "__weakref__")
    _table: dict[tuple, SkolemApp] = {}

    function: SkolemFunction
    args: tuple
    depth: int
    ground: bool

    def __new__(cls, function: SkolemFunction, args: Iterable[Term | Variable]) -> SkolemApp:
        args = tuple(args)
        signature = (function, args)
        term = cls._table.get(signature)
        if term is None:
            term = object.__new__(cls)
            term.function = function
            term.args = args
            term.ground = all(not isinstance(a, Variable) and a.ground for a in args)
            term.depth = 1 + max((a.depth for a in args if not isinstance(a, Variable)), default=0)
            term.size = 1 + sum(a.size if isinstance(a, SkolemApp) else 1 for a in args)
            term._key = None
            term._digest = None
            cls._table[signature] = term
        return term

    def __reduce__(self):
        return (SkolemApp, (self.function, self.args))

    @property
    def sort_key(self) -> tuple:
        """Depth first, then a structural digest; flat, so deep terms compare cheaply."""
        if self._key is None:
            self._key = (1, self.depth, _structural_digest(self))
        return self._key

    def __repr__(self) -> str:
        return f"SkolemApp<{render_term(self)}>"

    def __str__(self) -> str:
        return render_term(self)


Constant.ground = True


def _structural_digest(term: SkolemApp) -> bytes:
    """Hash of the term tree, computed bottom-up without recursion and cached."""
    stack = [term]
    while stack:
        t = stack[-1]
        pending = [a for a in t.args if isinstance(a, SkolemApp) and a._digest is None]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        if t._digest is not None:
            continue
        h = hashlib.blake2b(digest_size=16)
        h.update(f"f{t.function.rule_id}\x00{t.function.index}\x00{len(t.args)}".encode())
        for a in t.args:
            h.update(b"v" + a.name.encode() + b"\x00" if isinstance(a, Variable) else a._digest)
        t._digest = h.digest()
    return term._digest


RENDER_LIMIT = 256


def render_term(term, leaf=str, limit: int | None = RENDER_LIMIT) -> str:
    """Text of a term without recursion; ``leaf`` renders constants and variables.

    Shared subterms make tree size exponential in depth, so subterms larger
    than ``limit`` nodes print as ``function#digest``.
    """
    out: list[str] = []
    stack: list = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, str):
            out.append(t)
        elif isinstance(t, SkolemApp):
            if limit is not None and t.size > limit:
                out.append(f"{t.function}#{_structural_digest(t).hex()[:12]}")
                continue
            out.append(f"{t.function}(")
            stack.append(")")
            for k in range(len(t.args) - 1, -1, -1):
                stack.append(t.args[k])
                if k:
                    stack.append(",")
        else:
            out.append(leaf(t))
    return "".join(out)

Term = Union[Constant, SkolemApp]
Arg = Union[Constant, SkolemApp, Variable]


def _sort_key(arg: Arg) -> tuple:
    if isinstance(arg, Variable):
        return (2, arg.name)
    return arg.sort_key


def term_sort_key(term: Arg) -> tuple:
    """Total order on terms: constants by name, then Skolem terms structurally."""
    return _sort_key(term)


def term_depth(term: Term) -> int:
    return term.depth


def is_ground(arg: Arg) -> bool:
    return not isinstance(arg, Variable) and arg.ground


def subterms(term: Term) -> Iterator[Term]:
    yield term
    if isinstance(term, SkolemApp):
        for a in term.args:
            yield from subterms(a)


def contains_properly(outer: Term, inner: Term) -> bool:
    """True when ``inner`` occurs in ``outer`` strictly below the root."""
    if not isinstance(outer, SkolemApp):
        return False
    stack = list(outer.args)
    while stack:
        t = stack.pop()
        if t is inner:
            return True
        if isinstance(t, SkolemApp) and t.depth > inner.depth:
            stack.extend(t.args)
    return False


def substitute(arg: Arg, binding: dict) -> Arg:
    if isinstance(arg, Variable):
        return binding.get(arg, arg)
    if isinstance(arg, SkolemApp) and not arg.ground:
        return SkolemApp(arg.function, (substitute(a, binding) for a in arg.args))
    return arg


def map_term(term: Term, mapping: dict) -> Term:
    """Apply a constant-or-term renaming through Skolem applications."""
    hit = mapping.get(term)
    if hit is not None:
        return hit
    if isinstance(term, SkolemApp):
        return SkolemApp(term.function, (map_term(a, mapping) for a in term.args))
    return term


class Atom(NamedTuple):
    relation: str
    args: tuple

    @property
    def arity(self) -> int:
        return len(self.args)

    def is_ground(self) -> bool:
        return all(is_ground(a) for a in self.args)

    def variables(self) -> Iterator[Variable]:
        for a in self.args:
            yield from _variables_of(a)

    def substitute(self, binding: dict) -> Atom:
        return Atom(self.relation, tuple(substitute(a, binding) for a in self.args))

    def __str__(self) -> str:
        return f"{self.relation}({','.join(str(a) for a in self.args)})"


def _variables_of(arg: Arg) -> Iterator[Variable]:
    if isinstance(arg, Variable):
        yield arg
    elif isinstance(arg, SkolemApp) and not arg.ground:
        for a in arg.args:
            yield from _variables_of(a)


def atom(relation: str, *args: Arg | str) -> Atom:
    """Convenience constructor: uppercase strings become variables, others constants."""
    conv = []
    for a in args:
        if isinstance(a, str):
            a = Variable(a) if a[:1].isupper() else Constant(a)
        conv.append(a)
    return Atom(relation, tuple(conv))


@dataclass(frozen=True)
class Signature:
    relations: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        seen = set()
        for name, arity in self.relations:
            if name in seen:
                raise ValueError(f"duplicate relation {name!r} in signature")
            if arity < 1:
                raise ValueError(f"relation {name!r} must have arity >= 1, got {arity}")
            seen.add(name)

    @classmethod
    def of(cls, **arities: int) -> Signature:
        return cls(tuple(arities.items()))

    def arity(self, name: str) -> int | None:
        for rel, arity in self.relations:
            if rel == name:
                return arity
        return None

    def as_dict(self) -> dict[str, int]:
        return dict(self.relations)

    def names(self) -> list[str]:
        return [name for name, _ in self.relations]

    def __contains__(self, name: str) -> bool:
        return self.arity(name) is not None

    def __len__(self) -> int:
        return len(self.relations)

    def union(self, other: Signature) -> Signature:
        mine = self.as_dict()
        extra = []
        for name, arity in other.relations:
            if name in mine:
                if mine[name] != arity:
                    raise ValueError(f"relation {name!r} used with arities {mine[name]} and {arity}")
            else:
                extra.append((name, arity))
        return Signature(self.relations + tuple(extra))


@dataclass(frozen=True)
class TGD:
    """A rule ``body -> exists existentials: head``.

    ``existentials`` lists the head-only variables in order of first
    occurrence; the frontier is the set of variables shared by body and head.
    """

    rule_id: str
    body: tuple[Atom, ...]
    head: tuple[Atom, ...]
    existentials: tuple[Variable, ...] = ()

    @property
    def body_variables(self) -> tuple[Variable, ...]:
        return _ordered_variables(self.body)

    @property
    def head_variables(self) -> tuple[Variable, ...]:
        return _ordered_variables(self.head)

    @property
    def frontier(self) -> tuple[Variable, ...]:
        head = set(self.head_variables)
        return tuple(v for v in self.body_variables if v in head)

    @property
    def domain_variables(self) -> tuple[Variable, ...]:
        """Head variables that are neither in the body nor existential.

        Such a rule is unsafe; the chase lets these variables range over the
        active domain (the flooding rule idiom).
        """
        body = set(self.body_variables)
        ex = set(self.existentials)
        return tuple(v for v in self.head_variables if v not in body and v not in ex)

    @property
    def is_single_head(self) -> bool:
        return len(self.head) == 1

    @property
    def is_datalog(self) -> bool:
        return not self.existentials

    def __str__(self) -> str:
        from chaselab.parser import format_rule

        return format_rule(self)


def is_datalog_rule(rule: TGD) -> bool:
    return not rule.existentials


def _ordered_variables(atoms: Iterable[Atom]) -> tuple[Variable, ...]:
    seen: dict[Variable, None] = {}
    for a in atoms:
        for v in a.variables():
            seen.setdefault(v, None)
    return tuple(seen)


def make_rule(rule_id: str, body: Iterable[Atom], head: Iterable[Atom]) -> TGD:
    """Build a TGD, treating head variables absent from the body as existential."""
    body = tuple(body)
    head = tuple(head)
    body_vars = set(_ordered_variables(body))
    existentials = tuple(v for v in _ordered_variables(head) if v not in body_vars)
    return TGD(rule_id, body, head, existentials)


@dataclass(frozen=True)
class Program:
    signature: Signature
    rules: tuple[TGD, ...] = ()

    def rule(self, rule_id: str) -> TGD:
        for r in self.rules:
            if r.rule_id == rule_id:
                return r
        raise KeyError(rule_id)

    def rule_ids(self) -> list[str]:
        return [r.rule_id for r in self.rules]

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def union(self, other: Program) -> Program:
        return Program(self.signature.union(other.signature), self.rules + other.rules)


def infer_signature(rules: Iterable[TGD], base: Signature | None = None) -> Signature:
    arities = dict(base.relations) if base else {}
    order = list(arities)
    for r in rules:
        for a in r.body + r.head:
            known = arities.get(a.relation)
            if known is None:
                arities[a.relation] = a.arity
                order.append(a.relation)
            elif known != a.arity:
                raise ValueError(
                    f"relation {a.relation!r} used with arities {known} and {a.arity} (rule {r.rule_id})"
                )
    return Signature(tuple((name, arities[name]) for name in order))


@dataclass(frozen=True)
class Diagnostic:
    message: str
    rule_id: str | None = None
    line: int | None = None
    column: int | None = None

    def __str__(self) -> str:
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
            if self.column is not None:
                where.append(f"col {self.column}")
        if self.rule_id is not None:
            where.append(f"rule {self.rule_id}")
        prefix = ", ".join(where)
        return f"{prefix}: {self.message}" if prefix else self.message


def validate_program(program: Program, allow_domain_variables: bool = False) -> list[Diagnostic]:
    """Check arities against the signature and variable safety; never raises.

    With ``allow_domain_variables`` head variables absent from the body are
    accepted; the engine ranges them over the active domain.
    """
    diags: list[Diagnostic] = []
    arities = program.signature.as_dict()
    seen_ids: set[str] = set()
    for r in program.rules:
        if r.rule_id in seen_ids:
            diags.append(Diagnostic("duplicate rule id", r.rule_id))
        seen_ids.add(r.rule_id)
        if not r.body:
            diags.append(Diagnostic("empty body", r.rule_id))
        if not r.head:
            diags.append(Diagnostic("empty head", r.rule_id))
        for part, atoms in (("body", r.body), ("head", r.head)):
            for a in atoms:
                expected = arities.get(a.relation)
                if expected is None:
                    diags.append(Diagnostic(f"unknown relation {a.relation} in {part}", r.rule_id))
                elif expected != a.arity:
                    diags.append(
                        Diagnostic(
                            f"arity mismatch: {a.relation} has arity {expected}, used with {a.arity} in {part}",
                            r.rule_id,
                        )
                    )
        body_vars = set(r.body_variables)
        existentials = set(r.existentials)
        for v in r.head_variables:
            if v not in body_vars and v not in existentials and not allow_domain_variables:
                diags.append(Diagnostic(f"unsafe head variable {v} (not in body, not existential)", r.rule_id))
        for v in r.existentials:
            if v in body_vars:
                diags.append(Diagnostic(f"existential variable {v} also occurs in body", r.rule_id))
    return diags


class Instance:
    """A finite set of ground atoms with per-relation and per-position indexes.

    Chase runs grow an instance in place; ``add`` is idempotent.
    """

    __slots__ = ("_facts", "_by_relation", "_index", "_adom")

    def __init__(self, facts: Iterable[Atom] = ()):
        self._facts: set[Atom] = set()
        self._by_relation: dict[str, list[Atom]] = defaultdict(list)
        self._index: dict[tuple, list[Atom]] = defaultdict(list)
        self._adom: dict[Term, None] = {}
        for f in facts:
            self.add(f)

    def add(self, fact: Atom) -> bool:
        if fact in self._facts:
            return False
        if not fact.is_ground():
            raise ValueError(f"instance facts must be ground: {fact}")
        self._facts.add(fact)
        self._by_relation[fact.relation].append(fact)
        rel = fact.relation
        index = self._index
        adom = self._adom
        for pos, term in enumerate(fact.args):
            index[(rel, pos, term)].append(fact)
            if term not in adom:
                adom[term] = None
        return True

    def __contains__(self, fact: Atom) -> bool:
        return fact in self._facts

    def __len__(self) -> int:
        return len(self._facts)

    def __iter__(self) -> Iterator[Atom]:
        for facts in self._by_relation.values():
            yield from facts

    def __eq__(self, other) -> bool:
        if isinstance(other, Instance):
            return self._facts == other._facts
        return NotImplemented

    __hash__ = None

    def __repr__(self) -> str:
        return f"Instance({len(self)} facts)"

    @property
    def facts(self) -> frozenset[Atom]:
        return frozenset(self._facts)

    @property
    def adom(self) -> frozenset[Term]:
        return frozenset(self._adom)

    def adom_ordered(self) -> list[Term]:
        return list(self._adom)

    def relation(self, name: str) -> list[Atom]:
        return self._by_relation.get(name, [])

    def lookup(self, relation: str, position: int, term: Term) -> list[Atom]:
        return self._index.get((relation, position, term), [])

    def relations(self) -> list[str]:
        return [r for r, fs in self._by_relation.items() if fs]

    def copy(self) -> Instance:
        return Instance(self)

    def max_depth(self) -> int:
        return max((t.depth for t in self._adom), default=0)

    def restrict(self, relations: Iterable[str]) -> Instance:
        keep = set(relations)
        return Instance(f for f in self if f.relation in keep)

    def sorted_facts(self) -> list[Atom]:
        return sorted(self._facts, key=fact_sort_key)


def fact_sort_key(fact: Atom) -> tuple:
    return (fact.relation, tuple(term_sort_key(a) for a in fact.args))


def ground_atom(relation: str, *names: str) -> Atom:
    return Atom(relation, tuple(Constant(n) for n in names))


@dataclass
class CheckReport:
    """Named pass/fail checks with offending details, shared by the verifiers."""

    title: str
    checks: dict[str, bool] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    def record(self, name: str, ok: bool, detail: str | None = None) -> None:
        self.checks[name] = self.checks.get(name, True) and ok
        if not ok and detail:
            self.violations.append(f"{name}: {detail}")

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def lines(self) -> list[str]:
        return [f"{name}\t{'pass' if ok else 'FAIL'}" for name, ok in self.checks.items()]
