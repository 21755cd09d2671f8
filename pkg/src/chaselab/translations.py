"""Multi-head utilities: the projection-based single-head translation and ternary splitting."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from chaselab.model import TGD, Atom, Program, Signature, Variable


@dataclass
class TranslationReport:
    original: Program
    translated: Program
    fresh_relations: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def _ordered_head_vars(rule: TGD) -> tuple[Variable, ...]:
    seen: dict[Variable, None] = {}
    for a in rule.head:
        for t in a.args:
            if isinstance(t, Variable):
                seen.setdefault(t, None)
    return tuple(seen)


def fresh_head_name(rule_id: str) -> str:
    return "Head_" + re.sub(r"[^A-Za-z0-9_]", "_", rule_id)


def single_head_translate(program: Program) -> TranslationReport:
    """Route each multi-head rule through a fresh relation holding all head variables."""
    rules = []
    fresh = []
    sig = list(program.signature.relations)
    taken = set(program.signature.names())
    for rule in program.rules:
        if rule.is_single_head:
            rules.append(rule)
            continue
        name = fresh_head_name(rule.rule_id)
        while name in taken:
            name += "_"
        taken.add(name)
        args = _ordered_head_vars(rule)
        fresh_atom = Atom(name, args)
        rules.append(TGD(rule.rule_id, rule.body, (fresh_atom,), rule.existentials))
        for k, a in enumerate(rule.head, 1):
            rules.append(TGD(f"{rule.rule_id}_proj{k}", (fresh_atom,), (a,), ()))
        fresh.append(name)
        sig.append((name, len(args)))
    notes = []
    if fresh:
        notes.append("oblivious and semi-oblivious results agree on the original relations up to null renaming")
        notes.append("standard-chase termination on all paths is not preserved in general")
    return TranslationReport(program, Program(Signature(tuple(sig)), tuple(rules)), fresh, notes)


def _fresh_variable(used: set, base: str) -> Variable:
    name = base
    k = 1
    while name in used:
        k += 1
        name = f"{base}{k}"
    used.add(name)
    return Variable(name)


def ternary_split(rule: TGD) -> TGD:
    """Replace every atom of the head's ternary relation by three binary atoms on an atom name.

    ``T(x,y,z)`` in the body becomes ``T1(v,x), T2(v,y), T3(v,z)`` with a fresh
    ``v`` per atom; the head becomes ``exists w: T1(w,..), T2(w,..), T3(w,..)``.
    """
    if len(rule.head) != 1 or rule.head[0].arity != 3:
        raise ValueError(f"rule {rule.rule_id}: head must be a single ternary atom")
    rel = rule.head[0].relation
    used = {v.name for a in rule.body + rule.head for v in a.variables()}
    used |= {v.name for v in rule.existentials}
    parts = [f"{rel}{k}" for k in (1, 2, 3)]

    def split(a: Atom, name: Variable) -> list[Atom]:
        return [Atom(parts[k], (name, a.args[k])) for k in range(3)]

    body: list[Atom] = []
    for a in rule.body:
        if a.relation == rel:
            body.extend(split(a, _fresh_variable(used, "V")))
        else:
            body.append(a)
    w = _fresh_variable(used, "W")
    head = split(rule.head[0], w)
    return TGD(rule.rule_id, tuple(body), tuple(head), rule.existentials + (w,))


def ternary_split_program(program: Program, relation: str) -> Program:
    """Split every rule whose head uses ``relation``; other rules keep their atoms
    except that body occurrences of ``relation`` are split too."""
    out = []
    for rule in program.rules:
        if len(rule.head) == 1 and rule.head[0].relation == relation:
            out.append(ternary_split(rule))
        elif any(a.relation == relation for a in rule.body):
            used = {v.name for a in rule.body + rule.head for v in a.variables()}
            body = []
            for a in rule.body:
                if a.relation == relation:
                    v = _fresh_variable(used, "V")
                    body.extend(Atom(f"{relation}{k + 1}", (v, a.args[k])) for k in range(3))
                else:
                    body.append(a)
            out.append(TGD(rule.rule_id, tuple(body), rule.head, rule.existentials))
        else:
            out.append(rule)
    sig = [(n, a) for n, a in program.signature.relations if n != relation]
    sig += [(f"{relation}{k}", 2) for k in (1, 2, 3)]
    return Program(Signature(tuple(sig)), tuple(out))
