"""Conjunctive-query matching (homomorphism search) against an instance."""
from __future__ import annotations

import sys
from typing import Iterable, Iterator, Sequence

from chaselab.model import Atom, Instance, SkolemApp, Term, Variable, term_sort_key


def _unify(pattern: Atom, fact: Atom, binding: dict) -> dict | None:
    new = None
    for p, t in zip(pattern.args, fact.args):
        if isinstance(p, Variable):
            bound = binding.get(p) if new is None else new.get(p)
            if bound is None:
                if new is None:
                    new = dict(binding)
                new[p] = t
            elif bound is not t:
                return None
        elif p is not t:
            return None
    return binding if new is None else new


def unify(pattern: Atom, fact: Atom, binding: dict | None = None) -> dict | None:
    """Extend ``binding`` so that ``pattern`` maps onto ``fact``, or return None."""
    if pattern.relation != fact.relation or len(pattern.args) != len(fact.args):
        return None
    return _unify(pattern, fact, binding or {})


def _candidates(a: Atom, instance: Instance, binding: dict) -> list[Atom]:
    best = None
    for pos, p in enumerate(a.args):
        if isinstance(p, Variable):
            t = binding.get(p)
            if t is None:
                continue
        else:
            t = p
        hits = instance.lookup(a.relation, pos, t)
        if best is None or len(hits) < len(best):
            best = hits
            if not hits:
                break
    return instance.relation(a.relation) if best is None else best


def match_atoms(
    atoms: Sequence[Atom], instance: Instance, binding: dict | None = None
) -> Iterator[dict]:
    """Yield every extension of ``binding`` mapping all ``atoms`` into ``instance``.

    The next atom is chosen dynamically by smallest candidate list, so the
    enumeration order depends only on the instance's insertion order.
    """
    binding = {} if binding is None else binding
    if not atoms:
        yield binding
        return
    remaining = list(atoms)
    yield from _match(remaining, instance, binding)


def _match(remaining: list[Atom], instance: Instance, binding: dict) -> Iterator[dict]:
    if len(remaining) == 1:
        a = remaining[0]
        for fact in _candidates(a, instance, binding):
            b = _unify(a, fact, binding)
            if b is not None:
                yield b if b is not binding else dict(binding)
        return
    best_i, best = 0, None
    for i, a in enumerate(remaining):
        cands = _candidates(a, instance, binding)
        if best is None or len(cands) < len(best):
            best_i, best = i, cands
            if not cands:
                return
    a = remaining[best_i]
    rest = remaining[:best_i] + remaining[best_i + 1 :]
    for fact in best:
        b = _unify(a, fact, binding)
        if b is not None:
            yield from _match(rest, instance, b)


def exists_match(atoms: Sequence[Atom], instance: Instance, binding: dict | None = None) -> bool:
    for _ in match_atoms(atoms, instance, binding):
        return True
    return False


def find_instance_homomorphism(
    source: Iterable[Atom],
    target: Instance,
    mappable,
    fixed: dict | None = None,
    node_budget: int | None = None,
) -> dict | None:
    """Find a map h on the terms of ``source`` with h(source) contained in ``target``.

    Terms for which ``mappable(term)`` is false must map to themselves; terms
    in ``fixed`` are pre-assigned. Returns the term mapping or None. With a
    ``node_budget`` the search gives up (returns None) after that many
    candidate facts have been tried. Unassigned terms try their identity image
    first, which is the common case when source and target are chase states.
    """
    to_var: dict[Term, Variable] = {}
    pattern = []
    for fact in source:
        args = []
        for t in fact.args:
            if mappable(t):
                v = to_var.get(t)
                if v is None:
                    v = Variable(f"?h{len(to_var)}")
                    to_var[t] = v
                args.append(v)
            else:
                args.append(t)
        pattern.append(Atom(fact.relation, tuple(args)))
    original = {v: t for t, v in to_var.items()}
    binding = {}
    for t, image in (fixed or {}).items():
        if t in to_var:
            binding[to_var[t]] = image
    counter = [0]

    def identity_image(a: Atom, b: dict) -> Atom:
        return Atom(a.relation, tuple(b.get(x, original[x]) if isinstance(x, Variable) else x for x in a.args))

    def rec(remaining: list[Atom], b: dict):
        if not remaining:
            return b
        best_i, best = 0, None
        for i, a in enumerate(remaining):
            cands = _candidates(a, target, b)
            if best is None or len(cands) < len(best):
                best_i, best = i, cands
                if not cands:
                    return None
        a = remaining[best_i]
        rest = remaining[:best_i] + remaining[best_i + 1 :]
        if len(best) > 1:
            preferred = identity_image(a, b)
            if preferred in target:
                best = [preferred] + [f for f in best if f != preferred]
        for fact in best:
            counter[0] += 1
            if node_budget is not None and counter[0] > node_budget:
                raise _BudgetExhausted
            nb = _unify(a, fact, b)
            if nb is not None:
                res = rec(rest, nb)
                if res is not None:
                    return res
        return None

    variable_free = [a for a in pattern if not any(isinstance(x, Variable) for x in a.args)]
    if any(a not in target for a in variable_free):
        return None
    pattern = [a for a in pattern if any(isinstance(x, Variable) for x in a.args)]
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * len(pattern) + 200))
    try:
        found = rec(pattern, binding)
    except _BudgetExhausted:
        return None
    finally:
        sys.setrecursionlimit(limit)
    if found is None:
        return None
    return {t: found[v] for t, v in to_var.items()}


class _BudgetExhausted(Exception):
    pass


def sorted_binding(binding: dict) -> list[tuple[Variable, Term]]:
    return sorted(binding.items(), key=lambda kv: kv[0].name)


def binding_key(values: Sequence[Term]) -> tuple:
    return tuple(term_sort_key(t) for t in values)


def is_null(term: Term) -> bool:
    return isinstance(term, SkolemApp)
