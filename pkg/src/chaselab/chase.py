"""Oblivious, semi-oblivious and standard chase.

Fresh elements are Skolem terms. The oblivious chase names the witness of
rule ``r``'s ``i``-th existential by ``h_r_i`` applied to every body variable;
the semi-oblivious chase applies it to the frontier only. The standard chase
uses the frontier-keyed names too: a standard firing makes its head true for
good, so a frontier binding never fires twice within a run and the names stay
unique. The firing step of each null is kept in the trace.

Datalog rules are saturated eagerly (fact-at-a-time semi-naive evaluation)
before every existential firing, so ``steps`` below always counts existential
firings only.
"""
from __future__ import annotations

import itertools
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from chaselab.match import exists_match, match_atoms, unify
from chaselab.model import (
    TGD,
    Atom,
    Instance,
    Program,
    SkolemApp,
    SkolemFunction,
    Term,
    Variable,
    term_sort_key,
)


class Variant(str, Enum):
    OBLIVIOUS = "oblivious"
    SEMI_OBLIVIOUS = "semi-oblivious"
    STANDARD = "standard"


class Verdict(str, Enum):
    TERMINATED = "terminated"
    BUDGET_EXCEEDED = "budget-exceeded"


@dataclass(frozen=True)
class Strategy:
    """Firing-order policy for pending existential triggers."""

    kind: str = "fifo"
    seed: int | None = None
    path_budget: int | None = None

    def __post_init__(self):
        if self.kind not in ("fifo", "lifo", "random", "exhaustive"):
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.kind == "random" and self.seed is None:
            raise ValueError("the random strategy needs a seed")
        if self.kind == "exhaustive" and (self.path_budget is None or self.path_budget < 1):
            raise ValueError("the exhaustive strategy needs a positive path budget")

    @classmethod
    def fifo(cls) -> Strategy:
        return cls("fifo")

    @classmethod
    def lifo(cls) -> Strategy:
        return cls("lifo")

    @classmethod
    def random(cls, seed: int) -> Strategy:
        return cls("random", seed=seed)

    @classmethod
    def exhaustive(cls, path_budget: int) -> Strategy:
        return cls("exhaustive", path_budget=path_budget)

    def __str__(self) -> str:
        if self.kind == "random":
            return f"random({self.seed})"
        if self.kind == "exhaustive":
            return f"exhaustive({self.path_budget})"
        return self.kind


@dataclass(frozen=True)
class ChaseConfig:
    variant: Variant = Variant.OBLIVIOUS
    max_steps: int = 10**6
    max_depth: int | None = None
    strategy: Strategy = field(default_factory=Strategy)
    max_facts: int | None = None
    record_trace: bool = True

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.max_facts is not None and self.max_facts < 1:
            raise ValueError("max_facts must be positive")
        if self.strategy.kind == "exhaustive" and self.variant is not Variant.STANDARD:
            raise ValueError("exhaustive path enumeration is only defined for the standard chase")


@dataclass(frozen=True)
class Trigger:
    rule_id: str
    binding: tuple[tuple[Variable, Term], ...]

    def as_dict(self) -> dict[Variable, Term]:
        return dict(self.binding)

    def values(self) -> tuple[Term, ...]:
        return tuple(t for _, t in self.binding)

    def __str__(self) -> str:
        inner = ", ".join(f"{v}={t}" for v, t in self.binding)
        return f"{self.rule_id}{{{inner}}}"


@dataclass(frozen=True)
class TraceStep:
    index: int
    step: int
    trigger: Trigger
    added: tuple[Atom, ...]
    existential: bool


@dataclass
class ChaseResult:
    verdict: Verdict
    instance: Instance
    steps_used: int
    max_term_depth: int
    trace: list[TraceStep]
    config: ChaseConfig
    initial: Instance
    reason: str | None = None

    @property
    def terminated(self) -> bool:
        return self.verdict is Verdict.TERMINATED

    @property
    def final_instance(self) -> Instance:
        return self.instance


def skolem_arguments(rule: TGD, variant: Variant) -> tuple[Variable, ...]:
    if Variant(variant) is Variant.OBLIVIOUS:
        return rule.body_variables
    return rule.frontier


def skolemize_rule(rule: TGD, variant: Variant) -> TGD:
    if not rule.existentials:
        return rule
    args = skolem_arguments(rule, variant)
    names = {
        z: SkolemApp(SkolemFunction(rule.rule_id, i), args) for i, z in enumerate(rule.existentials)
    }
    head = tuple(a.substitute(names) for a in rule.head)
    return TGD(rule.rule_id, rule.body, head, ())


def skolemize(program: Program, variant: Variant = Variant.OBLIVIOUS) -> Program:
    """Replace existential variables by Skolem terms.

    Oblivious: over all body variables. Semi-oblivious (and the standard
    chase's null naming): over the frontier. Datalog rules are unchanged.
    """
    return Program(program.signature, tuple(skolemize_rule(r, variant) for r in program.rules))


def find_triggers(instance: Instance, rule: TGD) -> list[Trigger]:
    """All homomorphisms from the rule body into the instance, in binding order."""
    body_vars = rule.body_variables
    found = {
        tuple(b[v] for v in body_vars) for b in match_atoms(rule.body, instance)
    }
    ordered = sorted(found, key=lambda vals: tuple(term_sort_key(t) for t in vals))
    return [Trigger(rule.rule_id, tuple(zip(body_vars, vals))) for vals in ordered]


def fired_key(variant: Variant, rule: TGD, trigger: Trigger) -> tuple:
    """Key under which a firing is remembered: full binding or frontier projection."""
    binding = trigger.as_dict()
    if Variant(variant) is Variant.OBLIVIOUS:
        return (rule.rule_id,) + tuple(binding[v] for v in rule.body_variables)
    return (rule.rule_id,) + tuple(binding[v] for v in rule.frontier)


def head_satisfied(instance: Instance, rule: TGD, binding: dict) -> bool:
    frontier = {v: binding[v] for v in rule.frontier}
    return exists_match(rule.head, instance, frontier)


def step_applicable(
    variant: Variant, instance: Instance, rule: TGD, trigger: Trigger, fired_log: set
) -> bool:
    variant = Variant(variant)
    if variant is Variant.STANDARD:
        return not head_satisfied(instance, rule, trigger.as_dict())
    return fired_key(variant, rule, trigger) not in fired_log


def _fresh_tuples(adom: list, covered: int, k: int):
    """Tuples over ``adom`` with at least one component at index >= ``covered``."""
    old, new = adom[:covered], adom[covered:]
    for first in range(k):
        for prefix in itertools.product(old, repeat=first):
            for pivot in new:
                for suffix in itertools.product(adom, repeat=k - first - 1):
                    yield prefix + (pivot,) + suffix


class _BudgetTripped(Exception):
    def __init__(self, reason: str):
        self.reason = reason


class _Run:
    def __init__(self, program: Program, instance: Instance, config: ChaseConfig):
        self.config = config
        self.variant = config.variant
        self.rules = program.rules
        self.inst = instance.copy()
        self.heads = []
        self.body_vars = []
        self.frontier_pos = []
        self.domain_vars = []
        self.existential = []
        self.rule_index = {}
        self.by_relation: dict[str, list[tuple[int, int, list[Atom]]]] = defaultdict(list)
        null_variant = Variant.SEMI_OBLIVIOUS if self.variant is Variant.STANDARD else self.variant
        for i, rule in enumerate(program.rules):
            if rule.existentials and rule.domain_variables:
                raise ValueError(f"rule {rule.rule_id}: existential rules must be safe")
            self.rule_index[rule.rule_id] = i
            self.heads.append(skolemize_rule(rule, null_variant).head)
            bv = rule.body_variables
            self.body_vars.append(bv)
            front = set(rule.frontier)
            self.frontier_pos.append(tuple(k for k, v in enumerate(bv) if v in front))
            self.domain_vars.append(rule.domain_variables)
            self.existential.append(bool(rule.existentials))
            for pos, a in enumerate(rule.body):
                rest = list(rule.body[:pos] + rule.body[pos + 1 :])
                self.by_relation[a.relation].append((i, pos, rest))
        self.domain_rules = [i for i, dv in enumerate(self.domain_vars) if dv]
        self.domain_seen = 0
        self.domain_done: dict[tuple, int] = {}
        self.seen: set[tuple] = set()
        self.fired: set[tuple] = set()
        strategy = config.strategy
        self.kind = strategy.kind
        self.rng = random.Random(strategy.seed) if strategy.kind == "random" else None
        self.pending: deque | list = deque() if strategy.kind == "fifo" else []
        self.batch: list[tuple[int, tuple]] = []
        self.steps = 0
        self.trace: list[TraceStep] = []
        self.record = config.record_trace
        self.max_depth = instance.max_depth()

    def trigger(self, i: int, values: tuple) -> Trigger:
        names = self.body_vars[i] + self.domain_vars[i]
        return Trigger(self.rules[i].rule_id, tuple(zip(names, values)))

    def instantiate(self, i: int, values: tuple) -> list[Atom]:
        names = self.body_vars[i] + self.domain_vars[i]
        binding = dict(zip(names, values))
        return [a.substitute(binding) for a in self.heads[i]]

    def add_facts(self, facts: Iterable[Atom], queue: deque) -> list[Atom]:
        added = []
        limit = self.config.max_facts
        for f in facts:
            if self.inst.add(f):
                added.append(f)
                queue.append(f)
                for t in f.args:
                    if t.depth > self.max_depth:
                        self.max_depth = t.depth
        if limit is not None and len(self.inst) > limit:
            raise _BudgetTripped("max_facts")
        return added

    def fire_datalog(self, i: int, values: tuple, queue: deque) -> None:
        domain = self.domain_vars[i]
        if not domain:
            self._fire_datalog_once(i, values, queue)
            return
        # unsafe head variables range over the active domain; only tuples
        # touching elements added since the last visit are new
        adom = self.inst.adom_ordered()
        covered = self.domain_done.get((i, values), 0)
        self.domain_done[(i, values)] = len(adom)
        for extra in _fresh_tuples(adom, covered, len(domain)):
            self._fire_datalog_once(i, values + extra, queue)

    def _fire_datalog_once(self, i: int, values: tuple, queue: deque) -> None:
        added = self.add_facts(self.instantiate(i, values), queue)
        if added and self.record:
            self.trace.append(TraceStep(len(self.trace), self.steps, self.trigger(i, values), tuple(added), False))

    def saturate(self, delta: Iterable[Atom]) -> None:
        queue = deque(delta)
        inst = self.inst
        while True:
            while queue:
                fact = queue.popleft()
                for i, pos, rest in self.by_relation.get(fact.relation, ()):
                    b = unify(self.rules[i].body[pos], fact)
                    if b is None:
                        continue
                    names = self.body_vars[i]
                    for full in match_atoms(rest, inst, b):
                        values = tuple(full[v] for v in names)
                        if self.existential[i]:
                            key = (i, values)
                            if key not in self.seen:
                                self.seen.add(key)
                                self.batch.append(key)
                        else:
                            self.fire_datalog(i, values, queue)
            if self.domain_rules and len(inst.adom) > self.domain_seen:
                self.domain_seen = len(inst.adom)
                for i in self.domain_rules:
                    names = self.body_vars[i]
                    for full in list(match_atoms(self.rules[i].body, inst)):
                        self.fire_datalog(i, tuple(full[v] for v in names), queue)
            if not queue:
                break
        self.flush_batch()

    def flush_batch(self) -> None:
        if not self.batch:
            return
        self.batch.sort(key=lambda key: (key[0], tuple(term_sort_key(t) for t in key[1])))
        self.pending.extend(self.batch)
        self.batch = []

    def pop(self):
        if self.kind == "fifo":
            return self.pending.popleft()
        if self.kind == "lifo":
            return self.pending.pop()
        k = self.rng.randrange(len(self.pending))
        self.pending[k], self.pending[-1] = self.pending[-1], self.pending[k]
        return self.pending.pop()

    def applicable(self, i: int, values: tuple) -> bool:
        if self.variant is Variant.OBLIVIOUS:
            return True
        if self.variant is Variant.SEMI_OBLIVIOUS:
            key = (i,) + tuple(values[k] for k in self.frontier_pos[i])
            return key not in self.fired
        rule = self.rules[i]
        return not head_satisfied(self.inst, rule, dict(zip(self.body_vars[i], values)))

    def next_applicable(self):
        while self.pending:
            i, values = self.pop()
            if self.applicable(i, values):
                return i, values
        return None

    def fire_existential(self, i: int, values: tuple) -> None:
        if self.variant is Variant.SEMI_OBLIVIOUS:
            self.fired.add((i,) + tuple(values[k] for k in self.frontier_pos[i]))
        facts = self.instantiate(i, values)
        if self.config.max_depth is not None:
            deepest = max(t.depth for f in facts for t in f.args)
            if deepest > self.config.max_depth:
                raise _BudgetTripped("max_depth")
        self.steps += 1
        queue: deque = deque()
        added = self.add_facts(facts, queue)
        if self.record:
            self.trace.append(TraceStep(len(self.trace), self.steps, self.trigger(i, values), tuple(added), True))
        self.saturate(queue)


def run_chase(program: Program, instance: Instance, config: ChaseConfig | None = None) -> ChaseResult:
    """Chase ``instance`` with ``program`` until no trigger applies or a budget trips."""
    config = config or ChaseConfig()
    if config.strategy.kind == "exhaustive":
        raise ValueError("use enumerate_standard_paths for exhaustive exploration")
    run = _Run(program, instance, config)
    verdict, reason = Verdict.TERMINATED, None
    try:
        run.saturate(list(run.inst))
        while True:
            nxt = run.next_applicable()
            if nxt is None:
                break
            if run.steps >= config.max_steps:
                raise _BudgetTripped("max_steps")
            run.fire_existential(*nxt)
    except _BudgetTripped as trip:
        verdict, reason = Verdict.BUDGET_EXCEEDED, trip.reason
    return ChaseResult(
        verdict=verdict,
        instance=run.inst,
        steps_used=run.steps,
        max_term_depth=run.inst.max_depth(),
        trace=run.trace,
        config=config,
        initial=instance.copy(),
        reason=reason,
    )


def model_violations(program: Program, instance: Instance, limit: int | None = None) -> list[Trigger]:
    """Triggers whose head has no satisfying extension in ``instance``."""
    out = []
    adom = instance.adom_ordered()
    for rule in program.rules:
        names = rule.body_variables
        domain = rule.domain_variables
        for b in match_atoms(rule.body, instance):
            if domain:
                ok = all(
                    a.substitute({**b, **dict(zip(domain, extra))}) in instance
                    for extra in itertools.product(adom, repeat=len(domain))
                    for a in rule.head
                )
            else:
                ok = head_satisfied(instance, rule, b)
            if not ok:
                out.append(Trigger(rule.rule_id, tuple((v, b[v]) for v in names)))
                if limit is not None and len(out) >= limit:
                    return out
    return out


def check_is_model(program: Program, instance: Instance) -> bool:
    return not model_violations(program, instance, limit=1)


class PathVerdict(str, Enum):
    ALL_TERMINATE = "all-terminate"
    FOUND_DIVERGENT_PREFIX = "found-divergent-prefix"
    INCONCLUSIVE = "inconclusive"


@dataclass
class PathEnumeration:
    verdict: PathVerdict
    witness: tuple[Trigger, ...] | None
    states_explored: int
    terminal_states: int


def standard_applicable_triggers(program: Program, instance: Instance) -> list[tuple[TGD, dict]]:
    """Every trigger the standard chase may fire next, Datalog ones included."""
    out = []
    for rule in program.rules:
        names = rule.body_variables
        bindings = sorted(
            {tuple(b[v] for v in names) for b in match_atoms(rule.body, instance)},
            key=lambda vals: tuple(term_sort_key(t) for t in vals),
        )
        for vals in bindings:
            b = dict(zip(names, vals))
            if rule.existentials:
                if not head_satisfied(instance, rule, b):
                    out.append((rule, b))
            elif rule.domain_variables:
                adom = instance.adom_ordered()
                for extra in itertools.product(adom, repeat=len(rule.domain_variables)):
                    full = {**b, **dict(zip(rule.domain_variables, extra))}
                    if any(a.substitute(full) not in instance for a in rule.head):
                        out.append((rule, full))
            elif any(a.substitute(b) not in instance for a in rule.head):
                out.append((rule, b))
    return out


def enumerate_standard_paths(
    program: Program, instance: Instance, step_budget: int, path_budget: int
) -> PathEnumeration:
    """Explore standard-chase firing orders depth first.

    Every applicable trigger (Datalog or existential) is a branching choice;
    identical states reached along different orders are explored once.
    ``step_budget`` bounds existential firings per path and ``path_budget``
    bounds the number of distinct states explored.
    """
    heads = {r.rule_id: skolemize_rule(r, Variant.SEMI_OBLIVIOUS).head for r in program.rules}
    start = frozenset(instance)
    visited = {start}
    stack: list[tuple[frozenset, int, tuple]] = [(start, 0, ())]
    explored = 0
    terminal = 0
    truncated = False
    while stack:
        state, steps, path = stack.pop()
        explored += 1
        if explored > path_budget:
            truncated = True
            break
        inst = Instance(state)
        choices = standard_applicable_triggers(program, inst)
        if not choices:
            terminal += 1
            continue
        children = []
        for rule, b in choices:
            facts = [a.substitute(b) for a in heads[rule.rule_id]]
            nsteps = steps + (1 if rule.existentials else 0)
            names = rule.body_variables + rule.domain_variables
            trig = Trigger(rule.rule_id, tuple((v, b[v]) for v in names))
            if nsteps > step_budget:
                return PathEnumeration(PathVerdict.FOUND_DIVERGENT_PREFIX, path + (trig,), explored, terminal)
            nxt = state.union(facts)
            if nxt in visited:
                continue
            visited.add(nxt)
            children.append((nxt, nsteps, path + (trig,)))
        stack.extend(reversed(children))
    verdict = PathVerdict.INCONCLUSIVE if truncated else PathVerdict.ALL_TERMINATE
    return PathEnumeration(verdict, None, explored, terminal)


def standard_path_replay(program: Program, instance: Instance, path: Sequence[Trigger]) -> Instance:
    """Replay a standard firing sequence, checking each trigger is applicable when fired."""
    heads = {r.rule_id: skolemize_rule(r, Variant.SEMI_OBLIVIOUS).head for r in program.rules}
    inst = instance.copy()
    for trig in path:
        rule = program.rule(trig.rule_id)
        b = trig.as_dict()
        if not exists_match(rule.body, inst, b):
            raise ValueError(f"trigger {trig} does not match the current instance")
        if rule.existentials and head_satisfied(inst, rule, b):
            raise ValueError(f"trigger {trig} is not applicable: head already satisfied")
        for a in heads[rule.rule_id]:
            inst.add(a.substitute(b))
    return inst
