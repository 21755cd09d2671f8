"""Critical instance, the all-instances termination probe, and derivation lifting.

A divergence certificate here is a self-embedding: take a finite set of chase
facts ``I``, replace each of its terms by a fresh constant (giving ``I0``),
chase ``I0`` for a bounded number of steps into ``J0``, and find a constant
substitution ``s`` with ``s(I0)`` contained in ``J0`` that maps some frozen
constant ``c`` to a compound term containing ``c``. Skolemized rules commute
with constant substitution, so ``s^n(I0)`` lies in the chase of ``I0`` for all
``n``; unfreezing maps that chase into the chase of the original input, whose
terms therefore have unbounded depth. The check is sufficient, not necessary.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from chaselab.chase import (
    ChaseConfig,
    ChaseResult,
    TraceStep,
    Variant,
    run_chase,
    skolemize_rule,
)
from chaselab.match import exists_match, find_instance_homomorphism
from chaselab.model import (
    Atom,
    Constant,
    Instance,
    Program,
    Signature,
    SkolemApp,
    Term,
    contains_properly,
    map_term,
)

WELL = Constant("w")
_FROZEN_PREFIX = "_k"


def build_critical(signature: Signature) -> Instance:
    """One constant ``w`` and the all-``w`` fact for every relation."""
    if not signature.relations:
        raise ValueError("the critical instance needs a nonempty signature")
    return Instance(Atom(name, (WELL,) * arity) for name, arity in signature.relations)


def rule_constants(program: Program) -> set[Constant]:
    out = set()
    for rule in program.rules:
        for a in rule.body + rule.head:
            out.update(t for t in a.args if isinstance(t, Constant))
    return out


@dataclass
class DivergenceCertificate:
    variant: Variant
    seed: tuple[Atom, ...]
    frozen: tuple[Atom, ...]
    substitution: dict[Constant, Term]
    pumped: Constant
    chase_steps: int
    source_steps: tuple[int, int]

    def describe(self) -> str:
        image = self.substitution[self.pumped]
        return (
            f"{len(self.frozen)} seed facts embed into their own {self.chase_steps}-step chase; "
            f"{self.pumped} -> {image} (trace steps {self.source_steps[0]} and {self.source_steps[1]})"
        )


def _freeze(facts, keep: set) -> tuple[list[Atom], dict[Term, Constant]]:
    names: dict[Term, Constant] = {}
    out = []
    for f in facts:
        args = []
        for t in f.args:
            if t in keep:
                args.append(t)
                continue
            c = names.get(t)
            if c is None:
                c = Constant(f"{_FROZEN_PREFIX}{len(names)}")
                names[t] = c
            args.append(c)
        out.append(Atom(f.relation, tuple(args)))
    return out, names


def _bounded_chase(program: Program, facts, variant: Variant, steps: int, max_facts: int) -> Instance:
    cfg = ChaseConfig(variant=variant, max_steps=steps, max_facts=max_facts, record_trace=False)
    return run_chase(program, Instance(facts), cfg).instance


def verify_certificate(program: Program, cert: DivergenceCertificate, max_facts: int = 200_000) -> bool:
    """Recompute the bounded chase of the frozen seed and re-check the embedding."""
    image = cert.substitution.get(cert.pumped)
    if image is None or not contains_properly(image, cert.pumped):
        return False
    if any(not isinstance(c, Constant) for c in cert.substitution):
        return False
    target = _bounded_chase(program, cert.frozen, cert.variant, cert.chase_steps, max_facts)
    for f in cert.frozen:
        mapped = Atom(f.relation, tuple(map_term(t, cert.substitution) for t in f.args))
        if mapped not in target:
            return False
    return True


def _body_facts(program: Program, step: TraceStep) -> list[Atom]:
    rule = program.rule(step.trigger.rule_id)
    binding = step.trigger.as_dict()
    return [a.substitute(binding) for a in rule.body]


def _seed_sets(program: Program, result: ChaseResult, step: TraceStep, limit: int):
    body = _body_facts(program, step)
    yield body
    terms = {t for f in body for t in f.args}
    around = [f for f in result.instance if all(t in terms for t in f.args)]
    if len(around) > len(body) and len(around) <= limit:
        yield around


def _candidate_pairs(result: ChaseResult, max_pairs: int):
    steps = [s for s in result.trace if s.existential]
    by_rule: dict[str, list[TraceStep]] = {}
    for s in steps:
        by_rule.setdefault(s.trigger.rule_id, []).append(s)
    pairs = []
    for group in by_rule.values():
        for k, early in enumerate(group):
            for late in group[k + 1 :]:
                b_early, b_late = early.trigger.as_dict(), late.trigger.as_dict()
                if any(contains_properly(b_late[v], t) for v, t in b_early.items()):
                    pairs.append((early, late))
                    break
    pairs.sort(key=lambda p: (-p[0].step, p[1].step))
    return pairs[:max_pairs]


def find_divergence_certificate(
    program: Program,
    result: ChaseResult,
    max_pairs: int = 12,
    chase_steps: int = 60,
    node_budget: int = 20_000,
    max_candidates: int = 40,
    seed_limit: int = 80,
) -> DivergenceCertificate | None:
    """Search the trace of a truncated oblivious or semi-oblivious run for a certificate."""
    variant = result.config.variant
    if variant is Variant.STANDARD:
        raise ValueError("divergence certificates are defined for the oblivious chases only")
    keep = rule_constants(program)
    for early, late in _candidate_pairs(result, max_pairs):
        for seed in _seed_sets(program, result, early, seed_limit):
            frozen, names = _freeze(seed, keep)
            target = _bounded_chase(program, frozen, variant, chase_steps, 50_000)
            frozen_consts = set(names.values())
            adom = target.adom_ordered()
            for c in sorted(frozen_consts, key=lambda c: c.name):
                images = [u for u in adom if isinstance(u, SkolemApp) and contains_properly(u, c)]
                images.sort(key=lambda u: u.depth)
                for u in images[:max_candidates]:
                    h = find_instance_homomorphism(
                        frozen, target, lambda t: t in frozen_consts, fixed={c: u}, node_budget=node_budget
                    )
                    if h is None:
                        continue
                    cert = DivergenceCertificate(
                        variant=variant,
                        seed=tuple(seed),
                        frozen=tuple(frozen),
                        substitution={k: v for k, v in h.items() if k in frozen_consts},
                        pumped=c,
                        chase_steps=chase_steps,
                        source_steps=(early.step, late.step),
                    )
                    return cert
    return None


class ProbeVerdict(str, Enum):
    TERMINATES_ALL_INSTANCES = "terminates-all-instances"
    DIVERGENCE_WITNESS = "divergence-witness"
    INCONCLUSIVE = "inconclusive"


@dataclass
class ProbeResult:
    verdict: ProbeVerdict
    result: ChaseResult
    certificate: DivergenceCertificate | None = None


def default_probe_config(variant: Variant = Variant.OBLIVIOUS) -> ChaseConfig:
    return ChaseConfig(variant=variant, max_steps=10**6, max_depth=10**4)


def all_instances_termination_probe(
    program: Program, config: ChaseConfig | None = None, certificate_search: bool = True
) -> ProbeResult:
    """Chase the critical instance; a terminating run settles every instance."""
    config = config or default_probe_config()
    if config.variant is Variant.STANDARD:
        raise ValueError("the critical-instance reduction does not hold for the standard chase")
    result = run_chase(program, build_critical(program.signature), config)
    if result.terminated:
        return ProbeResult(ProbeVerdict.TERMINATES_ALL_INSTANCES, result)
    if certificate_search and config.record_trace:
        cert = find_divergence_certificate(program, result)
        if cert is not None:
            return ProbeResult(ProbeVerdict.DIVERGENCE_WITNESS, result, cert)
    return ProbeResult(ProbeVerdict.INCONCLUSIVE, result)


@dataclass
class LiftedDerivation:
    steps: list[TraceStep]
    instance: Instance
    max_term_depth: int
    violations: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations


def lift_term(term: Term, constants: set) -> Term:
    return map_term(term, {c: WELL for c in constants})


def lift_derivation(
    trace: list[TraceStep],
    instance: Instance,
    signature: Signature,
    program: Program,
    variant: Variant = Variant.OBLIVIOUS,
) -> LiftedDerivation:
    """Send every constant of ``instance`` to ``w`` and replay the trace on the critical instance.

    Each lifted step is re-validated: its body must hold in the lifted state and
    its recorded facts must be the lifted rule head. Violations are collected,
    not raised, so callers can report them.
    """
    constants = {t for t in instance.adom if isinstance(t, Constant)}
    null_variant = Variant.SEMI_OBLIVIOUS if Variant(variant) is Variant.STANDARD else Variant(variant)
    heads = {r.rule_id: skolemize_rule(r, null_variant).head for r in program.rules}
    state = build_critical(signature) if signature.relations else Instance()
    for f in instance:
        lifted_fact = Atom(f.relation, tuple(lift_term(t, constants) for t in f.args))
        if lifted_fact not in state:
            return LiftedDerivation([], state, state.max_depth(), [f"fact {lifted_fact} outside the critical instance"])
    lifted_steps = []
    violations = []
    for step in trace:
        rule = program.rule(step.trigger.rule_id)
        binding = {v: lift_term(t, constants) for v, t in step.trigger.binding}
        if not exists_match(rule.body, state, binding):
            violations.append(f"step {step.index}: body of {rule.rule_id} fails after lifting")
            continue
        produced = tuple(a.substitute(binding) for a in heads[rule.rule_id])
        recorded = {Atom(f.relation, tuple(lift_term(t, constants) for t in f.args)) for f in step.added}
        if not recorded <= set(produced):
            violations.append(f"step {step.index}: lifted facts differ from the rule head")
        added = tuple(f for f in produced if state.add(f))
        lifted_steps.append(
            TraceStep(step.index, step.step, type(step.trigger)(rule.rule_id, tuple(binding.items())), added, step.existential)
        )
    return LiftedDerivation(lifted_steps, state, state.max_depth(), violations)


def random_instance(
    signature: Signature, rng: random.Random, max_constants: int = 4, max_facts: int = 12
) -> Instance:
    """A small random instance over constants ``c0..c{k-1}``."""
    k = rng.randint(1, max_constants)
    consts = [Constant(f"c{i}") for i in range(k)]
    n = rng.randint(1, max_facts)
    facts = []
    for _ in range(n):
        name, arity = rng.choice(signature.relations)
        facts.append(Atom(name, tuple(rng.choice(consts) for _ in range(arity))))
    return Instance(facts)


@dataclass
class SampleReport:
    program_name: str
    critical_steps: int
    critical_depth: int
    samples: int
    failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures


def lemma1_sample(
    program: Program,
    samples: int = 50,
    seed: int = 0,
    variant: Variant = Variant.OBLIVIOUS,
    name: str = "program",
    critical_budget: int = 10**5,
) -> SampleReport:
    """Check the critical-instance reduction on random small instances.

    Requires the critical run to terminate. Each sample must terminate within
    ``10 * steps * facts`` firings, reach no deeper term than the critical run,
    and lift back onto the critical instance with equal depth.
    """
    crit = run_chase(program, build_critical(program.signature), ChaseConfig(variant=variant, max_steps=critical_budget))
    if not crit.terminated:
        return SampleReport(name, crit.steps_used, crit.max_term_depth, 0, ["critical run did not terminate"])
    rng = random.Random(seed)
    failures = []
    for k in range(samples):
        d = random_instance(program.signature, rng)
        budget = max(10 * crit.steps_used, 1) * max(len(d), 1)
        res = run_chase(program, d, ChaseConfig(variant=variant, max_steps=budget))
        if not res.terminated:
            failures.append(f"sample {k}: no termination within {budget} steps")
            continue
        if res.max_term_depth > crit.max_term_depth:
            failures.append(f"sample {k}: depth {res.max_term_depth} exceeds critical depth {crit.max_term_depth}")
        lifted = lift_derivation(res.trace, d, program.signature, program, variant)
        if not lifted.valid:
            failures.append(f"sample {k}: " + "; ".join(lifted.violations[:3]))
        elif lifted.max_term_depth != res.max_term_depth:
            failures.append(f"sample {k}: lifted depth {lifted.max_term_depth} differs from {res.max_term_depth}")
    return SampleReport(name, crit.steps_used, crit.max_term_depth, samples, failures)
