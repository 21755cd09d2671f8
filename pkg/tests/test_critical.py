import dataclasses
import random

import pytest

from chaselab.chase import ChaseConfig, Variant, run_chase
from chaselab.critical import (
    WELL,
    ProbeVerdict,
    all_instances_termination_probe,
    build_critical,
    find_divergence_certificate,
    lemma1_sample,
    lift_derivation,
    random_instance,
    verify_certificate,
)
from chaselab.model import Atom, Signature, SkolemApp, SkolemFunction
from chaselab.parser import load_program, parse_program

PROBE_EXPECTED = {
    ("chain", Variant.OBLIVIOUS): ProbeVerdict.TERMINATES_ALL_INSTANCES,
    ("guarded", Variant.OBLIVIOUS): ProbeVerdict.TERMINATES_ALL_INSTANCES,
    ("tm_fragment", Variant.OBLIVIOUS): ProbeVerdict.TERMINATES_ALL_INSTANCES,
    ("arena0_m2", Variant.OBLIVIOUS): ProbeVerdict.TERMINATES_ALL_INSTANCES,
    ("successor", Variant.OBLIVIOUS): ProbeVerdict.DIVERGENCE_WITNESS,
    ("flooding", Variant.OBLIVIOUS): ProbeVerdict.DIVERGENCE_WITNESS,
    ("appendix_d_T", Variant.OBLIVIOUS): ProbeVerdict.DIVERGENCE_WITNESS,
    ("appendix_d_Tprime", Variant.SEMI_OBLIVIOUS): ProbeVerdict.DIVERGENCE_WITNESS,
    ("ternary_split", Variant.OBLIVIOUS): ProbeVerdict.DIVERGENCE_WITNESS,
    ("ternary_split", Variant.SEMI_OBLIVIOUS): ProbeVerdict.TERMINATES_ALL_INSTANCES,
}


def test_critical_instance_shape():
    inst = build_critical(Signature.of(E=2, H=1, T=3))
    assert set(inst) == {Atom("E", (WELL, WELL)), Atom("H", (WELL,)), Atom("T", (WELL,) * 3)}
    with pytest.raises(ValueError):
        build_critical(Signature(()))


@pytest.mark.parametrize("name, variant", sorted(PROBE_EXPECTED, key=lambda k: (k[0], k[1].value)))
def test_probe_verdicts(corpus, name, variant):
    prog = load_program(corpus / f"{name}.dlge")
    cfg = ChaseConfig(variant=variant, max_steps=400, max_depth=10**4, max_facts=50_000)
    probe = all_instances_termination_probe(prog, cfg)
    assert probe.verdict is PROBE_EXPECTED[(name, variant)]
    if probe.certificate is not None:
        assert verify_certificate(prog, probe.certificate)
        assert probe.certificate.describe()


def test_probe_rejects_standard(corpus):
    prog = load_program(corpus / "chain.dlge")
    with pytest.raises(ValueError):
        all_instances_termination_probe(prog, ChaseConfig(variant=Variant.STANDARD))


def test_tampered_certificate_is_rejected():
    prog = parse_program("[s] N(X) -> exists Y: S(X,Y), N(Y).")
    res = run_chase(prog, build_critical(prog.signature), ChaseConfig(max_steps=20))
    cert = find_divergence_certificate(prog, res)
    assert cert is not None and verify_certificate(prog, cert)
    broken = dataclasses.replace(cert, substitution={cert.pumped: cert.pumped})
    assert not verify_certificate(prog, broken)
    foreign = SkolemApp(SkolemFunction("zz", 0), (cert.pumped,))
    wrong = dataclasses.replace(cert, substitution={cert.pumped: foreign})
    assert not verify_certificate(prog, wrong)


def test_no_certificate_for_a_terminating_run():
    prog = parse_program("[p] Person(X) -> exists Y: Parent(X,Y).")
    res = run_chase(prog, build_critical(prog.signature), ChaseConfig())
    assert res.terminated
    assert find_divergence_certificate(prog, res) is None


def test_lift_derivation_replays_onto_the_critical_instance(corpus):
    prog = load_program(corpus / "arena0_m2.dlge")
    rng = random.Random(5)
    inst = random_instance(prog.signature, rng)
    res = run_chase(prog, inst, ChaseConfig())
    lifted = lift_derivation(res.trace, inst, prog.signature, prog)
    assert lifted.valid
    assert lifted.max_term_depth == res.max_term_depth
    crit = run_chase(prog, build_critical(prog.signature), ChaseConfig())
    assert set(lifted.instance) <= set(crit.instance)


def test_lemma1_sample_reports_non_terminating_critical_run(corpus):
    prog = load_program(corpus / "successor.dlge")
    rep = lemma1_sample(prog, samples=3, critical_budget=50)
    assert not rep.ok and rep.samples == 0


def test_lemma1_sample_passes_on_guarded(corpus):
    rep = lemma1_sample(load_program(corpus / "guarded.dlge"), samples=20, seed=4)
    assert rep.ok, rep.failures


def test_random_instance_is_seeded():
    sig = Signature.of(E=2, H=1)
    a = random_instance(sig, random.Random(9))
    b = random_instance(sig, random.Random(9))
    assert a == b and len(a) >= 1


def test_self_sustaining_rule_gets_a_certificate():
    prog = parse_program("[h] H(X) -> exists Y: H(Y).")
    probe = all_instances_termination_probe(prog, ChaseConfig(max_steps=10))
    assert probe.verdict is ProbeVerdict.DIVERGENCE_WITNESS
    assert verify_certificate(prog, probe.certificate)
