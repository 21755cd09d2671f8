import random
from pathlib import Path

import pytest

from chaselab.model import TGD, Atom, Program, Signature, Variable

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

# criterion number -> (passed, detail); filled by test_acceptance.py
CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def corpus() -> Path:
    return CORPUS


def record_criterion(key: str, passed: bool, detail: str) -> None:
    CRITERIA[key] = (passed, detail)
    print(f"criterion {key}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA, key=lambda k: (int(k.rstrip("ab")), k)):
        passed, detail = CRITERIA[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")


def random_program(rng: random.Random, max_rules: int = 4, max_relations: int = 3) -> Program:
    """Small random TGD program: relations of arity 1-2, bodies of 1-2 atoms."""
    nrel = rng.randint(1, max_relations)
    rels = [(f"P{i}", rng.randint(1, 2)) for i in range(nrel)]
    rules = []
    for k in range(rng.randint(1, max_rules)):
        pool = [Variable(n) for n in "XYZ"]
        body = []
        for _ in range(rng.randint(1, 2)):
            name, ar = rng.choice(rels)
            body.append(Atom(name, tuple(rng.choice(pool) for _ in range(ar))))
        body_vars = list(dict.fromkeys(v for a in body for v in a.args))
        exist = [Variable("W")] if rng.random() < 0.6 else []
        choices = body_vars + exist
        head = []
        for _ in range(rng.randint(1, 2)):
            name, ar = rng.choice(rels)
            head.append(Atom(name, tuple(rng.choice(choices) for _ in range(ar))))
        used = {v for a in head for v in a.args}
        exist = [v for v in exist if v in used]
        rules.append(TGD(f"r{k}", tuple(body), tuple(head), tuple(exist)))
    return Program(Signature(tuple(rels)), tuple(rules))
