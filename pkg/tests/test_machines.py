import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaselab.chase import ChaseConfig, run_chase
from chaselab.critical import WELL, build_critical
from chaselab.machines import (
    ACTIONS,
    Configuration,
    CounterMachine,
    Halted,
    Instruction,
    Running,
    build_conway,
    e_path,
    encode_config,
    generate_tm,
    immediate_halt,
    iterate_g,
    load_machine,
    loop1,
    one_step,
    orbit,
    parse_machine,
    simulate_3cm,
    tm_rule_count,
    trajectory,
    up_down,
    verify_appendix_a,
    zoo,
)
from chaselab.model import Atom, Constant, Instance


def test_parse_and_print_round_trip(corpus):
    for path in sorted(corpus.glob("*.3cm")):
        m = load_machine(path)
        again = parse_machine(m.to_text(), m.name)
        assert again == m


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("q1 zero zero -> q1 inc inc", "states"),
        ("states 1\nq1 zero zero -> q2 inc inc", "out of range"),
        ("states 1\nq1 zero zero -> q1 dec keep", "decrement under a zero test"),
        ("states 1\nq1 zero zero -> q1 inc keep\nq1 zero zero -> q1 keep keep", "nondeterministic"),
        ("states 1\nq1 maybe zero -> q1 inc keep", "cannot parse"),
    ],
)
def test_machine_validation(text, fragment):
    with pytest.raises(ValueError, match=fragment):
        parse_machine(text)


def test_simulation():
    assert simulate_3cm(immediate_halt(), 10) == Halted(0, Configuration(1))
    res = simulate_3cm(up_down(3), 100)
    assert isinstance(res, Halted) and res.steps == 6
    assert res.config == Configuration(4, 0, 0, 6)
    assert isinstance(simulate_3cm(loop1(), 50), Running)
    assert simulate_3cm(one_step(), 10) == Halted(1, Configuration(1, 1, 0, 1))


def test_trajectory_repeats_final_configuration():
    traj = trajectory(one_step(), 4)
    assert traj[1] == traj[2] == traj[3] == Configuration(1, 1, 0, 1)


def test_conway_parameters():
    cw = build_conway(up_down(1))
    assert cw.primes == (2, 3, 5, 7, 11)
    assert cw.modulus == 2310
    assert cw.decode_residue(2 * 5) == (1, False, True)
    assert cw.decode_residue(6) is None
    with pytest.raises(ValueError):
        build_conway(up_down(5)).table()


def test_halting_orbit_is_finite():
    values, bounded = orbit(build_conway(up_down(1)))
    assert bounded and values == [2, 165, 363]
    values, bounded = orbit(build_conway(loop1()), max_iters=50)
    assert not bounded


@st.composite
def machines(draw):
    n = draw(st.integers(1, 3))
    instructions = []
    for s in range(1, n + 1):
        for z1 in (True, False):
            for z2 in (True, False):
                if draw(st.booleans()):
                    continue
                a1 = draw(st.sampled_from([a for a in ACTIONS if not (z1 and a == "dec")]))
                a2 = draw(st.sampled_from([a for a in ACTIONS if not (z2 and a == "dec")]))
                instructions.append(Instruction(s, z1, z2, draw(st.integers(1, n)), a1, a2))
    return CounterMachine(n, tuple(instructions))


@settings(max_examples=80, deadline=None)
@given(machines())
def test_conway_function_simulates_random_machines(machine):
    cw = build_conway(machine)
    traj = trajectory(machine, 40)
    assert iterate_g(cw, max_iters=40) == [encode_config(cw, c) for c in traj]


def test_zoo():
    z = zoo()
    assert set(z) == {"halt", "updown5", "loop1"}
    assert isinstance(simulate_3cm(z["updown5"], 100), Halted)


@pytest.mark.parametrize("machine", [immediate_halt(), one_step(), up_down(1), loop1()], ids=lambda m: m.name)
def test_tm_rule_count(machine):
    prog = generate_tm(machine)
    assert len(prog.rules) == tm_rule_count(machine)
    assert all(a.arity <= 3 for r in prog.rules for a in r.body + r.head)
    assert sum(1 for r in prog.rules if r.existentials) == 1


def test_printed_d7_orientation_swaps_t_arguments():
    fixed = generate_tm(one_step()).rule("d7_0")
    printed = generate_tm(one_step(), printed_d7=True).rule("d7_0")
    assert fixed.body[2].args == (printed.body[2].args[0], printed.body[2].args[2], printed.body[2].args[1])


def test_e_path_rejects_branching():
    x, y = Constant("x"), Constant("y")
    with pytest.raises(ValueError):
        e_path(Instance([Atom("E", (x, WELL)), Atom("E", (y, WELL))]))
    assert e_path(Instance([Atom("E", (x, WELL)), Atom("E", (y, x))])) == [WELL, x, y]


def test_structure_checks_catch_a_broken_structure():
    machine = immediate_halt()
    prog = generate_tm(machine)
    res = run_chase(prog, build_critical(prog.signature), ChaseConfig(record_trace=False))
    assert res.terminated
    assert verify_appendix_a(res.instance, machine).ok
    broken = res.instance.copy()
    path = e_path(broken)
    broken.add(Atom("E", (path[1], path[1])))
    rep = verify_appendix_a(broken, machine)
    assert not rep.ok and rep.violations
