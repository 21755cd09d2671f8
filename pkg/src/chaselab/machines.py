"""Three-counter machines, their Conway-function encoding, and the program T_M.

A machine has states ``q1..qm`` (``q1`` initial). An instruction is keyed on
(state, counter-1 zero?, counter-2 zero?) and gives the next state and an
action per counter; counter 3 is incremented on every step. The machine halts
when no instruction matches.

Machine files (``.3cm``)::

    # comment
    states 2
    q1 zero zero -> q2 inc keep
    q2 nonzero zero -> q2 dec keep
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache

from sympy import prime

from chaselab.model import TGD, Atom, CheckReport, Instance, Program, Signature, Variable
from chaselab.critical import WELL

TESTS = ("zero", "nonzero")
ACTIONS = ("inc", "dec", "keep")
MAX_QR = 10**4
MAX_RESIDUES = 10**5


@dataclass(frozen=True)
class Instruction:
    state: int
    zero1: bool
    zero2: bool
    next_state: int
    action1: str
    action2: str

    def __str__(self) -> str:
        t1 = "zero" if self.zero1 else "nonzero"
        t2 = "zero" if self.zero2 else "nonzero"
        return f"q{self.state} {t1} {t2} -> q{self.next_state} {self.action1} {self.action2}"


@dataclass(frozen=True)
class Configuration:
    state: int
    c1: int = 0
    c2: int = 0
    c3: int = 0


@dataclass(frozen=True)
class CounterMachine:
    states: int
    instructions: tuple[Instruction, ...] = ()
    name: str = "machine"

    def __post_init__(self):
        if self.states < 1:
            raise ValueError("a machine needs at least one state")
        seen = set()
        for ins in self.instructions:
            key = (ins.state, ins.zero1, ins.zero2)
            if key in seen:
                raise ValueError(f"nondeterministic: two instructions for {key}")
            seen.add(key)
            for s in (ins.state, ins.next_state):
                if not 1 <= s <= self.states:
                    raise ValueError(f"state q{s} out of range")
            if ins.action1 not in ACTIONS or ins.action2 not in ACTIONS:
                raise ValueError(f"unknown action in {ins}")
            if (ins.zero1 and ins.action1 == "dec") or (ins.zero2 and ins.action2 == "dec"):
                raise ValueError(f"decrement under a zero test: {ins}")

    def lookup(self, state: int, zero1: bool, zero2: bool) -> Instruction | None:
        for ins in self.instructions:
            if (ins.state, ins.zero1, ins.zero2) == (state, zero1, zero2):
                return ins
        return None

    def step(self, c: Configuration) -> Configuration | None:
        ins = self.lookup(c.state, c.c1 == 0, c.c2 == 0)
        if ins is None:
            return None
        delta = {"inc": 1, "dec": -1, "keep": 0}
        return Configuration(ins.next_state, c.c1 + delta[ins.action1], c.c2 + delta[ins.action2], c.c3 + 1)

    def to_text(self) -> str:
        lines = [f"# {self.name}", f"states {self.states}"]
        lines += [str(ins) for ins in self.instructions]
        return "\n".join(lines) + "\n"


_LINE = re.compile(r"q(\d+)\s+(zero|nonzero)\s+(zero|nonzero)\s*->\s*q(\d+)\s+(inc|dec|keep)\s+(inc|dec|keep)\Z")


def parse_machine(text: str, name: str = "machine") -> CounterMachine:
    states = None
    instructions = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("states"):
            parts = line.split()
            if len(parts) != 2 or not parts[1].isdigit():
                raise ValueError(f"line {lineno}: expected 'states <n>'")
            states = int(parts[1])
            continue
        m = _LINE.match(line)
        if m is None:
            raise ValueError(f"line {lineno}: cannot parse instruction {line!r}")
        s, t1, t2, ns, a1, a2 = m.groups()
        instructions.append(Instruction(int(s), t1 == "zero", t2 == "zero", int(ns), a1, a2))
    if states is None:
        raise ValueError("missing 'states <n>' line")
    return CounterMachine(states, tuple(instructions), name)


def load_machine(path) -> CounterMachine:
    from pathlib import Path

    p = Path(path)
    return parse_machine(p.read_text(encoding="utf-8"), p.stem)


# The test zoo.

def immediate_halt() -> CounterMachine:
    return CounterMachine(1, (), "halt")


def up_down(k: int = 5) -> CounterMachine:
    """Raise counter 1 to ``k`` then lower it to zero; halts after ``2k`` steps.

    States ``q1..qk`` count the increments, ``q{k+1}`` decrements.
    """
    ins = []
    for s in range(1, k + 1):
        for z1 in (True, False):
            ins.append(Instruction(s, z1, True, s + 1, "inc", "keep"))
    ins.append(Instruction(k + 1, False, True, k + 1, "dec", "keep"))
    return CounterMachine(k + 1, tuple(ins), f"updown{k}")


def loop1() -> CounterMachine:
    return CounterMachine(1, (Instruction(1, True, True, 1, "keep", "keep"),), "loop1")


def one_step() -> CounterMachine:
    """Increment counter 1 once, then halt."""
    return CounterMachine(1, (Instruction(1, True, True, 1, "inc", "keep"),), "onestep")


def zoo() -> dict[str, CounterMachine]:
    return {"halt": immediate_halt(), "updown5": up_down(5), "loop1": loop1()}


@dataclass
class Halted:
    steps: int
    config: Configuration


@dataclass
class Running:
    config: Configuration


def simulate_3cm(machine: CounterMachine, max_steps: int) -> Halted | Running:
    c = Configuration(1)
    for steps in range(max_steps + 1):
        nxt = machine.step(c)
        if nxt is None:
            return Halted(steps, c)
        if steps == max_steps:
            break
        c = nxt
    return Running(c)


def trajectory(machine: CounterMachine, length: int) -> list[Configuration]:
    """Configurations 0..length-1; a halted machine repeats its final configuration."""
    out = [Configuration(1)]
    while len(out) < length:
        nxt = machine.step(out[-1])
        out.append(out[-1] if nxt is None else nxt)
    return out


def first_primes(n: int) -> tuple[int, ...]:
    return tuple(prime(k) for k in range(1, n + 1))


@dataclass
class ConwayFunction:
    """g(n) = n * q_i / r_i with i = n mod p; coefficients computed on demand."""

    machine: CounterMachine
    primes: tuple[int, ...] = field(init=False)
    modulus: int = field(init=False)

    def __post_init__(self):
        self.primes = first_primes(self.machine.states + 3)
        self.modulus = math.prod(self.primes)
        self.coefficients = lru_cache(maxsize=1 << 16)(self._coefficients)

    @property
    def m(self) -> int:
        return self.machine.states

    def counter_prime(self, k: int) -> int:
        return self.primes[self.m + k - 1]

    def decode_residue(self, i: int) -> tuple[int, bool, bool] | None:
        """(state, counter-1 zero?, counter-2 zero?) when ``i`` looks like an encoding."""
        states = [j for j in range(1, self.m + 1) if i % self.primes[j - 1] == 0]
        if len(states) != 1:
            return None
        return states[0], i % self.counter_prime(1) != 0, i % self.counter_prime(2) != 0

    def _coefficients(self, i: int) -> tuple[int, int]:
        decoded = self.decode_residue(i)
        if decoded is None:
            return 1, 1
        ins = self.machine.lookup(*decoded)
        if ins is None:
            return 1, 1
        q = self.primes[ins.next_state - 1] * self.counter_prime(3)
        r = self.primes[ins.state - 1]
        for k, action in ((1, ins.action1), (2, ins.action2)):
            if action == "inc":
                q *= self.counter_prime(k)
            elif action == "dec":
                r *= self.counter_prime(k)
        return q, r

    def table(self) -> tuple[list[int], list[int]]:
        if self.modulus > MAX_RESIDUES:
            raise ValueError(f"modulus {self.modulus} exceeds the residue budget {MAX_RESIDUES}")
        pairs = [self.coefficients(i) for i in range(self.modulus)]
        return [q for q, _ in pairs], [r for _, r in pairs]

    def apply(self, n: int) -> int:
        q, r = self.coefficients(n % self.modulus)
        num = n * q
        if num % r:
            raise ArithmeticError(f"g({n}) is not integral: r={r} does not divide {num}")
        return num // r


def build_conway(machine: CounterMachine) -> ConwayFunction:
    return ConwayFunction(machine)


def encode_config(cw: ConwayFunction, c: Configuration) -> int:
    if not 1 <= c.state <= cw.m:
        raise ValueError(f"state q{c.state} out of range")
    return (
        cw.primes[c.state - 1]
        * cw.counter_prime(1) ** c.c1
        * cw.counter_prime(2) ** c.c2
        * cw.counter_prime(3) ** c.c3
    )


def iterate_g(cw: ConwayFunction, start: int = 2, max_iters: int = 200) -> list[int]:
    """The values g^0(start), ..., g^(max_iters-1)(start)."""
    out = [start]
    while len(out) < max_iters:
        out.append(cw.apply(out[-1]))
    return out


def orbit(cw: ConwayFunction, max_iters: int = 10_000) -> tuple[list[int], bool]:
    """Distinct orbit values of 2 in order, and whether a fixpoint was reached."""
    values = [2]
    seen = {2}
    for _ in range(max_iters):
        nxt = cw.apply(values[-1])
        if nxt in seen:
            return values, True
        values.append(nxt)
        seen.add(nxt)
    return values, False


def qr_values(cw: ConwayFunction) -> list[int]:
    qs, rs = cw.table()
    return sorted(set(qs) | set(rs))


def tm_signature(qr: list[int], p: int) -> Signature:
    rels = [("E", 2)] + [(f"E{j}", 2) for j in qr] + [("H", 1)]
    rels += [(f"T{i}", 3) for i in range(p)] + [(f"R{i}", 2) for i in range(p)]
    rels += [("G", 2), ("N", 1)]
    return Signature(tuple(rels))


def _path_body(j: int) -> tuple[Atom, ...]:
    names = ["Y"] + [f"Y{k}" for k in range(1, j + 1)]
    return tuple(Atom("E", (Variable(names[k]), Variable(names[k + 1]))) for k in range(j))


def generate_tm(machine: CounterMachine, printed_d7: bool = False) -> Program:
    """The ternary program simulating ``machine``'s Conway function on an E-path.

    ``printed_d7`` emits the G-propagation rule with T's arguments in the
    other order, which computes n*r/q instead of g(n); it exists only to
    demonstrate that difference.
    """
    cw = build_conway(machine)
    qs, rs = cw.table()
    qr = sorted(set(qs) | set(rs))
    if qr[-1] > MAX_QR:
        raise ValueError(f"coefficient {qr[-1]} exceeds {MAX_QR}; E^j bodies would be too long")
    p = cw.modulus
    X, Y, Z, Y1, Z1 = (Variable(n) for n in ("X", "Y", "Z", "Y1", "Z1"))
    rules = [TGD("e", (Atom("G", (X, Y)), Atom("H", (Y,))), (Atom("E", (Z, X)),), (Z,))]
    for j in qr:
        rules.append(TGD(f"d0_{j}", _path_body(j), (Atom(f"E{j}", (Y, Variable(f"Y{j}"))),), ()))
    rules.append(TGD("d1", (Atom("E", (Z, X)),), (Atom("N", (Z,)),), ()))
    for i in range(p):
        rules.append(TGD(f"d2_{i}", (Atom("N", (X,)),), (Atom(f"T{i}", (X, X, X)),), ()))
    for i in range(p):
        body = (Atom(f"T{i}", (X, Y, Z)), Atom(f"E{qs[i]}", (Y, Y1)), Atom(f"E{rs[i]}", (Z, Z1)))
        rules.append(TGD(f"d3_{i}", body, (Atom(f"T{i}", (X, Y1, Z1)),), ()))
    rules.append(TGD("d4", (Atom("N", (X,)),), (Atom("R0", (X, X)),), ()))
    for i in range(p):
        j = (i + 1) % p
        rules.append(TGD(f"d5_{i}", (Atom(f"R{i}", (X, Y)), Atom("E", (Y, Y1))), (Atom(f"R{j}", (X, Y1)),), ()))
    rules.append(TGD("d6", (Atom("E", (X, Y)), Atom("E", (Y, Z))), (Atom("G", (X, Z)),), ()))
    for i in range(p):
        t = Atom(f"T{i}", (X, Y, Z)) if printed_d7 else Atom(f"T{i}", (X, Z, Y))
        rules.append(TGD(f"d7_{i}", (Atom(f"R{i}", (X, Y)), Atom("G", (X, Y)), t), (Atom("G", (X, Z)),), ()))
    return Program(tm_signature(qr, p), tuple(rules))


def tm_rule_count(machine: CounterMachine) -> int:
    cw = build_conway(machine)
    return 4 + len(qr_values(cw)) + 4 * cw.modulus


def e_path(instance: Instance) -> list:
    """Elements along the E-path ending in the well, oldest first.

    Raises ValueError when the E-edges other than the well's loop do not
    form a single path into ``w``.
    """
    parent = {}
    for f in instance.relation("E"):
        z, x = f.args
        if z is WELL and x is WELL:
            continue
        if z in parent:
            raise ValueError(f"{z} has two outgoing E-edges")
        parent[z] = x
    child = {}
    for z, x in parent.items():
        if x in child:
            raise ValueError(f"{x} has two incoming E-edges")
        child[x] = z
    path = [WELL]
    while path[-1] in child:
        nxt = child[path[-1]]
        if nxt in path:
            raise ValueError("E-cycle")
        path.append(nxt)
    if len(path) - 1 != len(parent):
        raise ValueError("E-edges not connected to the well")
    return path


def verify_appendix_a(
    instance: Instance, machine: CounterMachine, complete: bool = True, saturated: bool = True, orbit_iters: int = 300
) -> CheckReport:
    """Structural checks on a (possibly truncated) critical chase of T_M.

    ``complete`` means the run terminated; ``saturated`` means Datalog rules
    were saturated when it stopped.
    """
    rep = CheckReport("appendixA")
    cw = build_conway(machine)
    p = cw.modulus
    qs_rs = cw.coefficients

    # path shape
    out_deg: dict = {}
    in_deg: dict = {}
    for f in instance.relation("E"):
        z, x = f.args
        if z is WELL and x is WELL:
            continue
        rep.record("no-self-loops", z is not x, f"E({z},{x})")
        out_deg[z] = out_deg.get(z, 0) + 1
        in_deg[x] = in_deg.get(x, 0) + 1
    rep.record("well-out-degree-0", out_deg.get(WELL, 0) == 0, f"w has {out_deg.get(WELL, 0)} outgoing edges")
    for t in instance.adom:
        if t is not WELL:
            rep.record("out-degree-1", out_deg.get(t, 0) == 1, f"{t} has out-degree {out_deg.get(t, 0)}")
        rep.record("in-degree-at-most-1", in_deg.get(t, 0) <= 1, f"{t} has in-degree {in_deg.get(t, 0)}")
    try:
        path = e_path(instance)
    except ValueError as exc:
        rep.record("connected-acyclic-path", False, str(exc))
        return rep
    rep.record("connected-acyclic-path", len(path) == len(instance.adom), "elements off the E-path")
    depth_of = {t: k for k, t in enumerate(path)}

    def frame_index(x, b):
        """Position of b below x (None for the well, whose index is any j >= k)."""
        if b is WELL:
            return None
        return depth_of[x] - depth_of[b]

    for rel_i in range(p):
        q, r = qs_rs(rel_i)
        for f in instance.relation(f"T{rel_i}"):
            x, b, c = f.args
            k = depth_of[x]
            j, j2 = frame_index(x, b), frame_index(x, c)
            if j is not None and j < 0 or j2 is not None and j2 < 0:
                rep.record("T-arithmetic", False, f"{f}: argument above its owner")
                continue
            if j is not None and j2 is not None:
                ok = j * r == j2 * q
            elif j is None and j2 is not None:
                ok = (j2 * q) % r == 0 and j2 * q // r >= k
            elif j is not None and j2 is None:
                ok = (j * r) % q == 0 and j * r // q >= k
            else:
                ok = True
            rep.record("T-arithmetic", ok, str(f))
        for f in instance.relation(f"R{rel_i}"):
            x, b = f.args
            j = frame_index(x, b)
            rep.record("R-residue", j is None or (j >= 0 and j % p == rel_i), str(f))

    values, bounded = orbit(cw, orbit_iters)
    if saturated:
        for x in path:
            k = depth_of[x]
            for g in values:
                target = WELL if g >= k else path[k - g]
                rep.record("G-contains-orbit", Atom("G", (x, target)) in instance, f"G({x},a_{g}) missing")
    if bounded and complete:
        top = max(values)
        for x in path:
            k = depth_of[x]
            if k <= top:
                continue
            got = set()
            for f in instance.lookup("G", 0, x):
                j = frame_index(x, f.args[1])
                got.add("w" if j is None else j)
            rep.record("G-equals-orbit", got == set(values), f"G_{x} = {sorted(map(str, got))}")
        rep.record("path-reaches-orbit", len(path) - 1 >= top, f"path length {len(path) - 1} < {top}")
    return rep
