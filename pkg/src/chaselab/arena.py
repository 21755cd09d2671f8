"""Binary arena programs, the Thue encoding, and a rewriting oracle.

``T0(m)`` builds an R-path of ``2^m + 2`` nodes from any element satisfying
H; ``T1(m, p)`` clones every R-occurrence into ``R1..Rp`` and builds a full
p-ary tree instead; ``T2(m, p)`` adds an E-successor (a new arena root) for
every element proving ``C``. The Thue program runs on the tree's nodes read
as words: the node reached by child edges ``R_i1 .. R_ik`` is ``i1..ik``.
"""
from __future__ import annotations

import itertools
import os
import re
from collections import deque
from dataclasses import dataclass, field

from chaselab.chase import ChaseConfig, ChaseResult, run_chase
from chaselab.model import TGD, Atom, CheckReport, Constant, Instance, Program, Signature, Variable, infer_signature

DEFAULT_MAX_NODES = 10**5
SEED = Constant("a")


def max_nodes() -> int:
    raw = os.environ.get("CHASE_LAB_MAX_NODES")
    return int(raw) if raw else DEFAULT_MAX_NODES


def tree_size(m: int, p: int) -> int:
    """Nodes of a full p-ary tree of depth ``2^m + 1``."""
    depth = 2**m + 1
    if p == 1:
        return depth + 1
    return (p ** (depth + 1) - 1) // (p - 1)


def _check_params(m: int, p: int = 1) -> None:
    if m < 1 or p < 1:
        raise ValueError("arena parameters need m >= 1 and p >= 1")
    size = tree_size(m, p)
    if size > max_nodes():
        raise ValueError(f"arena with m={m}, p={p} has {size} nodes, above the node budget {max_nodes()}")


def _v(*names):
    return [Variable(n) for n in names]


def _rule(rid, body, head, existentials=()):
    return TGD(rid, tuple(body), tuple(head), tuple(existentials))


def _a(rel, *args):
    return Atom(rel, tuple(args))


def _arena0_rules(m: int) -> list[TGD]:
    X, Y, Z, X1, Y1 = _v("X", "Y", "Z", "X1", "Y1")
    rules = [_rule("d0", [_a("H", X)], [_a("K", X)])]
    rules += [_rule(f"d0p_{i}", [_a("H", X)], [_a(f"C{i}", X)]) for i in range(m + 1)]
    rules.append(_rule("e", [_a("K", X)], [_a("R", X, Y)], [Y]))
    rules.append(_rule("d1", [_a("R", X, Y)], [_a("T", Y, Y)]))
    rules.append(
        _rule("d2", [_a("T", X, Y), _a("R", X1, Z), _a("R", Z, X), _a("R", Y1, Y)], [_a("T", X1, Y1)])
    )
    rules += [_rule(f"d3_{i}", [_a("T", X, Y), _a(f"C{i}", X)], [_a(f"C{i + 1}", Y)]) for i in range(m)]
    rules.append(_rule("d4", [_a("R", X, Y), _a(f"C{m}", X)], [_a("K", Y)]))
    return rules


def _arena0_signature(m: int, children: list[str]) -> list[tuple[str, int]]:
    rels = [("H", 1), ("K", 1)] + [(f"C{i}", 1) for i in range(m + 1)]
    rels += [(r, 2) for r in children] + [("T", 2)]
    return rels


def generate_arena0(m: int) -> Program:
    _check_params(m)
    return Program(Signature(tuple(_arena0_signature(m, ["R"]))), tuple(_arena0_rules(m)))


def _clone(rule: TGD, p: int) -> list[TGD]:
    atoms = list(rule.body) + list(rule.head)
    slots = [k for k, a in enumerate(atoms) if a.relation == "R"]
    out = []
    for choice in itertools.product(range(1, p + 1), repeat=len(slots)):
        renamed = list(atoms)
        for k, c in zip(slots, choice):
            renamed[k] = Atom(f"R{c}", atoms[k].args)
        suffix = "".join(f"_{c}" for c in choice)
        nb = len(rule.body)
        out.append(TGD(rule.rule_id + suffix, tuple(renamed[:nb]), tuple(renamed[nb:]), rule.existentials))
    return out


def generate_arena1(m: int, p: int) -> Program:
    _check_params(m, p)
    rules = [c for r in _arena0_rules(m) for c in _clone(r, p)]
    sig = _arena0_signature(m, [f"R{i}" for i in range(1, p + 1)])
    return Program(Signature(tuple(sig)), tuple(rules))


def generate_arena2(m: int, p: int) -> Program:
    base = generate_arena1(m, p)
    X, Y, Z = _v("X", "Y", "Z")
    extra = (
        _rule("dp", [_a("E", X, Y)], [_a("H", Y)]),
        _rule("ep", [_a("C", X)], [_a("E", X, Z)], [Z]),
    )
    sig = base.signature.union(Signature((("E", 2), ("C", 1))))
    return Program(sig, base.rules + extra)


def seed_instance() -> Instance:
    """The one-element instance ``{H(a)}``."""
    return Instance([Atom("H", (SEED,))])


# Thue instances.


@dataclass(frozen=True)
class ThueInstance:
    p: int
    m: int
    productions: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = ()
    name: str = "thue"

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("the alphabet needs at least the letters 1 and 2")
        if self.p > 9:
            raise ValueError("letters are single digits; p must be at most 9")
        if self.m < 1:
            raise ValueError("m must be positive")
        for lhs, rhs in self.productions:
            for word in (lhs, rhs):
                if len(word) != 2 or not all(1 <= c <= self.p for c in word):
                    raise ValueError(f"production {lhs}->{rhs} is not over letters 1..{self.p} of length 2")

    @property
    def M(self) -> int:
        return 2**self.m

    def to_text(self) -> str:
        lines = [f"p={self.p}, m={self.m}"]
        lines += [f"{a}{b} -> {c}{d}" for (a, b), (c, d) in self.productions]
        return "\n".join(lines) + "\n"


_HEADER = re.compile(r"p\s*=\s*(\d+)\s*,\s*m\s*=\s*(\d+)\Z")
_PROD = re.compile(r"(\d)(\d)\s*->\s*(\d)(\d)\Z")


def parse_thue(text: str, name: str = "thue") -> ThueInstance:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty Thue instance")
    head = _HEADER.match(lines[0])
    if head is None:
        raise ValueError("first line must read 'p=<n>, m=<n>'")
    prods = []
    for ln in lines[1:]:
        mt = _PROD.match(ln)
        if mt is None:
            raise ValueError(f"cannot parse production {ln!r}")
        a, b, c, d = map(int, mt.groups())
        prods.append(((a, b), (c, d)))
    return ThueInstance(int(head.group(1)), int(head.group(2)), tuple(prods), name)


def load_thue(path) -> ThueInstance:
    from pathlib import Path

    p = Path(path)
    return parse_thue(p.read_text(encoding="utf-8"), p.stem)


def generate_thue_program(t: ThueInstance) -> Program:
    X, Y, Z, X1, Y1, Z1 = _v("X", "Y", "Z", "X1", "Y1", "Z1")
    rules = []
    for k, ((i, i2), (j, j2)) in enumerate(t.productions, 1):
        body = [_a(f"R{i}", X, Y), _a(f"R{i2}", Y, Y1), _a(f"R{j}", X, Z), _a(f"R{j2}", Z, Z1)]
        rules.append(_rule(f"p1_{k}", body, [_a("P", Y1, Z1)]))
    for i in range(1, t.p + 1):
        rules.append(_rule(f"p2_{i}", [_a("P", X, Y), _a(f"R{i}", X, X1), _a(f"R{i}", Y, Y1)], [_a("P", X1, Y1)]))
    last = f"R{t.p}"
    rules += [
        _rule("g1", [_a("H", X), _a("R1", X, Y)], [_a("G1", Y)]),
        _rule("g2", [_a("G1", Y), _a(last, Y, Y1)], [_a("G1", Y1)]),
        _rule("g3", [_a("G1", X)], [_a("G", X)]),
        _rule("g4", [_a("G", Y), _a("P", Y, Y1)], [_a("G", Y1)]),
        _rule("g5", [_a("G", Y)], [_a("G2", Y)]),
        _rule("g6", [_a("G2", Y), _a(last, Y1, Y)], [_a("G2", Y1)]),
        _rule("g7", [_a("H", X), _a("R2", X, Y), _a("G2", Y)], [_a("C", X)]),
    ]
    sig = [("H", 1)] + [(f"R{i}", 2) for i in range(1, t.p + 1)]
    sig += [("P", 2), ("G1", 1), ("G", 1), ("G2", 1), ("C", 1)]
    return Program(Signature(tuple(sig)), tuple(rules))


def combined_program(t: ThueInstance, with_arena: int = 1) -> Program:
    """Arena (``T1`` or ``T2``) together with the Thue program on the same letters."""
    arena = generate_arena2(t.m, t.p) if with_arena == 2 else generate_arena1(t.m, t.p)
    return arena.union(generate_thue_program(t))


@dataclass
class Solvable:
    k: int
    rewrites: list[str]


@dataclass
class Unsolvable:
    searched_up_to: int


def _word(letters) -> str:
    return "".join(map(str, letters))


def rewrite_reachable(t: ThueInstance, start: tuple[int, ...], goal: tuple[int, ...]) -> list[str] | None:
    """Breadth-first search; returns the rewrite sequence from start to goal, or None."""
    parent = {start: None}
    queue = deque([start])
    rules: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for lhs, rhs in t.productions:
        rules.setdefault(lhs, []).append(rhs)
    while queue:
        w = queue.popleft()
        if w == goal:
            seq = []
            while w is not None:
                seq.append(_word(w))
                w = parent[w]
            return seq[::-1]
        for pos in range(len(w) - 1):
            for rhs in rules.get((w[pos], w[pos + 1]), ()):
                nxt = w[:pos] + rhs + w[pos + 2 :]
                if nxt not in parent:
                    parent[nxt] = w
                    queue.append(nxt)
    return None


def thue_oracle(t: ThueInstance, bound: int | None = None) -> Solvable | Unsolvable:
    """Smallest ``k < bound`` (default ``M``) with ``1 p^k`` rewriting to ``2 p^k``."""
    bound = t.M if bound is None else bound
    for k in range(bound):
        seq = rewrite_reachable(t, (1,) + (t.p,) * k, (2,) + (t.p,) * k)
        if seq is not None:
            return Solvable(k, seq)
    return Unsolvable(bound - 1)


# Shape analysis.


@dataclass
class TreeShape:
    root: object
    depth: int
    nodes: int
    full: bool
    words: dict = field(default_factory=dict)
    problems: list[str] = field(default_factory=list)


def child_relations(instance: Instance, p: int) -> list[str]:
    return ["R"] if p == 0 else [f"R{i}" for i in range(1, p + 1)]


def tree_below(instance: Instance, root, p: int, exclude_loops: bool = True) -> TreeShape:
    """Walk R1..Rp edges from ``root`` and check for a full p-ary tree."""
    letters = list(range(1, p + 1))
    words = {root: ""}
    problems = []
    queue = deque([root])
    while queue:
        node = queue.popleft()
        kids = {}
        for i in letters:
            for f in instance.lookup(f"R{i}", 0, node):
                child = f.args[1]
                if exclude_loops and child is node:
                    continue
                if i in kids:
                    problems.append(f"{node} has two R{i}-children")
                kids[i] = child
        for i, child in sorted(kids.items()):
            if child in words:
                problems.append(f"{child} reached twice")
                continue
            words[child] = words[node] + str(i)
            queue.append(child)
    depth = max(len(w) for w in words.values())
    full = not problems
    for node, w in words.items():
        has = [
            any(f.args[1] is not node for f in instance.lookup(f"R{i}", 0, node)) for i in letters
        ]
        want = len(w) < depth
        if any(h != want for h in has):
            full = False
    return TreeShape(root, depth, len(words), full, words, problems)


def r_path(instance: Instance, root=SEED, relation: str = "R", skip_loops: bool = False) -> list:
    """Follow R-edges from ``root``; raises ValueError unless they form a simple path.

    With ``skip_loops`` self-loops (such as the well's) are ignored.
    """
    path = [root]
    loops = sum(1 for f in instance.relation(relation) if f.args[0] is f.args[1]) if skip_loops else 0
    while True:
        out = [f.args[1] for f in instance.lookup(relation, 0, path[-1]) if not (skip_loops and f.args[1] is path[-1])]
        if not out:
            break
        if len(out) > 1:
            raise ValueError(f"{path[-1]} has {len(out)} R-successors")
        if out[0] in path:
            raise ValueError("R-cycle")
        path.append(out[0])
    if len(instance.relation(relation)) - loops != len(path) - 1:
        raise ValueError("R-edges outside the path")
    return path


def partial_chase(m: int, n: int, instance: Instance | None = None) -> ChaseResult:
    """The arena0 chase stopped after ``n`` firings of rule (e), Datalog saturated."""
    prog = generate_arena0(m)
    return run_chase(prog, instance or seed_instance(), ChaseConfig(max_steps=n, record_trace=False))


def t_window(i: int, j: int, n: int) -> bool:
    """Exact T-relation of the partial chase: ``j >= 1`` and ``2j - n <= i <= j``."""
    return j >= 1 and 2 * j - n <= i <= j


def t_window_as_printed(i: int, j: int, n: int) -> bool:
    return i + n <= 2 * j


def verify_appendix_b(m: int, n: int, result: ChaseResult | None = None) -> CheckReport:
    """Check the T, C_i, K characterizations on the arena0 state after ``n`` (e)-firings."""
    rep = CheckReport(f"appendixB m={m} N={n}")
    res = result or partial_chase(m, n)
    inst = res.instance
    elems = inst.adom_ordered()
    if res.steps_used != n or len(elems) != n + 1:
        rep.record("state-exists", False, f"only {res.steps_used} firings of (e) possible")
        return rep
    big_m = 2**m
    for i, a_i in enumerate(elems):
        for j, a_j in enumerate(elems):
            fact = Atom("T", (a_i, a_j))
            rep.record("T-window", (fact in inst) == t_window(i, j, n), f"T(a_{i},a_{j}) at N={n}")
    for i in range(1, m + 1):
        for j, a_j in enumerate(elems):
            want = j * 2**i <= n * (2**i - 1)
            rep.record("C-threshold", (Atom(f"C{i}", (a_j,)) in inst) == want, f"C{i}(a_{j}) at N={n}")
    for j, a_j in enumerate(elems):
        want = (j - 1) * big_m <= n * (big_m - 1)
        rep.record("K-threshold", (Atom("K", (a_j,)) in inst) == want, f"K(a_{j}) at N={n}")
    rep.record("K-last", (Atom("K", (elems[n],)) in inst) == (n <= big_m), f"K(a_{n}) at N={n}")
    return rep


def count_generations(instance: Instance, start) -> int:
    """Length of the E-path leaving ``start`` (self-loops ignored)."""
    seen = {start}
    node = start
    count = 0
    while True:
        nxt = [f.args[1] for f in instance.lookup("E", 0, node) if f.args[1] is not node]
        if not nxt or nxt[0] in seen:
            return count
        node = nxt[0]
        seen.add(node)
        count += 1
