"""Command-line front end: ``chaselab chase | generate | verify``.

Exit codes for ``chase``: 0 terminated, 2 budget exceeded, 1 input error.
``verify`` exits 1 when any check fails. Every run writes ``manifest.json``
into its output directory.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from chaselab import arena, machines, translations
from chaselab.chase import (
    ChaseConfig,
    PathVerdict,
    Strategy,
    Variant,
    enumerate_standard_paths,
    run_chase,
)
from chaselab.critical import (
    WELL,
    ProbeVerdict,
    all_instances_termination_probe,
    build_critical,
    find_divergence_certificate,
    lemma1_sample,
)
from chaselab.model import Atom, validate_program
from chaselab.parser import ParseError, format_term, load_instance, load_program, print_program
from chaselab.reports import (
    edge_lines,
    file_digest,
    format_records,
    verdict_records,
    write_manifest,
    write_trace,
)

EXIT_OK, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2


class InputError(Exception):
    pass


def _out_dir(args, default: str) -> Path:
    out = Path(args.out) if args.out else Path("runs") / default
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, inputs, outputs, started, verdicts, config=None) -> dict:
    return {
        "command": args.command,
        "argv": sys.argv[1:] if args.argv is None else args.argv,
        "inputs": {str(p): file_digest(p) for p in inputs},
        "config": config or {},
        "outputs": [str(p) for p in outputs],
        "wall_time_s": round(time.perf_counter() - started, 3),
        "verdicts": verdicts,
    }


def _load_program(path) -> object:
    try:
        program = load_program(path)
    except FileNotFoundError as exc:
        raise InputError(f"{path}: no such file") from exc
    except ParseError as exc:
        raise InputError("\n".join(f"{path}:{d}" for d in exc.diagnostics)) from exc
    diags = validate_program(program, allow_domain_variables=True)
    if diags:
        raise InputError("\n".join(f"{path}: {d}" for d in diags))
    return program


def _config(args) -> ChaseConfig:
    kind = args.strategy
    if kind == "random":
        if args.seed is None:
            raise InputError("--strategy random requires --seed")
        strategy = Strategy.random(args.seed)
    elif kind == "exhaustive":
        strategy = Strategy.exhaustive(args.path_budget)
    else:
        strategy = Strategy(kind)
    try:
        return ChaseConfig(
            variant=Variant(args.variant),
            max_steps=args.max_steps,
            max_depth=args.max_depth,
            strategy=strategy,
            max_facts=args.max_facts,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def cmd_chase(args) -> int:
    started = time.perf_counter()
    program = _load_program(args.program)
    if args.critical == bool(args.instance):
        raise InputError("give exactly one of an instance file or --critical")
    if args.critical:
        instance = build_critical(program.signature)
        inputs = [Path(args.program)]
    else:
        try:
            instance = load_instance(args.instance, program.signature)
        except FileNotFoundError as exc:
            raise InputError(f"{args.instance}: no such file") from exc
        except ParseError as exc:
            raise InputError("\n".join(f"{args.instance}:{d}" for d in exc.diagnostics)) from exc
        inputs = [Path(args.program), Path(args.instance)]
    cfg = _config(args)
    out = _out_dir(args, f"chase-{Path(args.program).stem}")
    outputs = []
    if cfg.strategy.kind == "exhaustive":
        res = enumerate_standard_paths(program, instance, args.max_steps, cfg.strategy.path_budget)
        rows = [
            ("verdict", res.verdict.value),
            ("states_explored", res.states_explored),
            ("terminal_states", res.terminal_states),
        ]
        if res.witness:
            rows.append(("witness_length", len(res.witness)))
            witness = out / "witness.txt"
            witness.write_text("".join(f"{t}\n" for t in res.witness), encoding="utf-8")
            outputs.append(witness)
        report = out / "report.txt"
        report.write_text(format_records(rows), encoding="utf-8")
        outputs.append(report)
        sys.stdout.write(format_records(rows))
        code = EXIT_OK if res.verdict is PathVerdict.ALL_TERMINATE else EXIT_BUDGET
        write_manifest(out / "manifest.json", _manifest(args, inputs, outputs, started, {"paths": res.verdict.value}))
        return code
    result = run_chase(program, instance, cfg)
    extra = {}
    if args.critical and not result.terminated and cfg.variant is not Variant.STANDARD:
        cert = find_divergence_certificate(program, result)
        extra["probe"] = ProbeVerdict.DIVERGENCE_WITNESS.value if cert else ProbeVerdict.INCONCLUSIVE.value
        if cert:
            extra["certificate"] = cert.describe()
    elif args.critical and result.terminated and cfg.variant is not Variant.STANDARD:
        extra["probe"] = ProbeVerdict.TERMINATES_ALL_INSTANCES.value
    if program.signature.arity("R") == 2:
        root = WELL if args.critical else arena.SEED
        try:
            extra["r_path_nodes"] = len(arena.r_path(result.instance, root, skip_loops=True))
        except ValueError as exc:
            extra["r_path_nodes"] = f"none ({exc})"
    binary = [n for n, a in program.signature.relations if a == 2]
    shape = args.edges or [r for r in ("E", "R") if r in binary]
    if args.edges is None and not shape:
        shape = [r for r in binary if r.startswith("R") and r[1:].isdigit()]
    if shape:
        edges = out / "edges.tsv"
        edges.write_text("".join(line + "\n" for line in edge_lines(result.instance, shape)), encoding="utf-8")
        outputs.append(edges)
        extra["edges"] = sum(len(result.instance.relation(r)) for r in shape)
    trace = out / "trace.jsonl"
    write_trace(trace, result.trace)
    report = out / "report.txt"
    text = format_records(verdict_records(result, extra))
    report.write_text(text, encoding="utf-8")
    outputs += [trace, report]
    sys.stdout.write(text)
    cfg_dict = {
        "variant": cfg.variant.value,
        "strategy": str(cfg.strategy),
        "max_steps": cfg.max_steps,
        "max_depth": cfg.max_depth,
        "max_facts": cfg.max_facts,
        "critical": bool(args.critical),
    }
    write_manifest(out / "manifest.json", _manifest(args, inputs, outputs, started, {"chase": result.verdict.value}, cfg_dict))
    return EXIT_OK if result.terminated else EXIT_BUDGET


def cmd_generate(args) -> int:
    started = time.perf_counter()
    inputs = []
    try:
        if args.kind == "tm":
            if not args.machine:
                raise InputError("generate tm needs --machine")
            mach = machines.load_machine(args.machine)
            inputs.append(Path(args.machine))
            program = machines.generate_tm(mach)
            name = f"tm_{mach.name}"
        elif args.kind == "arena0":
            program = arena.generate_arena0(args.m)
            name = f"arena0_m{args.m}"
        elif args.kind in ("arena1", "arena2"):
            gen = arena.generate_arena1 if args.kind == "arena1" else arena.generate_arena2
            program = gen(args.m, args.p)
            name = f"{args.kind}_m{args.m}_p{args.p}"
        elif args.kind == "thue":
            if not args.instance:
                raise InputError("generate thue needs --instance")
            t = arena.load_thue(args.instance)
            inputs.append(Path(args.instance))
            if args.with_arena:
                program = arena.combined_program(t, with_arena=2)
                name = f"thue_{t.name}_arena2"
            else:
                program = arena.generate_thue_program(t)
                name = f"thue_{t.name}"
        else:
            if not args.program:
                raise InputError("generate translate needs --program")
            source = _load_program(args.program)
            inputs.append(Path(args.program))
            if args.split:
                program = translations.ternary_split_program(source, args.split)
                name = f"{Path(args.program).stem}_split"
            else:
                program = translations.single_head_translate(source).translated
                name = f"{Path(args.program).stem}_single"
    except (ValueError, FileNotFoundError) as exc:
        raise InputError(str(exc)) from exc
    out = _out_dir(args, f"generate-{name}")
    target = out / f"{name}.dlge"
    target.write_text(print_program(program), encoding="utf-8")
    print(f"wrote {target} ({len(program.rules)} rules, {len(program.signature.relations)} relations)")
    write_manifest(out / "manifest.json", _manifest(args, inputs, [target], started, {"rules": len(program.rules)}))
    return EXIT_OK


def _report_lines(rep) -> list[str]:
    return [f"{rep.title}\t{line}" for line in rep.lines()] + [f"# {v}" for v in rep.violations[:20]]


def cmd_verify(args) -> int:
    started = time.perf_counter()
    lines: list[str] = []
    ok = True
    inputs = []
    try:
        if args.suite == "appendixA":
            if not args.machine:
                raise InputError("verify appendixA needs --machine")
            mach = machines.load_machine(args.machine)
            inputs.append(Path(args.machine))
            program = machines.generate_tm(mach)
            cfg = ChaseConfig(max_steps=args.max_steps, max_facts=args.max_facts, record_trace=False)
            res = run_chase(program, build_critical(program.signature), cfg)
            rep = machines.verify_appendix_a(
                res.instance, mach, complete=res.terminated, saturated=res.reason != "max_facts"
            )
            lines.append(f"chase\t{res.verdict.value}\tsteps={res.steps_used}\tfacts={len(res.instance)}")
            lines += _report_lines(rep)
            ok = rep.ok
        elif args.suite == "appendixB":
            if args.m is None:
                raise InputError("verify appendixB needs --m")
            ns = [args.n] if args.n is not None else range(0, 2**args.m + 2)
            for n in ns:
                rep = arena.verify_appendix_b(args.m, n)
                lines += _report_lines(rep)
                ok = ok and rep.ok
        elif args.suite == "thue-oracle":
            if not args.instance:
                raise InputError("verify thue-oracle needs --instance")
            t = arena.load_thue(args.instance)
            inputs.append(Path(args.instance))
            if args.m is not None or args.p is not None:
                t = arena.ThueInstance(args.p or t.p, args.m or t.m, t.productions, t.name)
            oracle = arena.thue_oracle(t)
            res = run_chase(arena.combined_program(t), arena.seed_instance(), ChaseConfig(record_trace=False))
            derived = Atom("C", (arena.SEED,)) in res.instance
            solvable = isinstance(oracle, arena.Solvable)
            lines.append(f"oracle\t{'solvable k=' + str(oracle.k) if solvable else 'unsolvable'}")
            lines.append(f"chase\tC(a) {'derived' if derived else 'not derived'}")
            agree = derived == solvable
            lines.append(f"agreement\t{'pass' if agree else 'FAIL'}")
            ok = agree
        else:
            if not args.program:
                raise InputError("verify lemma1-sample needs --program")
            program = _load_program(args.program)
            inputs.append(Path(args.program))
            rep = lemma1_sample(program, samples=args.samples, seed=args.seed or 0, name=Path(args.program).stem)
            lines.append(f"critical\tsteps={rep.critical_steps}\tdepth={rep.critical_depth}")
            lines.append(f"samples\t{rep.samples}\t{'pass' if rep.ok else 'FAIL'}")
            lines += [f"# {f}" for f in rep.failures[:20]]
            ok = rep.ok
    except (ValueError, FileNotFoundError) as exc:
        raise InputError(str(exc)) from exc
    out = _out_dir(args, f"verify-{args.suite}")
    report = out / "report.txt"
    report.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    print("\n".join(lines))
    write_manifest(out / "manifest.json", _manifest(args, inputs, [report], started, {"ok": ok}))
    return EXIT_OK if ok else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chaselab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    ch = sub.add_parser("chase", help="run a chase and write trace, report, and edges")
    ch.add_argument("program")
    ch.add_argument("instance", nargs="?")
    ch.add_argument("--critical", action="store_true", help="chase the critical instance of the signature")
    ch.add_argument("--variant", choices=[v.value for v in Variant], default="oblivious")
    ch.add_argument("--max-steps", type=int, default=10**6)
    ch.add_argument("--max-depth", type=int)
    ch.add_argument("--max-facts", type=int, default=50_000)
    ch.add_argument("--strategy", choices=["fifo", "lifo", "random", "exhaustive"], default="fifo")
    ch.add_argument("--seed", type=int)
    ch.add_argument("--path-budget", type=int, default=10_000)
    ch.add_argument("--edges", nargs="*", help="binary relations to export as an edge list")
    ch.add_argument("--out")
    ch.set_defaults(func=cmd_chase)

    gen = sub.add_parser("generate", help="write a generated program")
    gen.add_argument("kind", choices=["tm", "arena0", "arena1", "arena2", "thue", "translate"])
    gen.add_argument("--machine")
    gen.add_argument("--m", type=int, default=1)
    gen.add_argument("--p", type=int, default=2)
    gen.add_argument("--instance")
    gen.add_argument("--with-arena", action="store_true")
    gen.add_argument("--program")
    gen.add_argument("--split", metavar="RELATION", help="split this ternary relation instead")
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_generate)

    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("suite", choices=["appendixA", "appendixB", "thue-oracle", "lemma1-sample"])
    ver.add_argument("--machine")
    ver.add_argument("--m", type=int)
    ver.add_argument("--n", type=int)
    ver.add_argument("--p", type=int)
    ver.add_argument("--instance")
    ver.add_argument("--program")
    ver.add_argument("--samples", type=int, default=50)
    ver.add_argument("--seed", type=int)
    ver.add_argument("--max-steps", type=int, default=10**6)
    ver.add_argument("--max-facts", type=int, default=2_000_000)
    ver.add_argument("--out")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
