"""Line-oriented exports: traces, verdict reports, edge lists, run manifests."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable

from chaselab.chase import ChaseResult, TraceStep
from chaselab.model import Instance
from chaselab.parser import format_atom, format_term


def trace_record(step: TraceStep) -> dict:
    return {
        "index": step.index,
        "step": step.step,
        "rule": step.trigger.rule_id,
        "existential": step.existential,
        "bindings": {v.name: format_term(t) for v, t in step.trigger.binding},
        "added": [format_atom(f) for f in step.added],
    }


def trace_lines(trace: Iterable[TraceStep]) -> list[str]:
    """One JSON object per line, keys in fixed order."""
    return [json.dumps(trace_record(s)) for s in trace]


def write_trace(path: Path, trace: Iterable[TraceStep]) -> None:
    path.write_text("".join(line + "\n" for line in trace_lines(trace)), encoding="utf-8")


def verdict_records(result: ChaseResult, extra: dict | None = None) -> list[tuple[str, object]]:
    cfg = result.config
    rows: list[tuple[str, object]] = [
        ("verdict", result.verdict.value),
        ("reason", result.reason or "-"),
        ("variant", cfg.variant.value),
        ("strategy", str(cfg.strategy)),
        ("max_steps", cfg.max_steps),
        ("max_depth", cfg.max_depth if cfg.max_depth is not None else "-"),
        ("max_facts", cfg.max_facts if cfg.max_facts is not None else "-"),
        ("steps_used", result.steps_used),
        ("facts", len(result.instance)),
        ("elements", len(result.instance.adom)),
        ("max_term_depth", result.max_term_depth),
    ]
    rows += list((extra or {}).items())
    return rows


def format_records(rows: Iterable[tuple[str, object]]) -> str:
    return "".join(f"{k}\t{v}\n" for k, v in rows)


def edge_lines(instance: Instance, relations: Iterable[str]) -> list[str]:
    out = []
    for rel in relations:
        facts = sorted(instance.relation(rel), key=lambda f: tuple((t.depth, format_term(t)) for t in f.args))
        for f in facts:
            if f.arity == 2:
                out.append(f"{format_term(f.args[0])}\t{format_term(f.args[1])}\t{rel}")
    return out


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
