"""Workbench for the chase procedure on tuple-generating dependencies."""
from chaselab.chase import ChaseConfig, ChaseResult, Strategy, Variant, Verdict, check_is_model, run_chase
from chaselab.critical import all_instances_termination_probe, build_critical
from chaselab.model import (
    TGD,
    Atom,
    Constant,
    Diagnostic,
    Instance,
    Program,
    Signature,
    SkolemApp,
    SkolemFunction,
    Variable,
    atom,
    is_datalog_rule,
    make_rule,
    term_depth,
    validate_program,
)
from chaselab.parser import ParseError, parse_instance, parse_program, print_instance, print_program

__all__ = [
    "ChaseConfig",
    "ChaseResult",
    "Strategy",
    "Variant",
    "Verdict",
    "all_instances_termination_probe",
    "build_critical",
    "check_is_model",
    "run_chase",
    "TGD",
    "Atom",
    "Constant",
    "Diagnostic",
    "Instance",
    "ParseError",
    "Program",
    "Signature",
    "SkolemApp",
    "SkolemFunction",
    "Variable",
    "atom",
    "is_datalog_rule",
    "make_rule",
    "parse_instance",
    "parse_program",
    "print_instance",
    "print_program",
    "term_depth",
    "validate_program",
]
