"""Stratified datalog with incremental maintenance: DRed, DRed^c, B/F, B/F^c."""
from __future__ import annotations

from .errors import (
    ArityError,
    CounterOverflow,
    CounterUnderflow,
    DatalogError,
    EvaluationOverflow,
    GroundnessError,
    InfeasibleGraph,
    NotStratifiableError,
    ParseError,
    SafetyError,
    UnboundBuiltinError,
)
from .evaluation import apply_multi, has_instance, instances, materialise
from .harness import gen_example1, gen_example2, gen_example3, gen_random, gen_sspe, random_delete, verify_update
from .maintain import (
    ALGORITHMS,
    UpdateStats,
    UpdateTrace,
    bf_update,
    bfc_update,
    dred_update,
    dredc_update,
    normalize_delta,
    update,
)
from .model import Atom, Program, Rule, Stratification, Var, check_safety, stratify
from .parser import Delta, parse_delta, parse_facts, parse_program
from .store import CounterMap, EngineState, FactSet, match, recount_counters

__version__ = "0.1.0"
