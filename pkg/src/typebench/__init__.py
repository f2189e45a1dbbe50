"""Type-inference benchmark toolkit for Haskell signatures."""

from .corpus import SignatureDB, Task, build_tasks, read_tasks, write_tasks
from .equivalence import alpha_equivalent, canonicalize, emit_proof_module, subsumes, synthesize_definitions
from .errors import (
    EndpointUnreachable,
    MissingDeps,
    ParseError,
    RewriteError,
    UnsupportedSyntax,
)
from .harness import ModelEndpointConfig, RunReport, run_benchmark
from .metrics import accuracy_summary, classify_error, reasoning_effectiveness, robustness_score
from .rewrite import NamingScheme, RenamingPlan, alpha_rewrite, invert_rewrite
from .types import parse_signature, parse_type, print_signature

__version__ = "0.1.0"

__all__ = [
    "SignatureDB",
    "Task",
    "build_tasks",
    "read_tasks",
    "write_tasks",
    "alpha_equivalent",
    "canonicalize",
    "emit_proof_module",
    "subsumes",
    "synthesize_definitions",
    "EndpointUnreachable",
    "MissingDeps",
    "ParseError",
    "RewriteError",
    "UnsupportedSyntax",
    "ModelEndpointConfig",
    "RunReport",
    "run_benchmark",
    "accuracy_summary",
    "classify_error",
    "reasoning_effectiveness",
    "robustness_score",
    "NamingScheme",
    "RenamingPlan",
    "alpha_rewrite",
    "invert_rewrite",
    "parse_signature",
    "parse_type",
    "print_signature",
]
