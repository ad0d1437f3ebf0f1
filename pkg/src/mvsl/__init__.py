"""A small statically typed language with mutable value semantics.

The pipeline: `tokenize` source, `parse_source` into an AST,
`check_program` to annotate types, `lower_program` to a linear IR,
optionally `apply_move_optimization`, then `execute` on a VM whose
array storage is refcounted and copied on write.  `interpret_eager`
is the independent eager-copy reference interpreter; `differential_run`
compares it against the VM under all flag combinations.
"""

from .ast import dump_ast, pretty_program
from .diagnostics import (
    ParseError,
    RuntimeTrap,
    SourceError,
    Span,
    TypeCheckError,
    UsageError,
)
from .difftest import differential_run, differential_seed_run
from .generator import GenConfig, generate_program
from .ir import apply_move_optimization, dump_ir, lower_program
from .lexer import tokenize
from .oracle import interpret_eager
from .parser import parse_program, parse_source
from .typechecker import check_program, paths_overlap
from .vm import RuntimeStats, execute, serialize_array_layout

__version__ = "0.1.0"

__all__ = [
    "GenConfig",
    "ParseError",
    "RuntimeStats",
    "RuntimeTrap",
    "SourceError",
    "Span",
    "TypeCheckError",
    "UsageError",
    "apply_move_optimization",
    "check_program",
    "differential_run",
    "differential_seed_run",
    "dump_ast",
    "dump_ir",
    "execute",
    "generate_program",
    "interpret_eager",
    "lower_program",
    "parse_program",
    "parse_source",
    "paths_overlap",
    "pretty_program",
    "serialize_array_layout",
    "tokenize",
    "__version__",
]
