"""Source language frontend: parser, static checks, and DAG construction."""

from .parser import (
    ParseError,
    Program,
    WidthError,
    parse,
    pretty_print,
)
from .cfg import BudgetError, BuildError, Cfg, build_dag

__all__ = [
    "parse",
    "pretty_print",
    "build_dag",
    "Program",
    "Cfg",
    "ParseError",
    "WidthError",
    "BuildError",
    "BudgetError",
]
