"""Deductive engine: a CDCL SAT core under a bit-vector layer.

The only entry points the rest of the workbench uses are :func:`solve`,
:func:`solve_under` and :func:`evaluate`; everything is desk scale, so
each query bit-blasts afresh.
"""

from __future__ import annotations

from . import terms
from .bitblast import CnfBuilder
from .sat import BudgetExceeded, CdclSolver
from .terms import BitVecTerm, Formula, TermError, evaluate

__all__ = [
    "terms",
    "BitVecTerm",
    "Formula",
    "TermError",
    "BudgetExceeded",
    "evaluate",
    "solve",
    "solve_under",
    "Model",
]

Model = dict  # var name -> unsigned value


def _assignment_from(builder: CnfBuilder, sat: CdclSolver, variables) -> Model:
    model = {}
    for name, width in variables.items():
        bits = builder.var_bits.get(name)
        value = 0
        if bits is not None:
            for i, lit in enumerate(bits):
                if sat.model_value(lit):
                    value |= 1 << i
        model[name] = value
    return model


def solve(
    formula: Formula,
    *,
    seed: int = 0,
    conflict_limit: int = 2_000_000,
    dump_cnf: str | None = None,
) -> Model | None:
    """Decide ``formula``; returns a satisfying Model or None for UNSAT.

    Every returned model is re-evaluated against each assertion before it
    leaves this function (soundness gate). A conflict budget overrun raises
    :class:`BudgetExceeded` instead of guessing.
    """
    variables = formula.variables()
    builder = CnfBuilder()
    for a in formula.assertions:
        builder.assert_true(a)
    # Blast all variables so the model covers even unconstrained ones.
    for name, width in variables.items():
        builder.bits_for_var(name, width)
    if dump_cnf:
        with open(dump_cnf, "w") as fh:
            fh.write(builder.to_dimacs())
    sat = CdclSolver(seed=seed, conflict_limit=conflict_limit)
    for _ in range(builder.nvars):
        sat.new_var()
    ok = True
    for clause in builder.clauses:
        if not sat.add_clause(clause):
            ok = False
            break
    if ok:
        ok = sat.solve()
    if not ok:
        return None
    model = _assignment_from(builder, sat, variables)
    for a in formula.assertions:
        assert evaluate(a, model) == 1, "solver returned a non-model"
    return model


def solve_under(formula: Formula, assumptions, **kwargs) -> Model | None:
    """Equivalent to ``solve(formula AND assumptions)``."""
    return solve(formula.conjoin(assumptions), **kwargs)
