"""Solver tests: bit-vector semantics, SAT verdicts vs enumeration,
determinism, and budget behavior."""

import random

import pytest

from scid.solver import BudgetExceeded, Formula, evaluate, solve, solve_under
from scid.solver import terms as T
from scid.solver.bitblast import CnfBuilder

from oracles import (circuit_evaluate, enumerate_verdict, random_formula,
                     random_term)


def bv(name, w=8):
    return T.var(name, w)


class TestEvaluate:
    def test_xor(self):
        assert evaluate(T.xor(bv("x", 4), bv("y", 4)), {"x": 5, "y": 3}) == 6

    def test_shift(self):
        assert evaluate(T.shl(bv("y"), 2), {"y": 3}) == 12

    def test_wraparound(self):
        assert evaluate(T.add(bv("x", 4), T.const(1, 4)), {"x": 15}) == 0

    def test_unassigned_variable(self):
        with pytest.raises(T.TermError):
            evaluate(bv("x"), {})

    def test_against_circuit_simulation(self):
        rng = random.Random(7)
        names = ["a", "b", "c"]
        for _ in range(10_000):
            w = rng.choice([1, 2, 4, 8, 13])
            t = random_term(rng, rng.randrange(1, 5), w, names)
            model = {n: rng.randrange(1 << w) for n in names}
            assert evaluate(t, model) == circuit_evaluate(t, model)


class TestWidthChecks:
    def test_mismatched_add(self):
        with pytest.raises(T.TermError):
            T.add(bv("x", 4), bv("y", 8))

    def test_formula_requires_width_one(self):
        with pytest.raises(T.TermError):
            Formula((bv("x", 4),))

    def test_shift_bound(self):
        with pytest.raises(T.TermError):
            T.shl(bv("x", 4), 4)


class TestSolve:
    def test_xor_identity(self):
        x = bv("x")
        m = solve(Formula((T.eq(T.xor(x, x), T.const(0, 8)),)))
        assert m is not None

    def test_wraparound_model(self):
        x = bv("x", 4)
        m = solve(Formula((T.eq(T.add(x, T.const(1, 4)), T.const(0, 4)),)))
        assert m == {"x": 15}

    def test_unsat(self):
        x = bv("x", 4)
        assert solve(Formula((T.ult(x, T.const(0, 4)),))) is None

    def test_model_covers_unconstrained_vars(self):
        x, y = bv("x", 4), bv("y", 4)
        m = solve(Formula((T.or_(T.eq(x, x), T.eq(y, y)),)))
        assert set(m) == {"x", "y"}

    def test_random_against_enumeration(self):
        rng = random.Random(11)
        for trial in range(250):
            f = random_formula(rng)
            got = solve(f, seed=1)
            want_sat, _ = enumerate_verdict(f)
            assert (got is not None) == want_sat, f"trial {trial}"

    def test_determinism(self):
        rng = random.Random(3)
        for _ in range(30):
            f = random_formula(rng)
            assert solve(f, seed=5) == solve(f, seed=5)

    def test_budget_error_is_not_a_verdict(self):
        # A pigeonhole-flavored instance that needs some search.
        w = 8
        vs = [bv(f"p{i}", w) for i in range(6)]
        assertions = []
        for i in range(len(vs)):
            for j in range(i + 1, len(vs)):
                assertions.append(T.not_(T.eq(vs[i], vs[j])))
            assertions.append(T.ult(vs[i], T.const(5, w)))
        with pytest.raises(BudgetExceeded):
            solve(Formula(tuple(assertions)), conflict_limit=3)


class TestSolveUnder:
    def test_assumption_binds(self):
        x, y = bv("x", 4), bv("y", 4)
        f = Formula((T.eq(x, y),))
        m = solve_under(f, [T.eq(x, T.const(3, 4))])
        assert m["y"] == 3

    def test_nothing_below_zero(self):
        x, y = bv("x", 4), bv("y", 4)
        f = Formula((T.ult(x, y),))
        assert solve_under(f, [T.eq(y, T.const(0, 4))]) is None

    def test_matches_conjoined_solve(self):
        rng = random.Random(23)
        for _ in range(80):
            f = random_formula(rng, n_vars=2)
            assumption = T.eq(T.var("v0", 4), T.const(rng.randrange(16), 4))
            a = solve_under(f, [assumption], seed=2)
            b = solve(f.conjoin([assumption]), seed=2)
            assert (a is None) == (b is None)


class TestDimacs:
    def test_dump(self, tmp_path):
        x = bv("x", 2)
        target = tmp_path / "out.cnf"
        solve(Formula((T.eq(x, T.const(2, 2)),)), dump_cnf=str(target))
        text = target.read_text()
        assert text.startswith("p cnf ")
        assert text.strip().endswith(" 0")

    def test_builder_counts(self):
        b = CnfBuilder()
        b.assert_true(T.eq(bv("x", 3), T.const(5, 3)))
        header = b.to_dimacs().splitlines()[0].split()
        assert int(header[2]) == b.nvars
        assert int(header[3]) == len(b.clauses)
