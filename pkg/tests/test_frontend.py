"""Parser, static checks, and DAG construction tests."""

import pytest

from scid import benchmarks
from scid.frontend import (BudgetError, BuildError, ParseError, WidthError,
                           build_dag, parse, pretty_print)
from scid.frontend.parser import While


def paths_of(cfg):
    return list(cfg.enumerate_paths())


class TestParse:
    def test_modexp_has_one_bounded_loop(self):
        prog = parse(benchmarks.read_text("modexp.mc"))
        assert prog.width == 8
        fn = prog.function("modexp")
        loops = [s for s in fn.body if isinstance(s, While)]
        assert len(loops) == 1 and loops[0].bound == 8

    def test_empty_body_is_source_to_sink(self):
        cfg = build_dag(parse("func main() { }"))
        assert cfg.n_blocks == 2 and cfg.n_edges == 1
        assert cfg.path_count() == 1

    def test_while_without_bound_rejected(self):
        with pytest.raises(ParseError):
            parse("func main(x) { while (x < 3) { x = x + 1; } }")

    def test_syntax_error_carries_position(self):
        with pytest.raises(ParseError) as err:
            parse("func main( { }")
        assert "line 1" in str(err.value)

    def test_read_before_assignment_rejected(self):
        with pytest.raises(WidthError):
            parse("func main(x) { y = z + x; return y; }")

    def test_branch_local_definition_not_visible_after_join(self):
        with pytest.raises(WidthError):
            parse("""
                func main(x) {
                    if (x == 0) { y = 1; }
                    return y;
                }
            """)

    def test_recursion_rejected(self):
        with pytest.raises(WidthError):
            parse("""
                func f(x) { y = g(x); return y; }
                func g(x) { y = f(x); return y; }
                func main(x) { r = f(x); return r; }
            """)

    def test_comparison_not_assignable(self):
        with pytest.raises(BuildError):
            build_dag(parse("func main(x) { y = x == 0; return y; }"))

    def test_shift_amount_must_be_literal(self):
        with pytest.raises(WidthError):
            parse("func main(x, k) { y = x << k; return y; }")

    def test_oversized_literal_rejected(self):
        with pytest.raises(BuildError):
            build_dag(parse("width 4;\nfunc main(x) { y = x + 99; return y; }"))


class TestRoundTrip:
    @pytest.mark.parametrize("name", ["modexp.mc", "multiply45_obs.mc",
                                      "interchange_obs.mc"])
    def test_pretty_print_reparses_identically(self, name):
        prog = parse(benchmarks.read_text(name))
        assert parse(pretty_print(prog)) == prog


class TestBuildDag:
    def test_modexp_path_count(self, modexp_cfg):
        assert modexp_cfg.path_count() == 256
        assert len(paths_of(modexp_cfg)) == 256

    def test_loop_executing_at_most_once_is_a_diamond(self):
        # A bound-1 loop unrolls into one guarded copy: two paths through
        # a single branch diamond.
        cfg = build_dag(parse("""
            func main(x) {
                while (x < 1) bound 1 { x = x + 1; }
                return x;
            }
        """))
        assert cfg.path_count() == 2
        branch_blocks = [b for b in range(cfg.n_blocks)
                         if len(cfg.out_edges(b)) == 2]
        assert len(branch_blocks) == 1
        assert cfg.execute({"x": 0}).returns == (1,)
        assert cfg.execute({"x": 5}).returns == (5,)

    def test_straight_line_is_single_chain(self):
        body = "\n".join(f"x{i} = {i};" for i in range(6))
        cfg = build_dag(parse(f"func main() {{ {body} return x5; }}"))
        assert cfg.path_count() == 1
        assert cfg.n_edges == cfg.n_blocks - 1

    def test_acyclic_on_all_bundled_programs(self):
        for name in ("modexp.mc", "multiply45_obs.mc", "interchange_obs.mc"):
            cfg = build_dag(parse(benchmarks.read_text(name)))
            cfg.validate()  # topological sort + source/sink/coverage

    def test_branch_product_rule(self):
        # k independent diamonds -> 2^k paths; verified by enumeration.
        for k in (1, 3, 6, 10):
            stmts = "".join(
                f"if ((x >> {i & 7} & 1) == 1) {{ y = y + 1; }}\n" for i in range(k))
            cfg = build_dag(parse(f"func main(x) {{ y = 0; {stmts} return y; }}"))
            assert cfg.path_count() == 2 ** k
            assert len(paths_of(cfg)) == 2 ** k

    def test_inlining_composes(self):
        prog = parse("""
            func double(a) { return a + a; }
            func main(x) {
                y = double(x);
                z = double(y);
                return z;
            }
        """)
        cfg = build_dag(prog)
        assert cfg.execute({"x": 3}).returns == (12,)

    def test_inlined_branches_multiply_paths(self):
        prog = parse("""
            func pick(a) {
                if ((a & 1) == 1) { return a + 1; }
                return a;
            }
            func main(x) {
                y = pick(x);
                z = pick(y);
                return z;
            }
        """)
        cfg = build_dag(prog)
        assert cfg.path_count() == 4
        assert cfg.execute({"x": 1}).returns == (2,)
        assert cfg.execute({"x": 2}).returns == (2,)

    def test_multi_return_values(self, interchange_cfg):
        assert interchange_cfg.execute({"src": 7, "dest": 9}).returns == (9, 7)

    def test_node_budget(self):
        # Guarded (non-constant) nested loops really do multiply blocks.
        body = "while (x < 200) bound 12 { " * 3 + "x = x + 1;" + " }" * 3
        with pytest.raises(BudgetError):
            build_dag(parse(f"func main(x) {{ {body} return x; }}"),
                      node_budget=500)

    def test_loop_condition_retested_per_copy(self):
        # Guarded-copy semantics: each unrolled copy re-tests the condition.
        prog = parse("""
            func main(x) {
                i = 0;
                while (i < 3) bound 5 { i = i + 1; }
                return i;
            }
        """)
        cfg = build_dag(prog)
        assert cfg.execute({"x": 0}).returns == (3,)

    def test_execute_traces_real_edges(self, modexp_cfg):
        # 4 set exponent bits: 4 two-edge multiply detours + 4 skip edges
        # + the final exit edge.
        res = modexp_cfg.execute({"base": 2, "exp": 0b10101010})
        assert sum(res.bits) == len(res.edge_ids) == 4 * 2 + 4 + 1

    def test_dot_dump(self, modexp_cfg):
        dot = modexp_cfg.to_dot()
        assert dot.startswith("digraph") and "->" in dot
