"""Standalone invariant suites.

Each suite is usable on its own (plain functions over the public API) and
is also exercised by the acceptance gate: flow conservation of enumerated
paths, strict version-space shrinkage per synthesis iteration, guard
monotonicity per fixpoint pass, and learned-box equality with an
exhaustive scan for 1-D labelers.
"""

import json

from scid import benchmarks
from scid.benchmarks import transmission as tr
from scid.frontend import build_dag, parse
from scid.hybrid import Guard, SimConfig, learn_hyperbox, synthesize_switching
from scid.paths import PathVector, check_flow
from scid.synth import ComponentLibrary, count_consistent, ogis_loop

from oracles import exhaustive_positive_box


# ----------------------------------------------------------- suite helpers


def assert_flow_conservation(cfg):
    """Every enumerated source-to-sink path satisfies flow conservation."""
    count = 0
    for edge_ids in cfg.enumerate_paths():
        check_flow(cfg, PathVector.from_edges(cfg, edge_ids))
        count += 1
    return count


def assert_version_space_shrinks(lib, oracle, seed=0):
    """Consistent-program count strictly decreases per synthesis iteration."""
    sizes = []

    def observe(iteration, examples, prog):
        sizes.append(count_consistent(lib, examples))

    result = ogis_loop(lib, oracle, seed=seed, on_iteration=observe)
    assert result.status in ("ok", "unrealizable")
    assert all(a > b for a, b in zip(sizes, sizes[1:])), sizes
    return sizes


def assert_guard_monotonicity(mds, spec, guards, cfg):
    """Each pass's guards are subsets of the previous pass's guards."""
    history = []
    result = synthesize_switching(mds, spec, guards, cfg,
                                  on_pass=lambda k, g: history.append(g))
    assert result.status == "ok"
    for before, after in zip(history, history[1:]):
        for name in before:
            assert after[name].subset_of(before[name]), name
    return result


def assert_learned_box_matches_scan(labeler_1d, lo, hi, grid):
    """learn_hyperbox on a 1-D monotone labeler equals the exhaustive scan."""
    start = Guard.box(grid, [(lo, hi)])
    box, info = learn_hyperbox(lambda s: labeler_1d(s), start, anchor=(0.0,))
    scan = exhaustive_positive_box(labeler_1d, round(lo / grid),
                                   round(hi / grid), grid)
    if scan is None:
        assert box is None
    else:
        assert box is not None
        assert box.bounds[0] == scan, (box.bounds[0], scan)
    return box


# ------------------------------------------------------------------- tests


def test_flow_conservation_on_bundled_dags():
    for name in ("modexp.mc", "multiply45_obs.mc", "interchange_obs.mc"):
        cfg = build_dag(parse(benchmarks.read_text(name)))
        assert assert_flow_conservation(cfg) == cfg.path_count()


def test_version_space_strict_shrinkage():
    lib = ComponentLibrary.from_json(json.dumps(
        {"width": 2, "inputs": 2, "outputs": 1, "components": ["xor", "and"]}))
    sizes = assert_version_space_shrinks(
        lib, lambda inputs: (inputs[0] ^ inputs[1],), seed=3)
    assert len(sizes) >= 1


def test_guard_monotonicity_per_pass():
    mds, spec, guards = tr.build(grid=0.1)
    cfg = SimConfig(step=0.01, horizon=200.0, dwell=0.0, grid=0.1)
    assert_guard_monotonicity(mds, spec, guards, cfg)


def test_learned_box_equals_exhaustive_scan():
    cases = [
        lambda s: "POSITIVE" if 1.00 <= s[0] <= 2.00 else "NEGATIVE",
        lambda s: "POSITIVE" if s[0] <= 2.5 else "NEGATIVE",
        lambda s: "POSITIVE" if s[0] >= 0.07 else "NEGATIVE",
        lambda s: "POSITIVE",
        lambda s: "NEGATIVE",
        lambda s: "POSITIVE" if abs(s[0] - 1.5) < 0.005 else "NEGATIVE",
    ]
    for labeler in cases:
        assert_learned_box_matches_scan(labeler, 0.0, 3.0, 0.01)
