import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from scid import benchmarks
from scid.frontend import build_dag, parse
from scid.paths import PathOracle, extract_feasible_basis


@pytest.fixture(scope="session")
def modexp_cfg():
    return build_dag(parse(benchmarks.read_text("modexp.mc")))


@pytest.fixture(scope="session")
def modexp_oracle(modexp_cfg):
    return PathOracle(modexp_cfg)


@pytest.fixture(scope="session")
def modexp_basis(modexp_cfg, modexp_oracle):
    return extract_feasible_basis(modexp_cfg, oracle=modexp_oracle)


@pytest.fixture(scope="session")
def multiply45_cfg():
    return build_dag(parse(benchmarks.read_text("multiply45_obs.mc")))


@pytest.fixture(scope="session")
def interchange_cfg():
    return build_dag(parse(benchmarks.read_text("interchange_obs.mc")))
