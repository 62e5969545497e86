"""Feasible basis paths over a control-flow DAG.

A path is a 0/1 edge-incidence vector. The basis machinery works over
exact rationals (the vectors are 0/1, so there is nothing to round), and
every feasibility question is one solver query on the path's
static-single-assignment formula.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import solver
from .solver import terms as T
from .frontend.cfg import Cfg


class FlowError(ValueError):
    """Vector does not describe one connected source-to-sink path."""


class ExtractionFailure(RuntimeError):
    """No spanning set of feasible basis paths within the candidate budget."""

    def __init__(self, message, uncovered_edge=None):
        super().__init__(message)
        self.uncovered_edge = uncovered_edge


@dataclass(frozen=True)
class PathVector:
    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise FlowError("path vector entries must be 0/1")

    @staticmethod
    def from_edges(cfg: Cfg, edge_ids) -> "PathVector":
        return PathVector(cfg.path_bits(edge_ids))

    def edge_ids(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bits) if b)

    def __len__(self):
        return len(self.bits)


def check_flow(cfg: Cfg, pv: PathVector) -> list[int]:
    """Verify flow conservation; returns the edge ids in traversal order."""
    if len(pv.bits) != cfg.n_edges:
        raise FlowError(f"vector length {len(pv.bits)} != edge count {cfg.n_edges}")
    selected = set(pv.edge_ids())
    order = []
    block = cfg.source
    visited = set()
    while block != cfg.sink:
        if block in visited:
            raise FlowError("selected edges revisit a block")
        visited.add(block)
        outs = [e.idx for e in cfg.out_edges(block) if e.idx in selected]
        if len(outs) != 1:
            raise FlowError(f"block {block} has {len(outs)} selected out-edges")
        order.append(outs[0])
        block = cfg.edges[outs[0]].dst
    if set(order) != selected:
        raise FlowError("selected edges are not one connected path")
    for b in range(cfg.n_blocks):
        ins = sum(1 for e in cfg.in_edges(b) if e.idx in selected)
        outs = sum(1 for e in cfg.out_edges(b) if e.idx in selected)
        if b == cfg.source:
            ok = ins == 0 and outs == 1
        elif b == cfg.sink:
            ok = ins == 1 and outs == 0
        else:
            ok = ins == outs and ins in (0, 1)
        if not ok:
            raise FlowError(f"flow conservation violated at block {b}")
    return order


# ----------------------------------------------------------- linear algebra


class RowSpace:
    """Incremental row space over the rationals (Gaussian elimination)."""

    def __init__(self, ncols: int):
        self.ncols = ncols
        self.rows: list[list[Fraction]] = []  # echelon rows
        self.pivots: list[int] = []

    def _reduce(self, vec) -> list[Fraction]:
        v = [Fraction(x) for x in vec]
        for row, p in zip(self.rows, self.pivots):
            if v[p]:
                factor = v[p] / row[p]
                for j in range(p, self.ncols):
                    v[j] -= factor * row[j]
        return v

    def contains(self, vec) -> bool:
        return not any(self._reduce(vec))

    def add(self, vec) -> bool:
        """Insert ``vec``; True iff it increased the rank."""
        v = self._reduce(vec)
        for j in range(self.ncols):
            if v[j]:
                self.rows.append(v)
                self.pivots.append(j)
                return True
        return False

    @property
    def rank(self) -> int:
        return len(self.rows)


def rank_of(vectors, ncols) -> int:
    space = RowSpace(ncols)
    for v in vectors:
        space.add(v)
    return space.rank


# -------------------------------------------------------------- feasibility


def path_to_formula(cfg: Cfg, pv: PathVector) -> T.Formula:
    """SSA composition of the path's edge conditions and block assignments.

    Satisfiable iff some input drives execution down exactly this path.
    """
    order = check_flow(cfg, pv)
    env = {p: T.var(p, cfg.width) for p in cfg.params}
    assertions = []

    def subst(term):
        if term.kind == "var":
            if term.name not in env:
                raise FlowError(f"variable {term.name!r} read before assignment")
            return env[term.name]
        if not term.children:
            return term
        return T.BitVecTerm(term.kind, term.width,
                            tuple(subst(c) for c in term.children),
                            term.name, term.value)

    def run_block(idx):
        for name, term in cfg.blocks[idx].assigns:
            env[name] = subst(term)

    run_block(cfg.source)
    for eid in order:
        edge = cfg.edges[eid]
        if edge.cond is not None:
            assertions.append(subst(edge.cond))
        run_block(edge.dst)
    return T.Formula(tuple(assertions))


class PathOracle:
    """Cached feasibility queries for one Cfg."""

    def __init__(self, cfg: Cfg, seed: int = 0, conflict_limit: int = 2_000_000,
                 dump_cnf: str | None = None):
        self.cfg = cfg
        self.seed = seed
        self.conflict_limit = conflict_limit
        self._dump_cnf = dump_cnf  # first query only
        self._cache: dict[tuple[int, ...], dict | None] = {}
        self.queries = 0

    def model(self, pv: PathVector) -> dict | None:
        key = pv.bits
        if key not in self._cache:
            self.queries += 1
            formula = path_to_formula(self.cfg, pv)
            self._cache[key] = solver.solve(
                formula, seed=self.seed, conflict_limit=self.conflict_limit,
                dump_cnf=self._dump_cnf)
            self._dump_cnf = None
        return self._cache[key]

    def feasible(self, pv: PathVector) -> bool:
        return self.model(pv) is not None

    def test_for(self, pv: PathVector) -> dict | None:
        """Project a satisfying model onto the program inputs."""
        m = self.model(pv)
        if m is None:
            return None
        return {p: m.get(p, 0) for p in self.cfg.params}


# ------------------------------------------------------------------- basis


@dataclass(frozen=True)
class BasisSet:
    paths: tuple[PathVector, ...]
    tests: tuple[dict, ...]

    @property
    def size(self) -> int:
        return len(self.paths)

    @property
    def matrix(self) -> tuple[tuple[int, ...], ...]:
        return tuple(p.bits for p in self.paths)

    def __post_init__(self):
        ncols = len(self.paths[0].bits) if self.paths else 0
        if rank_of(self.matrix, ncols) != len(self.paths):
            raise ValueError("basis rows are not linearly independent")


def extract_feasible_basis(
    cfg: Cfg,
    *,
    oracle: PathOracle | None = None,
    candidate_budget: int = 65536,
) -> BasisSet:
    """Grow a feasible basis greedily over DFS-ordered candidate paths.

    A candidate joins the basis iff it raises the rank and its path formula
    is satisfiable. If the full-rank sweep stalls below the rank of the
    whole path space, fall back to ranking the feasible paths alone, which
    by construction spans them; the stored tests come from the solver
    models and each is replayed through the DAG before being returned.
    """
    if oracle is None:
        oracle = PathOracle(cfg)
    m = cfg.n_edges
    all_paths = []
    for edge_ids in cfg.enumerate_paths(limit=candidate_budget):
        all_paths.append(PathVector.from_edges(cfg, edge_ids))

    full = RowSpace(m)
    for pv in all_paths:
        full.add(pv.bits)
    target_rank = full.rank

    picked: list[PathVector] = []
    chosen = RowSpace(m)
    explored = RowSpace(m)  # rank over basis + infeasible pivots
    deferred_pivot = None
    for pv in all_paths:
        if chosen.rank == target_rank:
            break
        if explored.contains(pv.bits):
            continue
        if oracle.feasible(pv):
            chosen.add(pv.bits)
            explored.add(pv.bits)
            picked.append(pv)
        else:
            explored.add(pv.bits)
            deferred_pivot = explored.pivots[-1]

    if chosen.rank < target_rank:
        # Some direction is reachable only through infeasible candidates;
        # re-rank over the feasible paths alone.
        chosen = RowSpace(m)
        picked = []
        feas_rank = RowSpace(m)
        for pv in all_paths:
            if not oracle.feasible(pv):
                continue
            feas_rank.add(pv.bits)
            if chosen.add(pv.bits):
                picked.append(pv)
        if not picked:
            raise ExtractionFailure("no feasible path exists", deferred_pivot)
        assert chosen.rank == feas_rank.rank

    tests = []
    for pv in picked:
        test = oracle.test_for(pv)
        assert test is not None
        replay = cfg.execute(test)
        if replay.bits != pv.bits:
            raise ExtractionFailure(
                f"stored test does not replay its basis path (edges {pv.edge_ids()})")
        tests.append(test)
    return BasisSet(tuple(picked), tuple(tests))


def express_in_basis(basis: BasisSet, pv: PathVector):
    """Exact rational coordinates of ``pv`` in the basis, or None if it
    lies outside the span."""
    rows = basis.matrix
    b = len(rows)
    if b == 0:
        return None
    m = len(rows[0])
    if len(pv.bits) != m:
        raise ValueError("dimension mismatch")
    # Echelon rows augmented with the combination that produced them.
    reduced: list[tuple[list[Fraction], list[Fraction], int]] = []
    for i, row in enumerate(rows):
        v = [Fraction(x) for x in row]
        combo = [Fraction(0)] * b
        combo[i] = Fraction(1)
        for rv, rc, p in reduced:
            if v[p]:
                f = v[p] / rv[p]
                for j in range(m):
                    v[j] -= f * rv[j]
                for j in range(b):
                    combo[j] -= f * rc[j]
        pivot = next(j for j in range(m) if v[j])
        reduced.append((v, combo, pivot))

    target = [Fraction(x) for x in pv.bits]
    coeffs = [Fraction(0)] * b
    for rv, rc, p in reduced:
        if target[p]:
            f = target[p] / rv[p]
            for j in range(m):
                target[j] -= f * rv[j]
            for j in range(b):
                coeffs[j] += f * rc[j]
    if any(target):
        return None
    return tuple(coeffs)
