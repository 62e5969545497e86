"""Switching-logic synthesis for multi-modal ODE systems.

Guards on mode transitions are hyperboxes with endpoints on a fixed grid.
A numerical simulator (classical fixed-step RK4) answers the one question
the learner needs: entering mode ``m`` at state ``s``, does the trajectory
stay safe until some exit guard is reached? Positive/negative labels feed
a per-dimension binary search that shrinks each entry guard to the box of
safe switching states, inside a fixpoint loop that repeats whole passes
over the transitions until nothing changes.

Guard endpoints are stored as integer grid indices, and states are
rounded to the grid before any membership test (the finite precision of
recorded values is part of the structure hypothesis).
"""

from __future__ import annotations

import ast
import logging
import math
from dataclasses import dataclass, field

from . import framework

log = logging.getLogger(__name__)

HYPERBOX_HYPOTHESIS = framework.StructureHypothesisDescriptor(
    name="transition guards are grid-aligned hyperboxes")

POSITIVE = "POSITIVE"
NEGATIVE = "NEGATIVE"


class HybridError(RuntimeError):
    pass


class LabelBudgetError(HybridError):
    def __init__(self, message, partial_box=None):
        super().__init__(message)
        self.partial_box = partial_box


# ------------------------------------------------------------- expressions

_ALLOWED_CALLS = {"exp", "sqrt", "abs", "min", "max", "sin", "cos", "log"}
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.BoolOp, ast.Compare,
    ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
    ast.And, ast.Or, ast.Not,
    ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq,
)

_EXPR_GLOBALS = {
    "exp": math.exp, "sqrt": math.sqrt, "abs": abs,
    "min": min, "max": max, "sin": math.sin, "cos": math.cos,
    "log": math.log, "__builtins__": {},
}


def compile_expr(text: str, arg_names):
    """Compile an arithmetic/boolean expression into a fast callable."""
    tree = ast.parse(text, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise HybridError(f"disallowed syntax {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_CALLS:
                raise HybridError(f"disallowed call in {text!r}")
        if isinstance(node, ast.Name):
            if node.id not in arg_names and node.id not in _ALLOWED_CALLS:
                raise HybridError(f"unknown name {node.id!r} in {text!r}")
    src = f"lambda {', '.join(arg_names)}: ({text})"
    return eval(compile(src, "<mds-expr>", "eval"), dict(_EXPR_GLOBALS))


# ------------------------------------------------------------------- model


@dataclass(frozen=True)
class Mode:
    name: str
    field_fn: object  # callable(*state) -> tuple of derivatives
    outputs: dict = field(default_factory=dict)  # name -> callable(*state)

    def output_values(self, state) -> dict:
        return {k: f(*state) for k, f in self.outputs.items()}


@dataclass(frozen=True)
class Transition:
    name: str
    src: str
    dst: str


@dataclass(frozen=True)
class Mds:
    var_names: tuple[str, ...]
    modes: dict[str, Mode]
    transitions: tuple[Transition, ...]
    initial_mode: str
    initial_state: tuple[float, ...]

    def outgoing(self, mode_name: str) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.src == mode_name)

    @staticmethod
    def from_dict(data: dict) -> "Mds":
        names = tuple(data["variables"])
        modes = {}
        for mname, spec in data["modes"].items():
            derivs = [compile_expr(str(spec[v]), names) for v in names]

            def make_field(ds):
                return lambda *state: tuple(d(*state) for d in ds)

            outputs = {k: compile_expr(str(expr), names)
                       for k, expr in spec.get("outputs", {}).items()}
            modes[mname] = Mode(mname, make_field(derivs), outputs)
        transitions = tuple(
            Transition(t.get("name", f"{t['src']}>{t['dst']}"), t["src"], t["dst"])
            for t in data["transitions"])
        initial = tuple(float(data["initial"][v]) for v in names)
        return Mds(names, modes, transitions, data["initial_mode"], initial)


class SafetySpec:
    """Pointwise-decidable predicate over the state (and the active mode's
    output variables, e.g. an efficiency)."""

    def __init__(self, expr: str, var_names, output_names=()):
        self.expr = expr
        self._fn = compile_expr(expr, tuple(var_names) + tuple(output_names))
        self.output_names = tuple(output_names)

    def holds(self, mode: Mode, state) -> bool:
        outs = mode.output_values(state)
        args = tuple(state) + tuple(outs.get(n, 0.0) for n in self.output_names)
        return bool(self._fn(*args))


@dataclass(frozen=True)
class SimConfig:
    step: float = 0.01
    horizon: float = 200.0
    dwell: float = 0.0
    grid: float = 0.01

    def __post_init__(self):
        if self.step <= 0:
            raise HybridError("step size must be positive")
        if self.horizon <= self.dwell:
            raise HybridError("horizon must exceed the dwell time")


# ------------------------------------------------------------------- guards


def snap(value: float, grid: float) -> int:
    return round(value / grid)


@dataclass(frozen=True)
class Guard:
    """Per-variable interval constraints with grid-index endpoints.

    ``bounds[d]`` is None for an unconstrained dimension or a pair
    ``(lo_idx, hi_idx)`` of integer multiples of the grid step; a
    degenerate pair (lo == hi) is an equality constraint.
    """

    grid: float
    bounds: tuple

    def __post_init__(self):
        for b in self.bounds:
            if b is not None and b[0] > b[1]:
                raise HybridError(f"guard interval {b} has lo > hi")

    @staticmethod
    def box(grid: float, intervals) -> "Guard":
        bounds = []
        for iv in intervals:
            if iv is None:
                bounds.append(None)
            else:
                lo, hi = iv
                bounds.append((snap(lo, grid), snap(hi, grid)))
        return Guard(grid, tuple(bounds))

    def contains(self, state) -> bool:
        for x, b in zip(state, self.bounds):
            if b is None:
                continue
            idx = snap(x, self.grid)
            if not b[0] <= idx <= b[1]:
                return False
        return True

    def value(self, d: int, idx: int) -> float:
        return idx * self.grid

    def intervals(self):
        return tuple(None if b is None else (b[0] * self.grid, b[1] * self.grid)
                     for b in self.bounds)

    def subset_of(self, other: "Guard") -> bool:
        for mine, theirs in zip(self.bounds, other.bounds):
            if theirs is None:
                continue
            if mine is None:
                return False
            if mine[0] < theirs[0] or mine[1] > theirs[1]:
                return False
        return True

    def describe(self, var_names) -> str:
        parts = []
        for name, b in zip(var_names, self.bounds):
            if b is None:
                continue
            if b[0] == b[1]:
                parts.append(f"{name} = {b[0] * self.grid:g}")
            else:
                parts.append(f"{b[0] * self.grid:g} <= {name} <= {b[1] * self.grid:g}")
        return " and ".join(parts) if parts else "true"


# --------------------------------------------------------------- simulation


def rk4_step(field_fn, state, h):
    k1 = field_fn(*state)
    s2 = tuple(x + 0.5 * h * k for x, k in zip(state, k1))
    k2 = field_fn(*s2)
    s3 = tuple(x + 0.5 * h * k for x, k in zip(state, k2))
    k3 = field_fn(*s3)
    s4 = tuple(x + h * k for x, k in zip(state, k3))
    k4 = field_fn(*s4)
    return tuple(
        x + (h / 6.0) * (a + 2 * b + 2 * c + d)
        for x, a, b, c, d in zip(state, k1, k2, k3, k4))


@dataclass(frozen=True)
class SimOutcome:
    kind: str  # "SAFE_EXIT" | "UNSAFE" | "NO_EXIT"
    state: tuple
    transition: Transition | None = None
    t: float = 0.0
    tag: str | None = None  # "NUMERIC" on overflow / non-finite states


def simulate_mode(mds: Mds, mode_name: str, entry_state, exit_guards,
                  spec: SafetySpec, cfg: SimConfig) -> SimOutcome:
    """Integrate one mode from ``entry_state`` until an exit guard is hit.

    Samples at every step: a safety violation wins over an exit, exits are
    disabled before the dwell time, and the first exit guard (in the given
    order) containing the grid-rounded state fires.
    """
    mode = mds.modes[mode_name]
    field_fn = mode.field_fn
    h = cfg.step
    steps = int(round(cfg.horizon / h))
    dwell_steps = int(math.ceil(cfg.dwell / h - 1e-9))
    state = tuple(float(x) for x in entry_state)
    for k in range(steps + 1):
        if not all(math.isfinite(x) for x in state):
            return SimOutcome("UNSAFE", state, t=k * h, tag="NUMERIC")
        if not spec.holds(mode, state):
            return SimOutcome("UNSAFE", state, t=k * h)
        if k >= dwell_steps:
            for trans, guard in exit_guards:
                if guard.contains(state):
                    return SimOutcome("SAFE_EXIT", state, trans, t=k * h)
        if k == steps:
            break
        state = rk4_step(field_fn, state, h)
    return SimOutcome("NO_EXIT", state, t=cfg.horizon)


def label_state(mds, mode_name, state, exit_guards, spec, cfg) -> str:
    """POSITIVE iff the mode can be entered at ``state`` and safely left."""
    outcome = simulate_mode(mds, mode_name, state, exit_guards, spec, cfg)
    if outcome.tag == "NUMERIC":
        log.warning("numeric blow-up labeling %s at %s; treated NEGATIVE",
                    mode_name, state)
    return POSITIVE if outcome.kind == "SAFE_EXIT" else NEGATIVE


# ----------------------------------------------------------------- learning


@dataclass
class LearnInfo:
    queries: int = 0
    non_monotone: bool = False
    empty: bool = False


_DYADIC_DEPTH = 12


def _dyadic_fractions():
    yield 0.0
    yield 1.0
    for depth in range(1, _DYADIC_DEPTH + 1):
        step = 1 << depth
        for num in range(1, step, 2):
            yield num / step


def learn_hyperbox(labeler, start: Guard, *, anchor=None,
                   budget: int = 20000) -> tuple[Guard | None, LearnInfo]:
    """Shrink ``start`` to the box of POSITIVE grid points by per-dimension
    binary search (lower corner then upper corner, other coordinates held
    at the current box's opposite corner).

    Degenerate and unconstrained dimensions are not searched; anchor values
    stand in for unconstrained coordinates when probing. Returns
    (None, info) when no probed grid point labels POSITIVE. Non-monotone
    label sequences along a search line are detected and flagged, not
    repaired.
    """
    info = LearnInfo()
    cache: dict[tuple, str] = {}

    n = len(start.bounds)
    if anchor is None:
        anchor = (0.0,) * n

    def probe(point):
        if point in cache:
            return cache[point]
        if info.queries >= budget:
            raise LabelBudgetError(
                f"label budget {budget} exhausted", partial_box=Guard(start.grid, tuple(bounds)))
        info.queries += 1
        result = labeler(point)
        cache[point] = result
        return result

    bounds = list(start.bounds)
    search_dims = [d for d, b in enumerate(bounds) if b is not None and b[0] < b[1]]

    if not search_dims:
        corner = tuple(anchor[d] if bounds[d] is None else bounds[d][0] * start.grid
                       for d in range(n))
        if probe(corner) == POSITIVE:
            return Guard(start.grid, tuple(bounds)), info
        info.empty = True
        return None, info

    def diagonal_point(frac):
        coords = []
        for e in range(n):
            if bounds[e] is None:
                coords.append(anchor[e])
            else:
                lo_e, hi_e = bounds[e]
                coords.append((lo_e + round(frac * (hi_e - lo_e))) * start.grid)
        return tuple(coords)

    # A known-positive point: probe the box diagonal at dyadic fractions.
    positive_anchor = None
    longest = max(bounds[d][1] - bounds[d][0] for d in search_dims)
    seen_fracs = set()
    for frac in _dyadic_fractions():
        key = round(frac * longest)
        if key in seen_fracs:
            continue
        seen_fracs.add(key)
        point = diagonal_point(frac)
        if probe(point) == POSITIVE:
            positive_anchor = point
            break
        if len(seen_fracs) > longest:
            break
    if positive_anchor is None:
        info.empty = True
        return None, info

    def line_point(d, idx, at_upper, hold):
        """Dim d at idx; others at the current box corner (hold='corner',
        upper or lower side) or at the positive anchor (hold='anchor')."""
        coords = []
        for e in range(n):
            if e == d:
                coords.append(idx * start.grid)
            elif bounds[e] is None:
                coords.append(anchor[e])
            elif hold == "anchor":
                coords.append(positive_anchor[e])
            else:
                lo_e, hi_e = bounds[e]
                coords.append((hi_e if at_upper else lo_e) * start.grid)
        return tuple(coords)

    def audit_monotone(series):
        run = [lab for _, lab in sorted(series.items())]
        pos_idx = [i for i, lab in enumerate(run) if lab == POSITIVE]
        if pos_idx and NEGATIVE in run[pos_idx[0]:pos_idx[-1] + 1]:
            info.non_monotone = True

    anchor_idx = {d: snap(positive_anchor[d], start.grid) for d in search_dims}

    for d in search_dims:
        lo, hi = bounds[d]

        def search_boundary(at_upper, want_low):
            """Boundary of the positive run along dim d, holding the other
            coordinates at the opposite corner (falling back to the anchor
            point when the corner slice has no positive labels)."""
            series: dict[int, str] = {}

            def labeled(idx, hold):
                r = probe(line_point(d, idx, at_upper, hold))
                series[idx] = r
                return r == POSITIVE

            hold = "corner"
            seed = None
            for candidate in (anchor_idx[d], lo if want_low else hi):
                if labeled(candidate, hold):
                    seed = candidate
                    break
            if seed is None:
                tried = set()
                for frac in _dyadic_fractions():
                    idx = lo + round(frac * (hi - lo))
                    if idx in tried:
                        continue
                    tried.add(idx)
                    if labeled(idx, hold):
                        seed = idx
                        break
                    if len(tried) > hi - lo:
                        break
            if seed is None:
                # Corner slice sees no positives although the box has some:
                # the corner-hold assumption (monotone labels) failed.
                info.non_monotone = True
                hold = "anchor"
                series.clear()
                seed = anchor_idx[d]
                if not labeled(seed, hold):
                    return None, series
            edge = lo if want_low else hi
            if series.get(edge) is None:
                labeled(edge, hold)
            if series.get(edge) == POSITIVE:
                return edge, series
            a, b = (edge, seed) if want_low else (seed, edge)
            # invariant: exactly one endpoint of (a, b) labels POSITIVE
            while b - a > 1:
                mid = (a + b) // 2
                pos = labeled(mid, hold)
                if pos == want_low:
                    b = mid
                else:
                    a = mid
            return (b if want_low else a), series

        lower, series_lo = search_boundary(at_upper=True, want_low=True)
        if lower is None:
            info.empty = True
            return None, info
        bounds[d] = (lower, hi)
        upper, series_hi = search_boundary(at_upper=False, want_low=False)
        if upper is None or upper < lower:
            info.empty = True
            return None, info
        bounds[d] = (lower, upper)
        audit_monotone(series_lo)
        audit_monotone(series_hi)
        if not (bounds[d][0] <= anchor_idx[d] <= bounds[d][1]):
            info.non_monotone = True

    # Interior audit: a handful of diagonal probes inside the learned box;
    # any NEGATIVE shows the positive region was not a box.
    for frac in (0.5, 0.25, 0.75, 0.125, 0.875):
        coords = []
        for e in range(n):
            if bounds[e] is None:
                coords.append(anchor[e])
            else:
                lo_e, hi_e = bounds[e]
                coords.append((lo_e + round(frac * (hi_e - lo_e))) * start.grid)
        if probe(tuple(coords)) == NEGATIVE:
            info.non_monotone = True
            break

    # Corner contract: both corners POSITIVE, outward neighbours NEGATIVE
    # (or clipped at the start box).
    lower_corner = tuple(
        anchor[e] if bounds[e] is None else bounds[e][0] * start.grid
        for e in range(n))
    upper_corner = tuple(
        anchor[e] if bounds[e] is None else bounds[e][1] * start.grid
        for e in range(n))
    if probe(lower_corner) != POSITIVE or probe(upper_corner) != POSITIVE:
        info.non_monotone = True
    for d in search_dims:
        lo0, hi0 = start.bounds[d]
        lo, hi = bounds[d]
        if lo - 1 >= lo0:
            neighbour = list(lower_corner)
            neighbour[d] = (lo - 1) * start.grid
            if probe(tuple(neighbour)) == POSITIVE:
                info.non_monotone = True
        if hi + 1 <= hi0:
            neighbour = list(upper_corner)
            neighbour[d] = (hi + 1) * start.grid
            if probe(tuple(neighbour)) == POSITIVE:
                info.non_monotone = True

    return Guard(start.grid, tuple(bounds)), info


# ----------------------------------------------------------------- fixpoint


@dataclass
class SwitchResult:
    status: str  # "ok" | "empty_guard" | "pass_budget"
    guards: dict
    passes: int
    label_queries: int
    non_monotone: tuple[str, ...]
    failed_transition: str | None
    audit: framework.AuditRecord | None


def synthesize_switching(mds: Mds, spec: SafetySpec, initial_guards: dict,
                         cfg: SimConfig, *, max_passes: int = 40,
                         label_budget: int = 200_000,
                         audit_log=None,
                         on_pass=None) -> SwitchResult:
    """Shrink every entry guard to its safe switching box, repeating whole
    passes over the transitions (declaration order) to a fixpoint.

    ``initial_guards`` maps transition name -> overapproximate Guard. The
    labeler for a transition into mode ``m`` uses the *current* guards on
    ``m``'s outgoing transitions as exits, so shrinking propagates
    backwards until a full pass changes nothing. ``on_pass`` (test hook)
    observes (pass number, guards dict) after each pass.
    """
    guards = dict(initial_guards)
    for t in mds.transitions:
        if t.name not in guards:
            raise HybridError(f"missing initial guard for transition {t.name}")

    label_cache: dict = {}
    total_queries = 0
    non_monotone: set[str] = set()
    passes = 0
    failed = None
    status = "pass_budget"

    while passes < max_passes:
        passes += 1
        changed = False
        for t in mds.transitions:
            exits = tuple((x, guards[x.name]) for x in mds.outgoing(t.dst))
            exits_sig = (t.dst, tuple((x.name, g.bounds) for x, g in exits))

            def labeler(state, _exits=exits, _dst=t.dst, _sig=exits_sig):
                key = (_sig, state)
                if key not in label_cache:
                    label_cache[key] = label_state(mds, _dst, state, _exits, spec, cfg)
                return label_cache[key]

            box, learn_info = learn_hyperbox(
                labeler, guards[t.name], anchor=mds.initial_state,
                budget=label_budget)
            total_queries += learn_info.queries
            if learn_info.non_monotone:
                non_monotone.add(t.name)
            if box is None:
                failed = t.name
                status = "empty_guard"
                break
            assert box.subset_of(guards[t.name]), \
                f"guard {t.name} grew during a pass"
            if box.bounds != guards[t.name].bounds:
                changed = True
                guards[t.name] = box
        if failed:
            break
        if on_pass is not None:
            on_pass(passes, dict(guards))
        if not changed:
            status = "ok"
            break

    outcome = framework.SOUND_RESULT if status == "ok" and not non_monotone \
        else framework.UNKNOWN
    audit = framework.record_audit(
        HYPERBOX_HYPOTHESIS,
        framework.ASSUMED,
        outcome,
        waiver=True,  # simulator assumed ideal; monotonicity assumed
        details={
            "simulator": "fixed-step RK4, assumed ideal",
            "non_monotone_transitions": sorted(non_monotone),
            "passes": passes,
        },
        log=audit_log,
    )
    return SwitchResult(status, guards, passes, total_queries,
                        tuple(sorted(non_monotone)), failed, audit)


# -------------------------------------------------------------- closed loop


@dataclass
class Trace:
    columns: tuple[str, ...]
    rows: list

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


@dataclass
class LoopVerdict:
    safe: bool
    goal_reached: bool
    final_state: tuple
    final_mode: str
    t_end: float
    switches: list
    stuck: bool = False
    reason: str = ""


def closed_loop_simulate(mds: Mds, guards: dict, start_state, policy,
                         cfg: SimConfig, *, spec: SafetySpec | None = None,
                         goal=None,
                         start_mode: str | None = None) -> tuple[Trace, LoopVerdict]:
    """Replay the synthesized hybrid system under a switching policy.

    ``policy(mode_name, state, t, enabled)`` returns one of the enabled
    transitions (guard satisfied by the grid-rounded state, dwell time
    elapsed) or None to stay. Switches are instantaneous (time does not
    advance), capped at 4 per sample to exclude chattering loops. The
    verdict reports whether the safety predicate held at every sample and
    whether the goal predicate was reached.
    """
    mode_name = start_mode or mds.initial_mode
    state = tuple(float(x) for x in start_state)
    h = cfg.step
    steps = int(round(cfg.horizon / h))
    dwell_steps = int(math.ceil(cfg.dwell / h - 1e-9))
    steps_in_mode = 0
    output_names = sorted({k for m in mds.modes.values() for k in m.outputs})
    columns = ("t",) + mds.var_names + tuple(output_names) + ("mode",)
    rows = []
    switches = []
    safe = True
    goal_reached = False
    reason = "horizon"

    k = 0
    switches_at_sample = 0
    while True:
        t = k * h
        mode = mds.modes[mode_name]
        outs = mode.output_values(state)
        rows.append((t,) + state + tuple(outs.get(nm, float("nan"))
                                         for nm in output_names) + (mode_name,))
        if not all(math.isfinite(x) for x in state):
            safe = False
            reason = "numeric blow-up"
            break
        if spec is not None and not spec.holds(mode, state):
            safe = False
            reason = "safety violated"
            break
        if goal is not None and goal(mode_name, state, t):
            goal_reached = True
            reason = "goal"
            break
        if k == steps:
            break
        choice = None
        if switches_at_sample < 4:
            enabled = [tr for tr in mds.outgoing(mode_name)
                       if steps_in_mode >= dwell_steps
                       and guards[tr.name].contains(state)]
            choice = policy(mode_name, state, t, enabled)
        if choice is not None:
            if choice.name not in {tr.name for tr in enabled}:
                raise HybridError(
                    f"policy chose disabled transition {choice.name} at t={t}")
            switches.append((t, choice.name, state))
            mode_name = choice.dst
            steps_in_mode = 0
            switches_at_sample += 1
            continue  # switches are instantaneous; re-sample the new mode
        state = rk4_step(mds.modes[mode_name].field_fn, state, h)
        k += 1
        steps_in_mode += 1
        switches_at_sample = 0

    verdict = LoopVerdict(
        safe=safe,
        goal_reached=goal_reached,
        final_state=state,
        final_mode=mode_name,
        t_end=rows[-1][0] if rows else 0.0,
        switches=switches,
        stuck=not goal_reached and goal is not None,
        reason=reason,
    )
    return Trace(columns, rows), verdict
