"""Oracle-guided synthesis of loop-free bit-vector programs.

The candidate space is every well-formed straight-line composition of a
finite component library (each listed component used exactly once; reuse
is expressed by listing a component twice). Synthesis alternates two
solver queries: find a program consistent with all input/output examples
seen so far, then find a second consistent program together with an input
on which the two disagree. When no distinguishing input exists the
surviving program is semantically unique over the library and is
returned.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import framework, solver
from .solver import terms as T
from .seeds import substream

COMPONENT_HYPOTHESIS = framework.StructureHypothesisDescriptor(
    name="loop-free composition of the declared component library")


class SynthError(RuntimeError):
    pass


class UncheckableError(SynthError):
    """Equivalence domain too large for the exhaustive check."""


# ------------------------------------------------------------------ library


@dataclass(frozen=True)
class Component:
    name: str
    arity: int
    width: int

    def term(self, args: tuple[T.BitVecTerm, ...]) -> T.BitVecTerm:
        w = self.width
        n = self.name
        if n == "xor":
            return T.xor(*args)
        if n == "and":
            return T.and_(*args)
        if n == "or":
            return T.or_(*args)
        if n == "add":
            return T.add(*args)
        if n == "sub":
            return T.sub(*args)
        if n == "not":
            return T.not_(args[0])
        if n == "wire":
            return args[0]
        if n == "ite":
            return T.ite(T.ne(args[0], T.const(0, w)), args[1], args[2])
        m = re.fullmatch(r"shl(\d+)", n)
        if m:
            return T.shl(args[0], int(m.group(1)))
        m = re.fullmatch(r"lshr(\d+)", n)
        if m:
            return T.lshr(args[0], int(m.group(1)))
        m = re.fullmatch(r"const(\d+)", n)
        if m:
            return T.const(int(m.group(1)), w)
        raise SynthError(f"unknown component {n!r}")

    def apply(self, args: tuple[int, ...]) -> int:
        mask = (1 << self.width) - 1
        n = self.name
        if n == "xor":
            return args[0] ^ args[1]
        if n == "and":
            return args[0] & args[1]
        if n == "or":
            return args[0] | args[1]
        if n == "add":
            return (args[0] + args[1]) & mask
        if n == "sub":
            return (args[0] - args[1]) & mask
        if n == "not":
            return (~args[0]) & mask
        if n == "wire":
            return args[0]
        if n == "ite":
            return args[1] if args[0] != 0 else args[2]
        m = re.fullmatch(r"shl(\d+)", n)
        if m:
            return (args[0] << int(m.group(1))) & mask
        m = re.fullmatch(r"lshr(\d+)", n)
        if m:
            return args[0] >> int(m.group(1))
        m = re.fullmatch(r"const(\d+)", n)
        if m:
            return int(m.group(1)) & mask
        raise SynthError(f"unknown component {n!r}")

    def apply_np(self, args):
        mask = np.uint64((1 << self.width) - 1)
        n = self.name
        if n == "xor":
            return args[0] ^ args[1]
        if n == "and":
            return args[0] & args[1]
        if n == "or":
            return args[0] | args[1]
        if n == "add":
            return (args[0] + args[1]) & mask
        if n == "sub":
            return (args[0] - args[1]) & mask
        if n == "not":
            return (~args[0]) & mask
        if n == "wire":
            return args[0]
        if n == "ite":
            return np.where(args[0] != 0, args[1], args[2])
        m = re.fullmatch(r"shl(\d+)", n)
        if m:
            return (args[0] << np.uint64(int(m.group(1)))) & mask
        m = re.fullmatch(r"lshr(\d+)", n)
        if m:
            return args[0] >> np.uint64(int(m.group(1)))
        m = re.fullmatch(r"const(\d+)", n)
        if m:
            return np.uint64(int(m.group(1)) & int(mask))


_ARITIES = {"xor": 2, "and": 2, "or": 2, "add": 2, "sub": 2,
            "not": 1, "wire": 1, "ite": 3}


def make_component(name: str, width: int) -> Component:
    if name in _ARITIES:
        return Component(name, _ARITIES[name], width)
    if re.fullmatch(r"(shl|lshr)(\d+)", name):
        amount = int(re.fullmatch(r"(shl|lshr)(\d+)", name).group(2))
        if not 0 <= amount < width:
            raise SynthError(f"{name}: shift amount out of [0, {width})")
        return Component(name, 1, width)
    m = re.fullmatch(r"const(\d+)", name)
    if m:
        if int(m.group(1)) >= (1 << width):
            raise SynthError(f"{name}: constant does not fit in {width} bits")
        return Component(name, 0, width)
    raise SynthError(f"unknown component {name!r}")


@dataclass(frozen=True)
class ComponentLibrary:
    components: tuple[Component, ...]
    n_inputs: int
    n_outputs: int
    width: int

    def __post_init__(self):
        if not self.components:
            raise SynthError("component library is empty")
        if any(c.width != self.width for c in self.components):
            raise SynthError("library width must be uniform")
        if self.n_inputs < 1 or self.n_outputs < 1:
            raise SynthError("need at least one input and one output")

    @property
    def n_locations(self) -> int:
        return self.n_inputs + len(self.components)

    @staticmethod
    def from_json(path_or_text) -> "ComponentLibrary":
        if isinstance(path_or_text, str) and path_or_text.lstrip().startswith("{"):
            data = json.loads(path_or_text)
        else:
            with open(path_or_text) as fh:
                data = json.load(fh)
        width = data["width"]
        return ComponentLibrary(
            components=tuple(make_component(n, width) for n in data["components"]),
            n_inputs=data["inputs"],
            n_outputs=data.get("outputs", 1),
            width=width,
        )


# ----------------------------------------------------------------- programs


@dataclass(frozen=True)
class ProgramCandidate:
    """Straight-line program: line ``l`` computes component ``lines[l][0]``
    from operand locations (< inputs means a program input, otherwise
    line ``loc - inputs``)."""

    lines: tuple[tuple[int, tuple[int, ...]], ...]
    out_locs: tuple[int, ...]
    n_inputs: int

    def __post_init__(self):
        for l, (_, operands) in enumerate(self.lines):
            for loc in operands:
                if not 0 <= loc < self.n_inputs + l:
                    raise SynthError(f"line {l}: operand {loc} not earlier")
        for loc in self.out_locs:
            if not 0 <= loc < self.n_inputs + len(self.lines):
                raise SynthError(f"output location {loc} out of range")

    def pretty(self, lib: ComponentLibrary) -> str:
        def loc_name(loc):
            return f"x{loc}" if loc < self.n_inputs else f"t{loc - self.n_inputs}"

        rows = []
        for l, (ci, operands) in enumerate(self.lines):
            comp = lib.components[ci]
            args = ", ".join(loc_name(o) for o in operands)
            rows.append(f"t{l} = {comp.name}({args})")
        outs = ", ".join(loc_name(o) for o in self.out_locs)
        rows.append(f"return {outs}")
        return "\n".join(rows)


def interpret(lib: ComponentLibrary, prog: ProgramCandidate, inputs) -> tuple:
    """Reference semantics: sequential line evaluation."""
    if len(inputs) != lib.n_inputs:
        raise SynthError(f"expected {lib.n_inputs} inputs")
    mask = (1 << lib.width) - 1
    values = [v & mask for v in inputs]
    for ci, operands in prog.lines:
        comp = lib.components[ci]
        values.append(comp.apply(tuple(values[o] for o in operands)))
    return tuple(values[o] for o in prog.out_locs)


def interpret_table(lib: ComponentLibrary, prog: ProgramCandidate) -> np.ndarray:
    """Outputs over every input combination, vectorized.

    Row r holds the outputs on the input tuple encoded by r (input i in
    bits [i*width, (i+1)*width)). Shape (2**(n*w), n_outputs).
    """
    w, n = lib.width, lib.n_inputs
    total = n * w
    if total > 24:
        raise UncheckableError(f"{total} input bits is too many to tabulate")
    count = 1 << total
    r = np.arange(count, dtype=np.uint64)
    mask = np.uint64((1 << w) - 1)
    values = [(r >> np.uint64(i * w)) & mask for i in range(n)]
    with np.errstate(over="ignore"):  # wraparound is the intended semantics
        for ci, operands in prog.lines:
            comp = lib.components[ci]
            args = [values[o] for o in operands]
            out = comp.apply_np(args)
            if np.isscalar(out) or out.ndim == 0:
                out = np.full(count, out, dtype=np.uint64)
            values.append(out)
    return np.stack([values[o] for o in prog.out_locs], axis=1)


def enumerate_programs(lib: ComponentLibrary, limit: int = 1_000_000):
    """All well-formed candidates, for desk-scale recounts."""
    n = len(lib.components)
    count = 0
    for perm in itertools.permutations(range(n)):
        # perm[l] = component on line l
        operand_spaces = []
        for l, ci in enumerate(perm):
            arity = lib.components[ci].arity
            operand_spaces.append(
                itertools.product(range(lib.n_inputs + l), repeat=arity))
        for operand_choice in itertools.product(*operand_spaces):
            lines = tuple((ci, tuple(ops)) for ci, ops in zip(perm, operand_choice))
            for outs in itertools.product(range(lib.n_locations),
                                          repeat=lib.n_outputs):
                count += 1
                if count > limit:
                    raise SynthError(f"more than {limit} candidate programs")
                yield ProgramCandidate(lines, tuple(outs), lib.n_inputs)


# ----------------------------------------------------------------- encoding


@dataclass(frozen=True)
class IoExample:
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]

    def check(self, lib: ComponentLibrary):
        bound = 1 << lib.width
        if len(self.inputs) != lib.n_inputs or len(self.outputs) != lib.n_outputs:
            raise SynthError("example arity mismatch")
        if any(not 0 <= v < bound for v in self.inputs + self.outputs):
            raise SynthError("example value out of range")


class _Encoding:
    """Location-variable encoding of the candidate space.

    One location per component output (a line slot) and per operand; a
    program is a satisfying assignment of the location variables. Operand
    locations must precede the component's own line (acyclicity) and the
    component output locations are pairwise distinct, which over the slot
    range makes each component appear exactly once.
    """

    def __init__(self, lib: ComponentLibrary, prefix: str = ""):
        self.lib = lib
        self.prefix = prefix
        self.lwidth = max(1, (lib.n_locations - 1).bit_length())

    def lconst(self, value: int) -> T.BitVecTerm:
        return T.const(value, self.lwidth)

    def lout(self, c: int) -> T.BitVecTerm:
        return T.var(f"{self.prefix}lo{c}", self.lwidth)

    def lin(self, c: int, k: int) -> T.BitVecTerm:
        return T.var(f"{self.prefix}li{c}.{k}", self.lwidth)

    def lret(self, o: int) -> T.BitVecTerm:
        return T.var(f"{self.prefix}lr{o}", self.lwidth)

    def vout(self, c: int, tag: str) -> T.BitVecTerm:
        return T.var(f"{self.prefix}vo{c}.{tag}", self.lib.width)

    def vin(self, c: int, k: int, tag: str) -> T.BitVecTerm:
        return T.var(f"{self.prefix}vi{c}.{k}.{tag}", self.lib.width)

    def vret(self, o: int, tag: str) -> T.BitVecTerm:
        return T.var(f"{self.prefix}vr{o}.{tag}", self.lib.width)

    def wellformed(self) -> list[T.BitVecTerm]:
        lib = self.lib
        n = len(lib.components)
        first_slot = self.lconst(lib.n_inputs)
        last_slot = self.lconst(lib.n_locations - 1)
        out = []
        for c in range(n):
            out.append(T.ule(first_slot, self.lout(c)))
            out.append(T.ule(self.lout(c), last_slot))
            for k in range(lib.components[c].arity):
                out.append(T.ult(self.lin(c, k), self.lout(c)))
        for a in range(n):
            for b in range(a + 1, n):
                out.append(T.ne(self.lout(a), self.lout(b)))
        # Identical components are interchangeable; pinning them to
        # increasing slots removes the permutation symmetry without
        # shrinking the semantic space.
        by_name: dict[str, int] = {}
        for c, comp in enumerate(lib.components):
            prev = by_name.get(comp.name)
            if prev is not None:
                out.append(T.ult(self.lout(prev), self.lout(c)))
            by_name[comp.name] = c
        for o in range(lib.n_outputs):
            out.append(T.ule(self.lret(o), last_slot))
        return out

    def dataflow(self, tag: str, input_terms) -> list[T.BitVecTerm]:
        """Connection and semantics constraints for one evaluation.

        ``input_terms[i]`` is the term (usually a constant) feeding program
        input location ``i``.
        """
        lib = self.lib
        n = len(lib.components)
        out = []

        def sources():
            for i in range(lib.n_inputs):
                yield self.lconst(i), input_terms[i]
            for s in range(n):
                yield self.lout(s), self.vout(s, tag)

        for c, comp in enumerate(lib.components):
            args = tuple(self.vin(c, k, tag) for k in range(comp.arity))
            out.append(T.eq(self.vout(c, tag), comp.term(args)))
            for k in range(comp.arity):
                lin = self.lin(c, k)
                for loc, val in sources():
                    out.append(T.or_(T.ne(lin, loc), T.eq(args[k], val)))
        for o in range(lib.n_outputs):
            lret = self.lret(o)
            for loc, val in sources():
                out.append(T.or_(T.ne(lret, loc), T.eq(self.vret(o, tag), val)))
        return out

    def example_constraints(self, j: int, example: IoExample) -> list[T.BitVecTerm]:
        lib = self.lib
        inputs = [T.const(v, lib.width) for v in example.inputs]
        out = self.dataflow(f"e{j}", inputs)
        for o, v in enumerate(example.outputs):
            out.append(T.eq(self.vret(o, f"e{j}"), T.const(v, lib.width)))
        return out

    def decode(self, model: dict) -> ProgramCandidate:
        lib = self.lib
        n = len(lib.components)
        slot_of = {}
        for c in range(n):
            slot_of[c] = model[f"{self.prefix}lo{c}"]
        order = sorted(range(n), key=lambda c: slot_of[c])
        lines = []
        for l, c in enumerate(order):
            assert slot_of[c] == lib.n_inputs + l
            operands = tuple(model[f"{self.prefix}li{c}.{k}"]
                             for k in range(lib.components[c].arity))
            lines.append((c, operands))
        outs = tuple(model[f"{self.prefix}lr{o}"] for o in range(lib.n_outputs))
        return ProgramCandidate(tuple(lines), outs, lib.n_inputs)

    def program_terms(self, prog: ProgramCandidate, input_terms) -> list[T.BitVecTerm]:
        """Symbolic outputs of a fixed program on symbolic inputs."""
        values = list(input_terms)
        for ci, operands in prog.lines:
            comp = self.lib.components[ci]
            values.append(comp.term(tuple(values[o] for o in operands)))
        return [values[o] for o in prog.out_locs]


def synthesize_consistent(
    lib: ComponentLibrary,
    examples,
    *,
    seed: int = 0,
    conflict_limit: int = 2_000_000,
    dump_cnf: str | None = None,
) -> ProgramCandidate | None:
    """A program matching every example, or None when the encoding is
    unsatisfiable (no well-formed composition fits)."""
    for ex in examples:
        ex.check(lib)
    enc = _Encoding(lib)
    assertions = enc.wellformed()
    for j, ex in enumerate(examples):
        assertions += enc.example_constraints(j, ex)
    model = solver.solve(T.Formula(tuple(assertions)), seed=seed,
                         conflict_limit=conflict_limit, dump_cnf=dump_cnf)
    if model is None:
        return None
    prog = enc.decode(model)
    for ex in examples:
        got = interpret(lib, prog, ex.inputs)
        assert got == ex.outputs, f"decoded program violates example {ex}"
    return prog


def find_distinguishing_input(
    lib: ComponentLibrary,
    examples,
    prog: ProgramCandidate,
    *,
    seed: int = 0,
    conflict_limit: int = 2_000_000,
):
    """A (input, alternative program) pair where the alternative matches
    every example but disagrees with ``prog`` on the input; None when
    ``prog`` is semantically unique among consistent programs."""
    alt = _Encoding(lib, prefix="q.")
    assertions = alt.wellformed()
    for j, ex in enumerate(examples):
        assertions += alt.example_constraints(j, ex)

    dx = [T.var(f"dx{i}", lib.width) for i in range(lib.n_inputs)]
    assertions += alt.dataflow("d", dx)
    fixed_outputs = alt.program_terms(prog, dx)
    differs = None
    for o in range(lib.n_outputs):
        clause = T.ne(alt.vret(o, "d"), fixed_outputs[o])
        differs = clause if differs is None else T.or_(differs, clause)
    assertions.append(differs)

    model = solver.solve(T.Formula(tuple(assertions)), seed=seed,
                         conflict_limit=conflict_limit)
    if model is None:
        return None
    inputs = tuple(model.get(f"dx{i}", 0) for i in range(lib.n_inputs))
    alt_prog = alt.decode(model)
    for ex in examples:
        assert interpret(lib, alt_prog, ex.inputs) == ex.outputs
    assert interpret(lib, alt_prog, inputs) != interpret(lib, prog, inputs)
    return inputs, alt_prog


@dataclass(frozen=True)
class SynthesisResult:
    status: str  # "ok" | "unrealizable" | "budget"
    program: ProgramCandidate | None
    iterations: int
    oracle_queries: int
    examples: tuple[IoExample, ...]


def ogis_loop(
    lib: ComponentLibrary,
    oracle: Callable,
    *,
    seed: int = 0,
    max_iters: int = 64,
    conflict_limit: int = 2_000_000,
    on_iteration: Callable | None = None,
) -> SynthesisResult:
    """Alternate consistent synthesis and distinguishing-input queries
    until the consistent program is semantically unique.

    ``oracle`` maps an input tuple to the output tuple. ``on_iteration``
    (used by the invariant tests) observes (iteration, examples, program).
    """
    rng = __import__("random").Random(substream(seed, "ogis-init"))
    first = tuple(rng.randrange(1 << lib.width) for _ in range(lib.n_inputs))
    examples = [IoExample(first, _as_outputs(oracle(first), lib))]
    queries = 1
    for iteration in range(1, max_iters + 1):
        prog = synthesize_consistent(lib, examples, seed=seed,
                                     conflict_limit=conflict_limit)
        if prog is None:
            return SynthesisResult("unrealizable", None, iteration,
                                   queries, tuple(examples))
        if on_iteration is not None:
            on_iteration(iteration, tuple(examples), prog)
        found = find_distinguishing_input(lib, examples, prog, seed=seed,
                                          conflict_limit=conflict_limit)
        if found is None:
            return SynthesisResult("ok", prog, iteration, queries, tuple(examples))
        d_input, _alt = found
        examples.append(IoExample(d_input, _as_outputs(oracle(d_input), lib)))
        queries += 1
    return SynthesisResult("budget", None, max_iters, queries, tuple(examples))


def _as_outputs(value, lib: ComponentLibrary) -> tuple[int, ...]:
    outputs = tuple(value) if isinstance(value, (tuple, list)) else (value,)
    if len(outputs) != lib.n_outputs:
        raise SynthError(
            f"oracle returned {len(outputs)} outputs, library declares {lib.n_outputs}")
    mask = (1 << lib.width) - 1
    return tuple(v & mask for v in outputs)


def verify_equivalence(
    lib: ComponentLibrary,
    prog: ProgramCandidate,
    oracle: Callable,
    *,
    max_bits: int = 16,
    oracle_table: np.ndarray | None = None,
):
    """Exhaustive comparison against the oracle over the full input domain.

    Returns ("EQUIVALENT", None) or ("COUNTEREXAMPLE", input tuple).
    """
    total = lib.n_inputs * lib.width
    if total > max_bits:
        raise UncheckableError(
            f"{total} input bits exceeds the exhaustive limit {max_bits}")
    table = interpret_table(lib, prog)
    if oracle_table is None:
        oracle_table = build_oracle_table(lib, oracle)
    diff = np.nonzero(np.any(table != oracle_table, axis=1))[0]
    if diff.size == 0:
        return "EQUIVALENT", None
    r = int(diff[0])
    mask = (1 << lib.width) - 1
    inputs = tuple((r >> (i * lib.width)) & mask for i in range(lib.n_inputs))
    return "COUNTEREXAMPLE", inputs


def build_oracle_table(lib: ComponentLibrary, oracle: Callable) -> np.ndarray:
    total = lib.n_inputs * lib.width
    if total > 24:
        raise UncheckableError(f"{total} input bits is too many to tabulate")
    mask = (1 << lib.width) - 1
    rows = []
    for r in range(1 << total):
        inputs = tuple((r >> (i * lib.width)) & mask for i in range(lib.n_inputs))
        rows.append(_as_outputs(oracle(inputs), lib))
    return np.array(rows, dtype=np.uint64)


# ------------------------------------------------------------------ oracles


def oracle_from_cfg(cfg) -> Callable:
    """Treat a compiled program as an input/output oracle."""

    def run(inputs):
        env = dict(zip(cfg.params, inputs))
        return cfg.execute(env).returns

    return run


BUILTIN_ORACLES = {
    "identity": lambda inputs: inputs,
    "swap": lambda inputs: tuple(reversed(inputs)),
    "mul45": lambda inputs: ((inputs[0] * 45),),
    "xor": lambda inputs: (inputs[0] ^ inputs[1],),
    "bitand": lambda inputs: (inputs[0] & inputs[1],),
}


def count_consistent(lib: ComponentLibrary, examples, limit: int = 100_000) -> int:
    """Exhaustive version-space size (test-mode instrumentation)."""
    count = 0
    for prog in enumerate_programs(lib, limit=limit):
        if all(interpret(lib, prog, ex.inputs) == ex.outputs for ex in examples):
            count += 1
    return count


def semantics_enumerator(lib: ComponentLibrary, limit: int = 100_000):
    """Enumerate the I/O tables reachable by the library (artifacts for
    validity checking); yields hashable tables."""
    seen = set()
    for prog in enumerate_programs(lib, limit=limit):
        table = tuple(map(tuple, interpret_table(lib, prog).tolist()))
        if table not in seen:
            seen.add(table)
            yield table


def all_function_tables(n_inputs: int, n_outputs: int, width: int,
                        limit: int = 10_000_000):
    """Every I/O table of the full function space (tiny widths only)."""
    domain = 1 << (n_inputs * width)
    codomain = 1 << (n_outputs * width)
    total = codomain ** domain
    if total > limit:
        raise SynthError(f"function space of size {total} exceeds limit")
    outputs = list(itertools.product(range(1 << width), repeat=n_outputs))
    for combo in itertools.product(outputs, repeat=domain):
        yield tuple(combo)
