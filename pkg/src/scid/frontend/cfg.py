"""Control-flow DAG construction.

``build_dag`` lowers a parsed program to a single-source single-sink DAG:
calls are inlined (the call graph is acyclic), and each bounded loop is
unrolled into ``bound`` guarded copies of its body, i.e. ``while (c)
bound k {B}`` becomes ``k`` sequential ``if (c) {B}`` blocks. A loop whose
condition is a literal constant folds to plain copies, so counted loops
add no spurious branch edges.

Blocks hold straight-line assignments as bit-vector terms; a branch's two
out-edges carry the condition and its negation. A path's semantics is the
sequential composition of its edge conditions and block assignments.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..solver import terms as T
from . import parser as P


class BuildError(ValueError):
    pass


class BudgetError(BuildError):
    """Inlining/unrolling exceeded the configured node budget."""


@dataclass
class Block:
    idx: int
    assigns: list  # list of (var name, BitVecTerm)


@dataclass
class Edge:
    idx: int
    src: int
    dst: int
    cond: object | None  # width-1 BitVecTerm, or None for unconditional


class Cfg:
    def __init__(self, width, params):
        self.width = width
        self.params = list(params)
        self.blocks: list[Block] = []
        self.edges: list[Edge] = []
        self.source = 0
        self.sink = 0
        self._out: list[list[int]] = []
        self._in: list[list[int]] = []

    # --------------------------------------------------------- construction

    def new_block(self) -> int:
        idx = len(self.blocks)
        self.blocks.append(Block(idx, []))
        self._out.append([])
        self._in.append([])
        return idx

    def add_edge(self, src, dst, cond=None) -> int:
        idx = len(self.edges)
        self.edges.append(Edge(idx, src, dst, cond))
        self._out[src].append(idx)
        self._in[dst].append(idx)
        return idx

    def out_edges(self, block_idx) -> list[Edge]:
        return [self.edges[i] for i in self._out[block_idx]]

    def in_edges(self, block_idx) -> list[Edge]:
        return [self.edges[i] for i in self._in[block_idx]]

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_blocks(self):
        return len(self.blocks)

    # ------------------------------------------------------------- analysis

    def topo_order(self) -> list[int]:
        """Topological order of blocks; raises BuildError on a cycle."""
        indeg = [len(self._in[b]) for b in range(self.n_blocks)]
        order = [b for b in range(self.n_blocks) if indeg[b] == 0]
        i = 0
        while i < len(order):
            b = order[i]
            i += 1
            for e in self._out[b]:
                d = self.edges[e].dst
                indeg[d] -= 1
                if indeg[d] == 0:
                    order.append(d)
        if len(order) != self.n_blocks:
            raise BuildError("control-flow graph is not acyclic")
        return order

    def path_count(self) -> int:
        counts = [0] * self.n_blocks
        counts[self.source] = 1
        for b in self.topo_order():
            for e in self._out[b]:
                counts[self.edges[e].dst] += counts[b]
        return counts[self.sink]

    def enumerate_paths(self, limit: int | None = None):
        """Yield source-to-sink paths as tuples of edge indices, in DFS
        order following edge declaration order."""
        count = 0
        stack = [(self.source, ())]
        while stack:
            block, path = stack.pop()
            if block == self.sink:
                count += 1
                if limit is not None and count > limit:
                    raise BudgetError(f"more than {limit} paths")
                yield path
                continue
            for e in reversed(self._out[block]):
                stack.append((self.edges[e].dst, path + (e,)))

    def path_bits(self, edge_ids) -> tuple[int, ...]:
        bits = [0] * self.n_edges
        for e in edge_ids:
            bits[e] = 1
        return tuple(bits)

    def validate(self):
        self.topo_order()
        sources = [b for b in range(self.n_blocks) if not self._in[b]]
        sinks = [b for b in range(self.n_blocks) if not self._out[b]]
        if sources != [self.source]:
            raise BuildError(f"expected unique source {self.source}, got {sources}")
        if sinks != [self.sink]:
            raise BuildError(f"expected unique sink {self.sink}, got {sinks}")
        # Every block on some source->sink path.
        fwd = self._reachable(self.source, self._out, lambda e: e.dst)
        back = self._reachable(self.sink, self._in, lambda e: e.src)
        for b in range(self.n_blocks):
            if b not in fwd or b not in back:
                raise BuildError(f"block {b} not on any source->sink path")

    def _reachable(self, start, adjacency, step):
        seen = {start}
        work = [start]
        while work:
            b = work.pop()
            for e in adjacency[b]:
                n = step(self.edges[e])
                if n not in seen:
                    seen.add(n)
                    work.append(n)
        return seen

    # ------------------------------------------------------------ execution

    def execute(self, inputs: dict) -> "ExecResult":
        """Run the DAG on concrete inputs; missing inputs default to 0."""
        env = {p: inputs.get(p, 0) & ((1 << self.width) - 1) for p in self.params}
        block = self.source
        taken: list[int] = []
        while True:
            for name, term in self.blocks[block].assigns:
                env[name] = T.evaluate(term, env)
            outs = self._out[block]
            if not outs:
                break
            chosen = None
            for e in outs:
                cond = self.edges[e].cond
                if cond is None or T.evaluate(cond, env) == 1:
                    chosen = e
                    break
            if chosen is None:
                raise BuildError(f"no enabled out-edge at block {block}")
            taken.append(chosen)
            block = self.edges[chosen].dst
        returns = []
        i = 0
        while f"__ret{i}" in env:
            returns.append(env[f"__ret{i}"])
            i += 1
        return ExecResult(tuple(taken), self.path_bits(taken), env, tuple(returns))

    # ----------------------------------------------------------------- dump

    def to_dot(self) -> str:
        lines = ["digraph cfg {"]
        for b in self.blocks:
            label = "\\n".join(f"{n} = ..." for n, _ in b.assigns) or f"b{b.idx}"
            shape = "doublecircle" if b.idx in (self.source, self.sink) else "box"
            lines.append(f'  n{b.idx} [label="b{b.idx}: {label}", shape={shape}];')
        for e in self.edges:
            label = f"e{e.idx}" + ("" if e.cond is None else " [cond]")
            lines.append(f'  n{e.src} -> n{e.dst} [label="{label}"];')
        lines.append("}")
        return "\n".join(lines)


@dataclass(frozen=True)
class ExecResult:
    edge_ids: tuple[int, ...]
    bits: tuple[int, ...]
    env: dict
    returns: tuple


# ------------------------------------------------------------ AST lowering


def _to_term(expr, rename, width, as_cond=False):
    """Convert an AST expression to a bit-vector term over renamed vars."""
    w = 1 if as_cond else width
    if isinstance(expr, P.Lit):
        try:
            return T.const(expr.value, w)
        except T.TermError as exc:
            raise BuildError(str(exc)) from exc
    if isinstance(expr, P.Var):
        return T.var(rename.get(expr.name, expr.name), width)
    if isinstance(expr, P.Unary):
        return T.not_(_to_term(expr.operand, rename, width, as_cond))
    if isinstance(expr, P.Binary):
        op = expr.op
        if op in P.COMPARISON_OPS:
            a = _to_term(expr.left, rename, width)
            b = _to_term(expr.right, rename, width)
            builder = {
                "==": T.eq, "!=": T.ne, "<": T.ult,
                "<=": T.ule, ">": T.ugt, ">=": T.uge,
            }[op]
            return builder(a, b)
        if op in ("<<", ">>"):
            a = _to_term(expr.left, rename, width, as_cond)
            return (T.shl if op == "<<" else T.lshr)(a, expr.right.value)
        a = _to_term(expr.left, rename, width, as_cond)
        b = _to_term(expr.right, rename, width, as_cond)
        builder = {"+": T.add, "-": T.sub, "&": T.and_, "|": T.or_, "^": T.xor}[op]
        return builder(a, b)
    raise BuildError(f"cannot lower {expr!r}")


class _Rename:
    """Variable scoping for one function expansion.

    The entry expansion keeps source names; every inlined expansion gets a
    unique prefix so its params and locals cannot collide with the caller.
    """

    def __init__(self, prefix: str | None):
        self.prefix = prefix

    def __getitem__(self, name: str) -> str:
        return name if self.prefix is None else f"{self.prefix}.{name}"

    def get(self, name: str, default=None) -> str:
        return self[name]


class _Builder:
    def __init__(self, program: P.Program, node_budget: int):
        self.program = program
        self.width = program.width
        self.budget = node_budget
        entry = program.function(program.entry)
        self.cfg = Cfg(program.width, entry.params)
        self.exit_block = None
        self.fresh_counter = 0

    def fresh_prefix(self, base: str) -> str:
        self.fresh_counter += 1
        return f"{base}.{self.fresh_counter}"

    def new_block(self) -> int:
        if self.cfg.n_blocks >= self.budget:
            raise BudgetError(f"node budget {self.budget} exceeded while expanding")
        return self.cfg.new_block()

    def build(self) -> Cfg:
        entry = self.program.function(self.program.entry)
        start = self.new_block()
        self.exit_block = self.new_block()
        rename = _Rename(None)  # entry-level variables keep their source names
        end = self._seq(entry.body, start, rename, toplevel=True)
        if end is not None:
            self.cfg.add_edge(end, self.exit_block)
        self._finalize()
        return self.cfg

    # Statement sequence; returns the open block, or None if all control
    # transferred to the exit.
    def _seq(self, stmts, cursor, rename, toplevel=False, ret_targets=None,
             ret_joins=None):
        for stmt in stmts:
            if cursor is None:
                break  # unreachable code after return
            if isinstance(stmt, P.Assign):
                cursor = self._assign(stmt, cursor, rename)
            elif isinstance(stmt, P.If):
                cursor = self._if(stmt, cursor, rename, toplevel, ret_targets, ret_joins)
            elif isinstance(stmt, P.While):
                cursor = self._while(stmt, cursor, rename, toplevel, ret_targets, ret_joins)
            elif isinstance(stmt, P.Return):
                self._return(stmt, cursor, rename, toplevel, ret_targets, ret_joins)
                cursor = None
            else:
                raise BuildError(f"unexpected statement {stmt!r}")
        return cursor

    def _assign(self, stmt, cursor, rename):
        if isinstance(stmt.value, P.Call):
            return self._inline_call(stmt, cursor, rename)
        if len(stmt.targets) != 1:
            raise BuildError("multiple targets require a call")
        term = _to_term(stmt.value, rename, self.width)
        if term.width != self.width:
            raise BuildError("cannot assign a 1-bit comparison to a variable")
        self.cfg.blocks[cursor].assigns.append((rename[stmt.targets[0]], term))
        return cursor

    def _inline_call(self, stmt, cursor, rename):
        call = stmt.value
        callee = self.program.function(call.func)
        inner = _Rename(self.fresh_prefix(call.func))
        for param, arg in zip(callee.params, call.args):
            term = _to_term(arg, rename, self.width)
            self.cfg.blocks[cursor].assigns.append((inner[param], term))
        targets = [rename[name] for name in stmt.targets]
        joins: list[int] = []
        end = self._seq(callee.body, cursor, inner, toplevel=False,
                        ret_targets=targets, ret_joins=joins)
        if end is not None:
            raise BuildError(f"function {callee.name} may fall off without a return")
        if not joins:
            raise BuildError(f"function {callee.name} never returns")
        post = self.new_block()
        for block in joins:
            self.cfg.add_edge(block, post)
        return post

    def _return(self, stmt, cursor, rename, toplevel, ret_targets, ret_joins):
        values = [_to_term(v, rename, self.width) for v in stmt.values]
        if toplevel:
            for i, term in enumerate(values):
                self.cfg.blocks[cursor].assigns.append((f"__ret{i}", term))
            self.cfg.add_edge(cursor, self.exit_block)
        else:
            if len(values) != len(ret_targets):
                raise BuildError(
                    f"call expects {len(ret_targets)} values, return gives {len(values)}")
            for name, term in zip(ret_targets, values):
                self.cfg.blocks[cursor].assigns.append((name, term))
            ret_joins.append(cursor)

    def _if(self, stmt, cursor, rename, toplevel, ret_targets, ret_joins):
        cond = _to_term(stmt.cond, rename, self.width, as_cond=True)
        if cond.kind == "const":
            body = stmt.then_body if cond.value == 1 else stmt.else_body
            return self._seq(body, cursor, rename, toplevel, ret_targets, ret_joins)
        then_start = self.new_block()
        self.cfg.add_edge(cursor, then_start, cond)
        then_end = self._seq(stmt.then_body, then_start, rename,
                             toplevel, ret_targets, ret_joins)
        neg = T.not_(cond)
        if stmt.else_body:
            else_start = self.new_block()
            self.cfg.add_edge(cursor, else_start, neg)
            else_end = self._seq(stmt.else_body, else_start, rename,
                                 toplevel, ret_targets, ret_joins)
        else:
            else_start = None
            else_end = cursor  # falls straight to the join
        if then_end is None and else_end is None:
            return None
        join = self.new_block()
        if then_end is not None:
            self.cfg.add_edge(then_end, join)
        if else_end is not None:
            if else_start is None:
                self.cfg.add_edge(cursor, join, neg)
            else:
                self.cfg.add_edge(else_end, join)
        return join

    def _while(self, stmt, cursor, rename, toplevel, ret_targets, ret_joins):
        for _ in range(stmt.bound):
            if cursor is None:
                return None
            cond = _to_term(stmt.cond, rename, self.width, as_cond=True)
            if cond.kind == "const":
                if cond.value == 0:
                    break
                cursor = self._seq(stmt.body, cursor, rename, toplevel,
                                   ret_targets, ret_joins)
            else:
                guarded = P.If(stmt.cond, stmt.body, ())
                cursor = self._if(guarded, cursor, rename, toplevel,
                                  ret_targets, ret_joins)
        return cursor

    def _finalize(self):
        cfg = self.cfg
        # Drop blocks that are unreachable or cannot reach the sink (e.g. the
        # join of an if whose branches both return).
        fwd = cfg._reachable(cfg.source, cfg._out, lambda e: e.dst)
        back = cfg._reachable(self.exit_block, cfg._in, lambda e: e.src)
        keep = sorted(fwd & back)
        if cfg.source not in keep or self.exit_block not in keep:
            raise BuildError("program has no source-to-sink path")
        remap = {old: new for new, old in enumerate(keep)}
        blocks = []
        for old in keep:
            b = cfg.blocks[old]
            blocks.append(Block(remap[old], b.assigns))
        edges = []
        for e in cfg.edges:
            if e.src in remap and e.dst in remap:
                edges.append(Edge(len(edges), remap[e.src], remap[e.dst], e.cond))
        cfg.blocks = blocks
        cfg.edges = edges
        cfg._out = [[] for _ in blocks]
        cfg._in = [[] for _ in blocks]
        for e in edges:
            cfg._out[e.src].append(e.idx)
            cfg._in[e.dst].append(e.idx)
        cfg.source = remap[0]
        cfg.sink = remap[self.exit_block]
        cfg.validate()


def build_dag(program: P.Program, node_budget: int = 20000) -> Cfg:
    """Unroll, inline and normalize ``program`` into a Cfg DAG."""
    return _Builder(program, node_budget).build()
