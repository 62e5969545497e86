"""Tseitin bit-blasting of bit-vector terms to CNF.

Adders are ripple-carry; shifts by constants are pure rewiring. Gates are
structurally cached so shared subterms encode once, and constant inputs
fold away before any clause is emitted.
"""

from __future__ import annotations

from .terms import BitVecTerm


class CnfBuilder:
    """Accumulates CNF clauses over DIMACS-style literals.

    Variable 1 is pinned true so constants are plain literals.
    """

    def __init__(self):
        self.nvars = 1
        self.clauses: list[list[int]] = [[1]]
        self.TRUE = 1
        self.FALSE = -1
        self._gate_cache: dict[tuple, int] = {}
        self._term_cache: dict[BitVecTerm, tuple[int, ...]] = {}
        self.var_bits: dict[str, tuple[int, ...]] = {}

    def new_var(self) -> int:
        self.nvars += 1
        return self.nvars

    def add_clause(self, lits):
        self.clauses.append(list(lits))

    # ------------------------------------------------------------------ gates

    def and_gate(self, a: int, b: int) -> int:
        T, F = self.TRUE, self.FALSE
        if a == F or b == F:
            return F
        if a == T:
            return b
        if b == T:
            return a
        if a == b:
            return a
        if a == -b:
            return F
        key = ("and", min(a, b), max(a, b))
        if key in self._gate_cache:
            return self._gate_cache[key]
        o = self.new_var()
        self.add_clause([-o, a])
        self.add_clause([-o, b])
        self.add_clause([-a, -b, o])
        self._gate_cache[key] = o
        return o

    def or_gate(self, a: int, b: int) -> int:
        return -self.and_gate(-a, -b)

    def xor_gate(self, a: int, b: int) -> int:
        T, F = self.TRUE, self.FALSE
        if a == F:
            return b
        if b == F:
            return a
        if a == T:
            return -b
        if b == T:
            return -a
        if a == b:
            return F
        if a == -b:
            return T
        # Normalize: xor(a,b) == xor(-a,-b); xor(-a,b) == -xor(a,b).
        neg = (a < 0) ^ (b < 0)
        pa, pb = abs(a), abs(b)
        key = ("xor", min(pa, pb), max(pa, pb))
        if key in self._gate_cache:
            o = self._gate_cache[key]
            return -o if neg else o
        o = self.new_var()
        self.add_clause([-o, pa, pb])
        self.add_clause([-o, -pa, -pb])
        self.add_clause([o, -pa, pb])
        self.add_clause([o, pa, -pb])
        self._gate_cache[key] = o
        return -o if neg else o

    def mux_gate(self, c: int, a: int, b: int) -> int:
        """if c then a else b"""
        if a == b:
            return a
        return self.or_gate(self.and_gate(c, a), self.and_gate(-c, b))

    def carry_gate(self, a: int, b: int, c: int) -> int:
        return self.or_gate(self.and_gate(a, b), self.and_gate(c, self.or_gate(a, b)))

    # ------------------------------------------------------------------ terms

    def bits_for_var(self, name: str, width: int) -> tuple[int, ...]:
        bits = self.var_bits.get(name)
        if bits is None:
            bits = tuple(self.new_var() for _ in range(width))
            self.var_bits[name] = bits
        elif len(bits) != width:
            raise ValueError(f"variable {name} blasted at two widths")
        return bits

    def blast(self, t: BitVecTerm) -> tuple[int, ...]:
        """LSB-first literal vector computing ``t``."""
        cached = self._term_cache.get(t)
        if cached is not None:
            return cached
        bits = self._blast(t)
        assert len(bits) == t.width
        self._term_cache[t] = bits
        return bits

    def _blast(self, t: BitVecTerm) -> tuple[int, ...]:
        k = t.kind
        T, F = self.TRUE, self.FALSE
        if k == "const":
            return tuple(T if (t.value >> i) & 1 else F for i in range(t.width))
        if k == "var":
            return self.bits_for_var(t.name, t.width)
        if k == "not":
            return tuple(-b for b in self.blast(t.children[0]))
        if k in ("and", "or", "xor"):
            a = self.blast(t.children[0])
            b = self.blast(t.children[1])
            gate = {"and": self.and_gate, "or": self.or_gate, "xor": self.xor_gate}[k]
            return tuple(gate(x, y) for x, y in zip(a, b))
        if k == "add":
            a = self.blast(t.children[0])
            b = self.blast(t.children[1])
            return self._ripple(a, b, F)
        if k == "sub":
            a = self.blast(t.children[0])
            b = tuple(-x for x in self.blast(t.children[1]))
            return self._ripple(a, b, T)
        if k == "shl_const":
            a = self.blast(t.children[0])
            n = t.value
            return tuple([F] * n) + a[: t.width - n]
        if k == "lshr_const":
            a = self.blast(t.children[0])
            n = t.value
            return a[n:] + tuple([F] * n)
        if k == "ite":
            c = self.blast(t.children[0])[0]
            a = self.blast(t.children[1])
            b = self.blast(t.children[2])
            return tuple(self.mux_gate(c, x, y) for x, y in zip(a, b))
        if k == "eq":
            a = self.blast(t.children[0])
            b = self.blast(t.children[1])
            out = T
            for x, y in zip(a, b):
                out = self.and_gate(out, -self.xor_gate(x, y))
            return (out,)
        if k in ("ult", "ule"):
            a = self.blast(t.children[0])
            b = self.blast(t.children[1])
            lt = F
            for x, y in zip(a, b):  # LSB to MSB
                same = -self.xor_gate(x, y)
                lt = self.or_gate(self.and_gate(-x, y), self.and_gate(same, lt))
            if k == "ult":
                return (lt,)
            # a <= b  ==  not (b < a)
            gt = F
            for x, y in zip(a, b):
                same = -self.xor_gate(x, y)
                gt = self.or_gate(self.and_gate(x, -y), self.and_gate(same, gt))
            return (-gt,)
        raise ValueError(f"unhandled kind {k}")

    def _ripple(self, a, b, carry_in):
        out = []
        c = carry_in
        for x, y in zip(a, b):
            s = self.xor_gate(self.xor_gate(x, y), c)
            c = self.carry_gate(x, y, c)
            out.append(s)
        return tuple(out)

    def assert_true(self, t: BitVecTerm):
        """Assert a width-1 term, flattening top-level disjunctions into a
        single clause rather than building an or-gate tower."""
        if t.width != 1:
            raise ValueError("can only assert width-1 terms")
        lits = []
        stack = [t]
        while stack:
            node = stack.pop()
            if node.kind == "or" and node.width == 1:
                stack.extend(node.children)
            else:
                lits.append(self.blast(node)[0])
        if self.TRUE in lits:
            return
        self.add_clause([l for l in lits if l != self.FALSE] or [self.FALSE])

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.nvars} {len(self.clauses)}"]
        for cl in self.clauses:
            lines.append(" ".join(str(l) for l in cl) + " 0")
        return "\n".join(lines) + "\n"
