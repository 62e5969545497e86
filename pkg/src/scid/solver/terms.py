"""Fixed-width bit-vector terms with unsigned semantics.

Terms are immutable trees. Widths are checked at construction time:
arithmetic/bitwise operators require equal operand widths, comparisons
produce width-1 results, and shift amounts are compile-time constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MAX_WIDTH = 64

BINARY_KINDS = frozenset({"add", "sub", "and", "or", "xor"})
COMPARE_KINDS = frozenset({"eq", "ult", "ule"})
SHIFT_KINDS = frozenset({"shl_const", "lshr_const"})
ALL_KINDS = (
    BINARY_KINDS
    | COMPARE_KINDS
    | SHIFT_KINDS
    | frozenset({"const", "var", "not", "ite"})
)


class TermError(ValueError):
    """Raised on ill-formed term construction or evaluation."""


@dataclass(frozen=True)
class BitVecTerm:
    kind: str
    width: int
    children: tuple = ()
    name: str | None = None
    value: int | None = None  # const payload, or shift amount

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise TermError(f"unknown term kind {self.kind!r}")
        if not 1 <= self.width <= MAX_WIDTH:
            raise TermError(f"width {self.width} out of range 1..{MAX_WIDTH}")


def _check_width(t: BitVecTerm, w: int, what: str):
    if t.width != w:
        raise TermError(f"{what}: expected width {w}, got {t.width}")


def var(name: str, width: int) -> BitVecTerm:
    if not name:
        raise TermError("variable needs a name")
    return BitVecTerm("var", width, name=name)


def const(value: int, width: int) -> BitVecTerm:
    if not 0 <= value < (1 << width):
        raise TermError(f"constant {value} does not fit in {width} bits")
    return BitVecTerm("const", width, value=value)


def _binary(kind: str, a: BitVecTerm, b: BitVecTerm) -> BitVecTerm:
    _check_width(b, a.width, kind)
    return BitVecTerm(kind, a.width, children=(a, b))


def add(a, b):
    return _binary("add", a, b)


def sub(a, b):
    return _binary("sub", a, b)


def and_(a, b):
    return _binary("and", a, b)


def or_(a, b):
    return _binary("or", a, b)


def xor(a, b):
    return _binary("xor", a, b)


def not_(a: BitVecTerm) -> BitVecTerm:
    return BitVecTerm("not", a.width, children=(a,))


def shl(a: BitVecTerm, amount: int) -> BitVecTerm:
    if not 0 <= amount < a.width:
        raise TermError(f"shift amount {amount} out of [0, {a.width})")
    return BitVecTerm("shl_const", a.width, children=(a,), value=amount)


def lshr(a: BitVecTerm, amount: int) -> BitVecTerm:
    if not 0 <= amount < a.width:
        raise TermError(f"shift amount {amount} out of [0, {a.width})")
    return BitVecTerm("lshr_const", a.width, children=(a,), value=amount)


def ite(c: BitVecTerm, a: BitVecTerm, b: BitVecTerm) -> BitVecTerm:
    _check_width(c, 1, "ite condition")
    _check_width(b, a.width, "ite")
    return BitVecTerm("ite", a.width, children=(c, a, b))


def _compare(kind: str, a: BitVecTerm, b: BitVecTerm) -> BitVecTerm:
    _check_width(b, a.width, kind)
    return BitVecTerm(kind, 1, children=(a, b))


def eq(a, b):
    return _compare("eq", a, b)


def ult(a, b):
    return _compare("ult", a, b)


def ule(a, b):
    return _compare("ule", a, b)


# Derived comparisons.
def ne(a, b):
    return not_(eq(a, b))


def ugt(a, b):
    return ult(b, a)


def uge(a, b):
    return ule(b, a)


def true() -> BitVecTerm:
    return const(1, 1)


def false() -> BitVecTerm:
    return const(0, 1)


def free_vars(t: BitVecTerm, out: dict[str, int] | None = None) -> dict[str, int]:
    """Map of free variable name -> width, checking width consistency."""
    if out is None:
        out = {}
    if t.kind == "var":
        prev = out.setdefault(t.name, t.width)
        if prev != t.width:
            raise TermError(f"variable {t.name} used at widths {prev} and {t.width}")
    for c in t.children:
        free_vars(c, out)
    return out


def evaluate(t: BitVecTerm, model: dict[str, int]) -> int:
    """Unsigned evaluation of ``t`` under ``model``; result < 2**width."""
    mask = (1 << t.width) - 1
    k = t.kind
    if k == "const":
        return t.value
    if k == "var":
        if t.name not in model:
            raise TermError(f"unassigned variable {t.name!r}")
        v = model[t.name]
        if not 0 <= v <= mask:
            raise TermError(f"value {v} out of range for {t.name} (width {t.width})")
        return v
    vals = [evaluate(c, model) for c in t.children]
    if k == "add":
        return (vals[0] + vals[1]) & mask
    if k == "sub":
        return (vals[0] - vals[1]) & mask
    if k == "and":
        return vals[0] & vals[1]
    if k == "or":
        return vals[0] | vals[1]
    if k == "xor":
        return vals[0] ^ vals[1]
    if k == "not":
        return (~vals[0]) & mask
    if k == "shl_const":
        return (vals[0] << t.value) & mask
    if k == "lshr_const":
        return vals[0] >> t.value
    if k == "ite":
        return vals[1] if vals[0] == 1 else vals[2]
    if k == "eq":
        return int(vals[0] == vals[1])
    if k == "ult":
        return int(vals[0] < vals[1])
    if k == "ule":
        return int(vals[0] <= vals[1])
    raise TermError(f"unhandled kind {k}")


@dataclass(frozen=True)
class Formula:
    """A conjunction of width-1 assertions."""

    assertions: tuple[BitVecTerm, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for a in self.assertions:
            if a.width != 1:
                raise TermError("formula assertions must have width 1")

    def conjoin(self, extra) -> "Formula":
        return Formula(self.assertions + tuple(extra))

    def variables(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for a in self.assertions:
            free_vars(a, out)
        return out
