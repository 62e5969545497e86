"""Parser for the `.mc` source language.

A deliberately small imperative language over fixed-width unsigned
bit-vectors::

    width 8;

    func modexp(base, exp) {
        result = 1;
        while (1) bound 8 {
            if ((exp & 1) == 1) { result = result + base; }
            base = base + base;
            exp = exp >> 1;
        }
        return result;
    }

Statements: assignment, ``if``/``else``, bounded ``while`` (the ``bound N``
annotation is mandatory and caps the unrolled iteration count), function
calls (``x = f(a, b);`` or ``x, y = f(a, b);``), and ``return`` with one or
more values. Expressions use ``+ - & | ^ ~ << >>`` plus the comparisons
``== != < <= > >=`` (unsigned). Shift amounts must be integer literals.
Operator precedence, loosest first: ``|``, ``^``, ``&``, comparisons,
``<< >>``, ``+ -``, unary ``~``. Comparisons yield 1-bit values; branch
conditions must be 1-bit (the literals ``0``/``1`` are allowed there).
There are no pointers, arrays, or recursion.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class ParseError(SyntaxError):
    def __init__(self, message, line, col):
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


class WidthError(ValueError):
    """Expression widths are inconsistent."""


# ------------------------------------------------------------------------ AST


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Unary:
    op: str  # '~'
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


@dataclass(frozen=True)
class Assign:
    targets: tuple[str, ...]
    value: object  # expression or Call


@dataclass(frozen=True)
class If:
    cond: object
    then_body: tuple
    else_body: tuple


@dataclass(frozen=True)
class While:
    cond: object
    bound: int
    body: tuple


@dataclass(frozen=True)
class Return:
    values: tuple


@dataclass(frozen=True)
class FuncDef:
    name: str
    params: tuple[str, ...]
    body: tuple


@dataclass(frozen=True)
class Program:
    width: int
    functions: tuple[FuncDef, ...]
    entry: str

    def function(self, name: str) -> FuncDef:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)


# ---------------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><<|>>|==|!=|<=|>=|[-+&|^~<>=(){},;])
    """,
    re.VERBOSE,
)

KEYWORDS = {"func", "if", "else", "while", "bound", "return", "width"}


@dataclass
class Token:
    kind: str  # 'num', 'ident', 'kw', 'op', 'eof'
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    line = 1
    line_start = 0
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            col = pos - line_start + 1
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind in ("ws", "comment"):
            newlines = text.count("\n")
            if newlines:
                line += newlines
                line_start = pos + text.rindex("\n") + 1
        elif kind == "ident" and text in KEYWORDS:
            tokens.append(Token("kw", text, line, col))
        else:
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# --------------------------------------------------------------------- parser

# Binary operators by precedence level, loosest binding first.
_PRECEDENCE = [
    ["|"],
    ["^"],
    ["&"],
    ["==", "!=", "<", "<=", ">", ">="],
    ["<<", ">>"],
    ["+", "-"],
]

COMPARISON_OPS = {"==", "!=", "<", "<=", ">", ">="}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message):
        tok = self.peek()
        raise ParseError(message, tok.line, tok.col)

    def expect(self, kind, text=None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            self.error(f"expected {want!r}, found {tok.text!r}")
        return self.next()

    def parse_program(self) -> Program:
        width = 8
        if self.peek().kind == "kw" and self.peek().text == "width":
            self.next()
            width = int(self.expect("num").text)
            self.expect("op", ";")
            if not 1 <= width <= 64:
                self.error(f"width {width} out of range 1..64")
        functions = []
        while self.peek().kind != "eof":
            functions.append(self.parse_func())
        if not functions:
            self.error("program has no functions")
        names = [f.name for f in functions]
        if len(set(names)) != len(names):
            self.error("duplicate function name")
        entry = "main" if "main" in names else names[0]
        return Program(width, tuple(functions), entry)

    def parse_func(self) -> FuncDef:
        self.expect("kw", "func")
        name = self.expect("ident").text
        self.expect("op", "(")
        params = []
        if not (self.peek().kind == "op" and self.peek().text == ")"):
            params.append(self.expect("ident").text)
            while self.peek().text == ",":
                self.next()
                params.append(self.expect("ident").text)
        self.expect("op", ")")
        body = self.parse_block()
        if len(set(params)) != len(params):
            raise ParseError(f"duplicate parameter in {name}", 0, 0)
        return FuncDef(name, tuple(params), body)

    def parse_block(self) -> tuple:
        self.expect("op", "{")
        stmts = []
        while not (self.peek().kind == "op" and self.peek().text == "}"):
            stmts.append(self.parse_stmt())
        self.expect("op", "}")
        return tuple(stmts)

    def parse_stmt(self):
        tok = self.peek()
        if tok.kind == "kw":
            if tok.text == "if":
                return self.parse_if()
            if tok.text == "while":
                return self.parse_while()
            if tok.text == "return":
                self.next()
                values = [self.parse_expr()]
                while self.peek().text == ",":
                    self.next()
                    values.append(self.parse_expr())
                self.expect("op", ";")
                return Return(tuple(values))
            self.error(f"unexpected keyword {tok.text!r}")
        if tok.kind == "ident":
            targets = [self.next().text]
            while self.peek().text == ",":
                self.next()
                targets.append(self.expect("ident").text)
            self.expect("op", "=")
            value = self.parse_rhs()
            self.expect("op", ";")
            if len(targets) > 1 and not isinstance(value, Call):
                self.error("multiple assignment targets require a call")
            return Assign(tuple(targets), value)
        self.error(f"unexpected token {tok.text!r}")

    def parse_if(self) -> If:
        self.expect("kw", "if")
        self.expect("op", "(")
        cond = self.parse_expr()
        self.expect("op", ")")
        then_body = self.parse_block()
        else_body = ()
        if self.peek().kind == "kw" and self.peek().text == "else":
            self.next()
            if self.peek().kind == "kw" and self.peek().text == "if":
                else_body = (self.parse_if(),)
            else:
                else_body = self.parse_block()
        return If(cond, then_body, else_body)

    def parse_while(self) -> While:
        self.expect("kw", "while")
        self.expect("op", "(")
        cond = self.parse_expr()
        self.expect("op", ")")
        if not (self.peek().kind == "kw" and self.peek().text == "bound"):
            self.error("while loop requires a 'bound N' annotation")
        self.next()
        bound = int(self.expect("num").text)
        body = self.parse_block()
        return While(cond, bound, body)

    def parse_rhs(self):
        if (
            self.peek().kind == "ident"
            and self.tokens[self.pos + 1].kind == "op"
            and self.tokens[self.pos + 1].text == "("
        ):
            name = self.next().text
            self.next()  # '('
            args = []
            if self.peek().text != ")":
                args.append(self.parse_expr())
                while self.peek().text == ",":
                    self.next()
                    args.append(self.parse_expr())
            self.expect("op", ")")
            return Call(name, tuple(args))
        return self.parse_expr()

    def parse_expr(self, level=0):
        if level == len(_PRECEDENCE):
            return self.parse_unary()
        left = self.parse_expr(level + 1)
        ops = _PRECEDENCE[level]
        while self.peek().kind == "op" and self.peek().text in ops:
            op = self.next().text
            right = self.parse_expr(level + 1)
            left = Binary(op, left, right)
        return left

    def parse_unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "~":
            self.next()
            return Unary("~", self.parse_unary())
        return self.parse_atom()

    def parse_atom(self):
        tok = self.next()
        if tok.kind == "num":
            return Lit(int(tok.text))
        if tok.kind == "ident":
            return Var(tok.text)
        if tok.kind == "op" and tok.text == "(":
            e = self.parse_expr()
            self.expect("op", ")")
            return e
        raise ParseError(f"unexpected token {tok.text!r}", tok.line, tok.col)


def parse(source: str) -> Program:
    """Parse source text into a Program, then run static checks."""
    program = _Parser(tokenize(source)).parse_program()
    _check_program(program)
    return program


# -------------------------------------------------------------- static checks


def expr_width(expr, width: int, defined: set[str]) -> int:
    """Width of an expression: the program width, or 1 for comparisons.

    ``Lit`` is polymorphic; in a mixed binary expression it adopts the other
    operand's width.
    """
    if isinstance(expr, Lit):
        return 0  # polymorphic, resolved by context
    if isinstance(expr, Var):
        if expr.name not in defined:
            raise WidthError(f"variable {expr.name!r} read before assignment")
        return width
    if isinstance(expr, Unary):
        return expr_width(expr.operand, width, defined)
    if isinstance(expr, Binary):
        lw = expr_width(expr.left, width, defined)
        rw = expr_width(expr.right, width, defined)
        if expr.op in (">>", "<<"):
            if not isinstance(expr.right, Lit):
                raise WidthError("shift amounts must be integer literals")
            w = lw or width
            if not 0 <= expr.right.value < w:
                raise WidthError(f"shift amount {expr.right.value} out of [0, {w})")
            return w
        w = lw or rw
        if lw and rw and lw != rw:
            raise WidthError(f"width mismatch: {lw} {expr.op} {rw}")
        if expr.op in COMPARISON_OPS:
            return 1
        return w or width
    raise WidthError(f"unexpected expression {expr!r}")


def _check_cond(cond, width, defined):
    w = expr_width(cond, width, defined)
    if w not in (0, 1):
        raise WidthError("branch conditions must be 1-bit (use a comparison)")
    if isinstance(cond, Lit) and cond.value not in (0, 1):
        raise WidthError("a literal condition must be 0 or 1")


def _check_body(body, program, defined, width):
    for stmt in body:
        if isinstance(stmt, Assign):
            if isinstance(stmt.value, Call):
                callee = program.function(stmt.value.func)
                if len(stmt.value.args) != len(callee.params):
                    raise WidthError(
                        f"call to {callee.name}: {len(stmt.value.args)} args for "
                        f"{len(callee.params)} params")
                for arg in stmt.value.args:
                    expr_width(arg, width, defined)
            else:
                expr_width(stmt.value, width, defined)
            defined.update(stmt.targets)
        elif isinstance(stmt, If):
            _check_cond(stmt.cond, width, defined)
            d1 = set(defined)
            _check_body(stmt.then_body, program, d1, width)
            d2 = set(defined)
            _check_body(stmt.else_body, program, d2, width)
            defined |= d1 & d2
        elif isinstance(stmt, While):
            if stmt.bound < 0:
                raise WidthError("loop bound must be >= 0")
            _check_cond(stmt.cond, width, defined)
            d1 = set(defined)
            _check_body(stmt.body, program, d1, width)
        elif isinstance(stmt, Return):
            for v in stmt.values:
                expr_width(v, width, defined)


def _call_graph_acyclic(program: Program):
    state: dict[str, int] = {}

    def visit(name, stack):
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            raise WidthError(f"recursive call cycle through {name!r}")
        state[name] = 1
        fn = program.function(name)
        for call in _calls_in(fn.body):
            if call.func not in {f.name for f in program.functions}:
                raise WidthError(f"call to unknown function {call.func!r}")
            visit(call.func, stack + [name])
        state[name] = 2

    for f in program.functions:
        visit(f.name, [])


def _calls_in(body):
    for stmt in body:
        if isinstance(stmt, Assign) and isinstance(stmt.value, Call):
            yield stmt.value
        elif isinstance(stmt, If):
            yield from _calls_in(stmt.then_body)
            yield from _calls_in(stmt.else_body)
        elif isinstance(stmt, While):
            yield from _calls_in(stmt.body)


def _check_program(program: Program):
    _call_graph_acyclic(program)
    for f in program.functions:
        _check_body(f.body, program, set(f.params), program.width)


# ------------------------------------------------------------- pretty printer


def _expr_str(expr) -> str:
    if isinstance(expr, Lit):
        return str(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Unary):
        return f"~{_expr_str(expr.operand)}"
    if isinstance(expr, Binary):
        return f"({_expr_str(expr.left)} {expr.op} {_expr_str(expr.right)})"
    if isinstance(expr, Call):
        return f"{expr.func}({', '.join(_expr_str(a) for a in expr.args)})"
    raise ValueError(expr)


def _stmt_lines(stmt, indent) -> list[str]:
    pad = "    " * indent
    if isinstance(stmt, Assign):
        return [f"{pad}{', '.join(stmt.targets)} = {_expr_str(stmt.value)};"]
    if isinstance(stmt, If):
        lines = [f"{pad}if ({_expr_str(stmt.cond)}) {{"]
        for s in stmt.then_body:
            lines += _stmt_lines(s, indent + 1)
        if stmt.else_body:
            lines.append(f"{pad}}} else {{")
            for s in stmt.else_body:
                lines += _stmt_lines(s, indent + 1)
        lines.append(f"{pad}}}")
        return lines
    if isinstance(stmt, While):
        lines = [f"{pad}while ({_expr_str(stmt.cond)}) bound {stmt.bound} {{"]
        for s in stmt.body:
            lines += _stmt_lines(s, indent + 1)
        lines.append(f"{pad}}}")
        return lines
    if isinstance(stmt, Return):
        return [f"{pad}return {', '.join(_expr_str(v) for v in stmt.values)};"]
    raise ValueError(stmt)


def pretty_print(program: Program) -> str:
    lines = [f"width {program.width};", ""]
    for f in program.functions:
        lines.append(f"func {f.name}({', '.join(f.params)}) {{")
        for s in f.body:
            lines += _stmt_lines(s, 1)
        lines.append("}")
        lines.append("")
    return "\n".join(lines)
