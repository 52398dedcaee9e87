"""Interpreter for the Structured Text subset emitted by :mod:`fastshed.st.emit`.

Supported: ``VAR_GLOBAL [CONSTANT]`` blocks, ``FUNCTION_BLOCK`` with
``VAR_INPUT`` / ``VAR_OUTPUT`` / ``VAR`` / ``VAR CONSTANT`` sections, scalar
and array (1-D, 2-D) variables of BOOL, SINT, INT, DINT, LINT, REAL and
LREAL, assignment, IF/ELSIF/ELSE, FOR (with BY), and the operators
OR XOR AND NOT = <> < > <= >= + - * / MOD.  Anything else raises
:class:`UnsupportedConstructError` naming the token and its position.

Evaluation is strictly left to right with no short-circuiting.  Integers
are exact and range-checked on assignment; LREAL is IEEE-754 double; REAL
is rounded to single precision on assignment.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional

from ..errors import StRuntimeError, UnsupportedConstructError

INT_RANGES = {
    "SINT": (-(2**7), 2**7 - 1),
    "INT": (-(2**15), 2**15 - 1),
    "DINT": (-(2**31), 2**31 - 1),
    "LINT": (-(2**63), 2**63 - 1),
}
REAL_TYPES = {"REAL", "LREAL"}
BASE_TYPES = set(INT_RANGES) | REAL_TYPES | {"BOOL"}

KEYWORDS = {
    "VAR_GLOBAL", "VAR_INPUT", "VAR_OUTPUT", "VAR", "END_VAR", "CONSTANT", "FUNCTION_BLOCK",
    "END_FUNCTION_BLOCK", "ARRAY", "OF", "IF", "THEN", "ELSIF", "ELSE", "END_IF", "FOR", "TO", "BY",
    "DO", "END_FOR", "AND", "OR", "XOR", "NOT", "MOD", "TRUE", "FALSE",
}
UNSUPPORTED = {
    "WHILE", "END_WHILE", "REPEAT", "UNTIL", "END_REPEAT", "CASE", "END_CASE", "EXIT", "RETURN",
    "FUNCTION", "END_FUNCTION", "PROGRAM", "END_PROGRAM", "VAR_IN_OUT", "VAR_TEMP", "VAR_EXTERNAL",
    "STRUCT", "END_STRUCT", "TYPE", "END_TYPE", "POINTER", "REF_TO", "STRING", "WSTRING", "TIME",
    "CONTINUE", "JMP", "METHOD", "INTERFACE", "CLASS", "RETAIN", "AT",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\(\*.*?\*\)|//[^\n]*)
  | (?P<real>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|\.\.|<>|<=|>=|[-+*/=<>()\[\],;:])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str
    value: Any
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise UnsupportedConstructError(text[pos], line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "real":
            out.append(Token("num", float(chunk), line, col))
        elif kind == "int":
            out.append(Token("num", int(chunk), line, col))
        elif kind == "name":
            upper = chunk.upper()
            if upper in UNSUPPORTED:
                raise UnsupportedConstructError(chunk, line, col)
            out.append(Token("kw" if upper in KEYWORDS else "name", upper, line, col))
        elif kind == "op":
            out.append(Token("op", chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
        if kind == "name" and pos < len(text) and text[pos] == "#":
            raise UnsupportedConstructError(chunk + "#", line, col)
    out.append(Token("eof", None, line, pos - line_start + 1))
    return out


# --------------------------------------------------------------------------
# AST


@dataclass
class TypeSpec:
    base: str
    dims: list  # list of (lo_expr, hi_expr)


@dataclass
class VarDecl:
    name: str
    type: TypeSpec
    init: Any
    section: str
    constant: bool
    line: int


@dataclass
class Block:
    name: str
    decls: list
    body: list
    line: int


@dataclass
class Program:
    globals: list
    blocks: dict = field(default_factory=dict)


class Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def unsupported(self, tok: Optional[Token] = None):
        tok = tok or self.tok
        raise UnsupportedConstructError(tok.value if tok.value is not None else "<eof>", tok.line, tok.col)

    def accept(self, kind: str, value: Any = None) -> Optional[Token]:
        t = self.tok
        if t.kind == kind and (value is None or t.value == value):
            self.i += 1
            return t
        return None

    def expect(self, kind: str, value: Any = None) -> Token:
        t = self.accept(kind, value)
        if t is None:
            self.unsupported()
        return t

    def program(self) -> Program:
        prog = Program(globals=[])
        while self.tok.kind != "eof":
            if self.accept("kw", "VAR_GLOBAL"):
                prog.globals += self.var_section("GLOBAL")
            elif self.tok.kind == "kw" and self.tok.value == "FUNCTION_BLOCK":
                fb = self.function_block()
                prog.blocks[fb.name] = fb
            else:
                self.unsupported()
        return prog

    def function_block(self) -> Block:
        start = self.expect("kw", "FUNCTION_BLOCK")
        name = self.expect("name").value
        decls = []
        while True:
            t = self.tok
            if t.kind == "kw" and t.value in ("VAR_INPUT", "VAR_OUTPUT", "VAR"):
                self.i += 1
                decls += self.var_section({"VAR_INPUT": "INPUT", "VAR_OUTPUT": "OUTPUT", "VAR": "LOCAL"}[t.value])
            else:
                break
        body = self.statements(("END_FUNCTION_BLOCK",))
        self.expect("kw", "END_FUNCTION_BLOCK")
        return Block(name, decls, body, start.line)

    def var_section(self, section: str) -> list[VarDecl]:
        constant = bool(self.accept("kw", "CONSTANT"))
        out = []
        while not self.accept("kw", "END_VAR"):
            line = self.tok.line
            names = [self.expect("name").value]
            while self.accept("op", ","):
                names.append(self.expect("name").value)
            self.expect("op", ":")
            tspec = self.type_spec()
            init = None
            if self.accept("op", ":="):
                init = self.array_literal() if self.tok.kind == "op" and self.tok.value == "[" else self.expr()
            self.expect("op", ";")
            out += [VarDecl(n, tspec, init, section, constant, line) for n in names]
        return out

    def type_spec(self) -> TypeSpec:
        if self.accept("kw", "ARRAY"):
            self.expect("op", "[")
            dims = []
            while True:
                lo = self.expr()
                self.expect("op", "..")
                hi = self.expr()
                dims.append((lo, hi))
                if not self.accept("op", ","):
                    break
            self.expect("op", "]")
            self.expect("kw", "OF")
            base = self.expect("name")
            if base.value not in BASE_TYPES:
                self.unsupported(base)
            if len(dims) > 2:
                self.unsupported(base)
            return TypeSpec(base.value, dims)
        base = self.expect("name")
        if base.value not in BASE_TYPES:
            self.unsupported(base)
        return TypeSpec(base.value, [])

    def array_literal(self):
        self.expect("op", "[")
        items = []
        if not self.accept("op", "]"):
            while True:
                # repetition n(value)
                if (self.tok.kind == "num" and isinstance(self.tok.value, int)
                        and self.toks[self.i + 1].kind == "op" and self.toks[self.i + 1].value == "("):
                    count = self.tok.value
                    self.i += 2
                    value = self.expr()
                    self.expect("op", ")")
                    items.append(("rep", count, value))
                else:
                    items.append(("one", self.expr()))
                if not self.accept("op", ","):
                    break
            self.expect("op", "]")
        return ("array", items)

    def statements(self, terminators: tuple[str, ...]) -> list:
        out = []
        while not (self.tok.kind == "kw" and self.tok.value in terminators):
            if self.tok.kind == "eof":
                self.unsupported()
            stmt = self.statement()
            if stmt is not None:
                out.append(stmt)
        return out

    def statement(self):
        t = self.tok
        if self.accept("op", ";"):
            return None
        if t.kind == "kw" and t.value == "IF":
            return self.if_stmt()
        if t.kind == "kw" and t.value == "FOR":
            return self.for_stmt()
        if t.kind == "name":
            target = self.lvalue()
            self.expect("op", ":=")
            value = self.expr()
            self.expect("op", ";")
            return ("assign", target, value, t.line, t.col)
        self.unsupported()

    def if_stmt(self):
        self.expect("kw", "IF")
        arms = []
        cond = self.expr()
        self.expect("kw", "THEN")
        arms.append((cond, self.statements(("ELSIF", "ELSE", "END_IF"))))
        else_body = []
        while True:
            if self.accept("kw", "ELSIF"):
                cond = self.expr()
                self.expect("kw", "THEN")
                arms.append((cond, self.statements(("ELSIF", "ELSE", "END_IF"))))
            elif self.accept("kw", "ELSE"):
                else_body = self.statements(("END_IF",))
            else:
                break
        self.expect("kw", "END_IF")
        self.accept("op", ";")
        return ("if", arms, else_body)

    def for_stmt(self):
        t = self.expect("kw", "FOR")
        var = self.expect("name")
        self.expect("op", ":=")
        start = self.expr()
        self.expect("kw", "TO")
        stop = self.expr()
        step = self.expr() if self.accept("kw", "BY") else ("num", 1, t.line, t.col)
        self.expect("kw", "DO")
        body = self.statements(("END_FOR",))
        self.expect("kw", "END_FOR")
        self.accept("op", ";")
        return ("for", ("name", var.value, var.line, var.col), start, stop, step, body, t.line, t.col)

    def lvalue(self):
        t = self.expect("name")
        if self.accept("op", "["):
            idx = [self.expr()]
            while self.accept("op", ","):
                idx.append(self.expr())
            self.expect("op", "]")
            return ("index", t.value, idx, t.line, t.col)
        return ("name", t.value, t.line, t.col)

    # precedence climbing, lowest first
    _LEVELS = [
        ("kw", ("OR",)),
        ("kw", ("XOR",)),
        ("kw", ("AND",)),
        ("op", ("=", "<>")),
        ("op", ("<", ">", "<=", ">=")),
        ("op", ("+", "-")),
        ("mul", ("*", "/", "MOD")),
    ]

    def expr(self, level: int = 0):
        if level == len(self._LEVELS):
            return self.unary()
        _, ops = self._LEVELS[level]
        left = self.expr(level + 1)
        while self.tok.kind in ("op", "kw") and self.tok.value in ops:
            t = self.tok
            self.i += 1
            right = self.expr(level + 1)
            left = ("bin", t.value, left, right, t.line, t.col)
        return left

    def unary(self):
        t = self.tok
        if self.accept("op", "-"):
            return ("neg", self.unary(), t.line, t.col)
        if self.accept("op", "+"):
            return self.unary()
        if self.accept("kw", "NOT"):
            return ("not", self.unary(), t.line, t.col)
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return ("num", t.value, t.line, t.col)
        if t.kind == "kw" and t.value in ("TRUE", "FALSE"):
            self.i += 1
            return ("num", t.value == "TRUE", t.line, t.col)
        if self.accept("op", "("):
            e = self.expr()
            self.expect("op", ")")
            return e
        if t.kind == "name":
            if self.toks[self.i + 1].kind == "op" and self.toks[self.i + 1].value == "(":
                self.unsupported()  # function calls
            return self.lvalue()
        self.unsupported()


def parse(text: str) -> Program:
    return Parser(tokenize(text)).program()


# --------------------------------------------------------------------------
# runtime


def _to_real32(x: float) -> float:
    return struct.unpack("f", struct.pack("f", x))[0]


class Var:
    __slots__ = ("name", "base", "dims", "data", "constant")

    def __init__(self, name: str, base: str, dims: list[tuple[int, int]], constant: bool):
        self.name = name
        self.base = base
        self.dims = dims
        self.constant = constant
        size = 1
        for lo, hi in dims:
            if hi < lo:
                raise StRuntimeError(f"{name}: empty array range [{lo}..{hi}]")
            size *= hi - lo + 1
        zero = False if base == "BOOL" else 0.0 if base in REAL_TYPES else 0
        self.data = [zero] * size

    def offset(self, idx: list[int]) -> int:
        if len(idx) != len(self.dims):
            raise StRuntimeError(f"{self.name}: expected {len(self.dims)} indices, got {len(idx)}")
        off = 0
        for i, (lo, hi) in zip(idx, self.dims):
            if isinstance(i, bool) or not isinstance(i, int):
                raise StRuntimeError(f"{self.name}: non-integer index {i!r}")
            if not lo <= i <= hi:
                raise StRuntimeError(f"{self.name}: index {i} outside [{lo}..{hi}]")
            off = off * (hi - lo + 1) + (i - lo)
        return off

    def coerce(self, value):
        base = self.base
        if base == "BOOL":
            if not isinstance(value, bool):
                raise StRuntimeError(f"{self.name}: cannot assign {value!r} to BOOL")
            return value
        if isinstance(value, bool):
            raise StRuntimeError(f"{self.name}: cannot assign BOOL to {base}")
        if base in INT_RANGES:
            if not isinstance(value, int):
                raise StRuntimeError(f"{self.name}: cannot assign {value!r} to {base}")
            lo, hi = INT_RANGES[base]
            if not lo <= value <= hi:
                raise StRuntimeError(f"{self.name}: {value} overflows {base}")
            return value
        value = float(value)
        return _to_real32(value) if base == "REAL" else value

    def to_python(self):
        if not self.dims:
            return self.data[0]
        if len(self.dims) == 1:
            return list(self.data)
        (lo1, hi1), (lo2, hi2) = self.dims
        n2 = hi2 - lo2 + 1
        return [self.data[r * n2:(r + 1) * n2] for r in range(hi1 - lo1 + 1)]

    def load(self, value) -> None:
        if not self.dims:
            self.data[0] = self.coerce(value)
            return
        flat = _flatten(value)
        if len(flat) != len(self.data):
            raise StRuntimeError(f"{self.name}: expected {len(self.data)} values, got {len(flat)}")
        self.data = [self.coerce(v) for v in flat]


def _flatten(value) -> list:
    if isinstance(value, (list, tuple)):
        out = []
        for v in value:
            out += _flatten(v) if isinstance(v, (list, tuple)) else [v]
        return out
    return [value]


def _arith(op: str, a, b, line: int, col: int):
    if isinstance(a, bool) or isinstance(b, bool):
        raise StRuntimeError(f"line {line}, column {col}: arithmetic on BOOL")
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise StRuntimeError(f"line {line}, column {col}: division by zero")
        if isinstance(a, int) and isinstance(b, int):
            q = abs(a) // abs(b)
            return q if (a >= 0) == (b >= 0) else -q
        return a / b
    # MOD, sign follows the dividend
    if not (isinstance(a, int) and isinstance(b, int)):
        raise StRuntimeError(f"line {line}, column {col}: MOD needs integer operands")
    if b == 0:
        raise StRuntimeError(f"line {line}, column {col}: MOD by zero")
    r = abs(a) % abs(b)
    return r if a >= 0 else -r


def _logic(op: str, a, b, line: int, col: int):
    if not (isinstance(a, bool) and isinstance(b, bool)):
        raise StRuntimeError(f"line {line}, column {col}: {op} needs BOOL operands")
    if op == "AND":
        return a and b
    if op == "OR":
        return a or b
    return a != b


_CMP = {
    "=": lambda a, b: a == b,
    "<>": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
}


class _Compiler:
    def __init__(self, scope: Mapping[str, Var]):
        self.scope = scope

    def var(self, name: str, line: int, col: int) -> Var:
        try:
            return self.scope[name]
        except KeyError:
            raise StRuntimeError(f"line {line}, column {col}: unknown variable {name}") from None

    def expr(self, node) -> Callable[[], Any]:
        tag = node[0]
        if tag == "num":
            v = node[1]
            return lambda: v
        if tag == "name":
            var = self.var(node[1], node[2], node[3])
            if var.dims:
                raise StRuntimeError(f"line {node[2]}, column {node[3]}: array {var.name} used as a scalar")
            data = var.data
            return lambda: data[0]
        if tag == "index":
            var = self.var(node[1], node[3], node[4])
            idx = [self.expr(e) for e in node[2]]
            if len(idx) == 1 and len(var.dims) == 1:
                (lo, hi), = var.dims
                f0 = idx[0]

                def get1():
                    i = f0()
                    if isinstance(i, bool) or not isinstance(i, int) or not lo <= i <= hi:
                        raise StRuntimeError(f"{var.name}: index {i!r} outside [{lo}..{hi}]")
                    return var.data[i - lo]
                return get1
            return lambda: var.data[var.offset([f() for f in idx])]
        if tag == "neg":
            inner = self.expr(node[1])
            line, col = node[2], node[3]

            def neg():
                v = inner()
                if isinstance(v, bool):
                    raise StRuntimeError(f"line {line}, column {col}: negation of BOOL")
                return -v
            return neg
        if tag == "not":
            inner = self.expr(node[1])
            line, col = node[2], node[3]

            def not_():
                v = inner()
                if not isinstance(v, bool):
                    raise StRuntimeError(f"line {line}, column {col}: NOT needs a BOOL operand")
                return not v
            return not_
        if tag == "bin":
            op, left, right, line, col = node[1], self.expr(node[2]), self.expr(node[3]), node[4], node[5]
            if op in _CMP:
                cmp = _CMP[op]

                def compare():
                    a = left()
                    b = right()
                    if isinstance(a, bool) != isinstance(b, bool):
                        raise StRuntimeError(f"line {line}, column {col}: comparing BOOL with a number")
                    return cmp(a, b)
                return compare
            if op in ("AND", "OR", "XOR"):
                def logic():
                    a = left()
                    b = right()
                    return _logic(op, a, b, line, col)
                return logic

            def arith():
                a = left()
                b = right()
                return _arith(op, a, b, line, col)
            return arith
        raise StRuntimeError(f"cannot compile node {tag}")

    def store(self, target) -> Callable[[Any], None]:
        if target[0] == "name":
            var = self.var(target[1], target[2], target[3])
            if var.dims:
                raise StRuntimeError(f"line {target[2]}: cannot assign whole array {var.name}")
            if var.constant:
                raise StRuntimeError(f"line {target[2]}: assignment to constant {var.name}")

            def put(v):
                var.data[0] = var.coerce(v)
            return put
        var = self.var(target[1], target[3], target[4])
        if var.constant:
            raise StRuntimeError(f"line {target[3]}: assignment to constant {var.name}")
        idx = [self.expr(e) for e in target[2]]

        def put_item(v):
            off = var.offset([f() for f in idx])
            var.data[off] = var.coerce(v)
        return put_item

    def block(self, stmts) -> Callable[[], None]:
        compiled = [self.stmt(s) for s in stmts]

        def run():
            for c in compiled:
                c()
        return run

    def stmt(self, s) -> Callable[[], None]:
        tag = s[0]
        if tag == "assign":
            value = self.expr(s[2])
            put = self.store(s[1])

            def assign():
                put(value())
            return assign
        if tag == "if":
            arms = [(self.expr(c), self.block(b)) for c, b in s[1]]
            otherwise = self.block(s[2])

            def if_():
                for cond, body in arms:
                    v = cond()
                    if not isinstance(v, bool):
                        raise StRuntimeError("IF condition is not BOOL")
                    if v:
                        body()
                        return
                otherwise()
            return if_
        if tag == "for":
            _, var_node, start, stop, step, body, line, col = s
            var = self.var(var_node[1], var_node[2], var_node[3])
            if var.base not in INT_RANGES or var.dims:
                raise StRuntimeError(f"line {line}, column {col}: FOR variable must be an integer scalar")
            put = self.store(var_node)
            f_start, f_stop, f_step = self.expr(start), self.expr(stop), self.expr(step)
            run_body = self.block(body)

            def for_():
                i = f_start()
                hi = f_stop()
                by = f_step()
                if by == 0:
                    raise StRuntimeError(f"line {line}, column {col}: FOR step is zero")
                put(i)
                while (var.data[0] <= hi) if by > 0 else (var.data[0] >= hi):
                    run_body()
                    put(var.data[0] + by)
            return for_
        raise StRuntimeError(f"cannot compile statement {tag}")


def _const_int(node, scope: Mapping[str, Var]) -> int:
    value = _Compiler(scope).expr(node)()
    if isinstance(value, bool) or not isinstance(value, int):
        raise StRuntimeError(f"array bound {value!r} is not an integer constant")
    return value


def _instantiate(decls: list[VarDecl], scope: dict[str, Var]) -> None:
    for d in decls:
        if d.name in scope and d.section != "GLOBAL":
            raise StRuntimeError(f"line {d.line}: {d.name} shadows another declaration")
        dims = [(_const_int(lo, scope), _const_int(hi, scope)) for lo, hi in d.type.dims]
        var = Var(d.name, d.type.base, dims, d.constant)
        if d.init is not None:
            comp = _Compiler(scope)
            if isinstance(d.init, tuple) and d.init[0] == "array":
                values = []
                for item in d.init[1]:
                    if item[0] == "rep":
                        values += [comp.expr(item[2])()] * item[1]
                    else:
                        values.append(comp.expr(item[1])())
                if not var.dims:
                    raise StRuntimeError(f"line {d.line}: array initializer for scalar {d.name}")
                if len(values) != len(var.data):
                    raise StRuntimeError(
                        f"line {d.line}: {d.name} needs {len(var.data)} initial values, got {len(values)}")
                var.data = [var.coerce(v) for v in values]
            else:
                value = comp.expr(d.init)()
                var.data = [var.coerce(value)] * len(var.data)
        scope[d.name] = var


def run_block(program: Program, block: str, inputs: Mapping[str, Any]) -> dict[str, Any]:
    """Execute one call of ``block`` on a fresh instance; returns its VAR_OUTPUT values.

    Identifiers are case-insensitive: input keys may use any case and output
    names come back upper-cased.  Arrays are passed and returned as (nested)
    lists in row-major order.
    """
    name = block.upper()
    if name not in program.blocks:
        raise StRuntimeError(f"no function block named {block}")
    fb = program.blocks[name]
    scope: dict[str, Var] = {}
    _instantiate(program.globals, scope)
    _instantiate(fb.decls, scope)
    in_names = {d.name for d in fb.decls if d.section == "INPUT"}
    for key, value in inputs.items():
        k = key.upper()
        if k not in in_names:
            raise StRuntimeError(f"{block} has no input {key}")
        scope[k].load(value)
    _Compiler(scope).block(fb.body)()
    return {d.name: scope[d.name].to_python() for d in fb.decls if d.section == "OUTPUT"}


def global_constants(program: Program) -> dict[str, Any]:
    scope: dict[str, Var] = {}
    _instantiate(program.globals, scope)
    return {k: v.to_python() for k, v in scope.items()}
