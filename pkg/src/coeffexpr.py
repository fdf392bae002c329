"""
Coefficient expression language.

The scalar coefficients of the model (σ, b, β̃ and custom jump maps G) are
written as short expressions in the config file and parsed here into an
immutable syntax tree.

Grammar (recursive descent, usual precedence):
  expr    := term (('+' | '-') term)*
  term    := unary (('*' | '/') unary)*
  unary   := '-' unary | primary
  primary := NUMBER | NAME | NAME '(' args ')' | '(' expr ')'

Functions: sin, cos, exp, tanh, abs, sign, clamp(e, lo, hi), min, max,
pow(e, literal).

Usage:
    from src.coeffexpr import parse_expr, eval_expr

    beta = parse_expr("clamp(1 + 0.5*sin(x), 0.6, 1.8)")
    eval_expr(beta, 0.0)            # 1.0
    eval_expr(beta, np.zeros(4))    # vectorized
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

Number = Union[float, np.ndarray]


class ExprSyntaxError(ValueError):
    """Parse failure with a 1-based column."""

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} at column {column}")
        self.column = column


class ExprEvaluationError(ArithmeticError):
    """Division by zero or a non-finite value during evaluation."""


# ─── Syntax tree ──────────────────────────────────────────────────────────────


class Expr:
    """Base class of all syntax tree nodes."""

    def evaluate(self, env: Dict[str, Number]) -> Number:
        raise NotImplementedError

    def format(self) -> str:
        raise NotImplementedError

    def variables(self) -> frozenset:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.format()


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def evaluate(self, env):
        return self.value

    def format(self) -> str:
        return repr(float(self.value))

    def variables(self) -> frozenset:
        return frozenset()


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def evaluate(self, env):
        return env[self.name]

    def format(self) -> str:
        return self.name

    def variables(self) -> frozenset:
        return frozenset((self.name,))


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr

    def evaluate(self, env):
        return -_checked(self.operand.evaluate(env), self.operand)

    def format(self) -> str:
        return "-" + self.operand.format()

    def variables(self) -> frozenset:
        return self.operand.variables()


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def evaluate(self, env):
        a = _checked(self.left.evaluate(env), self.left)
        b = _checked(self.right.evaluate(env), self.right)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0.0):
            raise ExprEvaluationError(f"division by zero in {self.format()}")
        return a / b

    def format(self) -> str:
        return f"({self.left.format()} {self.op} {self.right.format()})"

    def variables(self) -> frozenset:
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: Tuple[Expr, ...]

    def evaluate(self, env):
        values = [_checked(a.evaluate(env), a) for a in self.args]
        return _FUNCTIONS[self.func][2](*values)

    def format(self) -> str:
        return f"{self.func}({', '.join(a.format() for a in self.args)})"

    def variables(self) -> frozenset:
        out = frozenset()
        for a in self.args:
            out |= a.variables()
        return out


def _checked(value: Number, node: Expr) -> Number:
    if not np.all(np.isfinite(value)):
        raise ExprEvaluationError(f"non-finite value in {node.format()}")
    return value


def _min(*args):
    out = args[0]
    for a in args[1:]:
        out = np.minimum(out, a)
    return out


def _max(*args):
    out = args[0]
    for a in args[1:]:
        out = np.maximum(out, a)
    return out


# name -> (min arity, max arity or None, implementation)
_FUNCTIONS = {
    "sin": (1, 1, np.sin),
    "cos": (1, 1, np.cos),
    "exp": (1, 1, np.exp),
    "tanh": (1, 1, np.tanh),
    "abs": (1, 1, np.abs),
    "sign": (1, 1, np.sign),
    "clamp": (3, 3, lambda e, lo, hi: np.minimum(np.maximum(e, lo), hi)),
    "min": (2, None, _min),
    "max": (2, None, _max),
    "pow": (2, 2, np.power),
}


# ─── Parser ───────────────────────────────────────────────────────────────────

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/(),])"
    r")"
)


@dataclass(frozen=True)
class _Token:
    kind: str      # number | name | op | end
    text: str
    column: int    # 1-based


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.lastgroup is None:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(_Token("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.variables = tuple(variables)

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.current
        if tok.text != text:
            found = "end of input" if tok.kind == "end" else repr(tok.text)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", tok.column)
        return self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.current
        if tok.kind != "end":
            if tok.text == ")":
                raise ExprSyntaxError("unbalanced ')'", tok.column)
            raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.column)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.current.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.current.text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.current.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.current
        if tok.kind == "number":
            self.advance()
            return Num(float(tok.text))
        if tok.text == "(":
            self.advance()
            node = self.expr()
            if self.current.text != ")":
                raise ExprSyntaxError("unbalanced '('", tok.column)
            self.advance()
            return node
        if tok.kind == "name":
            self.advance()
            if self.current.text == "(":
                return self.call(tok)
            if tok.text in self.variables:
                return Var(tok.text)
            if tok.text in _FUNCTIONS:
                raise ExprSyntaxError(f"function {tok.text!r} needs arguments", tok.column)
            raise ExprSyntaxError(f"unknown identifier {tok.text!r}", tok.column)
        if tok.kind == "end":
            raise ExprSyntaxError("unexpected end of input", tok.column)
        raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.column)

    def call(self, name: _Token) -> Expr:
        if name.text not in _FUNCTIONS:
            raise ExprSyntaxError(f"unknown function {name.text!r}", name.column)
        open_paren = self.expect("(")
        args = []
        if self.current.text != ")":
            args.append(self.expr())
            while self.current.text == ",":
                self.advance()
                args.append(self.expr())
        if self.current.text != ")":
            if self.current.kind == "end":
                raise ExprSyntaxError("unbalanced '('", open_paren.column)
            raise ExprSyntaxError(f"unexpected {self.current.text!r}", self.current.column)
        self.advance()

        lo, hi, _ = _FUNCTIONS[name.text]
        if len(args) < lo or (hi is not None and len(args) > hi):
            want = str(lo) if lo == hi else (f"{lo}-{hi}" if hi else f"at least {lo}")
            raise ExprSyntaxError(
                f"{name.text}() takes {want} arguments, got {len(args)}", name.column
            )
        if name.text == "pow":
            args[1] = _literal_exponent(args[1], name.column)
        return Call(name.text, tuple(args))


def _literal_exponent(node: Expr, column: int) -> Num:
    if isinstance(node, Num):
        return node
    if isinstance(node, Neg) and isinstance(node.operand, Num):
        return Num(-node.operand.value)
    raise ExprSyntaxError("pow() exponent must be a numeric literal", column)


# ─── Public API ───────────────────────────────────────────────────────────────


def parse_expr(text: str, variables: Sequence[str] = ("x",)) -> Expr:
    """Parse an expression over the given variable names."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 1)
    return _Parser(text, variables).parse()


def format_expr(e: Expr) -> str:
    """Canonical text: shortest round-trip literals, parenthesized binary ops."""
    return e.format()


def eval_expr(e: Expr, x: Number, z: Optional[Number] = None) -> Number:
    """
    Evaluate at x (and z for two-variable expressions).

    Scalars give a float, arrays give an array of the broadcast shape.
    Division by zero and non-finite values raise ExprEvaluationError.
    """
    scalar = np.ndim(x) == 0 and (z is None or np.ndim(z) == 0)
    env = {"x": x if scalar else np.asarray(x, dtype=float)}
    if z is not None:
        env["z"] = z if scalar else np.asarray(z, dtype=float)
    for name, value in env.items():
        if not np.all(np.isfinite(value)):
            raise ExprEvaluationError(f"non-finite input {name}")
    missing = e.variables() - set(env)
    if missing:
        raise ExprEvaluationError(f"no value for {', '.join(sorted(missing))}")

    with np.errstate(all="ignore"):
        out = _checked(e.evaluate(env), e)
    if scalar:
        return float(out)
    shape = np.broadcast(*env.values()).shape
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()


def is_constant(e: Expr) -> bool:
    return not e.variables()


def constant_value(e: Expr) -> float:
    if not is_constant(e):
        raise ValueError(f"{e.format()} depends on {', '.join(sorted(e.variables()))}")
    return float(eval_expr(e, 0.0, 0.0))


def estimate_lipschitz(e: Expr, lo: float, hi: float, n: int) -> float:
    """Largest adjacent difference quotient on a uniform grid (a lower bound)."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if n < 2:
        raise ValueError("need at least 2 grid points")
    grid = np.linspace(lo, hi, n)
    values = eval_expr(e, grid)
    return float(np.max(np.abs(np.diff(values) / np.diff(grid))))


def check_range(e: Expr, lo: float, hi: float, band: Tuple[float, float], n: int) -> bool:
    """True iff every grid evaluation on [lo, hi] lies in the closed band."""
    a, b = band
    values = eval_expr(e, np.linspace(lo, hi, n))
    return bool(np.all((values >= a) & (values <= b)))
