"""Scalar expression language: parsing, printing, evaluation and symbolic derivatives.

Every coefficient of a form, every PDE right-hand side and every scenario field
is an :class:`Expression`. Trees are immutable; the smart constructors
(``add``, ``mul``, ...) fold constants and absorb 0/1 operands, the parser
builds raw trees so that ``parse(to_text(e)) == e`` for parsed trees.
"""
import logging
import math
import re
from dataclasses import dataclass
from functools import singledispatch
from typing import Callable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .errors import DomainViolationError, ExpressionSyntaxError, UnboundVariableError, UnknownFunctionError

logger = logging.getLogger(__name__)

Point = Mapping[str, float]
Number = Union[int, float]

FUNCTIONS = ("ln", "exp", "sin", "cos", "sqrt")
UNARY_OPS = ("neg",) + FUNCTIONS
BINARY_SYMBOLS = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
_PRECEDENCE = {"add": 1, "sub": 1, "mul": 2, "div": 2, "pow": 3}
_ATOM = 4


class Expression:
    __slots__ = ()

    def __add__(self, other) -> 'Expression':
        return add(self, as_expression(other))

    def __radd__(self, other) -> 'Expression':
        return add(as_expression(other), self)

    def __sub__(self, other) -> 'Expression':
        return sub(self, as_expression(other))

    def __rsub__(self, other) -> 'Expression':
        return sub(as_expression(other), self)

    def __mul__(self, other) -> 'Expression':
        return mul(self, as_expression(other))

    def __rmul__(self, other) -> 'Expression':
        return mul(as_expression(other), self)

    def __truediv__(self, other) -> 'Expression':
        return div(self, as_expression(other))

    def __rtruediv__(self, other) -> 'Expression':
        return div(as_expression(other), self)

    def __pow__(self, other) -> 'Expression':
        return power(self, as_expression(other))

    def __rpow__(self, other) -> 'Expression':
        return power(as_expression(other), self)

    def __neg__(self) -> 'Expression':
        return neg(self)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Const(Expression):
    value: float


@dataclass(frozen=True)
class Var(Expression):
    name: str


@dataclass(frozen=True)
class Unary(Expression):
    op: str
    arg: Expression


@dataclass(frozen=True)
class Binary(Expression):
    op: str
    left: Expression
    right: Expression


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expression(value: Union[Expression, Number, str]) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, str):
        return parse(value)
    return Const(float(value))


def _is_const(e: Expression, value: Optional[float] = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# Smart constructors: constant folding and 0/1 absorption only.

def add(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("add", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Binary("sub", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Binary("mul", a, b)


def div(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Binary("div", a, b)


def power(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        try:
            return Const(_apply_binary("pow", a.value, b.value))
        except DomainViolationError:
            return Binary("pow", a, b)
    if _is_const(b, 0.0):
        return ONE
    if _is_const(b, 1.0):
        return a
    return Binary("pow", a, b)


def neg(a: Expression) -> Expression:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def _function(op: str) -> Callable[[Union[Expression, Number]], Expression]:
    def build(a: Union[Expression, Number]) -> Expression:
        a = as_expression(a)
        if isinstance(a, Const):
            try:
                return Const(_apply_unary(op, a.value))
            except DomainViolationError:
                pass
        return Unary(op, a)
    build.__name__ = op
    return build


ln = _function("ln")
exp = _function("exp")
sin = _function("sin")
cos = _function("cos")
sqrt = _function("sqrt")


# Scalar arithmetic with the language's domain rules.

def _apply_unary(op: str, x: float) -> float:
    try:
        if op == "neg":
            result = -x
        elif op == "ln":
            if x <= 0.0:
                raise DomainViolationError("ln", x)
            result = math.log(x)
        elif op == "exp":
            result = math.exp(x)
        elif op == "sin":
            result = math.sin(x)
        elif op == "cos":
            result = math.cos(x)
        elif op == "sqrt":
            if x < 0.0:
                raise DomainViolationError("sqrt", x)
            result = math.sqrt(x)
        else:
            raise ValueError(f"unknown unary operator '{op}'")
    except (OverflowError, ValueError) as exc:
        raise DomainViolationError(op, x) from exc
    if not math.isfinite(result):
        raise DomainViolationError(op, x)
    return result


def _apply_binary(op: str, a: float, b: float) -> float:
    try:
        if op == "add":
            result = a + b
        elif op == "sub":
            result = a - b
        elif op == "mul":
            result = a * b
        elif op == "div":
            if b == 0.0:
                raise DomainViolationError("div", b)
            result = a / b
        elif op == "pow":
            if a == 0.0 and b < 0.0:
                raise DomainViolationError("pow", (a, b))
            if a < 0.0 and not float(b).is_integer():
                raise DomainViolationError("pow", (a, b))
            result = math.pow(a, b)
        else:
            raise ValueError(f"unknown binary operator '{op}'")
    except (OverflowError, ValueError, ZeroDivisionError) as exc:
        raise DomainViolationError(op, (a, b)) from exc
    if not math.isfinite(result):
        raise DomainViolationError(op, (a, b))
    return result


# Structure queries.

def free_variables(e: Expression) -> Set[str]:
    names: Set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            names.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, Binary):
            stack.append(node.left)
            stack.append(node.right)
    return names


def depends_on(e: Expression, var: str) -> bool:
    return var in free_variables(e)


def substitute(e: Expression, bindings: Mapping[str, Union[Expression, Number]]) -> Expression:
    """Replace variables by expressions or numbers, folding constants on the way up."""
    if not bindings:
        return e
    resolved = {name: as_expression(value) for name, value in bindings.items()}
    return _substitute(e, resolved)


def _substitute(e: Expression, bindings: Mapping[str, Expression]) -> Expression:
    if isinstance(e, Var):
        return bindings.get(e.name, e)
    if isinstance(e, Unary):
        arg = _substitute(e.arg, bindings)
        return neg(arg) if e.op == "neg" else _function(e.op)(arg)
    if isinstance(e, Binary):
        left = _substitute(e.left, bindings)
        right = _substitute(e.right, bindings)
        return _BUILDERS[e.op](left, right)
    return e


_BUILDERS = {"add": add, "sub": sub, "mul": mul, "div": div, "pow": power}


# Evaluation.

@singledispatch
def evaluate(e: Expression, at: Point) -> float:
    raise TypeError(f"cannot evaluate {type(e).__name__}")


@evaluate.register
def _(e: Const, at: Point) -> float:
    return e.value


@evaluate.register
def _(e: Var, at: Point) -> float:
    try:
        return float(at[e.name])
    except KeyError:
        raise UnboundVariableError(e.name) from None


@evaluate.register
def _(e: Unary, at: Point) -> float:
    return _apply_unary(e.op, evaluate(e.arg, at))


@evaluate.register
def _(e: Binary, at: Point) -> float:
    return _apply_binary(e.op, evaluate(e.left, at), evaluate(e.right, at))


def compile_expression(e: Expression, names: Sequence[str]) -> Callable[[Sequence[float]], float]:
    """Turn ``e`` into a closure over a positional value vector ordered as ``names``."""
    index = {name: i for i, name in enumerate(names)}
    missing = free_variables(e) - set(index)
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    return _compile(e, index)


def _compile(e: Expression, index: Mapping[str, int]) -> Callable[[Sequence[float]], float]:
    if isinstance(e, Const):
        value = e.value
        return lambda values: value
    if isinstance(e, Var):
        i = index[e.name]
        return lambda values: float(values[i])
    if isinstance(e, Unary):
        arg = _compile(e.arg, index)
        op = e.op
        return lambda values: _apply_unary(op, arg(values))
    if isinstance(e, Binary):
        left = _compile(e.left, index)
        right = _compile(e.right, index)
        op = e.op
        return lambda values: _apply_binary(op, left(values), right(values))
    raise TypeError(f"cannot compile {type(e).__name__}")


def evaluate_grid(e: Expression, columns: Mapping[str, np.ndarray]) -> np.ndarray:
    """Vectorized evaluation; points with a domain violation come back as NaN."""
    shape = np.shape(next(iter(columns.values()))) if columns else ()
    with np.errstate(all="ignore"):
        return _grid_eval(e, columns, shape)


def _finite(values: np.ndarray) -> np.ndarray:
    return np.where(np.isfinite(values), values, np.nan)


def _grid_eval(e: Expression, columns: Mapping[str, np.ndarray], shape: Tuple[int, ...]) -> np.ndarray:
    if isinstance(e, Const):
        return np.full(shape, e.value, dtype=float)
    if isinstance(e, Var):
        try:
            return np.asarray(columns[e.name], dtype=float)
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Unary):
        x = _grid_eval(e.arg, columns, shape)
        if e.op == "neg":
            return -x
        if e.op == "ln":
            return _finite(np.where(x > 0.0, np.log(x), np.nan))
        if e.op == "sqrt":
            return _finite(np.where(x >= 0.0, np.sqrt(x), np.nan))
        return _finite(getattr(np, e.op)(x))
    if isinstance(e, Binary):
        a = _grid_eval(e.left, columns, shape)
        b = _grid_eval(e.right, columns, shape)
        if e.op == "add":
            out = a + b
        elif e.op == "sub":
            out = a - b
        elif e.op == "mul":
            out = a * b
        elif e.op == "div":
            out = np.where(b != 0.0, a / np.where(b != 0.0, b, 1.0), np.nan)
        else:
            bad = ((a == 0.0) & (b < 0.0)) | ((a < 0.0) & (np.floor(b) != b))
            out = np.where(bad, np.nan, np.power(a, b))
        out = _finite(out)
        out[np.isnan(a) | np.isnan(b)] = np.nan
        return out
    raise TypeError(f"cannot evaluate {type(e).__name__}")


# Symbolic differentiation.

def differentiate(e: Expression, var: str) -> Expression:
    if not depends_on(e, var):
        return ZERO
    return _derive(e, var)


@singledispatch
def _derive(e: Expression, var: str) -> Expression:
    raise TypeError(f"cannot differentiate {type(e).__name__}")


@_derive.register
def _(e: Const, var: str) -> Expression:
    return ZERO


@_derive.register
def _(e: Var, var: str) -> Expression:
    return ONE if e.name == var else ZERO


@_derive.register
def _(e: Unary, var: str) -> Expression:
    u = e.arg
    du = differentiate(u, var)
    if e.op == "neg":
        return neg(du)
    if e.op == "ln":
        return div(du, u)
    if e.op == "exp":
        return mul(du, e)
    if e.op == "sin":
        return mul(du, cos(u))
    if e.op == "cos":
        return neg(mul(du, sin(u)))
    if e.op == "sqrt":
        return div(du, mul(Const(2.0), e))
    raise TypeError(f"cannot differentiate unary '{e.op}'")


@_derive.register
def _(e: Binary, var: str) -> Expression:
    u, v = e.left, e.right
    du = differentiate(u, var)
    dv = differentiate(v, var)
    if e.op == "add":
        return add(du, dv)
    if e.op == "sub":
        return sub(du, dv)
    if e.op == "mul":
        return add(mul(du, v), mul(u, dv))
    if e.op == "div":
        return div(sub(mul(du, v), mul(u, dv)), power(v, Const(2.0)))
    if e.op == "pow":
        if not depends_on(v, var):
            return mul(mul(v, power(u, sub(v, ONE))), du)
        # u^v * (v' ln u + v u'/u); only defined for u > 0
        return mul(e, add(mul(dv, ln(u)), div(mul(v, du), u)))
    raise TypeError(f"cannot differentiate binary '{e.op}'")


def gradient(e: Expression, names: Sequence[str]) -> List[Expression]:
    return [differentiate(e, name) for name in names]


# Printing.

def _precedence(e: Expression) -> int:
    if isinstance(e, Binary):
        return _PRECEDENCE[e.op]
    return _ATOM


def _is_signed(e: Expression) -> bool:
    return (isinstance(e, Unary) and e.op == "neg") or (isinstance(e, Const) and math.copysign(1.0, e.value) < 0)


def to_text(e: Expression) -> str:
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = to_text(e.arg)
            if isinstance(e.arg, Const) or _precedence(e.arg) < _ATOM:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{e.op}({to_text(e.arg)})"
    if isinstance(e, Binary):
        p = _PRECEDENCE[e.op]
        left, right = to_text(e.left), to_text(e.right)
        if e.op == "pow":
            if _precedence(e.left) < _ATOM or _is_signed(e.left):
                left = f"({left})"
            if _precedence(e.right) < p:
                right = f"({right})"
        else:
            if _precedence(e.left) < p:
                left = f"({left})"
            if _precedence(e.right) <= p:
                right = f"({right})"
        return f"{left} {BINARY_SYMBOLS[e.op]} {right}"
    raise TypeError(f"cannot print {type(e).__name__}")


# Parsing: recursive descent over the grammar
#   expr := term (('+'|'-') term)*
#   term := factor (('*'|'/') factor)*
#   factor := atom ('^' factor)?
#   atom := number | ident | ident '(' expr ')' | '(' expr ')' | '-' atom

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)

_ATOM_START = {"number", "identifier", "'('", "'-'"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int


def tokenize(text: str) -> Iterator[Token]:
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(text, pos)
        if not match or match.lastgroup is None:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionSyntaxError(
                f"unexpected character {text[start]!r}", _byte_offset(text, start), _ATOM_START | {"operator"}
            )
        kind = match.lastgroup
        yield Token(kind, match.group(kind), _byte_offset(text, match.start(kind)))
        pos = match.end()
    yield Token("end", "", _byte_offset(text, len(text)))


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


class _Parser:
    def __init__(self, text: str):
        self.tokens = list(tokenize(text))
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def _advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _is_op(self, *symbols: str) -> bool:
        return self.current.kind == "op" and self.current.text in symbols

    def _expect_op(self, symbol: str) -> None:
        if not self._is_op(symbol):
            raise ExpressionSyntaxError(f"unexpected {self._describe()}", self.current.offset, {f"'{symbol}'"})
        self._advance()

    def _describe(self) -> str:
        return "end of input" if self.current.kind == "end" else f"token {self.current.text!r}"

    def parse(self) -> Expression:
        e = self.expr()
        if self.current.kind != "end":
            raise ExpressionSyntaxError(
                f"unexpected {self._describe()}", self.current.offset, {"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"}
            )
        return e

    def expr(self) -> Expression:
        e = self.term()
        while self._is_op("+", "-"):
            op = "add" if self._advance().text == "+" else "sub"
            e = Binary(op, e, self.term())
        return e

    def term(self) -> Expression:
        e = self.factor()
        while self._is_op("*", "/"):
            op = "mul" if self._advance().text == "*" else "div"
            e = Binary(op, e, self.factor())
        return e

    def factor(self) -> Expression:
        base = self.atom()
        if self._is_op("^"):
            self._advance()
            return Binary("pow", base, self.factor())
        return base

    def atom(self) -> Expression:
        token = self.current
        if self._is_op("-"):
            self._advance()
            operand = self.atom()
            if isinstance(operand, Const):
                return Const(-operand.value)
            return Unary("neg", operand)
        if token.kind == "number":
            self._advance()
            return Const(float(token.text))
        if token.kind == "ident":
            self._advance()
            if self._is_op("("):
                if token.text not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function '{token.text}'", token.offset, set(FUNCTIONS))
                self._advance()
                arg = self.expr()
                self._expect_op(")")
                return Unary(token.text, arg)
            return Var(token.text)
        if self._is_op("("):
            self._advance()
            inner = self.expr()
            self._expect_op(")")
            return inner
        raise ExpressionSyntaxError(f"unexpected {self._describe()}", token.offset, _ATOM_START)


def parse(text: str) -> Expression:
    return _Parser(text).parse()
