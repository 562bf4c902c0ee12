"""
Closed-form expression language for user-defined maps.

An expression is ordinary arithmetic over interval variables (alpha, theta,
x, y) and named constants:

    + - * / and ** (or ^) with natural-number literal exponents, unary minus,
    sin(e), cos(e), wrap(e) (reduction modulo 2*pi), power(e, n), sqr(e), pi

Numeric literals are read from the source text and converted exactly, so
"1.2" evaluates to the tightest interval around 12/10, not around the float
nearest to it. Nothing else of Python is accepted.
"""

import ast
import logging
from typing import Callable, Dict, FrozenSet, Iterable, Mapping, Optional

from .errors import ExpressionError, IntervalError
from .geometry import wrap
from .interval import PI, Interval, cos, power, sin, sqr

logger = logging.getLogger(__name__)

Evaluator = Callable[[Mapping[str, Interval]], Interval]

FUNCTIONS = {
    "sin": sin,
    "cos": cos,
    "wrap": wrap,
    "sqr": sqr,
}
CONSTANTS = {"pi": PI}

_BINARY = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
}


class Expression:
    """A parsed expression, evaluated on intervals with ``evaluate(env)``"""

    def __init__(self, source: str, variables: Optional[Iterable[str]] = None):
        if not isinstance(source, str) or not source.strip():
            raise ExpressionError(f"expression must be a non-empty string, got {source!r}")
        self.source = source
        self._text = source.replace("^", "**").strip()
        self._allowed = None if variables is None else frozenset(variables)
        self._names = set()
        try:
            tree = ast.parse(self._text, mode="eval")
        except SyntaxError as e:
            raise ExpressionError(f"cannot parse expression {source!r}: {e.msg}") from e
        self._evaluate = self._compile(tree.body)
        self.names: FrozenSet[str] = frozenset(self._names)

    def __repr__(self):
        return f"Expression({self.source!r})"

    def __str__(self):
        return self.source

    def evaluate(self, env: Mapping[str, Interval]) -> Interval:
        missing = self.names - env.keys()
        if missing:
            raise ExpressionError(
                f"expression {self.source!r} needs values for: {', '.join(sorted(missing))}"
            )
        return self._evaluate(env)

    __call__ = evaluate

    # --- compilation ------------------------------------------------------

    def _fail(self, node, what: str):
        segment = ast.get_source_segment(self._text, node) or ""
        raise ExpressionError(f"{what} in {self.source!r}: {segment!r}")

    def _literal(self, node) -> Interval:
        segment = ast.get_source_segment(self._text, node)
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            self._fail(node, "unsupported literal")
        try:
            return Interval.from_decimal(segment.replace("_", ""))
        except IntervalError as e:
            raise ExpressionError(f"invalid number {segment!r} in {self.source!r}") from e

    def _exponent(self, node) -> int:
        if (
            isinstance(node, ast.Constant)
            and isinstance(node.value, int)
            and not isinstance(node.value, bool)
            and node.value >= 0
        ):
            return node.value
        self._fail(node, "exponent must be a natural-number literal")

    def _compile(self, node) -> Evaluator:
        if isinstance(node, ast.Constant):
            value = self._literal(node)
            return lambda env: value

        if isinstance(node, ast.Name):
            name = node.id
            if name in CONSTANTS:
                value = CONSTANTS[name]
                return lambda env: value
            if self._allowed is not None and name not in self._allowed:
                allowed = ", ".join(sorted(self._allowed | CONSTANTS.keys()))
                self._fail(node, f"unknown name (allowed: {allowed})")
            self._names.add(name)
            return lambda env: env[name]

        if isinstance(node, ast.UnaryOp):
            operand = self._compile(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda env: -operand(env)
            if isinstance(node.op, ast.UAdd):
                return operand
            self._fail(node, "unsupported unary operator")

        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                base = self._compile(node.left)
                n = self._exponent(node.right)
                return lambda env: power(base(env), n)
            op = _BINARY.get(type(node.op))
            if op is None:
                self._fail(node, "unsupported operator")
            left = self._compile(node.left)
            right = self._compile(node.right)
            return lambda env: op(left(env), right(env))

        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.keywords:
                self._fail(node, "unsupported call")
            fname = node.func.id
            if fname == "power":
                if len(node.args) != 2:
                    self._fail(node, "power takes 2 arguments")
                base = self._compile(node.args[0])
                n = self._exponent(node.args[1])
                return lambda env: power(base(env), n)
            fn = FUNCTIONS.get(fname)
            if fn is None:
                self._fail(node, f"unknown function (known: {', '.join(sorted(FUNCTIONS))}, power)")
            if len(node.args) != 1:
                self._fail(node, f"{fname} takes 1 argument")
            arg = self._compile(node.args[0])
            return lambda env: fn(arg(env))

        self._fail(node, "unsupported syntax")


def compile_all(sources: Mapping[str, str], variables: Iterable[str]) -> Dict[str, Expression]:
    """Parse several named expressions sharing one set of allowed names"""
    variables = frozenset(variables)
    compiled = {}
    for key, source in sources.items():
        if source is None:
            continue
        try:
            compiled[key] = Expression(source, variables)
        except ExpressionError as e:
            raise ExpressionError(f"{key}: {e}") from e
    logger.debug(f"Compiled expressions: {sorted(compiled)}")
    return compiled
