"""Tiny arithmetic grammar for coefficient expressions in configs.

Allowed: numbers, ``x``, ``pi``, the operators + - * / ^ (``**`` too),
unary minus and the functions sin, cos, exp. Everything else is rejected
before evaluation, so no Python code is ever executed.
"""

from __future__ import annotations

import ast
import math
import operator

import numpy as np

from .errors import ExpressionError

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTS = {"pi": math.pi}


def _check(node):
    if isinstance(node, ast.Expression):
        return _check(node.body)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _check(node.left) and _check(node.right)
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _check(node.operand)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return True
    if isinstance(node, ast.Name) and (node.id == "x" or node.id in _CONSTS):
        return True
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
            and len(node.args) == 1 and not node.keywords):
        return _check(node.args[0])
    raise ExpressionError(f"unsupported syntax {ast.dump(node)[:60]!r}", None, getattr(node, "col_offset", None))


def _eval(node, x):
    if isinstance(node, ast.Expression):
        return _eval(node.body, x)
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, x), _eval(node.right, x))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, x))
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return x if node.id == "x" else _CONSTS[node.id]
    return _FUNCS[node.func.id](_eval(node.args[0], x))


class Expression:
    """Compiled expression f(x), vectorized over numpy arrays."""

    def __init__(self, source: str):
        self.source = str(source)
        text = self.source.replace("^", "**")
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse expression {self.source!r}: {exc.msg}", None, exc.offset) from exc
        _check(tree)
        self._tree = tree

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            y = _eval(self._tree, x)
        return np.broadcast_to(np.asarray(y, dtype=float), x.shape).copy()

    def __repr__(self):
        return f"Expression({self.source!r})"
