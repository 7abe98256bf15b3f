"""Closed-form scalar fields over chart coordinates.

Magnetic functions and revolution profiles are supplied as arithmetic
expressions in the two chart coordinates (``x``/``y`` on flat charts,
``theta``/``phi`` on revolution charts; the names are interchangeable
aliases).  Allowed syntax: ``+ - * / **``, unary sign, numeric literals,
the constant ``pi`` and the functions ``sin``, ``cos``, ``exp``.

Each parsed field carries

* exact symbolic first/second derivatives (no numerical differentiation),
* vectorized and scalar evaluators,
* a postfix stack program consumed by the compiled integration kernel.
"""

from __future__ import annotations

import ast
import math

import numpy as np
import sympy as sp

from .errors import ConfigError

# Stack-program opcodes (mirrored in the kernels).
OP_CONST = 0
OP_VAR0 = 1
OP_VAR1 = 2
OP_ADD = 3
OP_SUB = 4
OP_MUL = 5
OP_DIV = 6
OP_POW = 7
OP_NEG = 8
OP_SIN = 9
OP_COS = 10
OP_EXP = 11
OP_SQR = 12

MAX_STACK = 64

_X = sp.Symbol("x")
_Y = sp.Symbol("y")

_VAR0_NAMES = {"x", "theta"}
_VAR1_NAMES = {"y", "phi"}
_FUNC_SYMPY = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


def _sympy_from_ast(node, text):
    if isinstance(node, ast.Expression):
        return _sympy_from_ast(node.body, text)
    if isinstance(node, ast.BinOp):
        op = type(node.op)
        if op not in _BINOPS:
            raise ConfigError(f"unsupported operator in field expression: {text!r}")
        return _BINOPS[op](_sympy_from_ast(node.left, text), _sympy_from_ast(node.right, text))
    if isinstance(node, ast.UnaryOp):
        val = _sympy_from_ast(node.operand, text)
        if isinstance(node.op, ast.USub):
            return -val
        if isinstance(node.op, ast.UAdd):
            return val
        raise ConfigError(f"unsupported unary operator in field expression: {text!r}")
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)):
            return sp.Float(node.value) if isinstance(node.value, float) else sp.Integer(node.value)
        raise ConfigError(f"non-numeric literal in field expression: {text!r}")
    if isinstance(node, ast.Name):
        if node.id in _VAR0_NAMES:
            return _X
        if node.id in _VAR1_NAMES:
            return _Y
        if node.id == "pi":
            return sp.pi
        raise ConfigError(f"unknown name {node.id!r} in field expression: {text!r}")
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNC_SYMPY:
            raise ConfigError(f"unknown function in field expression: {text!r}")
        if len(node.args) != 1 or node.keywords:
            raise ConfigError(f"functions take one argument: {text!r}")
        return _FUNC_SYMPY[node.func.id](_sympy_from_ast(node.args[0], text))
    raise ConfigError(f"unsupported syntax in field expression: {text!r}")


def _compile_program(expr):
    """Compile a sympy expression to a postfix stack program."""
    ops: list[int] = []
    args: list[float] = []
    depth = 0
    max_depth = 0

    def emit(op, arg=0.0, pop=0, push=1):
        nonlocal depth, max_depth
        ops.append(op)
        args.append(float(arg))
        depth += push - pop
        max_depth = max(max_depth, depth)

    def walk(e):
        if e is _X:
            emit(OP_VAR0)
            return
        if e is _Y:
            emit(OP_VAR1)
            return
        if e.is_Number or e is sp.pi or not e.free_symbols:
            emit(OP_CONST, float(e))
            return
        if isinstance(e, sp.Add):
            walk(e.args[0])
            for a in e.args[1:]:
                walk(a)
                emit(OP_ADD, pop=2, push=1)
            return
        if isinstance(e, sp.Mul):
            walk(e.args[0])
            for a in e.args[1:]:
                walk(a)
                emit(OP_MUL, pop=2, push=1)
            return
        if isinstance(e, sp.Pow):
            base, expo = e.args
            if expo == sp.Integer(2):
                walk(base)
                emit(OP_SQR, pop=1, push=1)
                return
            walk(base)
            walk(expo)
            emit(OP_POW, pop=2, push=1)
            return
        if isinstance(e, sp.sin):
            walk(e.args[0])
            emit(OP_SIN, pop=1, push=1)
            return
        if isinstance(e, sp.cos):
            walk(e.args[0])
            emit(OP_COS, pop=1, push=1)
            return
        if isinstance(e, sp.exp):
            walk(e.args[0])
            emit(OP_EXP, pop=1, push=1)
            return
        raise ConfigError(f"cannot compile field term {e!r} to a kernel program")

    walk(expr)
    if max_depth > MAX_STACK:
        raise ConfigError("field expression too deep for the kernel stack")
    return np.asarray(ops, dtype=np.int32), np.asarray(args, dtype=np.float64)


def eval_program(ops, args, u, v):
    """Reference interpreter for a stack program (the compiled kernel mirrors it)."""
    stack = [0.0] * MAX_STACK
    top = -1
    for op, arg in zip(ops, args):
        if op == OP_CONST:
            top += 1
            stack[top] = arg
        elif op == OP_VAR0:
            top += 1
            stack[top] = u
        elif op == OP_VAR1:
            top += 1
            stack[top] = v
        elif op == OP_ADD:
            stack[top - 1] += stack[top]
            top -= 1
        elif op == OP_SUB:
            stack[top - 1] -= stack[top]
            top -= 1
        elif op == OP_MUL:
            stack[top - 1] *= stack[top]
            top -= 1
        elif op == OP_DIV:
            stack[top - 1] /= stack[top]
            top -= 1
        elif op == OP_POW:
            stack[top - 1] = math.pow(stack[top - 1], stack[top])
            top -= 1
        elif op == OP_NEG:
            stack[top] = -stack[top]
        elif op == OP_SIN:
            stack[top] = math.sin(stack[top])
        elif op == OP_COS:
            stack[top] = math.cos(stack[top])
        elif op == OP_EXP:
            stack[top] = math.exp(stack[top])
        elif op == OP_SQR:
            stack[top] *= stack[top]
    return stack[0]


def program_to_scalar_fn(ops, args):
    """Compile a stack program to a Python scalar function.

    The generated source parenthesizes exactly in program order, so the
    result matches :func:`eval_program` (and the compiled kernel) bit for
    bit while running at closure speed.
    """
    stack: list[str] = []
    for op, arg in zip(ops, args):
        if op == OP_CONST:
            stack.append(repr(float(arg)))
        elif op == OP_VAR0:
            stack.append("u")
        elif op == OP_VAR1:
            stack.append("v")
        elif op == OP_NEG:
            stack.append(f"(-{stack.pop()})")
        elif op in (OP_SIN, OP_COS, OP_EXP, OP_SQR):
            name = {OP_SIN: "_sin", OP_COS: "_cos", OP_EXP: "_exp", OP_SQR: "_sqr"}[op]
            stack.append(f"{name}({stack.pop()})")
        else:
            b = stack.pop()
            a = stack.pop()
            if op == OP_POW:
                stack.append(f"_pow({a}, {b})")
            else:
                sym = {OP_ADD: "+", OP_SUB: "-", OP_MUL: "*", OP_DIV: "/"}[op]
                stack.append(f"({a} {sym} {b})")
    ns = {"_sin": math.sin, "_cos": math.cos, "_exp": math.exp,
          "_pow": math.pow, "_sqr": lambda z: z * z}
    return eval(f"lambda u, v=0.0: {stack[0]}", ns)  # noqa: S307 (generated source)


class FieldExpr:
    """A scalar field on chart coordinates with exact derivatives."""

    __slots__ = ("sym", "text", "_fn_np", "_fn_math", "_prog", "_d0", "_d1")

    def __init__(self, sym_expr, text=None):
        self.sym = sp.simplify(sym_expr) if sym_expr.free_symbols else sp.Float(float(sym_expr))
        self.text = text if text is not None else str(self.sym)
        self._fn_np = sp.lambdify((_X, _Y), self.sym, modules="numpy")
        self._fn_math = sp.lambdify((_X, _Y), self.sym, modules="math")
        self._prog = None
        self._d0 = None
        self._d1 = None

    @classmethod
    def parse(cls, source) -> "FieldExpr":
        """Parse a field from an expression string or a numeric constant."""
        if isinstance(source, FieldExpr):
            return source
        if isinstance(source, (int, float)):
            return cls(sp.Float(float(source)), text=repr(float(source)))
        if not isinstance(source, str):
            raise ConfigError(f"field must be a string expression or number, got {type(source)}")
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse field expression {source!r}: {exc}") from None
        return cls(_sympy_from_ast(tree, source), text=source)

    # evaluation -----------------------------------------------------

    def __call__(self, u, v):
        out = self._fn_np(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast_shapes(np.shape(u), np.shape(v))).copy() \
            if np.ndim(out) == 0 and (np.ndim(u) or np.ndim(v)) else out

    def scalar(self, u, v) -> float:
        return float(self._fn_math(u, v))

    # structure ------------------------------------------------------

    def diff(self, which: int) -> "FieldExpr":
        """Exact partial derivative with respect to chart coordinate 0 or 1."""
        if which == 0:
            if self._d0 is None:
                self._d0 = FieldExpr(sp.diff(self.sym, _X))
            return self._d0
        if which == 1:
            if self._d1 is None:
                self._d1 = FieldExpr(sp.diff(self.sym, _Y))
            return self._d1
        raise ValueError("which must be 0 or 1")

    @property
    def program(self):
        if self._prog is None:
            self._prog = _compile_program(self.sym)
        return self._prog

    @property
    def is_constant(self) -> bool:
        return not self.sym.free_symbols

    def constant_value(self) -> float:
        if not self.is_constant:
            raise ValueError(f"field {self.text!r} is not constant")
        return float(self.sym)

    def depends_on(self, which: int) -> bool:
        return (_X if which == 0 else _Y) in self.sym.free_symbols

    def __repr__(self):
        return f"FieldExpr({self.text!r})"


def constant_field(value: float) -> FieldExpr:
    return FieldExpr.parse(float(value))
