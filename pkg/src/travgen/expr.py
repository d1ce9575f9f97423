"""Expression strings for boundary functions, fields and metrics.

Grammar: identifiers ``x``, ``y``, ``u``, ``theta`` and indexed coordinates
``x0`` .. ``x9``; numbers; ``+ - * /``; ``^`` (or ``**``) for powers;
parentheses; functions ``sin cos exp sqrt``; constant ``pi``.
"""
from __future__ import annotations

import re

import sympy as sp

ALLOWED_FUNCTIONS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "sqrt": sp.sqrt}
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_COORD = re.compile(r"^(x|y|u|theta|x[0-9]|x[0-9]_[0-9])$")
_ALLOWED_CHARS = re.compile(r"^[A-Za-z0-9_+\-*/^().,\s]*$")


class ExpressionError(ValueError):
    pass


def symbol(name: str) -> sp.Symbol:
    return sp.Symbol(name, real=True)


def parse(text: str, coords: list[str] | None = None) -> sp.Expr:
    """Parse an expression string under the documented grammar."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    if not _ALLOWED_CHARS.match(text):
        raise ExpressionError(f"illegal character in {text!r}")
    names = {}
    for ident in set(_IDENT.findall(text)):
        if ident in ALLOWED_FUNCTIONS:
            names[ident] = ALLOWED_FUNCTIONS[ident]
        elif ident == "pi":
            names[ident] = sp.pi
        elif _COORD.match(ident):
            if coords is not None and ident not in coords:
                raise ExpressionError(f"unknown coordinate {ident!r}; expected one of {coords}")
            names[ident] = symbol(ident)
        elif ident.lower() == "e" or ident[0].isdigit():
            continue
        else:
            raise ExpressionError(f"unknown identifier {ident!r} in {text!r}")
    try:
        expr = sp.sympify(text.replace("^", "**"), locals=names)
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc}") from exc
    if not isinstance(expr, sp.Expr):
        raise ExpressionError(f"{text!r} is not a scalar expression")
    return expr


def lambdify(expr, coords: list[str]):
    """Vectorised numeric function of the coordinate arrays (numpy backend)."""
    syms = [symbol(c) for c in coords]
    fn = sp.lambdify(syms, expr, modules="numpy", cse=True)
    return fn


def lie_derivative(expr, field: list, coords: list[str]) -> sp.Expr:
    syms = [symbol(c) for c in coords]
    return sum((sp.diff(expr, s) * f for s, f in zip(syms, field)), sp.Integer(0))


def lie_tower(expr, field: list, coords: list[str], order: int) -> list[sp.Expr]:
    """``[z, L_v z, ..., L_v^order z]`` by exact differentiation."""
    out = [expr]
    for _ in range(order):
        out.append(sp.expand(lie_derivative(out[-1], field, coords)) if out[-1].is_polynomial()
                   else lie_derivative(out[-1], field, coords))
    return out
