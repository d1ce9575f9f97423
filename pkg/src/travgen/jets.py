"""Truncated Taylor arithmetic over numpy batches.

A jet holds coefficients ``c[k]`` of ``sum c[k] t^k`` for k <= K, each a
vector over the batch.  Evaluating a sympy expression on jets differentiates
it exactly along a curve, which gives Lie derivatives along a flow without
building the (quickly swelling) symbolic tower.
"""
from __future__ import annotations

import math

import numpy as np
import sympy as sp


def _cauchy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    K = len(a)
    out = np.zeros_like(a)
    for k in range(K):
        out[k] = np.sum(a[: k + 1] * b[k::-1], axis=0)
    return out


def _recip_series(a):
    K = len(a)
    q = np.zeros_like(a)
    q[0] = 1.0 / a[0]
    for k in range(1, K):
        q[k] = -np.sum(a[1: k + 1] * q[k - 1::-1], axis=0) / a[0]
    return q


def _exp(a):
    K = len(a)
    e = np.zeros_like(a)
    e[0] = np.exp(a[0])
    for k in range(1, K):
        i = np.arange(1, k + 1)[:, None]
        e[k] = np.sum(i * a[1: k + 1] * e[k - 1::-1], axis=0) / k
    return e


def _log(a):
    K = len(a)
    l = np.zeros_like(a)
    l[0] = np.log(a[0])
    for k in range(1, K):
        i = np.arange(1, k)[:, None]
        acc = np.sum(i * l[1:k] * a[k - 1:0:-1], axis=0) if k > 1 else 0.0
        l[k] = (a[k] - acc / k) / a[0]
    return l


def _sincos(a):
    K = len(a)
    s = np.zeros_like(a)
    c = np.zeros_like(a)
    s[0], c[0] = np.sin(a[0]), np.cos(a[0])
    for k in range(1, K):
        i = np.arange(1, k + 1)[:, None]
        s[k] = np.sum(i * a[1: k + 1] * c[k - 1::-1], axis=0) / k
        c[k] = -np.sum(i * a[1: k + 1] * s[k - 1::-1], axis=0) / k
    return s, c


def _real_pow(a, r: float):
    """``a^r`` for non-integer r; needs a[0] > 0."""
    K = len(a)
    p = np.zeros_like(a)
    p[0] = a[0] ** r
    for k in range(1, K):
        i = np.arange(1, k + 1)[:, None]
        p[k] = np.sum(((r + 1) * i - k) * a[1: k + 1] * p[k - 1::-1], axis=0) / (k * a[0])
    return p


def _int_pow(a, n: int):
    if n == 0:
        out = np.zeros_like(a)
        out[0] = 1.0
        return out
    if n < 0:
        return _recip_series(_int_pow(a, -n))
    result = None
    base = a
    while n:
        if n & 1:
            result = base if result is None else _cauchy(result, base)
        n >>= 1
        if n:
            base = _cauchy(base, base)
    return result


def evaluate(expr, env: dict, K: int, n: int, memo: dict | None = None) -> np.ndarray:
    """Jet of ``expr`` with symbols bound to jets in ``env`` (shape (K+1, n))."""
    memo = {} if memo is None else memo
    if expr in memo:
        return memo[expr]
    if expr.is_Symbol:
        out = env[expr]
    elif expr.is_Number or expr.is_NumberSymbol:
        out = np.zeros((K + 1, n))
        out[0] = float(expr)
    elif expr.is_Add:
        out = sum(evaluate(a, env, K, n, memo) for a in expr.args)
    elif expr.is_Mul:
        coeff, rest = expr.as_coeff_Mul()
        parts = [evaluate(a, env, K, n, memo) for a in sp.Mul.make_args(rest)]
        out = parts[0]
        for p in parts[1:]:
            out = _cauchy(out, p)
        if coeff != 1:
            out = float(coeff) * out
    elif expr.is_Pow:
        base, e = expr.args
        b = evaluate(base, env, K, n, memo)
        if e.is_Integer:
            out = _int_pow(b, int(e))
        elif e.is_Number:
            out = _real_pow(b, float(e))
        else:
            out = _exp(_cauchy(evaluate(e, env, K, n, memo), _log(b)))
    elif isinstance(expr, sp.exp):
        out = _exp(evaluate(expr.args[0], env, K, n, memo))
    elif isinstance(expr, sp.log):
        out = _log(evaluate(expr.args[0], env, K, n, memo))
    elif isinstance(expr, (sp.sin, sp.cos)):
        s, c = _sincos(evaluate(expr.args[0], env, K, n, memo))
        out = s if isinstance(expr, sp.sin) else c
    else:
        raise TypeError(f"no jet rule for {type(expr).__name__}")
    memo[expr] = out
    return out


def flow_jets(field: list, symbols: list, Y: np.ndarray, K: int) -> dict:
    """Taylor coefficients (to order K) of the flow line through each row of Y."""
    n = len(Y)
    coeffs = np.zeros((len(symbols), K + 1, n))
    coeffs[:, 0, :] = Y.T
    for k in range(K):
        env = {s: coeffs[i, : k + 1] for i, s in enumerate(symbols)}
        memo: dict = {}
        for i, comp in enumerate(field):
            fk = evaluate(comp, env, k, n, memo)
            coeffs[i, k + 1] = fk[k] / (k + 1)
    return {s: coeffs[i] for i, s in enumerate(symbols)}


def lie_tower_numeric(z, field: list, symbols: list, Y: np.ndarray, K: int) -> np.ndarray:
    """``[z, L z, ..., L^K z]`` at each row of Y, shape (n, K+1)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    env = flow_jets(field, symbols, Y, K)
    zj = evaluate(z, env, K, len(Y))
    fact = np.array([math.factorial(k) for k in range(K + 1)], dtype=float)
    return (zj * fact[:, None]).T
