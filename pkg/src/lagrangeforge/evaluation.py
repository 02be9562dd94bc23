"""Numeric evaluation of expressions: plain values and second-order jets.

Two evaluation modes share one set of domain rules:

* :func:`evaluate` walks the tree and returns a float.
* :func:`eval_jet2` returns a :class:`Jet2` carrying the value together with
  the gradient and Hessian with respect to the state variables ``x, v, t``.
  Derivatives are propagated structurally (no finite differences), so they
  are exact up to roundoff.

Integral nodes evaluate by adaptive quadrature.  Because verification sweeps
hit the same antiderivative at many nearby upper limits, each node keeps a
sorted list of previously computed anchor points; a new request integrates
only from the nearest anchor, so accuracy never degrades while the cost per
point stays local.
"""
from __future__ import annotations

import bisect
import math
import threading
from typing import Callable, Mapping, Sequence

from .errors import EvalDomainError, NonDifferentiableError
from .expressions import (
    Abs,
    Add,
    Antideriv,
    Const,
    Cos,
    Div,
    Exp,
    Expr,
    Ln,
    Mul,
    Neg,
    Pow,
    Sin,
    Sqrt,
    Sub,
    Var,
    differentiate,
    free_vars,
)
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig, integrate_adaptive

__all__ = [
    "Binding",
    "Jet2",
    "compile_callable",
    "definite_integral",
    "evaluate",
    "eval_jet2",
    "clear_antideriv_cache",
]

Binding = Mapping[str, float]


def _pow_value(base: float, exponent: float) -> float:
    """Real power with explicit domain rules.

    Integer exponents admit negative bases; fractional exponents require a
    positive base; zero cannot be raised to a negative power.
    """
    if exponent == math.floor(exponent):
        if base == 0.0 and exponent < 0.0:
            raise EvalDomainError("zero raised to a negative power")
    else:
        if base < 0.0:
            raise EvalDomainError(
                f"negative base {base!r} with non-integer exponent {exponent!r}"
            )
        if base == 0.0 and exponent < 0.0:
            raise EvalDomainError("zero raised to a negative power")
    try:
        result = base ** exponent
    except OverflowError:
        raise EvalDomainError(
            f"overflow computing {base!r} ** {exponent!r}"
        ) from None
    return result


def _exp_value(u: float) -> float:
    try:
        return math.exp(u)
    except OverflowError:
        raise EvalDomainError(f"overflow computing exp({u!r})") from None


def evaluate(expr: Expr, binding: Binding, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Evaluate ``expr`` at ``binding``; unbound names and domain violations raise."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        try:
            return float(binding[expr.name])
        except KeyError:
            raise EvalDomainError(f"unbound variable {expr.name!r}") from None
    if isinstance(expr, Add):
        return evaluate(expr.left, binding, cfg) + evaluate(expr.right, binding, cfg)
    if isinstance(expr, Sub):
        return evaluate(expr.left, binding, cfg) - evaluate(expr.right, binding, cfg)
    if isinstance(expr, Mul):
        return evaluate(expr.left, binding, cfg) * evaluate(expr.right, binding, cfg)
    if isinstance(expr, Div):
        denom = evaluate(expr.right, binding, cfg)
        if denom == 0.0:
            raise EvalDomainError("division by zero")
        return evaluate(expr.left, binding, cfg) / denom
    if isinstance(expr, Neg):
        return -evaluate(expr.operand, binding, cfg)
    if isinstance(expr, Pow):
        return _pow_value(
            evaluate(expr.base, binding, cfg),
            evaluate(expr.exponent, binding, cfg),
        )
    if isinstance(expr, Exp):
        return _exp_value(evaluate(expr.operand, binding, cfg))
    if isinstance(expr, Ln):
        u = evaluate(expr.operand, binding, cfg)
        if u <= 0.0:
            raise EvalDomainError(f"log of non-positive value {u!r}")
        return math.log(u)
    if isinstance(expr, Sqrt):
        u = evaluate(expr.operand, binding, cfg)
        if u < 0.0:
            raise EvalDomainError(f"square root of negative value {u!r}")
        return math.sqrt(u)
    if isinstance(expr, Abs):
        return abs(evaluate(expr.operand, binding, cfg))
    if isinstance(expr, Sin):
        return math.sin(evaluate(expr.operand, binding, cfg))
    if isinstance(expr, Cos):
        return math.cos(evaluate(expr.operand, binding, cfg))
    if isinstance(expr, Antideriv):
        return _antideriv_value(expr, binding, cfg)
    raise TypeError(f"cannot evaluate node of type {type(expr).__name__}")


# --- closure compilation ----------------------------------------------------
#
# Quadrature calls the integrand thousands of times; walking the tree with a
# dict binding per call is needlessly slow.  compile_callable builds nested
# closures over positional arguments once, then each call is plain float
# arithmetic.

def compile_callable(
    expr: Expr,
    varnames: Sequence[str],
    env: Mapping[str, float] | None = None,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> Callable[..., float]:
    """Compile ``expr`` to a positional-argument callable.

    ``varnames`` become positional parameters; every other free variable must
    appear in ``env`` and is frozen as a constant.
    """
    frozen = dict(env) if env else {}
    names = tuple(varnames)
    for name in sorted(free_vars(expr)):
        if name not in names and name not in frozen:
            raise EvalDomainError(f"unbound variable {name!r}")
    return _compile(expr, names, frozen, cfg)


def _compile(expr, names, env, cfg):
    if isinstance(expr, Const):
        c = expr.value
        return lambda *a: c
    if isinstance(expr, Var):
        if expr.name in names:
            i = names.index(expr.name)
            return lambda *a: a[i]
        c = float(env[expr.name])
        return lambda *a: c
    if isinstance(expr, Add):
        fl = _compile(expr.left, names, env, cfg)
        fr = _compile(expr.right, names, env, cfg)
        return lambda *a: fl(*a) + fr(*a)
    if isinstance(expr, Sub):
        fl = _compile(expr.left, names, env, cfg)
        fr = _compile(expr.right, names, env, cfg)
        return lambda *a: fl(*a) - fr(*a)
    if isinstance(expr, Mul):
        fl = _compile(expr.left, names, env, cfg)
        fr = _compile(expr.right, names, env, cfg)
        return lambda *a: fl(*a) * fr(*a)
    if isinstance(expr, Div):
        fl = _compile(expr.left, names, env, cfg)
        fr = _compile(expr.right, names, env, cfg)

        def _div(*a):
            d = fr(*a)
            if d == 0.0:
                raise EvalDomainError("division by zero")
            return fl(*a) / d

        return _div
    if isinstance(expr, Neg):
        fo = _compile(expr.operand, names, env, cfg)
        return lambda *a: -fo(*a)
    if isinstance(expr, Pow):
        fb = _compile(expr.base, names, env, cfg)
        fe = _compile(expr.exponent, names, env, cfg)
        return lambda *a: _pow_value(fb(*a), fe(*a))
    if isinstance(expr, Exp):
        fo = _compile(expr.operand, names, env, cfg)
        return lambda *a: _exp_value(fo(*a))
    if isinstance(expr, Ln):
        fo = _compile(expr.operand, names, env, cfg)

        def _ln(*a):
            u = fo(*a)
            if u <= 0.0:
                raise EvalDomainError(f"log of non-positive value {u!r}")
            return math.log(u)

        return _ln
    if isinstance(expr, Sqrt):
        fo = _compile(expr.operand, names, env, cfg)

        def _sqrt(*a):
            u = fo(*a)
            if u < 0.0:
                raise EvalDomainError(f"square root of negative value {u!r}")
            return math.sqrt(u)

        return _sqrt
    if isinstance(expr, Abs):
        fo = _compile(expr.operand, names, env, cfg)
        return lambda *a: abs(fo(*a))
    if isinstance(expr, Sin):
        fo = _compile(expr.operand, names, env, cfg)
        return lambda *a: math.sin(fo(*a))
    if isinstance(expr, Cos):
        fo = _compile(expr.operand, names, env, cfg)
        return lambda *a: math.cos(fo(*a))
    if isinstance(expr, Antideriv):
        node = expr

        def _anti(*a):
            binding = dict(env)
            for i, n in enumerate(names):
                binding[n] = a[i]
            return _antideriv_value(node, binding, cfg)

        return _anti
    raise TypeError(f"cannot compile node of type {type(expr).__name__}")


# --- antiderivative nodes ---------------------------------------------------

_CACHE_LOCK = threading.Lock()
# key -> (sorted upper limits, values at those limits); the base anchor with
# value 0 is always present.
_ANTIDERIV_CACHE: dict = {}


def clear_antideriv_cache() -> None:
    with _CACHE_LOCK:
        _ANTIDERIV_CACHE.clear()


def _antideriv_value(node: Antideriv, binding: Binding, cfg: QuadratureConfig) -> float:
    if node.var not in binding:
        raise EvalDomainError(f"unbound variable {node.var!r}")
    upper = float(binding[node.var])

    env = {}
    for name in sorted(free_vars(node.integrand)):
        if name == node.var:
            continue
        if name not in binding:
            raise EvalDomainError(f"unbound variable {name!r}")
        env[name] = float(binding[name])
    key = (node, cfg, tuple(sorted(env.items())))

    with _CACHE_LOCK:
        entry = _ANTIDERIV_CACHE.get(key)
        if entry is None:
            entry = ([node.base], [0.0])
            _ANTIDERIV_CACHE[key] = entry
        xs, vals = entry
        i = bisect.bisect_left(xs, upper)
        candidates = [j for j in (i - 1, i) if 0 <= j < len(xs)]
        j = min(candidates, key=lambda j: abs(xs[j] - upper))
        x0, v0 = xs[j], vals[j]

    if upper == x0:
        return v0
    f = _compile(node.integrand, (node.var,), env, cfg)
    value = v0 + integrate_adaptive(f, x0, upper, cfg)

    with _CACHE_LOCK:
        xs, vals = _ANTIDERIV_CACHE[key]
        i = bisect.bisect_left(xs, upper)
        near = [j for j in (i - 1, i) if 0 <= j < len(xs)]
        if all(abs(xs[j] - upper) > cfg.cache_resolution for j in near):
            xs.insert(i, upper)
            vals.insert(i, value)
    return value


def definite_integral(
    expr: Expr,
    var: str,
    lo: float,
    hi: float,
    binding: Binding | None = None,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """Integrate ``expr`` in ``var`` over [lo, hi], other variables frozen."""
    env = dict(binding) if binding else {}
    env.pop(var, None)
    f = compile_callable(expr, (var,), env, cfg)
    return integrate_adaptive(f, float(lo), float(hi), cfg)


# --- second-order jets ------------------------------------------------------

_STATE = ("x", "v", "t")


class Jet2:
    """Value, gradient and Hessian with respect to ``(x, v, t)``."""

    __slots__ = ("f", "gx", "gv", "gt", "hxx", "hxv", "hxt", "hvv", "hvt", "htt")

    def __init__(self, f=0.0, gx=0.0, gv=0.0, gt=0.0,
                 hxx=0.0, hxv=0.0, hxt=0.0, hvv=0.0, hvt=0.0, htt=0.0):
        self.f = f
        self.gx = gx
        self.gv = gv
        self.gt = gt
        self.hxx = hxx
        self.hxv = hxv
        self.hxt = hxt
        self.hvv = hvv
        self.hvt = hvt
        self.htt = htt

    @property
    def gradient(self) -> tuple:
        return (self.gx, self.gv, self.gt)

    @property
    def hessian(self) -> tuple:
        """Symmetric Hessian rows in (x, v, t) order."""
        return (
            (self.hxx, self.hxv, self.hxt),
            (self.hxv, self.hvv, self.hvt),
            (self.hxt, self.hvt, self.htt),
        )

    def __repr__(self):
        return (f"Jet2(f={self.f!r}, grad=({self.gx!r}, {self.gv!r}, {self.gt!r}))")

    def __add__(self, other):
        return Jet2(
            self.f + other.f,
            self.gx + other.gx, self.gv + other.gv, self.gt + other.gt,
            self.hxx + other.hxx, self.hxv + other.hxv, self.hxt + other.hxt,
            self.hvv + other.hvv, self.hvt + other.hvt, self.htt + other.htt,
        )

    def __sub__(self, other):
        return Jet2(
            self.f - other.f,
            self.gx - other.gx, self.gv - other.gv, self.gt - other.gt,
            self.hxx - other.hxx, self.hxv - other.hxv, self.hxt - other.hxt,
            self.hvv - other.hvv, self.hvt - other.hvt, self.htt - other.htt,
        )

    def __neg__(self):
        return Jet2(
            -self.f,
            -self.gx, -self.gv, -self.gt,
            -self.hxx, -self.hxv, -self.hxt, -self.hvv, -self.hvt, -self.htt,
        )

    def __mul__(self, other):
        u, w = self, other
        return Jet2(
            u.f * w.f,
            u.gx * w.f + u.f * w.gx,
            u.gv * w.f + u.f * w.gv,
            u.gt * w.f + u.f * w.gt,
            u.hxx * w.f + 2.0 * u.gx * w.gx + u.f * w.hxx,
            u.hxv * w.f + u.gx * w.gv + u.gv * w.gx + u.f * w.hxv,
            u.hxt * w.f + u.gx * w.gt + u.gt * w.gx + u.f * w.hxt,
            u.hvv * w.f + 2.0 * u.gv * w.gv + u.f * w.hvv,
            u.hvt * w.f + u.gv * w.gt + u.gt * w.gv + u.f * w.hvt,
            u.htt * w.f + 2.0 * u.gt * w.gt + u.f * w.htt,
        )

    def chain(self, f0: float, f1: float, f2: float) -> "Jet2":
        """Compose with a scalar function given its value and two derivatives."""
        u = self
        return Jet2(
            f0,
            f1 * u.gx, f1 * u.gv, f1 * u.gt,
            f1 * u.hxx + f2 * u.gx * u.gx,
            f1 * u.hxv + f2 * u.gx * u.gv,
            f1 * u.hxt + f2 * u.gx * u.gt,
            f1 * u.hvv + f2 * u.gv * u.gv,
            f1 * u.hvt + f2 * u.gv * u.gt,
            f1 * u.htt + f2 * u.gt * u.gt,
        )

    def __truediv__(self, other):
        w0 = other.f
        if w0 == 0.0:
            raise EvalDomainError("division by zero")
        inv = other.chain(1.0 / w0, -1.0 / (w0 * w0), 2.0 / (w0 * w0 * w0))
        return self * inv


def _jet_pow_const(u: Jet2, n: float) -> Jet2:
    """u**n for a numeric exponent, skipping undefined derivative terms
    whose coefficients vanish (so x**2 is fine at x=0)."""
    f0 = _pow_value(u.f, n)
    f1 = 0.0 if n == 0.0 else n * _pow_value(u.f, n - 1.0)
    f2 = 0.0 if n in (0.0, 1.0) else n * (n - 1.0) * _pow_value(u.f, n - 2.0)
    return u.chain(f0, f1, f2)


def _is_constant_jet(j: Jet2) -> bool:
    return (j.gx == 0.0 and j.gv == 0.0 and j.gt == 0.0
            and j.hxx == 0.0 and j.hxv == 0.0 and j.hxt == 0.0
            and j.hvv == 0.0 and j.hvt == 0.0 and j.htt == 0.0)


def eval_jet2(expr: Expr, binding: Binding, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> Jet2:
    """Evaluate ``expr`` with exact first and second derivatives in (x, v, t).

    Non-state variables in the binding are treated as constants.
    """
    if isinstance(expr, Const):
        return Jet2(expr.value)
    if isinstance(expr, Var):
        name = expr.name
        try:
            value = float(binding[name])
        except KeyError:
            raise EvalDomainError(f"unbound variable {name!r}") from None
        if name == "x":
            return Jet2(value, gx=1.0)
        if name == "v":
            return Jet2(value, gv=1.0)
        if name == "t":
            return Jet2(value, gt=1.0)
        return Jet2(value)
    if isinstance(expr, Add):
        return eval_jet2(expr.left, binding, cfg) + eval_jet2(expr.right, binding, cfg)
    if isinstance(expr, Sub):
        return eval_jet2(expr.left, binding, cfg) - eval_jet2(expr.right, binding, cfg)
    if isinstance(expr, Mul):
        return eval_jet2(expr.left, binding, cfg) * eval_jet2(expr.right, binding, cfg)
    if isinstance(expr, Div):
        return eval_jet2(expr.left, binding, cfg) / eval_jet2(expr.right, binding, cfg)
    if isinstance(expr, Neg):
        return -eval_jet2(expr.operand, binding, cfg)
    if isinstance(expr, Pow):
        ej = eval_jet2(expr.exponent, binding, cfg)
        base = eval_jet2(expr.base, binding, cfg)
        if _is_constant_jet(ej):
            return _jet_pow_const(base, ej.f)
        # variable exponent: u**w = exp(w * ln u), requires u > 0
        if base.f <= 0.0:
            raise EvalDomainError(
                f"non-positive base {base.f!r} with variable exponent"
            )
        lnu = base.chain(math.log(base.f), 1.0 / base.f, -1.0 / (base.f * base.f))
        arg = ej * lnu
        e = _exp_value(arg.f)
        return arg.chain(e, e, e)
    if isinstance(expr, Exp):
        u = eval_jet2(expr.operand, binding, cfg)
        e = _exp_value(u.f)
        return u.chain(e, e, e)
    if isinstance(expr, Ln):
        u = eval_jet2(expr.operand, binding, cfg)
        if u.f <= 0.0:
            raise EvalDomainError(f"log of non-positive value {u.f!r}")
        return u.chain(math.log(u.f), 1.0 / u.f, -1.0 / (u.f * u.f))
    if isinstance(expr, Sqrt):
        u = eval_jet2(expr.operand, binding, cfg)
        if u.f <= 0.0:
            if u.f < 0.0:
                raise EvalDomainError(f"square root of negative value {u.f!r}")
            raise NonDifferentiableError("square root is not differentiable at zero")
        s = math.sqrt(u.f)
        return u.chain(s, 0.5 / s, -0.25 / (s * u.f))
    if isinstance(expr, Abs):
        u = eval_jet2(expr.operand, binding, cfg)
        if u.f == 0.0:
            raise NonDifferentiableError("absolute value is not differentiable at zero")
        sign = 1.0 if u.f > 0.0 else -1.0
        return u.chain(abs(u.f), sign, 0.0)
    if isinstance(expr, Sin):
        u = eval_jet2(expr.operand, binding, cfg)
        s, c = math.sin(u.f), math.cos(u.f)
        return u.chain(s, c, -s)
    if isinstance(expr, Cos):
        u = eval_jet2(expr.operand, binding, cfg)
        s, c = math.sin(u.f), math.cos(u.f)
        return u.chain(c, -s, -c)
    if isinstance(expr, Antideriv):
        return _jet_antideriv(expr, binding, cfg)
    raise TypeError(f"cannot evaluate node of type {type(expr).__name__}")


def _jet_antideriv(node: Antideriv, binding: Binding, cfg: QuadratureConfig) -> Jet2:
    # Partials in the integration variable come from the fundamental theorem
    # of calculus (integrand at the upper limit); partials in every other
    # state variable differentiate under the integral sign.
    h = node.integrand
    w = node.var
    jet = Jet2(_antideriv_value(node, binding, cfg))
    fv = free_vars(h)

    def under_integral(dexpr):
        if dexpr == Const(0.0):
            return 0.0
        return _antideriv_value(Antideriv(dexpr, w, node.base), binding, cfg)

    slots_g = {"x": "gx", "v": "gv", "t": "gt"}
    slots_h = {("x", "x"): "hxx", ("x", "v"): "hxv", ("x", "t"): "hxt",
               ("v", "v"): "hvv", ("v", "t"): "hvt", ("t", "t"): "htt"}

    first = {}
    for q in _STATE:
        if q == w:
            val = evaluate(h, binding, cfg)
        elif q in fv:
            val = under_integral(differentiate(h, q))
        else:
            val = 0.0
        first[q] = val
        setattr(jet, slots_g[q], val)

    for (q, r), slot in slots_h.items():
        if q == w or r == w:
            other = r if q == w else q
            if other == w:
                # d2/dw2 = dh/dw at the upper limit
                d = differentiate(h, w)
                val = 0.0 if d == Const(0.0) else evaluate(d, binding, cfg)
            else:
                d = differentiate(h, other)
                val = 0.0 if d == Const(0.0) else evaluate(d, binding, cfg)
        elif q in fv or r in fv:
            d = differentiate(differentiate(h, q), r)
            val = under_integral(d)
        else:
            val = 0.0
        setattr(jet, slot, val)
    return jet
