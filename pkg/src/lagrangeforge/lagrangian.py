"""Lagrangians, dynamics specifications, and the universal residual verifier.

A Lagrangian L(x, v, t) determines an acceleration through its second-order
Euler-Lagrange equation; :func:`implied_acceleration` extracts it from a
single jet evaluation.  Verification never trusts how a Lagrangian was
constructed: it compares the implied acceleration against the prescribed
right-hand side pointwise over a sampled box and reports the worst
normalized residual.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import (
    BracketError,
    DegenerateLagrangianError,
    EmptyDomainError,
    EvalDomainError,
    NonDifferentiableError,
    NonMonotoneError,
    NotInvariantError,
)
from .evaluation import eval_jet2, evaluate
from .expressions import Expr, Var, as_expr, differentiate, free_vars, parse_expression
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig

__all__ = [
    "EPS_REG",
    "DomainBox",
    "Lagrangian",
    "OdeSpec",
    "SingularStratum",
    "VerificationReport",
    "energy_expression",
    "euler_lagrange_residual",
    "hamiltonian_value",
    "implied_acceleration",
    "invariant_drift",
    "invert_momentum",
    "legendre_momentum",
    "pairwise_acceleration_gap",
    "total_derivative_gauge",
    "verify_lagrangian",
]

# minimum |d2L/dv2| for the implied acceleration to be well defined
EPS_REG = 1e-9


def _freeze_params(params) -> tuple:
    if params is None:
        return ()
    if isinstance(params, tuple) and all(
        isinstance(p, tuple) and len(p) == 2 for p in params
    ):
        return tuple((str(k), float(v)) for k, v in params)
    return tuple(sorted((str(k), float(v)) for k, v in dict(params).items()))


@dataclass(frozen=True)
class OdeSpec:
    """Second-order dynamics ``x'' = rhs(x, x', t)`` with frozen parameters."""

    rhs: Expr
    params: tuple = ()
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "rhs", as_expr(self.rhs))
        object.__setattr__(self, "params", _freeze_params(self.params))

    @classmethod
    def from_text(cls, text: str, params: Mapping[str, float] | None = None,
                  description: str = "") -> "OdeSpec":
        params = dict(params or {})
        rhs = parse_expression(text, params=tuple(params))
        return cls(rhs, _freeze_params(params), description)

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def rhs_value(self, x: float, v: float, t: float,
                  cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
        binding = self.param_dict
        binding.update({"x": x, "v": v, "t": t})
        return evaluate(self.rhs, binding, cfg)


@dataclass(frozen=True)
class Lagrangian:
    """A candidate Lagrangian plus a record of how it was built."""

    expr: Expr
    family: str = "custom"
    params: tuple = ()
    gauge: str = ""
    domain_note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "expr", as_expr(self.expr))
        object.__setattr__(self, "params", _freeze_params(self.params))

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def binding(self, x: float, v: float, t: float) -> dict:
        b = self.param_dict
        b.update({"x": x, "v": v, "t": t})
        return b

    def value(self, x: float, v: float, t: float,
              cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
        return evaluate(self.expr, self.binding(x, v, t), cfg)

    def jet(self, x: float, v: float, t: float,
            cfg: QuadratureConfig = DEFAULT_QUADRATURE):
        return eval_jet2(self.expr, self.binding(x, v, t), cfg)


@dataclass(frozen=True)
class SingularStratum:
    """Exclusion zone: points where |expr| <= radius are not sampled."""

    expr: Expr
    radius: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "expr", as_expr(self.expr))
        if self.radius < 0.0:
            raise ValueError("stratum radius must be non-negative")


def _axis_points(lo: float, hi: float, n: int) -> list:
    if n == 1:
        return [0.5 * (lo + hi)]
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


@dataclass(frozen=True)
class DomainBox:
    """Sampling plan over a box in (x, v, t): tensor grid plus random fill.

    Samples are returned sorted by (t, x, v) so repeated antiderivative
    evaluations hit nearby cached anchors, and ties in residual maxima
    resolve deterministically.
    """

    x: tuple = (-1.0, 1.0)
    v: tuple = (-1.0, 1.0)
    t: tuple = (0.0, 1.0)
    grid: tuple = (7, 7, 7)
    n_random: int = 100
    seed: int = 0
    strata: tuple = ()

    def __post_init__(self):
        for name in ("x", "v", "t"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"{name} interval must be finite")
            if lo > hi:
                raise ValueError(f"{name} interval is reversed")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if len(self.grid) != 3 or any(int(n) < 1 for n in self.grid):
            raise ValueError("grid must have three positive counts")
        object.__setattr__(self, "grid", tuple(int(n) for n in self.grid))
        if self.n_random < 0:
            raise ValueError("n_random must be non-negative")
        object.__setattr__(self, "strata", tuple(self.strata))

    def sample_points(self, extra_binding: Mapping[str, float] | None = None,
                      cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> list:
        """Concrete (x, v, t) samples after stratum exclusion; never empty."""
        nx, nv, nt = self.grid
        pts = [
            (xv, vv, tv)
            for xv in _axis_points(*self.x, nx)
            for vv in _axis_points(*self.v, nv)
            for tv in _axis_points(*self.t, nt)
        ]
        rng = random.Random(self.seed)
        for _ in range(self.n_random):
            pts.append((
                rng.uniform(*self.x), rng.uniform(*self.v), rng.uniform(*self.t)
            ))
        if self.strata:
            base = dict(extra_binding or {})
            kept = []
            for xv, vv, tv in pts:
                binding = dict(base)
                binding.update({"x": xv, "v": vv, "t": tv})
                keep = True
                for stratum in self.strata:
                    try:
                        size = abs(evaluate(stratum.expr, binding, cfg))
                    except EvalDomainError:
                        keep = False
                        break
                    if size <= stratum.radius:
                        keep = False
                        break
                if keep:
                    kept.append((xv, vv, tv))
            pts = kept
        if not pts:
            raise EmptyDomainError("no sample points survive the exclusions")
        pts.sort(key=lambda p: (p[2], p[0], p[1]))
        return pts


def implied_acceleration(L: Lagrangian, x: float, v: float, t: float,
                         cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Acceleration forced by the Euler-Lagrange equation of ``L`` at a point.

    Solves d/dt(dL/dv) = dL/dx for x'': (L_x - L_vx v - L_vt) / L_vv.
    Raises :class:`DegenerateLagrangianError` when |L_vv| < EPS_REG.
    """
    jet = L.jet(x, v, t, cfg)
    lvv = jet.hvv
    if abs(lvv) < EPS_REG:
        raise DegenerateLagrangianError((x, v, t), lvv)
    return (jet.gx - jet.hxv * v - jet.hvt) / lvv


def euler_lagrange_residual(L: Lagrangian, ode: OdeSpec,
                            x: float, v: float, t: float,
                            cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Normalized pointwise residual |a_implied - f| / (1 + |f|)."""
    f = ode.rhs_value(x, v, t, cfg)
    a = implied_acceleration(L, x, v, t, cfg)
    return abs(a - f) / (1.0 + abs(f))


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    max_residual: float
    argmax: tuple
    samples_used: int
    samples_skipped: int
    regularity_min: float
    tolerance: float
    notes: tuple = ()

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}: max residual {self.max_residual:.3e} at "
            f"(x, v, t) = {self.argmax} over {self.samples_used} samples "
            f"(tol {self.tolerance:.1e}, min |L_vv| {self.regularity_min:.3e})"
        )


def verify_lagrangian(L: Lagrangian, ode: OdeSpec, box: DomainBox,
                      tol: float = 1e-8,
                      cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> VerificationReport:
    """Check ``L`` against ``ode`` over every sample in ``box``.

    Points where evaluation leaves the domain of definition are skipped and
    counted; degenerate points (|L_vv| < EPS_REG) fail the report outright.
    The residual at each usable point is |a_implied - f| / (1 + |f|).
    """
    binding_extra = dict(ode.params)
    binding_extra.update(L.param_dict)
    points = box.sample_points(binding_extra, cfg)

    max_residual = -1.0
    argmax = None
    used = 0
    skipped = 0
    regularity_min = math.inf
    notes = []
    degenerate = False

    for xv, vv, tv in points:
        try:
            f = ode.rhs_value(xv, vv, tv, cfg)
            jet = L.jet(xv, vv, tv, cfg)
        except (EvalDomainError, NonDifferentiableError):
            skipped += 1
            continue
        lvv = jet.hvv
        if abs(lvv) < regularity_min:
            regularity_min = abs(lvv)
        if abs(lvv) < EPS_REG:
            if not degenerate:
                notes.append(
                    f"degenerate at (x, v, t) = {(xv, vv, tv)}: "
                    f"|L_vv| = {abs(lvv):.3e} < {EPS_REG:.1e}"
                )
            degenerate = True
            used += 1
            continue
        a = (jet.gx - jet.hxv * vv - jet.hvt) / lvv
        residual = abs(a - f) / (1.0 + abs(f))
        used += 1
        if residual > max_residual:
            max_residual = residual
            argmax = (xv, vv, tv)
    if used == 0:
        raise EmptyDomainError(
            "every sample point fell outside the domain of definition"
        )
    if skipped:
        notes.append(f"skipped {skipped} out-of-domain samples")
    passed = (not degenerate) and max_residual <= tol and argmax is not None
    if argmax is None:
        argmax = (math.nan, math.nan, math.nan)
        max_residual = math.inf
    return VerificationReport(
        passed=passed,
        max_residual=max_residual,
        argmax=argmax,
        samples_used=used,
        samples_skipped=skipped,
        regularity_min=regularity_min,
        tolerance=tol,
        notes=tuple(notes),
    )


def pairwise_acceleration_gap(lagrangians: Sequence[Lagrangian], box: DomainBox,
                              cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Largest normalized disagreement in implied acceleration over the box.

    Skips points outside some member's domain; requires at least one usable
    common point.
    """
    if len(lagrangians) < 2:
        return 0.0
    extra = {}
    for L in lagrangians:
        extra.update(L.param_dict)
    points = box.sample_points(extra, cfg)
    worst = -1.0
    usable = 0
    for xv, vv, tv in points:
        accels = []
        ok = True
        for L in lagrangians:
            try:
                accels.append(implied_acceleration(L, xv, vv, tv, cfg))
            except (EvalDomainError, NonDifferentiableError, DegenerateLagrangianError):
                ok = False
                break
        if not ok:
            continue
        usable += 1
        lo, hi = min(accels), max(accels)
        gap = (hi - lo) / (1.0 + max(abs(lo), abs(hi)))
        if gap > worst:
            worst = gap
    if usable == 0:
        raise EmptyDomainError("no common usable sample points")
    return worst


# --- Legendre structure ------------------------------------------------------

def legendre_momentum(L: Lagrangian, x: float, v: float, t: float,
                      cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Conjugate momentum p = dL/dv."""
    return L.jet(x, v, t, cfg).gv


def hamiltonian_value(L: Lagrangian, x: float, v: float, t: float,
                      cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Energy function h = v dL/dv - L evaluated at a velocity point."""
    jet = L.jet(x, v, t, cfg)
    return v * jet.gv - jet.f


def energy_expression(L) -> Expr:
    """The energy v dL/dv - L as an expression, for invariant monitoring.

    Accepts a Lagrangian or a bare expression.
    """
    expr = L.expr if isinstance(L, Lagrangian) else as_expr(L)
    return Var("v") * differentiate(expr, "v") - expr


def invert_momentum(L: Lagrangian, p: float, x: float, t: float,
                    bracket: tuple = (-10.0, 10.0),
                    tol: float = 1e-12,
                    cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Solve dL/dv(x, v, t) = p for v inside ``bracket``.

    The momentum must be strictly monotone in v across the bracket (checked
    through the sign of L_vv); a bracket that does not straddle the target
    raises :class:`BracketError`.  Uses Newton steps guarded by bisection.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise BracketError("empty bracket")

    def g(vv: float):
        jet = L.jet(x, vv, t, cfg)
        return jet.gv - p, jet.hvv

    g_lo, curv_lo = g(lo)
    g_hi, curv_hi = g(hi)
    if curv_lo * curv_hi <= 0.0:
        raise NonMonotoneError(
            "momentum is not strictly monotone across the bracket"
        )
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if g_lo * g_hi > 0.0:
        raise BracketError(
            f"momentum {p!r} not bracketed: dL/dv spans "
            f"[{g_lo + p!r}, {g_hi + p!r}]"
        )

    vv = 0.5 * (lo + hi)
    for _ in range(200):
        gv, curv = g(vv)
        if curv_lo * curv <= 0.0:
            raise NonMonotoneError(
                "momentum is not strictly monotone across the bracket"
            )
        if gv == 0.0:
            return vv
        if g_lo * gv < 0.0:
            hi = vv
        else:
            lo, g_lo = vv, gv
        step = gv / curv
        candidate = vv - step
        if not (lo < candidate < hi):
            candidate = 0.5 * (lo + hi)
        if abs(candidate - vv) <= tol * (1.0 + abs(vv)):
            return candidate
        vv = candidate
    return vv


# --- invariants ---------------------------------------------------------------

def invariant_drift(quantity: Expr, ode: OdeSpec, box: DomainBox,
                    extra_params: Mapping[str, float] | None = None,
                    cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Max normalized |dI/dt| along the dynamics over the box.

    dI/dt = I_x v + I_v f + I_t with f the prescribed acceleration; the rate
    is normalized by 1 + |I|.
    """
    extra = dict(ode.params)
    if extra_params:
        extra.update(extra_params)
    points = box.sample_points(extra, cfg)
    worst = -1.0
    usable = 0
    for xv, vv, tv in points:
        binding = dict(extra)
        binding.update({"x": xv, "v": vv, "t": tv})
        try:
            f = evaluate(ode.rhs, binding, cfg)
            jet = eval_jet2(quantity, binding, cfg)
        except (EvalDomainError, NonDifferentiableError):
            continue
        usable += 1
        rate = abs(jet.gx * vv + jet.gv * f + jet.gt) / (1.0 + abs(jet.f))
        if rate > worst:
            worst = rate
    if usable == 0:
        raise EmptyDomainError("no usable sample points for the invariant")
    return worst


def assert_invariant(quantity: Expr, ode: OdeSpec, box: DomainBox,
                     tol: float = 1e-8,
                     extra_params: Mapping[str, float] | None = None,
                     cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    rate = invariant_drift(quantity, ode, box, extra_params, cfg)
    if rate > tol:
        raise NotInvariantError(
            f"quantity drifts at normalized rate {rate:.3e} > {tol:.1e}", rate
        )
    return rate


# --- gauge helpers ------------------------------------------------------------

def total_derivative_gauge(M: Expr) -> Expr:
    """The total time derivative dM/dt = M_x v + M_t of a function M(x, t).

    Adding this to any Lagrangian leaves the implied acceleration unchanged.
    """
    M = as_expr(M)
    if "v" in free_vars(M):
        raise ValueError("gauge function must not depend on v")
    return differentiate(M, "x") * Var("v") + differentiate(M, "t")
