"""Exact dispersion relation for the periodic Dirac-comb coefficient.

For the comb of atoms of mass ``alpha*L`` at the cell midpoints, the
principal eigenvalue ``mu`` of the periodic cell operator with drift
``2*lam_bar`` solves the scalar transcendental equation

    2*s = at*L * ( 1/(1 - exp((lam_bar - s)*L)) + 1/(exp((lam_bar + s)*L) - 1) )

in the auxiliary root variable ``s = sqrt(lam_bar**2 - mu) > |lam_bar|``,
where ``at = slope * alpha`` is the effective mass.  The right-hand side is
strictly decreasing in ``s`` on ``(|lam_bar|, inf)`` while the left side
increases, so bracketed bisection on ``s`` is certifiable.  Large ``s*L``
is handled by series forms of the two reciprocals so the evaluation never
overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NumericalFailureError, ParameterDomainError

__all__ = [
    "CombDispersion",
    "comb_mu",
    "comb_mu_zero_lambda",
    "comb_mu_large_L",
    "comb_residual",
    "comb_curve_to_csv",
]

_BISECT_ABS_TOL = 1e-14
_MAX_DOUBLINGS = 60


@dataclass(frozen=True)
class CombDispersion:
    """One solved point of the comb dispersion relation."""

    alpha: float
    L: float
    slope: float
    lambda_bar: float
    mu: float
    s: float
    residual: float


def _check_params(alpha: float, L: float, slope: float) -> None:
    if not (
        math.isfinite(alpha) and math.isfinite(L) and math.isfinite(slope)
    ) or alpha <= 0 or L <= 0 or slope <= 0:
        raise ParameterDomainError("alpha, L and slope must be positive and finite")


def _secant_polish(f, lo: float, hi: float, steps: int = 4) -> float:
    """A few secant iterations inside a bisection bracket.

    The bracketed root is already tight; this drives the residual of the
    defect function down to roundoff even where its slope is steep.
    """
    a, b = lo, hi
    fa, fb = f(a), f(b)
    best, fbest = (a, fa) if abs(fa) < abs(fb) else (b, fb)
    for _ in range(steps):
        if fb == fa:
            break
        c = b - fb * (b - a) / (fb - fa)
        if not (lo <= c <= hi):
            break
        fc = f(c)
        if abs(fc) < abs(fbest):
            best, fbest = c, fc
        a, fa, b, fb = b, fb, c, fc
        if fc == 0.0:
            break
    return best


def _rhs(s: float, lam: float, L: float, at: float) -> float:
    """Right-hand side of the comb equation, overflow-safe.

    ``lam`` is assumed nonnegative and ``s > lam`` so the first exponent is
    negative and the second positive.
    """
    a = (lam - s) * L
    b = (lam + s) * L
    if a > -40.0:
        t1 = -1.0 / math.expm1(a)
    else:
        ea = math.exp(a)
        t1 = 1.0 + ea * (1.0 + ea)
    if b < 40.0:
        t2 = 1.0 / math.expm1(b)
    else:
        eb = math.exp(-b)
        t2 = eb * (1.0 + eb)
    return at * L * (t1 + t2)


def comb_residual(mu: float, lambda_bar: float, alpha: float, L: float, slope: float) -> float:
    """Defect 2s - RHS(s) of the comb equation at a candidate eigenvalue."""
    lam = abs(lambda_bar)
    at = slope * alpha
    s2 = lam * lam - mu
    if s2 <= lam * lam:
        return math.inf
    s = math.sqrt(s2)
    return 2.0 * s - _rhs(s, lam, L, at)


def comb_mu(alpha: float, L: float, slope: float, lambda_bar: float) -> CombDispersion:
    """Solve the comb dispersion relation at drift ``lambda_bar``.

    The equation is even in ``lambda_bar``, so only its magnitude is used;
    this makes the evenness of the returned eigenvalue exact.
    """
    _check_params(alpha, L, slope)
    lam = abs(float(lambda_bar))
    at = slope * alpha

    def f(s: float) -> float:
        return _rhs(s, lam, L, at) - 2.0 * s

    # lower end: RHS blows up as s -> lam+, so f > 0 for small enough offset
    delta = 1e-8 * (1.0 + lam)
    lo = lam + delta
    shrink = 0
    while f(lo) <= 0.0:
        delta *= 0.1
        lo = lam + delta
        shrink += 1
        if shrink > 250:
            raise NumericalFailureError(
                "comb bisection found no positive side near s = |lambda_bar|",
                {"lambda_bar": lam, "alpha": alpha, "L": L},
            )
    # upper end from the eigenvalue lower bound -at - at^2 L^2
    hi = math.sqrt(at + at * at * L * L + lam * lam)
    doublings = 0
    while f(hi) >= 0.0:
        hi *= 2.0
        doublings += 1
        if doublings > _MAX_DOUBLINGS:
            raise NumericalFailureError(
                "comb bisection bracket expansion failed",
                {"lambda_bar": lam, "alpha": alpha, "L": L, "hi": hi},
            )
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= max(_BISECT_ABS_TOL, 8e-16 * hi):
            break
    s = _secant_polish(f, lo, hi)
    mu = lam * lam - s * s
    return CombDispersion(
        alpha=alpha,
        L=L,
        slope=slope,
        lambda_bar=float(lambda_bar),
        mu=mu,
        s=s,
        residual=comb_residual(mu, lam, alpha, L, slope),
    )


def comb_mu_zero_lambda(alpha: float, L: float, slope: float) -> CombDispersion:
    """Drift-free comb eigenvalue via the symmetric form 2s = at*L*coth(sL/2)."""
    _check_params(alpha, L, slope)
    at = slope * alpha

    def coth_half(s: float) -> float:
        x = s * L  # coth(x/2) = 1 + 2/(e^x - 1)
        if x < 40.0:
            return 1.0 + 2.0 / math.expm1(x)
        e = math.exp(-x)
        return 1.0 + 2.0 * e * (1.0 + e)

    def f(s: float) -> float:
        return at * L * coth_half(s) - 2.0 * s

    lo = 1e-12
    while f(lo) <= 0.0:
        lo *= 0.1
        if lo < 1e-250:
            raise NumericalFailureError("comb zero-drift bracket failed", {})
    hi = math.sqrt(at + at * at * L * L)
    doublings = 0
    while f(hi) >= 0.0:
        hi *= 2.0
        doublings += 1
        if doublings > _MAX_DOUBLINGS:
            raise NumericalFailureError("comb zero-drift bracket expansion failed", {})
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= max(_BISECT_ABS_TOL, 8e-16 * hi):
            break
    s = _secant_polish(f, lo, hi)
    mu = -s * s
    return CombDispersion(
        alpha=alpha,
        L=L,
        slope=slope,
        lambda_bar=0.0,
        mu=mu,
        s=s,
        residual=comb_residual(mu, 0.0, alpha, L, slope),
    )


def comb_mu_large_L(alpha: float, L: float, slope: float, lambda_bar: float) -> float:
    """Large-period reference asymptote -at^2 L^2 / 4 + lambda_bar^2."""
    _check_params(alpha, L, slope)
    at = slope * alpha
    return -0.25 * at * at * L * L + lambda_bar * lambda_bar


def comb_curve_to_csv(points: list[CombDispersion], path) -> None:
    with open(path, "w") as fh:
        fh.write("lambda_bar,mu,s,residual\n")
        for p in points:
            fh.write(f"{p.lambda_bar:.17g},{p.mu:.17g},{p.s:.17g},{p.residual:.17g}\n")
