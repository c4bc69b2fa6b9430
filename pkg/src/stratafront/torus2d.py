"""Fully two-dimensional periodic media on the (L1, L2) torus.

Unlike the stratified case, speeds over doubly periodic coefficients with a
fixed cell mass are unbounded: concentrating the mass on a shrinking set
drives the principal eigenvalue to minus infinity.  This module provides
the torus eigensolver, the corresponding minimal speed, and a concrete
concentrating family demonstrating the blow-up at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import eigen
from .errors import ParameterDomainError
from .media import PeriodicMedium, bump_profile
from .speeds import SpeedMethod, SpeedResult, minimize_unimodal

try:
    import pyamg
except ImportError:  # pragma: no cover - exercised only without pyamg
    pyamg = None

__all__ = [
    "TorusMedium",
    "torus_mu",
    "torus_eigenpair",
    "torus_c_star",
    "stratified_torus_medium",
    "concentrating_medium",
    "UnboundednessReport",
    "unboundedness_demo",
    "unboundedness_to_csv",
]

# geometry of the concentrating family: a product bump whose x-width shrinks
# like 1/n while the y-extent stays thin and fixed, squeezing the cell mass
# onto a short vertical segment of diverging line density
_BUMP_WX0 = 0.25  # x-width at n = 1, in units of L1
_BUMP_WY = 0.04  # fixed y-width, in units of L2
_CELLS_ACROSS = 8


@dataclass(frozen=True)
class TorusMedium:
    """Doubly periodic nonnegative coefficient with cell mean exactly alpha."""

    L1: float
    L2: float
    alpha: float
    slope: float
    samples: np.ndarray  # (Nx, Ny) cell-centered values

    def __post_init__(self):
        if self.L1 <= 0 or self.L2 <= 0 or self.alpha <= 0 or self.slope <= 0:
            raise ParameterDomainError("L1, L2, alpha, slope must be positive")
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or min(s.shape) < 32:
            raise ParameterDomainError("torus grid must be at least 32 x 32")
        if np.any(s < 0):
            raise ParameterDomainError("coefficient must be nonnegative")
        mean = float(s.mean())
        if mean <= 0:
            raise ParameterDomainError("coefficient must carry positive mass")
        s = s * (self.alpha / mean)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def alpha_eff(self) -> float:
        return self.slope * self.alpha


def _assemble_torus_operator(m: TorusMedium, lam: float, theta: float) -> sp.spmatrix:
    nx, ny = m.samples.shape
    dx = m.L1 / nx
    dy = m.L2 / ny
    cx = lam * math.cos(theta)
    cy = lam * math.sin(theta)
    if abs(cx) * dx >= 1.0 or abs(cy) * dy >= 1.0:
        raise ParameterDomainError(
            "torus grid too coarse for this drift; refine the grid"
        )

    def cyclic(n: int, h: float, drift: float) -> sp.spmatrix:
        inv2 = 1.0 / (h * h)
        idx = np.arange(n)
        rows = np.concatenate([idx, idx, idx])
        cols = np.concatenate([(idx - 1) % n, idx, (idx + 1) % n])
        data = np.concatenate(
            [
                np.full(n, -inv2 - drift / h),
                np.full(n, 2.0 * inv2),
                np.full(n, -inv2 + drift / h),
            ]
        )
        return sp.csc_matrix((data, (rows, cols)), shape=(n, n))

    Ax = cyclic(nx, dx, cx)
    Ay = cyclic(ny, dy, cy)
    btilde = m.slope * m.samples
    A = (
        sp.kron(Ax, sp.identity(ny, format="csc"), format="csc")
        + sp.kron(sp.identity(nx, format="csc"), Ay, format="csc")
        - sp.diags(btilde.ravel(), format="csc")
    )
    return A.tocsc()


def _amg_factorize(B: sp.spmatrix):
    """Inexact solver for the shifted torus operator.

    A smoothed-aggregation hierarchy built on the symmetric part
    preconditions BiCGStab; inexact solutions are acceptable because the
    Collatz-Wielandt safeguards in the outer iteration remain valid for
    any positive iterate.  Falls back to sparse LU when pyamg is missing.
    """
    if pyamg is None:
        return eigen._splu_factorize(B)
    B = B.tocsr()
    sym = ((B + B.T) * 0.5).tocsr()
    M = pyamg.smoothed_aggregation_solver(sym, max_coarse=500).aspreconditioner("V")

    def solve(x: np.ndarray):
        y, info = spla.bicgstab(B, x, M=M, rtol=1e-9, atol=0.0, maxiter=400)
        if info != 0:
            return None  # outer loop treats this as a bad shift and backs off
        return y

    return solve


def torus_eigenpair(
    m: TorusMedium,
    lam: float,
    theta: float,
    rtol: float = 1e-11,
    warm: tuple[float, np.ndarray] | None = None,
) -> tuple[float, np.ndarray, float]:
    """Principal eigenvalue, positive eigenfunction and residual on the torus.

    ``warm`` optionally carries (shift, vector) from a nearby solve; the
    safeguarded iteration falls back to the certified Gershgorin floor if
    the warm shift turns out to sit above the eigenvalue.
    """
    A = _assemble_torus_operator(m, lam, theta)
    floor = -float(m.slope * m.samples.max()) - 1.0
    mu, u, resid = eigen.principal_pair(
        A,
        floor,
        rtol=rtol,
        warm_shift=warm[0] if warm else None,
        warm_vector=warm[1] if warm else None,
        factorize=_amg_factorize,
    )
    return mu, u.reshape(m.samples.shape), resid


def torus_mu(m: TorusMedium, lam: float, theta: float) -> float:
    """Principal eigenvalue of the drifted cell operator on the torus."""
    return torus_eigenpair(m, lam, theta)[0]


def torus_c_star(
    m: TorusMedium,
    theta: float,
    xtol: float = 1e-6,
    rtol: float = 1e-10,
) -> SpeedResult:
    """Minimal speed over a doubly periodic medium.

    Same dispersion minimization as the stratified case, except that no a
    priori upper bound on the speed exists here (that is the whole point of
    the two-dimensional construction), so the bracket simply doubles under
    a hard cap.
    """
    state: dict = {"warm": None}

    def mu_of(lam: float) -> float:
        mu, u, _ = torus_eigenpair(m, lam, theta, rtol=rtol, warm=state["warm"])
        state["warm"] = (mu - 1e-6 * (1.0 + abs(mu)), u.ravel())
        return mu

    def g(lam: float) -> float:
        return (lam * lam - mu_of(lam)) / lam

    lam_star, c_val, evals = minimize_unimodal(g, 1e-2, 4.0, xtol=xtol)
    return SpeedResult(
        theta=theta,
        c_star=c_val,
        lambda_star=lam_star,
        evaluations=evals,
        method=SpeedMethod.GRID,
    )


# ---------------------------------------------------------------------------
# media constructors


def stratified_torus_medium(
    m1d: PeriodicMedium, Nx: int = 64, Ny: int = 64, L2: float = 1.0
) -> TorusMedium:
    """Extend a stratified coefficient b(x) trivially in y (for cross-checks)."""
    from .media import sample_on_grid

    col = sample_on_grid(m1d, Nx)
    return TorusMedium(
        L1=m1d.period_L,
        L2=L2,
        alpha=m1d.mass_alpha,
        slope=m1d.reaction_slope,
        samples=np.repeat(col[:, None], Ny, axis=1),
    )


def concentrating_medium(
    alpha: float, L1: float, L2: float, n: int, slope: float = 1.0
) -> TorusMedium:
    """n-th member of the concentrating family with cell mass alpha*L1*L2.

    A doubly periodic product bump centered in the cell: the x-width decays
    like 1/n while the y-width stays fixed and thin, so the mass piles onto
    a short vertical segment whose line density grows linearly in n.  The
    grid refines with n to keep at least 8 cells across each bump width.
    """
    if n < 1:
        raise ParameterDomainError("family index must be >= 1")
    wx = _BUMP_WX0 * L1 / n
    wy = _BUMP_WY * L2
    nx = max(64, _CELLS_ACROSS * int(math.ceil(L1 / wx)))
    ny = max(64, _CELLS_ACROSS * int(math.ceil(L2 / wy)))
    x = (np.arange(nx) + 0.5) * (L1 / nx)
    y = (np.arange(ny) + 0.5) * (L2 / ny)
    px = bump_profile(2.0 * (x - L1 / 2.0) / wx)
    py = bump_profile(2.0 * (y - L2 / 2.0) / wy)
    samples = np.outer(px, py)
    return TorusMedium(L1=L1, L2=L2, alpha=alpha, slope=slope, samples=samples)


# ---------------------------------------------------------------------------
# unboundedness demonstration


@dataclass(frozen=True)
class UnboundednessReport:
    n_list: tuple[int, ...]
    mu_values: tuple[float, ...]
    c_values: tuple[float, ...]
    mu_strictly_decreasing: bool
    c_strictly_increasing: bool
    divergence_witness: bool  # some mu < -10 * alpha_eff

    @property
    def ok(self) -> bool:
        return (
            self.mu_strictly_decreasing
            and self.c_strictly_increasing
            and self.divergence_witness
        )


def unboundedness_demo(
    alpha: float,
    L1: float,
    L2: float,
    n_list,
    slope: float = 1.0,
    xtol: float = 1e-4,
) -> UnboundednessReport:
    """Drive mu down and c* up along the concentrating family.

    Reports mu(0, 0, b_n) and c*(0; b_n) for each n and checks strict
    monotonicity plus the divergence witness mu < -10 * alpha_eff.
    """
    n_list = tuple(int(n) for n in n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ParameterDomainError("family indices must be strictly increasing")
    mus = []
    cs = []
    for n in n_list:
        m = concentrating_medium(alpha, L1, L2, n, slope=slope)
        mus.append(torus_mu(m, 0.0, 0.0))
        cs.append(torus_c_star(m, 0.0, xtol=xtol).c_star)
    at = slope * alpha
    return UnboundednessReport(
        n_list=n_list,
        mu_values=tuple(mus),
        c_values=tuple(cs),
        mu_strictly_decreasing=bool(np.all(np.diff(mus) < 0)),
        c_strictly_increasing=bool(np.all(np.diff(cs) > 0)),
        divergence_witness=bool(min(mus) < -10.0 * at),
    )


def unboundedness_to_csv(report: UnboundednessReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("n,mu,c_star\n")
        for n, mu, c in zip(report.n_list, report.mu_values, report.c_values):
            fh.write(f"{n},{mu:.17g},{c:.17g}\n")
