"""Principal eigenvalue of the periodic cell operator with drift.

The operator acting on L-periodic functions is

    (A psi)(x) = -psi'' + 2*lam_bar*psi' - slope*b(x)*psi,

where ``lam_bar = lam * cos(theta)`` is the only way the direction enters.
Its principal eigenvalue ``mu`` is the unique eigenvalue with a positive
eigenfunction; it is also the leftmost point of the spectrum.

Discretization: uniform periodic grid at cell midpoints, central second
differences for both derivatives, giving a cyclic tridiagonal matrix.  When
``|lam_bar| * dx < 1`` every off-diagonal entry is nonpositive, so for any
shift ``s`` strictly below the principal eigenvalue the matrix ``A - s*I``
is an irreducible M-matrix and its inverse is entrywise positive.  Power
iteration on that inverse therefore converges to the positive principal
pair, and each iterate yields certified Collatz-Wielandt brackets

    min_i (A y)_i / y_i  <=  mu  <=  max_i (A y)_i / y_i

from which the next (safeguarded) shift is taken.  The starting shift is
the conservative Gershgorin bound below the whole spectrum.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import comb as comb_mod
from .errors import (
    NumericalFailureError,
    ParameterDomainError,
    UnsupportedRepresentationError,
)
from .media import MediumKind, PeriodicMedium, sample_on_grid

__all__ = [
    "DispersionMethod",
    "DispersionSample",
    "VariationalCertificate",
    "mu_grid",
    "adjoint_psi",
    "transfer_matrix_mu",
    "nadin_value",
    "reconstruct_psi_from_eta",
    "dispersion_curve",
    "dispersion_to_csv",
    "clear_dispersion_cache",
    "principal_pair",
]

EIG_RTOL = 1e-12
EIG_MAX_ITER = 10_000


class DispersionMethod(enum.Enum):
    GRID = "grid"
    TRANSFER_MATRIX = "transfer_matrix"
    COMB_ANALYTIC = "comb_analytic"


@dataclass(frozen=True)
class DispersionSample:
    """One evaluation (lam, theta) -> (mu, eigenfunction on the grid)."""

    lam: float
    theta: float
    lambda_bar: float
    mu: float
    psi: np.ndarray
    grid_N: int
    method: DispersionMethod
    residual: float


@dataclass(frozen=True)
class VariationalCertificate:
    """Value of the periodic Rayleigh-type functional at a test function.

    ``value_H`` is an upper bound (to quadrature accuracy) for the principal
    eigenvalue; ``schwarz_gap`` is the nonnegative defect in the
    Cauchy-Schwarz inequality between the mean of eta^2 and the harmonic
    mean of eta^2 that multiplies the squared drift.
    """

    eta: np.ndarray
    value_H: float
    dirichlet: float
    mass: float
    schwarz_gap: float
    degenerate: bool


# ---------------------------------------------------------------------------
# generic safeguarded shift-and-invert power iteration


def _splu_factorize(B: sp.spmatrix):
    lu = splu(B.tocsc())
    return lu.solve


def principal_pair(
    A: sp.spmatrix,
    spectral_floor: float,
    rtol: float = EIG_RTOL,
    max_iter: int = EIG_MAX_ITER,
    warm_shift: float | None = None,
    warm_vector: np.ndarray | None = None,
    factorize=None,
) -> tuple[float, np.ndarray, float]:
    """Leftmost eigenvalue with positive eigenvector of an M-compatible matrix.

    ``A`` must have nonpositive off-diagonal entries and be irreducible;
    ``spectral_floor`` must be a certified strict lower bound on the real
    part of its spectrum (e.g. from Gershgorin disks).  A warm shift and
    starting vector from a nearby solve may be supplied; if the warm shift
    turns out to sit above the eigenvalue the iteration detects the lost
    positivity and backs off toward the certified floor.

    ``factorize(B)`` must return a callable solving B x = rhs; the default
    is a sparse LU.  Inexact solvers are fine: the Collatz-Wielandt bounds
    are valid for any positive iterate, so solver error can only slow the
    outer iteration, never mislead it.

    Returns ``(mu, y, residual)`` with ``max(y) == 1`` and
    ``residual = ||A y - mu y||_inf``.
    """
    n = A.shape[0]
    A = A.tocsc()
    if factorize is None:
        factorize = _splu_factorize
    if warm_vector is not None and warm_vector.shape == (n,) and warm_vector.min() > 0:
        x = warm_vector / warm_vector.max()
    else:
        x = np.full(n, 1.0 / n)
    s = warm_shift if warm_shift is not None else spectral_floor
    solve = None
    mu_prev = None
    resid = math.inf
    stable = 0
    identity = sp.identity(n, format="csc")
    for _ in range(max_iter):
        if solve is None:
            try:
                solve = factorize((A - s * identity).tocsc())
            except RuntimeError:
                s = spectral_floor if s == spectral_floor else 0.5 * (s + spectral_floor)
                continue
        y = solve(x)
        if y is None or not np.all(np.isfinite(y)) or y.min() <= 0.0:
            # shift crossed the eigenvalue (lost the M-matrix property);
            # back off toward the certified floor and retry
            s = 0.5 * (s + spectral_floor)
            solve = None
            continue
        y /= y.max()
        z = A @ y
        ratios = z / y
        lo = float(ratios.min())
        hi = float(ratios.max())
        mu_est = float(np.dot(y, z) / np.dot(y, y))
        mu_est = min(max(mu_est, lo), hi)
        resid = float(np.max(np.abs(z - mu_est * y)))
        if mu_prev is not None and abs(mu_est - mu_prev) <= rtol * (1.0 + abs(mu_est)):
            stable += 1
            if stable >= 2:
                return mu_est, y, resid
        else:
            stable = 0
        mu_prev = mu_est
        new_s = lo - max(0.01 * (hi - lo), 1e-9 * (1.0 + abs(lo)))
        if new_s > s:
            s = new_s
            solve = None
        x = y
    raise NumericalFailureError(
        "principal eigenvalue iteration did not converge",
        {"last_mu": mu_prev, "last_residual": resid, "iterations": max_iter},
    )


# ---------------------------------------------------------------------------
# 1-D cell operator


def _assemble_cell_operator(
    btilde: np.ndarray, L: float, lambda_bar: float
) -> sp.spmatrix:
    n = btilde.size
    dx = L / n
    if abs(lambda_bar) * dx >= 1.0:
        raise ParameterDomainError(
            "grid too coarse for this drift: need |lam*cos(theta)|*dx < 1; "
            "increase N"
        )
    inv2 = 1.0 / (dx * dx)
    idx = np.arange(n)
    rows = np.concatenate([idx, idx, idx])
    cols = np.concatenate([(idx - 1) % n, idx, (idx + 1) % n])
    data = np.concatenate(
        [
            np.full(n, -inv2 - lambda_bar / dx),
            2.0 * inv2 - btilde,
            np.full(n, -inv2 + lambda_bar / dx),
        ]
    )
    return sp.csc_matrix((data, (rows, cols)), shape=(n, n))


_SAMPLE_CACHE: dict[tuple[str, int], np.ndarray] = {}


def _btilde_cached(m: PeriodicMedium, N: int) -> np.ndarray:
    key = (m.content_hash(), N)
    with _CACHE_LOCK:
        hit = _SAMPLE_CACHE.get(key)
    if hit is None:
        hit = m.reaction_slope * sample_on_grid(m, N)
        hit.setflags(write=False)
        with _CACHE_LOCK:
            _SAMPLE_CACHE[key] = hit
    return hit


def _solve_grid(
    m: PeriodicMedium, lambda_bar: float, N: int
) -> tuple[float, np.ndarray, float]:
    if m.kind is MediumKind.DIRAC_COMB:
        raise UnsupportedRepresentationError(
            "grid eigensolve cannot handle a Dirac comb; mollify it or use "
            "the analytic comb dispersion"
        )
    if N < 32:
        raise ParameterDomainError("grid eigensolve needs N >= 32")
    btilde = _btilde_cached(m, N)
    A = _assemble_cell_operator(btilde, m.period_L, lambda_bar)
    # Gershgorin: every eigenvalue has real part >= -max(btilde)
    floor = -float(btilde.max()) - 1.0
    return principal_pair(A, floor)


# cache of grid eigensolves keyed by (medium hash, lambda_bar, N)
_CACHE: dict[tuple[str, float, int], tuple[float, np.ndarray, float]] = {}
_CACHE_LOCK = threading.Lock()


def clear_dispersion_cache() -> None:
    with _CACHE_LOCK:
        _CACHE.clear()
        _SAMPLE_CACHE.clear()


def _solve_grid_cached(
    m: PeriodicMedium, lambda_bar: float, N: int
) -> tuple[float, np.ndarray, float]:
    key = (m.content_hash(), float(lambda_bar), int(N))
    with _CACHE_LOCK:
        hit = _CACHE.get(key)
    if hit is not None:
        return hit
    out = _solve_grid(m, lambda_bar, N)
    with _CACHE_LOCK:
        _CACHE[key] = out
    return out


def mu_grid(m: PeriodicMedium, lam: float, theta: float, N: int = 256) -> DispersionSample:
    """Principal eigenvalue and positive eigenfunction on an N-point grid.

    Only the product ``lam * cos(theta)`` enters the operator, so
    ``mu_grid(m, lam, theta)`` reproduces ``mu_grid(m, lam*cos(theta), 0)``
    exactly, including bitwise.
    """
    lambda_bar = lam * math.cos(theta)
    mu, psi, resid = _solve_grid_cached(m, lambda_bar, N)
    return DispersionSample(
        lam=lam,
        theta=theta,
        lambda_bar=lambda_bar,
        mu=mu,
        psi=psi,
        grid_N=N,
        method=DispersionMethod.GRID,
        residual=resid,
    )


def adjoint_psi(m: PeriodicMedium, lam: float, theta: float, N: int = 256) -> DispersionSample:
    """Positive eigenfunction of the adjoint operator (drift reversed)."""
    lambda_bar = lam * math.cos(theta)
    mu, psi, resid = _solve_grid_cached(m, -lambda_bar, N)
    return DispersionSample(
        lam=lam,
        theta=theta,
        lambda_bar=-lambda_bar,
        mu=mu,
        psi=psi,
        grid_N=N,
        method=DispersionMethod.GRID,
        residual=resid,
    )


# ---------------------------------------------------------------------------
# transfer-matrix oracle (piecewise exponential Floquet matching)


def _segments_and_atoms(m: PeriodicMedium) -> tuple[list[tuple[float, float]], list[float]]:
    if m.kind is MediumKind.PIECEWISE_CONSTANT:
        return [(l, m.reaction_slope * v) for l, v in m.segments], []
    if m.kind is MediumKind.DIRAC_COMB:
        return [(m.period_L, 0.0)], [m.reaction_slope * m.atom_weight]
    raise UnsupportedRepresentationError(
        "transfer matrix needs a piecewise-constant medium or a Dirac comb"
    )


def _segment_matrix(q: float, ell: float) -> tuple[np.ndarray, float]:
    """Propagator of chi'' = q*chi over length ell, with a factored log scale."""
    if q > 0.0:
        sq = math.sqrt(q)
        x = sq * ell
        if x > 30.0:
            e2 = math.exp(-2.0 * x)
            M = 0.5 * np.array(
                [[1.0 + e2, (1.0 - e2) / sq], [sq * (1.0 - e2), 1.0 + e2]]
            )
            return M, x
        c, s_ = math.cosh(x), math.sinh(x)
        return np.array([[c, s_ / sq], [sq * s_, c]]), 0.0
    if q < 0.0:
        w = math.sqrt(-q)
        x = w * ell
        return np.array([[math.cos(x), math.sin(x) / w], [-w * math.sin(x), math.cos(x)]]), 0.0
    return np.array([[1.0, ell], [0.0, 1.0]]), 0.0


def _log_discriminant_gap(
    mu: float, lam: float, L: float, segments, atoms
) -> float:
    """log(trace of the period map) - log(2*cosh(lam*L)); positive below the root.

    Works in the symmetric gauge psi = exp(lam*x)*chi, where the period map
    has determinant one and the periodic-eigenvalue condition becomes
    trace = 2*cosh(lam*L).  All segment propagators are accumulated with an
    explicit log scale so arbitrarily stiff cells cannot overflow.
    """
    T = np.eye(2)
    logscale = 0.0
    for ell, btil in segments:
        M, lg = _segment_matrix(lam * lam - mu - btil, ell)
        T = M @ T
        logscale += lg
        norm = np.abs(T).max()
        T /= norm
        logscale += math.log(norm)
    for w in atoms:
        T = np.array([[1.0, 0.0], [-w, 1.0]]) @ T
    tr = T[0, 0] + T[1, 1]
    x = abs(lam) * L
    log_target = x + math.log1p(math.exp(-2.0 * x))  # log(2*cosh(lam*L))
    if tr <= 0.0:
        return -math.inf
    return logscale + math.log(tr) - log_target


def transfer_matrix_mu(m: PeriodicMedium, lambda_bar: float) -> float:
    """Principal eigenvalue by exact Floquet matching; independent of mu_grid.

    Bisects on ``mu`` below ``-alpha_eff``: the Hill discriminant of the
    gauge-transformed equation is strictly decreasing there, so the sign of
    ``log(trace) - log(2*cosh(lam_bar*L))`` brackets the root.
    """
    lam = abs(float(lambda_bar))
    segments, atoms = _segments_and_atoms(m)
    L = m.period_L
    at = m.alpha_eff

    def g(mu: float) -> float:
        return _log_discriminant_gap(mu, lam, L, segments, atoms)

    hi = -at + 1e-12 * (1.0 + at)
    depth = at * at * L * L + 1.0
    lo = -at - depth
    expansions = 0
    while g(lo) <= 0.0:
        depth *= 2.0
        lo = -at - depth
        expansions += 1
        if expansions > 60:
            raise NumericalFailureError(
                "transfer-matrix bracket expansion failed",
                {"lambda_bar": lam, "lo": lo},
            )
    if g(hi) > 0.0:
        # root sits essentially at -alpha_eff (constant medium)
        return -at
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= max(1e-13, 4e-16 * abs(lo)):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# variational certificate


def _atom_eta_value(m: PeriodicMedium, eta: np.ndarray) -> float:
    """eta at the atom position, linearly interpolated on the midpoint grid."""
    n = eta.size
    dx = m.period_L / n
    t = m.atom_offset / dx - 0.5
    i0 = math.floor(t)
    w = t - i0
    return (1.0 - w) * eta[i0 % n] + w * eta[(i0 + 1) % n]


def nadin_value(
    m: PeriodicMedium, lam: float, theta: float, eta: np.ndarray
) -> VariationalCertificate:
    """Rayleigh-type functional whose minimum over positive periodic test
    functions is the principal eigenvalue.

    For strictly positive ``eta`` the drift contributes
    ``lam_bar^2 * (int eta^2 - L^2 / int eta^-2) / int eta^2``; if ``eta``
    touches zero the harmonic term drops out and the contribution is the
    full ``lam_bar^2`` (the degenerate branch).
    """
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0):
        raise ParameterDomainError("test function must be nonnegative")
    n = eta.size
    L = m.period_L
    dx = L / n
    lambda_bar = lam * math.cos(theta)

    denom = dx * float(np.sum(eta * eta))
    d = np.diff(eta, append=eta[:1])
    dirichlet = float(np.sum(d * d)) / dx

    if m.kind is MediumKind.DIRAC_COMB:
        mass = m.reaction_slope * m.atom_weight * _atom_eta_value(m, eta) ** 2
    else:
        btilde = m.reaction_slope * sample_on_grid(m, n)
        mass = dx * float(np.sum(btilde * eta * eta))

    degenerate = bool(np.any(eta == 0.0))
    if degenerate:
        gap = denom
    else:
        s2 = float(np.sum(eta * eta))
        sm2 = float(np.sum(eta**-2))
        # Cauchy-Schwarz guarantees s2*sm2 >= n^2; clamp roundoff dips
        gap = dx * max(s2 * sm2 - float(n) * float(n), 0.0) / sm2
    value = (dirichlet - mass + lambda_bar * lambda_bar * gap) / denom
    return VariationalCertificate(
        eta=eta,
        value_H=value,
        dirichlet=dirichlet,
        mass=mass,
        schwarz_gap=gap,
        degenerate=degenerate,
    )


def reconstruct_psi_from_eta(
    eta: np.ndarray, m: PeriodicMedium, lam: float, theta: float
) -> np.ndarray:
    """Rebuild the principal eigenfunction from a minimizing test function.

    Uses psi = eta * exp(lam_bar * xi) with xi' = 1 - A/eta^2 and A chosen
    so the discrete mean of xi' vanishes, which makes xi (hence psi)
    periodic by construction.
    """
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0):
        raise ParameterDomainError("test function must be strictly positive")
    n = eta.size
    L = m.period_L
    dx = L / n
    lambda_bar = lam * math.cos(theta)
    inv2 = eta**-2
    A = L / (dx * float(np.sum(inv2)))
    xi_prime = 1.0 - A * inv2
    xi_prime -= xi_prime.mean()  # kill the residual roundoff drift
    # trapezoidal cumulative integral along the periodic midpoint grid
    incr = 0.5 * dx * (xi_prime + np.roll(xi_prime, -1))
    xi = np.concatenate([[0.0], np.cumsum(incr[:-1])])
    psi = eta * np.exp(lambda_bar * xi)
    return psi / psi.max()


# ---------------------------------------------------------------------------
# dispersion curves


def _comb_psi(
    alpha: float, L: float, slope: float, lambda_bar: float, s: float, N: int
) -> np.ndarray:
    """Eigenfunction of the comb between atoms, on the midpoint grid.

    Between consecutive atoms the eigenfunction is a combination of
    exp((lam+s)x) and exp((lam-s)x) fixed by periodicity and the derivative
    jump; the form below keeps every exponent nonpositive.
    """
    lam = lambda_bar
    rp, rm = lam + s, lam - s
    x0 = L / 2.0
    x = (np.arange(N) + 0.5) * (L / N)
    # distance past the atom, wrapped into [0, L)
    d = np.mod(x - x0, L)
    em = -math.expm1(rm * L)  # 1 - exp(rm*L) > 0
    ep = -math.expm1(-rp * L)  # 1 - exp(-rp*L) > 0
    psi = em * np.exp(rp * (d - L)) + ep * np.exp(rm * d)
    return psi / psi.max()


def dispersion_curve(
    m: PeriodicMedium,
    theta: float,
    lambda_grid,
    N: int = 256,
) -> list[DispersionSample]:
    """Batch of principal-eigenvalue solves along a grid of decay rates.

    Grid solves are cached by (medium, drift, N); Dirac combs take the
    analytic route.
    """
    out = []
    for lam in np.asarray(lambda_grid, dtype=float):
        if m.kind is MediumKind.DIRAC_COMB:
            lambda_bar = lam * math.cos(theta)
            cd = comb_mod.comb_mu(m.mass_alpha, m.period_L, m.reaction_slope, lambda_bar)
            psi = _comb_psi(
                m.mass_alpha, m.period_L, m.reaction_slope, abs(lambda_bar), cd.s, N
            )
            out.append(
                DispersionSample(
                    lam=float(lam),
                    theta=theta,
                    lambda_bar=lambda_bar,
                    mu=cd.mu,
                    psi=psi,
                    grid_N=N,
                    method=DispersionMethod.COMB_ANALYTIC,
                    residual=abs(cd.residual),
                )
            )
        else:
            out.append(mu_grid(m, float(lam), theta, N))
    return out


def dispersion_to_csv(samples: list[DispersionSample], path) -> None:
    with open(path, "w") as fh:
        fh.write("lambda,theta,lambda_cos_theta,mu,method,grid_N,residual\n")
        for s in samples:
            fh.write(
                f"{s.lam:.17g},{s.theta:.17g},{s.lambda_bar:.17g},{s.mu:.17g},"
                f"{s.method.value},{s.grid_N},{s.residual:.17g}\n"
            )
