"""Minimal front speeds, directional spreading speeds, and spreading shapes.

The minimal speed in direction ``theta`` is

    c*(theta) = min_{lam > 0} (lam**2 - mu(lam, theta)) / lam,

with ``mu`` the principal eigenvalue of the periodic cell operator; the
directional spreading speed is the secant envelope

    w(theta) = min_{|theta - phi| < pi/2} c*(phi) / cos(theta - phi),

and the asymptotic invasion shape is the intersection of the half planes
``x . e_phi <= c*(phi)``.

Directions enter only through |cos|, so every angle is folded into
[0, pi/2] and snapped onto a fixed dyadic lattice before use.  The snap is
far below every quoted tolerance but makes the symmetries
c*(theta) = c*(-theta) = c*(theta + pi) exact in floating point, where a
bare cos() would leave ulp-level asymmetry after the inexact "+ pi".
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
import threading

import numpy as np
from scipy.spatial import ConvexHull

from . import comb as comb_mod
from . import eigen
from .errors import NumericalFailureError, ParameterDomainError
from .media import MediumKind, PeriodicMedium, make_dirac_comb

__all__ = [
    "SpeedMethod",
    "SpeedResult",
    "WulffShape",
    "MonotonicityReport",
    "OptimalityReport",
    "AsymptoticRegime",
    "fold_direction",
    "minimize_unimodal",
    "c_star",
    "spreading_speed",
    "wulff_shape",
    "monotonicity_check",
    "optimality_check",
    "asymptotic_reference",
    "speeds_to_csv",
    "polygon_to_csv",
    "clear_speed_cache",
]

# lattice spacing of the direction snap; 2**-26 rad of angle noise changes
# speeds by ~1e-8 relative, orders below every consumer tolerance
_ANGLE_LATTICE = 2.0**-26

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def fold_direction(theta: float) -> float:
    """Canonical representative of a direction in [0, pi/2].

    math.remainder is exact, so theta and -theta fold identically; the
    lattice snap then collapses the rounding left by an inexact theta + pi.
    """
    t = abs(math.remainder(float(theta), math.pi))
    if t > math.pi / 2.0:
        t = math.pi - t
    return round(t / _ANGLE_LATTICE) * _ANGLE_LATTICE


class SpeedMethod(enum.Enum):
    GRID = "grid"
    COMB_ANALYTIC = "comb_analytic"


@dataclass(frozen=True)
class SpeedResult:
    theta: float
    c_star: float
    lambda_star: float
    evaluations: int
    method: SpeedMethod


@dataclass(frozen=True)
class WulffShape:
    """Polar samples of the spreading speed plus the half-plane polygon."""

    theta_grid: np.ndarray
    w_values: np.ndarray
    minimizer_phi: np.ndarray
    polygon: np.ndarray  # (K, 2) vertices, counterclockwise
    normals: np.ndarray  # (M, 2) unit normals of the half planes
    offsets: np.ndarray  # (M,) support offsets c*(phi)


@dataclass(frozen=True)
class MonotonicityReport:
    thetas: np.ndarray
    c_values: np.ndarray
    w_values: np.ndarray
    nondecreasing: bool
    strict_somewhere: bool
    degenerate_constant: bool
    min_c_increment: float
    min_w_increment: float
    offending_pair: tuple[int, int] | None

    @property
    def ok(self) -> bool:
        return self.nondecreasing and (self.strict_somewhere or self.degenerate_constant)


@dataclass(frozen=True)
class OptimalityReport:
    theta: float
    c_comb: float
    c_medium: float
    c_margin: float
    w_comb: float | None
    w_medium: float | None
    ok: bool


class AsymptoticRegime(enum.Enum):
    SMALL_L = "small_L"
    LARGE_L_CSTAR = "large_L_cstar"
    LARGE_L_W = "large_L_w"


# ---------------------------------------------------------------------------
# bracketed golden-section minimization


def minimize_unimodal(
    g,
    lo: float,
    hi: float,
    xtol: float = 1e-8,
    expand_cap: int = 60,
) -> tuple[float, float, int]:
    """Minimize a unimodal function on (0, inf) from an initial bracket.

    The bracket is grown (doubling the top, halving the bottom) until a
    5-point geometric probe sees a decrease-then-increase pattern, then
    golden-section search refines the interior interval.  Eigenvalue sweeps
    are noisy at the 1e-12 level, so no derivatives are used.

    Returns ``(x_min, g(x_min), evaluations)``.
    """
    cache: dict[float, float] = {}

    def f(x: float) -> float:
        v = cache.get(x)
        if v is None:
            v = g(x)
            cache[x] = v
        return v

    a = b = None
    for _ in range(expand_cap):
        probes = np.geomspace(lo, hi, 5)
        vals = [f(float(p)) for p in probes]
        k = int(np.argmin(vals))
        if k == 0:
            lo *= 0.5
        elif k == 4:
            hi *= 2.0
        else:
            a, b = float(probes[k - 1]), float(probes[k + 1])
            break
    if a is None:
        raise NumericalFailureError(
            "could not bracket the dispersion minimum",
            {"probe_table": {float(x): cache[float(x)] for x in sorted(cache)}},
        )
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x), len(cache)


# ---------------------------------------------------------------------------
# minimal speed


_CSTAR_CACHE: dict[tuple, SpeedResult] = {}
_CSTAR_LOCK = threading.Lock()


def clear_speed_cache() -> None:
    with _CSTAR_LOCK:
        _CSTAR_CACHE.clear()
    eigen.clear_dispersion_cache()


def c_star(
    m: PeriodicMedium,
    theta: float,
    N: int = 256,
    xtol: float = 1e-8,
) -> SpeedResult:
    """Minimal pulsating-front speed in direction ``theta``.

    Dirac combs take the analytic dispersion relation; everything else is
    solved on an N-point grid.  Results are cached per folded direction.
    """
    t = fold_direction(theta)
    chi = math.cos(t)
    key = (m.content_hash(), chi, N, xtol)
    with _CSTAR_LOCK:
        hit = _CSTAR_CACHE.get(key)
    if hit is not None:
        return replace(hit, theta=theta)

    at = m.alpha_eff
    if m.kind is MediumKind.DIRAC_COMB:
        method = SpeedMethod.COMB_ANALYTIC

        def mu_of(lam: float) -> float:
            return comb_mod.comb_mu(
                m.mass_alpha, m.period_L, m.reaction_slope, lam * chi
            ).mu

    else:
        method = SpeedMethod.GRID

        def mu_of(lam: float) -> float:
            return eigen.mu_grid(m, lam * chi, 0.0, N).mu

    def g(lam: float) -> float:
        return (lam * lam - mu_of(lam)) / lam

    hi0 = math.sqrt(at + at * at * m.period_L**2) + 1.0
    lam_star, c_val, evals = minimize_unimodal(g, 1e-3, hi0, xtol=xtol)
    result = SpeedResult(
        theta=theta,
        c_star=c_val,
        lambda_star=lam_star,
        evaluations=evals,
        method=method,
    )
    with _CSTAR_LOCK:
        _CSTAR_CACHE[key] = result
    return result


# ---------------------------------------------------------------------------
# spreading speed and shape


def _envelope_offsets(phi_grid_size: int) -> np.ndarray:
    """Secant offsets in (-pi/2, pi/2), endpoints excluded by half a step.

    The offset 0 is always included so w(theta) <= c*(theta) holds exactly.
    """
    step = math.pi / phi_grid_size
    offs = -math.pi / 2.0 + (np.arange(phi_grid_size) + 0.5) * step
    return np.sort(np.append(offs, 0.0))


def spreading_speed(
    m: PeriodicMedium,
    theta: float,
    phi_grid_size: int = 256,
    N: int = 256,
    xtol: float = 1e-8,
) -> tuple[float, float]:
    """Directional spreading speed and its minimizing secant direction.

    Minimizes c*(phi)/cos(theta - phi) over a midpoint grid of directions
    phi in (theta - pi/2, theta + pi/2).
    """
    if phi_grid_size < 64:
        raise ParameterDomainError("phi grid must have at least 64 points")
    offsets = _envelope_offsets(phi_grid_size)
    best = math.inf
    best_phi = theta
    for delta in offsets:
        sec = math.cos(delta)
        cand = c_star(m, theta + delta, N=N, xtol=xtol).c_star / sec
        if cand < best:
            best = cand
            best_phi = theta + delta
    return best, best_phi


def wulff_shape(
    m: PeriodicMedium,
    theta_grid_size: int = 128,
    phi_grid_size: int = 256,
    N: int = 256,
    xtol: float = 1e-8,
) -> WulffShape:
    """Polar spreading-speed samples plus the half-plane intersection polygon."""
    if theta_grid_size < 64 or phi_grid_size < 64:
        raise ParameterDomainError("direction grids must have at least 64 points")
    thetas = np.linspace(0.0, 2.0 * math.pi, theta_grid_size, endpoint=False)
    w_vals = np.empty(theta_grid_size)
    phi_min = np.empty(theta_grid_size)
    for i, th in enumerate(thetas):
        w_vals[i], phi_min[i] = spreading_speed(
            m, float(th), phi_grid_size=phi_grid_size, N=N, xtol=xtol
        )
    normals = np.column_stack([np.cos(thetas), np.sin(thetas)])
    offsets = np.array(
        [c_star(m, float(th), N=N, xtol=xtol).c_star for th in thetas]
    )
    polygon = _halfplane_polygon(normals, offsets)
    return WulffShape(
        theta_grid=thetas,
        w_values=w_vals,
        minimizer_phi=phi_min,
        polygon=polygon,
        normals=normals,
        offsets=offsets,
    )


def _halfplane_polygon(normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Vertices of the intersection of half planes n.x <= c (origin inside).

    Uses polar duality: the dual of the constraint set is the convex hull of
    the points n/c, and each hull edge maps back to a vertex.
    """
    if np.any(offsets <= 0):
        raise ParameterDomainError("all support offsets must be positive")
    dual = normals / offsets[:, None]
    hull = ConvexHull(dual)
    verts = []
    for i, j in hull.simplices:
        ni, ci = normals[i], offsets[i]
        nj, cj = normals[j], offsets[j]
        det = ni[0] * nj[1] - nj[0] * ni[1]
        if abs(det) < 1e-14:
            continue
        x = (ci * nj[1] - cj * ni[1]) / det
        y = (ni[0] * cj - nj[0] * ci) / det
        verts.append((x, y))
    verts = np.array(verts)
    order = np.argsort(np.arctan2(verts[:, 1], verts[:, 0]))
    return verts[order]


def support_function(polygon: np.ndarray, direction: np.ndarray) -> float:
    """max over vertices of v . e for one unit direction e."""
    return float(np.max(polygon @ np.asarray(direction)))


# ---------------------------------------------------------------------------
# property reports


def monotonicity_check(
    m: PeriodicMedium,
    thetas=None,
    N: int = 256,
    phi_grid_size: int = 128,
    xtol: float = 1e-8,
    slack: float = 1e-6,
    strict_margin: float = 1e-8,
) -> MonotonicityReport:
    """Check that c* and w are nondecreasing on [0, pi/2].

    Constant media are the degenerate equality case and are excluded from
    the strictness claim.
    """
    if thetas is None:
        thetas = np.linspace(0.0, math.pi / 2.0, 19)
    thetas = np.asarray(thetas, dtype=float)
    cs = np.array([c_star(m, float(t), N=N, xtol=xtol).c_star for t in thetas])
    ws = np.array(
        [
            spreading_speed(m, float(t), phi_grid_size=phi_grid_size, N=N, xtol=xtol)[0]
            for t in thetas
        ]
    )
    dc = np.diff(cs)
    dw = np.diff(ws)
    degenerate = m.is_constant()
    nondec = bool(np.all(dc >= -slack) and np.all(dw >= -slack))
    strict = bool(np.any(dc > strict_margin) and np.any(dw > strict_margin))
    offending = None
    if not nondec:
        bad = np.where((dc < -slack) | (dw < -slack))[0]
        offending = (int(bad[0]), int(bad[0]) + 1)
    return MonotonicityReport(
        thetas=thetas,
        c_values=cs,
        w_values=ws,
        nondecreasing=nondec,
        strict_somewhere=strict,
        degenerate_constant=degenerate,
        min_c_increment=float(dc.min()) if dc.size else 0.0,
        min_w_increment=float(dw.min()) if dw.size else 0.0,
        offending_pair=offending,
    )


def optimality_check(
    m_smooth: PeriodicMedium,
    theta: float,
    N: int = 256,
    xtol: float = 1e-8,
    solver_tol: float = 1e-6,
    include_w: bool = False,
    phi_grid_size: int = 128,
) -> OptimalityReport:
    """Compare a medium against the Dirac comb with the same mass and period.

    The comb must win strictly on the minimal speed (margin above ten times
    the solver tolerance) and at least weakly on the spreading speed.
    """
    h = make_dirac_comb(m_smooth.mass_alpha, m_smooth.period_L, m_smooth.reaction_slope)
    c_h = c_star(h, theta, N=N, xtol=xtol).c_star
    c_b = c_star(m_smooth, theta, N=N, xtol=xtol).c_star
    margin = c_h - c_b
    ok = margin > 10.0 * solver_tol
    w_h = w_b = None
    if include_w:
        w_h, _ = spreading_speed(h, theta, phi_grid_size=phi_grid_size, N=N, xtol=xtol)
        w_b, _ = spreading_speed(
            m_smooth, theta, phi_grid_size=phi_grid_size, N=N, xtol=xtol
        )
        ok = ok and (w_h >= w_b - 10.0 * solver_tol)
    return OptimalityReport(
        theta=theta,
        c_comb=c_h,
        c_medium=c_b,
        c_margin=margin,
        w_comb=w_h,
        w_medium=w_b,
        ok=ok,
    )


def asymptotic_reference(
    theta: float,
    alpha: float,
    L: float,
    slope: float,
    regime: AsymptoticRegime | str,
) -> float:
    """Closed-form small- and large-period reference speeds for the comb.

    Large-period minimal speed: L*at/(2 cos theta) while cos^2 >= 1/2, else
    L*at*sin theta; large-period spreading speed: L*at/(1 + |cos theta|);
    small period: the homogeneous speed 2*sqrt(at).
    """
    if alpha <= 0 or L <= 0 or slope <= 0:
        raise ParameterDomainError("alpha, L and slope must be positive")
    regime = AsymptoticRegime(regime)
    at = slope * alpha
    if regime is AsymptoticRegime.SMALL_L:
        return 2.0 * math.sqrt(at)
    c = abs(math.cos(theta))
    s = math.sqrt(max(1.0 - c * c, 0.0))
    if regime is AsymptoticRegime.LARGE_L_CSTAR:
        if c * c >= 0.5:
            return L * at / (2.0 * c)
        return L * at * s
    return L * at / (1.0 + c)


# ---------------------------------------------------------------------------
# CSV export


def speeds_to_csv(rows, path) -> None:
    """rows: iterable of (theta, c_star, lambda_star, w, phi_min)."""
    with open(path, "w") as fh:
        fh.write("theta,c_star,lambda_star,w,phi_min\n")
        for theta, c, lam, w, phi in rows:
            fh.write(f"{theta:.17g},{c:.17g},{lam:.17g},{w:.17g},{phi:.17g}\n")


def polygon_to_csv(polygon: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write("x,y\n")
        for x, y in polygon:
            fh.write(f"{x:.17g},{y:.17g}\n")
