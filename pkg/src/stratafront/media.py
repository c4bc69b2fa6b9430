"""Periodic growth-rate coefficients and reaction nonlinearities.

A medium is a nonnegative 1-periodic-in-x coefficient b with period ``L``
and prescribed cell average ``alpha`` (so the cell mass is ``alpha * L``).
Four representations are supported: uniform grid samples, piecewise
constant segments, a periodic array of Dirac atoms (one atom per cell),
and a compactly supported mollification of that atom array.  Atoms are
kept symbolic (offset + weight); grid-based code must mollify first.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError, UnsupportedRepresentationError

__all__ = [
    "MediumKind",
    "PeriodicMedium",
    "ReactionKind",
    "ReactionSpec",
    "make_dirac_comb",
    "mollify",
    "sample_on_grid",
    "random_medium",
    "constant_medium",
    "sampled_medium",
    "piecewise_constant_medium",
    "medium_to_dict",
    "medium_from_dict",
    "load_medium",
    "save_medium",
]

#: relative tolerance on the cell-mass constraint (1/L) * int b = alpha
MASS_RTOL = 1e-12


class MediumKind(enum.Enum):
    SAMPLED = "sampled"
    PIECEWISE_CONSTANT = "piecewise_constant"
    DIRAC_COMB = "dirac_comb"
    MOLLIFIED_COMB = "mollified_comb"


# ---------------------------------------------------------------------------
# The standard compactly supported bump exp(-1/(1-t^2)) on (-1, 1).
# Fixed once so mollified media are bit-reproducible across runs.

def _raw_bump(t: float) -> float:
    if abs(t) >= 1.0:
        return 0.0
    return math.exp(-1.0 / (1.0 - t * t))


# All derivatives of the bump vanish at the endpoints, so the trapezoid rule
# on a fine fixed grid is spectrally accurate here.
_BUMP_T = np.linspace(-1.0, 1.0, 8193)
_BUMP_RAW = np.array([_raw_bump(t) for t in _BUMP_T])
_BUMP_MASS = float(np.trapezoid(_BUMP_RAW, _BUMP_T))
_BUMP_PDF = _BUMP_RAW / _BUMP_MASS
_BUMP_CDF = np.concatenate(
    [[0.0], np.cumsum((_BUMP_PDF[1:] + _BUMP_PDF[:-1]) * 0.5 * np.diff(_BUMP_T))]
)
_BUMP_CDF /= _BUMP_CDF[-1]


def bump_profile(t: np.ndarray | float) -> np.ndarray | float:
    """Unit-mass C-infinity bump supported on (-1, 1)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti * ti)) / _BUMP_MASS
    return out if out.ndim else float(out)


def _bump_cdf(t: np.ndarray) -> np.ndarray:
    return np.interp(np.asarray(t, dtype=float), _BUMP_T, _BUMP_CDF, left=0.0, right=1.0)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PeriodicMedium:
    """Immutable periodic coefficient; safe for concurrent reads.

    Attributes
    ----------
    kind : MediumKind
        Representation of the coefficient.
    period_L : float
        Length of the periodicity cell.
    mass_alpha : float
        Cell average of b; the cell mass is ``mass_alpha * period_L``.
    reaction_slope : float
        Derivative of the reaction at zero; the linear theory sees the
        effective coefficient ``reaction_slope * b`` with effective mean
        ``alpha_eff = reaction_slope * mass_alpha``.
    values : ndarray or None
        Cell-averaged samples on a uniform grid (SAMPLED only).
    segments : tuple of (length, value) or None
        Piecewise constant data with lengths summing to ``period_L``.
    atom_offset : float or None
        Position of the single atom in [0, L) (comb kinds).
    eps : float or None
        Mollification width (MOLLIFIED_COMB only).
    """

    kind: MediumKind
    period_L: float
    mass_alpha: float
    reaction_slope: float
    values: np.ndarray | None = None
    segments: tuple[tuple[float, float], ...] | None = None
    atom_offset: float | None = None
    eps: float | None = None
    profile: str = "bump"

    def __post_init__(self):
        if not (self.period_L > 0 and self.mass_alpha > 0 and self.reaction_slope > 0):
            raise ParameterDomainError(
                "period_L, mass_alpha and reaction_slope must all be positive"
            )
        if self.kind is MediumKind.SAMPLED:
            v = np.asarray(self.values, dtype=float)
            if v.ndim != 1 or v.size < 1:
                raise ParameterDomainError("sampled medium needs a 1-D value array")
            if np.any(v < 0):
                raise ParameterDomainError("coefficient values must be nonnegative")
            # renormalize multiplicatively so the discrete mean is exactly alpha
            mean = float(v.mean())
            if mean <= 0:
                raise ParameterDomainError("sampled medium must carry positive mass")
            object.__setattr__(self, "values", v * (self.mass_alpha / mean))
            self.values.setflags(write=False)
        elif self.kind is MediumKind.PIECEWISE_CONSTANT:
            segs = tuple((float(l), float(v)) for l, v in self.segments)
            if not segs:
                raise ParameterDomainError("piecewise medium needs at least one segment")
            if any(l <= 0 for l, _ in segs) or any(v < 0 for _, v in segs):
                raise ParameterDomainError("segment lengths must be > 0 and values >= 0")
            total = math.fsum(l for l, _ in segs)
            if abs(total - self.period_L) > 1e-12 * self.period_L:
                raise ParameterDomainError("segment lengths must sum to period_L")
            mass = math.fsum(l * v for l, v in segs)
            if abs(mass - self.mass_alpha * self.period_L) > MASS_RTOL * max(
                1.0, self.mass_alpha * self.period_L
            ):
                raise ParameterDomainError(
                    "segment mass does not match mass_alpha * period_L"
                )
            object.__setattr__(self, "segments", segs)
        elif self.kind is MediumKind.DIRAC_COMB:
            if self.atom_offset is None or not (0 <= self.atom_offset < self.period_L):
                raise ParameterDomainError("atom offset must lie in [0, period_L)")
        elif self.kind is MediumKind.MOLLIFIED_COMB:
            if self.atom_offset is None or not (0 <= self.atom_offset < self.period_L):
                raise ParameterDomainError("atom offset must lie in [0, period_L)")
            if self.eps is None or not (0 < self.eps < self.period_L):
                raise ParameterDomainError("mollification width must lie in (0, period_L)")

    # -- derived quantities -------------------------------------------------

    @property
    def alpha_eff(self) -> float:
        """Effective mean reaction_slope * mass_alpha seen by the linear theory."""
        return self.reaction_slope * self.mass_alpha

    @property
    def atom_weight(self) -> float:
        """Mass of the single atom per cell (comb kinds only)."""
        if self.kind not in (MediumKind.DIRAC_COMB, MediumKind.MOLLIFIED_COMB):
            raise UnsupportedRepresentationError("medium has no atom")
        return self.mass_alpha * self.period_L

    def is_constant(self, rtol: float = 1e-12) -> bool:
        if self.kind is MediumKind.SAMPLED:
            return float(np.ptp(self.values)) <= rtol * (1.0 + self.mass_alpha)
        if self.kind is MediumKind.PIECEWISE_CONSTANT:
            vals = [v for _, v in self.segments]
            return max(vals) - min(vals) <= rtol * (1.0 + self.mass_alpha)
        return False

    def content_hash(self) -> str:
        """Stable hash of the medium content, used as a cache key."""
        cached = self.__dict__.get("_content_hash")
        if cached is None:
            cached = hashlib.sha256(
                json.dumps(medium_to_dict(self), sort_keys=True).encode()
            ).hexdigest()
            object.__setattr__(self, "_content_hash", cached)
        return cached

    # -- evaluation ----------------------------------------------------------

    def density_at(self, x: np.ndarray | float) -> np.ndarray:
        """Pointwise density b(x), extended periodically to all of R.

        Sampled media are read as piecewise constant over their own cells.
        Raises for a pure Dirac comb, whose density is not a function.
        """
        if self.kind is MediumKind.DIRAC_COMB:
            raise UnsupportedRepresentationError(
                "a Dirac comb has no pointwise density; mollify it first"
            )
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xm = np.mod(x, self.period_L)
        if self.kind is MediumKind.SAMPLED:
            n = self.values.size
            idx = np.minimum((xm / self.period_L * n).astype(int), n - 1)
            return self.values[idx]
        if self.kind is MediumKind.PIECEWISE_CONSTANT:
            bounds = np.cumsum([l for l, _ in self.segments])
            vals = np.array([v for _, v in self.segments])
            idx = np.minimum(np.searchsorted(bounds, xm, side="right"), len(vals) - 1)
            return vals[idx]
        # mollified comb: sum the (at most two) periodic images that overlap
        out = np.zeros_like(xm)
        half = self.eps / 2.0
        for shift in (-self.period_L, 0.0, self.period_L):
            d = xm - (self.atom_offset + shift)
            out += np.where(
                np.abs(d) < half,
                bump_profile(d / half) / half * self.atom_weight,
                0.0,
            )
        return out


# ---------------------------------------------------------------------------
# constructors


def make_dirac_comb(alpha: float, L: float, slope: float = 1.0) -> PeriodicMedium:
    """Periodic array of point masses alpha*L placed at the cell midpoints."""
    if alpha <= 0 or L <= 0 or slope <= 0:
        raise ParameterDomainError("alpha, L and slope must be positive")
    return PeriodicMedium(
        kind=MediumKind.DIRAC_COMB,
        period_L=L,
        mass_alpha=alpha,
        reaction_slope=slope,
        atom_offset=L / 2.0,
    )


def mollify(m: PeriodicMedium, eps: float) -> PeriodicMedium:
    """Replace each atom by a mass-preserving smooth bump of width ``eps``."""
    if m.kind is not MediumKind.DIRAC_COMB:
        raise UnsupportedRepresentationError("mollify expects a Dirac comb")
    if not (0 < eps < m.period_L):
        raise ParameterDomainError("mollification width must lie in (0, period_L)")
    return PeriodicMedium(
        kind=MediumKind.MOLLIFIED_COMB,
        period_L=m.period_L,
        mass_alpha=m.mass_alpha,
        reaction_slope=m.reaction_slope,
        atom_offset=m.atom_offset,
        eps=float(eps),
    )


def constant_medium(alpha: float, L: float = 1.0, slope: float = 1.0) -> PeriodicMedium:
    """Homogeneous coefficient b == alpha."""
    return piecewise_constant_medium([(L, alpha)], slope=slope)


def sampled_medium(
    values, L: float = 1.0, slope: float = 1.0, alpha: float | None = None
) -> PeriodicMedium:
    """Medium from cell-averaged grid values.

    When ``alpha`` is omitted the discrete mean of ``values`` is used, so
    no renormalization takes place.
    """
    v = np.asarray(values, dtype=float)
    if alpha is None:
        alpha = float(v.mean())
    return PeriodicMedium(
        kind=MediumKind.SAMPLED,
        period_L=L,
        mass_alpha=alpha,
        reaction_slope=slope,
        values=v,
    )


def piecewise_constant_medium(segments, slope: float = 1.0) -> PeriodicMedium:
    """Medium from (length, value) segments; alpha is their exact average."""
    segs = [(float(l), float(v)) for l, v in segments]
    L = math.fsum(l for l, _ in segs)
    alpha = math.fsum(l * v for l, v in segs) / L
    return PeriodicMedium(
        kind=MediumKind.PIECEWISE_CONSTANT,
        period_L=L,
        mass_alpha=alpha,
        reaction_slope=slope,
        segments=tuple(segs),
    )


def random_medium(
    alpha: float,
    L: float,
    slope: float,
    seed: int,
    smoothness: int = 3,
    grid_n: int = 256,
) -> PeriodicMedium:
    """Seeded nonnegative trigonometric-polynomial medium with exact mean alpha.

    ``smoothness`` is the number of Fourier modes; lower is smoother.
    Deterministic for a fixed seed.
    """
    if alpha <= 0 or L <= 0 or slope <= 0 or smoothness < 1:
        raise ParameterDomainError("parameters must be positive")
    rng = np.random.default_rng(seed)
    x = (np.arange(grid_n) + 0.5) / grid_n  # cell midpoints on [0, 1)
    raw = np.zeros(grid_n)
    for k in range(1, smoothness + 1):
        a_k, b_k = rng.normal(0.0, 1.0 / k, size=2)
        raw += a_k * np.cos(2 * np.pi * k * x) + b_k * np.sin(2 * np.pi * k * x)
    # lift above zero with a small floor, then let the constructor pin the mean
    raw = raw - raw.min() + 0.05 * (raw.max() - raw.min() + 1.0)
    return PeriodicMedium(
        kind=MediumKind.SAMPLED,
        period_L=L,
        mass_alpha=alpha,
        reaction_slope=slope,
        values=raw,
    )


# ---------------------------------------------------------------------------
# sampling


def sample_on_grid(m: PeriodicMedium, N: int) -> np.ndarray:
    """Cell-averaged values of b on the uniform N-grid over one period.

    The result is renormalized multiplicatively so its mean is exactly
    ``mass_alpha``.  Pure Dirac combs are rejected: their atoms cannot be
    averaged onto cells without first choosing a mollification.
    """
    if N < 8:
        raise ParameterDomainError("need at least 8 grid cells")
    if m.kind is MediumKind.DIRAC_COMB:
        raise UnsupportedRepresentationError(
            "cannot sample a Dirac comb on a grid; mollify it or use the "
            "analytic comb dispersion"
        )
    L = m.period_L
    edges = np.linspace(0.0, L, N + 1)
    if m.kind is MediumKind.SAMPLED:
        out = _resample_cell_averages(m.values, N)
    elif m.kind is MediumKind.PIECEWISE_CONSTANT:
        # exact overlap integrals against the segment partition
        cum = np.concatenate([[0.0], np.cumsum([l for l, _ in m.segments])])
        vals = np.array([v for _, v in m.segments])
        a = edges[:-1, None]
        b = edges[1:, None]
        overlap = np.clip(cum[None, 1:], a, b) - np.clip(cum[None, :-1], a, b)
        out = (overlap @ vals) / (L / N)
    else:  # mollified comb: mass in each cell from the bump CDF
        half = m.eps / 2.0
        out = np.zeros(N)
        for shift in (-L, 0.0, L):
            c = m.atom_offset + shift
            mass = m.atom_weight * (
                _bump_cdf((edges[1:] - c) / half) - _bump_cdf((edges[:-1] - c) / half)
            )
            out += mass / (L / N)
    mean = out.mean()
    if mean <= 0:
        raise ParameterDomainError("medium has no mass on the grid")
    return out * (m.mass_alpha / mean)


def _resample_cell_averages(values: np.ndarray, N: int) -> np.ndarray:
    """Exact cell averages of a piecewise-constant density onto a new grid."""
    nb = values.size
    if N == nb:
        return values.copy()
    # prefix integral of the piecewise-constant density on the unit cell
    prefix = np.concatenate([[0.0], np.cumsum(values)]) / nb

    def integral(t: np.ndarray) -> np.ndarray:
        # integral of the density from 0 to t, t in [0, 1]
        k = np.clip((t * nb).astype(int), 0, nb - 1)
        return prefix[k] + (t - k / nb) * values[k]

    edges = np.linspace(0.0, 1.0, N + 1)
    masses = np.diff(integral(edges))
    return masses * N


# ---------------------------------------------------------------------------
# reactions


class ReactionKind(enum.Enum):
    F1 = "F1"
    F2 = "F2"


@dataclass(frozen=True)
class ReactionSpec:
    """Monostable reaction term.

    F1 is the logistic-type term ``b(x) * slope * u * (1 - u)`` (so the
    derivative at zero equals ``slope`` and u == 1 is the uniform steady
    state).  F2 is ``b(x) * u - kappa * u**2``, whose periodic steady state
    depends on the medium.
    """

    kind: ReactionKind
    slope: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.kind is ReactionKind.F1:
            if self.slope <= 0:
                raise ParameterDomainError("F1 needs slope > 0")
            f = lambda u: self.slope * u * (1.0 - u)  # noqa: E731
            if abs(f(0.0)) > 1e-14 or abs(f(1.0)) > 1e-14:
                raise ParameterDomainError("F1 reaction must vanish at 0 and 1")
            d0 = (f(1e-8) - f(0.0)) / 1e-8
            if not d0 > 0:
                raise ParameterDomainError("F1 reaction must have positive slope at 0")
        else:
            if self.kappa <= 0:
                raise ParameterDomainError("F2 needs kappa > 0")
            g1 = lambda u: self.kappa * u  # noqa: E731
            us = np.linspace(0.0, 10.0, 64)
            if g1(0.0) != 0.0 or np.any(np.diff(g1(us)) <= 0):
                raise ParameterDomainError("F2 damping must vanish at 0 and increase")

    def rate(self, u: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Reaction term b(x) f(u) + g(u) evaluated pointwise."""
        if self.kind is ReactionKind.F1:
            return b * (self.slope * u * (1.0 - u))
        return u * (b - self.kappa * u)

    @property
    def linear_slope(self) -> float:
        """Derivative of f at zero entering the linearized front analysis."""
        return self.slope if self.kind is ReactionKind.F1 else 1.0


# ---------------------------------------------------------------------------
# JSON round trip


def medium_to_dict(m: PeriodicMedium) -> dict:
    d = {
        "kind": m.kind.value,
        "L": m.period_L,
        "alpha": m.mass_alpha,
        "slope": m.reaction_slope,
    }
    if m.kind is MediumKind.SAMPLED:
        d["payload"] = {"values": [float(v) for v in m.values]}
    elif m.kind is MediumKind.PIECEWISE_CONSTANT:
        d["payload"] = {"segments": [[l, v] for l, v in m.segments]}
    elif m.kind is MediumKind.DIRAC_COMB:
        d["payload"] = {"offset": m.atom_offset}
    else:
        d["payload"] = {"offset": m.atom_offset, "eps": m.eps, "profile": m.profile}
    return d


def medium_from_dict(d: dict) -> PeriodicMedium:
    kind = MediumKind(d["kind"])
    common = dict(
        kind=kind,
        period_L=float(d["L"]),
        mass_alpha=float(d["alpha"]),
        reaction_slope=float(d["slope"]),
    )
    p = d.get("payload", {})
    if kind is MediumKind.SAMPLED:
        return PeriodicMedium(**common, values=np.asarray(p["values"], dtype=float))
    if kind is MediumKind.PIECEWISE_CONSTANT:
        return PeriodicMedium(**common, segments=tuple((l, v) for l, v in p["segments"]))
    if kind is MediumKind.DIRAC_COMB:
        return PeriodicMedium(**common, atom_offset=float(p["offset"]))
    return PeriodicMedium(
        **common,
        atom_offset=float(p["offset"]),
        eps=float(p["eps"]),
        profile=p.get("profile", "bump"),
    )


def save_medium(m: PeriodicMedium, path) -> None:
    with open(path, "w") as fh:
        json.dump(medium_to_dict(m), fh, indent=1)


def load_medium(path) -> PeriodicMedium:
    with open(path) as fh:
        return medium_from_dict(json.load(fh))
