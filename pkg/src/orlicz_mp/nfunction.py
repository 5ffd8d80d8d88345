"""N-functions built from a density ``phi``.

An N-function is ``Phi(t) = int_0^|t| s phi(s) ds``.  This module evaluates
``Phi`` and its first two derivatives (closed forms when the catalog knows
them, adaptive quadrature otherwise), computes the complementary function by
Legendre transform, and estimates the structural indices and the Delta2
behaviour on finite grids.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Optional

import numpy as np
from scipy import integrate

from .errors import (
    DegenerateIndex,
    NoBracket,
    NonMonotoneDensity,
    OverflowDomain,
    ParamOutOfRange,
    UnknownModel,
)

__all__ = [
    "Density",
    "NFunction",
    "Complementary",
    "IndexReport",
    "Delta2Result",
    "build_nfunction",
    "catalog",
    "complementary",
    "complementary_nfunction",
    "check_delta2",
    "indices",
    "default_grid",
    "midpoint_convex",
    "CATALOG_NAMES",
]

#: Phi values above this are treated as overflow; sets the default domain hint.
PHI_CEILING = 1e300
_TINY = 1e-300
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)

Array = np.ndarray
ScalarMap = Callable[[Array], Array]


@dataclass(frozen=True)
class Density:
    """The density ``phi`` on ``(0, domain_hint]``.

    ``eval`` and ``deriv`` must accept numpy arrays of positive arguments.
    """

    eval: ScalarMap
    deriv: Optional[ScalarMap] = None
    domain_hint: float = 1e12


@dataclass(frozen=True, eq=False)
class NFunction:
    """An even N-function together with its density.

    Closed forms ``phi``, ``dphi`` and ``d2phi`` (for ``Phi``, ``Phi'``,
    ``Phi''`` on ``t >= 0``) short-circuit quadrature and finite differences
    when present.
    """

    density: Density
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)
    phi: Optional[ScalarMap] = None
    dphi: Optional[ScalarMap] = None
    d2phi: Optional[ScalarMap] = None
    quad_points: int = 200

    @property
    def domain_hint(self) -> float:
        return self.density.domain_hint

    @property
    def _fill(self) -> float:
        return min(1.0, self.domain_hint)

    @property
    def has_closed_form(self) -> bool:
        return self.phi is not None

    def _abs_checked(self, t) -> Array:
        a = np.abs(np.asarray(t, dtype=float))
        if a.size and not (np.max(a) <= self.domain_hint):
            worst = float(np.nanmax(a)) if np.any(np.isfinite(a)) else float("nan")
            raise OverflowDomain(
                f"{self.name}: argument {worst:.6g} exceeds domain hint {self.domain_hint:.6g}"
            )
        return a

    def __call__(self, t) -> Array:
        return self.phi_at(t)

    def phi_at(self, t) -> Array:
        """``Phi(|t|)``."""
        a = self._abs_checked(t)
        if self.phi is not None:
            with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                out = np.where(a > 0, self.phi(np.where(a > 0, a, self._fill)), 0.0)
        else:
            out = self._quadrature(a)
        return out[()] if out.ndim == 0 else out

    def dphi_at(self, t) -> Array:
        """``Phi'(t) = t phi(|t|)``, extended by 0 at ``t = 0`` (odd in t)."""
        t = np.asarray(t, dtype=float)
        a = self._abs_checked(t)
        safe = np.where(a > 0, a, self._fill)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            if self.dphi is not None:
                val = self.dphi(safe)
            else:
                val = safe * self.density.eval(safe)
        out = np.where(a > 0, np.sign(t) * val, 0.0)
        return out[()] if out.ndim == 0 else out

    def d2phi_at(self, t) -> Array:
        """``Phi''(|t|)``; at ``t = 0`` the right limit is approximated at 1e-12."""
        a = self._abs_checked(t)
        a = np.where(a > 0, a, min(1e-12, self.domain_hint))
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            if self.d2phi is not None:
                out = self.d2phi(a)
            elif self.density.deriv is not None:
                out = self.density.eval(a) + a * self.density.deriv(a)
            else:
                # central difference of t*phi(t) with a relative step
                h = 1e-6 * a
                hi = np.minimum(a + h, self.domain_hint)
                lo = a - h
                out = (hi * self.density.eval(hi) - lo * self.density.eval(lo)) / (hi - lo)
        out = np.asarray(out, dtype=float)
        return out[()] if out.ndim == 0 else out

    def density_at(self, t) -> Array:
        a = self._abs_checked(t)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            out = np.asarray(self.density.eval(a), dtype=float)
        return out[()] if out.ndim == 0 else out

    def _integrand(self, s: float) -> float:
        return float(s * self.density.eval(np.asarray(s, dtype=float)))

    def _quadrature(self, a: Array) -> Array:
        """Cumulative integral of ``s phi(s)`` over the sorted distinct arguments.

        Segments ``[x0, x1]`` with ``0 < x0``, ``x1 <= 2 x0`` and an integrand
        growing at most 8-fold keep singularities at distance >= x0 and the
        integrand tame, so a fixed Gauss-Legendre rule is accurate to
        round-off; the others use adaptive quadrature.
        """
        flat = a.ravel()
        uniq, inverse = np.unique(flat, return_inverse=True)
        lo = np.concatenate([[0.0], uniq[:-1]])
        pieces = np.zeros_like(uniq)
        short = (lo > 0) & (uniq <= 2 * lo)
        if np.any(short):
            with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
                ends = np.asarray(self.density.eval(np.where(short, uniq, 1.0)), dtype=float) * uniq
                starts = np.asarray(self.density.eval(np.where(short, lo, 1.0)), dtype=float) * lo
            short &= ends <= 8 * starts
        if np.any(short):
            a0, b0 = lo[short], uniq[short]
            half, mid = 0.5 * (b0 - a0), 0.5 * (b0 + a0)
            s = mid[:, None] + half[:, None] * _GL_NODES[None, :]
            with np.errstate(invalid="ignore", over="ignore"):
                f = s * np.asarray(self.density.eval(s), dtype=float)
            pieces[short] = half * (f @ _GL_WEIGHTS)
        for k in np.flatnonzero(~short & (uniq > lo)):
            pieces[k], _ = integrate.quad(
                self._integrand, lo[k], uniq[k], limit=self.quad_points, epsabs=0.0, epsrel=1e-13
            )
        vals = np.cumsum(pieces)
        return vals[inverse].reshape(a.shape)


def default_grid(phi: NFunction, npts: int = 2000, lo: float = 1e-6, hi: Optional[float] = None) -> Array:
    """Geometric grid from ``lo`` to ``hi`` (the domain hint by default)."""
    hi = phi.domain_hint if hi is None else hi
    return np.geomspace(lo, hi, npts)


def _check_density(density: Density, npts: int = 400) -> None:
    grid = np.geomspace(1e-6, density.domain_hint, npts)
    with np.errstate(invalid="ignore", over="ignore"):
        vals = np.asarray(density.eval(grid), dtype=float)
        tphi = grid * vals
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise NonMonotoneDensity("density must be finite and positive on (0, domain_hint]")
    if np.any(np.diff(tphi) <= 0):
        bad = grid[1:][np.diff(tphi) <= 0][0]
        raise NonMonotoneDensity(f"t*phi(t) is not strictly increasing near t={bad:.4g}")


def build_nfunction(
    density: Density,
    quad_points: int = 200,
    name: str = "custom",
    params: Optional[Mapping[str, float]] = None,
) -> NFunction:
    """N-function from a density alone; ``Phi`` by adaptive quadrature.

    ``quad_points`` caps the number of adaptive subintervals per segment.
    """
    _check_density(density)
    return NFunction(density=density, name=name, params=dict(params or {}), quad_points=quad_points)


# ---------------------------------------------------------------------------
# catalog

def _hint_for(phi: ScalarMap, lo: float = 1.0, ceiling: float = PHI_CEILING) -> float:
    """Largest t (to ~1e-12 relative) with ``phi(t) <= ceiling``."""
    with np.errstate(over="ignore", invalid="ignore"):
        def ok(t):
            v = float(phi(np.asarray(t)))
            return np.isfinite(v) and v <= ceiling

        hi = lo
        while ok(hi):
            lo, hi = hi, hi * 1e3
            if hi > 1e307:
                return 1e307
        for _ in range(200):
            mid = math.sqrt(lo * hi) if hi > 2 * lo else 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if ok(mid):
                lo = mid
            else:
                hi = mid
    return lo


def _power(p: float, N=None) -> NFunction:
    if not p > 1:
        raise ParamOutOfRange(f"power: need p > 1, got p={p}")
    density = Density(
        eval=lambda t: t ** (p - 2.0),
        deriv=lambda t: (p - 2.0) * t ** (p - 3.0),
        domain_hint=(p * PHI_CEILING) ** (1.0 / p),
    )
    return NFunction(
        density, "power", {"p": p},
        phi=lambda t: t**p / p,
        dphi=lambda t: t ** (p - 1.0),
        d2phi=lambda t: (p - 1.0) * t ** (p - 2.0),
    )


def _powersum(p: float, q: float, N=None) -> NFunction:
    if not 1 < p < q:
        raise ParamOutOfRange(f"powersum: need 1 < p < q, got p={p}, q={q}")
    if N is not None and N > p:
        pstar = N * p / (N - p)
        if not (q < N and q < pstar):
            raise ParamOutOfRange(f"powersum: need q < N={N} and q < p*={pstar:.4g}, got q={q}")

    def phi(t):
        return t**p / p + t**q / q

    density = Density(
        eval=lambda t: t ** (p - 2.0) + t ** (q - 2.0),
        deriv=lambda t: (p - 2.0) * t ** (p - 3.0) + (q - 2.0) * t ** (q - 3.0),
        domain_hint=_hint_for(phi),
    )
    return NFunction(
        density, "powersum", {"p": p, "q": q},
        phi=phi,
        dphi=lambda t: t ** (p - 1.0) + t ** (q - 1.0),
        d2phi=lambda t: (p - 1.0) * t ** (p - 2.0) + (q - 1.0) * t ** (q - 2.0),
    )


def _genpower(alpha: float, N=None) -> NFunction:
    if not alpha > 1:
        raise ParamOutOfRange(f"genpower: need alpha > 1, got alpha={alpha}")
    if N is not None and N > 2 and not alpha < N / (N - 2):
        raise ParamOutOfRange(f"genpower: need alpha in (1, N/(N-2)) = (1, {N / (N - 2):.4g})")
    a = alpha

    def phi(t):
        return np.expm1(a * np.log1p(t * t))

    def dens(t):
        return 2 * a * (1 + t * t) ** (a - 1)

    def ddens(t):
        return 4 * a * (a - 1) * t * (1 + t * t) ** (a - 2)

    density = Density(dens, ddens, _hint_for(phi))
    return NFunction(
        density, "genpower", {"alpha": alpha},
        phi=phi,
        dphi=lambda t: t * dens(t),
        d2phi=lambda t: dens(t) + t * ddens(t),
    )


def _plog(p: float, N=None) -> NFunction:
    if not p > 1:
        raise ParamOutOfRange(f"plog: need p > 1, got p={p}")
    if N is not None:
        lower = (-1 + math.sqrt(1 + 4 * N)) / 2
        if N < 3 or not lower < p < N - 1:
            raise ParamOutOfRange(
                f"plog: need N >= 3 and {lower:.4g} < p < N-1 = {N - 1}, got N={N}, p={p}"
            )

    def phi(t):
        return t**p * np.log1p(t)

    def dphi(t):
        return p * t ** (p - 1) * np.log1p(t) + t**p / (1 + t)

    def dens(t):
        return p * t ** (p - 2) * np.log1p(t) + t ** (p - 1) / (1 + t)

    def ddens(t):
        return (
            p * (p - 2) * t ** (p - 3) * np.log1p(t)
            + p * t ** (p - 2) / (1 + t)
            + (p - 1) * t ** (p - 2) / (1 + t)
            - t ** (p - 1) / (1 + t) ** 2
        )

    def d2phi(t):
        return (
            p * (p - 1) * t ** (p - 2) * np.log1p(t)
            + 2 * p * t ** (p - 1) / (1 + t)
            - t**p / (1 + t) ** 2
        )

    return NFunction(Density(dens, ddens, _hint_for(phi)), "plog", {"p": p}, phi=phi, dphi=dphi, d2phi=d2phi)


def _sinh(alpha: float, beta: float, N=None) -> NFunction:
    if not (0 <= alpha <= 1 and beta > 0):
        raise ParamOutOfRange(f"sinh: need 0 <= alpha <= 1 and beta > 0, got alpha={alpha}, beta={beta}")

    def dens(s):
        return s ** (-alpha) * np.arcsinh(s) ** beta

    def ddens(s):
        ash = np.arcsinh(s)
        return (
            -alpha * s ** (-alpha - 1) * ash**beta
            + beta * s ** (-alpha) * ash ** (beta - 1) / np.sqrt(1 + s * s)
        )

    # no closed form for Phi: quadrature path
    return NFunction(Density(dens, ddens, 1e12), "sinh", {"alpha": alpha, "beta": beta})


def _exp(N=None) -> NFunction:
    def phi(t):
        return 0.5 * np.expm1(t * t)

    def dens(t):
        return np.exp(t * t)

    return NFunction(
        Density(dens, lambda t: 2 * t * np.exp(t * t), _hint_for(phi)),
        "exp", {},
        phi=phi,
        dphi=lambda t: t * np.exp(t * t),
        d2phi=lambda t: (1 + 2 * t * t) * np.exp(t * t),
    )


def _loglinear(N=None) -> NFunction:
    def phi(t):
        return t * np.log1p(t)

    def dens(t):
        return np.log1p(t) / t + 1 / (1 + t)

    def ddens(t):
        return (t / (1 + t) - np.log1p(t)) / t**2 - 1 / (1 + t) ** 2

    return NFunction(
        Density(dens, ddens, _hint_for(phi)),
        "loglinear", {},
        phi=phi,
        dphi=lambda t: np.log1p(t) + t / (1 + t),
        d2phi=lambda t: 1 / (1 + t) + 1 / (1 + t) ** 2,
    )


_MODELS = {
    "power": (_power, ("p",)),
    "powersum": (_powersum, ("p", "q")),
    "genpower": (_genpower, ("alpha",)),
    "plog": (_plog, ("p",)),
    "sinh": (_sinh, ("alpha", "beta")),
    "exp": (_exp, ()),
    "loglinear": (_loglinear, ()),
}
CATALOG_NAMES = tuple(_MODELS)


def catalog(name: str, params: Optional[Mapping[str, float]] = None, **kwargs) -> NFunction:
    """Named model N-function.

    ``params`` holds the model parameters (see ``CATALOG_NAMES``); an optional
    ``N`` (space dimension) enables the dimension-dependent range checks.

    >>> catalog("power", p=4)(2.0)
    4.0
    """
    if name not in _MODELS:
        raise UnknownModel(f"unknown N-function {name!r}; known: {', '.join(CATALOG_NAMES)}")
    factory, keys = _MODELS[name]
    merged = dict(params or {})
    merged.update(kwargs)
    N = merged.pop("N", None)
    missing = [k for k in keys if k not in merged]
    extra = [k for k in merged if k not in keys]
    if missing or extra:
        raise ParamOutOfRange(
            f"{name}: expected parameters {keys}, missing {missing}, unexpected {extra}"
        )
    args = [float(merged[k]) for k in keys]
    return factory(*args, N=N)


# ---------------------------------------------------------------------------
# Legendre transform

def _solve_dphi(phi: NFunction, s: Array) -> Array:
    """Solve ``Phi'(t) = s`` for ``t >= 0`` by monotone bisection (vectorized)."""
    s = np.asarray(s, dtype=float)
    hint = phi.domain_hint
    smax = float(phi.dphi_at(hint))
    if s.size and np.max(s) > smax:
        raise NoBracket(
            f"{phi.name}: s={float(np.max(s)):.6g} exceeds t*phi(t) at the domain hint ({smax:.6g})"
        )
    if s.size and np.min(s) < 0:
        raise ValueError("complementary function needs s >= 0")
    lo = np.zeros_like(s)
    hi = np.full_like(s, hint)
    active = s > 0
    for _ in range(500):
        if not active.any():
            break
        lo_eff = np.maximum(lo, _TINY)
        mid = np.where(hi > 4 * lo_eff, np.sqrt(lo_eff) * np.sqrt(hi), 0.5 * lo + 0.5 * hi)
        active &= (mid > lo) & (mid < hi)
        below = phi.dphi_at(np.where(active, mid, 0.0)) < s
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)
    t = 0.5 * (lo + hi)
    return np.where(s > 0, t, 0.0)


def complementary(phi: NFunction, s):
    """Complementary function value and maximizer at ``s >= 0``.

    Returns ``(Phi~(s), t*)`` with ``t* phi(t*) = s``.
    """
    s_arr = np.asarray(s, dtype=float)
    t = _solve_dphi(phi, s_arr)
    with np.errstate(invalid="ignore"):
        val = np.where(s_arr > 0, s_arr * t - phi.phi_at(t), 0.0)
    val = np.maximum(val, 0.0)
    if s_arr.ndim == 0:
        return float(val), float(t)
    return val, t


@dataclass(frozen=True, eq=False)
class Complementary(NFunction):
    """Complementary N-function ``Phi~`` of ``base``."""

    base: Optional[NFunction] = None

    def argmax_at(self, s) -> Array:
        return _solve_dphi(self.base, np.abs(np.asarray(s, dtype=float)))

    def tilde_at(self, s) -> Array:
        return self.phi_at(s)


def complementary_nfunction(phi: NFunction) -> Complementary:
    """``Phi~`` as an N-function: value by Legendre transform, derivative ``t*(s)``."""
    smax = float(phi.dphi_at(phi.domain_hint))

    def tstar(s):
        return _solve_dphi(phi, s)

    def value(s):
        return complementary(phi, s)[0]

    def d2(s):
        return 1.0 / phi.d2phi_at(tstar(s))

    return Complementary(
        density=Density(eval=lambda s: tstar(s) / s, deriv=None, domain_hint=smax),
        name=f"{phi.name}~",
        params=dict(phi.params),
        phi=value,
        dphi=tstar,
        d2phi=d2,
        base=phi,
    )


# ---------------------------------------------------------------------------
# Delta2 and indices

class Delta2Result(NamedTuple):
    satisfied: bool
    sup_ratio: float
    tail_slope: float


def check_delta2(phi: NFunction, grid: Optional[Array] = None, slope_tol: float = 0.05) -> Delta2Result:
    """Heuristic Delta2 test on ``Phi(2t)/Phi(t)``.

    The ratio must stay finite on the grid and its log-log slope over the
    last quarter of the grid must not exceed ``slope_tol``.  Grid points
    with ``2t`` beyond the domain hint are dropped.
    """
    if grid is None:
        grid = default_grid(phi, hi=phi.domain_hint / 2)
    grid = np.asarray(grid, dtype=float)
    grid = grid[2 * grid <= phi.domain_hint]
    if grid.size < 8:
        return Delta2Result(False, math.inf, math.inf)
    try:
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            ratio = phi.phi_at(2 * grid) / phi.phi_at(grid)
    except OverflowDomain:
        return Delta2Result(False, math.inf, math.inf)
    if not np.all(np.isfinite(ratio)):
        return Delta2Result(False, math.inf, math.inf)
    tail = slice(3 * len(grid) // 4, None)
    slope = float(np.polyfit(np.log(grid[tail]), np.log(ratio[tail]), 1)[0])
    sup = float(np.max(ratio))
    return Delta2Result(bool(slope <= slope_tol), sup, slope)


@dataclass(frozen=True)
class IndexReport:
    l: float
    m: float
    m_check: float
    ell: float
    l_star: float
    grid: Array
    delta2_Phi: bool
    delta2_tilde: bool
    delta2_Phi_ratio: float = math.nan
    delta2_tilde_ratio: float = math.nan

    def as_dict(self) -> dict:
        return {
            "l": self.l,
            "m": self.m,
            "m_check": self.m_check,
            "ell": self.ell,
            "l_star": self.l_star,
            "grid": [float(self.grid[0]), float(self.grid[-1]), int(len(self.grid))],
            "delta2_Phi": self.delta2_Phi,
            "delta2_tilde": self.delta2_tilde,
            "delta2_Phi_ratio": self.delta2_Phi_ratio,
            "delta2_tilde_ratio": self.delta2_tilde_ratio,
        }


def indices(phi: NFunction, grid: Optional[Array] = None, N_dim: int = 1, with_delta2: bool = True) -> IndexReport:
    """Grid estimates of the structural indices of ``phi``.

    ``l``/``m_check`` are the inf/sup of ``t^2 phi(t) / Phi(t)``; ``ell``/``m``
    are ``1 +`` the inf/sup of ``(t phi(t))' / phi(t)``.  ``l_star`` is the
    Sobolev conjugate ``N l / (N - l)`` (infinite when ``l >= N``).
    """
    if grid is None:
        grid = default_grid(phi)
    grid = np.asarray(grid, dtype=float)
    Phi = phi.phi_at(grid)
    if np.any(Phi <= 0):
        bad = grid[Phi <= 0][0]
        raise DegenerateIndex(f"{phi.name}: Phi vanishes at t={bad:.4g}")
    d1 = phi.dphi_at(grid)
    d2 = phi.d2phi_at(grid)
    with np.errstate(over="ignore", invalid="ignore"):
        r1 = grid * d1 / Phi
        r2 = grid * d2 / d1
    r1, r2 = r1[np.isfinite(r1)], r2[np.isfinite(r2)]
    l = float(np.min(r1))
    l_star = N_dim * l / (N_dim - l) if l < N_dim else math.inf
    d2_phi = d2_tilde = (None, math.nan)
    if with_delta2:
        res = check_delta2(phi)
        d2_phi = (res.satisfied, res.sup_ratio)
        res = check_delta2(complementary_nfunction(phi))
        d2_tilde = (res.satisfied, res.sup_ratio)
    return IndexReport(
        l=l,
        m=1.0 + float(np.max(r2)),
        m_check=float(np.max(r1)),
        ell=1.0 + float(np.min(r2)),
        l_star=l_star,
        grid=grid,
        delta2_Phi=d2_phi[0],
        delta2_tilde=d2_tilde[0],
        delta2_Phi_ratio=d2_phi[1],
        delta2_tilde_ratio=d2_tilde[1],
    )


def midpoint_convex(fn: ScalarMap, grid: Array, rtol: float = 1e-10) -> bool:
    """Sampled midpoint convexity of ``fn`` over pairs of grid points."""
    grid = np.asarray(grid, dtype=float)
    for k in (1, 2, 5, 17):
        if k >= len(grid):
            break
        a, b = grid[:-k], grid[k:]
        fa, fb, fm = fn(a), fn(b), fn(0.5 * (a + b))
        if np.any(fm > 0.5 * (fa + fb) * (1 + rtol) + 1e-300):
            return False
    return True
