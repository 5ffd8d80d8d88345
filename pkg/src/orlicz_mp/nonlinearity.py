"""Right-hand sides ``f(x, t)``, their primitives, hypothesis scans and truncation.

Every map takes ``(x, t)`` where ``x`` carries the coordinates on its last
axis and broadcasts against ``t``.  The built-in models do not depend on
``x``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Mapping, NamedTuple, Optional

import numpy as np

from .discretization import DiscreteFunction, Mesh
from .errors import OverflowDomain, ParamOutOfRange, UnknownModel
from .nfunction import IndexReport, NFunction, catalog, default_grid, indices, midpoint_convex

__all__ = [
    "Nonlinearity",
    "TruncatedNonlinearity",
    "HypothesisReport",
    "MODEL_NAMES",
    "model_f",
    "check_hypotheses",
    "truncate",
    "scan_grid",
]

XTMap = Callable[[np.ndarray, np.ndarray], np.ndarray]


def scan_grid(npts: int = 400) -> np.ndarray:
    """Default t-grid for the delta / t1 scans."""
    return np.geomspace(1e-4, 1e2, npts)


class Pointwise(NamedTuple):
    """``f``, ``F`` and ``df`` as functions of ``t`` at fixed quadrature points."""

    f: Callable[[np.ndarray], np.ndarray]
    F: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]


def _t_only(fn):
    def wrapped(x, t):
        return fn(np.asarray(t, dtype=float))

    return wrapped


def _fd(fn: XTMap) -> XTMap:
    def deriv(x, t):
        t = np.asarray(t, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(t))
        return (fn(x, t + h) - fn(x, t - h)) / (2 * h)

    return deriv


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """A Caratheodory right-hand side with its primitive ``F(x, t) = int_0^t f``.

    ``growth`` is the N-function ``A`` of the growth bound
    ``|f| <= C (a(t) t + 1)``; ``alpha``/``C`` are the exponent and constant
    of ``|F| <= C Phi(t)^alpha`` when known.
    """

    f: XTMap
    F: XTMap
    df: Optional[XTMap] = None
    growth: Optional[NFunction] = None
    alpha: Optional[float] = None
    C: Optional[float] = None
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def dfdt(self, x, t):
        return (self.df or _fd(self.f))(x, t)

    def bind(self, mesh: Mesh) -> Pointwise:
        x = mesh.quad_points
        return Pointwise(lambda t: self.f(x, t), lambda t: self.F(x, t), lambda t: self.dfdt(x, t))


def _pos(t):
    return np.maximum(np.asarray(t, dtype=float), 0.0)


def _pq(p: float, q: float, phi=None) -> Nonlinearity:
    if not 1 < q < p:
        raise ParamOutOfRange(f"pq: need 1 < q < p, got p={p}, q={q}")

    def f(t):
        s = _pos(t)
        return s ** (p - 1) - s ** (q - 1)

    def F(t):
        s = _pos(t)
        return s ** p / p - s ** q / q

    def df(t):
        s = _pos(t)
        with np.errstate(divide="ignore"):
            return np.where(s > 0, (p - 1) * s ** (p - 2) - (q - 1) * s ** (q - 2), 0.0)

    return Nonlinearity(_t_only(f), _t_only(F), _t_only(df), growth=catalog("power", p=p),
                        name="pq", params={"p": p, "q": q})


def _pqlog(p: float, q: float, phi=None) -> Nonlinearity:
    # F(t) = t^p log(1+t) - t^q on t >= 0, f = F'
    if not 1 < q < p:
        raise ParamOutOfRange(f"pqlog: need 1 < q < p, got p={p}, q={q}")

    def f(t):
        s = _pos(t)
        return p * s ** (p - 1) * np.log1p(s) + s ** p / (1 + s) - q * s ** (q - 1)

    def F(t):
        s = _pos(t)
        return s ** p * np.log1p(s) - s ** q

    def df(t):
        s = _pos(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (p * (p - 1) * s ** (p - 2) * np.log1p(s) + 2 * p * s ** (p - 1) / (1 + s)
                   - s ** p / (1 + s) ** 2 - q * (q - 1) * s ** (q - 2))
        return np.where(s > 0, val, 0.0)

    return Nonlinearity(_t_only(f), _t_only(F), _t_only(df), growth=catalog("plog", p=p),
                        name="pqlog", params={"p": p, "q": q})


def _phipow(phi: Optional[NFunction], alpha: float = 0.75, mu: float = 2.0) -> Nonlinearity:
    """``F(t) = Phi(t+)^alpha (1 - mu e^{-t+})``: negative near 0, positive for large t."""
    if phi is None:
        raise ParamOutOfRange("phipow needs the N-function Phi")
    if not (0 < alpha < 1 and mu > 1):
        raise ParamOutOfRange(f"phipow: need 0 < alpha < 1 and mu > 1, got {alpha}, {mu}")

    def F(t):
        s = _pos(t)
        return phi.phi_at(s) ** alpha * (1 - mu * np.exp(-s))

    def f(t):
        s = _pos(t)
        P, dP = phi.phi_at(s), phi.dphi_at(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            lead = np.where(s > 0, alpha * P ** (alpha - 1) * dP, 0.0)
        return lead * (1 - mu * np.exp(-s)) + P ** alpha * mu * np.exp(-s)

    return Nonlinearity(_t_only(f), _t_only(F), None, alpha=alpha, C=mu,
                        name="phipow", params={"alpha": alpha, "mu": mu})


def _const(c: float = 1.0, phi=None) -> Nonlinearity:
    return Nonlinearity(
        lambda x, t: np.full(np.shape(t), c, dtype=float),
        lambda x, t: c * np.asarray(t, dtype=float),
        lambda x, t: np.zeros(np.shape(t)),
        name="const", params={"c": c},
    )


def _zero(phi=None) -> Nonlinearity:
    z = lambda x, t: np.zeros(np.shape(t))  # noqa: E731
    return Nonlinearity(z, z, z, name="zero")


_MODELS = {
    "pq": (_pq, ("p", "q"), ()),
    "pqlog": (_pqlog, ("p", "q"), ()),
    "phipow": (_phipow, (), ("alpha", "mu")),
    "const": (_const, (), ("c",)),
    "zero": (_zero, (), ()),
}
MODEL_NAMES = tuple(_MODELS)


def model_f(name: str, params: Optional[Mapping[str, float]] = None, phi: Optional[NFunction] = None,
            **kwargs) -> Nonlinearity:
    """Named right-hand side.

    ``pq``: ``f = t+^(p-1) - t+^(q-1)``.  ``pqlog``: ``F = t+^p log(1+t+) - t+^q``.
    ``phipow`` (needs ``phi``): ``F = Phi(t+)^alpha (1 - mu e^(-t+))``.
    ``const``: ``f = c``.  ``zero``: ``f = 0``.
    """
    if name not in _MODELS:
        raise UnknownModel(f"unknown nonlinearity {name!r}; known: {', '.join(MODEL_NAMES)}")
    factory, required, optional = _MODELS[name]
    merged = dict(params or {})
    merged.update(kwargs)
    missing = [k for k in required if k not in merged]
    extra = [k for k in merged if k not in required + optional]
    if missing or extra:
        raise ParamOutOfRange(f"{name}: missing {missing}, unexpected {extra}")
    args = {k: float(v) for k, v in merged.items()}
    return factory(phi=phi, **args)


# ---------------------------------------------------------------------------
# hypothesis scans

class F0Check(NamedTuple):
    holds: bool
    m_A: float
    l: float
    margin: float
    C_est: float


class F1Check(NamedTuple):
    delta: float
    holds: bool


class F2Check(NamedTuple):
    t1: float
    F_at_t1: float
    holds: bool


class F3Check(NamedTuple):
    alpha: float
    C_est: float
    holds: bool


@dataclass
class HypothesisReport:
    profile: str
    index: IndexReport
    phi_checks: dict
    f0: F0Check
    f1: F1Check
    f2: F2Check
    f3: F3Check
    reasons: List[str]
    holds: bool

    def as_dict(self) -> dict:
        return {
            "profile": self.profile,
            "holds": self.holds,
            "reasons": list(self.reasons),
            "indices": self.index.as_dict(),
            "phi": dict(self.phi_checks),
            "f0": self.f0._asdict(),
            "f1": self.f1._asdict(),
            "f2": self.f2._asdict(),
            "f3": self.f3._asdict(),
        }


def _sample_x(mesh: Optional[Mesh]) -> np.ndarray:
    if mesh is None:
        return np.zeros((1, 1, 1))
    return mesh.quad_points.reshape(-1, 1, mesh.dim)


def _check_f0(f: Nonlinearity, index: IndexReport, x, grid) -> F0Check:
    A = f.growth
    if A is None:
        return F0Check(False, math.nan, index.l, math.nan, math.nan)
    m_A = indices(A, with_delta2=False).m_check
    t = grid[grid < A.domain_hint]
    bound = A.dphi_at(t) + 1.0
    C_est = float(np.max(np.abs(f.f(x, t)) / bound))
    margin = index.l - m_A
    return F0Check(bool(1 < m_A < index.l), m_A, index.l, margin, C_est)


def _check_f1(F_worst_up: np.ndarray, grid) -> F1Check:
    # F must start below 0 and keep decreasing; delta is where it first stops
    if not F_worst_up[0] < 0:
        return F1Check(0.0, False)
    steps = np.diff(F_worst_up)
    up = np.flatnonzero(steps >= 0)
    delta = float(grid[up[0]]) if up.size else float(grid[-1])
    return F1Check(delta, bool(delta > grid[0]))


def _check_f2(F_worst_low: np.ndarray, grid) -> F2Check:
    pos = np.flatnonzero(F_worst_low > 0)
    if not pos.size:
        return F2Check(math.nan, float(np.max(F_worst_low)), False)
    k = pos[0]
    return F2Check(float(grid[k]), float(F_worst_low[k]), True)


def _check_f3(f: Nonlinearity, phi: NFunction, x) -> F3Check:
    t = default_grid(phi, 400, lo=1e-4)
    P = phi.phi_at(t)
    with np.errstate(over="ignore", invalid="ignore"):
        absF = np.max(np.abs(np.broadcast_to(f.F(x, t), x.shape[:-1][:-1] + t.shape)), axis=0)
    keep = (P > 0) & np.isfinite(P) & (absF > 0) & np.isfinite(absF)
    if keep.sum() < 8:
        # F vanishes identically on the grid: the bound holds with any alpha
        return F3Check(0.5, 0.0, bool(np.all(absF == 0)))
    lp, lf = np.log(P[keep]), np.log(absF[keep])
    k = max(4, keep.sum() // 10)
    a0 = float(np.polyfit(lp[:k], lf[:k], 1)[0])
    a_inf = float(np.polyfit(lp[-k:], lf[-k:], 1)[0])
    alpha = max(a_inf, 1e-6)
    holds = alpha <= a0 + 1e-3 and alpha < 1.0
    with np.errstate(over="ignore"):
        C = float(np.max(absF[keep] / P[keep] ** alpha))
    return F3Check(alpha, C, bool(holds and np.isfinite(C)))


def check_hypotheses(f: Nonlinearity, phi: NFunction, profile: str = "T1", N_dim: int = 1,
                     mesh: Optional[Mesh] = None, grid: Optional[np.ndarray] = None) -> HypothesisReport:
    """Grid-based verification of the structural hypotheses.

    ``T1``: density conditions, ``l > 1`` with ``t^2 phi`` convex, the growth
    bound ``1 < m_A < l``, ``F`` decreasing near 0 and ``F(t1) > 0``.
    ``T2``: density conditions, ``1 <= ell <= m < l*``, ``F`` decreasing near 0,
    ``F(t1) > 0`` and ``|F| <= C Phi^alpha`` with ``alpha < 1``.
    ``x`` is sampled at the quadrature points of ``mesh`` when given.
    """
    if profile not in ("T1", "T2"):
        raise ValueError(f"profile must be 'T1' or 'T2', got {profile!r}")
    grid = scan_grid() if grid is None else np.asarray(grid, dtype=float)
    grid = grid[grid <= 0.5 * phi.domain_hint]   # models built on Phi must stay in its domain
    index = indices(phi, N_dim=N_dim)
    pg = index.grid
    tphi = phi.dphi_at(pg)
    checks = {
        "phi1": bool(np.all(phi.density_at(pg) > 0) and np.all(np.diff(tphi) > 0)),
        "phi2": bool(tphi[0] < 1e-3 * max(1.0, tphi[-1]) and tphi[-1] > 1e3 * max(tphi[0], 1e-300)),
        "phi3": bool(index.l > 1 and midpoint_convex(lambda t: t * phi.dphi_at(t), pg)),
        "phi4": bool(index.ell >= 1 - 1e-9 and math.isfinite(index.m)),
        "m_below_l_star": bool(index.m < index.l_star),
    }
    x = _sample_x(mesh)
    with np.errstate(over="ignore", invalid="ignore"):
        Fvals = np.broadcast_to(f.F(x, grid), x.shape[:-2] + grid.shape)
    f0 = _check_f0(f, index, x, grid)
    f1 = _check_f1(np.max(Fvals, axis=0), grid)
    f2 = _check_f2(np.min(Fvals, axis=0), grid)
    try:
        f3 = _check_f3(f, phi, x)
    except OverflowDomain:
        f3 = F3Check(math.nan, math.inf, False)

    reasons = []
    for key in ("phi1", "phi2"):
        if not checks[key]:
            reasons.append(f"{key} fails on the sample grid")
    if profile == "T1":
        if not checks["phi3"]:
            reasons.append(f"phi3 fails (l = {index.l:.4g})")
        if not f0.holds:
            if f.growth is None:
                reasons.append("f0: no growth N-function A attached")
            else:
                reasons.append(f"m_A >= l (m_A = {f0.m_A:.4g}, l = {f0.l:.4g})")
    else:
        if not checks["phi4"]:
            reasons.append(f"phi4 fails (ell = {index.ell:.4g}, m = {index.m:.4g})")
        if not checks["m_below_l_star"]:
            reasons.append(f"m >= l* (m = {index.m:.4g}, l* = {index.l_star:.4g})")
        if not f3.holds:
            reasons.append("f3: no alpha < 1 with |F| <= C Phi^alpha on the grid")
    if not f1.holds:
        reasons.append("f1: F is not decreasing near 0")
    if not f2.holds:
        reasons.append("f2: no t1 with F(t1) > 0")
    return HypothesisReport(profile, index, checks, f0, f1, f2, f3, reasons, not reasons)


# ---------------------------------------------------------------------------
# truncation

@dataclass(frozen=True, eq=False)
class TruncatedNonlinearity:
    """``g``/``G``: the right-hand side frozen above the ceiling ``u1``.

    ``g = 0`` for ``t < 0``, ``f(t)`` on ``[0, u1(x)]`` and ``f(u1(x))`` above;
    ``G`` is its primitive, continued linearly above ``u1``.
    """

    base: Nonlinearity
    ceiling: DiscreteFunction

    @staticmethod
    def _branches(base: Nonlinearity, x, c, t):
        t = np.asarray(t, dtype=float)
        fc, Fc = base.f(x, c), base.F(x, c)
        neg, mid = t < 0, (t >= 0) & (t <= c)
        tm = np.clip(t, 0.0, np.maximum(c, 0.0))
        g = np.where(neg, 0.0, np.where(mid, base.f(x, tm), fc))
        G = np.where(neg, 0.0, np.where(mid, base.F(x, tm), Fc + fc * (t - c)))
        dg = np.where(neg | ~mid, 0.0, base.dfdt(x, tm))
        return g, G, dg

    def _c(self, x):
        x = np.asarray(x, dtype=float)
        return self.ceiling.evaluate(x)

    def g(self, x, t):
        return self._branches(self.base, np.asarray(x, dtype=float), self._c(x), t)[0]

    def G(self, x, t):
        return self._branches(self.base, np.asarray(x, dtype=float), self._c(x), t)[1]

    def bind(self, mesh: Mesh) -> Pointwise:
        if mesh is not self.ceiling.mesh:
            raise ValueError("truncation ceiling lives on a different mesh")
        x = mesh.quad_points
        c = self.ceiling.at_quadrature()
        return Pointwise(
            lambda t: self._branches(self.base, x, c, t)[0],
            lambda t: self._branches(self.base, x, c, t)[1],
            lambda t: self._branches(self.base, x, c, t)[2],
        )


def truncate(f: Nonlinearity, u1: DiscreteFunction) -> TruncatedNonlinearity:
    """Truncate ``f`` above ``u1``; warns if ``u1`` has negative nodal values."""
    if np.any(u1.values < 0):
        warnings.warn("truncation ceiling u1 takes negative values", RuntimeWarning, stacklevel=2)
    return TruncatedNonlinearity(f, u1)
