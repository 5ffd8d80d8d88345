"""Modulars, Luxemburg norms and the Orlicz-space inequality checks."""
from __future__ import annotations

import math
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .discretization import DiscreteFunction
from .errors import OverflowDomain
from .nfunction import NFunction, complementary_nfunction

__all__ = [
    "DEFAULT_TOL",
    "Modular",
    "LuxemburgNorm",
    "InequalityCheck",
    "modular",
    "luxemburg_norm",
    "verify_young",
    "verify_holder",
    "verify_modular_poincare",
]

DEFAULT_TOL = 1e-8


class Modular(NamedTuple):
    phi: NFunction
    value: float


class LuxemburgNorm(NamedTuple):
    value: float
    bracket: Tuple[float, float]
    modular_at_value: float


class InequalityCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def _modular_value(phi: NFunction, u: DiscreteFunction, of_gradient: bool, scale: float = 1.0) -> float:
    mesh = u.mesh
    if of_gradient:
        gn = np.linalg.norm(u.gradients(), axis=-1) * scale
        return float(np.sum(mesh.measures * phi.phi_at(gn)))
    uq = np.abs(u.at_quadrature()) * scale
    return float(np.sum(mesh.measures[:, None] * mesh.quad_weights * phi.phi_at(uq)))


def modular(phi: NFunction, u: DiscreteFunction, of_gradient: bool = False) -> Modular:
    """``int Phi(|u|)`` or ``int Phi(|grad u|)``.

    The gradient modular is exact for P1 functions; the function modular
    uses the 3-point element rule.
    """
    return Modular(phi, _modular_value(phi, u, of_gradient))


def luxemburg_norm(phi: NFunction, u: DiscreteFunction, of_gradient: bool = False,
                   tol: float = 1e-10) -> LuxemburgNorm:
    """``inf{lam > 0 : int Phi(|u| / lam) <= 1}`` by bisection in ``lam``.

    Scales whose modular overflows the N-function's domain count as
    modular ``+inf``, i.e. ``lam`` is too small.
    """
    if of_gradient:
        size = float(np.max(np.linalg.norm(u.gradients(), axis=-1)))
    else:
        size = u.sup_norm()
    if size == 0.0:
        return LuxemburgNorm(0.0, (0.0, 0.0), 0.0)

    def rho(lam):
        try:
            return _modular_value(phi, u, of_gradient, 1.0 / lam)
        except OverflowDomain:
            return math.inf

    lo = hi = 1.0
    if rho(1.0) > 1.0:
        while rho(hi) > 1.0:
            lo, hi = hi, 2.0 * hi
    else:
        while rho(lo) <= 1.0:
            hi, lo = lo, 0.5 * lo
            if lo < 1e-300:
                raise OverflowDomain("Luxemburg bracket underflow")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if rho(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return LuxemburgNorm(hi, (lo, hi), rho(hi))


def verify_young(phi: NFunction, s, t, tol: float = DEFAULT_TOL) -> InequalityCheck:
    """``s t <= Phi(t) + Phi~(s)`` on every pair; reports the worst pair."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    tilde = complementary_nfunction(phi)
    lhs = s * t
    rhs = phi.phi_at(t) + tilde.phi_at(s)
    slack = rhs - lhs
    k = int(np.argmin(slack))
    ok = bool(np.all(slack >= -tol * np.maximum(1.0, np.abs(rhs))))
    return InequalityCheck(float(lhs.ravel()[k]), float(rhs.ravel()[k]), ok)


def verify_holder(phi: NFunction, u: DiscreteFunction, v: DiscreteFunction,
                  tol: float = DEFAULT_TOL) -> InequalityCheck:
    """``|int u v| <= 2 ||u||_Phi ||v||_Phi~``."""
    if u.mesh is not v.mesh:
        raise ValueError("u and v must live on the same mesh")
    mesh = u.mesh
    lhs = abs(float(np.sum(mesh.measures[:, None] * mesh.quad_weights * u.at_quadrature() * v.at_quadrature())))
    nu = luxemburg_norm(phi, u).value
    if nu == 0.0:
        return InequalityCheck(lhs, 0.0, lhs <= tol)
    nv = luxemburg_norm(complementary_nfunction(phi), v).value
    rhs = 2.0 * nu * nv
    return InequalityCheck(lhs, rhs, lhs <= rhs + tol * max(1.0, rhs))


def verify_modular_poincare(phi: NFunction, u: DiscreteFunction, diam: Optional[float] = None,
                            tol: float = DEFAULT_TOL) -> InequalityCheck:
    """``int Phi(|u|) <= int Phi(d |grad u|)`` with ``d`` the domain diameter."""
    u.require_zero_trace()
    d = u.mesh.diam if diam is None else float(diam)
    lhs = _modular_value(phi, u, False)
    rhs = _modular_value(phi, u, True, d)
    return InequalityCheck(lhs, rhs, lhs <= rhs + tol * max(1.0, rhs))
