"""Two-solution pipeline: witness threshold, global minimizer, mountain pass.

The first solution ``u1`` minimizes the discrete energy ``I``.  The second
is a mountain-pass critical point of the functional ``J`` whose right-hand
side is truncated above ``u1``; it is found by a string (path) descent
between ``0`` and ``u1`` followed by a Newton polish of the highest node.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigvalsh, solve

from .discretization import (
    DiscreteFunction,
    DomDiagnostics,
    EnergyFunctional,
    Mesh,
    dom_diagnostics,
    random_zero_trace,
)
from .errors import (
    CollapsedPath,
    HypothesisFailed,
    LambdaTooSmall,
    MaxIterations,
    NoPositivePlateau,
    NonDecreasingStep,
    OverflowDomain,
)
from .modular import luxemburg_norm
from .nfunction import NFunction
from .nonlinearity import HypothesisReport, Nonlinearity, check_hypotheses, scan_grid, truncate

__all__ = [
    "PlateauFunction",
    "Witness",
    "MinimizeResult",
    "Geometry",
    "MountainPassState",
    "SolverReport",
    "Tolerances",
    "plateau",
    "lambda_star",
    "minimize_I",
    "verify_mp_geometry",
    "mountain_pass",
    "solve_two",
]

ARMIJO = 1e-4
SHRINK = 0.5
ORDER_TOL = 1e-8
DISTINCT_TOL = 1e-4
# ramp widths tried by the plateau construction, as fractions of the inradius
RAMP_FRACTIONS = (7 / 8, 3 / 4, 1 / 2, 1 / 4, 1 / 8, 1 / 16, 1 / 32, 1 / 64)


@dataclass(frozen=True)
class Tolerances:
    residual: float = 1e-8      # sup-norm of the residual vector
    residual_rtol: float = 1e-12  # ... or relative to the summed contribution size
    level: float = 1e-6         # |c - I(u2)| and c >= rho - level
    max_iter: int = 500
    path_iter: int = 3000


# ---------------------------------------------------------------------------
# witness threshold

@dataclass(frozen=True, eq=False)
class PlateauFunction:
    """``t1`` on the inner region, ramping linearly to 0 over ``ramp_width``."""

    t1: float
    ramp_width: float
    inner_region: np.ndarray   # node indices where the value is t1
    profile: DiscreteFunction


def plateau(mesh: Mesh, t1: float, ramp_width: float) -> PlateauFunction:
    d = mesh.distance_to_boundary()
    vals = t1 * np.clip(d / ramp_width, 0.0, 1.0)
    vals[mesh.boundary_nodes] = 0.0
    inner = np.flatnonzero(d >= ramp_width)
    vals[inner] = t1
    return PlateauFunction(float(t1), float(ramp_width), inner, DiscreteFunction(mesh, vals))


@dataclass(frozen=True, eq=False)
class Witness:
    lambda_star: float
    u0: PlateauFunction
    Q_u0: float
    F_u0: float

    def energy_at(self, lam: float) -> float:
        """``I_lam(u0) = Q(u0) - lam int F(u0)``; vanishes at ``lambda_star``."""
        return self.Q_u0 - lam * self.F_u0


def _witness_at_level(phi, f, mesh, t1, shrink_levels, ramp_width):
    E = EnergyFunctional(phi, f, 1.0, mesh)
    h = min((hi - lo) / n for (lo, hi), n in zip(mesh.extent, mesh.resolution))
    widths = [ramp_width] if ramp_width is not None else [
        fr * mesh.inradius for fr in RAMP_FRACTIONS[:shrink_levels]]
    for w in widths:
        if w < h * (1 - 1e-12):
            break
        u0 = plateau(mesh, t1, w)
        x = u0.profile.interior
        Fint = float(E.rhs_integral_vec(x))
        if Fint > 0:
            Q = float(E.Q_vec(x))
            return Witness(Q / Fint, u0, Q, Fint)
    return None


def lambda_star(phi: NFunction, f: Nonlinearity, mesh: Mesh, t1: Optional[float] = None,
                shrink_levels: int = 6, ramp_width: Optional[float] = None,
                levels: int = 33) -> Witness:
    """Witness threshold ``Q(u0) / int F(u0)`` of a plateau function ``u0``.

    For a given plateau height ``t1`` the ramp is shortened (the inner region
    grows) until ``int F(u0) > 0``.  Without ``t1``, heights from the first
    positivity point of ``F`` up to 16 times it are scanned and the smallest
    threshold is returned.
    """
    if t1 is not None:
        candidates = [float(t1)]
    else:
        grid = scan_grid()
        with np.errstate(over="ignore", invalid="ignore"):
            Fg = np.asarray(f.F(np.zeros((1, 1, mesh.dim)), grid[grid <= 0.5 * phi.domain_hint]))
        Fg = np.min(np.atleast_2d(Fg), axis=0)
        pos = np.flatnonzero(Fg > 0)
        if not pos.size:
            raise NoPositivePlateau("F is never positive on the scan grid")
        t_cross = float(grid[pos[0]])
        top = min(16 * t_cross, 0.25 * phi.domain_hint)
        candidates = np.geomspace(t_cross, max(top, t_cross), levels)
    best = None
    for t in candidates:
        try:
            w = _witness_at_level(phi, f, mesh, t, shrink_levels, ramp_width)
        except OverflowDomain:
            continue
        if w is not None and (best is None or w.lambda_star < best.lambda_star):
            best = w
    if best is None:
        raise NoPositivePlateau("no plateau level gives int F(u0) > 0 at this resolution")
    return best


# ---------------------------------------------------------------------------
# minimization

@dataclass
class MinimizeResult:
    u: DiscreteFunction
    energy: float
    trace: List[float]
    residual_norm: float
    iterations: int
    trivial: bool
    start: str = ""


def _safe_values(E: EnergyFunctional, X: np.ndarray) -> np.ndarray:
    try:
        return np.asarray(E.value_vec(X), dtype=float)
    except OverflowDomain:
        if X.ndim == 1:
            return np.asarray(math.inf)
        return np.array([_safe_values(E, x) for x in X], dtype=float)


def _converged(E, x, g, tol: Tolerances) -> bool:
    r = float(np.max(np.abs(g))) if g.size else 0.0
    if r < tol.residual:
        return True
    return r < tol.residual_rtol * float(E.residual_scale_vec(x))


def _shifted_solve(H: np.ndarray, K: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve ``(H + tau K) d = -g`` with the smallest ``tau`` from a ladder making it SPD."""
    scale = max(float(np.trace(np.abs(H))) / max(float(np.trace(K)), 1e-300), 1e-300)
    for tau in (0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6):
        try:
            c = cho_factor(H + tau * scale * K)
        except LinAlgError:
            continue
        d = -cho_solve(c, g)
        if np.all(np.isfinite(d)):
            return d
    return -cho_solve(cho_factor(K), g)


def _descend(E: EnergyFunctional, x0: np.ndarray, tol: Tolerances,
             callback: Optional[Callable] = None):
    x = np.array(x0, dtype=float)
    e = float(_safe_values(E, x))
    if not math.isfinite(e):
        raise OverflowDomain("starting point lies outside the N-function domain")
    trace = [e]
    K = E.stiffness()
    for it in range(tol.max_iter):
        g = E.gradient_vec(x)
        if _converged(E, x, g, tol):
            return x, trace, float(np.max(np.abs(g), initial=0.0)), it
        d = _shifted_solve(E.hessian(x), K, g)
        slope = float(g @ d)
        if not slope < 0:
            d = -E.sobolev_gradient(g)
            slope = float(g @ d)
        alpha, accepted = 1.0, False
        while alpha > 1e-14:
            xn = x + alpha * d
            en = float(_safe_values(E, xn))
            if en <= e + ARMIJO * alpha * slope:
                accepted = True
                break
            alpha *= SHRINK
        if not accepted:
            # energy differences are at round-off level: fall back to residual decrease
            xn = x + d
            gn = E.gradient_vec(xn)
            if np.max(np.abs(gn)) < np.max(np.abs(g)) and abs(slope) < 1e-12 * max(1.0, abs(e)):
                en = float(_safe_values(E, xn))
            else:
                raise NonDecreasingStep(f"line search failed at iteration {it} (slope {slope:.3e})")
        x, e = xn, en
        # round-off-level steps still shrink the residual but are not a decrease
        if e < trace[-1]:
            trace.append(e)
        if callback is not None:
            callback(x)
    g = E.gradient_vec(x)
    if _converged(E, x, g, tol):
        return x, trace, float(np.max(np.abs(g))), tol.max_iter
    raise MaxIterations(f"no convergence in {tol.max_iter} iterations (residual {np.max(np.abs(g)):.3e})")


def minimize_I(E: EnergyFunctional, start: Optional[DiscreteFunction] = None,
               tol: Optional[Tolerances] = None, seed: Optional[int] = 0, n_random: int = 3,
               callback: Optional[Callable] = None) -> MinimizeResult:
    """Global minimization of the discrete energy by multi-start descent.

    Starts: 0, ``start`` and ``n_random`` random smooth perturbations of it.
    Each run is a Newton-type descent (Hessian shifted towards the stiffness
    matrix until positive definite) with Armijo backtracking; the lowest
    converged basin is returned.
    """
    tol = tol or Tolerances()
    mesh = E.mesh
    rng = np.random.default_rng(seed)
    starts = [("zero", np.zeros(E.n_dof))]
    if start is not None:
        start.require_zero_trace()
        starts.append(("start", start.interior))
        amp = max(start.sup_norm(), 1.0)
        for k in range(n_random):
            xi = random_zero_trace(mesh, rng, modes=4).interior
            xi *= 0.25 * amp / max(float(np.max(np.abs(xi))), 1e-300)
            starts.append((f"random{k}", start.interior + xi))
    best, errors = None, []
    for label, x0 in starts:
        try:
            x, trace, r, its = _descend(E, x0, tol, callback)
        except (MaxIterations, NonDecreasingStep, OverflowDomain) as exc:
            errors.append(exc)
            continue
        if best is None or trace[-1] < best[1][-1] - 1e-12 * max(1.0, abs(best[1][-1])):
            best = (x, trace, r, its, label)
    if best is None:
        raise errors[-1]
    x, trace, r, its, label = best
    u = DiscreteFunction.from_interior(mesh, x)
    return MinimizeResult(u, trace[-1], trace, r, its, u.sup_norm() < 1e-8, label)


# ---------------------------------------------------------------------------
# mountain-pass geometry

@dataclass
class Geometry:
    r: float
    rho: float
    holds: bool
    r_grid: List[float] = field(default_factory=list)
    rho_grid: List[float] = field(default_factory=list)
    refined: bool = False

    def as_dict(self) -> dict:
        return {"r": self.r, "rho": self.rho, "holds": self.holds, "refined": self.refined,
                "r_grid": list(self.r_grid), "rho_grid": list(self.rho_grid)}


def verify_mp_geometry(J: EnergyFunctional, r_grid: Optional[Sequence[float]] = None,
                       samples: int = 200, seed: Optional[int] = 0,
                       u1: Optional[DiscreteFunction] = None) -> Geometry:
    """Sampled check of ``J >= rho > 0`` on a sphere ``||u|| = r``.

    ``||u||`` is the Luxemburg norm of the gradient.  For each radius, ``J``
    is evaluated on ``samples`` random smooth directions scaled onto the
    sphere; ``rho(r)`` is the smallest value seen and the radius with the
    largest ``rho`` is reported.  A positive result is evidence, not proof.
    """
    mesh, phi = J.mesh, J.phi
    if r_grid is None:
        top = 1.0
        if u1 is None and hasattr(J.rhs, "ceiling"):
            u1 = J.rhs.ceiling
        if u1 is not None:
            top = min(top, luxemburg_norm(phi, u1, of_gradient=True).value)
        r_grid = np.geomspace(1e-3 * top, 0.9 * top, 16)
    rng = np.random.default_rng(seed)
    dirs = []
    for _ in range(samples):
        v = random_zero_trace(mesh, rng, modes=6)
        n = luxemburg_norm(phi, v, of_gradient=True).value
        if n > 0:
            dirs.append(v.interior / n)
    D = np.array(dirs)
    rhos = []
    for r in r_grid:
        vals = _safe_values(J, r * D)
        rhos.append(float(np.min(vals)))
    k = int(np.argmax(rhos))
    return Geometry(float(r_grid[k]), rhos[k], bool(rhos[k] > 0), [float(r) for r in r_grid], rhos)


# ---------------------------------------------------------------------------
# mountain pass

@dataclass
class MountainPassState:
    """Final path: the moving string ``X`` from 0 to ``e`` plus the fixed segment ``e -> u1``."""

    X: np.ndarray           # (path_points, n_dof) interior values; X[0] = 0
    x1: np.ndarray          # interior values of u1
    mesh: Mesh
    level: float
    argmax_index: int
    iterations: int
    energies: np.ndarray
    polished: bool = False
    morse_index: int = -1

    @property
    def path(self) -> List[DiscreteFunction]:
        nodes = list(self.X) + [self.x1]
        return [DiscreteFunction.from_interior(self.mesh, x) for x in nodes]


def _k_lengths(K: np.ndarray, X: np.ndarray) -> np.ndarray:
    dX = np.diff(X, axis=0)
    return np.sqrt(np.maximum(np.einsum("pi,ij,pj->p", dX, K, dX), 0.0))


def _redistribute(K: np.ndarray, X: np.ndarray) -> np.ndarray:
    s = np.concatenate([[0.0], np.cumsum(_k_lengths(K, X))])
    if s[-1] <= 0:
        return X
    target = np.linspace(0.0, s[-1], len(X))
    out = np.empty_like(X)
    for j in range(X.shape[1]):
        out[:, j] = np.interp(target, s, X[:, j])
    out[0], out[-1] = X[0], X[-1]
    return out


def _newton_critical(J: EnergyFunctional, x: np.ndarray, tol: Tolerances, max_iter: int = 60):
    """Newton iteration on ``grad J = 0`` with backtracking on the residual size."""
    Kc = J.stiffness_factor()

    def merit(g):
        with np.errstate(over="ignore", invalid="ignore"):
            return float(g @ cho_solve(Kc, g))

    g = J.gradient_vec(x)
    for _ in range(max_iter):
        if _converged(J, x, g, tol):
            return x, True
        try:
            d = solve(J.hessian(x), -g, assume_a="sym")
        except (LinAlgError, ValueError):
            return x, False
        if not np.all(np.isfinite(d)):
            return x, False
        m0, alpha = merit(g), 1.0
        while alpha > 1e-6:
            xn = x + alpha * d
            try:
                gn = J.gradient_vec(xn)
            except OverflowDomain:
                gn = None
            if gn is not None and np.all(np.isfinite(gn)) and merit(gn) < (1 - 1e-4 * alpha) * m0:
                break
            alpha *= 0.5
        else:
            return x, _converged(J, x, g, tol)
        x, g = xn, gn
    return x, _converged(J, x, g, tol)


def mountain_pass(J: EnergyFunctional, u1: DiscreteFunction, path_points: int = 33,
                  tol: Optional[Tolerances] = None, max_iter: Optional[int] = None,
                  rho: Optional[float] = None, callback: Optional[Callable] = None):
    """Mountain-pass critical point of ``J`` between ``0`` and ``u1``.

    The path starts as the segment ``theta * u1``; its part beyond the last
    scanned ``theta`` with ``J(theta * u1) >= 0`` is frozen.  Each iteration moves every
    interior node one backtracking step along the negative Sobolev gradient
    of ``J`` and re-spaces the nodes evenly in the ``H^1_0`` arclength.  At
    iterations 5, 10, 20, ... the highest node is polished by Newton's method
    on ``grad J = 0``; the loop stops at the first polished critical point
    with ``J > 0`` and Morse index 1.  Returns ``(u2, c, state)``.
    """
    tol = tol or Tolerances()
    max_iter = tol.path_iter if max_iter is None else max_iter
    u1.require_zero_trace()
    e1 = float(J.value_vec(u1.interior))
    if not e1 < 0:
        raise ValueError(f"mountain pass needs J(u1) < 0, got {e1:.6g}")
    K = J.stiffness()
    theta_e = _string_end(J, u1.interior)
    X = np.linspace(0.0, theta_e, path_points)[:, None] * u1.interior[None, :]
    inner = slice(1, path_points - 1)
    alpha = np.ones(path_points - 2)
    polish_at = 5
    best = None
    it = 0
    for it in range(1, max_iter + 1):
        Y = X[inner]
        e = _safe_values(J, Y)
        G = J.gradient_vec(Y)
        D = -J.sobolev_gradient(G)
        slope = np.einsum("pi,pi->p", G, D)
        # keep each node within half a segment of where it was
        seg = float(np.sum(_k_lengths(K, X))) / (path_points - 1)
        dnorm = np.sqrt(np.maximum(np.einsum("pi,ij,pj->p", D, K, D), 1e-300))
        step = np.minimum(alpha * 2.0, 0.5 * seg / dnorm)
        done = slope >= 0
        Ynew = Y.copy()
        for _ in range(60):
            trial = Y + step[:, None] * D
            et = _safe_values(J, trial)
            ok = (et <= e + ARMIJO * step * slope) & ~done
            Ynew[ok] = trial[ok]
            done |= ok
            if done.all():
                break
            step = np.where(done, step, step * SHRINK)
        alpha = step
        X[inner] = Ynew
        X = _redistribute(K, X)
        energies = _safe_values(J, X)
        k = int(np.argmax(energies))
        level = float(energies[k])
        if rho is not None and level < rho - tol.level:
            raise CollapsedPath(f"path level {level:.6g} fell below rho = {rho:.6g}")
        if callback is not None:
            callback(X[k])
        if it == polish_at or it == max_iter:
            polish_at *= 2
            cand = _polish(J, X, k, tol)
            if cand is not None:
                best = cand
                if cand[2] == 1:
                    break
    if best is not None and callback is not None:
        callback(best[0])
    if best is None:
        raise MaxIterations(f"mountain-pass polish did not converge (path level {level:.6g})")
    x2, c, morse = best
    state = MountainPassState(X, u1.interior.copy(), J.mesh, level, k, it, energies, True, morse)
    return DiscreteFunction.from_interior(J.mesh, x2), c, state


def _string_end(J: EnergyFunctional, x1: np.ndarray) -> float:
    """Smallest ``theta`` beyond which ``J(theta * u1) < 0`` on a fine scan.

    The segment from ``theta * u1`` to ``u1`` then stays below level 0 and
    is kept fixed; only the part of the path through the mountain moves.
    """
    theta = np.concatenate([[0.0], np.geomspace(1e-4, 1.0, 600)])
    vals = _safe_values(J, theta[:, None] * x1[None, :])
    nonneg = np.flatnonzero(vals >= 0)
    last = int(nonneg[-1]) if nonneg.size else 0
    return float(theta[min(last + 1, len(theta) - 1)])


def _polish(J: EnergyFunctional, X: np.ndarray, k: int, tol: Tolerances):
    """Newton polish from the highest path node (or a neighbour).

    Returns ``(x, J(x), morse_index)`` for a nontrivial critical point with
    positive energy, else ``None``.
    """
    for j in (k, k - 1, k + 1):
        if not 0 < j < len(X) - 1:
            continue
        x2, ok = _newton_critical(J, X[j].copy(), tol)
        if not ok or np.max(np.abs(x2)) < 1e-8:
            continue
        c = float(J.value_vec(x2))
        if c > 0:
            morse = int(np.sum(eigvalsh(J.hessian(x2), J.stiffness()) < 0))
            return x2, c, morse
    return None


def _sphere_crossing(J: EnergyFunctional, X: np.ndarray, r: float) -> Optional[float]:
    """``J`` at the first point where the piecewise-linear path crosses ``||u|| = r``."""
    mesh, phi = J.mesh, J.phi
    norms = [luxemburg_norm(phi, DiscreteFunction.from_interior(mesh, x), of_gradient=True).value for x in X]
    for j in range(len(X) - 1):
        if norms[j] <= r < norms[j + 1]:
            lo, hi = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                xm = X[j] + mid * (X[j + 1] - X[j])
                n = luxemburg_norm(phi, DiscreteFunction.from_interior(mesh, xm), of_gradient=True).value
                lo, hi = (mid, hi) if n < r else (lo, mid)
            return float(J.value_vec(X[j] + hi * (X[j + 1] - X[j])))
    return None


# ---------------------------------------------------------------------------
# full pipeline

@dataclass
class SolverReport:
    lam: float
    lambda_star: float
    u1: DiscreteFunction
    I_u1: float
    profile: str
    hypothesis: HypothesisReport
    u2: Optional[DiscreteFunction] = None
    I_u2: Optional[float] = None
    c: Optional[float] = None
    residual_norms: tuple = (math.nan, math.nan)
    ordering_ok: Optional[bool] = None
    geometry: Optional[Geometry] = None
    diagnostics: dict = field(default_factory=dict)
    sup_norms: tuple = (math.nan, math.nan)
    status: str = "minimizer_only"
    failures: List[str] = field(default_factory=list)
    mp_iterations: int = 0
    morse_index: int = -1
    witness_plateau: Optional[dict] = None

    @property
    def success(self) -> bool:
        return self.status == "two_solutions"

    def to_dict(self) -> dict:
        def diag(d: Optional[DomDiagnostics]):
            return None if d is None else d._asdict()

        return {
            "lambda": self.lam,
            "lambda_star": self.lambda_star,
            "lambda_star_kind": "witness threshold",
            "profile": self.profile,
            "status": self.status,
            "failures": list(self.failures),
            "I_u1": self.I_u1,
            "I_u2": self.I_u2,
            "c": self.c,
            "residual_norms": list(self.residual_norms),
            "ordering_ok": self.ordering_ok,
            "sup_norms": list(self.sup_norms),
            "geometry": None if self.geometry is None else self.geometry.as_dict(),
            "morse_index_u2": self.morse_index,
            "mp_iterations": self.mp_iterations,
            "diagnostics": {k: diag(v) for k, v in self.diagnostics.items()},
            "hypothesis": self.hypothesis.as_dict(),
            "witness_plateau": self.witness_plateau,
            "u1": self.u1.to_dict(),
            "u2": None if self.u2 is None else self.u2.to_dict(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), default=_json_default, **kwargs)

    def write(self, path) -> None:
        Path(path).write_text(self.to_json(indent=2))

    def write_profiles(self, path) -> None:
        """Delimited table: coordinates, then ``u1`` and ``u2`` nodal values."""
        mesh = self.u1.mesh
        names = ["x", "y"][: mesh.dim]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names + ["u1", "u2"])
            u2 = self.u2.values if self.u2 is not None else np.full(mesh.n_nodes, np.nan)
            for row, a, b in zip(mesh.nodes, self.u1.values, u2):
                w.writerow([repr(float(v)) for v in row] + [repr(float(a)), repr(float(b))])


def _json_default(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _diag_or_none(phi, u):
    try:
        return dom_diagnostics(phi, u)
    except OverflowDomain:
        return None


def solve_two(phi: NFunction, f: Nonlinearity, mesh: Mesh, lam: float, profile: str = "T1",
              tol: Optional[Tolerances] = None, seed: Optional[int] = 0, path_points: int = 33,
              geometry_samples: int = 200, witness: Optional[Witness] = None,
              hypothesis: Optional[HypothesisReport] = None,
              callback: Optional[Callable] = None) -> SolverReport:
    """Run the full pipeline at ``lam`` and verify its conclusions.

    Raises :class:`HypothesisFailed` when the profile's hypotheses fail on the
    sample grids and :class:`LambdaTooSmall` (carrying the minimizer-only
    report) when ``lam`` does not exceed the witness threshold.
    ``callback`` receives every accepted descent iterate and every path
    maximizer as an interior nodal vector.
    """
    tol = tol or Tolerances()
    hyp = hypothesis or check_hypotheses(f, phi, profile, N_dim=mesh.dim, mesh=mesh)
    if not hyp.holds:
        raise HypothesisFailed("; ".join(hyp.reasons), hyp)
    wit = witness or lambda_star(phi, f, mesh)
    ss = np.random.SeedSequence(seed)
    seed_min, seed_geo = (int(s.generate_state(1)[0]) for s in ss.spawn(2))

    E = EnergyFunctional(phi, f, lam, mesh)
    m1 = minimize_I(E, wit.u0.profile, tol, seed=seed_min, callback=callback)
    u1 = m1.u
    report = SolverReport(
        lam=float(lam), lambda_star=wit.lambda_star, u1=u1, I_u1=m1.energy, profile=profile,
        hypothesis=hyp, sup_norms=(u1.sup_norm(), math.nan),
        residual_norms=(m1.residual_norm, math.nan),
        diagnostics={"u1": _diag_or_none(phi, u1)},
        witness_plateau={"t1": wit.u0.t1, "ramp_width": wit.u0.ramp_width,
                         "Q_u0": wit.Q_u0, "F_u0": wit.F_u0},
    )
    if not lam > wit.lambda_star:
        report.status = "lambda_too_small"
        raise LambdaTooSmall(
            f"lambda = {lam:.6g} does not exceed the witness threshold {wit.lambda_star:.6g}", report)
    if not m1.energy < 0:
        report.status = "failed"
        report.failures.append("minimizer has I(u1) >= 0")
        return report

    J = EnergyFunctional(phi, truncate(f, u1), lam, mesh)
    geo = verify_mp_geometry(J, samples=geometry_samples, seed=seed_geo, u1=u1)
    report.geometry = geo
    u2, c, state = mountain_pass(J, u1, path_points=path_points, tol=tol, callback=callback)
    crossing = _sphere_crossing(J, state.X, geo.r)
    if crossing is not None and crossing < geo.rho:
        geo.rho, geo.refined = crossing, True
        geo.holds = bool(crossing > 0)
    if c < geo.rho - tol.level:
        raise CollapsedPath(f"mountain-pass level {c:.6g} below rho = {geo.rho:.6g}")

    r1 = float(np.max(np.abs(E.gradient_vec(u1.interior)), initial=0.0))
    r2 = float(np.max(np.abs(E.gradient_vec(u2.interior)), initial=0.0))
    I_u2 = float(E.value_vec(u2.interior))
    report.u2, report.c, report.I_u2 = u2, c, I_u2
    report.residual_norms = (r1, r2)
    report.ordering_ok = bool(np.all(u2.values <= u1.values + ORDER_TOL))
    report.sup_norms = (u1.sup_norm(), u2.sup_norm())
    report.diagnostics["u2"] = _diag_or_none(phi, u2)
    report.mp_iterations = state.iterations
    report.morse_index = state.morse_index

    fails = report.failures
    if not report.I_u1 < 0:
        fails.append("I(u1) >= 0")
    if not c > 0:
        fails.append("c <= 0")
    if abs(c - I_u2) > tol.level:
        fails.append(f"|c - I(u2)| = {abs(c - I_u2):.3e}")
    if not report.ordering_ok:
        fails.append("u2 <= u1 violated")
    scale = max(1.0, float(E.residual_scale_vec(u1.interior)), float(E.residual_scale_vec(u2.interior)))
    for name, r in (("u1", r1), ("u2", r2)):
        if r > max(tol.residual, tol.residual_rtol * scale):
            fails.append(f"residual({name}) = {r:.3e}")
    if np.max(np.abs(u1.values - u2.values)) <= DISTINCT_TOL:
        fails.append("u1 and u2 coincide")
    report.status = "two_solutions" if not fails else "contract_violated"
    return report
