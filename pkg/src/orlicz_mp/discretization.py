"""P1 finite elements on intervals and rectangles.

Meshes are uniform: an interval split into ``n`` segments, or a rectangle
split into ``nx * ny`` cells with two triangles each.  Gradients of P1
functions are constant per element, so the ``Phi(|grad u|)`` term is
integrated exactly; the right-hand side term uses a 3-point rule per element.
All vector kernels accept leading batch dimensions (used by the path solver).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.linalg import cho_factor, cho_solve

from .errors import BadResolution, NonzeroBoundary
from .nfunction import NFunction, complementary

__all__ = [
    "Mesh",
    "DiscreteFunction",
    "EnergyFunctional",
    "DomDiagnostics",
    "make_mesh",
    "energy",
    "residual",
    "dom_diagnostics",
    "random_zero_trace",
]

# 3-point Gauss-Legendre on [0, 1]
_G1_PTS = np.array([0.5 - 0.5 * math.sqrt(0.6), 0.5, 0.5 + 0.5 * math.sqrt(0.6)])
_G1_W = np.array([5.0, 8.0, 5.0]) / 18.0
# 3-point degree-2 rule on the reference triangle (weights normalized to 1)
_T2_PTS = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
_T2_W = np.full(3, 1.0 / 3.0)


class Mesh:
    """Uniform simplicial mesh of an interval or a rectangle."""

    def __init__(self, dim: int, extent, resolution):
        if dim not in (1, 2):
            raise BadResolution(f"dim must be 1 or 2, got {dim}")
        if dim == 1:
            (a, b), = _as_boxes(extent, 1)
            n = int(_as_res(resolution, 1)[0])
            if n < 2:
                raise BadResolution(f"resolution must be >= 2, got {n}")
            if not b > a:
                raise BadResolution(f"empty interval ({a}, {b})")
            nodes = np.linspace(a, b, n + 1)[:, None]
            elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
            boundary = np.array([0, n])
            self.extent = ((float(a), float(b)),)
            self.resolution = (n,)
            self.diam = float(b - a)
            ref_w = _G1_W
            shape = np.column_stack([1 - _G1_PTS, _G1_PTS])
        else:
            (x0, x1), (y0, y1) = _as_boxes(extent, 2)
            nx, ny = (int(r) for r in _as_res(resolution, 2))
            if nx < 2 or ny < 2:
                raise BadResolution(f"resolution must be >= 2 per axis, got {(nx, ny)}")
            if not (x1 > x0 and y1 > y0):
                raise BadResolution("empty rectangle")
            xs, ys = np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1)
            X, Y = np.meshgrid(xs, ys)
            nodes = np.column_stack([X.ravel(), Y.ravel()])
            idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
            n00, n10 = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
            n01, n11 = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
            lower = np.column_stack([n00, n10, n11])
            upper = np.column_stack([n00, n11, n01])
            elements = np.stack([lower, upper], axis=1).reshape(-1, 3)
            on_edge = np.zeros(idx.shape, dtype=bool)
            on_edge[0, :] = on_edge[-1, :] = on_edge[:, 0] = on_edge[:, -1] = True
            boundary = idx[on_edge]
            self.extent = ((float(x0), float(x1)), (float(y0), float(y1)))
            self.resolution = (nx, ny)
            self.diam = float(math.hypot(x1 - x0, y1 - y0))
            ref_w = _T2_W
            shape = np.column_stack([1 - _T2_PTS.sum(axis=1), _T2_PTS])

        self.dim = dim
        self.nodes = nodes
        self.elements = elements
        self.boundary_nodes = np.sort(boundary)
        mask = np.ones(len(nodes), dtype=bool)
        mask[self.boundary_nodes] = False
        self.interior_nodes = np.flatnonzero(mask)

        X = nodes[elements]                      # (ne, nloc, dim)
        jac = np.swapaxes(X[:, 1:, :] - X[:, :1, :], 1, 2)  # (ne, dim, dim) columns = edges
        det = np.linalg.det(jac)
        self.measures = np.abs(det) / math.factorial(dim)
        ref_grad = np.vstack([-np.ones((1, dim)), np.eye(dim)])  # (nloc, dim)
        inv_t = np.linalg.inv(jac).transpose(0, 2, 1)          # J^{-T}
        self.grad_ops = np.einsum("eij,kj->eik", inv_t, ref_grad)  # (ne, dim, nloc)
        self.quad_weights = ref_w
        self.shape_at_quad = shape                # (nq, nloc)
        self.quad_points = np.einsum("qk,ekd->eqd", shape, X)
        self._scatter = sparse.csr_matrix(
            (np.ones(elements.size), (elements.ravel(), np.arange(elements.size))),
            shape=(len(nodes), elements.size),
        )
        for arr in (self.nodes, self.elements, self.boundary_nodes, self.interior_nodes,
                    self.measures, self.grad_ops, self.quad_points):
            arr.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def volume(self) -> float:
        return float(self.measures.sum())

    def descriptor(self) -> dict:
        return {"dim": self.dim, "extent": [list(e) for e in self.extent], "resolution": list(self.resolution)}

    def scatter(self, local: np.ndarray) -> np.ndarray:
        """Sum element-local contributions ``(..., ne, nloc)`` into nodal vectors."""
        lead = local.shape[:-2]
        flat = local.reshape(-1, self.elements.size)
        out = (self._scatter @ flat.T).T
        return out.reshape(lead + (self.n_nodes,))

    def distance_to_boundary(self, points: Optional[np.ndarray] = None) -> np.ndarray:
        pts = self.nodes if points is None else np.asarray(points, dtype=float)
        d = np.full(pts.shape[:-1], np.inf)
        for axis, (lo, hi) in enumerate(self.extent):
            d = np.minimum(d, np.minimum(pts[..., axis] - lo, hi - pts[..., axis]))
        return d

    @property
    def inradius(self) -> float:
        return min(0.5 * (hi - lo) for lo, hi in self.extent)

    def __repr__(self) -> str:
        return f"Mesh(dim={self.dim}, extent={self.extent}, resolution={self.resolution})"


def _as_boxes(extent, dim):
    arr = np.asarray(extent, dtype=float).ravel()
    if arr.size != 2 * dim:
        raise BadResolution(f"extent for dim={dim} needs {2 * dim} numbers, got {arr.size}")
    return [tuple(arr[2 * i: 2 * i + 2]) for i in range(dim)]


def _as_res(resolution, dim):
    if np.ndim(resolution) == 0:
        return [int(resolution)] * dim
    res = list(resolution)
    if len(res) != dim:
        raise BadResolution(f"resolution for dim={dim} needs {dim} entries")
    return res


def make_mesh(dim: int, extent=None, resolution: Union[int, Sequence[int]] = 32) -> Mesh:
    """Uniform mesh; ``extent`` defaults to the unit interval or unit square."""
    if extent is None:
        extent = (0.0, 1.0) if dim == 1 else ((0.0, 1.0), (0.0, 1.0))
    return Mesh(dim, extent, resolution)


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    """Nodal values of a P1 function."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.mesh.n_nodes,):
            raise ValueError(f"expected {self.mesh.n_nodes} nodal values, got shape {vals.shape}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, mesh: Mesh) -> "DiscreteFunction":
        return cls(mesh, np.zeros(mesh.n_nodes))

    @classmethod
    def from_interior(cls, mesh: Mesh, x: np.ndarray) -> "DiscreteFunction":
        vals = np.zeros(mesh.n_nodes)
        vals[mesh.interior_nodes] = x
        return cls(mesh, vals)

    @classmethod
    def interpolate(cls, mesh: Mesh, fn, zero_trace: bool = False) -> "DiscreteFunction":
        """Nodal interpolant of ``fn(*coords)``; boundary pinned to 0 if ``zero_trace``."""
        coords = [mesh.nodes[:, i] for i in range(mesh.dim)]
        vals = np.broadcast_to(np.asarray(fn(*coords), dtype=float), (mesh.n_nodes,)).copy()
        if zero_trace:
            vals[mesh.boundary_nodes] = 0.0
        return cls(mesh, vals)

    @property
    def zero_trace(self) -> bool:
        return bool(np.all(self.values[self.mesh.boundary_nodes] == 0.0))

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.mesh.interior_nodes]

    def require_zero_trace(self) -> None:
        if not self.zero_trace:
            worst = float(np.max(np.abs(self.values[self.mesh.boundary_nodes])))
            raise NonzeroBoundary(f"boundary values must vanish (max |u| on boundary = {worst:.3g})")

    def gradients(self) -> np.ndarray:
        """Elementwise constant gradients, shape ``(ne, dim)``."""
        return _grads(self.mesh, self.values)

    def at_quadrature(self) -> np.ndarray:
        return _at_quad(self.mesh, self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def integral(self) -> float:
        return float(np.sum(self.mesh.measures[:, None] * self.mesh.quad_weights * self.at_quadrature()))

    def evaluate(self, points) -> np.ndarray:
        """Point values of the P1 interpolant at ``points`` (``(..., dim)``)."""
        mesh = self.mesh
        pts = np.asarray(points, dtype=float)
        if mesh.dim == 1:
            pts = pts[..., 0] if pts.ndim > 1 and pts.shape[-1] == 1 else pts
            return np.interp(pts, mesh.nodes[:, 0], self.values)
        (x0, x1), (y0, y1) = mesh.extent
        nx, ny = mesh.resolution
        fx = (pts[..., 0] - x0) / (x1 - x0) * nx
        fy = (pts[..., 1] - y0) / (y1 - y0) * ny
        i = np.clip(np.floor(fx).astype(int), 0, nx - 1)
        j = np.clip(np.floor(fy).astype(int), 0, ny - 1)
        xi, eta = fx - i, fy - j
        v = self.values.reshape(ny + 1, nx + 1)
        u00, u10, u01, u11 = v[j, i], v[j, i + 1], v[j + 1, i], v[j + 1, i + 1]
        low = u00 + xi * (u10 - u00) + eta * (u11 - u10)
        up = u00 + eta * (u01 - u00) + xi * (u11 - u01)
        return np.where(xi >= eta, low, up)

    def __add__(self, other):
        return DiscreteFunction(self.mesh, self.values + _vals(other))

    def __sub__(self, other):
        return DiscreteFunction(self.mesh, self.values - _vals(other))

    def __mul__(self, c):
        return DiscreteFunction(self.mesh, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return DiscreteFunction(self.mesh, -self.values)

    def to_dict(self) -> dict:
        return {"mesh": self.mesh.descriptor(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteFunction":
        m = data["mesh"]
        mesh = make_mesh(m["dim"], m["extent"], m["resolution"])
        return cls(mesh, np.asarray(data["values"], dtype=float))


def random_zero_trace(mesh: Mesh, rng: np.random.Generator, modes: int = 6,
                      decay: float = 1.0) -> DiscreteFunction:
    """Random smooth function vanishing on the boundary (a sine series).

    Coefficients are standard normal, damped by ``k**-decay`` per mode index.
    """
    coords = []
    for axis, (lo, hi) in enumerate(mesh.extent):
        coords.append((mesh.nodes[:, axis] - lo) / (hi - lo))
    k = np.arange(1, modes + 1)
    if mesh.dim == 1:
        basis = np.sin(np.pi * np.outer(coords[0], k)) / k ** decay
        vals = basis @ rng.standard_normal(modes)
    else:
        sx = np.sin(np.pi * np.outer(coords[0], k))
        sy = np.sin(np.pi * np.outer(coords[1], k))
        damp = np.outer(k, k) ** (-decay / 1.0)
        coef = rng.standard_normal((modes, modes)) * damp
        vals = np.einsum("nj,nk,jk->n", sx, sy, coef)
    vals[mesh.boundary_nodes] = 0.0
    return DiscreteFunction(mesh, vals)


def _vals(other):
    return other.values if isinstance(other, DiscreteFunction) else np.asarray(other, dtype=float)


def _grads(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    ue = values[..., mesh.elements]
    return np.einsum("edk,...ek->...ed", mesh.grad_ops, ue)


def _at_quad(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    ue = values[..., mesh.elements]
    return np.einsum("qk,...ek->...eq", mesh.shape_at_quad, ue)


class EnergyFunctional:
    """``u -> int Phi(|grad u|) - lam int F(x, u)`` on a mesh.

    ``rhs`` is a :class:`~orlicz_mp.nonlinearity.Nonlinearity` or a
    :class:`~orlicz_mp.nonlinearity.TruncatedNonlinearity`.  The ``*_vec``
    methods work on interior nodal vectors (boundary values are 0) and
    accept leading batch dimensions; ``hessian`` is dense.
    """

    def __init__(self, phi: NFunction, rhs, lam: float, mesh: Mesh):
        if not lam > 0:
            raise ValueError(f"lambda must be positive, got {lam}")
        self.phi = phi
        self.rhs = rhs
        self.lam = float(lam)
        self.mesh = mesh
        self._pointwise = rhs.bind(mesh)
        self._wq = mesh.measures[:, None] * mesh.quad_weights[None, :]   # (ne, nq)
        self._stiffness = None

    def with_lambda(self, lam: float) -> "EnergyFunctional":
        return EnergyFunctional(self.phi, self.rhs, lam, self.mesh)

    @property
    def n_dof(self) -> int:
        return len(self.mesh.interior_nodes)

    def full(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (self.mesh.n_nodes,))
        out[..., self.mesh.interior_nodes] = x
        return out

    # -- pieces --------------------------------------------------------------
    def Q_vec(self, x) -> np.ndarray:
        g = _grads(self.mesh, self.full(x))
        return np.sum(self.mesh.measures * self.phi.phi_at(np.linalg.norm(g, axis=-1)), axis=-1)

    def rhs_integral_vec(self, x) -> np.ndarray:
        uq = _at_quad(self.mesh, self.full(x))
        return np.sum(self._wq * self._pointwise.F(uq), axis=(-2, -1))

    def value_vec(self, x) -> np.ndarray:
        return self.Q_vec(x) - self.lam * self.rhs_integral_vec(x)

    def _local_terms(self, x):
        U = self.full(x)
        g = _grads(self.mesh, U)
        gn = np.linalg.norm(g, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(gn > 0, self.phi.dphi_at(gn) / np.where(gn > 0, gn, 1.0), 0.0)
        flux = scale[..., None] * g
        q_local = self.mesh.measures[:, None] * np.einsum("edk,...ed->...ek", self.mesh.grad_ops, flux)
        fq = self._pointwise.f(_at_quad(self.mesh, U))
        f_local = np.einsum("eq,qk,...eq->...ek", self._wq, self.mesh.shape_at_quad, fq)
        return q_local, f_local

    def gradient_vec(self, x) -> np.ndarray:
        q_local, f_local = self._local_terms(x)
        full = self.mesh.scatter(q_local - self.lam * f_local)
        return full[..., self.mesh.interior_nodes]

    def residual_scale_vec(self, x) -> np.ndarray:
        """Sup over nodes of the summed magnitudes of the residual contributions."""
        q_local, f_local = self._local_terms(x)
        full = self.mesh.scatter(np.abs(q_local) + self.lam * np.abs(f_local))
        return np.max(full[..., self.mesh.interior_nodes], axis=-1)

    def load_vec(self, x) -> np.ndarray:
        """``int f(x, u) v_i`` for interior basis functions ``v_i``."""
        _, f_local = self._local_terms(x)
        return self.mesh.scatter(f_local)[..., self.mesh.interior_nodes]

    def hessian(self, x) -> np.ndarray:
        mesh = self.mesh
        U = self.full(x)
        g = _grads(mesh, U)
        gn = np.linalg.norm(g, axis=-1)
        d2 = self.phi.d2phi_at(gn)
        if mesh.dim == 1:
            M = d2[:, None, None]
        else:
            tiny = gn <= 0
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = np.where(tiny, d2, self.phi.dphi_at(gn) / np.where(tiny, 1.0, gn))
                ghat = np.where(tiny[:, None], 0.0, g / np.where(tiny, 1.0, gn)[:, None])
            eye = np.eye(mesh.dim)
            M = ratio[:, None, None] * eye + (d2 - ratio)[:, None, None] * np.einsum("ei,ej->eij", ghat, ghat)
        B = mesh.grad_ops
        local = mesh.measures[:, None, None] * np.einsum("eik,eij,ejl->ekl", B, M, B)
        dfq = self._pointwise.df(_at_quad(mesh, U))
        N = mesh.shape_at_quad
        local -= self.lam * np.einsum("eq,qk,ql->ekl", self._wq * dfq, N, N)
        H = _assemble_dense(mesh, local)
        idx = mesh.interior_nodes
        return H[np.ix_(idx, idx)]

    def stiffness(self) -> np.ndarray:
        """Interior Laplacian stiffness matrix (the H^1_0 metric)."""
        if self._stiffness is None:
            mesh = self.mesh
            B = mesh.grad_ops
            local = mesh.measures[:, None, None] * np.einsum("eik,eil->ekl", B, B)
            idx = mesh.interior_nodes
            self._stiffness = _assemble_dense(mesh, local)[np.ix_(idx, idx)]
        return self._stiffness

    def stiffness_factor(self):
        if not hasattr(self, "_stiff_cho"):
            self._stiff_cho = cho_factor(self.stiffness())
        return self._stiff_cho

    def sobolev_gradient(self, r: np.ndarray) -> np.ndarray:
        """Riesz representative of ``r`` in the H^1_0 inner product."""
        return cho_solve(self.stiffness_factor(), np.asarray(r).T).T

    # -- DiscreteFunction-level API -------------------------------------------
    def value(self, u: DiscreteFunction) -> float:
        u.require_zero_trace()
        return float(self.value_vec(u.interior))

    def Q(self, u: DiscreteFunction) -> float:
        return float(self.Q_vec(u.interior if u.zero_trace else _interior_or_raise(u)))

    def __call__(self, u: DiscreteFunction) -> float:
        return self.value(u)


def _interior_or_raise(u: DiscreteFunction):
    u.require_zero_trace()
    return u.interior


def _assemble_dense(mesh: Mesh, local: np.ndarray) -> np.ndarray:
    n = mesh.n_nodes
    rows = np.repeat(mesh.elements[:, :, None], mesh.elements.shape[1], axis=2)
    cols = np.repeat(mesh.elements[:, None, :], mesh.elements.shape[1], axis=1)
    H = np.zeros((n, n))
    np.add.at(H, (rows.ravel(), cols.ravel()), local.ravel())
    return H


def energy(E: EnergyFunctional, u: DiscreteFunction) -> float:
    """Discrete energy ``int Phi(|grad u|) - lam int F(x, u)`` (or ``G``)."""
    return E.value(u)


def residual(E: EnergyFunctional, u: DiscreteFunction) -> DiscreteFunction:
    """Weak-form residual ``int phi(|grad u|) grad u . grad v_i - lam int f(x,u) v_i``.

    Interior components only; boundary entries are 0.
    """
    u.require_zero_trace()
    return DiscreteFunction.from_interior(u.mesh, E.gradient_vec(u.interior))


class DomDiagnostics(NamedTuple):
    modular_Phi: float
    modular_tilde_of_dual: float
    identity_gap: float
    relative_gap: float


def dom_diagnostics(phi: NFunction, u: DiscreteFunction) -> DomDiagnostics:
    """Check ``phi(t) t^2 = Phi(t) + Phi~(phi(t) t)`` integrated against ``|grad u|``.

    Returns ``int Phi(|grad u|)``, ``int Phi~(phi(|grad u|) |grad u|)`` and the
    absolute and relative gaps of the integrated identity.  The identity is
    pointwise, so functions with nonzero boundary values are accepted.
    """
    mesh = u.mesh
    gn = np.linalg.norm(u.gradients(), axis=-1)
    s = phi.dphi_at(gn)
    tilde, _ = complementary(phi, np.asarray(s))
    first = float(np.sum(mesh.measures * phi.phi_at(gn)))
    second = float(np.sum(mesh.measures * tilde))
    total = float(np.sum(mesh.measures * s * gn))
    gap = abs(total - (first + second))
    return DomDiagnostics(first, second, gap, gap / max(1.0, abs(total)))
