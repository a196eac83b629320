"""Weighted and boundary trace norms evaluated with the assembly quadrature."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Any

import numpy as np
from loguru import logger
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .assembly import MIDPOINT_BASIS, element_data
from .exceptions import ValidationError
from .strings import mesh_mismatch

if TYPE_CHECKING:
    from numpy.typing import NDArray
    from typing_extensions import Self

    from .geometry import CoefficientSet
    from .mesh import Mesh

    FloatArray = NDArray[np.float64]


class NormKind(str, Enum):
    """Supported weighted norms."""

    H_OMEGA = "H_Omega"
    HHAT1 = "Hhat1"
    HHAT0 = "Hhat0"
    L2_DGAMMA = "L2_dGamma"


@dataclass(frozen=True)
class WeightedNorms(object):
    """Choice of norm together with its band width and exponents."""

    which: NormKind
    tau: float = 0.2
    beta1: float = 1.0
    s: float = 0.0

    def __post_init__(self: Self) -> None:
        if self.tau <= 0:
            msg = f"Band width tau must be positive, got {self.tau}."
            raise ValidationError(msg)
        if not 0.0 < self.beta1 < 2.0:  # noqa: PLR2004
            msg = f"beta1 must lie in (0, 2), got {self.beta1}."
            raise ValidationError(msg)

    @classmethod
    def from_beta(cls: type[Self], which: NormKind, tau: float, beta: float) -> Self:
        """Build with beta1 = (2 + beta) / 2."""
        return cls(which, tau, (2.0 + beta) / 2.0)


class _Quadrature(object):
    """Per triangle integration of nodal P1 data against weights at the edge midpoints."""

    def __init__(self: Self, mesh: Mesh) -> None:
        self.mesh = mesh
        data = element_data(mesh)
        self.areas = data.areas
        self.gradients = data.gradients
        self.points = data.quad_points
        self.distance = mesh.domain.distance(data.quad_points.reshape(-1, 2)).reshape(mesh.n_triangles, 3)
        self.touching = mesh.is_boundary[mesh.triangles].any(axis=1)
        self.centroids = mesh.vertices[mesh.triangles].mean(axis=1)

    def values(self: Self, u: NDArray[np.generic]) -> NDArray[np.generic]:
        return np.asarray(u[self.mesh.triangles] @ MIDPOINT_BASIS.T)

    def grad(self: Self, u: NDArray[np.generic]) -> NDArray[np.generic]:
        return np.asarray(np.einsum("tic,ti->tc", self.gradients, u[self.mesh.triangles]))

    def band(self: Self, tau: float) -> FloatArray:
        return (self.distance < tau).astype(float)

    def power(self: Self, s: float) -> FloatArray:
        with np.errstate(divide="ignore"):
            return np.asarray(self.distance**s)

    def mass(self: Self, u: NDArray[np.generic], weight: FloatArray | None = None) -> float:
        """Integral of weight |u|^2."""
        w = np.ones_like(self.distance) if weight is None else weight
        return float(np.sum((self.areas / 3.0)[:, None] * w * np.abs(self.values(u)) ** 2))

    def singular_mass(self: Self, u: NDArray[np.generic], s: float) -> float:
        """Integral of d^s |u|^2 with the barycenter rule on triangles touching the boundary when s < 0."""
        if s >= 0:
            return self.mass(u, self.power(s))
        inner = ~self.touching
        body = np.sum((self.areas[inner] / 3.0)[:, None] * self.power(s)[inner] * np.abs(self.values(u)[inner]) ** 2)
        d_c = self.mesh.domain.distance(self.centroids[self.touching])
        u_c = u[self.mesh.triangles[self.touching]].mean(axis=1)
        edge = np.sum(self.areas[self.touching] * d_c**s * np.abs(u_c) ** 2)
        return float(body + edge)

    def dirichlet(self: Self, u: NDArray[np.generic], weight: FloatArray | None = None) -> float:
        """Integral of weight |grad u|^2 with the weight averaged over the triangle."""
        mean_w = np.ones(self.mesh.n_triangles) if weight is None else weight.mean(axis=1)
        return float(np.sum(self.areas * mean_w * np.sum(np.abs(self.grad(u)) ** 2, axis=1)))

    def energy(self: Self, u: NDArray[np.generic], matrix: FloatArray) -> float:
        """Integral of <B grad u, grad u> with B given at the quadrature points as (nt, 3, 2, 2)."""
        g = self.grad(u)
        return float(np.real(np.sum(self.areas * np.einsum("tc,tcd,td->t", g.conj(), matrix.mean(axis=1), g))))


def _components(v: Any, mesh: Mesh) -> tuple[NDArray[np.generic], NDArray[np.generic]]:
    if isinstance(v, np.ndarray):
        u1 = u2 = v
    else:
        u1, u2 = v.u1, v.u2
    for u in (u1, u2):
        if u.shape[0] != mesh.n_vertices:
            raise ValidationError(mesh_mismatch.format(got=u.shape[0], expected=mesh.n_vertices))
    return np.asarray(u1), np.asarray(u2)


def weighted_norm(v: Any, spec: WeightedNorms, mesh: Mesh, cs: CoefficientSet | None = None) -> float:
    """Norm of a field pair (or a single nodal field, used for both components) in the chosen space.

    The H_Omega and Hhat1 norms read the media contrast from ``cs``; the others ignore it.
    """
    u1, u2 = _components(v, mesh)
    w = u1 - u2
    q = _Quadrature(mesh)
    band = q.band(spec.tau)
    outside = 1.0 - band
    if spec.which is NormKind.L2_DGAMMA:
        if spec.s < 0 and q.touching.any():
            logger.debug(f"Barycenter rule on {int(q.touching.sum())} boundary triangles for s={spec.s}.")
        parts = (u1,) if isinstance(v, np.ndarray) else (u1, u2)
        value = sum(q.singular_mass(u, spec.s) for u in parts)
    elif spec.which is NormKind.H_OMEGA:
        if cs is None:
            msg = "The H_Omega norm needs the coefficient set."
            raise ValidationError(msg)
        pts = q.points.reshape(-1, 2)
        gap = (cs.A1(pts) - cs.A2(pts)).reshape(mesh.n_triangles, 3, 2, 2) * band[:, :, None, None]
        value = q.dirichlet(w) + sum(q.dirichlet(u, outside) + q.energy(u, gap) + q.mass(u) for u in (u1, u2))
    elif spec.which is NormKind.HHAT1:
        if cs is None:
            msg = "The Hhat1 norm needs the coefficient set."
            raise ValidationError(msg)
        pts = q.points.reshape(-1, 2)
        gap = (cs.S1(pts) - cs.S2(pts)).reshape(mesh.n_triangles, 3) * band
        value = (
            q.dirichlet(w)
            + q.dirichlet(u2, q.power(spec.beta1 + 2.0))
            + sum(q.mass(u, outside) + q.mass(u, gap) for u in (u1, u2))
        )
    else:
        value = (
            q.dirichlet(u2, outside)
            + q.singular_mass(w, -spec.beta1)
            + q.singular_mass(u1, spec.beta1)
            + q.singular_mass(u2, spec.beta1)
        )
    if value < 0:
        logger.warning(f"{spec.which.value} norm squared is negative ({value:.3e}); media ordering fails, clamped to 0.")
        value = 0.0
    return float(np.sqrt(value))


def dirichlet_energy(
    u: NDArray[np.generic],
    mesh: Mesh,
    weight_power: float | None = None,
    region: float | None = None,
) -> float:
    """Integral of d^p |grad u|^2 (plain without a power), restricted to d >= region when given."""
    q = _Quadrature(mesh)
    weight = np.ones_like(q.distance) if weight_power is None else q.power(weight_power)
    if region is not None:
        weight = weight * (1.0 - q.band(region))
    return q.dirichlet(u, weight)


def weighted_mass(u: NDArray[np.generic], mesh: Mesh, s: float = 0.0, region: float | None = None) -> float:
    """Integral of d^s |u|^2, restricted to d >= region when given."""
    q = _Quadrature(mesh)
    if region is None:
        return q.singular_mass(u, s)
    return q.mass(u, q.power(s) * (1.0 - q.band(region)))


def boundary_matrices(mesh: Mesh) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """P1 mass and stiffness matrices of the boundary curve, on all vertices."""
    edges = mesh.boundary_edges
    length = np.linalg.norm(mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]], axis=1)
    rows = np.concatenate([edges[:, 0], edges[:, 1], edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 0], edges[:, 1], edges[:, 1], edges[:, 0]])
    n = mesh.n_vertices
    mass = np.concatenate([length / 3, length / 3, length / 6, length / 6])
    stiff = np.concatenate([1 / length, 1 / length, -1 / length, -1 / length])
    return (
        sparse.coo_matrix((mass, (rows, cols)), shape=(n, n)).tocsr(),
        sparse.coo_matrix((stiff, (rows, cols)), shape=(n, n)).tocsr(),
    )


@dataclass(frozen=True)
class TraceNorms(object):
    """Discrete trace norms on the boundary nodes by interpolation between L2 and H1."""

    l2: float
    h1: float
    h_half: float
    h_minus_one: float
    h_minus_half: float


def trace_norms(u: NDArray[np.generic], mesh: Mesh) -> TraceNorms:
    """||u||_{1/2} = sqrt(||u|| ||u||_1) on the boundary, and the dual pair through the L2 Riesz map."""
    mb, kb = boundary_matrices(mesh)
    nodes = np.unique(mesh.boundary_edges)
    mb, kb = mb[nodes][:, nodes], kb[nodes][:, nodes]
    x = np.asarray(u)[nodes]
    l2 = float(np.sqrt(max(np.real(np.vdot(x, mb @ x)), 0.0)))
    h1 = float(np.sqrt(max(np.real(np.vdot(x, (kb + mb) @ x)), 0.0)))
    y = mb @ x
    dual = spsolve(sparse.csc_matrix(kb + mb, dtype=complex), y.astype(complex)) if x.any() else np.zeros_like(y)
    h_m1 = float(np.sqrt(max(np.real(np.vdot(y, dual)), 0.0)))
    return TraceNorms(l2=l2, h1=h1, h_half=float(np.sqrt(l2 * h1)), h_minus_one=h_m1, h_minus_half=float(np.sqrt(l2 * h_m1)))
