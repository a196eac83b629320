"""P1 assembly of the coupled transmission system on the constrained space X."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING, Callable, Union

import numpy as np
from loguru import logger
from scipy import sparse

from .exceptions import SupportViolationError, ValidationError
from .geometry import MatrixField
from .strings import div_load_variant, invalid_delta, invalid_shift, support_violation

if TYPE_CHECKING:
    from numpy.typing import NDArray
    from typing_extensions import Self

    from .geometry import CoefficientSet
    from .mesh import Mesh

    FloatArray = NDArray[np.float64]
    ComplexArray = NDArray[np.complex128]
    IntArray = NDArray[np.int64]

ScalarData = Union[Callable[..., "NDArray[np.float64]"], "NDArray[np.generic]", float, complex, None]

# P1 basis values at the three edge midpoints: row q is the midpoint of edge (q, q + 1).
MIDPOINT_BASIS = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


class Variant(str, Enum):
    """Regularized systems."""

    SYS1 = "sys1_real_shift"
    SYS2 = "sys2_imag_shift"
    SYS3 = "sys3_thm2"
    SYS4 = "sys4_thm4"


@dataclass(frozen=True)
class FormCoefficients(object):
    """Per field multipliers: block_j = k_j K[A_j] + M[s_j S_j + z_j]."""

    k1: complex
    s1: complex
    z1: complex
    k2: complex
    s2: complex
    z2: complex

    @classmethod
    def for_variant(cls: type[Self], variant: Variant, gamma0: complex, delta: float) -> Self:
        """Multipliers of the regularized form for each system."""
        if not 0.0 <= delta < 1.0:
            raise ValidationError(invalid_delta.format(delta=delta))
        gamma = complex(gamma0)
        real_shift = variant in (Variant.SYS1, Variant.SYS3)
        if real_shift and not (gamma.imag == 0.0 and gamma.real > 0.0):
            raise ValidationError(invalid_shift.format(variant=variant.value, kind="real positive", gamma0=gamma0))
        if not real_shift and not (gamma.real == 0.0 and gamma.imag > 0.0):
            raise ValidationError(invalid_shift.format(variant=variant.value, kind="purely imaginary", gamma0=gamma0))
        if variant is Variant.SYS1:
            return cls(1 + 1j * delta, gamma, 1j * delta, 1 - 1j * delta, gamma, -1j * delta)
        if variant is Variant.SYS3:
            return cls(1 + delta, gamma * (1 + delta), 0, 1, gamma, 0)
        return cls(1 + delta, gamma, 0, 1, gamma, 0)

    def mass_weight(self: Self, field: int) -> tuple[complex, complex]:
        """(s_j, z_j) of the zeroth order coefficient m_j = s_j S_j + z_j."""
        return (self.s1, self.z1) if field == 1 else (self.s2, self.z2)


@dataclass(frozen=True, eq=False)
class ElementData(object):
    """Per triangle areas, basis gradients and quadrature points."""

    areas: FloatArray
    gradients: FloatArray  # (nt, 3, 2)
    quad_points: FloatArray  # (nt, 3, 2)


def element_data(mesh: Mesh) -> ElementData:
    """Geometry of every triangle."""
    p = mesh.vertices[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    inv_t = np.swapaxes(np.linalg.inv(jac), 1, 2)
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    gradients = np.einsum("tij,kj->tki", inv_t, ref)
    quad_points = np.einsum("qi,tid->tqd", MIDPOINT_BASIS, p)
    return ElementData(mesh.areas, gradients, quad_points)


def at_quadrature(mesh: Mesh, value: ScalarData) -> NDArray[np.generic]:
    """Scalar data at the (nt, 3) quadrature points: constants, nodal vectors, callables or per point arrays."""
    nt = mesh.n_triangles
    if value is None:
        return np.ones((nt, 3))
    if callable(value):
        pts = element_data(mesh).quad_points.reshape(-1, 2)
        return np.asarray(value(pts)).reshape(nt, 3)
    arr = np.asarray(value)
    if arr.ndim == 0:
        return np.full((nt, 3), arr[()])
    if arr.shape == (nt, 3):
        return arr
    return np.asarray(arr[mesh.triangles] @ MIDPOINT_BASIS.T)


def vector_at_quadrature(mesh: Mesh, value: Callable[..., FloatArray] | NDArray[np.generic]) -> NDArray[np.generic]:
    """Vector data at the (nt, 3, 2) quadrature points."""
    if callable(value):
        pts = element_data(mesh).quad_points.reshape(-1, 2)
        return np.asarray(value(pts)).reshape(mesh.n_triangles, 3, 2)
    arr = np.asarray(value)
    return np.asarray(np.einsum("qi,tic->tqc", MIDPOINT_BASIS, arr[mesh.triangles]))


def _scatter(mesh: Mesh, local: NDArray[np.generic]) -> sparse.csr_matrix:
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_vertices
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def stiffness_matrix(mesh: Mesh, A: MatrixField | NDArray[np.generic] | None = None) -> sparse.csr_matrix:
    """K_ij = sum over triangles of |T| grad phi_i . mean_q A(x_q) grad phi_j."""
    data = element_data(mesh)
    if A is None:
        mean_a = np.broadcast_to(np.eye(2), (mesh.n_triangles, 2, 2))
    elif isinstance(A, MatrixField):
        mean_a = A(data.quad_points.reshape(-1, 2)).reshape(mesh.n_triangles, 3, 2, 2).mean(axis=1)
    else:
        mean_a = np.asarray(A).reshape(mesh.n_triangles, 3, 2, 2).mean(axis=1)
    local = data.areas[:, None, None] * np.einsum("tid,tde,tje->tij", data.gradients, mean_a, data.gradients)
    return _scatter(mesh, local)


def mass_matrix(mesh: Mesh, weight: ScalarData = None) -> sparse.csr_matrix:
    """M_ij = sum over triangles and edge midpoints of |T|/3 c(x_q) phi_i(x_q) phi_j(x_q)."""
    c = at_quadrature(mesh, weight)
    local = (mesh.areas / 3.0)[:, None, None] * np.einsum("tq,qi,qj->tij", c, MIDPOINT_BASIS, MIDPOINT_BASIS)
    return _scatter(mesh, local)


def load_vector(mesh: Mesh, g: ScalarData) -> ComplexArray:
    """b_i = integral of g phi_i with the midpoint rule."""
    values = at_quadrature(mesh, g)
    local = (mesh.areas / 3.0)[:, None] * (values @ MIDPOINT_BASIS)
    out = np.zeros(mesh.n_vertices, dtype=complex)
    np.add.at(out, mesh.triangles.ravel(), local.ravel())
    return out


def gradient_load(mesh: Mesh, G: Callable[..., FloatArray] | NDArray[np.generic]) -> ComplexArray:
    """b_i = integral of G . grad phi_i."""
    data = element_data(mesh)
    values = vector_at_quadrature(mesh, G)
    local = (mesh.areas / 3.0)[:, None] * np.einsum("tqc,tic->ti", values, data.gradients)
    out = np.zeros(mesh.n_vertices, dtype=complex)
    np.add.at(out, mesh.triangles.ravel(), local.ravel())
    return out


def boundary_load(mesh: Mesh, h: Callable[..., FloatArray] | NDArray[np.generic]) -> ComplexArray:
    """b_i = integral over the boundary of h phi_i, trapezoidal on every boundary edge."""
    nodal = np.asarray(h(mesh.vertices) if callable(h) else h)
    edges = mesh.boundary_edges
    length = np.linalg.norm(mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]], axis=1)
    out = np.zeros(mesh.n_vertices, dtype=complex)
    np.add.at(out, edges[:, 0], 0.5 * length * nodal[edges[:, 0]])
    np.add.at(out, edges[:, 1], 0.5 * length * nodal[edges[:, 1]])
    return out


@dataclass(frozen=True, eq=False)
class DofMap(object):
    """Field 1 interior, then field 2 interior, then shared boundary unknowns.

    ``field1[v]`` and ``field2[v]`` give the global index of vertex v in each field (-1 on clamped vertices); the two
    agree on boundary vertices, which realizes u1 = u2 on the boundary.
    """

    n_interior: int
    n_boundary: int
    field1: IntArray
    field2: IntArray
    interior_vertices: IntArray
    boundary_vertices: IntArray

    @property
    def total(self: Self) -> int:
        """Number of unknowns."""
        return 2 * self.n_interior + self.n_boundary

    @cached_property
    def P1(self: Self) -> sparse.csr_matrix:
        """Prolongation from unknowns to field 1 nodal values."""
        return self._prolongation(self.field1)

    @cached_property
    def P2(self: Self) -> sparse.csr_matrix:
        """Prolongation from unknowns to field 2 nodal values."""
        return self._prolongation(self.field2)

    def _prolongation(self: Self, index: IntArray) -> sparse.csr_matrix:
        rows = np.flatnonzero(index >= 0)
        data = np.ones(len(rows))
        return sparse.coo_matrix((data, (rows, index[rows])), shape=(len(index), self.total)).tocsr()


def build_dofmap(m: Mesh) -> DofMap:
    """Number the unknowns of the discrete space X."""
    masters = m.masters
    free = ~m.fixed
    is_master = masters == np.arange(m.n_vertices)
    interior = np.flatnonzero(is_master & free & ~m.is_boundary)
    boundary = np.flatnonzero(is_master & free & m.is_boundary)
    ni, nb = len(interior), len(boundary)
    field1 = np.full(m.n_vertices, -1, dtype=np.int64)
    field2 = np.full(m.n_vertices, -1, dtype=np.int64)
    field1[interior] = np.arange(ni)
    field2[interior] = ni + np.arange(ni)
    field1[boundary] = 2 * ni + np.arange(nb)
    field2[boundary] = 2 * ni + np.arange(nb)
    field1 = np.where(free, field1[masters], -1)
    field2 = np.where(free, field2[masters], -1)
    logger.debug(f"Dof map: {ni} interior, {nb} boundary, {2 * ni + nb} total.")
    return DofMap(ni, nb, field1, field2, interior, boundary)


@dataclass(frozen=True, eq=False)
class NodalBlocks(object):
    """Nodal stiffness and mass matrices shared by assembly and diagnostics."""

    K1: sparse.csr_matrix
    K2: sparse.csr_matrix
    M: sparse.csr_matrix
    M_S1: sparse.csr_matrix
    M_S2: sparse.csr_matrix

    def block(self: Self, coefficients: FormCoefficients, field: int) -> sparse.csr_matrix:
        """k_j K[A_j] + s_j M[S_j] + z_j M."""
        if field == 1:
            return coefficients.k1 * self.K1 + coefficients.s1 * self.M_S1 + coefficients.z1 * self.M
        return coefficients.k2 * self.K2 + coefficients.s2 * self.M_S2 + coefficients.z2 * self.M


def nodal_blocks(mesh: Mesh, cs: CoefficientSet) -> NodalBlocks:
    """Assemble the five nodal matrices for a coefficient set."""
    return NodalBlocks(
        K1=stiffness_matrix(mesh, cs.A1),
        K2=stiffness_matrix(mesh, cs.A2),
        M=mass_matrix(mesh),
        M_S1=mass_matrix(mesh, cs.S1),
        M_S2=mass_matrix(mesh, cs.S2),
    )


@dataclass(frozen=True, eq=False)
class BlockSystem(object):
    """Assembled complex symmetric system of the regularized form."""

    matrix: sparse.csc_matrix
    variant: Variant
    gamma0: complex
    delta: float
    coefficients: FormCoefficients
    dofmap: DofMap
    mesh: Mesh
    cs: CoefficientSet
    blocks: NodalBlocks

    @property
    def mass_blocks(self: Self) -> dict[str, sparse.csr_matrix]:
        """Real mass matrices per field, for inner products."""
        return {"M": self.blocks.M, "M_S1": self.blocks.M_S1, "M_S2": self.blocks.M_S2}

    @cached_property
    def gram(self: Self) -> sparse.csr_matrix:
        """L2 Gram matrix of the pair on the unknowns."""
        P1, P2, M = self.dofmap.P1, self.dofmap.P2, self.blocks.M
        return (P1.T @ M @ P1 + P2.T @ M @ P2).tocsr()

    @cached_property
    def sigma_operator(self: Self) -> sparse.csr_matrix:
        """Load of g = (S1 f1, S2 f2) with the form's signs, acting on unknowns."""
        P1, P2 = self.dofmap.P1, self.dofmap.P2
        return (-(P1.T @ self.blocks.M_S1 @ P1) + P2.T @ self.blocks.M_S2 @ P2).tocsr()


def assemble_system(
    m: Mesh,
    dm: DofMap,
    cs: CoefficientSet,
    gamma0: complex,
    delta: float,
    variant: Variant,
    *,
    allow_singular: bool = False,
    blocks: NodalBlocks | None = None,
) -> BlockSystem:
    """Assemble P1^T B1 P1 - P2^T B2 P2 for the chosen variant."""
    coefficients = FormCoefficients.for_variant(variant, gamma0, delta)
    if delta == 0.0 and variant is not Variant.SYS4 and not allow_singular:
        msg = f"delta = 0 is only allowed for {Variant.SYS4.value} unless singularity is accepted."
        raise ValidationError(msg)
    nodal = blocks or nodal_blocks(m, cs)
    P1, P2 = dm.P1, dm.P2
    matrix = P1.T @ nodal.block(coefficients, 1) @ P1 - P2.T @ nodal.block(coefficients, 2) @ P2
    logger.debug(f"Assembled {variant.value} system: {dm.total} unknowns, gamma0={gamma0}, delta={delta}.")
    return BlockSystem(
        matrix=sparse.csc_matrix(matrix, dtype=complex),
        variant=variant,
        gamma0=complex(gamma0),
        delta=delta,
        coefficients=coefficients,
        dofmap=dm,
        mesh=m,
        cs=cs,
        blocks=nodal,
    )


def assemble_rhs(  # noqa: PLR0913
    m: Mesh,
    dm: DofMap,
    g1: ScalarData,
    g2: ScalarData,
    G1: Callable[..., FloatArray] | NDArray[np.generic] | None = None,
    *,
    h: Callable[..., FloatArray] | NDArray[np.generic] | None = None,
    variant: Variant | None = None,
    band: float | None = None,
) -> ComplexArray:
    """Right-hand side of b(phi) = int -g1 conj(phi1) + g2 conj(phi2) + G1 . grad conj(phi1) + int_Gamma h conj(phi)."""
    rhs = np.zeros(dm.total, dtype=complex)
    if g1 is not None:
        rhs -= dm.P1.T @ load_vector(m, g1)
    if g2 is not None:
        rhs += dm.P2.T @ load_vector(m, g2)
    if G1 is not None:
        if variant is not None and variant is not Variant.SYS3:
            raise ValidationError(div_load_variant.format(expected=Variant.SYS3.value, variant=variant.value))
        if band is not None:
            near = m.d_gamma < band
            nodal = np.asarray(G1(m.vertices) if callable(G1) else G1)
            count = int(np.count_nonzero(np.abs(nodal[near]).max(axis=1) > 0.0)) if near.any() else 0
            if count:
                raise SupportViolationError(support_violation.format(count=count, tau=band))
        rhs += dm.P1.T @ gradient_load(m, G1)
    if h is not None:
        rhs += dm.P1.T @ boundary_load(m, h)
    return rhs


def imaginary_coercivity(system: BlockSystem, samples: int = 20, seed: int = 0) -> float:
    """Smallest Im a(phi, phi) / (delta ||phi||_X^2) over random discrete phi."""
    rng = np.random.default_rng(seed)
    dm, mesh = system.dofmap, system.mesh
    h1 = stiffness_matrix(mesh) + system.blocks.M
    worst = np.inf
    for _ in range(samples):
        phi = rng.standard_normal(dm.total) + 1j * rng.standard_normal(dm.total)
        form = np.vdot(phi, system.matrix @ phi)
        u1, u2 = dm.P1 @ phi, dm.P2 @ phi
        norm2 = float(np.real(np.vdot(u1, h1 @ u1) + np.vdot(u2, h1 @ u2)))
        worst = min(worst, float(form.imag) / (system.delta * norm2))
    return worst
