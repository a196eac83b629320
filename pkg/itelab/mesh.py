"""Conforming P1 triangulations with the boundary distance field."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np
from loguru import logger
from scipy import sparse
from scipy.spatial import Delaunay

from .constant import MIN_ANGLE_DEG, MIN_AREA, SMOOTHING_PASSES
from .exceptions import MeshQualityError, ValidationError
from .geometry import Domain, DomainKind
from .strings import invalid_resolution, min_angle_failed, strip_refine

if TYPE_CHECKING:
    from numpy.typing import NDArray
    from typing_extensions import Self

    FloatArray = NDArray[np.float64]
    IntArray = NDArray[np.int64]


@dataclass(frozen=True, eq=False)
class Mesh(object):
    """Triangulation of a domain; vertices on the transmission boundary carry d_gamma = 0."""

    domain: Domain
    vertices: FloatArray
    triangles: IntArray
    boundary_edges: IntArray
    normals: FloatArray
    is_boundary: NDArray[np.bool_]
    d_gamma: FloatArray
    h_max: float
    dirichlet: NDArray[np.bool_] = field(default_factory=lambda: np.zeros(0, dtype=bool))
    periodic_master: IntArray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n_vertices(self: Self) -> int:
        """Vertex count."""
        return len(self.vertices)

    @property
    def n_triangles(self: Self) -> int:
        """Triangle count."""
        return len(self.triangles)

    @cached_property
    def areas(self: Self) -> FloatArray:
        """Triangle areas."""
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return np.asarray(0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]))

    @cached_property
    def edges(self: Self) -> IntArray:
        """Unique undirected edges, sorted vertex pairs."""
        return np.unique(np.sort(_directed_edges(self.triangles), axis=1), axis=0)

    @property
    def min_angle(self: Self) -> float:
        """Smallest interior angle in degrees."""
        return _min_angle(self.vertices, self.triangles)

    @property
    def masters(self: Self) -> IntArray:
        """Vertex each vertex is identified with (itself unless periodic)."""
        if self.periodic_master.size:
            return self.periodic_master
        return np.arange(self.n_vertices)

    @property
    def fixed(self: Self) -> NDArray[np.bool_]:
        """Vertices with a homogeneous Dirichlet condition."""
        if self.dirichlet.size:
            return self.dirichlet
        return np.zeros(self.n_vertices, dtype=bool)

    def to_text(self: Self) -> str:
        """ASCII rendering: header, vertices, triangles, boundary edges with normals."""
        lines = [f"{self.n_vertices} {self.n_triangles} {len(self.boundary_edges)}"]
        lines.extend(
            f"{x:.17g} {y:.17g} {d:.17g} {int(b)}"
            for (x, y), d, b in zip(self.vertices, self.d_gamma, self.is_boundary)
        )
        lines.extend(f"{i} {j} {k}" for i, j, k in self.triangles)
        lines.extend(f"{i} {j} {nx:.17g} {ny:.17g}" for (i, j), (nx, ny) in zip(self.boundary_edges, self.normals))
        return "\n".join(lines) + "\n"


def read_mesh(text: str, domain: Domain) -> Mesh:
    """Parse the ASCII rendering written by ``Mesh.to_text``."""
    rows = [line.split() for line in text.strip().splitlines()]
    nv, nt, nbe = (int(v) for v in rows[0])
    vert = np.array([[float(v) for v in row] for row in rows[1 : 1 + nv]]).reshape(nv, 4)
    tris = np.array([[int(v) for v in row] for row in rows[1 + nv : 1 + nv + nt]], dtype=np.int64).reshape(nt, 3)
    bnd = rows[1 + nv + nt : 1 + nv + nt + nbe]
    edges = np.array([[int(row[0]), int(row[1])] for row in bnd], dtype=np.int64).reshape(nbe, 2)
    normals = np.array([[float(row[2]), float(row[3])] for row in bnd]).reshape(nbe, 2)
    vertices = vert[:, :2].copy()
    unique = np.unique(np.sort(_directed_edges(tris), axis=1), axis=0)
    lengths = np.linalg.norm(vertices[unique[:, 0]] - vertices[unique[:, 1]], axis=1)
    return Mesh(
        domain=domain,
        vertices=vertices,
        triangles=tris,
        boundary_edges=edges,
        normals=normals,
        is_boundary=vert[:, 3].astype(bool),
        d_gamma=vert[:, 2].copy(),
        h_max=float(lengths.max()),
    )


def _directed_edges(triangles: IntArray) -> IntArray:
    return np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])


def _min_angle(vertices: FloatArray, triangles: IntArray) -> float:
    p = vertices[triangles]
    worst = np.inf
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        worst = min(worst, float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))).min()))
    return worst


def _finish(
    domain: Domain,
    vertices: FloatArray,
    triangles: IntArray,
    *,
    on_gamma: NDArray[np.bool_] | None = None,
    dirichlet: NDArray[np.bool_] | None = None,
    periodic_master: IntArray | None = None,
) -> Mesh:
    """Orient triangles, find the boundary loop and annotate distances."""
    tris = np.asarray(triangles, dtype=np.int64).copy()
    p = vertices[tris]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    flip = signed < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    if np.abs(signed).min() <= MIN_AREA:
        msg = f"Degenerate triangle with area {np.abs(signed).min():.3e}."
        raise MeshQualityError(msg)

    directed = _directed_edges(tris)
    _, inverse, counts = np.unique(np.sort(directed, axis=1), axis=0, return_inverse=True, return_counts=True)
    if counts.max() > 2:  # noqa: PLR2004
        msg = "Mesh is not conforming: an edge is shared by more than two triangles."
        raise MeshQualityError(msg)
    boundary = directed[counts[inverse.ravel()] == 1]
    if on_gamma is not None:
        boundary = boundary[on_gamma[boundary[:, 0]] & on_gamma[boundary[:, 1]]]
    tangent = vertices[boundary[:, 1]] - vertices[boundary[:, 0]]
    normals = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / np.linalg.norm(tangent, axis=1)[:, None]

    is_boundary = np.zeros(len(vertices), dtype=bool)
    is_boundary[boundary.ravel()] = True
    d_gamma = domain.distance(vertices)
    d_gamma[is_boundary] = 0.0
    unique = np.unique(np.sort(directed, axis=1), axis=0)
    h_max = float(np.linalg.norm(vertices[unique[:, 0]] - vertices[unique[:, 1]], axis=1).max())
    return Mesh(
        domain=domain,
        vertices=vertices,
        triangles=tris,
        boundary_edges=boundary,
        normals=normals,
        is_boundary=is_boundary,
        d_gamma=d_gamma,
        h_max=h_max,
        dirichlet=dirichlet if dirichlet is not None else np.zeros(0, dtype=bool),
        periodic_master=periodic_master if periodic_master is not None else np.zeros(0, dtype=np.int64),
    )


def _smooth(vertices: FloatArray, triangles: IntArray, fixed: NDArray[np.bool_], passes: int) -> FloatArray:
    """Laplacian smoothing of the free vertices."""
    edges = np.unique(np.sort(_directed_edges(triangles), axis=1), axis=0)
    n = len(vertices)
    ones = np.ones(2 * len(edges))
    adj = sparse.coo_matrix(
        (ones, (np.concatenate([edges[:, 0], edges[:, 1]]), np.concatenate([edges[:, 1], edges[:, 0]]))),
        shape=(n, n),
    ).tocsr()
    degree = np.asarray(adj.sum(axis=1)).ravel()
    out = vertices.copy()
    for _ in range(passes):
        averaged = (adj @ out) / degree[:, None]
        out[~fixed] = averaged[~fixed]
    return out


def _quality_gate(mesh: Mesh) -> Mesh:
    angle = mesh.min_angle
    if angle < MIN_ANGLE_DEG:
        raise MeshQualityError(min_angle_failed.format(angle=angle, gate=MIN_ANGLE_DEG))
    return mesh


def _square(n: int) -> tuple[FloatArray, IntArray]:
    grid = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(grid, grid)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    return vertices, _grid_triangles(n, n)


def _grid_triangles(nx: int, ny: int) -> IntArray:
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    v00 = (j * (nx + 1) + i).ravel()
    v10, v01 = v00 + 1, v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    return np.asarray(np.concatenate([lower, upper]), dtype=np.int64)


def _disk(rings: int) -> tuple[FloatArray, IntArray]:
    """Concentric rings; ring k has 6k vertices so the boundary is a 6N-gon."""
    # 6N sides rather than 6 * 4^ceil(log2 n): the triangle count is 6 N^2 and refinement stays nested.
    points = [np.zeros((1, 2))]
    starts = [0]
    for k in range(1, rings + 1):
        theta = 2.0 * np.pi * np.arange(6 * k) / (6 * k)
        points.append(k / rings * np.column_stack([np.cos(theta), np.sin(theta)]))
        starts.append(starts[-1] + len(points[-2]))
    triangles: list[tuple[int, int, int]] = []
    for k in range(1, rings + 1):
        inner_n, outer_n = max(6 * (k - 1), 1), 6 * k
        inner0, outer0 = starts[k - 1], starts[k]
        i, j = (inner_n if k == 1 else 0), 0
        while i < inner_n or j < outer_n:
            next_inner = 2.0 * np.pi * (i + 1) / inner_n if k > 1 else np.inf
            next_outer = 2.0 * np.pi * (j + 1) / outer_n
            a = inner0 + i % inner_n
            b = outer0 + j % outer_n
            if j < outer_n and (next_outer <= next_inner + 1e-12 or i >= inner_n):
                triangles.append((a, b, outer0 + (j + 1) % outer_n))
                j += 1
            else:
                triangles.append((a, b, inner0 + (i + 1) % inner_n))
                i += 1
    return np.concatenate(points), np.asarray(triangles, dtype=np.int64)


def _delaunay(domain: Domain, n: int) -> tuple[FloatArray, IntArray, NDArray[np.bool_]]:
    """Boundary samples plus a triangular lattice, cut back to the domain."""
    h = float(np.sqrt(domain.area)) / n
    loops: list[FloatArray] = []
    if domain.kind is DomainKind.ANNULUS:
        for radius in (1.0, domain.r_inner):
            count = max(int(np.ceil(2.0 * np.pi * radius / h)), 12)
            theta = 2.0 * np.pi * np.arange(count) / count
            loops.append(radius * np.column_stack([np.cos(theta), np.sin(theta)]))
    else:
        pts = domain.polygon_vertices
        for a, b in zip(pts, np.roll(pts, -1, axis=0)):
            count = max(int(np.ceil(np.linalg.norm(b - a) / h)), 1)
            t = np.arange(count)[:, None] / count
            loops.append(a + t * (b - a))
    boundary = np.concatenate(loops)
    low, high = domain.bounding_box
    rows: list[FloatArray] = []
    for r, y in enumerate(np.arange(low[1], high[1] + h, h * np.sqrt(3.0) / 2.0)):
        xs = np.arange(low[0] + (r % 2) * h / 2.0, high[0] + h, h)
        rows.append(np.column_stack([xs, np.full_like(xs, y)]))
    lattice = np.concatenate(rows)
    keep = domain.contains(lattice, tol=0.0) & (domain.distance(lattice) >= 0.5 * h)
    vertices = np.concatenate([boundary, lattice[keep]])
    simplices = Delaunay(vertices).simplices
    centroids = vertices[simplices].mean(axis=1)
    inside = domain.distance(centroids, signed=True) > 0.0
    fixed = np.zeros(len(vertices), dtype=bool)
    fixed[: len(boundary)] = True
    return vertices, np.asarray(simplices[inside], dtype=np.int64), fixed


def build_mesh(dom: Domain, n: int) -> Mesh:
    """Build the resolution-n mesh of a domain.

    The square is a structured grid with (n + 1)^2 vertices and 2 n^2 triangles. The disk uses N = 2^ceil(log2 n)
    concentric rings (6 N^2 triangles) smoothed with the boundary fixed. Polygons and the annulus are Delaunay
    triangulations of boundary samples and a triangular lattice.
    """
    if n < 1:
        raise ValidationError(invalid_resolution.format(n=n))
    if dom.kind is DomainKind.UNIT_SQUARE:
        vertices, triangles = _square(n)
        mesh = _finish(dom, vertices, triangles)
    elif dom.kind is DomainKind.UNIT_DISK:
        # boundary polygon has 6 * rings sides, see _disk
        rings = 2 ** int(np.ceil(np.log2(n)))
        vertices, triangles = _disk(rings)
        fixed = np.zeros(len(vertices), dtype=bool)
        fixed[-6 * rings :] = True
        vertices = _smooth(vertices, triangles, fixed, SMOOTHING_PASSES)
        mesh = _quality_gate(_finish(dom, vertices, triangles))
    elif dom.kind is DomainKind.STRIP:
        return build_strip_mesh(dom, n, n)
    else:
        vertices, triangles, fixed = _delaunay(dom, n)
        vertices = _smooth(vertices, triangles, fixed, SMOOTHING_PASSES)
        mesh = _quality_gate(_finish(dom, vertices, triangles))
    logger.info(f"Built {dom.kind.value} mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles.")
    return mesh


def build_strip_mesh(dom: Domain, nx: int, nt: int) -> Mesh:
    """Structured strip mesh: right column identified with the left one, top row clamped to zero."""
    if dom.kind is not DomainKind.STRIP:
        msg = "build_strip_mesh needs a strip domain."
        raise ValidationError(msg)
    if min(nx, nt) < 1:
        raise ValidationError(invalid_resolution.format(n=min(nx, nt)))
    xx, tt = np.meshgrid(np.linspace(0.0, dom.period, nx + 1), np.linspace(0.0, dom.depth, nt + 1))
    vertices = np.column_stack([xx.ravel(), tt.ravel()])
    column = np.tile(np.arange(nx + 1), nt + 1)
    row = np.repeat(np.arange(nt + 1), nx + 1)
    master = np.arange(len(vertices), dtype=np.int64)
    master[column == nx] -= nx
    mesh = _finish(
        dom,
        vertices,
        _grid_triangles(nx, nt),
        on_gamma=row == 0,
        dirichlet=row == nt,
        periodic_master=master,
    )
    logger.info(f"Built strip mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles.")
    return mesh


def refine(m: Mesh) -> Mesh:
    """Uniform red refinement; new boundary midpoints land on the true curved boundary."""
    if m.domain.kind is DomainKind.STRIP:
        raise ValidationError(strip_refine)
    edges, inverse = np.unique(np.sort(_directed_edges(m.triangles), axis=1), axis=0, return_inverse=True)
    mid_index = m.n_vertices + inverse.ravel().reshape(3, -1).T
    midpoints = 0.5 * (m.vertices[edges[:, 0]] + m.vertices[edges[:, 1]])
    on_boundary = m.is_boundary[edges[:, 0]] & m.is_boundary[edges[:, 1]]
    boundary_keys = {tuple(sorted(edge)) for edge in m.boundary_edges.tolist()}
    on_boundary &= np.array([tuple(edge) in boundary_keys for edge in edges.tolist()], dtype=bool)
    if on_boundary.any():
        midpoints[on_boundary] = m.domain.project_to_boundary(midpoints[on_boundary])
    vertices = np.concatenate([m.vertices, midpoints])
    a, b, c = m.triangles.T
    ab, bc, ca = mid_index.T
    triangles = np.concatenate(
        [
            np.column_stack([a, ab, ca]),
            np.column_stack([ab, b, bc]),
            np.column_stack([ca, bc, c]),
            np.column_stack([ab, bc, ca]),
        ],
    )
    refined = _finish(m.domain, vertices, triangles)
    logger.info(f"Refined mesh: {refined.n_vertices} vertices, {refined.n_triangles} triangles.")
    return refined
