"""Domains, coefficient fields and change of variables."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Callable

import numpy as np
from loguru import logger
from scipy.stats import qmc

from .constant import BOUNDARY_NUDGE, NEWTON_STEPS, NEWTON_TOL, SYMMETRY_TOL
from .exceptions import (
    DomainViolationError,
    EllipticityError,
    InvalidDiffeomorphismError,
    InversionError,
    ValidationError,
)
from .strings import (
    bad_jacobian,
    boundary_moved,
    newton_failed,
    not_elliptic,
    not_symmetric,
    outside_domain,
)

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray
    from typing_extensions import Self

    FloatArray = NDArray[np.float64]


class DomainKind(str, Enum):
    """Supported domain shapes."""

    UNIT_DISK = "unit_disk"
    UNIT_SQUARE = "unit_square"
    ANNULUS = "annulus"
    POLYGON = "polygon"
    STRIP = "strip"


def _segment_distance(points: FloatArray, start: FloatArray, end: FloatArray) -> FloatArray:
    """Distance from every point to every segment, shape (n_points, n_segments)."""
    edge = end - start
    rel = points[:, None, :] - start[None, :, :]
    length2 = np.einsum("ij,ij->i", edge, edge)
    t = np.clip(np.einsum("pij,ij->pi", rel, edge) / length2, 0.0, 1.0)
    foot = start[None, :, :] + t[..., None] * edge[None, :, :]
    return np.asarray(np.linalg.norm(points[:, None, :] - foot, axis=-1))


@dataclass(frozen=True)
class Domain(object):
    """A bounded planar domain with an analytic boundary distance.

    The strip is an auxiliary domain: it is periodic in x with the given period, has depth in t, and its
    transmission boundary is the bottom line t = 0.
    """

    kind: DomainKind
    r_inner: float = 0.0
    vertices: tuple[tuple[float, float], ...] = ()
    period: float = 0.0
    depth: float = 0.0

    @classmethod
    def unit_disk(cls: type[Self]) -> Self:
        """Unit disk centered at the origin."""
        return cls(DomainKind.UNIT_DISK)

    @classmethod
    def unit_square(cls: type[Self]) -> Self:
        """Unit square [0, 1]^2."""
        return cls(DomainKind.UNIT_SQUARE)

    @classmethod
    def annulus(cls: type[Self], r_inner: float) -> Self:
        """Annulus r_inner < |x| < 1, accepted for auxiliary runs only."""
        if not 0.0 < r_inner < 1.0:
            msg = f"Annulus inner radius must lie in (0, 1), got {r_inner}."
            raise ValidationError(msg)
        logger.warning("Annulus is not simply connected; use it for auxiliary runs only.")
        return cls(DomainKind.ANNULUS, r_inner=r_inner)

    @classmethod
    def polygon(cls: type[Self], vertices: ArrayLike) -> Self:
        """Simple polygon given by a positively oriented vertex loop."""
        pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if len(pts) < 3:  # noqa: PLR2004
            msg = "A polygon needs at least three vertices."
            raise ValidationError(msg)
        nxt = np.roll(pts, -1, axis=0)
        signed_area = 0.5 * float(np.sum(pts[:, 0] * nxt[:, 1] - nxt[:, 0] * pts[:, 1]))
        if signed_area <= 0.0:
            msg = "Polygon vertices must be positively oriented."
            raise ValidationError(msg)
        if not _is_simple(pts):
            msg = "Polygon boundary intersects itself."
            raise ValidationError(msg)
        return cls(DomainKind.POLYGON, vertices=tuple((float(x), float(y)) for x, y in pts))

    @classmethod
    def strip(cls: type[Self], period: float, depth: float) -> Self:
        """Lateral periodic strip [0, period) x [0, depth]."""
        if period <= 0.0 or depth <= 0.0:
            msg = f"Strip needs a positive period and depth, got {period} and {depth}."
            raise ValidationError(msg)
        return cls(DomainKind.STRIP, period=period, depth=depth)

    @property
    def simply_connected(self: Self) -> bool:
        """Whether the domain is simply connected."""
        return self.kind is not DomainKind.ANNULUS

    @property
    def auxiliary(self: Self) -> bool:
        """Whether the domain is for auxiliary runs only."""
        return self.kind in (DomainKind.ANNULUS, DomainKind.STRIP)

    @property
    def polygon_vertices(self: Self) -> FloatArray:
        """Polygon vertices as an array."""
        return np.asarray(self.vertices, dtype=float).reshape(-1, 2)

    @property
    def area(self: Self) -> float:
        """Exact area."""
        if self.kind is DomainKind.UNIT_DISK:
            return float(np.pi)
        if self.kind is DomainKind.UNIT_SQUARE:
            return 1.0
        if self.kind is DomainKind.ANNULUS:
            return float(np.pi * (1.0 - self.r_inner**2))
        if self.kind is DomainKind.STRIP:
            return self.period * self.depth
        pts = self.polygon_vertices
        nxt = np.roll(pts, -1, axis=0)
        return 0.5 * float(np.sum(pts[:, 0] * nxt[:, 1] - nxt[:, 0] * pts[:, 1]))

    @property
    def bounding_box(self: Self) -> tuple[FloatArray, FloatArray]:
        """Lower and upper corners of the bounding box."""
        if self.kind in (DomainKind.UNIT_DISK, DomainKind.ANNULUS):
            return np.array([-1.0, -1.0]), np.array([1.0, 1.0])
        if self.kind is DomainKind.UNIT_SQUARE:
            return np.zeros(2), np.ones(2)
        if self.kind is DomainKind.STRIP:
            return np.zeros(2), np.array([self.period, self.depth])
        pts = self.polygon_vertices
        return pts.min(axis=0), pts.max(axis=0)

    @property
    def diameter(self: Self) -> float:
        """Diameter (bounding box diagonal for polygons and strips)."""
        if self.kind in (DomainKind.UNIT_DISK, DomainKind.ANNULUS):
            return 2.0
        low, high = self.bounding_box
        return float(np.linalg.norm(high - low))

    def contains(self: Self, points: ArrayLike, tol: float = 1e-12) -> NDArray[np.bool_]:
        """Whether each point lies in the closure of the domain."""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind is DomainKind.POLYGON:
            inside = _point_in_polygon(x, self.polygon_vertices)
            return np.asarray(inside | (self.distance(x, signed=False) <= tol))
        return np.asarray(self._signed_distance(x) >= -tol)

    def _signed_distance(self: Self, x: FloatArray) -> FloatArray:
        r = np.linalg.norm(x, axis=1)
        if self.kind is DomainKind.UNIT_DISK:
            return np.asarray(1.0 - r)
        if self.kind is DomainKind.UNIT_SQUARE:
            return np.minimum.reduce([x[:, 0], 1.0 - x[:, 0], x[:, 1], 1.0 - x[:, 1]])
        if self.kind is DomainKind.ANNULUS:
            return np.minimum(1.0 - r, r - self.r_inner)
        if self.kind is DomainKind.STRIP:
            return np.minimum(x[:, 1], self.depth - x[:, 1])
        pts = self.polygon_vertices
        dist = _segment_distance(x, pts, np.roll(pts, -1, axis=0)).min(axis=1)
        return np.where(_point_in_polygon(x, pts), dist, -dist)

    def distance(self: Self, points: ArrayLike, *, signed: bool = False) -> FloatArray:
        """Distance to the transmission boundary, vectorized over rows.

        For the strip the transmission boundary is t = 0, so the distance is t itself.
        """
        x = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind is DomainKind.STRIP:
            d = x[:, 1].copy()
        elif self.kind is DomainKind.POLYGON:
            pts = self.polygon_vertices
            d = _segment_distance(x, pts, np.roll(pts, -1, axis=0)).min(axis=1)
            if signed:
                d = np.where(_point_in_polygon(x, pts), d, -d)
        else:
            d = self._signed_distance(x)
        return d if signed else np.maximum(d, 0.0)

    def project_to_boundary(self: Self, points: ArrayLike) -> FloatArray:
        """Closest boundary point for curved boundaries; other points are returned unchanged."""
        x = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        r = np.linalg.norm(x, axis=1)
        if self.kind is DomainKind.UNIT_DISK:
            return np.asarray(x / r[:, None])
        if self.kind is DomainKind.ANNULUS:
            inner = np.abs(r - self.r_inner) < np.abs(r - 1.0)
            target = np.where(inner, self.r_inner, 1.0)
            return np.asarray(x * (target / r)[:, None])
        return x

    def boundary_samples(self: Self, count: int) -> tuple[FloatArray, FloatArray, NDArray[np.bool_]]:
        """Evenly spaced boundary points with outward normals and a corner flag."""
        if self.kind in (DomainKind.UNIT_DISK, DomainKind.ANNULUS):
            theta = 2.0 * np.pi * np.arange(count) / count
            points = np.column_stack([np.cos(theta), np.sin(theta)])
            return points, points.copy(), np.zeros(count, dtype=bool)
        if self.kind is DomainKind.STRIP:
            x = self.period * np.arange(count) / count
            points = np.column_stack([x, np.zeros(count)])
            normals = np.tile([0.0, -1.0], (count, 1))
            return points, normals, np.zeros(count, dtype=bool)
        loop = (
            np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
            if self.kind is DomainKind.UNIT_SQUARE
            else self.polygon_vertices
        )
        return _polyline_samples(loop, count)

    def sample_interior(self: Self, count: int, seed: int = 0, band: float | None = None) -> FloatArray:
        """Quasi-random points in the domain, optionally restricted to the band d < band."""
        low, high = self.bounding_box
        sampler = qmc.Halton(d=2, scramble=True, seed=seed)
        found: list[FloatArray] = []
        total = 0
        for _ in range(64):
            batch = qmc.scale(sampler.random(max(4 * count, 256)), low, high)
            keep = self.contains(batch, tol=0.0)
            if band is not None:
                keep &= self.distance(batch) < band
            found.append(batch[keep])
            total += int(keep.sum())
            if total >= count:
                break
        return np.concatenate(found)[:count]

    def nudge_inward(self: Self, points: FloatArray) -> tuple[FloatArray, NDArray[np.bool_]]:
        """Move points with zero boundary distance inward by a tiny step and flag them."""
        d = self.distance(points)
        flagged = d <= 0.0
        if not flagged.any():
            return points, flagged
        moved = points.copy()
        eps = 1e-7
        for i in np.flatnonzero(flagged):
            grad = np.zeros(2)
            for axis in range(2):
                step = np.zeros(2)
                step[axis] = eps
                grad[axis] = (
                    self.distance(points[i] + step, signed=True)[0] - self.distance(points[i] - step, signed=True)[0]
                ) / (2 * eps)
            norm = np.linalg.norm(grad)
            direction = grad / norm if norm > 0 else -points[i] / max(np.linalg.norm(points[i]), 1.0)
            moved[i] = points[i] + BOUNDARY_NUDGE * direction
        logger.warning(f"Projected {int(flagged.sum())} boundary samples inward by {BOUNDARY_NUDGE:g}.")
        return moved, flagged


def _is_simple(pts: FloatArray) -> bool:
    """Whether non adjacent polygon edges never intersect."""
    n = len(pts)

    def cross(o: FloatArray, a: FloatArray, b: FloatArray) -> float:
        return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))

    for i in range(n):
        p1, p2 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j in (i, (i + 1) % n) or (j + 1) % n == i:
                continue
            q1, q2 = pts[j], pts[(j + 1) % n]
            if cross(p1, p2, q1) * cross(p1, p2, q2) < 0 and cross(q1, q2, p1) * cross(q1, q2, p2) < 0:
                return False
    return True


def _point_in_polygon(x: FloatArray, pts: FloatArray) -> NDArray[np.bool_]:
    """Even-odd ray casting test."""
    inside = np.zeros(len(x), dtype=bool)
    nxt = np.roll(pts, -1, axis=0)
    for (x1, y1), (x2, y2) in zip(pts, nxt):
        crosses = (y1 > x[:, 1]) != (y2 > x[:, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = x1 + (x[:, 1] - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x[:, 0] < x_cross)
    return inside


def _polyline_samples(loop: FloatArray, count: int) -> tuple[FloatArray, FloatArray, NDArray[np.bool_]]:
    nxt = np.roll(loop, -1, axis=0)
    lengths = np.linalg.norm(nxt - loop, axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
    s = cumulative[-1] * np.arange(count) / count
    edge = np.clip(np.searchsorted(cumulative, s, side="right") - 1, 0, len(loop) - 1)
    t = (s - cumulative[edge]) / lengths[edge]
    points = loop[edge] + t[:, None] * (nxt[edge] - loop[edge])
    tangent = (nxt[edge] - loop[edge]) / lengths[edge][:, None]
    normals = np.column_stack([tangent[:, 1], -tangent[:, 0]])
    corner = np.isclose(t, 0.0, atol=1e-12)
    return points, normals, corner


@dataclass(frozen=True)
class MatrixField(object):
    """Symmetric matrix valued coefficient, evaluated on rows of points."""

    evaluator: Callable[[FloatArray], FloatArray]
    lambda_bound: float = 1.0
    name: str = "A"

    @classmethod
    def constant(cls: type[Self], matrix: ArrayLike, lambda_bound: float | None = None, name: str = "A") -> Self:
        """Field that takes the same value everywhere."""
        value = np.asarray(matrix, dtype=float)
        eig = np.linalg.eigvalsh(value)
        bound = lambda_bound or max(float(eig.max()), 1.0 / float(eig.min()), 1.0)
        return cls(lambda x: np.broadcast_to(value, (len(x), *value.shape)).copy(), bound, name)

    def __call__(self: Self, points: ArrayLike) -> FloatArray:
        """Evaluate at (n, d) points, or a single point."""
        x = np.asarray(points, dtype=float)
        if x.ndim == 1:
            return self.evaluator(x[None, :])[0]
        return self.evaluator(x)

    def check(self: Self, points: FloatArray) -> None:
        """Verify symmetry and the ellipticity bound at the sample points."""
        values = self(points)
        scale = np.maximum(np.abs(values).max(axis=(1, 2)), 1e-300)
        asym = np.abs(values - np.swapaxes(values, 1, 2)).max(axis=(1, 2)) / scale
        bad = np.flatnonzero(asym > SYMMETRY_TOL)
        if bad.size:
            i = int(bad[0])
            raise EllipticityError(not_symmetric.format(name=self.name, point=points[i], asym=asym[i]))
        eig = np.linalg.eigvalsh(0.5 * (values + np.swapaxes(values, 1, 2)))
        _check_range(self.name, eig.min(axis=1), eig.max(axis=1), self.lambda_bound, points)


@dataclass(frozen=True)
class ScalarField(object):
    """Real positive coefficient, evaluated on rows of points."""

    evaluator: Callable[[FloatArray], FloatArray]
    lambda_bound: float = 1.0
    name: str = "S"

    @classmethod
    def constant(cls: type[Self], value: float, lambda_bound: float | None = None, name: str = "S") -> Self:
        """Field that takes the same value everywhere."""
        bound = lambda_bound or max(value, 1.0 / value, 1.0)
        return cls(lambda x: np.full(len(x), float(value)), bound, name)

    def __call__(self: Self, points: ArrayLike) -> FloatArray:
        """Evaluate at (n, d) points, or a single point."""
        x = np.asarray(points, dtype=float)
        if x.ndim == 1:
            return self.evaluator(x[None, :])[0]  # type: ignore[no-any-return]
        return self.evaluator(x)

    def check(self: Self, points: FloatArray) -> None:
        """Verify the bound [1/lambda, lambda] at the sample points."""
        values = self(points)
        _check_range(self.name, values, values, self.lambda_bound, points)


def _check_range(name: str, low: FloatArray, high: FloatArray, bound: float, points: FloatArray) -> None:
    tol = SYMMETRY_TOL * bound
    bad = np.flatnonzero((low < 1.0 / bound - tol) | (high > bound + tol))
    if bad.size:
        i = int(bad[0])
        value = low[i] if low[i] < 1.0 / bound - tol else high[i]
        raise EllipticityError(
            not_elliptic.format(name=name, low=1.0 / bound, high=bound, point=points[i], value=value),
        )


@dataclass(frozen=True)
class CoefficientSet(object):
    """The media (A1, A2, S1, S2) of a transmission problem on a domain."""

    A1: MatrixField
    A2: MatrixField
    S1: ScalarField
    S2: ScalarField
    lambda_bound: float
    domain: Domain = field(default_factory=Domain.unit_disk)
    name: str = "custom"

    def validate(self: Self, count: int = 10_000, seed: int = 0) -> None:
        """Check every member against the shared bound on quasi-random samples."""
        points = self.domain.sample_interior(count, seed=seed)
        for member in (self.A1, self.A2):
            replace(member, lambda_bound=self.lambda_bound).check(points)
        for scalar in (self.S1, self.S2):
            replace(scalar, lambda_bound=self.lambda_bound).check(points)

    def with_side_one(self: Self, A1: MatrixField, S1: ScalarField) -> CoefficientSet:
        """Copy with the first medium replaced."""
        return replace(self, A1=A1, S1=S1, name=f"{self.name}|pushed")


def eval_coefficients(cs: CoefficientSet, x: ArrayLike) -> tuple[FloatArray, FloatArray, float, float]:
    """Evaluate (A1, A2, S1, S2) at a single point of the closed domain."""
    point = np.asarray(x, dtype=float)
    if not cs.domain.contains(point)[0]:
        raise DomainViolationError(outside_domain.format(point=point, kind=cs.domain.kind.value))
    return cs.A1(point), cs.A2(point), float(cs.S1(point)), float(cs.S2(point))


def dist_to_boundary(dom: Domain, x: ArrayLike) -> float:
    """Distance from a single point to the boundary."""
    return float(dom.distance(np.asarray(x, dtype=float))[0])


@dataclass(frozen=True)
class Diffeomorphism(object):
    """A map of the domain onto itself that fixes the boundary."""

    map: Callable[[FloatArray], FloatArray]
    jacobian: Callable[[FloatArray], FloatArray]
    boundary_fixed_tol: float = 1e-10

    @classmethod
    def identity(cls: type[Self]) -> Self:
        """Identity map."""
        return cls(lambda x: x.copy(), lambda x: np.broadcast_to(np.eye(x.shape[1]), (len(x), x.shape[1], x.shape[1])))

    def validate(self: Self, dom: Domain, count: int = 2000) -> None:
        """Check det DF > 0 inside and F(x) = x on the boundary."""
        inside = dom.sample_interior(count)
        det = np.linalg.det(self.jacobian(inside))
        bad = np.flatnonzero(det <= 0.0)
        if bad.size:
            i = int(bad[0])
            raise InvalidDiffeomorphismError(bad_jacobian.format(det=det[i], point=inside[i]))
        boundary, _, _ = dom.boundary_samples(max(count // 10, 64))
        shift = np.linalg.norm(self.map(boundary) - boundary, axis=1)
        worst = int(np.argmax(shift))
        if shift[worst] > self.boundary_fixed_tol:
            raise InvalidDiffeomorphismError(boundary_moved.format(point=boundary[worst], shift=shift[worst]))

    def inverse(self: Self, y: FloatArray) -> FloatArray:
        """Damped Newton inversion started from y."""
        x = y.copy()
        residual = self.map(x) - y
        err = np.linalg.norm(residual, axis=1)
        for step in range(NEWTON_STEPS):
            active = err > NEWTON_TOL * (1.0 + np.linalg.norm(y, axis=1))
            if not active.any():
                logger.debug(f"Newton inversion converged in {step} steps.")
                return x
            jac = self.jacobian(x[active])
            dx = np.linalg.solve(jac, residual[active][..., None])[..., 0]
            t = np.ones(int(active.sum()))
            for _ in range(30):
                trial = x[active] - t[:, None] * dx
                trial_err = np.linalg.norm(self.map(trial) - y[active], axis=1)
                worse = trial_err > err[active]
                if not worse.any():
                    break
                t = np.where(worse, 0.5 * t, t)
            x[active] = x[active] - t[:, None] * dx
            residual = self.map(x) - y
            err = np.linalg.norm(residual, axis=1)
        raise InversionError(newton_failed.format(steps=NEWTON_STEPS, residual=float(err.max())))


def pushforward(
    F: Diffeomorphism,
    A: MatrixField,
    S: ScalarField,
    lambda_bound: float | None = None,
) -> tuple[MatrixField, ScalarField]:
    """Fields y -> DF A DF^T / det DF and y -> S / det DF, evaluated at x = F^-1(y)."""

    def _pull(y: FloatArray) -> tuple[FloatArray, FloatArray]:
        x = F.inverse(y)
        jac = F.jacobian(x)
        det = np.linalg.det(jac)
        bad = np.flatnonzero(det <= 0.0)
        if bad.size:
            i = int(bad[0])
            raise InvalidDiffeomorphismError(bad_jacobian.format(det=det[i], point=x[i]))
        return x, jac

    def matrix(y: FloatArray) -> FloatArray:
        x, jac = _pull(y)
        det = np.linalg.det(jac)
        return np.asarray(jac @ A(x) @ np.swapaxes(jac, 1, 2) / det[:, None, None])

    def scalar(y: FloatArray) -> FloatArray:
        x, jac = _pull(y)
        return np.asarray(S(x) / np.linalg.det(jac))

    return (
        MatrixField(matrix, lambda_bound or A.lambda_bound, f"F*{A.name}"),
        ScalarField(scalar, lambda_bound or S.lambda_bound, f"F*{S.name}"),
    )
