"""Domains, coefficient fields and diffeomorphisms."""
from __future__ import annotations

import numpy as np
import pytest
from typing_extensions import Self

from itelab.exceptions import DomainViolationError, EllipticityError, InvalidDiffeomorphismError, ValidationError
from itelab.geometry import Diffeomorphism, Domain, MatrixField, dist_to_boundary, eval_coefficients, pushforward
from itelab.presets import contrast, pullback_media, radial_diffeomorphism


class TestDomain:
    """Boundary distance and sampling."""

    def test_distance_of_the_builtin_domains(self: Self) -> None:
        """Distance is exact for the disk, the square and the strip."""
        assert dist_to_boundary(Domain.unit_disk(), [0.5, 0.0]) == pytest.approx(0.5)
        assert dist_to_boundary(Domain.unit_square(), [0.25, 0.5]) == pytest.approx(0.25)
        assert dist_to_boundary(Domain.strip(2.0, 5.0), [1.0, 3.0]) == pytest.approx(3.0)
        assert dist_to_boundary(Domain.unit_disk(), [1.0, 0.0]) == 0.0

    def test_polygon_distance(self: Self) -> None:
        """A square given as a polygon agrees with the unit square."""
        polygon = Domain.polygon([[0, 0], [1, 0], [1, 1], [0, 1]])
        points = np.array([[0.1, 0.5], [0.5, 0.5], [0.7, 0.9]])
        assert np.allclose(polygon.distance(points), Domain.unit_square().distance(points))
        assert polygon.area == pytest.approx(1.0)

    def test_polygon_must_be_positively_oriented(self: Self) -> None:
        """Clockwise vertex loops are rejected."""
        with pytest.raises(ValidationError):
            Domain.polygon([[0, 0], [0, 1], [1, 1], [1, 0]])

    def test_annulus_is_auxiliary(self: Self) -> None:
        """The annulus is not simply connected."""
        annulus = Domain.annulus(0.5)
        assert not annulus.simply_connected
        assert annulus.auxiliary
        with pytest.raises(ValidationError):
            Domain.annulus(1.5)

    def test_samples_stay_in_the_band(self: Self) -> None:
        """Band sampling keeps every point within the requested distance."""
        dom = Domain.unit_disk()
        points = dom.sample_interior(500, seed=3, band=0.2)
        assert len(points) == 500
        assert np.all(dom.contains(points))
        assert np.all(dom.distance(points) < 0.2)


class TestCoefficients:
    """Evaluation and validation of media."""

    def test_eval_coefficients_inside(self: Self) -> None:
        """Constant media evaluate to their values."""
        a1, a2, s1, s2 = eval_coefficients(contrast(2.0, 1.0, 3.0, 1.0), [0.1, 0.2])
        assert np.allclose(a1, 2.0 * np.eye(2))
        assert np.allclose(a2, np.eye(2))
        assert (s1, s2) == (3.0, 1.0)

    def test_eval_coefficients_outside(self: Self) -> None:
        """Points outside the closed domain are refused."""
        with pytest.raises(DomainViolationError):
            eval_coefficients(contrast(2.0, 1.0, 3.0, 1.0), [1.5, 0.0])

    def test_asymmetric_matrix_is_rejected(self: Self) -> None:
        """Symmetry is checked sample by sample."""
        skew = np.array([[1.0, 0.5], [0.0, 1.0]])
        field = MatrixField(lambda x: np.broadcast_to(skew, (len(x), 2, 2)).copy(), 4.0, "A1")
        with pytest.raises(EllipticityError):
            field.check(np.array([[0.1, 0.1]]))

    def test_validate_accepts_contrast(self: Self) -> None:
        """A contrast preset satisfies its own bound."""
        contrast(2.0, 1.0, 2.0, 1.0).validate(count=500)


class TestDiffeomorphism:
    """Boundary fixing maps and pushforwards."""

    def test_radial_map_fixes_the_boundary(self: Self) -> None:
        """The radial map validates and its inverse undoes it."""
        F = radial_diffeomorphism(0.1)
        dom = Domain.unit_disk()
        F.validate(dom, count=500)
        points = dom.sample_interior(50, seed=1)
        assert np.allclose(F.inverse(F.map(points)), points, atol=1e-10)

    def test_folding_map_is_rejected(self: Self) -> None:
        """A map with negative Jacobian fails validation."""
        flip = Diffeomorphism(
            lambda x: x * np.array([1.0, -1.0]),
            lambda x: np.broadcast_to(np.diag([1.0, -1.0]), (len(x), 2, 2)),
        )
        with pytest.raises(InvalidDiffeomorphismError):
            flip.validate(Domain.unit_disk(), count=200)

    def test_pushforward_of_pulled_back_media(self: Self) -> None:
        """Pulling back a constant pair and pushing forward recovers it."""
        F = radial_diffeomorphism(0.1)
        target = np.array([[2.0, 0.0], [0.0, 3.0]])
        cs = pullback_media(F, target, 2.0, contrast(1.0, 1.0, 1.0, 1.0))
        A, S = pushforward(F, cs.A1, cs.S1)
        points = Domain.unit_disk().sample_interior(20, seed=2)
        assert np.allclose(A(points), target, atol=1e-8)
        assert np.allclose(S(points), 2.0, atol=1e-8)

    def test_identity_pushforward(self: Self) -> None:
        """The identity map leaves media unchanged."""
        cs = contrast(2.0, 1.0, 3.0, 1.0)
        A, S = pushforward(Diffeomorphism.identity(), cs.A1, cs.S1)
        points = np.array([[0.2, 0.1], [-0.3, 0.4]])
        assert np.allclose(A(points), 2.0 * np.eye(2))
        assert np.allclose(S(points), 3.0)
