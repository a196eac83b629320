"""Flat-interface transmission problem on a periodic lattice."""
from __future__ import annotations

import numpy as np
import pytest
from typing_extensions import Self

from itelab.exceptions import DegenerateDenominatorError, ValidationError
from itelab.halfspace import (
    HalfSpaceProblem,
    lattice_phi,
    mode_coefficients,
    mode_data,
    solve_halfspace,
    strip_fem_solution,
    verify_halfspace_estimate,
)

LAM_GRID = [1.0, 10.0, 100.0, 1000.0, 10000.0]


class TestModes:
    """Per-mode ODE data."""

    def test_decaying_root(self: Self) -> None:
        """eta solves the characteristic equation and decays into the half-space."""
        A = np.array([[2.0, 0.3], [0.3, 1.5]])
        side = mode_coefficients(A, 1.0, 3.0, [[0.0], [1.0], [-2.0]])
        assert np.all(side.residual(1.0, 3.0) < 1e-12)
        assert np.all(side.eta.real < 0)

    def test_lattice_datum(self: Self) -> None:
        """The default datum is 1 + 0.5 cos on the lattice."""
        phi = lattice_phi(8)
        assert phi.shape == (8,)
        assert phi[0] == pytest.approx(1.5)
        assert lattice_phi(8, d=3).shape == (8, 8)


class TestProblem:
    """Validation and matching."""

    def test_lambda_below_one(self: Self) -> None:
        """lambda >= 1 is required."""
        with pytest.raises(ValidationError):
            HalfSpaceProblem.template(lam=0.5)

    def test_lattice_power_of_two(self: Self) -> None:
        """Lattice sizes are powers of two."""
        with pytest.raises(ValidationError):
            HalfSpaceProblem.template(points=12)

    def test_matching_contrast(self: Self) -> None:
        """Equal media make the constant mode degenerate."""
        with pytest.raises(DegenerateDenominatorError) as error:
            mode_data(HalfSpaceProblem.template(1.0, 1.0, 1.0, 1.0, points=16))
        assert "contrast" in error.value.condition

    def test_conditions_hold(self: Self) -> None:
        """Isotropic contrast satisfies both conditions."""
        assert HalfSpaceProblem.template(points=16).conditions_hold() == (True, True)

    def test_jump_at_the_interface(self: Self) -> None:
        """v1 - v2 = phi at t = 0, also by direct summation."""
        p = HalfSpaceProblem.template(points=16, lam=4.0)
        solution = solve_halfspace(p, nt=11)
        assert np.allclose(solution.v1[:, 0] - solution.v2[:, 0], p.phi)
        x = np.arange(16) * p.period / 16
        e1, e2 = solution.evaluate(x, np.zeros(16))
        assert np.allclose(e1, solution.v1[:, 0])
        assert np.allclose(e2, solution.v2[:, 0])
        assert solution.tail < 1e-10

    def test_fields_decay(self: Self) -> None:
        """Both fields vanish deep in the half-space."""
        solution = solve_halfspace(HalfSpaceProblem.template(points=16, lam=4.0), nt=21)
        assert np.abs(solution.v1[:, -1]).max() < 1e-8
        assert np.abs(solution.v2[:, -1]).max() < 1e-8


class TestScaling:
    """Norm scaling in lambda."""

    def test_slope_and_ratio(self: Self) -> None:
        """||v|| decays like lambda^-1/4 and the estimate ratio stays bounded."""
        report = verify_halfspace_estimate(HalfSpaceProblem.template(), LAM_GRID)
        assert -0.30 <= report.slope <= -0.20
        assert report.bounded
        assert report.ratio_max <= 10.0
        assert len(report.rows) == len(LAM_GRID)

    def test_degenerate_media(self: Self) -> None:
        """Degenerate lambdas are reported, not raised."""
        report = verify_halfspace_estimate(HalfSpaceProblem.template(1.0, 1.0, 1.0, 1.0, points=16), [1.0, 2.0])
        assert report.degenerate == [1.0, 2.0]
        assert not report.bounded


class TestStrip:
    """Finite element cross-check."""

    def test_strip_matches_modes(self: Self) -> None:
        """P1 on the periodic strip agrees with the mode solution for a single cosine."""
        x = np.arange(64) * 2.0 * np.pi / 64
        p = HalfSpaceProblem(2.0 * np.eye(2), np.eye(2), 1.0, 1.0, 1.0, np.cos(x))
        comparison = strip_fem_solution(p, 128, 200, 10.0)
        assert comparison.relative_l2_error < 0.02
