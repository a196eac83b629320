"""Named coefficient sets."""
from __future__ import annotations

import numpy as np
import pytest
from typing_extensions import Self

from itelab.exceptions import ValidationError
from itelab.geometry import Domain
from itelab.presets import graded_alpha, identity, resolve_preset, thm2_case


class TestPresets:
    """Preset parsing and profiles."""

    def test_resolve_contrast(self: Self) -> None:
        """Arguments are read in order (a1, a2, s1, s2)."""
        cs = resolve_preset("contrast(2, 1, 3, 1)", Domain.unit_square())
        assert cs.domain == Domain.unit_square()
        point = np.array([0.5, 0.5])
        assert np.allclose(cs.A1(point), 2.0 * np.eye(2))
        assert cs.S1(point) == pytest.approx(3.0)

    @pytest.mark.parametrize("text", ["nope(1)", "contrast(1, 2)", "contrast(a, b, c, d)", "contrast(1,"])
    def test_resolve_rejects(self: Self, text: str) -> None:
        """Unknown names, wrong arity and bad numbers are validation errors."""
        with pytest.raises(ValidationError):
            resolve_preset(text)

    def test_graded_alpha_gap(self: Self) -> None:
        """A1 - A2 equals c d^alpha."""
        cs = graded_alpha(2.0, 1.0)
        points = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.9]])
        gap = cs.A1(points)[:, 0, 0] - cs.A2(points)[:, 0, 0]
        assert np.allclose(gap, 2.0 * np.array([1.0, 0.5, 0.1]))

    def test_thm2_case_contrast_in_sigma(self: Self) -> None:
        """Only S1 differs from the background."""
        cs = thm2_case(1.0, 1.0)
        points = np.array([[0.5, 0.0]])
        assert np.allclose(cs.A1(points), cs.A2(points))
        assert cs.S1(points)[0] == pytest.approx(1.5)

    def test_identity_media(self: Self) -> None:
        """Identical sides."""
        cs = identity()
        point = np.array([0.1, 0.1])
        assert np.allclose(cs.A1(point), cs.A2(point))
        assert cs.S1(point) == cs.S2(point)
