"""Finite element matrices, the unknown numbering and the regularized systems."""
from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest
from typing_extensions import Self

from itelab.assembly import (
    FormCoefficients,
    Variant,
    assemble_rhs,
    assemble_system,
    boundary_load,
    build_dofmap,
    gradient_load,
    imaginary_coercivity,
    load_vector,
    mass_matrix,
    stiffness_matrix,
)
from itelab.exceptions import SupportViolationError, ValidationError

if TYPE_CHECKING:
    from itelab.geometry import CoefficientSet
    from itelab.mesh import Mesh


class TestMatrices:
    """Nodal stiffness, mass and load vectors."""

    def test_stiffness_kills_constants(self: Self, square_mesh: Mesh) -> None:
        """Constants are in the kernel of the stiffness matrix."""
        K = stiffness_matrix(square_mesh)
        assert np.abs(K @ np.ones(square_mesh.n_vertices)).max() < 1e-12
        assert np.allclose((K - K.T).toarray(), 0.0)

    def test_mass_integrates_the_area(self: Self, square_mesh: Mesh) -> None:
        """1^T M 1 is the area, scaled by a constant weight."""
        ones = np.ones(square_mesh.n_vertices)
        assert ones @ mass_matrix(square_mesh) @ ones == pytest.approx(1.0)
        assert ones @ mass_matrix(square_mesh, 2.5) @ ones == pytest.approx(2.5)

    def test_stiffness_energy_of_a_linear_field(self: Self, square_mesh: Mesh) -> None:
        """u = x has energy a |Omega|."""
        x = square_mesh.vertices[:, 0]
        K = stiffness_matrix(square_mesh, 3.0 * np.ones((square_mesh.n_triangles, 3, 2, 2)) * np.eye(2))
        assert x @ K @ x == pytest.approx(3.0)

    def test_load_vectors(self: Self, square_mesh: Mesh) -> None:
        """Area, perimeter and a vanishing divergence load for constant data."""
        assert load_vector(square_mesh, 1.0).sum().real == pytest.approx(1.0)
        assert boundary_load(square_mesh, np.ones(square_mesh.n_vertices)).sum().real == pytest.approx(4.0)
        G = np.tile([1.0, 2.0], (square_mesh.n_vertices, 1))
        assert abs(gradient_load(square_mesh, G).sum()) < 1e-12


class TestDofMap:
    """Numbering of the discrete space."""

    def test_boundary_unknowns_are_shared(self: Self, square_mesh: Mesh) -> None:
        """Both prolongations agree on the boundary."""
        dm = build_dofmap(square_mesh)
        assert dm.n_interior == 49
        assert dm.n_boundary == 32
        assert dm.total == 130
        x = np.random.default_rng(0).standard_normal(dm.total)
        u1, u2 = dm.P1 @ x, dm.P2 @ x
        assert np.array_equal(u1[square_mesh.is_boundary], u2[square_mesh.is_boundary])
        assert not np.allclose(u1, u2)


class TestFormCoefficients:
    """Multipliers per system."""

    def test_real_shift_absorption(self: Self) -> None:
        """sys1 adds +i delta to field 1 and -i delta to field 2."""
        c = FormCoefficients.for_variant(Variant.SYS1, 10.0, 0.1)
        assert c.k1 == 1 + 0.1j
        assert c.k2 == 1 - 0.1j
        assert c.z1 == 0.1j
        assert c.z2 == -0.1j
        assert c.mass_weight(1) == (10.0, 0.1j)

    def test_sigma_scaled_shift(self: Self) -> None:
        """sys3 scales the field 1 shift by 1 + delta."""
        c = FormCoefficients.for_variant(Variant.SYS3, 10.0, 0.5)
        assert c.s1 == pytest.approx(15.0)
        assert c.k1 == pytest.approx(1.5)

    @pytest.mark.parametrize(
        ("variant", "gamma0", "delta"),
        [
            (Variant.SYS1, 1j, 0.1),
            (Variant.SYS2, 2.0, 0.1),
            (Variant.SYS4, 2.0, 0.0),
            (Variant.SYS1, 2.0, 1.0),
            (Variant.SYS1, 2.0, -0.1),
        ],
    )
    def test_invalid_shift_or_absorption(self: Self, variant: Variant, gamma0: complex, delta: float) -> None:
        """Each system fixes the kind of its shift, and delta lies in [0, 1)."""
        with pytest.raises(ValidationError):
            FormCoefficients.for_variant(variant, gamma0, delta)


class TestSystem:
    """Assembled block systems."""

    def test_complex_symmetric(self: Self, disk_mesh: Mesh, disk_media: CoefficientSet) -> None:
        """The system matrix equals its transpose."""
        dm = build_dofmap(disk_mesh)
        system = assemble_system(disk_mesh, dm, disk_media, 10.0, 0.1, Variant.SYS1)
        assert system.matrix.shape == (dm.total, dm.total)
        assert abs(system.matrix - system.matrix.T).max() < 1e-12

    def test_zero_absorption_needs_sys4(self: Self, disk_mesh: Mesh, disk_media: CoefficientSet) -> None:
        """delta = 0 is refused for the absorbing systems."""
        dm = build_dofmap(disk_mesh)
        with pytest.raises(ValidationError):
            assemble_system(disk_mesh, dm, disk_media, 10.0, 0.0, Variant.SYS1)
        system = assemble_system(disk_mesh, dm, disk_media, 10.0j, 0.0, Variant.SYS4)
        assert system.delta == 0.0

    def test_imaginary_part_is_coercive(self: Self, disk_mesh: Mesh, disk_media: CoefficientSet) -> None:
        """Im a(phi, phi) >= delta ||phi||^2 when both stiffness coefficients are at least one."""
        dm = build_dofmap(disk_mesh)
        system = assemble_system(disk_mesh, dm, disk_media, 10.0, 0.1, Variant.SYS1)
        assert imaginary_coercivity(system, samples=5) >= 1.0 - 1e-10

    def test_divergence_load_only_for_sys3(self: Self, disk_mesh: Mesh) -> None:
        """G1 is refused for the other systems and must vanish near the boundary."""
        dm = build_dofmap(disk_mesh)
        G = np.ones((disk_mesh.n_vertices, 2))
        with pytest.raises(ValidationError):
            assemble_rhs(disk_mesh, dm, 1.0, 1.0, G, variant=Variant.SYS1)
        with pytest.raises(SupportViolationError):
            assemble_rhs(disk_mesh, dm, 1.0, 1.0, G, variant=Variant.SYS3, band=0.2)
        rhs = assemble_rhs(disk_mesh, dm, None, None, np.where(disk_mesh.d_gamma[:, None] > 0.4, G, 0.0), band=0.2)
        assert rhs.shape == (dm.total,)

    def test_rhs_signs(self: Self, square_mesh: Mesh) -> None:
        """Equal loads cancel on the shared boundary unknowns."""
        dm = build_dofmap(square_mesh)
        rhs = assemble_rhs(square_mesh, dm, 1.0, 1.0)
        assert np.allclose(rhs[2 * dm.n_interior :], 0.0)
        assert np.all(rhs[: dm.n_interior].real < 0)
        assert np.all(rhs[dm.n_interior : 2 * dm.n_interior].real > 0)
