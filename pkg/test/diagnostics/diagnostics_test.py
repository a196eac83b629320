"""Energy identities, decay, multiplier and Hardy checks."""
from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest
from typing_extensions import Self

from itelab.assembly import Variant, assemble_rhs, assemble_system, build_dofmap
from itelab.diagnostics import (
    IdentityVariant,
    energy_identity_residuals,
    hardy_ratio,
    multiplier_sweep,
    solve_single_field,
    verify_decay,
    verify_multiplier,
)
from itelab.exceptions import ValidationError
from itelab.geometry import Domain, MatrixField, ScalarField
from itelab.mesh import build_mesh
from itelab.solver import FieldPair, factorize, solve

if TYPE_CHECKING:
    from itelab.geometry import CoefficientSet
    from itelab.mesh import Mesh

A_ID = MatrixField.constant(np.eye(2))
S_ONE = ScalarField.constant(1.0)


def _interior_load(mesh: Mesh) -> np.ndarray:
    """Constant vector load supported at distance at least 0.4 from the boundary."""
    return np.where(mesh.d_gamma[:, None] > 0.4, np.array([[1.0, -0.5]]), 0.0)


class TestIdentities:
    """Both energy identities on discrete solutions."""

    @pytest.mark.parametrize(
        ("variant", "gamma0", "with_load"),
        [(Variant.SYS1, 10.0, False), (Variant.SYS2, 1.0j, False), (Variant.SYS3, 10.0, True)],
    )
    def test_solution_satisfies_identities(
        self: Self,
        variant: Variant,
        gamma0: complex,
        with_load: bool,  # noqa: FBT001
        disk_mesh: Mesh,
        disk_media: CoefficientSet,
    ) -> None:
        """A solve at delta = 0.1 meets both identities to round-off."""
        dm = build_dofmap(disk_mesh)
        G1 = _interior_load(disk_mesh) if with_load else None
        system = assemble_system(disk_mesh, dm, disk_media, gamma0, 0.1, variant)
        rhs = assemble_rhs(disk_mesh, dm, 1.0, 0.5, G1, variant=variant, band=0.2)
        v = solve(factorize(system), rhs)
        res = energy_identity_residuals(
            v,
            (1.0, 0.5),
            None,
            disk_media,
            gamma0,
            variant,
            mesh=disk_mesh,
            delta=0.1,
            G1=G1,
            blocks=system.blocks,
        )
        assert res.r1 < 1e-8
        assert res.r2 < 1e-8
        assert res.m_value > 0
        assert res.n_value > 0
        assert res.variant is IdentityVariant.of(variant)

    def test_boundary_datum(self: Self, disk_mesh: Mesh, disk_media: CoefficientSet) -> None:
        """A boundary load enters the second identity."""
        dm = build_dofmap(disk_mesh)
        h = np.cos(np.arctan2(disk_mesh.vertices[:, 1], disk_mesh.vertices[:, 0]))
        system = assemble_system(disk_mesh, dm, disk_media, 10.0, 0.1, Variant.SYS1)
        v = solve(factorize(system), assemble_rhs(disk_mesh, dm, None, None, h=h))
        res = energy_identity_residuals(v, (None, None), h, disk_media, 10.0, "real_shift", mesh=disk_mesh, delta=0.1)
        assert res.r1 < 1e-8
        assert res.r2 < 1e-8

    def test_zero_field(self: Self, disk_mesh: Mesh, disk_media: CoefficientSet) -> None:
        """v = 0 with zero data has zero residuals."""
        v = FieldPair.zeros(disk_mesh.n_vertices)
        res = energy_identity_residuals(v, (None, None), None, disk_media, 10.0, Variant.SYS1, mesh=disk_mesh, delta=0.1)
        assert res.r1 == 0.0
        assert res.r2 == 0.0
        assert res.to_dict()["variant"] == "real_shift"

    def test_divergence_load_needs_div_g(self: Self, disk_mesh: Mesh, disk_media: CoefficientSet) -> None:
        """G1 is refused for the shift identities."""
        v = FieldPair.zeros(disk_mesh.n_vertices)
        with pytest.raises(ValidationError):
            energy_identity_residuals(
                v,
                (None, None),
                None,
                disk_media,
                10.0,
                "real_shift",
                mesh=disk_mesh,
                delta=0.1,
                G1=_interior_load(disk_mesh),
            )

    def test_variant_lookup(self: Self) -> None:
        """Systems map onto their identities."""
        assert IdentityVariant.of(Variant.SYS4) is IdentityVariant.IMAG_SHIFT
        assert IdentityVariant.of("divG").system is Variant.SYS3


class TestSingleField:
    """div(A grad u) - lam S u = f."""

    def test_harmonic_constant(self: Self, square_mesh: Mesh) -> None:
        """With lam = 0 and constant boundary data the solution is that constant."""
        u = solve_single_field(square_mesh, A_ID, S_ONE, 0.0, drive=1.0)
        assert np.allclose(u, 1.0)

    def test_decay_fit(self: Self) -> None:
        """The interior ratio falls with sqrt(lam)."""
        mesh = build_mesh(Domain.unit_square(), 64)
        fit = verify_decay(mesh, A_ID, S_ONE, [100.0, 300.0, 1000.0, 3000.0], 0.25)
        assert fit.c2 > 0
        assert len(fit.rows) == 4
        assert not fit.clamped
        ratios = [row["ratio"] for row in fit.rows]
        assert ratios == sorted(ratios, reverse=True)

    @pytest.mark.parametrize(
        ("grid", "s"),
        [([100.0, 200.0, 400.0], 0.25), ([100.0, 200.0, 300.0, 400.0], 0.25), ([1.0, 10.0, 100.0, 1000.0], 0.6)],
    )
    def test_decay_preconditions(self: Self, grid: list[float], s: float, square_mesh: Mesh) -> None:
        """Four values spanning a decade, and a band inside the inradius."""
        with pytest.raises(ValidationError):
            verify_decay(square_mesh, A_ID, S_ONE, grid, s)


class TestMultiplier:
    """Weighted multiplier inequalities."""

    def test_sides_of_a_solution(self: Self, square_mesh: Mesh) -> None:
        """Every side is positive for a nonzero solution."""
        u = solve_single_field(square_mesh, A_ID, S_ONE, 10.0, f=1.0)
        report = verify_multiplier(u, 1.0, 10.0, 1.0, square_mesh, A_ID, S_ONE)
        assert min(report.lhs1, report.rhs1, report.lhs2, report.rhs2) > 0
        assert report.ratio1 == pytest.approx(report.lhs1 / report.rhs1)

    def test_not_a_solution(self: Self, square_mesh: Mesh) -> None:
        """Fields that do not solve the equation are refused."""
        u = np.random.default_rng(0).standard_normal(square_mesh.n_vertices)
        with pytest.raises(ValidationError):
            verify_multiplier(u, 1.0, 10.0, 1.0, square_mesh, A_ID, S_ONE)

    def test_negative_weight(self: Self, square_mesh: Mesh) -> None:
        """alpha >= 0."""
        u = solve_single_field(square_mesh, A_ID, S_ONE, 10.0, f=1.0)
        with pytest.raises(ValidationError):
            verify_multiplier(u, 1.0, 10.0, -1.0, square_mesh, A_ID, S_ONE)

    def test_constants_stay_bounded(self: Self, square_mesh: Mesh) -> None:
        """C(lam) does not grow with lam."""
        sweep = multiplier_sweep(square_mesh, A_ID, S_ONE, 1.0, [100.0, 1000.0, 10000.0], 1.0)
        assert sweep.bounded
        assert len(sweep.rows()) == 3
        assert sweep.lams == [100.0, 1000.0, 10000.0]


class TestHardy:
    """Ratio of the d^-2 weighted mass to the Dirichlet energy."""

    def test_bubble(self: Self) -> None:
        """A bubble respects the convex-domain constant 4 and the ratio is scale free."""
        mesh = build_mesh(Domain.unit_square(), 16)
        x, y = mesh.vertices.T
        bubble = x * (1 - x) * y * (1 - y)
        ratio = hardy_ratio(bubble, mesh)
        assert 0 < ratio < 4
        assert hardy_ratio(3.0 * bubble, mesh) == pytest.approx(ratio)

    def test_zero_field(self: Self, square_mesh: Mesh) -> None:
        """w = 0 gives 0."""
        assert hardy_ratio(np.zeros(square_mesh.n_vertices), square_mesh) == 0.0

    def test_boundary_values_refused(self: Self, square_mesh: Mesh) -> None:
        """w must vanish on the boundary."""
        with pytest.raises(ValidationError):
            hardy_ratio(np.ones(square_mesh.n_vertices), square_mesh)
