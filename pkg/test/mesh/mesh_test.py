"""Mesh generation, refinement and the ASCII format."""
from __future__ import annotations

import numpy as np
import pytest
from typing_extensions import Self

from itelab.exceptions import ValidationError
from itelab.geometry import Domain
from itelab.mesh import Mesh, build_mesh, build_strip_mesh, read_mesh, refine


class TestBuildMesh:
    """Structured and ring meshes."""

    def test_square_counts(self: Self) -> None:
        """The square has (n + 1)^2 vertices and 2 n^2 triangles."""
        mesh = build_mesh(Domain.unit_square(), 4)
        assert mesh.n_vertices == 25
        assert mesh.n_triangles == 32
        assert int(mesh.is_boundary.sum()) == 16
        assert mesh.areas.sum() == pytest.approx(1.0)
        assert np.all(mesh.areas > 0)

    def test_boundary_distance_annotation(self: Self, square_mesh: Mesh) -> None:
        """Boundary vertices carry d_gamma = 0 and interior ones the exact distance."""
        assert np.all(square_mesh.d_gamma[square_mesh.is_boundary] == 0.0)
        interior = ~square_mesh.is_boundary
        exact = Domain.unit_square().distance(square_mesh.vertices[interior])
        assert np.allclose(square_mesh.d_gamma[interior], exact)

    def test_disk_rings(self: Self, disk_mesh: Mesh) -> None:
        """Eight rings give 6 * 64 triangles whose boundary is a 48-gon on the circle."""
        assert disk_mesh.n_triangles == 384
        assert int(disk_mesh.is_boundary.sum()) == 48
        radii = np.linalg.norm(disk_mesh.vertices[disk_mesh.is_boundary], axis=1)
        assert np.allclose(radii, 1.0)
        assert disk_mesh.areas.sum() == pytest.approx(np.pi, rel=1e-2)

    def test_outward_normals(self: Self, disk_mesh: Mesh) -> None:
        """Boundary normals point away from the origin."""
        mid = disk_mesh.vertices[disk_mesh.boundary_edges].mean(axis=1)
        assert np.all(np.einsum("ij,ij->i", mid, disk_mesh.normals) > 0)

    def test_invalid_resolution(self: Self) -> None:
        """n must be positive."""
        with pytest.raises(ValidationError):
            build_mesh(Domain.unit_square(), 0)


class TestRefine:
    """Uniform refinement."""

    def test_refine_quadruples(self: Self, square_mesh: Mesh) -> None:
        """Every triangle splits in four and h halves."""
        fine = refine(square_mesh)
        assert fine.n_triangles == 4 * square_mesh.n_triangles
        assert fine.h_max == pytest.approx(square_mesh.h_max / 2)
        assert fine.areas.sum() == pytest.approx(1.0)

    def test_refine_projects_onto_the_circle(self: Self, disk_mesh: Mesh) -> None:
        """New boundary vertices land on the curved boundary."""
        fine = refine(disk_mesh)
        assert int(fine.is_boundary.sum()) == 96
        assert np.allclose(np.linalg.norm(fine.vertices[fine.is_boundary], axis=1), 1.0)

    def test_strip_is_not_refined(self: Self) -> None:
        """Strip meshes are rebuilt instead of refined."""
        with pytest.raises(ValidationError):
            refine(build_strip_mesh(Domain.strip(1.0, 1.0), 4, 4))


class TestStripMesh:
    """Periodic strip mesh."""

    def test_periodic_identification(self: Self) -> None:
        """The right column is identified with the left one and the top row is clamped."""
        mesh = build_strip_mesh(Domain.strip(2.0, 1.0), 4, 3)
        right = np.flatnonzero(np.isclose(mesh.vertices[:, 0], 2.0))
        assert np.allclose(mesh.vertices[mesh.masters[right], 0], 0.0)
        assert np.allclose(mesh.vertices[mesh.fixed, 1], 1.0)
        assert int(mesh.fixed.sum()) == 5
        assert len(mesh.boundary_edges) == 4
        assert np.allclose(mesh.normals, [0.0, -1.0])


class TestMeshText:
    """ASCII rendering."""

    def test_text_format(self: Self, square_mesh: Mesh) -> None:
        """The header counts vertices, triangles and boundary edges, and reading restores the mesh."""
        text = square_mesh.to_text()
        header = text.splitlines()[0].split()
        assert [int(v) for v in header] == [81, 128, 32]
        again = read_mesh(text, Domain.unit_square())
        assert np.array_equal(again.vertices, square_mesh.vertices)
        assert np.array_equal(again.triangles, square_mesh.triangles)
        assert np.array_equal(again.is_boundary, square_mesh.is_boundary)
        assert again.h_max == pytest.approx(square_mesh.h_max)
