"""Bessel evaluation and the disk transmission eigenvalue oracle."""
from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest
from scipy import special
from typing_extensions import Self

from itelab import oracle
from itelab.constant import ORACLE_RESCANS
from itelab.exceptions import DegenerateMediaError, GridTooCoarseError, ValidationError
from itelab.oracle import DiskMedia, bessel_j, bessel_jp, bessel_table, disk_dispersion, disk_eigenfunction, find_disk_tes

if TYPE_CHECKING:
    from unittest.mock import Mock

BENCHMARK = DiskMedia(1.0, 1.0, 4.0, 1.0)
ARGS = np.array([0.0, 0.3, 0.9, 1.0, 1.1, 2.5, 5.0, 12.5, 30.0, 60.0])


class TestBessel:
    """Series and backward recurrence against scipy."""

    def test_table_matches_scipy(self: Self) -> None:
        """J_0 .. J_6 agree with scipy.special.jv on both branches."""
        table = bessel_table(6, ARGS)
        expected = np.stack([special.jv(m, ARGS) for m in range(7)], axis=1)
        assert table.shape == (len(ARGS), 7)
        assert np.allclose(table, expected, rtol=0.0, atol=1e-11)

    @pytest.mark.parametrize("m", [0, 1, 4])
    def test_derivative(self: Self, m: int) -> None:
        """J_m' agrees with scipy.special.jvp."""
        assert np.allclose(bessel_jp(m, ARGS), special.jvp(m, ARGS), rtol=0.0, atol=1e-11)
        assert np.allclose(bessel_j(m, ARGS), special.jv(m, ARGS), rtol=0.0, atol=1e-11)

    def test_negative_argument(self: Self) -> None:
        """Arguments are nonnegative."""
        with pytest.raises(ValidationError):
            bessel_table(2, [-1.0])


class TestDiskMedia:
    """Media validation."""

    def test_positive(self: Self) -> None:
        """Coefficients are positive."""
        with pytest.raises(ValidationError):
            DiskMedia(1.0, 0.0, 1.0, 1.0)

    def test_degenerate(self: Self) -> None:
        """a1 s1 = a2 s2 has no isolated roots."""
        media = DiskMedia(2.0, 1.0, 1.0, 2.0)
        assert media.degenerate
        with pytest.raises(DegenerateMediaError):
            find_disk_tes(media, 50.0, 2)

    def test_wavenumbers(self: Self) -> None:
        """k_j = sqrt(kappa s_j / a_j)."""
        k1, k2 = BENCHMARK.wavenumbers(9.0)
        assert k1 == pytest.approx(6.0)
        assert k2 == pytest.approx(3.0)


class TestRoots:
    """Root finding across angular orders."""

    def test_roots_are_sign_changes(self: Self) -> None:
        """Every reported root brackets a sign change of the determinant."""
        roots = find_disk_tes(BENCHMARK, 60.0, 2)
        assert roots
        assert [(te.lam, te.m) for te in roots] == sorted((te.lam, te.m) for te in roots)
        for te in roots:
            assert 0.0 < te.lam <= 60.0
            below, above = disk_dispersion(BENCHMARK, te.m, [te.lam * (1 - 1e-6), te.lam * (1 + 1e-6)])
            assert below * above < 0
            assert te.multiplicity_hint == (1 if te.m == 0 else 2)
            assert te.k1 == pytest.approx(2.0 * np.sqrt(te.lam))
            assert te.transmission_eigenvalue == -te.lam

    def test_invalid_range(self: Self) -> None:
        """lam_max > 0 and m_max >= 0."""
        with pytest.raises(ValidationError):
            find_disk_tes(BENCHMARK, 0.0, 1)
        with pytest.raises(ValidationError):
            find_disk_tes(BENCHMARK, 10.0, -1)

    def test_eigenfunction_traces_agree(self: Self) -> None:
        """u1 = u2 on the unit circle."""
        te = find_disk_tes(BENCHMARK, 60.0, 1)[0]
        theta = np.linspace(0.0, 2.0 * np.pi, 17)
        u1, u2 = disk_eigenfunction(BENCHMARK, te, np.column_stack([np.cos(theta), np.sin(theta)]))
        assert np.allclose(u1, u2, atol=1e-12)


class TestRescan:
    """Grid refinement on a root count mismatch."""

    def test_rescans_until_exhausted(self: Self, mocker: Mock) -> None:
        """A persistent mismatch is retried ORACLE_RESCANS times with halved steps, then raised."""
        scan = mocker.patch.object(oracle, "_scan", side_effect=GridTooCoarseError("mocked"))
        with pytest.raises(GridTooCoarseError):
            oracle._roots_for_order(BENCHMARK, 0, 50.0)
        assert scan.call_count == ORACLE_RESCANS + 1
        steps = [call.args[3] for call in scan.call_args_list]
        assert steps == pytest.approx([steps[0] / 2**i for i in range(ORACLE_RESCANS + 1)])

    def test_rescan_recovers(self: Self, mocker: Mock) -> None:
        """A mismatch followed by an agreeing scan returns the roots of the second scan."""
        scan = mocker.patch.object(oracle, "_scan", side_effect=[GridTooCoarseError("mocked"), [4.0]])
        roots = oracle._roots_for_order(BENCHMARK, 1, 50.0)
        assert scan.call_count == 2
        assert [te.lam for te in roots] == [4.0]
        assert roots[0].k2 == pytest.approx(2.0)
