"""Conftest for Pytest."""
from __future__ import annotations

import sys
from typing import TYPE_CHECKING

import pytest

from itelab.click_opt.run_config import RunConfig
from itelab.geometry import Domain
from itelab.mesh import build_mesh
from itelab.presets import contrast

if TYPE_CHECKING:
    from pathlib import Path

    from itelab.geometry import CoefficientSet
    from itelab.mesh import Mesh


@pytest.fixture(autouse=True)
def _quiet_progress(monkeypatch: pytest.MonkeyPatch) -> None:
    """Keep progress bars out of the test output."""
    monkeypatch.setenv("TQDM_DISABLE", "1")


@pytest.fixture()
def square_mesh() -> Mesh:
    """Structured unit square mesh, n = 8."""
    return build_mesh(Domain.unit_square(), 8)


@pytest.fixture()
def disk_mesh() -> Mesh:
    """Unit disk mesh with 8 rings."""
    return build_mesh(Domain.unit_disk(), 8)


@pytest.fixture()
def disk_media() -> CoefficientSet:
    """Constant media with a1 S1 != a2 S2 on the unit disk."""
    return contrast(2.0, 1.0, 2.0, 1.0)


@pytest.fixture()
def run_config(tmp_path: Path) -> RunConfig:
    """Small, fast run configuration writing into a temporary directory."""
    return RunConfig(
        {
            "output.dir": str(tmp_path),
            "output.quiet": True,
            "mesh.n": 8,
            "oracle.lam_max": 60.0,
            "oracle.m_max": 2,
        },
    )


@pytest.fixture(autouse=True)
def _capture_wrap() -> None:
    """Avoid https://github.com/pytest-dev/pytest/issues/5502."""
    sys.stderr.close = lambda *args: None  # type: ignore[method-assign] #noqa: ARG005
    sys.stdout.close = lambda *args: None  # type: ignore[method-assign] #noqa: ARG005
