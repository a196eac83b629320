"""Command orchestration test cases."""
from __future__ import annotations

import json
from pathlib import Path
from typing import TYPE_CHECKING, ClassVar

import pytest
from typing_extensions import Self

from itelab.constant import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION
from itelab.exceptions import SingularSystemError
from itelab.itelab import IteLab, run_command

if TYPE_CHECKING:
    from unittest.mock import Mock

    from itelab.click_opt.run_config import RunConfig


class TestIteLab:
    """Dispatch, artifacts and exit codes."""

    def test_oracle_artifacts(self: Self, run_config: RunConfig) -> None:
        """A run records the effective config next to its outputs."""
        lab = IteLab(run_config)
        assert lab.run("oracle") == EXIT_OK
        out = Path(run_config.output_dir)
        assert (out / "effective_config.ini").read_text() == run_config.to_text()
        assert lab.artifacts == [out / "oracle.csv"]

    def test_unknown_command(self: Self, run_config: RunConfig, caplog: pytest.LogCaptureFixture) -> None:
        """Only the listed commands exist."""
        assert run_command("plot", run_config) == EXIT_VALIDATION
        assert "Unknown command plot." in caplog.text

    @pytest.mark.parametrize(
        "changes",
        [{"domain.kind": "hexagon"}, {"media.preset": "layered(1)"}, {"domain.kind": "polygon"}],
    )
    def test_validation_errors(self: Self, run_config: RunConfig, changes: dict[str, str]) -> None:
        """Bad domains and presets exit with the validation code."""
        assert run_command("check", run_config.updated(changes)) == EXIT_VALIDATION

    def test_numerical_error(self: Self, run_config: RunConfig, mocker: Mock) -> None:
        """Numerical failures exit with their own code."""
        mocker.patch("itelab.itelab.find_disk_tes", side_effect=SingularSystemError("mocked"))
        assert run_command("oracle", run_config) == EXIT_NUMERICAL

    def test_polygon_domain(self: Self, run_config: RunConfig) -> None:
        """Polygon vertices come from a flat coordinate list."""
        cfg = run_config.updated({"domain.kind": "polygon", "domain.vertices": [0.0, 0.0, 2.0, 0.0, 0.0, 2.0]})
        dom = IteLab(cfg).domain()
        assert dom.contains([[0.5, 0.5]]).all()

    def test_halfspace(self: Self, run_config: RunConfig) -> None:
        """The flat-interface sweep is bounded for complementing media."""
        assert run_command("halfspace", run_config) == EXIT_OK
        report = json.loads((Path(run_config.output_dir) / "halfspace.json").read_text())
        assert report["bounded"] is True

    def test_solve(self: Self, run_config: RunConfig) -> None:
        """The sweep, identities, mesh and matrix are written."""
        cfg = run_config.updated({"media.preset": "contrast(2, 1, 2, 1)", "solver.deltas": [0.1, 0.05]})
        assert run_command("solve", cfg) == EXIT_OK
        out = Path(cfg.output_dir)
        summary = json.loads((out / "solve.json").read_text())
        assert summary["identities"]["r1"] < 1e-8
        assert {"solve.csv", "mesh.txt", "system.coo"} <= {path.name for path in out.iterdir()}

    def test_eigs_writes_eigenfunction(self: Self, run_config: RunConfig) -> None:
        """The T3 run reports its fixed point and writes the eigenfunction on the mesh vertices."""
        cfg = run_config.updated({"media.preset": "contrast(1, 1, 4, 1)", "solver.lambda0": 50.0})
        assert run_command("eigs", cfg) == EXIT_OK
        out = Path(cfg.output_dir)
        summary = json.loads((out / "eigs.json").read_text())
        assert summary["variant"] == "T3"
        header = (out / "eigenfunction.csv").read_text().splitlines()[0]
        assert header.split(",")[:2] == ["x", "y"]


class TestVerify:
    """The verify command and its suites."""

    SUITES: ClassVar[dict[str, str]] = {
        "disk_benchmark": "_suite_disk",
        "identities": "_suite_identities",
        "pushforward": "_suite_pushforward",
        "discreteness": "_suite_discreteness",
        "halfspace": "_suite_halfspace",
        "decay": "_suite_decay",
        "complementing": "_suite_complementing",
        "strip": "_suite_strip",
    }

    def _patch_suites(self: Self, mocker: Mock, **overrides: dict[str, object]) -> None:
        for name, method in self.SUITES.items():
            mocker.patch.object(IteLab, method, **overrides.get(name, {"return_value": {"passed": True}}))

    def test_all_passing(self: Self, run_config: RunConfig, mocker: Mock) -> None:
        """Every suite is reported and a clean run exits zero."""
        self._patch_suites(mocker)
        assert run_command("verify", run_config) == EXIT_OK
        report = json.loads((Path(run_config.output_dir) / "verify.json").read_text())
        assert report["passed"] is True
        assert set(report["suites"]) == set(self.SUITES)

    def test_one_failure_fails_the_run(self: Self, run_config: RunConfig, mocker: Mock) -> None:
        """A single breached tolerance gives the numerical exit code."""
        self._patch_suites(mocker, discreteness={"return_value": {"passed": False}})
        assert run_command("verify", run_config) == EXIT_NUMERICAL
        report = json.loads((Path(run_config.output_dir) / "verify.json").read_text())
        assert report["passed"] is False
        assert report["suites"]["disk_benchmark"]["passed"] is True

    def test_numerical_error_is_recorded(self: Self, run_config: RunConfig, mocker: Mock) -> None:
        """A suite that raises is recorded as failed and the others still run."""
        self._patch_suites(mocker, pushforward={"side_effect": SingularSystemError("mocked")})
        assert run_command("verify", run_config) == EXIT_NUMERICAL
        report = json.loads((Path(run_config.output_dir) / "verify.json").read_text())
        assert report["suites"]["pushforward"] == {"error": "mocked", "passed": False}
        assert report["suites"]["strip"]["passed"] is True

    def test_benchmark_suites(self: Self, run_config: RunConfig) -> None:
        """Disk benchmark, identities, pushforward and discreteness hold at the default resolution."""
        lab = IteLab(run_config.updated({"mesh.n": 16}))
        disk = lab._suite_disk()  # noqa: SLF001
        assert disk["error"] <= 0.02
        assert 1.6 <= disk["order"] <= 2.4
        assert len(disk["levels"]) == 3
        identities = lab._suite_identities()  # noqa: SLF001
        assert max(identities["r1"], identities["r2"]) <= 1e-8
        assert min(identities["control_r1"], identities["control_r2"]) >= 1e-3
        assert lab._suite_pushforward()["passed"]  # noqa: SLF001
        discreteness = lab._suite_discreteness()  # noqa: SLF001
        assert discreteness["passed"]
        assert discreteness["control"][-1]["saturated"]
