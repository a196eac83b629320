"""Command orchestration."""
from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable

import numpy as np
from loguru import logger
from typing_extensions import Self

from .assembly import Variant, assemble_rhs, assemble_system, build_dofmap, nodal_blocks
from .conditions import check_complementing, check_hypothesis, check_with_pushforward
from .constant import BENCHMARK_LAMBDA0, EXIT_HYPOTHESIS, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION
from .diagnostics import IdentityVariant, energy_identity_residuals, multiplier_sweep, verify_decay
from .exceptions import NumericalError, ValidationError
from .geometry import Domain, DomainKind, pushforward
from .halfspace import HalfSpaceProblem, strip_fem_solution, verify_halfspace_estimate
from .mesh import build_mesh, refine
from .oracle import DiskMedia, find_disk_tes
from .presets import contrast, identity, radial_diffeomorphism, resolve_preset
from .solver import FieldPair, default_lambda0, limiting_absorption
from .spectral import (
    TVariant,
    arnoldi_eigs,
    build_operator,
    discreteness_diagnostic,
    extrapolated_spectrum,
    first_real_ite,
    pick_real_ite,
    refinement_study,
    regime_discrepancy,
    t3_fixed_point,
)
from .strings import command_failed, unknown_domain
from .writer import Writer

if TYPE_CHECKING:
    from .click_opt.run_config import RunConfig
    from .geometry import CoefficientSet, Diffeomorphism
    from .mesh import Mesh

DECAY_MESH_N = 32


class IteLab(object):
    """Runs one command against a configuration and writes its artifacts under the output directory."""

    def __init__(self: Self, opts: RunConfig) -> None:
        self.opts = opts
        self.out_dir = Path(opts.output_dir)
        self.artifacts: list[Path] = []

    def _write(self: Self, name: str, rows: list[dict[str, Any]], headers: list[str] | None = None) -> None:
        self.artifacts.append(Writer.write(rows, self.out_dir / name, headers))

    def _write_json(self: Self, name: str, document: Any) -> None:
        self.artifacts.append(Writer.write_json(document, self.out_dir / name))

    def domain(self: Self) -> Domain:
        """Domain named by the config."""
        kind = self.opts.domain_kind
        if kind == DomainKind.UNIT_DISK.value:
            return Domain.unit_disk()
        if kind == DomainKind.UNIT_SQUARE.value:
            return Domain.unit_square()
        if kind == DomainKind.ANNULUS.value:
            return Domain.annulus(self.opts.domain_r_inner)
        if kind == DomainKind.POLYGON.value:
            return Domain.polygon(np.reshape(self.opts.domain_vertices, (-1, 2)))
        raise ValidationError(unknown_domain.format(kind=kind))

    def coefficients(self: Self, dom: Domain, *, pushed: bool = True) -> CoefficientSet:
        """Preset media, with side one pushed forward when a diffeomorphism is configured."""
        cs = resolve_preset(self.opts.media_preset, dom)
        if not pushed or self.opts.diffeo_eps == 0.0:
            return cs
        F = self._diffeomorphism()
        F.validate(dom)
        return cs.with_side_one(*pushforward(F, cs.A1, cs.S1))

    def _diffeomorphism(self: Self) -> Diffeomorphism:
        return radial_diffeomorphism(self.opts.diffeo_eps, self.opts.diffeo_r_cut or None)

    def mesh(self: Self, dom: Domain, n: int | None = None) -> Mesh:
        """Mesh at the configured resolution after the configured refinements."""
        m = build_mesh(dom, n or self.opts.mesh_n)
        for _ in range(self.opts.mesh_refine):
            m = refine(m)
        return m

    def _lambda0(self: Self, m: Mesh) -> float:
        return self.opts.solver_lambda0 if self.opts.solver_lambda0 > 0 else default_lambda0(m)

    def check(self: Self) -> int:
        """Sampled certificate of the configured hypothesis."""
        dom = self.domain()
        cs = self.coefficients(dom, pushed=False)
        params = {
            "alpha_or_beta": self.opts.hypothesis_alpha_or_beta,
            "tau": self.opts.hypothesis_tau,
            "sample_count": self.opts.hypothesis_samples,
            "slack": self.opts.hypothesis_slack,
            "boundary_samples": self.opts.hypothesis_boundary_samples,
        }
        if self.opts.diffeo_eps != 0.0:
            report = check_with_pushforward(cs, dom, self._diffeomorphism(), self.opts.hypothesis_name, **params)
        else:
            report = check_hypothesis(cs, dom, self.opts.hypothesis_name, **params)
        self._write_json("check.json", report.to_dict())
        return EXIT_OK if report.holds else EXIT_HYPOTHESIS

    def solve(self: Self) -> int:
        """Limiting absorption sweep for a constant load, with the identity residuals of the finest solve."""
        dom = self.domain()
        cs = self.coefficients(dom)
        m = self.mesh(dom)
        dm, blocks = build_dofmap(m), nodal_blocks(m, cs)
        gamma0 = self._lambda0(m)
        load = self.opts.solver_load
        rhs = assemble_rhs(m, dm, load, load)
        sweep = limiting_absorption(
            m,
            dm,
            cs,
            gamma0,
            rhs,
            self.opts.solver_deltas,
            tau=self.opts.hypothesis_tau,
            rtol=self.opts.solver_sweep_rtol,
            blocks=blocks,
        )
        finest = min(self.opts.solver_deltas)
        identities = energy_identity_residuals(
            sweep.solutions[-1],
            (load, load),
            None,
            cs,
            gamma0,
            IdentityVariant.REAL_SHIFT,
            mesh=m,
            delta=finest,
            blocks=blocks,
        )
        self._write("solve.csv", sweep.rows())
        self._write_json(
            "solve.json",
            {"converged": sweep.converged, "gamma0": gamma0, "h_max": m.h_max, "identities": identities.to_dict()},
        )
        self.artifacts.append(Writer.write_mesh(m, self.out_dir / "mesh.txt"))
        system = assemble_system(m, dm, cs, gamma0, finest, Variant.SYS1, blocks=blocks)
        self.artifacts.append(Writer.write_matrix(system.matrix, self.out_dir / "system.coo"))
        return EXIT_OK

    def eigs(self: Self) -> int:
        """Ritz values of the configured operator and the eigenvalues they encode."""
        dom = self.domain()
        cs = self.coefficients(dom)
        m = self.mesh(dom)
        variant = TVariant(self.opts.spectral_variant)
        real_shift = variant in (TVariant.T1, TVariant.T3)
        gamma0 = self._lambda0(m) if real_shift else None
        lam = self.opts.spectral_t3_lambda if variant is TVariant.T3 else None
        delta = self.opts.spectral_delta or None
        op = build_operator(m, cs, variant, gamma0, delta=delta, lam=lam)
        result = arnoldi_eigs(
            op,
            self.opts.spectral_k,
            self.opts.spectral_tol,
            self.opts.spectral_max_iter,
            seed=self.opts.spectral_seed,
            h_max=m.h_max,
        )
        self._write("eigs.csv", result.rows())
        summary: dict[str, Any] = {
            "variant": variant.value,
            "gamma0": op.gamma0,
            "h_max": m.h_max,
            "converged": result.converged,
            "restarts": result.restarts,
            "first_real": pick_real_ite(result),
        }
        if self.opts.spectral_extrapolate:
            summary["extrapolated"] = extrapolated_spectrum(
                m,
                cs,
                variant,
                self.opts.spectral_k,
                self.opts.solver_deltas,
                gamma0=gamma0,
                tol=self.opts.spectral_tol,
                lam=lam,
            )
        if variant is TVariant.T3:
            fixed = t3_fixed_point(
                m,
                cs,
                self.opts.spectral_t3_lambda,
                self.opts.spectral_tol,
                lambda0=gamma0,
                delta=delta,
                k=self.opts.spectral_k,
            )
            summary["t3_fixed_point"] = {
                "lambda": fixed.lam,
                "converged": fixed.converged,
                "iterations": fixed.iterations,
            }
            if fixed.eigenfunction is not None:
                self._write("eigenfunction.csv", _eigenfunction_rows(m, fixed.eigenfunction))
        if self.opts.spectral_discreteness:
            rows = discreteness_diagnostic(
                cs,
                dom,
                variant,
                [self.opts.mesh_n, 2 * self.opts.mesh_n],
                self.opts.spectral_eps,
                k=self.opts.spectral_k,
                gamma0=gamma0,
                delta=delta,
            )
            self._write("discreteness.csv", rows)
        self._write_json("eigs.json", summary)
        return EXIT_OK

    def _halfspace_template(self: Self) -> HalfSpaceProblem:
        return HalfSpaceProblem.template(
            self.opts.halfspace_a1,
            self.opts.halfspace_a2,
            self.opts.halfspace_s1,
            self.opts.halfspace_s2,
            points=self.opts.halfspace_points,
            amplitude=self.opts.halfspace_amplitude,
            period=self.opts.halfspace_period,
        )

    def halfspace(self: Self) -> int:
        """Norm scaling of the flat-interface problem across the lambda grid."""
        template = self._halfspace_template()
        complementing, normal_contrast = template.conditions_hold()
        if not (complementing and normal_contrast):
            logger.warning(f"Half-space media: complementing={complementing}, contrast={normal_contrast}.")
        report = verify_halfspace_estimate(template, self.opts.halfspace_lam_grid)
        self._write("halfspace.csv", report.rows)
        self._write_json(
            "halfspace.json",
            {
                "slope": report.slope,
                "ratio_max": report.ratio_max,
                "ratio_min": report.ratio_min,
                "c_check": report.c_check,
                "degenerate": report.degenerate,
                "bounded": report.bounded,
            },
        )
        return EXIT_OK if report.bounded else EXIT_NUMERICAL

    def decay(self: Self) -> int:
        """Exponential decay fit and multiplier constants for side one of the media."""
        dom = self.domain()
        cs = self.coefficients(dom, pushed=False)
        m = self.mesh(dom)
        fit = verify_decay(m, cs.A1, cs.S1, self.opts.decay_lam_grid, self.opts.decay_s, imaginary=self.opts.decay_imaginary)
        sweep = multiplier_sweep(
            m,
            cs.A1,
            cs.S1,
            self.opts.solver_load,
            self.opts.decay_multiplier_grid,
            self.opts.decay_alpha,
            imaginary=self.opts.decay_imaginary,
        )
        self._write("decay.csv", fit.rows)
        self._write("multiplier.csv", sweep.rows())
        self._write_json(
            "decay.json",
            {"c1": fit.c1, "c2": fit.c2, "r_squared": fit.r_squared, "clamped": fit.clamped, "multiplier_bounded": sweep.bounded},
        )
        return EXIT_OK

    def _disk_media(self: Self, cs: CoefficientSet, dom: Domain) -> DiskMedia:
        points = dom.sample_interior(64)
        a1, a2, s1, s2 = cs.A1(points), cs.A2(points), cs.S1(points), cs.S2(points)
        for A in (a1, a2):
            if not np.allclose(A, A[0, 0, 0] * np.eye(2)):
                msg = "The disk oracle needs constant isotropic media."
                raise ValidationError(msg)
        for S in (s1, s2):
            if not np.allclose(S, S[0]):
                msg = "The disk oracle needs constant media."
                raise ValidationError(msg)
        return DiskMedia(float(a1[0, 0, 0]), float(a2[0, 0, 0]), float(s1[0]), float(s2[0]))

    def oracle(self: Self) -> int:
        """Real disk transmission eigenvalues from the Bessel matching determinant."""
        dom = Domain.unit_disk()
        media = self._disk_media(self.coefficients(dom, pushed=False), dom)
        roots = find_disk_tes(media, self.opts.oracle_lam_max, self.opts.oracle_m_max)
        rows = [{"lambda": te.lam, "m": te.m, "k1": te.k1, "k2": te.k2} for te in roots]
        self._write("oracle.csv", rows, ["lambda", "m", "k1", "k2"])
        return EXIT_OK

    def _benchmark_shift(self: Self) -> float:
        return self.opts.solver_lambda0 if self.opts.solver_lambda0 > 0 else BENCHMARK_LAMBDA0

    def _suite_disk(self: Self) -> dict[str, Any]:
        dom = Domain.unit_disk()
        cs = contrast(1.0, 1.0, 4.0, 1.0, dom)
        first = find_disk_tes(DiskMedia(1.0, 1.0, 4.0, 1.0), self.opts.oracle_lam_max, self.opts.oracle_m_max)[0]
        study = refinement_study(
            self.mesh(dom),
            cs,
            TVariant.T3,
            self.opts.spectral_k,
            gamma0=self._benchmark_shift(),
            tol=self.opts.spectral_tol,
            lam=self.opts.spectral_t3_lambda,
        )
        found = study.values[-1]
        error = abs(found - first.transmission_eigenvalue) / first.lam if found is not None else float("inf")
        low, high = self.opts.verify_order_range
        order_ok = study.order is not None and low <= study.order <= high
        return {
            "oracle": first.transmission_eigenvalue,
            "pipeline": found,
            "levels": study.rows(),
            "error": error,
            "order": study.order,
            "passed": bool(error <= self.opts.verify_eig_rtol and order_ok),
        }

    def _suite_identities(self: Self) -> dict[str, Any]:
        dom = Domain.unit_disk()
        cs = contrast(1.0, 1.0, 4.0, 1.0, dom)
        m = self.mesh(dom)
        dm, blocks = build_dofmap(m), nodal_blocks(m, cs)
        gamma0 = self._lambda0(m)
        delta = min(self.opts.solver_deltas)
        rhs = assemble_rhs(m, dm, 1.0, 1.0)
        sweep = limiting_absorption(m, dm, cs, gamma0, rhs, [delta], blocks=blocks)

        def residuals(v: FieldPair) -> tuple[float, float]:
            res = energy_identity_residuals(
                v, (1.0, 1.0), None, cs, gamma0, IdentityVariant.REAL_SHIFT, mesh=m, delta=delta, blocks=blocks,
            )
            return res.r1, res.r2

        solved = residuals(sweep.solutions[-1])
        rng = np.random.default_rng(self.opts.spectral_seed)
        noise = FieldPair.from_dofs(dm, rng.standard_normal(dm.total) + 1j * rng.standard_normal(dm.total))
        control = residuals(noise)
        passed = max(solved) <= self.opts.verify_identity_rtol and min(control) >= self.opts.verify_negative_min
        return {"r1": solved[0], "r2": solved[1], "control_r1": control[0], "control_r2": control[1], "passed": passed}

    def _suite_pushforward(self: Self) -> dict[str, Any]:
        dom = Domain.unit_disk()
        cs = contrast(2.0, 1.0, 2.0, 1.0, dom)
        F = radial_diffeomorphism(self.opts.verify_pushforward_eps)
        F.validate(dom)
        pushed = cs.with_side_one(*pushforward(F, cs.A1, cs.S1))
        m = self.mesh(dom)
        shift, k, tol = self._benchmark_shift(), self.opts.spectral_k, self.opts.spectral_tol
        before = first_real_ite(m, cs, TVariant.T1, k, gamma0=shift, tol=tol)
        after = first_real_ite(m, pushed, TVariant.T1, k, gamma0=shift, tol=tol)
        change = abs(after - before) / abs(before) if before is not None and after is not None else float("inf")
        regimes: dict[str, Any]
        try:
            regimes = regime_discrepancy(m, cs, k, before, tol=tol)
        except NumericalError as e:
            regimes = {"error": str(e)}
        return {
            "before": before,
            "after": after,
            "change": change,
            "regimes": regimes,
            "passed": change <= self.opts.verify_eig_rtol,
        }

    def _suite_discreteness(self: Self) -> dict[str, Any]:
        dom = Domain.unit_disk()
        resolutions = [self.opts.mesh_n, 2 * self.opts.mesh_n]
        params = {"k": self.opts.spectral_k, "gamma0": self.opts.verify_discreteness_shift}
        eps = self.opts.spectral_eps
        media = contrast(2.0, 1.0, 2.0, 1.0, dom)
        stable = discreteness_diagnostic(media, dom, TVariant.T1, resolutions, eps, **params)
        control = discreteness_diagnostic(identity(dom), dom, TVariant.T1, resolutions, eps, **params)
        held = not any(row["saturated"] for row in stable) and abs(stable[-1]["stability"]) <= 1
        exploded = bool(control[-1]["saturated"]) and control[-1]["count"] > stable[-1]["count"]
        return {"counts": stable, "control": control, "passed": held and exploded}

    def _suite_halfspace(self: Self) -> dict[str, Any]:
        report = verify_halfspace_estimate(self._halfspace_template(), self.opts.halfspace_lam_grid)
        low, high = self.opts.verify_slope_range
        spread = report.ratio_max / report.ratio_min if report.ratio_min > 0 else float("inf")
        passed = report.bounded and low <= report.slope <= high and spread <= self.opts.verify_ratio_max
        return {"slope": report.slope, "ratio_spread": spread, "passed": bool(passed)}

    def _suite_decay(self: Self) -> dict[str, Any]:
        dom = Domain.unit_square()
        cs = contrast(1.0, 1.0, 1.0, 1.0, dom)
        m = build_mesh(dom, max(self.opts.mesh_n, DECAY_MESH_N))
        fit = verify_decay(m, cs.A1, cs.S1, self.opts.decay_lam_grid, self.opts.decay_s)
        bounded = [
            multiplier_sweep(m, cs.A1, cs.S1, 1.0, self.opts.decay_multiplier_grid, alpha).bounded
            for alpha in (0.0, self.opts.decay_alpha)
        ]
        passed = fit.c2 > 0 and fit.r_squared >= self.opts.verify_r2_min and all(bounded)
        return {"c2": fit.c2, "r_squared": fit.r_squared, "multiplier_bounded": bounded, "passed": bool(passed)}

    def _suite_complementing(self: Self) -> dict[str, Any]:
        rng = np.random.default_rng(0)
        agree = 0
        pairs = self.opts.verify_complementing_pairs
        for _ in range(pairs):
            b1, b2 = rng.standard_normal((2, 2, 2))
            A1, A2 = b1 @ b1.T + 0.1 * np.eye(2), b2 @ b2.T + 0.1 * np.eye(2)
            angle = rng.uniform(0.0, 2.0 * np.pi)
            verdict = check_complementing(A1, A2, [np.cos(angle), np.sin(angle)]).holds
            agree += verdict == (abs(np.linalg.det(A1) - np.linalg.det(A2)) > 1e-10)  # noqa: PLR2004
        return {"pairs": pairs, "agreement": agree / pairs, "passed": agree == pairs}

    def _suite_strip(self: Self) -> dict[str, Any]:
        template = self._halfspace_template()
        comparison = strip_fem_solution(
            template,
            self.opts.verify_strip_nx,
            self.opts.verify_strip_nt,
            self.opts.verify_strip_depth,
        )
        error = comparison.relative_l2_error
        return {"relative_l2_error": error, "passed": error <= self.opts.verify_fem_rtol}

    def verify(self: Self) -> int:
        """Run every diagnostics suite and fail when any tolerance is breached."""
        suites: dict[str, Callable[[], dict[str, Any]]] = {
            "disk_benchmark": self._suite_disk,
            "identities": self._suite_identities,
            "pushforward": self._suite_pushforward,
            "discreteness": self._suite_discreteness,
            "halfspace": self._suite_halfspace,
            "decay": self._suite_decay,
            "complementing": self._suite_complementing,
            "strip": self._suite_strip,
        }
        results: dict[str, Any] = {}
        for name, suite in suites.items():
            try:
                results[name] = suite()
            except NumericalError as e:
                logger.error(command_failed.format(command=name, error=e))
                results[name] = {"error": str(e), "passed": False}
        passed = all(result["passed"] for result in results.values())
        self._write_json("verify.json", {"passed": passed, "suites": results})
        return EXIT_OK if passed else EXIT_NUMERICAL

    def run(self: Self, command: str) -> int:
        """Dispatch a command and map failures to exit codes."""
        handlers: dict[str, Callable[[], int]] = {
            "check": self.check,
            "solve": self.solve,
            "eigs": self.eigs,
            "halfspace": self.halfspace,
            "decay": self.decay,
            "oracle": self.oracle,
            "verify": self.verify,
        }
        if command not in handlers:
            logger.error(f"Unknown command {command}.")
            return EXIT_VALIDATION
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / "effective_config.ini").write_text(self.opts.to_text(), encoding="utf-8")
        try:
            return handlers[command]()
        except ValidationError as e:
            logger.error(command_failed.format(command=command, error=e))
            return EXIT_VALIDATION
        except NumericalError as e:
            logger.error(command_failed.format(command=command, error=e))
            return EXIT_NUMERICAL


def run_command(command: str, cfg: RunConfig) -> int:
    """Run one command; the result is the process exit code."""
    return IteLab(cfg).run(command)




def _eigenfunction_rows(m: Mesh, u: FieldPair) -> list[dict[str, float]]:
    scale = float(np.max(np.abs(np.concatenate([u.u1, u.u2])))) or 1.0
    return [
        {
            "x": x,
            "y": y,
            "re_u1": a.real / scale,
            "im_u1": a.imag / scale,
            "re_u2": b.real / scale,
            "im_u2": b.imag / scale,
        }
        for (x, y), a, b in zip(m.vertices, u.u1, u.u2)
    ]
