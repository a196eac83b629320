"""Useful constants."""
from __future__ import annotations

from typing import Any

SYMMETRY_TOL = 1e-12
STRICT_TOL = 1e-10  # thickness given to strict inequalities
NEWTON_TOL = 1e-12
NEWTON_STEPS = 50
BOUNDARY_NUDGE = 1e-9
MIN_AREA = 1e-14
MIN_ANGLE_DEG = 20.0
SMOOTHING_PASSES = 5
PIVOT_TOL = 1e-14
SOLVE_RTOL = 1e-10
BREAKDOWN_TOL = 1e-14
ARNOLDI_SEED = 0x17E
DELTA_SCHEDULE = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
LAMBDA0_SCALE = 25.0
LAMBDA0_RANGE = (50.0, 2000.0)
REAL_ISH = 1e-2  # |Im| <= REAL_ISH * |lambda| counts as a real eigenvalue
TRIVIAL_ITE = 1e-4  # |lambda| <= TRIVIAL_ITE * max(1, |gamma0|) is the constant or harmonic kernel
SPECTRAL_DELTA = 1e-3
SHIFTED_ABSORPTION = 1e-3  # cap on delta * |gamma0| for the eigenvalue runs
BENCHMARK_LAMBDA0 = 50.0
ORACLE_RESCANS = 3
ORACLE_STEPS_PER_PERIOD = 16
LATTICE_PERIOD = 6.283185307179586
LATTICE_POINTS = 256
TAIL_TOL = 1e-12
UNDERFLOW = 1e-300
THREADS_ENV = "ITELAB_THREADS"

EXIT_OK = 0
EXIT_HYPOTHESIS = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4

COMMANDS = ["check", "solve", "eigs", "halfspace", "decay", "oracle", "verify"]
HYPOTHESES = ["thm1", "thm2", "thm3", "thm4", "pro_A1A2"]
VARIANTS = ["T1", "T2", "T3", "T4"]

# Every RunConfig field with its default, keyed by "section.key".
DEFAULT_CONFIG: dict[str, Any] = {
    "domain.kind": "unit_disk",
    "domain.r_inner": 0.5,
    "domain.vertices": [],
    "media.preset": "contrast(1, 1, 4, 1)",
    "diffeo.eps": 0.0,
    "diffeo.r_cut": 0.0,
    "hypothesis.name": "thm1",
    "hypothesis.alpha_or_beta": 0.0,
    "hypothesis.tau": 0.2,
    "hypothesis.slack": 0.0,
    "hypothesis.samples": 10000,
    "hypothesis.boundary_samples": 256,
    "mesh.n": 16,
    "mesh.refine": 0,
    "solver.lambda0": 0.0,
    "solver.deltas": list(DELTA_SCHEDULE),
    "solver.sweep_rtol": 1e-6,
    "solver.load": 1.0,
    "spectral.variant": "T3",
    "spectral.k": 8,
    "spectral.tol": 1e-8,
    "spectral.max_iter": 300,
    "spectral.seed": ARNOLDI_SEED,
    "spectral.delta": 0.0,
    "spectral.extrapolate": False,
    "spectral.t3_lambda": -10.0,
    "spectral.eps": 0.01,
    "spectral.discreteness": False,
    "halfspace.a1": 2.0,
    "halfspace.a2": 1.0,
    "halfspace.s1": 1.0,
    "halfspace.s2": 1.0,
    "halfspace.amplitude": 0.5,
    "halfspace.period": LATTICE_PERIOD,
    "halfspace.points": LATTICE_POINTS,
    "halfspace.lam_grid": [1.0, 10.0, 100.0, 1000.0, 10000.0],
    "decay.lam_grid": [100.0, 300.0, 1000.0, 3000.0],
    "decay.s": 0.25,
    "decay.imaginary": False,
    "decay.alpha": 1.0,
    "decay.multiplier_grid": [100.0, 1000.0, 10000.0],
    "oracle.lam_max": 40.0,
    "oracle.m_max": 4,
    "verify.eig_rtol": 0.02,
    "verify.identity_rtol": 1e-8,
    "verify.slope_range": [-0.30, -0.20],
    "verify.ratio_max": 10.0,
    "verify.r2_min": 0.95,
    "verify.fem_rtol": 0.01,
    "verify.strip_nx": 128,
    "verify.strip_nt": 200,
    "verify.strip_depth": 10.0,
    "verify.complementing_pairs": 1000,
    "verify.order_range": [1.6, 2.4],
    "verify.negative_min": 1e-3,
    "verify.pushforward_eps": 0.2,
    "verify.discreteness_shift": 88.0,
    "output.dir": "itelab-out",
    "output.quiet": False,
    "output.debug": False,
}
