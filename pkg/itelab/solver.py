"""Direct factorization of the block systems and the limiting absorption sweep."""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from loguru import logger
from scipy import sparse
from scipy.sparse.linalg import splu
from tqdm import tqdm

from .assembly import BlockSystem, NodalBlocks, Variant, assemble_system, nodal_blocks
from .constant import DELTA_SCHEDULE, LAMBDA0_RANGE, LAMBDA0_SCALE, PIVOT_TOL, SOLVE_RTOL, THREADS_ENV
from .exceptions import AccuracyError, NonConvergenceError, SingularSystemError, ValidationError
from .norms import NormKind, WeightedNorms, weighted_norm
from .strings import residual_too_large, rhs_size, singular_exact, singular_pivot, sweep_diverged, sweep_order

if TYPE_CHECKING:
    from numpy.typing import NDArray
    from scipy.sparse.linalg import SuperLU
    from typing_extensions import Self

    from .assembly import DofMap
    from .geometry import CoefficientSet
    from .mesh import Mesh

    ComplexArray = NDArray[np.complex128]


def thread_count() -> int:
    """Worker cap from the environment, defaulting to the CPU count."""
    raw = os.environ.get(THREADS_ENV, "")
    return max(1, int(raw)) if raw.strip().isdigit() else os.cpu_count() or 1


def default_lambda0(m: Mesh) -> float:
    """Real shift 25 / h clipped to the working range."""
    return float(np.clip(LAMBDA0_SCALE / m.h_max, *LAMBDA0_RANGE))


def small_lambda0(k_sigma: float) -> float:
    """Small imaginary shift magnitude 0.1 K^-1/2 for media with max S2 = K."""
    return 0.1 / np.sqrt(k_sigma)


@dataclass(frozen=True, eq=False)
class FieldPair(object):
    """Nodal values of both fields, plus the unknown vector they came from."""

    u1: ComplexArray
    u2: ComplexArray
    dofs: ComplexArray | None = None

    @property
    def w(self: Self) -> ComplexArray:
        """Difference u1 - u2, zero on the boundary."""
        return self.u1 - self.u2

    @classmethod
    def from_dofs(cls: type[Self], dm: DofMap, x: ComplexArray) -> Self:
        """Unpack an unknown vector."""
        return cls(dm.P1 @ x, dm.P2 @ x, x)

    @classmethod
    def zeros(cls: type[Self], n: int) -> Self:
        """Zero pair on n vertices."""
        return cls(np.zeros(n, dtype=complex), np.zeros(n, dtype=complex))

    def __add__(self: Self, other: FieldPair) -> FieldPair:
        dofs = None if self.dofs is None or other.dofs is None else self.dofs + other.dofs
        return FieldPair(self.u1 + other.u1, self.u2 + other.u2, dofs)

    def __sub__(self: Self, other: FieldPair) -> FieldPair:
        return self + other * -1.0

    def __mul__(self: Self, scale: complex) -> FieldPair:
        return FieldPair(self.u1 * scale, self.u2 * scale, None if self.dofs is None else self.dofs * scale)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Factorization(object):
    """Sparse LU of a complex system with its 1-norm and condition estimate."""

    matrix: sparse.csc_matrix
    lu: SuperLU
    norm: float
    condition: float
    factor_time_ms: float
    system: BlockSystem | None = None

    def solve(self: Self, rhs: ComplexArray) -> ComplexArray:
        """Solve A x = b."""
        return np.asarray(self.lu.solve(rhs))

    def adjoint(self: Self, rhs: ComplexArray) -> ComplexArray:
        """Solve A^H x = b."""
        return np.asarray(self.lu.solve(rhs, trans="H"))


def _inverse_norm_estimate(lu: SuperLU, n: int, steps: int = 5) -> float:
    """Hager's estimate of ||A^-1||_1 from solves with A and A^H."""
    x = np.full(n, 1.0 / n, dtype=complex)
    estimate = 0.0
    for _ in range(steps):
        y = lu.solve(x)
        estimate = float(np.abs(y).sum())
        xi = np.where(np.abs(y) > 0, y / np.where(np.abs(y) > 0, np.abs(y), 1.0), 1.0)
        z = lu.solve(xi.astype(complex), trans="H")
        j = int(np.argmax(np.abs(z)))
        if np.abs(z[j]) <= np.real(np.vdot(x, z)):
            break
        x = np.zeros(n, dtype=complex)
        x[j] = 1.0
    return estimate


def factorize(sys: BlockSystem | sparse.spmatrix | NDArray[np.generic]) -> Factorization:
    """LU with partial pivoting; singular or nearly singular systems raise SingularSystemError."""
    system = sys if isinstance(sys, BlockSystem) else None
    matrix = sparse.csc_matrix(system.matrix if system is not None else sys, dtype=complex)
    norm = float(abs(matrix).sum(axis=0).max()) if matrix.nnz else 0.0
    start = time.perf_counter()
    try:
        lu = splu(matrix)
    except RuntimeError as e:
        raise SingularSystemError(singular_exact, pivot=0.0) from e
    elapsed = 1e3 * (time.perf_counter() - start)
    pivot = float(np.abs(lu.U.diagonal()).min())
    if pivot < PIVOT_TOL * norm:
        raise SingularSystemError(singular_pivot.format(pivot=pivot, norm=norm), pivot=pivot)
    condition = norm * _inverse_norm_estimate(lu, matrix.shape[0])
    logger.debug(f"Factorized {matrix.shape[0]} unknowns in {elapsed:.1f} ms, condition ~ {condition:.3e}.")
    return Factorization(matrix, lu, norm, condition, elapsed, system)


def solve_vector(f: Factorization, rhs: ComplexArray) -> ComplexArray:
    """Solve with one step of iterative refinement when the first residual is too large."""
    b = np.asarray(rhs, dtype=complex)
    if b.shape[0] != f.matrix.shape[0]:
        raise ValidationError(rhs_size.format(got=b.shape[0], expected=f.matrix.shape[0]))
    scale = np.linalg.norm(b)
    if scale == 0.0:
        return np.zeros_like(b)
    x = f.solve(b)
    residual = np.linalg.norm(f.matrix @ x - b) / scale
    if residual > SOLVE_RTOL:
        x = x + f.solve(b - f.matrix @ x)
        residual = np.linalg.norm(f.matrix @ x - b) / scale
        if residual > SOLVE_RTOL:
            raise AccuracyError(residual_too_large.format(residual=residual, tol=SOLVE_RTOL), residual=residual)
    return x


def solve(f: Factorization, rhs: ComplexArray) -> FieldPair:
    """Solve an assembled system and unpack both fields."""
    if f.system is None:
        msg = "Field unpacking needs a factorization of an assembled BlockSystem."
        raise ValidationError(msg)
    return FieldPair.from_dofs(f.system.dofmap, solve_vector(f, rhs))


def relative_residual(f: Factorization, x: ComplexArray, rhs: ComplexArray) -> float:
    """||A x - b|| / ||b||, zero for a zero right-hand side."""
    scale = np.linalg.norm(rhs)
    return float(np.linalg.norm(f.matrix @ x - rhs) / scale) if scale else 0.0


@dataclass(eq=False)
class AbsorptionSweep(object):
    """Solutions along a decreasing absorption schedule."""

    deltas: list[float]
    solutions: list[FieldPair]
    h_norms: list[float] = field(default_factory=list)
    h_norm_diffs: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    factor_times: list[float] = field(default_factory=list)
    extrapolated: FieldPair | None = None
    converged: bool = False

    def rows(self: Self) -> list[dict[str, float]]:
        """Report rows; the first step has no difference and reports nan."""
        diffs = [float("nan"), *self.h_norm_diffs]
        return [
            {
                "delta": d,
                "h_norm": n,
                "h_norm_diff": diff,
                "residual": r,
                "factor_time_ms": t,
            }
            for d, n, diff, r, t in zip(self.deltas, self.h_norms, diffs, self.residuals, self.factor_times)
        ]


def validate_schedule(schedule: list[float]) -> list[float]:
    """Strictly decreasing values in (0, 1)."""
    values = [float(d) for d in schedule]
    ordered = all(a > b for a, b in zip(values, values[1:]))
    if not values or not ordered or not all(0.0 < d < 1.0 for d in values):
        raise ValidationError(sweep_order.format(schedule=values))
    return values


def richardson(a: FieldPair, b: FieldPair, delta_a: float, delta_b: float) -> FieldPair:
    """Linear extrapolation to delta = 0 from the solutions at delta_a < delta_b."""
    return a + (a - b) * (delta_a / (delta_b - delta_a))


def limiting_absorption(  # noqa: PLR0913
    m: Mesh,
    dm: DofMap,
    cs: CoefficientSet,
    gamma0: complex,
    rhs: ComplexArray,
    schedule: list[float] | None = None,
    *,
    variant: Variant = Variant.SYS1,
    tau: float = 0.2,
    rtol: float = 1e-6,
    blocks: NodalBlocks | None = None,
) -> AbsorptionSweep:
    """Solve at every absorption level and test the sequence for convergence in the H(Omega) norm."""
    deltas = validate_schedule(schedule or DELTA_SCHEDULE)
    nodal = blocks or nodal_blocks(m, cs)
    norm_spec = WeightedNorms(NormKind.H_OMEGA, tau)

    def step(delta: float) -> tuple[FieldPair, float, float]:
        f = factorize(assemble_system(m, dm, cs, gamma0, delta, variant, blocks=nodal))
        x = solve_vector(f, rhs)
        return FieldPair.from_dofs(dm, x), relative_residual(f, x, rhs), f.factor_time_ms

    sweep = AbsorptionSweep(deltas, [])
    with ThreadPoolExecutor(max_workers=min(thread_count(), len(deltas))) as pool:
        futures = [pool.submit(step, delta) for delta in deltas]
        for delta, future in tqdm(zip(deltas, futures), total=len(deltas), desc="absorption", unit="delta", colour="green"):
            solution, residual, elapsed = future.result()
            sweep.solutions.append(solution)
            sweep.residuals.append(residual)
            sweep.factor_times.append(elapsed)
            sweep.h_norms.append(weighted_norm(solution, norm_spec, m, cs))
            if len(sweep.solutions) > 1:
                diff = weighted_norm(sweep.solutions[-1] - sweep.solutions[-2], norm_spec, m, cs)
                sweep.h_norm_diffs.append(diff)
            logger.debug(f"delta={delta:g}: ||v||_H={sweep.h_norms[-1]:.6e}, residual={residual:.2e}.")

    diffs = sweep.h_norm_diffs
    if any(b > a and c > b for a, b, c in zip(diffs, diffs[1:], diffs[2:])):
        raise NonConvergenceError(sweep_diverged.format(history=[f"{d:.3e}" for d in diffs]), history=diffs)
    last = sweep.h_norms[-1]
    sweep.converged = last == 0.0 or (bool(diffs) and diffs[-1] <= rtol * last)
    if len(deltas) > 1:
        sweep.extrapolated = richardson(sweep.solutions[-1], sweep.solutions[-2], deltas[-1], deltas[-2])
    else:
        sweep.extrapolated = sweep.solutions[-1]
    logger.info(f"Absorption sweep over {len(deltas)} levels: converged={sweep.converged}.")
    return sweep
