"""Solution operators T, their spectra and the recovered transmission eigenvalues."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Literal

import numpy as np
from loguru import logger
from scipy import linalg, sparse
from scipy.sparse.linalg import LinearOperator
from tqdm import tqdm

from .assembly import Variant, assemble_system, build_dofmap, nodal_blocks
from .constant import (
    ARNOLDI_SEED,
    BREAKDOWN_TOL,
    DELTA_SCHEDULE,
    REAL_ISH,
    SHIFTED_ABSORPTION,
    SPECTRAL_DELTA,
    TRIVIAL_ITE,
)
from .exceptions import ValidationError
from .mesh import build_mesh, refine
from .solver import FieldPair, Factorization, default_lambda0, factorize, small_lambda0, solve_vector, thread_count
from .strings import (
    arnoldi_unconverged,
    dropped_mu,
    lambda_at_shift,
    t3_oscillates,
    too_many_eigs,
    zero_lambda,
)

if TYPE_CHECKING:
    from collections.abc import Callable

    from numpy.typing import NDArray
    from typing_extensions import Self

    from .assembly import BlockSystem, DofMap, NodalBlocks
    from .geometry import CoefficientSet, Domain
    from .mesh import Mesh

    ComplexArray = NDArray[np.complex128]


class TVariant(str, Enum):
    """Solution operators and the system each one inverts."""

    T1 = "T1"
    T2 = "T2"
    T3 = "T3"
    T4 = "T4"

    @property
    def system(self: Self) -> Variant:
        """Regularized system behind the operator."""
        return {"T1": Variant.SYS1, "T2": Variant.SYS2, "T3": Variant.SYS3, "T4": Variant.SYS4}[self.value]


@dataclass(frozen=True, eq=False)
class OperatorT(object):
    """Solve-then-weight map f -> u on a fixed factorization."""

    variant: TVariant
    factorization: Factorization
    gamma0: complex
    lam: complex | None = None

    @property
    def system(self: Self) -> BlockSystem:
        """Assembled system behind the factorization."""
        assert self.factorization.system is not None  # noqa: S101
        return self.factorization.system

    @property
    def dofmap(self: Self) -> DofMap:
        """Unknown numbering."""
        return self.system.dofmap

    @property
    def gram(self: Self) -> sparse.csr_matrix:
        """Mass-weighted L2 inner product on the unknowns."""
        return self.system.gram

    def rhs(self: Self, f1: ComplexArray, f2: ComplexArray) -> ComplexArray:
        """Right-hand side built from nodal f."""
        dm, blocks = self.dofmap, self.system.blocks
        if self.variant is not TVariant.T3:
            return np.asarray(-(dm.P1.T @ (blocks.M_S1 @ f1)) + dm.P2.T @ (blocks.M_S2 @ f2))
        assert self.lam is not None  # noqa: S101
        field1 = blocks.M_S1 @ (f1 - f2) + blocks.M_S2 @ f2 - ((blocks.K1 - blocks.K2) @ f2) / self.lam
        return np.asarray(-(dm.P1.T @ field1) + dm.P2.T @ (blocks.M_S2 @ f2))

    def apply_dofs(self: Self, x: ComplexArray) -> ComplexArray:
        """T on unknown vectors."""
        dm = self.dofmap
        return solve_vector(self.factorization, self.rhs(dm.P1 @ x, dm.P2 @ x))


def default_shift(m: Mesh, cs: CoefficientSet, variant: TVariant | str) -> complex:
    """Real shift for T1 and T3, the small imaginary one for T2 and the large imaginary one for T4."""
    kind = TVariant(variant)
    if kind is TVariant.T2:
        return 1j * small_lambda0(float(np.max(cs.S2(m.vertices))))
    if kind is TVariant.T4:
        return 1j * default_lambda0(m)
    return complex(default_lambda0(m))


def spectral_delta(gamma0: complex, variant: TVariant | str) -> float:
    """Absorption of the eigenvalue runs; delta * |gamma0| stays below SHIFTED_ABSORPTION."""
    if TVariant(variant) is TVariant.T4:
        return 0.0
    return min(SPECTRAL_DELTA, SHIFTED_ABSORPTION / max(abs(gamma0), 1.0))


def build_operator(  # noqa: PLR0913
    m: Mesh,
    cs: CoefficientSet,
    variant: TVariant | str,
    gamma0: complex | None = None,
    *,
    delta: float | None = None,
    lam: complex | None = None,
    dm: DofMap | None = None,
    blocks: NodalBlocks | None = None,
    allow_singular: bool = False,
) -> OperatorT:
    """Assemble and factor the system behind T with the default shift for its regime."""
    kind = TVariant(variant)
    if kind is TVariant.T3 and (lam is None or lam == 0):
        raise ValidationError(zero_lambda)
    dofs = dm or build_dofmap(m)
    nodal = blocks or nodal_blocks(m, cs)
    if gamma0 is None:
        gamma0 = default_shift(m, cs, kind)
        if kind in (TVariant.T1, TVariant.T3):
            gamma0 = gamma0.real
    if delta is None:
        delta = spectral_delta(gamma0, kind)
    system = assemble_system(m, dofs, cs, gamma0, delta, kind.system, allow_singular=allow_singular, blocks=nodal)
    return OperatorT(kind, factorize(system), complex(gamma0), lam)


def apply_T(op: OperatorT, f: FieldPair) -> FieldPair:
    """Apply the solution operator to a nodal field pair."""
    x = solve_vector(op.factorization, op.rhs(f.u1, f.u2))
    return FieldPair.from_dofs(op.dofmap, x)


@dataclass(eq=False)
class SpectralResult(object):
    """Ritz values of T, the eigenvalues they encode and their residuals, ordered by |lambda|."""

    mu: list[complex]
    lambda_ite: list[complex]
    residuals: list[float]
    h_max: float
    k_requested: int
    gamma0: complex = 0j
    vectors: ComplexArray | None = None
    converged: bool = True
    restarts: int = 0

    def rows(self: Self) -> list[dict[str, float]]:
        """Report rows."""
        return [
            {
                "re_mu": mu.real,
                "im_mu": mu.imag,
                "re_lambda": lam.real,
                "im_lambda": lam.imag,
                "residual": res,
            }
            for mu, lam, res in zip(self.mu, self.lambda_ite, self.residuals)
        ]


def recover_ite(mu: list[complex], gamma0: complex) -> list[complex]:
    """lambda = gamma0 + 1/mu sorted by modulus; zero Ritz values are dropped."""
    kept = [complex(x) for x in mu if x != 0]
    if len(kept) < len(mu):
        logger.warning(dropped_mu.format(count=len(mu) - len(kept)))
    return sorted((complex(gamma0) + 1.0 / x for x in kept), key=abs)


def _krylov_schur(  # noqa: PLR0913, PLR0915
    matvec: Callable[[ComplexArray], ComplexArray],
    n: int,
    k: int,
    tol: float,
    max_iter: int,
    seed: int,
    gram: sparse.spmatrix | None,
) -> tuple[ComplexArray, ComplexArray, bool, int]:
    """Largest-modulus Ritz pairs by Arnoldi with Krylov-Schur restarts in the gram inner product."""

    def dot(x: ComplexArray, y: ComplexArray) -> ComplexArray:
        return x.conj().T @ (y if gram is None else gram @ y)

    ncv = min(max(2 * k + 1, 20), n)
    rng = np.random.default_rng(seed)
    start = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    V = np.zeros((n, ncv + 1), dtype=complex)
    H = np.zeros((ncv + 1, ncv), dtype=complex)
    V[:, 0] = start / np.sqrt(np.real(dot(start, start)))
    p, restarts, converged = 0, 0, False
    while True:
        m = ncv
        for j in range(p, ncv):
            w = matvec(V[:, j])
            h = np.zeros(j + 1, dtype=complex)
            for _ in range(2):
                for i in range(j + 1):
                    c = dot(V[:, i], w)
                    w = w - c * V[:, i]
                    h[i] += c
            beta = float(np.sqrt(max(np.real(dot(w, w)), 0.0)))
            H[: j + 1, j] = h
            H[j + 1, j] = beta
            if beta < BREAKDOWN_TOL:
                logger.debug(f"Arnoldi breakdown at step {j + 1}: invariant subspace.")
                m = j + 1
                break
            V[:, j + 1] = w / beta
        theta, Y = linalg.eig(H[:m, :m])
        order = np.argsort(-np.abs(theta))
        theta, Y = theta[order], Y[:, order]
        top = min(k, m)
        estimates = np.abs(H[m, m - 1] * Y[m - 1, :top]) / np.maximum(np.abs(theta[:top]), 1.0)
        n_conv = int(np.count_nonzero(estimates <= tol))
        logger.debug(f"Restart {restarts}: {n_conv}/{top} Ritz values converged.")
        if m < ncv or n_conv >= top:
            converged = True
            break
        if restarts >= max_iter:
            break
        restarts += 1
        keep = min(ncv - 1, k + max(1, (ncv - k) // 2))
        threshold = np.abs(theta[keep - 1])
        T, Z, sdim = linalg.schur(H[:m, :m], output="complex", sort=lambda x, t=threshold: abs(x) >= t)
        p = min(max(int(sdim), 1), m - 1)
        residual_row = H[m, m - 1] * Z[m - 1, :p]
        V[:, :p] = V[:, :m] @ Z[:, :p]
        V[:, p] = V[:, m]
        H[:] = 0.0
        H[:p, :p] = T[:p, :p]
        H[p, :p] = residual_row
    vectors = V[:, :m] @ Y[:, : min(k, m)]
    return theta[: min(k, m)], vectors, converged, restarts


def arnoldi_eigs(  # noqa: PLR0913
    op: OperatorT | LinearOperator,
    k: int,
    tol: float = 1e-8,
    max_iter: int = 300,
    *,
    seed: int = ARNOLDI_SEED,
    h_max: float = 0.0,
) -> SpectralResult:
    """The k largest-modulus eigenvalues of T with explicit residuals ||Tv - mu v|| / ||v||.

    Restarts stop once every wanted estimate is below tol * max(1, |mu|); the same test sets ``converged``.
    """
    if isinstance(op, OperatorT):
        matvec, gram, gamma0 = op.apply_dofs, op.gram, op.gamma0
        n = op.dofmap.total
        h_max = h_max or op.system.mesh.h_max
    else:
        matvec, gram, gamma0, n = op.matvec, None, 0j, op.shape[0]
    if k < 1 or 4 * k > n:
        raise ValidationError(too_many_eigs.format(k=k, n=n))
    theta, vectors, converged, restarts = _krylov_schur(matvec, n, k, tol, max_iter, seed, gram)
    residuals = []
    for i, mu in enumerate(theta):
        v = vectors[:, i]
        r = matvec(v) - mu * v
        norm_v = np.sqrt(np.real(np.vdot(v, v if gram is None else gram @ v)))
        norm_r = np.sqrt(np.real(np.vdot(r, r if gram is None else gram @ r)))
        residuals.append(float(norm_r / norm_v))
    accurate = [r <= tol * max(1.0, abs(mu)) for r, mu in zip(residuals, theta)]
    if not converged or not all(accurate):
        logger.warning(arnoldi_unconverged.format(restarts=restarts, converged=sum(accurate), k=k))
    keep = [i for i, mu in enumerate(theta) if mu != 0]
    if len(keep) < len(theta):
        logger.warning(dropped_mu.format(count=len(theta) - len(keep)))
    order = sorted(keep, key=lambda i: abs(gamma0 + 1.0 / theta[i]))
    result = SpectralResult(
        mu=[complex(theta[i]) for i in order],
        lambda_ite=[complex(gamma0 + 1.0 / theta[i]) for i in order],
        residuals=[residuals[i] for i in order],
        h_max=h_max,
        k_requested=k,
        gamma0=complex(gamma0),
        vectors=vectors[:, order],
        converged=converged and all(accurate),
        restarts=restarts,
    )
    logger.info(f"Arnoldi: {len(order)} Ritz values after {restarts} restarts.")
    return result


def _is_real_ite(lam: complex, gamma0: complex) -> bool:
    nontrivial = abs(lam) > TRIVIAL_ITE * max(1.0, abs(gamma0))
    return nontrivial and abs(lam.imag) <= REAL_ISH * abs(lam)


def first_real(values: list[complex], gamma0: complex = 0j) -> complex | None:
    """Smallest-modulus real-ish value, skipping the kernel at lambda = 0."""
    real = [complex(lam) for lam in values if _is_real_ite(complex(lam), gamma0)]
    return min(real, key=abs) if real else None


def pick_real_ite(result: SpectralResult) -> complex | None:
    """Smallest-modulus recovered eigenvalue that is real within the real-ish tolerance."""
    return first_real(result.lambda_ite, result.gamma0)


def t3_eigenfunction(v: FieldPair, lam: complex, lambda0: complex) -> FieldPair:
    """Eigenfunction of the transmission problem from an eigenvector of T3.

    T3 acts on U = (u1 - u2 + (lam / lambda0) u2, (lam / lambda0) u2); this undoes that map, so u1 - u2 = U1 - U2.
    """
    if lam == 0:
        raise ValidationError(zero_lambda)
    u2 = (lambda0 / lam) * v.u2
    return FieldPair(v.u1 - v.u2 + u2, u2)


@dataclass(eq=False)
class FixedPointResult(object):
    """Outcome of the T3 spectral-parameter iteration."""

    lam: complex
    converged: bool
    iterations: int
    history: list[complex] = field(default_factory=list)
    eigenfunction: FieldPair | None = None


def _select(candidates: ComplexArray, current: complex, shift: complex, select: str) -> int:
    if select == "largest":
        return int(np.argmax(np.abs(1.0 / (candidates - shift))))
    pool = range(len(candidates))
    if select == "real":
        pool = [i for i in pool if _is_real_ite(complex(candidates[i]), shift)] or pool
    return min(pool, key=lambda i: abs(candidates[i] - current))


def t3_fixed_point(  # noqa: PLR0913
    mesh: Mesh,
    cs: CoefficientSet,
    lambda_init: complex,
    tol: float = 1e-6,
    max_outer: int = 30,
    *,
    lambda0: float | None = None,
    delta: float | None = None,
    k: int = 4,
    select: Literal["real", "nearest", "largest"] = "real",
) -> FixedPointResult:
    """Iterate lambda <- lambda0 + 1/mu(T3 at lambda) until the relative update falls below tol.

    Each pass takes the real Ritz value nearest the current lambda, or the nearest of all when none is real.
    """
    shift = lambda0 if lambda0 is not None else default_lambda0(mesh)
    if lambda_init == shift:
        raise ValidationError(lambda_at_shift.format(lambda0=shift))
    dm, blocks = build_dofmap(mesh), nodal_blocks(mesh, cs)
    constant_in_lambda = abs(blocks.K1 - blocks.K2).sum() == 0.0
    lam = complex(lambda_init)
    history = [lam]

    def finish(new: complex, converged: bool, outer: int, spectrum: SpectralResult, index: int) -> FixedPointResult:
        assert spectrum.vectors is not None  # noqa: S101
        vector = FieldPair.from_dofs(dm, spectrum.vectors[:, index])
        return FixedPointResult(new, converged, outer, history, t3_eigenfunction(vector, new, shift))

    for outer in range(1, max_outer + 1):
        op = build_operator(mesh, cs, TVariant.T3, shift, delta=delta, lam=lam, dm=dm, blocks=blocks)
        spectrum = arnoldi_eigs(op, k)
        candidates = np.asarray(spectrum.lambda_ite)
        index = _select(candidates, lam, shift, select)
        new = complex(candidates[index])
        history.append(new)
        logger.debug(f"T3 iteration {outer}: lambda = {new:.8g}.")
        if constant_in_lambda or abs(new - lam) <= tol * abs(lam):
            return finish(new, True, outer, spectrum, index)
        if len(history) >= 4 and abs(new - history[-3]) <= tol * abs(new) and abs(new - lam) > tol * abs(lam):  # noqa: PLR2004
            logger.warning(t3_oscillates.format(a=lam, b=new))
            return finish(new, False, outer, spectrum, index)
        lam = new
    return FixedPointResult(lam, False, max_outer, history)


def discreteness_diagnostic(  # noqa: PLR0913
    cs: CoefficientSet,
    dom: Domain,
    variant: TVariant | str,
    resolutions: list[int],
    eps: float,
    *,
    k: int = 16,
    gamma0: complex | None = None,
    delta: float | None = None,
) -> list[dict[str, float]]:
    """Count Ritz values with |mu| >= eps per resolution and the change between successive meshes."""
    if len(resolutions) < 2:  # noqa: PLR2004
        msg = "The discreteness diagnostic needs at least two resolutions."
        raise ValidationError(msg)
    meshes = [build_mesh(dom, n) for n in resolutions]
    kind = TVariant(variant)
    shift = gamma0
    if shift is None and kind in (TVariant.T1, TVariant.T3):
        shift = default_lambda0(meshes[0])

    def count(mesh: Mesh) -> SpectralResult:
        lam = -10.0 if kind is TVariant.T3 else None
        op = build_operator(mesh, cs, kind, shift, delta=delta, lam=lam, allow_singular=True)
        return arnoldi_eigs(op, min(k, op.dofmap.total // 4), tol=1e-6)

    with ThreadPoolExecutor(max_workers=min(thread_count(), len(meshes))) as pool:
        spectra = list(tqdm(pool.map(count, meshes), total=len(meshes), desc="resolutions", unit="mesh", colour="green"))
    rows: list[dict[str, float]] = []
    for n, mesh, spectrum in zip(resolutions, meshes, spectra):
        hits = int(sum(abs(mu) >= eps for mu in spectrum.mu))
        rows.append(
            {
                "n": n,
                "h_max": mesh.h_max,
                "count": hits,
                "stability": hits - rows[-1]["count"] if rows else 0,
                "saturated": hits >= len(spectrum.mu),
            },
        )
    return rows


def extrapolated_spectrum(  # noqa: PLR0913
    m: Mesh,
    cs: CoefficientSet,
    variant: TVariant | str,
    k: int,
    schedule: list[float] | None = None,
    *,
    gamma0: complex | None = None,
    tol: float = 1e-8,
    lam: complex | None = None,
) -> dict[str, list[complex]]:
    """Recovered eigenvalues at every absorption level and their linear extrapolation to zero absorption."""
    deltas = sorted(schedule or DELTA_SCHEDULE, reverse=True)
    dm, blocks = build_dofmap(m), nodal_blocks(m, cs)
    levels: dict[str, list[complex]] = {}
    for delta in tqdm(deltas, desc="spectra", unit="delta", colour="green"):
        op = build_operator(m, cs, variant, gamma0, delta=delta, lam=lam, dm=dm, blocks=blocks)
        levels[f"{delta:g}"] = arnoldi_eigs(op, k, tol).lambda_ite
    fine = levels[f"{deltas[-1]:g}"]
    coarse = levels[f"{deltas[-2]:g}"] if len(deltas) > 1 else []
    extrapolated = []
    for value in fine:
        if not coarse:
            extrapolated.append(value)
            continue
        partner = min(coarse, key=lambda c, v=value: abs(c - v))
        extrapolated.append(value + (value - partner) * deltas[-1] / (deltas[-2] - deltas[-1]))
    levels["extrapolated"] = extrapolated
    return levels


def first_real_ite(  # noqa: PLR0913
    m: Mesh,
    cs: CoefficientSet,
    variant: TVariant | str,
    k: int,
    *,
    gamma0: complex | None = None,
    tol: float = 1e-8,
    lam: complex | None = None,
) -> complex | None:
    """First real eigenvalue of the spectrum extrapolated from delta and delta / 2."""
    shift = default_shift(m, cs, variant) if gamma0 is None else complex(gamma0)
    delta = spectral_delta(shift, variant)
    schedule = [delta, 0.5 * delta] if delta > 0 else [0.0]
    levels = extrapolated_spectrum(m, cs, variant, k, schedule, gamma0=shift, tol=tol, lam=lam)
    return first_real(levels["extrapolated"], shift)


@dataclass(eq=False)
class RefinementStudy(object):
    """First real eigenvalue on nested meshes and the observed convergence order."""

    h_max: list[float]
    values: list[complex | None]
    order: float | None = None

    def rows(self: Self) -> list[dict[str, float | None]]:
        """One row per mesh level."""
        return [
            {"h_max": h, "re_lambda": None if v is None else v.real, "im_lambda": None if v is None else v.imag}
            for h, v in zip(self.h_max, self.values)
        ]


def refinement_study(  # noqa: PLR0913
    m: Mesh,
    cs: CoefficientSet,
    variant: TVariant | str,
    k: int,
    levels: int = 3,
    *,
    gamma0: complex | None = None,
    tol: float = 1e-8,
    lam: complex | None = None,
) -> RefinementStudy:
    """First real eigenvalue on m and its uniform refinements.

    The order comes from the last three levels as log(|l0 - l1| / |l1 - l2|) / log(h0 / h1).
    """
    if levels < 2:  # noqa: PLR2004
        msg = "A refinement study needs at least two levels."
        raise ValidationError(msg)
    meshes = [m]
    for _ in range(levels - 1):
        meshes.append(refine(meshes[-1]))
    study = RefinementStudy([mesh.h_max for mesh in meshes], [])
    for mesh in meshes:
        study.values.append(first_real_ite(mesh, cs, variant, k, gamma0=gamma0, tol=tol, lam=lam))
        logger.info(f"Refinement level h={mesh.h_max:.4f}: first real eigenvalue {study.values[-1]}.")
    last = [v for v in study.values[-3:] if v is not None]
    if len(last) == 3:  # noqa: PLR2004
        a, b, c = last
        coarse, fine = abs(a - b), abs(b - c)
        if coarse > 0 and fine > 0:
            study.order = float(np.log(coarse / fine) / np.log(study.h_max[-3] / study.h_max[-2]))
    return study


def regime_discrepancy(
    m: Mesh,
    cs: CoefficientSet,
    k: int,
    real_shift_ite: complex | None = None,
    *,
    tol: float = 1e-8,
) -> dict[str, complex | float | None]:
    """Lowest real eigenvalue through the real and the imaginary shift, and their relative gap."""
    if real_shift_ite is None:
        real_shift_ite = pick_real_ite(arnoldi_eigs(build_operator(m, cs, TVariant.T1), k, tol, h_max=m.h_max))
    imaginary_shift_ite = pick_real_ite(arnoldi_eigs(build_operator(m, cs, TVariant.T2), k, tol, h_max=m.h_max))
    gap = None
    if real_shift_ite is not None and imaginary_shift_ite is not None:
        gap = abs(real_shift_ite - imaginary_shift_ite) / abs(real_shift_ite)
    logger.info(f"Real and imaginary shifts: {real_shift_ite} vs {imaginary_shift_ite}.")
    return {"T1": real_shift_ite, "T2": imaginary_shift_ite, "discrepancy": gap}
