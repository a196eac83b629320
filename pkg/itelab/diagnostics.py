"""Numerical checks of the energy identities, exponential decay, multiplier and Hardy inequalities."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Callable

import numpy as np
from loguru import logger
from scipy import sparse
from tqdm import tqdm

from .assembly import (
    FormCoefficients,
    NodalBlocks,
    Variant,
    at_quadrature,
    boundary_load,
    element_data,
    gradient_load,
    load_vector,
    mass_matrix,
    nodal_blocks,
    stiffness_matrix,
    vector_at_quadrature,
)
from .constant import UNDERFLOW
from .exceptions import ValidationError
from .norms import NormKind, WeightedNorms, dirichlet_energy, trace_norms, weighted_mass, weighted_norm
from .solver import FieldPair, factorize, solve_vector
from .strings import mesh_mismatch, multiplier_residual

if TYPE_CHECKING:
    from numpy.typing import NDArray
    from typing_extensions import Self

    from .assembly import ScalarData
    from .geometry import CoefficientSet, MatrixField, ScalarField
    from .mesh import Mesh

    FloatArray = NDArray[np.float64]
    ComplexArray = NDArray[np.complex128]

__all__ = [
    "DecayFit",
    "IdentityResiduals",
    "IdentityVariant",
    "MultiplierReport",
    "MultiplierSweep",
    "NormKind",
    "WeightedNorms",
    "energy_identity_residuals",
    "hardy_ratio",
    "multiplier_sweep",
    "solve_single_field",
    "verify_decay",
    "verify_multiplier",
    "weighted_norm",
]

MULTIPLIER_RTOL = 1e-8
DECAY_MIN_POINTS = 4


class IdentityVariant(str, Enum):
    """Which pair of identities to evaluate."""

    REAL_SHIFT = "real_shift"
    IMAG_SHIFT = "imag_shift"
    DIV_G = "divG"

    @property
    def system(self: Self) -> Variant:
        """System whose form coefficients the identities use."""
        return {
            IdentityVariant.REAL_SHIFT: Variant.SYS1,
            IdentityVariant.IMAG_SHIFT: Variant.SYS2,
            IdentityVariant.DIV_G: Variant.SYS3,
        }[self]

    @classmethod
    def of(cls: type[Self], value: IdentityVariant | Variant | str) -> IdentityVariant:
        """Accept an identity name or the system it belongs to."""
        if isinstance(value, Variant):
            return {
                Variant.SYS1: cls.REAL_SHIFT,
                Variant.SYS2: cls.IMAG_SHIFT,
                Variant.SYS3: cls.DIV_G,
                Variant.SYS4: cls.IMAG_SHIFT,
            }[value]
        return cls(value)


@dataclass(frozen=True)
class IdentityResiduals(object):
    """Relative residuals of both identities and the size functionals M and N."""

    r1: float
    r2: float
    m_value: float
    n_value: float
    variant: IdentityVariant

    def to_dict(self: Self) -> dict[str, float | str]:
        """JSON ready mapping."""
        return {"r1": self.r1, "r2": self.r2, "m_value": self.m_value, "n_value": self.n_value, "variant": self.variant.value}


def _relative(lhs: complex, rhs: complex, terms: list[complex]) -> float:
    scale = max(abs(t) for t in [lhs, rhs, *terms])
    return float(abs(lhs - rhs) / scale) if scale > 0 else 0.0


def _check_size(mesh: Mesh, *fields: NDArray[np.generic]) -> None:
    for u in fields:
        if u.shape[0] != mesh.n_vertices:
            raise ValidationError(mesh_mismatch.format(got=u.shape[0], expected=mesh.n_vertices))


def _quad_l2(mesh: Mesh, value: ScalarData) -> float:
    if value is None:
        return 0.0
    return float(np.sum((mesh.areas / 3.0)[:, None] * np.abs(at_quadrature(mesh, value)) ** 2))


def _conjugate(c: FormCoefficients) -> FormCoefficients:
    return FormCoefficients(*(np.conj(complex(x)) for x in (c.k1, c.s1, c.z1, c.k2, c.s2, c.z2)))


def _nodal(mesh: Mesh, h: Callable[..., FloatArray] | NDArray[np.generic] | None) -> ComplexArray:
    if h is None:
        return np.zeros(mesh.n_vertices, dtype=complex)
    return np.asarray(h(mesh.vertices) if callable(h) else h, dtype=complex)


def _m_functional(mesh: Mesh, v: FieldPair, g: tuple[ScalarData, ScalarData], h: ComplexArray) -> float:
    """||v|| ||g|| in L2 plus ||h||_{-1/2} ||v||_{1/2} on the boundary."""
    v_norm = np.sqrt(weighted_mass(v.u1, mesh) + weighted_mass(v.u2, mesh))
    g_norm = np.sqrt(_quad_l2(mesh, g[0]) + _quad_l2(mesh, g[1]))
    boundary = trace_norms(h, mesh).h_minus_half * trace_norms(v.u2, mesh).h_half if h.any() else 0.0
    return float(v_norm * g_norm + boundary)


def _n_functional(
    mesh: Mesh,
    v: FieldPair,
    g: tuple[ScalarData, ScalarData],
    G1: Callable[..., FloatArray] | NDArray[np.generic] | None,
) -> float:
    """Integral of |g| |w| + |g1 - g2| |v| + |G1| |grad v2|."""
    weights = (mesh.areas / 3.0)[:, None]
    zero = np.zeros((mesh.n_triangles, 3))
    g1 = zero if g[0] is None else at_quadrature(mesh, g[0])
    g2 = zero if g[1] is None else at_quadrature(mesh, g[1])
    u1, u2 = at_quadrature(mesh, v.u1), at_quadrature(mesh, v.u2)
    g_abs = np.sqrt(np.abs(g1) ** 2 + np.abs(g2) ** 2)
    v_abs = np.sqrt(np.abs(u1) ** 2 + np.abs(u2) ** 2)
    total = np.sum(weights * (g_abs * np.abs(u1 - u2) + np.abs(g1 - g2) * v_abs))
    if G1 is not None:
        grad_v2 = np.einsum("tic,ti->tc", element_data(mesh).gradients, v.u2[mesh.triangles])
        G = vector_at_quadrature(mesh, G1)
        total += np.sum(weights * np.linalg.norm(G, axis=2) * np.linalg.norm(np.abs(grad_v2), axis=1)[:, None])
    return float(total)


def energy_identity_residuals(  # noqa: PLR0913
    v: FieldPair,
    g: tuple[ScalarData, ScalarData],
    h: Callable[..., FloatArray] | NDArray[np.generic] | None,
    cs: CoefficientSet,
    gamma0: complex,
    variant: IdentityVariant | Variant | str,
    *,
    mesh: Mesh,
    delta: float = 0.0,
    G1: Callable[..., FloatArray] | NDArray[np.generic] | None = None,
    blocks: NodalBlocks | None = None,
) -> IdentityResiduals:
    """Evaluate both sides of the two energy identities for w = v1 - v2.

    The first identity tests the field equations with (w, 0) and (0, w); the second tests with (v2, v2), conjugates,
    and eliminates the field-1 cross term with the field-2 equation. Both use the regularized form coefficients, so a
    discrete solve at any delta satisfies them up to its own residual.
    """
    kind = IdentityVariant.of(variant)
    u1, u2 = np.asarray(v.u1, dtype=complex), np.asarray(v.u2, dtype=complex)
    _check_size(mesh, u1, u2)
    if G1 is not None and kind is not IdentityVariant.DIV_G:
        msg = f"A divergence load only enters the {IdentityVariant.DIV_G.value} identities."
        raise ValidationError(msg)
    coef = FormCoefficients.for_variant(kind.system, gamma0, delta)
    bar = _conjugate(coef)
    nodal = blocks or nodal_blocks(mesh, cs)
    b1, b2 = nodal.block(coef, 1), nodal.block(coef, 2)
    b1_bar, b2_bar = nodal.block(bar, 1), nodal.block(bar, 2)
    n1_bar = bar.s1 * nodal.M_S1 + bar.z1 * nodal.M
    n2 = coef.s2 * nodal.M_S2 + coef.z2 * nodal.M
    zero = np.zeros(mesh.n_vertices, dtype=complex)
    l1 = zero if g[0] is None else load_vector(mesh, g[0])
    l2 = zero if g[1] is None else load_vector(mesh, g[1])
    l_div = zero if G1 is None else gradient_load(mesh, G1)
    h_nodal = _nodal(mesh, h)
    l_h = boundary_load(mesh, h_nodal) if h is not None else zero
    w = u1 - u2

    lhs1 = np.vdot(w, b1 @ w)
    terms1 = [-np.vdot(w, l1 - l2), np.vdot(w, l_div), np.vdot(w, (b2 - b1) @ u2)]
    rhs1 = sum(terms1)

    stiff = np.conj(coef.k1) * nodal.K1 - coef.k2 * nodal.K2
    lhs_terms2 = [np.vdot(w, stiff @ u2), np.vdot(u2, (b1_bar - b2_bar) @ u2)]
    terms2 = [
        np.vdot(w, l2),
        -np.vdot(l1 - l2, u2),
        np.vdot(l_div, u2),
        np.vdot(l_h, u2),
        np.vdot(w, (n2 - n1_bar) @ u2),
    ]
    lhs2, rhs2 = sum(lhs_terms2), sum(terms2)

    result = IdentityResiduals(
        r1=_relative(lhs1, rhs1, terms1),
        r2=_relative(lhs2, rhs2, lhs_terms2 + terms2),
        m_value=_m_functional(mesh, v, g, h_nodal),
        n_value=_n_functional(mesh, v, g, G1),
        variant=kind,
    )
    logger.debug(f"{kind.value} identities: r1={result.r1:.3e}, r2={result.r2:.3e}.")
    return result


def _single_field_operator(mesh: Mesh, A: MatrixField, S: ScalarField, lam: float, imaginary: bool) -> sparse.csr_matrix:
    """Matrix of -(div(A grad u) - lam S u) in weak form: K[A] + lam M[S] (lam -> i lam when imaginary)."""
    shift = 1j * lam if imaginary else lam
    return (stiffness_matrix(mesh, A) + shift * mass_matrix(mesh, S)).tocsr()


def _clamped(mesh: Mesh) -> NDArray[np.bool_]:
    fixed = mesh.is_boundary.copy()
    if len(mesh.dirichlet):
        fixed |= mesh.dirichlet
    return fixed


def solve_single_field(  # noqa: PLR0913
    mesh: Mesh,
    A: MatrixField,
    S: ScalarField,
    lam: float,
    *,
    f: ScalarData = None,
    drive: float = 0.0,
    imaginary: bool = False,
) -> ComplexArray:
    """Nodal solution of div(A grad u) - lam S u = f with u = drive on the boundary."""
    op = _single_field_operator(mesh, A, S, lam, imaginary)
    fixed = _clamped(mesh)
    free = np.flatnonzero(~fixed)
    u = np.where(fixed, complex(drive), 0.0 + 0.0j)
    rhs = -(load_vector(mesh, f) if f is not None else np.zeros(mesh.n_vertices, dtype=complex)) - op @ u
    factorization = factorize(op[free][:, free])
    u[free] = solve_vector(factorization, rhs[free])
    return u


@dataclass(eq=False)
class DecayFit(object):
    """Least squares fit log(ratio) = log c1 - c2 sqrt(lam)."""

    rows: list[dict[str, float]]
    c1: float
    c2: float
    r_squared: float
    clamped: bool = False


def decay_ratio(u: NDArray[np.generic], mesh: Mesh, s: float) -> float:
    """||u||_{H1(d >= s)} / ||u||_{L2(d < s)}."""
    inner_mass = weighted_mass(u, mesh, 0.0, region=s)
    band_mass = weighted_mass(u, mesh) - inner_mass
    inner = np.sqrt(inner_mass + dirichlet_energy(u, mesh, region=s))
    return float(inner / np.sqrt(band_mass)) if band_mass > 0 else float("inf")


def verify_decay(  # noqa: PLR0913
    mesh: Mesh,
    A: MatrixField,
    S: ScalarField,
    lam_grid: list[float],
    s: float,
    *,
    boundary_drive: float = 1.0,
    imaginary: bool = False,
) -> DecayFit:
    """Solve the single field problem driven by constant boundary data at each lam and fit the interior decay."""
    grid = sorted(float(x) for x in lam_grid)
    if len(grid) < DECAY_MIN_POINTS or grid[0] <= 0 or grid[-1] < 10.0 * grid[0]:
        msg = f"The decay grid needs at least {DECAY_MIN_POINTS} positive values spanning a decade, got {grid}."
        raise ValidationError(msg)
    if not 0.0 < s < float(mesh.d_gamma.max()):
        msg = f"Band width s={s} must lie inside the inradius {float(mesh.d_gamma.max()):.3g}."
        raise ValidationError(msg)
    rows, clamped = [], False
    for lam in tqdm(grid, desc="decay", unit="lambda", colour="green"):
        u = solve_single_field(mesh, A, S, lam, drive=boundary_drive, imaginary=imaginary)
        ratio = decay_ratio(u, mesh, s)
        hit = ratio < UNDERFLOW
        if hit:
            logger.warning(f"Decay ratio underflows at lambda={lam:g}; clamped to {UNDERFLOW:g}.")
            ratio, clamped = UNDERFLOW, True
        rows.append({"lambda": lam, "ratio": ratio, "clamped": float(hit)})
    x = np.sqrt(grid)
    y = np.log([r["ratio"] for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = intercept + slope * x
    spread = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - float(np.sum((y - fitted) ** 2)) / spread if spread > 0 else 1.0
    fit = DecayFit(rows, float(np.exp(intercept)), float(-slope), r_squared, clamped)
    logger.info(f"Decay fit: c1={fit.c1:.4g}, c2={fit.c2:.4g}, R^2={fit.r_squared:.4f}.")
    return fit


@dataclass(frozen=True)
class MultiplierReport(object):
    """Both sides of the two multiplier inequalities."""

    lhs1: float
    rhs1: float
    lhs2: float
    rhs2: float

    @property
    def ratio1(self: Self) -> float:
        """lhs1 / rhs1, zero for a vanishing right side."""
        return self.lhs1 / self.rhs1 if self.rhs1 > 0 else 0.0

    @property
    def ratio2(self: Self) -> float:
        """lhs2 / rhs2, zero for a vanishing right side."""
        return self.lhs2 / self.rhs2 if self.rhs2 > 0 else 0.0


def verify_multiplier(  # noqa: PLR0913
    u: NDArray[np.generic],
    f: ScalarData,
    lam: float,
    alpha: float,
    mesh: Mesh,
    A: MatrixField,
    S: ScalarField,
    *,
    imaginary: bool = False,
) -> MultiplierReport:
    """Weighted sides of both inequalities for a discrete solution of div(A grad u) - lam S u = f."""
    values = np.asarray(u, dtype=complex)
    _check_size(mesh, values)
    if alpha < 0:
        msg = f"The multiplier weight exponent must be nonnegative, got {alpha}."
        raise ValidationError(msg)
    op = _single_field_operator(mesh, A, S, lam, imaginary)
    load = load_vector(mesh, f) if f is not None else np.zeros(mesh.n_vertices, dtype=complex)
    free = ~_clamped(mesh)
    action = (op @ values)[free]
    scale = max(float(np.linalg.norm(action)), float(np.linalg.norm(load[free])))
    residual = float(np.linalg.norm(action + load[free])) / scale if scale > 0 else 0.0
    if residual > MULTIPLIER_RTOL:
        raise ValidationError(multiplier_residual.format(residual=residual))
    f_norm2 = _quad_l2(mesh, f)
    return MultiplierReport(
        lhs1=lam * weighted_mass(values, mesh, alpha + 2.0),
        rhs1=dirichlet_energy(values, mesh, alpha) + f_norm2,
        lhs2=dirichlet_energy(values, mesh, alpha + 2.0),
        rhs2=lam * weighted_mass(values, mesh, alpha) + f_norm2,
    )


@dataclass(eq=False)
class MultiplierSweep(object):
    """Inequality constants C(lam) = lhs / rhs across a lam grid."""

    alpha: float
    lams: list[float]
    reports: list[MultiplierReport] = field(default_factory=list)

    @property
    def constants(self: Self) -> list[float]:
        """C(lam) of the first inequality."""
        return [r.ratio1 for r in self.reports]

    @property
    def bounded(self: Self) -> bool:
        """No growth: max C <= 10 C(lam_min) for both inequalities."""
        ok = True
        for ratios in ([r.ratio1 for r in self.reports], [r.ratio2 for r in self.reports]):
            if ratios and ratios[0] > 0:
                ok &= max(ratios) <= 10.0 * ratios[0]  # noqa: PLR2004
        return ok

    def rows(self: Self) -> list[dict[str, float]]:
        """One row per lam."""
        return [
            {"lambda": lam, "lhs1": r.lhs1, "rhs1": r.rhs1, "lhs2": r.lhs2, "rhs2": r.rhs2, "c1": r.ratio1, "c2": r.ratio2}
            for lam, r in zip(self.lams, self.reports)
        ]


def multiplier_sweep(  # noqa: PLR0913
    mesh: Mesh,
    A: MatrixField,
    S: ScalarField,
    f: ScalarData,
    lam_grid: list[float],
    alpha: float,
    *,
    imaginary: bool = False,
) -> MultiplierSweep:
    """Solve with zero boundary data at each lam and track the multiplier constants."""
    sweep = MultiplierSweep(alpha, sorted(float(x) for x in lam_grid))
    for lam in tqdm(sweep.lams, desc="multiplier", unit="lambda", colour="green"):
        u = solve_single_field(mesh, A, S, lam, f=f, imaginary=imaginary)
        sweep.reports.append(verify_multiplier(u, f, lam, alpha, mesh, A, S, imaginary=imaginary))
    logger.info(f"Multiplier sweep alpha={alpha:g}: constants {[f'{c:.3e}' for c in sweep.constants]}.")
    return sweep


def hardy_ratio(w: NDArray[np.generic], mesh: Mesh) -> float:
    """Integral of d^-2 |w|^2 over the integral of |grad w|^2 for w vanishing on the boundary."""
    values = np.asarray(w)
    _check_size(mesh, values)
    peak = float(np.abs(values).max()) if values.size else 0.0
    if peak == 0.0:
        return 0.0
    if np.abs(values[mesh.is_boundary]).max() > 1e-12 * peak:  # noqa: PLR2004
        msg = "Hardy ratio needs a field vanishing on the boundary."
        raise ValidationError(msg)
    energy = dirichlet_energy(values, mesh)
    return weighted_mass(values, mesh, -2.0) / energy if energy > 0 else 0.0


