"""Fourier-mode solution of the constant-coefficient half-space transmission problem.

R^{d-1} is replaced by a periodic lattice of period L, so the lateral Fourier transform is a DFT. Every lateral
mode xi solves a constant-coefficient ODE in the depth variable t whose decaying root is eta, and the two fields are
matched by v1 - v2 = phi and equal conormal flux at t = 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from loguru import logger
from scipy import fft
from tqdm import tqdm

from .assembly import Variant, assemble_system, build_dofmap, nodal_blocks
from .constant import LATTICE_PERIOD, LATTICE_POINTS, TAIL_TOL
from .exceptions import DegenerateDenominatorError, ValidationError
from .geometry import CoefficientSet, Domain, MatrixField, ScalarField
from .mesh import build_strip_mesh
from .solver import factorize, solve_vector
from .strings import degenerate_mode, lam_below_one, lattice_not_pow2

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray
    from typing_extensions import Self

    FloatArray = NDArray[np.float64]
    ComplexArray = NDArray[np.complex128]


@dataclass(frozen=True, eq=False)
class ModeSide(object):
    """Per-mode ODE data of one medium: a v'' + 2 i b v' - (c + i lam S) v = 0."""

    a: float
    b: FloatArray
    c: FloatArray
    delta: ComplexArray
    sqrt_delta: ComplexArray
    eta: ComplexArray

    def residual(self: Self, S: float, lam: float) -> FloatArray:
        """Relative residual of the characteristic equation at eta."""
        value = self.a * self.eta**2 + 2j * self.b * self.eta - (self.c + 1j * lam * S)
        scale = np.abs(self.a * self.eta**2) + np.abs(self.c + 1j * lam * S)
        return np.asarray(np.abs(value) / scale)


def mode_coefficients(A: ArrayLike, S: float, lam: float, xi: ArrayLike) -> ModeSide:
    """ODE coefficients and the decaying root for lateral frequencies xi of shape (d-1,) or (n, d-1)."""
    mat = np.asarray(A, dtype=float)
    d = mat.shape[0]
    freq = np.atleast_2d(np.asarray(xi, dtype=float)).reshape(-1, d - 1)
    a = float(mat[d - 1, d - 1])
    b = freq @ mat[d - 1, : d - 1]
    c = np.einsum("nk,kl,nl->n", freq, mat[: d - 1, : d - 1], freq)
    delta = -(b**2) + a * (c + 1j * lam * S)
    root = np.sqrt(delta.astype(complex))
    eta = (-1j * b - root) / a
    return ModeSide(a, b, c, delta, root, eta)


@dataclass(frozen=True, eq=False)
class ModeData(object):
    """Both sides of every lattice mode with the matched amplitudes."""

    xi: FloatArray
    side1: ModeSide
    side2: ModeSide
    alpha1: ComplexArray
    alpha2: ComplexArray

    def rows(self: Self) -> list[dict[str, float]]:
        """Per-mode report rows."""
        names = [f"xi{i + 1}" for i in range(self.xi.shape[1])]
        return [
            {
                **dict(zip(names, map(float, self.xi[k]))),
                "re_eta1": float(self.side1.eta[k].real),
                "im_eta1": float(self.side1.eta[k].imag),
                "re_eta2": float(self.side2.eta[k].real),
                "im_eta2": float(self.side2.eta[k].imag),
                "abs_alpha1": float(abs(self.alpha1[k])),
            }
            for k in range(len(self.xi))
        ]


def lattice_phi(points: int, d: int = 2, amplitude: float = 0.5, period: float = LATTICE_PERIOD) -> FloatArray:
    """Band-limited datum 1 + amplitude cos(2 pi x1 / period) on the lattice."""
    x = np.arange(points) * period / points
    profile = 1.0 + amplitude * np.cos(2.0 * np.pi * x / period)
    if d == 2:  # noqa: PLR2004
        return profile
    return np.asarray(np.broadcast_to(profile[:, None], (points, points)).copy())


@dataclass(frozen=True, eq=False)
class HalfSpaceProblem(object):
    """Constant media, lambda >= 1 and the jump datum phi sampled on the lateral lattice."""

    A1: FloatArray
    A2: FloatArray
    S1: float
    S2: float
    lam: float
    phi: FloatArray
    period: float = LATTICE_PERIOD
    depth: float | None = None

    def __post_init__(self: Self) -> None:
        d = self.dim
        for name, mat in (("A1", self.A1), ("A2", self.A2)):
            arr = np.asarray(mat, dtype=float)
            if arr.shape != (d, d) or not np.allclose(arr, arr.T) or np.linalg.eigvalsh(arr).min() <= 0:
                msg = f"{name} must be a symmetric positive definite {d}x{d} matrix."
                raise ValidationError(msg)
        if min(self.S1, self.S2) <= 0:
            msg = "S1 and S2 must be positive."
            raise ValidationError(msg)
        if self.lam < 1:
            raise ValidationError(lam_below_one.format(lam=self.lam))
        for n in np.shape(self.phi):
            if n < 1 or n & (n - 1):
                raise ValidationError(lattice_not_pow2.format(n=n))

    @property
    def dim(self: Self) -> int:
        """Space dimension d."""
        return np.ndim(self.phi) + 1

    @classmethod
    def template(  # noqa: PLR0913
        cls: type[Self],
        a1: float = 2.0,
        a2: float = 1.0,
        s1: float = 1.0,
        s2: float = 1.0,
        *,
        lam: float = 1.0,
        points: int = LATTICE_POINTS,
        amplitude: float = 0.5,
        period: float = LATTICE_PERIOD,
        d: int = 2,
    ) -> Self:
        """Isotropic media a_j I with the default band-limited datum."""
        eye = np.eye(d)
        return cls(a1 * eye, a2 * eye, s1, s2, lam, lattice_phi(points, d, amplitude, period), period)

    def with_lambda(self: Self, lam: float) -> HalfSpaceProblem:
        """Same media and datum at another lambda."""
        return HalfSpaceProblem(self.A1, self.A2, self.S1, self.S2, lam, self.phi, self.period, self.depth)

    @property
    def frequencies(self: Self) -> FloatArray:
        """Lattice frequencies in FFT order, shape (N^(d-1), d-1)."""
        axes = [2.0 * np.pi * fft.fftfreq(n, d=self.period / n) for n in np.shape(self.phi)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def conditions_hold(self: Self) -> tuple[bool, bool]:
        """(complementing condition for the normal e_d, contrast a1 S1 != a2 S2)."""
        from .conditions import check_complementing

        e = np.zeros(self.dim)
        e[-1] = 1.0
        complementing = check_complementing(np.asarray(self.A1), np.asarray(self.A2), e).holds
        contrast = abs(self.A1[-1][-1] * self.S1 - self.A2[-1][-1] * self.S2) > 1e-10  # noqa: PLR2004
        return complementing, contrast


def mode_data(p: HalfSpaceProblem) -> ModeData:
    """Mode coefficients on the lattice and amplitudes alpha_1 = phi_hat sqrt(D2) / (sqrt(D2) - sqrt(D1))."""
    xi = p.frequencies
    side1 = mode_coefficients(p.A1, p.S1, p.lam, xi)
    side2 = mode_coefficients(p.A2, p.S2, p.lam, xi)
    denominator = side2.sqrt_delta - side1.sqrt_delta
    scale = np.abs(side1.sqrt_delta) + np.abs(side2.sqrt_delta)
    bad = np.abs(denominator) < 1e-12 * scale  # noqa: PLR2004
    if bad.any():
        k = int(np.argmax(bad))
        condition = "contrast a1*S1 != a2*S2" if not np.any(xi[k]) else "complementing"
        raise DegenerateDenominatorError(degenerate_mode.format(xi=xi[k].tolist(), condition=condition), condition)
    phi_hat = fft.fftn(np.asarray(p.phi, dtype=complex)).ravel()
    alpha1 = phi_hat * side2.sqrt_delta / denominator
    return ModeData(xi, side1, side2, alpha1, alpha1 - phi_hat)


@dataclass(eq=False)
class HalfSpaceSolution(object):
    """Synthesized fields on the lattice times the depth grid, with closed-form norms."""

    problem: HalfSpaceProblem
    modes: ModeData
    t: FloatArray
    v1: ComplexArray
    v2: ComplexArray
    depth: float
    tail: float

    @property
    def _factor(self: Self) -> float:
        total = np.size(self.problem.phi)
        return float(self.problem.period ** (self.problem.dim - 1) / total**2)

    def _field_norm2(self: Self, with_gradient: bool) -> float:
        xi2 = np.sum(self.modes.xi**2, axis=1)
        total = 0.0
        for alpha, side in ((self.modes.alpha1, self.modes.side1), (self.modes.alpha2, self.modes.side2)):
            weight = 1.0 + xi2 + np.abs(side.eta) ** 2 if with_gradient else 1.0
            total += float(np.sum(np.abs(alpha) ** 2 * weight / (2.0 * np.abs(side.eta.real))))
        return self._factor * total

    @property
    def l2_norm(self: Self) -> float:
        """||(v1, v2)|| over the half-space, exact in t."""
        return float(np.sqrt(self._field_norm2(with_gradient=False)))

    @property
    def h1_norm(self: Self) -> float:
        """H1 norm over the half-space, exact in t."""
        return float(np.sqrt(self._field_norm2(with_gradient=True)))

    def phi_norm(self: Self, s: float = 0.0) -> float:
        """Lattice H^s norm of phi with the multiplier (1 + |xi|^2)^(s/2)."""
        phi_hat = fft.fftn(np.asarray(self.problem.phi, dtype=complex)).ravel()
        weight = (1.0 + np.sum(self.modes.xi**2, axis=1)) ** s
        return float(np.sqrt(self._factor * np.sum(weight * np.abs(phi_hat) ** 2)))

    def evaluate(self: Self, x: FloatArray, t: FloatArray) -> tuple[ComplexArray, ComplexArray]:
        """Both fields at arbitrary points (x, t) of a two-dimensional problem by direct mode summation."""
        n = np.size(self.problem.phi)
        phase = np.exp(1j * np.outer(x, self.modes.xi[:, 0]))
        v1 = (phase * np.exp(np.outer(t, self.modes.side1.eta))) @ self.modes.alpha1 / n
        v2 = (phase * np.exp(np.outer(t, self.modes.side2.eta))) @ self.modes.alpha2 / n
        return v1, v2


def solve_halfspace(p: HalfSpaceProblem, nt: int = 101) -> HalfSpaceSolution:
    """Match both sides per mode and synthesize v_j(x', t) by inverse FFT over the lattice."""
    modes = mode_data(p)
    min_decay = float(min(np.abs(modes.side1.eta.real).min(), np.abs(modes.side2.eta.real).min()))
    depth = p.depth or float(np.log(1.0 / TAIL_TOL) / min_decay)
    t = np.linspace(0.0, depth, nt)
    shape = np.shape(p.phi)
    axes = tuple(range(len(shape)))
    fields = []
    for alpha, side in ((modes.alpha1, modes.side1), (modes.alpha2, modes.side2)):
        coeff = alpha[:, None] * np.exp(np.outer(side.eta, t))
        fields.append(fft.ifftn(coeff.reshape(*shape, nt), axes=axes))
    tail = float(np.exp(-min_decay * depth))
    logger.debug(f"Half-space solve at lambda={p.lam:g}: depth {depth:.3g}, tail {tail:.2e}.")
    return HalfSpaceSolution(p, modes, t, fields[0], fields[1], depth, tail)


@dataclass(eq=False)
class ScalingReport(object):
    """Norm scaling in lambda and the ratio bounded by the half-space estimate."""

    rows: list[dict[str, float]] = field(default_factory=list)
    slope: float = float("nan")
    ratio_max: float = float("nan")
    ratio_min: float = float("nan")
    c_check: float = float("nan")
    degenerate: list[float] = field(default_factory=list)

    @property
    def bounded(self: Self) -> bool:
        """Finite bound ratio at every lambda."""
        return not self.degenerate and bool(np.isfinite(self.ratio_max))


def verify_halfspace_estimate(template: HalfSpaceProblem, lam_grid: list[float]) -> ScalingReport:
    """Fit the slope of log ||v|| against log lambda and track the estimate's ratio across lam_grid."""
    report = ScalingReport()
    lams, norms = [], []
    for lam in tqdm(lam_grid, desc="half-space", unit="lambda", colour="green"):
        problem = template.with_lambda(lam)
        try:
            modes = mode_data(problem)
        except DegenerateDenominatorError as e:
            logger.warning(str(e))
            report.degenerate.append(lam)
            report.rows.append({"lambda": lam, "l2_norm": np.inf, "h1_norm": np.inf, "bound_ratio": np.inf})
            continue
        solution = HalfSpaceSolution(problem, modes, np.zeros(1), np.zeros(0), np.zeros(0), 0.0, 0.0)
        l2, h1 = solution.l2_norm, solution.h1_norm
        ratio = (h1 + np.sqrt(lam) * l2) / (solution.phi_norm(0.5) + lam**0.25 * solution.phi_norm(0.0))
        bound = np.abs(modes.side2.sqrt_delta) / np.abs(modes.side2.sqrt_delta - modes.side1.sqrt_delta)
        report.c_check = float(np.nanmax([report.c_check, bound.max()]))
        report.rows.append({"lambda": lam, "l2_norm": l2, "h1_norm": h1, "bound_ratio": float(ratio)})
        lams.append(lam)
        norms.append(l2)
    if len(lams) >= 2:  # noqa: PLR2004
        report.slope = float(np.polyfit(np.log(lams), np.log(norms), 1)[0])
    ratios = [row["bound_ratio"] for row in report.rows]
    report.ratio_max, report.ratio_min = float(np.max(ratios)), float(np.min(ratios))
    logger.info(f"Half-space slope {report.slope:.4f}, bound ratio in [{report.ratio_min:.3g}, {report.ratio_max:.3g}].")
    return report


@dataclass(eq=False)
class StripComparison(object):
    """Finite element solution on the periodic strip against the exact mode solution."""

    relative_l2_error: float
    fem: tuple[ComplexArray, ComplexArray]
    exact: tuple[ComplexArray, ComplexArray]


def strip_fem_solution(p: HalfSpaceProblem, nx: int, nt: int, depth: float) -> StripComparison:
    """Solve the two-dimensional problem on [0, L) x [0, depth] with phi lifted into field 1.

    The top row is clamped to zero and the lateral sides are identified.
    """
    if p.dim != 2:  # noqa: PLR2004
        msg = "The strip cross-check is two-dimensional."
        raise ValidationError(msg)
    dom = Domain.strip(p.period, depth)
    mesh = build_strip_mesh(dom, nx, nt)
    cs = CoefficientSet(
        A1=MatrixField.constant(p.A1, name="A1"),
        A2=MatrixField.constant(p.A2, name="A2"),
        S1=ScalarField.constant(p.S1, name="S1"),
        S2=ScalarField.constant(p.S2, name="S2"),
        lambda_bound=float(max(np.max(p.A1), np.max(p.A2), p.S1, p.S2, 1.0)),
        domain=dom,
        name="halfspace",
    )
    dm = build_dofmap(mesh)
    blocks = nodal_blocks(mesh, cs)
    system = assemble_system(mesh, dm, cs, 1j * p.lam, 0.0, Variant.SYS4, blocks=blocks)
    modes = mode_data(p)
    solution = HalfSpaceSolution(p, modes, np.zeros(1), np.zeros(0), np.zeros(0), depth, 0.0)
    x, t = mesh.vertices[:, 0], mesh.vertices[:, 1]
    lateral = np.arange(np.size(p.phi)) * p.period / np.size(p.phi)
    on_gamma = np.isclose(t, 0.0)
    lift = np.zeros(mesh.n_vertices, dtype=complex)
    lift[on_gamma] = np.interp(np.mod(x[on_gamma], p.period), np.append(lateral, p.period), np.append(p.phi, p.phi[0]))
    rhs = -(dm.P1.T @ (system.blocks.block(system.coefficients, 1) @ lift))
    x_dofs = solve_vector(factorize(system), rhs)
    v1, v2 = dm.P1 @ x_dofs + lift, dm.P2 @ x_dofs
    e1, e2 = solution.evaluate(x, t)
    mass = blocks.M
    error = np.real(np.vdot(v1 - e1, mass @ (v1 - e1)) + np.vdot(v2 - e2, mass @ (v2 - e2)))
    scale = np.real(np.vdot(e1, mass @ e1) + np.vdot(e2, mass @ e2))
    relative = float(np.sqrt(error / scale))
    logger.info(f"Strip cross-check on {nx}x{nt}: relative L2 error {relative:.3e}.")
    return StripComparison(relative, (v1, v2), (e1, e2))
