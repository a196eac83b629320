"""Sampled certificates for the hypotheses on the media."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any

import numpy as np
from loguru import logger
from scipy.linalg import null_space

from .constant import STRICT_TOL, SYMMETRY_TOL
from .exceptions import EllipticityError, ValidationError
from .geometry import pushforward

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray
    from typing_extensions import Self

    from .geometry import CoefficientSet, Diffeomorphism, Domain

    FloatArray = NDArray[np.float64]

MAX_WITNESSES = 100


class Hypothesis(str, Enum):
    """Checkable hypotheses."""

    THM1 = "thm1"
    THM2 = "thm2"
    THM3 = "thm3"
    THM4 = "thm4"
    PRO_A1A2 = "pro_A1A2"


@dataclass(frozen=True, order=True)
class Witness(object):
    """A sample at which a hypothesis fails."""

    x: float
    y: float
    reason: str


@dataclass(eq=False)
class HypothesisReport(object):
    """Outcome of a sampled hypothesis check."""

    hypothesis: Hypothesis
    holds: bool
    best_c: float
    alpha_or_beta: float
    tau: float
    samples: int
    K: float | None = None
    Lambda2: float | None = None
    witnesses: list[Witness] = field(default_factory=list)
    failures: int = 0
    flagged: int = 0
    skipped_corners: int = 0
    notes: list[str] = field(default_factory=list)
    label: str = "sampled certificate"

    def to_dict(self: Self) -> dict[str, Any]:
        """JSON ready mapping."""
        data = asdict(self)
        data["hypothesis"] = self.hypothesis.value
        data["witnesses"] = [asdict(w) for w in self.witnesses]
        return data


def _report(  # noqa: PLR0913
    hyp: Hypothesis,
    points: FloatArray,
    failing: dict[str, NDArray[np.bool_]],
    best_c: float,
    alpha_or_beta: float,
    tau: float,
    **extra: Any,
) -> HypothesisReport:
    witnesses = sorted(
        Witness(float(points[i, 0]), float(points[i, 1]), reason)
        for reason, mask in failing.items()
        for i in np.flatnonzero(mask)
    )
    holds = not witnesses and best_c > STRICT_TOL
    report = HypothesisReport(
        hypothesis=hyp,
        holds=holds,
        best_c=max(best_c, 0.0),
        alpha_or_beta=alpha_or_beta,
        tau=tau,
        samples=len(points),
        witnesses=witnesses[:MAX_WITNESSES],
        failures=len(witnesses),
        **extra,
    )
    logger.info(f"{hyp.value}: holds={report.holds}, best_c={report.best_c:.6g} over {report.samples} samples.")
    return report


def _gap_eigenvalue(cs: CoefficientSet, points: FloatArray) -> FloatArray:
    diff = cs.A1(points) - cs.A2(points)
    return np.asarray(np.linalg.eigvalsh(0.5 * (diff + np.swapaxes(diff, 1, 2))).min(axis=1))


def check_hypothesis(  # noqa: PLR0913
    cs: CoefficientSet,
    dom: Domain,
    hyp: Hypothesis | str,
    *,
    alpha_or_beta: float = 0.0,
    tau: float = 0.2,
    sample_count: int = 10_000,
    slack: float = 0.0,
    seed: int = 0,
    boundary_samples: int = 256,
) -> HypothesisReport:
    """Sample the band (or the whole domain for pro_A1A2) and evaluate the hypothesis with its best constant."""
    kind = Hypothesis(hyp)
    if kind is Hypothesis.THM4:
        return check_thm4(cs, dom, boundary_samples)
    if tau <= 0:
        msg = f"Band width tau must be positive, got {tau}."
        raise ValidationError(msg)
    if sample_count < 100:  # noqa: PLR2004
        msg = f"At least 100 samples are needed, got {sample_count}."
        raise ValidationError(msg)
    if not 0.0 <= alpha_or_beta < 2.0:  # noqa: PLR2004
        msg = f"The weight exponent must lie in [0, 2), got {alpha_or_beta}."
        raise ValidationError(msg)
    band = None if kind is Hypothesis.PRO_A1A2 else tau
    points, flagged = dom.nudge_inward(dom.sample_interior(sample_count, seed=seed, band=band))
    d = dom.distance(points)
    weight = d**alpha_or_beta
    sigma_gap = cs.S1(points) - cs.S2(points)
    sigma_floor = -SYMMETRY_TOL - slack
    common = {"flagged": int(flagged.sum())}

    if kind is Hypothesis.THM2:
        spread = np.linalg.norm(cs.A1(points) - cs.A2(points), ord=2, axis=(1, 2))
        ratio = sigma_gap / weight
        failing = {"A1 != A2": spread > STRICT_TOL, "S1 - S2 below c d^beta": ratio <= STRICT_TOL}
        return _report(kind, points, failing, float(ratio.min()), alpha_or_beta, tau, **common)

    gap = _gap_eigenvalue(cs, points)
    if kind is Hypothesis.PRO_A1A2:
        integral = float(sigma_gap.mean() * dom.area)
        failing = {"A1 - A2 not nonnegative": gap < -STRICT_TOL, "S1 < S2": sigma_gap < sigma_floor}
        if abs(integral) <= 1e-8 * dom.area:  # noqa: PLR2004
            failing["integral of S1 - S2 vanishes"] = np.arange(len(points)) == 0
        notes = [f"integral of S1 - S2 = {integral:.6e}"]
        return _report(kind, points, failing, abs(integral) / dom.area, alpha_or_beta, tau, notes=notes, **common)

    ratio = gap / weight
    failing = {"A1 - A2 below c d^alpha": ratio <= STRICT_TOL, "S1 < S2": sigma_gap < sigma_floor}
    if kind is Hypothesis.THM1:
        return _report(kind, points, failing, float(ratio.min()), alpha_or_beta, tau, **common)

    whole = dom.sample_interior(sample_count, seed=seed)
    s2 = cs.S2(whole)
    k_sigma = float(s2.max())
    return _report(
        kind,
        points,
        failing,
        float(ratio.min()),
        alpha_or_beta,
        tau,
        K=k_sigma,
        Lambda2=float(s2.min()) / k_sigma,
        notes=["largeness of K relative to Lambda2 is not certified"],
        **common,
    )


@dataclass(frozen=True)
class ComplementingResult(object):
    """Verdict of the complementing condition at one normal."""

    holds: bool
    margin: float


def _require_spd(name: str, A: FloatArray) -> None:
    if not np.allclose(A, A.T, rtol=0.0, atol=SYMMETRY_TOL * max(1.0, float(np.abs(A).max()))):
        msg = f"{name} is not symmetric."
        raise EllipticityError(msg)
    if np.linalg.eigvalsh(A).min() <= 0.0:
        msg = f"{name} is not positive definite."
        raise EllipticityError(msg)


def check_complementing(A1: ArrayLike, A2: ArrayLike, e: ArrayLike) -> ComplementingResult:
    """Definiteness of M1 - M2 with M_j = <A_j e, e> P^T A_j P - (P^T A_j e)(P^T A_j e)^T on the plane normal to e."""
    a1, a2 = np.asarray(A1, dtype=float), np.asarray(A2, dtype=float)
    normal = np.asarray(e, dtype=float)
    _require_spd("A1", a1)
    _require_spd("A2", a2)
    if abs(np.linalg.norm(normal) - 1.0) > 1e-12:  # noqa: PLR2004
        msg = f"Normal {normal} is not a unit vector."
        raise ValidationError(msg)
    basis = null_space(normal[None, :])

    def reduced(A: FloatArray) -> FloatArray:
        tangential = basis.T @ A @ normal
        return np.asarray((normal @ A @ normal) * (basis.T @ A @ basis) - np.outer(tangential, tangential))

    eig = np.linalg.eigvalsh(reduced(a1) - reduced(a2))
    holds = bool(np.all(eig > STRICT_TOL) or np.all(eig < -STRICT_TOL))
    return ComplementingResult(holds, float(np.abs(eig).min()))


def check_thm4(cs: CoefficientSet, dom: Domain, boundary_samples: int = 256) -> HypothesisReport:
    """Complementing condition and the normal contrast <A1 nu, nu> S1 != <A2 nu, nu> S2 at boundary samples."""
    if boundary_samples < 64:  # noqa: PLR2004
        msg = f"At least 64 boundary samples are needed, got {boundary_samples}."
        raise ValidationError(msg)
    points, normals, corner = dom.boundary_samples(boundary_samples)
    if corner.any():
        logger.warning(f"Skipped {int(corner.sum())} corner samples without a normal.")
    points, normals = points[~corner], normals[~corner]
    a1, a2, s1, s2 = cs.A1(points), cs.A2(points), cs.S1(points), cs.S2(points)
    margins = np.empty(len(points))
    complementing = np.zeros(len(points), dtype=bool)
    for i, nu in enumerate(normals):
        result = check_complementing(a1[i], a2[i], nu)
        complementing[i] = not result.holds
        margins[i] = result.margin
    contrast = np.abs(
        np.einsum("ni,nij,nj->n", normals, a1, normals) * s1 - np.einsum("ni,nij,nj->n", normals, a2, normals) * s2,
    )
    failing = {"complementing": complementing, "normal contrast": contrast <= STRICT_TOL}
    best_c = float(min(margins.min(), contrast.min())) if len(points) else 0.0
    return _report(
        Hypothesis.THM4,
        points,
        failing,
        best_c,
        0.0,
        0.0,
        skipped_corners=int(corner.sum()),
    )


def check_with_pushforward(  # noqa: PLR0913
    cs: CoefficientSet,
    dom: Domain,
    F: Diffeomorphism,
    hyp: Hypothesis | str,
    *,
    alpha_or_beta: float = 0.0,
    tau: float = 0.2,
    sample_count: int = 10_000,
    slack: float = 0.0,
    boundary_samples: int = 256,
) -> HypothesisReport:
    """Replace the first medium by its pushforward under F, then check."""
    F.validate(dom)
    A1, S1 = pushforward(F, cs.A1, cs.S1)
    pushed = cs.with_side_one(A1, S1)
    if Hypothesis(hyp) is Hypothesis.THM4:
        return check_thm4(pushed, dom, boundary_samples)
    return check_hypothesis(
        pushed,
        dom,
        hyp,
        alpha_or_beta=alpha_or_beta,
        tau=tau,
        sample_count=sample_count,
        slack=slack,
    )
