"""Named coefficient sets and diffeomorphisms addressable from the config."""
from __future__ import annotations

import re
from typing import TYPE_CHECKING

import numpy as np

from .exceptions import ValidationError
from .geometry import CoefficientSet, Diffeomorphism, Domain, MatrixField, ScalarField
from .strings import unknown_preset

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    FloatArray = NDArray[np.float64]

_PRESET = re.compile(r"^\s*(?P<name>[a-z_0-9]+)\s*(?:\((?P<args>[^)]*)\))?\s*$")


def identity(domain: Domain | None = None) -> CoefficientSet:
    """Identical media (I, I, 1, 1); every hypothesis fails for it."""
    return contrast(1.0, 1.0, 1.0, 1.0, domain)


def contrast(a1: float, a2: float, s1: float, s2: float, domain: Domain | None = None) -> CoefficientSet:
    """Constant isotropic media A_j = a_j I."""
    bound = max(a1, a2, s1, s2, 1.0 / min(a1, a2, s1, s2), 1.0)
    eye = np.eye(2)
    return CoefficientSet(
        A1=MatrixField.constant(a1 * eye, bound, "A1"),
        A2=MatrixField.constant(a2 * eye, bound, "A2"),
        S1=ScalarField.constant(s1, bound, "S1"),
        S2=ScalarField.constant(s2, bound, "S2"),
        lambda_bound=bound,
        domain=domain or Domain.unit_disk(),
        name=f"contrast({a1:g}, {a2:g}, {s1:g}, {s2:g})",
    )


def graded_alpha(c: float, alpha: float, domain: Domain | None = None) -> CoefficientSet:
    """A1 = (1 + c d^alpha) I, A2 = I, S1 = S2 = 1, so A1 - A2 = c d^alpha I."""
    dom = domain or Domain.unit_disk()
    bound = 1.0 + c * dom.diameter**alpha

    def a1(x: FloatArray) -> FloatArray:
        scale = 1.0 + c * dom.distance(x) ** alpha
        return np.asarray(scale[:, None, None] * np.eye(2)[None, :, :])

    return CoefficientSet(
        A1=MatrixField(a1, bound, "A1"),
        A2=MatrixField.constant(np.eye(2), bound, "A2"),
        S1=ScalarField.constant(1.0, bound, "S1"),
        S2=ScalarField.constant(1.0, bound, "S2"),
        lambda_bound=bound,
        domain=dom,
        name=f"graded_alpha({c:g}, {alpha:g})",
    )


def thm2_case(c: float, beta: float, domain: Domain | None = None) -> CoefficientSet:
    """A1 = A2 = I, S2 = 1 and S1 = 1 + c d^beta."""
    dom = domain or Domain.unit_disk()
    bound = 1.0 + c * dom.diameter**beta
    return CoefficientSet(
        A1=MatrixField.constant(np.eye(2), bound, "A1"),
        A2=MatrixField.constant(np.eye(2), bound, "A2"),
        S1=ScalarField(lambda x: 1.0 + c * dom.distance(x) ** beta, bound, "S1"),
        S2=ScalarField.constant(1.0, bound, "S2"),
        lambda_bound=bound,
        domain=dom,
        name=f"thm2_case({c:g}, {beta:g})",
    )


def radial_diffeomorphism(eps: float, r_cut: float | None = None) -> Diffeomorphism:
    """F(x) = x s(|x|^2) fixing the unit circle.

    Without ``r_cut`` s(q) = 1 + eps (1 - q); with it s(q) = 1 + eps (1 - q / r_cut^2)_+^3, so F is the identity
    on |x| >= r_cut.
    """

    def profile(q: FloatArray) -> tuple[FloatArray, FloatArray]:
        if r_cut is None:
            return 1.0 + eps * (1.0 - q), np.full_like(q, -eps)
        bump = np.clip(1.0 - q / r_cut**2, 0.0, None)
        return 1.0 + eps * bump**3, -3.0 * eps * bump**2 / r_cut**2

    def fmap(x: FloatArray) -> FloatArray:
        s, _ = profile(np.einsum("ij,ij->i", x, x))
        return np.asarray(x * s[:, None])

    def jac(x: FloatArray) -> FloatArray:
        s, ds = profile(np.einsum("ij,ij->i", x, x))
        eye = np.eye(x.shape[1])[None, :, :]
        return np.asarray(s[:, None, None] * eye + 2.0 * ds[:, None, None] * np.einsum("ni,nj->nij", x, x))

    return Diffeomorphism(fmap, jac)


def pullback_media(
    F: Diffeomorphism,
    A_target: ArrayLike,
    s_target: float,
    base: CoefficientSet,
    lambda_bound: float | None = None,
) -> CoefficientSet:
    """Replace the first medium by one whose pushforward under F is the constant pair (A_target, s_target).

    A1(x) = det DF(x) DF(x)^-1 A_target DF(x)^-T and S1(x) = det DF(x) s_target.
    """
    target = np.asarray(A_target, dtype=float)

    def a1(x: FloatArray) -> FloatArray:
        inv = np.linalg.inv(F.jacobian(x))
        det = 1.0 / np.linalg.det(inv)
        return np.asarray(det[:, None, None] * (inv @ target @ np.swapaxes(inv, 1, 2)))

    def s1(x: FloatArray) -> FloatArray:
        return np.asarray(np.linalg.det(F.jacobian(x)) * s_target)

    bound = lambda_bound or base.lambda_bound * 4.0
    return CoefficientSet(
        A1=MatrixField(a1, bound, "A1"),
        A2=base.A2,
        S1=ScalarField(s1, bound, "S1"),
        S2=base.S2,
        lambda_bound=bound,
        domain=base.domain,
        name=f"pullback({base.name})",
    )


_BUILDERS = {
    "identity": (identity, 0),
    "contrast": (contrast, 4),
    "graded_alpha": (graded_alpha, 2),
    "thm2_case": (thm2_case, 2),
}


def resolve_preset(text: str, domain: Domain | None = None) -> CoefficientSet:
    """Build a coefficient set from text such as ``contrast(2, 1, 2, 1)``."""
    match = _PRESET.match(text)
    if not match or match["name"] not in _BUILDERS:
        raise ValidationError(unknown_preset.format(text=text))
    builder, arity = _BUILDERS[match["name"]]
    raw = [item for item in (match["args"] or "").split(",") if item.strip()]
    try:
        args = [float(item) for item in raw]
    except ValueError as e:
        raise ValidationError(unknown_preset.format(text=text)) from e
    if len(args) != arity:
        msg = f"Preset {match['name']} takes {arity} arguments, got {len(args)}."
        raise ValidationError(msg)
    return builder(*args, domain)  # type: ignore[operator]
