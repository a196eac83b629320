"""Transmission eigenvalues of the unit disk with constant isotropic media, by Bessel matching determinants.

The oracle works in the Helmholtz normalization div(a grad u) + kappa S u = 0 with kappa > 0, so a root kappa is the
transmission eigenvalue lambda = -kappa of div(A grad u) - lambda S u = 0.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import factorial
from typing import TYPE_CHECKING

import numpy as np
from loguru import logger
from scipy.optimize import brentq
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt
from tqdm import tqdm

from .constant import ORACLE_RESCANS, ORACLE_STEPS_PER_PERIOD
from .exceptions import DegenerateMediaError, GridTooCoarseError, ValidationError
from .solver import thread_count
from .strings import degenerate_media, grid_too_coarse

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray
    from typing_extensions import Self

    FloatArray = NDArray[np.float64]

SERIES_LIMIT = 1.0
SERIES_TERMS = 30
RESCALE = 1e200


def _series(orders: int, x: FloatArray) -> FloatArray:
    """Ascending series sum_k (-1)^k (x/2)^(2k+m) / (k! (k+m)!) for every order up to ``orders``."""
    half = x[:, None] / 2.0
    out = np.zeros((len(x), orders + 1))
    for m in range(orders + 1):
        terms = [(-1) ** k * half[:, 0] ** (2 * k + m) / (factorial(k) * factorial(k + m)) for k in range(SERIES_TERMS)]
        out[:, m] = np.sum(terms, axis=0)
    return out


def _miller(orders: int, x: FloatArray) -> FloatArray:
    """Backward recurrence J_{k-1} = (2k/x) J_k - J_{k+1}, normalized by J_0 + 2 sum J_2k = 1."""
    top = max(orders, float(x.max()))
    start = 2 * int(np.ceil((top + 20.0 + np.sqrt(60.0 * top)) / 2.0))
    values = np.zeros((len(x), start + 2))
    values[:, start] = 1e-30
    for k in range(start, 0, -1):
        values[:, k - 1] = (2.0 * k / x) * values[:, k] - values[:, k + 1]
        big = np.abs(values[:, k - 1]) > RESCALE
        if big.any():
            values[big] /= RESCALE
    norm = values[:, 0] + 2.0 * values[:, 2 : start + 1 : 2].sum(axis=1)
    return values[:, : orders + 1] / norm[:, None]


def bessel_table(orders: int, x: ArrayLike) -> FloatArray:
    """J_0 .. J_orders at each x >= 0, shape (len(x), orders + 1)."""
    arg = np.atleast_1d(np.asarray(x, dtype=float))
    if (arg < 0).any():
        msg = "Bessel arguments must be nonnegative."
        raise ValidationError(msg)
    out = np.zeros((len(arg), orders + 1))
    small = arg <= SERIES_LIMIT
    if small.any():
        out[small] = _series(orders, arg[small])
    if (~small).any():
        out[~small] = _miller(orders, arg[~small])
    return out


def bessel_j(m: int, x: ArrayLike) -> FloatArray:
    """J_m(x)."""
    return np.asarray(bessel_table(m, x)[:, m])


def bessel_jp(m: int, x: ArrayLike) -> FloatArray:
    """J_m'(x) = (J_{m-1} - J_{m+1}) / 2, with J_0' = -J_1."""
    table = bessel_table(m + 1, x)
    if m == 0:
        return np.asarray(-table[:, 1])
    return np.asarray(0.5 * (table[:, m - 1] - table[:, m + 1]))


@dataclass(frozen=True)
class DiskMedia(object):
    """Isotropic constant media A_j = a_j I with S_j = s_j."""

    a1: float
    a2: float
    s1: float
    s2: float

    def __post_init__(self: Self) -> None:
        if min(self.a1, self.a2, self.s1, self.s2) <= 0:
            msg = "Disk media must be positive."
            raise ValidationError(msg)

    @property
    def degenerate(self: Self) -> bool:
        """a1 s1 == a2 s2."""
        return abs(self.a1 * self.s1 - self.a2 * self.s2) <= 1e-12 * max(self.a1 * self.s1, self.a2 * self.s2)  # noqa: PLR2004

    def wavenumbers(self: Self, kappa: ArrayLike) -> tuple[FloatArray, FloatArray]:
        """k_j = sqrt(kappa s_j / a_j)."""
        root = np.sqrt(np.asarray(kappa, dtype=float))
        return root * np.sqrt(self.s1 / self.a1), root * np.sqrt(self.s2 / self.a2)


def disk_dispersion(media: DiskMedia, m: int, lam: ArrayLike) -> FloatArray:
    """a1 k1 J_m'(k1) J_m(k2) - a2 k2 J_m'(k2) J_m(k1), zero exactly at the disk transmission eigenvalues."""
    k1, k2 = media.wavenumbers(lam)
    t1, t2 = bessel_table(m + 1, k1), bessel_table(m + 1, k2)

    def derivative(table: FloatArray) -> FloatArray:
        return -table[:, 1] if m == 0 else 0.5 * (table[:, m - 1] - table[:, m + 1])

    return np.asarray(media.a1 * k1 * derivative(t1) * t2[:, m] - media.a2 * k2 * derivative(t2) * t1[:, m])


@dataclass(frozen=True)
class DiskTE(object):
    """A real root of the matching determinant."""

    lam: float
    m: int
    k1: float
    k2: float
    multiplicity_hint: int

    @property
    def transmission_eigenvalue(self: Self) -> float:
        """Eigenvalue with the sign of div(A grad u) - lambda S u = 0."""
        return -self.lam


def _scan(media: DiskMedia, m: int, lam_max: float, step: float) -> list[float]:
    """Roots in kappa from sign changes on a grid in sqrt(kappa), checked against the half step grid."""
    top = np.sqrt(lam_max)
    coarse = np.arange(step, top + step, step)
    fine = np.arange(step / 2.0, top + step / 2.0, step / 2.0)
    coarse, fine = coarse[coarse <= top], fine[fine <= top]

    def brackets(grid: FloatArray) -> list[tuple[float, float]]:
        values = disk_dispersion(media, m, grid**2)
        flips = np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)
        return [(float(grid[i]), float(grid[i + 1])) for i in flips]

    found, check = brackets(coarse), brackets(fine)
    if len(found) != len(check):
        raise GridTooCoarseError(grid_too_coarse.format(coarse=len(found), fine=len(check), m=m, step=step))

    def f(k: float) -> float:
        return float(disk_dispersion(media, m, np.array([k * k]))[0])

    return [brentq(f, a, b, xtol=1e-14, rtol=1e-13) ** 2 for a, b in found]


def _roots_for_order(media: DiskMedia, m: int, lam_max: float) -> list[DiskTE]:
    base = np.pi / (ORACLE_STEPS_PER_PERIOD * max(np.sqrt(media.s1 / media.a1), np.sqrt(media.s2 / media.a2)))
    roots: list[float] = []
    for attempt in Retrying(
        stop=stop_after_attempt(ORACLE_RESCANS + 1),
        retry=retry_if_exception_type(GridTooCoarseError),
        reraise=True,
    ):
        with attempt:
            step = base / 2 ** (attempt.retry_state.attempt_number - 1)
            logger.debug(f"Scanning m={m} with step {step:.4g}.")
            roots = _scan(media, m, lam_max, step)
    entries = []
    for kappa in roots:
        k1, k2 = media.wavenumbers(kappa)
        entries.append(DiskTE(float(kappa), m, float(k1), float(k2), 1 if m == 0 else 2))
    return entries


def find_disk_tes(media: DiskMedia, lam_max: float, m_max: int) -> list[DiskTE]:
    """All real roots kappa in (0, lam_max] for orders 0..m_max, sorted by kappa."""
    if media.degenerate:
        raise DegenerateMediaError(degenerate_media)
    if lam_max <= 0 or m_max < 0:
        msg = f"Need lam_max > 0 and m_max >= 0, got {lam_max} and {m_max}."
        raise ValidationError(msg)
    orders = list(range(m_max + 1))
    with ThreadPoolExecutor(max_workers=min(thread_count(), len(orders))) as pool:
        futures = [pool.submit(_roots_for_order, media, m, lam_max) for m in orders]
        found = [te for future in tqdm(futures, desc="oracle", unit="order", colour="green") for te in future.result()]
    found.sort(key=lambda te: (te.lam, te.m))
    logger.info(f"Disk oracle: {len(found)} real roots below {lam_max:g} for m <= {m_max}.")
    return found


def disk_eigenfunction(media: DiskMedia, te: DiskTE, points: ArrayLike) -> tuple[FloatArray, FloatArray]:
    """u1 = J_m(k2) J_m(k1 r) cos(m theta), u2 = J_m(k1) J_m(k2 r) cos(m theta)."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.linalg.norm(x, axis=1)
    angular = np.cos(te.m * np.arctan2(x[:, 1], x[:, 0]))
    jk1, jk2 = bessel_j(te.m, [te.k1])[0], bessel_j(te.m, [te.k2])[0]
    u1 = jk2 * bessel_j(te.m, te.k1 * r) * angular
    u2 = jk1 * bessel_j(te.m, te.k2 * r) * angular
    return u1, u2
