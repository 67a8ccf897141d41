"""Exterior single-layer potential for a union of disks and its boundary traces.

For disks ``B_rho(zeta_k)`` carrying densities ``mu_k`` on the unit circle,

    Z[mu](zeta) = (1 / 2 pi i) sum_k  int mu_k(s) rho ds / (rho s + zeta_k - zeta)
                = - sum_k sum_{n>=1} rho**n mu_hat_{k,-n} / (zeta - zeta_k)**n

outside all disks.  The trace on circle k is the exterior Cauchy multiplier
of ``mu_k`` plus a Taylor series in ``tau`` from the other disks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import binom

from .fourier import BoundaryTrace, cauchy

__all__ = [
    "DomainError",
    "DiskConfiguration",
    "z_field",
    "z_field_derivative",
    "z_trace",
    "conformal_map_trace",
    "off_disk_operator",
    "off_disk_order",
]

OFF_DISK_EXTRA = 16
OFF_DISK_MAX = 4096


class DomainError(ValueError):
    """Disks overlap or the off-disk series does not converge."""


@dataclass(frozen=True)
class DiskConfiguration:
    """Centers ``zeta_k`` and common radius ``rho``."""

    centers: NDArray[np.complex128]
    rho: float

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.centers, dtype=np.complex128))
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "rho", float(self.rho))
        self.validate()

    @property
    def M(self) -> int:
        return self.centers.size

    def min_separation(self) -> float:
        if self.M < 2:
            return np.inf
        d = np.abs(self.centers[:, None] - self.centers[None, :])
        d[np.diag_indices(self.M)] = np.inf
        return float(d.min())

    def validate(self) -> None:
        if self.M > 1 and not self.min_separation() > 2 * abs(self.rho):
            raise DomainError(
                f"disks of radius {abs(self.rho):g} overlap (min separation {self.min_separation():g})"
            )


def _neg_coeffs(mu: BoundaryTrace) -> NDArray[np.complex128]:
    """Return ``[mu_hat_{-1}, mu_hat_{-2}, ...]`` up to the lowest stored index."""
    if mu.lo >= 0:
        return np.zeros(0, dtype=np.complex128)
    return mu.coeffs(range(-1, mu.lo - 1, -1))


def z_field(
    densities: Sequence[BoundaryTrace], config: DiskConfiguration, zeta: ArrayLike
) -> NDArray[np.complex128]:
    """Evaluate ``Z[mu]`` at points outside all disks (closed-form series)."""
    z = np.asarray(zeta, dtype=np.complex128)
    out = np.zeros_like(z)
    for mu, zk in zip(densities, config.centers):
        a = _neg_coeffs(mu)
        if a.size == 0:
            continue
        x = config.rho / (z - zk)
        # Horner in x: -sum_n a_n x**n
        acc = np.zeros_like(z)
        for an in a[::-1]:
            acc = (acc + an) * x
        out -= acc
    return out


def z_field_derivative(
    densities: Sequence[BoundaryTrace], config: DiskConfiguration, zeta: ArrayLike
) -> NDArray[np.complex128]:
    """Complex derivative ``d/dzeta Z[mu]`` outside all disks."""
    z = np.asarray(zeta, dtype=np.complex128)
    out = np.zeros_like(z)
    for mu, zk in zip(densities, config.centers):
        a = _neg_coeffs(mu)
        if a.size == 0:
            continue
        x = config.rho / (z - zk)
        n = np.arange(1, a.size + 1)
        acc = np.zeros_like(z)
        for an, nn in zip(a[::-1], n[::-1]):
            acc = (acc + nn * an) * x
        out += acc / (z - zk)
    return out


def off_disk_operator(n_modes: int, r: complex, P: int) -> NDArray[np.complex128]:
    """Matrix taking ``(a_1..a_n_modes)`` to Taylor coefficients b_0..b_P in tau
    of ``-sum_n a_n r**n (1 + r tau)**(-n)``, with ``r = rho / (zeta_k - zeta_j)``."""
    n = np.arange(1, n_modes + 1)
    p = np.arange(P + 1)
    C = binom(n[None, :] + p[:, None] - 1, p[:, None])
    return -((-r) ** p)[:, None] * C * (r ** n)[None, :]


def off_disk_order(r: complex, n_modes: int, tol: float = 1e-17) -> int:
    """Taylor order P at which ``|r|**P`` times the binomial growth drops below ``tol``."""
    q = abs(r)
    if q == 0.0:
        return 0
    if q >= 1.0:
        raise DomainError("off-disk series diverges (|r| >= 1)")
    P = int(np.ceil(np.log(tol) / np.log(q))) + n_modes
    return min(max(P, 1), OFF_DISK_MAX)


def _off_disk_taylor(a: NDArray[np.complex128], r: complex, P: int) -> NDArray[np.complex128]:
    """Taylor coefficients b_0..b_P in tau of ``-sum_n a_n r**n (1 + r tau)**(-n)``."""
    return off_disk_operator(a.size, r, P) @ a


def z_trace(
    densities: Sequence[BoundaryTrace],
    config: DiskConfiguration,
    k: int,
    n_off: int | None = None,
    tail_tol: float = 1e-14,
) -> BoundaryTrace:
    """Trace of ``Z[mu]`` on circle k, as a function of ``tau``.

    ``n_off`` is the order of the off-disk Taylor series (default: density
    order + 16).  It is doubled until the estimated tail falls below
    ``tail_tol`` relative to the trace, up to a hard cap.
    """
    own = cauchy(densities[k])
    rho = config.rho
    if config.M == 1 or rho == 0.0:
        return own
    config.validate()
    order = max(max(-d.lo, 0) for d in densities)
    P = (order + OFF_DISK_EXTRA) if n_off is None else int(n_off)
    while True:
        total = np.zeros(P + 1, dtype=np.complex128)
        tail = 0.0
        for j, mu in enumerate(densities):
            if j == k:
                continue
            a = _neg_coeffs(mu)
            if a.size == 0 or not np.any(a):
                continue
            r = rho / (config.centers[k] - config.centers[j])
            b = _off_disk_taylor(a, r, P + 1)
            total += b[:-1]
            q = abs(r)
            tail += abs(b[-1]) / max(1e-300, 1.0 - q)
        scale = max(own.norm(), float(np.linalg.norm(total)), 1e-300)
        if tail <= tail_tol * scale or (tail == 0.0):
            break
        if n_off is not None or P >= OFF_DISK_MAX:
            raise DomainError(f"off-disk series tail {tail:.3e} above tolerance at order {P}")
        P *= 2
    return own + BoundaryTrace(0, total)


def conformal_map_trace(
    densities: Sequence[BoundaryTrace], config: DiskConfiguration, k: int, scale: float | None = None
) -> BoundaryTrace:
    """Trace of ``f = id + scale * Z[mu]`` on circle k (default ``scale = rho**2``)."""
    s = config.rho**2 if scale is None else scale
    base = BoundaryTrace(0, np.array([config.centers[k], config.rho]))
    return base + z_trace(densities, config, k) * s
