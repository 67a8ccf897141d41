"""Fourier algebra for traces on the unit circle.

A trace is stored as a contiguous block of Laurent coefficients
``c[n - lo]`` multiplying ``tau**n`` with ``tau = exp(i theta)``.  Every
operation here acts exactly on coefficients; sampling is provided only for
oracles and for the pointwise division needed by the Bernoulli residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "BoundaryTrace",
    "FourierDensity",
    "TruncationError",
    "cauchy",
    "d_tau",
    "conj",
    "real_part",
    "product",
    "project",
    "project_le",
    "project_gt",
]


class TruncationError(RuntimeError):
    """Raised when a product exceeds its cap with non-negligible mass."""


@dataclass(frozen=True)
class BoundaryTrace:
    """Complex-valued trace ``sum_n c_n tau**n`` on the unit circle.

    Parameters
    ----------
    lo
        Lowest Laurent index stored.
    c
        Coefficients for indices ``lo, lo+1, ...``.
    truncation
        l2 norm of coefficients discarded by capped products that fed
        into this trace.
    """

    lo: int
    c: NDArray[np.complex128]
    truncation: float = field(default=0.0, compare=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.c, dtype=np.complex128).ravel()
        if not np.all(np.isfinite(arr)):
            raise ValueError("trace coefficients must be finite")
        object.__setattr__(self, "c", arr)
        object.__setattr__(self, "lo", int(self.lo))

    # construction -----------------------------------------------------
    @classmethod
    def zero(cls) -> "BoundaryTrace":
        return cls(0, np.zeros(1, dtype=np.complex128))

    @classmethod
    def monomial(cls, n: int, value: complex = 1.0) -> "BoundaryTrace":
        return cls(n, np.array([value], dtype=np.complex128))

    @classmethod
    def constant(cls, value: complex) -> "BoundaryTrace":
        return cls.monomial(0, value)

    @classmethod
    def from_dict(cls, coeffs: Mapping[int, complex]) -> "BoundaryTrace":
        if not coeffs:
            return cls.zero()
        lo, hi = min(coeffs), max(coeffs)
        arr = np.zeros(hi - lo + 1, dtype=np.complex128)
        for n, v in coeffs.items():
            arr[n - lo] += v
        return cls(lo, arr)

    @classmethod
    def from_samples(cls, values: ArrayLike, nmin: int, nmax: int) -> "BoundaryTrace":
        """Project equispaced samples ``values[j] = g(2 pi j / K)`` onto indices nmin..nmax."""
        v = np.asarray(values, dtype=np.complex128)
        K = v.size
        if nmax - nmin + 1 > K:
            raise ValueError("not enough samples for requested band")
        fh = np.fft.fft(v) / K
        idx = np.arange(nmin, nmax + 1)
        return cls(nmin, fh[idx % K])

    # basic queries ----------------------------------------------------
    @property
    def hi(self) -> int:
        return self.lo + self.c.size - 1

    @property
    def indices(self) -> NDArray[np.int64]:
        return np.arange(self.lo, self.hi + 1)

    def coeff(self, n: int) -> complex:
        k = n - self.lo
        if 0 <= k < self.c.size:
            return complex(self.c[k])
        return 0j

    def coeffs(self, ns: Iterable[int]) -> NDArray[np.complex128]:
        return self.gather(np.fromiter(ns, dtype=np.int64))

    def gather(self, idx: ArrayLike) -> NDArray[np.complex128]:
        """Coefficients at an integer array of indices (zero off-support)."""
        k = np.asarray(idx, dtype=np.int64) - self.lo
        ok = (k >= 0) & (k < self.c.size)
        out = np.zeros(k.shape, dtype=np.complex128)
        out[ok] = self.c[k[ok]]
        return out

    def as_dict(self, tol: float = 0.0) -> dict[int, complex]:
        return {int(n): complex(v) for n, v in zip(self.indices, self.c) if abs(v) > tol}

    def norm(self) -> float:
        return float(np.linalg.norm(self.c))

    def sup_bound(self) -> float:
        """Wiener-norm bound on sup |g| over the circle."""
        return float(np.abs(self.c).sum())

    def trimmed(self, tol: float = 0.0) -> "BoundaryTrace":
        nz = np.nonzero(np.abs(self.c) > tol)[0]
        if nz.size == 0:
            return BoundaryTrace(0, np.zeros(1), self.truncation)
        return BoundaryTrace(self.lo + nz[0], self.c[nz[0] : nz[-1] + 1], self.truncation)

    def padded(self, lo: int, hi: int) -> NDArray[np.complex128]:
        """Dense coefficient vector for indices lo..hi (zeros outside support)."""
        out = np.zeros(hi - lo + 1, dtype=np.complex128)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo : b - lo + 1] = self.c[a - self.lo : b - self.lo + 1]
        return out

    # evaluation -------------------------------------------------------
    def __call__(self, theta: ArrayLike) -> NDArray[np.complex128]:
        th = np.asarray(theta, dtype=float)
        return np.exp(1j * np.multiply.outer(th, self.indices)) @ self.c

    def evaluate_tau(self, tau: ArrayLike) -> NDArray[np.complex128]:
        t = np.asarray(tau, dtype=np.complex128)
        return np.power.outer(t, self.indices.astype(float)) @ self.c

    def samples(self, K: int) -> NDArray[np.complex128]:
        """Values at ``theta_j = 2 pi j / K`` via FFT (aliasing if K too small)."""
        buf = np.zeros(K, dtype=np.complex128)
        np.add.at(buf, self.indices % K, self.c)
        return np.fft.ifft(buf) * K

    # arithmetic -------------------------------------------------------
    def _binary(self, other: "BoundaryTrace", sign: float) -> "BoundaryTrace":
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        out = self.padded(lo, hi) + sign * other.padded(lo, hi)
        return BoundaryTrace(lo, out, self.truncation + other.truncation)

    def __add__(self, other):
        if isinstance(other, BoundaryTrace):
            return self._binary(other, 1.0)
        return self._binary(BoundaryTrace.constant(complex(other)), 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, BoundaryTrace):
            return self._binary(other, -1.0)
        return self._binary(BoundaryTrace.constant(complex(other)), -1.0)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self) -> "BoundaryTrace":
        return BoundaryTrace(self.lo, -self.c, self.truncation)

    def __mul__(self, other):
        if isinstance(other, BoundaryTrace):
            return product(self, other)
        return BoundaryTrace(self.lo, self.c * complex(other), self.truncation)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, scalar):
        return BoundaryTrace(self.lo, self.c / complex(scalar), self.truncation)

    def shift(self, k: int) -> "BoundaryTrace":
        """Multiply by ``tau**k``."""
        return BoundaryTrace(self.lo + k, self.c, self.truncation)

    # operators as methods ---------------------------------------------
    def cauchy(self) -> "BoundaryTrace":
        return cauchy(self)

    def d_tau(self) -> "BoundaryTrace":
        return d_tau(self)

    def conj(self) -> "BoundaryTrace":
        return conj(self)

    def real(self) -> "FourierDensity":
        return real_part(self)

    def to_json(self, tol: float = 0.0) -> dict:
        return {
            "coefficients": [[int(n), float(v.real), float(v.imag)] for n, v in self.as_dict(tol).items()],
            "truncation": float(self.truncation),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "BoundaryTrace":
        triples = data["coefficients"]
        out = cls.from_dict({int(n): complex(re, im) for n, re, im in triples}) if triples else cls.zero()
        return cls(out.lo, out.c, float(data.get("truncation", 0.0)))


class FourierDensity(BoundaryTrace):
    """Real-valued trace, so ``c_{-n} = conj(c_n)``.

    The symmetry is enforced on construction (tolerance ``1e-12`` relative)
    and the stored block is made symmetric about 0.
    """

    def __post_init__(self) -> None:
        super().__post_init__()
        N = max(abs(self.lo), abs(self.hi))
        full = BoundaryTrace(self.lo, self.c).padded(-N, N)
        mirror = np.conj(full[::-1])
        scale = max(1.0, float(np.abs(full).max()))
        if np.abs(full - mirror).max() > 1e-12 * scale:
            raise ValueError("density is not real-valued (c_{-n} != conj c_n)")
        object.__setattr__(self, "lo", -N)
        object.__setattr__(self, "c", 0.5 * (full + mirror))

    @classmethod
    def from_positive(cls, coeffs: Mapping[int, complex], mean: float = 0.0) -> "FourierDensity":
        """Build ``mean + 2 Re sum_n a_n tau**n`` from ``{n: a_n}`` with n > 0.

        With this convention ``a_n`` is exactly the Fourier coefficient at n.
        """
        d: dict[int, complex] = {0: mean}
        for n, a in coeffs.items():
            if n <= 0:
                raise ValueError("indices must be positive")
            d[n] = d.get(n, 0) + a
            d[-n] = d.get(-n, 0) + np.conj(a)
        t = BoundaryTrace.from_dict(d)
        return cls(t.lo, t.c)

    @property
    def mean(self) -> float:
        return float(self.coeff(0).real)

    def mean_zero(self) -> "FourierDensity":
        c = self.c.copy()
        c[-self.lo] = 0.0
        return FourierDensity(self.lo, c, self.truncation)


# ----------------------------------------------------------------------
# operators


def cauchy(g: BoundaryTrace) -> BoundaryTrace:
    """Exterior Cauchy multiplier: drop n >= 0, negate n < 0."""
    if g.lo >= 0:
        return BoundaryTrace(0, np.zeros(1), g.truncation)
    top = min(g.hi, -1)
    return BoundaryTrace(g.lo, -g.c[: top - g.lo + 1], g.truncation)


def d_tau(g: BoundaryTrace) -> BoundaryTrace:
    """Complex derivative in tau: c_n tau**n -> n c_n tau**(n-1)."""
    return BoundaryTrace(g.lo - 1, g.c * g.indices, g.truncation)


def conj(g: BoundaryTrace) -> BoundaryTrace:
    """Pointwise complex conjugate on the circle."""
    return BoundaryTrace(-g.hi, np.conj(g.c[::-1]), g.truncation)


def real_part(g: BoundaryTrace) -> FourierDensity:
    h = 0.5 * (g + conj(g))
    return FourierDensity(h.lo, h.c, h.truncation)


def product(a: BoundaryTrace, b: BoundaryTrace, cap: int | None = None) -> BoundaryTrace:
    """Exact Cauchy product of Laurent blocks.

    If ``cap`` is given, indices with ``|n| > cap`` are dropped and the l2
    norm of what was dropped is added to ``truncation``.
    """
    c = np.convolve(a.c, b.c)
    lo = a.lo + b.lo
    trunc = a.truncation + b.truncation
    if cap is not None:
        idx = np.arange(lo, lo + c.size)
        keep = np.abs(idx) <= cap
        trunc += float(np.linalg.norm(c[~keep]))
        if not keep.any():
            return BoundaryTrace(0, np.zeros(1), trunc)
        k0 = int(np.argmax(keep))
        k1 = int(keep.size - np.argmax(keep[::-1]))
        c, lo = c[k0:k1], lo + k0
    return BoundaryTrace(lo, c, trunc)


def project(g: BoundaryTrace, m: int) -> BoundaryTrace:
    """Keep only the modes ``tau**m`` and ``tau**(-m)``."""
    m = abs(m)
    return BoundaryTrace.from_dict({n: g.coeff(n) for n in {m, -m}})


def project_le(g: BoundaryTrace, m: int) -> BoundaryTrace:
    """Keep modes with ``|n| <= m``."""
    lo, hi = max(g.lo, -m), min(g.hi, m)
    if lo > hi:
        return BoundaryTrace(0, np.zeros(1), g.truncation)
    return BoundaryTrace(lo, g.c[lo - g.lo : hi - g.lo + 1], g.truncation)


def project_gt(g: BoundaryTrace, m: int) -> BoundaryTrace:
    """Keep modes with ``|n| > m``."""
    return g - project_le(g, m)
