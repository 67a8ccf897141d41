"""m-fold symmetric hollow vortices bifurcating from a rotating circle.

Unknowns are the Fourier coefficients of two real densities on the unit
circle,

    mu = 2 Re sum_n mu_hat[n] tau**(1 - m n),     nu = 2 Re sum_n nu_hat[n] tau**(-m n),

plus the Bernoulli constant ``q``.  The conformal map and complex potential
are ``f = id + C mu`` and ``w = (G / 2 pi i) log + C nu`` with ``C`` the
exterior Cauchy multiplier, so ``f_hat = -mu_hat`` and ``w_hat = -nu_hat``
as coefficients of ``zeta**(1 - m n)`` and ``zeta**(-m n)``.

Frame conventions: ``Omega`` is complex with ``Im Omega = -1 / (2 kappa)``
and the effective circulation is ``G = gamma + 2 pi i Im Omega``.  Branch
amplitude ``eps`` is the coefficient of ``zeta**(1 - m)`` in ``f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .fourier import BoundaryTrace, conj, d_tau, real_part

__all__ = [
    "SolverFailure",
    "Degeneracy",
    "MFoldParams",
    "MFoldState",
    "bold_omega",
    "bold_gamma",
    "trivial_q",
    "bifurcation_omega",
    "dispersion",
    "dispersion_roots",
    "residual",
    "linearize",
    "jacobian",
    "jacobian_by_directions",
    "linearized_operator",
    "block_operator",
    "kernel_basis",
    "transversality",
    "solve_branch",
    "continue_branch",
    "pitchfork_direction",
    "rigidity_check",
    "third_order_expansion",
    "hstate_expansion",
    "hstate_exact_map",
    "vstate_expansion",
    "critical_radius_squared",
]

Model = Literal["hollow", "hstate"]

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50
TAIL_TOL = 1e-10


class SolverFailure(RuntimeError):
    """Newton did not converge or the truncation is under-resolved."""


class Degeneracy(RuntimeError):
    """A linearisation or pitchfork coefficient is degenerate."""


# ----------------------------------------------------------------------
# parameters


def bold_omega(Omega: float, kappa: float = math.inf) -> complex:
    """Complex frame parameter with ``i Omega_b = i Omega + 1/(2 kappa)``."""
    return complex(Omega, 0.0 if math.isinf(kappa) else -0.5 / kappa)


def bold_gamma(gamma: float, Omega: complex) -> complex:
    """Effective circulation including the phantom sink, ``gamma + 2 pi i Im Omega``."""
    return complex(gamma, 2 * math.pi * complex(Omega).imag)


def trivial_q(gamma: float, Omega: complex) -> float:
    """Bernoulli constant of the circular state."""
    Om = complex(Omega)
    G = bold_gamma(gamma, Om)
    return 0.5 * abs(G / (2 * math.pi) - Om) ** 2 - 0.5 * abs(Om) ** 2


def bifurcation_omega(m: int, sign: int, gamma: float = 2 * math.pi, n: int = 1) -> float:
    """Root of the dispersion relation, ``(gamma/2pi)(1 +- 1/sqrt(m n))``."""
    return gamma / (2 * math.pi) * (1 + sign / math.sqrt(m * n))


def dispersion(m: int, n: ArrayLike, gamma: float, Omega: complex) -> NDArray[np.complex128]:
    """Dispersion function ``d_m(n, Omega)`` of the linearisation at the circle."""
    Om = complex(Omega)
    nn = np.asarray(n, dtype=float)
    ob = np.conj(Om)
    return (1 - m * nn) * (Om.real - gamma / (2 * math.pi)) ** 2 + (gamma / math.pi) * ob - ob**2


def dispersion_roots(m: int, n: int, gamma: float) -> NDArray[np.float64]:
    """Real Omega with ``d_m(n, Omega) = 0`` (kappa infinite), from the quadratic's coefficients."""
    g = gamma / (2 * math.pi)
    # d = (1 - mn)(O - g)^2 + 2 g O - O^2 = -mn O^2 + 2 mn g O + (1 - mn) g^2
    N = m * n
    r = np.roots([-N, 2 * N * g, (1 - N) * g * g])
    return np.sort(r.real)


@dataclass(frozen=True)
class MFoldParams:
    m: int
    gamma: float = 2 * math.pi
    Omega: complex = 0j
    K: int = 32
    model: Model = "hollow"

    def __post_init__(self) -> None:
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.K < 2:
            raise ValueError("need at least two modes")
        if self.model not in ("hollow", "hstate"):
            raise ValueError(f"unknown model {self.model!r}")


@dataclass
class MFoldState:
    """A (possibly approximate) m-fold hollow vortex."""

    m: int
    gamma: float
    Omega: complex
    q: float
    mu_hat: NDArray[np.complex128]
    nu_hat: NDArray[np.complex128]
    model: Model = "hollow"
    eps: float = 0.0
    sign: int = 0
    residual_norm: float = float("nan")
    iterations: int = 0
    tail_ratio: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.mu_hat = np.asarray(self.mu_hat, dtype=np.complex128)
        self.nu_hat = np.asarray(self.nu_hat, dtype=np.complex128)
        self.Omega = complex(self.Omega)
        if self.mu_hat.shape != self.nu_hat.shape:
            raise ValueError("mu_hat and nu_hat must have the same length")

    @classmethod
    def trivial(cls, m: int, gamma: float, Omega: complex, K: int = 32, model: Model = "hollow") -> "MFoldState":
        q = trivial_q(gamma, Omega) if model == "hollow" else 0.5 * abs(bold_gamma(gamma, Omega) / (2 * math.pi) - Omega) ** 2
        return cls(m, gamma, Omega, q, np.zeros(K), np.zeros(K), model=model)

    @property
    def K(self) -> int:
        return self.mu_hat.size

    @property
    def G(self) -> complex:
        return bold_gamma(self.gamma, self.Omega)

    @property
    def f_hat(self) -> NDArray[np.complex128]:
        """Coefficients of ``zeta**(1 - m n)``, n = 1..K."""
        return -self.mu_hat

    @property
    def w_hat(self) -> NDArray[np.complex128]:
        """Coefficients of ``zeta**(-m n)``, n = 1..K."""
        return -self.nu_hat

    def copy(self) -> "MFoldState":
        return MFoldState(
            self.m, self.gamma, self.Omega, self.q, self.mu_hat.copy(), self.nu_hat.copy(),
            self.model, self.eps, self.sign, self.residual_norm, self.iterations, self.tail_ratio,
            dict(self.meta),
        )

    # field evaluation -------------------------------------------------
    def _powers(self, zeta: ArrayLike, shift: int) -> NDArray[np.complex128]:
        z = np.asarray(zeta, dtype=np.complex128)
        n = np.arange(1, self.K + 1)
        return np.power.outer(z, (shift - self.m * n).astype(float))

    def f(self, zeta: ArrayLike) -> NDArray[np.complex128]:
        z = np.asarray(zeta, dtype=np.complex128)
        return z + self._powers(z, 1) @ self.f_hat

    def f_zeta(self, zeta: ArrayLike) -> NDArray[np.complex128]:
        n = np.arange(1, self.K + 1)
        return 1 + self._powers(zeta, 0) @ ((1 - self.m * n) * self.f_hat)

    def w_zeta(self, zeta: ArrayLike) -> NDArray[np.complex128]:
        z = np.asarray(zeta, dtype=np.complex128)
        n = np.arange(1, self.K + 1)
        return self.G / (2j * math.pi * z) + self._powers(z, -1) @ (-self.m * n * self.w_hat)

    def w(self, zeta: ArrayLike) -> NDArray[np.complex128]:
        z = np.asarray(zeta, dtype=np.complex128)
        return self.G / (2j * math.pi) * np.log(z) + self._powers(z, 0) @ self.w_hat

    # densities ---------------------------------------------------------
    def mu(self) -> BoundaryTrace:
        n = np.arange(1, self.K + 1)
        return _sym(1 - self.m * n, self.mu_hat)

    def nu(self) -> BoundaryTrace:
        n = np.arange(1, self.K + 1)
        return _sym(-self.m * n, self.nu_hat)

    def residual(self) -> tuple[BoundaryTrace, BoundaryTrace]:
        return residual(self)

    def to_json(self) -> dict:
        return {
            "kind": "mfold",
            "m": self.m,
            "gamma": self.gamma,
            "Omega": [self.Omega.real, self.Omega.imag],
            "q": self.q,
            "model": self.model,
            "eps": self.eps,
            "sign": self.sign,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "tail_ratio": self.tail_ratio,
            "mu_hat": [[int(1 - self.m * (i + 1)), float(v.real), float(v.imag)] for i, v in enumerate(self.mu_hat)],
            "nu_hat": [[int(-self.m * (i + 1)), float(v.real), float(v.imag)] for i, v in enumerate(self.nu_hat)],
        }

    @classmethod
    def from_json(cls, d: dict) -> "MFoldState":
        mu = np.array([complex(re, im) for _, re, im in d["mu_hat"]])
        nu = np.array([complex(re, im) for _, re, im in d["nu_hat"]])
        return cls(
            int(d["m"]), float(d["gamma"]), complex(*d["Omega"]), float(d["q"]), mu, nu,
            d.get("model", "hollow"), float(d.get("eps", 0.0)), int(d.get("sign", 0)),
            float(d.get("residual_norm", float("nan"))), int(d.get("iterations", 0)),
            float(d.get("tail_ratio", 0.0)),
        )


def _sparse(idx: NDArray[np.int64], vals: NDArray[np.complex128]) -> BoundaryTrace:
    lo, hi = int(idx.min()), int(idx.max())
    arr = np.zeros(hi - lo + 1, dtype=np.complex128)
    np.add.at(arr, idx - lo, vals)
    return BoundaryTrace(lo, arr)


def _sym(idx: NDArray[np.int64], vals: NDArray[np.complex128]) -> BoundaryTrace:
    """``2 Re sum vals tau**idx`` as a trace (idx all negative)."""
    return _sparse(np.concatenate([idx, -idx]), np.concatenate([vals, np.conj(vals)]))


# ----------------------------------------------------------------------
# residual and its exact linearisation


@dataclass
class _Pieces:
    a: BoundaryTrace
    D: BoundaryTrace
    f: BoundaryTrace
    fb: BoundaryTrace
    B: BoundaryTrace
    DD: BoundaryTrace
    ff: BoundaryTrace


def _c_mu(m: int, mu_hat) -> BoundaryTrace:
    n = np.arange(1, len(mu_hat) + 1)
    return _sparse(1 - m * n, -np.asarray(mu_hat, dtype=complex))


def _c_nu(m: int, nu_hat) -> BoundaryTrace:
    n = np.arange(1, len(nu_hat) + 1)
    return _sparse(-m * n, -np.asarray(nu_hat, dtype=complex))


def _pieces(s: MFoldState) -> _Pieces:
    Om = s.Omega
    a = BoundaryTrace.monomial(-1, s.G / (2j * math.pi))
    Cmu = _c_mu(s.m, s.mu_hat)
    D = d_tau(Cmu) + 1.0
    f = Cmu + BoundaryTrace.monomial(1, 1.0)
    fb = conj(f)
    B = a + d_tau(_c_nu(s.m, s.nu_hat)) + (D * fb) * (1j * Om)
    return _Pieces(a, D, f, fb, B, D * conj(D), f * fb)


def _numerators(s: MFoldState, p: _Pieces | None = None) -> tuple[BoundaryTrace, BoundaryTrace]:
    """Kinematic trace F1 and the cleared Bernoulli numerator |f_zeta|^2 F2."""
    p = p or _pieces(s)
    F1 = real_part(p.B.shift(1))
    cen = 0.5 * abs(s.Omega) ** 2 if s.model == "hollow" else 0.0
    N2 = real_part(p.B * conj(p.B)) * 0.5 - p.DD * (p.ff * cen + s.q)
    return F1, N2


def residual(s: MFoldState) -> tuple[BoundaryTrace, BoundaryTrace]:
    """Return ``(F1, F2)``: kinematic and Bernoulli residual traces.

    F1 is exact in coefficient space.  F2 involves division by
    ``|1 + C mu'|^2``; it is formed as the exact numerator divided pointwise
    on an oversampled grid and projected back.
    """
    p = _pieces(s)
    F1, N2 = _numerators(s, p)
    span = max(abs(N2.lo), abs(N2.hi), abs(p.DD.lo), abs(p.DD.hi))
    Ks = 1 << int(math.ceil(math.log2(8 * span + 16)))
    q = N2.samples(Ks) / p.DD.samples(Ks)
    F2 = BoundaryTrace.from_samples(q.real, -2 * span, 2 * span)
    return F1, F2


def residual_norm(s: MFoldState, samples: int | None = None) -> float:
    """Sup of |F1 - mean| and |F2| on a fine grid."""
    F1, F2 = residual(s)
    K = samples or max(512, 4 * max(abs(F2.lo), abs(F1.lo)))
    f1 = F1.samples(K).real - F1.coeff(0).real
    return float(max(np.abs(f1).max(), np.abs(F2.samples(K).real).max()))


def linearize(
    s: MFoldState,
    dmu: ArrayLike,
    dnu: ArrayLike,
    dq: float = 0.0,
    dOmega: complex = 0j,
    p: _Pieces | None = None,
) -> tuple[BoundaryTrace, BoundaryTrace]:
    """Exact directional derivative of ``(F1, N2)``."""
    p = p or _pieces(s)
    Om = s.Omega
    dCmu = _c_mu(s.m, dmu)
    dD = d_tau(dCmu)
    dB = d_tau(_c_nu(s.m, dnu)) + (dD * p.fb + p.D * conj(dCmu)) * (1j * Om)
    if dOmega != 0:
        dB = dB + (p.D * p.fb) * (1j * dOmega) + BoundaryTrace.monomial(-1, complex(dOmega).imag)
    dF1 = real_part(dB.shift(1))
    cen = 0.5 * abs(Om) ** 2 if s.model == "hollow" else 0.0
    dcen = (np.conj(Om) * dOmega).real if s.model == "hollow" else 0.0
    dN2 = (
        real_part(conj(p.B) * dB)
        - p.DD * (p.ff * dcen + real_part(p.fb * dCmu) * (2 * cen) + dq)
        - real_part(conj(p.D) * dD) * ((p.ff * cen + s.q) * 2.0)
    )
    return dF1, real_part(dN2)


# coordinate maps ------------------------------------------------------


def _eq_even(s: MFoldState, F1: BoundaryTrace, N2: BoundaryTrace) -> NDArray[np.float64]:
    n = np.arange(1, s.K + 1)
    e1 = F1.coeffs(-s.m * n).imag
    e2 = N2.coeffs(-s.m * np.arange(0, s.K + 1)).real
    return np.concatenate([e1, e2])


def _eq_full(s: MFoldState, F1: BoundaryTrace, N2: BoundaryTrace) -> NDArray[np.float64]:
    n = np.arange(1, s.K + 1)
    a = F1.coeffs(-s.m * n)
    b = N2.coeffs(-s.m * n)
    return np.concatenate([a.real, a.imag, b.real, b.imag, [N2.coeff(0).real]])


def _re_gather(terms, ell: NDArray[np.int64], k: NDArray[np.int64]) -> NDArray[np.complex128]:
    """Coefficients at ``ell`` (rows) of ``Re(sum_t alpha_t tau**(k + s_t) T_t)`` per column k.

    Each term is ``(alpha, T, s)`` with alpha an array over columns.
    """
    out = np.zeros((ell.size, k.size), dtype=np.complex128)
    for alpha, T, sh in terms:
        kk = k[None, :] + sh
        out += alpha[None, :] * T.gather(ell[:, None] - kk)
        out += np.conj(alpha[None, :] * T.gather(-ell[:, None] - kk))
    return 0.5 * out


def _jacobian_columns(s: MFoldState, unit: complex, p: _Pieces | None = None):
    """Complex Jacobian blocks ``(dF1, dN2)`` w.r.t. ``unit * mu_hat_j`` and ``unit * nu_hat_j``.

    Every column is a shifted copy of a few precomputed product traces, so
    the assembly is a gather rather than a fresh convolution per column.
    """
    p = p or _pieces(s)
    m, K, Om = s.m, s.K, s.Omega
    cen = 0.5 * abs(Om) ** 2 if s.model == "hollow" else 0.0
    one = BoundaryTrace.constant(1.0)
    Bc = conj(p.B)
    Bfb, BD = Bc * p.fb, Bc * p.D
    DDfb = p.DD * p.fb
    H = (p.ff * cen + s.q) * conj(p.D)
    j = np.arange(1, K + 1)
    l1 = -m * j
    l2 = -m * np.arange(0, K + 1)
    c = -unit * np.ones(K)
    zero = np.zeros(K, dtype=np.int64)
    # mu columns: d(C mu) = c tau**k, k = 1 - m j
    k = 1 - m * j
    ik = 1j * Om * c * k
    ic = 1j * Om * np.conj(c)
    # tau dB = i Om (c k fb tau**k + conj(c) D tau**(1-k))
    A_mu = _re_gather([(ik, p.fb, zero), (ic, p.D, 1 - 2 * k)], l1, k)
    B_mu = _re_gather(
        [(ik, Bfb, zero - 1), (ic, BD, -2 * k), (-2 * cen * c, DDfb, zero), (-2 * c * k, H, zero - 1)], l2, k
    )
    # nu columns: d(C nu) = c tau**k, k = -m j
    k = -m * j
    A_nu = _re_gather([(c * k, one, zero)], l1, k)
    B_nu = _re_gather([(c * k, Bc, zero - 1)], l2, k)
    return A_mu, B_mu, A_nu, B_nu, p


def jacobian(s: MFoldState, space: Literal["even", "full"] = "even", with_omega: bool = True) -> NDArray[np.float64]:
    """Jacobian of the Galerkin equations in the chosen coordinates.

    even: unknowns ``[mu_hat (real, K), Im nu_hat (K), q, Omega]`` (Omega
    column only if ``with_omega``); equations ``[Im F1_{-mn} (n=1..K),
    N2_{-mn} (n=0..K)]``.
    full: unknowns ``[Re mu, Im mu, Re nu, Im nu, q]``; equations
    ``[Re F1, Im F1, Re N2, Im N2 (n=1..K), N2_0]``.
    """
    K = s.K
    p = _pieces(s)
    dq = -p.DD.gather(-s.m * np.arange(0, K + 1))
    if space == "even":
        A_mu, B_mu, _, _, p = _jacobian_columns(s, 1.0, p)
        _, _, A_nu, B_nu, _ = _jacobian_columns(s, 1j, p)
        top = np.hstack([A_mu.imag, A_nu.imag, np.zeros((K, 1))])
        bot = np.hstack([B_mu.real, B_nu.real, dq.real[:, None]])
        J = np.vstack([top, bot])
        if with_omega:
            z = np.zeros(K, dtype=complex)
            col = _eq_even(s, *linearize(s, z, z, dOmega=1.0, p=p))
            J = np.hstack([J, col[:, None]])
        return J
    if space == "full":
        A1, B1, C1, D1, p = _jacobian_columns(s, 1.0, p)
        A2, B2, C2, D2, _ = _jacobian_columns(s, 1j, p)
        # F1 rows n = 1..K; N2 rows: n = 1..K then n = 0
        Bm = [B1[1:], B2[1:], D1[1:], D2[1:]]
        Am = [A1, A2, C1, C2]
        rows_a = np.hstack(Am)
        rows_b = np.hstack(Bm)
        rows_0 = np.hstack([B1[:1], B2[:1], D1[:1], D2[:1]])
        zc = np.zeros((K, 1))
        J = np.vstack(
            [
                np.hstack([rows_a.real, zc]),
                np.hstack([rows_a.imag, zc]),
                np.hstack([rows_b.real, dq.real[1:, None]]),
                np.hstack([rows_b.imag, dq.imag[1:, None]]),
                np.hstack([rows_0.real, dq.real[:1, None]]),
            ]
        )
        return J
    raise ValueError(space)


def jacobian_by_directions(s: MFoldState, space: Literal["even", "full"] = "even", with_omega: bool = True) -> NDArray[np.float64]:
    """Same Jacobian built one direction at a time through :func:`linearize` (slow reference)."""
    p = _pieces(s)
    K = s.K
    cols = []
    z = np.zeros(K, dtype=complex)
    if space == "even":
        for unit, which in ((1, "mu"), (1j, "nu")):
            for j in range(K):
                e = z.copy(); e[j] = unit
                args = (e, z) if which == "mu" else (z, e)
                cols.append(_eq_even(s, *linearize(s, *args, p=p)))
        cols.append(_eq_even(s, *linearize(s, z, z, dq=1.0, p=p)))
        if with_omega:
            cols.append(_eq_even(s, *linearize(s, z, z, dOmega=1.0, p=p)))
    else:
        for which in ("mu", "nu"):
            for unit in (1, 1j):
                for j in range(K):
                    e = z.copy(); e[j] = unit
                    args = (e, z) if which == "mu" else (z, e)
                    cols.append(_eq_full(s, *linearize(s, *args, p=p)))
        cols.append(_eq_full(s, *linearize(s, z, z, dq=1.0, p=p)))
    return np.array(cols).T


def linearized_operator(m: int, gamma: float, Omega: complex, K: int = 32, space: str = "full", model: Model = "hollow") -> NDArray[np.float64]:
    """Linearisation at the circular state assembled from exact trace derivatives."""
    return jacobian(MFoldState.trivial(m, gamma, Omega, K, model), space=space, with_omega=False)


def block_operator(m: int, gamma: float, Omega: complex, K: int = 32) -> NDArray[np.float64]:
    """Linearisation at the circle from the closed-form per-mode blocks (full space).

    Mode n maps ``(mu_hat, nu_hat)`` to
    ``a_hat = (mn/2)(nu_hat + i Omega_n mu_hat)`` and
    ``b_hat = -c a_hat + (d_m(n)/2) mu_hat`` with
    ``c = conj(G)/(2 pi i) + i conj(Omega)``; ``q`` maps to ``-q`` in mode 0.
    """
    Om = complex(Omega)
    G = bold_gamma(gamma, Om)
    c = np.conj(G) / (2j * math.pi) + 1j * np.conj(Om)
    L = np.zeros((4 * K + 1, 4 * K + 1))

    def place(row_re, row_im, col_re, col_im, z):
        # complex scalar z acting on (x + i y) -> real 2x2 block
        L[row_re, col_re] += z.real
        L[row_re, col_im] += -z.imag
        L[row_im, col_re] += z.imag
        L[row_im, col_im] += z.real

    for i in range(K):
        n = i + 1
        N = m * n
        On = ((N - 1) * Om + np.conj(Om)) / N
        d = complex(dispersion(m, n, gamma, Om))
        mu_re, mu_im, nu_re, nu_im = i, K + i, 2 * K + i, 3 * K + i
        a_re, a_im, b_re, b_im = i, K + i, 2 * K + i, 3 * K + i
        A_mu, A_nu = 0.5 * N * 1j * On, 0.5 * N
        place(a_re, a_im, mu_re, mu_im, A_mu)
        place(a_re, a_im, nu_re, nu_im, A_nu)
        place(b_re, b_im, mu_re, mu_im, -c * A_mu + 0.5 * d)
        place(b_re, b_im, nu_re, nu_im, -c * A_nu)
    L[4 * K, 4 * K] = -1.0
    return L


def kernel_basis(L: NDArray[np.float64], rtol: float = 1e-10) -> NDArray[np.float64]:
    """Orthonormal null-space basis (columns) by SVD."""
    u, sv, vt = np.linalg.svd(L)
    tol = rtol * max(1.0, sv[0])
    return vt[sv <= tol].T


def transversality(m: int, sign: int, gamma: float = 2 * math.pi, K: int = 4, h: float = 1e-5) -> float:
    """Pairing of the cokernel functional with ``d/dOmega L(Omega) v``.

    ``v`` is the kernel vector with ``mu_hat_1 = 1`` (the coefficient of
    ``tau**(1-m)``) and ``nu_hat_1 = -i Omega_0``.  The functional sends the
    mode-1 outputs ``(A, B)`` to ``Re(c A_{-m} + B_{-m}) * 2``, i.e. the
    integral ``(1/pi) int (c A + B) tau**m dtheta``.  The Omega derivative is
    a central difference of the exact linearisation along the circle family.
    """
    O0 = bifurcation_omega(m, sign, gamma)
    dmu = np.zeros(K, dtype=complex)
    dnu = np.zeros(K, dtype=complex)
    dmu[0] = 1.0
    dnu[0] = -1j * O0

    def lin(Om):
        s = MFoldState.trivial(m, gamma, Om, K)
        return linearize(s, dmu, dnu)

    Ap, Bp = lin(O0 + h)
    Am, Bm = lin(O0 - h)
    dA = (Ap.coeff(-m) - Am.coeff(-m)) / (2 * h)
    dB = (Bp.coeff(-m) - Bm.coeff(-m)) / (2 * h)
    c = gamma / (2j * math.pi) + 1j * O0
    return float(2 * (c * dA + dB).real)


# ----------------------------------------------------------------------
# reference expansions


def third_order_expansion(m: int, sign: int, eps: float, gamma: float = 2 * math.pi) -> dict:
    """Third-order small-amplitude expansion of the bifurcating branch.

    Returns f coefficients of ``zeta**(1-mn)``, w coefficients of
    ``zeta**(-mn)`` (n = 1, 2, 3), ``Omega`` and ``q``.
    """
    s = sign
    r = math.sqrt(m)
    a = r + s
    g = gamma / (2 * math.pi)
    f = np.array([eps, -eps**2 * a**2, 1.5 * eps**3 * a**4])
    wl = np.array(
        [eps * a / r + s * eps**3 * a**4 / (2 * r), -eps**2 * a**3 / r, 1.5 * eps**3 * a**5 / r]
    )
    w = gamma / (2j * math.pi) * wl
    Om = g * (a / r + s * eps**2 * a**3 * (r + 3 * s) / (2 * r))
    q = g * g * (-(r + 2 * s) / (2 * r) - s * eps**2 * a**2 * (m + 3 * s * r + 3) / (2 * r))
    return {"f": f, "w": w, "Omega": Om, "q": q}


def hstate_expansion(m: int, eps: float, gamma: float = 2 * math.pi) -> dict:
    """Small-amplitude expansion of the H-state family (no centrifugal term)."""
    g = gamma / (2 * math.pi)
    f = np.array([eps, -(eps**2) * (m - 1) ** 2 / (4 * m), eps**3 * (m - 1) ** 4 / (16 * m * m)])
    wl = np.array(
        [eps * (m - 1) / (m + 1), -(eps**2) * (m - 1) ** 3 / (4 * m * (m + 1)), eps**3 * (m - 1) ** 5 / (16 * m * m * (m + 1))]
    )
    Om = g * ((m - 1) / (m + 1) + eps**2 * (m - 1) ** 2 / (4 * m * (m + 1)))
    q = g * g * (2 / (m + 1) ** 2 + eps**2 * (m - 1) ** 2 / (2 * m * (m + 1)))
    return {"f": f, "w": gamma / (2j * math.pi) * wl, "Omega": Om, "q": q}


def hstate_exact_map(m: int, eps: float, zeta: ArrayLike, pole_sign: int = +1) -> NDArray[np.complex128]:
    """Closed-form H-state map ``zeta + eps zeta / (zeta**m + s eps (m-1)^2 / (4m))``.

    ``pole_sign=+1`` is the sign consistent with the series coefficients;
    ``-1`` reproduces the literature formula with a minus in the denominator.
    """
    z = np.asarray(zeta, dtype=np.complex128)
    return z + eps * z / (z**m + pole_sign * 0.25 * eps * (m - 1) ** 2 / m)


def vstate_expansion(m: int, eps: float, theta: ArrayLike, omega: float = 1.0) -> dict:
    """Boundary radius and angular velocity of the rotating-patch (V-state) family."""
    th = np.asarray(theta, dtype=float)
    R = (
        1
        + eps * np.cos(m * th)
        + eps**2 * (2 * m - 1) / 4 * np.cos(2 * m * th)
        + eps**3 * (3 * m - 1) * (m - 1) / 8 * np.cos(2 * m * th)
    )
    return {"R": R, "Omega": omega * ((m - 1) / (2 * m) - eps**2 * (m - 1) / 4)}


def critical_radius_squared(m: int, family: str) -> float | None:
    """|xi|^2 of the critical layer at the bifurcation point (None if absent)."""
    r = math.sqrt(m)
    if family == "+":
        return None
    if family == "-":
        return r / (r - 1)
    if family == "H":
        return (m + 1) / (m - 1)
    if family == "V":
        return m / (m - 1)
    raise ValueError(family)


# ----------------------------------------------------------------------
# Newton solvers


def _state_from_expansion(m: int, sign: int, eps: float, gamma: float, K: int, model: Model) -> MFoldState:
    exp = third_order_expansion(m, sign, eps, gamma) if model == "hollow" else hstate_expansion(m, eps, gamma)
    mu = np.zeros(K, dtype=complex)
    nu = np.zeros(K, dtype=complex)
    k = min(3, K)
    mu[:k] = -exp["f"][:k]
    nu[:k] = -exp["w"][:k]
    return MFoldState(m, gamma, exp["Omega"], exp["q"], mu, nu, model=model, eps=eps, sign=sign)


def _tail_ratio(s: MFoldState) -> float:
    K = s.K
    top = max(1, K // 4)
    v = np.concatenate([s.mu_hat, s.nu_hat])
    t = np.concatenate([s.mu_hat[-top:], s.nu_hat[-top:]])
    nv = np.linalg.norm(v)
    return float(np.linalg.norm(t) / nv) if nv > 0 else 0.0


def _apply_step(s: MFoldState, dx: NDArray[np.float64], t: float) -> MFoldState:
    K = s.K
    u = s.copy()
    u.mu_hat[1:] += t * dx[: K - 1]
    u.nu_hat += 1j * t * dx[K - 1 : 2 * K - 1]
    u.q += t * dx[2 * K - 1]
    u.Omega += t * dx[2 * K]
    return u


def _newton_even(s: MFoldState, eps: float, tol: float, maxit: int) -> MFoldState:
    """Damped Newton on the even Galerkin system (backtracking on the sup norm)."""
    scale = max(1.0, (s.gamma / (2 * math.pi)) ** 2)
    F = _eq_even(s, *_numerators(s))
    err = float(np.abs(F).max())
    it = 0
    for it in range(maxit + 1):
        if err <= tol * scale:
            break
        if it == maxit or not np.isfinite(err):
            raise SolverFailure(f"Newton did not converge in {maxit} iterations (residual {err:.3e})")
        J = jacobian(s, "even")[:, 1:]
        dx = np.linalg.solve(J, -F)
        t = 1.0
        while True:
            u = _apply_step(s, dx, t)
            Fu = _eq_even(u, *_numerators(u))
            eu = float(np.abs(Fu).max())
            if eu < err or t < 1e-3 or err < 1e3 * tol * scale:
                break
            t *= 0.5
        s, F, err = u, Fu, eu
    s.iterations = it
    s.tail_ratio = _tail_ratio(s)
    return s


def _scaled_guess(prev: MFoldState, eps: float) -> MFoldState:
    """Rescale mode n of a converged state by ``(eps/eps_prev)**n``; Omega and q are
    extrapolated quadratically about the bifurcation point."""
    g = prev.copy()
    r = eps / prev.eps
    n = np.arange(1, prev.K + 1)
    g.mu_hat = g.mu_hat * r**n
    g.nu_hat = g.nu_hat * r**n
    if g.model == "hollow":
        O0 = bifurcation_omega(g.m, g.sign, g.gamma)
        q0 = trivial_q(g.gamma, O0)
        g.Omega = O0 + (prev.Omega - O0) * r * r
        g.q = q0 + (prev.q - q0) * r * r
    g.eps = eps
    return g


def _resized(s: MFoldState, K: int) -> MFoldState:
    t = s.copy()
    mu = np.zeros(K, dtype=complex)
    nu = np.zeros(K, dtype=complex)
    k = min(K, s.K)
    mu[:k] = s.mu_hat[:k]
    nu[:k] = s.nu_hat[:k]
    t.mu_hat, t.nu_hat = mu, nu
    return t


def solve_branch(
    m: int,
    sign: int,
    eps: float,
    gamma: float = 2 * math.pi,
    K: int | None = None,
    model: Model = "hollow",
    guess: MFoldState | None = None,
    tol: float = NEWTON_TOL,
    maxit: int = NEWTON_MAXIT,
    K_max: int = 512,
    _depth: int = 0,
) -> MFoldState:
    """Solve for the even m-fold state with amplitude ``eps``.

    The amplitude is pinned as ``f_hat_1 = eps`` (``mu_hat_1 = -eps``); the
    remaining unknowns are ``mu_hat_2..K`` (real), ``nu_hat`` (imaginary),
    ``q`` and real ``Omega``.  Newton uses the exact Jacobian.  With
    ``K=None`` the truncation starts at 32 modes (Fourier index 32 m) and
    doubles until the top quarter of the coefficients carries at most
    ``TAIL_TOL`` of the norm; an explicit ``K`` is used as given.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    adaptive = K is None
    K = 32 if K is None else int(K)
    s = _state_from_expansion(m, sign, eps, gamma, K, model) if guess is None else _resized(guess, K)
    s.mu_hat = s.mu_hat.real.astype(complex)
    s.nu_hat = 1j * s.nu_hat.imag
    s.Omega = complex(s.Omega.real, 0.0)
    s.mu_hat[0] = -eps
    s.eps, s.sign, s.model, s.gamma, s.m = eps, sign, model, gamma, m
    while True:
        try:
            s = _newton_even(s, eps, tol, maxit)
        except SolverFailure:
            if guess is not None or _depth > 6 or eps == 0:
                raise
            # reach hard amplitudes by continuation from eps/2
            half = solve_branch(m, sign, eps / 2, gamma, K if not adaptive else None, model, tol=tol,
                                maxit=maxit, K_max=K_max, _depth=_depth + 1)
            s = _resized(_scaled_guess(half, eps), max(K, half.K))
            K = s.K
            s.mu_hat[0] = -eps
            s = _newton_even(s, eps, tol, maxit)
        if s.tail_ratio <= TAIL_TOL:
            break
        if not adaptive or 2 * K > K_max:
            raise SolverFailure(f"truncation under-resolved: tail ratio {s.tail_ratio:.3e} > {TAIL_TOL:g} at K={K}")
        K *= 2
        s = _resized(s, K)
    s.residual_norm = residual_norm(s)
    s.meta["K"] = K
    return s


def continue_branch(
    m: int,
    sign: int,
    eps_values: ArrayLike,
    gamma: float = 2 * math.pi,
    K: int | None = None,
    model: Model = "hollow",
) -> list[MFoldState]:
    """Natural-parameter continuation; each solve is seeded by the previous one
    rescaled, or by the third-order expansion if that has smaller residual."""
    out: list[MFoldState] = []
    prev: MFoldState | None = None
    for e in np.asarray(eps_values, dtype=float):
        guess = None
        if prev is not None and prev.eps != 0:
            g0 = _state_from_expansion(m, sign, float(e), gamma, prev.K, model)
            r0 = np.abs(_eq_even(g0, *_numerators(g0))).max()
            g1 = prev.copy()
            ratio = e / prev.eps
            n = np.arange(1, prev.K + 1)
            g1.mu_hat = g1.mu_hat * ratio**n
            g1.nu_hat = g1.nu_hat * ratio**n
            g1.mu_hat[0] = -e
            r1 = np.abs(_eq_even(g1, *_numerators(g1))).max()
            guess = g1 if r1 < r0 else g0
        s = solve_branch(m, sign, float(e), gamma, K, model, guess=guess)
        out.append(s)
        prev = s
    return out


@dataclass
class PitchforkResult:
    m: int
    sign: int
    direction: str  # "supercritical" | "subcritical" | "degenerate"
    c2: float  # Omega = Omega_0 + c2 eps^2 + O(eps^4)
    c2_expected: float
    threshold: float
    eps: float


def pitchfork_direction(
    m: int, sign: int, gamma: float = 2 * math.pi, eps: float = 0.01, K: int | None = None, tol: float = NEWTON_TOL
) -> PitchforkResult:
    """Classify the pitchfork by the eps^2 coefficient of Omega along the branch.

    ``(Omega(eps) - Omega_0) / eps^2 = c2 + c4 eps^2 + c6 eps^4 + ...`` is
    sampled at ``eps, eps/2, eps/4`` and two Richardson levels remove the
    eps^2 and eps^4 contamination.  Supercritical means the branch exists
    for ``Omega > Omega_0`` (``c2 > 0``).  The coefficient is flagged
    degenerate when ``|c2| eps^2`` is below ten Newton tolerances.
    """
    O0 = bifurcation_omega(m, sign, gamma)
    r = []
    for h in (eps, eps / 2, eps / 4):
        st = solve_branch(m, sign, h, gamma, K, tol=tol)
        r.append((st.Omega.real - O0) / h**2)
    R1 = [(4 * r[1] - r[0]) / 3, (4 * r[2] - r[1]) / 3]
    c2 = (16 * R1[1] - R1[0]) / 15
    sq = math.sqrt(m)
    expected = sign * gamma * (sq + sign) ** 3 * (sq + 3 * sign) / (4 * math.pi * sq)
    thr = 10 * tol * max(1.0, (gamma / (2 * math.pi)) ** 2)
    if abs(c2) * eps**2 <= thr:
        d = "degenerate"
    else:
        d = "supercritical" if c2 > 0 else "subcritical"
    return PitchforkResult(m, sign, d, c2, expected, thr, eps)


# ----------------------------------------------------------------------
# rigidity


@dataclass
class RigidityResult:
    min_abs_d: float
    argmin_n: int
    converged_to_trivial: bool
    final_norm: float
    iterations: int


def rigidity_check(
    m: int,
    gamma: float,
    Omega: complex,
    n_max: int = 64,
    K: int = 16,
    perturbation: float = 1e-2,
    seed: int = 0,
    tol: float = 1e-11,
) -> RigidityResult:
    """Bound ``|d_m(n, Omega)|`` away from zero and run Newton from a perturbed circle.

    For finite kappa no non-circular m-fold state exists near the circle;
    Newton (in the full, non-symmetric space at fixed ``Omega``) must return
    to the circular state.  The random perturbation has size
    ``perturbation`` in the derivative-weighted norm (mode n scaled by
    ``1/(m n)``), plus a shift of ``q``.
    """
    Om = complex(Omega)
    d = np.abs(dispersion(m, np.arange(1, n_max + 1), gamma, Om))
    i = int(np.argmin(d))
    rng = np.random.default_rng(seed)
    s = MFoldState.trivial(m, gamma, Om, K)
    q0 = s.q
    # size measured on f_zeta - 1 and w_zeta: mode n carries a factor 1/(m n)
    decay = 0.5 ** np.arange(K) / (m * np.arange(1, K + 1))
    s.mu_hat = perturbation * decay * (rng.standard_normal(K) + 1j * rng.standard_normal(K))
    s.nu_hat = perturbation * decay * (rng.standard_normal(K) + 1j * rng.standard_normal(K))
    s.q += perturbation * rng.standard_normal()
    def unpack(x, t):
        u = s.copy()
        u.mu_hat = s.mu_hat + t * (x[:K] + 1j * x[K : 2 * K])
        u.nu_hat = s.nu_hat + t * (x[2 * K : 3 * K] + 1j * x[3 * K : 4 * K])
        u.q = s.q + t * x[4 * K]
        return u

    F = _eq_full(s, *_numerators(s))
    err = float(np.abs(F).max())
    it = 0
    for it in range(NEWTON_MAXIT + 1):
        if err <= 1e-14 * max(1.0, abs(q0)) or it == NEWTON_MAXIT:
            break
        dx = np.linalg.solve(jacobian(s, "full"), -F)
        t = 1.0
        while True:
            u = unpack(dx, t)
            Fu = _eq_full(u, *_numerators(u))
            eu = float(np.abs(Fu).max())
            if eu < err or t < 1e-4:
                break
            t *= 0.5
        s, F, err = u, Fu, eu
    dist = float(max(np.abs(s.mu_hat).max(), np.abs(s.nu_hat).max(), abs(s.q - q0)))
    return RigidityResult(float(d[i]), i + 1, dist <= tol, dist, it)
