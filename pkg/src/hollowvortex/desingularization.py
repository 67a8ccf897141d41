"""Hollow-vortex desingularization of a collapsing point-vortex configuration.

Unknowns per vortex k: mean-zero real densities ``mu_k, nu_k`` (positive
Fourier modes 1..N), a Bernoulli constant ``Q_k`` and a sink strength
``sigma_k``; plus the 2M real parameters ``lambda`` named by a split.  With
disks ``B_rho(zeta_k)`` and the layer potential ``Z`` of ``layer_potential``,

    f = id + rho**2 Z[mu],
    w = sum_j g_j / (2 pi i) log(zeta - zeta_j) + rho Z[nu],
    g_j = gamma_j + i rho**2 sigma_j.

The imaginary part of ``g_j`` is the sink that absorbs the fluid displaced
by the shrinking core; without it the boundary flux cannot vanish.

On circle k write ``rho (w_zeta + i Om f_zeta conj f) = a + rho Bt`` with
``a = g_k / (2 pi i tau)`` and ``Bt = Z_k nu' + V_k + rho Ct``.  Then

    kinematic / rho = rho sigma_k / (2 pi) + Re(tau Bt),
    Bernoulli       = [2 Re(conj(a) Bt) + rho |Bt|^2 - |a|^2 Dt
                       - rho |Om|^2 |f|^2 (1 + rho Dt)] / (1 + rho Dt),

with ``Dt = 2 Re Z_k mu' + rho |Z_k mu'|^2``.  Both are analytic through
``rho = 0``.  Newton works with the Bernoulli condition multiplied through
by ``1 + rho Dt``.  ``Z_k mu'`` denotes ``d/dtau`` of the trace ``Z_k mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.special import binom

from .fourier import BoundaryTrace, FourierDensity, cauchy
from .layer_potential import (
    DiskConfiguration,
    DomainError,
    off_disk_operator,
    off_disk_order,
    z_field,
    z_field_derivative,
)
from .point_vortex import (
    PointVortexConfig,
    expand_split,
    get_params,
    residual as pv_residual,
    set_params,
    split_jacobian,
)
from .single_vortex import Degeneracy, SolverFailure

__all__ = [
    "HollowState",
    "InjectivityError",
    "strain_coefficients",
    "v_rho_series",
    "leading_order_state",
    "predicted_Q_slope",
    "evaluate",
    "residual_vector",
    "jacobian",
    "kinematic_operator",
    "bernoulli_operator",
    "linear_bernoulli",
    "pointwise_kinematic",
    "pointwise_speed2",
    "solve",
    "newton_family",
    "linearization_at_root",
    "check_domain",
    "fit_family",
]

TWO_PI_I = 2j * math.pi


class InjectivityError(DomainError):
    """A boundary curve self-intersects or two boundaries touch."""


# ----------------------------------------------------------------------
# state


@dataclass
class HollowState:
    config: PointVortexConfig
    rho: float
    mu: NDArray[np.complex128]       # (M, N): mu_hat_{k,n}, n = 1..N
    nu: NDArray[np.complex128]
    Q: NDArray[np.float64]
    sigma: NDArray[np.float64]
    split: tuple[str, ...]
    with_sinks: bool = True
    residual_norm: float = math.nan
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.config.M

    @property
    def N(self) -> int:
        return self.mu.shape[1]

    @property
    def centers(self) -> NDArray[np.complex128]:
        return self.config.z

    @property
    def bold_gammas(self) -> NDArray[np.complex128]:
        g = self.config.gamma.astype(complex)
        if self.with_sinks:
            g = g + 1j * self.rho**2 * self.sigma
        return g

    @property
    def disks(self) -> DiskConfiguration:
        return DiskConfiguration(self.config.z, self.rho)

    def copy(self) -> "HollowState":
        return HollowState(
            self.config.copy(), self.rho, self.mu.copy(), self.nu.copy(), self.Q.copy(),
            self.sigma.copy(), tuple(self.split), self.with_sinks, self.residual_norm,
            self.iterations, dict(self.meta),
        )

    def resized(self, N: int) -> "HollowState":
        out = self.copy()
        mu = np.zeros((self.M, N), dtype=complex)
        nu = np.zeros((self.M, N), dtype=complex)
        n = min(N, self.N)
        mu[:, :n], nu[:, :n] = self.mu[:, :n], self.nu[:, :n]
        out.mu, out.nu = mu, nu
        return out

    def densities(self, which: str = "mu") -> list[FourierDensity]:
        arr = self.mu if which == "mu" else self.nu
        return [FourierDensity.from_positive({n + 1: c for n, c in enumerate(row)}) for row in arr]

    # physical fields at points zeta outside the disks ----------------------
    def f(self, zeta):
        return np.asarray(zeta, dtype=complex) + self.rho**2 * z_field(self.densities("mu"), self.disks, zeta)

    def f_zeta(self, zeta):
        return 1.0 + self.rho**2 * z_field_derivative(self.densities("mu"), self.disks, zeta)

    def w_zeta(self, zeta):
        z = np.asarray(zeta, dtype=complex)
        g = self.bold_gammas
        out = sum(g[j] / (TWO_PI_I * (z - self.centers[j])) for j in range(self.M))
        return out + self.rho * z_field_derivative(self.densities("nu"), self.disks, z)

    def w(self, zeta):
        """Complex potential (principal logarithms; multivalued across branch cuts)."""
        z = np.asarray(zeta, dtype=complex)
        g = self.bold_gammas
        out = sum(g[j] / TWO_PI_I * np.log(z - self.centers[j]) for j in range(self.M))
        return out + self.rho * z_field(self.densities("nu"), self.disks, z)

    def boundary(self, k: int, n: int = 512) -> NDArray[np.complex128]:
        tau = np.exp(2j * math.pi * np.arange(n) / n)
        return self.f(self.centers[k] + self.rho * tau)

    def to_json(self, n_boundary: int = 512) -> dict:
        d = {
            "kind": "hollow_configuration",
            "rho": self.rho,
            "with_sinks": self.with_sinks,
            "split": list(self.split),
            "config": self.config.to_json(),
            "mu": [[[c.real, c.imag] for c in row] for row in self.mu],
            "nu": [[[c.real, c.imag] for c in row] for row in self.nu],
            "Q": [float(q) for q in self.Q],
            "sigma": [float(s) for s in self.sigma],
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
        }
        if n_boundary and self.rho != 0:
            d["boundaries"] = [[[p.real, p.imag] for p in self.boundary(k, n_boundary)] for k in range(self.M)]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "HollowState":
        arr = lambda x: np.array([[complex(a, b) for a, b in row] for row in x])
        return cls(
            PointVortexConfig.from_json(d["config"]), float(d["rho"]), arr(d["mu"]), arr(d["nu"]),
            np.array(d["Q"], dtype=float), np.array(d["sigma"], dtype=float), tuple(d["split"]),
            bool(d.get("with_sinks", True)), float(d.get("residual_norm", math.nan)),
            int(d.get("iterations", 0)),
        )


# ----------------------------------------------------------------------
# closed-form pieces


def strain_coefficients(config: PointVortexConfig) -> NDArray[np.complex128]:
    """``S_k = -1/2 sum_{j != k} gamma_j / (2 pi i (zeta_j - zeta_k)**2)``."""
    z, g = config.z, config.gamma
    d = z[None, :] - z[:, None]
    if config.M > 1 and np.min(np.abs(d) + np.eye(config.M)) == 0:
        raise DomainError("coincident centers")
    np.fill_diagonal(d, 1.0)
    T = g[None, :] / (TWO_PI_I * d**2)
    np.fill_diagonal(T, 0.0)
    return -0.5 * T.sum(axis=1)


def predicted_Q_slope(config: PointVortexConfig) -> NDArray[np.float64]:
    """``dQ_k/drho`` at 0 from the first-order Bernoulli balance."""
    Om = config.Omega
    return -config.gamma * Om.real / math.pi - abs(Om) ** 2 * np.abs(config.z) ** 2


def _inv_pow_coeffs(d: complex, rho: float, power: int, P: int) -> NDArray[np.complex128]:
    """Taylor coefficients in tau of ``(d + rho tau)**(-power)`` up to order P."""
    m = np.arange(P + 1)
    return binom(power + m - 1, m) * (-rho / d) ** m / d**power


def _series_order(rho: float, dists, extra: int = 0, tol: float = 1e-17) -> int:
    q = max((abs(rho) / abs(d) for d in dists), default=0.0)
    if q == 0.0:
        return 0
    if q >= 0.5:
        raise DomainError("disks overlap")
    return int(math.ceil(math.log(tol) / math.log(q))) + extra


def v_rho_series(
    config: PointVortexConfig, rho: float, k: int, gammas=None, order: int | None = None
) -> BoundaryTrace:
    """Taylor series in tau of the regular part of ``w_zeta + i Om conj(zeta_k)`` on circle k.

    ``V_k(Lambda) + sum_{m>=1} sum_{j != k} (-1)^m g_j rho^m tau^m / (2 pi i (zeta_k - zeta_j)^(m+1))``.
    """
    z = config.z
    g = config.gamma.astype(complex) if gammas is None else np.asarray(gammas, dtype=complex)
    d = [z[k] - z[j] for j in range(config.M) if j != k]
    P = _series_order(rho, d, extra=2) if order is None else int(order)
    c = np.zeros(P + 1, dtype=complex)
    for j in range(config.M):
        if j != k:
            c += g[j] / TWO_PI_I * _inv_pow_coeffs(z[k] - z[j], rho, 1, P)
    c[0] += 1j * config.Omega * np.conj(z[k])
    return BoundaryTrace(0, c)


def linear_bernoulli(config: PointVortexConfig, k: int, mu_k: BoundaryTrace, nu_k: BoundaryTrace) -> BoundaryTrace:
    """The rho = 0 Bernoulli operator
    ``(g^2 / 2 pi^2) Re((2 pi i tau / g)(V_k + C nu') - C mu')``, in coefficient algebra."""
    gk = float(config.gamma[k])
    Vk = complex(pv_residual(config)[k])
    inner = (BoundaryTrace.constant(Vk) + cauchy(nu_k).d_tau()).shift(1) * (TWO_PI_I / gk) - cauchy(mu_k).d_tau()
    return inner.real() * (gk**2 / (2 * math.pi**2))


# ----------------------------------------------------------------------
# forward-mode arithmetic on sampled traces


class _D:
    """Value on the grid (or scalar) with tangents, one row per unknown."""

    __slots__ = ("v", "d")

    def __init__(self, v, d):
        self.v = v
        self.d = d

    @staticmethod
    def _lift(x):
        return x if isinstance(x, _D) else _D(x, 0.0)

    def __add__(self, o):
        o = _D._lift(o)
        return _D(self.v + o.v, self.d + o.d)

    __radd__ = __add__

    def __sub__(self, o):
        o = _D._lift(o)
        return _D(self.v - o.v, self.d - o.d)

    def __rsub__(self, o):
        return _D._lift(o) - self

    def __neg__(self):
        return _D(-self.v, -self.d)

    def __mul__(self, o):
        if isinstance(o, _D):
            return _D(self.v * o.v, self.d * o.v + self.v * o.d)
        return _D(self.v * o, self.d * o)

    __rmul__ = __mul__

    def conj(self):
        return _D(np.conj(self.v), np.conj(self.d))

    def re(self):
        return _D(np.real(self.v), np.real(self.d))

    def abs2(self):
        return (self * self.conj()).re()


# ----------------------------------------------------------------------
# discretisation


@dataclass
class _Layout:
    M: int
    N: int
    names: list[str]          # expanded lambda coordinates
    sinks: bool

    @property
    def n_mu(self):
        return self.M * self.N

    def col(self, block: str, k: int = 0, n: int = 0) -> int:
        MN = self.n_mu
        base = {"mu.re": 0, "mu.im": MN, "nu.re": 2 * MN, "nu.im": 3 * MN}
        if block in base:
            return base[block] + k * self.N + n
        if block == "Q":
            return 4 * MN + k
        if block == "sigma":
            return 4 * MN + self.M + k
        raise KeyError(block)

    @property
    def lam0(self) -> int:
        return 4 * self.n_mu + self.M * (2 if self.sinks else 1)

    @property
    def size(self) -> int:
        return self.lam0 + len(self.names)

    @property
    def rows_per_vortex(self) -> int:
        return 2 * self.N + (1 if self.sinks else 0) + 1 + 2 * (self.N + 1)


def _grid_size(N: int, P: int) -> int:
    K = 16
    while K < 4 * (N + P + 4):
        K *= 2
    return K


class _Discretization:
    def __init__(self, state: HollowState):
        cfg, rho, N, M = state.config, state.rho, state.N, state.M
        self.rho, self.N, self.M = rho, N, M
        z = cfg.z
        if rho != 0:
            DiskConfiguration(z, rho)      # validates separation
        self.P = {}
        Pmax = 0
        for k in range(M):
            for j in range(M):
                if j != k:
                    r = rho / (z[k] - z[j])
                    P = max(off_disk_order(r, N), _series_order(rho, [z[k] - z[j]], extra=2))
                    self.P[j, k] = P
                    Pmax = max(Pmax, P)
        self.Pmax = Pmax
        K = _grid_size(N, Pmax)
        self.K = K
        t = np.exp(2j * math.pi * np.arange(K) / K)
        self.t = t
        p = np.arange(Pmax + 1)
        self.tp = t[:, None] ** p[None, :]
        self.tp1 = np.zeros_like(self.tp)
        self.tp1[:, 1:] = p[1:] * t[:, None] ** (p[1:] - 1)
        self.tp2 = np.zeros_like(self.tp)
        self.tp2[:, 2:] = p[2:] * (p[2:] - 1) * t[:, None] ** (p[2:] - 2)
        n = np.arange(1, N + 1)
        self.own = -(t[:, None] ** (-n[None, :]))
        self.own1 = n[None, :] * t[:, None] ** (-n[None, :] - 1)
        self.S, self.S1, self.S2 = {}, {}, {}
        for (j, k), P in self.P.items():
            T = off_disk_operator(N, rho / (z[k] - z[j]), P)
            self.S[j, k] = self.tp[:, : P + 1] @ T
            self.S1[j, k] = self.tp1[:, : P + 1] @ T
            self.S2[j, k] = self.tp2[:, : P + 1] @ T

    def inv_samples(self, d: complex, power: int, P: int) -> NDArray[np.complex128]:
        return self.tp[:, : P + 1] @ _inv_pow_coeffs(d, self.rho, power, P)


def _evaluate(state: HollowState, with_tangents: bool):
    """Sampled kinematic and Bernoulli expressions on every circle.

    Returns a list of dicts with keys ``kin`` (Re(tau Bt), _D), ``E`` (the
    flux equation, _D) and ``bern`` (cleared Bernoulli, _D), plus helpers.
    """
    cfg, rho, M, N = state.config, state.rho, state.M, state.N
    names = expand_split(state.split)
    lay = _Layout(M, N, names, state.with_sinks)
    disc = _Discretization(state)
    K, t = disc.K, disc.t
    C = lay.size if with_tangents else 0
    z, Om0 = cfg.z, cfg.Omega
    g = state.bold_gammas
    a_mu = np.conj(state.mu)         # coefficient at tau^{-n}
    a_nu = np.conj(state.nu)

    def grid(v):
        return _D(v, np.zeros((C, K), dtype=complex) if with_tangents else 0.0)

    def scal(v):
        return _D(v, np.zeros((C, 1), dtype=complex) if with_tangents else 0.0)

    Om = scal(Om0)
    if with_tangents:
        for i, nm in enumerate(names):
            c = lay.lam0 + i
            if nm == "Omega.re":
                Om.d[c] = 1.0
            elif nm == "Omega.im":
                Om.d[c] = 1j
            elif nm == "kappa":
                Om.d[c] = 1j * 0.5 / cfg.kappa**2

    out = []
    for k in range(M):
        others = [j for j in range(M) if j != k]
        Zm = grid(disc.own @ a_mu[k] + sum((disc.S[j, k] @ a_mu[j] for j in others), 0.0))
        Zm1 = grid(disc.own1 @ a_mu[k] + sum((disc.S1[j, k] @ a_mu[j] for j in others), 0.0))
        Zn1 = grid(disc.own1 @ a_nu[k] + sum((disc.S1[j, k] @ a_nu[j] for j in others), 0.0))
        inv1 = {j: disc.inv_samples(z[k] - z[j], 1, disc.P[j, k]) for j in others}
        Vv = 1j * Om0 * np.conj(z[k]) + sum((g[j] / TWO_PI_I * inv1[j] for j in others), 0.0)
        V = grid(Vv + 0 * t)
        gk = scal(g[k])
        zk = scal(z[k])
        Qk = scal(state.Q[k])
        sk = scal(state.sigma[k])

        if with_tangents:
            # densities
            for j in range(M):
                Sm = disc.own if j == k else disc.S[j, k]
                S1 = disc.own1 if j == k else disc.S1[j, k]
                r = slice(lay.col("mu.re", j), lay.col("mu.re", j) + N)
                i_ = slice(lay.col("mu.im", j), lay.col("mu.im", j) + N)
                Zm.d[r] += Sm.T
                Zm.d[i_] += -1j * Sm.T
                Zm1.d[r] += S1.T
                Zm1.d[i_] += -1j * S1.T
                r = slice(lay.col("nu.re", j), lay.col("nu.re", j) + N)
                i_ = slice(lay.col("nu.im", j), lay.col("nu.im", j) + N)
                Zn1.d[r] += S1.T
                Zn1.d[i_] += -1j * S1.T
            Qk.d[lay.col("Q", k)] = 1.0
            if state.with_sinks:
                sk.d[lay.col("sigma", k)] = 1.0
                for j in range(M):
                    c = lay.col("sigma", j)
                    if j == k:
                        gk.d[c] = 1j * rho**2
                    else:
                        V.d[c] += 1j * rho**2 / TWO_PI_I * inv1[j]
            V.d += (1j * np.conj(z[k])) * Om.d
            for i, nm in enumerate(names):
                c = lay.lam0 + i
                if nm.startswith("gamma"):
                    j = int(nm[5:]) - 1
                    if j == k:
                        gk.d[c] = 1.0
                    else:
                        V.d[c] += inv1[j] / TWO_PI_I
                elif nm.startswith("z"):
                    j = int(nm[1:].split(".")[0]) - 1
                    delta = 1j if nm.endswith(".im") else 1.0
                    if j == k:
                        zk.d[c] = delta
                        V.d[c] += 1j * Om0 * np.conj(delta)
                        for i2 in others:
                            V.d[c] += -g[i2] / TWO_PI_I * disc.inv_samples(z[k] - z[i2], 2, disc.P[i2, k]) * delta
                            if rho != 0:
                                Zm.d[c] += disc.S1[i2, k] @ a_mu[i2] / rho * delta
                                Zm1.d[c] += disc.S2[i2, k] @ a_mu[i2] / rho * delta
                                Zn1.d[c] += disc.S2[i2, k] @ a_nu[i2] / rho * delta
                    else:
                        V.d[c] += g[j] / TWO_PI_I * disc.inv_samples(z[k] - z[j], 2, disc.P[j, k]) * delta
                        if rho != 0:
                            Zm.d[c] -= disc.S1[j, k] @ a_mu[j] / rho * delta
                            Zm1.d[c] -= disc.S2[j, k] @ a_mu[j] / rho * delta
                            Zn1.d[c] -= disc.S2[j, k] @ a_nu[j] / rho * delta

        ct = np.conj(t)
        iOm = Om * 1j
        Ct = iOm * (zk + rho * t).conj() * Zm1 + iOm * ct + rho * iOm * (Zm.conj() + rho * Zm1 * Zm.conj())
        Bt = Zn1 + V + rho * Ct
        kin = (Bt * t).re()
        flux = (Ct * t).re()
        ca = gk.conj() * t * (1j / (2 * math.pi))      # conj(a)
        a2 = gk.abs2() * (1 / (4 * math.pi**2))
        Dt = Zm1.re() * 2.0 + rho * Zm1.abs2()
        f = zk + rho * t + rho**2 * Zm
        one_Dt = 1.0 + rho * Dt
        num = (ca * Bt).re() * 2.0 + rho * Bt.abs2() - a2 * Dt - rho * Om.abs2() * f.abs2() * one_Dt
        bern = num - Qk * one_Dt
        out.append(dict(kin=kin, flux=flux, sigma=sk, num=num, bern=bern, one_Dt=one_Dt, f=f, Zm1=Zm1, t=t))
    return out, lay, disc


def _modes(x: _D, nmin: int, nmax: int, K: int, with_tangents: bool):
    idx = np.arange(nmin, nmax + 1) % K
    v = np.fft.fft(np.broadcast_to(x.v, (K,)))[idx] / K
    d = np.fft.fft(x.d, axis=-1)[:, idx] / K if with_tangents else None
    return v, d


def _assemble(state: HollowState, with_tangents: bool):
    pieces, lay, disc = _evaluate(state, with_tangents)
    K, N = disc.K, state.N
    rows_v, rows_d = [], []

    def push(v, d, part):
        rows_v.append(getattr(np, part)(v))
        if with_tangents:
            rows_d.append(getattr(np, part)(d))

    for p in pieces:
        v, d = _modes(p["kin"], 1, N, K, with_tangents)
        push(v, d.T if with_tangents else None, "real")
        push(v, d.T if with_tangents else None, "imag")
        if state.with_sinks:
            fv, fd = _modes(p["flux"], 0, 0, K, with_tangents)
            E = p["sigma"] * (1 / (2 * math.pi))
            rows_v.append(np.array([E.v.real + fv.real[0]]))
            if with_tangents:
                rows_d.append((E.d[:, 0].real + fd[:, 0].real)[None, :])
        v, d = _modes(p["bern"], 0, N + 1, K, with_tangents)
        rows_v.append(v[:1].real)
        if with_tangents:
            rows_d.append(d[:, :1].real.T)
        push(v[1:], d[:, 1:].T if with_tangents else None, "real")
        push(v[1:], d[:, 1:].T if with_tangents else None, "imag")
    F = np.concatenate(rows_v)
    J = np.vstack(rows_d) if with_tangents else None
    return F, J, lay, pieces, disc


def residual_vector(state: HollowState) -> NDArray[np.float64]:
    return _assemble(state, False)[0]


def jacobian(state: HollowState) -> NDArray[np.float64]:
    """Exact Jacobian of ``residual_vector`` (forward-mode tangents)."""
    return _assemble(state, True)[1]


def evaluate(state: HollowState) -> dict:
    """Residual vector plus diagnostics (sup-norm, min |f_zeta| margin)."""
    F, _, lay, pieces, disc = _assemble(state, False)
    margin = min(float(np.min(np.abs(1.0 + state.rho * p["Zm1"].v))) for p in pieces)
    return {"F": F, "norm": float(np.abs(F).max()), "margin": margin, "K": disc.K}


# ----------------------------------------------------------------------
# unknown vector <-> state


def _pack(state: HollowState, lay: _Layout) -> NDArray[np.float64]:
    parts = [state.mu.real.ravel(), state.mu.imag.ravel(), state.nu.real.ravel(), state.nu.imag.ravel(), state.Q]
    if state.with_sinks:
        parts.append(state.sigma)
    parts.append(get_params(state.config, lay.names))
    return np.concatenate(parts)


def _unpack(state: HollowState, lay: _Layout, x: NDArray[np.float64]) -> HollowState:
    M, N = lay.M, lay.N
    MN = M * N
    out = state.copy()
    out.mu = (x[:MN] + 1j * x[MN : 2 * MN]).reshape(M, N)
    out.nu = (x[2 * MN : 3 * MN] + 1j * x[3 * MN : 4 * MN]).reshape(M, N)
    out.Q = x[4 * MN : 4 * MN + M].copy()
    if state.with_sinks:
        out.sigma = x[4 * MN + M : 4 * MN + 2 * M].copy()
    out.config = set_params(state.config, lay.names, x[lay.lam0 :])
    out.config.meta["split"] = tuple(state.split)
    return out


# ----------------------------------------------------------------------
# operators as traces


def _band(x: _D, K: int) -> BoundaryTrace:
    return BoundaryTrace.from_samples(np.broadcast_to(x.v, (K,)), -K // 2 + 1, K // 2 - 1)


def kinematic_operator(state: HollowState) -> list[FourierDensity]:
    """Mean-zero kinematic traces ``A_k`` (kinematic condition divided by rho)."""
    pieces, _, disc = _evaluate(state, False)
    return [FourierDensity(*_trim(_band(p["kin"], disc.K))).mean_zero() for p in pieces]


def flux_residuals(state: HollowState) -> NDArray[np.float64]:
    """Boundary flux per vortex divided by rho**2: ``sigma_k/(2 pi) + P_0 Re(tau Ct)``."""
    pieces, _, disc = _evaluate(state, False)
    s = state.sigma if state.with_sinks else np.zeros(state.M)
    return np.array([s[k] / (2 * math.pi) + float(np.mean(p["flux"].v)) for k, p in enumerate(pieces)])


def bernoulli_operator(state: HollowState) -> list[FourierDensity]:
    """``B_k - Q_k`` as real traces (pointwise division on the grid)."""
    pieces, _, disc = _evaluate(state, False)
    out = []
    for p in pieces:
        vals = p["bern"].v / p["one_Dt"].v
        out.append(FourierDensity(*_trim(BoundaryTrace.from_samples(vals.real.astype(complex), -disc.K // 2 + 1, disc.K // 2 - 1))))
    return out


def _trim(bt: BoundaryTrace) -> tuple[int, NDArray[np.complex128]]:
    n = max(abs(bt.lo), abs(bt.hi))
    c = bt.padded(-n, n)
    c = 0.5 * (c + np.conj(c[::-1]))
    return -n, c


def pointwise_kinematic(state: HollowState, k: int, n: int = 256) -> NDArray[np.float64]:
    """``Re(tau (w_zeta + i Om f_zeta conj f))`` at ``zeta_k + rho tau`` from the
    physical fields (no series expansion)."""
    tau = np.exp(2j * math.pi * np.arange(n) / n)
    zeta = state.centers[k] + state.rho * tau
    Om = state.config.Omega
    return np.real(tau * (state.w_zeta(zeta) + 1j * Om * state.f_zeta(zeta) * np.conj(state.f(zeta))))


def pointwise_speed2(state: HollowState, k: int, n: int = 256) -> NDArray[np.float64]:
    """``rho**2 |w_zeta / f_zeta + i Om conj f|**2`` at ``zeta_k + rho tau``."""
    tau = np.exp(2j * math.pi * np.arange(n) / n)
    zeta = state.centers[k] + state.rho * tau
    Om = state.config.Omega
    W = state.w_zeta(zeta) / state.f_zeta(zeta) + 1j * Om * np.conj(state.f(zeta))
    return state.rho**2 * np.abs(W) ** 2


# ----------------------------------------------------------------------
# domain and injectivity


def _segments_cross(p: NDArray[np.complex128]) -> bool:
    """True when the closed polygon ``p`` has two non-adjacent intersecting edges."""
    a, b = p, np.roll(p, -1)
    n = p.size

    def cross(u, v):
        return u.real * v.imag - u.imag * v.real

    for i in range(n):
        j = np.arange(i + 2, n if i > 0 else n - 1)
        if j.size == 0:
            continue
        d1 = cross(b[i] - a[i], a[j] - a[i])
        d2 = cross(b[i] - a[i], b[j] - a[i])
        d3 = cross(b[j] - a[j], a[i] - a[j])
        d4 = cross(b[j] - a[j], b[i] - a[j])
        if np.any((d1 * d2 < 0) & (d3 * d4 < 0)):
            return True
    return False


def check_domain(state: HollowState, n: int = 512, margin: float = 1e-8) -> dict:
    """Membership in the admissible set plus a sampled injectivity check.

    Raises DomainError (disk overlap or vanishing f'), InjectivityError.
    """
    if state.rho == 0:
        return {"min_fprime": 1.0, "min_gap": math.inf}
    state.disks.validate()
    tau = np.exp(2j * math.pi * np.arange(n) / n)
    fmin = min(float(np.min(np.abs(state.f_zeta(state.centers[k] + state.rho * tau)))) for k in range(state.M))
    if not fmin > margin:
        raise DomainError(f"f' nearly vanishes on a boundary (min {fmin:.3e})")
    curves = [state.boundary(k, n) for k in range(state.M)]
    gap = math.inf
    for k, c in enumerate(curves):
        L = float(np.abs(np.diff(np.append(c, c[0]))).sum())
        if _segments_cross(c):
            raise InjectivityError(f"boundary {k + 1} self-intersects")
        D = np.abs(c[:, None] - c[None, :])
        idx = np.arange(n)
        sep = np.minimum(np.abs(idx[:, None] - idx[None, :]), n - np.abs(idx[:, None] - idx[None, :]))
        close = D[sep > n // 8]
        if close.size and close.min() <= 1e-8 * L:
            raise InjectivityError(f"boundary {k + 1} nearly touches itself")
        for j in range(k):
            gap = min(gap, float(np.abs(c[:, None] - curves[j][None, :]).min()))
    if gap <= 0:
        raise InjectivityError("two boundaries touch")
    return {"min_fprime": fmin, "min_gap": gap}


# ----------------------------------------------------------------------
# solvers


def leading_order_state(
    config: PointVortexConfig, split: Sequence[str], rho: float, N: int = 12, with_sinks: bool = True
) -> HollowState:
    """Predictor from the first-order balance (exact slopes of mu, nu, Q at rho = 0)."""
    M = config.M
    S = strain_coefficients(config)
    mu = np.zeros((M, N), dtype=complex)
    nu = np.zeros((M, N), dtype=complex)
    mu[:, 0] = 8j * math.pi * rho * S / config.gamma
    if N >= 2:
        nu[:, 1] = -rho * S
    Q = rho * predicted_Q_slope(config)
    sigma = np.full(M, 2 * math.pi * config.Omega.imag)
    cfg = config.copy()
    cfg.meta["split"] = tuple(split)
    return HollowState(cfg, rho, mu, nu, Q, sigma if with_sinks else np.zeros(M), tuple(split), with_sinks)


def solve(
    guess: HollowState, tol: float = 1e-13, maxit: int = 30, check: bool = True
) -> HollowState:
    """Damped Newton for ``(A, E, B) = 0`` at fixed rho."""
    cur = guess.copy()
    names = expand_split(cur.split)
    if len(names) != 2 * cur.M:
        raise ValueError(f"split must have {2 * cur.M} real coordinates")
    F, J, lay, _, _ = _assemble(cur, True)
    err = float(np.abs(F).max())
    scale = max(1.0, float(np.max(cur.config.gamma**2)) / (4 * math.pi**2))
    for it in range(maxit + 1):
        if err <= tol * scale:
            break
        if it == maxit:
            raise SolverFailure(f"hollow-vortex Newton did not converge (residual {err:.3e})")
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise Degeneracy("singular Jacobian in hollow-vortex Newton") from exc
        x0 = _pack(cur, lay)
        step = 1.0
        while True:
            try:
                trial = _unpack(cur, lay, x0 + step * dx)
                Ft = residual_vector(trial)
                ok = np.all(np.isfinite(Ft)) and np.abs(Ft).max() < (1 - 1e-4 * step) * err
            except DomainError:
                ok = False
            if ok:
                break
            step *= 0.5
            if step < 1e-6:
                raise SolverFailure(f"hollow-vortex line search stalled (residual {err:.3e})")
        cur = trial
        F, J, lay, _, _ = _assemble(cur, True)
        err = float(np.abs(F).max())
    cur.residual_norm, cur.iterations = err, it
    tail = max(np.abs(cur.mu[:, -2:]).max(), np.abs(cur.nu[:, -2:]).max())
    head = max(np.abs(cur.mu).max(), np.abs(cur.nu).max(), 1e-300)
    cur.meta["tail_ratio"] = float(tail / head)
    if check:
        cur.meta.update(check_domain(cur))
    return cur


def _solve_adaptive(guess: HollowState, tol: float, N_max: int = 64) -> HollowState:
    st = solve(guess, tol=tol)
    while st.meta["tail_ratio"] > 1e-13 and st.N < N_max:
        st = solve(st.resized(2 * st.N), tol=tol)
    return st


def newton_family(
    config: PointVortexConfig,
    split: Sequence[str],
    rhos: Sequence[float],
    N: int = 12,
    with_sinks: bool = True,
    tol: float = 1e-13,
) -> list[HollowState]:
    """Continuation in rho from the point-vortex root ``config``.

    The first step is predicted from the leading-order slopes; later steps
    extrapolate linearly from the previous two solutions (or scale the
    previous one when only one is available).
    """
    ok, sv = _split_check(config, split)
    if not ok:
        raise Degeneracy(f"point-vortex configuration degenerate for split {tuple(split)} (singular values {sv})")
    out: list[HollowState] = []
    for rho in rhos:
        if not out:
            guess = leading_order_state(config, split, rho, N, with_sinks)
        elif len(out) == 1:
            guess = out[-1].copy()
            s = rho / out[-1].rho
            guess.rho, guess.mu, guess.nu, guess.Q = rho, guess.mu * s, guess.nu * s, guess.Q * s
        else:
            p, q = out[-2], out[-1]
            if q.N != p.N:
                p = p.resized(q.N)
            s = (rho - q.rho) / (q.rho - p.rho)
            xq = _pack(q, _Layout(q.M, q.N, expand_split(split), with_sinks))
            xp = _pack(p, _Layout(p.M, p.N, expand_split(split), with_sinks))
            guess = _unpack(q, _Layout(q.M, q.N, expand_split(split), with_sinks), xq + s * (xq - xp))
            guess.rho = rho
        out.append(_solve_adaptive(guess, tol))
    return out


def _split_check(config: PointVortexConfig, split):
    J = split_jacobian(config, split)
    sv = np.linalg.svd(J, compute_uv=False)
    return bool(sv[-1] > 1e-8 * sv[0]), sv


def linearization_at_root(
    config: PointVortexConfig, split: Sequence[str], N: int = 8, with_sinks: bool = True
) -> dict:
    """``D_u F`` at ``(u, rho) = (0, 0)``: matrix, singular values and invertibility."""
    st = leading_order_state(config, split, 0.0, N, with_sinks)
    J = jacobian(st)
    sv = np.linalg.svd(J, compute_uv=False)
    pv = np.linalg.svd(split_jacobian(config, split), compute_uv=False)
    return {
        "matrix": J,
        "singular_values": sv,
        "smallest": float(sv[-1]),
        "invertible": bool(sv[-1] > 1e-8 * sv[0]),
        "point_vortex_smallest": float(pv[-1]),
    }


# ----------------------------------------------------------------------
# fits


def fit_family(states: Sequence[HollowState], lambda0: PointVortexConfig) -> dict:
    """Leading-order fits along a family (states sorted by decreasing rho).

    Reports relative errors of ``mu_hat_1 / rho`` and ``nu_hat_2 / rho``
    against the predicted slopes, the ratios of ``|lambda - lambda0|`` across
    successive rho, and a linear fit of ``Q_k`` in rho (slope, intercept, R^2)
    beside the candidate closed forms.
    """
    S = strain_coefficients(lambda0)
    g = lambda0.gamma
    mu_pred = 8j * math.pi * S / g
    nu_pred = -S
    names = expand_split(states[0].split)
    lam0 = get_params(lambda0, names)
    rows = []
    for st in states:
        mu_err = np.abs(st.mu[:, 0] / st.rho - mu_pred) / np.abs(mu_pred)
        nu_err = np.abs(st.nu[:, 1] / st.rho - nu_pred) / np.abs(nu_pred)
        dlam = float(np.linalg.norm(get_params(st.config, names) - lam0))
        rows.append({"rho": st.rho, "mu_rel_err": mu_err, "nu_rel_err": nu_err, "dlambda": dlam, "Q": st.Q.copy()})
    ratios = [rows[i]["dlambda"] / rows[i + 1]["dlambda"] for i in range(len(rows) - 1)]
    rho = np.array([r["rho"] for r in rows])
    Qs = np.array([r["Q"] for r in rows])
    A = np.column_stack([rho, np.ones_like(rho)])
    slopes, intercepts, r2 = [], [], []
    for k in range(lambda0.M):
        coef, *_ = np.linalg.lstsq(A, Qs[:, k], rcond=None)
        pred = A @ coef
        ss_res = float(np.sum((Qs[:, k] - pred) ** 2))
        ss_tot = float(np.sum((Qs[:, k] - Qs[:, k].mean()) ** 2))
        slopes.append(coef[0])
        intercepts.append(coef[1])
        r2.append(1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0)
    Om2 = abs(lambda0.Omega) ** 2
    za = np.abs(lambda0.z)
    return {
        "rows": rows,
        "lambda_ratios": ratios,
        "Q_slope": np.array(slopes),
        "Q_intercept": np.array(intercepts),
        "Q_r2": np.array(r2),
        "Q_slope_predicted": predicted_Q_slope(lambda0),
        "Q_slope_candidates": {
            "+|Om|^2|z|": Om2 * za, "-|Om|^2|z|": -Om2 * za,
            "+|Om|^2|z|^2": Om2 * za**2, "-|Om|^2|z|^2": -Om2 * za**2,
        },
    }
