"""Self-similarly collapsing point-vortex configurations.

A configuration is ``(z, gamma, Omega)`` with complex positions ``z_k``,
real circulations ``gamma_k`` and complex rate ``Omega`` (``Im Omega =
-1/(2 kappa)``).  It collapses self-similarly to the origin when

    V_k = sum_{j != k} gamma_j / (2 pi i (z_k - z_j)) + i Omega conj(z_k) = 0.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import solve_ivp

from .single_vortex import Degeneracy, SolverFailure

__all__ = [
    "PointVortexConfig",
    "velocity_field",
    "residual",
    "residual_about_center",
    "center_of_vorticity",
    "linear_impulse",
    "parameter_jacobian",
    "split_jacobian",
    "nondegeneracy",
    "is_nondegenerate",
    "split_is_invertible",
    "expand_split",
    "solve",
    "trio",
    "quartet",
    "scale_factor",
    "self_similar_positions",
    "integrate_kirchhoff",
]


@dataclass
class PointVortexConfig:
    z: NDArray[np.complex128]
    gamma: NDArray[np.float64]
    Omega: complex
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.z = np.atleast_1d(np.asarray(self.z, dtype=np.complex128)).copy()
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float)).copy()
        self.Omega = complex(self.Omega)
        if self.z.shape != self.gamma.shape:
            raise ValueError("z and gamma must have equal length")
        if self.M > 1:
            d = np.abs(self.z[:, None] - self.z[None, :]) + np.eye(self.M)
            if d.min() == 0:
                raise ValueError("coincident vortices")

    @property
    def M(self) -> int:
        return self.z.size

    @property
    def kappa(self) -> float:
        return math.inf if self.Omega.imag == 0 else -0.5 / self.Omega.imag

    def copy(self) -> "PointVortexConfig":
        return PointVortexConfig(self.z.copy(), self.gamma.copy(), self.Omega, dict(self.meta))

    def to_json(self) -> dict:
        d = {
            "kind": "point_vortices",
            "centers": [[float(v.real), float(v.imag)] for v in self.z],
            "gammas": [float(g) for g in self.gamma],
            "Omega": [self.Omega.real, self.Omega.imag],
            "kappa": self.kappa if math.isfinite(self.kappa) else None,
        }
        if "split" in self.meta:
            d["split"] = list(self.meta["split"])
        return d

    @classmethod
    def from_json(cls, d: dict) -> "PointVortexConfig":
        z = np.array([complex(a, b) for a, b in d["centers"]])
        c = cls(z, np.array(d["gammas"], dtype=float), complex(*d["Omega"]))
        if d.get("split"):
            c.meta["split"] = tuple(d["split"])
        return c


# ----------------------------------------------------------------------


def velocity_field(z: ArrayLike, gamma: ArrayLike) -> NDArray[np.complex128]:
    """``sum_{j != k} gamma_j / (2 pi i (z_k - z_j))`` (the conjugate velocity)."""
    z = np.asarray(z, dtype=np.complex128)
    g = np.asarray(gamma, dtype=float)
    dz = z[:, None] - z[None, :]
    np.fill_diagonal(dz, 1.0)
    K = g[None, :] / (2j * math.pi * dz)
    np.fill_diagonal(K, 0.0)
    return K.sum(axis=1)


def residual(c: PointVortexConfig) -> NDArray[np.complex128]:
    """``V_k`` for positions already centred at the collapse point."""
    return velocity_field(c.z, c.gamma) + 1j * c.Omega * np.conj(c.z)


def center_of_vorticity(c: PointVortexConfig) -> complex:
    G = c.gamma.sum()
    if abs(G) < 1e-14 * np.abs(c.gamma).sum():
        raise Degeneracy("total circulation vanishes; centre of vorticity undefined")
    return complex((c.gamma * c.z).sum() / G)


def residual_about_center(c: PointVortexConfig) -> NDArray[np.complex128]:
    """Residual with positions measured from the centre of vorticity."""
    zc = center_of_vorticity(c)
    return velocity_field(c.z, c.gamma) + 1j * c.Omega * np.conj(c.z - zc)


def linear_impulse(z: ArrayLike, gamma: ArrayLike) -> NDArray[np.complex128] | complex:
    """``sum_k gamma_k z_k``; ``z`` may be a trajectory with one row per time."""
    z = np.asarray(z)
    out = z @ np.asarray(gamma, dtype=float)
    return complex(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------
# parameter coordinates and Jacobians

_TOKEN = re.compile(r"^(z|gamma)(\d+)(\.re|\.im)?$|^(Omega)(\.re|\.im)?$|^(kappa)$")


def expand_split(split: Sequence[str]) -> list[str]:
    """Expand names like ``z1`` into ``z1.re, z1.im`` (1-based indices).

    Accepted tokens: ``zK``, ``zK.re``, ``zK.im``, ``gammaK``, ``Omega``
    (real part of the complex rate), ``Omega.im``, ``kappa``.
    """
    out: list[str] = []
    for tok in split:
        mt = _TOKEN.match(tok)
        if not mt:
            raise ValueError(f"unknown parameter {tok!r}")
        if mt.group(1) == "z" and mt.group(3) is None:
            out += [f"z{mt.group(2)}.re", f"z{mt.group(2)}.im"]
        elif mt.group(4) == "Omega" and mt.group(5) is None:
            out.append("Omega.re")
        else:
            out.append(tok)
    return out


def parameter_jacobian(c: PointVortexConfig, names: Sequence[str]) -> NDArray[np.float64]:
    """Real Jacobian of ``(Re V_1, Im V_1, ..., Re V_M, Im V_M)`` w.r.t. named parameters."""
    z, g, Om, M = c.z, c.gamma, c.Omega, c.M
    dz = z[:, None] - z[None, :]
    np.fill_diagonal(dz, 1.0)
    cols = []
    for name in expand_split(names):
        col = np.zeros(M, dtype=complex)
        if name.startswith("z"):
            k = int(name[1:].split(".")[0]) - 1
            im = name.endswith(".im")
            # holomorphic dependence through 1/(z_i - z_k), anti-holomorphic through conj(z_k)
            for i in range(M):
                if i == k:
                    A = -np.sum(np.delete(g / (2j * math.pi * dz[k] ** 2), k))
                    col[i] = (1j * A + Om) if im else (A + 1j * Om)
                else:
                    B = g[k] / (2j * math.pi * dz[i, k] ** 2)
                    col[i] = 1j * B if im else B
        elif name.startswith("gamma"):
            k = int(name[5:]) - 1
            col = 1.0 / (2j * math.pi * dz[:, k])
            col[k] = 0.0
        elif name == "Omega.re":
            col = 1j * np.conj(z)
        elif name == "Omega.im":
            col = -np.conj(z)
        elif name == "kappa":
            kap = c.kappa
            if not math.isfinite(kap):
                raise Degeneracy("kappa coordinate undefined for pure rotation")
            col = -np.conj(z) / (2 * kap * kap)
        cols.append(np.column_stack([col.real, col.imag]).ravel())
    return np.array(cols).T


def split_jacobian(c: PointVortexConfig, split: Sequence[str]) -> NDArray[np.float64]:
    J = parameter_jacobian(c, split)
    if J.shape[0] != J.shape[1]:
        raise ValueError(f"split has {J.shape[1]} real coordinates, need {J.shape[0]}")
    return J


def full_names(M: int) -> list[str]:
    """All 3M+2 real coordinates of the parameter space."""
    return [f"z{k+1}" for k in range(M)] + [f"gamma{k+1}" for k in range(M)] + ["Omega", "Omega.im"]


RANK_RTOL = 1e-8


def is_nondegenerate(c: PointVortexConfig, rtol: float = RANK_RTOL) -> tuple[bool, NDArray[np.float64]]:
    """Full-rank test of the 2M x (3M+2) Jacobian; returns (flag, singular values)."""
    sv = np.linalg.svd(parameter_jacobian(c, full_names(c.M)), compute_uv=False)
    return bool(sv[2 * c.M - 1] > rtol * sv[0]), sv


def split_is_invertible(c: PointVortexConfig, split: Sequence[str], rtol: float = RANK_RTOL) -> tuple[bool, NDArray[np.float64]]:
    sv = np.linalg.svd(split_jacobian(c, split), compute_uv=False)
    return bool(sv[-1] > rtol * sv[0]), sv


def nondegeneracy(c: PointVortexConfig, split: Sequence[str] | None = None) -> float:
    """``det D_lambda V`` for a 2M-dimensional split, or the smallest singular
    value of the full Jacobian when ``split`` is None."""
    if split is None:
        return float(np.linalg.svd(parameter_jacobian(c, full_names(c.M)), compute_uv=False)[2 * c.M - 1])
    return float(np.linalg.det(split_jacobian(c, split)))


def _set(c: PointVortexConfig, name: str, value: float) -> None:
    if name.startswith("z"):
        k = int(name[1:].split(".")[0]) - 1
        if name.endswith(".re"):
            c.z[k] = complex(value, c.z[k].imag)
        else:
            c.z[k] = complex(c.z[k].real, value)
    elif name.startswith("gamma"):
        c.gamma[int(name[5:]) - 1] = value
    elif name == "Omega.re":
        c.Omega = complex(value, c.Omega.imag)
    elif name == "Omega.im":
        c.Omega = complex(c.Omega.real, value)
    elif name == "kappa":
        c.Omega = complex(c.Omega.real, -0.5 / value)


def _get(c: PointVortexConfig, name: str) -> float:
    if name.startswith("z"):
        k = int(name[1:].split(".")[0]) - 1
        return c.z[k].real if name.endswith(".re") else c.z[k].imag
    if name.startswith("gamma"):
        return float(c.gamma[int(name[5:]) - 1])
    if name == "Omega.re":
        return c.Omega.real
    if name == "Omega.im":
        return c.Omega.imag
    return c.kappa


def get_params(c: PointVortexConfig, split: Sequence[str]) -> NDArray[np.float64]:
    return np.array([_get(c, n) for n in expand_split(split)])


def set_params(c: PointVortexConfig, split: Sequence[str], values: ArrayLike) -> PointVortexConfig:
    out = c.copy()
    for n, v in zip(expand_split(split), np.asarray(values, dtype=float)):
        _set(out, n, float(v))
    return out


def solve(
    c: PointVortexConfig, split: Sequence[str], tol: float = 1e-13, maxit: int = 50
) -> PointVortexConfig:
    """Damped Newton on the ``split`` coordinates with the others frozen."""
    names = expand_split(split)
    if len(names) != 2 * c.M:
        raise ValueError(f"split must have {2 * c.M} real coordinates")

    def vec(cfg):
        V = residual(cfg)
        return np.column_stack([V.real, V.imag]).ravel()

    cur = c.copy()
    F = vec(cur)
    err = float(np.abs(F).max())
    for it in range(maxit + 1):
        if err <= tol:
            cur.meta.update(iterations=it, residual=err, split=tuple(split))
            return cur
        J = split_jacobian(cur, names)
        if not np.all(np.isfinite(J)):
            raise SolverFailure("non-finite Jacobian")
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[-1] <= RANK_RTOL * sv[0]:
            raise Degeneracy("split Jacobian is singular")
        dx = np.linalg.solve(J, -F)
        x0 = get_params(cur, names)
        step = 1.0
        while step > 1e-4:
            try:
                trial = set_params(cur, names, x0 + step * dx)
                Ft = vec(trial)
            except ValueError:
                Ft = None
            if Ft is not None and np.all(np.isfinite(Ft)) and np.abs(Ft).max() < (1 - 1e-4 * step) * err:
                break
            step *= 0.5
        else:
            raise SolverFailure(f"line search stalled (residual {err:.3e})")
        cur, F = trial, Ft
        err = float(np.abs(F).max())
    raise SolverFailure(f"point-vortex Newton failed (residual {err:.3e})")


# ----------------------------------------------------------------------
# presets


def trio(gamma1: float = 1.0, gamma2: float = 2.0, d: float = 3.0, theta: float = math.pi / 2, centered: bool = True) -> PointVortexConfig:
    """Collapsing triple parametrised by two circulations, a separation and an angle.

    The sign of kappa is fixed by requiring the residual to vanish; with
    ``Im Omega = -1/(2 kappa)`` collapse corresponds to ``kappa > 0``.
    """
    s = gamma1 + gamma2
    if s == 0:
        raise Degeneracy("gamma1 + gamma2 = 0")
    z1 = -gamma2 * d / s
    z2 = gamma1 * d / s
    g3 = -gamma1 * gamma2 / s
    ratio = (gamma1 + gamma2 + g3) / s
    if ratio < 0:
        raise Degeneracy("third vortex radius is imaginary")
    z3 = d * np.exp(1j * theta) * math.sqrt(ratio)
    z = np.array([z1, z2, z3], dtype=complex)
    sides = np.abs([z1 - z2, z2 - z3, z3 - z1])
    if np.ptp(sides) <= 1e-12 * sides.max():
        raise Degeneracy("equilateral triple cannot collapse")
    g = np.array([gamma1, gamma2, g3])
    r13, r23 = abs(z1 - z3) ** 2, abs(z2 - z3) ** 2
    Om = (1 / (4 * math.pi)) * ((gamma2 + g3) / r23 + (g3 + gamma1) / r13 + (gamma1 + gamma2) / d**2)
    pk2 = -4 * math.pi**2 * Om**2 + gamma1**2 / (r13 * d * d) + gamma2**2 / (r23 * d * d) + g3**2 / (r13 * r23)
    if pk2 <= 1e-14 * (4 * math.pi**2 * Om**2 + 1e-300):
        raise Degeneracy("forbidden angle: no collapsing solution (pi^2/kappa^2 <= 0)")
    inv_k = math.sqrt(pk2) / math.pi
    zc = (g * z).sum() / g.sum()
    best = None
    for sgn in (1, -1):
        cand = PointVortexConfig(z - zc, g, complex(Om, -0.5 * sgn * inv_k))
        r = float(np.abs(residual(cand)).max())
        if best is None or r < best[0]:
            best = (r, cand)
    out = best[1]
    if not centered:
        out = PointVortexConfig(z, g, out.Omega)
    out.meta.update(preset="trio", zc=complex(zc), gamma1=gamma1, gamma2=gamma2, d=d, theta=theta)
    return out


TRIO_SPLITS = (("z1", "z2", "gamma1", "kappa"), ("z3", "gamma1", "gamma2", "Omega", "Omega.im"))


def quartet() -> PointVortexConfig:
    """Explicit collapsing parallelogram quartet (centred at the origin)."""
    r3 = math.sqrt(3)
    z = np.array([r3 / 2 - 0.5j, 1 + r3 / 2 - 0.5j, -r3 / 2 - 1 + 0.5j, -r3 / 2 + 0.5j])
    a, b = (2 * r3 + 5) * math.pi, (r3 - 4) * math.pi
    g = np.array([a, b, b, a])
    c = PointVortexConfig(z, g, complex(2 * r3 - 0.75, -0.5))
    c.meta.update(preset="quartet")
    return c


QUARTET_SPLIT = ("z1", "z2", "z3", "gamma1", "Omega")


# ----------------------------------------------------------------------
# time evolution


def scale_factor(t: ArrayLike, Omega: complex) -> NDArray[np.complex128]:
    """``L(t) = sqrt(1 - t/kappa) exp(i Omega_r T)`` with ``T = -kappa log(1 - t/kappa)``.

    Satisfies ``L d/dt conj(L) = -i Omega``.
    """
    t = np.asarray(t, dtype=float)
    Om = complex(Omega)
    if Om.imag == 0:
        return np.exp(1j * Om.real * t)
    kap = -0.5 / Om.imag
    s = 1 - t / kap
    if np.any(s <= 0):
        raise ValueError("time at or beyond collapse")
    T = -kap * np.log(s)
    return np.sqrt(s) * np.exp(1j * Om.real * T)


def self_similar_positions(c: PointVortexConfig, t: ArrayLike) -> NDArray[np.complex128]:
    """Positions at times ``t`` (rows) under the exact self-similar law."""
    L = scale_factor(t, c.Omega)
    return np.multiply.outer(L, c.z)


def _rhs(_t, y, g):
    z = y[: g.size] + 1j * y[g.size :]
    v = np.conj(velocity_field(z, g))
    return np.concatenate([v.real, v.imag])


def integrate_kirchhoff(
    z0: ArrayLike, gamma: ArrayLike, t: ArrayLike, rtol: float = 1e-13, atol: float = 1e-15
) -> NDArray[np.complex128]:
    """Integrate ``d conj(z_k)/dt = sum_j gamma_j / (2 pi i (z_k - z_j))`` (DOP853)."""
    z0 = np.asarray(z0, dtype=complex)
    g = np.asarray(gamma, dtype=float)
    t = np.asarray(t, dtype=float)
    sol = solve_ivp(
        _rhs, (0.0, float(t.max())), np.concatenate([z0.real, z0.imag]), method="DOP853",
        t_eval=t, rtol=rtol, atol=atol, args=(g,),
    )
    if not sol.success:
        raise SolverFailure(sol.message)
    y = sol.y.T
    return y[:, : g.size] + 1j * y[:, g.size :]
