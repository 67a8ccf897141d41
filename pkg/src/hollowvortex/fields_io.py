"""Physical-space fields, audits, lab-frame snapshots and file output.

Solutions are given in conformal form: a map ``f`` from the exterior of the
unit disk (m-fold vortex) or of the disks ``B_rho(zeta_k)`` (configuration)
and a complex potential with derivative ``w_zeta``.  In the self-similar
frame the relative velocity is

    U - iV = W = w_zeta / f_zeta + i Omega conj(f),

and the steady momentum balance integrates to
``P + |U|^2/2 - |Omega|^2 |xi|^2 / 2 = const``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import tempfile
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .single_vortex import MFoldState

__all__ = [
    "PullbackError",
    "ConformalSolution",
    "as_solution",
    "circular_solution",
    "pullback",
    "velocity",
    "velocity_zeta",
    "pressure",
    "circular_velocity",
    "div_curl",
    "kinematic_audit",
    "bernoulli_audit",
    "circulation_audit",
    "area",
    "audit",
    "critical_layers",
    "streamlines",
    "lab_frame",
    "field_grid",
    "atomic_write_text",
    "write_json",
    "write_csv",
    "write_manifest",
    "fmt",
]

PRESSURE_GAUGE_POINT = 10.0


class PullbackError(RuntimeError):
    """Newton for ``f(zeta) = xi`` failed."""


# ----------------------------------------------------------------------
# uniform view of a conformal solution


@dataclass
class ConformalSolution:
    f: Callable
    f_zeta: Callable
    w_zeta: Callable
    Omega: complex
    centers: NDArray[np.complex128]
    radius: float
    gammas: NDArray[np.float64]
    source: Any = None

    @property
    def M(self) -> int:
        return self.centers.size

    @property
    def kappa(self) -> float:
        return math.inf if self.Omega.imag == 0 else -0.5 / self.Omega.imag

    def in_domain(self, zeta: ArrayLike, tol: float = 0.0) -> NDArray[np.bool_]:
        z = np.asarray(zeta, dtype=complex)
        ok = np.ones(z.shape, dtype=bool)
        for c in self.centers:
            ok &= np.abs(z - c) >= abs(self.radius) * (1 - tol)
        return ok

    def boundary_zeta(self, k: int, n: int) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
        tau = np.exp(2j * math.pi * np.arange(n) / n)
        return self.centers[k] + abs(self.radius) * tau, tau

    def W(self, zeta):
        z = np.asarray(zeta, dtype=complex)
        return self.w_zeta(z) / self.f_zeta(z) + 1j * self.Omega * np.conj(self.f(z))


def as_solution(state) -> ConformalSolution:
    if isinstance(state, ConformalSolution):
        return state
    if isinstance(state, MFoldState):
        return ConformalSolution(
            state.f, state.f_zeta, state.w_zeta, state.Omega, np.zeros(1, dtype=complex), 1.0,
            np.array([state.gamma]), state,
        )
    # HollowState (duck-typed to avoid an import cycle)
    if hasattr(state, "bold_gammas") and hasattr(state, "config"):
        return ConformalSolution(
            state.f, state.f_zeta, state.w_zeta, state.config.Omega, state.centers.copy(), state.rho,
            state.config.gamma.copy(), state,
        )
    raise TypeError(f"unsupported solution type {type(state).__name__}")


def circular_solution(gamma: float, Omega: float, kappa: float = math.inf) -> ConformalSolution:
    from .single_vortex import bold_omega

    return as_solution(MFoldState.trivial(2, gamma, bold_omega(Omega, kappa), K=1))


def circular_velocity(xi: ArrayLike, gamma: float, Omega: float, kappa: float = math.inf) -> NDArray[np.complex128]:
    """Explicit circular flow as the complex number ``U + iV``."""
    x = np.asarray(xi, dtype=complex)
    perp = 1j * x
    r2 = np.abs(x) ** 2
    ik = 0.0 if math.isinf(kappa) else 1.0 / kappa
    return gamma / (2 * math.pi) * perp / r2 - 0.5 * ik * x / r2 + 0.5 * ik * x - Omega * perp


# ----------------------------------------------------------------------
# pullback


def pullback(sol, xi: ArrayLike, tol: float = 1e-13, maxit: int = 100) -> tuple[NDArray[np.complex128], NDArray[np.bool_]]:
    """Solve ``f(zeta) = xi`` pointwise by damped Newton.

    Seeds: ``zeta = xi`` and 16 points just outside each disk; the seed with
    the smallest ``|f - xi|`` is used.  Returns ``(zeta, in_fluid)``; points
    whose preimage lies inside a disk are reported with ``in_fluid = False``.
    Raises PullbackError when Newton fails to converge at a point that is
    not inside a core.
    """
    sol = as_solution(sol)
    x = np.atleast_1d(np.asarray(xi, dtype=complex)).ravel()
    seeds = [x.copy()]
    n_s = 16
    for c in sol.centers:
        tau = np.exp(2j * math.pi * np.arange(n_s) / n_s)
        seeds.append(c + 1.05 * abs(sol.radius) * tau)
    cand = np.concatenate([seeds[0][:, None], np.tile(np.concatenate(seeds[1:])[None, :], (x.size, 1))], axis=1) if len(seeds) > 1 else seeds[0][:, None]
    with np.errstate(all="ignore"):
        err = np.abs(sol.f(cand) - x[:, None])
        err[~sol.in_domain(cand)] = np.inf
    z = cand[np.arange(x.size), np.argmin(err, axis=1)]
    with np.errstate(all="ignore"):
        r = sol.f(z) - x
        e = np.abs(r)
        scale = 1.0 + np.abs(x)
        for _ in range(maxit):
            act = e > tol * scale
            if not act.any():
                break
            step = r[act] / sol.f_zeta(z[act])
            t = np.ones(step.size)
            za, ea = z[act], e[act]
            for _ in range(30):
                zn = za - t * step
                en = np.abs(sol.f(zn) - x[act])
                good = en < ea
                if good.all():
                    break
                t = np.where(good, t, 0.5 * t)
            z[act] = zn
            r[act] = sol.f(zn) - x[act]
            e[act] = np.abs(r[act])
    inside = ~sol.in_domain(z, tol=1e-12)
    bad = (e > 1e-9 * scale) & ~inside
    if bad.any():
        raise PullbackError(f"pullback failed at {int(bad.sum())} point(s), worst |f - xi| = {e[bad].max():.3e}")
    return z.reshape(np.shape(xi)), (~inside & (e <= 1e-9 * scale)).reshape(np.shape(xi))


# ----------------------------------------------------------------------
# velocity and pressure


def velocity_zeta(sol, zeta: ArrayLike) -> NDArray[np.complex128]:
    """``U + iV`` at conformal points ``zeta``."""
    return np.conj(as_solution(sol).W(zeta))


def velocity(sol, xi: ArrayLike) -> NDArray[np.complex128]:
    """``U + iV`` at physical points (NaN inside the cores)."""
    sol = as_solution(sol)
    z, fluid = pullback(sol, xi)
    U = np.conj(sol.W(z))
    return np.where(fluid, U, np.nan + 0j)


def _bernoulli_density(sol, zeta) -> NDArray[np.float64]:
    """``|U|^2/2 - |Omega|^2 |xi|^2 / 2`` at conformal points."""
    W = sol.W(zeta)
    return 0.5 * np.abs(W) ** 2 - 0.5 * abs(sol.Omega) ** 2 * np.abs(sol.f(zeta)) ** 2


def pressure_constant(sol, gauge_point: complex = PRESSURE_GAUGE_POINT) -> float:
    """Constant ``C`` in ``P = C - |U|^2/2 + |Omega|^2 |xi|^2/2`` with ``P(gauge_point) = 0``."""
    sol = as_solution(sol)
    z, fluid = pullback(sol, np.array([gauge_point]))
    if not fluid[0]:
        raise PullbackError("pressure gauge point is not in the fluid")
    return float(_bernoulli_density(sol, z)[0])


def pressure(sol, xi: ArrayLike, gauge_point: complex = PRESSURE_GAUGE_POINT) -> NDArray[np.float64]:
    sol = as_solution(sol)
    C = pressure_constant(sol, gauge_point)
    z, fluid = pullback(sol, xi)
    return np.where(fluid, C - _bernoulli_density(sol, z), np.nan)


def boundary_pressures(sol, gauge_point: complex = PRESSURE_GAUGE_POINT, n: int = 256) -> NDArray[np.float64]:
    """Core pressures ``P_k`` (mean over boundary samples)."""
    sol = as_solution(sol)
    C = pressure_constant(sol, gauge_point)
    out = []
    for k in range(sol.M):
        z, _ = sol.boundary_zeta(k, n)
        out.append(float(np.mean(C - _bernoulli_density(sol, z))))
    return np.array(out)


def div_curl(sol, xi: ArrayLike, h: float = 1e-4) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Centred-difference divergence and curl ``dV/dx - dU/dy`` of U at ``xi``."""
    x = np.asarray(xi, dtype=complex)
    Up, Um = velocity(sol, x + h), velocity(sol, x - h)
    Vp, Vm = velocity(sol, x + 1j * h), velocity(sol, x - 1j * h)
    dUdx = (Up.real - Um.real) / (2 * h)
    dVdx = (Up.imag - Um.imag) / (2 * h)
    dUdy = (Vp.real - Vm.real) / (2 * h)
    dVdy = (Vp.imag - Vm.imag) / (2 * h)
    return dUdx + dVdy, dVdx - dUdy


# ----------------------------------------------------------------------
# audits


def kinematic_audit(sol, n: int = 512) -> NDArray[np.float64]:
    """Sup over each boundary of ``|n . U|``."""
    sol = as_solution(sol)
    out = []
    for k in range(sol.M):
        z, tau = sol.boundary_zeta(k, n)
        fz = sol.f_zeta(z)
        nU = np.real(tau * fz * sol.W(z)) / np.abs(fz)
        out.append(float(np.abs(nU).max()))
    return np.array(out)


def bernoulli_audit(sol, n: int = 256, scaled: bool = False) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Per boundary: mean and standard deviation of ``|U|^2/2 - |Omega|^2|xi|^2/2``.

    With ``scaled=True`` the deviation is divided by ``max(1, mean |U|^2/2)``;
    small cores spin at speed ``~ gamma / (2 pi rho)`` and the absolute
    deviation then only reflects rounding of that large energy.
    """
    sol = as_solution(sol)
    means, stds = [], []
    for k in range(sol.M):
        z, _ = sol.boundary_zeta(k, n)
        b = _bernoulli_density(sol, z)
        means.append(float(b.mean()))
        sd = float(b.std())
        if scaled:
            sd /= max(1.0, float(np.mean(0.5 * np.abs(sol.W(z)) ** 2)))
        stds.append(sd)
    return np.array(means), np.array(stds)


def area(sol, k: int = 0, n: int = 512) -> float:
    """Core area ``Im(1/2 oint conj(f) df)`` by the trapezoid rule (spectral for smooth f)."""
    sol = as_solution(sol)
    z, tau = sol.boundary_zeta(k, n)
    dxi = sol.f_zeta(z) * 1j * abs(sol.radius) * tau * (2 * math.pi / n)
    return float(0.5 * np.imag(np.sum(np.conj(sol.f(z)) * dxi)))


def shoelace(points: ArrayLike) -> float:
    p = np.asarray(points, dtype=complex)
    q = np.roll(p, -1)
    return float(0.5 * np.sum(p.real * q.imag - q.real * p.imag))


def circulation_audit(sol, n: int = 512) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Per boundary: computed ``oint t . U ds`` and the expected ``gamma_k - 2 Omega |V_k|``."""
    sol = as_solution(sol)
    got, want = [], []
    for k in range(sol.M):
        z, tau = sol.boundary_zeta(k, n)
        dxi = sol.f_zeta(z) * 1j * abs(sol.radius) * tau * (2 * math.pi / n)
        got.append(float(np.real(np.sum(sol.W(z) * dxi))))
        want.append(float(sol.gammas[k] - 2 * sol.Omega.real * area(sol, k, n)))
    return np.array(got), np.array(want)


def audit(sol, n: int = 512, stencil_points: int = 8, h: float = 1e-4, seed: int = 0) -> dict:
    """All boundary-condition and field-identity checks for one solution."""
    sol = as_solution(sol)
    kin = kinematic_audit(sol, n)
    bmean, braw = bernoulli_audit(sol, min(n, 256))
    _, bstd = bernoulli_audit(sol, min(n, 256), scaled=True)
    cgot, cwant = circulation_audit(sol, n)
    # interior stencil points on a ring well inside the fluid
    rng = np.random.default_rng(seed)
    R = float(np.max(np.abs(sol.centers))) + 3 * abs(sol.radius) + 1.0
    xi = R * (1.0 + 0.5 * rng.random(stencil_points)) * np.exp(2j * math.pi * rng.random(stencil_points))
    div, curl = div_curl(sol, xi, h)
    ik = 0.0 if math.isinf(sol.kappa) else 1.0 / sol.kappa
    z, _ = pullback(sol, xi)
    roundtrip = float(np.abs(sol.f(z) - xi).max())
    return {
        "kinematic_sup": kin,
        "bernoulli_mean": bmean,
        "bernoulli_std": bstd,
        "bernoulli_std_raw": braw,
        "circulation": cgot,
        "circulation_expected": cwant,
        "circulation_error": np.abs(cgot - cwant),
        "divergence_error": float(np.abs(div - ik).max()),
        "curl_error": float(np.abs(curl + 2 * sol.Omega.real).max()),
        "pullback_roundtrip": roundtrip,
        "areas": np.array([area(sol, k, n) for k in range(sol.M)]),
    }


# ----------------------------------------------------------------------
# critical layers


def angular_velocity(sol, zeta: ArrayLike) -> NDArray[np.float64]:
    """``Omega |f| + Im(f w_zeta / (|f| f_zeta))``; minus the angular component of U."""
    sol = as_solution(sol)
    z = np.asarray(zeta, dtype=complex)
    f = sol.f(z)
    af = np.abs(f)
    return sol.Omega.real * af + np.imag(f * sol.w_zeta(z) / (af * sol.f_zeta(z)))


def critical_layers(sol, r_max: float = 10.0, n_angles: int = 64, n_radial: int = 400) -> dict:
    """Zero set of the angular velocity along conformal rays ``zeta = r e^{i theta}``.

    Returns per-angle lists of physical radii ``|xi|`` and, when every ray
    has exactly one crossing, the mean of ``|xi|^2`` over angles.
    """
    sol = as_solution(sol)
    if sol.M != 1:
        raise ValueError("critical layers are defined for a single rotating vortex")
    r0 = abs(sol.radius)
    rs = np.linspace(r0, r_max, n_radial)
    radii: list[list[float]] = []
    for th in 2 * math.pi * np.arange(n_angles) / n_angles:
        e = np.exp(1j * th)
        g = angular_velocity(sol, sol.centers[0] + rs * e)
        found = []
        for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
            r = brentq(lambda s: float(angular_velocity(sol, sol.centers[0] + s * e)), rs[i], rs[i + 1], xtol=1e-15, rtol=1e-15)
            found.append(float(abs(sol.f(sol.centers[0] + r * e))))
        for i in np.nonzero(g == 0)[0]:
            found.append(float(abs(sol.f(sol.centers[0] + rs[i] * e))))
        radii.append(sorted(found))
    single = all(len(r) == 1 for r in radii)
    return {
        "radii": radii,
        "empty": all(len(r) == 0 for r in radii),
        "mean_radius_squared": float(np.mean([r[0] ** 2 for r in radii])) if single else None,
    }


# ----------------------------------------------------------------------
# streamlines


@dataclass
class Streamline:
    points: NDArray[np.complex128]
    T: NDArray[np.float64]
    status: str


def streamlines(sol, seeds: Sequence[complex], length: float, rtol: float = 1e-11, atol: float = 1e-12, max_points: int = 2000) -> list[Streamline]:
    """Integrate ``d xi/dT = U`` via ``d zeta/dT = conj(W) / f_zeta`` (DOP853).

    Integration stops at ``T = length``, at a boundary, or when the step size
    collapses (stagnation); the status string records which.
    """
    sol = as_solution(sol)
    z0, fluid = pullback(sol, np.asarray(seeds, dtype=complex))
    out = []
    r0 = abs(sol.radius)

    def rhs(_T, y):
        z = complex(y[0], y[1])
        v = np.conj(sol.W(z)) / sol.f_zeta(z)
        return [v.real, v.imag]

    def hit(_T, y):
        z = complex(y[0], y[1])
        return float(np.min(np.abs(z - sol.centers)) - r0 * (1 + 1e-9))

    hit.terminal = True
    for z, ok in zip(np.atleast_1d(z0), np.atleast_1d(fluid)):
        if not ok:
            out.append(Streamline(np.array([]), np.array([]), "seed not in fluid"))
            continue
        T_eval = np.linspace(0.0, length, max_points)
        res = solve_ivp(rhs, (0.0, length), [z.real, z.imag], method="DOP853", t_eval=T_eval, events=hit, rtol=rtol, atol=atol)
        pts = sol.f(res.y[0] + 1j * res.y[1])
        if res.status == 1:
            status = "boundary"
        elif res.status == 0:
            status = "ok"
        else:
            status = "step collapse"
        out.append(Streamline(pts, res.t, status))
    return out


# ----------------------------------------------------------------------
# lab frame


@dataclass
class LabFrameSnapshot:
    t: float
    T: float
    boundaries: list[NDArray[np.complex128]]
    pressures: NDArray[np.float64]
    areas: NDArray[np.float64]
    area_ratio: NDArray[np.float64]
    points: NDArray[np.complex128] = field(default_factory=lambda: np.zeros(0, dtype=complex))
    velocities: NDArray[np.complex128] = field(default_factory=lambda: np.zeros(0, dtype=complex))

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "T": self.T,
            "boundaries": [[[p.real, p.imag] for p in b] for b in self.boundaries],
            "pressures": list(map(float, self.pressures)),
            "areas": list(map(float, self.areas)),
            "area_ratio": list(map(float, self.area_ratio)),
        }


def frame_time(t: float, kappa: float) -> float:
    if math.isinf(kappa):
        return float(t)
    if t >= kappa:
        raise ValueError("t must be below the collapse time kappa")
    return float(-kappa * math.log1p(-t / kappa))


def to_lab(xi: ArrayLike, T: float, Omega: float, kappa: float) -> NDArray[np.complex128]:
    s = 1.0 if math.isinf(kappa) else math.exp(-T / (2 * kappa))
    return s * np.exp(1j * Omega * T) * np.asarray(xi, dtype=complex)


def lab_velocity(U: ArrayLike, x: ArrayLike, T: float, Omega: float, kappa: float) -> NDArray[np.complex128]:
    """Lab velocity ``dx/dt`` from the frame velocity ``U`` at the image point ``x``.

    Since ``dt/dT = exp(-T/kappa)``, ``u = e^{T/2kappa} R U + e^{T/kappa} (Omega x^perp - x/2kappa)``.
    """
    ik = 0.0 if math.isinf(kappa) else 1.0 / kappa
    g = 1.0 if math.isinf(kappa) else math.exp(T / (2 * kappa))
    xa = np.asarray(x, dtype=complex)
    return g * np.exp(1j * Omega * T) * np.asarray(U, dtype=complex) + g * g * (Omega * 1j * xa - 0.5 * ik * xa)


def lab_frame(sol, t: float, n: int = 512, points: ArrayLike | None = None, gauge_point: complex = PRESSURE_GAUGE_POINT) -> LabFrameSnapshot:
    sol = as_solution(sol)
    kap, Om = sol.kappa, sol.Omega.real
    T = frame_time(t, kap)
    # core pressure is inversely proportional to the area, which shrinks like exp(-T/kappa)
    growth = 1.0 if math.isinf(kap) else math.exp(T / kap)
    bds, areas, a0 = [], [], []
    for k in range(sol.M):
        z, _ = sol.boundary_zeta(k, n)
        xi = sol.f(z)
        x = to_lab(xi, T, Om, kap)
        bds.append(x)
        areas.append(shoelace(x))
        a0.append(shoelace(xi))
    P = boundary_pressures(sol, gauge_point)
    snap = LabFrameSnapshot(float(t), T, bds, growth * P, np.array(areas), np.array(areas) / np.array(a0))
    if points is not None:
        xi = np.asarray(points, dtype=complex)
        U = velocity(sol, xi)
        x = to_lab(xi, T, Om, kap)
        snap.points, snap.velocities = x, lab_velocity(U, x, T, Om, kap)
    return snap


# ----------------------------------------------------------------------
# grids


def field_grid(sol, n: int = 200, half_width: float | None = None, h: float | None = None) -> dict:
    """Velocity, pressure, divergence and curl on an ``n x n`` grid."""
    sol = as_solution(sol)
    if half_width is None:
        half_width = 2.0 * (float(np.max(np.abs(sol.centers))) + 2 * abs(sol.radius) + 1.0)
    ax = np.linspace(-half_width, half_width, n)
    X, Y = np.meshgrid(ax, ax)
    xi = (X + 1j * Y).ravel()
    z, fluid = pullback(sol, xi)
    W = sol.W(z)
    U = np.where(fluid, np.conj(W), np.nan)
    C = pressure_constant(sol)
    P = np.where(fluid, C - _bernoulli_density(sol, z), np.nan)
    hh = h if h is not None else 1e-4 * half_width
    div = np.full(xi.size, np.nan)
    curl = np.full(xi.size, np.nan)
    margin = 4 * hh
    near = np.zeros(xi.size, dtype=bool)
    for c in sol.centers:
        near |= np.abs(z - c) < abs(sol.radius) + margin
    ok = fluid & ~near
    if ok.any():
        d, c = div_curl(sol, xi[ok], hh)
        div[ok], curl[ok] = d, c
    return {"x": xi.real, "y": xi.imag, "u": U.real, "v": U.imag, "P": P, "in_fluid": fluid, "div": div, "curl": curl}


# ----------------------------------------------------------------------
# output


def fmt(x) -> str:
    """Round-trip formatting (17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.17g" % float(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, obj) -> None:
    atomic_write_text(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path: str, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def write_manifest(path: str, command: str, config: dict, outputs: Sequence[str], extra: dict | None = None) -> None:
    import scipy

    from . import __version__

    man = {
        "command": command,
        "config": config,
        "outputs": list(outputs),
        "versions": {
            "artifact": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    if extra:
        man.update(extra)
    write_json(path, man)
