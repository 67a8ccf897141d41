"""Command-line front end: ``hollow-vortex <command> [options]``.

Exit codes: 0 success, 2 usage or validation error, 3 solver failure,
4 degenerate configuration.  Options may also come from a JSON file given
with ``--config``; flags override file values, which override defaults.
Grids use ``start:stop:step`` (endpoints inclusive), ``a..b`` for integer
ranges, or comma-separated lists.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Callable, Sequence

import numpy as np

from . import desingularization as ds
from . import fields_io as fio
from . import point_vortex as pv
from . import single_vortex as sv
from .layer_potential import DomainError

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_DEGENERATE = 0, 2, 3, 4


class UsageError(ValueError):
    pass


# ----------------------------------------------------------------------
# parsing helpers


def parse_grid(text, scale: Callable[[str], float] | None = None) -> list[float]:
    """Parse ``start:stop:step``, ``a..b`` or ``x,y,z``.

    ``scale`` maps a token to a float (used for values like ``0.9k``).
    """
    conv = scale or float
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [conv(str(t)) for t in text]
    s = str(text).strip()
    if not s:
        raise UsageError("empty grid")
    if ".." in s:
        a, b = s.split("..")
        lo, hi = int(a), int(b)
        if hi < lo:
            raise UsageError(f"empty range {s!r}")
        return [float(v) for v in range(lo, hi + 1)]
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid {s!r} must be start:stop:step")
        a, b, h = (conv(p) for p in parts)
        if h <= 0 or b < a:
            raise UsageError(f"empty grid {s!r}")
        n = int(math.floor((b - a) / h + 1e-12 * max(1.0, abs(b - a) / h))) + 1
        vals = [a + i * h for i in range(n)]
        if abs(vals[-1] - b) <= 1e-12 * max(1.0, abs(b)):
            vals[-1] = b
        return vals
    return [conv(p) for p in s.split(",") if p.strip()]


def parse_sign(s) -> int:
    if str(s) in ("+", "+1", "1", "plus"):
        return 1
    if str(s) in ("-", "-1", "minus"):
        return -1
    raise UsageError(f"sign must be + or -, got {s!r}")


def parse_float(s) -> float:
    t = str(s).strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    return float(t)


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    cfg = dict(defaults)
    if args.config:
        if not os.path.exists(args.config):
            raise UsageError(f"config file {args.config!r} not found")
        with open(args.config) as fh:
            data = json.load(fh)
        if args.command in data and isinstance(data[args.command], dict):
            data = data[args.command]
        cfg.update({k.replace("-", "_"): v for k, v in data.items()})
    for k, v in vars(args).items():
        if v is not None and k not in ("command", "config", "func"):
            cfg[k] = v
    return cfg


def _out(cfg: dict, name: str) -> str:
    return os.path.join(cfg["out"], name)


def _finish(cfg: dict, command: str, outputs: list[str], extra: dict | None = None) -> None:
    man = _out(cfg, f"manifest_{command}.json")
    fio.write_manifest(man, command, {k: v for k, v in cfg.items()}, [os.path.basename(p) for p in outputs], extra)


def _load_json(path: str) -> dict:
    if not path or not os.path.exists(path):
        raise UsageError(f"file {path!r} not found")
    with open(path) as fh:
        return json.load(fh)


def load_state(path: str, index: int = -1):
    d = _load_json(path)
    if "states" in d:
        d = d["states"][index]
    kind = d.get("kind")
    if kind == "mfold":
        return sv.MFoldState.from_json(d)
    if kind == "hollow_configuration":
        return ds.HollowState.from_json(d)
    if kind == "point_vortices":
        return pv.PointVortexConfig.from_json(d)
    raise UsageError(f"unrecognised state kind {kind!r} in {path}")


def _point_config(cfg: dict) -> pv.PointVortexConfig:
    if cfg.get("input"):
        c = load_state(cfg["input"])
        if not isinstance(c, pv.PointVortexConfig):
            raise UsageError("input must be a point-vortex configuration")
        return c
    preset = cfg.get("preset", "trio")
    if preset == "trio":
        return pv.trio(cfg.get("gamma1", 1.0), cfg.get("gamma2", 2.0), cfg.get("d", 3.0), cfg.get("theta", math.pi / 2))
    if preset == "quartet":
        return pv.quartet()
    raise UsageError(f"unknown preset {preset!r}")


def _split(cfg: dict, c: pv.PointVortexConfig) -> tuple[str, ...]:
    s = cfg.get("split")
    if s:
        return tuple(p.strip() for p in (s.split(",") if isinstance(s, str) else s) if p.strip())
    if "split" in c.meta:
        return tuple(c.meta["split"])
    if cfg.get("preset", "trio") == "quartet" and not cfg.get("input"):
        return pv.QUARTET_SPLIT
    if c.M == 3:
        return pv.TRIO_SPLITS[1]
    raise UsageError("a split is required for custom configurations")


# ----------------------------------------------------------------------
# commands


def cmd_dispersion(cfg: dict) -> int:
    ms = [int(v) for v in parse_grid(cfg["m"])]
    ns = [int(v) for v in parse_grid(cfg["n"])]
    gamma, kappa = float(cfg["gamma"]), parse_float(cfg["kappa"])
    if not ms or not ns:
        raise UsageError("empty m or n range")
    if min(ms) < 2 or min(ns) < 1:
        raise UsageError("need m >= 2 and n >= 1")
    rows = []
    g = gamma / (2 * math.pi)
    Om_grid = np.linspace(0.0, 2 * abs(g) + 1.0, 2001)
    for m in ms:
        for n in ns:
            exp = [g * (1 - 1 / math.sqrt(m * n)), g * (1 + 1 / math.sqrt(m * n))]
            if math.isinf(kappa):
                roots = sorted(sv.dispersion_roots(m, n, gamma))
                rows.append([m, n, roots[0], roots[1], exp[0], exp[1], 0.0, "roots"])
            else:
                d = min(abs(sv.dispersion(m, n, gamma, sv.bold_omega(om, kappa))) for om in Om_grid)
                rows.append([m, n, math.nan, math.nan, exp[0], exp[1], float(d), "no roots"])
    path = _out(cfg, "dispersion.csv")
    fio.write_csv(path, ["m", "n", "Omega_minus", "Omega_plus", "expected_minus", "expected_plus", "min_abs_d", "status"], rows)
    for r in rows:
        if r[-1] == "roots":
            print(f"m={r[0]} n={r[1]} roots {fio.fmt(r[2])} {fio.fmt(r[3])}")
        else:
            print(f"m={r[0]} n={r[1]} no roots (kappa={kappa:g}), min |d| = {fio.fmt(r[6])}")
    _finish(cfg, "dispersion", [path])
    return EXIT_OK


def cmd_branch(cfg: dict) -> int:
    m, sign = int(cfg["m"]), parse_sign(cfg["sign"])
    if m < 2:
        raise UsageError("m must be at least 2")
    gamma = float(cfg["gamma"])
    eps_grid = parse_grid(cfg["eps"])
    K = int(cfg["K"]) if cfg.get("K") else None
    tag = f"m{m}{'p' if sign > 0 else 'm'}"
    states, rows = [], []
    status = EXIT_OK
    message = ""
    prev = None
    for eps in eps_grid:
        try:
            st = sv.solve_branch(m, sign, eps, gamma, K, guess=prev, tol=float(cfg["tol"]))
        except sv.SolverFailure as exc:
            status, message = EXIT_SOLVER, f"Newton failed at eps={eps:g}: {exc}"
            break
        prev = st
        states.append(st)
        ex = sv.third_order_expansion(m, sign, eps, gamma)
        dev_f = float(np.abs(st.f_hat[:3] - ex["f"]).max())
        row = [eps, st.Omega.real, st.q, st.residual_norm, st.iterations, st.K, dev_f,
               abs(st.Omega.real - ex["Omega"]), abs(st.q - ex["q"])]
        if cfg.get("compare") == "hstate":
            h = sv.hstate_expansion(m, eps, gamma)
            row += [h["Omega"], h["q"]]
        rows.append(row)
    direction = "not computed"
    pf = None
    if cfg.get("direction", True) and status == EXIT_OK:
        try:
            pf = sv.pitchfork_direction(m, sign, gamma)
            direction = "degenerate at eps^2" if pf.direction == "degenerate" else pf.direction
        except sv.SolverFailure as exc:
            direction = f"unavailable ({exc})"
    header = ["eps", "Omega", "q", "residual", "iterations", "K", "dev_f", "dev_Omega", "dev_q"]
    if cfg.get("compare") == "hstate":
        header += ["Omega_H", "q_H"]
    header.append("direction")
    csv_path = _out(cfg, f"branch_{tag}.csv")
    fio.write_csv(csv_path, header, [r + [direction] for r in rows])
    js_path = _out(cfg, f"branch_{tag}.json")
    fio.write_json(js_path, {
        "states": [s.to_json() for s in states],
        "direction": direction,
        "c2": None if pf is None else pf.c2,
        "c2_expected": None if pf is None else pf.c2_expected,
        "status": "ok" if status == EXIT_OK else message,
    })
    for r in rows:
        print(f"eps={fio.fmt(r[0])} Omega={fio.fmt(r[1])} q={fio.fmt(r[2])} residual={r[3]:.3e}")
    print(f"direction: {direction}")
    if message:
        print(message, file=sys.stderr)
    _finish(cfg, "branch", [csv_path, js_path])
    return status


def cmd_rigidity(cfg: dict) -> int:
    rng = np.random.default_rng(int(cfg["seed"]))
    rows = []
    ok = True
    for i in range(int(cfg["samples"])):
        gamma = float(rng.uniform(1.0, 10.0)) * (1 if rng.random() < 0.5 else -1)
        kappa = float(rng.uniform(0.5, 20.0))
        Om = gamma / (2 * math.pi) if i % 2 == 0 else float(rng.uniform(-2.0, 2.0))
        for m in range(2, int(cfg["m_max"]) + 1):
            r = sv.rigidity_check(m, gamma, sv.bold_omega(Om, kappa), n_max=int(cfg["n_max"]),
                                  perturbation=float(cfg["perturbation"]), seed=int(cfg["seed"]) + i)
            ok &= r.converged_to_trivial and r.min_abs_d > 1e-6
            rows.append([gamma, Om, kappa, m, r.min_abs_d, r.argmin_n, int(r.converged_to_trivial), r.final_norm])
    path = _out(cfg, "rigidity.csv")
    fio.write_csv(path, ["gamma", "Omega", "kappa", "m", "min_abs_d", "argmin_n", "returned_to_circle", "final_norm"], rows)
    print(f"min |d| = {min(r[4] for r in rows):.3e}; all returned to circle: {all(r[6] for r in rows)}")
    _finish(cfg, "rigidity", [path])
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_pv_solve(cfg: dict) -> int:
    c = _point_config(cfg)
    split = _split(cfg, c)
    if cfg.get("perturb"):
        rng = np.random.default_rng(int(cfg["seed"]))
        names = pv.expand_split(split)
        c = pv.set_params(c, names, pv.get_params(c, names) + float(cfg["perturb"]) * rng.standard_normal(len(names)))
    ok, svals = pv.split_is_invertible(c, split)
    if not ok:
        print(f"degenerate split {split}: singular values {svals}", file=sys.stderr)
        return EXIT_DEGENERATE
    sol = pv.solve(c, split)
    sol.meta["split"] = split
    det = pv.nondegeneracy(sol, split)
    full_ok, full_sv = pv.is_nondegenerate(sol)
    path = _out(cfg, "pv_solution.json")
    res = sol.to_json()
    res.update({
        "residual": float(np.abs(pv.residual(sol)).max()),
        "det": det,
        "split_singular_values": pv.split_is_invertible(sol, split)[1],
        "full_rank": full_ok,
        "singular_values": full_sv,
    })
    fio.write_json(path, res)
    print(f"residual {res['residual']:.3e}; det D_lambda V = {fio.fmt(det)}; full rank: {full_ok}")
    _finish(cfg, "pv-solve", [path])
    return EXIT_OK


def cmd_evolve(cfg: dict) -> int:
    c = _point_config(cfg)
    kappa = c.kappa

    def tok(s: str) -> float:
        s = s.strip()
        if s.endswith("k"):
            if math.isinf(kappa):
                raise UsageError("times in units of kappa need a collapsing configuration")
            return float(s[:-1] or 1.0) * kappa
        return float(s)

    ts = np.array(parse_grid(cfg["t"], tok))
    if np.any(ts < 0) or (math.isfinite(kappa) and np.any(ts >= kappa)):
        raise UsageError("times must lie in [0, kappa)")
    ss = pv.self_similar_positions(c, ts)
    ode = pv.integrate_kirchhoff(c.z, c.gamma, ts, rtol=float(cfg["rtol"]))
    imp = pv.linear_impulse(ss, c.gamma)
    imp_ode = pv.linear_impulse(ode, c.gamma)
    dev = np.abs(ss - ode).max(axis=1) / np.abs(ss).max(axis=1)
    rows = []
    for i, t in enumerate(ts):
        row = [t]
        for zk in ss[i]:
            row += [zk.real, zk.imag]
        row += [imp[i].real, imp[i].imag, abs(imp_ode[i] - imp_ode[0]), dev[i]]
        rows.append(row)
    header = ["t"] + [f"{p}{k + 1}" for k in range(c.M) for p in ("re_z", "im_z")] + ["impulse_re", "impulse_im", "impulse_drift_ode", "ode_rel_dev"]
    path = _out(cfg, "trajectory.csv")
    fio.write_csv(path, header, rows)
    print(f"max impulse drift {float(np.abs(imp_ode - imp_ode[0]).max()):.3e}; max ODE deviation {float(dev.max()):.3e}")
    _finish(cfg, "evolve", [path])
    return EXIT_OK


def cmd_desingularize(cfg: dict) -> int:
    c = _point_config(cfg)
    split = _split(cfg, c)
    rhos = parse_grid(cfg["rho"])
    rhos = sorted(rhos, key=abs)[::-1] if cfg.get("descending", True) else rhos
    ok, svals = pv.split_is_invertible(c, split)
    det = pv.nondegeneracy(c, split)
    print(f"split {','.join(split)}: det D_lambda V = {fio.fmt(det)}")
    if not ok:
        print(f"degenerate configuration: singular values {svals}", file=sys.stderr)
        return EXIT_DEGENERATE
    fam = ds.newton_family(c, split, rhos, N=int(cfg["N"]), with_sinks=not cfg.get("no_sinks", False))
    names = pv.expand_split(split)
    rows = []
    for st in fam:
        rows.append([st.rho] + list(pv.get_params(st.config, names)) + list(st.Q) + list(st.sigma)
                    + [st.residual_norm, st.meta.get("min_fprime", math.nan)])
    header = ["rho"] + names + [f"Q{k + 1}" for k in range(c.M)] + [f"sigma{k + 1}" for k in range(c.M)] + ["residual", "min_abs_fprime"]
    csv_path = _out(cfg, "family.csv")
    fio.write_csv(csv_path, header, rows)
    fit = ds.fit_family(fam, c) if len(fam) >= 2 else None
    js_path = _out(cfg, "family.json")
    fio.write_json(js_path, {"det": det, "split": list(split), "states": [s.to_json() for s in fam],
                             "strain": ds.strain_coefficients(c), "fit": fit})
    if fit:
        for r in fit["rows"]:
            print(f"rho={fio.fmt(r['rho'])} mu rel err {r['mu_rel_err'].max():.3e} nu rel err {r['nu_rel_err'].max():.3e} |dlambda|={r['dlambda']:.3e}")
        print("lambda ratios per halving: " + ", ".join(f"{x:.4f}" for x in fit["lambda_ratios"]))
        print("Q slope fit: " + ", ".join(fio.fmt(x) for x in fit["Q_slope"]) + "; predicted: " + ", ".join(fio.fmt(x) for x in fit["Q_slope_predicted"]))
    _finish(cfg, "desingularize", [csv_path, js_path])
    return EXIT_OK


def cmd_fields(cfg: dict) -> int:
    st = load_state(cfg["state"], int(cfg["index"]))
    if isinstance(st, pv.PointVortexConfig):
        raise UsageError("fields need a hollow-vortex state")
    g = fio.field_grid(st, int(cfg["grid"]), cfg.get("half_width"))
    cols = ["x", "y", "u", "v", "P", "in_fluid", "div", "curl"]
    path = _out(cfg, "fields.csv")
    fio.write_csv(path, cols, zip(*(g[c] for c in cols)))
    sol = fio.as_solution(st)
    ik = 0.0 if math.isinf(sol.kappa) else 1 / sol.kappa
    good = np.isfinite(g["div"])
    print(f"divergence: median {float(np.median(g['div'][good])):.10g} (expected {ik:.10g}); "
          f"curl: median {float(np.median(g['curl'][good])):.10g} (expected {-2 * sol.Omega.real:.10g})")
    _finish(cfg, "fields", [path])
    return EXIT_OK


AUDIT_LIMITS = {"kinematic_sup": 1e-9, "bernoulli_std": 1e-9, "circulation_error": 1e-10}


def cmd_audit(cfg: dict) -> int:
    st = load_state(cfg["state"], int(cfg["index"]))
    if isinstance(st, pv.PointVortexConfig):
        raise UsageError("audit needs a hollow-vortex state")
    a = fio.audit(st)
    passed = True
    for key, lim in AUDIT_LIMITS.items():
        v = float(np.max(a[key]))
        ok = v <= lim
        passed &= ok
        print(f"{'PASS' if ok else 'FAIL'} {key} = {v:.3e} (limit {lim:g})")
    for key in ("divergence_error", "curl_error"):
        print(f"info {key} = {a[key]:.3e}")
    path = _out(cfg, "audit.json")
    fio.write_json(path, a)
    _finish(cfg, "audit", [path])
    return EXIT_OK if passed else EXIT_SOLVER


# ----------------------------------------------------------------------

DEFAULTS = {
    "dispersion": {"m": "2..8", "n": "1..4", "gamma": 2 * math.pi, "kappa": "inf"},
    "branch": {"m": 3, "sign": "+", "eps": "0.005:0.02:0.005", "gamma": 2 * math.pi, "K": None, "tol": 1e-12, "compare": None, "direction": True},
    "rigidity": {"samples": 10, "m_max": 8, "n_max": 64, "perturbation": 1e-2},
    "pv-solve": {"preset": "trio", "split": None, "perturb": 0.0},
    "evolve": {"preset": "trio", "t": "0:0.9k:0.1k", "rtol": 1e-13},
    "desingularize": {"preset": "trio", "split": None, "rho": "0.02,0.01,0.005", "N": 12, "no_sinks": False},
    "fields": {"state": None, "grid": 200, "half_width": None, "index": -1},
    "audit": {"state": None, "index": -1},
}
COMMON = {"out": ".", "seed": 0}

COMMANDS = {
    "dispersion": cmd_dispersion,
    "branch": cmd_branch,
    "rigidity": cmd_rigidity,
    "pv-solve": cmd_pv_solve,
    "evolve": cmd_evolve,
    "desingularize": cmd_desingularize,
    "fields": cmd_fields,
    "audit": cmd_audit,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hollow-vortex", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with option values")
        sp.add_argument("--out", help="output directory (default: .)")
        sp.add_argument("--seed", type=int)

    def pointcfg(sp):
        sp.add_argument("--preset", choices=["trio", "quartet"])
        sp.add_argument("--input", help="JSON point-vortex configuration")
        sp.add_argument("--gamma1", type=float)
        sp.add_argument("--gamma2", type=float)
        sp.add_argument("--d", type=float)
        sp.add_argument("--theta", type=float)

    sp = sub.add_parser("dispersion", help="roots of the dispersion relation")
    common(sp)
    sp.add_argument("--m")
    sp.add_argument("--n")
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--kappa")

    sp = sub.add_parser("branch", help="m-fold rotating branch")
    common(sp)
    sp.add_argument("--m", type=int)
    sp.add_argument("--sign")
    sp.add_argument("--eps")
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--K", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--compare", choices=["hstate"])
    sp.add_argument("--no-direction", dest="direction", action="store_const", const=False)

    sp = sub.add_parser("rigidity", help="rigidity of the imploding circular vortex")
    common(sp)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--m-max", dest="m_max", type=int)
    sp.add_argument("--n-max", dest="n_max", type=int)
    sp.add_argument("--perturbation", type=float)

    sp = sub.add_parser("pv-solve", help="solve the collapsing point-vortex system on a split")
    common(sp)
    pointcfg(sp)
    sp.add_argument("--split", help="comma-separated parameter names, e.g. z1,z2,gamma1,kappa")
    sp.add_argument("--perturb", type=float)

    sp = sub.add_parser("evolve", help="self-similar evolution with ODE check")
    common(sp)
    pointcfg(sp)
    sp.add_argument("--t", help="time grid; suffix k means units of kappa")
    sp.add_argument("--rtol", type=float)

    sp = sub.add_parser("desingularize", help="hollow-vortex family from a point-vortex root")
    common(sp)
    pointcfg(sp)
    sp.add_argument("--split")
    sp.add_argument("--rho")
    sp.add_argument("--N", type=int)
    sp.add_argument("--no-sinks", dest="no_sinks", action="store_const", const=True)

    sp = sub.add_parser("fields", help="velocity and pressure on a grid")
    common(sp)
    sp.add_argument("--state")
    sp.add_argument("--grid", type=int)
    sp.add_argument("--half-width", dest="half_width", type=float)
    sp.add_argument("--index", type=int)

    sp = sub.add_parser("audit", help="boundary-condition audits for a state")
    common(sp)
    sp.add_argument("--state")
    sp.add_argument("--index", type=int)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge(args, {**COMMON, **DEFAULTS[args.command]})
        return COMMANDS[args.command](cfg)
    except (UsageError, DomainError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except sv.Degeneracy as exc:
        print(f"degenerate: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (sv.SolverFailure, fio.PullbackError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
