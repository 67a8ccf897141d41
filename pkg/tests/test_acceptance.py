"""Acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) and
then asserts.  Criteria 3 and 4 cannot be met as stated; see the README.
"""

import math

import numpy as np

from hollowvortex import desingularization as ds
from hollowvortex import fields_io as fio
from hollowvortex import point_vortex as pv
from hollowvortex import single_vortex as sv
from hollowvortex.fourier import FourierDensity
from hollowvortex.layer_potential import DiskConfiguration, z_trace

from conftest import ACCEPTANCE

TWO_PI = 2 * math.pi


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_01_dispersion_roots():
    err = 0.0
    for m in range(2, 9):
        for n in range(1, 5):
            roots = np.sort(sv.dispersion_roots(m, n, TWO_PI))
            want = np.array([1 - 1 / math.sqrt(m * n), 1 + 1 / math.sqrt(m * n)])
            err = max(err, float(np.abs(roots - want).max()))
    record(1, err <= 1e-12, f"max |root - (1 +- 1/sqrt(mn))| = {err:.2e} over m=2..8, n=1..4")


def test_criterion_02_collapse_rigidity():
    rng = np.random.default_rng(2024)
    min_d, worst, all_back = math.inf, 0.0, True
    for i in range(10):
        gamma = float(rng.uniform(1.0, 10.0)) * (1 if rng.random() < 0.5 else -1)
        kappa = float(rng.uniform(0.5, 20.0))
        Om = gamma / TWO_PI if i % 2 == 0 else float(rng.uniform(-2.0, 2.0))
        for m in range(2, 9):
            r = sv.rigidity_check(m, gamma, sv.bold_omega(Om, kappa), n_max=64, seed=i)
            min_d = min(min_d, r.min_abs_d)
            worst = max(worst, r.final_norm)
            all_back &= r.converged_to_trivial
    ok = min_d > 1e-6 and all_back and worst <= 1e-11
    record(2, ok, f"min |d| = {min_d:.3e}; Newton returned to circle in all 70 cases: {all_back}; worst final norm {worst:.1e}")


def _branch_dev(m, sign, eps):
    s = sv.solve_branch(m, sign, eps, K_max=256)
    ex = sv.third_order_expansion(m, sign, eps)
    dev = max(np.abs(s.f_hat[:3] - ex["f"]).max(), abs(s.Omega.real - ex["Omega"]), abs(s.q - ex["q"]))
    return dev, s.residual_norm


def test_criterion_03_branch_asymptotics():
    bad, slopes = [], []
    for m in (2, 3, 4, 5):
        for sign in (1, -1):
            devs = []
            for eps in (0.01, 0.02, 0.04):
                try:
                    dev, res = _branch_dev(m, sign, eps)
                except sv.SolverFailure:
                    bad.append(f"{m}{'+' if sign > 0 else '-'} no solution at eps={eps}")
                    break
                if res > 1e-11:
                    bad.append(f"{m}{'+' if sign > 0 else '-'} residual {res:.1e} at eps={eps}")
                devs.append(dev)
            if len(devs) >= 2:
                # least-squares log-log slope over the amplitudes reached
                eps = [0.01, 0.02, 0.04][: len(devs)]
                sl = float(np.polyfit(np.log(eps), np.log(devs), 1)[0])
                slopes.append(sl)
                if not 3.5 <= sl <= 4.5:
                    bad.append(f"{m}{'+' if sign > 0 else '-'} slope {sl:.2f}")
    detail = f"slopes {min(slopes):.2f}..{max(slopes):.2f}"
    if bad:
        detail += "; " + "; ".join(bad)
    record(3, not bad, detail)


def test_criterion_04_transversality():
    worst = 0.0
    measured = []
    for m in range(2, 7):
        for sign in (1, -1):
            t = sv.transversality(m, sign)
            want = -sign * 3 * math.sqrt(m)
            worst = max(worst, abs(t - want) / abs(want))
            measured.append(t / (-sign * math.sqrt(m)))
    record(4, worst <= 1e-9, f"measured pairing / (-+sqrt(m) gamma/2pi) = {np.mean(measured):.12f} (target 3); worst rel err {worst:.3f}")


def test_criterion_05_pitchfork_directions():
    want = {}
    for m in range(2, 13):
        want[(m, 1)] = "supercritical"
    for m in range(2, 9):
        want[(m, -1)] = "supercritical"
    want[(9, -1)] = "degenerate"
    for m in (10, 11, 12):
        want[(m, -1)] = "subcritical"
    wrong = []
    for (m, sign), w in want.items():
        got = sv.pitchfork_direction(m, sign).direction
        if got != w:
            wrong.append(f"({m},{sign:+d}) {got}")
    record(5, not wrong, f"{len(want) - len(wrong)}/{len(want)} classifications match" + (": " + ", ".join(wrong) if wrong else ""))


def test_criterion_06_critical_layers():
    errs, empty = [], True
    for m in (2, 3, 4, 5):
        cl = fio.critical_layers(sv.solve_branch(m, -1, 0.01))
        r2 = cl["mean_radius_squared"]
        errs.append(math.inf if r2 is None else abs(r2 - sv.critical_radius_squared(m, "-")))
        empty &= fio.critical_layers(sv.solve_branch(m, 1, 0.01))["empty"]
    ok = max(errs) <= 5e-3 and empty
    record(6, ok, f"branch- max |r^2 - sqrt(m)/(sqrt(m)-1)| = {max(errs):.2e} (m=2..5); branch+ none: {empty}")


def test_criterion_07_point_vortex_goldens():
    t = pv.trio()
    res_t = float(np.abs(pv.residual(t)).max())
    raw = pv.trio(centered=False)
    zc = pv.center_of_vorticity(raw)
    golden = (
        abs(t.Omega.real - 35 / (264 * math.pi)) <= 1e-15
        and abs(1 / t.kappa - math.sqrt(7) / (132 * math.pi)) <= 1e-15
        and abs(zc + 2j / math.sqrt(7)) <= 1e-14
    )
    q = pv.quartet()
    res_q = float(np.abs(pv.residual(q)).max())
    det = pv.nondegeneracy(q, pv.QUARTET_SPLIT)
    ok = res_t <= 1e-12 and res_q <= 1e-12 and golden and abs(abs(det) - 1.397) <= 2e-3
    record(7, ok, f"trio residual {res_t:.1e}, goldens {golden}; quartet residual {res_q:.1e}, |det| = {abs(det):.5f}")


def test_criterion_08_evolution_vs_ode():
    c = pv.trio()
    t = np.linspace(0.0, 0.99, 34) * c.kappa
    ss = pv.self_similar_positions(c, t)
    ode = pv.integrate_kirchhoff(c.z, c.gamma, t)
    rel = float((np.abs(ss - ode).max(axis=1) / np.abs(ss).max(axis=1)).max())
    I = pv.linear_impulse(ode, c.gamma)
    drift = float(np.abs(I - I[0]).max())
    record(8, rel <= 1e-8 and drift <= 1e-9, f"max rel deviation {rel:.2e} up to t=0.99 kappa; impulse drift {drift:.1e}")


def test_criterion_09_desingularization_slopes(trio, quartet, trio_family, quartet_family):
    parts, ok = [], True
    for name, c, fam in (("trio", trio, trio_family), ("quartet", quartet, quartet_family)):
        fit = ds.fit_family(fam, c)
        slope_ok = all(max(r["mu_rel_err"].max(), r["nu_rel_err"].max()) <= 3 * r["rho"] for r in fit["rows"])
        ratio_ok = all(3.0 <= x <= 5.0 for x in fit["lambda_ratios"])
        r2_ok = bool(np.all(fit["Q_r2"] >= 0.999))
        ok &= slope_ok and ratio_ok and r2_ok
        worst = max(max(r["mu_rel_err"].max(), r["nu_rel_err"].max()) / r["rho"] for r in fit["rows"])
        parts.append(
            f"{name}: worst slope err/rho {worst:.2f}, lambda ratios "
            + "/".join(f"{x:.2f}" for x in fit["lambda_ratios"])
            + f", Q R^2 min {float(fit['Q_r2'].min()):.6f}"
        )
    record(9, ok, "; ".join(parts))


def _quad_trace(densities, cfg, k, n=512):
    """512-node trapezoid rule for the contribution of the other disks on circle k."""
    s = np.exp(2j * np.pi * np.arange(n) / n)
    tau = np.exp(2j * np.pi * np.arange(64) / 64)
    out = np.zeros(tau.size, dtype=complex)
    for j, (mu, zj) in enumerate(zip(densities, cfg.centers)):
        if j == k:
            continue
        vals = mu.evaluate_tau(s)
        zeta = cfg.centers[k] + cfg.rho * tau
        out += (vals[None, :] * cfg.rho * s[None, :] / (cfg.rho * s[None, :] + zj - zeta[:, None])).mean(axis=1)
    return tau, out


def test_criterion_10_oracle_equivalences(trio, quartet):
    rng = np.random.default_rng(10)
    errs = {}

    # layer-potential traces: off-disk part vs quadrature, own part is the Cauchy multiplier
    cfg = DiskConfiguration(np.array([0.0, 1.2 + 0.4j, -0.7 + 1.1j]), 0.3)
    dens = [FourierDensity.from_positive({n: 0.6**n * complex(*rng.standard_normal(2)) for n in range(1, 9)}) for _ in range(3)]
    e = 0.0
    for k in range(3):
        tr = z_trace(dens, cfg, k)
        tau, quad = _quad_trace(dens, cfg, k)
        own = sum(-dens[k].coeff(-n) * tau ** (-n) for n in range(1, 9))
        e = max(e, float(np.abs(tr.evaluate_tau(tau) - own - quad).max()))
    errs["trace vs quadrature"] = (e, 1e-9)

    # Jacobians vs central differences
    s = sv.solve_branch(3, 1, 0.02)
    J = sv.jacobian(s)

    def vec(u):
        return sv._eq_even(u, *sv._numerators(u))

    h, K, cols = 1e-6, s.K, []
    for i in range(J.shape[1]):
        def shifted(t, i=i):
            u = s.copy()
            if i < K:
                u.mu_hat[i] += t
            elif i < 2 * K:
                u.nu_hat[i - K] += 1j * t
            elif i == 2 * K:
                u.q += t
            else:
                u.Omega += t
            return vec(u)
        cols.append((shifted(h) - shifted(-h)) / (2 * h))
    e_sv = float(np.abs(J - np.column_stack(cols)).max() / np.abs(J).max())

    st = ds.leading_order_state(trio, pv.TRIO_SPLITS[0], 0.03, 6)
    st.mu = st.mu + 1e-3 * 0.6 ** np.arange(6) * (rng.standard_normal((3, 6)) + 1j * rng.standard_normal((3, 6)))
    lay = ds._Layout(st.M, st.N, pv.expand_split(st.split), st.with_sinks)
    x0 = ds._pack(st, lay)
    Jd = ds.jacobian(st)
    fd = []
    for i in range(x0.size):
        d = np.zeros_like(x0)
        d[i] = h * max(1.0, abs(x0[i]))
        fd.append((ds.residual_vector(ds._unpack(st, lay, x0 + d)) - ds.residual_vector(ds._unpack(st, lay, x0 - d))) / (2 * d[i]))
    e_ds = float(np.abs(Jd - np.column_stack(fd)).max() / np.abs(Jd).max())

    names = pv.expand_split(pv.full_names(quartet.M))
    Jp = pv.parameter_jacobian(quartet, names)
    xp = pv.get_params(quartet, names)

    def pvec(x):
        V = pv.residual(pv.set_params(quartet, names, x))
        return np.column_stack([V.real, V.imag]).ravel()

    fdp = np.column_stack([(pvec(xp + h * u) - pvec(xp - h * u)) / (2 * h) for u in np.eye(len(names))])
    e_pv = float(np.abs(Jp - fdp).max() / np.abs(Jp).max())
    errs["Jacobians vs FD (rel)"] = (max(e_sv, e_ds, e_pv), 1e-6)

    # expanded operators vs pointwise forms
    rho = 0.05
    tau = np.exp(2j * np.pi * np.arange(256) / 256)
    st = ds.leading_order_state(trio, pv.TRIO_SPLITS[0], rho, 10)
    amp = 1e-3 * 0.6 ** np.arange(10)
    st.mu = st.mu + amp * (rng.standard_normal((3, 10)) + 1j * rng.standard_normal((3, 10)))
    st.nu = st.nu + amp * (rng.standard_normal((3, 10)) + 1j * rng.standard_normal((3, 10)))
    e = 0.0
    G, Om2 = st.bold_gammas, abs(st.config.Omega) ** 2
    for k, (A, B) in enumerate(zip(ds.kinematic_operator(st), ds.bernoulli_operator(st))):
        kin = ds.pointwise_kinematic(st, k)
        e = max(e, float(np.abs(A.evaluate_tau(tau).real - (kin - kin.mean())).max()))
        f = st.f(st.centers[k] + rho * tau)
        lhs = rho * (B.evaluate_tau(tau).real + st.Q[k]) + abs(G[k]) ** 2 / (4 * math.pi**2) + rho**2 * Om2 * np.abs(f) ** 2
        e = max(e, float(np.abs(lhs - ds.pointwise_speed2(st, k)).max()))
    errs["expanded vs pointwise"] = (e, 1e-9)

    # rho = 0 Bernoulli limit
    st0 = ds.leading_order_state(quartet, pv.QUARTET_SPLIT, 0.0, 10)
    st0.mu = st0.mu + 0.1 * amp[None, :] * 1e3 * (rng.standard_normal((4, 10)) + 1j * rng.standard_normal((4, 10)))
    st0.nu = st0.nu + 0.1 * amp[None, :] * 1e3 * (rng.standard_normal((4, 10)) + 1j * rng.standard_normal((4, 10)))
    st0.Q[:] = 0.0
    e = 0.0
    for k, B in enumerate(ds.bernoulli_operator(st0)):
        ref = ds.linear_bernoulli(quartet, k, st0.densities("mu")[k], st0.densities("nu")[k])
        n = max(B.hi, ref.hi) + 1
        e = max(e, float(np.abs(B.padded(-n, n) - ref.padded(-n, n)).max()))
    errs["B at rho=0 vs linear"] = (e, 1e-12)

    ok = all(v <= lim for v, lim in errs.values())
    record(10, ok, "; ".join(f"{k} {v:.1e} (<= {lim:g})" for k, (v, lim) in errs.items()))


def test_criterion_11_field_audits(trio_family, quartet_family):
    sols = [sv.solve_branch(m, sgn, 0.02) for m in (2, 3, 4, 5) for sgn in (1, -1)]
    sols += [sv.solve_branch(3, -1, 0.04)]
    sols += list(trio_family) + list(quartet_family)
    worst = {"kinematic_sup": 0.0, "bernoulli_std": 0.0, "circulation_error": 0.0, "divergence_error": 0.0, "curl_error": 0.0}
    for s in sols:
        a = fio.audit(s)
        for key in worst:
            worst[key] = max(worst[key], float(np.max(a[key])))
    area_err = 0.0
    for st in (trio_family[0], quartet_family[0]):
        for frac in (0.25, 0.5, 0.75, 0.99):
            snap = fio.lab_frame(st, frac * st.config.kappa, n=512)
            area_err = max(area_err, float(np.abs(snap.area_ratio - (1 - frac)).max()))
    limits = {"kinematic_sup": 1e-9, "bernoulli_std": 1e-9, "circulation_error": 1e-10, "divergence_error": 1e-6, "curl_error": 1e-6}
    ok = all(worst[k] <= limits[k] for k in limits) and area_err <= 1e-10
    record(
        11, ok,
        f"{len(sols)} solutions: " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; area law err {area_err:.1e}",
    )
