import numpy as np
import pytest

from hollowvortex.fourier import FourierDensity, cauchy, d_tau
from hollowvortex.layer_potential import (
    DiskConfiguration,
    DomainError,
    conformal_map_trace,
    z_field,
    z_field_derivative,
    z_trace,
)

from conftest import random_density


def quad_field(densities, cfg, zeta, n=2048):
    """Trapezoid rule for (1/2 pi i) sum_k int mu_k(s) rho ds / (rho s + zeta_k - zeta)."""
    s = np.exp(2j * np.pi * np.arange(n) / n)
    zeta = np.atleast_1d(zeta)
    out = np.zeros(zeta.shape, dtype=complex)
    for mu, zk in zip(densities, cfg.centers):
        if mu is None:
            continue
        vals = mu.evaluate_tau(s)
        kern = cfg.rho * s[None, :] / (cfg.rho * s[None, :] + zk - zeta[:, None])
        out += (vals[None, :] * kern).mean(axis=1)
    return out


class TestField:
    def test_zero_density(self):
        cfg = DiskConfiguration([0.0], 1.0)
        assert z_field([FourierDensity.from_positive({})], cfg, 3.0 + 1j) == 0

    def test_single_mode(self):
        cfg = DiskConfiguration([0.0], 1.0)
        mu = FourierDensity.from_positive({1: 1.0})
        z = np.array([1.7, -2 + 1j, 3j])
        assert np.allclose(z_field([mu], cfg, z), -1 / z, atol=1e-15)
        assert np.abs(quad_field([mu], cfg, z) - (-1 / z)).max() < 1e-10

    def test_two_disks_vs_quadrature(self, rng):
        cfg = DiskConfiguration([-1.0, 1.0 + 0.3j], 0.3)
        mus = [random_density(rng, 8), random_density(rng, 8)]
        z = np.array([0.1 + 1.0j, 2.5 - 0.4j, -3 + 2j, 0.2 - 0.2j])
        assert np.abs(z_field(mus, cfg, z) - quad_field(mus, cfg, z)).max() < 1e-10

    def test_derivative_vs_finite_difference(self, rng):
        cfg = DiskConfiguration([-1.0, 1.0], 0.2)
        mus = [random_density(rng, 6), random_density(rng, 6)]
        z, h = 0.3 + 0.9j, 1e-5
        fd = (z_field(mus, cfg, z + h) - z_field(mus, cfg, z - h)) / (2 * h)
        assert abs(z_field_derivative(mus, cfg, z) - fd) < 1e-8

    def test_decay(self, rng):
        cfg = DiskConfiguration([-1.0, 1.0], 0.3)
        mus = [random_density(rng, 6), random_density(rng, 6)]
        r = np.geomspace(3, 1e4, 30)
        # |zeta - zeta_k| >= r - |zeta_k| gives |Z| <= C / r for r >= 3
        C = sum(
            3 * np.abs(mu.coeff(-n)) * (cfg.rho / (3 - abs(zk))) ** n
            for mu, zk in zip(mus, cfg.centers)
            for n in range(1, 7)
        )
        for ph in (0.3, 2.0, 4.4):
            v = np.abs(z_field(mus, cfg, r * np.exp(1j * ph)))
            assert np.all(v * r <= C * (1 + 1e-12))

    def test_overlap_rejected(self):
        with pytest.raises(DomainError):
            DiskConfiguration([0.0, 0.5], 0.3)


class TestTrace:
    def test_rho_zero_is_cauchy(self, rng):
        cfg = DiskConfiguration([-1.0, 1.0], 0.0)
        mus = [random_density(rng, 8), random_density(rng, 8)]
        for k in range(2):
            t = z_trace(mus, cfg, k)
            assert np.array_equal(t.padded(-9, 9), cauchy(mus[k]).padded(-9, 9))

    def test_single_disk_is_cauchy(self, rng):
        mu = random_density(rng, 8)
        for rho in (0.1, 1.0, -0.4):
            t = z_trace([mu], DiskConfiguration([0.5j], rho), 0)
            assert np.array_equal(t.padded(-9, 9), cauchy(mu).padded(-9, 9))

    def test_vs_quadrature_512(self, rng):
        cfg = DiskConfiguration([-1.0, 1.0], 0.1)
        mus = [random_density(rng, 8, decay=0.9), random_density(rng, 8, decay=0.9)]
        tau = np.exp(2j * np.pi * np.arange(512) / 512)
        for k in range(2):
            # own disk: exterior boundary limit is the Cauchy multiplier; the rest by quadrature
            other = [mus[j] if j != k else None for j in range(2)]
            ref = cauchy(mus[k]).evaluate_tau(tau) + quad_field(other, cfg, cfg.centers[k] + cfg.rho * tau, 512)
            assert np.abs(z_trace(mus, cfg, k).evaluate_tau(tau) - ref).max() < 1e-9

    def test_negative_rho(self, rng):
        cfg = DiskConfiguration([-1.0, 1.0], -0.1)
        mus = [random_density(rng, 6), random_density(rng, 6)]
        tau = np.exp(2j * np.pi * np.arange(256) / 256)
        other = [None, mus[1]]
        ref = cauchy(mus[0]).evaluate_tau(tau) + quad_field(other, cfg, cfg.centers[0] + cfg.rho * tau, 512)
        assert np.abs(z_trace(mus, cfg, 0).evaluate_tau(tau) - ref).max() < 1e-9

    def test_rho_continuity(self, rng):
        mus = [random_density(rng, 8), random_density(rng, 8)]
        t0 = z_trace(mus, DiskConfiguration([-0.5, 0.5], 0.0), 0)
        t1 = z_trace(mus, DiskConfiguration([-0.5, 0.5], 1e-6), 0)
        lo, hi = min(t0.lo, t1.lo), max(t0.hi, t1.hi)
        norm = max(m.norm() for m in mus)
        assert np.abs(t1.padded(lo, hi) - t0.padded(lo, hi)).max() <= 1e-5 * norm

    def test_linear(self, rng):
        cfg = DiskConfiguration([-1.0, 1.0j], 0.2)
        a = [random_density(rng, 5), random_density(rng, 5)]
        b = [random_density(rng, 5), random_density(rng, 5)]
        lhs = z_trace([2 * x - 3 * y for x, y in zip(a, b)], cfg, 1)
        rhs = z_trace(a, cfg, 1) * 2 - z_trace(b, cfg, 1) * 3
        assert np.abs(lhs.padded(-8, 60) - rhs.padded(-8, 60)).max() < 1e-14

    def test_mean_zero_preserved(self, rng):
        mu = random_density(rng, 6)
        assert cauchy(mu).coeff(0) == 0


class TestMapTrace:
    def test_identity(self):
        cfg = DiskConfiguration([0.3, -2.0], 0.2)
        zero = [FourierDensity.from_positive({})] * 2
        t = conformal_map_trace(zero, cfg, 0)
        tau = np.exp(1j * np.linspace(0, 6, 7))
        assert np.allclose(t.evaluate_tau(tau), 0.3 + 0.2 * tau, atol=1e-15)

    def test_single_vortex_shape(self):
        m, eps = 3, 0.01
        mu = FourierDensity.from_positive({m - 1: -eps})  # f = tau + eps tau^(1-m)
        t = conformal_map_trace([mu], DiskConfiguration([0.0], 1.0), 0, scale=1.0)
        assert t.coeff(1) == 1 and t.coeff(1 - m) == pytest.approx(eps)

    def test_derivative_vs_finite_difference(self, rng):
        cfg = DiskConfiguration([-1.0, 1.0], 0.2)
        mus = [random_density(rng, 6), random_density(rng, 6)]
        f = conformal_map_trace(mus, cfg, 0)
        th, h = np.linspace(0, 6, 13), 1e-6
        tau = np.exp(1j * th)
        dfdth = (f.evaluate_tau(np.exp(1j * (th + h))) - f.evaluate_tau(np.exp(1j * (th - h)))) / (2 * h)
        # derivative of f along the circle: df/dtheta = i rho tau f_zeta, f_zeta = 1 + rho Z'(trace)
        fz = 1 + cfg.rho * d_tau(z_trace(mus, cfg, 0)).evaluate_tau(tau)
        assert np.abs(dfdth - 1j * cfg.rho * tau * fz).max() < 1e-8
