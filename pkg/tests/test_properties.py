"""Property tests for algebraic invariants."""

import math

import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st

from hollowvortex import fourier as fr
from hollowvortex import point_vortex as pv
from hollowvortex.layer_potential import DiskConfiguration, z_trace
from hollowvortex.single_vortex import Degeneracy

finite = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)


@st.composite
def traces(draw, max_len=9):
    lo = draw(st.integers(-6, 3))
    n = draw(st.integers(1, max_len))
    re = draw(st.lists(finite, min_size=n, max_size=n))
    im = draw(st.lists(finite, min_size=n, max_size=n))
    return fr.BoundaryTrace(lo, np.array(re) + 1j * np.array(im))


@st.composite
def densities(draw, N=6):
    re = draw(st.lists(finite, min_size=N, max_size=N))
    im = draw(st.lists(finite, min_size=N, max_size=N))
    return fr.FourierDensity.from_positive({n + 1: complex(a, b) * 0.6**n for n, (a, b) in enumerate(zip(re, im))})


THETA = np.linspace(0, 2 * math.pi, 37)


@given(traces(), traces())
def test_product_is_pointwise(a, b):
    assert np.allclose(fr.product(a, b)(THETA), a(THETA) * b(THETA), atol=1e-10)


@given(traces())
def test_conj_is_pointwise(a):
    assert np.allclose(fr.conj(a)(THETA), np.conj(a(THETA)), atol=1e-12)


@given(traces())
def test_cauchy_squares_to_minus_itself(a):
    c = fr.cauchy(a)
    assert np.allclose(fr.cauchy(c)(THETA), -c(THETA), atol=1e-12)
    assert all(n < 0 for n, v in c.as_dict().items() if v != 0)


@given(traces())
def test_real_part_is_real(a):
    assert np.abs(fr.real_part(a)(THETA).imag).max() <= 1e-12


@given(traces())
def test_json_roundtrip(a):
    assert np.allclose(fr.BoundaryTrace.from_json(a.to_json())(THETA), a(THETA), atol=0)


@given(traces(), st.integers(0, 6))
def test_projections_partition(a, m):
    s = fr.project_le(a, m) + fr.project_gt(a, m)
    assert np.allclose(s(THETA), a(THETA), atol=1e-12)


@given(densities(), densities(), densities(), finite)
def test_z_trace_linear(m1, m2, m3, s):
    cfg = DiskConfiguration(np.array([0.0, 1.5 + 0.5j]), 0.3)
    a = z_trace([m1, m2], cfg, 0)
    b = z_trace([m3, m3], cfg, 0)
    combo = z_trace([m1 * s + m3, m2 * s + m3], cfg, 0)
    assert np.allclose(combo(THETA), s * a(THETA) + b(THETA), atol=1e-10)


@st.composite
def trio_params(draw):
    g1 = draw(st.floats(0.2, 5.0))
    g2 = draw(st.floats(0.2, 5.0))
    d = draw(st.floats(0.5, 5.0))
    th = draw(st.floats(0.1, math.pi - 0.1))
    return g1, g2, d, th


def _trio(params):
    try:
        return pv.trio(*params)
    except Degeneracy:
        assume(False)


@given(trio_params())
def test_trio_residual_vanishes(params):
    c = _trio(params)
    scale = np.abs(c.gamma).max() / (2 * math.pi * min(np.abs(c.z[:, None] - c.z[None, :])[~np.eye(3, dtype=bool)]))
    assert np.abs(pv.residual(c)).max() <= 1e-11 * max(1.0, scale)
    assert math.isfinite(c.kappa)


@given(trio_params(), st.floats(0, 2 * math.pi), st.floats(0.3, 3.0))
def test_rotation_and_scaling_covariance(params, alpha, s):
    c = _trio(params)
    ref = np.abs(pv.residual(c)).max()
    rot = pv.PointVortexConfig(c.z * np.exp(1j * alpha), c.gamma, c.Omega)
    assert np.abs(pv.residual(rot)).max() <= 1e-11 + 10 * ref
    # positions scale by s: velocities by 1/s, so Omega by 1/s^2
    sc = pv.PointVortexConfig(c.z * s, c.gamma, c.Omega / s**2)
    assert np.abs(pv.residual(sc)).max() <= (1e-11 + 10 * ref) / s
    # circulations scale by s: Omega scales by s
    cs = pv.PointVortexConfig(c.z, c.gamma * s, c.Omega * s)
    assert np.abs(pv.residual(cs)).max() <= (1e-11 + 10 * ref) * s


@given(trio_params(), finite, finite)
def test_center_residual_translation(params, a, b):
    c = _trio(params)
    assert abs(pv.center_of_vorticity(c)) <= 1e-12 * max(1.0, np.abs(c.z).max())
    assert np.allclose(pv.residual_about_center(c), pv.residual(c), atol=1e-12)
    moved = pv.PointVortexConfig(c.z + complex(a, b), c.gamma, c.Omega)
    assert np.allclose(pv.residual_about_center(moved), pv.residual(c), atol=1e-10)


@given(trio_params(), st.floats(0.0, 0.95))
def test_self_similar_impulse_is_zero(params, frac):
    c = _trio(params)
    assume(c.kappa > 0)
    z = pv.self_similar_positions(c, np.array([frac * c.kappa]))
    assert abs(pv.linear_impulse(z, c.gamma)[0]) <= 1e-11 * np.abs(c.gamma).sum() * max(1.0, np.abs(c.z).max())
