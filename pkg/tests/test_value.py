import numpy as np
import pytest

from conftest import random_models
from creepdiv import HJBViolation, build_scale_pair, build_value, hjb_verify, p_S, solve_threshold, value_derivatives
from creepdiv.threshold import theta_S_prime
from creepdiv.value import generator_residual, spectral_atoms, spectral_V1

RANDOM = random_models(10, seed=9)


@pytest.fixture(scope="module")
def vf4(sp4, m4, sol4):
    return build_value(sp4, m4, sol4.b_star)


def _setup(m):
    sp = build_scale_pair(m)
    sol = solve_threshold(sp, m, diagnostics=False)
    return sp, sol, build_value(sp, m, sol.b_star)


def test_value_at_origin_is_terminal_reward(vf4, m4):
    assert vf4(0.0) == pytest.approx(m4.S, rel=1e-12)
    assert vf4(1e-12) == pytest.approx(m4.S, rel=1e-9)


def test_zero_on_negative_half_line(vf4):
    assert vf4(-0.3) == 0.0
    assert np.all(vf4(np.array([-2.0, -1e-9])) == 0.0)


def test_smooth_pasting(vf4, sol4, sp4, m4):
    b = sol4.b_star
    lo1, lo2 = value_derivatives(vf4, b, "below")
    hi1, hi2 = value_derivatives(vf4, b, "above")
    assert lo1 == pytest.approx(1.0, abs=1e-6)
    assert hi1 == pytest.approx(1.0, abs=1e-6)
    assert abs(lo2 - hi2) <= 1e-8 * max(1.0, abs(lo2))
    assert vf4.below(b) == pytest.approx(vf4.above(b), rel=1e-12)
    assert hi2 <= 0.0
    assert hi2 == pytest.approx(-theta_S_prime(sp4, m4, b) * sp4.dW(1)(b), rel=1e-6)


def test_derivatives_by_finite_differences(vf4):
    rng = np.random.default_rng(0)
    for x in rng.uniform(0.05, 6.0, 10):
        h = 1e-4
        v1, v2 = value_derivatives(vf4, x)
        d1 = vf4.derivative_pieces(1)[int(x > vf4.b)]
        fd1 = (vf4(x + h) - vf4(x - h)) / (2 * h)
        fd2 = (d1(x + h) - d1(x - h)) / (2 * h)
        assert v1 == pytest.approx(fd1, rel=1e-6)
        assert v2 == pytest.approx(fd2, rel=1e-6, abs=1e-9)


def test_hjb_at_optimum(vf4, sol4):
    grid = np.linspace(1e-4, sol4.b_star + 10, 400)
    rep = hjb_verify(vf4, grid, strict=True)
    assert rep.ok


def test_hjb_detects_suboptimal_barrier(sp4, m4, sol4):
    vf = build_value(sp4, m4, sol4.b_star + 0.5)
    grid = np.linspace(1e-4, sol4.b_star + 10, 400)
    rep = hjb_verify(vf, grid)
    assert not rep.ok
    with pytest.raises(HJBViolation) as exc:
        rep.raise_if_failed()
    assert exc.value.points


def test_barrier_is_the_binding_point(vf4, sol4):
    below = np.linspace(1e-6, sol4.b_star, 50)
    v1 = np.array([value_derivatives(vf4, x)[0] for x in below])
    assert np.all(v1 >= 1 - 1e-9)
    assert v1.min() == pytest.approx(1.0, abs=1e-6)
    assert np.argmin(v1) == len(below) - 1


@pytest.mark.parametrize("m", RANDOM)
def test_value_properties(m):
    sp, sol, vf = _setup(m)
    b = sol.b_star
    assert vf(0.0) == pytest.approx(m.S, rel=1e-10)
    assert vf(-1.0) == 0.0
    for k in (0, 1, 2):
        lo, hi = vf.derivative_pieces(k)
        assert lo(b) == pytest.approx(hi(b), rel=1e-8, abs=1e-10)
    below = np.linspace(1e-6, b, 100) if b > 0 else np.array([])
    above = np.linspace(b + 1e-6, b + 10, 400)
    assert all(value_derivatives(vf, x)[0] >= 1 - 1e-9 for x in below)
    assert all(value_derivatives(vf, x)[1] <= 1e-12 for x in above)
    for x in np.linspace(1e-3, b + 10, 120):
        if abs(x - b) <= 1e-4:
            continue
        res = generator_residual(vf, x)
        assert res <= 1e-6 * (1 + m.q * abs(vf(x)))
        assert abs(res) <= 1e-6 * (1 + m.q * abs(vf(x)))


@pytest.mark.parametrize("m", RANDOM[:5])
def test_reduced_form_at_zero_barrier(m):
    sp = build_scale_pair(m)
    a = build_value(sp, m, 0.0, reduced_at_zero=True)
    g = build_value(sp, m, 0.0, reduced_at_zero=False)
    xs = np.linspace(0.0, 8.0, 41)
    assert np.allclose(a(xs), g(xs), rtol=1e-10, atol=0)


def test_weight_function(vf4, m4, sol4):
    assert p_S(vf4, 0.0) == pytest.approx(m4.delta, rel=1e-12)
    h = 1e-3
    for z in np.linspace(h, sol4.b_star, 5):
        d2 = (p_S(vf4, z + h) - 2 * p_S(vf4, z) + p_S(vf4, z - h)) / h**2
        assert d2 <= -m4.S * m4.sigma**2 + 1e-6


@pytest.mark.parametrize("m", [None] + RANDOM[:5])
def test_weight_function_single_sign_change(m, m4, sp4, sol4):
    if m is None:
        m, sp, sol = m4, sp4, sol4
        vf = build_value(sp, m, sol.b_star)
    else:
        sp, sol, vf = _setup(m)
    z_hi = 10 * max([sp.phi_q] + [p for _, p in m.jumps])
    zs = np.linspace(0.0, z_hi, 4000)[1:]
    vals = np.array([p_S(vf, z) for z in zs])
    s = np.sign(vals[np.abs(vals) > 1e-12])
    changes = int(np.count_nonzero(s[1:] != s[:-1]))
    assert changes <= 1
    if changes == 1:
        assert s[0] > 0 > s[-1]


@pytest.mark.parametrize("m", [None] + RANDOM[:5])
def test_spectral_representation(m, m4, sp4, sol4):
    if m is None:
        m, sp, sol = m4, sp4, sol4
        vf = build_value(sp, m, sol.b_star)
    else:
        sp, sol, vf = _setup(m)
    atoms = spectral_atoms(sp)
    assert len(atoms) == 1 + len(m.jumps)
    assert all(z > 0 and xi > 0 for z, xi in atoms)
    for x in np.linspace(sol.b_star + 0.01, sol.b_star + 6, 12):
        assert spectral_V1(vf, x) == pytest.approx(value_derivatives(vf, x)[0], rel=1e-8)
