import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from conftest import worked_model
from creepdiv import InvalidConfig, LevyModel, SimConfig, build_value, compare_strategies, simulate_batch
from creepdiv import _simkernel_py as pyk
from creepdiv import simulate as sim
from creepdiv.simulate import CREEP, SURVIVED, default_t_max, simulate_paths

needs_compiled = pytest.mark.skipif(sim.BACKEND != "compiled", reason="compiled kernel not built")


@pytest.fixture(scope="module")
def bstar(sol4):
    return sol4.b_star


def cfg(**kw):
    base = dict(x0=1.0, b=0.0192850083, n_paths=4000, dt=1e-3, seed=7)
    return SimConfig(**{**base, **kw})


def test_default_horizon(m4):
    assert default_t_max(m4.q) == 5.0
    assert math.exp(-m4.q * default_t_max(m4.q)) < 1e-8


@pytest.mark.parametrize(
    "bad",
    [dict(x0=-0.1), dict(b=-1.0), dict(n_paths=0), dict(dt=0.05), dict(dt=0.0), dict(t_max=1.0), dict(seed=-1)],
)
def test_invalid_configs(m4, bad):
    with pytest.raises(InvalidConfig):
        simulate_batch(m4, cfg(**bad))


def test_zero_volatility_rejected():
    with pytest.raises(InvalidConfig):
        simulate_batch(worked_model(sigma=0.0), cfg())


def test_accounting(m4):
    out = simulate_batch(m4, cfg(), keep_paths=True)
    assert out.n_creep + out.n_brutal + out.n_survived == out.n_paths
    k = out.paths.klass
    assert np.all(out.paths.creep_discount[k != CREEP] == 0.0)
    assert np.all((out.paths.creep_discount[k == CREEP] > 0) & (out.paths.creep_discount[k == CREEP] <= 1))
    assert np.all(np.isnan(out.paths.ruin_time[k == SURVIVED]))
    assert np.all(out.paths.ruin_time[k != SURVIVED] <= default_t_max(m4.q))
    assert np.all(out.paths.dividends >= 0)


def test_start_at_zero_creeps_immediately(m4):
    out = simulate_batch(m4, cfg(x0=0.0, n_paths=10))
    assert out.creep_prob == 1.0 and out.mean_value == m4.S


def test_no_jumps_means_no_brutal_ruin():
    m = LevyModel(c=0.5, sigma=1.0, jumps=(), q=1.0, delta=0.3, S=0.1)
    out = simulate_batch(m, cfg(b=0.0, n_paths=2000))
    assert out.brutal_prob == 0.0 and out.n_creep > 0


def test_deterministic_across_chunks(m4):
    a = simulate_paths(m4, cfg(chunk=4096))
    b = simulate_paths(m4, cfg(chunk=333))
    assert np.array_equal(a.dividends, b.dividends) and np.array_equal(a.klass, b.klass)


@needs_compiled
def test_deterministic_across_workers(m4):
    one = simulate_batch(m4, cfg(workers=1, chunk=500))
    four = simulate_batch(m4, cfg(workers=4, chunk=500))
    assert one.as_dict() == four.as_dict()


def test_seed_changes_paths(m4):
    a = simulate_paths(m4, cfg(seed=1))
    b = simulate_paths(m4, cfg(seed=2))
    assert not np.array_equal(a.dividends, b.dividends)


@needs_compiled
def test_backends_agree_path_by_path(m4):
    c = cfg(n_paths=1500)
    a = simulate_paths(m4, c, "compiled")
    p = simulate_paths(m4, c, "python")
    assert np.array_equal(a.klass, p.klass)
    assert np.max(np.abs(a.dividends - p.dividends)) <= 1e-12
    assert np.max(np.abs(a.creep_discount - p.creep_discount)) <= 1e-12
    ruined = a.klass != SURVIVED
    assert np.max(np.abs(a.ruin_time[ruined] - p.ruin_time[ruined])) <= 1e-12


def test_linear_in_terminal_reward(m4):
    lo = simulate_batch(m4, cfg())
    hi = simulate_batch(m4.with_(S=0.06), cfg())
    assert hi.mean_value - lo.mean_value == pytest.approx(0.01 * lo.mean_creep_discount, rel=1e-10)


def test_step_halving_moves_estimate_less_than_noise(m4, bstar):
    a = simulate_batch(m4, cfg(b=bstar, dt=2e-3, n_paths=30000, seed=3))
    b = simulate_batch(m4, cfg(b=bstar, dt=1e-3, n_paths=30000, seed=4))
    pooled = math.hypot(a.std_err, b.std_err)
    assert abs(a.mean_value - b.mean_value) < 2 * pooled


def test_estimate_agrees_with_closed_form(m4, sp4, bstar):
    out = simulate_batch(m4, cfg(b=bstar, n_paths=20000, seed=11))
    exact = build_value(sp4, m4, bstar)(1.0)
    assert abs(out.mean_value - exact) <= 3 * out.std_err


def test_bridge_correction_raises_creeping(m4, bstar):
    on = simulate_batch(m4, cfg(b=bstar, dt=5e-3, n_paths=20000))
    off = simulate_batch(m4, cfg(b=bstar, dt=5e-3, n_paths=20000, bridge_correction=False))
    assert on.creep_prob > off.creep_prob


def test_duplicate_thresholds_identical(m4, bstar):
    out = compare_strategies(m4, 1.0, [bstar, bstar], cfg(n_paths=2000), reference=bstar)
    assert out.means[0] == out.means[1]
    assert out.diff_vs_reference == [0.0, 0.0]
    assert out.beats_reference == [False, False]


def test_single_threshold_ranking(m4, bstar):
    out = compare_strategies(m4, 1.0, [bstar], cfg(n_paths=500), reference=bstar)
    assert out.ranking == [bstar]


def test_reference_defaults_to_optimum(m4, bstar):
    out = compare_strategies(m4, 1.0, [0.5], cfg(n_paths=500))
    assert out.reference == pytest.approx(bstar, abs=1e-12)


def _bridge_hit_cdf(a, end, h, sigma):
    """CDF of the first zero of a Brownian bridge from a to end over [0, h], given it has one."""

    def dens(s):
        first = a / (sigma * math.sqrt(2 * math.pi * s**3)) * math.exp(-(a**2) / (2 * sigma**2 * s))
        rest = math.exp(-(end**2) / (2 * sigma**2 * (h - s))) / (sigma * math.sqrt(2 * math.pi * (h - s)))
        return first * rest

    total, _ = quad(dens, 0, h, epsabs=0, epsrel=1e-12, limit=200)
    return lambda t: quad(dens, 0, min(t, h), epsabs=0, epsrel=1e-12, limit=200)[0] / total


@pytest.mark.parametrize("a,end", [(0.03, -0.02), (0.05, 0.01), (0.01, 0.04), (0.02, -0.3)])
def test_bridge_hit_time_law(a, end):
    h, sigma, n = 1e-3, 1.0, 4000
    ids = np.arange(n, dtype=np.uint64)
    key = pyk.path_key(99, ids)
    k = np.zeros(n, dtype=np.uint64)
    acc = pyk.uniform(key, 2, k)
    s = pyk.bridge_hit_time(np.full(n, a), np.full(n, abs(end)), np.full(n, h), sigma, key, k, acc)
    assert np.all((s > 0) & (s < h))
    cdf = _bridge_hit_cdf(a, end, h, sigma)
    res = stats.kstest(s, np.vectorize(cdf))
    assert res.pvalue > 1e-3
