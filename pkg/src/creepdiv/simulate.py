"""Monte Carlo for the threshold-controlled surplus with creeping rewards.

Each path runs Euler steps of the refracted diffusion between exact claim
arrival times.  Ruin by a claim pays nothing; ruin by the diffusion (creeping)
pays ``S`` discounted to the ruin time.  A Brownian-bridge test inside every
step catches creeping excursions that end above zero.

The compiled kernel is used when it is importable; set ``CREEPDIV_PURE=1``
to force the numpy fallback.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidConfig
from .levy_model import LevyModel

from . import _simkernel_py

if os.environ.get("CREEPDIV_PURE"):
    _compiled = None
else:
    try:
        from . import _simkernel as _compiled
    except ImportError:  # pragma: no cover - depends on the build
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"

SURVIVED, CREEP, BRUTAL = 0, 1, 2
MAX_DT = 1e-2
DISCOUNT_CUTOFF = 18.5


def default_t_max(q: float) -> float:
    return float(math.ceil(DISCOUNT_CUTOFF / q))


@dataclass(frozen=True)
class SimConfig:
    x0: float
    b: float
    n_paths: int = 100_000
    dt: float = 1e-3
    t_max: float | None = None
    seed: int = 12345
    bridge_correction: bool = True
    workers: int = 1
    chunk: int = 4096

    def resolved_t_max(self, q: float) -> float:
        return default_t_max(q) if self.t_max is None else float(self.t_max)

    def validate(self, m: LevyModel):
        if not (self.x0 >= 0 and math.isfinite(self.x0)):
            raise InvalidConfig(f"x0 must be a finite non-negative number, got {self.x0}")
        if not (self.b >= 0 and math.isfinite(self.b)):
            raise InvalidConfig(f"threshold b must be non-negative, got {self.b}")
        if not (isinstance(self.n_paths, (int, np.integer)) and self.n_paths > 0):
            raise InvalidConfig(f"n_paths must be a positive integer, got {self.n_paths}")
        if not (0 < self.dt <= MAX_DT):
            raise InvalidConfig(f"dt must lie in (0, {MAX_DT}], got {self.dt}")
        t_max = self.resolved_t_max(m.q)
        if math.exp(-m.q * t_max) >= 1e-8:
            raise InvalidConfig(f"t_max={t_max} leaves discount exp(-q t_max) >= 1e-8")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must fit in 64 unsigned bits")
        if not m.sigma > 0:
            raise InvalidConfig("simulation needs sigma > 0")
        if self.workers < 1 or self.chunk < 1:
            raise InvalidConfig("workers and chunk must be positive")


@dataclass
class PathResults:
    dividends: np.ndarray
    creep_discount: np.ndarray
    ruin_time: np.ndarray
    klass: np.ndarray

    def payoff(self, S: float) -> np.ndarray:
        return self.dividends + S * self.creep_discount


@dataclass
class SimOutcome:
    mean_value: float
    std_err: float
    creep_prob: float
    brutal_prob: float
    survival_prob: float
    mean_creep_discount: float
    mean_ruin_time: float
    n_creep: int
    n_brutal: int
    n_survived: int
    n_paths: int
    backend: str
    paths: PathResults | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("paths")
        return d


def _phase_tables(m: LevyModel):
    lam = np.array([l for l, _ in m.jumps], dtype=float)
    rate = np.array([p for _, p in m.jumps], dtype=float)
    total = float(lam.sum()) if lam.size else 0.0
    cdf = np.cumsum(lam) / total if lam.size else np.zeros(0)
    return np.ascontiguousarray(cdf), np.ascontiguousarray(rate), total


def simulate_paths(m: LevyModel, cfg: SimConfig, backend: str | None = None) -> PathResults:
    """Per-path outputs in path-index order."""
    cfg.validate(m)
    backend = backend or BACKEND
    if backend == "compiled":
        if _compiled is None:
            raise InvalidConfig("compiled kernel is not available")
        kernel = _compiled.simulate_paths
    elif backend == "python":
        kernel = _simkernel_py.simulate_paths
    else:
        raise InvalidConfig(f"unknown backend {backend!r}")
    n = int(cfg.n_paths)
    out = PathResults(np.empty(n), np.empty(n), np.empty(n), np.empty(n, dtype=np.int8))
    cdf, rate, lam_total = _phase_tables(m)
    t_max = cfg.resolved_t_max(m.q)
    chunk = cfg.chunk if backend == "compiled" else max(cfg.chunk, 65536)

    def run(start: int):
        stop = min(start + chunk, n)
        kernel(
            float(cfg.x0), float(cfg.b), m.c, m.sigma, m.delta, m.q, cdf, rate, lam_total,
            float(cfg.dt), t_max, int(cfg.seed), start, bool(cfg.bridge_correction),
            out.dividends[start:stop], out.creep_discount[start:stop],
            out.ruin_time[start:stop], out.klass[start:stop],
        )

    starts = range(0, n, chunk)
    if cfg.workers > 1 and backend == "compiled":
        with ThreadPoolExecutor(cfg.workers) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    return out


def summarize(paths: PathResults, S: float, backend: str = BACKEND, keep_paths: bool = False) -> SimOutcome:
    n = paths.dividends.size
    pay = paths.payoff(S)
    n_creep = int(np.count_nonzero(paths.klass == CREEP))
    n_brutal = int(np.count_nonzero(paths.klass == BRUTAL))
    n_surv = int(np.count_nonzero(paths.klass == SURVIVED))
    ruined = paths.klass != SURVIVED
    return SimOutcome(
        mean_value=float(pay.mean()),
        std_err=float(pay.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan,
        creep_prob=n_creep / n,
        brutal_prob=n_brutal / n,
        survival_prob=n_surv / n,
        mean_creep_discount=float(paths.creep_discount.mean()),
        mean_ruin_time=float(paths.ruin_time[ruined].mean()) if ruined.any() else math.nan,
        n_creep=n_creep,
        n_brutal=n_brutal,
        n_survived=n_surv,
        n_paths=n,
        backend=backend,
        paths=paths if keep_paths else None,
    )


def simulate_batch(m: LevyModel, cfg: SimConfig, backend: str | None = None, keep_paths: bool = False) -> SimOutcome:
    paths = simulate_paths(m, cfg, backend)
    return summarize(paths, m.S, backend or BACKEND, keep_paths)


@dataclass
class StrategyComparison:
    thresholds: list[float]
    reference: float
    means: list[float]
    std_errs: list[float]
    diff_vs_reference: list[float]
    diff_std_errs: list[float]
    beats_reference: list[bool]

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def ranking(self) -> list[float]:
        order = sorted(range(len(self.thresholds)), key=lambda i: -self.means[i])
        return [self.thresholds[i] for i in order]


def compare_strategies(
    m: LevyModel,
    x0: float,
    thresholds: Sequence[float],
    cfg: SimConfig,
    reference: float | None = None,
    backend: str | None = None,
) -> StrategyComparison:
    """Rank thresholds under common random numbers.

    Every threshold reuses the same per-path random streams (same seed), so
    paired differences against ``reference`` have small variance.  A
    threshold is flagged when it beats the reference by more than three
    paired standard errors.
    """
    if not thresholds:
        raise InvalidConfig("need at least one threshold")
    if reference is None:
        from .scale import build_scale_pair
        from .threshold import solve_threshold

        sp = build_scale_pair(m)
        reference = solve_threshold(sp, m, diagnostics=False).b_star
    pays = {}
    for b in list(thresholds) + [reference]:
        b = float(b)
        if b not in pays:
            run_cfg = SimConfig(**{**asdict(cfg), "x0": float(x0), "b": b})
            pays[b] = simulate_paths(m, run_cfg, backend).payoff(m.S)
    ref = pays[float(reference)]
    n = ref.size
    means, ses, diffs, dses, flags = [], [], [], [], []
    for b in thresholds:
        p = pays[float(b)]
        d = p - ref
        means.append(float(p.mean()))
        ses.append(float(p.std(ddof=1) / math.sqrt(n)))
        diffs.append(float(d.mean()))
        dse = float(d.std(ddof=1) / math.sqrt(n))
        dses.append(dse)
        flags.append(bool(d.mean() > 3.0 * dse and d.mean() > 0.0))
    return StrategyComparison(
        thresholds=[float(b) for b in thresholds],
        reference=float(reference),
        means=means,
        std_errs=ses,
        diff_vs_reference=diffs,
        diff_std_errs=dses,
        beats_reference=flags,
    )
