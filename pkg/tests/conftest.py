import math

import numpy as np
import pytest

from creepdiv import LevyModel, build_scale_pair, solve_threshold, validate_assumptions
from creepdiv.levy_model import right_inverse, window_upper

# Worked example: drift 2, unit volatility, unit-rate Exp(0.5) claims.
WORKED = dict(c=2.0, sigma=1.0, jumps=((1.0, 0.5),), q=4.0, delta=1.8, S=0.05)


def worked_model(**changes) -> LevyModel:
    return LevyModel(**{**WORKED, **changes})


def random_model(rng: np.random.Generator, interior: bool = True, max_phases: int = 3) -> LevyModel:
    """A model satisfying every standing assumption; ``interior`` puts S inside the window."""
    while True:
        n = int(rng.integers(0, max_phases + 1))
        rates = np.sort(rng.uniform(0.3, 4.0, n))
        if n > 1 and np.min(np.diff(rates)) < 0.05:
            continue
        jumps = tuple((float(rng.uniform(0.1, 2.0)), float(p)) for p in rates)
        c = float(rng.uniform(0.5, 3.0))
        base = LevyModel(
            c=c,
            sigma=float(rng.uniform(0.4, 1.5)),
            jumps=jumps,
            q=float(rng.uniform(0.3, 5.0)),
            delta=float(rng.uniform(0.2, 0.95) * c),
            S=1e-3,
        )
        phi = right_inverse(base, "Y")
        upper = window_upper(base, phi)
        cap = base.c / (base.jump_mass + base.q)
        if not (math.isfinite(upper) and upper > 1e-3):
            continue
        if interior:
            S = float(rng.uniform(0.05, 0.9) * min(upper, cap))
        else:
            lo, hi = upper, cap
            if hi <= lo * 1.01:
                continue
            S = float(rng.uniform(lo * 1.01, hi * 0.99))
        m = base.with_(S=S)
        if validate_assumptions(m).ok:
            return m


def random_models(n: int, seed: int, **kw) -> list[LevyModel]:
    rng = np.random.default_rng(seed)
    return [random_model(rng, **kw) for _ in range(n)]


@pytest.fixture(scope="session")
def m4():
    return worked_model()


@pytest.fixture(scope="session")
def sp4(m4):
    return build_scale_pair(m4)


@pytest.fixture(scope="session")
def sol4(sp4, m4):
    return solve_threshold(sp4, m4)
