"""Brownian motion with drift minus hyperexponential compound Poisson claims.

The surplus is ``X_t = c t + sigma B_t - sum of claims``, where claims arrive
at total rate ``sum(lambda_i)`` and a claim from phase ``i`` is exponential
with rate ``p_i``.  ``Y_t = X_t - delta t`` is the surplus while dividends are
paid at the maximal rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

from .errors import ModelError, PoleEvaluation

PHASE_RGAP = 1e-8
ROOT_RTOL = 1e-12


@dataclass(frozen=True)
class LevyModel:
    c: float
    sigma: float
    jumps: tuple[tuple[float, float], ...] = ()
    q: float = 1.0
    delta: float = 1.0
    S: float = 0.0

    def __post_init__(self):
        jumps = tuple((float(lam), float(p)) for lam, p in self.jumps)
        object.__setattr__(self, "jumps", jumps)
        for name in ("c", "sigma", "q", "delta", "S"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ModelError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, float(v))
        if self.q <= 0:
            raise ModelError(f"q must be positive, got {self.q}")
        if self.delta <= 0:
            raise ModelError(f"delta must be positive, got {self.delta}")
        if self.sigma < 0:
            raise ModelError(f"sigma must be non-negative, got {self.sigma}")
        for lam, p in jumps:
            if not (lam > 0 and p > 0 and math.isfinite(lam) and math.isfinite(p)):
                raise ModelError(f"jump phase needs lambda > 0 and p > 0, got ({lam}, {p})")
        ps = sorted(p for _, p in jumps)
        for lo, hi in zip(ps, ps[1:]):
            if hi - lo < PHASE_RGAP * hi:
                raise ModelError(f"jump rates {lo} and {hi} coincide; merge the phases first")

    @property
    def jump_mass(self) -> float:
        """Total Levy mass, i.e. the claim arrival rate."""
        return sum(lam for lam, _ in self.jumps)

    @property
    def poles(self) -> tuple[float, ...]:
        """Poles ``-p_i`` of the Laplace exponent, descending."""
        return tuple(sorted((-p for _, p in self.jumps), reverse=True))

    def with_(self, **changes) -> LevyModel:
        params = dict(c=self.c, sigma=self.sigma, jumps=self.jumps, q=self.q, delta=self.delta, S=self.S)
        params.update(changes)
        return LevyModel(**params)

    def drift(self, which: str) -> float:
        return self.c if which == "X" else self.c - self.delta

    def psi(self, theta: float, which: Literal["X", "Y"] = "X") -> float:
        total = self.drift(which) * theta + 0.5 * self.sigma**2 * theta**2
        for lam, p in self.jumps:
            if p + theta == 0.0:
                raise PoleEvaluation(f"Laplace exponent has a pole at {theta}")
            total -= lam * theta / (p + theta)
        return total

    def psi_prime(self, theta: float, which: Literal["X", "Y"] = "X") -> float:
        total = self.drift(which) + self.sigma**2 * theta
        for lam, p in self.jumps:
            if p + theta == 0.0:
                raise PoleEvaluation(f"Laplace exponent has a pole at {theta}")
            total -= lam * p / (p + theta) ** 2
        return total


def psi_X(m: LevyModel, theta: float) -> float:
    return m.psi(theta, "X")


def psi_Y(m: LevyModel, theta: float) -> float:
    return m.psi(theta, "Y")


def right_inverse(m: LevyModel, which: Literal["X", "Y"] = "X") -> float:
    """Largest root of ``psi(theta) = q``, which is the unique positive one.

    Safeguarded Newton: every iterate stays inside a bisection bracket, so
    convexity of the exponent on ``[0, inf)`` guarantees convergence.
    """
    q = m.q
    lo, hi = 0.0, 1.0
    while m.psi(hi, which) <= q:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise ModelError("Laplace exponent never reaches q")
    tol = ROOT_RTOL * max(1.0, q)
    theta = hi
    for _ in range(200):
        f = m.psi(theta, which) - q
        if abs(f) < tol:
            return theta
        if f > 0:
            hi = theta
        else:
            lo = theta
        d = m.psi_prime(theta, which)
        step = theta - f / d if d > 0 else None
        theta = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4 * math.ulp(hi):
            return theta
    return theta


@dataclass
class AssumptionReport:
    sigma_positive: bool
    phi_bound: bool
    finite_mass: bool
    s_mass_bound: bool
    s_window_upper: float
    s_in_window: bool
    drift_gap_positive: bool
    phi_q: float
    S_positive: bool = True
    messages: list[str] = field(default_factory=list)

    @property
    def structural_ok(self) -> bool:
        return self.sigma_positive and self.finite_mass

    @property
    def ok(self) -> bool:
        """All clauses of the model assumption hold (window excluded)."""
        return self.sigma_positive and self.phi_bound and self.finite_mass and self.s_mass_bound and self.S_positive

    def as_dict(self) -> dict:
        return {
            "sigma_positive": self.sigma_positive,
            "phi_bound": self.phi_bound,
            "finite_mass": self.finite_mass,
            "s_mass_bound": self.s_mass_bound,
            "S_positive": self.S_positive,
            "drift_gap_positive": self.drift_gap_positive,
            "s_window_upper": self.s_window_upper,
            "s_in_window": self.s_in_window,
            "phi_q": self.phi_q,
            "messages": list(self.messages),
        }


def window_upper(m: LevyModel, phi_q: float) -> float:
    """Upper end of the terminal-value window giving a strictly positive threshold."""
    denom = m.c - m.delta + 0.5 * m.sigma**2 * phi_q
    if denom <= 0:
        return math.nan
    return (m.delta / phi_q - 0.5 * m.sigma**2) / denom


def validate_assumptions(m: LevyModel) -> AssumptionReport:
    msgs = []
    sigma_ok = m.sigma > 0
    if not sigma_ok:
        msgs.append("sigma must be positive: without a Gaussian part the surplus never creeps")
    finite = math.isfinite(m.jump_mass)
    phi_q = right_inverse(m, "Y")
    phi_ok = sigma_ok and phi_q < 2 * m.delta / m.sigma**2
    if sigma_ok and not phi_ok:
        msgs.append(f"phi(q)={phi_q:.9g} is not below 2*delta/sigma^2={2 * m.delta / m.sigma**2:.9g}")
    mass_cap = m.c / (m.jump_mass + m.q)
    s_mass = m.S < mass_cap
    if not s_mass:
        msgs.append(f"S={m.S:.9g} is not below c/(Pi(0,inf)+q)={mass_cap:.9g}")
    s_pos = m.S > 0
    if not s_pos:
        msgs.append(f"S must be positive, got {m.S:.9g}")
    gap = m.c - m.delta + 0.5 * m.sigma**2 * phi_q
    upper = window_upper(m, phi_q)
    in_window = s_pos and math.isfinite(upper) and m.S < upper
    if not in_window:
        msgs.append(f"S={m.S:.9g} is outside the window (0, {upper:.9g}); the optimal threshold is 0")
    return AssumptionReport(
        sigma_positive=sigma_ok,
        phi_bound=phi_ok,
        finite_mass=finite,
        s_mass_bound=s_mass,
        s_window_upper=upper,
        s_in_window=in_window,
        drift_gap_positive=gap > 0,
        phi_q=phi_q,
        messages=msgs,
        S_positive=s_pos,
    )
