"""Closed-form algebra on sums of ``coeff * x**power * exp(rate * x)`` terms.

Every scale function, derivative, convolution and value function produced by
this package lives in this class of functions, so the operations here are
exact up to floating point: differentiation, integration, Laplace tails and
truncated convolutions never fall back to quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DivergentIntegral, ExpSumError

MAX_POWER = 8
PRUNE_RTOL = 1e-14
RATE_FLOOR = 1e-12
TAYLOR_HORIZON = 40.0
TAYLOR_TOL = 1e-12
DECAY_MARGIN = 1e-12

Term = tuple[float, int, float]


def _canonical(terms: Iterable[Sequence[float]]) -> tuple[Term, ...]:
    merged: dict[tuple[int, float], float] = {}
    for coeff, power, rate in terms:
        power = int(power)
        if power < 0:
            raise ExpSumError(f"negative power {power}")
        if power > MAX_POWER:
            raise ExpSumError(f"power {power} exceeds cap {MAX_POWER}")
        rate = float(rate)
        if abs(rate) < RATE_FLOOR:
            rate = 0.0
        key = (power, rate)
        merged[key] = merged.get(key, 0.0) + float(coeff)
    if not merged:
        return ()
    scale = max(abs(c) for c in merged.values())
    cut = PRUNE_RTOL * scale
    kept = [(c, n, r) for (n, r), c in merged.items() if abs(c) > cut]
    kept.sort(key=lambda t: (t[2], t[1]))
    return tuple(kept)


@dataclass(frozen=True)
class ExpPolySum:
    """Finite sum of ``c * x**n * exp(r * x)`` terms.

    ``vanish_below_zero`` marks scale-type functions, which are identically
    zero on the negative half-line.
    """

    terms: tuple[Term, ...] = ()
    vanish_below_zero: bool = False
    _arrays: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = _canonical(self.terms)
        object.__setattr__(self, "terms", terms)
        c = np.array([t[0] for t in terms], dtype=float)
        n = np.array([t[1] for t in terms], dtype=float)
        r = np.array([t[2] for t in terms], dtype=float)
        object.__setattr__(self, "_arrays", (c, n, r))

    # construction helpers

    @classmethod
    def constant(cls, value: float, vanish_below_zero: bool = False) -> ExpPolySum:
        return cls(((value, 0, 0.0),), vanish_below_zero)

    @classmethod
    def exponential(cls, coeff: float, rate: float, vanish_below_zero: bool = False) -> ExpPolySum:
        return cls(((coeff, 0, rate),), vanish_below_zero)

    @classmethod
    def from_records(cls, records: Iterable[dict], vanish_below_zero: bool = False) -> ExpPolySum:
        return cls(
            tuple((float(r["coeff"]), int(r["power"]), float(r["rate"])) for r in records),
            vanish_below_zero,
        )

    def to_records(self) -> list[dict]:
        return [{"coeff": c, "power": n, "rate": r} for c, n, r in self.terms]

    def _like(self, terms) -> ExpPolySum:
        return ExpPolySum(tuple(terms), self.vanish_below_zero)

    # evaluation

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        """Evaluate at a scalar or array ``x``."""
        c, n, r = self._arrays
        xa = np.asarray(x, dtype=float)
        flat = xa.reshape(-1, 1)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = (c * flat**n * np.exp(r * flat)).sum(axis=1) if c.size else np.zeros(flat.shape[0])
        if self.vanish_below_zero:
            vals = np.where(flat[:, 0] < 0.0, 0.0, vals)
        vals = vals.reshape(xa.shape)
        return float(vals) if vals.ndim == 0 else vals

    @property
    def max_power(self) -> int:
        return max((t[1] for t in self.terms), default=0)

    @property
    def rates(self) -> tuple[float, ...]:
        return tuple(sorted({t[2] for t in self.terms}))

    # algebra

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = ExpPolySum.constant(float(other))
        if not isinstance(other, ExpPolySum):
            return NotImplemented
        return self._like(self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self):
        return self._like((-c, n, r) for c, n, r in self.terms)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = ExpPolySum.constant(float(other))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return self._like((float(other) * c, n, r) for c, n, r in self.terms)
        if isinstance(other, ExpPolySum):
            return ExpPolySum(
                tuple(
                    (c1 * c2, n1 + n2, r1 + r2)
                    for c1, n1, r1 in self.terms
                    for c2, n2, r2 in other.terms
                ),
                self.vanish_below_zero or other.vanish_below_zero,
            )
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other: float):
        return self * (1.0 / float(other))

    def times_exp(self, rate: float) -> ExpPolySum:
        """Multiply by ``exp(rate * x)``."""
        return self._like((c, n, r + rate) for c, n, r in self.terms)

    def shift(self, b: float) -> ExpPolySum:
        """Return ``x -> f(x - b)`` expanded in powers of ``x``.

        The result ignores ``vanish_below_zero`` (it is only meaningful for
        ``x >= b``) and is returned without the flag.
        """
        out = []
        for c, n, r in self.terms:
            base = c * math.exp(-r * b)
            for k in range(n + 1):
                out.append((base * math.comb(n, k) * (-b) ** (n - k), k, r))
        return ExpPolySum(tuple(out))

    def is_close(self, other: ExpPolySum, atol: float = 1e-12) -> bool:
        diff = (self - other).terms
        return all(abs(c) <= atol for c, _, _ in diff)

    # calculus

    def derivative(self) -> ExpPolySum:
        out = []
        for c, n, r in self.terms:
            if r != 0.0:
                out.append((c * r, n, r))
            if n > 0:
                out.append((c * n, n - 1, r))
        return self._like(out)

    def antiderivative(self) -> ExpPolySum:
        """Antiderivative ``F`` with ``F(0) = 0``."""
        out = []
        for c, n, r in self.terms:
            for k, p, shifted in _power_exp_integral(n, r, 0.0, MAX_POWER):
                out.append((c * k, p, r if shifted else 0.0))
        return self._like(out)

    def integrate(self, lo: float, hi: float) -> float:
        """Definite integral over ``[lo, hi]`` of the analytic expression."""
        F = ExpPolySum(self.antiderivative().terms)
        return F.eval(hi) - F.eval(lo)

    def tail_laplace(self, phi: float, b: float, scaled: bool = False) -> float:
        """``int_b^inf exp(-phi*y) f(y) dy`` in closed form.

        With ``scaled=True`` the result is multiplied by ``exp(phi*b)``, which
        keeps it O(1) for large ``b``.
        """
        total = 0.0
        for c, n, r in self.terms:
            decay = phi - r
            if decay < DECAY_MARGIN:
                raise DivergentIntegral(f"rate {r} is not below phi={phi}")
            fact = math.factorial(n)
            poly = sum(fact / math.factorial(k) * b**k / decay ** (n - k + 1) for k in range(n + 1))
            weight = math.exp(r * b) if scaled else math.exp(-decay * b)
            total += c * weight * poly
        return total

    def convolve_on(self, h: ExpPolySum, b: float = 0.0) -> ExpPolySum:
        """The function ``x -> int_b^x self(x - y) h(y) dy`` for ``x >= b``."""
        return convolve_on(self, h, b)


def _taylor_order(gamma: float, room: int) -> int | None:
    """Smallest order whose Taylor remainder for ``exp(gamma*y)`` stays below
    ``TAYLOR_TOL`` on ``[0, TAYLOR_HORIZON]``; ``None`` if ``room`` is too small."""
    z = abs(gamma) * TAYLOR_HORIZON
    if z == 0.0:
        return 0
    term = 1.0
    for k in range(room + 1):
        term *= z / (k + 1)
        if term <= TAYLOR_TOL:
            return k
    return None


def _power_exp_integral(big_n: int, gamma: float, b: float, cap: int) -> list[tuple[float, int, bool]]:
    """``x -> int_b^x y^N exp(gamma y) dy`` as ``(coeff, power, carries exp(gamma x))`` terms.

    Small ``gamma`` is expanded in a Taylor series (powers stay within
    ``cap``) because the exact form divides by ``gamma**(N+1)`` and cancels
    catastrophically.
    """
    order = _taylor_order(gamma, cap - big_n - 1)
    out = []
    if order is not None:
        gk = 1.0
        for k in range(order + 1):
            e = big_n + k + 1
            out.append((gk / e, e, False))
            if b != 0.0:
                out.append((-gk * b**e / e, 0, False))
            gk *= gamma / (k + 1)
        return out
    fact = math.factorial(big_n)
    qb = 0.0
    for k in range(big_n + 1):
        ck = (-1) ** (big_n - k) * fact / (math.factorial(k) * gamma ** (big_n - k + 1))
        out.append((ck, k, True))
        qb += ck * b**k
    out.append((-qb * math.exp(gamma * b), 0, False))
    return out


def convolve_on(g: ExpPolySum, h: ExpPolySum, b: float = 0.0) -> ExpPolySum:
    """Closed form of ``x -> int_b^x g(x - y) h(y) dy``, valid for ``x >= b``.

    Each pair of terms reduces to ``int_b^x y^N exp((beta - alpha) y) dy``;
    nearly equal rates go through a Taylor expansion in the rate gap rather
    than dividing by it.
    """
    out: list[Term] = []
    for a, m, alpha in g.terms:
        for ch, n, beta in h.terms:
            gamma = beta - alpha
            for j in range(m + 1):
                w = a * ch * math.comb(m, j) * (-1) ** j
                # w * x^(m-j) e^(alpha x) * int_b^x y^(n+j) e^(gamma y) dy
                for c, p, shifted in _power_exp_integral(n + j, gamma, b, MAX_POWER - (m - j)):
                    out.append((w * c, m - j + p, beta if shifted else alpha))
    return ExpPolySum(tuple(out))
