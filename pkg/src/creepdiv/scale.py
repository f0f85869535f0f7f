"""q-scale functions of ``X`` and of ``Y = X - delta t`` as exponential sums.

For a hyperexponential claim law ``1 / (psi(theta) - q)`` is rational with
``2 + m`` simple real poles, one in each gap between the claim poles ``-p_i``
plus one below the smallest pole, one in ``(-p_min, 0)`` and the positive
root.  Inverting the partial-fraction expansion gives
``W(x) = sum_k exp(theta_k x) / psi'(theta_k)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import BoundaryMismatch, ModelError, RootIsolationFailure
from .expsum import ExpPolySum
from .levy_model import LevyModel, right_inverse

IDENTITY_RTOL = 1e-8


def _isolate_roots(m: LevyModel, which: str) -> list[float]:
    """All real roots of ``psi(theta) = q``, ascending."""
    q = m.q
    f = lambda t: m.psi(t, which) - q  # noqa: E731
    poles = sorted(m.poles)  # ascending: -p_max ... -p_min

    def near(pole: float, side: int) -> float:
        # step off the pole until the rational part dominates with the right sign
        scale = max(abs(pole), 1.0)
        eps = 1e-12
        want = 1.0 if side > 0 else -1.0
        while eps < 0.5:
            t = pole + side * eps * scale
            if want * f(t) > 0:
                return t
            eps *= 10
        raise RootIsolationFailure(f"no sign change next to pole {pole} ({which})")

    brackets = []
    if poles:
        lo = poles[0] - 1.0
        while f(lo) <= 0:
            lo = poles[0] - 2.0 * (poles[0] - lo)
            if lo < -1e300:
                raise RootIsolationFailure("no root below the smallest pole")
        brackets.append((lo, near(poles[0], -1)))
        for left, right in zip(poles, poles[1:]):
            brackets.append((near(left, +1), near(right, -1)))
        brackets.append((near(poles[-1], +1), 0.0))
    else:
        lo = -1.0
        while f(lo) <= 0:
            lo *= 2.0
            if lo < -1e300:
                raise RootIsolationFailure("no negative root")
        brackets.append((lo, 0.0))

    roots = []
    for a, b in brackets:
        fa, fb = f(a), f(b)
        if fa == 0.0:
            roots.append(a)
            continue
        if fb == 0.0:
            roots.append(b)
            continue
        if fa * fb > 0:
            raise RootIsolationFailure(f"interval ({a}, {b}) does not bracket a root ({which})")
        roots.append(brentq(f, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))
    roots.append(right_inverse(m, which))
    if len(roots) != 2 + len(m.jumps):
        raise RootIsolationFailure(f"expected {2 + len(m.jumps)} roots, found {len(roots)}")
    return roots


def _scale_from_roots(roots: Sequence[float], residues: Sequence[float]) -> ExpPolySum:
    return ExpPolySum(tuple((c, 0, r) for r, c in zip(roots, residues)), vanish_below_zero=True)


def locate_a_star(W: ExpPolySum) -> float:
    """Largest minimiser of ``W'``: the root of ``W''`` on ``(0, inf)``, or 0."""
    W2 = W.derivative().derivative()
    if W2(0.0) >= 0:
        return 0.0
    hi = 1.0
    while W2(hi) <= 0:
        hi *= 2.0
        if hi > 1e6:
            raise RootIsolationFailure("W'' never becomes positive")
    return brentq(W2, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


@dataclass(frozen=True)
class ScalePair:
    W: ExpPolySum
    Wbold: ExpPolySum
    roots_X: tuple[float, ...]
    roots_Y: tuple[float, ...]
    residues_X: tuple[float, ...]
    residues_Y: tuple[float, ...]
    Phi_q: float
    phi_q: float
    a_star: float

    @classmethod
    def from_roots(cls, roots_X, residues_X, roots_Y, residues_Y) -> ScalePair:
        W = _scale_from_roots(roots_X, residues_X)
        return cls(
            W=W,
            Wbold=_scale_from_roots(roots_Y, residues_Y),
            roots_X=tuple(roots_X),
            roots_Y=tuple(roots_Y),
            residues_X=tuple(residues_X),
            residues_Y=tuple(residues_Y),
            Phi_q=max(roots_X),
            phi_q=max(roots_Y),
            a_star=locate_a_star(W),
        )

    def dW(self, k: int) -> ExpPolySum:
        """k-th derivative of ``W`` (k <= 4)."""
        return self._derivs_X[k]

    def dWbold(self, k: int) -> ExpPolySum:
        return self._derivs_Y[k]

    @cached_property
    def _derivs_X(self) -> list[ExpPolySum]:
        out = [self.W]
        for _ in range(4):
            out.append(out[-1].derivative())
        return out

    @cached_property
    def _derivs_Y(self) -> list[ExpPolySum]:
        out = [self.Wbold]
        for _ in range(3):
            out.append(out[-1].derivative())
        return out

    @cached_property
    def Wbar(self) -> ExpPolySum:
        return self.W.antiderivative()

    @cached_property
    def Wbold_bar(self) -> ExpPolySum:
        return self.Wbold.antiderivative()

    def as_dict(self) -> dict:
        return {
            "roots_X": list(self.roots_X),
            "residues_X": list(self.residues_X),
            "roots_Y": list(self.roots_Y),
            "residues_Y": list(self.residues_Y),
            "Phi_q": self.Phi_q,
            "phi_q": self.phi_q,
            "a_star": self.a_star,
            "W": self.W.to_records(),
            "Wbold": self.Wbold.to_records(),
        }


def build_scale_pair(m: LevyModel) -> ScalePair:
    if not m.sigma > 0:
        raise ModelError("scale functions need sigma > 0")
    roots_X = _isolate_roots(m, "X")
    roots_Y = _isolate_roots(m, "Y")
    res_X = [1.0 / m.psi_prime(t, "X") for t in roots_X]
    res_Y = [1.0 / m.psi_prime(t, "Y") for t in roots_Y]
    return ScalePair.from_roots(roots_X, res_X, roots_Y, res_Y)


def expected_boundary_values(m: LevyModel) -> tuple[float, float, float, float]:
    s2 = m.sigma**2
    return (
        0.0,
        2.0 / s2,
        -4.0 * m.c / s2**2,
        4.0 / s2**2 * (m.jump_mass + m.q + 2.0 * m.c**2 / s2),
    )


def boundary_values(sp: ScalePair, m: LevyModel, check: bool = True) -> tuple[float, float, float, float]:
    """``(W(0), W'(0+), W''(0+), W'''(0+))`` from the roots and residues.

    With ``check`` the values are compared against the closed forms in terms
    of ``(c, sigma, Pi(0, inf), q)``; a mismatch means corrupted roots.
    """
    th = np.asarray(sp.roots_X)
    ck = np.asarray(sp.residues_X)
    got = tuple(float(np.sum(ck * th**k)) for k in range(4))
    if check:
        want = expected_boundary_values(m)
        for k, (g, w) in enumerate(zip(got, want)):
            # W(0) = 0 has no natural scale; measure it against the residues themselves
            scale = abs(w) if w != 0.0 else float(np.sum(np.abs(ck * th**k)))
            if abs(g - w) > IDENTITY_RTOL * scale:
                raise BoundaryMismatch(f"derivative {k} at 0+: got {g!r}, expected {w!r}")
    return got


Piece = tuple[float, float, ExpPolySum]


def _jump_integral(pieces: Sequence[Piece], p: float, x: float) -> float:
    # int_0^x f(x - y) p e^{-p y} dy, i.e. int over z in [0, x] of f(z) p e^{-p (x - z)}
    total = 0.0
    for lo, hi, f in pieces:
        a, b = max(lo, 0.0), min(hi, x)
        if b <= a:
            continue
        total += p * f.times_exp(p).integrate(a, b)
    return total * math.exp(-p * x)


def apply_generator(m: LevyModel, f, x: float, below: float = 0.0) -> float:
    """Infinitesimal generator of ``X`` applied to ``f`` at ``x > 0``.

    ``f`` is an ``ExpPolySum`` defined on ``[0, inf)`` or a list of
    ``(lo, hi, ExpPolySum)`` pieces covering ``[0, inf)``.  On the negative
    half-line ``f`` takes the constant value ``below``; the jump density has
    no atoms, so the value assigned at exactly 0 never matters.
    """
    pieces = [(0.0, math.inf, f)] if isinstance(f, ExpPolySum) else list(f)
    local = next((g for lo, hi, g in pieces if lo <= x < hi), pieces[-1][2])
    d1 = local.derivative()
    fx, f1, f2 = local(x), d1(x), d1.derivative()(x)
    out = m.c * f1 + 0.5 * m.sigma**2 * f2
    for lam, p in m.jumps:
        out += lam * (_jump_integral(pieces, p, x) + below * math.exp(-p * x) - fx)
    return out
