"""Value of the threshold strategy, its derivatives, and optimality checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HJBViolation
from .expsum import ExpPolySum
from .levy_model import LevyModel
from .scale import ScalePair, apply_generator
from .threshold import A_S

PASTE_TOL = 1e-6
HJB_TOL = 1e-6
B_EXCLUSION = 1e-4
CANCEL_RTOL = 1e-9


def _sum_bounded(parts: list[ExpPolySum]) -> ExpPolySum:
    """Sum ``parts`` for a function known to stay bounded on ``[0, inf)``.

    Growing exponentials cancel exactly between the parts; whatever survives
    the merge at rounding level is removed so it cannot blow up for large x.
    """
    scale: dict[float, float] = {}
    for f in parts:
        for c, _, r in f.terms:
            if r > 0.0:
                scale[r] = scale.get(r, 0.0) + abs(c)
    total = ExpPolySum(sum((f.terms for f in parts), ()))
    kept = [t for t in total.terms if t[2] <= 0.0 or abs(t[0]) > CANCEL_RTOL * scale[t[2]]]
    return ExpPolySum(tuple(kept))


@dataclass(frozen=True)
class ValueFunction:
    """Piecewise closed form of the threshold-strategy value.

    ``below`` represents the value on ``[0, b]`` and ``above`` on ``(b, inf)``;
    both are expressed in the absolute variable ``x``.
    """

    b: float
    below: ExpPolySum
    above: ExpPolySum
    A_b: float
    m: LevyModel = field(repr=False)
    sp: ScalePair = field(repr=False)

    def _piece(self, x: float, side: str = "auto") -> ExpPolySum:
        if side == "below":
            return self.below
        if side == "above":
            return self.above
        return self.below if x <= self.b else self.above

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.where(xa <= self.b, self.below(xa), self.above(xa))
        out = np.where(xa < 0.0, 0.0, out)
        return float(out) if out.ndim == 0 else out

    @property
    def pieces(self):
        return [(0.0, self.b, self.below), (self.b, math.inf, self.above)]

    def derivative_pieces(self, k: int) -> tuple[ExpPolySum, ExpPolySum]:
        lo, hi = self.below, self.above
        for _ in range(k):
            lo, hi = lo.derivative(), hi.derivative()
        return lo, hi


def build_value(sp: ScalePair, m: LevyModel, b: float, reduced_at_zero: bool = True) -> ValueFunction:
    """Assemble the threshold value function for barrier ``b``.

    For ``b = 0`` the reduced form in terms of the scale function of ``Y``
    alone is used unless ``reduced_at_zero`` is false.
    """
    b = float(b)
    h = 0.5 * m.S * m.sigma**2
    A = A_S(sp, m, b)
    W, W1, W2 = sp.dW(0), sp.dW(1), sp.dW(2)
    below = ExpPolySum((h * W1 + A * W).terms)
    if b == 0.0 and reduced_at_zero:
        Wb = sp.Wbold
        above = _sum_bounded([h * Wb.derivative(), (A - m.S * m.delta) * Wb, -m.delta * sp.Wbold_bar])
    else:
        d = m.delta
        above = _sum_bounded(
            [
                h * W1,
                (h * d) * sp.Wbold.convolve_on(W2, b),
                A * W,
                (A * d) * sp.Wbold.convolve_on(W1, b),
                -d * sp.Wbold_bar.shift(b),
            ]
        )
    return ValueFunction(b=b, below=below, above=above, A_b=A, m=m, sp=sp)


def value_derivatives(vf: ValueFunction, x: float, side: str = "auto") -> tuple[float, float]:
    """``(V'(x), V''(x))``; ``side`` picks a one-sided limit at the barrier."""
    f = vf._piece(x, side)
    d1 = f.derivative()
    return d1(x), d1.derivative()(x)


def generator_residual(vf: ValueFunction, x: float) -> float:
    """``(G - q) V(x) + max(0, delta (1 - V'(x)))``; non-positive for an HJB solution."""
    m = vf.m
    v1, _ = value_derivatives(vf, x)
    gen = apply_generator(m, vf.pieces, x) - m.q * vf(x)
    return gen + max(0.0, m.delta * (1.0 - v1))


@dataclass
class HJBReport:
    b: float
    grid: np.ndarray
    V1: np.ndarray
    residual: np.ndarray
    gradient_violations: list[float]
    generator_violations: list[float]
    tol: float

    @property
    def ok(self) -> bool:
        return not self.gradient_violations and not self.generator_violations

    def raise_if_failed(self):
        if not self.ok:
            pts = sorted(set(self.gradient_violations) | set(self.generator_violations))
            raise HJBViolation(f"HJB inequalities fail at {len(pts)} grid point(s)", pts)


def hjb_verify(vf: ValueFunction, grid, tol: float = HJB_TOL, strict: bool = False) -> HJBReport:
    """Check the variational inequality on ``grid``.

    Gradient condition: ``V' >= 1`` on ``(0, b]`` and ``V' <= 1`` above ``b``.
    Generator condition: ``generator_residual <= tol * (1 + q|V|)`` away from
    a small neighbourhood of the barrier, where ``V'''`` may jump.
    """
    grid = np.asarray(grid, dtype=float)
    m = vf.m
    V1 = np.empty_like(grid)
    res = np.full_like(grid, np.nan)
    grad_bad, gen_bad = [], []
    for i, x in enumerate(grid):
        V1[i], _ = value_derivatives(vf, x)
        if x <= vf.b and V1[i] < 1.0 - tol:
            grad_bad.append(float(x))
        if x > vf.b and V1[i] > 1.0 + tol:
            grad_bad.append(float(x))
        if abs(x - vf.b) <= B_EXCLUSION:
            continue
        res[i] = generator_residual(vf, x)
        if res[i] > tol * (1.0 + m.q * abs(vf(x))):
            gen_bad.append(float(x))
    report = HJBReport(vf.b, grid, V1, res, grad_bad, gen_bad, tol)
    if strict:
        report.raise_if_failed()
    return report


def p_S(vf: ValueFunction, z: float) -> float:
    """Weight function of the spectral representation of ``V'`` above the barrier."""
    m, sp, b = vf.m, vf.sp, vf.b
    h = 0.5 * m.S * m.sigma**2
    d = m.delta
    i2 = sp.dW(2).times_exp(z).integrate(0.0, b)
    i1 = sp.dW(1).times_exp(z).integrate(0.0, b)
    return (
        -h * (z * z + d * 2.0 / m.sigma**2 * z + d * z * i2)
        + d * math.exp(b * z)
        + vf.A_b * (z - d * z * i1)
    )


def spectral_atoms(sp: ScalePair) -> list[tuple[float, float]]:
    """``(z_j, xi_j)`` such that ``Wbold(x) = lead * exp(phi x) - sum xi_j exp(-z_j x)``."""
    atoms = []
    for c, n, r in sp.Wbold.terms:
        if r == sp.phi_q:
            continue
        atoms.append((-r, -c))
    return atoms


def spectral_V1(vf: ValueFunction, x: float) -> float:
    """``V'(x)`` above the barrier from the atomic form ``sum p_S(z) xi e^{-x z}``."""
    return sum(xi * p_S(vf, z) * math.exp(-x * z) for z, xi in spectral_atoms(vf.sp))
