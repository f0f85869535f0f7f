"""Selection of the optimal dividend barrier.

``A_S(b)`` is the coefficient that makes the threshold value function the
right one at barrier ``b``; ``theta_S(b)`` is the coefficient that would make
``V'(b) = 1``.  The optimal barrier is the first ``b`` at which ``A_S`` stops
increasing, i.e. where ``A_S`` meets ``theta_S``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import BracketFailure, PoleEvaluation
from .levy_model import LevyModel, window_upper
from .scale import ScalePair

B_TOL = 1e-10
POLE_RTOL = 1e-12
WINDOW_EDGE = 1e-8
N_DIAG = 400


def _half_s2(m: LevyModel) -> float:
    return 0.5 * m.S * m.sigma**2


def A_S_parts(sp: ScalePair, m: LevyModel, b: float) -> tuple[float, float]:
    """Numerator and denominator of ``A_S(b)``, both scaled by ``exp(phi*b)``."""
    phi = sp.phi_q
    num = 1.0 / phi - _half_s2(m) * sp.dW(2).tail_laplace(phi, b, scaled=True)
    den = sp.dW(1).tail_laplace(phi, b, scaled=True)
    return num, den


def A_S(sp: ScalePair, m: LevyModel, b: float) -> float:
    num, den = A_S_parts(sp, m, b)
    return num / den


def A_S_prime(sp: ScalePair, m: LevyModel, b: float) -> float:
    """Derivative of ``A_S`` through its first-order relation with ``theta_S``."""
    num, den = A_S_parts(sp, m, b)
    return sp.dW(1)(b) / den * (num / den - theta_S(sp, m, b))


def theta_S(sp: ScalePair, m: LevyModel, b: float) -> float:
    if b <= 0.0:
        return 0.5 * m.sigma**2 + m.S * m.c
    return (1.0 - _half_s2(m) * sp.dW(2)(b)) / sp.dW(1)(b)


def theta_S_prime(sp: ScalePair, m: LevyModel, b: float) -> float:
    w1, w2, w3 = sp.dW(1)(b), sp.dW(2)(b), sp.dW(3)(b)
    return (-w2 + _half_s2(m) * (w2 * w2 - w1 * w3)) / (w1 * w1)


def g_S(sp: ScalePair, m: LevyModel, b: float) -> float:
    w2, w3 = sp.dW(2)(b), sp.dW(3)(b)
    if abs(w2) < POLE_RTOL * abs(w3):
        raise PoleEvaluation(f"g_S has a pole at b={b} (W'' vanishes)")
    return -_half_s2(m) * w3 / w2


def r_S(sp: ScalePair, m: LevyModel, b: float) -> float:
    w3, w4 = sp.dW(3)(b), sp.dW(4)(b)
    if abs(w3) < POLE_RTOL * abs(w4):
        raise PoleEvaluation(f"r_S has a pole at b={b} (W''' vanishes)")
    return -_half_s2(m) * w4 / w3


def diagnostic_grid(a_star: float) -> np.ndarray:
    return np.geomspace(1e-6, a_star + 5.0, N_DIAG)


def count_sign_changes(values) -> int:
    s = np.sign(np.asarray(values, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


@dataclass
class ThresholdSolution:
    b_star: float
    a_star: float
    a_S_star: float
    A_at_b: float
    theta_at_b: float
    s_window_upper: float
    interior: bool
    near_window_edge: bool = False
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "b_star": self.b_star,
            "a_star": self.a_star,
            "a_S_star": self.a_S_star,
            "A_at_b": self.A_at_b,
            "theta_at_b": self.theta_at_b,
            "s_window_upper": self.s_window_upper,
            "interior": self.interior,
            "near_window_edge": self.near_window_edge,
            "diagnostics": self.diagnostics,
        }


def locate_a_S_star(sp: ScalePair, m: LevyModel) -> float:
    """Peak of ``theta_S``: the sign change of its derivative on ``(0, a*)``."""
    a = sp.a_star
    if a <= 0.0:
        return 0.0
    tp = lambda b: theta_S_prime(sp, m, b)  # noqa: E731
    lo = 1e-12 * max(a, 1.0)
    if tp(lo) <= 0.0:
        return 0.0
    hi = a
    if tp(hi) > 0.0:
        raise BracketFailure(f"theta_S still increasing at a*={a}")
    return brentq(tp, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def _monotonicity(sp: ScalePair, m: LevyModel, a_S_star: float, b_star: float) -> dict:
    grid = diagnostic_grid(sp.a_star)
    theta = np.array([theta_S(sp, m, b) for b in grid])
    A = np.array([A_S(sp, m, b) for b in grid])
    dtheta = np.diff(theta)
    dA = np.diff(A)
    mids = 0.5 * (grid[1:] + grid[:-1])
    # ignore slopes that are at rounding level
    tol = 1e-13 * max(1.0, float(np.max(np.abs(theta))))
    theta_ok = bool(np.all(dtheta[mids < a_S_star] >= -tol) and np.all(dtheta[mids > a_S_star] <= tol))
    A_ok = bool(np.all(dA[mids < b_star] >= -tol) and np.all(dA[mids > b_star] <= tol))
    return {
        "theta_unimodal": theta_ok,
        "A_increasing_then_decreasing": A_ok,
        "grid_points": int(grid.size),
    }


def solve_threshold(sp: ScalePair, m: LevyModel, diagnostics: bool = True) -> ThresholdSolution:
    upper = window_upper(m, sp.phi_q)
    a_S_star = locate_a_S_star(sp, m)
    near_edge = math.isfinite(upper) and abs(m.S - upper) <= WINDOW_EDGE
    interior = math.isfinite(upper) and 0.0 < m.S < upper
    if not interior:
        b_star = 0.0
    else:
        diff = lambda b: A_S(sp, m, b) - theta_S(sp, m, b)  # noqa: E731
        lo = 1e-14 * max(1.0, a_S_star)
        hi = a_S_star
        if not (diff(lo) > 0.0 and hi > lo and diff(hi) <= 0.0):
            raise BracketFailure(
                f"A_S - theta_S has no sign change on (0, a_S*={a_S_star}] although S is inside the window"
            )
        b_star = brentq(diff, lo, hi, xtol=B_TOL * 1e-2, rtol=4 * np.finfo(float).eps, maxiter=500)
        resid = abs(diff(b_star))
        if resid > B_TOL * max(1.0, theta_S(sp, m, b_star)) * 10:
            raise BracketFailure(f"threshold root did not converge (|A_S - theta_S| = {resid})")
    sol = ThresholdSolution(
        b_star=b_star,
        a_star=sp.a_star,
        a_S_star=a_S_star,
        A_at_b=A_S(sp, m, b_star),
        theta_at_b=theta_S(sp, m, b_star),
        s_window_upper=upper,
        interior=interior,
        near_window_edge=near_edge,
    )
    sol.diagnostics["ordering"] = bool(b_star <= a_S_star <= sp.a_star)
    if diagnostics:
        sol.diagnostics.update(_monotonicity(sp, m, a_S_star, b_star))
    return sol


def scan(sp: ScalePair, m: LevyModel, bs) -> list[tuple[float, float, float, float, float]]:
    """Rows ``(b, A_S, theta_S, g_S, r_S)``; poles are reported as NaN."""
    rows = []
    for b in bs:
        b = float(b)
        try:
            g = g_S(sp, m, b)
        except PoleEvaluation:
            g = math.nan
        try:
            r = r_S(sp, m, b)
        except PoleEvaluation:
            r = math.nan
        rows.append((b, A_S(sp, m, b), theta_S(sp, m, b), g, r))
    return rows
