"""Numerical checks of S-curve models shared by the unit and acceptance tests."""

from __future__ import annotations

import mpmath as mp
import numpy as np

from stratqec.scurve import SCurveModel, eval_f, y_closed_form, y_derivatives

AXIOM_S = (0.25, 1.0 / 3.0, 0.5, 1.0, 2.0)


def random_model(rng: np.random.Generator, variant: str) -> SCurveModel:
    t = int(rng.integers(0, 8))
    if variant == "ibm":
        return SCurveModel("ibm", t, float(10 ** rng.uniform(-4, 0)), float(rng.uniform(1.2, 8.0)),
                           float(rng.uniform(t + 1, t + 40)))
    s = 0.5 if variant == "ours" else float(AXIOM_S[int(rng.integers(len(AXIOM_S)))])
    return SCurveModel(variant, t, float(rng.uniform(-20, 120)), float(rng.uniform(1.0, 40.0)),
                       float(rng.uniform(0.5, 40.0)), s)


def axiom_failures(m: SCurveModel) -> list[str]:
    """Names of the S-curve axioms ``m`` violates (empty when all hold)."""
    bad = []
    if eval_f(m, 0) != 0.0:
        bad.append("zero_at_origin")
    lo = m.t if m.variant != "ibm" else 0.0
    grid = np.linspace(lo, lo + 1e4, 200_001)[1:]
    f = eval_f(m, grid)
    if np.any(f < 0) or np.any(f >= 0.5 + 1e-15):
        bad.append("range")
    df = np.diff(f)
    # strictness is only checkable where f is neither underflowed nor saturated
    resolvable = (f[:-1] > 1e-290) & ((0.5 - f[1:]) > 1e-9)
    if np.any(df < 0) or np.any(df[resolvable] <= 0):
        bad.append("monotone")
    if abs(eval_f(m, 10**6) - 0.5) > 1e-6:
        bad.append("limit")
    # discrete second difference on the integers must change sign exactly once
    w = np.arange(0, int(lo) + 4000, dtype=float)
    fw = eval_f(m, w)
    d2 = fw[2:] - 2 * fw[1:-1] + fw[:-2]
    tol = 1e-13
    signs = np.sign(np.where(np.abs(d2) < tol, 0.0, d2))
    signs = signs[signs != 0]
    if len(signs) == 0 or np.count_nonzero(np.diff(signs)) != 1 or signs[0] < 0:
        bad.append("inflection")
    return bad


def _mp_y(m: SCurveModel, x):
    """Y-curve in mpmath arithmetic, same expression as the package's closed form."""
    if m.variant == "ibm":
        z = 2 * mp.mpf(m.mu) * (x / mp.mpf(m.beta)) ** mp.mpf(m.alpha)
        return -z - mp.log(-mp.expm1(-z))
    return -(x - mp.mpf(m.mu)) / mp.mpf(m.alpha) + mp.mpf(m.beta) * (x - m.t) ** (-mp.mpf(m.s))


def derivative_errors(m: SCurveModel, npts: int = 200) -> tuple[float, float]:
    """Worst relative gap between closed-form and finite-difference y', y'' over (t, t+500].

    The central differences run in 40-digit arithmetic: in double precision the
    linear part of y swamps y'' (for s = 2 and gap 500, y'' is ~1e-12 of |y|),
    so no step size resolves it to 1e-5. The mpmath expression is first checked
    against ``y_closed_form`` at double precision so the reference is the same curve.
    """
    lo = m.t if m.variant != "ibm" else max(m.t, 0)
    w = np.linspace(lo, lo + 500, npts + 1)[1:] + 0.25
    gap = w - (m.t if m.variant != "ibm" else 0.0)
    y1, y2 = y_derivatives(m, w)
    yc = y_closed_form(m, w)
    fd1, fd2 = np.empty_like(w), np.empty_like(w)
    with mp.workdps(40):
        for i, (x, g) in enumerate(zip(w, gap)):
            x, h = mp.mpf(float(x)), mp.mpf(float(g)) * mp.mpf("1e-9")
            lo_, mid, hi_ = _mp_y(m, x - h), _mp_y(m, x), _mp_y(m, x + h)
            if abs(float(mid) - yc[i]) > 1e-12 * max(1.0, abs(yc[i])):
                raise AssertionError(f"mpmath Y disagrees with y_closed_form at w={float(x)}")
            fd1[i] = float((hi_ - lo_) / (2 * h))
            fd2[i] = float((hi_ - 2 * mid + lo_) / h**2)
    return (float(np.max(np.abs(fd1 - y1) / np.abs(fd1))),
            float(np.max(np.abs(fd2 - y2) / np.abs(fd2))))


def continuous_inflections(m: SCurveModel) -> int:
    """Sign changes of f'' for the t-anchored models, from its closed-form sign.

    With f = sigmoid(g) / 2, f'' has the sign of ``(1 - 2 sigmoid(g)) g'^2 + g''``.
    """
    from scipy.special import expit

    x = np.geomspace(1e-4, 5000, 400_000)
    s = m.s
    g = (x + m.t - m.mu) / m.alpha - m.beta * x ** (-s)
    g1 = 1 / m.alpha + s * m.beta * x ** (-s - 1)
    g2 = -s * (s + 1) * m.beta * x ** (-s - 2)
    sign = np.sign((1 - 2 * expit(g)) * g1**2 + g2)
    sign = sign[sign != 0]
    return int(np.count_nonzero(np.diff(sign)))
