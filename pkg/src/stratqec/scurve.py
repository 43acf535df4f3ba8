"""S-curve models of the logical error rate as a function of fault weight.

Three model families are supported:

* ``ours`` and ``generalized``:
  ``f(w) = 1/2 * 1/(1 + exp(-(w - mu)/alpha + beta/(w - t)**s))`` for
  ``w > t`` and 0 otherwise (``ours`` fixes ``s = 1/2``);
* ``ibm``: ``f(w) = 1/2 * (1 - exp(-2 mu (w/beta)**alpha))``.

Fitting works on the Y-curve ``y = ln(1/(2f) - 1)``, where the first family
is linear in its parameters.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

VARIANTS = ("ours", "ibm", "generalized")
W_SCAN_LIMIT = 10**6


class DomainError(ValueError):
    pass


class InsufficientData(ValueError):
    pass


class FitDiverged(RuntimeError):
    pass


class SaturationNotReached(UserWarning):
    pass


@dataclass(frozen=True)
class SCurveModel:
    variant: str
    t: int
    mu: float
    alpha: float
    beta: float
    s: float = 0.5

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "ours" and self.s != 0.5:
            raise ValueError("the 'ours' variant fixes s = 1/2")
        if self.t < 0:
            raise ValueError("t must be >= 0")
        if self.alpha <= 0 or self.beta <= 0 or self.s <= 0:
            raise ValueError("alpha, beta and s must be positive")
        if self.variant == "ibm" and self.mu <= 0:
            raise ValueError("mu must be positive for the ibm variant")

    @classmethod
    def ours(cls, t: int, mu: float, alpha: float, beta: float) -> SCurveModel:
        return cls("ours", t, mu, alpha, beta)

    @property
    def label(self) -> str:
        return f"generalized:{self.s:g}" if self.variant == "generalized" else self.variant

    def __call__(self, w):
        return eval_f(self, w)

    def to_dict(self) -> dict:
        return {"variant": self.variant, "t": self.t, "mu": self.mu, "alpha": self.alpha,
                "beta": self.beta, "s": self.s}

    @classmethod
    def from_dict(cls, d: dict) -> SCurveModel:
        return cls(d["variant"], int(d["t"]), float(d["mu"]), float(d["alpha"]),
                   float(d["beta"]), float(d.get("s", 0.5)))


def parse_variant(text: str) -> tuple[str, float]:
    """``"ours"``, ``"ibm"`` or ``"generalized:<s>"`` (s may be a fraction like 1/3)."""
    if text in ("ours", "ibm"):
        return text, 0.5
    if text.startswith("generalized:"):
        raw = text.split(":", 1)[1]
        if "/" in raw:
            num, den = raw.split("/", 1)
            s = float(num) / float(den)
        else:
            s = float(raw)
        if s <= 0:
            raise ValueError("s must be positive")
        return "generalized", s
    raise ValueError(f"unknown variant {text!r}")


# ---------------------------------------------------------------- evaluation


def _ibm_z(m: SCurveModel, w):
    return 2.0 * m.mu * np.power(np.asarray(w, dtype=float) / m.beta, m.alpha)


def eval_f(m: SCurveModel, w):
    """Model value at ``w`` (scalar or array), always in ``[0, 0.5)``."""
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr < 0):
        raise DomainError("w must be >= 0")
    if m.variant == "ibm":
        out = -0.5 * np.expm1(-_ibm_z(m, w_arr))
    else:
        gap = w_arr - m.t
        active = gap > 0
        safe = np.where(active, gap, 1.0)
        arg = (w_arr - m.mu) / m.alpha - m.beta * np.power(safe, -m.s)
        out = np.where(active, 0.5 * expit(arg), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def y_transform(f_value):
    """``ln(1/(2f) - 1)``; defined for ``0 < f < 0.5``."""
    f_arr = np.asarray(f_value, dtype=float)
    if np.any(f_arr <= 0) or np.any(f_arr >= 0.5):
        raise DomainError("Y-transform needs 0 < f < 0.5")
    out = np.log1p(-2.0 * f_arr) - np.log(2.0 * f_arr)
    return float(out) if np.ndim(out) == 0 else out


def y_closed_form(m: SCurveModel, w):
    """Y-curve of the model without going through ``f`` (exact for large |y|)."""
    w_arr = np.asarray(w, dtype=float)
    if m.variant == "ibm":
        z = _ibm_z(m, w_arr)
        out = -z - np.log(-np.expm1(-z))
    else:
        if np.any(w_arr <= m.t):
            raise DomainError("Y-curve is only defined for w > t")
        out = -(w_arr - m.mu) / m.alpha + m.beta * np.power(w_arr - m.t, -m.s)
    return float(out) if np.ndim(out) == 0 else out


def y_derivatives(m: SCurveModel, w):
    """First and second derivatives of the Y-curve at ``w``."""
    w_arr = np.asarray(w, dtype=float)
    if m.variant == "ibm":
        if np.any(w_arr <= 0):
            raise DomainError("ibm Y-curve derivatives need w > 0")
        z = _ibm_z(m, w_arr)
        one_minus = -np.expm1(-z)
        dz = m.alpha * z / w_arr
        d2z = m.alpha * (m.alpha - 1.0) * z / w_arr**2
        y1 = -dz / one_minus
        y2 = -d2z / one_minus + dz**2 * np.exp(-z) / one_minus**2
    else:
        if np.any(w_arr <= m.t):
            raise DomainError("Y-curve derivatives need w > t")
        gap = w_arr - m.t
        y1 = -1.0 / m.alpha - m.beta * m.s * np.power(gap, -m.s - 1.0)
        y2 = m.beta * m.s * (m.s + 1.0) * np.power(gap, -m.s - 2.0)
    if np.ndim(y1) == 0:
        return float(y1), float(y2)
    return y1, y2


# ---------------------------------------------------------------- w_sweet / w_sat


def compute_w_sweet(m: SCurveModel, gamma: float = 1.0, limit: int = W_SCAN_LIMIT) -> int:
    """Largest integer ``w > t`` with ``y''(w) >= gamma * |y'(w)|``.

    The integer scan starts at ``t + 1`` and stops at the first failure.
    If even ``t + 1`` fails, ``t + 1`` is returned.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    w = m.t + 1
    if m.variant == "ibm":
        w = max(w, 1)
    best = w
    while w <= limit:
        y1, y2 = y_derivatives(m, w)
        if y2 < gamma * abs(y1):
            break
        best = w
        w += 1
    return best


def compute_w_sat(m: SCurveModel, limit: int = W_SCAN_LIMIT) -> int:
    """Largest integer ``w`` with ``f(w) < 0.25`` (bisection; f is monotone)."""
    if eval_f(m, limit) < 0.25:
        warnings.warn(f"f stays below 0.25 up to w={limit}", SaturationNotReached, stacklevel=2)
        return limit
    lo, hi = 0, limit  # f(lo) < 0.25 <= f(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if eval_f(m, mid) < 0.25:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------- fitting


@dataclass(frozen=True)
class DataPoint:
    weight: int
    p_hat: float
    n_samples: int


@dataclass
class FitResult:
    model: SCurveModel
    r_squared_y: float
    r_squared_p: float
    residuals: list[float]
    data: list[DataPoint]
    weighted: bool = True
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "variant": self.model.label,
            "t": self.model.t,
            "params": {"mu": self.model.mu, "alpha": self.model.alpha, "beta": self.model.beta},
            "s": self.model.s,
            "model": self.model.to_dict(),
            "r_squared_y": self.r_squared_y,
            "r_squared_p": self.r_squared_p,
            "residuals": list(self.residuals),
            "data": [{"weight": d.weight, "p_hat": d.p_hat, "samples": d.n_samples} for d in self.data],
            "weighted": self.weighted,
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> FitResult:
        return cls(
            SCurveModel.from_dict(d["model"]), float(d["r_squared_y"]), float(d["r_squared_p"]),
            [float(x) for x in d["residuals"]],
            [DataPoint(int(p["weight"]), float(p["p_hat"]), int(p["samples"])) for p in d["data"]],
            bool(d.get("weighted", True)), list(d.get("flags", [])),
        )


def _points(data: Iterable) -> list[DataPoint]:
    out = []
    for item in data:
        if isinstance(item, DataPoint):
            out.append(item)
        elif hasattr(item, "num_samples"):
            out.append(DataPoint(int(item.weight), float(item.p_hat), int(item.num_samples)))
        else:
            w, p, n = item
            out.append(DataPoint(int(w), float(p), int(n)))
    return out


def _usable(points: Sequence[DataPoint], variant: str, t: int) -> list[DataPoint]:
    keep = [pt for pt in points if 0.0 < pt.p_hat < 0.5]
    if variant != "ibm":
        keep = [pt for pt in keep if pt.weight > t]
    return keep


def y_weight(p_hat: float, n_samples: int) -> float:
    """Inverse of the delta-method variance of ``y(p_hat)``.

    ``Var[y] ~ (1 - p) / (n p (1 - 2p)^2)``, so points with many errors
    count more and points near ``p = 1/2`` (where y flattens out) less.
    """
    p = p_hat
    return n_samples * p * (1.0 - 2.0 * p) ** 2 / (1.0 - p)


def r_squared(data: Iterable, m: SCurveModel, domain: str = "y") -> float:
    """Coefficient of determination of ``m`` on ``data`` in the Y or P domain."""
    pts = _points(data)
    if domain == "y":
        pts = _usable(pts, m.variant, m.t)
        obs = np.array([y_transform(pt.p_hat) for pt in pts]) if pts else np.zeros(0)
        pred = np.array([y_closed_form(m, pt.weight) for pt in pts]) if pts else np.zeros(0)
    elif domain == "p":
        obs = np.array([pt.p_hat for pt in pts])
        pred = np.array([eval_f(m, pt.weight) for pt in pts])
    else:
        raise ValueError("domain must be 'y' or 'p'")
    if len(obs) < 2:
        raise InsufficientData("R^2 needs at least 2 points")
    ss_res = float(np.sum((obs - pred) ** 2))
    ss_tot = float(np.sum((obs - obs.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else float("-inf")
    return 1.0 - ss_res / ss_tot


def _linear_fit(pts: list[DataPoint], t: int, s: float, wts: np.ndarray):
    w = np.array([pt.weight for pt in pts], dtype=float)
    y = np.array([y_transform(pt.p_hat) for pt in pts])
    basis = np.column_stack([w, np.ones_like(w), np.power(w - t, -s)])
    sw = np.sqrt(wts)
    coef, *_ = np.linalg.lstsq(basis * sw[:, None], y * sw, rcond=None)
    return coef


def _projected_fit(pts, t, s, wts, start):
    """Weighted Y-domain fit with alpha, beta > 0 enforced by a log parameterization."""
    w = np.array([pt.weight for pt in pts], dtype=float)
    y = np.array([y_transform(pt.p_hat) for pt in pts])
    x = np.power(w - t, -s)

    def loss(theta):
        mu, la, lb = theta
        pred = -(w - mu) / math.exp(la) + math.exp(lb) * x
        return float(np.sum(wts * (y - pred) ** 2))

    res = minimize(loss, start, method="Nelder-Mead",
                   options={"maxiter": 20000, "xatol": 1e-10, "fatol": 1e-12})
    mu, la, lb = res.x
    return mu, math.exp(la), math.exp(lb)


def _ibm_fit(pts: list[DataPoint], t: int, wts: np.ndarray, maxiter: int):
    w = np.array([pt.weight for pt in pts], dtype=float)
    y = np.array([y_transform(pt.p_hat) for pt in pts])
    p = np.array([pt.p_hat for pt in pts])
    # ln(-ln(1 - 2f)) = ln(2 mu) + alpha (ln w - ln beta)
    lin_y = np.log(-np.log1p(-2.0 * p))
    slope, intercept = np.polyfit(np.log(w), lin_y, 1, w=np.sqrt(wts))
    alpha0 = max(float(slope), 1e-3)
    beta0 = float(t + 1)
    mu0 = 0.5 * math.exp(intercept + alpha0 * math.log(beta0))

    def loss(theta):
        mu, alpha, beta = np.exp(theta)
        z = 2.0 * mu * np.power(w / beta, alpha)
        with np.errstate(over="ignore", divide="ignore"):
            pred = -z - np.log(-np.expm1(-z))
        if not np.all(np.isfinite(pred)):
            return 1e300
        return float(np.sum(wts * (y - pred) ** 2))

    res = minimize(loss, np.log([mu0, alpha0, beta0]), method="Nelder-Mead",
                   options={"maxiter": maxiter, "xatol": 1e-10, "fatol": 1e-12})
    if res.nit >= maxiter or not np.all(np.isfinite(res.x)):
        raise FitDiverged(f"simplex did not converge in {maxiter} iterations")
    mu, alpha, beta = np.exp(res.x)
    return float(mu), float(alpha), float(beta)


def fit(data: Iterable, variant: str = "ours", t: int = 0, s: float = 0.5,
        weighted: bool = True, maxiter: int = 20000) -> FitResult:
    """Least-squares fit of an S-curve model in the Y domain.

    ``data`` holds ``(w, p_hat, n_samples)`` triples, :class:`DataPoint`
    or :class:`~stratqec.sampling.SubspaceStats`. Points with ``p_hat`` of
    0 or at least 1/2 (and, for the t-anchored models, ``w <= t``) cannot be
    transformed and are left out of the fit, but still enter the P-domain
    R^2.
    """
    if variant == "ours":
        s = 0.5
    pts = _points(data)
    use = _usable(pts, variant, t)
    if len(use) < 3:
        raise InsufficientData(f"need at least 3 usable points, got {len(use)}")
    wts = np.array([y_weight(pt.p_hat, pt.n_samples) for pt in use]) if weighted \
        else np.ones(len(use))
    flags: list[str] = []
    if variant == "ibm":
        mu, alpha, beta = _ibm_fit(use, t, wts, maxiter)
    else:
        a, b, beta = _linear_fit(use, t, s, wts)
        if a < 0 and beta > 0:
            alpha = -1.0 / a
            mu = b * alpha
        else:
            flags.append("positivity_projected")
            alpha0 = -1.0 / a if a < 0 else 10.0
            beta0 = beta if beta > 0 else 1.0
            start = [b * alpha0 if a < 0 else float(np.mean([pt.weight for pt in use])),
                     math.log(alpha0), math.log(beta0)]
            mu, alpha, beta = _projected_fit(use, t, s, wts, start)
    model = SCurveModel(variant, t, float(mu), float(alpha), float(beta), s)
    residuals = [pt.p_hat - eval_f(model, pt.weight) for pt in pts]
    r2_y = r_squared(use, model, "y")
    r2_p = r_squared(pts, model, "p") if len(pts) >= 2 else float("nan")
    return FitResult(model, r2_y, r2_p, residuals, pts, weighted, flags)


def curve_table(m: SCurveModel, weights: Iterable[int]) -> list[tuple[int, float]]:
    return [(int(w), eval_f(m, w)) for w in weights]
