"""Adaptive stratified sampling and the final binomially weighted estimate.

The run has three sampling stages followed by an extrapolation step:

1. a coarse search with 1000-shot probes for ``w_err`` (first weight that
   shows a logical error) and ``w_sat`` (last weight with ``P <= 1/4``);
2. five evenly spaced subspaces in ``[w_err, w_sat]``, each sampled until
   ``n_le`` logical errors are seen;
3. new subspaces below the current front, placed by the fitted curve's
   sweet spot, until the front reaches it, ten subspaces exist, or the
   budget is spent.

The fitted S-curve is then summed against the binomial weight
distribution over ``np +- 5 sigma``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .circuit import Circuit
from .decoders import MwpmDecoder
from .qepg import Qepg, compile_qepg
from .sampling import (SamplerConfig, SubspaceStats, binomial_weight_probability,
                       sample_until_errors)
from .scurve import (FitResult, InsufficientData, SCurveModel, compute_w_sweet, eval_f, fit)

SCHEMA_VERSION = 1
MAX_SUBSPACES = 10
INITIAL_POINTS = 5
_CHUNK = 20_000


class PipelineError(RuntimeError):
    pass


class NoErrorsAnywhere(PipelineError):
    """Not a single logical error was seen at any probed weight."""


class BudgetExhausted(PipelineError):
    """The budget ran out before enough data existed for a fit."""

    def __init__(self, message: str, stats: list[SubspaceStats] | None = None):
        super().__init__(message)
        self.stats = stats or []


@dataclass(frozen=True)
class AdapSamConfig:
    s_max: int
    n_le: int = 30
    gamma: float = 1.0
    binary_search_shots: int = 1000
    max_seconds: float | None = None

    def __post_init__(self) -> None:
        if self.n_le < 1:
            raise ValueError("n_le must be >= 1")
        if self.s_max < 10 * self.n_le:
            raise ValueError("s_max must be at least 10 * n_le")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.binary_search_shots < 1:
            raise ValueError("binary_search_shots must be >= 1")
        if self.max_seconds is not None and not self.max_seconds > 0:
            raise ValueError("max_seconds must be positive")


class _Ledger:
    """Shot accounting and per-weight streams shared by all stages.

    Every weight has a single reproducible stream; later stages continue
    the stream where earlier probes left off instead of redrawing it.
    """

    def __init__(self, g: Qepg, dec, cfg: AdapSamConfig, scfg: SamplerConfig):
        self.g, self.dec, self.cfg, self.scfg = g, dec, cfg, scfg
        self.stats: dict[int, SubspaceStats] = {}
        self.t0 = time.perf_counter()
        self.hit: str | None = None

    @property
    def total_shots(self) -> int:
        return sum(s.num_samples for s in self.stats.values())

    @property
    def remaining(self) -> int:
        return max(self.cfg.s_max - self.total_shots, 0)

    def out_of_time(self) -> bool:
        return (self.cfg.max_seconds is not None
                and time.perf_counter() - self.t0 >= self.cfg.max_seconds)

    def probe(self, w: int) -> SubspaceStats:
        """Ensure at least ``binary_search_shots`` shots exist at ``w``."""
        have = self.stats.get(w)
        need = self.cfg.binary_search_shots - (have.num_samples if have else 0)
        if need > 0:
            self._extend(w, need, target=None)
        return self.stats[w]

    def until_errors(self, w: int) -> SubspaceStats:
        """Continue weight ``w`` until more than ``n_le`` errors or the budget ends."""
        while True:
            cur = self.stats.get(w)
            if cur is not None and cur.num_logical_errors > self.cfg.n_le:
                cur.stop = "errors"
                return cur
            if self.remaining <= 0:
                self.hit = self.hit or "budget"
                self._mark(w, "budget")
                return self.stats[w]
            if self.out_of_time():
                self.hit = self.hit or "time"
                self._mark(w, "time")
                return self.stats[w]
            self._extend(w, min(_CHUNK, self.remaining), target=self.cfg.n_le)

    def _mark(self, w: int, reason: str) -> None:
        self.stats.setdefault(w, SubspaceStats(w)).stop = reason

    def _extend(self, w: int, n: int, target: int | None) -> None:
        prior = self.stats.get(w)
        res = sample_until_errors(self.g, self.dec, w, target if target else 10**18, n,
                                  self.scfg, prior=prior)
        self.stats[w] = res


# ---------------------------------------------------------------- stages


def _gallop(probe: Callable[[int], bool], lo: int, hi: int) -> int | None:
    """Smallest ``w`` in ``(lo, hi]`` with ``probe(w)`` true, assuming monotonicity.

    Steps grow geometrically from ``lo`` before the final bisection, so the
    probes stay close to the answer instead of starting at ``(lo + hi) / 2``.
    """
    step, bad = 1, lo
    w = min(lo + step, hi)
    while not probe(w):
        bad = w
        if w == hi:
            return None
        step *= 2
        w = min(lo + step, hi)
    good = w
    while good - bad > 1:
        mid = (good + bad) // 2
        if probe(mid):
            good = mid
        else:
            bad = mid
    return good


def _binary_search(led: _Ledger) -> tuple[int, int]:
    c = led.g.num_locations
    w_err = _gallop(lambda w: led.probe(w).num_logical_errors >= 1, 0, c)
    if w_err is None:
        raise NoErrorsAnywhere("no logical error observed at any weight up to C")
    if led.probe(w_err).p_hat > 0.25:
        return w_err, w_err
    above = _gallop(lambda w: led.probe(w).p_hat > 0.25, w_err, c)
    return w_err, (c if above is None else above - 1)


def binary_search_stage(g: Qepg, dec, cfg: AdapSamConfig,
                        scfg: SamplerConfig | None = None) -> tuple[int, int]:
    """Return ``(w_err, w_sat)`` from 1000-shot probes."""
    return _binary_search(_Ledger(g, dec, cfg, scfg or SamplerConfig()))


def initial_weights(w_err: int, w_sat: int, k: int = INITIAL_POINTS) -> list[int]:
    """``k`` rounded, evenly spaced weights covering ``[w_err, w_sat]``, deduplicated."""
    if w_err > w_sat:
        raise ValueError("need w_err <= w_sat")
    return sorted({int(round(x)) for x in np.linspace(w_err, w_sat, k)})


def _initial_sampling(led: _Ledger, w_err: int, w_sat: int) -> list[int]:
    ws = initial_weights(w_err, w_sat)
    for w in ws:
        led.until_errors(w)
    return ws


def initial_sampling_stage(g: Qepg, dec, w_err: int, w_sat: int, cfg: AdapSamConfig,
                           scfg: SamplerConfig | None = None) -> list[SubspaceStats]:
    led = _Ledger(g, dec, cfg, scfg or SamplerConfig())
    return [led.stats[w] for w in _initial_sampling(led, w_err, w_sat)]


def _fit_points(led: _Ledger, chosen: list[int]) -> list[SubspaceStats]:
    """The chosen subspaces plus any probe whose estimate is strictly inside (0, 1/2)."""
    pts = {w: led.stats[w] for w in chosen if w in led.stats}
    for w, s in led.stats.items():
        if w not in pts and 0.0 < s.p_hat < 0.5:
            pts[w] = s
    return [pts[w] for w in sorted(pts)]


def _iterate(led: _Ledger, chosen: list[int], w_err: int, t: int,
             flags: list[str]) -> tuple[FitResult, int, str]:
    gamma = led.cfg.gamma
    front = min(chosen)
    best: FitResult | None = None
    reason = "max_subspaces"
    while len(chosen) < MAX_SUBSPACES:
        if led.hit:
            reason = led.hit
            break
        cur = fit(_fit_points(led, chosen), "ours", t)
        forced = False
        if "positivity_projected" in cur.flags and best is not None:
            flags.append(f"kept_previous_fit_at_front_{front}")
            forced = True
        else:
            best = cur
        sweet = compute_w_sweet(best.model, gamma)
        if not forced and front <= sweet:
            reason = "converged"
            break
        if forced:
            w_new = front - 1
        else:
            step = max(1, (w_err - sweet) // 5)
            w_new = min(max(front - step, sweet), front - 1)
        if w_new <= t:
            reason = "fault_tolerant_floor"
            break
        led.until_errors(w_new)
        chosen.append(w_new)
        front = w_new
    final = fit(_fit_points(led, chosen), "ours", t)
    if "positivity_projected" in final.flags and best is not None:
        flags.append("final_fit_kept_previous")
        final = best
    if led.hit and reason not in ("budget", "time"):
        reason = led.hit
    return final, compute_w_sweet(final.model, gamma), reason


def iterative_stage(g: Qepg, dec, stats: list[SubspaceStats], w_err: int, t: int,
                    cfg: AdapSamConfig, scfg: SamplerConfig | None = None
                    ) -> tuple[list[SubspaceStats], FitResult, int]:
    led = _Ledger(g, dec, cfg, scfg or SamplerConfig())
    for s in stats:
        led.stats[s.weight] = s
    chosen = [s.weight for s in stats]
    final, sweet, _ = _iterate(led, chosen, w_err, t, [])
    return [led.stats[w] for w in sorted(led.stats)], final, sweet


# ---------------------------------------------------------------- estimate


def critical_region(c: int, p: float, t: int) -> tuple[int, int]:
    sigma = math.sqrt(c * p * (1.0 - p))
    lo = max(t + 1, math.floor(c * p - 5.0 * sigma))
    hi = min(c, math.ceil(c * p + 5.0 * sigma))
    return lo, hi


def estimate_logical_error_rate(model: SCurveModel | FitResult, c: int, p: float,
                                t: int | None = None) -> tuple[float, tuple[int, int]]:
    """Sum the model against the weight distribution over the critical region."""
    if isinstance(model, FitResult):
        model = model.model
    if not 0 < p < 1:
        raise ValueError("p must lie strictly between 0 and 1")
    t = model.t if t is None else t
    lo, hi = critical_region(c, p, t)
    total = 0.0
    for w in range(lo, hi + 1):
        total += float(eval_f(model, w)) * binomial_weight_probability(c, p, w)
    return total, (lo, hi)


# ---------------------------------------------------------------- driver


@dataclass
class EstimateReport:
    p_l_hat: float
    w_err: int
    w_sweet: int
    w_sat: int
    subspaces: list[SubspaceStats]
    fit: FitResult
    critical_region: tuple[int, int]
    total_shots: int
    stop_reason: str
    budget_exhausted: bool
    distance: int
    p: float
    num_locations: int
    seed: int
    config: AdapSamConfig
    stage_weights: dict[str, list[int]] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    @property
    def t(self) -> int:
        return (self.distance - 1) // 2

    def recompute(self) -> float:
        return estimate_logical_error_rate(self.fit.model, self.num_locations, self.p, self.t)[0]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "p_l_hat": self.p_l_hat,
            "w_err": self.w_err,
            "w_sweet": self.w_sweet,
            "w_sat": self.w_sat,
            "critical_region": list(self.critical_region),
            "total_shots": self.total_shots,
            "stop_reason": self.stop_reason,
            "budget_exhausted": self.budget_exhausted,
            "distance": self.distance,
            "p": self.p,
            "num_locations": self.num_locations,
            "seed": self.seed,
            "config": asdict(self.config),
            "stage_weights": self.stage_weights,
            "flags": list(self.flags),
            "subspaces": [s.to_dict() for s in self.subspaces],
            "fit": self.fit.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> EstimateReport:
        return cls(
            p_l_hat=float(d["p_l_hat"]), w_err=int(d["w_err"]), w_sweet=int(d["w_sweet"]),
            w_sat=int(d["w_sat"]), subspaces=[SubspaceStats.from_dict(s) for s in d["subspaces"]],
            fit=FitResult.from_dict(d["fit"]), critical_region=tuple(d["critical_region"]),
            total_shots=int(d["total_shots"]), stop_reason=d["stop_reason"],
            budget_exhausted=bool(d["budget_exhausted"]), distance=int(d["distance"]),
            p=float(d["p"]), num_locations=int(d["num_locations"]), seed=int(d["seed"]),
            config=AdapSamConfig(**d["config"]), stage_weights=d.get("stage_weights", {}),
            flags=list(d.get("flags", [])),
        )


def run_scaler(c: Circuit | Qepg, d: int, p: float, cfg: AdapSamConfig, seed: int = 0,
               threads: int = 1, decoder=None) -> EstimateReport:
    """Full adaptive run on a circuit (or an already compiled QEPG)."""
    if d < 1 or d % 2 == 0:
        raise ValueError("distance must be a positive odd integer")
    if not 0 < p < 1:
        raise ValueError("p must lie strictly between 0 and 1")
    t = (d - 1) // 2
    g = c if isinstance(c, Qepg) else compile_qepg(c)
    dec = decoder if decoder is not None else MwpmDecoder.from_qepg(g)
    led = _Ledger(g, dec, cfg, SamplerConfig(seed=seed, p=p, threads=threads))
    flags: list[str] = []

    w_err, w_sat = _binary_search(led)
    probes = sorted(led.stats)
    if w_err <= t:
        flags.append("error_below_t_plus_1")
    if w_err == w_sat:
        flags.append("w_err_equals_w_sat")
    chosen = _initial_sampling(led, w_err, w_sat)
    initial = list(chosen)
    try:
        final, w_sweet, reason = _iterate(led, chosen, w_err, t, flags)
    except InsufficientData as exc:
        raise BudgetExhausted(f"not enough usable subspaces for a fit: {exc}",
                              [led.stats[w] for w in sorted(led.stats)]) from exc
    if not w_sweet <= w_err <= w_sat:
        flags.append("weight_order_not_strict")
    p_l, region = estimate_logical_error_rate(final.model, g.num_locations, p, t)
    truncated = any(led.stats[w].stop in ("budget", "time") for w in chosen)
    return EstimateReport(
        p_l_hat=p_l, w_err=w_err, w_sweet=w_sweet, w_sat=w_sat,
        subspaces=[led.stats[w] for w in sorted(led.stats)], fit=final,
        critical_region=region, total_shots=led.total_shots, stop_reason=reason,
        budget_exhausted=truncated, distance=d, p=p, num_locations=g.num_locations,
        seed=seed, config=cfg,
        stage_weights={"probe": probes, "initial": initial,
                       "iterative": [w for w in chosen if w not in initial]},
        flags=flags,
    )
