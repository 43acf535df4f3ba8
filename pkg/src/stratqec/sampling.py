"""Fixed-weight (stratified) fault injection and the i.i.d. baseline sampler.

Randomness is counter based: shot ``i`` of the stream tagged ``tag`` always
lives in block ``i // BLOCK`` and that block's generator is keyed by
``(seed, tag)`` with the block number as its counter. Results therefore do
not depend on thread count, and a stream can be resumed at any shot.
Fixed-weight streams are tagged by the weight itself.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numba
import numpy as np

from . import _kernels
from .qepg import Qepg, unpack_words

BLOCK = 1000
_BASELINE_TAG = 1 << 62


class WeightOutOfRange(ValueError):
    pass


@dataclass
class SubspaceStats:
    weight: int
    num_samples: int = 0
    num_logical_errors: int = 0
    stop: str | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.num_logical_errors <= self.num_samples:
            raise ValueError("need 0 <= errors <= samples")

    @property
    def p_hat(self) -> float:
        return self.num_logical_errors / self.num_samples if self.num_samples else 0.0

    def merged(self, other: SubspaceStats) -> SubspaceStats:
        if other.weight != self.weight:
            raise ValueError("cannot merge different weights")
        return SubspaceStats(self.weight, self.num_samples + other.num_samples,
                             self.num_logical_errors + other.num_logical_errors, other.stop)

    def to_dict(self) -> dict:
        return {"weight": self.weight, "samples": self.num_samples,
                "errors": self.num_logical_errors, "p_hat": self.p_hat, "stop": self.stop}

    @classmethod
    def from_dict(cls, d: dict) -> SubspaceStats:
        return cls(int(d["weight"]), int(d["samples"]), int(d["errors"]), d.get("stop"))


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    p: float = 1e-3
    threads: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.p < 1:
            raise ValueError("physical error rate must lie strictly between 0 and 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class BaselineResult:
    shots: int = 0
    logical_errors: int = 0
    weight_histogram: dict[int, list[int]] = field(default_factory=dict)
    stop_reason: str | None = None
    seconds: float = 0.0

    @property
    def p_hat(self) -> float:
        return self.logical_errors / self.shots if self.shots else 0.0

    def to_dict(self) -> dict:
        return {
            "shots": self.shots,
            "logical_errors": self.logical_errors,
            "p_hat": self.p_hat,
            "stop_reason": self.stop_reason,
            "weight_histogram": [
                {"weight": w, "samples": s, "errors": e}
                for w, (s, e) in sorted(self.weight_histogram.items())
            ],
        }


# ---------------------------------------------------------------- rng


def block_generator(seed: int, tag: int, block: int) -> np.random.Generator:
    """Philox generator for one block of one stream."""
    bitgen = np.random.Philox(key=np.array([seed, tag], dtype=np.uint64),
                              counter=np.array([0, 0, block, 0], dtype=np.uint64))
    return np.random.Generator(bitgen)


def _apply_threads(cfg: SamplerConfig) -> None:
    numba.set_num_threads(max(1, min(cfg.threads, numba.config.NUMBA_NUM_THREADS)))


# ---------------------------------------------------------------- core


def _observable_masks(bits: np.ndarray) -> np.ndarray:
    k = bits.shape[1]
    weights = (np.uint64(1) << np.arange(k, dtype=np.uint64))
    return (bits.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64) if k else \
        np.zeros(bits.shape[0], dtype=np.uint64)


def _predict_masks(dec, syndromes: np.ndarray) -> np.ndarray:
    if hasattr(dec, "decode_masks"):
        return dec.decode_masks(syndromes)
    return _observable_masks(np.asarray(dec.decode_batch(syndromes), dtype=bool))


def shot_errors(g: Qepg, dec, row_idx: np.ndarray) -> np.ndarray:
    """Per-shot logical-error flags for fault sets given as QEPG row indices."""
    d, k = g.num_detectors, g.num_observables
    bits = unpack_words(g.xor(row_idx), d + k)
    pred = _predict_masks(dec, np.ascontiguousarray(bits[:, :d]))
    return pred != _observable_masks(bits[:, d:])


def _weight_block(g: Qepg, dec, w: int, seed: int, block: int) -> np.ndarray:
    rng = block_generator(seed, w, block)
    u = rng.random((BLOCK, w))
    paulis = rng.integers(0, 3, size=(BLOCK, w))
    idx = np.empty((BLOCK, max(w, 1)), dtype=np.int64)
    _kernels.draw_fault_rows(u, paulis, np.full(BLOCK, w, dtype=np.int64), g.num_locations, idx)
    return shot_errors(g, dec, idx)


def _weight_shots(g: Qepg, dec, w: int, seed: int, start: int, stop: int):
    """Yield error flags for shots ``start..stop-1`` of the weight-``w`` stream."""
    b = start // BLOCK
    while b * BLOCK < stop:
        flags = _weight_block(g, dec, w, seed, b)
        lo = max(start - b * BLOCK, 0)
        hi = min(stop - b * BLOCK, BLOCK)
        yield flags[lo:hi]
        b += 1


def _check_weight(g: Qepg, w: int) -> None:
    if not 0 <= w <= g.num_locations:
        raise WeightOutOfRange(f"weight {w} not in [0, {g.num_locations}]")


def sample_weight_w(g: Qepg, dec, w: int, n_shots: int, cfg: SamplerConfig,
                    start_shot: int = 0) -> SubspaceStats:
    """Sample ``n_shots`` weight-``w`` fault sets.

    Each shot picks ``w`` distinct locations uniformly and an independent
    uniform Pauli for each. ``start_shot`` resumes the stream, so two calls
    covering ``[0, a)`` and ``[a, b)`` equal one call covering ``[0, b)``.
    """
    _check_weight(g, w)
    if n_shots < 0:
        raise ValueError("n_shots must be >= 0")
    _apply_threads(cfg)
    if w == 0:
        return SubspaceStats(0, n_shots, 0)
    errors = sum(int(f.sum()) for f in _weight_shots(g, dec, w, cfg.seed, start_shot,
                                                        start_shot + n_shots))
    return SubspaceStats(w, n_shots, errors)


def sample_until_errors(g: Qepg, dec, w: int, target_errors: int, budget: int,
                        cfg: SamplerConfig, prior: SubspaceStats | None = None) -> SubspaceStats:
    """Sample weight ``w`` until more than ``target_errors`` errors or ``budget`` shots.

    The stop is exact to the shot: the returned count ends at the first
    shot where the cumulative error count exceeds ``target_errors``.
    ``prior`` continues an earlier run of the same stream and its counts
    are included in the result; ``budget`` bounds the new shots only.
    The ``stop`` field is ``"errors"`` or ``"budget"``.
    """
    _check_weight(g, w)
    if target_errors < 1:
        raise ValueError("target_errors must be >= 1")
    _apply_threads(cfg)
    start = prior.num_samples if prior else 0
    errors = prior.num_logical_errors if prior else 0
    shots = start
    if errors > target_errors:
        return SubspaceStats(w, shots, errors, "errors")
    if w == 0:
        return SubspaceStats(0, start + budget, errors, "budget")
    for flags in _weight_shots(g, dec, w, cfg.seed, start, start + budget):
        cum = errors + np.cumsum(flags)
        hit = np.nonzero(cum > target_errors)[0]
        if hit.size:
            return SubspaceStats(w, shots + int(hit[0]) + 1, int(cum[hit[0]]), "errors")
        shots += len(flags)
        errors = int(cum[-1]) if len(cum) else errors
    return SubspaceStats(w, shots, errors, "budget")


def sample_baseline(g: Qepg, dec, p: float, cfg: SamplerConfig, max_errors: int | None = 100,
                    max_shots: int | None = None, max_seconds: float | None = None) -> BaselineResult:
    """Independent depolarizing noise at rate ``p`` on every location.

    Drawing the realized weight from Binomial(C, p) and then that many
    distinct uniform locations with uniform Paulis is the same
    distribution as flipping each location independently, and far
    cheaper. Sampling stops once ``max_errors`` errors are seen (checked at
    the exact shot), after ``max_shots`` shots, or after ``max_seconds``
    (checked between blocks).
    """
    if max_errors is None and max_shots is None and max_seconds is None:
        raise ValueError("at least one stopping bound is required")
    if not 0 < p < 1:
        raise ValueError("p must lie strictly between 0 and 1")
    _apply_threads(cfg)
    res = BaselineResult()
    t0 = time.perf_counter()
    c = g.num_locations
    block = 0
    while True:
        rng = block_generator(cfg.seed, _BASELINE_TAG, block)
        weights = rng.binomial(c, p, size=BLOCK).astype(np.int64)
        width = max(int(weights.max()), 1)
        u = rng.random((BLOCK, width))
        paulis = rng.integers(0, 3, size=(BLOCK, width))
        idx = np.empty((BLOCK, width), dtype=np.int64)
        _kernels.draw_fault_rows(u, paulis, weights, c, idx)
        flags = shot_errors(g, dec, idx)
        n = BLOCK
        if max_shots is not None:
            n = min(n, max_shots - res.shots)
        if max_errors is not None:
            cum = res.logical_errors + np.cumsum(flags[:n])
            hit = np.nonzero(cum >= max_errors)[0]
            if hit.size:
                n = int(hit[0]) + 1
        _accumulate(res, weights[:n], flags[:n])
        block += 1
        res.seconds = time.perf_counter() - t0
        if max_errors is not None and res.logical_errors >= max_errors:
            res.stop_reason = "errors"
        elif max_shots is not None and res.shots >= max_shots:
            res.stop_reason = "shots"
        elif max_seconds is not None and res.seconds >= max_seconds:
            res.stop_reason = "time"
        if res.stop_reason:
            return res


def _accumulate(res: BaselineResult, weights: np.ndarray, flags: np.ndarray) -> None:
    res.shots += len(weights)
    res.logical_errors += int(flags.sum())
    for w in np.unique(weights):
        sel = weights == w
        entry = res.weight_histogram.setdefault(int(w), [0, 0])
        entry[0] += int(sel.sum())
        entry[1] += int(flags[sel].sum())


def binomial_weight_probability(c: int, p: float, w: int) -> float:
    """C(c, w) p^w (1-p)^(c-w), evaluated in log space."""
    if not 0 <= w <= c:
        raise WeightOutOfRange(f"weight {w} not in [0, {c}]")
    if p <= 0.0:
        return 1.0 if w == 0 else 0.0
    if p >= 1.0:
        return 1.0 if w == c else 0.0
    log_choose = math.lgamma(c + 1) - math.lgamma(w + 1) - math.lgamma(c - w + 1)
    return math.exp(log_choose + w * math.log(p) + (c - w) * math.log1p(-p))


# ---------------------------------------------------------------- I/O

CSV_COLUMNS = ("weight", "samples", "errors", "p_hat")


def write_stats_csv(path: str | Path, stats: Iterable[SubspaceStats]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for s in sorted(stats, key=lambda s: s.weight):
            wr.writerow([s.weight, s.num_samples, s.num_logical_errors, repr(s.p_hat)])


def read_stats_csv(path: str | Path) -> list[SubspaceStats]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        missing = set(CSV_COLUMNS[:3]) - set(rd.fieldnames or ())
        if missing:
            raise ValueError(f"CSV lacks columns: {sorted(missing)}")
        return [SubspaceStats(int(r["weight"]), int(r["samples"]), int(r["errors"])) for r in rd]


def stats_to_json(stats: Iterable[SubspaceStats]) -> str:
    return json.dumps([s.to_dict() for s in stats], indent=2)


def stats_from_json(text: str) -> list[SubspaceStats]:
    return [SubspaceStats.from_dict(d) for d in json.loads(text)]


def write_histogram_csv(path: str | Path, res: BaselineResult) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for w, (s, e) in sorted(res.weight_histogram.items()):
            wr.writerow([w, s, e, repr(e / s if s else 0.0)])


__all__ = [
    "BLOCK", "BaselineResult", "SamplerConfig", "SubspaceStats", "WeightOutOfRange",
    "binomial_weight_probability", "block_generator", "read_stats_csv", "sample_baseline",
    "sample_until_errors", "sample_weight_w", "shot_errors", "stats_from_json", "stats_to_json",
    "write_histogram_csv", "write_stats_csv",
]
