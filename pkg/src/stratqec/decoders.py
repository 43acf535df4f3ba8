"""Decoders mapping detector syndromes to predicted observable flips.

Two decoders are provided. :class:`LookupDecoder` tabulates every
single-fault syndrome and is meant for tiny repetition-code circuits.
:class:`MwpmDecoder` runs minimum-weight matching on a detector graph built
from the single-fault rows of a :class:`~stratqec.qepg.Qepg`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from . import _kernels
from .qepg import PAULIS, Qepg, unpack_words

BOUNDARY = -1
DP_CLUSTER_LIMIT = 10


class NotMatchable(ValueError):
    """A single fault flips three or more detectors."""


class TooManyDefects(RuntimeError):
    """A syndrome exceeded the configured defect limit."""


@runtime_checkable
class DecoderInterface(Protocol):
    num_detectors: int
    num_observables: int

    def decode(self, syndrome: np.ndarray) -> np.ndarray: ...

    def decode_batch(self, syndromes: np.ndarray) -> np.ndarray: ...


def _as_syndrome_matrix(syndromes: np.ndarray, num_detectors: int) -> np.ndarray:
    s = np.asarray(syndromes)
    if s.ndim != 2 or s.shape[1] != num_detectors:
        raise ValueError(f"expected syndromes of shape (n, {num_detectors}), got {s.shape}")
    return np.ascontiguousarray(s, dtype=np.uint8)


def _mask_to_bits(masks: np.ndarray, k: int) -> np.ndarray:
    masks = np.asarray(masks, dtype=np.uint64)
    shifts = np.arange(k, dtype=np.uint64)
    return ((masks[:, None] >> shifts[None, :]) & np.uint64(1)).astype(bool)


def _bits_to_mask(bits: np.ndarray) -> int:
    acc = 0
    for i, b in enumerate(bits):
        if b:
            acc |= 1 << i
    return acc


# ---------------------------------------------------------------- graph


@dataclass(frozen=True)
class Edge:
    u: int
    v: int  # BOUNDARY for a half-edge
    weight: float
    observable_mask: int
    multiplicity: int


@dataclass(frozen=True, eq=False)
class DetectorGraph:
    """Detector nodes plus a boundary node, one edge per endpoint pair.

    ``classes`` keeps every (endpoints, observable mask) class with its
    single-fault multiplicity; ``edges`` keeps, for each endpoint pair, the
    most likely class (lowest weight), which is what matching uses.
    """

    num_detectors: int
    num_observables: int
    edges: tuple[Edge, ...]
    classes: dict[tuple[int, int, int], int] = field(repr=False)

    def neighbours(self, u: int) -> list[Edge]:
        return [e for e in self.edges if e.u == u or e.v == u]


def _single_fault_components(g: Qepg) -> list[tuple[np.ndarray, int]]:
    """Detector sets and observable masks of the graphlike single faults.

    A Y fault equals X times Z up to phase. When both parts trigger
    detectors the Y fault is left to its parts, which are counted already;
    this keeps the X-error and Z-error graphs apart. Any fault that still
    touches three or more detectors makes the circuit unmatchable.
    """
    d, k = g.num_detectors, g.num_observables
    bits = unpack_words(g.rows, d + k)
    det_counts = bits[:, :d].sum(axis=1)
    out: list[tuple[np.ndarray, int]] = []
    for r in range(bits.shape[0]):
        if det_counts[r] == 0:
            continue
        if r % 3 == 1 and det_counts[r - 1] and det_counts[r + 1]:
            continue
        if det_counts[r] > 2:
            loc, p = divmod(r, 3)
            raise NotMatchable(
                f"fault {PAULIS[p]} at location {loc} flips {int(det_counts[r])} detectors"
            )
        dets = np.nonzero(bits[r, :d])[0]
        out.append((dets, _bits_to_mask(bits[r, d:])))
    return out


def build_detector_graph(g: Qepg, p_ref: float = 1e-3) -> DetectorGraph:
    """Matching graph of ``g`` with weight ``-ln(m * p_ref / 3)`` per class.

    ``m`` counts the single faults in a class. Under uniform depolarizing
    noise every fault has probability ``p_ref / 3``, so only the constant
    offset depends on ``p_ref``.
    """
    if g.num_observables > 64:
        raise ValueError("at most 64 observables are supported")
    classes: dict[tuple[int, int, int], int] = {}
    for dets, mask in _single_fault_components(g):
        u = int(dets[0])
        v = int(dets[1]) if len(dets) == 2 else BOUNDARY
        key = (u, v, mask)
        classes[key] = classes.get(key, 0) + 1

    q = p_ref / 3.0
    best: dict[tuple[int, int], Edge] = {}
    for (u, v, mask), m in sorted(classes.items()):
        e = Edge(u, v, -math.log(min(m * q, 0.5)), mask, m)
        cur = best.get((u, v))
        if cur is None or e.weight < cur.weight:
            best[(u, v)] = e
    edges = tuple(best[key] for key in sorted(best))
    return DetectorGraph(g.num_detectors, g.num_observables, edges, classes)


# ---------------------------------------------------------------- MWPM


class MwpmDecoder:
    """Exact minimum-weight matching over the detector graph.

    Defects are first split into independent clusters. Clusters of up to
    ``dp_limit`` defects are paired by bitmask dynamic programming and
    larger ones by the blossom algorithm; :attr:`blossom_calls` counts the
    latter. ``max_defects`` optionally rejects syndromes with more defects
    than a caller is willing to pay for (:class:`TooManyDefects`).

    Only detectors in connected components that can flip an observable are
    kept; defects elsewhere can never change the prediction.
    """

    def __init__(self, graph: DetectorGraph, dp_limit: int = DP_CLUSTER_LIMIT,
                 max_defects: int | None = None):
        if not 0 <= dp_limit <= 20:
            raise ValueError("dp_limit must lie in [0, 20]")
        self.graph = graph
        self.num_detectors = graph.num_detectors
        self.num_observables = graph.num_observables
        self.dp_limit = dp_limit
        self.max_defects = max_defects
        self.blossom_calls = 0
        self._prepare()

    @classmethod
    def from_qepg(cls, g: Qepg, **kwargs) -> MwpmDecoder:
        return cls(build_detector_graph(g), **kwargs)

    def _prepare(self) -> None:
        g = self.graph
        d = g.num_detectors
        inner = [e for e in g.edges if e.v != BOUNDARY]
        if inner:
            a = np.array([e.u for e in inner])
            b = np.array([e.v for e in inner])
            adj = csr_matrix((np.ones(len(inner)), (a, b)), shape=(d, d))
            _, labels = connected_components(adj, directed=False)
        else:
            labels = np.arange(d)
        hot = {labels[e.u] for e in g.edges if e.observable_mask}
        relevant = np.array([i for i in range(d) if labels[i] in hot], dtype=np.int64)
        self.relevant = relevant
        local = {int(det): i for i, det in enumerate(relevant)}
        n = len(relevant)

        # Local node n is the boundary.
        rows, cols, wts = [], [], []
        emask = np.zeros((n + 1, n + 1), dtype=np.uint64)
        for e in g.edges:
            if e.u not in local:
                continue
            u = local[e.u]
            v = n if e.v == BOUNDARY else local[e.v]
            rows += [u, v]
            cols += [v, u]
            # scipy drops explicit zeros, so keep weights strictly positive.
            w = max(e.weight, 1e-12)
            wts += [w, w]
            emask[u, v] = emask[v, u] = np.uint64(e.observable_mask)
        if n == 0:
            self._dist = np.zeros((0, 0))
            self._bnd = np.zeros(0)
            self._pair_mask = np.zeros((0, 0), dtype=np.uint64)
            self._bnd_mask = np.zeros(0, dtype=np.uint64)
            return
        adj = csr_matrix((wts, (rows, cols)), shape=(n + 1, n + 1))
        dist, pred = dijkstra(adj, directed=False, return_predecessors=True)
        masks = _kernels.path_masks(dist, pred.astype(np.int64), emask)
        self._dist = np.ascontiguousarray(dist[:n, :n])
        self._bnd = np.ascontiguousarray(dist[:n, n])
        self._pair_mask = np.ascontiguousarray(masks[:n, :n])
        self._bnd_mask = np.ascontiguousarray(masks[:n, n])

    def decode(self, syndrome: np.ndarray) -> np.ndarray:
        return self.decode_batch(np.asarray(syndrome)[None, :])[0]

    def decode_masks(self, syndromes: np.ndarray) -> np.ndarray:
        """Predicted observable flips as one uint64 bit mask per shot."""
        s = _as_syndrome_matrix(syndromes, self.num_detectors)
        out = np.zeros(s.shape[0], dtype=np.uint64)
        if len(self.relevant) == 0 or s.shape[0] == 0:
            return out
        sub = np.ascontiguousarray(s[:, self.relevant])
        if self.max_defects is not None:
            worst = int(sub.sum(axis=1, dtype=np.int64).max())
            if worst > self.max_defects:
                raise TooManyDefects(f"syndrome with {worst} defects exceeds {self.max_defects}")
        self.blossom_calls += _kernels.decode_batch(
            sub, self._dist, self._bnd, self._pair_mask, self._bnd_mask, self.dp_limit, out
        )
        return out

    def decode_batch(self, syndromes: np.ndarray) -> np.ndarray:
        return _mask_to_bits(self.decode_masks(syndromes), self.num_observables)

    def matching_weight(self, syndrome: np.ndarray) -> float:
        """Total weight of the minimum matching chosen for ``syndrome``."""
        s = np.asarray(syndrome, dtype=bool)[self.relevant]
        defects = np.nonzero(s)[0].astype(np.int64)
        stats = np.zeros(2)
        _kernels.match_defects(defects, self._dist, self._bnd, self._pair_mask,
                               self._bnd_mask, self.dp_limit, stats)
        return float(stats[1])


# ---------------------------------------------------------------- lookup


@dataclass(frozen=True)
class Correction:
    location: int
    pauli: str
    observable_mask: int
    multiplicity: int


class LookupDecoder:
    """Syndrome table built from single faults.

    For each syndrome the single faults producing it are grouped by the
    observable flips they cause. The group with the most members wins, and
    its lowest-numbered fault is reported as the correction. Syndromes with
    no single-fault explanation predict no flip.
    """

    def __init__(self, num_detectors: int, num_observables: int,
                 table: dict[bytes, Correction]):
        self.num_detectors = num_detectors
        self.num_observables = num_observables
        self.table = table

    @classmethod
    def from_qepg(cls, g: Qepg, paulis: str = PAULIS) -> LookupDecoder:
        d, k = g.num_detectors, g.num_observables
        bits = unpack_words(g.rows, d + k)
        groups: dict[bytes, dict[int, list[tuple[int, int]]]] = {}
        allowed = [PAULIS.index(p) for p in paulis.upper()]
        for loc in range(g.num_locations):
            for p in allowed:
                row = bits[3 * loc + p]
                if not row[:d].any():
                    continue
                key = np.packbits(row[:d]).tobytes()
                groups.setdefault(key, {}).setdefault(_bits_to_mask(row[d:]), []).append((loc, p))
        table: dict[bytes, Correction] = {}
        for key, by_mask in groups.items():
            # Most frequent explanation first; ties go to the lowest location.
            mask, members = min(by_mask.items(), key=lambda kv: (-len(kv[1]), min(kv[1])))
            loc, p = min(members)
            table[key] = Correction(loc, PAULIS[p], mask, len(members))
        return cls(d, k, table)

    def explain(self, syndrome: np.ndarray) -> Correction | None:
        s = np.asarray(syndrome, dtype=bool)
        if s.shape != (self.num_detectors,):
            raise ValueError(f"syndrome must have length {self.num_detectors}")
        return self.table.get(np.packbits(s).tobytes())

    def decode(self, syndrome: np.ndarray) -> np.ndarray:
        corr = self.explain(syndrome)
        mask = 0 if corr is None else corr.observable_mask
        return _mask_to_bits(np.array([mask], dtype=np.uint64), self.num_observables)[0]

    def decode_masks(self, syndromes: np.ndarray) -> np.ndarray:
        s = _as_syndrome_matrix(syndromes, self.num_detectors).astype(bool)
        packed = np.packbits(s, axis=1)
        out = np.zeros(s.shape[0], dtype=np.uint64)
        for i in range(s.shape[0]):
            corr = self.table.get(packed[i].tobytes())
            if corr is not None:
                out[i] = corr.observable_mask
        return out

    def decode_batch(self, syndromes: np.ndarray) -> np.ndarray:
        return _mask_to_bits(self.decode_masks(syndromes), self.num_observables)


def decode_lookup(table: LookupDecoder, syndrome: np.ndarray) -> np.ndarray:
    return table.decode(syndrome)


def decode_mwpm(decoder: MwpmDecoder, syndrome: np.ndarray) -> np.ndarray:
    return decoder.decode(syndrome)
