"""Quantum error propagation graph: per-fault detector/observable flips.

Row ``3 * loc + pauli`` (pauli 0=X, 1=Y, 2=Z) holds the flips caused by a
single Pauli fault at location ``loc``, packed little-endian into uint64
words: bits ``0..D-1`` are detectors, bits ``D..D+K-1`` observables.
Flips are parities relative to the fault-free run, so compiling only needs
Pauli-frame propagation.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .circuit import Circuit, enumerate_fault_locations

PAULIS = "XYZ"
_MAGIC = b"QEPG"
_FORMAT_VERSION = 1


class NonCliffordOp(ValueError):
    pass


class LocationOutOfRange(IndexError):
    pass


@dataclass(frozen=True)
class FaultSet:
    """Pauli faults at distinct locations, e.g. ``FaultSet.of((2, "X"))``."""

    entries: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        entries = tuple((int(loc), _pauli_index(p)) for loc, p in self.entries)
        locs = [loc for loc, _ in entries]
        if len(set(locs)) != len(locs):
            raise ValueError("fault locations must be distinct within one fault set")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def of(cls, *entries: tuple[int, int | str]) -> FaultSet:
        return cls(tuple(entries))  # type: ignore[arg-type]

    @property
    def weight(self) -> int:
        return len(self.entries)


def _pauli_index(p: int | str) -> int:
    if isinstance(p, str):
        try:
            return PAULIS.index(p.upper())
        except ValueError:
            raise ValueError(f"unknown Pauli {p!r}") from None
    if p not in (0, 1, 2):
        raise ValueError(f"unknown Pauli {p!r}")
    return int(p)


@dataclass(frozen=True, eq=False)
class ShotOutcome:
    syndrome: np.ndarray
    observable_flips: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ShotOutcome):
            return NotImplemented
        return np.array_equal(self.syndrome, other.syndrome) and np.array_equal(
            self.observable_flips, other.observable_flips
        )

    def __hash__(self) -> int:
        return hash((self.syndrome.tobytes(), self.observable_flips.tobytes()))


@dataclass(frozen=True, eq=False)
class Qepg:
    num_locations: int
    num_detectors: int
    num_observables: int
    rows: np.ndarray

    @property
    def num_words(self) -> int:
        return self.rows.shape[1]

    def row_bits(self, loc: int, pauli: int | str) -> np.ndarray:
        """Unpacked flips (length D+K) of a single fault."""
        r = 3 * loc + _pauli_index(pauli)
        return unpack_words(self.rows[r : r + 1], self.num_detectors + self.num_observables)[0]

    def _row_index(self, fs: FaultSet, width: int) -> np.ndarray:
        idx = np.full(width, -1, dtype=np.int64)
        for j, (loc, p) in enumerate(fs.entries):
            if not 0 <= loc < self.num_locations:
                raise LocationOutOfRange(f"location {loc} not in [0, {self.num_locations})")
            idx[j] = 3 * loc + p
        return idx

    def evaluate(self, fs: FaultSet) -> ShotOutcome:
        return self.evaluate_batch([fs])[0]

    def evaluate_batch(self, fault_sets: Sequence[FaultSet]) -> list[ShotOutcome]:
        if not fault_sets:
            return []
        width = max(1, max(fs.weight for fs in fault_sets))
        idx = np.stack([self._row_index(fs, width) for fs in fault_sets])
        packed = self.xor(idx)
        bits = unpack_words(packed, self.num_detectors + self.num_observables)
        d = self.num_detectors
        return [ShotOutcome(b[:d].copy(), b[d:].copy()) for b in bits]

    def xor(self, row_idx: np.ndarray) -> np.ndarray:
        """Packed outcomes for an ``(n, w)`` array of row indices (-1 = none)."""
        out = np.empty((row_idx.shape[0], self.num_words), dtype=np.uint64)
        _kernels.xor_rows(self.rows, np.ascontiguousarray(row_idx, dtype=np.int64), out)
        return out

    # ---- binary cache

    def dump(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(_MAGIC)
        buf.write(struct.pack("<IQQQQ", _FORMAT_VERSION, self.num_locations, self.num_detectors,
                              self.num_observables, self.num_words))
        buf.write(np.ascontiguousarray(self.rows, dtype="<u8").tobytes())
        return buf.getvalue()

    @classmethod
    def load(cls, path: str | Path) -> Qepg:
        return cls.from_bytes(Path(path).read_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> Qepg:
        if data[:4] != _MAGIC:
            raise ValueError("not a QEPG dump")
        header = struct.calcsize("<IQQQQ")
        version, c, d, k, nw = struct.unpack("<IQQQQ", data[4 : 4 + header])
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported QEPG dump version {version}")
        if nw != _words_for(d + k):
            raise ValueError("corrupt QEPG header")
        rows = np.frombuffer(data, dtype="<u8", offset=4 + header).astype(np.uint64)
        if rows.size != 3 * c * nw:
            raise ValueError("truncated QEPG dump")
        return cls(c, d, k, rows.reshape(3 * c, nw))


def _words_for(nbits: int) -> int:
    return max(1, (nbits + 63) // 64)


def unpack_words(packed: np.ndarray, nbits: int) -> np.ndarray:
    """(n, W) uint64 -> (n, nbits) bool, bit i of word j is column 64*j+i."""
    as_bytes = np.ascontiguousarray(packed, dtype="<u8").view(np.uint8)
    return np.unpackbits(as_bytes, axis=1, bitorder="little")[:, :nbits].astype(bool)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Inverse of :func:`unpack_words` for an (n, nbits) bool array."""
    n, nbits = bits.shape
    nw = _words_for(nbits)
    padded = np.zeros((n, nw * 64), dtype=np.uint8)
    padded[:, :nbits] = bits
    return np.packbits(padded, axis=1, bitorder="little").view("<u8").astype(np.uint64)


def compile_qepg(c: Circuit) -> Qepg:
    """Propagate every single fault of ``c`` and tabulate its flips.

    All 3*C faults travel together: each qubit carries an X-frame and a
    Z-frame, held as Python ints whose bit ``3*loc+pauli`` says whether that
    fault currently has an X (resp. Z) component on the qubit.
    """
    locs = enumerate_fault_locations(c)
    num_loc = len(locs)
    by_op: dict[int, list[int]] = {}
    for fl in locs:
        by_op.setdefault(fl.op_ref, []).append(fl.index)

    xf = [0] * c.num_qubits
    zf = [0] * c.num_qubits
    records: list[int] = []
    for op_ref, op in enumerate(c.ops):
        for li in by_op.get(op_ref, ()):
            q = locs[li].qubit
            base = 3 * li
            xf[q] ^= (1 << base) | (1 << (base + 1))
            zf[q] ^= (1 << (base + 1)) | (1 << (base + 2))
        kind = op.kind
        if kind == "cnot":
            a, b = op.targets
            xf[b] ^= xf[a]
            zf[a] ^= zf[b]
        elif kind == "hadamard":
            (q,) = op.targets
            xf[q], zf[q] = zf[q], xf[q]
        elif kind == "phase":
            (q,) = op.targets
            zf[q] ^= xf[q]
        elif kind in ("measure", "measure-reset"):
            (q,) = op.targets
            records.append(xf[q])
            zf[q] = 0
            if kind == "measure-reset":
                xf[q] = 0
        elif kind == "reset":
            (q,) = op.targets
            xf[q] = zf[q] = 0
        elif kind in ("pauli-x", "pauli-y", "pauli-z", "idle", "tick"):
            pass
        else:
            raise NonCliffordOp(kind)

    columns = [_parity(records, recs) for recs in c.detectors]
    columns += [_parity(records, recs) for recs in c.observables]
    nbits = len(columns)
    nrows = 3 * num_loc
    nbytes = (nrows + 7) // 8
    if nbits and nrows:
        cols = np.frombuffer(b"".join(v.to_bytes(nbytes, "little") for v in columns), dtype=np.uint8)
        cols = np.unpackbits(cols.reshape(nbits, nbytes), axis=1, bitorder="little")[:, :nrows]
        rows = pack_bits(cols.T.astype(bool))
    else:
        rows = np.zeros((nrows, _words_for(nbits)), dtype=np.uint64)
    return Qepg(num_loc, c.num_detectors, c.num_observables, rows)


def _parity(records: list[int], recs: Iterable[int]) -> int:
    acc = 0
    for r in recs:
        acc ^= records[r]
    return acc
