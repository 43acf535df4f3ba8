"""Dense stabilizer-tableau simulator used as an independent test oracle.

It runs the circuit gate by gate (Aaronson-Gottesman), physically inserting
Pauli gates at the requested fault locations, and reports detector and
observable values. Nothing here shares code with the QEPG compiler.
"""

from __future__ import annotations

import numpy as np

from stratqec.circuit import Circuit, enumerate_fault_locations


class Tableau:
    """Aaronson-Gottesman tableau; each row's X and Z parts are Python int bitmasks."""

    def __init__(self, n: int, rng: np.random.Generator):
        self.n = n
        self.rng = rng
        # rows 0..n-1 destabilizers, n..2n-1 stabilizers, row 2n scratch
        self.x = [0] * (2 * n + 1)
        self.z = [0] * (2 * n + 1)
        self.r = [0] * (2 * n + 1)
        for i in range(n):
            self.x[i] = 1 << i
            self.z[n + i] = 1 << i

    def h(self, q: int) -> None:
        m = 1 << q
        x, z, r = self.x, self.z, self.r
        for i in range(2 * self.n):
            xb, zb = x[i] & m, z[i] & m
            if xb and zb:
                r[i] ^= 1
            if bool(xb) != bool(zb):
                x[i] ^= m
                z[i] ^= m

    def s(self, q: int) -> None:
        m = 1 << q
        x, z, r = self.x, self.z, self.r
        for i in range(2 * self.n):
            if x[i] & m:
                if z[i] & m:
                    r[i] ^= 1
                z[i] ^= m

    def cx(self, a: int, b: int) -> None:
        ma, mb = 1 << a, 1 << b
        x, z, r = self.x, self.z, self.r
        for i in range(2 * self.n):
            xa, zb = bool(x[i] & ma), bool(z[i] & mb)
            xb, za = bool(x[i] & mb), bool(z[i] & ma)
            if xa and zb and (xb == za):
                r[i] ^= 1
            if xa:
                x[i] ^= mb
            if zb:
                z[i] ^= ma

    def pauli(self, q: int, p: str) -> None:
        # X anticommutes with Z components, Z with X components.
        m = 1 << q
        for i in range(2 * self.n):
            flip = 0
            if p in "XY" and self.z[i] & m:
                flip ^= 1
            if p in "ZY" and self.x[i] & m:
                flip ^= 1
            self.r[i] ^= flip

    def _rowsum(self, h: int, i: int) -> None:
        x1, z1, x2, z2 = self.x[i], self.z[i], self.x[h], self.z[h]
        y1, xo, zo = x1 & z1, x1 & ~z1, z1 & ~x1
        plus = (y1 & z2 & ~x2) | (xo & z2 & x2) | (zo & x2 & ~z2)
        minus = (y1 & x2 & ~z2) | (xo & z2 & ~x2) | (zo & x2 & z2)
        g = bin(plus).count("1") - bin(minus).count("1")
        self.r[h] = 1 if (2 * self.r[h] + 2 * self.r[i] + g) % 4 == 2 else 0
        self.x[h] = x2 ^ x1
        self.z[h] = z2 ^ z1

    def measure(self, q: int) -> int:
        n, m = self.n, 1 << q
        p = next((i for i in range(n, 2 * n) if self.x[i] & m), None)
        if p is not None:
            for h in range(2 * n):
                if h != p and self.x[h] & m:
                    self._rowsum(h, p)
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p], self.z[p], self.r[p]
            self.x[p], self.z[p] = 0, m
            outcome = int(self.rng.integers(2))
            self.r[p] = outcome
            return outcome
        s = 2 * n
        self.x[s] = self.z[s] = self.r[s] = 0
        for i in range(n):
            if self.x[i] & m:
                self._rowsum(s, i + n)
        return self.r[s]

    def reset(self, q: int) -> None:
        if self.measure(q):
            self.pauli(q, "X")


def run(c: Circuit, faults: dict[int, str], rng: np.random.Generator) -> list[int]:
    """Measurement record of ``c`` with Paulis inserted before the given locations."""
    by_op: dict[int, list[tuple[int, str]]] = {}
    for fl in enumerate_fault_locations(c):
        if fl.index in faults:
            by_op.setdefault(fl.op_ref, []).append((fl.qubit, faults[fl.index]))
    t = Tableau(c.num_qubits, rng)
    rec: list[int] = []
    for k, op in enumerate(c.ops):
        for q, p in by_op.get(k, ()):
            t.pauli(q, p)
        kind, tg = op.kind, op.targets
        if kind == "cnot":
            t.cx(*tg)
        elif kind == "hadamard":
            t.h(tg[0])
        elif kind == "phase":
            t.s(tg[0])
        elif kind in ("pauli-x", "pauli-y", "pauli-z"):
            t.pauli(tg[0], kind[-1].upper())
        elif kind == "measure":
            rec.append(t.measure(tg[0]))
        elif kind == "measure-reset":
            rec.append(t.measure(tg[0]))
            t.reset(tg[0])
        elif kind == "reset":
            t.reset(tg[0])
    return rec


def declared_values(c: Circuit, rec: list[int]) -> tuple[np.ndarray, np.ndarray]:
    det = np.array([sum(rec[r] for r in d) % 2 for d in c.detectors], dtype=bool)
    obs = np.array([sum(rec[r] for r in o) % 2 for o in c.observables], dtype=bool)
    return det, obs


def flips(c: Circuit, faults: dict[int, str], seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Detector/observable flips of a faulty run relative to a fault-free run."""
    ref = declared_values(c, run(c, {}, np.random.default_rng(seed)))
    got = declared_values(c, run(c, faults, np.random.default_rng(seed + 1)))
    return ref[0] ^ got[0], ref[1] ^ got[1]


def deterministic_parities(c: Circuit, trials: int = 48, seed: int = 0) -> list[tuple[int, ...]]:
    """A GF(2) basis of measurement parities that never vary across fault-free runs."""
    rng = np.random.default_rng(seed)
    runs = np.array([run(c, {}, rng) for _ in range(trials)], dtype=np.uint8)
    m = runs.shape[1]
    if m == 0:
        return []
    diffs = runs[1:] ^ runs[0]
    return [tuple(np.nonzero(v)[0].tolist()) for v in _nullspace_gf2(diffs, m)]


def _nullspace_gf2(a: np.ndarray, ncols: int) -> list[np.ndarray]:
    a = a.copy() % 2
    pivots = []
    row = 0
    for col in range(ncols):
        hit = np.nonzero(a[row:, col])[0] if row < a.shape[0] else []
        if len(hit) == 0:
            continue
        p = row + hit[0]
        a[[row, p]] = a[[p, row]]
        for r in range(a.shape[0]):
            if r != row and a[r, col]:
                a[r] ^= a[row]
        pivots.append(col)
        row += 1
        if row == a.shape[0]:
            break
    free = [cidx for cidx in range(ncols) if cidx not in pivots]
    basis = []
    for f in free:
        v = np.zeros(ncols, dtype=np.uint8)
        v[f] = 1
        for r, pc in enumerate(pivots):
            if a[r, f]:
                v[pc] = 1
        basis.append(v)
    return basis
