"""Random small Clifford circuits with valid detectors, for oracle comparisons."""

from __future__ import annotations

import numpy as np

from stratqec.circuit import Circuit, Operation
from tableau_oracle import deterministic_parities

_ONE_QUBIT = ("hadamard", "phase", "pauli-x", "pauli-y", "pauli-z", "idle", "measure",
              "measure-reset", "reset")


def random_circuit(rng: np.random.Generator, max_qubits: int = 10, max_ops: int = 40) -> Circuit:
    n = int(rng.integers(2, max_qubits + 1))
    ops = [Operation("reset", (q,)) for q in range(n)]
    body = int(rng.integers(4, max_ops - 2 * n + 1)) if max_ops - 2 * n >= 4 else 2
    for _ in range(body):
        r = rng.random()
        if r < 0.4:
            a, b = rng.choice(n, size=2, replace=False)
            ops.append(Operation("cnot", (int(a), int(b))))
        elif r < 0.45:
            ops.append(Operation("tick"))
        else:
            kind = _ONE_QUBIT[int(rng.integers(len(_ONE_QUBIT)))]
            ops.append(Operation(kind, (int(rng.integers(n)),)))
    ops += [Operation("measure", (q,)) for q in range(n)]
    bare = Circuit(n, ops)
    basis = deterministic_parities(bare, trials=24, seed=int(rng.integers(1 << 30)))
    dets, obs = [], []
    for _ in range(min(len(basis), 6)):
        pick = rng.random(len(basis)) < 0.5
        recs: set[int] = set()
        for use, vec in zip(pick, basis):
            if use:
                recs ^= set(vec)
        if recs:
            dets.append(tuple(sorted(recs)))
    if basis:
        obs.append(tuple(sorted(basis[int(rng.integers(len(basis)))])))
    return Circuit(n, ops, tuple(dets), tuple(obs))
