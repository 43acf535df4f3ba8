"""Circuit data model, Stim-subset text format, and code generators.

Supported instructions (one gate per target, or per target pair for CX):

    R, M, MR, X, Y, Z, H, S, I, CX (alias CNOT, ZCX), TICK,
    DETECTOR rec[-k] ..., OBSERVABLE_INCLUDE(k) rec[-k] ...

Anything else is rejected by :func:`parse_circuit`.

Fault locations follow a single rule: every qubit touched by a gate, an
explicit idle (``I``) or a measurement is one location, and the fault is
injected just *before* that operation. Resets and ticks carry no location
(a fault in front of a reset is erased by it).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

__all__ = [
    "ArityError",
    "BadRecordReference",
    "Circuit",
    "CircuitError",
    "CodeSpec",
    "FaultLocation",
    "Operation",
    "UnknownInstruction",
    "UnsupportedDistance",
    "enumerate_fault_locations",
    "generate_code",
    "parse_circuit",
    "serialize_circuit",
]


class CircuitError(ValueError):
    """Base class for malformed circuits."""


class UnknownInstruction(CircuitError):
    def __init__(self, name: str, line: int):
        super().__init__(f"line {line}: unknown instruction {name!r}")
        self.name = name
        self.line = line


class BadRecordReference(CircuitError):
    def __init__(self, line: int, detail: str = ""):
        msg = f"line {line}: bad measurement record reference"
        super().__init__(f"{msg} ({detail})" if detail else msg)
        self.line = line


class ArityError(CircuitError):
    def __init__(self, line: int, detail: str = ""):
        msg = f"line {line}: wrong number of targets"
        super().__init__(f"{msg} ({detail})" if detail else msg)
        self.line = line


class UnsupportedDistance(ValueError):
    pass


# kind -> text name used when serializing
_KIND_TO_NAME = {
    "reset": "R",
    "measure": "M",
    "measure-reset": "MR",
    "pauli-x": "X",
    "pauli-y": "Y",
    "pauli-z": "Z",
    "hadamard": "H",
    "phase": "S",
    "cnot": "CX",
    "idle": "I",
    "tick": "TICK",
}
_NAME_TO_KIND = {name: kind for kind, name in _KIND_TO_NAME.items()}
_NAME_TO_KIND.update({"CNOT": "cnot", "ZCX": "cnot"})

MEASUREMENT_KINDS = frozenset({"measure", "measure-reset"})
# Kinds that carry no fault location.
_NO_LOCATION_KINDS = frozenset({"reset", "tick"})


@dataclass(frozen=True)
class Operation:
    kind: str
    targets: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _KIND_TO_NAME:
            raise ValueError(f"unknown operation kind {self.kind!r}")
        want = 0 if self.kind == "tick" else 2 if self.kind == "cnot" else 1
        if len(self.targets) != want:
            raise ValueError(f"{self.kind} takes {want} targets, got {len(self.targets)}")
        if self.kind == "cnot" and self.targets[0] == self.targets[1]:
            raise ValueError("cnot control and target must differ")


@dataclass(frozen=True)
class FaultLocation:
    index: int
    op_ref: int
    qubit: int


@dataclass(frozen=True)
class Circuit:
    """An ordered list of operations plus detector/observable declarations.

    Detectors and observables are stored as sorted tuples of absolute
    measurement-record indices (0 = first measurement in the circuit).
    """

    num_qubits: int
    ops: tuple[Operation, ...]
    detectors: tuple[tuple[int, ...], ...] = ()
    observables: tuple[tuple[int, ...], ...] = ()
    num_measurements: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "detectors", tuple(tuple(d) for d in self.detectors))
        object.__setattr__(self, "observables", tuple(tuple(o) for o in self.observables))
        n_meas = 0
        for op in self.ops:
            for q in op.targets:
                if not 0 <= q < self.num_qubits:
                    raise CircuitError(f"qubit {q} out of range for {self.num_qubits} qubits")
            if op.kind in MEASUREMENT_KINDS:
                n_meas += 1
        object.__setattr__(self, "num_measurements", n_meas)
        for group in (self.detectors, self.observables):
            for recs in group:
                if any(not 0 <= r < n_meas for r in recs):
                    raise CircuitError("record reference points past the last measurement")

    @property
    def num_detectors(self) -> int:
        return len(self.detectors)

    @property
    def num_observables(self) -> int:
        return len(self.observables)

    @property
    def num_locations(self) -> int:
        return sum(len(op.targets) for op in self.ops if op.kind not in _NO_LOCATION_KINDS)

    def used_qubits(self) -> set[int]:
        return {q for op in self.ops for q in op.targets}

    def __str__(self) -> str:
        return serialize_circuit(self)


def enumerate_fault_locations(c: Circuit) -> list[FaultLocation]:
    """All fault locations of ``c`` in (operation, target) order."""
    out: list[FaultLocation] = []
    for op_ref, op in enumerate(c.ops):
        if op.kind in _NO_LOCATION_KINDS:
            continue
        for q in op.targets:
            out.append(FaultLocation(len(out), op_ref, q))
    return out


# ---------------------------------------------------------------- parsing

_REC_RE = re.compile(r"^rec\[-(\d+)\]$")
_HEAD_RE = re.compile(r"^([A-Za-z_]+)(?:\(([^)]*)\))?$")


def _xor_records(recs: Iterable[int]) -> tuple[int, ...]:
    acc: set[int] = set()
    for r in recs:
        acc ^= {r}
    return tuple(sorted(acc))


def parse_circuit(text: str) -> Circuit:
    """Parse Stim-subset circuit text into a :class:`Circuit`."""
    ops: list[Operation] = []
    detectors: list[tuple[int, ...]] = []
    observables: dict[int, set[int]] = {}
    n_meas = 0
    max_q = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *args = line.split()
        m = _HEAD_RE.match(head)
        if m is None:
            raise UnknownInstruction(head, lineno)
        name, paren = m.group(1).upper(), m.group(2)

        if name in ("DETECTOR", "OBSERVABLE_INCLUDE"):
            if name == "DETECTOR" and paren is not None:
                raise UnknownInstruction(head, lineno)
            recs = []
            for a in args:
                rm = _REC_RE.match(a)
                if rm is None:
                    raise BadRecordReference(lineno, a)
                k = int(rm.group(1))
                if k == 0 or k > n_meas:
                    raise BadRecordReference(lineno, a)
                recs.append(n_meas - k)
            if name == "DETECTOR":
                detectors.append(_xor_records(recs))
            else:
                try:
                    idx = int(paren) if paren is not None else -1
                except ValueError:
                    idx = -1
                if idx < 0:
                    raise ArityError(lineno, "OBSERVABLE_INCLUDE needs a non-negative index")
                acc = observables.setdefault(idx, set())
                for r in recs:
                    acc ^= {r}
            continue

        kind = _NAME_TO_KIND.get(name)
        if kind is None or paren is not None:
            raise UnknownInstruction(head, lineno)
        try:
            targets = [int(a) for a in args]
        except ValueError:
            raise ArityError(lineno, "targets must be qubit indices") from None
        if any(q < 0 for q in targets):
            raise ArityError(lineno, "negative qubit index")
        if kind == "tick":
            if targets:
                raise ArityError(lineno, "TICK takes no targets")
            ops.append(Operation("tick"))
            continue
        if not targets:
            raise ArityError(lineno, f"{name} needs targets")
        if kind == "cnot":
            if len(targets) % 2:
                raise ArityError(lineno, "CX needs target pairs")
            for c, t in zip(targets[::2], targets[1::2]):
                if c == t:
                    raise ArityError(lineno, "CX control equals target")
                ops.append(Operation("cnot", (c, t)))
        else:
            for q in targets:
                ops.append(Operation(kind, (q,)))
                if kind in MEASUREMENT_KINDS:
                    n_meas += 1
        max_q = max(max_q, *targets)

    if observables and sorted(observables) != list(range(len(observables))):
        raise CircuitError("observable indices must be contiguous from 0")
    obs = [tuple(sorted(observables[i])) for i in range(len(observables))]
    return Circuit(max_q + 1, ops, detectors, obs)


def serialize_circuit(c: Circuit) -> str:
    """Deterministic text form; ``parse_circuit`` inverts it exactly.

    Consecutive operations of the same kind are merged onto one line.
    Declarations are emitted in order, each right after the measurement
    holding its last record.
    """
    lines: list[str] = []
    decls: list[tuple[int, str, tuple[int, ...]]] = []
    for recs in c.detectors:
        decls.append((max(recs, default=-1), "DETECTOR", recs))
    # Observables go after every detector so their order is stable on re-parse.
    for i, recs in enumerate(c.observables):
        decls.append((max(recs, default=-1), f"OBSERVABLE_INCLUDE({i})", recs))

    n_meas = 0
    next_decl = 0
    cur_name: str | None = None
    cur_targets: list[int] = []

    def flush() -> None:
        nonlocal cur_name, cur_targets
        if cur_name is not None:
            lines.append(" ".join([cur_name, *map(str, cur_targets)]) if cur_targets else cur_name)
        cur_name, cur_targets = None, []

    def emit_ready() -> None:
        nonlocal next_decl
        while next_decl < len(decls) and decls[next_decl][0] < n_meas:
            _, head, recs = decls[next_decl]
            flush()
            lines.append(" ".join([head, *(f"rec[-{n_meas - r}]" for r in recs)]))
            next_decl += 1

    emit_ready()
    for op in c.ops:
        name = _KIND_TO_NAME[op.kind]
        if name != cur_name or op.kind == "tick":
            flush()
            cur_name = name
        cur_targets.extend(op.targets)
        if op.kind in MEASUREMENT_KINDS:
            n_meas += 1
            if next_decl < len(decls) and decls[next_decl][0] < n_meas:
                emit_ready()
    flush()
    emit_ready()
    if next_decl != len(decls):
        raise CircuitError("declaration references a missing measurement")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------- generators


@dataclass(frozen=True)
class CodeSpec:
    """Which memory experiment to generate.

    ``rounds`` defaults to ``3 * distance``. ``full_readout`` only affects the
    repetition family: by default only data qubit 0 is read out at the end
    (the small three-qubit demonstration layout); with ``full_readout`` every
    data qubit is measured and closing detectors are added.
    """

    family: str
    distance: int
    rounds: int | None = None
    full_readout: bool = False

    def __post_init__(self) -> None:
        if self.family not in ("repetition", "surface"):
            raise ValueError(f"unknown code family {self.family!r}")
        d = self.distance
        if d < 3 or d % 2 == 0:
            raise UnsupportedDistance(f"distance must be an odd integer >= 3, got {d}")
        if self.rounds is None:
            object.__setattr__(self, "rounds", 3 * d)
        if self.rounds < 1:  # type: ignore[operator]
            raise ValueError("rounds must be >= 1")


class _Builder:
    def __init__(self) -> None:
        self.ops: list[Operation] = []
        self.detectors: list[tuple[int, ...]] = []
        self.n_meas = 0

    def add(self, kind: str, *targets: int) -> None:
        self.ops.append(Operation(kind, tuple(targets)))

    def many(self, kind: str, qubits: Sequence[int]) -> None:
        for q in qubits:
            self.add(kind, q)

    def measure(self, kind: str, qubits: Sequence[int]) -> dict[int, int]:
        recs = {}
        for q in qubits:
            self.add(kind, q)
            recs[q] = self.n_meas
            self.n_meas += 1
        return recs

    def tick(self) -> None:
        self.add("tick")


def generate_code(spec: CodeSpec) -> Circuit:
    """Generate a Z-basis memory experiment for ``spec``."""
    if spec.family == "repetition":
        return _repetition_code(spec.distance, spec.rounds, spec.full_readout)
    return _rotated_surface_code(spec.distance, spec.rounds)


def _repetition_code(d: int, rounds: int, full_readout: bool) -> Circuit:
    data = list(range(d))
    anc = list(range(d, 2 * d - 1))
    b = _Builder()
    b.many("reset", data + anc)
    prev: dict[int, int] | None = None
    for _ in range(rounds):
        b.tick()
        # Alternate the order in which neighbours are visited so that a data
        # qubit shared by two checks talks to its left check first.
        for i, a in enumerate(anc):
            pair = (i, i + 1) if i % 2 == 0 else (i + 1, i)
            for q in pair:
                b.add("cnot", q, a)
        b.tick()
        kind = "measure-reset" if rounds > 1 or full_readout else "measure"
        recs = b.measure(kind, anc)
        for a in anc:
            b.detectors.append((recs[a],) if prev is None else (prev[a], recs[a]))
        prev = recs
    b.tick()
    assert prev is not None
    if full_readout:
        final = b.measure("measure", data)
        for i, a in enumerate(anc):
            b.detectors.append(tuple(sorted((final[i], final[i + 1], prev[a]))))
        obs = (final[0],)
    else:
        obs = (b.measure("measure", [0])[0],)
    return Circuit(2 * d - 1, b.ops, b.detectors, [obs])


def _rotated_surface_code(d: int, rounds: int) -> Circuit:
    # Data qubits sit at odd coordinates (2x+1, 2y+1); checks at even ones.
    data_coords = [(2 * x + 1, 2 * y + 1) for y in range(d) for x in range(d)]
    x_checks: list[tuple[int, int]] = []
    z_checks: list[tuple[int, int]] = []
    for y in range(d + 1):
        for x in range(d + 1):
            parity = (x % 2) != (y % 2)
            if (x in (0, d)) and parity:
                continue
            if (y in (0, d)) and not parity:
                continue
            (x_checks if parity else z_checks).append((2 * x, 2 * y))
    index: dict[tuple[int, int], int] = {}
    for coord in data_coords + x_checks + z_checks:
        index[coord] = len(index)
    data = [index[c] for c in data_coords]
    xs = [index[c] for c in x_checks]
    zs = [index[c] for c in z_checks]
    checks = sorted(xs + zs)

    # Visiting orders chosen so hook errors run perpendicular to the
    # logical operator they could otherwise shorten.
    x_order = [(1, 1), (-1, 1), (1, -1), (-1, -1)]
    z_order = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    layers: list[list[tuple[int, int]]] = []
    for step in range(4):
        layer = []
        for (cx, cy) in x_checks:
            nb = (cx + x_order[step][0], cy + x_order[step][1])
            if nb in index:
                layer.append((index[(cx, cy)], index[nb]))
        for (cx, cy) in z_checks:
            nb = (cx + z_order[step][0], cy + z_order[step][1])
            if nb in index:
                layer.append((index[nb], index[(cx, cy)]))
        layers.append(layer)

    neighbours: dict[int, list[int]] = {q: [] for q in checks}
    for (cx, cy) in x_checks + z_checks:
        for dx, dy in x_order:
            nb = (cx + dx, cy + dy)
            if nb in index:
                neighbours[index[(cx, cy)]].append(index[nb])

    b = _Builder()
    b.many("reset", data + checks)
    prev: dict[int, int] | None = None
    for _ in range(rounds):
        b.tick()
        b.many("hadamard", xs)
        for layer in layers:
            b.tick()
            for c, t in layer:
                b.add("cnot", c, t)
        b.tick()
        b.many("hadamard", xs)
        b.tick()
        recs = b.measure("measure-reset", checks)
        if prev is None:
            for q in zs:
                b.detectors.append((recs[q],))
        else:
            for q in checks:
                b.detectors.append((prev[q], recs[q]))
        prev = recs
    b.tick()
    assert prev is not None
    final = b.measure("measure", data)
    for q in zs:
        b.detectors.append(tuple(sorted([prev[q]] + [final[n] for n in neighbours[q]])))
    # Logical Z: the bottom row of data qubits.
    obs = tuple(sorted(final[index[(2 * x + 1, 1)]] for x in range(d)))
    return Circuit(len(index), b.ops, b.detectors, [obs])
