"""Rotated surface-code layouts and memory-experiment circuits.

Coordinates follow the usual convention for the rotated code: data qubits sit
on odd grid points ``(2i+1, 2j+1)`` and ancillas on even points ``(2i, 2j)``,
with ``y`` growing downwards.  Qubit ids are ``0 .. d*d-1`` for data qubits
(row-major) followed by the ancillas (row-major by coordinate).

The stabilizer-measurement round mirrors the CZ-based circuits of the
Google Quantum AI memory experiments: ancilla Hadamards, four CZ layers with
data-qubit Hadamard layers between layers 1/2 and 3/4, an all-qubit X layer in
the middle for dynamical decoupling, then ancilla Hadamards, measurement and
reset.  In the last round the ancilla measurement coincides with the final
data-qubit readout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Offsets from an ancilla to its data neighbours (x right, y down).
NW, NE, SW, SE = (-1, -1), (1, -1), (-1, 1), (1, 1)
Z_SHAPE = (NW, NE, SW, SE)
N_SHAPE = (NW, SW, NE, SE)

VARIANTS = ("standard", "zxxz")
BASES = ("X", "Z")

# Op names used in circuits and in their text serialization.
PREP, GATE_X, GATE_H, CZ, MEASURE, RESET, IDLE = "P", "X", "H", "CZ", "M", "R", "I"
OP_ARITY = {PREP: 1, GATE_X: 1, GATE_H: 1, CZ: 2, MEASURE: 1, RESET: 1, IDLE: 1}


@dataclass(frozen=True)
class Ancilla:
    qubit: int
    coord: tuple[int, int]
    kind: str
    schedule: tuple[int | None, ...]
    """Data partner of each of the four CZ layers (``None`` where absent)."""

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q in self.schedule if q is not None)


@dataclass(frozen=True)
class CodeLayout:
    distance: int
    variant: str
    data_coords: tuple[tuple[int, int], ...]
    ancillas: tuple[Ancilla, ...]
    logical_x_support: tuple[int, ...]
    logical_z_support: tuple[int, ...]
    hadamard_data: frozenset[int]
    """Data qubits whose layer-1/4 CZ partners are X-type ancillas.

    The standard compilation wraps these qubits in extra Hadamards at the
    start and end of every round; the zxxz compilation drops that pair, so the
    physical ancillas measure ZXXZ operators.
    """

    @property
    def n_data(self) -> int:
        return len(self.data_coords)

    @property
    def n_ancillas(self) -> int:
        return len(self.ancillas)

    @property
    def n_qubits(self) -> int:
        return self.n_data + self.n_ancillas

    @property
    def data_qubits(self) -> range:
        return range(self.n_data)

    @property
    def ancilla_qubits(self) -> tuple[int, ...]:
        return tuple(a.qubit for a in self.ancillas)

    def ancillas_of(self, kind: str) -> list[int]:
        """Ancilla indices (not qubit ids) of the given stabilizer type."""
        return [i for i, a in enumerate(self.ancillas) if a.kind == kind]

    def logical_support(self, basis: str) -> tuple[int, ...]:
        return self.logical_z_support if basis == "Z" else self.logical_x_support

    def stabilizer_matrix(self, kind: str) -> np.ndarray:
        """Binary ancilla-by-data incidence matrix for one stabilizer type."""
        rows = [a for a in self.ancillas if a.kind == kind]
        mat = np.zeros((len(rows), self.n_data), dtype=np.uint8)
        for i, a in enumerate(rows):
            mat[i, list(a.support)] = 1
        return mat

    def support_matrix(self) -> np.ndarray:
        """Binary incidence matrix over all ancillas (layout order)."""
        mat = np.zeros((self.n_ancillas, self.n_data), dtype=np.uint8)
        for i, a in enumerate(self.ancillas):
            mat[i, list(a.support)] = 1
        return mat


def build_layout(distance: int, variant: str = "standard") -> CodeLayout:
    """Build the rotated surface code of odd ``distance`` >= 3."""
    if isinstance(distance, bool) or not isinstance(distance, (int, np.integer)):
        raise TypeError("distance must be an integer")
    d = int(distance)
    if d < 3 or d % 2 == 0:
        raise ValueError(f"distance must be odd and >= 3, got {d}")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")

    data_coords = tuple((2 * i + 1, 2 * j + 1) for j in range(d) for i in range(d))
    data_id = {c: q for q, c in enumerate(data_coords)}

    placed = []
    for j in range(d + 1):
        for i in range(d + 1):
            kind = "X" if (i + j) % 2 == 0 else "Z"
            bulk = 1 <= i <= d - 1 and 1 <= j <= d - 1
            top_bottom = j in (0, d) and 1 <= i <= d - 1 and kind == "X"
            left_right = i in (0, d) and 1 <= j <= d - 1 and kind == "Z"
            if bulk or top_bottom or left_right:
                placed.append(((2 * i, 2 * j), kind))

    def line(horizontal: bool) -> tuple[int, ...]:
        if horizontal:
            return tuple(data_id[(2 * i + 1, 1)] for i in range(d))
        return tuple(data_id[(1, 2 * j + 1)] for j in range(d))

    def neighbours(coord):
        x, y = coord
        return [data_id.get((x + dx, y + dy)) for dx, dy in Z_SHAPE]

    def commutes(support, kind):
        s = set(support)
        return all(
            len(s.intersection(q for q in neighbours(c) if q is not None)) % 2 == 0
            for c, k in placed
            if k == kind
        )

    # A logical of one type is the straight line commuting with the other type.
    logical_z = next(line(h) for h in (True, False) if commutes(line(h), "X"))
    logical_x = next(line(h) for h in (True, False) if commutes(line(h), "Z"))

    # Hook errors (last two CZ partners) must run perpendicular to the
    # logical of the same type.
    def order_for(logical):
        horizontal_logical = len({data_coords[q][1] for q in logical}) == 1
        # Z shape ends on a horizontal pair (SW, SE); N shape on a vertical one.
        return N_SHAPE if horizontal_logical else Z_SHAPE

    orders = {"X": order_for(logical_x), "Z": order_for(logical_z)}

    n_data = d * d
    ancillas = []
    for k, (coord, kind) in enumerate(placed):
        x, y = coord
        schedule = tuple(data_id.get((x + dx, y + dy)) for dx, dy in orders[kind])
        ancillas.append(Ancilla(n_data + k, coord, kind, schedule))

    # Data (2i+1, 2j+1) meets ancilla site (2i+2, 2j+2) in layer 1; that
    # site is X-type iff i + j is even, whether or not it hosts an ancilla.
    hadamard_data = frozenset(j * d + i for j in range(d) for i in range(d) if (i + j) % 2 == 0)
    return CodeLayout(
        distance=d,
        variant=variant,
        data_coords=data_coords,
        ancillas=tuple(ancillas),
        logical_x_support=logical_x,
        logical_z_support=logical_z,
        hadamard_data=hadamard_data,
    )


@dataclass(frozen=True)
class Circuit:
    """Timestep-ordered operations of a memory experiment.

    ``timesteps[t]`` is a tuple of ``(op, qubits)`` pairs.  Measurement
    records are numbered in order of appearance; ``meas_qubit`` and
    ``meas_round`` give the measured qubit and QEC round of each record.
    """

    n_qubits: int
    timesteps: tuple[tuple[tuple[str, tuple[int, ...]], ...], ...]
    distance: int
    rounds: int
    basis: str
    bitstring: tuple[int, ...]
    variant: str
    dd: bool = True
    meas_qubit: np.ndarray = field(init=False, repr=False, compare=False)
    meas_round: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        qubits, rounds = [], []
        r = 1
        for step in self.timesteps:
            measured = [qs[0] for op, qs in step if op == MEASURE]
            if not measured:
                continue
            qubits.extend(measured)
            rounds.extend([r] * len(measured))
            r += 1
        object.__setattr__(self, "meas_qubit", np.asarray(qubits, dtype=np.int64))
        object.__setattr__(self, "meas_round", np.asarray(rounds, dtype=np.int64))

    @property
    def n_measurements(self) -> int:
        return len(self.meas_qubit)

    def measurement_index(self) -> dict[tuple[int, int], int]:
        """Map ``(qubit, round) -> record index``; final data readout is round ``rounds``."""
        return {(int(q), int(r)): i for i, (q, r) in enumerate(zip(self.meas_qubit, self.meas_round))}

    def ancilla_records(self, n_data: int) -> np.ndarray:
        """Record indices of ancilla outcomes, shape ``(rounds, n_ancillas)``."""
        mask = self.meas_qubit >= n_data
        idx = np.flatnonzero(mask)
        return idx.reshape(self.rounds, -1)

    def data_records(self, n_data: int) -> np.ndarray:
        """Record indices of the final data-qubit outcomes, ordered by qubit id."""
        idx = np.flatnonzero(self.meas_qubit < n_data)
        return idx[np.argsort(self.meas_qubit[idx], kind="stable")]

    def count(self, op: str) -> int:
        return sum(1 for step in self.timesteps for o, _ in step if o == op)

    def to_text(self) -> str:
        bits = "".join(str(b) for b in self.bitstring)
        lines = [
            f"# distance={self.distance}",
            f"# rounds={self.rounds}",
            f"# basis={self.basis}",
            f"# bitstring={bits}",
            f"# variant={self.variant}",
            f"# dd={int(self.dd)}",
            f"# qubits={self.n_qubits}",
        ]
        for step in self.timesteps:
            lines.append(" ".join(f"{op} " + " ".join(map(str, qs)) for op, qs in step))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        meta = {}
        steps = []
        for raw in text.splitlines():
            if raw.startswith("#"):
                key, _, value = raw[1:].strip().partition("=")
                meta[key] = value
                continue
            tokens = raw.split()
            step, k = [], 0
            while k < len(tokens):
                op = tokens[k]
                if op not in OP_ARITY:
                    raise ValueError(f"unknown op {op!r}")
                n = OP_ARITY[op]
                step.append((op, tuple(int(t) for t in tokens[k + 1 : k + 1 + n])))
                k += 1 + n
            steps.append(tuple(step))
        try:
            return cls(
                n_qubits=int(meta["qubits"]),
                timesteps=tuple(steps),
                distance=int(meta["distance"]),
                rounds=int(meta["rounds"]),
                basis=meta["basis"],
                bitstring=tuple(int(c) for c in meta["bitstring"]),
                variant=meta["variant"],
                dd=bool(int(meta["dd"])),
            )
        except KeyError as exc:
            raise ValueError(f"circuit header lacks {exc.args[0]!r}") from None


def _step(ops: Iterable[tuple[str, tuple[int, ...]]], n_qubits: int):
    """Complete a timestep with idles for every untouched qubit."""
    ops = list(ops)
    used = [q for _, qs in ops for q in qs]
    if len(used) != len(set(used)):
        raise AssertionError("qubit used twice in one timestep")
    busy = set(used)
    ops.extend((IDLE, (q,)) for q in range(n_qubits) if q not in busy)
    return tuple(ops)


def build_memory_circuit(
    layout: CodeLayout,
    rounds: int,
    basis: str = "Z",
    bitstring: Sequence[int] | None = None,
    dd: bool = True,
) -> Circuit:
    """Memory experiment with ``rounds`` QEC rounds followed by data readout.

    ``rounds`` counts stabilizer-measurement rounds, so the circuit records
    ``rounds * (d*d - 1)`` ancilla outcomes and ``d*d`` data outcomes.
    ``dd=False`` drops the mid-round X layer (used by tests only).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if basis not in BASES:
        raise ValueError(f"basis must be 'X' or 'Z', got {basis!r}")
    n_data, nq = layout.n_data, layout.n_qubits
    bits = tuple(int(b) for b in (bitstring if bitstring is not None else [0] * n_data))
    if len(bits) != n_data or any(b not in (0, 1) for b in bits):
        raise ValueError(f"bitstring must be {n_data} bits")

    anc = layout.ancilla_qubits
    data = list(range(n_data))
    had = sorted(layout.hadamard_data)
    # Data qubits rotated by preparation (and un-rotated before readout):
    # the basis rotation composed with the round-entry frame change.
    basis_rot = set(data) if basis == "X" else set()
    prep_rot = sorted(basis_rot.symmetric_difference(had))
    round_data_h = had if layout.variant == "standard" else []

    cz_layers = []
    for layer in range(4):
        pairs = []
        for a in layout.ancillas:
            q = a.schedule[layer]
            if q is not None:
                pairs.append((CZ, (a.qubit, q)))
        cz_layers.append(pairs)

    steps = []
    add = lambda ops: steps.append(_step(ops, nq))  # noqa: E731
    add((PREP, (q,)) for q in range(nq))
    add((GATE_X, (q,)) for q in data if bits[q])
    add([(GATE_H, (q,)) for q in anc] + [(GATE_H, (q,)) for q in prep_rot])
    for r in range(1, rounds + 1):
        if r > 1:
            add([(GATE_H, (q,)) for q in anc] + [(GATE_H, (q,)) for q in round_data_h])
        add(cz_layers[0])
        add((GATE_H, (q,)) for q in data)
        add(cz_layers[1])
        if dd:
            add((GATE_X, (q,)) for q in range(nq))
        add(cz_layers[2])
        add((GATE_H, (q,)) for q in data)
        add(cz_layers[3])
        if r < rounds:
            add([(GATE_H, (q,)) for q in anc] + [(GATE_H, (q,)) for q in round_data_h])
            add((MEASURE, (q,)) for q in anc)
            add((RESET, (q,)) for q in anc)
        else:
            add([(GATE_H, (q,)) for q in anc] + [(GATE_H, (q,)) for q in prep_rot])
            add([(MEASURE, (q,)) for q in anc] + [(MEASURE, (q,)) for q in data])

    return Circuit(
        n_qubits=nq,
        timesteps=tuple(steps),
        distance=layout.distance,
        rounds=rounds,
        basis=basis,
        bitstring=bits,
        variant=layout.variant,
        dd=dd,
    )
