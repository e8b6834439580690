"""Detector error models and matching graphs.

Every Pauli component of every noise channel is injected on its own into a
noiseless frame propagation; the defects it triggers and whether it flips the
logical observable define an elementary mechanism.  Detector ids flatten the
defect tensor index: ``row * n_ancillas + ancilla``, rows ``0 .. rounds``
where the last row holds the final defects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .layout import CodeLayout
from .noise import NoisyCircuit, PAULI_BITS, channel_paulis
from .sim import _Events, _compile, _propagate, reference_frame, words_to_bool
from .syndrome import defects_from_flips

# Injections propagated together; 64 share one machine word.
CHUNK = 64 * 512


def xor_prob(p1: float, p2: float) -> float:
    """Probability that exactly one of two independent events occurs."""
    return p1 * (1 - p2) + p2 * (1 - p1)


@dataclass
class Mechanism:
    detectors: tuple[int, ...]
    logical: bool
    p_circuit: float = 0.0
    p_assign: float = 0.0
    records: tuple[int, ...] = ()
    """Measurement records whose assignment errors feed ``p_assign``."""

    @property
    def p(self) -> float:
        return xor_prob(self.p_circuit, self.p_assign)


@dataclass
class DetectorErrorModel:
    mechanisms: list[Mechanism]
    n_ancillas: int
    rounds: int
    active: np.ndarray
    """Bool mask over detector ids: detectors that can fire at all."""
    ancilla_kinds: tuple[str, ...]

    @property
    def n_detectors(self) -> int:
        return len(self.active)

    def detector_coords(self, det: int) -> tuple[int, int]:
        """``(row, ancilla)`` of a detector id."""
        return divmod(int(det), self.n_ancillas)

    def to_text(self) -> str:
        lines = [f"# rounds={self.rounds}", f"# ancillas={self.n_ancillas}"]
        rows = []
        for m in self.mechanisms:
            toks = [repr(float(m.p))] + [f"D{d}" for d in m.detectors] + (["L"] if m.logical else [])
            rows.append(" ".join(toks))
        return "\n".join(lines + sorted(rows)) + "\n"

    def sample(self, n_shots: int, rng: np.random.Generator):
        """Sample defects and logical flips by firing each mechanism independently."""
        det = np.zeros((n_shots, self.n_detectors), dtype=np.uint8)
        obs = np.zeros(n_shots, dtype=np.uint8)
        for m in self.mechanisms:
            hit = rng.random(n_shots) < m.p
            if not hit.any():
                continue
            for d in m.detectors:
                det[hit, d] ^= 1
            if m.logical:
                obs[hit] ^= 1
        return det, obs


def _injections(noisy: NoisyCircuit):
    """All single-Pauli injections as ``(slot, qubit, x, z, injection id)`` rows plus their sources."""
    rows, sources = [], []
    for ci, ch in enumerate(noisy.channels):
        for pauli, prob in channel_paulis(ch):
            k = len(sources)
            for qubit, letter in zip(ch.qubits, pauli):
                xb, zb = PAULI_BITS[letter]
                if xb or zb:
                    rows.append((2 * ch.timestep + ch.stage, qubit, xb, zb, k))
            sources.append((ci, pauli, prob, ch.kind))
    return np.asarray(rows, dtype=np.int64).reshape(-1, 5), sources


def detector_mask(noisy: NoisyCircuit, layout: CodeLayout, basis: str) -> np.ndarray:
    circuit = noisy.circuit
    frame = reference_frame(circuit)
    n_anc = layout.n_ancillas
    mask = np.ones((circuit.rounds + 1, n_anc), dtype=bool)
    mask[0] = frame.deterministic[:n_anc]
    mask[-1] = False
    mask[-1, layout.ancillas_of(basis)] = True
    return mask.ravel()


def extract_dem(noisy: NoisyCircuit, layout: CodeLayout, basis: str) -> DetectorErrorModel:
    """Exhaustive single-error detector error model of an annotated circuit."""
    circuit = noisy.circuit
    if circuit.basis != basis or circuit.distance != layout.distance:
        raise ValueError("circuit does not match layout/basis")
    frame = reference_frame(circuit)
    prog = _compile(circuit)
    first = frame.deterministic[: layout.n_ancillas]
    rows, sources = _injections(noisy)
    order = np.argsort(rows[:, 4], kind="stable")
    rows = rows[order]
    merged: dict[tuple, Mechanism] = {}
    n_src = len(sources)
    bounds = np.searchsorted(rows[:, 4], np.arange(0, n_src + CHUNK, CHUNK))
    for c, start in enumerate(range(0, n_src, CHUNK)):
        stop = min(start + CHUNK, n_src)
        part = rows[bounds[c] : bounds[c + 1]]
        events = _Events(part[:, 0], part[:, 1], part[:, 2].astype(bool), part[:, 3].astype(bool), part[:, 4] - start)
        n = stop - start
        flips = words_to_bool(_propagate(prog, n, events.sorted(), None), n)
        defects, logical = defects_from_flips(flips, first, layout, basis)
        flat = defects.reshape(n, -1)
        for i in range(n):
            dets = tuple(np.flatnonzero(flat[i]).tolist())
            lg = bool(logical[i])
            if not dets and not lg:
                continue
            ci, pauli, prob, kind = sources[start + i]
            key = (dets, lg)
            m = merged.get(key)
            if m is None:
                m = merged[key] = Mechanism(dets, lg)
            if kind == "assign":
                ch = noisy.channels[ci]
                rec = _record_of(circuit, ch.timestep, ch.qubits[0])
                m.p_assign = xor_prob(m.p_assign, prob)
                m.records = m.records + (rec,)
            else:
                m.p_circuit = xor_prob(m.p_circuit, prob)
    mechs = sorted(merged.values(), key=lambda m: (m.detectors, m.logical))
    kinds = tuple(a.kind for a in layout.ancillas)
    return DetectorErrorModel(mechs, layout.n_ancillas, circuit.rounds, detector_mask(noisy, layout, basis), kinds)


def _record_of(circuit, timestep: int, qubit: int) -> int:
    cache = circuit.__dict__.get("_record_at")
    if cache is None:
        cache, rec = {}, 0
        for t, step in enumerate(circuit.timesteps):
            for op, qs in step:
                if op == "M":
                    cache[(t, qs[0])] = rec
                    rec += 1
        object.__setattr__(circuit, "_record_at", cache)
    return cache[(timestep, qubit)]


BOUNDARY = -1


@dataclass
class Edge:
    u: int
    v: int
    """Second endpoint, or ``BOUNDARY``."""
    p_circuit: float
    p_assign: float
    flip: bool
    mechanisms: list[int] = field(default_factory=list)
    records: tuple[int, ...] = ()
    kind: str = "space"

    @property
    def p(self) -> float:
        return xor_prob(self.p_circuit, self.p_assign)

    @property
    def weight(self) -> float:
        return edge_weight(self.p)


def edge_weight(p: float) -> float:
    if not 0 < p < 0.5:
        raise ValueError(f"edge probability {p} outside (0, 1/2): weight would be non-positive or infinite")
    return math.log((1 - p) / p)


@dataclass
class MatchingGraph:
    n_detectors: int
    n_ancillas: int
    edges: list[Edge]
    undecomposed: list[int] = field(default_factory=list)
    conflicts: list[int] = field(default_factory=list)

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(e.u, e.v): i for i, e in enumerate(self.edges)}

    def diagnostics(self) -> str:
        return (
            f"{len(self.edges)} edges, {len(self.undecomposed)} undecomposable mechanisms dropped, "
            f"{len(self.conflicts)} flip conflicts"
        )


def _edge_kind(u: int, v: int, n_anc: int) -> str:
    if v == BOUNDARY:
        return "space"
    (ru, au), (rv, av) = divmod(u, n_anc), divmod(v, n_anc)
    if ru == rv:
        return "space"
    return "time" if au == av else "mixed"


def _key(dets: tuple[int, ...]) -> tuple[int, int]:
    return (dets[0], BOUNDARY) if len(dets) == 1 else (dets[0], dets[1])


def _decompose(dets: tuple[int, ...], logical: bool, known: dict[tuple[int, int], bool]):
    """Split a detector set into known edge signatures whose flips XOR to ``logical``.

    Depth-first over the lowest detector's partner; fewest components found
    first because pairs are tried before the boundary.
    """

    def search(rest: tuple[int, ...], parity: bool):
        if not rest:
            return [] if parity == logical else None
        head, tail = rest[0], rest[1:]
        options = [((head, o), tuple(x for x in tail if x != o)) for o in tail]
        options.append(((head,), tail))
        for sig, remaining in options:
            key = _key(sig)
            if key not in known:
                continue
            found = search(remaining, parity ^ known[key])
            if found is not None:
                return [sig] + found
        return None

    return search(tuple(sorted(dets)), False)


def _split_by_type(dets, logical, known, kinds, n_anc):
    """Decompose X-type and Z-type detectors separately, as the X and Z parts of a Pauli error."""
    x_part = tuple(d for d in dets if kinds[d % n_anc] == "X")
    z_part = tuple(d for d in dets if kinds[d % n_anc] == "Z")
    if not x_part or not z_part:
        return None
    for par in (False, True):
        a = _decompose(x_part, par, known)
        b = _decompose(z_part, logical ^ par, known) if a is not None else None
        if b is not None:
            return a + b
    return None


def build_matching_graph(dem: DetectorErrorModel, decompose: bool = True) -> MatchingGraph:
    """Compile a detector error model into a graph of ≤2-detector edges."""
    n_anc = dem.n_ancillas
    edges: dict[tuple[int, int], Edge] = {}
    conflicts, undecomposed = [], []

    def add(key, p_c, p_a, flip, mid, records):
        e = edges.get(key)
        if e is None:
            edges[key] = Edge(key[0], key[1], p_c, p_a, flip, [mid], tuple(records), _edge_kind(*key, n_anc))
            return
        if e.flip != flip:
            conflicts.append(mid)
            if xor_prob(p_c, p_a) <= e.p:
                return
            e.flip = flip
        e.p_circuit = xor_prob(e.p_circuit, p_c)
        e.p_assign = xor_prob(e.p_assign, p_a)
        e.mechanisms.append(mid)
        e.records = e.records + tuple(records)

    kinds = dem.ancilla_kinds

    def single_type(dets):
        return len({kinds[d % n_anc] for d in dets}) == 1

    big = []
    for i, m in enumerate(dem.mechanisms):
        if 1 <= len(m.detectors) <= 2 and single_type(m.detectors):
            add(_key(m.detectors), m.p_circuit, m.p_assign, m.logical, i, m.records)
        elif m.detectors:
            big.append(i)
        else:
            undecomposed.append(i)
    known = {k: e.flip for k, e in edges.items()}
    for i in big:
        m = dem.mechanisms[i]
        parts = _split_by_type(m.detectors, m.logical, known, kinds, n_anc) if decompose else None
        if parts is None and decompose:
            parts = _decompose(m.detectors, m.logical, known)
        if parts is None:
            if len(m.detectors) <= 2:
                # mixed-type pair with no split available: keep it whole
                add(_key(m.detectors), m.p_circuit, m.p_assign, m.logical, i, m.records)
            else:
                undecomposed.append(i)
            continue
        for sig in parts:
            add(_key(sig), m.p_circuit, m.p_assign, known[_key(sig)], i, m.records)
    ordered = [edges[k] for k in sorted(edges)]
    return MatchingGraph(dem.n_detectors, n_anc, ordered, undecomposed, conflicts)


def neighbours_of(graph: MatchingGraph) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    for i, e in enumerate(graph.edges):
        out.setdefault(e.u, []).append(i)
        if e.v != BOUNDARY:
            out.setdefault(e.v, []).append(i)
    return out

