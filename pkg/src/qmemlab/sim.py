"""Pauli-frame Monte Carlo sampling of noisy memory circuits.

Each shot tracks X/Z frame bits relative to a single noiseless reference run.
Shots are processed in fixed blocks of ``BLOCK_SHOTS``, 64 shots per machine
word; every block draws from its own counter-based Philox stream keyed by
``(seed, block index)``, so results do not depend on how blocks are
scheduled across threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _tableau
from .container import Container
from .layout import CZ, GATE_H, GATE_X, MEASURE, PREP, RESET, Circuit, build_layout
from .noise import PAULI_BITS, NoisyCircuit, channel_paulis, harden

BLOCK_SHOTS = 8192
_ONE = np.uint64(1)


@dataclass(frozen=True)
class ReferenceFrame:
    """Noiseless outcome of every measurement record and of the logical observable.

    Non-deterministic records (random in the ideal circuit) have
    ``deterministic[i] == False``; their reference value is 0.
    """

    outcomes: np.ndarray
    deterministic: np.ndarray
    logical: int


def reference_frame(circuit: Circuit, logical_support=None) -> ReferenceFrame:
    """Run the noiseless circuit on a stabilizer tableau (random outcomes forced to 0)."""
    cached = circuit.__dict__.get("_reference")
    if cached is not None and logical_support is None:
        return cached
    tab = _tableau.Tableau(circuit.n_qubits)
    outcomes, determ = [], []
    for step in circuit.timesteps:
        for op, qs in step:
            if op == GATE_H:
                tab.h(qs[0])
            elif op == CZ:
                tab.cz(*qs)
            elif op == GATE_X:
                tab.gate_x(qs[0])
            elif op == MEASURE:
                m, det = tab.measure(qs[0])
                outcomes.append(m)
                determ.append(det)
            elif op in (RESET, PREP):
                tab.reset(qs[0])
    outcomes = np.asarray(outcomes, dtype=np.uint8)
    determ = np.asarray(determ, dtype=bool)
    if logical_support is None:
        logical_support = build_layout(circuit.distance, circuit.variant).logical_support(circuit.basis)
    data_rec = circuit.data_records(circuit.distance**2)
    logical = int(outcomes[data_rec[list(logical_support)]].sum() % 2)
    frame = ReferenceFrame(outcomes, determ, logical)
    object.__setattr__(circuit, "_reference", frame)
    return frame


@dataclass
class _Program:
    """Per-timestep index arrays of a circuit, ready for word-parallel propagation."""

    n_qubits: int
    n_meas: int
    h: list
    cz: list
    meas: list
    reset: list


def _compile(circuit: Circuit) -> _Program:
    cached = circuit.__dict__.get("_program")
    if cached is not None:
        return cached
    h, cz, meas, reset = [], [], [], []
    rec = 0
    for step in circuit.timesteps:
        hq = [qs[0] for op, qs in step if op == GATE_H]
        pairs = [qs for op, qs in step if op == CZ]
        mq = [qs[0] for op, qs in step if op == MEASURE]
        rq = [qs[0] for op, qs in step if op in (RESET, PREP)]
        h.append(np.asarray(hq, dtype=np.intp) if hq else None)
        if pairs:
            arr = np.asarray(pairs, dtype=np.intp)
            cz.append((arr[:, 0], arr[:, 1]))
        else:
            cz.append(None)
        if mq:
            meas.append((np.asarray(mq, dtype=np.intp), np.arange(rec, rec + len(mq))))
            rec += len(mq)
        else:
            meas.append(None)
        reset.append(np.asarray(rq, dtype=np.intp) if rq else None)
    prog = _Program(circuit.n_qubits, rec, h, cz, meas, reset)
    object.__setattr__(circuit, "_program", prog)
    return prog


@dataclass
class _Events:
    """Single-qubit frame flips, sorted by slot (``2 * timestep + stage``)."""

    slot: np.ndarray
    qubit: np.ndarray
    xbit: np.ndarray
    zbit: np.ndarray
    shot: np.ndarray

    @classmethod
    def empty(cls):
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z.astype(bool), z.astype(bool), z)

    def sorted(self):
        order = np.argsort(self.slot, kind="stable")
        return _Events(self.slot[order], self.qubit[order], self.xbit[order], self.zbit[order], self.shot[order])


def _propagate(prog: _Program, n_shots: int, events: _Events, rng: np.random.Generator | None) -> np.ndarray:
    """Propagate frame flips; returns record flips as words of shape ``(n_meas, n_words)``.

    With ``rng`` given, prepared/reset/measured qubits get a random Z frame,
    which reproduces the randomness of non-deterministic measurements.
    """
    n_words = (n_shots + 63) // 64
    fx = np.zeros((prog.n_qubits, n_words), dtype=np.uint64)
    fz = np.zeros_like(fx)
    out = np.zeros((prog.n_meas, n_words), dtype=np.uint64)
    words = events.shot >> 6
    masks = _ONE << (events.shot & 63).astype(np.uint64)
    bounds = np.searchsorted(events.slot, np.arange(2 * len(prog.h) + 1))

    def apply(slot):
        lo, hi = bounds[slot], bounds[slot + 1]
        if lo == hi:
            return
        q, w, m = events.qubit[lo:hi], words[lo:hi], masks[lo:hi]
        xs, zs = events.xbit[lo:hi], events.zbit[lo:hi]
        if xs.any():
            np.bitwise_xor.at(fx, (q[xs], w[xs]), m[xs])
        if zs.any():
            np.bitwise_xor.at(fz, (q[zs], w[zs]), m[zs])

    for t in range(len(prog.h)):
        apply(2 * t)
        hq = prog.h[t]
        if hq is not None:
            tmp = fx[hq]
            fx[hq] = fz[hq]
            fz[hq] = tmp
        pairs = prog.cz[t]
        if pairs is not None:
            a, b = pairs
            fz[a] ^= fx[b]
            fz[b] ^= fx[a]
        meas = prog.meas[t]
        if meas is not None:
            mq, rec = meas
            out[rec] = fx[mq]
            if rng is not None:
                fz[mq] = rng.integers(0, 2**64, size=(len(mq), n_words), dtype=np.uint64, endpoint=False)
        rq = prog.reset[t]
        if rq is not None:
            fx[rq] = 0
            fz[rq] = 0 if rng is None else rng.integers(0, 2**64, size=(len(rq), n_words), dtype=np.uint64)
        apply(2 * t + 1)
    if n_shots % 64:
        out[:, -1] &= (_ONE << np.uint64(n_shots % 64)) - _ONE
    return out


def words_to_bool(words: np.ndarray, n_shots: int) -> np.ndarray:
    """``(rows, n_words)`` uint64 -> ``(n_shots, rows)`` bool."""
    bits = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")
    return bits[:, :n_shots].T.astype(bool)


@dataclass
class _ChannelGroup:
    kind: str
    probs: np.ndarray
    paulis: list
    slot: np.ndarray
    q1: np.ndarray
    q2: np.ndarray


def _group_channels(noisy: NoisyCircuit) -> list[_ChannelGroup]:
    cached = noisy.__dict__.get("_groups")
    if cached is not None:
        return cached
    buckets: dict = {}
    for ch in noisy.channels:
        if ch.kind == "assign":
            continue
        key = (ch.kind, ch.probs)
        q2 = ch.qubits[1] if len(ch.qubits) > 1 else -1
        buckets.setdefault(key, []).append((2 * ch.timestep + ch.stage, ch.qubits[0], q2, ch))
    groups = []
    for (kind, probs), items in buckets.items():
        arr = np.asarray([it[:3] for it in items], dtype=np.int64)
        paulis = [s for s, _ in channel_paulis(items[0][3])]
        nonzero = np.asarray([pr for pr in probs if pr > 0]) if kind.startswith("pauli") else np.asarray(probs)
        groups.append(_ChannelGroup(kind, nonzero, paulis, arr[:, 0], arr[:, 1], arr[:, 2]))
    object.__setattr__(noisy, "_groups", groups)
    return groups


def _bernoulli_positions(rng: np.random.Generator, p: float, n: int) -> np.ndarray:
    """Sorted indices in ``[0, n)`` of independent Bernoulli(p) successes."""
    if p <= 0 or n == 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1:
        return np.arange(n, dtype=np.int64)
    chunks, last = [], -1
    expected = n * p
    size = int(expected + 6 * np.sqrt(expected) + 64)
    while True:
        gaps = rng.geometric(p, size=size).astype(np.int64)
        pos = last + np.cumsum(gaps)
        chunks.append(pos)
        last = int(pos[-1])
        if last >= n:
            break
        size = max(64, int((n - last) * p * 1.5) + 64)
    pos = np.concatenate(chunks)
    return pos[pos < n]


def _sample_events(groups: list[_ChannelGroup], n_shots: int, rng: np.random.Generator) -> _Events:
    parts = []
    for g in groups:
        total = float(g.probs.sum())
        hits = _bernoulli_positions(rng, total, len(g.slot) * n_shots)
        if len(hits) == 0:
            continue
        loc, shot = np.divmod(hits, n_shots)
        if len(g.paulis) > 1:
            cum = np.cumsum(g.probs) / total
            which = np.minimum(np.searchsorted(cum, rng.random(len(hits)), side="right"), len(cum) - 1)
        else:
            which = np.zeros(len(hits), dtype=np.intp)
        slots = g.slot[loc]
        for k, pauli in enumerate(g.paulis):
            sel = which == k
            if not sel.any():
                continue
            for pos, qarr in ((0, g.q1), (1, g.q2)):
                if pos >= len(pauli):
                    break
                xb, zb = PAULI_BITS[pauli[pos]]
                if not (xb or zb):
                    continue
                n = int(sel.sum())
                parts.append(
                    (slots[sel], qarr[loc[sel]], np.full(n, bool(xb)), np.full(n, bool(zb)), shot[sel])
                )
    if not parts:
        return _Events.empty()
    cols = [np.concatenate(c) for c in zip(*parts)]
    return _Events(*cols).sorted()


@dataclass
class ShotBatch:
    """Measurement outcomes of many shots of one circuit.

    ``hard`` is bit-packed per shot (little-endian bit order, rows padded to
    whole bytes); ``soft`` holds analog outcomes as float32 when soft readout
    is enabled, in which case ``hard == harden(soft)``.
    """

    meta: dict
    hard: np.ndarray
    n_measurements: int
    soft: np.ndarray | None = None

    @property
    def n_shots(self) -> int:
        return self.hard.shape[0]

    def bits(self) -> np.ndarray:
        """Unpacked outcomes, ``(n_shots, n_measurements)`` uint8."""
        return np.unpackbits(self.hard, axis=1, count=self.n_measurements, bitorder="little")

    @classmethod
    def from_bits(cls, meta: dict, bits: np.ndarray, soft: np.ndarray | None = None) -> "ShotBatch":
        bits = np.asarray(bits, dtype=np.uint8)
        return cls(dict(meta), np.packbits(bits, axis=1, bitorder="little"), bits.shape[1], soft)

    def to_container(self) -> Container:
        meta = {**{k: str(v) for k, v in self.meta.items()}}
        meta["shots"] = str(self.n_shots)
        meta["measurements"] = str(self.n_measurements)
        meta["soft"] = "1" if self.soft is not None else "0"
        blocks = {"hard": np.ascontiguousarray(self.hard, dtype=np.uint8).tobytes()}
        if self.soft is not None:
            blocks["soft"] = np.ascontiguousarray(self.soft, dtype="<f4").tobytes()
        return Container(b"QSHT", meta, blocks)

    @classmethod
    def from_container(cls, c: Container) -> "ShotBatch":
        meta = dict(c.meta)
        shots = int(meta.pop("shots"))
        n_meas = int(meta.pop("measurements"))
        has_soft = meta.pop("soft") == "1"
        hard = np.frombuffer(c.blocks["hard"], dtype=np.uint8).reshape(shots, (n_meas + 7) // 8).copy()
        soft = None
        if has_soft:
            soft = np.frombuffer(c.blocks["soft"], dtype="<f4").reshape(shots, n_meas).astype(np.float32)
        return cls(meta, hard, n_meas, soft)

    def write(self, path) -> None:
        self.to_container().write(path)

    @classmethod
    def read(cls, path) -> "ShotBatch":
        return cls.from_container(Container.read(path, b"QSHT"))

    @classmethod
    def concatenate(cls, batches: list["ShotBatch"]) -> "ShotBatch":
        first = batches[0]
        soft = None if first.soft is None else np.concatenate([b.soft for b in batches])
        return cls(dict(first.meta), np.concatenate([b.hard for b in batches]), first.n_measurements, soft)


def batch_metadata(noisy: NoisyCircuit, seed: int) -> dict:
    c = noisy.circuit
    return {
        "distance": c.distance,
        "basis": c.basis,
        "rounds": c.rounds,
        "bitstring": "".join(map(str, c.bitstring)),
        "variant": c.variant,
        "seed": seed,
        "noise": noisy.params.digest(),
    }


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), int(block)]))


def _sample_block(noisy: NoisyCircuit, seed: int, block: int, n_shots: int, frame: ReferenceFrame):
    rng = block_rng(seed, block)
    prog = _compile(noisy.circuit)
    events = _sample_events(_group_channels(noisy), n_shots, rng)
    flips = words_to_bool(_propagate(prog, n_shots, events, rng), n_shots)
    actual = flips ^ frame.outcomes.astype(bool)
    soft_params = noisy.params.soft
    if soft_params is None:
        return actual.astype(np.uint8), None
    is_data = noisy.circuit.meas_qubit < noisy.circuit.distance**2
    sigma = np.where(is_data, soft_params.sigma_data, soft_params.sigma_ancilla)
    mean = np.where(actual, soft_params.mu1, soft_params.mu0)
    soft = (mean + sigma * rng.standard_normal(actual.shape)).astype(np.float32)
    return harden(soft, soft_params.threshold), soft


def iter_blocks(noisy: NoisyCircuit, n_shots: int, seed: int, threads: int = 1):
    """Yield ShotBatches of at most ``BLOCK_SHOTS`` shots, in block order."""
    frame = reference_frame(noisy.circuit)
    meta = batch_metadata(noisy, seed)
    sizes = [min(BLOCK_SHOTS, n_shots - s) for s in range(0, n_shots, BLOCK_SHOTS)]

    def job(block):
        hard, soft = _sample_block(noisy, seed, block, sizes[block], frame)
        return ShotBatch.from_bits(meta, hard, soft)

    if threads <= 1:
        for b in range(len(sizes)):
            yield job(b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            yield from pool.map(job, range(len(sizes)))


def _memory_limit() -> int:
    try:
        return os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES")
    except (ValueError, OSError, AttributeError):
        return 2**34


def sample(noisy: NoisyCircuit, n_shots: int, seed: int, threads: int = 1) -> ShotBatch:
    """Sample ``n_shots`` shots of a noisy circuit into one ShotBatch."""
    if n_shots <= 0:
        raise ValueError("n_shots must be positive")
    n_meas = noisy.circuit.n_measurements
    need = n_shots * ((n_meas + 7) // 8)
    if noisy.params.soft is not None:
        need += 4 * n_shots * n_meas
    limit = _memory_limit() // 2
    if need > limit:
        raise MemoryError(
            f"{n_shots} shots x {n_meas} measurements need {need / 2**20:.0f} MiB, "
            f"above the {limit / 2**20:.0f} MiB budget; sample in blocks with iter_blocks()"
        )
    return ShotBatch.concatenate(list(iter_blocks(noisy, n_shots, seed, threads)))


def propagate_errors(circuit: Circuit, errors) -> np.ndarray:
    """Record flips caused by deterministic Pauli injections, one shot per entry.

    ``errors`` is a sequence of shots; each shot is a list of
    ``(timestep, stage, qubit, pauli)`` with ``pauli`` in ``"XYZ"``.  Returns
    a bool array ``(n_shots, n_measurements)``.
    """
    slots, qubits, xs, zs, shots = [], [], [], [], []
    for s, shot in enumerate(errors):
        for t, stage, q, pauli in shot:
            xb, zb = PAULI_BITS[pauli]
            slots.append(2 * t + stage)
            qubits.append(q)
            xs.append(bool(xb))
            zs.append(bool(zb))
            shots.append(s)
    events = _Events(
        np.asarray(slots, dtype=np.int64),
        np.asarray(qubits, dtype=np.int64),
        np.asarray(xs, dtype=bool),
        np.asarray(zs, dtype=bool),
        np.asarray(shots, dtype=np.int64),
    ).sorted()
    n = max(len(errors), 1)
    return words_to_bool(_propagate(_compile(circuit), n, events, None), n)[: len(errors)]
