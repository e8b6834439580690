"""Defects, final defects, logical-flip labels and soft defect probabilities.

Defect tensors have shape ``(shots, rounds + 1, n_ancillas)``: rows
``0 .. rounds-1`` are the QEC rounds, the last row holds the final defects
inferred from the data-qubit readout (zero for ancillas whose type does not
match the memory basis).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .container import Container
from .layout import CodeLayout
from .noise import SoftReadoutParams, posterior_one
from .sim import ReferenceFrame, ShotBatch


@dataclass
class DefectTensor:
    defects: np.ndarray
    p_true: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return self.defects.shape[1] - 1

    def sequence(self) -> np.ndarray:
        """Per-round defects fed to the recurrent network, ``(shots, rounds, n_anc)``."""
        return self.defects[:, :-1, :]

    def final(self, layout: CodeLayout, basis: str) -> np.ndarray:
        """Final defects of the basis-matching ancillas, ``(shots, n_anc / 2)``."""
        return self.defects[:, -1, layout.ancillas_of(basis)]

    def to_container(self) -> Container:
        shots, rows, n_anc = self.defects.shape
        meta = {k: str(v) for k, v in self.meta.items()}
        meta.update(shots=str(shots), rows=str(rows), ancillas=str(n_anc))
        flat = self.defects.reshape(shots, rows * n_anc).astype(np.uint8)
        blocks = {
            "defects": np.packbits(flat, axis=1, bitorder="little").tobytes(),
            "p_true": np.packbits(self.p_true.astype(np.uint8), bitorder="little").tobytes(),
        }
        return Container(b"QDEF", meta, blocks)

    @classmethod
    def from_container(cls, c: Container) -> "DefectTensor":
        meta = dict(c.meta)
        shots, rows, n_anc = (int(meta.pop(k)) for k in ("shots", "rows", "ancillas"))
        packed = np.frombuffer(c.blocks["defects"], dtype=np.uint8).reshape(shots, -1)
        flat = np.unpackbits(packed, axis=1, count=rows * n_anc, bitorder="little")
        p_true = np.unpackbits(np.frombuffer(c.blocks["p_true"], dtype=np.uint8), count=shots, bitorder="little")
        return cls(flat.reshape(shots, rows, n_anc), p_true, meta)

    def write(self, path):
        self.to_container().write(path)

    @classmethod
    def read(cls, path):
        return cls.from_container(Container.read(path, b"QDEF"))


@dataclass
class SoftDefectTensor:
    probs: np.ndarray
    p_true: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def defects(self) -> np.ndarray:
        return self.probs

    @property
    def rounds(self) -> int:
        return self.probs.shape[1] - 1

    def sequence(self) -> np.ndarray:
        return self.probs[:, :-1, :]

    def final(self, layout: CodeLayout, basis: str) -> np.ndarray:
        return self.probs[:, -1, layout.ancillas_of(basis)]

    def to_container(self) -> Container:
        shots, rows, n_anc = self.probs.shape
        meta = {k: str(v) for k, v in self.meta.items()}
        meta.update(shots=str(shots), rows=str(rows), ancillas=str(n_anc))
        blocks = {
            "probs": np.ascontiguousarray(self.probs, dtype="<f4").tobytes(),
            "p_true": np.packbits(self.p_true.astype(np.uint8), bitorder="little").tobytes(),
        }
        return Container(b"QSDF", meta, blocks)

    @classmethod
    def from_container(cls, c: Container) -> "SoftDefectTensor":
        meta = dict(c.meta)
        shots, rows, n_anc = (int(meta.pop(k)) for k in ("shots", "rows", "ancillas"))
        probs = np.frombuffer(c.blocks["probs"], dtype="<f4").reshape(shots, rows, n_anc).astype(np.float32)
        p_true = np.unpackbits(np.frombuffer(c.blocks["p_true"], dtype=np.uint8), count=shots, bitorder="little")
        return cls(probs, p_true, meta)

    def write(self, path):
        self.to_container().write(path)

    @classmethod
    def read(cls, path):
        return cls.from_container(Container.read(path, b"QSDF"))


def _check(batch: ShotBatch, frame: ReferenceFrame, layout: CodeLayout, basis: str) -> int:
    meta = batch.meta
    if "distance" in meta and int(meta["distance"]) != layout.distance:
        raise ValueError(f"batch distance {meta['distance']} does not match layout distance {layout.distance}")
    if "basis" in meta and meta["basis"] != basis:
        raise ValueError(f"batch basis {meta['basis']} does not match requested basis {basis}")
    n_anc = layout.n_ancillas
    rounds, rem = divmod(batch.n_measurements - layout.n_data, n_anc)
    if rem or rounds < 1:
        raise ValueError("measurement count does not fit the layout")
    if "rounds" in meta and int(meta["rounds"]) != rounds:
        raise ValueError("batch rounds do not match its measurement count")
    if len(frame.outcomes) != batch.n_measurements:
        raise ValueError("reference frame does not match the batch")
    return rounds


def defects_from_flips(flips: np.ndarray, first_round_mask: np.ndarray, layout: CodeLayout, basis: str):
    """Defects and logical flips from outcome flips relative to the reference.

    ``flips`` is ``(shots, n_measurements)`` with ancilla records round-major
    followed by the data records in qubit order.
    """
    flips = np.asarray(flips, dtype=np.uint8)
    shots = flips.shape[0]
    n_anc, n_data = layout.n_ancillas, layout.n_data
    rounds = (flips.shape[1] - n_data) // n_anc
    anc = flips[:, : rounds * n_anc].reshape(shots, rounds, n_anc)
    data = flips[:, rounds * n_anc :]
    out = np.zeros((shots, rounds + 1, n_anc), dtype=np.uint8)
    out[:, 0] = anc[:, 0] & first_round_mask.astype(np.uint8)
    np.bitwise_xor(anc[:, 1:], anc[:, :-1], out=out[:, 1:rounds])
    sel = layout.ancillas_of(basis)
    parity = (data @ layout.support_matrix()[sel].T.astype(np.uint8)) & 1
    out[:, rounds, sel] = parity ^ anc[:, -1, sel]
    p_true = data[:, list(layout.logical_support(basis))].sum(axis=1, dtype=np.int64) & 1
    return out, p_true.astype(np.uint8)


def compute_defects(batch: ShotBatch, frame: ReferenceFrame, layout: CodeLayout, basis: str) -> DefectTensor:
    rounds = _check(batch, frame, layout, basis)
    flips = batch.bits() ^ frame.outcomes
    first = frame.deterministic[: layout.n_ancillas]
    defects, p_true = defects_from_flips(flips, first, layout, basis)
    meta = {k: v for k, v in batch.meta.items()}
    meta["rounds"] = rounds
    return DefectTensor(defects, p_true, meta)


def logical_flip(batch: ShotBatch, frame: ReferenceFrame, layout: CodeLayout, basis: str) -> np.ndarray:
    """Whether the measured logical observable differs from its noiseless value."""
    rounds = _check(batch, frame, layout, basis)
    start = rounds * layout.n_ancillas
    flips = batch.bits()[:, start:] ^ frame.outcomes[start:]
    return (flips[:, list(layout.logical_support(basis))].sum(axis=1) & 1).astype(np.uint8)


def flip_posteriors(soft: np.ndarray, frame: ReferenceFrame, sigmas: np.ndarray, params: SoftReadoutParams):
    """Probability that each outcome differs from the reference, given the analog value."""
    p1 = posterior_one(soft, sigmas, params.mu0, params.mu1)
    return np.where(frame.outcomes.astype(bool), 1.0 - p1, p1)


def soft_defect_probs(
    batch: ShotBatch, params: SoftReadoutParams, frame: ReferenceFrame, layout: CodeLayout, basis: str
) -> SoftDefectTensor:
    """Defect probabilities from analog outcomes.

    Each defect is the parity of independent outcome flips; with flip
    probabilities ``q_i`` the parity is 1 with probability
    ``(1 - prod(1 - 2 q_i)) / 2``.
    """
    if batch.soft is None:
        raise ValueError("batch has no soft outcomes")
    rounds = _check(batch, frame, layout, basis)
    n_anc = layout.n_ancillas
    sigmas = np.full(batch.n_measurements, params.sigma_ancilla)
    sigmas[rounds * n_anc :] = params.sigma_data
    q = flip_posteriors(batch.soft.astype(np.float64), frame, sigmas, params)
    f = 1.0 - 2.0 * q
    shots = q.shape[0]
    fa = f[:, : rounds * n_anc].reshape(shots, rounds, n_anc)
    fd = f[:, rounds * n_anc :]
    out = np.zeros((shots, rounds + 1, n_anc))
    out[:, 0] = q[:, :n_anc] * frame.deterministic[:n_anc]
    out[:, 1:rounds] = 0.5 * (1.0 - fa[:, 1:] * fa[:, :-1])
    for a in layout.ancillas_of(basis):
        prod = fa[:, -1, a] * np.prod(fd[:, list(layout.ancillas[a].support)], axis=1)
        out[:, rounds, a] = 0.5 * (1.0 - prod)
    hard_flips = batch.bits()[:, rounds * n_anc :] ^ frame.outcomes[rounds * n_anc :]
    p_true = (hard_flips[:, list(layout.logical_support(basis))].sum(axis=1) & 1).astype(np.uint8)
    meta = dict(batch.meta)
    meta["rounds"] = rounds
    return SoftDefectTensor(np.clip(out, 0.0, 1.0).astype(np.float32), p_true, meta)
