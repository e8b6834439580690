"""Minimal CHP stabilizer tableau (Aaronson & Gottesman) for noiseless reference runs."""

from __future__ import annotations

import numpy as np


class Tableau:
    """Stabilizer state on ``n`` qubits, initialised to ``|0...0>``.

    Rows ``0..n-1`` are destabilizers, ``n..2n-1`` stabilizers.  Random
    measurement outcomes are forced to 0 so the run is reproducible.
    """

    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=bool)
        self.z = np.zeros((2 * n, n), dtype=bool)
        self.r = np.zeros(2 * n, dtype=bool)
        idx = np.arange(n)
        self.x[idx, idx] = True
        self.z[n + idx, idx] = True

    def h(self, a: int) -> None:
        xa, za = self.x[:, a].copy(), self.z[:, a].copy()
        self.r ^= xa & za
        self.x[:, a], self.z[:, a] = za, xa

    def cnot(self, a: int, b: int) -> None:
        xa, zb = self.x[:, a], self.z[:, b]
        self.r ^= xa & zb & ~(self.x[:, b] ^ self.z[:, a])
        self.x[:, b] ^= xa
        self.z[:, a] ^= zb

    def cz(self, a: int, b: int) -> None:
        self.h(b)
        self.cnot(a, b)
        self.h(b)

    def gate_x(self, a: int) -> None:
        self.r ^= self.z[:, a]

    @staticmethod
    def _phase_sum(x1, z1, x2, z2):
        """Sum over qubits of the CHP ``g`` exponent for row1 * row2 (vectorised over leading axes)."""
        x1 = x1.astype(np.int8)
        z1 = z1.astype(np.int8)
        x2 = x2.astype(np.int8)
        z2 = z2.astype(np.int8)
        g = np.where(
            (x1 == 1) & (z1 == 1),
            z2 - x2,
            np.where(x1 == 1, z2 * (2 * x2 - 1), np.where(z1 == 1, x2 * (1 - 2 * z2), 0)),
        )
        return g.sum(axis=-1, dtype=np.int64)

    def _rowsum_into(self, rows: np.ndarray, src: int) -> None:
        """rows <- rows * row[src] for each index in ``rows``."""
        if len(rows) == 0:
            return
        total = (
            2 * self.r[rows].astype(np.int64)
            + 2 * int(self.r[src])
            + self._phase_sum(self.x[src], self.z[src], self.x[rows], self.z[rows])
        )
        self.r[rows] = (total % 4) == 2
        self.x[rows] ^= self.x[src]
        self.z[rows] ^= self.z[src]

    def measure(self, a: int) -> tuple[int, bool]:
        """Z measurement of qubit ``a``; returns ``(outcome, deterministic)``."""
        n = self.n
        hits = np.flatnonzero(self.x[n:, a])
        if len(hits):
            p = n + hits[0]
            others = np.flatnonzero(self.x[:, a])
            others = others[others != p]
            self._rowsum_into(others, p)
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p], self.z[p], self.r[p]
            self.x[p] = False
            self.z[p] = False
            self.z[p, a] = True
            self.r[p] = False
            return 0, False
        sx = np.zeros(n, dtype=bool)
        sz = np.zeros(n, dtype=bool)
        sr = 0
        for i in np.flatnonzero(self.x[:n, a]):
            s = n + i
            total = 2 * sr + 2 * int(self.r[s]) + int(self._phase_sum(self.x[s], self.z[s], sx, sz))
            sr = 1 if total % 4 == 2 else 0
            sx ^= self.x[s]
            sz ^= self.z[s]
        return sr, True

    def reset(self, a: int) -> None:
        outcome, _ = self.measure(a)
        if outcome:
            self.gate_x(a)
