"""Independent cross-checks: tableau propagation, exhaustive matching and finite differences.

Used by ``qmemlab oracle-check`` and by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _tableau, nn
from .layout import CZ, GATE_H, GATE_X, MEASURE, PREP, RESET, Circuit, CodeLayout
from .mwpm import brute_force_decode, decode
from .sim import propagate_errors, reference_frame
from .syndrome import defects_from_flips


@dataclass
class CheckResult:
    name: str
    checked: int
    failures: int
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.checked > 0 and self.failures == 0


def _inject(tab: _tableau.Tableau, q: int, pauli: str) -> None:
    if pauli in "XY":
        tab.gate_x(q)
    if pauli in "ZY":
        tab.h(q)
        tab.gate_x(q)
        tab.h(q)


def tableau_flips(circuit: Circuit, errors) -> np.ndarray:
    """Record flips from a full stabilizer-tableau run with Paulis inserted, one run per shot.

    Same ``(timestep, stage, qubit, pauli)`` convention as
    :func:`qmemlab.sim.propagate_errors`.  Random outcomes are forced to 0 in
    both this run and the reference, so only deterministic parities (defects,
    logical) are meaningful.
    """
    ref = reference_frame(circuit).outcomes
    out = np.zeros((len(errors), len(ref)), dtype=bool)
    for s, shot in enumerate(errors):
        at: dict = {}
        for t, stage, q, pauli in shot:
            at.setdefault((t, stage), []).append((q, pauli))
        tab = _tableau.Tableau(circuit.n_qubits)
        rec = []
        for t, step in enumerate(circuit.timesteps):
            for q, pauli in at.get((t, 0), ()):
                _inject(tab, q, pauli)
            for op, qs in step:
                if op == GATE_H:
                    tab.h(qs[0])
                elif op == CZ:
                    tab.cz(*qs)
                elif op == GATE_X:
                    tab.gate_x(qs[0])
                elif op == MEASURE:
                    rec.append(tab.measure(qs[0])[0])
                elif op in (RESET, PREP):
                    tab.reset(qs[0])
            for q, pauli in at.get((t, 1), ()):
                _inject(tab, q, pauli)
        out[s] = np.asarray(rec, dtype=np.uint8) != ref
    return out


def random_errors(circuit: Circuit, n_shots: int, rng: np.random.Generator, max_errors: int = 3):
    n_t = len(circuit.timesteps)
    shots = []
    for _ in range(n_shots):
        k = int(rng.integers(1, max_errors + 1))
        shots.append(
            [(int(rng.integers(n_t)), int(rng.integers(2)), int(rng.integers(circuit.n_qubits)), "XYZ"[rng.integers(3)]) for _ in range(k)]
        )
    return shots


def propagation_check(circuit: Circuit, layout: CodeLayout, n_shots: int = 200, seed: int = 0) -> CheckResult:
    """Frame propagation vs tableau simulation on defects and logical flips."""
    rng = np.random.default_rng(seed)
    errors = random_errors(circuit, n_shots, rng)
    mask = reference_frame(circuit).deterministic[: layout.n_ancillas]
    fast = defects_from_flips(propagate_errors(circuit, errors), mask, layout, circuit.basis)
    slow = defects_from_flips(tableau_flips(circuit, errors), mask, layout, circuit.basis)
    bad = np.any(fast[0] != slow[0], axis=(1, 2)) | (fast[1] != slow[1])
    return CheckResult("propagation", n_shots, int(bad.sum()), "frame vs tableau defects")


def matching_check(graph, defects: np.ndarray, max_fired: int = 10, tol: float = 1e-9) -> CheckResult:
    """Blossom matching weight vs exhaustive pairing on every shot with at most ``max_fired`` defects."""
    flat = defects.reshape(len(defects), -1)
    checked = fails = 0
    for row in flat:
        fired = np.flatnonzero(row).tolist()
        if not fired or len(fired) > max_fired:
            continue
        _, m = decode(graph, fired)
        _, w = brute_force_decode(graph, fired)
        checked += 1
        fails += abs(m.weight - w) > tol * max(1.0, abs(w))
    return CheckResult("exhaustive-matching", checked, fails, f"shots with 1..{max_fired} defects")


def gradient_oracle(seed: int = 0, tol: float = 1e-6) -> CheckResult:
    """Central differences vs backpropagation on a small float64 model."""
    rng = np.random.default_rng(seed)
    model = nn.Model.init(8, 4, 6, rng, dtype=np.float64)
    seq = rng.integers(0, 2, size=(5, 4, 8)).astype(np.float64)
    final = rng.integers(0, 2, size=(5, 4)).astype(np.float64)
    y = rng.integers(0, 2, size=5).astype(np.uint8)
    err = nn.gradient_check(model, seq, final, y)
    return CheckResult("finite-differences", 1, int(err > tol), f"relative error {err:.2e}")
