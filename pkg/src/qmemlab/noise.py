"""Circuit-level Pauli noise and Gaussian soft readout."""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import erfc, erfcinv, expit

from .layout import CZ, GATE_H, GATE_X, IDLE, MEASURE, PREP, RESET, Circuit

PAULIS = "IXYZ"
PAULI_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}

# Two-qubit Paulis in fixed order, excluding II.
PAULI_PAIRS = tuple(a + b for a, b in itertools.product(PAULIS, PAULIS) if a + b != "II")
Y_PAIRS = frozenset({"IY", "XY", "YI", "YX", "YY", "YZ", "ZY"})
SINGLE_PAULIS = ("X", "Y", "Z")

# Operation classes that may carry their own error probability.
OP_CLASSES = ("gate1", "idle", "cz", "measure", "reset")
_OP_CLASS = {GATE_H: "gate1", GATE_X: "gate1", IDLE: "idle", CZ: "cz", MEASURE: "measure", RESET: "reset", PREP: "reset"}


@dataclass(frozen=True)
class SoftReadoutParams:
    """Symmetric Gaussian readout with means -1 (state 0) and +1 (state 1)."""

    sigma_ancilla: float
    sigma_data: float
    threshold: float = 0.0
    mu0: float = -1.0
    mu1: float = 1.0

    def __post_init__(self):
        if not (self.sigma_ancilla > 0 and self.sigma_data > 0):
            raise ValueError("readout standard deviations must be positive")

    @classmethod
    def from_error_rates(cls, pm_ancilla: float, pm_data: float, threshold: float = 0.0) -> "SoftReadoutParams":
        return cls(sigma_from_pm(pm_ancilla), sigma_from_pm(pm_data), threshold)

    @property
    def pm_ancilla(self) -> float:
        return assignment_error(self.sigma_ancilla, self.mu0, self.mu1)

    @property
    def pm_data(self) -> float:
        return assignment_error(self.sigma_data, self.mu0, self.mu1)


def assignment_error(sigma: float, mu0: float = -1.0, mu1: float = 1.0) -> float:
    """``p_m = erfc(SNR / sqrt 2) / 2`` with ``SNR = |mu0 - mu1| / (2 sigma)``."""
    snr = abs(mu0 - mu1) / (2 * sigma)
    return float(0.5 * erfc(snr / math.sqrt(2)))


def sigma_from_pm(pm: float, mu0: float = -1.0, mu1: float = 1.0) -> float:
    """Standard deviation giving assignment error ``pm``; ``pm = 0`` maps to a tiny sigma."""
    if not 0 <= pm < 0.5:
        raise ValueError("assignment error must lie in [0, 0.5)")
    if pm == 0:
        return 1e-3
    snr = math.sqrt(2) * float(erfcinv(2 * pm))
    return abs(mu0 - mu1) / (2 * snr)


def soften(bits, params: SoftReadoutParams, rng: np.random.Generator, sigma=None) -> np.ndarray:
    """Draw analog outcomes ``N(mu_bit, sigma)`` for an array of bits."""
    bits = np.asarray(bits)
    sigma = params.sigma_ancilla if sigma is None else sigma
    mean = np.where(bits.astype(bool), params.mu1, params.mu0)
    return mean + sigma * rng.standard_normal(bits.shape)


def harden(values, threshold: float = 0.0) -> np.ndarray:
    """0 where the analog value is <= threshold, 1 otherwise."""
    return (np.asarray(values) > threshold).astype(np.uint8)


def posterior_one(values, sigma, mu0: float = -1.0, mu1: float = 1.0) -> np.ndarray:
    """``P(state 1 | value)`` under equal priors."""
    values = np.asarray(values, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    # log N1 - log N0 for equal variances
    llr = ((values - mu0) ** 2 - (values - mu1) ** 2) / (2 * sigma**2)
    return expit(llr)


@dataclass(frozen=True)
class NoiseParams:
    p: float
    eta: float = 1.0
    overrides: Mapping[str, float] = field(default_factory=dict)
    soft: SoftReadoutParams | None = None

    def __post_init__(self):
        for name, prob in [("p", self.p), *self.overrides.items()]:
            if not 0 <= prob < 1:
                raise ValueError(f"probability {name}={prob} outside [0, 1)")
        if not (self.eta >= 0):
            raise ValueError("eta must be >= 0")
        unknown = set(self.overrides) - set(OP_CLASSES)
        if unknown:
            raise ValueError(f"unknown operation classes {sorted(unknown)}")

    def prob(self, op_class: str) -> float:
        return self.overrides.get(op_class, self.p)

    def digest(self) -> str:
        parts = [f"p={self.p!r}", f"eta={self.eta!r}"]
        parts += [f"{k}={v!r}" for k, v in sorted(self.overrides.items())]
        if self.soft is not None:
            s = self.soft
            parts += [f"sigma_a={s.sigma_ancilla!r}", f"sigma_d={s.sigma_data!r}", f"t={s.threshold!r}"]
        return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]


def single_qubit_probs(p: float, eta: float) -> np.ndarray:
    """Probabilities of X, Y, Z after a one-qubit gate or idle."""
    if math.isinf(eta):
        return np.array([0.0, p, 0.0])
    return np.array([p / (eta + 2), eta * p / (eta + 2), p / (eta + 2)])


def two_qubit_probs(p: float, eta: float) -> np.ndarray:
    """Probabilities of the 15 non-identity Pauli pairs (``PAULI_PAIRS`` order) after a CZ."""
    if math.isinf(eta):
        hi, lo = p / 7, 0.0
    else:
        hi, lo = eta * p / (7 * eta + 8), p / (7 * eta + 8)
    return np.array([hi if pp in Y_PAIRS else lo for pp in PAULI_PAIRS])


@dataclass(frozen=True)
class Channel:
    """Noise attached to one operation.

    ``stage`` is 0 for channels acting before the timestep's operations
    (pre-measurement flips, assignment errors) and 1 for channels after.
    ``kind`` is ``"pauli1"``, ``"pauli2"``, ``"xflip"`` or ``"assign"``;
    assignment errors only flip the recorded bit and are realised through
    soft readout when sampling.
    """

    timestep: int
    stage: int
    kind: str
    qubits: tuple[int, ...]
    probs: tuple[float, ...]
    op_class: str


@dataclass(frozen=True)
class NoisyCircuit:
    circuit: Circuit
    channels: tuple[Channel, ...]
    params: NoiseParams


def attach_noise(circuit: Circuit, params: NoiseParams, n_data: int | None = None) -> NoisyCircuit:
    """Annotate every operation of ``circuit`` with its error channel.

    ``n_data`` (defaults to ``distance**2``) separates data from ancilla
    measurements for the soft-readout assignment rates.
    """
    n_data = circuit.distance**2 if n_data is None else n_data
    channels = []
    for t, step in enumerate(circuit.timesteps):
        for op, qs in step:
            cls = _OP_CLASS[op]
            p = params.prob(cls)
            if op == MEASURE:
                if p > 0:
                    channels.append(Channel(t, 0, "xflip", qs, (p,), cls))
                if params.soft is not None:
                    sigma = params.soft.sigma_data if qs[0] < n_data else params.soft.sigma_ancilla
                    pm = assignment_error(sigma, params.soft.mu0, params.soft.mu1)
                    if pm > 0:
                        channels.append(Channel(t, 0, "assign", qs, (pm,), cls))
            elif op in (RESET, PREP):
                if p > 0:
                    channels.append(Channel(t, 1, "xflip", qs, (p,), cls))
            elif op == CZ:
                if p > 0:
                    channels.append(Channel(t, 1, "pauli2", qs, tuple(two_qubit_probs(p, params.eta)), cls))
            else:
                if p > 0:
                    channels.append(Channel(t, 1, "pauli1", qs, tuple(single_qubit_probs(p, params.eta)), cls))
    return NoisyCircuit(circuit, tuple(channels), params)


def depolarizing(circuit: Circuit, p: float) -> NoisyCircuit:
    """Uniform depolarizing circuit noise written out directly (X, Y, Z at p/3; 15 pairs at p/15)."""
    params = NoiseParams(p)
    channels = []
    for t, step in enumerate(circuit.timesteps):
        for op, qs in step:
            cls = _OP_CLASS[op]
            if p == 0:
                continue
            if op == MEASURE:
                channels.append(Channel(t, 0, "xflip", qs, (p,), cls))
            elif op in (RESET, PREP):
                channels.append(Channel(t, 1, "xflip", qs, (p,), cls))
            elif op == CZ:
                channels.append(Channel(t, 1, "pauli2", qs, (p / 15,) * 15, cls))
            else:
                channels.append(Channel(t, 1, "pauli1", qs, (p / 3,) * 3, cls))
    return NoisyCircuit(circuit, tuple(channels), params)


def channel_paulis(channel: Channel) -> list[tuple[str, float]]:
    """Non-trivial Pauli components of a channel with their probabilities."""
    if channel.kind == "pauli1":
        return [(s, pr) for s, pr in zip(SINGLE_PAULIS, channel.probs) if pr > 0]
    if channel.kind == "pauli2":
        return [(s, pr) for s, pr in zip(PAULI_PAIRS, channel.probs) if pr > 0]
    return [("X", channel.probs[0])]
