import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmemlab.layout import build_layout, build_memory_circuit
from qmemlab.noise import (
    OP_CLASSES, NoiseParams, SoftReadoutParams, assignment_error, attach_noise, channel_paulis,
    depolarizing, harden, posterior_one, sigma_from_pm, single_qubit_probs, soften, two_qubit_probs,
)  # fmt: skip

# Frozen: scipy brentq root of erfc(1/(sigma*sqrt 2))/2 = 0.01.
SIGMA_1PCT = 0.42985832478399316


def test_depolarizing_limit():
    p = 3e-3
    assert np.allclose(single_qubit_probs(p, 1.0), [p / 3] * 3, rtol=0, atol=1e-18)
    assert np.allclose(two_qubit_probs(p, 1.0), [p / 15] * 15, rtol=0, atol=1e-18)


def test_no_y_at_zero_bias():
    p = 1e-3
    assert single_qubit_probs(p, 0.0)[1] == 0
    assert single_qubit_probs(p, 0.0)[0] == single_qubit_probs(p, 0.0)[2] == p / 2


def test_infinite_bias():
    q1 = single_qubit_probs(1e-3, math.inf)
    assert list(q1) == [0.0, 1e-3, 0.0]
    q2 = two_qubit_probs(1e-3, math.inf)
    assert math.isclose(q2.sum(), 1e-3)
    assert (q2 > 0).sum() == 7


@given(p=st.floats(0, 0.999), eta=st.floats(0, 1e6))
def test_channel_totals(p, eta):
    q1, q2 = single_qubit_probs(p, eta), two_qubit_probs(p, eta)
    assert (q1 >= 0).all() and (q2 >= 0).all()
    assert math.isclose(q1.sum(), p, rel_tol=1e-12, abs_tol=1e-300)
    assert math.isclose(q2.sum(), p, rel_tol=1e-12, abs_tol=1e-300)
    assert q2.sum() <= 1


def test_parameter_validation():
    with pytest.raises(ValueError):
        NoiseParams(1.0)
    with pytest.raises(ValueError):
        NoiseParams(-0.1)
    with pytest.raises(ValueError):
        NoiseParams(0.01, eta=-1)
    with pytest.raises(ValueError):
        NoiseParams(0.01, overrides={"bogus": 0.1})
    with pytest.raises(ValueError):
        SoftReadoutParams(0.0, 0.1)


def test_eta_one_matches_depolarizing_path():
    c = build_memory_circuit(build_layout(3), 3)
    a = attach_noise(c, NoiseParams(2e-3))
    b = depolarizing(c, 2e-3)
    assert a.channels == b.channels


@pytest.mark.parametrize("eta", [0.0, 1.0, 100.0, math.inf])
def test_every_channel_is_a_distribution(eta):
    c = build_memory_circuit(build_layout(3), 2)
    noisy = attach_noise(c, NoiseParams(0.01, eta, soft=SoftReadoutParams.from_error_rates(0.01, 0.001)))
    for ch in noisy.channels:
        probs = np.array(ch.probs)
        assert (probs >= 0).all() and probs.sum() <= 1
        assert all(pr > 0 for _, pr in channel_paulis(ch))
    # pre-measurement flips and assignment errors coexist on every measurement
    kinds = {}
    for ch in noisy.channels:
        if ch.op_class == "measure":
            kinds.setdefault((ch.timestep, ch.qubits), set()).add(ch.kind)
    assert kinds and all(k == {"xflip", "assign"} for k in kinds.values())


def test_overrides_per_class():
    params = NoiseParams(1e-3, overrides={"idle": 0.0, "cz": 5e-3})
    assert params.prob("idle") == 0 and params.prob("cz") == 5e-3 and params.prob("gate1") == 1e-3
    noisy = attach_noise(build_memory_circuit(build_layout(3), 2), params)
    assert not [ch for ch in noisy.channels if ch.op_class == "idle"]
    assert set(OP_CLASSES) >= {ch.op_class for ch in noisy.channels}
    assert params.digest() != NoiseParams(1e-3).digest()


def test_sigma_for_one_percent():
    assert math.isclose(sigma_from_pm(0.01), SIGMA_1PCT, rel_tol=1e-10)
    assert math.isclose(assignment_error(SIGMA_1PCT), 0.01, rel_tol=1e-10)


def test_half_error_means_zero_snr():
    assert math.isclose(assignment_error(1e12), 0.5, rel_tol=1e-9)


def test_soften_degenerate_gaussian():
    params = SoftReadoutParams(1e-300, 1e-300)
    out = soften(np.array([1, 0, 1]), params, np.random.default_rng(0))
    assert list(out) == [1.0, -1.0, 1.0]


def test_harden():
    assert list(harden(np.array([0.0, -np.inf, np.inf, 1e-9]), 0.0)) == [0, 0, 1, 1]


def test_hardened_flip_rate_matches_erfc():
    pm = 0.1
    params = SoftReadoutParams.from_error_rates(pm, pm)
    rng = np.random.default_rng(11)
    bits = rng.integers(0, 2, 10**6)
    flips = (harden(soften(bits, params, rng), params.threshold) != bits).mean()
    assert abs(flips - pm) < 3 * math.sqrt(pm * (1 - pm) / 1e6)


def test_posterior_symmetry():
    assert posterior_one(np.array([0.0]), 0.5)[0] == 0.5
    hi, lo = posterior_one(np.array([0.8, -0.8]), 0.5)
    assert math.isclose(hi, 1 - lo)
