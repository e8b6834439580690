import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmemlab.layout import (
    CZ, MEASURE, Circuit, build_layout, build_memory_circuit,
)  # fmt: skip

DISTANCES = [3, 5, 7]


@pytest.mark.parametrize("d", DISTANCES)
@pytest.mark.parametrize("variant", ["standard", "zxxz"])
def test_counts(d, variant):
    lay = build_layout(d, variant)
    assert lay.n_data == d * d
    assert lay.n_ancillas == d * d - 1
    assert len(lay.ancillas_of("X")) == len(lay.ancillas_of("Z")) == (d * d - 1) // 2
    weight2 = [a for a in lay.ancillas if len(a.support) == 2]
    assert len(weight2) == 2 * (d - 1)
    assert all(len(a.support) in (2, 4) for a in lay.ancillas)


@pytest.mark.parametrize("d", DISTANCES)
def test_stabilizers_commute_and_logicals(d):
    lay = build_layout(d)
    sx, sz = lay.stabilizer_matrix("X"), lay.stabilizer_matrix("Z")
    assert not ((sx.astype(int) @ sz.T.astype(int)) % 2).any()
    zl = np.zeros(lay.n_data, dtype=int)
    zl[list(lay.logical_z_support)] = 1
    xl = np.zeros(lay.n_data, dtype=int)
    xl[list(lay.logical_x_support)] = 1
    assert not ((sx @ zl) % 2).any()
    assert not ((sz @ xl) % 2).any()
    assert (zl @ xl) % 2 == 1
    assert len(lay.logical_z_support) == len(lay.logical_x_support) == d


@pytest.mark.parametrize("d", DISTANCES)
def test_hook_pairs_perpendicular_to_same_type_logical(d):
    lay = build_layout(d)
    for kind, logical in (("X", lay.logical_x_support), ("Z", lay.logical_z_support)):
        horizontal = len({lay.data_coords[q][1] for q in logical}) == 1
        for i in lay.ancillas_of(kind):
            a, b = lay.ancillas[i].schedule[2:]
            if a is None or b is None:
                continue
            (xa, ya), (xb, yb) = lay.data_coords[a], lay.data_coords[b]
            if horizontal:
                assert xa == xb and ya != yb
            else:
                assert ya == yb and xa != xb


def test_bad_layout_arguments():
    with pytest.raises(ValueError):
        build_layout(4)
    with pytest.raises(ValueError):
        build_layout(1)
    with pytest.raises(TypeError):
        build_layout(3.0)
    with pytest.raises(ValueError):
        build_layout(3, "xzzx")


@settings(max_examples=20, deadline=None)
@given(d=st.sampled_from([3, 5]), rounds=st.integers(1, 6), basis=st.sampled_from("XZ"),
       variant=st.sampled_from(["standard", "zxxz"]))  # fmt: skip
def test_circuit_structure(d, rounds, basis, variant):
    lay = build_layout(d, variant)
    c = build_memory_circuit(lay, rounds, basis)
    assert c.n_measurements == rounds * (d * d - 1) + d * d
    for step in c.timesteps:
        used = [q for _, qs in step for q in qs]
        assert sorted(used) == list(range(lay.n_qubits))
    # four CZ layers per round; every ancilla meets its support once per round
    n_cz = c.count(CZ)
    assert n_cz == rounds * sum(len(a.support) for a in lay.ancillas)
    assert c.count(MEASURE) == c.n_measurements
    assert c.ancilla_records(lay.n_data).shape == (rounds, lay.n_ancillas)
    assert sorted(c.meas_qubit[c.data_records(lay.n_data)]) == list(range(lay.n_data))


def test_circuit_text_round_trip():
    lay = build_layout(3, "zxxz")
    c = build_memory_circuit(lay, 4, "X", [1, 0, 1, 0, 1, 0, 1, 0, 1])
    c2 = Circuit.from_text(c.to_text())
    assert c2 == c
    assert c2.to_text() == c.to_text()


def test_zxxz_drops_round_hadamards():
    std = build_memory_circuit(build_layout(3), 5)
    zxxz = build_memory_circuit(build_layout(3, "zxxz"), 5)
    assert zxxz.count("H") < std.count("H")
    assert zxxz.count("CZ") == std.count("CZ")


def test_bad_circuit_arguments():
    lay = build_layout(3)
    with pytest.raises(ValueError):
        build_memory_circuit(lay, 0)
    with pytest.raises(ValueError):
        build_memory_circuit(lay, 2, "Y")
    with pytest.raises(ValueError):
        build_memory_circuit(lay, 2, "Z", [0, 1])


@pytest.mark.parametrize("d", [3, 5])
@pytest.mark.parametrize("basis", "XZ")
@pytest.mark.parametrize("variant", ["standard", "zxxz"])
def test_circuit_distance_equals_code_distance(d, basis, variant):
    stim = pytest.importorskip("stim")
    from stim_bridge import to_stim

    from qmemlab.noise import NoiseParams, attach_noise

    lay = build_layout(d, variant)
    noisy = attach_noise(build_memory_circuit(lay, d, basis), NoiseParams(1e-3))
    circ, _ = to_stim(noisy, lay)
    assert isinstance(circ, stim.Circuit)
    assert len(circ.shortest_graphlike_error()) == d
