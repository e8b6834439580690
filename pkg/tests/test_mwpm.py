import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import qmemlab.dem as dem_mod
from qmemlab.dem import build_matching_graph, extract_dem
from qmemlab.layout import build_layout, build_memory_circuit
from qmemlab.mwpm import (
    assignment_posteriors, brute_force_decode, corrections_container, decode, decode_batch, read_corrections,
    soft_decode, soft_decode_batch, soft_edge_probs,
)  # fmt: skip
from qmemlab.noise import NoiseParams, SoftReadoutParams, attach_noise
from qmemlab.sim import reference_frame, sample
from qmemlab.syndrome import compute_defects

LAY = build_layout(3)


def _graph(rounds=3, p=3e-3, soft=None):
    noisy = attach_noise(build_memory_circuit(LAY, rounds), NoiseParams(p, soft=soft))
    return build_matching_graph(extract_dem(noisy, LAY, "Z")), noisy


GRAPH, NOISY = _graph()
ACTIVE = sorted({e.u for e in GRAPH.edges} | {e.v for e in GRAPH.edges if e.v >= 0})


def test_empty_syndrome():
    flip, m = decode(GRAPH, [])
    assert flip is False and m.pairs == () and m.weight == 0


def test_time_adjacent_pair_matched_together():
    a, b = 8 + 2, 16 + 2
    flip, m = decode(GRAPH, [a, b])
    assert not flip
    assert len(m.pairs) == 1 and set(m.pairs[0]) == {a, b}


def test_out_of_range_detector_rejected():
    with pytest.raises(ValueError):
        decode(GRAPH, [GRAPH.n_detectors + 3])
    with pytest.raises(ValueError):
        decode(GRAPH, [-2])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(ACTIVE), min_size=1, max_size=8, unique=True))
def test_blossom_matches_exhaustive(fired):
    flip, m = decode(GRAPH, fired)
    _, w = brute_force_decode(GRAPH, fired)
    assert math.isclose(m.weight, w, rel_tol=1e-12, abs_tol=1e-12)
    matched = [x for pair in m.pairs for x in pair if x >= 0]
    assert sorted(matched) == sorted(fired)


def test_weight_scaling_invariance(monkeypatch):
    rng = np.random.default_rng(3)
    sets = [sorted(rng.choice(ACTIVE, size=k, replace=False).tolist()) for k in (2, 3, 5, 6) for _ in range(5)]
    base = [decode(GRAPH, s) for s in sets]
    g2, _ = _graph()
    monkeypatch.setattr(dem_mod, "edge_weight", lambda p: 3.7 * math.log((1 - p) / p))
    for s, (flip, m) in zip(sets, base):
        flip2, m2 = decode(g2, s)
        assert flip2 == flip
        assert math.isclose(m2.weight, 3.7 * m.weight, rel_tol=1e-9)


def test_pymatching_batch_agrees_with_exact():
    batch = sample(NOISY, 3000, seed=4)
    t = compute_defects(batch, reference_frame(NOISY.circuit), LAY, "Z")
    fast = decode_batch(GRAPH, t.defects)
    flat = t.defects.reshape(len(fast), -1)
    checked = 0
    for i in range(len(fast)):
        fired = np.flatnonzero(flat[i]).tolist()
        if 0 < len(fired) <= 8:
            assert decode(GRAPH, fired)[0] == bool(fast[i])
            checked += 1
    assert checked > 500


def test_mwpm_error_rate_matches_stim_pymatching():
    stim = pytest.importorskip("stim")
    import pymatching
    from stim_bridge import to_stim

    noisy = attach_noise(build_memory_circuit(LAY, 5), NoiseParams(3e-3))
    g = build_matching_graph(extract_dem(noisy, LAY, "Z"))
    circ, ids = to_stim(noisy, LAY)
    n = 60_000
    batch = sample(noisy, n, seed=6)
    t = compute_defects(batch, reference_frame(noisy.circuit), LAY, "Z")
    ours = (decode_batch(g, t.defects) ^ t.p_true).mean()
    ref = pymatching.Matching.from_detector_error_model(circ.detector_error_model(decompose_errors=True, approximate_disjoint_errors=True))
    flat = t.defects.reshape(n, -1)[:, ids]
    theirs = (ref.decode_batch(flat)[:, 0] ^ t.p_true).mean()
    # identical samples, so the two decoders should differ only on a handful of ties
    assert abs(ours - theirs) < 0.1 * theirs
    assert isinstance(circ, stim.Circuit)


def _soft_setup(pm_a, seed, n=2000, pm_d=0.001):
    sp = SoftReadoutParams.from_error_rates(pm_a, pm_d)
    g, noisy = _graph(p=1e-3, soft=sp)
    batch = sample(noisy, n, seed=seed)
    t = compute_defects(batch, reference_frame(noisy.circuit), LAY, "Z")
    return g, sp, batch, t


def test_soft_confident_outcomes_reduce_to_hard():
    g, sp, batch, t = _soft_setup(1e-12, 7, pm_d=1e-12)
    q = assignment_posteriors(batch, sp, LAY.n_data)
    assert q.max() < 1e-6
    assert np.array_equal(soft_decode_batch(g, t.defects, q), decode_batch(g, t.defects))


def test_soft_half_posterior_makes_edge_cheap():
    g, sp, batch, t = _soft_setup(0.01, 8, n=10)
    q = np.zeros(batch.n_measurements)
    e_idx = next(i for i, e in enumerate(g.edges) if e.kind == "time" and e.records)
    q[g.edges[e_idx].records[0]] = 0.5
    probs = soft_edge_probs(g, q)
    assert probs[e_idx] > 0.499
    e = g.edges[e_idx]
    # two defects on the cheap edge's endpoints now match through it
    _, m = decode(dem_mod.MatchingGraph(g.n_detectors, g.n_ancillas, g.edges), [e.u, e.v])
    assert soft_decode(g, [e.u, e.v], q) is False
    assert len(m.pairs) == 1


def test_soft_exact_matches_batch_path():
    g, sp, batch, t = _soft_setup(0.05, 9, n=400)
    q = assignment_posteriors(batch, sp, LAY.n_data)
    fast = soft_decode_batch(g, t.defects, q)
    flat = t.defects.reshape(len(fast), -1)
    for s in range(len(fast)):
        fired = np.flatnonzero(flat[s]).tolist()
        if len(fired) <= 8:
            assert soft_decode(g, fired, q[s]) == bool(fast[s])


def test_corrections_file_round_trip(tmp_path):
    bits = np.random.default_rng(0).integers(0, 2, 1003).astype(np.uint8)
    corrections_container(bits, {"decoder": "mwpm"}).write(tmp_path / "c.qcor")
    back, meta = read_corrections(tmp_path / "c.qcor")
    assert np.array_equal(back, bits) and meta["decoder"] == "mwpm"
