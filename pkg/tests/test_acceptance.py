"""Acceptance criteria 1-10, one recorded PASS/FAIL line each.

Criteria 1-5 are computed here.  Criteria 6-10 read the outputs of
``scripts/run_all.sh`` from ``results/`` (override with QMEMLAB_RESULTS);
they are skipped when those files have not been produced.
"""

import json
import math
import os
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import norm

from qmemlab import nn
from qmemlab.analysis import FidelityPoint, Z95, fit_fidelity, fit_lambda
from qmemlab.dem import build_matching_graph, extract_dem, xor_prob
from qmemlab.layout import build_layout, build_memory_circuit
from qmemlab.noise import PAULI_PAIRS, NoiseParams, SoftReadoutParams, attach_noise, harden, soften
from qmemlab.oracles import matching_check, tableau_flips
from qmemlab.sim import propagate_errors, reference_frame, sample
from qmemlab.syndrome import compute_defects, defects_from_flips
from qmemlab.studies import matching_graph

RESULTS = Path(os.environ.get("QMEMLAB_RESULTS", Path(__file__).parents[1] / "results"))


def _load(name, record=None, number=0):
    path = RESULTS / name
    if not path.exists():
        if record is not None:
            record(number, None, f"{path} not produced yet")
        pytest.skip(f"{path} not produced yet; run scripts/run_all.sh")
    return json.loads(path.read_text())


def _measure_step(c, rnd):
    return [t for t, s in enumerate(c.timesteps) if any(op == "M" for op, _ in s)][rnd - 1]


def _below(a, b):
    """``a < b`` with 95% confidence; ``a``/``b`` are fit dicts with ``eps`` and ``eps_err``."""
    return b["eps"] - a["eps"] > Z95 * math.hypot(a["eps_err"], b["eps_err"])


def _rel(new, base):
    return 1 - new["eps"] / base["eps"]


# ---------------------------------------------------------------- oracle suite


def test_c1_exhaustive_matching(criterion):
    d, rounds, p = 3, 10, 0.003
    lay = build_layout(d)
    c = build_memory_circuit(lay, rounds)
    defects = compute_defects(sample(attach_noise(c, NoiseParams(p)), 4000, seed=101), reference_frame(c), lay, "Z").defects
    n_fired = defects.reshape(len(defects), -1).sum(axis=1)
    keep = defects[(n_fired >= 1) & (n_fired <= 10)][:1000]
    res = matching_check(matching_graph(d, rounds, "Z", NoiseParams(p)), keep, max_fired=10, tol=1e-12)
    ok = res.checked == 1000 and res.failures == 0
    assert criterion(1, ok, f"{res.checked} shots with 1..10 fired, {res.failures} blossom/brute-force mismatches")


def test_c2_gradient_check(criterion):
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        model = nn.Model.init(8, 4, 4, rng, dtype=np.float64)
        # random parameter point, not just the initialisation scale
        for k in nn.PARAM_NAMES:
            model.params[k] = rng.normal(0, 0.5, model.params[k].shape)
        seq = rng.integers(0, 2, size=(4, 5, 8)).astype(np.float64)
        fin = rng.integers(0, 2, size=(4, 4)).astype(np.float64)
        y = rng.integers(0, 2, size=4).astype(np.uint8)
        worst = max(worst, nn.gradient_check(model, seq, fin, y))
    assert criterion(2, worst < 1e-4, f"max relative error {worst:.2e} over 100 points (limit 1e-4)")


def test_c3_single_error_examples(criterion):
    lay = build_layout(3)
    checks = {}

    # sim: bulk data X between rounds 1 and 2 -> Z plaquettes 3, 4 at round 2 (frame and tableau)
    c = build_memory_circuit(lay, 3)
    mask = reference_frame(c).deterministic[:8]
    err = [[(_measure_step(c, 1), 1, 4, "X")]]
    for name, flips in (("frame", propagate_errors(c, err)), ("tableau", tableau_flips(c, err))):
        d, lg = defects_from_flips(flips, mask, lay, "Z")
        checks[f"sim bulk X ({name})"] = sorted(zip(*np.nonzero(d[0]))) == [(1, 3), (1, 4)] and lg[0] == 0

    # syndrome: X before the round-2 measurement of each ancilla -> rows 1 and 2 of that ancilla
    c4 = build_memory_circuit(lay, 4)
    mask4 = reference_frame(c4).deterministic[:8]
    t = _measure_step(c4, 2)
    shots = [[(t, 0, lay.ancillas[a].qubit, "X")] for a in range(8)]
    d, lg = defects_from_flips(propagate_errors(c4, shots), mask4, lay, "Z")
    checks["syndrome pre-measurement X"] = all(
        sorted(zip(*np.nonzero(d[a]))) == [(1, a), (2, a)] and lg[a] == 0 for a in range(8)
    )

    # dem: the same mechanisms appear with detector ids row * 8 + ancilla
    noisy = attach_noise(c4, NoiseParams(1e-3))
    dem = extract_dem(noisy, lay, "Z")
    sigs = {(m.detectors, m.logical) for m in dem.mechanisms}
    checks["dem pre-measurement X"] = all(((8 + a, 16 + a), False) in sigs for a in range(8))
    checks["dem merge 0.1+0.1"] = math.isclose(xor_prob(0.1, 0.1), 0.18, rel_tol=1e-15)

    # dem: every Y-containing CZ error is the symmetric difference of its X and Z parts
    c2 = build_memory_circuit(lay, 2)
    mask2 = reference_frame(c2).deterministic[:8]
    shots = []
    for t, step in enumerate(c2.timesteps):
        for op, qs in step:
            if op == "CZ":
                for pair in (pp for pp in PAULI_PAIRS if "Y" in pp):
                    shots.append([(t, 1, q, s) for q, s in zip(qs, pair) if s != "I"])
                    shots.append([(t, 1, q, "X") for q, s in zip(qs, pair) if s in "XY"])
                    shots.append([(t, 1, q, "Z") for q, s in zip(qs, pair) if s in "ZY"])
    d, lg = defects_from_flips(propagate_errors(c2, shots), mask2, lay, "Z")
    d = d.reshape(len(shots), -1)
    checks["dem Y symmetric difference"] = bool(
        np.array_equal(d[0::3], d[1::3] ^ d[2::3]) and np.array_equal(lg[0::3], lg[1::3] ^ lg[2::3])
    )

    # matching graph: bulk Y on data qubit 4 -> X-plaquette edge (2, 5) plus Z-plaquette edge (3, 4)
    c3 = noisy.circuit
    d, _ = defects_from_flips(propagate_errors(c3, [[(_measure_step(c3, 1), 1, 4, "Y")]]), mask4, lay, "Z")
    dets = tuple(int(i) for i in np.flatnonzero(d[0].ravel()))
    g = build_matching_graph(dem)
    mi = next(i for i, m in enumerate(dem.mechanisms) if m.detectors == dets)
    parts = sorted((e.u, e.v) for e in g.edges if mi in e.mechanisms)
    checks["graph bulk Y decomposition"] = dets == (10, 11, 12, 13) and parts == [(10, 13), (11, 12)]

    bad = [k for k, v in checks.items() if not v]
    assert criterion(3, not bad, f"{len(checks) - len(bad)}/{len(checks)} hand-derived sets reproduced {bad or ''}")


def test_c4_soft_readout_calibration(criterion):
    rng = np.random.default_rng(404)
    n = 10**6
    worst, details = 0.0, []
    for pm in (0.001, 0.01, 0.1):
        params = SoftReadoutParams.from_error_rates(pm, pm)
        # expected rate straight from the Gaussian tail: half the mean separation over sigma
        expected = float(norm.sf(1.0 / params.sigma_ancilla))
        bits = rng.integers(0, 2, n)
        rate = float((harden(soften(bits, params, rng), params.threshold) != bits).mean())
        z = abs(rate - expected) / math.sqrt(expected * (1 - expected) / n)
        worst = max(worst, z)
        details.append(f"{pm:g}: {rate:.5f}")
        assert math.isclose(expected, pm, rel_tol=1e-9)
    assert criterion(4, worst < 3, f"flip rates {', '.join(details)}; max deviation {worst:.2f} sigma")


def test_c5_fit_recovery(criterion):
    worst = 0.0
    for eps, r0 in ((0.01, 0.0), (0.003, 1.7), (0.045, -0.4)):
        pts = [FidelityPoint(r, (1 - 2 * eps) ** (r - r0), 10**5, 1e-3) for r in (3, 10, 50, 150, 290)]
        fit = fit_fidelity(pts)
        worst = max(worst, abs(fit.eps - eps) / eps)
    for lam, C in ((4.0, 0.32), (1.3, 0.05)):
        pairs = [(d, C / lam ** ((d + 1) / 2)) for d in (3, 5, 7)]
        worst = max(worst, abs(fit_lambda(pairs).lam - lam) / lam)
    rng = np.random.default_rng(20261015)
    eps, r0, shots, hits = 0.004, 0.3, 10**5, 0
    rounds = np.array([3, 10, 30, 60, 100])
    for _ in range(100):
        p_fail = (1 - (1 - 2 * eps) ** (rounds - r0)) / 2
        k = rng.binomial(shots, p_fail)
        pts = [
            FidelityPoint(int(r), 1 - 2 * ki / shots, shots, 2 * math.sqrt(ki / shots * (1 - ki / shots) / shots))
            for r, ki in zip(rounds, k)
        ]
        fit = fit_fidelity(pts)
        hits += abs(fit.eps - eps) <= 2 * fit.eps_err
    ok = worst < 1e-12 and hits >= 95
    assert criterion(5, ok, f"exact recovery max rel error {worst:.1e}; coverage {hits}/100 within 2 SE")


# ---------------------------------------------------------------- statistical studies


def test_c6_mwpm_suppression(criterion):
    s = _load("lambda_mwpm.json", criterion, 6)
    pairs = sorted(s["pairs"])
    fits = {d: {"eps": e, "eps_err": err} for d, e, err in pairs}
    shots_ok = all(
        min(pt["shots"] for pt in _curve(f"lambda_d{d}_mwpm.csv")) >= 10**5 for d in fits
    )
    order = all(_below(fits[b], fits[a]) for a, b in ((3, 5), (5, 7)))
    # non-overlapping 95% intervals
    sep = all(
        fits[b]["eps"] + Z95 * fits[b]["eps_err"] < fits[a]["eps"] - Z95 * fits[a]["eps_err"] for a, b in ((3, 5), (5, 7))
    )
    lam_lo = math.exp(math.log(s["lambda"]) - Z95 * s["log_lambda_err"])
    ok = shots_ok and order and sep and lam_lo > 1
    eps_txt = ", ".join(f"d={d}: {f['eps']:.3e}" for d, f in fits.items())
    assert criterion(6, ok, f"{eps_txt}; Lambda={s['lambda']:.2f} (95% lower {lam_lo:.2f})")


def _curve(name):
    path = RESULTS / name
    if not path.exists():
        pytest.skip(f"{path} not produced yet")
    from qmemlab.analysis import read_fidelity_csv

    return [{"rounds": p.rounds, "shots": p.shots} for p in read_fidelity_csv(path)[0]]


def test_c7_nn_beats_mwpm(criterion):
    fits = _load("nn_vs_mwpm_d3_fits.json", criterion, 7)["fits"]
    train = _load("nn_d3_train.json", criterion, 7)["hard"]
    if not (RESULTS / "nn_d3_hard_history.csv").exists():
        pytest.skip("training history missing")
    rounds = [pt["rounds"] for pt in _curve("nn_vs_mwpm_d3_nn.csv")]
    nn_fit, mw = fits["nn"], fits["mwpm"]
    red = _rel(nn_fit, mw)
    in_band = 0.10 <= red <= 0.30
    hard_gate = _below(nn_fit, mw) or (nn_fit["eps"] <= mw["eps"] and in_band)
    ok = train["train_shots"] + train["val_shots"] >= 5 * 10**6 and rounds == list(range(10, 291, 20)) and hard_gate
    band = "inside" if in_band else "outside"
    assert criterion(
        7, ok, f"eps NN {nn_fit['eps']:.3e} vs MWPM {mw['eps']:.3e}: reduction {red:.1%} ({band} the 20+-10% band)"
    )


def test_c8_generalization(criterion):
    w = _load("nn_generalization.json", criterion, 8)
    early, late = w["early"], w["late"]
    gap = abs(early["eps"] - late["eps"])
    lim = 2 * math.hypot(early["eps_err"], late["eps_err"])
    assert criterion(8, gap <= lim, f"eps r<=150 {early['eps']:.3e}, r>=150 {late['eps']:.3e}; gap {gap:.1e} vs 2 SE {lim:.1e}")


def test_c9_bias_transfer(criterion):
    s = _load("bias_summary.json", criterion, 9)
    adv = {eta: _rel(s[eta]["nn"], s[eta]["mwpm"]) for eta in ("0", "1", "100")}
    ok = s["0"]["nn"]["eps"] >= s["0"]["mwpm"]["eps"] and adv["100"] > adv["1"]
    txt = ", ".join(f"eta={k}: {v:+.1%}" for k, v in adv.items())
    assert criterion(9, ok, f"NN advantage over MWPM {txt}")


def test_c10_soft_decoding(criterion):
    s = _load("soft_summary.json", criterion, 10)
    f, f0 = s["pm_a=0.01"], s["pm_a=0"]
    soft_mwpm = _below(f["soft_mwpm"], f["mwpm"])
    soft_nn = _below(f["soft_nn"], f["nn"])
    a, b = f0["soft_mwpm"], f0["mwpm"]
    agree = abs(a["eps"] - b["eps"]) <= 2 * math.hypot(a["eps_err"], b["eps_err"])
    ok = soft_mwpm and soft_nn and agree
    detail = (
        f"soft MWPM {_rel(f['soft_mwpm'], f['mwpm']):+.1%} (target 15+-10%), soft NN {_rel(f['soft_nn'], f['nn']):+.1%}, "
        f"pm_a=0 agreement {'yes' if agree else 'no'}"
    )
    assert criterion(10, ok, detail)


def test_smoke_scale_pipeline():
    s = _load("smoke/smoke_summary.json")
    for d in ("5", "7"):
        assert set(s[d]) == {"mwpm", "nn"}
        assert all(-1 <= f <= 1 for _, f in s[d]["nn"])
