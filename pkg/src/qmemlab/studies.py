"""End-to-end memory-experiment studies: sample, decode, fit, write results.

Each study writes CSV/JSON files into an output directory; the acceptance
tests read these files instead of re-running hours of simulation.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import analysis, nn
from .dem import build_matching_graph, extract_dem
from .layout import build_layout, build_memory_circuit
from .mwpm import assignment_posteriors, decode_batch, soft_decode_batch
from .noise import NoiseParams, SoftReadoutParams, attach_noise
from .sim import iter_blocks, reference_frame
from .syndrome import compute_defects, soft_defect_probs

log = logging.getLogger(__name__)


def rounds_pattern(start: int, stop: int, step: int) -> list[int]:
    """``[start, stop, step]`` -> ``start, start + step, ..., <= stop``."""
    if step <= 0 or start < 1 or stop < start:
        raise ValueError(f"bad rounds pattern [{start}, {stop}, {step}]")
    return list(range(start, stop + 1, step))


def derive_seed(master: int, *keys) -> int:
    text = ":".join(str(k) for k in (master, *keys))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def states_for(distance: int, n_states: int = 2) -> list[tuple[int, ...]]:
    """All-zeros and all-ones prepared bitstrings."""
    n = distance * distance
    return [tuple([0] * n), tuple([1] * n)][:n_states]


@dataclass
class Setup:
    """Everything needed to sample and decode one (distance, rounds, state) experiment."""

    layout: object
    circuit: object
    noisy: object
    basis: str

    @classmethod
    def build(cls, distance, rounds, basis, bitstring, params: NoiseParams, variant="standard"):
        layout = build_layout(distance, variant)
        circuit = build_memory_circuit(layout, rounds, basis, bitstring)
        return cls(layout, circuit, attach_noise(circuit, params), basis)


_GRAPHS: dict = {}


def matching_graph(distance, rounds, basis, params: NoiseParams, variant="standard"):
    """Matching graph for the all-zeros circuit (the detector model does not depend on the prepared state)."""
    key = (distance, rounds, basis, params.digest(), variant)
    g = _GRAPHS.get(key)
    if g is None:
        s = Setup.build(distance, rounds, basis, None, params, variant)
        g = build_matching_graph(extract_dem(s.noisy, s.layout, basis))
        if len(_GRAPHS) > 64:
            _GRAPHS.clear()
        _GRAPHS[key] = g
    return g


def iter_defects(setup: Setup, shots: int, seed: int, soft: bool = False):
    """Yield ``(hard DefectTensor, soft tensor or None, ShotBatch)`` per sampling block."""
    frame = reference_frame(setup.circuit)
    for batch in iter_blocks(setup.noisy, shots, seed):
        hard = compute_defects(batch, frame, setup.layout, setup.basis)
        sd = None
        if soft:
            sd = soft_defect_probs(batch, setup.noisy.params.soft, frame, setup.layout, setup.basis)
        yield hard, sd, batch


# ---------------------------------------------------------------- datasets


def generate_dataset(
    distance: int,
    rounds_list: Sequence[int],
    params: NoiseParams,
    shots_per_point: int,
    seed: int,
    basis: str = "Z",
    n_states: int = 2,
    soft: bool = False,
) -> tuple[nn.Dataset, nn.Dataset | None]:
    """NN training data: hard dataset, plus the soft-probability dataset when ``soft``."""
    hard_t, soft_t = [], []
    layout = build_layout(distance)
    for r in rounds_list:
        for si, bits in enumerate(states_for(distance, n_states)):
            setup = Setup.build(distance, r, basis, bits, params)
            for h, s, _ in iter_defects(setup, shots_per_point, derive_seed(seed, "data", r, si), soft):
                hard_t.append(_compact(h))
                if s is not None:
                    soft_t.append(s)
    hard = nn.Dataset.from_defects(hard_t, layout, basis)
    soft_ds = nn.Dataset.from_defects(soft_t, layout, basis) if soft else None
    return hard, soft_ds


def _compact(t):
    """Keep hard defects as uint8; the NN casts per mini-batch."""
    t.defects = t.defects.astype(np.uint8)
    return t


# ---------------------------------------------------------------- decoding curves


Decoder = Callable[[Setup, object, object, object], np.ndarray]


def mwpm_decoder(setup: Setup, hard, soft, batch) -> np.ndarray:
    c = setup.circuit
    g = matching_graph(c.distance, c.rounds, setup.basis, setup.noisy.params, c.variant)
    return decode_batch(g, hard.defects)


def soft_mwpm_decoder(setup: Setup, hard, soft, batch) -> np.ndarray:
    c = setup.circuit
    g = matching_graph(c.distance, c.rounds, setup.basis, setup.noisy.params, c.variant)
    q = assignment_posteriors(batch, setup.noisy.params.soft, setup.layout.n_data)
    return soft_decode_batch(g, hard.defects, q)


def nn_decoder(model: nn.Model, use_soft: bool = False) -> Decoder:
    def run(setup: Setup, hard, soft, batch):
        t = soft if use_soft else hard
        return nn.evaluate(model, t.sequence(), t.final(setup.layout, setup.basis))

    return run


def memory_curve(
    distance: int,
    rounds_list: Sequence[int],
    params: NoiseParams,
    shots_per_point: int,
    seed: int,
    decoders: dict[str, Decoder],
    basis: str = "Z",
    n_states: int = 2,
    soft: bool = False,
) -> dict[str, list[analysis.FidelityPoint]]:
    """State-averaged fidelity per round count for every decoder, all on the same shots.

    ``shots_per_point`` is split evenly over the prepared states.
    """
    per_state = max(1, shots_per_point // n_states)
    raw: dict[str, list] = {k: [] for k in decoders}
    for r in rounds_list:
        t0 = time.time()
        for si, bits in enumerate(states_for(distance, n_states)):
            setup = Setup.build(distance, r, basis, bits, params)
            fails = {k: [] for k in decoders}
            for hard, sd, batch in iter_defects(setup, per_state, derive_seed(seed, "eval", distance, r, si), soft):
                for name, dec in decoders.items():
                    fails[name].append(dec(setup, hard, sd, batch) ^ hard.p_true)
            for name in decoders:
                f = np.concatenate(fails[name])
                raw[name].append(analysis.fidelity(f, np.zeros_like(f), r))
        log.info("d=%d r=%d done in %.1fs", distance, r, time.time() - t0)
    return {k: analysis.average_points(v) for k, v in raw.items()}


# ---------------------------------------------------------------- result files


def _fit_dict(fit: analysis.FidelityFit) -> dict:
    return {"eps": fit.eps, "eps_err": fit.eps_err, "r0": fit.r0, "r0_err": fit.r0_err, "start": fit.start}


def save_curves(out: Path, tag: str, curves: dict, meta: dict, start: int = 3) -> dict:
    """Write per-decoder fidelity CSVs and a fit summary; returns the fits."""
    out.mkdir(parents=True, exist_ok=True)
    fits = {}
    for name, pts in curves.items():
        analysis.write_fidelity_csv(out / f"{tag}_{name}.csv", pts, {**meta, "decoder": name})
        fits[name] = analysis.fit_fidelity(pts, start)
    summary = {"meta": meta, "fits": {k: _fit_dict(v) for k, v in fits.items()}}
    (out / f"{tag}_fits.json").write_text(json.dumps(summary, indent=2, default=str))
    analysis.plot_fidelity(out / f"{tag}.svg", {k: (curves[k], fits[k]) for k in curves}, tag)
    return fits


def study_mwpm_lambda(out, p=1e-3, shots=100_000, seed=1, distances=(3, 5, 7), rounds=None):
    """MWPM logical error rates for several distances and the fitted suppression factor."""
    out = Path(out)
    params = NoiseParams(p)
    pairs = []
    for d in distances:
        rl = rounds or ({3: list(range(10, 291, 40))}.get(d) or list(range(10, 151, 20)))
        curves = memory_curve(d, rl, params, shots, derive_seed(seed, "lambda", d), {"mwpm": mwpm_decoder})
        fit = save_curves(out, f"lambda_d{d}", curves, {"d": d, "p": p, "noise": params.digest()})["mwpm"]
        pairs.append((d, fit.eps, fit.eps_err))
    lf = analysis.fit_lambda(pairs)
    analysis.write_lambda_csv(out / "lambda_mwpm.csv", pairs, {"p": p})
    analysis.plot_lambda(out / "lambda_mwpm.svg", {"MWPM": (pairs, lf)})
    summary = {"pairs": pairs, "lambda": lf.lam, "lambda_err": lf.lam_err, "log_lambda_err": lf.log_lam_err, "C": lf.C}
    (out / "lambda_mwpm.json").write_text(json.dumps(summary, indent=2))
    return summary


def train_nn_study(
    out,
    distance=3,
    p=1e-3,
    total_shots=5_600_000,
    pattern=(1, 37, 4),
    seed=2,
    time_limit=4.5 * 3600,
    second_stage_time=1.5 * 3600,
    epoch_shots=1_000_000,
    soft_pm: tuple[float, float] | None = None,
    init_model: nn.Model | None = None,
    tag="nn_d3",
    cfg_overrides: dict | None = None,
):
    """Generate a training set, train (lr 1e-3, batch 256, dropout 0.2, then lr 1e-4) and save model + history.

    ``soft_pm = (pm_ancilla, pm_data)`` switches to soft readout; two models
    are then trained on the same shots, one on hard defects and one on soft
    defect probabilities.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rl = rounds_pattern(*pattern)
    soft = soft_pm is not None
    sp = SoftReadoutParams.from_error_rates(*soft_pm) if soft else None
    params = NoiseParams(p, soft=sp)
    per_point = math.ceil(total_shots / (len(rl) * 2))
    t0 = time.time()
    hard, soft_ds = generate_dataset(distance, rl, params, per_point, derive_seed(seed, tag), soft=soft)
    log.info("generated %d shots in %.0fs", hard.n_shots, time.time() - t0)
    variants = {"hard": hard} if not soft else {"hard": hard, "soft": soft_ds}
    results = {}
    for name, data in variants.items():
        rng = np.random.default_rng(derive_seed(seed, tag, name, "split"))
        tr, va = data.split(0.1, rng)
        settings = dict(
            learning_rate=1e-3, batch_size=256, dropout=0.2, seed=derive_seed(seed, tag, name) % 2**32,
            epoch_shots=epoch_shots, time_limit=time_limit / len(variants), second_stage_lr=1e-4,
            second_stage_time=second_stage_time / len(variants),
        )  # fmt: skip
        settings.update(cfg_overrides or {})
        cfg = nn.TrainConfig(**settings)
        hidden = nn.DEFAULT_HIDDEN[distance]
        model_path = out / f"{tag}_{name}.qnnm"
        hist_path = out / f"{tag}_{name}_history.csv"

        def checkpoint(best, history, model_path=model_path, hist_path=hist_path):
            best.write(model_path)
            history.write_csv(hist_path)

        start = init_model.copy() if init_model is not None else None
        model, hist = nn.train(tr, va, cfg, hidden, start, on_epoch=checkpoint)
        model.meta.update(distance=distance, p=p, noise=params.digest(), input=name)
        model.write(model_path)
        hist.write_csv(hist_path)
        results[name] = {"train_shots": tr.n_shots, "val_shots": va.n_shots, "epochs": len(hist.rows), "best_val": hist.best_val}
        del tr, va
    (out / f"{tag}_train.json").write_text(json.dumps(results, indent=2))
    return results


# ---------------------------------------------------------------- acceptance studies

EVAL_ROUNDS_D3 = list(range(10, 291, 20))
SOFT_PM = (0.01, 0.001)


def _load(out: Path, name: str) -> nn.Model:
    path = out / name
    if not path.exists():
        raise FileNotFoundError(f"{path} missing; run the 'train' study first")
    return nn.Model.read(path)


def run_train(out) -> None:
    train_nn_study(out, tag="nn_d3")


def run_lambda(out) -> None:
    study_mwpm_lambda(out)


def run_nn_eval(out, shots=200_000, seed=3) -> dict:
    out = Path(out)
    model = _load(out, "nn_d3_hard.qnnm")
    params = NoiseParams(1e-3)
    decoders = {"mwpm": mwpm_decoder, "nn": nn_decoder(model)}
    curves = memory_curve(3, EVAL_ROUNDS_D3, params, shots, seed, decoders)
    fits = save_curves(out, "nn_vs_mwpm_d3", curves, {"d": 3, "p": 1e-3, "noise": params.digest()})
    windows = {}
    for label, lo, hi in (("early", 10, 150), ("late", 150, 290)):
        pts = [p for p in curves["nn"] if lo <= p.rounds <= hi]
        windows[label] = _fit_dict(analysis.fit_fidelity(pts, start=lo))
    (out / "nn_generalization.json").write_text(json.dumps(windows, indent=2))
    return {"fits": {k: _fit_dict(v) for k, v in fits.items()}, "windows": windows}


def run_bias(out, shots=100_000, seed=4, rounds=(10, 30, 50, 70, 90)) -> dict:
    out = Path(out)
    model = _load(out, "nn_d3_hard.qnnm")
    summary = {}
    for eta in (0.0, 1.0, 100.0):
        params = NoiseParams(1e-3, eta=eta)
        decoders = {"mwpm": mwpm_decoder, "nn": nn_decoder(model)}
        curves = memory_curve(3, list(rounds), params, shots, derive_seed(seed, eta), decoders)
        fits = save_curves(out, f"bias_eta{eta:g}", curves, {"d": 3, "p": 1e-3, "eta": eta, "noise": params.digest()})
        summary[f"{eta:g}"] = {k: _fit_dict(v) for k, v in fits.items()}
    (out / "bias_summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def run_soft_train(out) -> None:
    out = Path(out)
    base = _load(out, "nn_d3_hard.qnnm")
    train_nn_study(
        out, total_shots=2_000_000, soft_pm=SOFT_PM, init_model=base, tag="nn_d3_soft",
        time_limit=2 * 3600, second_stage_time=1 * 3600, epoch_shots=500_000,
    )  # fmt: skip


def run_soft_eval(out, shots=100_000, seed=5, rounds=(10, 30, 50, 70, 90)) -> dict:
    out = Path(out)
    hard_nn = _load(out, "nn_d3_soft_hard.qnnm")
    soft_nn = _load(out, "nn_d3_soft_soft.qnnm")
    summary = {}
    params = NoiseParams(1e-3, soft=SoftReadoutParams.from_error_rates(*SOFT_PM))
    decoders = {
        "mwpm": mwpm_decoder,
        "soft_mwpm": soft_mwpm_decoder,
        "nn": nn_decoder(hard_nn),
        "soft_nn": nn_decoder(soft_nn, use_soft=True),
    }
    curves = memory_curve(3, list(rounds), params, shots, seed, decoders, soft=True)
    fits = save_curves(out, "soft_d3", curves, {"d": 3, "p": 1e-3, "pm_a": SOFT_PM[0], "pm_d": SOFT_PM[1]})
    summary["pm_a=0.01"] = {k: _fit_dict(v) for k, v in fits.items()}
    params0 = NoiseParams(1e-3, soft=SoftReadoutParams.from_error_rates(0.0, SOFT_PM[1]))
    curves0 = memory_curve(
        3, list(rounds), params0, shots, derive_seed(seed, 0), {"mwpm": mwpm_decoder, "soft_mwpm": soft_mwpm_decoder}, soft=True
    )
    fits0 = save_curves(out, "soft_d3_pma0", curves0, {"d": 3, "p": 1e-3, "pm_a": 0.0, "pm_d": SOFT_PM[1]})
    summary["pm_a=0"] = {k: _fit_dict(v) for k, v in fits0.items()}
    (out / "soft_summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def run_smoke(out, shots=1000, seed=6) -> dict:
    """d=5 and d=7 training/evaluation at smoke scale (full-scale runs are out of budget)."""
    out = Path(out) / "smoke"
    summary = {}
    for d, p in ((5, 1e-3), (7, 5e-4)):
        tag = f"nn_d{d}_smoke"
        train_nn_study(out, distance=d, p=p, total_shots=shots, pattern=(1, 9, 4), tag=tag, time_limit=60, second_stage_time=10, epoch_shots=None)
        model = _load(out, f"{tag}_hard.qnnm")
        curves = memory_curve(d, [3, 5, 7], NoiseParams(p), shots, derive_seed(seed, d), {"mwpm": mwpm_decoder, "nn": nn_decoder(model)})
        summary[str(d)] = {k: [(pt.rounds, pt.fidelity) for pt in v] for k, v in curves.items()}
    (out / "smoke_summary.json").write_text(json.dumps(summary, indent=2))
    return summary


STUDIES = {
    "train": run_train,
    "lambda": run_lambda,
    "nn-eval": run_nn_eval,
    "bias": run_bias,
    "soft-train": run_soft_train,
    "soft-eval": run_soft_eval,
    "smoke": run_smoke,
}
