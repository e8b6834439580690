"""``qmemlab`` command line: sample, train, decode, fit, report, dem-dump, oracle-check.

Exit codes: 0 success, 1 runtime failure, 2 configuration or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import analysis, nn
from .config import ConfigError, RunConfig, load_config
from .container import FormatError
from .dem import extract_dem
from .mwpm import assignment_posteriors, corrections_container, decode_batch, soft_decode_batch
from .sim import ShotBatch, iter_blocks, reference_frame
from .studies import Setup, derive_seed, matching_graph
from .syndrome import compute_defects, soft_defect_probs

log = logging.getLogger("qmemlab")


class InputError(Exception):
    pass


def _out_dir(args, cfg: RunConfig | None) -> Path:
    if args.out:
        out = Path(args.out)
    elif cfg is not None:
        out = cfg.resolve(cfg.output)
    else:
        out = Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.training.seed = args.seed % 2**32
    return cfg


def _digest(cfg: RunConfig, args) -> str:
    # --seed changes the run, so it is part of the digest
    d = cfg.digest()
    return d if args.seed is None else f"{d}-s{args.seed}"


def _stamp_svg(path: Path, info: dict) -> None:
    text = path.read_text()
    note = "".join(f"<!-- {k}={v} -->\n" for k, v in info.items())
    head, sep, rest = text.partition("?>\n")
    path.write_text(head + sep + note + rest if sep else note + text)


def _shot_files(args, cfg: RunConfig, out: Path, key: str | None) -> list[Path]:
    if args.input:
        paths = [Path(p) for p in args.input]
    else:
        src = cfg.resolve(key) if key else out / "shots"
        if src is None or not src.exists():
            raise InputError(f"dataset {src} not found; run 'qmemlab sample' first or set the data key")
        paths = [src] if src.is_file() else sorted(src.glob("*.qsht"))
    missing = [p for p in paths if not p.exists()]
    if missing:
        raise InputError(f"missing input files: {', '.join(map(str, missing))}")
    if not paths:
        raise InputError("no .qsht files found")
    return paths


def _setup_for(batch: ShotBatch, cfg: RunConfig) -> Setup:
    m = batch.meta
    if m.get("noise") != cfg.noise.digest():
        raise InputError(f"shot file noise digest {m.get('noise')} does not match the config ({cfg.noise.digest()})")
    bits = tuple(int(c) for c in m["bitstring"])
    return Setup.build(int(m["distance"]), int(m["rounds"]), m["basis"], bits, cfg.noise, m.get("variant", "standard"))


# ---------------------------------------------------------------- sample


def cmd_sample(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg) / "shots"
    out.mkdir(parents=True, exist_ok=True)
    digest = _digest(cfg, args)
    n = 0
    for d in cfg.distances:
        for r in cfg.rounds:
            for si, bits in enumerate(cfg.states(d)):
                setup = Setup.build(d, r, cfg.basis, bits, cfg.noise, cfg.variant)
                seed = derive_seed(cfg.seed, "sample", d, r, si)
                batch = ShotBatch.concatenate(list(iter_blocks(setup.noisy, cfg.shots, seed, args.threads)))
                batch.meta["config"] = digest
                path = out / f"shots_d{d}_r{r}_s{si}.qsht"
                batch.write(path)
                n += 1
    print(f"wrote {n} shot files to {out}")
    return 0


# ---------------------------------------------------------------- train


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    files = _shot_files(args, cfg, out, cfg.training_data)
    use_soft = cfg.decoder == "soft-nn"
    tensors, layout, basis, distance = [], None, None, None
    for path in files:
        batch = ShotBatch.read(path)
        setup = _setup_for(batch, cfg)
        if distance is not None and setup.circuit.distance != distance:
            raise InputError("training files mix code distances")
        distance, layout, basis = setup.circuit.distance, setup.layout, setup.basis
        frame = reference_frame(setup.circuit)
        if use_soft:
            tensors.append(soft_defect_probs(batch, cfg.noise.soft, frame, layout, basis))
        else:
            tensors.append(compute_defects(batch, frame, layout, basis))
    data = nn.Dataset.from_defects(tensors, layout, basis)
    tr, va = data.split(cfg.validation_fraction, np.random.default_rng(derive_seed(cfg.seed, "split")))
    hidden = cfg.hidden or nn.DEFAULT_HIDDEN.get(distance, 64)
    digest = _digest(cfg, args)

    def checkpoint(best, history):
        best.meta.update(config=digest)
        best.write(out / "model.qnnm")
        history.write_csv(out / "history.csv")

    model, hist = nn.train(tr, va, cfg.training, hidden, on_epoch=checkpoint)
    model.meta.update(
        config=digest, distance=distance, basis=basis, noise=cfg.noise.digest(), input="soft" if use_soft else "hard"
    )
    model.write(out / "model.qnnm")
    hist.write_csv(out / "history.csv")
    print(f"trained on {tr.n_shots} shots, {len(hist.rows)} epochs, best validation loss {hist.best_val:.5f}")
    print(f"model {out / 'model.qnnm'} digest {model.digest()}")
    return 0


# ---------------------------------------------------------------- decode


def _load_model(args, cfg: RunConfig) -> nn.Model:
    path = Path(args.model) if args.model else cfg.resolve(cfg.model)
    if path is None:
        raise ConfigError(f"decoder '{cfg.decoder}' requires a model path ([decoder] model or --model)")
    if not path.exists():
        raise InputError(f"model file {path} not found")
    return nn.Model.read(path)


def cmd_decode(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    files = _shot_files(args, cfg, out, cfg.data)
    model = _load_model(args, cfg) if cfg.decoder in ("nn", "soft-nn") else None
    digest = _digest(cfg, args)
    corr_dir = out / "corrections"
    corr_dir.mkdir(exist_ok=True)
    points = defaultdict(list)
    for path in files:
        batch = ShotBatch.read(path)
        setup = _setup_for(batch, cfg)
        c = setup.circuit
        frame = reference_frame(c)
        hard = compute_defects(batch, frame, setup.layout, setup.basis)
        if cfg.decoder == "mwpm":
            corr = decode_batch(matching_graph(c.distance, c.rounds, setup.basis, cfg.noise, c.variant), hard.defects)
        elif cfg.decoder == "soft-mwpm":
            g = matching_graph(c.distance, c.rounds, setup.basis, cfg.noise, c.variant)
            q = assignment_posteriors(batch, cfg.noise.soft, setup.layout.n_data)
            corr = soft_decode_batch(g, hard.defects, q)
        else:
            if int(model.meta.get("distance", c.distance)) != c.distance:
                raise InputError(f"model was trained for d={model.meta['distance']}, data has d={c.distance}")
            t = hard
            if cfg.decoder == "soft-nn":
                t = soft_defect_probs(batch, cfg.noise.soft, frame, setup.layout, setup.basis)
            corr = nn.evaluate(model, t.sequence(), t.final(setup.layout, setup.basis))
        meta = {"config": digest, "decoder": cfg.decoder, "source": path.name, "rounds": c.rounds, "distance": c.distance}
        if model is not None:
            meta["model"] = model.digest()
        corrections_container(corr, meta).write(corr_dir / (path.stem + ".qcor"))
        points[c.distance].append(analysis.fidelity(corr, hard.p_true, c.rounds))
    for d, pts in sorted(points.items()):
        avg = analysis.average_points(pts)
        header = {"config": digest, "decoder": cfg.decoder, "noise": cfg.noise.digest(), "d": d}
        path = out / f"fidelity_{cfg.decoder}_d{d}.csv"
        analysis.write_fidelity_csv(path, avg, header)
        print(f"d={d} decoder={cfg.decoder}")
        print("   r       F_L       err    shots")
        for p in avg:
            print(f"{p.rounds:4d}  {p.fidelity:.6f}  {p.err:.6f}  {p.shots:7d}")
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------- fit / report


def _fidelity_inputs(args, out: Path) -> list[Path]:
    paths = [Path(p) for p in args.input] if args.input else sorted(out.glob("fidelity_*.csv"))
    if not paths:
        raise InputError(f"no fidelity CSV files given or found in {out}")
    missing = [p for p in paths if not p.exists()]
    if missing:
        raise InputError(f"missing input files: {', '.join(map(str, missing))}")
    return paths


def _read_curves(paths):
    curves = []
    for p in paths:
        pts, header = analysis.read_fidelity_csv(p)
        if "d" not in header:
            raise InputError(f"{p} has no distance header")
        curves.append((p, pts, header))
    return curves


def _fit_rows(curves, start):
    rows = []
    for path, pts, h in curves:
        fit = analysis.fit_fidelity(pts, start)
        rows.append(
            {"decoder": h.get("decoder", ""), "d": int(h["d"]), "eps_L": fit.eps, "err": fit.eps_err,
             "r0": fit.r0, "r0_err": fit.r0_err, "start": start, "noise": h.get("noise", ""),
             "config": h.get("config", ""), "fit": fit, "points": pts}
        )  # fmt: skip
    return rows


def _write_fit_csv(path: Path, rows, header: dict):
    cols = ["decoder", "d", "eps_L", "err", "r0", "r0_err", "start", "noise", "config"]
    with open(path, "w", newline="") as fh:
        for k, v in header.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])


def _digests(curves) -> set:
    return {h.get("config", "") for _, _, h in curves}


def cmd_fit(args) -> int:
    out = _out_dir(args, _maybe_config(args))
    curves = _read_curves(_fidelity_inputs(args, out))
    rows = _fit_rows(curves, args.start)
    digests = _digests(curves)
    path = out / "fits.csv"
    _write_fit_csv(path, rows, {"config": ",".join(sorted(digests))})
    for r in rows:
        lo, hi = r["fit"].interval()
        print(f"{r['decoder']} d={r['d']}: eps_L = {r['eps_L']:.4e} +- {r['err']:.1e} (95% [{lo:.4e}, {hi:.4e}])")
    print(f"wrote {path}")
    return 0


def _maybe_config(args):
    return load_config(args.config) if args.config else None


def cmd_report(args) -> int:
    base = _out_dir(args, _maybe_config(args))
    curves = _read_curves(_fidelity_inputs(args, base))
    out = base / "report"
    out.mkdir(exist_ok=True)
    digests = _digests(curves)
    if len(digests) > 1 and not args.force:
        raise InputError(f"inputs come from different configurations {sorted(digests)}; use --force to combine")
    rows = _fit_rows(curves, args.start)
    decoders = sorted({r["decoder"] for r in rows})
    noises = sorted({r["noise"] for r in rows})
    header = {"config": ",".join(sorted(digests)), "decoders": ",".join(decoders), "noise": ",".join(noises)}
    _write_fit_csv(out / "fits.csv", rows, header)
    summary = {"header": header, "fits": [], "lambda": {}}
    lines = [f"# {k}: {v}" for k, v in header.items()]
    for dec in decoders:
        mine = sorted((r for r in rows if r["decoder"] == dec), key=lambda r: r["d"])
        svg = out / f"fidelity_{dec}.svg"
        analysis.plot_fidelity(svg, {f"d={r['d']}": (r["points"], r["fit"]) for r in mine}, f"{dec} (noise {header['noise']})")
        _stamp_svg(svg, header)
        for r in mine:
            lines.append(f"{dec} d={r['d']}: eps_L={r['eps_L']:.4e} +- {r['err']:.1e}  r0={r['r0']:.2f}")
            summary["fits"].append({k: v for k, v in r.items() if k not in ("fit", "points")})
        dists = sorted({r["d"] for r in mine})
        if len(dists) < 2:
            if args.want_lambda:
                raise InputError(f"a suppression-factor fit needs at least two distances; {dec} has {dists}")
            lines.append(f"{dec}: suppression factor skipped (needs >= 2 distances)")
            continue
        pairs = [(r["d"], r["eps_L"], r["err"]) for r in mine]
        lf = analysis.fit_lambda(pairs)
        analysis.write_lambda_csv(out / f"lambda_{dec}.csv", pairs, header)
        svg = out / f"lambda_{dec}.svg"
        analysis.plot_lambda(svg, {dec: (pairs, lf)}, f"noise {header['noise']}")
        _stamp_svg(svg, header)
        summary["lambda"][dec] = {"lambda": lf.lam, "lambda_err": lf.lam_err, "lower_95": lf.lower_bound(), "C": lf.C}
        lines.append(f"{dec}: Lambda = {lf.lam:.3f} +- {lf.lam_err:.3f} (95% lower bound {lf.lower_bound():.3f})")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    (out / "report.json").write_text(json.dumps(summary, indent=2, default=str))
    print("\n".join(lines))
    print(f"wrote report to {out}")
    return 0


# ---------------------------------------------------------------- dem-dump / oracle-check


def cmd_dem_dump(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    rounds = args.rounds or cfg.rounds[0]
    for d in cfg.distances:
        setup = Setup.build(d, rounds, cfg.basis, None, cfg.noise, cfg.variant)
        dem = extract_dem(setup.noisy, setup.layout, cfg.basis)
        path = out / f"dem_d{d}_r{rounds}.txt"
        head = f"# config={_digest(cfg, args)}\n# noise={cfg.noise.digest()}\n# distance={d} basis={cfg.basis}\n"
        path.write_text(head + dem.to_text())
        print(f"d={d}: {len(dem.mechanisms)} mechanisms, {dem.n_detectors} detectors -> {path}")
    return 0


def cmd_oracle_check(args) -> int:
    from .oracles import gradient_oracle, matching_check, propagation_check

    cfg = _maybe_config(args)
    d = cfg.distances[0] if cfg else 3
    noise = cfg.noise if cfg else None
    if noise is None:
        from .noise import NoiseParams

        noise = NoiseParams(3e-3)
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    setup = Setup.build(d, args.rounds or 3, "Z", None, noise)
    results = [propagation_check(setup.circuit, setup.layout, args.shots, seed)]
    g = matching_graph(d, setup.circuit.rounds, "Z", noise)
    frame = reference_frame(setup.circuit)
    defects = np.concatenate(
        [compute_defects(b, frame, setup.layout, "Z").defects for b in iter_blocks(setup.noisy, args.shots * 10, seed)]
    )
    results.append(matching_check(g, defects, args.max_fired))
    results.append(gradient_oracle(seed))
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.checked} checked, {r.failures} failures ({r.detail})")
    return 0 if all(r.ok for r in results) else 1


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="run configuration file")
    common.add_argument("--seed", type=int, help="override the configured master seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sampling")
    common.add_argument("--out", help="output directory (default: [run] output)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qmemlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="sample shot files").set_defaults(func=cmd_sample)
    s = sub.add_parser("train", parents=[common], help="train a neural-network decoder")
    s.add_argument("--input", nargs="+", help="shot files (default: [training] data or <out>/shots)")
    s.set_defaults(func=cmd_train)
    s = sub.add_parser("decode", parents=[common], help="decode shot files, write corrections and fidelity tables")
    s.add_argument("--input", nargs="+", help="shot files (default: [experiment] data or <out>/shots)")
    s.add_argument("--model", help="model file for nn decoders")
    s.set_defaults(func=cmd_decode)
    for name, func, text in (("fit", cmd_fit, "fit logical error rates"), ("report", cmd_report, "fits, suppression factor and plots")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--input", nargs="+", help="fidelity CSV files (default: <out>/fidelity_*.csv)")
        s.add_argument("--start", type=int, default=3, help="first round count included in the fit")
        if name == "report":
            s.add_argument("--force", action="store_true", help="combine inputs from different configurations")
            s.add_argument("--lambda", dest="want_lambda", action="store_true", help="fail unless a suppression factor can be fitted")
        s.set_defaults(func=func)
    s = sub.add_parser("dem-dump", parents=[common], help="write the detector error model as text")
    s.add_argument("--rounds", type=int, help="round count (default: first configured)")
    s.set_defaults(func=cmd_dem_dump)
    s = sub.add_parser("oracle-check", parents=[common], help="run the independent cross-checks")
    s.add_argument("--shots", type=int, default=200)
    s.add_argument("--rounds", type=int)
    s.add_argument("--max-fired", type=int, default=10)
    s.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, InputError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
