"""Run configuration: INI-style ``key = value`` sections.

Sections and keys::

    [run]         seed, output
    [experiment]  distance (list), basis, rounds (list or [start,stop,step]),
                  bitstrings (zeros, ones or explicit 0/1 strings), shots, variant, data
    [noise]       p, eta (number or inf), pm_ancilla, pm_data, threshold,
                  and per-class overrides gate1, idle, cz, measure, reset
    [decoder]     kind (mwpm | soft-mwpm | nn | soft-nn), model
    [training]    learning_rate, batch_size, dropout, lstm_dropout, w_a, patience,
                  max_epochs, second_stage_lr, second_stage_epochs, epoch_shots,
                  time_limit, second_stage_time, hidden, validation_fraction, data
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .nn import TrainConfig
from .noise import OP_CLASSES, NoiseParams, SoftReadoutParams
from .studies import rounds_pattern

DECODERS = ("mwpm", "soft-mwpm", "nn", "soft-nn")
_KNOWN = {
    "run": {"seed", "output"},
    "experiment": {"distance", "basis", "rounds", "bitstrings", "shots", "variant", "data"},
    "noise": {"p", "eta", "pm_ancilla", "pm_data", "threshold", *OP_CLASSES},
    "decoder": {"kind", "model"},
    "training": {
        "learning_rate", "batch_size", "dropout", "lstm_dropout", "w_a", "patience", "max_epochs",
        "second_stage_lr", "second_stage_epochs", "epoch_shots", "time_limit", "second_stage_time",
        "hidden", "validation_fraction", "data",
    },
}  # fmt: skip


class ConfigError(ValueError):
    pass


def parse_rounds(text: str) -> list[int]:
    text = text.strip()
    m = re.fullmatch(r"\[\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\]", text)
    if m:
        return rounds_pattern(*(int(g) for g in m.groups()))
    try:
        out = [int(t) for t in re.split(r"[,\s]+", text) if t]
    except ValueError as exc:
        raise ConfigError(f"bad rounds list {text!r}") from exc
    if not out or min(out) < 1:
        raise ConfigError(f"rounds must be positive integers: {text!r}")
    return out


def parse_bitstrings(text: str, distance: int) -> list[tuple[int, ...]]:
    n = distance * distance
    out = []
    for tok in re.split(r"[,\s]+", text.strip()):
        if not tok:
            continue
        if tok == "zeros":
            out.append((0,) * n)
        elif tok == "ones":
            out.append((1,) * n)
        elif set(tok) <= {"0", "1"} and len(tok) == n:
            out.append(tuple(int(c) for c in tok))
        else:
            raise ConfigError(f"bitstring {tok!r} is not zeros, ones or a length-{n} 0/1 string")
    return out


@dataclass
class RunConfig:
    seed: int = 0
    output: str = "out"
    distances: list[int] = field(default_factory=lambda: [3])
    basis: str = "Z"
    rounds: list[int] = field(default_factory=lambda: [10])
    bitstrings: str = "zeros,ones"
    shots: int = 10_000
    variant: str = "standard"
    data: str | None = None
    noise: NoiseParams = field(default_factory=lambda: NoiseParams(1e-3))
    decoder: str = "mwpm"
    model: str | None = None
    training: TrainConfig = field(default_factory=TrainConfig)
    hidden: int | None = None
    validation_fraction: float = 0.1
    training_data: str | None = None
    text: str = ""
    base_dir: Path = field(default_factory=Path)

    def states(self, distance: int) -> list[tuple[int, ...]]:
        return parse_bitstrings(self.bitstrings, distance)

    def digest(self) -> str:
        """Hash of the normalised configuration (sections and keys sorted, ``run.output`` excluded)."""
        cp = configparser.ConfigParser(interpolation=None)
        cp.read_string(self.text)
        parts = []
        for sec in sorted(cp.sections()):
            for key in sorted(cp[sec]):
                if (sec, key) == ("run", "output"):
                    continue
                parts.append(f"{sec}.{key}={cp[sec][key].strip()}")
        return hashlib.sha256("\n".join(parts).encode()).hexdigest()[:16]

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def _num(sec, key, cast, default):
    if key not in sec:
        return default
    raw = sec[key].strip()
    try:
        if cast is float and raw.lower() in ("inf", "infinity"):
            return math.inf
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"{sec.name}.{key}: cannot parse {raw!r}") from exc


def load_config(path=None, text: str | None = None) -> RunConfig:
    if text is None:
        if path is None:
            raise ConfigError("no configuration given")
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        text = p.read_text(encoding="utf-8")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for sec in cp.sections():
        if sec not in _KNOWN:
            raise ConfigError(f"unknown section [{sec}]")
        unknown = set(cp[sec]) - _KNOWN[sec]
        if unknown:
            raise ConfigError(f"unknown keys in [{sec}]: {sorted(unknown)}")
    empty = configparser.SectionProxy(cp, "DEFAULT")
    get = lambda s: cp[s] if cp.has_section(s) else empty  # noqa: E731
    run, exp, noi, dec, tr = (get(s) for s in ("run", "experiment", "noise", "decoder", "training"))

    cfg = RunConfig(text=text, base_dir=Path(path).parent if path else Path("."))
    cfg.seed = _num(run, "seed", int, 0)
    cfg.output = run.get("output", "out").strip()
    if "distance" in exp:
        try:
            cfg.distances = [int(t) for t in re.split(r"[,\s]+", exp["distance"].strip()) if t]
        except ValueError as exc:
            raise ConfigError(f"bad distance list {exp['distance']!r}") from exc
    for d in cfg.distances:
        if d < 3 or d % 2 == 0:
            raise ConfigError(f"distance {d} must be odd and >= 3")
    cfg.basis = exp.get("basis", "Z").strip().upper()
    if cfg.basis not in ("X", "Z"):
        raise ConfigError("basis must be X or Z")
    if "rounds" in exp:
        cfg.rounds = parse_rounds(exp["rounds"])
    cfg.bitstrings = exp.get("bitstrings", "zeros,ones")
    for d in cfg.distances:
        if not cfg.states(d):
            raise ConfigError("no bitstrings given")
    cfg.shots = _num(exp, "shots", int, cfg.shots)
    if cfg.shots <= 0:
        raise ConfigError("shots must be positive")
    cfg.variant = exp.get("variant", "standard").strip()
    cfg.data = exp.get("data")

    p = _num(noi, "p", float, 1e-3)
    eta = _num(noi, "eta", float, 1.0)
    overrides = {k: _num(noi, k, float, None) for k in OP_CLASSES if k in noi}
    soft = None
    if "pm_ancilla" in noi or "pm_data" in noi:
        pm_a = _num(noi, "pm_ancilla", float, 0.0)
        pm_d = _num(noi, "pm_data", float, 0.0)
        try:
            soft = SoftReadoutParams.from_error_rates(pm_a, pm_d, _num(noi, "threshold", float, 0.0))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    try:
        cfg.noise = NoiseParams(p, eta, overrides, soft)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    cfg.decoder = dec.get("kind", "mwpm").strip()
    if cfg.decoder not in DECODERS:
        raise ConfigError(f"decoder kind must be one of {DECODERS}")
    cfg.model = dec.get("model")
    if cfg.decoder.startswith("soft") and soft is None:
        raise ConfigError("soft decoders need pm_ancilla / pm_data in [noise]")

    kw = {}
    for key, cast in (
        ("learning_rate", float), ("batch_size", int), ("dropout", float), ("w_a", float),
        ("patience", int), ("max_epochs", int), ("second_stage_lr", float), ("second_stage_epochs", int),
        ("epoch_shots", int), ("time_limit", float), ("second_stage_time", float),
    ):  # fmt: skip
        if key in tr:
            kw[key] = _num(tr, key, cast, None)
    if "lstm_dropout" in tr:
        kw["lstm_dropout"] = tr.getboolean("lstm_dropout")
    kw["seed"] = cfg.seed % 2**32
    try:
        cfg.training = TrainConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.hidden = _num(tr, "hidden", int, None)
    cfg.validation_fraction = _num(tr, "validation_fraction", float, 0.1)
    cfg.training_data = tr.get("data")
    return cfg
