"""Recurrent neural-network decoder written directly in numpy.

Two stacked LSTM layers read the per-round defect vectors.  The second
layer's last hidden state goes through a ReLU and feeds two heads, each a
ReLU hidden layer and a sigmoid output:

* the auxiliary head sees only the recurrent state and predicts ``p_aux``;
* the main head also sees the final defects inferred from the data readout
  and predicts ``p_main``.

Gradients are computed by hand (backpropagation through time).  Training
runs in float32; ``Model.astype(np.float64)`` gives the double-precision
copy used for finite-difference checks.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np
from numba import njit

from .container import Container

log = logging.getLogger(__name__)

LOG_CLAMP = 1e-7
DEFAULT_HIDDEN = {3: 64, 5: 96, 7: 128}

# Parameter names in storage order.
PARAM_NAMES = (
    "l1_wx", "l1_wh", "l1_b",
    "l2_wx", "l2_wh", "l2_b",
    "aux_w1", "aux_b1", "aux_w2", "aux_b2",
    "main_w1", "main_b1", "main_w2", "main_b2",
)  # fmt: skip


def _sigmoid(x, out=None):
    # 0.5 * (1 + tanh(x/2)) is stable for large |x|
    out = np.multiply(x, 0.5, out=out)
    np.tanh(out, out=out)
    out += 1
    out *= 0.5
    return out


@dataclass
class Model:
    n_in: int
    n_final: int
    hidden: int
    params: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(cls, n_in: int, n_final: int, hidden: int, rng: np.random.Generator, dtype=np.float32) -> "Model":
        h = hidden

        def uni(fan_in, shape):
            k = fan_in**-0.5
            return rng.uniform(-k, k, size=shape).astype(dtype)

        p = {}
        for name, n_x in (("l1", n_in), ("l2", h)):
            fan = n_x + h
            p[f"{name}_wx"] = uni(fan, (n_x, 4 * h))
            p[f"{name}_wh"] = uni(fan, (h, 4 * h))
            b = uni(fan, (4 * h,))
            b[h : 2 * h] = 1.0  # forget gate
            p[f"{name}_b"] = b
        for name, n_x in (("aux", h), ("main", h + n_final)):
            p[f"{name}_w1"] = uni(n_x, (n_x, h))
            p[f"{name}_b1"] = uni(n_x, (h,))
            p[f"{name}_w2"] = uni(h, (h, 1))
            p[f"{name}_b2"] = uni(h, (1,))
        return cls(n_in, n_final, hidden, p)

    @classmethod
    def zeros(cls, n_in: int, n_final: int, hidden: int, dtype=np.float32) -> "Model":
        m = cls.init(n_in, n_final, hidden, np.random.default_rng(0), dtype)
        for v in m.params.values():
            v[...] = 0
        return m

    def astype(self, dtype) -> "Model":
        return Model(self.n_in, self.n_final, self.hidden, {k: v.astype(dtype) for k, v in self.params.items()}, dict(self.meta))

    def copy(self) -> "Model":
        return self.astype(self.dtype)

    @property
    def dtype(self):
        return self.params["l1_wx"].dtype

    def digest(self) -> str:
        h = hashlib.sha256()
        for k in PARAM_NAMES:
            h.update(np.ascontiguousarray(self.params[k], dtype="<f4").tobytes())
        return h.hexdigest()[:16]

    def to_container(self) -> Container:
        meta = {k: str(v) for k, v in self.meta.items()}
        meta.update(n_in=str(self.n_in), n_final=str(self.n_final), hidden=str(self.hidden))
        blocks = {k: np.ascontiguousarray(self.params[k], dtype="<f8").tobytes() for k in PARAM_NAMES}
        return Container(b"QNNM", meta, blocks)

    @classmethod
    def from_container(cls, c: Container) -> "Model":
        meta = dict(c.meta)
        n_in, n_final, hidden = (int(meta.pop(k)) for k in ("n_in", "n_final", "hidden"))
        shapes = {n: v.shape for n, v in cls.zeros(n_in, n_final, hidden).params.items()}
        params = {}
        for k in PARAM_NAMES:
            # binary64 blocks; older model files hold binary32
            width = len(c.blocks[k]) // max(int(np.prod(shapes[k])), 1)
            raw = np.frombuffer(c.blocks[k], dtype="<f8" if width == 8 else "<f4")
            params[k] = raw.reshape(shapes[k]).astype(np.float32)
        return cls(n_in, n_final, hidden, params, meta)

    def write(self, path) -> None:
        self.to_container().write(path)

    @classmethod
    def read(cls, path) -> "Model":
        return cls.from_container(Container.read(path, b"QNNM"))


# ---------------------------------------------------------------- forward


@njit(cache=True, fastmath=True)
def _cell_forward(z, c_prev, c):
    """Turn ``z = tanh(scaled pre-activations)`` into gates ``[i f g o]`` in place and update the cell.

    The sigmoid gates use ``sigmoid(x) = (1 + tanh(x / 2)) / 2``.
    """
    B, H4 = z.shape
    H = H4 // 4
    for b in range(B):
        zi, zf, zg, zo = z[b, :H], z[b, H : 2 * H], z[b, 2 * H : 3 * H], z[b, 3 * H :]
        cp, cc = c_prev[b], c[b]
        for k in range(H):
            i = (zi[k] + 1) * 0.5
            f = (zf[k] + 1) * 0.5
            zi[k] = i
            zf[k] = f
            zo[k] = (zo[k] + 1) * 0.5
            cc[k] = f * cp[k] + i * zg[k]


@njit(cache=True, fastmath=True)
def _cell_backward(gates, c_prev, tc, dh, dc, dz):
    """Pre-activation gradients ``dz`` from ``dh``; ``dc`` is carried to the previous step in place."""
    B, H4 = gates.shape
    H = H4 // 4
    for b in range(B):
        gi, gf, gg, go = gates[b, :H], gates[b, H : 2 * H], gates[b, 2 * H : 3 * H], gates[b, 3 * H :]
        di, df, dg, do = dz[b, :H], dz[b, H : 2 * H], dz[b, 2 * H : 3 * H], dz[b, 3 * H :]
        cp, t_, dhb, dcb = c_prev[b], tc[b], dh[b], dc[b]
        for k in range(H):
            i, f, g, o, t = gi[k], gf[k], gg[k], go[k], t_[k]
            dhv = dhb[k]
            do[k] = dhv * t * o * (1 - o)
            dcv = dcb[k] + dhv * o * (1 - t * t)
            di[k] = dcv * g * i * (1 - i)
            df[k] = dcv * cp[k] * f * (1 - f)
            dg[k] = dcv * i * (1 - g * g)
            dcb[k] = dcv * f


def _lstm_forward(x: np.ndarray, wx, wh, b, keep_all: bool):
    """Run one LSTM layer over ``x`` of shape ``(T, B, n_x)``.

    Returns the hidden states ``(T, B, H)`` (or only the last one) and the
    cache needed for the backward pass.
    """
    T, B, _ = x.shape
    H = wh.shape[0]
    zx = (x.reshape(T * B, -1) @ wx).reshape(T, B, 4 * H)
    zx += b
    hs = np.zeros((T + 1, B, H), dtype=x.dtype)
    cs = np.zeros((T + 1, B, H), dtype=x.dtype)
    gates = np.empty((T, B, 4 * H), dtype=x.dtype)
    tc = np.empty((T, B, H), dtype=x.dtype)
    scale = np.full(4 * H, 0.5, dtype=x.dtype)
    scale[2 * H : 3 * H] = 1.0
    for t in range(T):
        z = gates[t]
        np.matmul(hs[t], wh, out=z)
        z += zx[t]
        z *= scale
        np.tanh(z, out=z)
        _cell_forward(z, cs[t], cs[t + 1])
        np.tanh(cs[t + 1], out=tc[t])
        np.multiply(z[:, 3 * H :], tc[t], out=hs[t + 1])
    cache = (x, hs, cs, gates, tc)
    return (hs[1:] if keep_all else hs[-1]), cache


def _lstm_backward(dh_seq, dh_last, cache, wx, wh):
    """Backward pass of ``_lstm_forward``.

    ``dh_seq`` is the loss gradient on every output (``(T, B, H)`` or None);
    ``dh_last`` the gradient on the last output only (or None).
    """
    x, hs, cs, gates, tc = cache
    T, B, _ = x.shape
    H = wh.shape[0]
    dz = np.empty_like(gates)
    dh = np.zeros((B, H), dtype=x.dtype)
    dc = np.zeros((B, H), dtype=x.dtype)
    if dh_last is not None:
        dh += dh_last
    for t in range(T - 1, -1, -1):
        if dh_seq is not None:
            dh += dh_seq[t]
        _cell_backward(gates[t], cs[t], tc[t], dh, dc, dz[t])
        np.matmul(dz[t], wh.T, out=dh)
    flat_dz = dz.reshape(T * B, 4 * H)
    dwx = x.reshape(T * B, -1).T @ flat_dz
    dwh = hs[:-1].reshape(T * B, H).T @ flat_dz
    db = flat_dz.sum(axis=0)
    dx = (flat_dz @ wx.T).reshape(x.shape)
    return dx, dwx, dwh, db


def _dropout_mask(rng, shape, rate, dtype):
    if rng is None or rate <= 0:
        return None
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(dtype) / np.asarray(keep, dtype=dtype)


def _forward(model: Model, seq: np.ndarray, final: np.ndarray, rng=None, dropout=0.0, lstm_dropout=False):
    """Full forward pass with cache; ``seq`` is ``(B, T, n_in)``."""
    p = model.params
    dt = model.dtype
    x = np.ascontiguousarray(np.swapaxes(np.asarray(seq, dtype=dt), 0, 1))
    final = np.asarray(final, dtype=dt)
    if x.shape[2] != model.n_in or final.shape[1] != model.n_final:
        raise ValueError(
            f"input widths ({x.shape[2]}, {final.shape[1]}) do not match model ({model.n_in}, {model.n_final})"
        )
    B = x.shape[1]
    if x.shape[0] == 0:
        h2, c1, c2 = np.zeros((B, model.hidden), dtype=dt), None, None
    else:
        h1, c1 = _lstm_forward(x, p["l1_wx"], p["l1_wh"], p["l1_b"], keep_all=True)
        h2, c2 = _lstm_forward(h1, p["l2_wx"], p["l2_wh"], p["l2_b"], keep_all=False)
    r = np.maximum(h2, 0)
    m_r = _dropout_mask(rng, r.shape, dropout, dt) if lstm_dropout else None
    if m_r is not None:
        r = r * m_r
    outs = {}
    for name, inp in (("aux", r), ("main", np.concatenate([r, final], axis=1))):
        a = inp @ p[f"{name}_w1"] + p[f"{name}_b1"]
        hid = np.maximum(a, 0)
        mask = _dropout_mask(rng, hid.shape, dropout, dt)
        if mask is not None:
            hid = hid * mask
        logit = (hid @ p[f"{name}_w2"] + p[f"{name}_b2"])[:, 0]
        outs[name] = (inp, a, hid, mask, logit, _sigmoid(logit.copy()))
    cache = (x, h2, c1, c2, m_r, outs)
    return outs["main"][5], outs["aux"][5], cache


def forward(model: Model, seq: np.ndarray, final: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(p_main, p_aux)`` for a batch; ``seq`` is ``(B, T, n_in)``, ``final`` is ``(B, n_final)``."""
    seq = np.asarray(seq)
    final = np.asarray(final)
    single = seq.ndim == 2
    if single:
        seq, final = seq[None], final[None]
    p_main, p_aux, _ = _forward(model, seq, final)
    if single:
        return p_main[0], p_aux[0]
    return p_main, p_aux


def cross_entropy(target, pred) -> np.ndarray:
    """``-y ln q - (1 - y) ln(1 - q)`` with ``q`` clamped to ``[1e-7, 1 - 1e-7]``."""
    q = np.clip(pred, LOG_CLAMP, 1 - LOG_CLAMP)
    return -(target * np.log(q) + (1 - target) * np.log(1 - q))


def loss(p_main, p_aux, p_true, w_a: float = 0.5) -> float:
    """Mean of ``H(p_true, p_main) + w_a H(p_true, p_aux)`` over the batch."""
    p_true = np.asarray(p_true, dtype=np.float64)
    val = cross_entropy(p_true, np.asarray(p_main, dtype=np.float64)) + w_a * cross_entropy(
        p_true, np.asarray(p_aux, dtype=np.float64)
    )
    return float(np.mean(val))


def _dlogit(pred, logit_y, weight):
    """d(weight * H)/d(logit) with the clamp respected."""
    y = logit_y
    inside = (pred > LOG_CLAMP) & (pred < 1 - LOG_CLAMP)
    return np.where(inside, (pred - y), 0.0).astype(pred.dtype) * pred.dtype.type(weight)


def loss_and_grad(model: Model, seq, final, p_true, w_a=0.5, rng=None, dropout=0.0, lstm_dropout=False):
    """Loss and gradients of all parameters (batch mean)."""
    p = model.params
    dt = model.dtype
    p_main, p_aux, cache = _forward(model, seq, final, rng, dropout, lstm_dropout)
    x, h2, c1, c2, m_r, outs = cache
    y = np.asarray(p_true, dtype=dt)
    B = len(y)
    value = loss(p_main, p_aux, y, w_a)
    grads = {}
    dr = np.zeros_like(h2)
    for name, weight in (("main", 1.0), ("aux", w_a)):
        inp, a, hid, mask, logit, pred = outs[name]
        dl = (_dlogit(pred, y, weight) / dt.type(B))[:, None]
        grads[f"{name}_w2"] = hid.T @ dl
        grads[f"{name}_b2"] = dl.sum(axis=0)
        dhid = dl @ p[f"{name}_w2"].T
        if mask is not None:
            dhid *= mask
        da = dhid * (a > 0)
        grads[f"{name}_w1"] = inp.T @ da
        grads[f"{name}_b1"] = da.sum(axis=0)
        dinp = da @ p[f"{name}_w1"].T
        dr += dinp[:, : model.hidden]
    if m_r is not None:
        dr *= m_r
    dh2 = dr * (h2 > 0)
    if c2 is None:
        for k in ("l1_wx", "l1_wh", "l1_b", "l2_wx", "l2_wh", "l2_b"):
            grads[k] = np.zeros_like(p[k])
    else:
        dh1, grads["l2_wx"], grads["l2_wh"], grads["l2_b"] = _lstm_backward(None, dh2, c2, p["l2_wx"], p["l2_wh"])
        _, grads["l1_wx"], grads["l1_wh"], grads["l1_b"] = _lstm_backward(dh1, None, c1, p["l1_wx"], p["l1_wh"])
    return value, grads


def evaluate(model: Model, seq, final, batch_size: int = 4096) -> np.ndarray:
    """Corrections ``[p_main > 1/2]`` (ties give 0)."""
    seq = np.asarray(seq)
    out = np.empty(len(seq), dtype=np.uint8)
    for s in range(0, len(seq), batch_size):
        p_main, _ = forward(model, seq[s : s + batch_size], np.asarray(final)[s : s + batch_size])
        out[s : s + batch_size] = p_main > 0.5
    return out


# ---------------------------------------------------------------- training


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    dropout: float = 0.2
    lstm_dropout: bool = False
    w_a: float = 0.5
    patience: int = 20
    max_epochs: int = 500
    seed: int = 0
    second_stage_lr: float | None = None
    second_stage_epochs: int | None = None
    epoch_shots: int | None = None
    """Training shots per epoch (default: the whole training set)."""
    time_limit: float | None = None
    """Wall-clock budget of the first stage in seconds; checked after every epoch."""
    second_stage_time: float | None = None

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0:
            raise ValueError("learning rate and batch size must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")


@dataclass
class Dataset:
    """Defect sequences grouped by round count (each group has one sequence length)."""

    groups: list[tuple[np.ndarray, np.ndarray, np.ndarray]]
    """``(seq (n, T, n_in), final (n, n_final), p_true (n,))`` per round count."""

    def __post_init__(self):
        self.groups = [g for g in self.groups if len(g[2])]

    @property
    def n_shots(self) -> int:
        return sum(len(g[2]) for g in self.groups)

    @property
    def widths(self) -> tuple[int, int]:
        seq, final, _ = self.groups[0]
        return seq.shape[2], final.shape[1]

    @classmethod
    def from_defects(cls, tensors: Iterable, layout, basis: str) -> "Dataset":
        """Build from DefectTensor / SoftDefectTensor objects, merging equal round counts."""
        by_rounds: dict[int, list] = {}
        for t in tensors:
            by_rounds.setdefault(t.rounds, []).append((t.sequence(), t.final(layout, basis), t.p_true))
        groups = []
        for r in sorted(by_rounds):
            parts = by_rounds[r]
            groups.append(tuple(np.concatenate([p[i] for p in parts]) for i in range(3)))
        return cls(groups)

    def split(self, fraction: float, rng: np.random.Generator) -> tuple["Dataset", "Dataset"]:
        """Random split of every group; ``fraction`` goes to the second dataset."""
        a, b = [], []
        for seq, final, y in self.groups:
            order = rng.permutation(len(y))
            cut = len(y) - int(round(fraction * len(y)))
            for dst, idx in ((a, order[:cut]), (b, order[cut:])):
                dst.append((seq[idx], final[idx], y[idx]))
        return Dataset(a), Dataset(b)


class Adam:
    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            params[k] -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(params[k].dtype)


def _batches(data: Dataset, batch_size: int, rng: np.random.Generator, limit: int | None):
    """Shuffled mini-batches, each drawn from a single round-count group."""
    index = []
    for gi, (_, _, y) in enumerate(data.groups):
        order = rng.permutation(len(y))
        index += [(gi, order[s : s + batch_size]) for s in range(0, len(y), batch_size)]
    order = rng.permutation(len(index))
    used = 0
    for k in order:
        gi, idx = index[k]
        if limit is not None and used >= limit:
            return
        used += len(idx)
        seq, final, y = data.groups[gi]
        yield seq[idx], final[idx], y[idx]


def dataset_loss(model: Model, data: Dataset, w_a: float, batch_size: int = 4096) -> float:
    total, n = 0.0, 0
    for seq, final, y in data.groups:
        for s in range(0, len(y), batch_size):
            p_main, p_aux = forward(model, seq[s : s + batch_size], final[s : s + batch_size])
            total += loss(p_main, p_aux, y[s : s + batch_size], w_a) * len(p_main)
            n += len(p_main)
    return total / n


@dataclass
class History:
    rows: list[dict] = field(default_factory=list)

    def add(self, **row):
        self.rows.append(row)

    def write_csv(self, path) -> None:
        if not self.rows:
            return
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(self.rows[0]))
            w.writeheader()
            w.writerows(self.rows)

    @property
    def best_val(self) -> float:
        return min(r["val_loss"] for r in self.rows)


def _run_stage(model, train, val, cfg, lr, max_epochs, rng, history, stage, time_limit, on_epoch=None):
    opt = Adam(model.params, lr)
    best = model.copy()
    best_val = dataset_loss(model, val, cfg.w_a) if stage > 1 else math.inf
    stale = 0
    start_time = time.time()
    for epoch in range(max_epochs):
        t0 = time.time()
        total, n = 0.0, 0
        for seq, final, y in _batches(train, cfg.batch_size, rng, cfg.epoch_shots):
            value, grads = loss_and_grad(model, seq, final, y, cfg.w_a, rng, cfg.dropout, cfg.lstm_dropout)
            if not math.isfinite(value):
                raise FloatingPointError(f"non-finite training loss at stage {stage} epoch {epoch}")
            opt.step(model.params, grads)
            total += value * len(y)
            n += len(y)
        val_loss = dataset_loss(model, val, cfg.w_a)
        improved = val_loss < best_val
        if improved:
            best_val, best, stale = val_loss, model.copy(), 0
        else:
            stale += 1
        history.add(
            stage=stage, epoch=len(history.rows), lr=lr, train_loss=total / max(n, 1),
            val_loss=val_loss, best_val=best_val, seconds=round(time.time() - t0, 3),
        )  # fmt: skip
        log.info("stage %d epoch %d train %.5f val %.5f", stage, epoch, total / max(n, 1), val_loss)
        if on_epoch is not None:
            on_epoch(best, history)
        if stale >= cfg.patience:
            break
        if time_limit is not None and time.time() - start_time > time_limit:
            break
    return best


def train(train_data: Dataset, val_data: Dataset, cfg: TrainConfig, hidden: int, model: Model | None = None, on_epoch=None):
    """Adam training with early stopping on validation loss.

    Returns the best checkpoint and the per-epoch history.  With
    ``second_stage_lr`` set, training resumes from the best checkpoint at the
    lower learning rate with fresh early stopping.
    """
    if train_data.n_shots == 0 or val_data.n_shots == 0:
        raise ValueError("training and validation datasets must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    n_in, n_final = train_data.widths
    if model is None:
        model = Model.init(n_in, n_final, hidden, rng)
    history = History()
    best = _run_stage(model, train_data, val_data, cfg, cfg.learning_rate, cfg.max_epochs, rng, history, 1, cfg.time_limit, on_epoch)
    if cfg.second_stage_lr is not None:
        epochs = cfg.second_stage_epochs or cfg.max_epochs
        best = _run_stage(
            best.copy(), train_data, val_data, cfg, cfg.second_stage_lr, epochs, rng, history, 2, cfg.second_stage_time, on_epoch
        )
    best.meta.update({"train_shots": train_data.n_shots, "config": _cfg_digest(cfg)})
    return best, history


def _cfg_digest(cfg: TrainConfig) -> str:
    text = ";".join(f"{k}={v!r}" for k, v in sorted(asdict(cfg).items()))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- checks


def flat_params(model: Model) -> np.ndarray:
    return np.concatenate([model.params[k].ravel() for k in PARAM_NAMES])


def set_flat_params(model: Model, flat: np.ndarray) -> None:
    pos = 0
    for k in PARAM_NAMES:
        v = model.params[k]
        v[...] = flat[pos : pos + v.size].reshape(v.shape)
        pos += v.size


def gradient_check(model: Model, seq, final, p_true, w_a=0.5, eps=1e-5, n_coords: int | None = None, rng=None):
    """Relative error ``|g_num - g| / (|g_num| + |g|)`` between central differences and the analytic gradient.

    Norms are taken over the checked coordinates (all by default, or a random
    subset of ``n_coords``).  Use a float64 model.
    """
    _, grads = loss_and_grad(model, seq, final, p_true, w_a)
    analytic = np.concatenate([grads[k].ravel() for k in PARAM_NAMES])
    base = flat_params(model)
    coords = np.arange(base.size)
    if n_coords is not None and n_coords < base.size:
        coords = (rng or np.random.default_rng(0)).choice(base.size, n_coords, replace=False)
    numeric = np.empty(len(coords))
    for j, i in enumerate(coords):
        vals = []
        for sgn in (1, -1):
            pert = base.copy()
            pert[i] += sgn * eps
            set_flat_params(model, pert)
            pm, pa = forward(model, seq, final)
            vals.append(loss(pm, pa, p_true, w_a))
        numeric[j] = (vals[0] - vals[1]) / (2 * eps)
    set_flat_params(model, base)
    a = analytic[coords]
    denom = np.linalg.norm(numeric) + np.linalg.norm(a)
    return float(np.linalg.norm(numeric - a) / denom) if denom > 0 else 0.0
