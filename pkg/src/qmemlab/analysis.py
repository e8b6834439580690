"""Logical fidelity, per-round logical error rates and suppression factors."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

Z95 = 1.959963984540054


@dataclass(frozen=True)
class FidelityPoint:
    rounds: int
    fidelity: float
    shots: int
    err: float
    """One standard error of ``fidelity``."""


def fidelity(corrections, p_true, rounds: int = 0) -> FidelityPoint:
    """``F = 1 - 2 p_L`` where ``p_L`` is the mean of ``correction XOR p_true``."""
    fails = np.asarray(corrections, dtype=np.uint8) ^ np.asarray(p_true, dtype=np.uint8)
    n = len(fails)
    if n == 0:
        raise ValueError("no shots")
    p = float(fails.mean())
    return FidelityPoint(rounds, 1 - 2 * p, n, 2 * math.sqrt(p * (1 - p) / n))


def average_points(points: Sequence[FidelityPoint]) -> list[FidelityPoint]:
    """Average fidelities over prepared states: equal weight per state at each round count."""
    by_r: dict[int, list[FidelityPoint]] = {}
    for pt in points:
        by_r.setdefault(pt.rounds, []).append(pt)
    out = []
    for r in sorted(by_r):
        pts = by_r[r]
        k = len(pts)
        f = sum(p.fidelity for p in pts) / k
        err = math.sqrt(sum(p.err**2 for p in pts)) / k
        out.append(FidelityPoint(r, f, sum(p.shots for p in pts), err))
    return out


@dataclass
class FidelityFit:
    eps: float
    r0: float
    eps_err: float
    r0_err: float
    start: int
    points: list[FidelityPoint] = field(default_factory=list)

    def interval(self, z: float = Z95) -> tuple[float, float]:
        return self.eps - z * self.eps_err, self.eps + z * self.eps_err


def _wls(x, y, w):
    """Weighted least squares ``y = a + b x`` with known variances ``1/w``; returns (a, b, cov)."""
    x, y, w = (np.asarray(v, dtype=np.float64) for v in (x, y, w))
    # centred form keeps exact data exact when the weights span many decades
    sw = w.sum()
    xm, ym = (w @ x) / sw, (w @ y) / sw
    sxx = w @ (x - xm) ** 2
    b = (w @ ((x - xm) * (y - ym))) / sxx
    a = ym - b * xm
    cov = np.array([[1 / sw + xm**2 / sxx, -xm / sxx], [-xm / sxx, 1 / sxx]])
    return float(a), float(b), cov


def fit_fidelity(points: Sequence[FidelityPoint], start: int = 3) -> FidelityFit:
    """Fit ``F(r) = (1 - 2 eps)^(r - r0)`` by weighted least squares on ``ln F``.

    Points before ``start`` and points with ``F <= 0`` are excluded.  The
    variance of ``ln F`` is ``err^2 / F^2``; points with zero error get the
    weight of a single-shot binomial floor.
    """
    use = []
    for p in points:
        if p.rounds < start:
            continue
        if p.fidelity <= 0:
            log.warning("dropping point r=%d with non-positive fidelity %.4g", p.rounds, p.fidelity)
            continue
        use.append(p)
    if len(use) < 2:
        raise ValueError("need at least two usable fidelity points")
    r = np.array([p.rounds for p in use], dtype=np.float64)
    f = np.array([p.fidelity for p in use])
    err = np.array([p.err for p in use])
    floor = np.array([1.0 / max(p.shots, 1) for p in use])
    var = np.maximum(err, floor) ** 2 / f**2
    a, b, cov = _wls(r, np.log(f), 1.0 / var)
    eps = -math.expm1(b) / 2
    eps_err = math.exp(b) / 2 * math.sqrt(cov[1, 1])
    r0 = -a / b if b != 0 else 0.0
    # delta method for r0 = -a/b
    if b != 0:
        g = np.array([-1 / b, a / b**2])
        r0_err = float(math.sqrt(g @ cov @ g))
    else:
        r0_err = math.inf
    return FidelityFit(eps, r0, eps_err, r0_err, start, list(points))


@dataclass
class LambdaFit:
    lam: float
    C: float
    lam_err: float
    C_err: float
    pairs: list[tuple[int, float, float]] = field(default_factory=list)
    log_lam_err: float = 0.0

    def lower_bound(self, z: float = Z95) -> float:
        """Lower end of the two-sided interval, computed on ``ln Lambda``."""
        return math.exp(math.log(self.lam) - z * self.log_lam_err)


def fit_lambda(pairs: Sequence[tuple], weighted: bool = True) -> LambdaFit:
    """Fit ``eps(d) = C / Lambda^((d+1)/2)`` by least squares on ``ln eps``.

    ``pairs`` holds ``(d, eps)`` or ``(d, eps, eps_err)``.  With errors given
    (and ``weighted``) each point has variance ``(eps_err / eps)^2``.
    """
    if len(pairs) < 2:
        raise ValueError("need at least two distances")
    d = np.array([p[0] for p in pairs], dtype=np.float64)
    eps = np.array([p[1] for p in pairs], dtype=np.float64)
    if np.any(eps <= 0):
        raise ValueError("logical error rates must be positive")
    errs = np.array([p[2] if len(p) > 2 else 0.0 for p in pairs], dtype=np.float64)
    x = (d + 1) / 2
    y = np.log(eps)
    if weighted and np.all(errs > 0):
        w = (eps / errs) ** 2
        a, b, cov = _wls(x, y, w)
    else:
        a, b, cov = _wls(x, y, np.ones_like(x))
        resid = y - (a + b * x)
        dof = len(x) - 2
        cov = cov * (float(resid @ resid) / dof if dof > 0 else 0.0)
    lam = math.exp(-b)
    C = math.exp(a)
    log_lam_err = math.sqrt(cov[1, 1])
    full = [(int(p[0]), float(p[1]), float(p[2]) if len(p) > 2 else 0.0) for p in pairs]
    return LambdaFit(lam, C, lam * log_lam_err, C * math.sqrt(cov[0, 0]), full, log_lam_err)


# ---------------------------------------------------------------- output


def write_fidelity_csv(path, points: Sequence[FidelityPoint], header: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(["r", "F_L", "err", "shots"])
        for p in points:
            w.writerow([p.rounds, repr(p.fidelity), repr(p.err), p.shots])


def read_fidelity_csv(path) -> tuple[list[FidelityPoint], dict]:
    header, rows = {}, []
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            header[k] = v
        else:
            body.append(line)
    for row in csv.DictReader(body):
        rows.append(FidelityPoint(int(row["r"]), float(row["F_L"]), int(row["shots"]), float(row["err"])))
    return rows, header


def write_lambda_csv(path, pairs: Sequence[tuple], header: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(["d", "eps_L", "err"])
        for p in pairs:
            w.writerow([p[0], repr(p[1]), repr(p[2] if len(p) > 2 else 0.0)])


def plot_fidelity(path, curves: dict[str, tuple[Sequence[FidelityPoint], FidelityFit | None]], title: str = "") -> None:
    """``F_L`` versus rounds on a log-linear plot, one curve per decoder."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.6))
    for label, (pts, fit) in curves.items():
        r = [p.rounds for p in pts]
        f = [p.fidelity for p in pts]
        e = [p.err for p in pts]
        line = ax.errorbar(r, f, yerr=e, fmt="o", ms=3, label=label)
        if fit is not None:
            rr = np.linspace(min(r), max(r), 200)
            ax.plot(rr, (1 - 2 * fit.eps) ** (rr - fit.r0), color=line[0].get_color(), lw=1)
    ax.set_yscale("log")
    ax.set_xlabel("QEC round r")
    ax.set_ylabel("logical fidelity F_L")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_lambda(path, series: dict[str, tuple[Sequence[tuple], LambdaFit | None]], title: str = "") -> None:
    """``eps_L`` versus distance on a log scale, one series per decoder."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4.5, 3.6))
    for label, (pairs, fit) in series.items():
        d = [p[0] for p in pairs]
        eps = [p[1] for p in pairs]
        err = [p[2] if len(p) > 2 else 0.0 for p in pairs]
        line = ax.errorbar(d, eps, yerr=err, fmt="o", label=label)
        if fit is not None:
            dd = np.linspace(min(d), max(d), 50)
            ax.plot(dd, fit.C / fit.lam ** ((dd + 1) / 2), color=line[0].get_color(), lw=1)
    ax.set_yscale("log")
    ax.set_xlabel("code distance d")
    ax.set_ylabel("logical error rate per round")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
