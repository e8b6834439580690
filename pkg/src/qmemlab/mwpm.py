"""Minimum-weight perfect matching decoding, hard and soft.

``decode`` is the exact reference path: Dijkstra distances between fired
detectors, a derived complete graph with one boundary copy per detector, and
blossom matching from networkx.  ``decode_batch`` and ``soft_decode_batch``
run the same problem through PyMatching for throughput.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations

import networkx as nx
import numpy as np
import pymatching
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .container import Container
from .dem import BOUNDARY, MatchingGraph, edge_weight, xor_prob
from .noise import SoftReadoutParams, posterior_one
from .sim import ShotBatch


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]
    """Matched detector pairs; ``(det, BOUNDARY)`` for boundary matches."""
    weight: float
    flip: bool


class _Paths:
    """All-pairs shortest paths over the detector graph, with path flip parities."""

    def __init__(self, graph: MatchingGraph):
        n = graph.n_detectors
        self.n = n
        self.boundary = n
        u, v, w, f = [], [], [], []
        best: dict[tuple[int, int], tuple[float, bool]] = {}
        for e in graph.edges:
            a, b = e.u, (n if e.v == BOUNDARY else e.v)
            key = (min(a, b), max(a, b))
            cand = (e.weight, e.flip)
            if key not in best or cand[0] < best[key][0]:
                best[key] = cand
        for (a, b), (wt, fl) in best.items():
            u += [a, b]
            v += [b, a]
            w += [wt, wt]
            f += [fl, fl]
        self.flip = {(a, b): fl for a, b, fl in zip(u, v, f)}
        self.adj = csr_matrix((w, (u, v)), shape=(n + 1, n + 1))
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        # Detector-to-detector paths may not pass through the boundary node.
        keep = np.asarray([a != n and b != n for a, b in zip(u, v)])
        uu, vv, ww = np.asarray(u)[keep], np.asarray(v)[keep], np.asarray(w)[keep]
        self.inner = csr_matrix((ww, (uu, vv)), shape=(n + 1, n + 1))
        self._bdist, self._bpred = dijkstra(self.adj, indices=n, return_predecessors=True)

    def from_source(self, s: int):
        hit = self._cache.get(s)
        if hit is None:
            hit = dijkstra(self.inner, indices=s, return_predecessors=True)
            self._cache[s] = hit
        return hit

    def _parity(self, pred: np.ndarray, src: int, dst: int) -> bool:
        flip, node = False, dst
        while node != src:
            prev = int(pred[node])
            if prev < 0:
                raise ValueError("no path between detectors")
            flip ^= self.flip[(prev, node)]
            node = prev
        return flip

    def pair(self, a: int, b: int) -> tuple[float, bool]:
        dist, pred = self.from_source(a)
        if not math.isfinite(dist[b]):
            return math.inf, False
        return float(dist[b]), self._parity(pred, a, b)

    def to_boundary(self, a: int) -> tuple[float, bool]:
        if not math.isfinite(self._bdist[a]):
            return math.inf, False
        return float(self._bdist[a]), self._parity(self._bpred, self.boundary, a)


def _paths(graph: MatchingGraph) -> _Paths:
    cached = graph.__dict__.get("_paths")
    if cached is None:
        cached = _Paths(graph)
        graph.__dict__["_paths"] = cached
    return cached


def _check_fired(graph: MatchingGraph, fired) -> list[int]:
    fired = sorted(int(x) for x in fired)
    for f in fired:
        if not 0 <= f < graph.n_detectors:
            raise ValueError(f"detector {f} outside the graph")
    return fired


def decode(graph: MatchingGraph, fired) -> tuple[bool, Matching]:
    """Exact MWPM on the derived complete graph of the fired detectors."""
    fired = _check_fired(graph, fired)
    if not fired:
        return False, Matching((), 0.0, False)
    paths = _paths(graph)
    g = nx.Graph()
    info = {}
    # Large constant keeps all weights positive for max-weight matching.
    pair_w = {}
    for a, b in combinations(fired, 2):
        w, f = paths.pair(a, b)
        if math.isfinite(w):
            pair_w[(a, b)] = (w, f)
    bound = {a: paths.to_boundary(a) for a in fired}
    finite = [w for w, _ in pair_w.values()] + [w for w, _ in bound.values() if math.isfinite(w)]
    big = 1.0 + 2.0 * (max(finite) if finite else 0.0)
    for (a, b), (w, f) in pair_w.items():
        g.add_edge(a, b, weight=big - w)
        info[(a, b)] = (w, f)
    for a, (w, f) in bound.items():
        if math.isfinite(w):
            g.add_edge(a, ("B", a), weight=big - w)
            info[(a, BOUNDARY)] = (w, f)
    for a, b in combinations(fired, 2):
        g.add_edge(("B", a), ("B", b), weight=big)
    mate = nx.max_weight_matching(g, maxcardinality=True)
    pairs, flip = [], False
    for x, y in mate:
        if isinstance(x, tuple) and isinstance(y, tuple):
            continue
        if isinstance(x, tuple):
            x, y = y, x
        key = (x, BOUNDARY) if isinstance(y, tuple) else (min(x, y), max(x, y))
        pairs.append(key)
    pairs.sort()
    matched = {p for pr in pairs for p in pr if p != BOUNDARY}
    if matched != set(fired):
        raise ValueError("no perfect matching: graph is not connected to the boundary")
    weights = [info[p][0] for p in pairs]
    for p in pairs:
        flip ^= info[p][1]
    return flip, Matching(tuple(pairs), math.fsum(weights), flip)


def brute_force_decode(graph: MatchingGraph, fired) -> tuple[bool, float]:
    """Exhaustive search over all pairings (each detector paired or sent to the boundary)."""
    fired = _check_fired(graph, fired)
    paths = _paths(graph)
    best = (math.inf, False)

    def search(rest, acc, flip):
        nonlocal best
        if not rest:
            total = math.fsum(acc)
            if total < best[0]:
                best = (total, flip)
            return
        head, tail = rest[0], rest[1:]
        w, f = paths.to_boundary(head)
        if math.isfinite(w):
            search(tail, acc + [w], flip ^ f)
        for i, other in enumerate(tail):
            w, f = paths.pair(head, other)
            if math.isfinite(w):
                search(tail[:i] + tail[i + 1 :], acc + [w], flip ^ f)

    search(tuple(fired), [], False)
    return best[1], best[0]


def to_pymatching(graph: MatchingGraph, probs=None) -> pymatching.Matching:
    """PyMatching graph with fault id 0 standing for the logical observable."""
    m = pymatching.Matching()
    for i, e in enumerate(graph.edges):
        p = e.p if probs is None else probs[i]
        w = edge_weight(p)
        faults = {0} if e.flip else set()
        if e.v == BOUNDARY:
            m.add_boundary_edge(e.u, fault_ids=faults, weight=w, error_probability=p, merge_strategy="smallest-weight")
        else:
            m.add_edge(e.u, e.v, fault_ids=faults, weight=w, error_probability=p, merge_strategy="smallest-weight")
    m.ensure_num_fault_ids(1)
    return m


def _syndromes(defects: np.ndarray, n_detectors: int) -> np.ndarray:
    flat = np.asarray(defects, dtype=np.uint8).reshape(len(defects), -1)
    if flat.shape[1] != n_detectors:
        raise ValueError(f"defects have {flat.shape[1]} detectors, graph has {n_detectors}")
    return flat


def decode_batch(graph: MatchingGraph, defects: np.ndarray) -> np.ndarray:
    """Logical corrections for a ``(shots, rows, n_anc)`` defect tensor."""
    flat = _syndromes(defects, graph.n_detectors)
    m = graph.__dict__.get("_pm")
    if m is None:
        m = graph.__dict__["_pm"] = to_pymatching(graph)
    out = np.zeros(len(flat), dtype=np.uint8)
    fired = flat.any(axis=1)
    if fired.any():
        width = m.num_detectors
        out[fired] = m.decode_batch(_pad(flat[fired], width))[:, 0]
    return out


def _pad(flat: np.ndarray, width: int) -> np.ndarray:
    if flat.shape[1] >= width:
        return flat[:, :width] if flat.shape[1] > width else flat
    pad = np.zeros((len(flat), width - flat.shape[1]), dtype=flat.dtype)
    return np.hstack([flat, pad])


def assignment_posteriors(batch: ShotBatch, params: SoftReadoutParams, n_data: int) -> np.ndarray:
    """Per-shot posterior probability that each hardened outcome is an assignment error.

    With likelihood ratio ``L = N_not_i(m) / N_i(m)`` for the hardened state
    ``i``, the posterior is ``L / (1 + L)``.
    """
    if batch.soft is None:
        raise ValueError("batch has no soft outcomes")
    n_meas = batch.n_measurements
    sigmas = np.full(n_meas, params.sigma_ancilla)
    sigmas[n_meas - n_data :] = params.sigma_data
    p1 = posterior_one(batch.soft.astype(np.float64), sigmas, params.mu0, params.mu1)
    return np.where(batch.bits().astype(bool), 1.0 - p1, p1)


def soft_edge_probs(graph: MatchingGraph, q_shot: np.ndarray) -> np.ndarray:
    """Edge probabilities with assignment components replaced by per-shot posteriors."""
    probs = np.empty(len(graph.edges))
    for i, e in enumerate(graph.edges):
        if not e.records:
            probs[i] = e.p
            continue
        pa = 0.0
        for r in e.records:
            pa = xor_prob(pa, float(q_shot[r]))
        probs[i] = xor_prob(e.p_circuit, pa)
    return np.clip(probs, 1e-15, 0.5 - 1e-12)


def soft_decode(graph: MatchingGraph, fired, q_shot: np.ndarray) -> bool:
    """Exact soft MWPM for one shot: reweight assignment-carrying edges, then decode."""
    probs = soft_edge_probs(graph, q_shot)
    g = _reweighted(graph, probs)
    return decode(g, fired)[0]


def _reweighted(graph: MatchingGraph, probs) -> MatchingGraph:
    edges = []
    for e, p in zip(graph.edges, probs):
        if e.records:
            e = replace(e, p_circuit=float(p), p_assign=0.0)
        edges.append(e)
    return MatchingGraph(graph.n_detectors, graph.n_ancillas, edges)


def soft_decode_batch(graph: MatchingGraph, defects: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Soft MWPM over a batch; ``q`` holds per-shot assignment posteriors per record."""
    flat = _syndromes(defects, graph.n_detectors)
    m = to_pymatching(graph)
    width = m.num_detectors
    soft_edges = [i for i, e in enumerate(graph.edges) if e.records]
    out = np.zeros(len(flat), dtype=np.uint8)
    for s in range(len(flat)):
        if not flat[s].any():
            continue
        probs = soft_edge_probs(graph, q[s])
        for i in soft_edges:
            e = graph.edges[i]
            p = float(probs[i])
            faults = {0} if e.flip else set()
            if e.v == BOUNDARY:
                m.add_boundary_edge(e.u, fault_ids=faults, weight=edge_weight(p), error_probability=p, merge_strategy="replace")
            else:
                m.add_edge(e.u, e.v, fault_ids=faults, weight=edge_weight(p), error_probability=p, merge_strategy="replace")
        out[s] = m.decode(_pad(flat[s : s + 1], width)[0])[0]
    return out


def corrections_container(corrections: np.ndarray, meta: dict) -> Container:
    meta = {k: str(v) for k, v in meta.items()}
    meta["shots"] = str(len(corrections))
    packed = np.packbits(np.asarray(corrections, dtype=np.uint8), bitorder="little")
    return Container(b"QCOR", meta, {"corrections": packed.tobytes()})


def read_corrections(path) -> tuple[np.ndarray, dict]:
    c = Container.read(path, b"QCOR")
    meta = dict(c.meta)
    n = int(meta.pop("shots"))
    bits = np.unpackbits(np.frombuffer(c.blocks["corrections"], dtype=np.uint8), count=n, bitorder="little")
    return bits, meta
