"""Simulated bi-level networks: a group graph, perturbed individual graphs,
their precision matrices and Gaussian samples.

All randomness flows from ``numpy.random.SeedSequence(seed)`` with fixed
spawn keys, so every output is a pure function of the scenario. Subject k
draws from its own stream, which means changing K never reshuffles the
earlier subjects.
"""
import math
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Tuple

import networkx as nx
import numpy as np
import scipy.linalg

from .errors import DegenerateGraph, InvalidConfig
from .linalg import SubjectData, cholesky_pd, is_pd

GRAPH_MODELS = ("scale_free", "erdos_renyi", "explicit")

# spawn keys of the independent random streams
_GRAPH, _GROUP_VALUES, _SUBJECT = 0, 1, 2
MAX_REDRAWS = 100


@dataclass(frozen=True)
class EdgeSet:
    """Undirected simple graph on nodes ``0..p-1``; pairs stored as (j, j')
    with ``j < j'``."""

    p: int
    edges: FrozenSet[Tuple[int, int]] = frozenset()

    def __post_init__(self):
        norm = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop ({a}, {b}) is not allowed")
            if not (0 <= a < self.p and 0 <= b < self.p):
                raise ValueError(f"edge ({a}, {b}) out of range for p={self.p}")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))

    def __len__(self):
        return len(self.edges)

    def __contains__(self, pair):
        a, b = pair
        return (min(a, b), max(a, b)) in self.edges

    def __iter__(self):
        return iter(sorted(self.edges))

    def sorted_edges(self):
        return sorted(self.edges)

    def adjacency(self):
        A = np.zeros((self.p, self.p))
        for a, b in self.edges:
            A[a, b] = A[b, a] = 1.0
        return A

    @classmethod
    def from_adjacency(cls, A, eps=0.0):
        A = np.asarray(A)
        iu = np.triu_indices(A.shape[0], 1)
        mask = np.abs(A[iu]) > eps
        return cls(A.shape[0], frozenset(zip(iu[0][mask].tolist(), iu[1][mask].tolist())))


def edges_from_precision(omega, eps=1e-8):
    """Edge set of the off-diagonal entries with magnitude above ``eps``."""
    return EdgeSet.from_adjacency(omega, eps)


@dataclass(frozen=True)
class SimScenario:
    p: int = 100
    K: int = 8
    n: int = 50
    rho_diff: float = 0.0
    graph_model: str = "scale_free"
    value_range: Tuple[float, float] = (0.5, 1.0)
    seed: int = 0
    edge_prob: Optional[float] = None
    explicit_edges: Optional[EdgeSet] = None

    def __post_init__(self):
        if self.p < 2 or self.K < 1 or self.n < 2:
            raise InvalidConfig("need p >= 2, K >= 1, n >= 2")
        if not 0 <= self.rho_diff < 1:
            raise InvalidConfig("rho_diff must lie in [0, 1)")
        lo, hi = self.value_range
        if not 0 < lo < hi:
            raise InvalidConfig("value_range must satisfy 0 < lo < hi")
        object.__setattr__(self, "value_range", (float(lo), float(hi)))
        if self.graph_model not in GRAPH_MODELS:
            raise InvalidConfig(f"graph_model must be one of {GRAPH_MODELS}")
        if self.graph_model == "explicit":
            if self.explicit_edges is None or self.explicit_edges.p != self.p:
                raise InvalidConfig("explicit graph_model needs explicit_edges with matching p")

    def to_dict(self):
        d = {
            "p": self.p, "K": self.K, "n": self.n, "rho_diff": self.rho_diff,
            "graph_model": self.graph_model, "value_range": list(self.value_range),
            "seed": self.seed, "edge_prob": self.edge_prob,
        }
        if self.explicit_edges is not None:
            d["explicit_edges"] = [list(e) for e in self.explicit_edges.sorted_edges()]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("explicit_edges") is not None:
            d["explicit_edges"] = EdgeSet(int(d["p"]), frozenset(map(tuple, d["explicit_edges"])))
        if "value_range" in d:
            d["value_range"] = tuple(d["value_range"])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SimTruth:
    group_edges: EdgeSet
    group_precision: np.ndarray
    individual_edges: List[EdgeSet]
    individual_precisions: List[np.ndarray]
    datasets: List[SubjectData] = field(repr=False)


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _int_seed(seed, *key):
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def generate_group_graph(scenario):
    """Group-level graph of the scenario.

    ``scale_free`` grows a Barabasi-Albert tree (one new edge per node,
    hence ``p - 1`` edges); ``erdos_renyi`` keeps each pair with probability
    ``edge_prob`` (default ``2 / p``).
    """
    p = scenario.p
    if scenario.graph_model == "explicit":
        return scenario.explicit_edges
    s = _int_seed(scenario.seed, _GRAPH)
    if scenario.graph_model == "scale_free":
        g = nx.barabasi_albert_graph(p, 1, seed=s)
    else:
        prob = scenario.edge_prob if scenario.edge_prob is not None else 2.0 / p
        g = nx.gnp_random_graph(p, prob, seed=s)
    return EdgeSet(p, frozenset(g.edges()))


def _draw_values(pairs, value_range, rng):
    lo, hi = value_range
    mags = rng.uniform(lo, hi, size=len(pairs))
    signs = np.where(rng.random(len(pairs)) < 0.5, -1.0, 1.0)
    return dict(zip(pairs, (signs * mags).tolist()))


def _assemble(p, values):
    """Unit-diagonal precision from raw edge values.

    Each raw value is divided by the number of non-zeros of its row (the
    diagonal included), and the two row-scaled copies are averaged.
    """
    omega = np.eye(p)
    count = np.ones(p)
    for a, b in values:
        count[a] += 1
        count[b] += 1
    for (a, b), v in values.items():
        omega[a, b] = omega[b, a] = 0.5 * (v / count[a] + v / count[b])
    return omega


def _pd_precision(p, keep, fresh, value_range, rng):
    """Assemble from ``keep`` plus new draws on ``fresh``; redraw every value
    from ``rng`` while the result is not positive definite."""
    values = dict(keep)
    values.update(_draw_values(fresh, value_range, rng))
    values = dict(sorted(values.items()))
    for _ in range(MAX_REDRAWS):
        omega = _assemble(p, values)
        if is_pd(omega):
            return omega, values
        values = _draw_values(sorted(values), value_range, rng)
    raise DegenerateGraph(f"no positive definite draw in {MAX_REDRAWS} attempts")


def generate_precision(edges, value_range=(0.5, 1.0), seed=0):
    """Precision matrix whose off-diagonal support is exactly ``edges``."""
    rng = _stream(seed, _GROUP_VALUES)
    return _pd_precision(edges.p, {}, edges.sorted_edges(), value_range, rng)[0]


def _n_toggles(rho_diff, M):
    return int(math.floor(rho_diff * M + 0.5))


def toggle_random_pairs(edges, count, rng):
    """Flip ``count`` distinct pairs drawn uniformly from all p(p-1)/2 pairs."""
    p = edges.p
    n_pairs = p * (p - 1) // 2
    if count > n_pairs:
        raise ValueError("more toggles than node pairs")
    if count == 0:
        return edges, []
    iu = np.triu_indices(p, 1)
    picks = np.sort(rng.choice(n_pairs, size=count, replace=False))
    pairs = [(int(iu[0][i]), int(iu[1][i])) for i in picks]
    out = set(edges.edges)
    for e in pairs:
        if e in out:
            out.remove(e)
        else:
            out.add(e)
    return EdgeSet(p, frozenset(out)), pairs


def perturb_edges(group, rho_diff, seed):
    """Toggle ``round(rho_diff * M)`` random pairs of ``group`` (M edges);
    halves round up."""
    count = _n_toggles(rho_diff, len(group))
    rng = np.random.default_rng(seed)
    return toggle_random_pairs(group, count, rng)[0]


def generate_scenario(scenario):
    """Ground truth and sampled data for every subject of ``scenario``."""
    p, lo_hi = scenario.p, scenario.value_range
    group_edges = generate_group_graph(scenario)
    group_precision, group_values = _pd_precision(
        p, {}, group_edges.sorted_edges(), lo_hi, _stream(scenario.seed, _GROUP_VALUES))
    count = _n_toggles(scenario.rho_diff, len(group_edges))

    ind_edges, ind_prec, datasets = [], [], []
    for k in range(scenario.K):
        rng = _stream(scenario.seed, _SUBJECT, k)
        edges_k, _ = toggle_random_pairs(group_edges, count, rng)
        if count == 0:
            omega_k = group_precision.copy()
        else:
            kept = {e: v for e, v in group_values.items() if e in edges_k.edges}
            added = sorted(edges_k.edges - group_edges.edges)
            omega_k = _pd_precision(p, kept, added, lo_hi, rng)[0]
        L = cholesky_pd(omega_k)
        Z = rng.standard_normal((scenario.n, p))
        # rows of Z L^{-T} have covariance inv(omega_k)
        Y = scipy.linalg.solve_triangular(L, Z.T, lower=True, trans="T").T
        ind_edges.append(edges_k)
        ind_prec.append(omega_k)
        datasets.append(SubjectData(Y))
    return SimTruth(group_edges, group_precision, ind_edges, ind_prec, datasets)
