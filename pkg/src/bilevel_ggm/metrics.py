"""Edge-recovery and estimation-error summaries, plus the majority-vote
group network used as a baseline."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .simgen import EdgeSet


@dataclass(frozen=True)
class EdgeConfusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def tpr(self):
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def fpr(self):
        d = self.fp + self.tn
        return self.fp / d if d else 0.0


def _same_p(sets):
    p = sets[0].p
    if any(s.p != p for s in sets):
        raise DimensionMismatch("edge sets have different numbers of nodes")
    return p


def edge_confusion(estimated, truth):
    """Confusion counts over all p(p-1)/2 unordered pairs."""
    p = _same_p([estimated, truth])
    total = p * (p - 1) // 2
    tp = len(estimated.edges & truth.edges)
    fp = len(estimated.edges - truth.edges)
    fn = len(truth.edges - estimated.edges)
    return EdgeConfusion(tp=tp, fp=fp, tn=total - tp - fp - fn, fn=fn)


def estimation_error(estimate, truth, offdiag_only=False):
    """Frobenius norm and entrywise absolute sum of ``estimate - truth``.

    Both include the diagonal unless ``offdiag_only`` is set.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise DimensionMismatch("matrices differ in shape")
    delta = estimate - truth
    if offdiag_only:
        delta = delta - np.diag(np.diag(delta))
    return float(np.sqrt(np.sum(delta ** 2))), float(np.sum(np.abs(delta)))


def majority_vote_group(adjacencies):
    """Edges present in strictly more than half of the K networks."""
    p = _same_p(adjacencies)
    K = len(adjacencies)
    counts = {}
    for es in adjacencies:
        for e in es.edges:
            counts[e] = counts.get(e, 0) + 1
    return EdgeSet(p, frozenset(e for e, c in counts.items() if 2 * c > K))


def mean_adjacency(adjacencies):
    """Fraction of networks containing each edge; zero diagonal."""
    _same_p(adjacencies)
    total = sum(es.adjacency() for es in adjacencies)
    return total / len(adjacencies)
