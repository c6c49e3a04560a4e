"""Grid search over the three penalty parameters with BIC selection.

Grid points sharing ``(lambda2, lambda3)`` form a slice that is fitted along
decreasing ``lambda1``, each fit warm-started from the previous one. Slices
are independent and may run in parallel; the result never depends on the
scheduling.
"""
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Tuple

import numpy as np

from .errors import ConvergenceWarning, EmptyFeasibleGrid, InvalidLambda
from .rcm import (LambdaTriple, RcmFit, RcmOptions, bic1, bic2, common_n,
                  degrees_of_freedom, rcm_fit)

CRITERIA = ("bic1", "bic2")


def _ascending(values, name):
    vals = [float(v) for v in values]
    if not vals:
        raise InvalidLambda(f"{name} must be non-empty")
    if any(not (v >= 0 and math.isfinite(v)) for v in vals):
        raise InvalidLambda(f"{name} must hold finite non-negative values")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise InvalidLambda(f"{name} must be strictly ascending")
    return tuple(vals)


@dataclass(frozen=True)
class LambdaGrid:
    """Cartesian grid of penalty values.

    Combinations with ``lambda2 == 0`` and ``lambda3 > 0`` have no meaning
    and are listed by :meth:`infeasible` instead of being fitted.
    """

    lambda1_values: Tuple[float, ...]
    lambda2_values: Tuple[float, ...]
    lambda3_values: Tuple[float, ...]

    def __post_init__(self):
        for name in ("lambda1_values", "lambda2_values", "lambda3_values"):
            object.__setattr__(self, name, _ascending(getattr(self, name), name))

    def slices(self):
        """Feasible ``(lambda2, lambda3)`` pairs in ascending order."""
        return [(l2, l3) for l2 in self.lambda2_values for l3 in self.lambda3_values
                if not (l2 == 0 and l3 > 0)]

    def points(self):
        return [LambdaTriple(l1, l2, l3) for l2, l3 in self.slices()
                for l1 in self.lambda1_values]

    def infeasible(self):
        return [(l1, l2, l3) for l2 in self.lambda2_values for l3 in self.lambda3_values
                if l2 == 0 and l3 > 0 for l1 in self.lambda1_values]

    def to_dict(self):
        return {"lambda1": list(self.lambda1_values), "lambda2": list(self.lambda2_values),
                "lambda3": list(self.lambda3_values)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["lambda1"], d["lambda2"], d["lambda3"])


@dataclass(frozen=True)
class TuneEntry:
    lambda_: LambdaTriple
    bic: float
    df: float
    converged: bool


@dataclass
class TuneResult:
    """``table`` is sorted by BIC; ``best`` is the lowest-BIC converged fit."""

    best: RcmFit
    criterion: str
    table: List[TuneEntry]
    infeasible: List[Tuple[float, float, float]] = field(default_factory=list)

    @property
    def best_entry(self):
        return next(e for e in self.table if e.lambda_ == self.best.lambda_)


def _rank_key(entry):
    # lower BIC first; ties go to the sparser (larger lambda1, lambda3, lambda2) model
    lam = entry.lambda_
    return (entry.bic, -lam.lambda1, -lam.lambda3, -lam.lambda2)


def _fit_slice(subjects, l2, l3, lambda1_desc, opts, score):
    out = []
    init = None
    for l1 in lambda1_desc:
        lam = LambdaTriple(l1, l2, l3)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            fit = rcm_fit(subjects, lam, opts, init=init)
        init = (fit.omega0, fit.omegas)
        entry = TuneEntry(lam, score(fit), degrees_of_freedom(fit), fit.converged)
        out.append((entry, fit))
    return out


def tune(subjects, grid, criterion="bic2", opts=None, weighting="n"):
    """Fit every feasible grid point and select one by BIC.

    Parameters
    ----------
    subjects : sequence of SubjectData
    grid : LambdaGrid
    criterion : {"bic1", "bic2"}
    opts : RcmOptions, optional
        ``opts.threads`` sets how many slices run concurrently; each fit
        then runs its subject updates serially.
    weighting : {"n", "unit"}
        Likelihood weighting passed to :func:`~bilevel_ggm.rcm.bic1` or
        :func:`~bilevel_ggm.rcm.bic2`.

    Returns
    -------
    TuneResult
    """
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    opts = opts or RcmOptions()
    subjects = list(subjects)
    if criterion == "bic2":
        common_n(subjects)
    slices = grid.slices()
    if not slices:
        raise EmptyFeasibleGrid("no feasible (lambda1, lambda2, lambda3) combination")
    bic = bic2 if criterion == "bic2" else bic1

    def score(fit):
        return bic(fit, subjects, weighting=weighting)

    lambda1_desc = sorted(grid.lambda1_values, reverse=True)
    threads = opts.threads
    if threads == 1 or len(slices) == 1:
        results = [_fit_slice(subjects, l2, l3, lambda1_desc, opts, score)
                   for l2, l3 in slices]
    else:
        inner = replace(opts, threads=1)
        with ThreadPoolExecutor(max_workers=None if threads == 0 else threads) as pool:
            results = list(pool.map(
                lambda s: _fit_slice(subjects, s[0], s[1], lambda1_desc, inner, score),
                slices))

    pairs = [pair for res in results for pair in res]
    table = sorted((e for e, _ in pairs), key=_rank_key)
    ok = [e for e in table if e.converged]
    if not ok:
        warnings.warn("no grid point converged; selecting among all fits",
                      ConvergenceWarning, stacklevel=2)
        ok = table
    winner = ok[0]
    best = next(f for e, f in pairs if e is winner)
    return TuneResult(best=best, criterion=criterion, table=table,
                      infeasible=grid.infeasible())


def default_grid(p, n, K=8):
    """Grid anchored at the rate ``sqrt(log p / n)`` for ``lambda1``.

    ``lambda1`` takes 10 log-spaced values from a fifth to five times the
    rate, so the rate is the geometric center. ``lambda3`` is expressed through the group-level threshold
    ``gamma = lambda3 / (K lambda2)`` of the group update, so the
    ``lambda3`` values listed are ``K * lambda2_mid * {0.01, 0.05, 0.1, 0.2, 0.5}``
    with ``lambda2_mid = 1``.
    """
    if p < 2 or n < 2:
        raise ValueError("p and n must be >= 2")
    rate = math.sqrt(math.log(p) / n)
    lambda1 = np.geomspace(rate / 5.0, 5.0 * rate, 10)
    lambda2 = (0.1, 0.5, 1.0, 2.0, 5.0)
    lambda3 = tuple(K * g for g in (0.01, 0.05, 0.1, 0.2, 0.5))
    return LambdaGrid(tuple(lambda1.tolist()), lambda2, lambda3)
