"""Random covariance model for bi-level Gaussian graphical models.

The model estimates K individual precision matrices ``Omega_k`` and one
group-level precision ``Omega_0`` by minimising::

    sum_k [-log det Omega_k + tr(S_k Omega_k)]
        + lam1 * sum_k |Omega_k|_1
        + lam2 * sum_k KL(Omega_k, Omega_0)
        + lam3 * |Omega_0|_1

where ``|.|_1`` sums off-diagonal magnitudes and ``KL`` is
:func:`~bilevel_ggm.linalg.kl_penalty`. :func:`rcm_fit` alternates between
the individual block (K independent graphical lasso problems) and the
group block (one sparse covariance-slot problem).
"""
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .errors import (ConvergenceWarning, DimensionMismatch, InvalidLambda,
                     UnequalSampleSizes)
from .glasso import (GlassoOptions, _subgradient_residual, glasso_objective,
                     solve_glasso)
from .linalg import (SubjectData, inv_pd, kl_penalty, l1_offdiag, log_det_pd)
from .sparsecov import SparseCovOptions, solve_sparsecov

ZERO_EPS = 1e-8


@dataclass(frozen=True)
class LambdaTriple:
    """Tuning parameters: individual sparsity, shrinkage to the group, and
    group sparsity."""

    lambda1: float
    lambda2: float
    lambda3: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            v = float(getattr(self, name))
            if not (v >= 0 and math.isfinite(v)):
                raise InvalidLambda(f"{name} must be a finite non-negative number")
            object.__setattr__(self, name, v)
        if self.lambda3 > 0 and self.lambda2 == 0:
            raise InvalidLambda("lambda3 > 0 requires lambda2 > 0")

    def as_tuple(self):
        return (self.lambda1, self.lambda2, self.lambda3)


@dataclass(frozen=True)
class RcmOptions:
    """Controls for :func:`rcm_fit`.

    ``bcd_tol`` bounds the largest relative Frobenius change of any of the
    K + 1 matrices over one iteration. ``init_blend`` is the weight on the
    identity in the starting point ``(1 - rho) S_k + rho I``; with
    ``init_mode="inverse_blend"`` the inverse of that blend is used instead.
    """

    max_bcd_iter: int = 100
    bcd_tol: float = 1e-4
    init_blend: float = 0.1
    init_mode: str = "blend"
    inner_glasso: GlassoOptions = field(
        default_factory=lambda: GlassoOptions(max_iter=500, tol=1e-6))
    inner_sparsecov: SparseCovOptions = field(
        default_factory=lambda: SparseCovOptions(max_iter=1000, tol=1e-6))
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.init_blend < 1:
            raise ValueError("init_blend must lie in (0, 1)")
        if self.init_mode not in ("blend", "inverse_blend"):
            raise ValueError("init_mode must be 'blend' or 'inverse_blend'")
        if self.max_bcd_iter < 1 or not self.bcd_tol > 0:
            raise ValueError("max_bcd_iter >= 1 and bcd_tol > 0 required")
        if self.threads < 0:
            raise ValueError("threads must be >= 0")


@dataclass
class RcmFit:
    omega0: np.ndarray
    omegas: List[np.ndarray]
    lambda_: LambdaTriple
    objective_trace: List[float]
    iterations: int
    converged: bool
    group_estimated: bool = True

    @property
    def K(self):
        return len(self.omegas)

    @property
    def p(self):
        return self.omega0.shape[0]


def _covs(subjects):
    covs = [s.sample_cov if isinstance(s, SubjectData) else np.asarray(s, float)
            for s in subjects]
    if not covs:
        raise DimensionMismatch("at least one subject is required")
    p = covs[0].shape[0]
    for S in covs:
        if S.shape != (p, p):
            raise DimensionMismatch("all subjects must share the same p")
    return covs


def ordered_mean(mats):
    """Elementwise mean whose value does not depend on the input order.

    Values are sorted per entry before summation, so permuting the inputs
    gives a bit-identical result.
    """
    stack = np.sort(np.stack(mats), axis=0)
    return stack.sum(axis=0) / len(mats)


def rcm_objective(omega0, omegas, sample_covs, lam):
    """Penalised negative log-likelihood of the random covariance model."""
    omegas = list(omegas)
    if len(omegas) != len(sample_covs) or not omegas:
        raise DimensionMismatch("omegas and sample_covs must have equal, non-zero length")
    p = omega0.shape[0]
    terms = []
    for Om, S in zip(omegas, sample_covs):
        if Om.shape != (p, p) or S.shape != (p, p):
            raise DimensionMismatch("all matrices must be p x p")
        t = -log_det_pd(Om) + float(np.sum(S * Om))
        if lam.lambda1:
            t += lam.lambda1 * l1_offdiag(Om)
        if lam.lambda2:
            t += lam.lambda2 * kl_penalty(Om, omega0)
        terms.append(t)
    if lam.lambda3:
        terms.append(lam.lambda3 * l1_offdiag(omega0))
    return math.fsum(terms)


def _initial_point(covs, opts):
    p = covs[0].shape[0]
    rho = opts.init_blend
    omegas = [(1.0 - rho) * S + rho * np.eye(p) for S in covs]
    if opts.init_mode == "inverse_blend":
        omegas = [inv_pd(M) for M in omegas]
    return ordered_mean(omegas), omegas


def _map(fn, items, threads):
    if threads == 1 or len(items) == 1:
        return [fn(x) for x in items]
    workers = None if threads == 0 else threads
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _rel_change(new, old):
    denom = max(float(np.linalg.norm(old)), 1e-300)
    return float(np.linalg.norm(new - old)) / denom


def rcm_fit(subjects, lam, opts=None, init=None):
    """Jointly estimate individual and group precision matrices.

    Parameters
    ----------
    subjects : sequence of SubjectData
        The K sub-datasets; all must share the same dimension p.
    lam : LambdaTriple
    opts : RcmOptions, optional
    init : tuple (omega0, omegas), optional
        Warm start replacing the default initialisation.

    Returns
    -------
    RcmFit
        ``objective_trace`` holds the objective after every full iteration.
        When ``lambda2 == 0`` the individual problems decouple and the group
        matrix is reported as their plain average (``group_estimated`` is
        False).
    """
    opts = opts or RcmOptions()
    if not isinstance(lam, LambdaTriple):
        lam = LambdaTriple(*lam)
    covs = _covs(subjects)
    K = len(covs)
    l1, l2, l3 = lam.as_tuple()

    if init is None:
        omega0, omegas = _initial_point(covs, opts)
    else:
        omega0 = np.array(init[0], dtype=float)
        omegas = [np.array(M, dtype=float) for M in init[1]]
        if len(omegas) != K:
            raise DimensionMismatch("warm start has the wrong number of subjects")

    lam_ind = l1 / (1.0 + l2)
    trace = []
    converged = False
    it = 0
    for it in range(1, opts.max_bcd_iter + 1):
        sigma0 = inv_pd(omega0) if l2 > 0 else None

        def update(k):
            if l2 > 0:
                S_t = (covs[k] + l2 * sigma0) / (1.0 + l2)
            else:
                S_t = covs[k]
            gopts = replace(opts.inner_glasso, warm_start=omegas[k])
            new, _ = solve_glasso(S_t, lam_ind, gopts)
            if glasso_objective(S_t, lam_ind, new) > glasso_objective(S_t, lam_ind, omegas[k]):
                return omegas[k]
            return new

        new_omegas = _map(update, range(K), opts.threads)
        A = ordered_mean(new_omegas)
        if l2 > 0:
            sopts = replace(opts.inner_sparsecov, init=omega0)
            new_omega0, _ = solve_sparsecov(A, l3 / (K * l2), sopts)
        else:
            new_omega0 = A

        change = max([_rel_change(new_omega0, omega0)]
                     + [_rel_change(n, o) for n, o in zip(new_omegas, omegas)])
        omega0, omegas = new_omega0, new_omegas
        trace.append(rcm_objective(omega0, omegas, covs, lam))
        if change <= opts.bcd_tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"BCD did not converge in {opts.max_bcd_iter} iterations",
                      ConvergenceWarning, stacklevel=2)
    return RcmFit(omega0=omega0, omegas=omegas, lambda_=lam,
                  objective_trace=trace, iterations=it, converged=converged,
                  group_estimated=l2 > 0)


def rcm_kkt(fit, sample_covs):
    """Off-diagonal stationarity residuals of a fit, per level.

    Individual level uses ``S_k + lam2*Sigma_0 - (1+lam2)*Sigma_k`` with
    weight ``lam1``; group level uses
    ``K*Sigma_0 - sum_k Sigma_0 Omega_k Sigma_0`` with weight
    ``lam3/lam2``. Each residual is the largest violation of the
    subgradient condition over off-diagonal entries. The group residual is
    0 for fits with ``lambda2 == 0``.
    """
    covs = _covs(sample_covs)
    l1, l2, l3 = fit.lambda_.as_tuple()
    p = fit.p
    off = ~np.eye(p, dtype=bool)
    sigma0 = inv_pd(fit.omega0)

    def offdiag_residual(grad, weight, omega):
        grad = (grad + grad.T) / 2.0
        res = np.where(omega > 0, np.abs(grad + weight),
                       np.where(omega < 0, np.abs(grad - weight),
                                np.maximum(np.abs(grad) - weight, 0.0)))
        return float(np.max(res[off]))

    ind = 0.0
    for S, Om in zip(covs, fit.omegas):
        grad = S - (1.0 + l2) * inv_pd(Om)
        if l2 > 0:
            grad = grad + l2 * sigma0
        ind = max(ind, offdiag_residual(grad, l1, Om))
    if not fit.group_estimated or l2 == 0:
        return ind, 0.0
    K = fit.K
    grad0 = K * sigma0 - sum(sigma0 @ Om @ sigma0 for Om in fit.omegas)
    grp = offdiag_residual(grad0, l3 / l2, fit.omega0)
    return ind, grp


def count_offdiag(A, eps=ZERO_EPS):
    """Number of unordered pairs j < j' with ``|A[j, j']| > eps``."""
    iu = np.triu_indices(A.shape[0], 1)
    return int(np.count_nonzero(np.abs(A[iu]) > eps))


def degrees_of_freedom(fit):
    """``sum_k df_k / (1 + lam2) + lam2 * df_0 / (1 + lam2)``."""
    l2 = fit.lambda_.lambda2
    dfs = [count_offdiag(Om) for Om in fit.omegas]
    df0 = count_offdiag(fit.omega0)
    return sum(dfs) / (1.0 + l2) + l2 * df0 / (1.0 + l2)


WEIGHTINGS = ("n", "unit")


def _fit_terms(fit, covs, weights):
    if len(covs) != fit.K:
        raise DimensionMismatch("number of subjects does not match the fit")
    return [w * (float(np.sum(S * Om)) - log_det_pd(Om))
            for w, S, Om in zip(weights, covs, fit.omegas)]


def _weights(subjects, weighting):
    if weighting not in WEIGHTINGS:
        raise ValueError(f"weighting must be one of {WEIGHTINGS}")
    if weighting == "unit":
        return [1.0] * len(subjects)
    return [float(s.n) for s in subjects]


def bic1(fit, subjects, weighting="n"):
    """Per-subject BIC.

    ``sum_k [w_k (tr(S_k W_k) - log det W_k) + df_k log n_k]`` where
    ``w_k = n_k`` (the Gaussian log-likelihood scale, default) or ``w_k = 1``
    when ``weighting="unit"``.
    """
    covs = _covs(subjects)
    terms = _fit_terms(fit, covs, _weights(subjects, weighting))
    pen = [count_offdiag(Om) * math.log(s.n) for Om, s in zip(fit.omegas, subjects)]
    return math.fsum(terms + pen)


def common_n(subjects):
    ns = {s.n for s in subjects}
    if len(ns) != 1:
        raise UnequalSampleSizes(f"subjects have different sample sizes {sorted(ns)}")
    return ns.pop()


def bic2(fit, subjects, weighting="n"):
    """Hierarchical BIC using :func:`degrees_of_freedom` and ``log(K n)``.

    The likelihood part is weighted as in :func:`bic1`; all subjects must
    share the same sample size.
    """
    n = common_n(subjects)
    covs = _covs(subjects)
    terms = _fit_terms(fit, covs, _weights(subjects, weighting))
    return math.fsum(terms) + degrees_of_freedom(fit) * math.log(fit.K * n)
