"""Graphical lasso with an off-diagonal L1 penalty.

Solves::

    minimize  -log det(Omega) + tr(S Omega) + lam * sum_{j != j'} |omega_jj'|

over positive definite ``Omega``. The solver cycles over columns; every
column is a lasso problem handled by cyclic coordinate descent, and the
working covariance ``W = inv(Omega)`` keeps its diagonal pinned at
``diag(S)``. Because each column step minimises the objective exactly in
that block, warm starts are safe and the objective decreases every sweep.
"""
import warnings
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import _kernels
from .errors import ConvergenceWarning, SingularSample
from .linalg import as_symmetric, cholesky_pd, inv_pd, is_pd, l1_offdiag, log_det_pd


@dataclass(frozen=True)
class GlassoOptions:
    """Stopping rules and warm start for :func:`glasso_fit`.

    ``tol`` bounds the largest change of the working covariance over one
    sweep, relative to the mean diagonal of ``S``.
    """

    max_iter: int = 100
    tol: float = 1e-4
    warm_start: Optional[np.ndarray] = None
    inner_max_iter: int = 1000

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    final_delta: float
    objective: float
    objective_trace: List[float]


def glasso_objective(S, lam, omega):
    return -log_det_pd(omega) + float(np.sum(S * omega)) + lam * l1_offdiag(omega)


def _subgradient_residual(grad, lam, omega):
    """Max violation of ``0 in grad + lam * d|omega|`` (off-diagonal) and
    ``grad == 0`` on the diagonal."""
    p = grad.shape[0]
    off = ~np.eye(p, dtype=bool)
    res = np.where(omega > 0, np.abs(grad + lam),
                   np.where(omega < 0, np.abs(grad - lam),
                            np.maximum(np.abs(grad) - lam, 0.0)))
    out = float(np.max(res[off])) if p > 1 else 0.0
    return max(out, float(np.max(np.abs(np.diag(grad)))))


def glasso_kkt(S, lam, omega):
    """Largest subgradient residual of the graphical lasso at ``omega``.

    For off-diagonal entries the residual is ``|s - sigma + lam*sign(omega)|``
    on the support and ``max(0, |s - sigma| - lam)`` off it; on the
    diagonal it is ``|s_jj - sigma_jj|``, with ``Sigma = inv(omega)``.
    """
    S = np.asarray(S, dtype=float)
    omega = np.asarray(omega, dtype=float)
    sigma = inv_pd(omega)
    return _subgradient_residual(S - sigma, lam, omega)


def glasso_fit(S, lam, opts=None):
    """Fit a sparse precision matrix to covariance ``S``.

    Parameters
    ----------
    S : array-like, shape (p, p)
        Symmetric positive semi-definite covariance.
    lam : float
        Off-diagonal L1 weight, ``lam >= 0``. With ``lam == 0`` the inverse
        of ``S`` is returned and ``S`` must be positive definite.
    opts : GlassoOptions, optional

    Returns
    -------
    omega : ndarray, shape (p, p)
    report : SolveReport
    """
    omega, report = solve_glasso(S, lam, opts)
    if not report.converged:
        warnings.warn(f"glasso did not converge in {report.iterations} sweeps "
                      f"(delta={report.final_delta:.3g})", ConvergenceWarning,
                      stacklevel=2)
    return omega, report


def solve_glasso(S, lam, opts=None):
    """:func:`glasso_fit` without the non-convergence warning."""
    opts = opts or GlassoOptions()
    S = as_symmetric(S, "S")
    lam = float(lam)
    if lam < 0:
        raise ValueError("lam must be non-negative")
    diag = np.diag(S)
    if np.min(diag) <= 0:
        raise SingularSample("covariance has a non-positive diagonal entry")

    if lam == 0.0:
        if not is_pd(S):
            raise SingularSample("lam == 0 requires a positive definite S")
        omega = inv_pd(S)
        obj = glasso_objective(S, lam, omega)
        return omega, SolveReport(0, True, 0.0, obj, [obj])

    if opts.warm_start is not None:
        omega = as_symmetric(opts.warm_start, "warm_start")
        if omega.shape != S.shape:
            raise ValueError("warm_start has the wrong shape")
        cholesky_pd(omega)
    else:
        omega = np.diag(1.0 / diag)

    scale = float(np.mean(diag))
    inner_tol = 0.1 * opts.tol * scale
    trace = []
    delta = np.inf
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        W = inv_pd(omega)
        W_before = W.copy()
        _kernels.glasso_sweep(S, lam, omega, W, inner_tol, opts.inner_max_iter)
        omega = (omega + omega.T) / 2.0
        trace.append(glasso_objective(S, lam, omega))
        delta = float(np.max(np.abs(W - W_before))) / scale
        if delta <= opts.tol:
            converged = True
            break
    cholesky_pd(omega)
    return omega, SolveReport(it, converged, delta, trace[-1], trace)
