"""Sparse "covariance-slot" subproblem for the group-level update.

Minimises::

    g(X) = log det X + tr(A inv(X)) + gamma * sum_{j != j'} |x_jj'|

over positive definite ``X``. The smooth part is a difference of convex
functions, so only a local minimiser is sought. Entries are visited in a
fixed cyclic order (diagonal of row j, then pairs (j, j') with j < j');
the exact one-dimensional restriction of ``g`` is available in closed
form, which makes the positive-definiteness safeguard exact.
"""
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConvergenceWarning
from .glasso import SolveReport, _subgradient_residual
from .linalg import as_symmetric, cholesky_pd, inv_pd, l1_offdiag, log_det_pd

MAX_HALVINGS = 30


@dataclass(frozen=True)
class SparseCovOptions:
    """``tol`` bounds the largest entry change over one sweep, relative to
    the mean diagonal of the current iterate. ``init`` is required by
    :func:`sparsecov_fit`; it may be left out here and supplied later."""

    max_iter: int = 200
    tol: float = 1e-4
    init: np.ndarray = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")


def sparsecov_objective(A, gamma, omega0):
    sig = inv_pd(omega0)
    return log_det_pd(omega0) + float(np.sum(A * sig)) + gamma * l1_offdiag(omega0)


def sparsecov_kkt(A, gamma, omega0):
    """Largest subgradient residual of ``g`` at ``omega0``.

    The smooth gradient is ``inv(X) - inv(X) A inv(X)``; the L1 part is
    handled with the same sign/interval rule as :func:`glasso_kkt`.
    """
    A = np.asarray(A, dtype=float)
    omega0 = np.asarray(omega0, dtype=float)
    sig = inv_pd(omega0)
    grad = sig - sig @ A @ sig
    return _subgradient_residual((grad + grad.T) / 2.0, gamma, omega0)


def sparsecov_fit(A, gamma, opts):
    """Local minimiser of ``g`` started from ``opts.init``.

    With ``gamma == 0`` the global minimiser is ``A`` itself and is returned
    directly.

    Returns
    -------
    omega0 : ndarray, shape (p, p)
    report : SolveReport
    """
    omega0, report = solve_sparsecov(A, gamma, opts)
    if not report.converged:
        warnings.warn(f"sparsecov did not converge in {report.iterations} sweeps "
                      f"(delta={report.final_delta:.3g})", ConvergenceWarning,
                      stacklevel=2)
    return omega0, report


def solve_sparsecov(A, gamma, opts):
    """:func:`sparsecov_fit` without the non-convergence warning."""
    A = as_symmetric(A, "A")
    cholesky_pd(A)
    gamma = float(gamma)
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if gamma == 0.0:
        obj = sparsecov_objective(A, 0.0, A)
        return A.copy(), SolveReport(0, True, 0.0, obj, [obj])
    if opts.init is None:
        raise ValueError("sparsecov_fit requires opts.init")
    omega = as_symmetric(opts.init, "init")
    if omega.shape != A.shape:
        raise ValueError("init has the wrong shape")
    cholesky_pd(omega)

    trace = []
    delta = np.inf
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        sig = inv_pd(omega)
        B = sig @ A @ sig
        B = (B + B.T) / 2.0
        change = _kernels.sparsecov_sweep(A, gamma, omega, sig, B, MAX_HALVINGS)
        cholesky_pd(omega)
        trace.append(sparsecov_objective(A, gamma, omega))
        delta = change / float(np.mean(np.diag(omega)))
        if delta <= opts.tol:
            converged = True
            break
    return omega, SolveReport(it, converged, delta, trace[-1], trace)
