"""Dense symmetric-matrix primitives shared by the solvers.

Matrices are plain ``numpy.ndarray`` objects of shape ``(p, p)``.
:func:`as_symmetric` is the single gate through which user input passes;
it enforces exact symmetry so downstream code can rely on ``A == A.T``.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import (DimensionMismatch, DimensionTooSmall, NonFiniteInput,
                     NotPositiveDefinite, NotSymmetric)

SYMMETRY_RTOL = 1e-8
PSD_RTOL = 1e-8


def as_symmetric(A, name="matrix"):
    """Return a float copy of ``A`` symmetrized as ``(A + A.T) / 2``.

    Raises
    ------
    NotSymmetric
        If the asymmetry exceeds ``1e-8 * max|A|``.
    DimensionTooSmall
        If ``A`` is not square with at least 2 rows.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {A.shape}")
    if A.shape[0] < 2:
        raise DimensionTooSmall(f"{name} must be at least 2x2")
    if not np.all(np.isfinite(A)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    scale = np.max(np.abs(A)) if A.size else 0.0
    asym = np.max(np.abs(A - A.T))
    if asym > SYMMETRY_RTOL * scale:
        raise NotSymmetric(f"{name} is not symmetric (max asymmetry {asym:.3g})")
    return (A + A.T) / 2.0


def check_same_dim(*mats):
    p = mats[0].shape[0]
    for M in mats[1:]:
        if M.shape != (p, p):
            raise DimensionMismatch(f"expected {(p, p)}, got {M.shape}")
    return p


def cholesky_pd(A):
    """Lower Cholesky factor of ``A``; raise NotPositiveDefinite on failure."""
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc
    if not np.all(np.isfinite(L)) or np.min(np.diag(L)) <= 0:
        raise NotPositiveDefinite("matrix is not positive definite")
    return L


def is_pd(A):
    try:
        cholesky_pd(A)
    except NotPositiveDefinite:
        return False
    return True


def inv_pd(A):
    """Inverse of a symmetric PD matrix, returned exactly symmetric."""
    L = cholesky_pd(A)
    Linv = scipy.linalg.solve_triangular(L, np.eye(A.shape[0]), lower=True)
    inv = Linv.T @ Linv
    return (inv + inv.T) / 2.0


def sample_covariance(observations):
    """Column-centred sample covariance ``Y'Y / n`` (MLE normalisation).

    Parameters
    ----------
    observations : array-like, shape (n, p)
        Rows are i.i.d. samples.

    Returns
    -------
    S : ndarray, shape (p, p)
        Symmetric positive semi-definite covariance.
    """
    Y = np.asarray(observations, dtype=float)
    if Y.ndim != 2:
        raise DimensionMismatch("observations must be a 2-D array")
    n, p = Y.shape
    if n < 2 or p < 2:
        raise DimensionTooSmall(f"need n >= 2 and p >= 2, got n={n}, p={p}")
    if not np.all(np.isfinite(Y)):
        raise NonFiniteInput("observations contain NaN or Inf")
    Yc = Y - Y.mean(axis=0)
    S = Yc.T @ Yc / n
    S = (S + S.T) / 2.0
    eps = PSD_RTOL * max(np.max(np.diag(S)), 0.0)
    evals, evecs = np.linalg.eigh(S)
    if evals[0] < -eps:
        raise NotPositiveDefinite("sample covariance has a negative eigenvalue")
    if evals[0] < 0:
        evals = np.clip(evals, 0.0, None)
        S = (evecs * evals) @ evecs.T
        S = (S + S.T) / 2.0
    return S


@dataclass(frozen=True)
class SubjectData:
    """One sub-dataset: an ``n x p`` observation matrix and its covariance.

    ``sample_cov`` is computed on construction. Use :meth:`from_covariance`
    when only the covariance and sample size are known.
    """

    observations: Optional[np.ndarray]
    sample_cov: np.ndarray = field(default=None, repr=False)
    n: int = 0

    def __post_init__(self):
        if self.observations is not None:
            obs = np.asarray(self.observations, dtype=float)
            object.__setattr__(self, "observations", obs)
            object.__setattr__(self, "sample_cov", sample_covariance(obs))
            object.__setattr__(self, "n", obs.shape[0])
        elif self.sample_cov is None:
            raise ValueError("either observations or sample_cov is required")
        else:
            object.__setattr__(self, "sample_cov",
                               as_symmetric(self.sample_cov, "sample_cov"))
            if self.n < 2:
                raise DimensionTooSmall("n must be >= 2")

    @classmethod
    def from_covariance(cls, S, n):
        return cls(observations=None, sample_cov=S, n=int(n))

    @property
    def p(self):
        return self.sample_cov.shape[0]


def log_det_pd(A):
    """Log-determinant of a symmetric PD matrix via its Cholesky factor."""
    L = cholesky_pd(np.asarray(A, dtype=float))
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def kl_penalty(omega_k, omega_0):
    """``-log det(Wk W0^-1) + tr(Wk W0^-1) - p`` for precisions Wk, W0.

    Twice the Kullback-Leibler divergence between the zero-mean Gaussians
    with precisions ``omega_0`` and ``omega_k``; zero iff they coincide.
    """
    omega_k = np.asarray(omega_k, dtype=float)
    omega_0 = np.asarray(omega_0, dtype=float)
    p = check_same_dim(omega_k, omega_0)
    L0 = cholesky_pd(omega_0)
    ld_k = log_det_pd(omega_k)
    ld_0 = 2.0 * float(np.sum(np.log(np.diag(L0))))
    tr = float(np.trace(scipy.linalg.cho_solve((L0, True), omega_k)))
    return max(-ld_k + ld_0 + tr - p, 0.0)


def l1_offdiag(A):
    """Sum of ``|A[j, j']|`` over ordered pairs ``j != j'``."""
    A = np.asarray(A, dtype=float)
    iu = np.triu_indices(A.shape[0], 1)
    return 2.0 * float(np.abs(A[iu]).sum())


def soft_threshold(x, t):
    """``sign(x) * max(|x| - t, 0)``; works elementwise on arrays."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be non-negative")
    out = np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out
