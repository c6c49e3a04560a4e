"""Independent reference computations shared by the unit and acceptance tests."""
import numpy as np

from bilevel_ggm.linalg import soft_threshold


def closed_form_p2(S, lam):
    """p = 2: the fitted covariance soft-thresholds s12 and keeps the diagonal."""
    sig = S.copy()
    sig[0, 1] = sig[1, 0] = soft_threshold(S[0, 1], lam)
    return np.linalg.inv(sig)


def prox_gradient_oracle(S, lam, tol=1e-9, max_iter=200000):
    """Proximal gradient with backtracking on the same convex objective."""
    p = S.shape[0]
    off = ~np.eye(p, dtype=bool)

    def f(om):
        sign, ld = np.linalg.slogdet(om)
        if sign <= 0 or np.linalg.eigvalsh(om).min() <= 0:
            return np.inf
        return -ld + np.sum(S * om)

    def prox(X, t):
        Y = X.copy()
        Y[off] = np.sign(X[off]) * np.maximum(np.abs(X[off]) - t * lam, 0.0)
        return Y

    om = np.diag(1.0 / np.diag(S))
    t = 1.0
    for _ in range(max_iter):
        g = S - np.linalg.inv(om)
        while True:
            new = prox(om - t * g, t)
            d = new - om
            if f(new) <= f(om) + np.sum(g * d) + np.sum(d * d) / (2 * t):
                break
            t *= 0.5
        if np.max(np.abs(d)) < tol:
            om = new
            break
        om = new
        t *= 2.0
    return om


def grid_minimum(A, gamma, step=0.01):
    """Brute-force minimum of the sparse-covariance objective over a box of
    2x2 matrices."""
    diag = np.arange(0.5, 1.5 + step / 2, step)
    off = np.arange(-0.5, 0.5 + step / 2, step)
    a, c, b = np.meshgrid(diag, off, diag, indexing="ij")
    det = a * b - c * c
    ok = det > 0
    # tr(A inv(X)) for X = [[a, c], [c, b]]
    tr = (A[0, 0] * b - 2 * A[0, 1] * c + A[1, 1] * a) / np.where(ok, det, 1.0)
    g = np.where(ok, np.log(np.where(ok, det, 1.0)) + tr + 2 * gamma * np.abs(c), np.inf)
    return float(g.min())
