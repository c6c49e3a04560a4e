"""Compiled inner loops for the two coordinate-descent solvers.

Every kernel mutates its array arguments in place and releases the GIL so
that independent fits can share a thread pool.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True, nogil=True)
def glasso_sweep(S, lam, omega, W, inner_tol, inner_max_iter):
    """One pass over all columns of the primal graphical lasso.

    For column j the off-diagonal block ``x = omega[-j, j]`` solves the lasso

        min_x  s_jj x' Q x + 2 s_12' x + 2 lam |x|_1,   Q = inv(omega_11),

    with ``Q`` read off the working covariance ``W = inv(omega)``; the
    diagonal entry is then set so that ``W[j, j] == S[j, j]``. Each column
    step is an exact block minimisation, so the objective never increases.
    Returns the number of inner coordinate passes used in total.
    """
    p = S.shape[0]
    m = p - 1
    Q = np.empty((m, m))
    x = np.empty(m)
    g = np.empty(m)
    s12 = np.empty(m)
    idx = np.empty(m, dtype=np.int64)
    total_inner = 0
    for j in range(p):
        c = 0
        for i in range(p):
            if i != j:
                idx[c] = i
                c += 1
        w22 = W[j, j]
        s22 = S[j, j]
        for a in range(m):
            ia = idx[a]
            wa = W[ia, j] / w22
            for b in range(m):
                ib = idx[b]
                Q[a, b] = W[ia, ib] - wa * W[ib, j]
            x[a] = omega[ia, j]
            s12[a] = S[ia, j]
        for a in range(m):
            acc = 0.0
            for b in range(m):
                acc += Q[a, b] * x[b]
            g[a] = acc

        for _ in range(inner_max_iter):
            total_inner += 1
            for a in range(m):
                qaa = Q[a, a]
                xa = x[a]
                rest = g[a] - qaa * xa
                xn = _soft(-(s12[a] + s22 * rest), lam) / (s22 * qaa)
                d = xn - xa
                if d != 0.0:
                    for b in range(m):
                        g[b] += Q[b, a] * d
                    x[a] = xn
            viol = 0.0
            for a in range(m):
                r = s12[a] + s22 * g[a]
                if x[a] > 0.0:
                    v = abs(r + lam)
                elif x[a] < 0.0:
                    v = abs(r - lam)
                else:
                    v = abs(r) - lam
                if v > viol:
                    viol = v
            if viol <= inner_tol:
                break

        xg = 0.0
        for a in range(m):
            xg += x[a] * g[a]
        for a in range(m):
            ia = idx[a]
            omega[ia, j] = x[a]
            omega[j, ia] = x[a]
        omega[j, j] = 1.0 / s22 + xg
        for a in range(m):
            ia = idx[a]
            ga = s22 * g[a]
            for b in range(m):
                W[ia, idx[b]] = Q[a, b] + ga * g[b]
            W[ia, j] = -ga
            W[j, ia] = -ga
        W[j, j] = s22
    return total_inner


@njit(cache=True, nogil=True)
def _pair_phi(t, a, b, c, bjj, bll, bjl):
    """Change of ``log det X + tr(A inv(X))`` when X[j,l] = X[l,j] += t.

    ``a, b, c`` are inv(X)[j,j], [l,l], [j,l]; ``bjj, bll, bjl`` the same
    entries of inv(X) A inv(X). Returns (change, det ratio); the step keeps
    X positive definite iff the determinant ratio is positive.
    """
    u = 2.0 * t * c + t * t * (c * c - a * b)
    q = 1.0 + u
    if q <= 0.0:
        return np.inf, q
    tr = t * (2.0 * (1.0 + t * c) * bjl - t * (b * bjj + a * bll)) / q
    return math.log1p(u) - tr, q


@njit(cache=True, nogil=True)
def sparsecov_sweep(A, gamma, omega, sig, B, max_halvings):
    """One cyclic pass of entrywise descent on

        g(X) = log det X + tr(A inv(X)) + gamma * sum_{j != l} |X[j, l]|.

    ``sig`` must hold inv(omega) and ``B`` must hold sig @ A @ sig on entry;
    both are kept in sync through rank-one/rank-two updates. Diagonal
    entries are minimised in closed form. Off-diagonal pairs take a proximal
    Newton step that is halved until it stays positive definite and lowers
    g, and skipped after ``max_halvings`` failures.
    Returns the largest absolute entry change.
    """
    p = A.shape[0]
    X = np.empty((p, 2))
    V = np.empty((p, 2))
    P = np.empty((p, 2))
    max_change = 0.0
    for j in range(p):
        for l in range(j, p):
            if l == j:
                a = sig[j, j]
                t = (B[j, j] - a) / (a * a)
                if t == 0.0:
                    continue
                k1 = t / (1.0 + t * a)
                bjj = B[j, j]
                for r in range(p):
                    P[r, 0] = sig[r, j]
                    X[r, 0] = k1 * P[r, 0]
                    V[r, 0] = 0.5 * X[r, 0] * bjj - B[r, j]
                for r in range(p):
                    for s in range(r, p):
                        ns = sig[r, s] - X[r, 0] * P[s, 0]
                        sig[r, s] = ns
                        sig[s, r] = ns
                        nb = B[r, s] + V[r, 0] * X[s, 0] + X[r, 0] * V[s, 0]
                        B[r, s] = nb
                        B[s, r] = nb
                omega[j, j] += t
                if abs(t) > max_change:
                    max_change = abs(t)
                continue

            a = sig[j, j]
            b = sig[l, l]
            c = sig[j, l]
            bjj = B[j, j]
            bll = B[l, l]
            bjl = B[j, l]
            w = omega[j, l]
            grad = 2.0 * (c - bjl)
            hess = (-2.0 * c * c - 2.0 * a * b + 4.0 * c * bjl
                    + 2.0 * b * bjj + 2.0 * a * bll)
            if not hess > 1e-12 * a * b:
                hess = 2.0 * (a * b + c * c)
            t = _soft(w - grad / hess, 2.0 * gamma / hess) - w
            if t == 0.0:
                continue
            accepted = False
            for _ in range(max_halvings + 1):
                phi, q = _pair_phi(t, a, b, c, bjj, bll, bjl)
                if q > 0.0:
                    h = phi + 2.0 * gamma * (abs(w + t) - abs(w))
                    if h < 0.0:
                        accepted = True
                        break
                t *= 0.5
            if not accepted:
                continue
            # K = t * inv(I + t J sig_UU) J, with J the 2x2 swap matrix.
            q = (1.0 + t * c) ** 2 - t * t * a * b
            k00 = -t * t * b / q
            k11 = -t * t * a / q
            k01 = t * (1.0 + t * c) / q
            for r in range(p):
                pj = sig[r, j]
                pl = sig[r, l]
                P[r, 0] = pj
                P[r, 1] = pl
                x0 = pj * k00 + pl * k01
                x1 = pj * k01 + pl * k11
                X[r, 0] = x0
                X[r, 1] = x1
                V[r, 0] = 0.5 * (x0 * bjj + x1 * bjl) - B[r, j]
                V[r, 1] = 0.5 * (x0 * bjl + x1 * bll) - B[r, l]
            for r in range(p):
                for s in range(r, p):
                    ns = sig[r, s] - X[r, 0] * P[s, 0] - X[r, 1] * P[s, 1]
                    sig[r, s] = ns
                    sig[s, r] = ns
                    nb = (B[r, s] + V[r, 0] * X[s, 0] + V[r, 1] * X[s, 1]
                          + X[r, 0] * V[s, 0] + X[r, 1] * V[s, 1])
                    B[r, s] = nb
                    B[s, r] = nb
            omega[j, l] = w + t
            omega[l, j] = w + t
            if abs(t) > max_change:
                max_change = abs(t)
    return max_change
