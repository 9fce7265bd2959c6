"""Kernel SVM classifier and epsilon-SVR on precomputed Gram matrices.

Both duals are instances of

    min_a  1/2 a'Qa + p'a   s.t.  y'a = 0,  0 <= a <= C,   Q_ij = y_i y_j K_ij,

solved by SMO with second-order working-set selection (Fan, Chen & Lin,
JMLR 2005).  Platt scaling turns classifier margins into probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

TAU = 1e-12


class SingleClassFold(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DualSolution:
    alpha: np.ndarray
    grad: np.ndarray
    rho: float
    n_iter: int
    converged: bool
    gap: float


def smo_solve(K, index, y, p, cost: float, tol: float = 1e-5,
              max_iter: int = 200_000) -> DualSolution:
    """Generic SMO over ``Q_ij = y_i y_j K[index_i, index_j]``.

    ``index`` maps each dual variable to a row of the Gram matrix ``K`` (the
    identity for classification, ``i mod m`` for regression).  Stops when the
    maximal violating pair gap ``m(a) - M(a)`` drops below ``tol``.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    index = np.ascontiguousarray(index, dtype=np.int64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    p = np.ascontiguousarray(p, dtype=np.float64)
    a, G, n_iter, gap = _smo_loop(K, index, y, p, float(cost), float(tol), int(max_iter))
    return DualSolution(a, G, _rho(a, G, y, cost), int(n_iter), bool(gap < tol), float(gap))


@numba.njit(cache=True)
def _smo_loop(K, index, y, p, C, tol, max_iter):
    l = y.shape[0]
    a = np.zeros(l)
    G = p.copy()
    gap = np.inf
    it = 0
    while it < max_iter:
        # I_up: y=+1 & a<C or y=-1 & a>0; I_low: y=+1 & a>0 or y=-1 & a<C
        i = -1
        m_up = -np.inf
        M_low = np.inf
        for t in range(l):
            v = -y[t] * G[t]
            if (y[t] > 0 and a[t] < C) or (y[t] < 0 and a[t] > 0):
                if v > m_up:
                    m_up = v
                    i = t
            if (y[t] > 0 and a[t] > 0) or (y[t] < 0 and a[t] < C):
                if v < M_low:
                    M_low = v
        if i < 0 or M_low == np.inf:
            gap = 0.0
            break
        gap = m_up - M_low
        if gap < tol:
            break
        ki = index[i]
        Kii = K[ki, ki]
        # second-order working-set selection for j
        j = -1
        best = np.inf
        for t in range(l):
            if (y[t] > 0 and a[t] > 0) or (y[t] < 0 and a[t] < C):
                b = m_up + y[t] * G[t]
                if b > 0:
                    kt = index[t]
                    quad = Kii + K[kt, kt] - 2.0 * K[ki, kt]
                    if quad <= 0:
                        quad = TAU
                    score = -(b * b) / quad
                    if score < best:
                        best = score
                        j = t
        if j < 0:
            break
        kj = index[j]
        Qij = y[i] * y[j] * K[ki, kj]
        Qii = Kii
        Qjj = K[kj, kj]
        ai_old = a[i]
        aj_old = a[j]
        _update_pair(a, G, y, i, j, Qij, Qii, Qjj, C)
        dai = a[i] - ai_old
        daj = a[j] - aj_old
        yi_dai = y[i] * dai
        yj_daj = y[j] * daj
        for t in range(l):
            kt = index[t]
            G[t] += y[t] * (K[kt, ki] * yi_dai + K[kt, kj] * yj_daj)
        it += 1
    return a, G, it, gap


@numba.njit(cache=True)
def _update_pair(a, G, y, i, j, Qij, Qii, Qjj, C):
    # two-variable subproblem with box clipping, as in LIBSVM's Solver::Solve
    if y[i] != y[j]:
        quad = Qii + Qjj + 2.0 * Qij
        if quad <= 0:
            quad = TAU
        delta = (-G[i] - G[j]) / quad
        diff = a[i] - a[j]
        a[i] += delta
        a[j] += delta
        if diff > 0:
            if a[j] < 0:
                a[j] = 0.0
                a[i] = diff
        else:
            if a[i] < 0:
                a[i] = 0.0
                a[j] = -diff
        if diff > 0:
            if a[i] > C:
                a[i] = C
                a[j] = C - diff
        else:
            if a[j] > C:
                a[j] = C
                a[i] = C + diff
    else:
        quad = Qii + Qjj - 2.0 * Qij
        if quad <= 0:
            quad = TAU
        delta = (G[i] - G[j]) / quad
        total = a[i] + a[j]
        a[i] -= delta
        a[j] += delta
        if total > C:
            if a[i] > C:
                a[i] = C
                a[j] = total - C
        else:
            if a[j] < 0:
                a[j] = 0.0
                a[i] = total
        if total > C:
            if a[j] > C:
                a[j] = C
                a[i] = total - C
        else:
            if a[i] < 0:
                a[i] = 0.0
                a[j] = total


def _rho(a, G, y, C) -> float:
    yG = y * G
    free = (a > 0) & (a < C)
    if free.any():
        return float(np.mean(yG[free]))
    at_upper = a >= C
    # bounds on rho from the KKT conditions at the box faces
    ub_mask = np.where(at_upper, y < 0, y > 0)
    lb_mask = ~ub_mask
    ub = np.min(yG[ub_mask]) if ub_mask.any() else np.inf
    lb = np.max(yG[lb_mask]) if lb_mask.any() else -np.inf
    if not np.isfinite(ub):
        return float(lb)
    if not np.isfinite(lb):
        return float(ub)
    return float((ub + lb) / 2.0)


@dataclass(frozen=True, eq=False)
class SVMFit:
    """Decision value at ``x`` is ``sum_i dual_coef_i k(x, x_i) + bias``."""

    dual_coef: np.ndarray
    bias: float
    n_iter: int
    converged: bool
    gap: float

    def decision(self, K_cross) -> np.ndarray:
        return np.asarray(K_cross) @ self.dual_coef + self.bias


def fit_svm_classifier(K_train, labels, cost: float = 1.0, tol: float = 1e-5,
                       max_iter: int = 200_000) -> SVMFit:
    """Soft-margin kernel SVM; ``labels`` in {-1, +1}."""
    K = np.asarray(K_train, dtype=float)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise SingleClassFold("both classes must be present")
    if cost <= 0:
        raise ValueError("cost must be positive")
    sol = smo_solve(K, np.arange(y.shape[0]), y, -np.ones_like(y), cost, tol, max_iter)
    return SVMFit(sol.alpha * y, -sol.rho, sol.n_iter, sol.converged, sol.gap)


def fit_svr(K_train, targets, cost: float = 1.0, epsilon: float = 0.1, tol: float = 1e-5,
            max_iter: int = 200_000) -> SVMFit:
    """Epsilon-insensitive kernel support vector regression."""
    K = np.asarray(K_train, dtype=float)
    t = np.asarray(targets, dtype=float).reshape(-1)
    m = t.shape[0]
    if m < 2:
        raise ValueError("need at least two training points")
    if cost <= 0 or epsilon < 0:
        raise ValueError("cost must be positive and epsilon nonnegative")
    y = np.concatenate([np.ones(m), -np.ones(m)])
    p = np.concatenate([epsilon - t, epsilon + t])
    index = np.concatenate([np.arange(m), np.arange(m)])
    sol = smo_solve(K, index, y, p, cost, tol, max_iter)
    coef = sol.alpha[:m] - sol.alpha[m:]
    return SVMFit(coef, -sol.rho, sol.n_iter, sol.converged, sol.gap)


def svm_kkt_residual(K, labels, fit: SVMFit, cost: float) -> float:
    """Largest violation of the primal-dual optimality conditions.

    Uses only the definitions: ``alpha = dual_coef * y`` must lie in the box,
    satisfy ``sum alpha_i y_i = 0`` and complementary slackness against the
    margins ``y_i f(x_i)``.
    """
    y = np.asarray(labels, dtype=float)
    alpha = fit.dual_coef * y
    f = np.asarray(K) @ fit.dual_coef + fit.bias
    margin = y * f
    viol = [abs(float(np.sum(alpha * y))), float(np.max(np.maximum(-alpha, 0))),
            float(np.max(np.maximum(alpha - cost, 0)))]
    scale = max(cost, 1.0)
    lo = alpha <= 1e-12 * scale
    hi = alpha >= cost * (1 - 1e-12)
    mid = ~lo & ~hi
    if lo.any():
        viol.append(float(np.max(np.maximum(1.0 - margin[lo], 0))))
    if hi.any():
        viol.append(float(np.max(np.maximum(margin[hi] - 1.0, 0))))
    if mid.any():
        viol.append(float(np.max(np.abs(margin[mid] - 1.0))))
    return max(viol)


def svr_kkt_residual(K, targets, fit: SVMFit, cost: float, epsilon: float) -> float:
    """Optimality violation for an epsilon-SVR solution (same idea as above)."""
    t = np.asarray(targets, dtype=float)
    beta = fit.dual_coef
    f = np.asarray(K) @ beta + fit.bias
    r = t - f
    viol = [abs(float(np.sum(beta))), float(np.max(np.maximum(np.abs(beta) - cost, 0)))]
    tiny = 1e-12 * max(cost, 1.0)
    zero = np.abs(beta) <= tiny
    full = np.abs(beta) >= cost - tiny
    mid = ~zero & ~full
    if zero.any():
        viol.append(float(np.max(np.maximum(np.abs(r[zero]) - epsilon, 0))))
    # beta > 0 means the point sits on or above the upper tube edge
    sgn = np.sign(beta)
    if full.any():
        viol.append(float(np.max(np.maximum(epsilon - sgn[full] * r[full], 0))))
    if mid.any():
        viol.append(float(np.max(np.abs(sgn[mid] * r[mid] - epsilon))))
    return max(viol)


# ----------------------------------------------------------------------------
# Platt scaling
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class PlattFit:
    """``P(y=+1 | f) = 1 / (1 + exp(A f + B))``."""

    A: float
    B: float
    informative: bool
    n_iter: int

    def predict(self, decision) -> np.ndarray:
        z = self.A * np.asarray(decision, dtype=float) + self.B
        return _sigmoid_neg(z)


def _sigmoid_neg(z):
    # 1 / (1 + exp(z)) without overflow
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    ez = np.exp(-z[pos])
    out[pos] = ez / (1.0 + ez)
    out[~pos] = 1.0 / (1.0 + np.exp(z[~pos]))
    return out


def platt_targets(labels) -> np.ndarray:
    y = np.asarray(labels)
    n_pos = int(np.sum(y > 0))
    n_neg = y.size - n_pos
    return np.where(y > 0, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))


def platt_objective(params, decision, labels):
    """Negative log-likelihood of Platt's smoothed targets and its gradient."""
    A, B = float(params[0]), float(params[1])
    f = np.asarray(decision, dtype=float)
    t = platt_targets(labels)
    z = A * f + B
    # log(1 + exp(-z)) + t z, evaluated stably
    value = float(np.sum(t * z + np.logaddexp(0.0, -z)))
    p = _sigmoid_neg(z)  # = 1 / (1 + exp(z))
    d = t - p
    return value, np.array([np.sum(d * f), np.sum(d)])


def platt_calibrate(decision_values, labels, max_iter: int = 100) -> PlattFit:
    """Fit Platt's sigmoid by Newton's method with backtracking.

    Follows Lin, Lin & Weng (2007), "A note on Platt's probabilistic outputs
    for support vector machines".
    """
    f = np.asarray(decision_values, dtype=float).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    n_pos = int(np.sum(y > 0))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassFold("Platt scaling needs both classes")
    t = platt_targets(y)
    A = 0.0
    B = float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    min_step, sigma, eps = 1e-10, 1e-12, 1e-5
    fval, _ = platt_objective((A, B), f, y)
    it = 0
    for it in range(1, max_iter + 1):
        z = A * f + B
        p = _sigmoid_neg(z)
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + float(np.sum(f * f * d2))
        h22 = sigma + float(np.sum(d2))
        h21 = float(np.sum(f * d2))
        d1 = t - p
        g1 = float(np.sum(f * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            nA, nB = A + step * dA, B + step * dB
            nval, _ = platt_objective((nA, nB), f, y)
            if nval < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nval
                break
            step /= 2.0
        else:
            break
    return PlattFit(float(A), float(B), bool(A <= 0), it)
