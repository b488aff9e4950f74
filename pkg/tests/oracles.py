"""Independent reference implementations used to derive expected test values.

Everything here is deliberately written with different algorithms than the
package (proximal gradient instead of coordinate descent, plain subgradient
descent instead of the accelerated centroid solver, augmented least squares
instead of normal equations) so agreement is meaningful evidence.
"""

import numpy as np


def soft_vec(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def fista_lasso(X, y, lam, iters=20_000):
    """Accelerated proximal gradient for (1/(2n))||y-Xw||^2 + lam||w||_1."""
    n, p = X.shape
    G = X.T @ X / n
    b = X.T @ y / n
    L = float(np.linalg.eigvalsh(G).max())
    step = 1.0 / max(L, 1e-12)
    w = np.zeros(p)
    v = w.copy()
    t = 1.0
    for _ in range(iters):
        w_new = soft_vec(v - step * (G @ v - b), step * lam)
        t_new = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        v = w_new + ((t - 1.0) / t_new) * (w_new - w)
        w, t = w_new, t_new
    return w


def lasso_objective(X, y, w, lam):
    n = X.shape[0]
    return float(np.sum((y - X @ w) ** 2) / (2 * n) + lam * np.sum(np.abs(w)))


def lasso_kkt_violation(X, y, w, lam):
    """Max violation of the stationarity conditions; 0 at the optimum."""
    n = X.shape[0]
    g = X.T @ (y - X @ w) / n  # negative gradient of the smooth part
    viol = 0.0
    for j in range(len(w)):
        if w[j] > 0:
            viol = max(viol, abs(g[j] - lam))
        elif w[j] < 0:
            viol = max(viol, abs(g[j] + lam))
        else:
            viol = max(viol, max(0.0, abs(g[j]) - lam))
    return viol


def ridge_augmented_lstsq(X, y, lam):
    """Ridge via least squares on rows stacked with sqrt(n*lam) I."""
    n, p = X.shape
    Xa = np.vstack([X, np.sqrt(n * lam) * np.eye(p)])
    ya = np.concatenate([y, np.zeros(p)])
    w, *_ = np.linalg.lstsq(Xa, ya, rcond=None)
    return w


def logistic_ridge_gd(X, y, lam, intercept_ridge=0.0, iters=200_000, lr=None):
    """Plain gradient descent for ridge-penalized logistic regression."""
    n, p = X.shape
    X1 = np.hstack([np.ones((n, 1)), X])
    reg = np.concatenate([[intercept_ridge], np.full(p, lam)])
    L = float(np.linalg.eigvalsh(X1.T @ X1).max()) / (4 * n) + max(lam, intercept_ridge)
    step = 1.0 / L if lr is None else lr
    th = np.zeros(p + 1)
    for _ in range(iters):
        pi = 1.0 / (1.0 + np.exp(-np.clip(X1 @ th, -500, 500)))
        grad = -X1.T @ (y - pi) / n + reg * th
        th = th - step * grad
    return th[0], th[1:]


def logistic_prox_gd(X, y, lam1, u, intercept_ridge=0.0, iters=200_000, lr=None):
    """Plain gradient descent for one logistic block update.

    Minimizes -loglik/n + (intercept_ridge/2) w0^2 + (lam1/2)||w - u||^2,
    the subproblem solved in closed loop by the damped Newton block update.
    """
    n, p = X.shape
    X1 = np.hstack([np.ones((n, 1)), X])
    reg = np.concatenate([[intercept_ridge], np.full(p, lam1)])
    center = np.concatenate([[0.0], u])
    L = float(np.linalg.eigvalsh(X1.T @ X1).max()) / (4 * n) + max(lam1, intercept_ridge)
    step = 1.0 / L if lr is None else lr
    th = np.zeros(p + 1)
    for _ in range(iters):
        pi = 1.0 / (1.0 + np.exp(-np.clip(X1 @ th, -500, 500)))
        grad = -X1.T @ (y - pi) / n + reg * (th - center)
        th = th - step * grad
    return th[0], th[1:]


def fused_centroid_objective(U, W, edges, weights, lam1, lam2):
    """(lam1/2) sum ||w_m - u_m||^2 + lam2 sum_e r_e ||u_m - u_l||_2."""
    val = 0.5 * lam1 * float(np.sum((W - U) ** 2))
    for (m, l), r in zip(edges, weights):
        val += lam2 * r * float(np.linalg.norm(U[m] - U[l]))
    return val


def subgradient_centroids(
    W,
    edges,
    weights,
    lam1,
    lam2,
    base_iters=150_000,
    refine_rounds=10,
    refine_iters=20_000,
):
    """Subgradient descent oracle for the fused centroid subproblem.

    A diminishing-step phase is followed by Polyak level-refinement rounds
    that halve the assumed gap; validated to reach gaps below 1e-7 on
    problems of the size used in tests.
    """
    T, p = W.shape
    E = len(edges)
    A = np.zeros((E, T))
    for e, (m, l) in enumerate(edges):
        A[e, m] = 1.0
        A[e, l] = -1.0
    r = np.asarray(weights, dtype=float)

    def subgrad(U):
        D = A @ U
        nrm = np.linalg.norm(D, axis=1)
        scale = np.where(nrm > 1e-12, 1.0 / np.maximum(nrm, 1e-12), 0.0)
        return lam1 * (U - W) + lam2 * A.T @ (r[:, None] * scale[:, None] * D)

    def obj(U):
        return fused_centroid_objective(U, W, edges, r, lam1, lam2)

    U = W.copy()
    best, best_obj = U.copy(), obj(U)
    for k in range(base_iters):
        g = subgrad(U)
        U = U - (2.0 / (lam1 * (k + 2))) * g
        if k % 25 == 0:
            o = obj(U)
            if o < best_obj:
                best, best_obj = U.copy(), o
    delta = max(abs(best_obj), 1.0) * 1e-4
    for _ in range(refine_rounds):
        U = best.copy()
        for _ in range(refine_iters):
            g = subgrad(U)
            gn2 = float(np.sum(g * g))
            if gn2 <= 1e-30:
                break
            level = best_obj - delta
            o = obj(U)
            U = U - max(o - level, 0.0) / gn2 * g
            if o < best_obj:
                best, best_obj = U.copy(), o
        delta /= 2.0
    return best, best_obj


def network_lasso_objective(tasks_Xy, W, edges, weights, lam):
    """sum_m (1/(2n))||y - Xw||^2 + lam sum_e r_e ||w_m - w_l||_2."""
    val = 0.0
    for (X, y), w in zip(tasks_Xy, W):
        r = y - X @ w
        val += float(r @ r) / (2 * X.shape[0])
    for (m, l), r_e in zip(edges, weights):
        val += lam * r_e * float(np.linalg.norm(W[m] - W[l]))
    return val


def subgradient_network_lasso(
    tasks_Xy,
    edges,
    weights,
    lam,
    base_iters=150_000,
    refine_rounds=10,
    refine_iters=20_000,
):
    """Subgradient descent oracle for the network-fused least squares problem.

    Same diminishing-step + Polyak refinement structure as the centroid
    oracle; requires every per-task Gram matrix to be positive definite so
    the objective is strongly convex.
    """
    T = len(tasks_Xy)
    p = tasks_Xy[0][0].shape[1]
    G = [X.T @ X / X.shape[0] for X, _ in tasks_Xy]
    b = [X.T @ y / X.shape[0] for X, y in tasks_Xy]
    mu = min(float(np.linalg.eigvalsh(Gm).min()) for Gm in G)
    assert mu > 1e-8, "oracle requires strongly convex tasks"
    E = len(edges)
    A = np.zeros((E, T))
    for e, (m, l) in enumerate(edges):
        A[e, m] = 1.0
        A[e, l] = -1.0
    r = np.asarray(weights, dtype=float)

    def subgrad(W):
        g = np.stack([G[m] @ W[m] - b[m] for m in range(T)])
        D = A @ W
        nrm = np.linalg.norm(D, axis=1)
        scale = np.where(nrm > 1e-12, 1.0 / np.maximum(nrm, 1e-12), 0.0)
        return g + lam * A.T @ (r[:, None] * scale[:, None] * D)

    def obj(W):
        return network_lasso_objective(tasks_Xy, W, edges, r, lam)

    W = np.stack([np.linalg.lstsq(X, y, rcond=None)[0] for X, y in tasks_Xy])
    best, best_obj = W.copy(), obj(W)
    for k in range(base_iters):
        W = W - (2.0 / (mu * (k + 2))) * subgrad(W)
        if k % 25 == 0:
            o = obj(W)
            if o < best_obj:
                best, best_obj = W.copy(), o
    delta = max(abs(best_obj), 1.0) * 1e-4
    for _ in range(refine_rounds):
        W = best.copy()
        for _ in range(refine_iters):
            g = subgrad(W)
            gn2 = float(np.sum(g * g))
            if gn2 <= 1e-30:
                break
            o = obj(W)
            W = W - max(o - (best_obj - delta), 0.0) / gn2 * g
            if o < best_obj:
                best, best_obj = W.copy(), o
        delta /= 2.0
    return best, best_obj


def pairwise_auc(scores, labels):
    """O(n^2) probability that a positive outscores a negative (ties count half)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for s in pos:
        for t in neg:
            if s > t:
                total += 1.0
            elif s == t:
                total += 0.5
    return total / (len(pos) * len(neg))
