"""Fused centroid subproblem: solver and cluster extraction.

Given per-task coefficients W (one row per task) and a weighted task graph,
the centroid matrix U minimizes

    (lam1/2) sum_m ||w_m - u_m||^2  +  lam2 sum_{(m,l) in E} r_{m,l} ||u_m - u_l||_2.

The group penalty fuses centroids exactly, so connected components of
near-identical rows of U define task clusters.

The solver is a dual-regularized scheme: an accelerated inner loop whose
momentum trails one step behind (the first inner pass therefore reduces to a
single proximal-gradient step) alternating with a projection update of edge
dual variables; the outer alternation drives convergence. Because each inner
pass is cheap, total work matches a plain accelerated method, and a final
safeguard never returns a worse point than the warm start or W itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.sparse import csgraph, csr_matrix

from .errors import ConfigInvalidError, NonConvergenceError
from .graph import WeightGraph


@dataclass(frozen=True)
class CentroidState:
    """Solution of the fused centroid subproblem with its edge duals."""

    U: np.ndarray
    duals: np.ndarray
    objective: float
    n_outer: int
    n_inner_total: int
    converged: bool

    def __post_init__(self):
        for name in ("U", "duals"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)


def prox_ball(V: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Project each row of V onto the Euclidean ball of the matching radius."""
    V = np.asarray(V, dtype=float)
    radii = np.asarray(radii, dtype=float)
    norms = np.linalg.norm(V, axis=1)
    scale = np.where(norms > radii, np.divide(radii, norms, where=norms > 0), 1.0)
    return V * scale[:, None]


def centroid_objective(
    U: np.ndarray, W: np.ndarray, graph: WeightGraph, lam1: float, lam2: float
) -> float:
    """Value of the fused centroid objective at U."""
    diffs = U[graph.edges[:, 0]] - U[graph.edges[:, 1]]
    fuse = float(graph.weights @ np.linalg.norm(diffs, axis=1))
    return 0.5 * lam1 * float(np.sum((W - U) ** 2)) + lam2 * fuse


@njit(cache=True)
def _centroid_rounds(
    W, U0, S0, edge_m, edge_l, radii, lam1, rho, eta,
    outer_tol, outer_max, inner_tol, inner_max,
):  # pragma: no cover - exercised through solve_centroids
    """Compiled core of solve_centroids; same alternation, index arithmetic
    replacing the sparse incidence products."""
    T, p = W.shape
    E = edge_m.shape[0]
    U = U0.copy()
    S = S0.copy()
    B = np.empty((T, p))
    Z = np.empty((T, p))
    Z_prev = np.empty((T, p))
    D = np.empty((E, p))
    G = np.empty((T, p))
    n_inner_total = 0
    converged = False
    n_outer = 0
    for t in range(1, outer_max + 1):
        n_outer = t
        # Inner accelerated pass on B with trailing momentum.
        B[:] = U
        alpha = 1.0
        moved = True
        for k in range(inner_max):
            n_inner_total += 1
            if moved:
                # D = prox_ball(S + rho * (A @ B)); G = A.T @ D
                G[:] = 0.0
                for e in range(E):
                    m = edge_m[e]
                    l = edge_l[e]
                    nrm = 0.0
                    for j in range(p):
                        v = S[e, j] + rho * (B[m, j] - B[l, j])
                        D[e, j] = v
                        nrm += v * v
                    nrm = np.sqrt(nrm)
                    if nrm > radii[e]:
                        sc = radii[e] / nrm
                        for j in range(p):
                            D[e, j] *= sc
                    for j in range(p):
                        G[m, j] += D[e, j]
                        G[l, j] -= D[e, j]
                for i in range(T):
                    for j in range(p):
                        Z[i, j] = B[i, j] - eta * (lam1 * (B[i, j] - W[i, j]) + G[i, j])
            if k == 0:
                Z_prev[:] = Z  # first momentum difference is defined as zero
            alpha_next = (1.0 + np.sqrt(1.0 + 4.0 * alpha * alpha)) / 2.0
            mom = (alpha - 1.0) / alpha_next
            gap2 = 0.0
            zn2 = 0.0
            for i in range(T):
                for j in range(p):
                    d = Z[i, j] - Z_prev[i, j]
                    B[i, j] += mom * d
                    gap2 += d * d
                    zn2 += Z[i, j] * Z[i, j]
            alpha = alpha_next
            Z_prev[:] = Z
            # If the momentum update left B untouched the next gradient pass
            # would reproduce Z exactly, so it can be reused as-is.
            moved = mom != 0.0 and gap2 > 0.0
            if k > 0 and np.sqrt(gap2) <= inner_tol * max(1.0, np.sqrt(zn2)):
                break
        # Dual projection at the accepted point, then the outer stall test.
        du2 = 0.0
        un2 = 0.0
        for i in range(T):
            for j in range(p):
                d = Z_prev[i, j] - U[i, j]
                du2 += d * d
                U[i, j] = Z_prev[i, j]
                un2 += U[i, j] * U[i, j]
        for e in range(E):
            m = edge_m[e]
            l = edge_l[e]
            nrm = 0.0
            for j in range(p):
                v = S[e, j] + rho * (U[m, j] - U[l, j])
                S[e, j] = v
                nrm += v * v
            nrm = np.sqrt(nrm)
            if nrm > radii[e]:
                sc = radii[e] / nrm
                for j in range(p):
                    S[e, j] *= sc
        if np.sqrt(du2) <= outer_tol * max(1.0, np.sqrt(un2)):
            converged = True
            break
    return U, S, n_outer, n_inner_total, converged


def solve_centroids(
    W: np.ndarray,
    graph: WeightGraph,
    lam1: float,
    lam2: float,
    rho: float = 1.0,
    warm: CentroidState | None = None,
    outer_tol: float = 1e-8,
    outer_max: int = 500,
    inner_tol: float = 1e-8,
    inner_max: int = 2000,
    strict: bool = False,
) -> CentroidState:
    """Solve the fused centroid subproblem for fixed task coefficients W.

    Momentum inside the inner loop uses the previous accelerated point, so a
    fresh inner pass contributes one proximal-gradient step and stalls, which
    the stall test detects; the outer dual updates then supply the remaining
    progress. The returned U never has a larger objective than the warm-start
    centroids or W (safeguard against inexact subsolves).

    With strict=True a failure to reach outer_tol raises NonConvergenceError;
    otherwise the state is returned with converged=False.
    """
    W = np.asarray(W, dtype=float)
    T, p = W.shape
    if graph.n_nodes != T:
        raise ConfigInvalidError("graph size does not match number of tasks")
    if lam1 <= 0:
        raise ConfigInvalidError("lam1 must be > 0")
    if lam2 < 0:
        raise ConfigInvalidError("lam2 must be >= 0")
    if inner_max < 1:
        raise ConfigInvalidError("inner_max must be >= 1")
    if lam2 == 0.0:
        U = W.copy()
        return CentroidState(U, np.zeros((graph.n_edges, p)), 0.0, 0, 0, True)

    radii = lam2 * graph.weights
    max_deg = int(graph.degrees().max())
    eta = 1.0 / ((lam1 + 2.0 * max_deg) * max(1.0, rho))

    U = W.copy() if warm is None else np.array(warm.U, dtype=float)
    S = np.zeros((graph.n_edges, p)) if warm is None else np.array(warm.duals, dtype=float)
    warm_obj = centroid_objective(U, W, graph, lam1, lam2)

    U, S, n_outer, n_inner_total, converged = _centroid_rounds(
        W, U, S,
        np.ascontiguousarray(graph.edges[:, 0]),
        np.ascontiguousarray(graph.edges[:, 1]),
        radii, lam1, rho, eta, outer_tol, outer_max, inner_tol, inner_max,
    )

    obj = centroid_objective(U, W, graph, lam1, lam2)
    # Safeguard: never return a point worse than the warm start or W.
    if warm is not None and warm_obj < obj:
        U, obj = np.array(warm.U, dtype=float), warm_obj
    w_obj = centroid_objective(W, W, graph, lam1, lam2)
    if w_obj < obj:
        U, obj = W.copy(), w_obj
    if strict and not converged:
        raise NonConvergenceError(
            f"centroid solver did not reach tolerance {outer_tol:g} in {outer_max} rounds",
            iterations=int(n_outer),
            state=U,
            residuals=obj,
        )
    return CentroidState(U, S, obj, int(n_outer), int(n_inner_total), bool(converged))


def merge_tolerance(U: np.ndarray) -> float:
    """Default distance below which two centroids count as fused."""
    T, p = U.shape
    return 1e-6 * (1.0 + float(np.linalg.norm(U)) / np.sqrt(T * p))


def extract_clusters(U: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Group tasks whose centroids coincide (transitively) within tol.

    Returns integer labels in first-appearance order: label 0 is the cluster
    of task 0, label 1 the first different cluster after it, and so on.
    """
    U = np.asarray(U, dtype=float)
    T = U.shape[0]
    if tol is None:
        tol = merge_tolerance(U)
    d2 = np.sum((U[:, None, :] - U[None, :, :]) ** 2, axis=2)
    adj = csr_matrix(d2 <= tol * tol)
    _, raw = csgraph.connected_components(adj, directed=False)
    labels = np.empty(T, dtype=int)
    remap: dict[int, int] = {}
    for i, c in enumerate(raw):
        if c not in remap:
            remap[c] = len(remap)
        labels[i] = remap[c]
    return labels
