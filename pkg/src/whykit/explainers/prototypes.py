"""Greedy prototype selection.

Selects candidate rows whose weighted kernel mixture best reproduces a
target set's kernel mean: maximize l(w) = w'mu - 0.5 w'Kw with w >= 0,
where mu_j is the mean RBF kernel between candidate j and the target rows.
Each greedy step adds the candidate with the largest positive objective
gradient, then re-solves the weights on the selected support by projected
gradient descent.  The objective trace is non-decreasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..kernels import rbf_kernel, resolve_bandwidth


@dataclass
class PrototypeResult:
    indices: list[int]  # selection order, into the candidate array
    weights: np.ndarray  # aligned with indices, nonnegative
    objective: list[float] = field(default_factory=list)  # after each addition
    bandwidth: float = 0.0


def _solve_weights(K: np.ndarray, mu: np.ndarray, w0: np.ndarray) -> np.ndarray:
    """Maximize w'mu - 0.5 w'Kw subject to w >= 0 by projected gradient."""
    lam = float(np.linalg.eigvalsh(K).max())
    step = 1.0 / (lam + 1e-12)
    w = w0.copy()
    for _ in range(1000):
        grad = K @ w - mu  # gradient of the negated objective
        w_next = np.maximum(0.0, w - step * grad)
        if np.max(np.abs(w_next - w)) < 1e-12:
            w = w_next
            break
        w = w_next
    return w


def select_prototypes(
    X: np.ndarray,
    Y: np.ndarray,
    m: int,
    bandwidth: float | str = "median",
) -> PrototypeResult:
    """Pick up to m prototype rows of X that summarize the target set Y."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if m <= 0:
        return PrototypeResult(indices=[], weights=np.zeros(0))

    sigma = resolve_bandwidth(np.vstack([X, Y]), bandwidth)
    K = rbf_kernel(X, X, sigma)
    mu = rbf_kernel(X, Y, sigma).mean(axis=1)

    selected: list[int] = []
    w = np.zeros(0)
    trace: list[float] = []
    m = min(m, X.shape[0])
    for _ in range(m):
        grad = mu.copy()
        if selected:
            grad -= K[:, selected] @ w
        grad[selected] = -np.inf
        best = int(np.argmax(grad))
        if selected and grad[best] <= 0:
            break  # nothing left improves the objective
        selected.append(best)
        Ks = K[np.ix_(selected, selected)]
        mus = mu[selected]
        w0 = np.append(w, max(0.0, grad[best] / max(K[best, best], 1e-12)))
        w = _solve_weights(Ks, mus, w0)
        trace.append(float(w @ mus - 0.5 * w @ Ks @ w))

    return PrototypeResult(
        indices=selected, weights=w, objective=trace, bandwidth=sigma
    )
