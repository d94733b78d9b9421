"""Counterfactual instance search by seeded random-restart hill climbing.

Starting at the explained instance, each restart proposes single-feature
Gaussian steps (clipped to the observed feature ranges, immutable features
pinned) and accepts those that lower the loss

    max(0, flip_margin - margin) + 0.5 * normalized-L1-proximity
        + 0.1 * (negated mean normalized distance to already-found candidates)

where margin is the signed distance of the perturbed prediction across the
decision boundary.  Every returned candidate is re-verified to flip the
predicted label; results are sorted by proximity, closest first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NoCounterfactualFound


@dataclass
class Counterfactual:
    x: np.ndarray
    prob: float
    proximity: float  # mean per-feature |delta| / feature range
    changed: dict[int, tuple[float, float]]  # feature index -> (from, to)


@dataclass
class CounterfactualResult:
    original: np.ndarray
    original_label: int
    original_prob: float
    candidates: list[Counterfactual] = field(default_factory=list)
    evals: int = 0
    seed: int = 0


def search_counterfactuals(
    predict_fn,
    x: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    k: int = 4,
    immutable: tuple[int, ...] = (),
    seed: int = 0,
    restarts: int = 8,
    max_evals: int = 2000,
    l1_weight: float = 0.5,
    diversity_weight: float = 0.1,
    flip_margin: float = 0.01,
    step_scale: float = 0.25,
) -> CounterfactualResult:
    x = np.asarray(x, dtype=float).ravel()
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    d = x.size
    span = np.where(hi > lo, hi - lo, 1.0)
    mutable = np.array([j for j in range(d) if j not in set(immutable)], dtype=int)
    if mutable.size == 0:
        raise NoCounterfactualFound("every feature is immutable")

    p0 = float(np.asarray(predict_fn(x[None, :])).ravel()[0])
    y0 = int(p0 >= 0.5)

    def margin(p: float) -> float:
        return 0.5 - p if y0 == 1 else p - 0.5

    def proximity(cand: np.ndarray) -> float:
        return float(np.mean(np.abs(cand - x) / span))

    pool: list[np.ndarray] = []

    def loss(cand: np.ndarray, p: float) -> float:
        val = max(0.0, flip_margin - margin(p)) + l1_weight * proximity(cand)
        if pool:
            dists = [float(np.mean(np.abs(cand - q) / span)) for q in pool]
            val += diversity_weight * (-float(np.mean(dists)))
        return val

    evals = 0
    best_margin_seen = -np.inf
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        cur = x.copy()
        p_cur = p0
        cur_loss = loss(cur, p_cur)
        best_flip: tuple[float, np.ndarray, float] | None = None  # (prox, x, p)
        for _ in range(max_evals):
            j = int(mutable[rng.integers(mutable.size)])
            cand = cur.copy()
            cand[j] = float(np.clip(cand[j] + rng.normal(0.0, step_scale * span[j]), lo[j], hi[j]))
            p = float(np.asarray(predict_fn(cand[None, :])).ravel()[0])
            evals += 1
            m = margin(p)
            best_margin_seen = max(best_margin_seen, m)
            if m >= flip_margin:
                prox = proximity(cand)
                if best_flip is None or prox < best_flip[0]:
                    best_flip = (prox, cand.copy(), p)
            cand_loss = loss(cand, p)
            if cand_loss < cur_loss:
                cur, p_cur, cur_loss = cand, p, cand_loss
        if best_flip is not None:
            pool.append(best_flip[1])

    # Re-verify every candidate actually flips the predicted label.
    verified: list[Counterfactual] = []
    seen: set[tuple] = set()
    for cand in pool:
        p = float(np.asarray(predict_fn(cand[None, :])).ravel()[0])
        if int(p >= 0.5) == y0:
            continue
        key = tuple(np.round(cand, 9))
        if key in seen:
            continue
        seen.add(key)
        changed = {
            j: (float(x[j]), float(cand[j]))
            for j in range(d)
            if abs(cand[j] - x[j]) > 1e-12
        }
        verified.append(
            Counterfactual(
                x=cand, prob=p, proximity=proximity(cand), changed=changed
            )
        )

    if not verified:
        raise NoCounterfactualFound(
            "search budget exhausted without flipping the prediction",
            {"best_margin": best_margin_seen, "evals": evals},
        )
    verified.sort(key=lambda c: c.proximity)
    return CounterfactualResult(
        original=x,
        original_label=y0,
        original_prob=p0,
        candidates=verified[: max(1, k)],
        evals=evals,
        seed=seed,
    )
