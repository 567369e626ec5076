"""Closed-form projection onto a weighted simplex and onto the l1 ball.

The weighted simplex is {xi : xi_i >= 0 for i in I, w @ xi <= budget} with
nonnegative weights.  Its Euclidean projection reduces to one descending sort
of the ratios q_i / w_i followed by a scan for the budget multiplier, so the
cost is O(n log n); this is the fast path that replaces the generic polyhedral
projection in the sparse-recovery schemes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Array


class _InfeasibleSimplex(ValueError):
    """Raised by the low-level projection when the instance admits no point;
    only reachable with a negative budget, which the public entry points
    reject up front."""


@dataclass(frozen=True)
class WeightedSimplexInstance:
    """Projection instance: point q, nonnegative index set, weights, budget."""

    q: Array
    nonneg: Array
    weights: Array
    budget: float

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "nonneg", np.asarray(self.nonneg, dtype=int))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        n = self.q.size
        if self.weights.size != n:
            raise ValueError("weights must match q in length")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if self.nonneg.size and (
            self.nonneg.min() < 0
            or self.nonneg.max() >= n
            or np.unique(self.nonneg).size != self.nonneg.size
        ):
            raise ValueError("nonneg must hold distinct indices into q")


def _project(q: Array, nonneg_mask: Array, w: Array, budget: float) -> Array:
    """Sorted-threshold projection; see :func:`project_weighted_simplex`."""
    xi = q.copy()
    xi[nonneg_mask & (q < 0.0)] = 0.0
    if float(w @ xi) <= budget:
        return xi

    # The budget binds: find its multiplier by scanning ratios in descending
    # order.  Zero-weight nonnegative coordinates stay plainly clamped (they
    # cannot contribute to the budget); free coordinates always shift by
    # -w*lam and enter the running sums unconditionally.
    ranked = nonneg_mask & (w > 0.0)
    free = ~nonneg_mask
    base_wq = float(w[free] @ q[free])
    base_w2 = float(w[free] @ w[free])
    idx = np.flatnonzero(ranked)
    ratio = q[idx] / w[idx]
    order = np.lexsort((idx, -ratio))
    ws = w[idx][order]
    qs = q[idx][order]
    rs = ratio[order]
    prefix_wq = base_wq + np.concatenate(([0.0], np.cumsum(ws * qs)))
    prefix_w2 = base_w2 + np.concatenate(([0.0], np.cumsum(ws * ws)))
    # Scan m = 1..M; stop at the first m whose trial value exceeds the budget.
    trial = prefix_wq[:-1] - prefix_w2[:-1] * rs
    hits = np.flatnonzero(trial > budget)
    stop = int(hits[0]) if hits.size else rs.size
    denom = prefix_w2[stop]
    if denom <= 0.0:
        raise _InfeasibleSimplex("negative budget with all weight on clamped coordinates")
    lam = (prefix_wq[stop] - budget) / denom
    if lam < 0.0:
        # Cannot occur analytically once the budget is violated; guard rounding.
        return xi
    out = q - w * lam
    out[nonneg_mask & (out < 0.0)] = 0.0
    return out


def project_weighted_simplex(inst: WeightedSimplexInstance) -> Array:
    """argmin |xi - q|^2 / 2  s.t.  xi_i >= 0 on the index set, w @ xi <= budget.

    The feasible set is never empty (xi = 0 qualifies), so a vector is always
    returned.  Ties between equal ratios are broken by ascending index, which
    does not change the projection but makes the arithmetic reproducible.
    """
    mask = np.zeros(inst.q.size, dtype=bool)
    mask[inst.nonneg] = True
    return _project(inst.q, mask, inst.weights, inst.budget)


def project_l1_ball(q: Array, nu: float) -> Array:
    """Projection onto {x : |x|_1 <= nu}.

    Sign-splits q into a 2n-dimensional unit-weight simplex instance and
    recombines: with x = a - b, a, b >= 0, the l1 ball becomes the budget
    sum(a) + sum(b) <= nu.
    """
    if nu < 0:
        raise ValueError("radius must be nonnegative")
    q = np.asarray(q, dtype=float)
    if float(np.abs(q).sum()) <= nu:
        return q.copy()
    n = q.size
    split = np.concatenate([q, -q])
    mask = np.ones(2 * n, dtype=bool)
    xi = _project(split, mask, np.ones(2 * n), nu)
    return xi[:n] - xi[n:]
