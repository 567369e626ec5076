"""Trace validation: impact-law slack and constraint-violation decay.

Two per-step inequalities hold along every velocity-projection run and are
worth checking mechanically:

* impact law: the new momentum satisfies every cone row, i.e. the projected
  velocity reverses at least the fraction ``eps`` of the incoming normal
  velocity on each active constraint;
* decay: whenever g_i < 0 at the current iterate, the next value obeys
  g_i(next) >= (1 - alpha*T) * g_i(current) - T^2 * L_i * c^2 / 2 where L_i
  bounds the curvature of g_i and c the relevant velocity magnitude (momentum
  norm for the local schemes, displacement from the extrapolated point over T
  for the global ones).

Auditors accumulate worst cases online so that long traces need no storage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Array, IterateState, Problem, SolverParams
from .lpcs import CsState, CsStepInfo, LpBall, power_approx


def curvature_bound(ball: LpBall) -> float:
    """Upper bound on |d^2/dx^2 power_approx| : p*(1-p)*delta**(p-2)."""
    return ball.p * (1.0 - ball.p) * ball.delta ** (ball.p - 2.0)


@dataclass
class DecayStats:
    """Worst observed margins of the decay inequality."""

    worst_affine_margin: float = np.inf
    worst_deficit: float = -np.inf  # normalized by T^2 * L_i / 2
    c_max: float = 0.0

    def update(self, g_prev: Array, g_next: Array, alpha: float, T: float,
               lipschitz: Array, velocity: float) -> None:
        self.c_max = max(self.c_max, velocity)
        violated = g_prev < 0.0
        if not np.any(violated):
            return
        drop = g_next[violated] - (1.0 - alpha * T) * g_prev[violated]
        lips = lipschitz[violated]
        flat = lips == 0.0
        if np.any(flat):
            self.worst_affine_margin = min(self.worst_affine_margin, float(np.min(drop[flat])))
        if np.any(~flat):
            deficit = -drop[~flat] / (0.5 * T * T * lips[~flat])
            self.worst_deficit = max(self.worst_deficit, float(np.max(deficit)))

    def holds(self, atol: float = 1e-8) -> bool:
        return (
            self.worst_affine_margin >= -atol
            and self.worst_deficit <= self.c_max**2 * (1.0 + 1e-6) + atol
        )


class TraceAudit:
    """Observer for :func:`velproj.solvers.run` accumulating both inequalities.

    ``lipschitz_g`` holds one curvature bound per constraint (zeros for
    affine rows).  Attach with ``run(..., observer=audit)``.
    """

    def __init__(self, problem: Problem, params: SolverParams, method: str,
                 lipschitz_g: Array | None = None):
        self.problem = problem
        self.params = params
        self.global_scheme = method == "agd_global"
        self.lipschitz_g = (
            np.zeros(problem.n_g) if lipschitz_g is None else np.asarray(lipschitz_g, dtype=float)
        )
        self.min_cone_slack = np.inf
        self.decay = DecayStats()
        self._g_cache: tuple[int, Array] | None = None

    def __call__(self, k: int, prev: IterateState, new: IterateState, cone, proj) -> None:
        if cone.m:
            self.min_cone_slack = min(self.min_cone_slack, float(np.min(cone.slack(new.u))))
        if self._g_cache is not None and self._g_cache[0] == k:
            g_prev = self._g_cache[1]
        else:
            g_prev = np.asarray(self.problem.g(prev.x), dtype=float)
        g_next = np.asarray(self.problem.g(new.x), dtype=float)
        self._g_cache = (k + 1, g_next)
        rp = self.params.at(k)
        if self.global_scheme:
            y = prev.x + rp.beta * prev.u
            velocity = float(np.linalg.norm(new.x - y)) / rp.T
        else:
            velocity = float(np.linalg.norm(new.u))
        self.decay.update(g_prev, g_next, rp.alpha, rp.T, self.lipschitz_g, velocity)

    def assert_ok(self, impact_tol: float = 1e-8, decay_tol: float = 1e-8) -> None:
        if not self.min_cone_slack >= -impact_tol:
            raise AssertionError(f"impact law violated: worst cone slack {self.min_cone_slack:.3e}")
        if not self.decay.holds(decay_tol):
            raise AssertionError(
                f"decay inequality violated: affine margin {self.decay.worst_affine_margin:.3e}, "
                f"deficit {self.decay.worst_deficit:.3e} vs c^2 {self.decay.c_max ** 2:.3e}"
            )


class CsTraceAudit:
    """Same bookkeeping for the closed-form sparse-recovery loops.

    Constraint values are recomputed from consecutive states; the cone slack
    comes from the step's own :class:`~velproj.lpcs.CsStepInfo`.
    """

    def __init__(self, ball: LpBall, resolve, global_scheme: bool):
        self.ball = ball
        self.resolve = resolve  # k -> ResolvedParams
        self.global_scheme = global_scheme
        self.min_cone_slack = np.inf
        self.decay = DecayStats()

    def _g(self, state: CsState) -> Array:
        budget = self.ball.nu - float(np.sum(power_approx(state.xbar, self.ball)))
        return np.concatenate([state.xbar + state.x, state.xbar - state.x, [budget]])

    def __call__(self, k: int, prev: CsState, new: CsState, info: CsStepInfo) -> None:
        self.min_cone_slack = min(self.min_cone_slack, info.cone_slack_min)
        rp = self.resolve(k)
        n = prev.x.size
        lips = np.zeros(2 * n + 1)
        lips[-1] = curvature_bound(self.ball)
        self.decay.update(self._g(prev), self._g(new), rp.alpha, rp.T, lips, info.velocity)

    def assert_ok(self, impact_tol: float = 1e-8, decay_tol: float = 1e-8) -> None:
        if not self.min_cone_slack >= -impact_tol:
            raise AssertionError(f"impact law violated: worst cone slack {self.min_cone_slack:.3e}")
        if not self.decay.holds(decay_tol):
            raise AssertionError(
                f"decay inequality violated: affine margin {self.decay.worst_affine_margin:.3e}, "
                f"deficit {self.decay.worst_deficit:.3e} vs c^2 {self.decay.c_max ** 2:.3e}"
            )
