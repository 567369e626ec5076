"""Iteration schemes built on velocity projections, plus the outer run loop.

Three schemes are provided:

* ``cgd``: gradient descent whose increment is projected onto the velocity
  cone of all constraints.
* ``agd_local``: momentum iteration that projects the velocity onto the cone
  of currently violated constraints, with a restitution law at impacts.
* ``agd_global``: momentum iteration with every constraint linearized at the
  extrapolated point and a curvature-corrected right-hand side.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    Array,
    ConstantStep,
    IterateState,
    Problem,
    ResolvedParams,
    SolverParams,
    VelocityCone,
    build_global_cone,
    build_local_cone,
    stationarity_residual,
)
from .polyproj import InfeasibleCone, ProjectionResult, project

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max_iter"
STATUS_INFEASIBLE = "infeasible_cone"


@dataclass(frozen=True)
class StoppingRule:
    """Stop when |u| <= u_tol and the stationarity residual <= kkt_tol."""

    max_iter: int = 100_000
    u_tol: float = 1e-9
    kkt_tol: float = 1e-7

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.u_tol < 0 or self.kkt_tol < 0:
            raise ValueError("tolerances must be nonnegative")


@dataclass(frozen=True)
class TraceRecord:
    k: int
    T: float
    fx: float
    min_g: float
    u_norm: float
    kkt: float  # nan when not evaluated at this iteration
    active_size: int
    elapsed_s: float


@dataclass
class Trace:
    """Per-iteration history of a run plus its terminal status."""

    records: list[TraceRecord] = field(default_factory=list)
    status: str = STATUS_MAX_ITER
    final_state: IterateState | None = None

    def column(self, name: str) -> Array:
        return np.array([getattr(rec, name) for rec in self.records])

    def __len__(self) -> int:
        return len(self.records)


def _resolve(params, k: int) -> ResolvedParams:
    if isinstance(params, SolverParams):
        return params.at(k)
    return ResolvedParams(*params)


def _cgd_full(problem: Problem, state: IterateState, params) -> tuple[IterateState, VelocityCone, ProjectionResult]:
    rp = _resolve(params, state.k)
    if rp.alpha * rp.T > 1.0 + 1e-12:
        raise ValueError(f"cgd requires alpha*T <= 1, got {rp.alpha * rp.T:.3g}")
    _, grad = problem.f(state.x)
    g = np.asarray(problem.g(state.x), dtype=float)
    idx = np.arange(problem.n_g)
    cone = VelocityCone(problem.g_rows(state.x, idx), -rp.alpha * g, idx)
    res = project(-np.asarray(grad, dtype=float), cone)
    new = IterateState(state.x + rp.T * res.v, res.v, state.k + 1, rp.T)
    return new, cone, res


def _agd_local_full(problem: Problem, state: IterateState, params) -> tuple[IterateState, VelocityCone, ProjectionResult]:
    rp = _resolve(params, state.k)
    _, grad = problem.f(state.x + rp.beta * state.u)
    r = state.u - 2.0 * rp.delta * rp.T * state.u - rp.T * np.asarray(grad, dtype=float)
    cone = build_local_cone(problem, state, params)
    res = project(r, cone)
    new = IterateState(state.x + rp.T * res.v, res.v, state.k + 1, rp.T)
    return new, cone, res


def _agd_global_full(problem: Problem, state: IterateState, params) -> tuple[IterateState, VelocityCone, ProjectionResult]:
    rp = _resolve(params, state.k)
    _, grad = problem.f(state.x + rp.beta * state.u)
    r = state.u - 2.0 * rp.delta * rp.T * state.u - rp.T * np.asarray(grad, dtype=float)
    cone = build_global_cone(problem, state, params)
    res = project(r, cone)
    new = IterateState(state.x + rp.T * res.v, res.v, state.k + 1, rp.T)
    return new, cone, res


def cgd_step(problem: Problem, state: IterateState, params) -> IterateState:
    """One projected-velocity gradient step; the u field stores the velocity."""
    return _cgd_full(problem, state, params)[0]


def agd_local_step(problem: Problem, state: IterateState, params) -> IterateState:
    """One momentum step against the cone of violated constraints."""
    return _agd_local_full(problem, state, params)[0]


def agd_global_step(problem: Problem, state: IterateState, params) -> IterateState:
    """One momentum step against the full, curvature-corrected cone."""
    return _agd_global_full(problem, state, params)[0]


_STEPPERS: dict[str, Callable] = {
    "cgd": _cgd_full,
    "agd_local": _agd_local_full,
    "agd_global": _agd_global_full,
}


def run(
    problem: Problem,
    method: str,
    params: SolverParams,
    stop: StoppingRule,
    x0: Array,
    u0: Array | None = None,
    kkt_every: int = 10,
    observer: Callable | None = None,
) -> Trace:
    """Iterate ``method`` from (x0, u0) until the stopping rule fires.

    The trace holds exactly one record per visited iterate, k = 0 included.
    The stationarity residual is evaluated every ``kkt_every`` iterations
    (it is the most expensive diagnostic) and additionally whenever the
    momentum test already passes.  ``observer``, when given, is called after
    every step as ``observer(k, prev_state, new_state, cone, projection)``.

    An empty velocity cone ends the run with status ``infeasible_cone`` and
    the partial trace is returned.
    """
    if method not in _STEPPERS:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(_STEPPERS)}")
    stepper = _STEPPERS[method]
    x0 = np.asarray(x0, dtype=float)
    u0 = np.zeros_like(x0) if u0 is None else np.asarray(u0, dtype=float)
    state = IterateState(x0, u0, 0, params.at(0).T)

    trace = Trace()
    t_start = time.perf_counter()
    last_active = 0
    while True:
        k = state.k
        fx, _ = problem.f(state.x)
        g = np.asarray(problem.g(state.x), dtype=float)
        u_norm = float(np.linalg.norm(state.u))
        kkt = np.nan
        if (kkt_every and k % kkt_every == 0) or u_norm <= stop.u_tol:
            kkt, _ = stationarity_residual(problem, state.x, params.eps_const)
        trace.records.append(
            TraceRecord(
                k=k,
                T=params.at(k).T,
                fx=float(fx),
                min_g=float(g.min()) if g.size else np.inf,
                u_norm=u_norm,
                kkt=float(kkt),
                active_size=last_active,
                elapsed_s=time.perf_counter() - t_start,
            )
        )
        if u_norm <= stop.u_tol and kkt <= stop.kkt_tol:
            trace.status = STATUS_CONVERGED
            break
        if k >= stop.max_iter:
            trace.status = STATUS_MAX_ITER
            break
        try:
            new_state, cone, res = stepper(problem, state, params)
        except InfeasibleCone:
            trace.status = STATUS_INFEASIBLE
            break
        if observer is not None:
            observer(k, state, new_state, cone, res)
        last_active = res.active.size
        state = new_state
    trace.final_state = state
    return trace


def effective_smoothness(L: float, B: float, L_g: float, eps: float) -> float:
    """Surrogate smoothness L + B * L_g / eps of the penalized objective.

    ``B`` bounds |grad f|^2 / (2 mu) over the feasible set; the result bounds
    the smoothness of f minus any admissible multiplier combination of the
    constraints when the target accuracy is ``eps`` and no multiplier bound
    is available.  Affine constraints (L_g = 0) give back L.
    """
    if eps <= 0:
        raise ValueError("accuracy parameter must be positive")
    if L <= 0 or B <= 0 or L_g < 0:
        raise ValueError("smoothness inputs must be positive (L_g may be zero)")
    return L + B * L_g / eps


def accelerated_constant_params(L_l: float, mu: float, **extra) -> SolverParams:
    """Critically tuned constant parameters for a strongly convex objective.

    Sets T = 1/sqrt(L_l), delta = alpha = sqrt(L_l)/(1 + sqrt(kappa)), and
    beta = T*(1 - 2*delta*T) with kappa = L_l/mu; the matching contraction
    factor per iteration is 1 - 1/(1 + sqrt(kappa)).
    """
    if not (L_l > 0 and mu > 0 and L_l >= mu):
        raise ValueError("need L_l >= mu > 0")
    kappa = L_l / mu
    T = 1.0 / np.sqrt(L_l)
    delta = np.sqrt(L_l) / (np.sqrt(kappa) + 1.0)
    beta = T * (1.0 - 2.0 * delta * T)
    return SolverParams(
        schedule=ConstantStep(T), alpha=delta, delta=delta, beta=beta, **extra
    )
