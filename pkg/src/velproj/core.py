"""Problem model, velocity cones, parameter schedules, stationarity diagnostics.

The central object is the velocity cone: at a point ``x`` each constraint
``g_i(x) >= 0`` is imposed on the iterate increment ``v`` through the
halfspace ``grad g_i(x)^T v + alpha * g_i(x) >= 0``.  Feasibility is thereby
enforced at the velocity level; constraint violations decay at rate ``alpha``
instead of being removed by a projection onto the feasible set.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import numpy as np

Array = np.ndarray

SCHEDULE_KINDS = ("heavy_ball", "nesterov_constant", "nesterov_varying", "manual")


@dataclass(frozen=True)
class Problem:
    """Inequality-constrained program ``min f(x)  s.t.  g(x) >= 0``.

    Parameters
    ----------
    n : int
        Decision dimension.
    n_g : int
        Number of inequality constraints.
    f : callable
        Objective oracle ``x -> (value, gradient)``.
    g : callable
        Constraint-value oracle ``x -> vector of length n_g``.
    g_grad : callable
        Row oracle ``(x, i) -> grad g_i(x)`` for a 0-based constraint index.
        Rows are fetched lazily so that solvers touch only the constraints
        they need at the current iterate.
    g_jac : callable, optional
        Batched row oracle ``(x, indices) -> (m, n) array``; purely a fast
        path, must agree with ``g_grad`` row by row.

    Oracles must behave as pure functions of ``x``; solver runs may call them
    concurrently from several threads.
    """

    n: int
    n_g: int
    f: Callable[[Array], tuple[float, Array]]
    g: Callable[[Array], Array]
    g_grad: Callable[[Array, int], Array]
    g_jac: Callable[[Array, Array], Array] | None = None

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError(f"decision dimension must be positive, got {self.n}")
        if self.n_g < 0:
            raise ValueError(f"constraint count must be nonnegative, got {self.n_g}")

    def g_rows(self, x: Array, indices) -> Array:
        """Stack the constraint gradient rows for ``indices`` into an (m, n) array."""
        indices = np.asarray(indices, dtype=int)
        if indices.size == 0:
            return np.zeros((0, self.n))
        if self.g_jac is not None:
            return np.asarray(self.g_jac(x, indices), dtype=float)
        return np.stack([np.asarray(self.g_grad(x, int(i)), dtype=float) for i in indices])


def quadratic_problem(Q: Array, c: Array, A: Array | None = None, b: Array | None = None) -> Problem:
    """Problem with f(x) = x'Qx/2 + c'x and affine constraints A x - b >= 0."""
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    n = c.size
    if A is None:
        A = np.zeros((0, n))
        b = np.zeros(0)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)

    def f(x):
        Qx = Q @ x
        return 0.5 * float(x @ Qx) + float(c @ x), Qx + c

    return Problem(
        n=n,
        n_g=A.shape[0],
        f=f,
        g=lambda x: A @ x - b,
        g_grad=lambda x, i: A[i],
        g_jac=lambda x, idx: A[idx],
    )


@dataclass(frozen=True)
class IterateState:
    """Solver state: position ``x``, momentum ``u``, iteration ``k``, step ``T``."""

    x: Array
    u: Array
    k: int = 0
    T: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        if self.x.shape != self.u.shape:
            raise ValueError("position and momentum must have the same length")
        if self.k < 0:
            raise ValueError("iteration counter must be nonnegative")
        if not self.T > 0:
            raise ValueError("step size must be positive")


@dataclass(frozen=True)
class VelocityCone:
    """Polyhedral increment set {v : rows @ v >= rhs}.

    ``source[j]`` is the 0-based index of the constraint that produced row j.
    """

    rows: Array
    rhs: Array
    source: Array

    def __post_init__(self):
        object.__setattr__(self, "rows", np.atleast_2d(np.asarray(self.rows, dtype=float)))
        object.__setattr__(self, "rhs", np.asarray(self.rhs, dtype=float))
        object.__setattr__(self, "source", np.asarray(self.source, dtype=int))
        if self.rows.shape[0] != self.rhs.size or self.rhs.size != self.source.size:
            raise ValueError("rows, rhs and source must agree in length")
        if self.source.size != np.unique(self.source).size:
            raise ValueError("source indices must be distinct")

    @property
    def m(self) -> int:
        return self.rhs.size

    def slack(self, v: Array) -> Array:
        return self.rows @ v - self.rhs if self.m else np.zeros(0)


@dataclass(frozen=True)
class ConstantStep:
    """Constant step size schedule."""

    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("step size must be positive")

    def step_size(self, k: int) -> float:
        return self.T

    @property
    def max_step(self) -> float:
        return self.T


@dataclass(frozen=True)
class DiminishingStep:
    """Diminishing steps T_k = T0 / max(k, 1)**s.

    The convergence guarantee for the diminishing-step mode covers
    s in (1/2, 1); s = 1 is accepted but sits outside that guarantee.
    """

    T0: float
    s: float = 0.75

    def __post_init__(self):
        if not self.T0 > 0:
            raise ValueError("initial step size must be positive")
        if not 0.5 < self.s <= 1.0:
            raise ValueError("diminishing exponent must lie in (1/2, 1]")

    def step_size(self, k: int) -> float:
        return self.T0 / max(k, 1) ** self.s

    @property
    def max_step(self) -> float:
        return self.T0


Schedule = Union[ConstantStep, DiminishingStep]


class ResolvedParams(NamedTuple):
    """Damping parameters and step size in effect at one iteration."""

    alpha: float
    delta: float
    beta: float
    T: float


def schedule_params(kind: str, k: int, mu: float = 1.0, T: float = 1.0) -> tuple[float, float, float]:
    """Damping parameters (alpha, delta, beta) for the named schedule.

    The varying schedule is evaluated at t = k*T.  ``mu`` is the strong
    convexity constant of the objective *after* normalizing its gradient
    Lipschitz constant to one; this function never rescales it.
    """
    if kind in ("heavy_ball", "nesterov_constant"):
        if not 0.0 < mu <= 1.0:
            raise ValueError(
                f"normalized strong convexity must lie in (0, 1], got {mu}; "
                "divide by the gradient Lipschitz constant first"
            )
        rmu = math.sqrt(mu)
        if kind == "heavy_ball":
            return rmu, rmu, 0.0
        return rmu - mu / 2.0, rmu / (1.0 + rmu), (1.0 - rmu) / (1.0 + rmu)
    if kind == "nesterov_varying":
        t = k * T
        return 2.0 / (t + 3.0), 1.5 / (t + 3.0), t / (t + 3.0)
    raise ValueError(f"unknown schedule kind {kind!r}")


@dataclass(frozen=True)
class SolverParams:
    """Parameters of the momentum schemes.

    With ``schedule_kind="manual"`` the stored ``alpha``, ``delta``, ``beta``
    are used as given.  The named kinds take (alpha, delta) from
    :func:`schedule_params`; for the two Nesterov kinds the extrapolation
    weight is rescaled to its discrete-time form ``beta = T*(1 - 2*delta*T)``,
    while heavy ball keeps ``beta = 0`` (its defining property).

    ``mu`` is interpreted in normalized units (objective 1-smooth); callers
    must divide the raw strong convexity constant by the gradient Lipschitz
    constant themselves.
    """

    schedule: Schedule
    alpha: float = 1.0
    delta: float = 1.0
    beta: float = 0.0
    eps_restitution: float = 0.0
    eps_const: float = 0.0
    schedule_kind: str = "manual"
    mu: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.delta < 0 or self.beta < 0:
            raise ValueError("damping parameters must be nonnegative")
        if not 0.0 <= self.eps_restitution < 1.0:
            raise ValueError("restitution coefficient must lie in [0, 1)")
        if self.eps_const < 0:
            raise ValueError("activation tolerance must be nonnegative")
        if self.schedule_kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.schedule_kind!r}")
        if self.schedule_kind == "manual" and self.alpha * self.schedule.max_step > 1.0 + 1e-12:
            # Large steps can still converge in practice; flag rather than refuse.
            warnings.warn(
                f"alpha*T = {self.alpha * self.schedule.max_step:.3g} exceeds 1; "
                "constraint-violation decay is no longer monotone",
                stacklevel=2,
            )

    def at(self, k: int) -> ResolvedParams:
        """Resolve (alpha, delta, beta, T) for iteration ``k``."""
        T = self.schedule.step_size(k)
        if self.schedule_kind == "manual":
            return ResolvedParams(self.alpha, self.delta, self.beta, T)
        alpha, delta, beta = schedule_params(self.schedule_kind, k, self.mu, T)
        if self.schedule_kind != "heavy_ball":
            beta = T * (1.0 - 2.0 * delta * T)
        return ResolvedParams(alpha, delta, beta, T)


def constraint_velocity(problem: Problem, x: Array, u: Array, i: int, alpha: float) -> float:
    """Velocity of constraint i at (x, u): grad g_i(x)^T u + alpha * g_i(x).

    Nonnegativity of this quantity makes the violation of constraint i decay
    at rate alpha along the trajectory.
    """
    if not 0 <= i < problem.n_g:
        raise IndexError(f"constraint index {i} out of range [0, {problem.n_g})")
    row = np.asarray(problem.g_grad(x, i), dtype=float)
    return float(row @ u + alpha * problem.g(x)[i])


def build_local_cone(problem: Problem, state: IterateState, params: SolverParams) -> VelocityCone:
    """Velocity cone over the currently violated constraints.

    A row is added for every i with g_i(x) <= eps_const.  Its right-hand side
    carries the restitution term: the post-step velocity must satisfy
    gamma_i >= -eps * min(gamma_i(x, u), 0), which reverses the fraction
    ``eps`` of the incoming normal velocity.
    """
    alpha = params.at(state.k).alpha
    eps = params.eps_restitution
    g = np.asarray(problem.g(state.x), dtype=float)
    idx = np.flatnonzero(g <= params.eps_const)
    rows = problem.g_rows(state.x, idx)
    if idx.size == 0:
        return VelocityCone(np.zeros((0, problem.n)), np.zeros(0), idx)
    gamma_in = rows @ state.u + alpha * g[idx]
    rhs = -alpha * g[idx] - eps * np.minimum(gamma_in, 0.0)
    return VelocityCone(rows, rhs, idx)


def build_global_cone(problem: Problem, state: IterateState, params: SolverParams) -> VelocityCone:
    """Velocity cone over all constraints, linearized at the extrapolated point.

    Rows are evaluated at y = x + beta*u; the right-hand side absorbs the
    second-order Taylor remainder of g between x and y so that the linear
    rate of violation decay is preserved despite the shifted linearization:

        rhs_i = -alpha*g_i(x) - (g_i(y) - g_i(x) - grad g_i(y)^T beta*u) / T
    """
    alpha, _, beta, T = params.at(state.k)
    x, u = state.x, state.u
    y = x + beta * u
    idx = np.arange(problem.n_g)
    rows = problem.g_rows(y, idx)
    g_x = np.asarray(problem.g(x), dtype=float)
    if problem.n_g == 0:
        return VelocityCone(np.zeros((0, problem.n)), np.zeros(0), idx)
    g_y = np.asarray(problem.g(y), dtype=float)
    curvature = g_y - g_x - rows @ (beta * u)
    rhs = -alpha * g_x - curvature / T
    return VelocityCone(rows, rhs, idx)


def stationarity_residual(problem: Problem, x: Array, eps_const: float = 0.0) -> tuple[float, Array]:
    """First-order stationarity residual and its certifying multipliers.

    Returns ``min_{lam >= 0} |grad f(x) - sum_i lam_i grad g_i(x)|`` with the
    minimization supported on the active set {i : g_i(x) <= eps_const}, plus
    the minimizing multipliers as a full-length vector (zero off the active
    set).  The nonnegative least-squares problem is solved through the dual
    active-set projection: projecting grad f onto the polar of the cone
    spanned by the active gradient rows yields the residual vector, and the
    projection multipliers are exactly the sought lam.
    """
    from .polyproj import project  # deferred: polyproj depends on this module

    _, grad = problem.f(x)
    grad = np.asarray(grad, dtype=float)
    g = np.asarray(problem.g(x), dtype=float)
    lam = np.zeros(problem.n_g)
    active = np.flatnonzero(g <= eps_const)
    if active.size == 0:
        return float(np.linalg.norm(grad)), lam
    rows = problem.g_rows(x, active)
    polar = VelocityCone(-rows, np.zeros(active.size), active)
    res = project(grad, polar, tol=1e-10)
    lam[active] = res.multipliers
    return float(np.linalg.norm(res.v)), lam


def lagrangian_value(problem: Problem, x: Array, multipliers: Array) -> float:
    """f(x) - multipliers @ g(x) for a fixed multiplier vector."""
    value, _ = problem.f(x)
    return float(value - np.asarray(multipliers) @ problem.g(x))
