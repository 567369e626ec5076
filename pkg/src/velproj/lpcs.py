"""lp-ball constrained least squares via weighted-simplex velocity steps.

The problem  min |A x - b|^2 / 2  s.t.  sum_i |x_i|^p <= nu  (0 < p <= 1) is
reformulated with slack variables xbar >= |x| so that every constraint is
smooth: -xbar <= x <= xbar and sum_i pw(xbar_i) <= nu, where pw is a C^1
approximation of t^p that is linear below a threshold.  Both momentum schemes
then reduce, through an orthogonal change of variables, to one projection
onto a weighted simplex per step: O(n log n) plus one A and one A^T apply.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .core import Array, Problem, ResolvedParams, SolverParams
from .polyproj import InfeasibleCone
from .rng import SplitMix64
from .wsimplex import _InfeasibleSimplex, _project


@dataclass(frozen=True)
class LpBall:
    """Constraint sum_i (|x_i|)^p <= nu with smoothing threshold delta."""

    p: float
    nu: float
    delta: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("exponent must lie in (0, 1]")
        if not self.nu > 0:
            raise ValueError("radius must be positive")
        if not self.delta > 0:
            raise ValueError("smoothing threshold must be positive")


def power_approx(x, ball: LpBall):
    """C^1 approximation of x**p: linear with slope p*delta**(p-1) below delta.

    Exact for p = 1.  For x >= delta the value is x**p - delta**p * (1 - p),
    which matches the linear branch in value and slope at the threshold.
    Accepts scalars or arrays.
    """
    scalar = np.ndim(x) == 0
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    slope = ball.p * ball.delta ** (ball.p - 1.0)
    out = slope * arr
    mask = arr >= ball.delta
    out[mask] = arr[mask] ** ball.p - ball.delta**ball.p * (1.0 - ball.p)
    return float(out[0]) if scalar else out


def power_approx_grad(x, ball: LpBall):
    """Derivative of :func:`power_approx`: p*x**(p-1) above the threshold,
    the constant p*delta**(p-1) below.  Always finite and nonnegative."""
    scalar = np.ndim(x) == 0
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    slope = ball.p * ball.delta ** (ball.p - 1.0)
    out = np.full(arr.shape, slope)
    mask = arr >= ball.delta
    out[mask] = ball.p * arr[mask] ** (ball.p - 1.0)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class CsState:
    """Iterate of the slack formulation: positions (x, xbar), momenta (u, ubar)."""

    x: Array
    xbar: Array
    u: Array
    ubar: Array
    k: int = 0

    def __post_init__(self):
        for name in ("x", "xbar", "u", "ubar"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.x.size
        if not (self.xbar.size == self.u.size == self.ubar.size == n):
            raise ValueError("all state vectors must share one length")

    def stacked(self) -> tuple[Array, Array]:
        """Position and momentum as vectors of the 2n-dimensional problem."""
        return np.concatenate([self.x, self.xbar]), np.concatenate([self.u, self.ubar])


def initial_state(x0: Array) -> CsState:
    """Start at x0 with xbar = |x0| and zero momentum."""
    x0 = np.asarray(x0, dtype=float)
    z = np.zeros_like(x0)
    return CsState(x=x0, xbar=np.abs(x0), u=z.copy(), ubar=z.copy(), k=0)


class DenseOperator:
    """Dense matrix with apply counters and a cached squared spectral norm."""

    def __init__(self, A: Array, norm_sq: float | None = None):
        self.A = np.asarray(A, dtype=float)
        self._norm_sq = norm_sq
        self.n_apply = 0
        self.n_apply_t = 0

    @property
    def shape(self):
        return self.A.shape

    def apply(self, x: Array) -> Array:
        self.n_apply += 1
        return self.A @ x

    def apply_t(self, y: Array) -> Array:
        self.n_apply_t += 1
        return self.A.T @ y

    @property
    def norm_sq(self) -> float:
        if self._norm_sq is None:
            self._norm_sq = operator_norm_sq(self.A)
        return self._norm_sq


def as_operator(A) -> DenseOperator:
    return A if isinstance(A, DenseOperator) else DenseOperator(A)


def operator_norm_sq(A: Array, iters: int = 30, tol: float = 1e-6, seed: int = 9) -> float:
    """|A|^2 by power iteration on A^T A with a seeded start vector."""
    A = np.asarray(A, dtype=float)
    v = SplitMix64(seed).normal(A.shape[1])
    nv = np.linalg.norm(v)
    if nv == 0.0 or A.size == 0:
        return 0.0
    v /= nv
    estimate = 0.0
    for _ in range(iters):
        z = A.T @ (A @ v)
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return 0.0
        if abs(nz - estimate) <= tol * nz:
            return float(nz)
        estimate = nz
        v = z / nz
    return float(estimate)


class CsStepInfo(NamedTuple):
    """Per-step diagnostics: worst cone slack of the new momentum, budget
    activity, and the velocity magnitude relevant to decay audits (the new
    momentum norm for the local scheme, the per-step displacement from the
    extrapolated point divided by T for the global scheme)."""

    cone_slack_min: float
    budget_active: bool
    velocity: float


def _change_of_variables(r, rbar, g1t, g2t, g3t, w, nonneg_mask):
    """Map the velocity program onto the weighted simplex and back.

    The substitution v = xi - xibar - (g1t - g2t)/2, vbar = xi + xibar -
    (g1t + g2t)/2 is orthogonal up to scaling, turns the paired halfspace
    rows into plain nonnegativity of (xi, xibar), and the budget row into
    w @ (xi, xibar) <= nubar.
    """
    q = np.concatenate([0.5 * (g1t + r + rbar), 0.5 * (g2t - r + rbar)])
    nubar = g3t + float(w @ (g1t + g2t)) / 2.0
    try:
        xi = _project(q, nonneg_mask, np.concatenate([w, w]), nubar)
    except _InfeasibleSimplex as exc:
        raise InfeasibleCone(
            "ball row incompatible with the bound rows at this iterate"
        ) from exc
    n = r.size
    head, tail = xi[:n], xi[n:]
    v = head - tail - 0.5 * (g1t - g2t)
    vbar = head + tail - 0.5 * (g1t + g2t)
    return v, vbar


def _local_full(op, b, state: CsState, ball: LpBall, params) -> tuple[CsState, CsStepInfo]:
    op = as_operator(op)
    alpha, delta, beta, T = _resolve(params, state.k)
    eps_const = params.eps_const if isinstance(params, SolverParams) else 0.0
    L = op.norm_sq
    x, xbar, u, ubar = state.x, state.xbar, state.u, state.ubar

    r = u - 2.0 * delta * T * u - T * op.apply_t(op.apply(x + beta * u) - b) / L
    rbar = ubar - 2.0 * delta * T * ubar

    g1t = alpha * (x + xbar)
    g2t = alpha * (xbar - x)
    g3t = alpha * (ball.nu - float(np.sum(power_approx(xbar, ball))))
    activation = alpha * eps_const  # g_i <= eps_const in scaled units
    w = np.zeros_like(xbar) if g3t > activation else power_approx_grad(xbar, ball)

    nonneg_mask = np.concatenate([g1t <= activation, g2t <= activation])
    v, vbar = _change_of_variables(r, rbar, g1t, g2t, g3t, w, nonneg_mask)

    new = CsState(x + T * v, xbar + T * vbar, v, vbar, state.k + 1)
    slacks = [np.inf]
    if np.any(nonneg_mask[: x.size]):
        slacks.append(float(np.min((v + vbar + g1t)[nonneg_mask[: x.size]])))
    if np.any(nonneg_mask[x.size :]):
        slacks.append(float(np.min((vbar - v + g2t)[nonneg_mask[x.size :]])))
    budget_active = g3t <= activation
    if budget_active:
        slacks.append(g3t - float(w @ vbar))
    info = CsStepInfo(
        cone_slack_min=min(slacks),
        budget_active=budget_active,
        velocity=float(np.linalg.norm(np.concatenate([v, vbar]))),
    )
    return new, info


def _global_full(op, b, state: CsState, ball: LpBall, params) -> tuple[CsState, CsStepInfo]:
    op = as_operator(op)
    alpha, delta, beta, T = _resolve(params, state.k)
    L = op.norm_sq
    x, xbar, u, ubar = state.x, state.xbar, state.u, state.ubar
    y, ybar = x + beta * u, xbar + beta * ubar

    r = u - 2.0 * delta * T * u - T * op.apply_t(op.apply(y) - b) / L
    rbar = ubar - 2.0 * delta * T * ubar

    w = power_approx_grad(ybar, ball)
    g1, g2 = x + xbar, xbar - x
    g3 = ball.nu - float(np.sum(power_approx(xbar, ball)))
    gy1, gy2 = y + ybar, ybar - y
    gy3 = ball.nu - float(np.sum(power_approx(ybar, ball)))

    g1t = alpha * g1 + (gy1 - g1 - beta * (u + ubar)) / T
    g2t = alpha * g2 + (gy2 - g2 - beta * (ubar - u)) / T
    g3t = alpha * g3 + (gy3 - g3 + beta * float(w @ ubar)) / T

    nonneg_mask = np.ones(2 * x.size, dtype=bool)
    v, vbar = _change_of_variables(r, rbar, g1t, g2t, g3t, w, nonneg_mask)

    new = CsState(x + T * v, xbar + T * vbar, v, vbar, state.k + 1)
    yz = np.concatenate([y, ybar])
    znew = np.concatenate([new.x, new.xbar])
    info = CsStepInfo(
        cone_slack_min=min(
            float(np.min(v + vbar + g1t)),
            float(np.min(vbar - v + g2t)),
            g3t - float(w @ vbar),
        ),
        budget_active=True,
        velocity=float(np.linalg.norm(znew - yz)) / T,
    )
    return new, info


def _resolve(params, k: int) -> ResolvedParams:
    if isinstance(params, SolverParams):
        return params.at(k)
    return ResolvedParams(*params)


def local_step(op, b, state: CsState, ball: LpBall, params) -> CsState:
    """One violated-constraints momentum step in closed form.

    Only the bound rows with g <= 0 and, when the ball is exceeded, the budget
    row enter the projection; in the interior the update is the plain
    unconstrained momentum recursion on (x, xbar).
    """
    return _local_full(op, b, state, ball, params)[0]


def global_step(op, b, state: CsState, ball: LpBall, params) -> CsState:
    """One all-constraints momentum step in closed form.

    Constraint rows are taken at the extrapolated point and their right-hand
    sides carry the curvature correction of the ball constraint.
    """
    return _global_full(op, b, state, ball, params)[0]


def gen_compressed_sensing(
    m: int, n: int, spikes: int, noise_scale: float, seed: int
) -> tuple[Array, Array, Array]:
    """Seeded sensing instance: A (m x n standard normal, row-major draw
    order), a spike vector with ``spikes`` distinct unit entries, and
    b = A @ x_true + noise_scale * eta with standard-normal eta.

    The stream order is A, then spike positions, then eta, all from one
    :class:`~velproj.rng.SplitMix64` stream, so instances are reproducible
    bit for bit from the seed.
    """
    if m <= 0 or n <= 0:
        raise ValueError("dimensions must be positive")
    if not 0 <= spikes <= n:
        raise ValueError("spike count must lie in [0, n]")
    rng = SplitMix64(seed)
    A = rng.normal(m * n).reshape(m, n)
    x_true = np.zeros(n)
    if spikes:
        x_true[rng.distinct_integers(spikes, n)] = 1.0
    b = A @ x_true + noise_scale * rng.normal(m)
    return A, b, x_true


def slack_problem(A, b, ball: LpBall, normalize: bool = True) -> Problem:
    """The slack-variable program as a generic :class:`Problem` over z = (x, xbar).

    Constraints are ordered xbar + x >= 0 (n rows), xbar - x >= 0 (n rows),
    then the ball budget.  With ``normalize`` the objective is scaled by
    1/|A|^2, matching the gradient step used by the closed-form schemes.
    """
    op = as_operator(A)
    b = np.asarray(b, dtype=float)
    n = op.shape[1]
    scale = op.norm_sq if normalize else 1.0

    def f(z):
        x = z[:n]
        resid = op.A @ x - b
        grad = np.concatenate([op.A.T @ resid, np.zeros(n)]) / scale
        return 0.5 * float(resid @ resid) / scale, grad

    def g(z):
        x, xbar = z[:n], z[n:]
        budget = ball.nu - float(np.sum(power_approx(xbar, ball)))
        return np.concatenate([xbar + x, xbar - x, [budget]])

    def g_grad(z, i):
        row = np.zeros(2 * n)
        if i < n:
            row[i] = 1.0
            row[n + i] = 1.0
        elif i < 2 * n:
            row[i - n] = -1.0
            row[i] = 1.0
        else:
            row[n:] = -power_approx_grad(z[n:], ball)
        return row

    def g_jac(z, indices):
        rows = np.zeros((len(indices), 2 * n))
        for j, i in enumerate(indices):
            if i < n:
                rows[j, i] = 1.0
                rows[j, n + i] = 1.0
            elif i < 2 * n:
                rows[j, i - n] = -1.0
                rows[j, i] = 1.0
            else:
                rows[j, n:] = -power_approx_grad(z[n:], ball)
        return rows

    return Problem(n=2 * n, n_g=2 * n + 1, f=f, g=g, g_grad=g_grad, g_jac=g_jac)


def save_instance(path, A: Array, b: Array, x_true: Array) -> None:
    """Write a sensing instance as text: named blocks with dimension headers,
    row-major values at 17 significant digits (lossless round trip)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    blocks = [("A", A), ("b", np.asarray(b, dtype=float).reshape(-1, 1)),
              ("x_true", np.asarray(x_true, dtype=float).reshape(-1, 1))]
    lines = ["# velproj sensing instance"]
    for name, mat in blocks:
        lines.append(f"matrix {name} {mat.shape[0]} {mat.shape[1]}")
        for row in mat:
            lines.append(" ".join(f"{value:.17g}" for value in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_instance(path) -> tuple[Array, Array, Array]:
    """Read an instance written by :func:`save_instance`."""
    blocks: dict[str, Array] = {}
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    pos = 0
    while pos < len(lines):
        tag, name, rows, cols = lines[pos].split()
        if tag != "matrix":
            raise ValueError(f"malformed instance file near line {pos}: {lines[pos]!r}")
        rows, cols = int(rows), int(cols)
        data = [lines[pos + 1 + i].split() for i in range(rows)]
        blocks[name] = np.array(data, dtype=float).reshape(rows, cols)
        pos += rows + 1
    return blocks["A"], blocks["b"].ravel(), blocks["x_true"].ravel()
