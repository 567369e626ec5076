"""Benchmark harness: baselines, experiment drivers, CSV trace persistence.

Two projection-based baselines (projected gradient and its accelerated
constant-step variant) are provided for comparison on problems whose feasible
set has a cheap Euclidean projection, together with drivers for the two
stock experiments:

* ``illustrative``: the scalar problem f(x) = (x+2)^2/2 with 0 <= x <= 2,
  traced in phase space from a grid of starts.
* ``compressed sensing``: seeded lp-ball constrained least squares.

Every trace file starts with ``# config=<hash> seed=<seed>`` and holds the
columns k,fx,min_g,unorm,kkt,elapsed_s printed at 17 significant digits, so
a run can be reproduced from the file header alone (elapsed_s is wall time
and is naturally not reproducible).
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .core import (
    Array,
    ConstantStep,
    IterateState,
    Problem,
    ResolvedParams,
    SolverParams,
    quadratic_problem,
    schedule_params,
)
from .lpcs import (
    CsState,
    DenseOperator,
    LpBall,
    _global_full,
    _local_full,
    gen_compressed_sensing,
    initial_state,
    power_approx,
)
from .rng import SplitMix64
from .solvers import StoppingRule, Trace, run
from .wsimplex import project_l1_ball

EXPERIMENTS = ("illustrative", "compressed_sensing", "custom_qp")
METHODS = ("cgd", "agd_local", "agd_global", "alg4", "alg5", "pgd", "apgd")
_CS_ONLY = ("alg4", "alg5", "pgd", "apgd")

TRACE_COLUMNS = "k,fx,min_g,unorm,kkt,elapsed_s"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run: what to solve, with which method and parameters."""

    experiment: str
    method: str
    out_dir: str = "."
    iters: int = 1000
    seed: int = 1
    trace_stride: int = 1
    # step size; None picks the experiment default
    T: float | None = None
    # compressed sensing instance
    m: int = 100
    n: int = 1000
    spikes: int = 13
    noise_scale: float = 0.5
    nu: float = 13.0
    p: float = 1.0
    delta_smooth: float | None = None
    # manual schedule override; None means the experiment default schedule
    params: SolverParams | None = None
    # custom_qp instance
    qp_rows: int = 30

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.experiment != "compressed_sensing" and self.method in _CS_ONLY:
            raise ValueError(f"method {self.method!r} requires the compressed_sensing experiment")
        if self.method in ("pgd", "apgd") and self.p != 1.0:
            raise ValueError("projection baselines need p = 1 (no closed-form lp projection)")
        if self.iters < 1:
            raise ValueError("iters must be positive")

    def config_hash(self) -> str:
        payload = repr(sorted(self.__dict__.items())).encode()
        return hashlib.sha256(payload).hexdigest()[:12]


# ---------------------------------------------------------------------------
# projection-based baselines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectedProblem:
    """Objective oracle plus Euclidean projector onto the feasible set."""

    f: Callable[[Array], tuple[float, Array]]
    project: Callable[[Array], Array]


def pgd_step(pp: ProjectedProblem, x: Array, T: float) -> Array:
    """x <- Project(x - T * grad f(x))."""
    _, grad = pp.f(x)
    return pp.project(x - T * np.asarray(grad, dtype=float))


@dataclass(frozen=True)
class ApgdState:
    """Accelerated projected gradient state: iterate, extrapolated point, and
    the momentum coefficient of the constant-step scheme."""

    x: Array
    y: Array
    alpha: float


def apgd_init(x0: Array, mu: float, L: float) -> ApgdState:
    """Start the constant-step scheme; alpha0 = sqrt(mu/L), or 1 when mu = 0
    (which reproduces the classical t-sequence of accelerated shrinkage)."""
    x0 = np.asarray(x0, dtype=float)
    alpha0 = math.sqrt(mu / L) if mu > 0 else 1.0
    return ApgdState(x=x0, y=x0.copy(), alpha=alpha0)


def apgd_step(pp: ProjectedProblem, state: ApgdState, mu: float, L: float) -> ApgdState:
    """One accelerated projected gradient step (constant step 1/L).

    The projected gradient step is taken at the extrapolated point y; the
    momentum coefficient follows alpha_{k+1}^2 = (1 - alpha_{k+1}) alpha_k^2
    + (mu/L) alpha_{k+1}.  With the identity projection this is exactly the
    unconstrained accelerated gradient recursion.
    """
    _, grad = pp.f(state.y)
    x_next = pp.project(state.y - np.asarray(grad, dtype=float) / L)
    q = mu / L
    a2 = state.alpha**2
    alpha_next = 0.5 * (q - a2 + math.sqrt((a2 - q) ** 2 + 4.0 * a2))
    beta = state.alpha * (1.0 - state.alpha) / (a2 + alpha_next)
    y_next = x_next + beta * (x_next - state.x)
    return ApgdState(x=x_next, y=y_next, alpha=alpha_next)


# ---------------------------------------------------------------------------
# trace persistence
# ---------------------------------------------------------------------------


def write_trace_csv(path, cfg_hash: str, seed: int, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# config={cfg_hash} seed={seed}", TRACE_COLUMNS]
    for row in rows:
        k, rest = row[0], row[1:]
        lines.append(str(int(k)) + "," + ",".join(f"{v:.17g}" for v in rest))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_trace_csv(path) -> dict[str, Array]:
    lines = Path(path).read_text().splitlines()
    names = lines[1].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[2:]])
    return {name: data[:, j] for j, name in enumerate(names)}


def loglog_slope(ks: Array, values: Array, window: tuple[int, int]) -> float:
    """Least-squares slope of log(values) against log(k) over a k-window.

    Nonpositive values are excluded (no logarithm); at least two surviving
    points are required.
    """
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = (ks >= window[0]) & (ks <= window[1]) & (values > 0) & (ks > 0)
    if keep.sum() < 2:
        raise ValueError("fewer than two positive samples in the fit window")
    lk = np.log(ks[keep])
    lv = np.log(values[keep])
    slope, _ = np.polyfit(lk, lv, 1)
    return float(slope)


# ---------------------------------------------------------------------------
# illustrative experiment
# ---------------------------------------------------------------------------


def illustrative_problem() -> Problem:
    """Scalar benchmark: f(x) = (x+2)^2/2 with constraints x >= 0, 2 - x >= 0."""
    return quadratic_problem([[1.0]], [2.0], [[1.0], [-1.0]], [0.0, -2.0])


def illustrative_params(T: float) -> SolverParams:
    return SolverParams(schedule=ConstantStep(T), alpha=0.5, delta=0.1, beta=0.0)


def _region_boundaries(alpha: float, x_lim=(-1.0, 3.0), u_lim=(-3.0, 3.0), samples=80):
    """Sampled boundaries of the sticking regions {g_i <= 0, gamma_i <= 0}.

    Region 1 (constraint x >= 0): the segments {x = 0, u <= 0} and
    {u = -alpha x, x <= 0}.  Region 2 (constraint 2 - x >= 0): {x = 2,
    u >= 0} and {u = alpha (2 - x), x >= 2}.
    """
    xs_lo = np.linspace(x_lim[0], 0.0, samples)
    xs_hi = np.linspace(2.0, x_lim[1], samples)
    u_lo = np.linspace(u_lim[0], 0.0, samples)
    u_hi = np.linspace(0.0, u_lim[1], samples)
    rows = []
    rows += [(1, "wall", 0.0, u) for u in u_lo]
    rows += [(1, "velocity", x, -alpha * x) for x in xs_lo]
    rows += [(2, "wall", 2.0, u) for u in u_hi]
    rows += [(2, "velocity", x, alpha * (2.0 - x)) for x in xs_hi]
    return rows


DEFAULT_START_GRID = tuple(
    (x0, u0) for x0 in (-0.5, 0.25, 1.0, 1.75, 2.5) for u0 in (-2.0, 0.0, 2.0)
)


def run_illustrative(cfg: ExperimentConfig, starts=DEFAULT_START_GRID, observer=None) -> list[Path]:
    """Trace the scalar problem from a grid of phase-space starts.

    Writes one (t, x, u) CSV per trajectory plus ``regions.csv`` with the
    sticking-region boundaries for overlay, and returns the written paths.
    """
    problem = illustrative_problem()
    T = cfg.T if cfg.T is not None else 0.1
    params = cfg.params if cfg.params is not None else illustrative_params(T)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for x0, u0 in starts:
        states = [IterateState(np.array([x0]), np.array([u0]), 0, T)]

        def collect(k, prev, new, cone, proj):
            states.append(new)
            if observer is not None:
                observer(k, prev, new, cone, proj)

        run(
            problem,
            cfg.method,
            params,
            StoppingRule(max_iter=cfg.iters, u_tol=1e-12, kkt_tol=1e-10),
            np.array([x0]),
            np.array([u0]),
            observer=collect,
        )
        path = out / f"traj_x{x0:+.2f}_u{u0:+.2f}.csv"
        lines = [f"# config={cfg.config_hash()} seed={cfg.seed}", "k,t,x,u"]
        t = 0.0
        for st in states:
            lines.append(f"{st.k},{t:.17g},{st.x[0]:.17g},{st.u[0]:.17g}")
            t += params.at(st.k).T
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    region_path = out / "regions.csv"
    region_rows = _region_boundaries(params.at(0).alpha)
    region_path.write_text(
        "\n".join(["region,segment,x,u"] + [f"{r},{s},{x:.17g},{u:.17g}" for r, s, x, u in region_rows])
        + "\n"
    )
    paths.append(region_path)
    return paths


# ---------------------------------------------------------------------------
# compressed sensing experiment
# ---------------------------------------------------------------------------


@dataclass
class CsRunResult:
    """In-memory trace of one compressed-sensing run."""

    ks: Array
    objective: Array
    constraint: Array  # nu - sum_i pw(xbar_i); negative means violated
    u_norm: Array
    path: Path | None
    final: object

    def violation(self) -> Array:
        return np.maximum(0.0, -self.constraint)


def cs_defaults(method: str, p: float) -> tuple[float, float]:
    """Default (T, delta_smooth) per method and exponent.

    For p = 1 the velocity schemes take their large stock steps (1.8 local,
    2.0 global); for p < 1 both use T = 1 with a coarser smoothing threshold
    1e-3.  Projection baselines always step with 1/L, encoded as T = 1.
    """
    if method == "alg4" and p == 1.0:
        return 1.8, 1e-6
    if method == "alg5" and p == 1.0:
        return 2.0, 1e-6
    if p < 1.0:
        return 1.0, 1e-3
    return 1.0, 1e-6


def _cs_schedule(cfg: ExperimentConfig, T: float):
    """Per-iteration parameters for the sparse-recovery schemes.

    Defaults to the varying damping sequence evaluated per iteration count
    (alpha_k = 2/(k+3), delta_k = 3/(2(k+3))) with the discrete extrapolation
    beta_k = T(1 - 2 delta_k T); a manual SolverParams in the config
    overrides it.
    """
    if cfg.params is not None:
        return lambda k: cfg.params.at(k)

    def resolve(k: int) -> ResolvedParams:
        alpha, delta, _ = schedule_params("nesterov_varying", k, T=1.0)
        return ResolvedParams(alpha, delta, T * (1.0 - 2.0 * delta * T), T)

    return resolve


def run_compressed_sensing(cfg: ExperimentConfig, observer=None, write: bool = True) -> CsRunResult:
    """Run one method on the seeded sensing instance and trace it.

    The CSV columns follow the shared trace layout; fx is the raw residual
    norm |Ax-b|^2/2 and min_g the ball slack nu - sum_i pw(xbar_i) (for the
    projection baselines, nu - |x|_1).  ``observer`` is called per step as
    ``observer(k, prev_state, new_state, info)`` for the velocity schemes.
    """
    A, b, _ = gen_compressed_sensing(cfg.m, cfg.n, cfg.spikes, cfg.noise_scale, cfg.seed)
    op = DenseOperator(A)
    T_default, delta_default = cs_defaults(cfg.method, cfg.p)
    T = cfg.T if cfg.T is not None else T_default
    delta_smooth = cfg.delta_smooth if cfg.delta_smooth is not None else delta_default
    ball = LpBall(p=cfg.p, nu=cfg.nu, delta=delta_smooth)
    L = op.norm_sq

    ks, objective, constraint, u_norm = [], [], [], []
    t_start = time.perf_counter()
    elapsed = []

    def record(k, x, xbar, u_vec):
        ks.append(k)
        resid = op.A @ x - b
        objective.append(0.5 * float(resid @ resid))
        constraint.append(ball.nu - float(np.sum(power_approx(xbar, ball))))
        u_norm.append(float(np.linalg.norm(u_vec)))
        elapsed.append(time.perf_counter() - t_start)

    if cfg.method in ("alg4", "alg5"):
        stepper = _local_full if cfg.method == "alg4" else _global_full
        resolve = _cs_schedule(cfg, T)
        state = initial_state(np.zeros(cfg.n))
        record(0, state.x, state.xbar, np.concatenate([state.u, state.ubar]))
        for k in range(cfg.iters):
            new, info = stepper(op, b, state, ball, resolve(k))
            if observer is not None:
                observer(k, state, new, info)
            state = new
            record(k + 1, state.x, state.xbar, np.concatenate([state.u, state.ubar]))
        final = state
    elif cfg.method in ("pgd", "apgd"):
        pp = ProjectedProblem(
            f=lambda x: _least_squares_oracle(op, b, x),
            project=lambda x: project_l1_ball(x, ball.nu),
        )
        if cfg.method == "pgd":
            x = np.zeros(cfg.n)
            record(0, x, np.abs(x), np.zeros(1))
            for k in range(cfg.iters):
                x_next = pgd_step(pp, x, 1.0 / L)
                record(k + 1, x_next, np.abs(x_next), (x_next - x) / (1.0 / L))
                x = x_next
            final = x
        else:
            st = apgd_init(np.zeros(cfg.n), 0.0, L)
            record(0, st.x, np.abs(st.x), np.zeros(1))
            for k in range(cfg.iters):
                new = apgd_step(pp, st, 0.0, L)
                record(k + 1, new.x, np.abs(new.x), (new.x - st.x) * L)
                st = new
            final = st
    else:
        raise ValueError(f"method {cfg.method!r} is not a compressed-sensing method")

    path = None
    if write:
        rows = [
            (k, fx, mg, un, float("nan"), el)
            for k, fx, mg, un, el in zip(ks, objective, constraint, u_norm, elapsed)
        ]
        rows = rows[:: max(cfg.trace_stride, 1)]
        path = write_trace_csv(
            Path(cfg.out_dir) / f"cs_{cfg.method}_p{cfg.p:g}_seed{cfg.seed}.csv",
            cfg.config_hash(),
            cfg.seed,
            rows,
        )
    return CsRunResult(
        ks=np.array(ks),
        objective=np.array(objective),
        constraint=np.array(constraint),
        u_norm=np.array(u_norm),
        path=path,
        final=final,
    )


def _least_squares_oracle(op: DenseOperator, b: Array, x: Array):
    resid = op.apply(x) - b
    return 0.5 * float(resid @ resid), op.apply_t(resid)


# ---------------------------------------------------------------------------
# custom QP experiment
# ---------------------------------------------------------------------------


def random_strongly_convex_qp(n: int, n_rows: int, seed: int, mu: float = 1.0, L: float = 10.0):
    """Seeded QP with eigenvalues spread over [mu, L] and strictly feasible 0.

    Returns (problem, mu, L).  Right-hand sides leave slacks in [0.1, 1) at
    the origin while the unconstrained minimizer sits outside, so a handful
    of rows bind at the solution.
    """
    rng = SplitMix64(seed)
    basis, _ = np.linalg.qr(rng.normal(n * n).reshape(n, n))
    Q = (basis * np.linspace(mu, L, n)) @ basis.T
    Q = 0.5 * (Q + Q.T)
    c = 2.0 * rng.normal(n)
    rows = rng.normal(n_rows * n).reshape(n_rows, n)
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    b = -(0.1 + 0.9 * rng.uniform(n_rows))
    return quadratic_problem(Q, c, rows, b), mu, L


def run_custom_qp(cfg: ExperimentConfig) -> tuple[Trace, Path]:
    """Run a velocity scheme on the seeded QP and persist its trace."""
    problem, mu, L = random_strongly_convex_qp(cfg.n, cfg.qp_rows, cfg.seed)
    T = cfg.T if cfg.T is not None else 1.0 / L
    params = cfg.params if cfg.params is not None else SolverParams(
        schedule=ConstantStep(T), alpha=mu, delta=np.sqrt(mu), beta=0.0, eps_const=1e-9
    )
    trace = run(
        problem,
        cfg.method,
        params,
        StoppingRule(max_iter=cfg.iters, u_tol=1e-10, kkt_tol=1e-8),
        x0=2.0 * np.ones(problem.n),
        kkt_every=max(cfg.trace_stride, 1) * 10,
    )
    rows = [
        (r.k, r.fx, r.min_g, r.u_norm, r.kkt, r.elapsed_s)
        for r in trace.records[:: max(cfg.trace_stride, 1)]
    ]
    path = write_trace_csv(
        Path(cfg.out_dir) / f"qp_{cfg.method}_seed{cfg.seed}.csv",
        cfg.config_hash(),
        cfg.seed,
        rows,
    )
    return trace, path
