"""Exact Euclidean projection onto a small polyhedron {v : W v >= w}.

This is the inner quadratic program of every velocity-projection step.  The
row count is small by construction (only violated constraints enter), so a
dense dual active-set method is used: rows are added one at a time in order
of violation, multipliers are kept nonnegative by dropping blocking rows, and
termination produces an exact KKT certificate together with the dual
multipliers (the constraint forces).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .core import Array, VelocityCone

#: multipliers larger than this signal an unbounded dual ascent
DUAL_NORM_LIMIT = 1e12
#: relative Gram pivot below which active rows count as linearly dependent
PIVOT_TOL = 1e-12


class InfeasibleCone(Exception):
    """The cone contains no point; the dual ascent is unbounded.

    Raised when the constraint rows are contradictory, which signals a
    constraint-qualification failure at the current iterate.
    """


class MaxIterationsError(Exception):
    """The active-set loop exhausted its iteration budget without a certificate."""


class DegenerateConeWarning(UserWarning):
    """Linearly dependent active rows were resolved by a minimum-norm solve."""


@dataclass
class ProjectionResult:
    """Projection certificate.

    Invariants (up to the solve tolerance): ``multipliers >= 0`` with support
    ``active``; primal feasibility ``W v >= w``; stationarity
    ``v = r + W^T multipliers`` (the second term is the constraint force);
    and complementarity ``multipliers_j * (W_j v - w_j) = 0``.
    """

    v: Array
    multipliers: Array
    active: Array = field(default_factory=lambda: np.zeros(0, dtype=int))
    iterations: int = 0


def project_halfspace(r: Array, row: Array, rhs: float) -> ProjectionResult:
    """Closed-form projection onto a single halfspace {v : row @ v >= rhs}."""
    r = np.asarray(r, dtype=float)
    row = np.asarray(row, dtype=float)
    nrm2 = float(row @ row)
    if nrm2 == 0.0:
        raise ValueError("degenerate constraint: zero row")
    lam = max(0.0, (rhs - float(row @ r)) / nrm2)
    v = r + lam * row
    active = np.array([0]) if lam > 0 else np.zeros(0, dtype=int)
    return ProjectionResult(v=v, multipliers=np.array([lam]), active=active, iterations=1)


def _solve_active(W_act: Array, target: Array):
    """Multipliers making the active slacks vanish: (W W^T) z = target.

    Returns None when the system is inconsistent, which happens exactly when
    the dual objective is unbounded along the active rows (empty cone).
    """
    gram = W_act @ W_act.T
    diag_scale = max(float(np.max(np.diag(gram))), 1.0)
    try:
        chol = sla.cho_factor(gram, lower=True, check_finite=False)
        if float(np.min(np.diag(chol[0]))) ** 2 >= PIVOT_TOL * diag_scale:
            return sla.cho_solve(chol, target, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    # Dependent rows: fall back to the minimum-norm solution if one exists.
    z, _, _, _ = sla.lstsq(gram, target, check_finite=False)
    if np.linalg.norm(gram @ z - target) > 1e-8 * max(1.0, float(np.linalg.norm(target))):
        return None
    warnings.warn(
        "linearly dependent active rows; using minimum-norm multipliers",
        DegenerateConeWarning,
        stacklevel=3,
    )
    return z


def project(r: Array, cone: VelocityCone, tol: float = 1e-10, max_iter: int | None = None) -> ProjectionResult:
    """Project r onto {v : W v >= w}: argmin |v - r|^2 / 2 subject to the cone.

    Rows are added most-violated first (smallest index on ties); each inner
    iteration restores multiplier nonnegativity by dropping one blocking row.
    Raises :class:`InfeasibleCone` when no feasible point exists and
    :class:`MaxIterationsError` when the certificate is not reached within
    the iteration budget.
    """
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    r = np.asarray(r, dtype=float)
    W, w = cone.rows, cone.rhs
    m = cone.m
    if m == 0:
        return ProjectionResult(v=r.copy(), multipliers=np.zeros(0), iterations=0)
    if m == 1 and float(W[0] @ W[0]) > 0.0:
        return project_halfspace(r, W[0], float(w[0]))
    if max_iter is None:
        max_iter = 100 + 20 * m * m

    lam = np.zeros(m)
    active: list[int] = []
    v = r.copy()
    iterations = 0
    while True:
        slack = W @ v - w
        if active:
            slack[active] = np.inf  # active rows sit on the boundary
        j = int(np.argmin(slack))
        if slack[j] >= -tol:
            break
        active.append(j)
        while True:
            iterations += 1
            if iterations > max_iter:
                raise MaxIterationsError(
                    f"no KKT certificate after {iterations} active-set iterations"
                )
            W_act = W[active]
            z = _solve_active(W_act, w[active] - W_act @ r)
            if z is None:
                raise InfeasibleCone("contradictory constraint rows: empty velocity cone")
            if np.all(z >= 0.0):
                lam[:] = 0.0
                lam[active] = z
                break
            # Step toward z until the first multiplier hits zero, drop it.
            cur = lam[active]
            neg = z < 0.0
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(neg, cur / (cur - z), np.inf)
            theta = float(np.min(ratios))
            cur = cur + theta * (z - cur)
            cur[np.asarray(ratios) <= theta] = 0.0
            keep = cur > 0.0
            lam[:] = 0.0
            lam[np.asarray(active)[keep]] = cur[keep]
            active = [a for a, k in zip(active, keep) if k]
            if not active:
                break
        v = r + W[active].T @ lam[active] if active else r.copy()
        if np.linalg.norm(lam) > DUAL_NORM_LIMIT:
            raise InfeasibleCone("dual multipliers diverged: empty velocity cone")
    support = np.flatnonzero(lam > 0.0)
    return ProjectionResult(v=v, multipliers=lam, active=support, iterations=iterations)
