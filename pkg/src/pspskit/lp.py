"""Bounded-variable linear programming by two-phase revised simplex.

Solves  min c'x  s.t.  A x = b,  l <= x <= u  (infinite bounds allowed).

The solver is deliberately self-contained and deterministic: fixed pricing
rules, fixed tie-breaking by lowest variable index, and Bland's rule engaged
after a degenerate-pivot budget so termination is guaranteed.  Every DC-OPF
evaluation in the toolkit runs through here, and oracle reproducibility
depends on two solves of the same problem taking the same pivot path.

Tolerances are fixed module constants, not parameters; loosening them would
change which plans an oracle run considers tied.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

FEASIBILITY_TOL = 1e-7   # |Ax - b|_inf on reported optimal solutions
BOUND_TOL = 1e-9         # bound violation on reported optimal solutions
_DUAL_TOL = 1e-9         # reduced-cost threshold for entering candidates
_PIVOT_TOL = 1e-10       # minimum acceptable pivot magnitude
_DEGEN_STEP = 1e-11      # step lengths below this count as degenerate
_REFACTOR_EVERY = 100


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpProblem:
    """min objective . x  subject to  a_eq x = b_eq  and  lower <= x <= upper."""

    objective: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        a = np.atleast_2d(np.asarray(self.a_eq, dtype=float))
        b = np.atleast_1d(np.asarray(self.b_eq, dtype=float))
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "a_eq", a)
        object.__setattr__(self, "b_eq", b)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        n = c.shape[0]
        if a.shape != (b.shape[0], n):
            raise ValueError(f"a_eq shape {a.shape} inconsistent with c ({n}) and b ({b.shape})")
        if lo.shape != (n,) or hi.shape != (n,):
            raise ValueError("bound vectors must match variable count")
        if not np.all(np.isfinite(c)):
            raise ValueError("objective must be finite")
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
            raise ValueError("constraint data must be finite")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("bounds may be infinite but not NaN")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    values: Optional[np.ndarray]
    objective_value: Optional[float]
    duals: Optional[np.ndarray]          # equality multipliers y (B' y = c_B)
    reduced_costs: Optional[np.ndarray]  # c - A' y
    iterations: int


# Nonbasic variable states.
_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, 3


class _Simplex:
    def __init__(self, problem: LpProblem):
        self.n = problem.objective.shape[0]
        self.m = problem.a_eq.shape[0]
        n, m = self.n, self.m

        # Extended system with one artificial per row.
        self.A = np.empty((m, n + m))
        self.A[:, :n] = problem.a_eq
        self.lower = np.concatenate([problem.lower, np.zeros(m)])
        self.upper = np.concatenate([problem.upper, np.full(m, np.inf)])
        self.b = problem.b_eq.copy()
        self.values = np.zeros(n + m)
        self.state = np.full(n + m, _AT_LOWER, dtype=np.int8)

        for j in range(n):
            if np.isfinite(self.lower[j]):
                self.state[j] = _AT_LOWER
                self.values[j] = self.lower[j]
            elif np.isfinite(self.upper[j]):
                self.state[j] = _AT_UPPER
                self.values[j] = self.upper[j]
            else:
                self.state[j] = _FREE
                self.values[j] = 0.0

        resid = self.b - self.A[:, :n] @ self.values[:n]
        sign = np.where(resid >= 0, 1.0, -1.0)
        self.A[:, n:] = np.diag(sign)
        self.basis = np.arange(n, n + m)
        self.state[n:] = _BASIC
        self.values[n:] = np.abs(resid)
        self.b_inv = np.diag(sign)  # inverse of the artificial basis

        self.iterations = 0
        self.pivots_since_refactor = 0
        self.degenerate_pivots = 0
        self.bland = False
        self.degen_budget = 5 * (m + n)
        self.retry_after_refactor = 0

    # -- linear algebra helpers -------------------------------------------

    def _refactor(self) -> None:
        basis_matrix = self.A[:, self.basis]
        self.b_inv = np.linalg.inv(basis_matrix)
        nonbasic = np.setdiff1d(np.arange(self.n + self.m), self.basis, assume_unique=False)
        resid = self.b - self.A[:, nonbasic] @ self.values[nonbasic]
        self.values[self.basis] = self.b_inv @ resid
        self.pivots_since_refactor = 0

    def _duals(self, cost: np.ndarray) -> np.ndarray:
        return self.b_inv.T @ cost[self.basis]

    # -- simplex iterations ------------------------------------------------

    def run(self, cost: np.ndarray, max_iter: int) -> str:
        """Minimize cost over the current basis; returns 'optimal'/'unbounded'."""
        movable = self.lower < self.upper
        movable |= self.state == _FREE
        while True:
            if self.iterations >= max_iter:
                raise RuntimeError("simplex iteration limit exceeded")
            y = self._duals(cost)
            d = cost - self.A.T @ y

            at_lo = (self.state == _AT_LOWER) & movable & (d < -_DUAL_TOL)
            at_up = (self.state == _AT_UPPER) & movable & (d > _DUAL_TOL)
            free = (self.state == _FREE) & (np.abs(d) > _DUAL_TOL)
            eligible = np.flatnonzero(at_lo | at_up | free)
            if eligible.size == 0:
                return "optimal"

            if self.bland:
                j = int(eligible[0])
            else:
                j = int(eligible[np.argmax(np.abs(d[eligible]))])
            direction = 1.0 if (self.state[j] != _AT_UPPER and d[j] < 0) else -1.0
            if self.state[j] == _AT_UPPER:
                direction = -1.0

            w = self.b_inv @ self.A[:, j]
            coeff = -direction * w  # d(x_B)/d(step)

            x_b = self.values[self.basis]
            lo_b = self.lower[self.basis]
            up_b = self.upper[self.basis]

            with np.errstate(divide="ignore", invalid="ignore"):
                limit_up = np.where(coeff > _PIVOT_TOL, (up_b - x_b) / coeff, np.inf)
                limit_lo = np.where(coeff < -_PIVOT_TOL, (lo_b - x_b) / coeff, np.inf)
            limits = np.minimum(limit_up, limit_lo)
            limits = np.maximum(limits, 0.0)  # degenerate but never negative

            span = self.upper[j] - self.lower[j]
            self_limit = span if np.isfinite(span) else np.inf

            min_basic = limits.min() if limits.size else np.inf
            step = min(min_basic, self_limit)
            if not np.isfinite(step):
                return "unbounded"

            self.iterations += 1
            if step <= _DEGEN_STEP:
                self.degenerate_pivots += 1
                if self.degenerate_pivots > self.degen_budget:
                    self.bland = True

            if self_limit <= min_basic and np.isfinite(self_limit):
                # Bound flip: variable crosses to its other bound, basis unchanged.
                self.values[self.basis] = x_b + coeff * step
                self.values[j] = self.upper[j] if self.state[j] == _AT_LOWER else self.lower[j]
                self.state[j] = _AT_UPPER if self.state[j] == _AT_LOWER else _AT_LOWER
                continue

            tie = np.flatnonzero(limits <= step + _DEGEN_STEP)
            leave_pos = int(tie[np.argmin(self.basis[tie])])
            leaving = int(self.basis[leave_pos])

            self.values[self.basis] = x_b + coeff * step
            self.values[j] = self.values[j] + direction * step
            # Classify where the leaving variable lands.
            if coeff[leave_pos] > 0:
                self.values[leaving] = self.upper[leaving]
                self.state[leaving] = _AT_UPPER
            else:
                self.values[leaving] = self.lower[leaving]
                self.state[leaving] = _AT_LOWER

            pivot = w[leave_pos]
            w_scale = float(np.abs(w).max()) if w.size else 1.0
            if abs(pivot) < _PIVOT_TOL or (
                abs(pivot) < 1e-9 * w_scale and self.retry_after_refactor == 0
            ):
                # Numerically unreliable pivot: rebuild the inverse and redo
                # the iteration from fresh data.  If the fresh data still
                # offers only a relatively small (but nonzero) pivot, take it;
                # the periodic refactorization repairs any resulting drift.
                self.retry_after_refactor += 1
                self._refactor()
                continue
            self.retry_after_refactor = 0
            self.b_inv[leave_pos, :] /= pivot
            others = np.arange(self.m) != leave_pos
            self.b_inv[others, :] -= np.outer(w[others], self.b_inv[leave_pos, :])

            self.basis[leave_pos] = j
            self.state[j] = _BASIC
            movable[j] = True

            self.pivots_since_refactor += 1
            if self.pivots_since_refactor >= _REFACTOR_EVERY:
                self._refactor()

    def drive_out_artificials(self) -> None:
        """After phase 1, pivot artificials out of the basis where possible."""
        for pos in range(self.m):
            var = self.basis[pos]
            if var < self.n:
                continue
            row = self.b_inv[pos, :] @ self.A[:, : self.n]
            candidates = np.flatnonzero(np.abs(row) > 1e-8)
            entering = -1
            for j in candidates:
                if self.state[j] != _BASIC and self.lower[j] < self.upper[j]:
                    entering = int(j)
                    break
            if entering < 0:
                continue  # redundant row; artificial stays pinned at zero
            # Zero-step exchange: the point x is unchanged, only the basis is.
            w = self.b_inv @ self.A[:, entering]
            pivot = w[pos]
            self.b_inv[pos, :] /= pivot
            others = np.arange(self.m) != pos
            self.b_inv[others, :] -= np.outer(w[others], self.b_inv[pos, :])
            self.basis[pos] = entering
            self.state[entering] = _BASIC
            self.state[var] = _AT_LOWER
            self.values[var] = 0.0


def solve_lp(problem: LpProblem) -> LpSolution:
    """Solve a bounded-variable LP; statuses are returned, never raised."""
    sim = _Simplex(problem)
    n, m = sim.n, sim.m
    max_iter = max(2000, 200 * (m + n))

    phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
    outcome = sim.run(phase1_cost, max_iter)
    if outcome != "optimal":  # phase 1 is bounded below by 0; cannot be unbounded
        raise RuntimeError("phase 1 reported unbounded; malformed problem data")
    infeas = float(sim.values[n:].sum())
    scale = max(1.0, float(np.abs(sim.b).max()) if m else 1.0)
    if infeas > 1e-9 * scale + 1e-9:
        return LpSolution(LpStatus.INFEASIBLE, None, None, None, None, sim.iterations)

    sim.drive_out_artificials()
    # Artificials are pinned for phase 2.
    sim.upper[n:] = 0.0
    sim.values[n:][sim.state[n:] != _BASIC] = 0.0

    phase2_cost = np.concatenate([problem.objective, np.zeros(m)])
    outcome = sim.run(phase2_cost, max_iter)
    if outcome == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, None, None, None, None, sim.iterations)

    sim._refactor()  # fresh inverse for clean values and duals
    x = sim.values[:n].copy()
    # Snap solved values onto bounds they sit within tolerance of.
    np.clip(x, problem.lower, problem.upper, out=x)
    resid = problem.a_eq @ x - problem.b_eq
    if resid.size and float(np.abs(resid).max()) > FEASIBILITY_TOL:
        raise RuntimeError(
            f"simplex finished with residual {float(np.abs(resid).max()):.3e} "
            f"above {FEASIBILITY_TOL}"
        )
    y = sim._duals(phase2_cost)
    reduced = problem.objective - problem.a_eq.T @ y
    objective = float(problem.objective @ x)
    return LpSolution(LpStatus.OPTIMAL, x, objective, y, reduced, sim.iterations)
