"""Matrix-free stabilized bi-conjugate-gradient solver with Jacobi scaling.

Hand-rolled rather than delegated so the stopping rule, iteration count and
best-residual reporting are exactly the ones the outer solver budgets for:
convergence means relative residual <= rtol in the unpreconditioned norm,
a zero right-hand side returns immediately, and failure carries the best
residual seen so the caller can tell near-miss from breakdown.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class KrylovConfig:
    """Stopping rule for the linear solves."""

    rel_tol: float = 1e-10
    max_iter: int | None = None  # default 10 * unknown count
    breakdown_tol: float = 1e-30

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1.0):
            raise ValueError(f"rel_tol must be in (0, 1), got {self.rel_tol!r}")
        if self.max_iter is not None and self.max_iter <= 0:
            raise ValueError("max_iter must be positive")


class KrylovError(RuntimeError):
    """Linear solve failed; carries the best relative residual reached."""

    def __init__(self, message: str, best_residual: float, iterations: int):
        super().__init__(f"{message} (best relative residual {best_residual:.3e} "
                         f"after {iterations} iterations)")
        self.best_residual = best_residual
        self.iterations = iterations


def krylov_solve(
    action: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    cfg: KrylovConfig = KrylovConfig(),
    diag: np.ndarray | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, int, float]:
    """Solve action(x) = rhs; returns (x, iterations, relative residual).

    diag is the operator's diagonal for Jacobi preconditioning; x0 warm
    starts the iteration.  Raises KrylovError when the cap is hit.
    """
    rhs = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(rhs)):
        raise ValueError("right-hand side contains non-finite values")
    b_norm = float(np.linalg.norm(rhs))
    if b_norm == 0.0:
        return np.zeros_like(rhs), 0, 0.0

    cap = cfg.max_iter if cfg.max_iter is not None else 10 * rhs.size
    scale = np.ones_like(rhs) if diag is None else 1.0 / np.asarray(diag, dtype=float)

    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    r = rhs - action(x) if x0 is not None else rhs.copy()
    res = float(np.linalg.norm(r)) / b_norm
    if res <= cfg.rel_tol:
        return x, 0, res

    r_hat = r.copy()
    rho_prev = 1.0
    alpha = 1.0
    omega = 1.0
    v = np.zeros_like(rhs)
    p = np.zeros_like(rhs)
    best = res

    for it in range(1, cap + 1):
        rho = float(r_hat @ r)
        if abs(rho) < cfg.breakdown_tol * b_norm * b_norm:
            # stagnated shadow residual: restart the recurrence at r
            r_hat = r.copy()
            rho = float(r_hat @ r)
            p.fill(0.0)
            v.fill(0.0)
            rho_prev = 1.0
            alpha = 1.0
            omega = 1.0
        beta = (rho / rho_prev) * (alpha / omega)
        p = r + beta * (p - omega * v)
        p_hat = scale * p
        v = action(p_hat)
        denom = float(r_hat @ v)
        if abs(denom) < cfg.breakdown_tol:
            raise KrylovError("solver breakdown (orthogonal search direction)", best, it)
        alpha = rho / denom
        s = r - alpha * v
        s_norm = float(np.linalg.norm(s)) / b_norm
        if s_norm <= cfg.rel_tol:
            x = x + alpha * p_hat
            return x, it, s_norm
        s_hat = scale * s
        t = action(s_hat)
        tt = float(t @ t)
        if tt < cfg.breakdown_tol:
            raise KrylovError("solver breakdown (zero stabilization step)", best, it)
        omega = float(t @ s) / tt
        x = x + alpha * p_hat + omega * s_hat
        r = s - omega * t
        res = float(np.linalg.norm(r)) / b_norm
        best = min(best, res)
        if res <= cfg.rel_tol:
            return x, it, res
        rho_prev = rho

    raise KrylovError("linear solve did not converge within the iteration cap", best, cap)
