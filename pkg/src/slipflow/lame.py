"""Discrete viscous momentum operator with slip walls, and the linear step.

The momentum rows at interior nodes are exact compositions of the shared
difference operators (axial convection, vector Laplacian, gradient of the
divergence), so residuals reconstructed later through field calculus agree
with what was solved.  Boundary rows replace the PDE rows: the normal
velocity component on every face is pinned to zero and eliminated exactly,
tangential components carry the reduced slip row

    mu * d(u_t)/dn + friction * u_t = B_t,

which on a flat face with the normal component pinned is identical to the
full traction form.  On edge nodes each component normal to a containing
face is pinned; a component tangential to several faces averages their
slip rows.

The linear step couples this operator to the continuity row either by
alternating with the characteristics solver (split mode) or in one block
Krylov solve with donor-cell upwinding of the density (monolithic mode).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .grid import Grid, BoundaryFrames
from .fields import (
    ScalarField,
    VectorField,
    NormKind,
    norm,
    diff1,
    laplacian_array,
    grad_array,
    grad_div_array,
    onesided_normal_d1,
    zeros_vector,
    zeros_scalar,
)
from .krylov import KrylovConfig, krylov_solve
from .transport import make_transport_field, apply_S
from .material import FlowParams


@dataclass(frozen=True, eq=False)
class LameOperator:
    """Assembled stencil action and boundary bookkeeping.

    pinned marks Dirichlet rows (normal components on their faces, all of
    them homogeneous), robin_cnt counts how many faces contribute a slip
    row to a component at a node, diag is the Jacobi diagonal of the full
    row set.
    """

    grid: Grid
    frames: BoundaryFrames
    params: FlowParams
    pinned: np.ndarray
    robin_cnt: np.ndarray
    diag: np.ndarray

    @property
    def robin_mask(self) -> np.ndarray:
        return (self.robin_cnt > 0) & ~self.pinned


def build_lame_operator(grid: Grid, frames: BoundaryFrames, params: FlowParams) -> LameOperator:
    shape = (3, *grid.shape)
    pinned = np.zeros(shape, dtype=bool)
    cnt = np.zeros(shape, dtype=np.int8)
    for face in frames.faces:
        pinned[face.axis][face.slicer()] = True
        for t_ax in face.in_axes:
            cnt[t_ax][face.slicer()] += 1

    h = grid.h
    diag = np.empty(shape)
    lap_diag = 2.0 * sum(1.0 / ha**2 for ha in h)
    for c in range(3):
        # -(nu+mu) d_c d_c u_c enters through the diagonal second difference
        diag[c] = params.mu * lap_diag + (params.nu + params.mu) * 2.0 / h[c] ** 2

    robin_diag = np.zeros(shape)
    for face in frames.faces:
        for t_ax in face.in_axes:
            robin_diag[t_ax][face.slicer()] += (
                params.mu * 1.5 / h[face.axis] + params.friction
            )
    m = (cnt > 0) & ~pinned
    diag[m] = robin_diag[m] / cnt[m]
    diag[pinned] = 1.0
    return LameOperator(grid, frames, params, pinned, cnt, diag)


def _momentum_rows(op: LameOperator, u: np.ndarray) -> np.ndarray:
    """Full row action on a (3, *shape) velocity array."""
    g = op.grid
    mu, nu = op.params.mu, op.params.nu
    gd = grad_div_array(u, g)
    out = np.stack(
        [
            diff1(u[c], g.h[0], 0)
            - mu * laplacian_array(u[c], g)
            - (nu + mu) * gd[c]
            for c in range(3)
        ]
    )
    robin = np.zeros_like(out)
    for face in op.frames.faces:
        sl = face.slicer()
        for t_ax in face.in_axes:
            robin[t_ax][sl] += (
                mu * onesided_normal_d1(u[t_ax], face, g.h[face.axis])
                + op.params.friction * u[t_ax][sl]
            )
    m = op.robin_mask
    out[m] = robin[m] / op.robin_cnt[m]
    out[op.pinned] = u[op.pinned]
    return out


def apply_lame(op: LameOperator, u: VectorField) -> VectorField:
    """Row-wise operator action (PDE rows inside, boundary rows on the
    boundary) as a field."""
    return VectorField(op.grid, _momentum_rows(op, u.values))


def _momentum_rhs(op: LameOperator, forcing: np.ndarray, slip_data: Mapping[str, np.ndarray]) -> np.ndarray:
    """Right-hand side matching the row layout of _momentum_rows."""
    b = np.array(forcing, dtype=float)
    racc = np.zeros_like(b)
    for face in op.frames.faces:
        sl = face.slicer()
        rows = slip_data[face.name]
        for i, t_ax in enumerate(face.in_axes):
            racc[t_ax][sl] += rows[i]
    m = op.robin_mask
    b[m] = racc[m] / op.robin_cnt[m]
    b[op.pinned] = 0.0
    return b


def solve_momentum(
    op: LameOperator,
    forcing: np.ndarray,
    slip_data: Mapping[str, np.ndarray],
    cfg: KrylovConfig = KrylovConfig(),
    x0: VectorField | None = None,
) -> tuple[VectorField, int, float]:
    """Solve the slip-wall momentum system for a given volume forcing."""
    g = op.grid
    free = ~op.pinned.reshape(-1)
    b = _momentum_rhs(op, forcing, slip_data).reshape(-1)[free]
    full = np.zeros(3 * g.n_nodes)

    def act(y: np.ndarray) -> np.ndarray:
        full[free] = y
        rows = _momentum_rows(op, full.reshape(3, *g.shape))
        return rows.reshape(-1)[free]

    start = None
    if x0 is not None:
        start = x0.values.reshape(-1)[free]
    y, iters, res = krylov_solve(act, b, cfg, diag=op.diag.reshape(-1)[free], x0=start)
    sol = np.zeros(3 * g.n_nodes)
    sol[free] = y
    return VectorField(g, sol.reshape(3, *g.shape)), iters, res


# ---------------------------------------------------------------------------
# donor-cell upwinding for the monolithic continuity row

def upwind_derivative(w: np.ndarray, speed: np.ndarray, h: float, axis: int) -> np.ndarray:
    """First derivative of w biased against the local flow direction; at a
    wall slab the only available one-sided difference is used (the normal
    speed vanishes there in the admissible regime)."""
    v = np.moveaxis(w, axis, 0)
    d = (v[1:] - v[:-1]) / h
    back = np.concatenate([d[:1], d], axis=0)
    fwd = np.concatenate([d, d[-1:]], axis=0)
    sel = np.where(np.moveaxis(speed, axis, 0) > 0.0, back, fwd)
    return np.moveaxis(sel, 0, axis)


@dataclass(frozen=True, eq=False)
class _MonolithicSystem:
    op: LameOperator
    velocity: np.ndarray      # u~ on nodes, (3, *shape)
    gamma: float
    w_known: np.ndarray       # bool (shape): Dirichlet density rows
    diag: np.ndarray          # (4, *shape)

    def rows(self, state: np.ndarray) -> np.ndarray:
        g = self.op.grid
        u = state[:3]
        w = state[3]
        out = np.empty_like(state)
        out[:3] = _momentum_rows(self.op, u)
        pde = ~(self.op.pinned | self.op.robin_mask)
        gw = grad_array(w, g)
        out[:3][pde] += self.gamma * gw[pde]
        div = sum(diff1(u[a], g.h[a], a) for a in range(3))
        out[3] = div + sum(
            self.velocity[a] * upwind_derivative(w, self.velocity[a], g.h[a], a)
            for a in range(3)
        )
        out[3][self.w_known] = w[self.w_known]
        return out


def _build_monolithic(op: LameOperator, velocity: np.ndarray, gamma: float) -> _MonolithicSystem:
    g = op.grid
    w_known = np.zeros(g.shape, dtype=bool)
    w_known[0, :, :] = True
    diag = np.empty((4, *g.shape))
    diag[:3] = op.diag
    diag[3] = sum(np.abs(velocity[a]) / g.h[a] for a in range(3))
    diag[3][w_known] = 1.0
    return _MonolithicSystem(op, velocity, gamma, w_known, diag)


@dataclass(frozen=True, eq=False)
class LinearStepResult:
    u: VectorField
    w: ScalarField
    inner_iterations: int
    linear_residual: float
    mode: str


def solve_linear_step(
    grid: Grid,
    frames: BoundaryFrames,
    params: FlowParams,
    convect: VectorField,
    forcing: VectorField,
    continuity_forcing: ScalarField,
    slip_data: Mapping[str, np.ndarray],
    w_in: np.ndarray,
    mode: str = "split",
    krylov_cfg: KrylovConfig = KrylovConfig(),
    inner_tol: float = 1e-11,
    max_sweeps: int = 200,
    start: tuple[VectorField, ScalarField] | None = None,
) -> LinearStepResult:
    """Solve the coupled linear system for (u, w) at one outer iteration.

    convect is the perturbation part of the advecting velocity (outer
    iterate plus lifted data); the transport speed is e1 + convect.  start
    warm-starts the inner iteration (the result does not depend on it).
    """
    tf_values = convect.values.copy()
    tf_values[0] += 1.0
    tf = make_transport_field(grid, tf_values)
    op = build_lame_operator(grid, frames, params)
    gamma = params.pressure.gamma

    if mode == "split":
        if start is not None:
            u = VectorField(grid, start[0].values.copy())
            w = ScalarField(grid, start[1].values.copy())
        else:
            u = zeros_vector(grid)
            w = zeros_scalar(grid)
        total_iters = 0
        res = 0.0
        for _ in range(max_sweeps):
            rhs_u = forcing.values - gamma * grad_array(w.values, grid)
            u_new, iters, res = solve_momentum(op, rhs_u, slip_data, krylov_cfg, x0=u)
            total_iters += iters
            src = continuity_forcing.values - sum(
                diff1(u_new.values[a], grid.h[a], a) for a in range(3)
            )
            w_new = apply_S(tf, ScalarField(grid, src), w_in)
            delta = norm(
                VectorField(grid, u_new.values - u.values), NormKind.h1()
            ) + norm(ScalarField(grid, w_new.values - w.values), NormKind.linf_l2())
            u, w = u_new, w_new
            if delta < inner_tol:
                break
        else:
            raise RuntimeError(
                f"linear step alternation did not reach {inner_tol:g} "
                f"within {max_sweeps} sweeps (last change {delta:.3e})"
            )
        return LinearStepResult(u, w, total_iters, res, "split")

    if mode == "monolithic":
        sys = _build_monolithic(op, tf_values, gamma)
        known = np.zeros((4, *grid.shape))
        known[3][0, :, :] = w_in
        free = np.ones((4, *grid.shape), dtype=bool)
        free[:3] = ~op.pinned
        free[3] = ~sys.w_known
        free_flat = free.reshape(-1)

        b = np.empty((4, *grid.shape))
        b[:3] = _momentum_rhs(op, forcing.values, slip_data)
        b[3] = continuity_forcing.values
        b[3][0, :, :] = w_in
        rhs = (b - sys.rows(known)).reshape(-1)[free_flat]

        buf = np.zeros(4 * grid.n_nodes)

        def act(y: np.ndarray) -> np.ndarray:
            buf[free_flat] = y
            return sys.rows(buf.reshape(4, *grid.shape)).reshape(-1)[free_flat]

        x0 = None
        if start is not None:
            init = np.empty((4, *grid.shape))
            init[:3] = start[0].values
            init[3] = start[1].values
            x0 = init.reshape(-1)[free_flat]
        y, iters, res = krylov_solve(
            act, rhs, krylov_cfg, diag=sys.diag.reshape(-1)[free_flat], x0=x0
        )
        full = known.reshape(-1).copy()
        full[free_flat] += y
        state = full.reshape(4, *grid.shape)
        return LinearStepResult(
            VectorField(grid, state[:3]), ScalarField(grid, state[3]), iters, res, "monolithic"
        )

    raise ValueError(f"unknown linear step mode {mode!r} (use 'split' or 'monolithic')")
