"""Steady transport along characteristics of the augmented axial flow.

The continuity update is solved in Lagrangian form: every node is traced
backward along d(X)/ds = -u~(X) until it reaches the inflow plane, carrying
the path integral of the source as an augmented ODE state.  The axial
component of u~ stays >= 1/2 in the admissible regime, so every
characteristic reaches x1 = 0 in travel parameter at most 2L.

An independent slice-marching discretization (upwind_march) of the same
equation is kept deliberately separate as a cross-check, and
jacobian_bound estimates how far the characteristic flow is from volume
preserving.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .fields import ScalarField, VectorField


@dataclass(frozen=True, eq=False)
class TransportField:
    """Full advecting velocity u~ = e1 + (ubar + u0) with its smallness
    certificate: sup of |u~1 - 1|, sup of the transverse components, and
    the largest wall-normal trace leak."""

    grid: Grid
    values: np.ndarray  # (3, n1+1, n2+1, n3+1)
    sup_axial_dev: float
    sup_transverse: float
    wall_trace_defect: float


def make_transport_field(grid: Grid, velocity: np.ndarray) -> TransportField:
    """Validate and certify a full advecting velocity array."""
    velocity = np.asarray(velocity, dtype=float)
    if velocity.shape != (3, *grid.shape):
        raise ValueError(f"transport velocity shape {velocity.shape} != (3, *{grid.shape})")
    if not np.all(np.isfinite(velocity)):
        raise ValueError("transport velocity contains non-finite values")
    ax_min = float(np.min(velocity[0]))
    if ax_min < 0.5:
        raise ValueError(
            f"axial transport speed fell to {ax_min:.6g} < 1/2; "
            "forward progress of characteristics is lost"
        )
    defect = max(
        float(np.max(np.abs(velocity[1][:, 0, :]))),
        float(np.max(np.abs(velocity[1][:, -1, :]))),
        float(np.max(np.abs(velocity[2][:, :, 0]))),
        float(np.max(np.abs(velocity[2][:, :, -1]))),
    )
    return TransportField(
        grid=grid,
        values=velocity,
        sup_axial_dev=float(np.max(np.abs(velocity[0] - 1.0))),
        sup_transverse=float(np.max(np.abs(velocity[1:]))),
        wall_trace_defect=defect,
    )


def transport_from_perturbation(ubar: VectorField, u0: VectorField) -> TransportField:
    """u~ built from the current outer iterate and the lifted data."""
    vals = ubar.values + u0.values
    vals = vals.copy()
    vals[0] += 1.0
    return make_transport_field(ubar.grid, vals)


@dataclass(frozen=True)
class CharacteristicTrace:
    """Backward trace of one point to the inflow plane."""

    seed: tuple[float, float, float]
    arrival: tuple[float, float, float]
    travel: float
    integral: float
    steps: int


# ---------------------------------------------------------------------------
# interpolation

def _trilinear(stack: np.ndarray, grid: Grid, pos: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of a (C, *grid.shape) stack at (N, 3)
    positions; positions are clamped componentwise to the closed duct."""
    idx = []
    frac = []
    for a in range(3):
        n = grid.config.cells[a]
        t = np.clip(pos[:, a] / grid.h[a], 0.0, float(n))
        i0 = np.minimum(t.astype(int), n - 1)
        idx.append(i0)
        frac.append(t - i0)
    i, j, k = idx
    t1, t2, t3 = frac
    out = np.zeros((stack.shape[0], pos.shape[0]))
    for d1 in (0, 1):
        w1 = t1 if d1 else 1.0 - t1
        for d2 in (0, 1):
            w2 = t2 if d2 else 1.0 - t2
            for d3 in (0, 1):
                w3 = t3 if d3 else 1.0 - t3
                out += (w1 * w2 * w3) * stack[:, i + d1, j + d2, k + d3]
    return out


def _bilinear_inflow(grid: Grid, w_in: np.ndarray, y2: np.ndarray, y3: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of inflow-plane data at arrival points."""
    vals = []
    for a, y in ((1, y2), (2, y3)):
        n = grid.config.cells[a]
        t = np.clip(y / grid.h[a], 0.0, float(n))
        i0 = np.minimum(t.astype(int), n - 1)
        vals.append((i0, t - i0))
    (j, t2), (k, t3) = vals
    return (
        (1 - t2) * (1 - t3) * w_in[j, k]
        + t2 * (1 - t3) * w_in[j + 1, k]
        + (1 - t2) * t3 * w_in[j, k + 1]
        + t2 * t3 * w_in[j + 1, k + 1]
    )


# ---------------------------------------------------------------------------
# backward tracing

def _clamp(grid: Grid, pos: np.ndarray) -> np.ndarray:
    ext = grid.config.extents
    for a in range(3):
        np.clip(pos[:, a], 0.0, ext[a], out=pos[:, a])
    return pos


def _rk4_step(tf: TransportField, payload: np.ndarray | None, pos: np.ndarray, s):
    """One backward step of size s (scalar or per-point); returns the new
    positions and the payload increment accumulated over the step."""
    g = tf.grid
    s = np.asarray(s, dtype=float)
    sc = s[:, None] if s.ndim else s

    def vel(p):
        return -_trilinear(tf.values, g, _clamp(g, p.copy())).T

    def pay(p):
        if payload is None:
            return 0.0
        return _trilinear(payload[None], g, _clamp(g, p.copy()))[0]

    k1 = vel(pos)
    p1 = pay(pos)
    k2 = vel(pos + 0.5 * sc * k1)
    p2 = pay(pos + 0.5 * sc * k1)
    k3 = vel(pos + 0.5 * sc * k2)
    p3 = pay(pos + 0.5 * sc * k2)
    k4 = vel(pos + sc * k3)
    p4 = pay(pos + sc * k3)
    new = pos + (sc / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    inc = (s / 6.0) * (p1 + 2.0 * p2 + 2.0 * p3 + p4)
    return new, inc


def _trace_batch(tf: TransportField, seeds: np.ndarray, payload: np.ndarray | None):
    """Trace every seed backward to the inflow plane.

    Returns (arrivals, travel, integral, steps) arrays.  The final step of
    each trace is shortened so the arrival lands on x1 = 0 exactly (step
    size solved by bisection on the one-step map).
    """
    g = tf.grid
    ds = min(g.h) / 2.0
    max_steps = int(np.ceil(8.0 * g.config.length / ds)) + 1

    pos = np.array(seeds, dtype=float)
    if pos.ndim == 1:
        pos = pos[None]
    n = pos.shape[0]
    travel = np.zeros(n)
    integral = np.zeros(n)
    steps = np.zeros(n, dtype=int)
    active = pos[:, 0] > 0.0

    for _ in range(max_steps):
        if not np.any(active):
            break
        ai = np.flatnonzero(active)
        new, inc = _rk4_step(tf, payload, pos[ai], ds)
        crossing = new[:, 0] <= 0.0

        done = ai[crossing]
        if done.size:
            # solve for the partial step landing exactly on x1 = 0
            lo = np.zeros(done.size)
            hi = np.full(done.size, ds)
            p_done = pos[done]
            for _ in range(52):
                mid = 0.5 * (lo + hi)
                trial, _ = _rk4_step(tf, None, p_done, mid)
                over = trial[:, 0] <= 0.0
                hi = np.where(over, mid, hi)
                lo = np.where(over, lo, mid)
            s_fin = 0.5 * (lo + hi)
            fin, inc_fin = _rk4_step(tf, payload, p_done, s_fin)
            fin[:, 0] = 0.0
            pos[done] = _clamp(g, fin)
            travel[done] += s_fin
            integral[done] += inc_fin if payload is not None else 0.0
            steps[done] += 1
            active[done] = False

        cont = ai[~crossing]
        if cont.size:
            pos[cont] = _clamp(g, new[~crossing])
            travel[cont] += ds
            if payload is not None:
                integral[cont] += inc[~crossing]
            steps[cont] += 1

    if np.any(active):
        bad = int(np.flatnonzero(active)[0])
        raise RuntimeError(
            f"characteristic stalled after {max_steps} steps "
            f"from seed {tuple(np.asarray(seeds, dtype=float).reshape(-1, 3)[bad])}"
        )
    return pos, travel, integral, steps


def trace_characteristic(
    tf: TransportField, x: tuple[float, float, float], payload: ScalarField | None = None
) -> CharacteristicTrace:
    """Backward-trace a single point to the inflow plane."""
    g = tf.grid
    xt = tuple(float(c) for c in x)
    for a, (c, ext) in enumerate(zip(xt, g.config.extents)):
        if not (-1e-12 <= c <= ext + 1e-12):
            raise ValueError(f"seed coordinate {a} = {c} outside the duct closure")
    pay = payload.values if payload is not None else None
    arr, travel, integral, steps = _trace_batch(tf, np.asarray(xt), pay)
    return CharacteristicTrace(
        seed=xt,
        arrival=tuple(float(c) for c in arr[0]),
        travel=float(travel[0]),
        integral=float(integral[0]),
        steps=int(steps[0]),
    )


# ---------------------------------------------------------------------------
# the inflow-traced solution operator

def apply_S(tf: TransportField, v: ScalarField, w_in: np.ndarray) -> ScalarField:
    """Solve u~.grad(w) = v with trace w_in on the inflow plane.

    Every node is traced back to x1 = 0; the value is the bilinearly
    interpolated trace at the arrival point plus the path integral of v.
    """
    g = tf.grid
    w_in = np.asarray(w_in, dtype=float)
    if w_in.shape != (g.shape[1], g.shape[2]):
        raise ValueError(f"inflow trace shape {w_in.shape} != {(g.shape[1], g.shape[2])}")
    x1, x2, x3 = g.meshgrid()
    seeds = np.stack([x1.ravel(), x2.ravel(), x3.ravel()], axis=1)
    arr, _, integral, _ = _trace_batch(tf, seeds, v.values)
    traced = _bilinear_inflow(g, w_in, arr[:, 1], arr[:, 2])
    return ScalarField(g, (traced + integral).reshape(g.shape))


def upwind_march(tf: TransportField, v: ScalarField, w_in: np.ndarray) -> ScalarField:
    """Independent slice-marching solve of u~.grad(w) = v.

    Treats x1 as the marching direction with explicit first-order steps
    and donor-cell upwinding of the transverse derivatives.  Kept free of
    any characteristic-tracing code on purpose.
    """
    g = tf.grid
    w_in = np.asarray(w_in, dtype=float)
    h1, h2, h3 = g.h
    u1, u2, u3 = tf.values
    cfl = float(np.max(np.abs(tf.values[1:]))) * h1 / (float(np.min(u1)) * min(h2, h3))
    if cfl > 1.0 + 1e-12:
        raise ValueError(
            f"transverse CFL number {cfl:.3g} exceeds 1 for the slice march; refine n1"
        )

    def upwind(slab: np.ndarray, speed: np.ndarray, h: float, axis: int) -> np.ndarray:
        back = np.zeros_like(slab)
        fwd = np.zeros_like(slab)
        sl_b = [slice(None)] * 2
        sl_b[axis] = slice(1, None)
        sl_bm = [slice(None)] * 2
        sl_bm[axis] = slice(None, -1)
        back[tuple(sl_b)] = (slab[tuple(sl_b)] - slab[tuple(sl_bm)]) / h
        fwd[tuple(sl_bm)] = back[tuple(sl_b)]
        return np.where(speed > 0.0, back, fwd)

    out = np.empty(g.shape)
    out[0] = w_in
    for i in range(g.shape[0] - 1):
        slab = out[i]
        rhs = (
            v.values[i]
            - u2[i] * upwind(slab, u2[i], h2, 0)
            - u3[i] * upwind(slab, u3[i], h3, 1)
        ) / u1[i]
        out[i + 1] = slab + h1 * rhs
    return ScalarField(g, out)


# ---------------------------------------------------------------------------
# volume distortion of the characteristic flow

def jacobian_bound(tf: TransportField) -> float:
    """Estimate sup |J - 1| of the inflow-seeded characteristic map.

    Seeds the whole inflow plane, marches forward with fixed steps, and at
    every step evaluates J = det[u~(x), dx/dz2, dx/dz3] by central
    differences across neighboring traces.  Samples are discarded once any
    trace in the stencil has left through the outflow plane.
    """
    g = tf.grid
    ds = min(g.h) / 2.0
    length = g.config.length
    max_steps = int(np.ceil(8.0 * length / ds)) + 1
    h2, h3 = g.h[1], g.h[2]

    n2, n3 = g.shape[1], g.shape[2]
    z2, z3 = np.meshgrid(g.axes[1], g.axes[2], indexing="ij")
    pos = np.stack([np.zeros_like(z2).ravel(), z2.ravel(), z3.ravel()], axis=1)
    exited = np.zeros(n2 * n3, dtype=bool)

    def det_samples(p: np.ndarray, ex: np.ndarray) -> float:
        grid3 = p.reshape(n2, n3, 3)
        ex2 = ex.reshape(n2, n3)
        ok = ~(
            ex2[1:-1, 1:-1]
            | ex2[:-2, 1:-1]
            | ex2[2:, 1:-1]
            | ex2[1:-1, :-2]
            | ex2[1:-1, 2:]
        )
        if not np.any(ok):
            return 0.0
        c1 = _trilinear(tf.values, g, grid3[1:-1, 1:-1].reshape(-1, 3)).T.reshape(
            n2 - 2, n3 - 2, 3
        )
        c2 = (grid3[2:, 1:-1] - grid3[:-2, 1:-1]) / (2.0 * h2)
        c3 = (grid3[1:-1, 2:] - grid3[1:-1, :-2]) / (2.0 * h3)
        det = (
            c1[..., 0] * (c2[..., 1] * c3[..., 2] - c2[..., 2] * c3[..., 1])
            - c2[..., 0] * (c1[..., 1] * c3[..., 2] - c1[..., 2] * c3[..., 1])
            + c3[..., 0] * (c1[..., 1] * c2[..., 2] - c1[..., 2] * c2[..., 1])
        )
        return float(np.max(np.abs(det - 1.0)[ok]))

    worst = det_samples(pos, exited)
    for _ in range(max_steps):
        live = np.flatnonzero(~exited)
        if live.size == 0:
            break
        stepped, _ = _rk4_step(tf, None, pos[live], -ds)  # negative s: forward flow
        pos[live] = stepped
        exited[live] = stepped[:, 0] >= length - 1e-12
        pos[:, 1] = np.clip(pos[:, 1], 0.0, g.config.width2)
        pos[:, 2] = np.clip(pos[:, 2], 0.0, g.config.width3)
        worst = max(worst, det_samples(pos, exited))
    return worst
