"""Pressure closure, flow parameters, boundary data and forcing assembly.

This module owns everything the nonlinear iteration feeds on: the barotropic
pressure law and its derivatives, the prescribed boundary perturbations, the
divergence-style lifting u0 of the inhomogeneous normal trace, and the
pointwise forcing fields (momentum forcing F, continuity forcing G, slip
data B) that the linear step consumes.

Density is only ever admitted in the open band (0, 2): the solver treats a
field leaving the band as divergence of the outer iteration, never clamps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .grid import Grid, BoundaryFrames, Face, boundary_frames
from .fields import (
    ScalarField,
    VectorField,
    NormKind,
    norm,
    diff1,
    grad_array,
    grad_div_array,
    laplacian_array,
    sym_gradient,
    advect,
    trace_gagliardo_norm,
    face_w1p_norm,
)

DENSITY_BAND = (0.0, 2.0)

# Faces that may carry a nonzero prescribed normal trace; on the lateral
# walls the normal trace of the full velocity is pinned to zero.
NORMAL_TRACE_FACES = ("inflow", "outflow")

PROFILE_NAMES = ("zero", "sine_bump")

ProfileFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# pressure closure

@dataclass(frozen=True)
class PressureLaw:
    """Barotropic closure pi(rho), C3 on the admissible band.

    kind "power":  pi(rho) = rho**coefficient, coefficient >= 1
    kind "linear": pi(rho) = coefficient * rho, coefficient > 0
    """

    kind: str = "power"
    coefficient: float = 2.0

    def __post_init__(self):
        if self.kind not in ("power", "linear"):
            raise ValueError(f"unknown pressure law kind {self.kind!r}")
        if not np.isfinite(self.coefficient):
            raise ValueError("pressure coefficient must be finite")
        if self.kind == "power" and self.coefficient < 1.0:
            raise ValueError("power-law exponent must be >= 1")
        if self.kind == "linear" and self.coefficient <= 0.0:
            raise ValueError("linear pressure slope must be positive")

    def value(self, rho):
        if self.kind == "power":
            return rho ** self.coefficient
        return self.coefficient * rho

    def d1(self, rho):
        if self.kind == "power":
            k = self.coefficient
            return k * rho ** (k - 1.0)
        return self.coefficient * np.ones_like(np.asarray(rho, dtype=float))

    def d2(self, rho):
        if self.kind == "power":
            k = self.coefficient
            return k * (k - 1.0) * rho ** (k - 2.0)
        return np.zeros_like(np.asarray(rho, dtype=float))

    @property
    def gamma(self) -> float:
        """Pressure slope at the reference density, d(pi)/d(rho)|_1."""
        return float(self.d1(1.0))


def _check_band(rho: np.ndarray, context: str):
    lo, hi = DENSITY_BAND
    bad = ~((rho > lo) & (rho < hi))
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(
            f"{context}: density {np.asarray(rho)[idx]:.6g} at node {idx} "
            f"outside admissible band {DENSITY_BAND}"
        )


def pressure_eval(law: PressureLaw, rho: float, order: int = 0) -> float:
    """Evaluate pi or one of its first two derivatives at a single density."""
    r = float(rho)
    _check_band(np.asarray([r]), "pressure_eval")
    if order == 0:
        return float(law.value(r))
    if order == 1:
        return float(law.d1(r))
    if order == 2:
        return float(law.d2(r))
    raise ValueError(f"derivative order must be 0, 1 or 2, got {order!r}")


def delta_pi_prime(law: PressureLaw, w: ScalarField) -> ScalarField:
    """Pointwise pressure-slope deviation pi'(1 + w) - pi'(1)."""
    rho = 1.0 + w.values
    _check_band(rho, "delta_pi_prime")
    return ScalarField(w.grid, law.d1(rho) - law.gamma)


# ---------------------------------------------------------------------------
# flow parameters

@dataclass(frozen=True)
class FlowParams:
    """Viscosities, wall friction and the pressure closure.

    mu is the shear viscosity, nu the second viscosity coefficient,
    friction the Navier-slip coefficient on the tangential rows.
    """

    mu: float = 1.0
    nu: float = 1.0
    friction: float = 10.0
    pressure: PressureLaw = field(default_factory=PressureLaw)

    def __post_init__(self):
        if not (np.isfinite(self.mu) and self.mu > 0.0):
            raise ValueError(f"mu must be positive, got {self.mu!r}")
        if not np.isfinite(self.nu) or self.mu + 2.0 * self.nu <= 0.0:
            raise ValueError("need mu + 2*nu > 0 for a well-posed viscous operator")
        if not (np.isfinite(self.friction) and self.friction > 0.0):
            raise ValueError(f"friction must be positive, got {self.friction!r}")
        if self.pressure.gamma <= 0.0:
            raise ValueError("pressure slope at reference density must be positive")

    @property
    def gamma_bar(self) -> float:
        """Pressure slope over the longitudinal viscosity, gamma/(nu + 2mu)."""
        return self.pressure.gamma / (self.nu + 2.0 * self.mu)


# ---------------------------------------------------------------------------
# boundary data

def make_profile(name: str, extents: tuple[float, float]) -> ProfileFn:
    """Closed-form in-face profile by registry name.

    Profiles take the two in-face coordinate meshes and return unscaled
    values; the data amplitude epsilon multiplies them at evaluation time.
    """
    e1, e2 = extents
    if name == "zero":
        return lambda a, b: np.zeros(np.broadcast(a, b).shape)
    if name == "sine_bump":
        return lambda a, b: np.sin(np.pi * a / e1) * np.sin(np.pi * b / e2)
    raise ValueError(f"unknown profile {name!r} (available: {', '.join(PROFILE_NAMES)})")


@dataclass(frozen=True)
class BoundaryDataSpec:
    """Prescribed boundary perturbations, all scaled by one amplitude.

    normal_trace maps a face name to the profile of the normal-trace
    perturbation of the full velocity (only inflow/outflow faces may
    appear; the walls keep a homogeneous normal trace).  slip maps a face
    name to the pair of given tangential data profiles in that face's
    (tau1, tau2) frame.  inflow_density is the density perturbation
    profile on the inflow face.
    """

    epsilon: float = 0.0
    normal_trace: Mapping[str, ProfileFn] = field(default_factory=dict)
    slip: Mapping[str, tuple[ProfileFn, ProfileFn]] = field(default_factory=dict)
    inflow_density: ProfileFn | None = None

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ValueError(f"data amplitude must be >= 0, got {self.epsilon!r}")
        bad = set(self.normal_trace) - set(NORMAL_TRACE_FACES)
        if bad:
            raise ValueError(
                f"normal-trace data not allowed on faces {sorted(bad)}; "
                "the wall normal trace is homogeneous"
            )


def boundary_data_from_names(
    grid: Grid,
    epsilon: float,
    normal_trace: Mapping[str, str] | None = None,
    slip: Mapping[str, str] | None = None,
    inflow_density: str = "sine_bump",
) -> BoundaryDataSpec:
    """Build a BoundaryDataSpec from registry profile names per face.

    Defaults: a sine-bump normal trace on the inflow face, sine-bump slip
    data on the four walls, a sine-bump density perturbation at inflow.
    """
    frames = boundary_frames(grid)
    if normal_trace is None:
        normal_trace = {"inflow": "sine_bump"}
    if slip is None:
        slip = {name: "sine_bump" for name in ("y0", "y1", "z0", "z1")}

    def face_extents(name: str) -> tuple[float, float]:
        f = frames.face(name)
        return (f.coords[0][-1], f.coords[1][-1])

    nt = {name: make_profile(prof, face_extents(name)) for name, prof in normal_trace.items()}
    sl = {}
    for name, prof in slip.items():
        fn = make_profile(prof, face_extents(name))
        sl[name] = (fn, fn)
    dens = make_profile(inflow_density, face_extents("inflow"))
    return BoundaryDataSpec(epsilon=epsilon, normal_trace=nt, slip=sl, inflow_density=dens)


# ---------------------------------------------------------------------------
# lifting of the inhomogeneous normal trace

def _face_mesh(face: Face) -> tuple[np.ndarray, np.ndarray]:
    return np.meshgrid(face.coords[0], face.coords[1], indexing="ij")


def _hermite_ramp(xi: np.ndarray) -> np.ndarray:
    """C2 cutoff: 1 at 0, 0 at 1, vanishing first and second derivatives
    at both ends (quintic Hermite)."""
    x = np.clip(xi, 0.0, 1.0)
    return 1.0 - (10.0 * x**3 - 15.0 * x**4 + 6.0 * x**5)


def ramp_width(grid: Grid) -> float:
    return min(grid.config.extents) / 4.0


def extend_normal_trace(grid: Grid, spec: BoundaryDataSpec) -> VectorField:
    """Lift the prescribed normal-trace perturbation into the duct.

    Each face contribution is the face profile times a quintic Hermite
    ramp in the inward normal direction of width min(extent)/4, carried
    entirely by the normal velocity component; opposite-face
    contributions are summed, tangential components stay zero.  The
    normal trace matches the prescribed data exactly at face nodes.
    """
    frames = boundary_frames(grid)
    vals = np.zeros((3, *grid.shape))
    width = ramp_width(grid)
    for name, fn in spec.normal_trace.items():
        face = frames.face(name)
        mesh = _face_mesh(face)
        trace = spec.epsilon * np.asarray(fn(*mesh), dtype=float)
        axis_coords = grid.axes[face.axis]
        if face.side < 0:
            dist = axis_coords
        else:
            dist = axis_coords[-1] - axis_coords
        ramp = _hermite_ramp(dist / width)
        shape = [1, 1, 1]
        shape[face.axis] = axis_coords.size
        # n . u0 = trace on the face; the normal component carries it all
        comp = float(face.normal[face.axis]) * np.expand_dims(trace, face.axis)
        vals[face.axis] += comp * ramp.reshape(shape)
    return VectorField(grid, vals)


# ---------------------------------------------------------------------------
# assembled perturbation data

@dataclass(frozen=True)
class PerturbationData:
    """Everything the linear step needs about the boundary data.

    slip_data maps face name -> (2, m, n) array: the right-hand sides of
    the two tangential Robin rows in the face frame, given data minus the
    lifted-field contribution 2 mu n.D(u0).tau_i.  w_in is the density
    perturbation trace on the inflow face.  b_measure is the single
    scalar data size driving the smallness regime.
    """

    u0: VectorField
    slip_data: Mapping[str, np.ndarray]
    w_in: np.ndarray
    b_measure: float


def assemble_perturbation_data(
    grid: Grid,
    frames: BoundaryFrames,
    spec: BoundaryDataSpec,
    params: FlowParams,
    p: float = 4.0,
) -> PerturbationData:
    """Evaluate u0, the Robin right-hand sides and the data measure."""
    u0 = extend_normal_trace(grid, spec)
    d_u0 = sym_gradient(u0)

    slip_data: dict[str, np.ndarray] = {}
    for face in frames.faces:
        mesh = _face_mesh(face)
        given = spec.slip.get(face.name)
        rows = []
        for i, tau in enumerate((face.tau1, face.tau2)):
            if given is not None:
                g = spec.epsilon * np.asarray(given[i](*mesh), dtype=float)
            else:
                g = np.zeros(face.weights.shape)
            # n . D(u0) . tau_i restricted to the face
            nd = np.zeros(face.weights.shape)
            for a in range(3):
                if face.normal[a] == 0.0:
                    continue
                for b in range(3):
                    if tau[b] == 0.0:
                        continue
                    nd += face.normal[a] * tau[b] * face.take(d_u0[a, b])
            rows.append(g - 2.0 * params.mu * nd)
        slip_data[face.name] = np.stack(rows)

    inflow = frames.face("inflow")
    if spec.inflow_density is not None:
        w_in = spec.epsilon * np.asarray(spec.inflow_density(*_face_mesh(inflow)), dtype=float)
    else:
        w_in = np.zeros(inflow.weights.shape)
    _check_band(1.0 + w_in, "inflow density trace")

    b_measure = (
        norm(u0, NormKind.w2p(p))
        + trace_gagliardo_norm(frames, slip_data, "all", p)
        + face_w1p_norm(inflow, w_in, p)
    )
    return PerturbationData(u0=u0, slip_data=slip_data, w_in=w_in, b_measure=float(b_measure))


# ---------------------------------------------------------------------------
# nonlinear forcings

def compute_F(
    u: VectorField, w: ScalarField, data: PerturbationData, params: FlowParams
) -> VectorField:
    """Momentum forcing of the linear step, evaluated at the outer iterate.

    With s = u + u0 the full perturbation velocity and v = e1 + s the
    reconstructed velocity, the momentum row of the linear step keeps
    d(u)/dx1, the viscous terms in u and the reference pressure gradient
    on the left; everything else lands here:

        F = -(1 + w) (s . grad) s - w d(s)/dx1 - d(u0)/dx1
            + mu lap(u0) + (nu + mu) grad(div u0) - dpi'(w) grad(w)

    which is exactly the full momentum residual of the reconstructed
    physical fields minus the linear-step left-hand side.
    """
    g = u.grid
    dpi = delta_pi_prime(params.pressure, w).values
    u0 = data.u0.values
    s = u.values + u0

    conv = np.stack([advect(s, s[c], g) for c in range(3)])
    dx1_s = np.stack([diff1(s[c], g.h[0], 0) for c in range(3)])
    dx1_u0 = np.stack([diff1(u0[c], g.h[0], 0) for c in range(3)])
    lap_u0 = np.stack([laplacian_array(u0[c], g) for c in range(3)])
    grad_div_u0 = grad_div_array(u0, g)
    grad_w = grad_array(w.values, g)

    vals = (
        -(1.0 + w.values) * conv
        - w.values * dx1_s
        - dx1_u0
        + params.mu * lap_u0
        + (params.nu + params.mu) * grad_div_u0
        - dpi * grad_w
    )
    return VectorField(g, vals)


def compute_G(u: VectorField, w: ScalarField, data: PerturbationData) -> ScalarField:
    """Continuity forcing of the linear step: -(w + 1) div u0 - w div u."""
    g = u.grid
    _check_band(1.0 + w.values, "compute_G")
    div_u0 = sum(diff1(data.u0.values[a], g.h[a], a) for a in range(3))
    div_u = sum(diff1(u.values[a], g.h[a], a) for a in range(3))
    return ScalarField(g, -(w.values + 1.0) * div_u0 - w.values * div_u)
