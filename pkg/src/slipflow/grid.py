"""Tensor-product grid over the duct [0,L] x [0,W2] x [0,W3].

The grid is vertex-centered: axis a carries n_a cells and n_a + 1 nodes,
node (i, j, k) sits exactly at (i*h1, j*h2, k*h3).  Boundary bookkeeping
(outward frames, face quadrature weights, node region tags) lives here as
well so that every other module shares one set of conventions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MIN_CELLS = 4

# Region tag values used in BoundaryFrames.tags.
TAG_INTERIOR = -1
TAG_INFLOW = 0
TAG_OUTFLOW = 1
TAG_LATERAL = 2
TAG_EDGE = 3

REGION_NAMES = {
    TAG_INTERIOR: "interior",
    TAG_INFLOW: "inflow",
    TAG_OUTFLOW: "outflow",
    TAG_LATERAL: "lateral",
    TAG_EDGE: "edge",
}


@dataclass(frozen=True)
class GeometryConfig:
    """Duct extents and cell counts.

    length is the axial (x1) extent, width2/width3 the cross-section
    extents.  Cell counts below MIN_CELLS are rejected: the one-sided
    boundary stencils and the edge-free face quadrature need at least
    five nodes per axis.
    """

    length: float = 2.0
    width2: float = 1.0
    width3: float = 1.0
    n1: int = 8
    n2: int = 4
    n3: int = 4

    def __post_init__(self):
        for name in ("length", "width2", "width3"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0.0:
                raise ValueError(f"geometry.{name} must be positive and finite, got {val!r}")
        for name in ("n1", "n2", "n3"):
            cnt = getattr(self, name)
            if not isinstance(cnt, (int, np.integer)) or isinstance(cnt, bool):
                raise ValueError(f"geometry.{name} must be an integer, got {cnt!r}")
            if cnt < MIN_CELLS:
                raise ValueError(
                    f"geometry.{name}={cnt} below minimum cell count {MIN_CELLS}"
                )

    @property
    def extents(self) -> tuple[float, float, float]:
        return (self.length, self.width2, self.width3)

    @property
    def cells(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)


@dataclass(frozen=True, eq=False)
class Grid:
    """Realized node lattice.  Hash/eq by identity so helpers can memoize."""

    config: GeometryConfig
    h: tuple[float, float, float]
    axes: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(n + 1 for n in self.config.cells)

    @property
    def n_nodes(self) -> int:
        s = self.shape
        return s[0] * s[1] * s[2]

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Node coordinates as three broadcast (n1+1, n2+1, n3+1) arrays."""
        return np.meshgrid(*self.axes, indexing="ij")

    def axis_weights(self, axis: int) -> np.ndarray:
        """1D trapezoid weights along an axis; sums exactly to the extent."""
        n = self.config.cells[axis]
        w = np.full(n + 1, self.h[axis])
        w[0] = 0.5 * self.h[axis]
        w[-1] = 0.5 * self.h[axis]
        return w

    def volume_weights(self) -> np.ndarray:
        """Tensor trapezoid weights; sums to L*W2*W3 up to rounding."""
        w1, w2, w3 = (self.axis_weights(a) for a in range(3))
        return w1[:, None, None] * w2[None, :, None] * w3[None, None, :]


def build_grid(config: GeometryConfig) -> Grid:
    """Construct the node lattice for a validated geometry."""
    h = tuple(ext / n for ext, n in zip(config.extents, config.cells))
    axes = tuple(np.arange(n + 1, dtype=float) * h[a] for a, n in enumerate(config.cells))
    return Grid(config=config, h=h, axes=axes)


def _face_axis_weights(n: int, h: float) -> np.ndarray:
    """1D face-quadrature weights: zero at the endpoints (edge nodes carry
    no boundary quadrature), with the trapezoid end mass folded into the
    first interior nodes so the weights still sum exactly to n*h."""
    w = np.full(n + 1, h)
    w[0] = 0.0
    w[-1] = 0.0
    w[1] = 1.5 * h
    w[-2] = 1.5 * h
    return w


@dataclass(frozen=True, eq=False)
class Face:
    """One of the six planar boundary faces with its constant frame.

    in_axes are the two in-face coordinate axes (global axis ids) in the
    order matching (tau1, tau2) of the frame.  weights is the 2D face
    quadrature (zero on the ring of edge nodes), coords the in-face node
    coordinate vectors.
    """

    name: str
    region: str
    axis: int
    side: int            # -1 at coordinate 0, +1 at the far end
    index: int           # node index along `axis`
    normal: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    in_axes: tuple[int, int]
    coords: tuple[np.ndarray, np.ndarray]
    spacings: tuple[float, float]
    weights: np.ndarray
    curvatures: tuple[float, float] = (0.0, 0.0)

    def slicer(self) -> tuple:
        """Index expression extracting this face's 2D slab from a node array."""
        sl = [slice(None)] * 3
        sl[self.axis] = self.index
        return tuple(sl)

    def take(self, values: np.ndarray) -> np.ndarray:
        """Restrict a (n1+1, n2+1, n3+1) node array to the face (2D view)."""
        return values[self.slicer()]

    def interior_step(self) -> tuple:
        """Index offset moving one node inward along the face normal."""
        step = [0, 0, 0]
        step[self.axis] = -self.side
        return tuple(step)


# Tangent axis pairs per face-normal axis; tau1/tau2 are the positive unit
# vectors along these axes.  x1-faces: (e2, e3); lateral faces put the
# axial direction first.
_TANGENT_AXES = {0: (1, 2), 1: (0, 2), 2: (0, 1)}

_FACE_LAYOUT = (
    ("inflow", 0, -1, "inflow"),
    ("outflow", 0, +1, "outflow"),
    ("y0", 1, -1, "lateral"),
    ("y1", 1, +1, "lateral"),
    ("z0", 2, -1, "lateral"),
    ("z1", 2, +1, "lateral"),
)

REGIONS = ("inflow", "outflow", "lateral")


@dataclass(frozen=True, eq=False)
class BoundaryFrames:
    """All six faces plus a per-node region tag array.

    tags holds TAG_* values; nodes on two or more faces are tagged
    TAG_EDGE and carry zero face-quadrature weight everywhere.
    """

    grid: Grid
    faces: tuple[Face, ...]
    tags: np.ndarray

    def face(self, name: str) -> Face:
        for f in self.faces:
            if f.name == name:
                return f
        raise KeyError(f"unknown face {name!r}")

    def region_faces(self, region: str) -> tuple[Face, ...]:
        if region == "all":
            return self.faces
        if region not in REGIONS:
            raise ValueError(f"unknown boundary region {region!r}")
        return tuple(f for f in self.faces if f.region == region)

    def boundary_mask(self) -> np.ndarray:
        return self.tags != TAG_INTERIOR


def _unit(axis: int) -> np.ndarray:
    e = np.zeros(3)
    e[axis] = 1.0
    return e


@lru_cache(maxsize=32)
def boundary_frames(grid: Grid) -> BoundaryFrames:
    """Build outward frames, face quadrature and node tags for a grid."""
    cells = grid.config.cells
    faces = []
    for name, axis, side, region in _FACE_LAYOUT:
        t1_ax, t2_ax = _TANGENT_AXES[axis]
        wa = _face_axis_weights(cells[t1_ax], grid.h[t1_ax])
        wb = _face_axis_weights(cells[t2_ax], grid.h[t2_ax])
        faces.append(
            Face(
                name=name,
                region=region,
                axis=axis,
                side=side,
                index=0 if side < 0 else cells[axis],
                normal=side * _unit(axis),
                tau1=_unit(t1_ax),
                tau2=_unit(t2_ax),
                in_axes=(t1_ax, t2_ax),
                coords=(grid.axes[t1_ax], grid.axes[t2_ax]),
                spacings=(grid.h[t1_ax], grid.h[t2_ax]),
                weights=np.outer(wa, wb),
            )
        )

    # Count how many faces each node lies on; >= 2 means an edge node.
    shape = grid.shape
    count = np.zeros(shape, dtype=np.int8)
    for axis in range(3):
        sl_lo = [slice(None)] * 3
        sl_lo[axis] = 0
        sl_hi = [slice(None)] * 3
        sl_hi[axis] = -1
        count[tuple(sl_lo)] += 1
        count[tuple(sl_hi)] += 1

    tags = np.full(shape, TAG_INTERIOR, dtype=np.int8)
    region_tag = {"inflow": TAG_INFLOW, "outflow": TAG_OUTFLOW, "lateral": TAG_LATERAL}
    for f in faces:
        slab = tags[f.slicer()]
        slab[...] = region_tag[f.region]
    tags[count >= 2] = TAG_EDGE

    return BoundaryFrames(grid=grid, faces=tuple(faces), tags=tags)
