import numpy as np
import pytest

from slipflow.grid import (
    GeometryConfig,
    build_grid,
    boundary_frames,
    TAG_INTERIOR,
    TAG_INFLOW,
    TAG_OUTFLOW,
    TAG_LATERAL,
    TAG_EDGE,
)


def default_grid(n1=8, n2=4, n3=4, length=2.0, width2=1.0, width3=1.0):
    return build_grid(GeometryConfig(length, width2, width3, n1, n2, n3))


def test_build_grid_example():
    g = default_grid(8, 4, 4)
    assert g.h == (0.25, 0.25, 0.25)
    assert g.shape == (9, 5, 5)
    # node (1,1,1) sits exactly at (h1, h2, h3)
    assert g.axes[0][1] == 0.25
    assert g.axes[1][1] == 0.25
    assert g.axes[2][1] == 0.25


def test_node_coordinates_exact_products():
    g = default_grid(7 + 1, 5, 6, length=1.7, width2=0.9, width3=1.3)
    for a in range(3):
        n = g.config.cells[a]
        expect = np.arange(n + 1) * g.h[a]
        assert np.array_equal(g.axes[a], expect)


def test_cell_count_below_minimum_rejected():
    with pytest.raises(ValueError, match="minimum cell count"):
        GeometryConfig(n2=3)


def test_nonpositive_extent_rejected():
    with pytest.raises(ValueError, match="positive"):
        GeometryConfig(length=0.0)
    with pytest.raises(ValueError, match="positive"):
        GeometryConfig(width3=-1.0)


def test_face_frames_orthonormal():
    frames = boundary_frames(default_grid())
    assert len(frames.faces) == 6
    for f in frames.faces:
        basis = np.stack([f.normal, f.tau1, f.tau2])
        gram = basis @ basis.T
        assert np.max(np.abs(gram - np.eye(3))) <= 1e-14
        assert f.curvatures == (0.0, 0.0)


def test_expected_normals_and_tangents():
    frames = boundary_frames(default_grid())
    assert np.array_equal(frames.face("inflow").normal, [-1.0, 0.0, 0.0])
    assert np.array_equal(frames.face("outflow").normal, [1.0, 0.0, 0.0])
    # lateral face at x2 = W2: n = e2, axial tangent first
    y1 = frames.face("y1")
    assert np.array_equal(y1.normal, [0.0, 1.0, 0.0])
    assert np.array_equal(y1.tau1, [1.0, 0.0, 0.0])
    assert np.array_equal(y1.tau2, [0.0, 0.0, 1.0])


def test_face_weight_sums_match_face_areas():
    g = default_grid(9, 5, 7, length=1.9, width2=0.7, width3=1.1)
    frames = boundary_frames(g)
    areas = {
        "inflow": 0.7 * 1.1,
        "outflow": 0.7 * 1.1,
        "y0": 1.9 * 1.1,
        "y1": 1.9 * 1.1,
        "z0": 1.9 * 0.7,
        "z1": 1.9 * 0.7,
    }
    for f in frames.faces:
        assert abs(f.weights.sum() - areas[f.name]) <= 1e-14 * areas[f.name]


def test_edge_nodes_carry_zero_weight():
    frames = boundary_frames(default_grid())
    for f in frames.faces:
        assert np.all(f.weights[0, :] == 0.0)
        assert np.all(f.weights[-1, :] == 0.0)
        assert np.all(f.weights[:, 0] == 0.0)
        assert np.all(f.weights[:, -1] == 0.0)
        assert np.all(f.weights[1:-1, 1:-1] > 0.0)


def test_face_quadrature_second_order_on_smooth_integrand():
    # integral of x2^2 over the inflow face: exact 1/3 per unit x3 extent
    errs = []
    for n in (8, 16):
        g = default_grid(4, n, n)
        f = boundary_frames(g).face("inflow")
        x2 = g.axes[1][:, None]
        val = np.sum(f.weights * x2**2 * np.ones((n + 1, n + 1)))
        errs.append(abs(val - 1.0 / 3.0))
    assert errs[1] <= errs[0] / 2.5  # about h^2


def test_region_tags_partition():
    g = default_grid()
    frames = boundary_frames(g)
    tags = frames.tags
    n1, n2, n3 = g.config.cells
    # strict interior
    assert np.all(tags[1:-1, 1:-1, 1:-1] == TAG_INTERIOR)
    # face interiors
    assert np.all(tags[0, 1:-1, 1:-1] == TAG_INFLOW)
    assert np.all(tags[-1, 1:-1, 1:-1] == TAG_OUTFLOW)
    assert np.all(tags[1:-1, 0, 1:-1] == TAG_LATERAL)
    assert np.all(tags[1:-1, 1:-1, -1] == TAG_LATERAL)
    # nodes on two or more faces are edges
    assert tags[0, 0, 2] == TAG_EDGE
    assert tags[0, 0, 0] == TAG_EDGE
    assert tags[3, 0, -1] == TAG_EDGE
    # counts: interior + 6 face interiors + edges = all nodes
    n_interior = (n1 - 1) * (n2 - 1) * (n3 - 1)
    n_faces = 2 * (n2 - 1) * (n3 - 1) + 2 * (n1 - 1) * (n3 - 1) + 2 * (n1 - 1) * (n2 - 1)
    assert np.sum(tags == TAG_INTERIOR) == n_interior
    assert np.sum(tags >= 0) == g.n_nodes - n_interior
    assert np.sum(tags == TAG_EDGE) == g.n_nodes - n_interior - n_faces


def test_volume_weights_sum_to_volume():
    g = default_grid(5, 6, 7, length=1.3, width2=0.8, width3=0.5)
    vol = 1.3 * 0.8 * 0.5
    assert abs(g.volume_weights().sum() - vol) <= 1e-13 * vol


def test_frames_memoized_per_grid():
    g = default_grid()
    assert boundary_frames(g) is boundary_frames(g)
