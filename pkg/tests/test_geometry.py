import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sinhpierce.errors import (
    DuplicateCenters,
    HoleTouchesBoundary,
    IndexOutOfRange,
    OverlappingHoles,
    UnresolvableHole,
)
from sinhpierce.geometry import (
    DomainSpec,
    FieldEvaluator,
    MeshPolicy,
    PierceSpec,
    annulus,
    build_domain_mesh,
    build_mesh,
    build_pierced_domain,
)


def test_single_center_hole_eta():
    pd = build_pierced_domain(DomainSpec(), PierceSpec(centers=[[0.0, 0.0]], radii=[0.01]))
    assert pd.eta == pytest.approx(0.45)


def test_two_hole_eta_uses_minimum_before_scaling():
    # min(|xi_1 - xi_2|, dist to boundary) = min(0.8, 0.6) = 0.6
    pd = build_pierced_domain(DomainSpec(),
                              PierceSpec(centers=[[-0.4, 0.0], [0.4, 0.0]],
                                         radii=[0.01, 0.01]))
    assert pd.eta == pytest.approx(0.45 * 0.6)


def test_hole_touching_boundary_rejected():
    with pytest.raises(HoleTouchesBoundary):
        build_pierced_domain(DomainSpec(), PierceSpec(centers=[[0.0, 0.0]], radii=[1.5]))


def test_overlapping_and_duplicate_holes_rejected():
    with pytest.raises(OverlappingHoles):
        build_pierced_domain(DomainSpec(),
                             PierceSpec(centers=[[0.0, 0.0], [0.05, 0.0]],
                                        radii=[0.04, 0.04]))
    with pytest.raises(DuplicateCenters):
        build_pierced_domain(DomainSpec(),
                             PierceSpec(centers=[[0.1, 0.0], [0.1, 0.0]],
                                        radii=[0.01, 0.01]))


def test_no_holes_rejected():
    with pytest.raises(ValueError):
        build_pierced_domain(DomainSpec(),
                             PierceSpec(centers=np.zeros((0, 2)), radii=np.zeros(0)))


def test_annulus_descriptor():
    pd = build_pierced_domain(DomainSpec(),
                              PierceSpec(centers=[[-0.4, 0.0], [0.4, 0.0]],
                                         radii=[0.01, 0.02]))
    a1 = annulus(pd, 1)
    assert a1.center == (-0.4, 0.0)
    assert a1.inner_radius == 0.01
    assert a1.outer_radius == pd.eta
    a2 = annulus(pd, 2)
    assert a2.center == (0.4, 0.0)
    with pytest.raises(IndexOutOfRange):
        annulus(pd, 0)
    with pytest.raises(IndexOutOfRange):
        annulus(pd, 3)


@given(x=st.floats(-0.5, 0.5), y=st.floats(-0.5, 0.5))
@settings(max_examples=25, deadline=None)
def test_eta_formula_single_hole(x, y):
    pd = build_pierced_domain(DomainSpec(), PierceSpec(centers=[[x, y]], radii=[1e-4]))
    assert pd.eta == pytest.approx(0.45 * (1 - math.hypot(x, y)))


# --- meshes ---------------------------------------------------------------

def test_graded_patch_layer_count():
    pd = build_pierced_domain(DomainSpec(), PierceSpec(centers=[[0.0, 0.0]], radii=[1e-3]))
    mesh = build_mesh(pd, MeshPolicy(h=0.02, q=1.3))
    expected = math.ceil(math.log(pd.eta / 1e-3) / math.log(1.3))
    assert expected == 24
    assert mesh.patches[0].n_layers == expected


def test_unresolvable_hole():
    pd = build_pierced_domain(DomainSpec(), PierceSpec(centers=[[0.0, 0.0]], radii=[1e-15]))
    with pytest.raises(UnresolvableHole):
        build_mesh(pd, MeshPolicy())


def test_mesh_invariants_single_hole(single_mesh):
    mesh = single_mesh
    # hole boundary nodes sit on the circle to near machine precision
    hole = mesh.node_marker == 1
    assert hole.sum() >= 32
    r = mesh.center_distance(0)[hole]
    assert np.abs(r / 1e-3 - 1).max() <= 1e-12
    # cell quality floor
    assert mesh.min_quality >= 0.2


def test_disk_area_reproduced_at_default_spacing():
    pd = build_pierced_domain(DomainSpec(), PierceSpec(centers=[[0.0, 0.0]], radii=[1e-3]))
    mesh = build_mesh(pd, MeshPolicy(h=0.02))
    area = math.pi - math.pi * 1e-6
    assert abs(mesh.weights.sum() - area) / area <= 1e-4


def test_hole_node_count_independent_of_radius():
    for eps in (1e-3, 1e-9):
        pd = build_pierced_domain(DomainSpec(), PierceSpec(centers=[[0.3, 0.1]], radii=[eps]))
        mesh = build_mesh(pd, MeshPolicy(h=0.045))
        assert (mesh.node_marker == 1).sum() == mesh.patches[0].n_theta
        assert mesh.patches[0].n_theta >= 32


def test_tiny_offcenter_hole_geometry():
    eps = 2e-12
    pd = build_pierced_domain(DomainSpec(), PierceSpec(centers=[[0.4, 0.0]], radii=[eps]))
    mesh = build_mesh(pd, MeshPolicy(h=0.045))
    hole = mesh.node_marker == 1
    r = mesh.center_distance(0)[hole]
    assert np.abs(r / eps - 1).max() <= 1e-12
    assert mesh.min_quality >= 0.2


def test_plain_domain_mesh_area_and_quality(disk):
    mesh = build_domain_mesh(disk, 0.02)
    assert abs(mesh.weights.sum() - math.pi) / math.pi <= 1e-4
    assert mesh.min_quality >= 0.2
    assert not mesh.patches


def test_boundary_curve_domain_mesh():
    t = np.linspace(0, 2 * math.pi, 200, endpoint=False)
    # smooth egg-shaped curve
    pts = np.column_stack([1.1 * np.cos(t), 0.8 * np.sin(t) + 0.1 * np.sin(2 * t)])
    dom = DomainSpec(kind="boundary-curve", boundary=pts)
    pd = build_pierced_domain(dom, PierceSpec(centers=[[0.2, 0.0]], radii=[1e-4]))
    mesh = build_mesh(pd, MeshPolicy(h=0.06))
    assert mesh.min_quality >= 0.15
    assert (mesh.node_marker == 1).sum() >= 32


def test_mesh_export_roundtrip(tmp_path, single_mesh):
    path = tmp_path / "mesh.txt"
    single_mesh.export(path)
    nodes = cells = 0
    for line in open(path):
        kind = line.split()[0]
        if kind == "node":
            nodes += 1
        elif kind == "cell":
            cells += 1
    assert nodes == single_mesh.n_nodes
    assert cells == single_mesh.n_triangles


def test_field_evaluator_linear_reproduction(single_mesh):
    # P1 interpolation reproduces affine functions exactly, in and out of patches
    mesh = single_mesh
    vals = 2.0 + 3.0 * mesh.nodes[:, 0] - 1.5 * mesh.nodes[:, 1]
    ev = FieldEvaluator(mesh)
    pts = np.array([[0.5, 0.1], [0.0, 0.002], [0.0, 0.3], [-0.7, -0.2]])
    got = ev(vals, pts)
    want = 2.0 + 3.0 * pts[:, 0] - 1.5 * pts[:, 1]
    assert np.abs(got - want).max() <= 1e-9


def test_patch_value_deep_in_hole_region(single_mesh):
    mesh = single_mesh
    r_all = mesh.center_distance(0)
    vals = np.log(np.maximum(r_all, 1e-300))
    ev = FieldEvaluator(mesh)
    # radial log profile is reproduced well inside the graded patch
    for rr in (2e-3, 1e-2, 0.1):
        got = ev.patch_value(0, rr, 0.0, vals)
        assert got == pytest.approx(math.log(rr), abs=2e-2)


def test_quality_floor_across_policies():
    # the cell-quality invariant holds across hole layouts and policies
    rng = np.random.default_rng(1)
    disk = DomainSpec()
    for _ in range(6):
        m = int(rng.integers(1, 4))
        while True:
            centers = rng.uniform(-0.55, 0.55, (m, 2))
            ok = all(np.hypot(*c) < 0.6 for c in centers)
            for i in range(m):
                for j in range(i + 1, m):
                    ok = ok and np.hypot(*(centers[i] - centers[j])) > 0.35
            if ok:
                break
        eps = 10.0 ** rng.uniform(-9, -3, m)
        h = float(rng.choice([0.03, 0.045, 0.06]))
        q = float(rng.choice([1.15, 1.3, 1.6, 2.0]))
        pd = build_pierced_domain(disk, PierceSpec(centers=centers, radii=eps))
        mesh = build_mesh(pd, MeshPolicy(h=h, q=q))
        assert mesh.min_quality >= 0.2, (m, h, q, mesh.min_quality)
