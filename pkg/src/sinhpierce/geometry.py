"""Pierced planar domains and composite meshes graded toward tiny holes.

The mesh around each hole is a structured polar patch: geometrically graded
radii from the hole radius eps_i out to the annulus radius eta, a fixed
angular count per patch, and node positions stored as exact offsets from the
hole center.  Offsets keep the geometry meaningful even when eps_i is many
orders of magnitude below the domain scale; absolute coordinates would lose
the hole circle to rounding.  The rest of the domain is covered by a hexagonal
background lattice stitched to the patch rims through a filtered Delaunay
triangulation, with angular-doubling transition circles bridging the jump in
resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .errors import (
    DuplicateCenters,
    HoleTouchesBoundary,
    IndexOutOfRange,
    OverlappingHoles,
    StitchFailure,
    UnresolvableHole,
)

# Holes below this radius are rejected; with patch-local coordinates the
# geometry itself stays exact far below this, but derived quantities
# (areas ~ eps^2) start flirting with underflow-driven noise.
MIN_HOLE_RADIUS = 1e-13

# node markers
INTERIOR = -1
OUTER = 0
# hole i carries marker i (1-based)


@dataclass(frozen=True)
class DomainSpec:
    """Outer domain: the unit disk or a simple closed boundary curve."""

    kind: str = "unit-disk"
    boundary: np.ndarray | None = None  # (n, 2) closed curve, for "boundary-curve"

    def __post_init__(self):
        if self.kind not in ("unit-disk", "boundary-curve"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "unit-disk" and self.boundary is not None:
            raise ValueError("unit-disk domain carries no curve data")
        if self.kind == "boundary-curve":
            b = np.asarray(self.boundary, dtype=float)
            if b.ndim != 2 or b.shape[0] < 3 or b.shape[1] != 2:
                raise ValueError("boundary curve must be an (n, 2) point list, n >= 3")
            object.__setattr__(self, "boundary", b)


@dataclass(frozen=True)
class PierceSpec:
    """Hole centers and radii."""

    centers: np.ndarray  # (m, 2)
    radii: np.ndarray    # (m,)

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        r = np.atleast_1d(np.asarray(self.radii, dtype=float))
        if c.shape[0] != r.shape[0]:
            raise ValueError("centers and radii length mismatch")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)

    @property
    def m(self):
        return self.centers.shape[0]


@dataclass(frozen=True)
class PiercedDomain:
    domain: DomainSpec
    pierce: PierceSpec
    eta: float

    def annulus(self, i):
        """Annular region descriptor for hole i (1-based)."""
        if not 1 <= i <= self.pierce.m:
            raise IndexOutOfRange(f"hole index {i} outside 1..{self.pierce.m}")
        return AnnulusRegion(center=tuple(self.pierce.centers[i - 1]),
                             inner_radius=float(self.pierce.radii[i - 1]),
                             outer_radius=float(self.eta))


@dataclass(frozen=True)
class AnnulusRegion:
    center: tuple
    inner_radius: float
    outer_radius: float


@dataclass(frozen=True)
class MeshPolicy:
    """Background spacing h and geometric grading ratio q for the hole patches."""

    h: float = 0.02
    q: float = 1.3
    min_hole_nodes: int = 32
    smooth_iters: int = 2

    def __post_init__(self):
        if not (self.h > 0):
            raise ValueError("h must be positive")
        if not (1.0 < self.q <= 2.0):
            raise ValueError("grading ratio q must lie in (1, 2]")
        if self.min_hole_nodes < 8:
            raise ValueError("need at least 8 nodes per hole circle")


# ---------------------------------------------------------------------------
# domain helpers

def domain_boundary_polygon(domain: DomainSpec, h: float) -> np.ndarray:
    """Closed polygon approximating the outer boundary at arclength spacing ~h."""
    if domain.kind == "unit-disk":
        n = max(16, int(round(2 * np.pi / h)))
        th = 2 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(th), np.sin(th)])
    return _resample_closed_curve(domain.boundary, h)


def _resample_closed_curve(pts, h):
    p = np.asarray(pts, dtype=float)
    if np.allclose(p[0], p[-1]):
        p = p[:-1]
    seg = np.roll(p, -1, axis=0) - p
    lens = np.hypot(seg[:, 0], seg[:, 1])
    s = np.concatenate([[0.0], np.cumsum(lens)])
    total = s[-1]
    n = max(16, int(round(total / h)))
    targets = total * np.arange(n) / n
    out = np.empty((n, 2))
    j = 0
    for i, t in enumerate(targets):
        while s[j + 1] < t:
            j += 1
        w = (t - s[j]) / (s[j + 1] - s[j])
        a = p[j]
        b = p[(j + 1) % len(p)]
        out[i] = (1 - w) * a + w * b
    return out


def _polygon_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def _point_in_polygon(points, poly):
    """Vectorized ray-casting test; True for points strictly inside."""
    x = points[:, 0][:, None]
    y = points[:, 1][:, None]
    x0, y0 = poly[:, 0][None, :], poly[:, 1][None, :]
    x1, y1 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    cond = (y0 <= y) != (y1 <= y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    hits = cond & (x < xcross)
    return np.sum(hits, axis=1) % 2 == 1


def _dist_to_polygon(points, poly):
    """Unsigned distance from each point to the closed polygon boundary."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    p = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("ikj,kj->ik", p, ab) / denom[None, :], 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = np.hypot(points[:, None, 0] - proj[:, :, 0], points[:, None, 1] - proj[:, :, 1])
    return d.min(axis=1)


def _signed_inside_distance(points, domain: DomainSpec, poly):
    """Distance to the boundary for inside points, -distance outside."""
    pts = np.asarray(points, dtype=float)
    if domain.kind == "unit-disk":
        return 1.0 - np.hypot(pts[:, 0], pts[:, 1])
    d = _dist_to_polygon(pts, poly)
    inside = _point_in_polygon(pts, poly)
    return np.where(inside, d, -d)


def distance_to_boundary(domain: DomainSpec, point) -> float:
    p = np.asarray(point, dtype=float)
    if domain.kind == "unit-disk":
        return 1.0 - float(np.hypot(p[0], p[1]))
    poly = domain.boundary
    return float(_signed_inside_distance(p[None, :], domain, poly)[0])


# ---------------------------------------------------------------------------
# pierced domain construction

def build_pierced_domain(domain: DomainSpec, pierce: PierceSpec) -> PiercedDomain:
    """Validate the hole layout and fix the annulus radius eta.

    eta is 0.45 of the admissible bound min{|xi_i - xi_j|, dist(xi_i, bdry)}.
    """
    m = pierce.m
    if m == 0:
        raise ValueError("at least one hole is required")
    c, r = pierce.centers, pierce.radii
    if np.any(r <= 0):
        raise ValueError("hole radii must be positive")
    for i in range(m):
        for j in range(i + 1, m):
            if c[i, 0] == c[j, 0] and c[i, 1] == c[j, 1]:
                raise DuplicateCenters(f"holes {i + 1} and {j + 1} share center {tuple(c[i])}")
            sep = math.hypot(c[i, 0] - c[j, 0], c[i, 1] - c[j, 1])
            if sep <= r[i] + r[j]:
                raise OverlappingHoles(
                    f"holes {i + 1} and {j + 1}: separation {sep:.3g} <= {r[i] + r[j]:.3g}")
    bounds = []
    for i in range(m):
        d = distance_to_boundary(domain, c[i])
        if d <= r[i]:
            raise HoleTouchesBoundary(
                f"hole {i + 1}: ball of radius {r[i]:.3g} at {tuple(c[i])} "
                f"not contained in the domain (clearance {d:.3g})")
        bounds.append(d)
    for i in range(m):
        for j in range(i + 1, m):
            bounds.append(math.hypot(c[i, 0] - c[j, 0], c[i, 1] - c[j, 1]))
    eta = 0.45 * min(bounds)
    if np.any(r >= eta):
        raise HoleTouchesBoundary(
            f"some hole radius {r.max():.3g} is not below the annulus radius eta={eta:.3g}")
    return PiercedDomain(domain=domain, pierce=pierce, eta=eta)


def annulus(pd: PiercedDomain, i: int) -> AnnulusRegion:
    return pd.annulus(i)


# ---------------------------------------------------------------------------
# mesh

@dataclass(eq=False)
class PolarPatch:
    """Structured polar patch around one hole: rings x angles, node offsets exact."""

    center: np.ndarray
    radii: np.ndarray        # (K+1,) ring radii, radii[0] = eps, radii[-1] = eta
    n_theta: int
    node_grid: np.ndarray    # (K+1, n_theta) global node indices

    @property
    def n_layers(self):
        return len(self.radii) - 1


@dataclass(eq=False)
class Mesh:
    """Triangulated pierced domain with hole-local coordinates on the patches."""

    nodes: np.ndarray          # (N, 2) absolute coordinates
    triangles: np.ndarray      # (T, 3)
    node_marker: np.ndarray    # (N,) INTERIOR / OUTER / hole index (1-based)
    node_patch: np.ndarray     # (N,) patch index or -1
    node_dx: np.ndarray        # (N,) offset from patch center (patch nodes)
    node_dy: np.ndarray
    tri_patch: np.ndarray      # (T,) patch index if all three vertices share one, else -1
    weights: np.ndarray        # (N,) lumped quadrature weights (areas)
    patches: list = field(default_factory=list)
    pd: PiercedDomain | None = None
    h: float = 0.0
    min_quality: float = 0.0
    boundary_polygon: np.ndarray | None = None

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def is_boundary(self):
        return self.node_marker != INTERIOR

    @property
    def interior_index(self):
        return np.flatnonzero(self.node_marker == INTERIOR)

    def tri_coords(self, k):
        """Vertex coordinates of triangle k in the least-cancellation frame."""
        tri = self.triangles[k]
        if self.tri_patch[k] >= 0:
            return np.column_stack([self.node_dx[tri], self.node_dy[tri]])
        return self.nodes[tri]

    def all_tri_coords(self):
        """(T, 3, 2) vertex coordinates, patch triangles in offset frame."""
        out = self.nodes[self.triangles].copy()
        inpatch = self.tri_patch >= 0
        if np.any(inpatch):
            tri = self.triangles[inpatch]
            out[inpatch, :, 0] = self.node_dx[tri]
            out[inpatch, :, 1] = self.node_dy[tri]
        return out

    def center_distance(self, patch_index):
        """|x - xi_i| per node, exact on patch i thanks to stored offsets."""
        xi = self.patches[patch_index].center
        d = np.hypot(self.nodes[:, 0] - xi[0], self.nodes[:, 1] - xi[1])
        own = self.node_patch == patch_index
        d[own] = np.hypot(self.node_dx[own], self.node_dy[own])
        return d

    def export(self, path):
        """Plain-text node/cell/tag table, one record per line."""
        with open(path, "w") as f:
            for i in range(self.n_nodes):
                f.write(f"node {i} {self.nodes[i, 0]:.17g} {self.nodes[i, 1]:.17g} "
                        f"{int(self.node_marker[i])}\n")
            for k in range(self.n_triangles):
                a, b, c = self.triangles[k]
                f.write(f"cell {k} {a} {b} {c}\n")


def _tri_areas(coords):
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _tri_quality(coords):
    """Ratio of inscribed to circumscribed radius per triangle (0.5 for equilateral)."""
    a = np.linalg.norm(coords[:, 1] - coords[:, 2], axis=1)
    b = np.linalg.norm(coords[:, 2] - coords[:, 0], axis=1)
    c = np.linalg.norm(coords[:, 0] - coords[:, 1], axis=1)
    area = np.abs(_tri_areas(coords))
    s = 0.5 * (a + b + c)
    with np.errstate(divide="ignore", invalid="ignore"):
        r_in = area / s
        r_circ = a * b * c / (4 * area)
        q = r_in / r_circ
    return np.where(area > 0, q, 0.0)


def _hex_lattice(bbox, h):
    """Hexagonal lattice with spacing h anchored at the origin."""
    xmin, xmax, ymin, ymax = bbox
    dy = h * math.sqrt(3) / 2
    j0 = int(math.floor(ymin / dy)) - 1
    j1 = int(math.ceil(ymax / dy)) + 1
    pts = []
    for j in range(j0, j1 + 1):
        y = j * dy
        off = 0.5 * h if j % 2 else 0.0
        i0 = int(math.floor((xmin - off) / h)) - 1
        i1 = int(math.ceil((xmax - off) / h)) + 1
        xs = off + h * np.arange(i0, i1 + 1)
        pts.append(np.column_stack([xs, np.full(xs.shape, y)]))
    return np.vstack(pts)


def _patch_angular_count(policy: MeshPolicy):
    # enough angles to keep radial/angular aspect near one at grading ratio q
    n = max(policy.min_hole_nodes, int(math.ceil(math.pi / (policy.q - 1.0))))
    return n + (n % 2)


def _build_patch_rings(eps, eta, q, n_theta):
    # cap the effective ratio so radial cells stay within twice the angular
    # spacing; the policy ratio is an upper bound on the grading
    q_eff = min(q, 1.0 + 2.0 * (2 * math.pi / n_theta))
    n_layers = max(1, int(math.ceil(math.log(eta / eps) / math.log(q_eff))))
    k = np.arange(n_layers + 1)
    radii = eps * (eta / eps) ** (k / n_layers)
    radii[0] = eps
    radii[-1] = eta
    return radii


def _structured_patch_triangles(grid):
    """Triangulate the tensor grid of a polar patch (two triangles per quad)."""
    k1, nt = grid.shape
    tris = []
    for k in range(k1 - 1):
        a = grid[k]
        b = grid[k + 1]
        a2 = np.roll(a, -1)
        b2 = np.roll(b, -1)
        tris.append(np.column_stack([a, b, b2]))
        tris.append(np.column_stack([a, b2, a2]))
    return np.vstack(tris)


def _inside_rim_polygon(centroids, center, rim_r, n_theta):
    """True where a point lies inside the polygon of the patch rim ring."""
    dx = centroids[:, 0] - center[0]
    dy = centroids[:, 1] - center[1]
    r = np.hypot(dx, dy)
    inner = r <= rim_r * math.cos(math.pi / n_theta)
    ambiguous = (~inner) & (r < rim_r)
    if np.any(ambiguous):
        th = np.arctan2(dy[ambiguous], dx[ambiguous]) % (2 * math.pi)
        dtheta = 2 * math.pi / n_theta
        j = np.floor(th / dtheta).astype(int) % n_theta
        th0 = j * dtheta
        th1 = th0 + dtheta
        ax, ay = rim_r * np.cos(th0), rim_r * np.sin(th0)
        bx, by = rim_r * np.cos(th1), rim_r * np.sin(th1)
        # interior of the CCW polygon lies to the left of each chord
        cross = (bx - ax) * (dy[ambiguous] - ay) - (by - ay) * (dx[ambiguous] - ax)
        inner[np.flatnonzero(ambiguous)[cross > 0]] = True
    return inner


def build_domain_mesh(domain: DomainSpec, h: float, smooth_iters: int = 2) -> Mesh:
    """Mesh the outer domain alone (no holes); used by the numeric Green backend."""
    return _build_mesh_impl(domain, None, MeshPolicy(h=h, smooth_iters=smooth_iters))


def build_mesh(pd: PiercedDomain, policy: MeshPolicy) -> Mesh:
    """Composite mesh of the pierced domain: polar patches + hex background."""
    for i, eps in enumerate(pd.pierce.radii):
        if eps < MIN_HOLE_RADIUS:
            raise UnresolvableHole(
                f"hole {i + 1} radius {eps:.3g} below the resolvable scale "
                f"{MIN_HOLE_RADIUS:g}")
    return _build_mesh_impl(pd.domain, pd, policy)


def _build_mesh_impl(domain, pd, policy):
    h = policy.h
    bpoly = domain_boundary_polygon(domain, h)
    n_bdry = bpoly.shape[0]

    centers = pd.pierce.centers if pd is not None else np.zeros((0, 2))
    m = centers.shape[0]
    eta = pd.eta if pd is not None else 0.0

    # --- stitch pot: boundary nodes, transition circles, patch rims, hex lattice
    pot_pts = [bpoly]
    pot_origin = [np.full(n_bdry, 0)]           # 0 boundary, 1 circle, 2 hex
    rim_slices = []                             # (start, n_theta) of each rim in pot
    exclusion = []                              # (center, radius) hex keep-out per hole

    patch_ring_radii = []
    n_theta = _patch_angular_count(policy) if m else 0
    for i in range(m):
        eps = pd.pierce.radii[i]
        radii = _build_patch_rings(eps, eta, policy.q, n_theta)
        patch_ring_radii.append(radii)

    circle_pts = []
    circle_spacing = []
    for i in range(m):
        xi = centers[i]
        th = 2 * np.pi * np.arange(n_theta) / n_theta
        rim = np.column_stack([xi[0] + eta * np.cos(th), xi[1] + eta * np.sin(th)])
        start = sum(p.shape[0] for p in pot_pts)
        pot_pts.append(rim)
        pot_origin.append(np.full(n_theta, 1))
        rim_slices.append((start, n_theta))

        # transition circles bridge the rim spacing to the background spacing:
        # angular doubling when the rim is coarser than the lattice, angular
        # halving (aligned subsets) when it is finer
        s = 2 * np.pi * eta / n_theta
        n = n_theta
        rr = eta
        while s > 1.6 * h:
            s = max(s / 2, h)
            n *= 2
            rr = rr + 0.85 * s
            tth = 2 * np.pi * np.arange(n) / n
            cpts = np.column_stack([xi[0] + rr * np.cos(tth), xi[1] + rr * np.sin(tth)])
            circle_pts.append(cpts)
            circle_spacing.append(np.full(n, s))
        while s < 0.62 * h and n >= 16:
            s = min(2 * s, h)
            n //= 2
            rr = rr + 0.85 * s
            tth = 2 * np.pi * np.arange(n) / n
            cpts = np.column_stack([xi[0] + rr * np.cos(tth), xi[1] + rr * np.sin(tth)])
            circle_pts.append(cpts)
            circle_spacing.append(np.full(n, s))
        exclusion.append((xi, rr + 0.75 * max(s, h)))

    # transition nodes: drop those outside the domain or colliding with
    # earlier stitch nodes (overlapping transition shells of nearby holes)
    if circle_pts:
        cpts = np.vstack(circle_pts)
        csp = np.concatenate(circle_spacing)
        keep = _signed_inside_distance(cpts, domain, bpoly) > 0.55 * h
        base = np.vstack(pot_pts)
        tree = cKDTree(base)
        d, _ = tree.query(cpts)
        keep &= d > 0.45 * csp
        # dedup among the transition nodes themselves, preserving order
        order_kept = np.flatnonzero(keep)
        accepted = []
        acc_tree_pts = []
        for idx in order_kept:
            if acc_tree_pts:
                t2 = cKDTree(np.asarray(acc_tree_pts))
                if t2.query(cpts[idx])[0] <= 0.45 * csp[idx]:
                    continue
            accepted.append(idx)
            acc_tree_pts.append(cpts[idx])
        if accepted:
            sel = np.asarray(accepted)
            pot_pts.append(cpts[sel])
            pot_origin.append(np.full(len(sel), 1))

    # hex lattice clipped to the domain minus the patch exclusion zones
    if domain.kind == "unit-disk":
        bbox = (-1.0, 1.0, -1.0, 1.0)
    else:
        bbox = (bpoly[:, 0].min(), bpoly[:, 0].max(), bpoly[:, 1].min(), bpoly[:, 1].max())
    hex_pts = _hex_lattice(bbox, h)
    keep = _signed_inside_distance(hex_pts, domain, bpoly) > 0.55 * h
    for xi, rad in exclusion:
        keep &= np.hypot(hex_pts[:, 0] - xi[0], hex_pts[:, 1] - xi[1]) > rad
    hex_pts = hex_pts[keep]
    pot_pts.append(hex_pts)
    pot_origin.append(np.full(hex_pts.shape[0], 2))

    pot = np.vstack(pot_pts)
    origin = np.concatenate(pot_origin)

    # --- Delaunay + filtering, with optional smoothing of the hex nodes
    convex = domain.kind == "unit-disk"
    movable = origin == 2

    def triangulate(points):
        dela = Delaunay(points)
        tris = dela.simplices
        cent = points[tris].mean(axis=1)
        keep = np.abs(_tri_areas(points[tris])) > 1e-14 * h * h
        if not convex:
            keep &= _point_in_polygon(cent, bpoly)
        for i in range(m):
            keep &= ~_inside_rim_polygon(cent, centers[i], eta, n_theta)
        return tris[keep]

    tris = triangulate(pot)
    for _ in range(policy.smooth_iters):
        # Laplacian smoothing of the lattice nodes only
        nbr_sum = np.zeros_like(pot)
        nbr_cnt = np.zeros(pot.shape[0])
        for a, b in ((0, 1), (1, 2), (2, 0)):
            np.add.at(nbr_sum, tris[:, a], pot[tris[:, b]])
            np.add.at(nbr_cnt, tris[:, a], 1.0)
            np.add.at(nbr_sum, tris[:, b], pot[tris[:, a]])
            np.add.at(nbr_cnt, tris[:, b], 1.0)
        ok = movable & (nbr_cnt > 0)
        pot[ok] = nbr_sum[ok] / nbr_cnt[ok, None]
        tris = triangulate(pot)

    n_pot = pot.shape[0]

    # --- assemble global node arrays: pot nodes first, then patch interiors
    nodes = [pot]
    node_marker = [np.where(origin == 0, OUTER, INTERIOR)]
    node_patch = [np.full(n_pot, -1)]
    node_dx = [pot[:, 0].copy()]
    node_dy = [pot[:, 1].copy()]

    patches = []
    all_tris = [tris]
    tri_patch = [np.full(tris.shape[0], -1)]

    next_id = n_pot
    for i in range(m):
        xi = centers[i]
        radii = patch_ring_radii[i]
        k1 = len(radii)
        th = 2 * np.pi * np.arange(n_theta) / n_theta
        ct, st = np.cos(th), np.sin(th)

        grid = np.empty((k1, n_theta), dtype=np.int64)
        start, cnt = rim_slices[i]
        grid[-1] = np.arange(start, start + cnt)
        inner_count = (k1 - 1) * n_theta
        grid[:-1] = np.arange(next_id, next_id + inner_count).reshape(k1 - 1, n_theta)
        next_id += inner_count

        dx = radii[:-1, None] * ct[None, :]
        dy = radii[:-1, None] * st[None, :]
        pts = np.column_stack([xi[0] + dx.ravel(), xi[1] + dy.ravel()])
        nodes.append(pts)
        mk = np.full(inner_count, INTERIOR)
        mk[:n_theta] = i + 1  # ring 0 = hole boundary
        node_marker.append(mk)
        node_patch.append(np.full(inner_count, i))
        node_dx.append(dx.ravel())
        node_dy.append(dy.ravel())

        # rim nodes belong to the patch frame too (their offsets are exact)
        node_patch[0][grid[-1]] = i
        node_dx[0][grid[-1]] = eta * ct
        node_dy[0][grid[-1]] = eta * st

        ptris = _structured_patch_triangles(grid)
        all_tris.append(ptris)
        tri_patch.append(np.full(ptris.shape[0], i))
        patches.append(PolarPatch(center=xi.copy(), radii=radii, n_theta=n_theta,
                                  node_grid=grid))

    nodes = np.vstack(nodes)
    node_marker = np.concatenate(node_marker)
    node_patch = np.concatenate(node_patch)
    node_dx = np.concatenate(node_dx)
    node_dy = np.concatenate(node_dy)
    triangles = np.vstack(all_tris)
    tri_patch = np.concatenate(tri_patch)

    mesh = Mesh(nodes=nodes, triangles=triangles, node_marker=node_marker,
                node_patch=node_patch, node_dx=node_dx, node_dy=node_dy,
                tri_patch=tri_patch, weights=np.zeros(nodes.shape[0]),
                patches=patches, pd=pd, h=h, boundary_polygon=bpoly)

    _orient_and_weigh(mesh)
    _check_conformity(mesh, bpoly)
    coords = mesh.all_tri_coords()
    mesh.min_quality = float(_tri_quality(coords).min())
    return mesh


def _orient_and_weigh(mesh):
    coords = mesh.all_tri_coords()
    areas = _tri_areas(coords)
    flip = areas < 0
    if np.any(flip):
        mesh.triangles[flip] = mesh.triangles[flip][:, [0, 2, 1]]
        areas = np.abs(areas)
    w = np.zeros(mesh.n_nodes)
    for v in range(3):
        np.add.at(w, mesh.triangles[:, v], areas / 3.0)
    mesh.weights = w


def _check_conformity(mesh, bpoly):
    """Every edge in exactly two triangles, or one if on a boundary cycle."""
    t = mesh.triangles
    edges = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    edges.sort(axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise StitchFailure("an edge is shared by more than two triangles")
    lone = {tuple(e) for e in uniq[counts == 1]}

    expected = set()
    nb = bpoly.shape[0]
    for i in range(nb):
        a, b = i, (i + 1) % nb
        expected.add((min(a, b), max(a, b)))
    for p in mesh.patches:
        ring = p.node_grid[0]
        for j in range(len(ring)):
            a, b = int(ring[j]), int(ring[(j + 1) % len(ring)])
            expected.add((min(a, b), max(a, b)))
    if lone != expected:
        extra = lone - expected
        missing = expected - lone
        raise StitchFailure(
            f"non-conforming stitch: {len(extra)} unexpected open edges, "
            f"{len(missing)} missing boundary edges")

    # area bookkeeping: covered area must match the polygonal domain area
    target = _polygon_area(bpoly)
    for p in mesh.patches:
        th = 2 * np.pi * np.arange(p.n_theta) / p.n_theta
        hole_poly = p.radii[0] * np.column_stack([np.cos(th), np.sin(th)])
        target -= abs(_polygon_area(hole_poly))
    covered = float(np.sum(mesh.weights))
    if abs(covered - target) > 1e-9 * abs(target):
        raise StitchFailure(
            f"covered area {covered!r} differs from polygonal area {target!r}")


# ---------------------------------------------------------------------------
# field evaluation helpers

class FieldEvaluator:
    """Point evaluation of nodal fields: structured lookup inside patches,
    spatial-hash triangle location elsewhere."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        back = np.flatnonzero(mesh.tri_patch < 0)
        self._back_tris = mesh.triangles[back]
        pts = mesh.nodes[self._back_tris]
        self._cell = max(mesh.h, 1e-12)
        lo = pts.reshape(-1, 2).min(axis=0)
        self._lo = lo
        imin = np.floor((pts[:, :, 0].min(axis=1) - lo[0]) / self._cell).astype(int)
        imax = np.floor((pts[:, :, 0].max(axis=1) - lo[0]) / self._cell).astype(int)
        jmin = np.floor((pts[:, :, 1].min(axis=1) - lo[1]) / self._cell).astype(int)
        jmax = np.floor((pts[:, :, 1].max(axis=1) - lo[1]) / self._cell).astype(int)
        buckets = {}
        for k in range(self._back_tris.shape[0]):
            for ii in range(imin[k], imax[k] + 1):
                for jj in range(jmin[k], jmax[k] + 1):
                    buckets.setdefault((ii, jj), []).append(k)
        self._buckets = buckets

    def _locate_background(self, p):
        ii = int(math.floor((p[0] - self._lo[0]) / self._cell))
        jj = int(math.floor((p[1] - self._lo[1]) / self._cell))
        cand = self._buckets.get((ii, jj), ())
        verts = self.mesh.nodes
        for k in cand:
            a, b, c = verts[self._back_tris[k]]
            l1, l2, l3 = _barycentric(p, a, b, c)
            if l1 >= -1e-10 and l2 >= -1e-10 and l3 >= -1e-10:
                return self._back_tris[k], (l1, l2, l3)
        return None, None

    def patch_value(self, patch_index, dx, dy, values):
        """Evaluate at center offsets (dx, dy) inside patch patch_index."""
        p = self.mesh.patches[patch_index]
        r = math.hypot(dx, dy)
        r = min(max(r, p.radii[0]), p.radii[-1])
        k = int(np.searchsorted(p.radii, r, side="right")) - 1
        k = min(max(k, 0), len(p.radii) - 2)
        th = math.atan2(dy, dx) % (2 * math.pi)
        dth = 2 * math.pi / p.n_theta
        j = int(th // dth) % p.n_theta
        j2 = (j + 1) % p.n_theta
        g = p.node_grid
        quad = (g[k, j], g[k + 1, j], g[k + 1, j2], g[k, j2])
        pt = np.array([dx, dy])
        md = self.mesh
        corners = [np.array([md.node_dx[q], md.node_dy[q]]) for q in quad]
        for tri in ((0, 1, 2), (0, 2, 3)):
            a, b, c = (corners[t] for t in tri)
            l1, l2, l3 = _barycentric(pt, a, b, c)
            if l1 >= -1e-9 and l2 >= -1e-9 and l3 >= -1e-9:
                idx = [quad[t] for t in tri]
                return l1 * values[idx[0]] + l2 * values[idx[1]] + l3 * values[idx[2]]
        # clamped fallback: nearest corner
        d = [np.hypot(*(pt - cc)) for cc in corners]
        return values[quad[int(np.argmin(d))]]

    def __call__(self, values, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(pts.shape[0])
        mesh = self.mesh
        for n, p in enumerate(pts):
            hit = False
            for i, patch in enumerate(mesh.patches):
                dx, dy = p[0] - patch.center[0], p[1] - patch.center[1]
                if math.hypot(dx, dy) <= patch.radii[-1]:
                    out[n] = self.patch_value(i, dx, dy, values)
                    hit = True
                    break
            if hit:
                continue
            tri, lam = self._locate_background(p)
            if tri is None:
                # thin sliver between a patch rim polygon and its circle, or
                # a hair outside the boundary polygon: fall back to nearest node
                d = np.hypot(mesh.nodes[:, 0] - p[0], mesh.nodes[:, 1] - p[1])
                out[n] = values[int(np.argmin(d))]
            else:
                out[n] = lam[0] * values[tri[0]] + lam[1] * values[tri[1]] + lam[2] * values[tri[2]]
        return out if np.asarray(points).ndim > 1 else float(out[0])


def _barycentric(p, a, b, c):
    v0 = b - a
    v1 = c - a
    v2 = p - a
    den = v0[0] * v1[1] - v1[0] * v0[1]
    if den == 0:
        return -1.0, -1.0, -1.0
    l2 = (v2[0] * v1[1] - v1[0] * v2[1]) / den
    l3 = (v0[0] * v2[1] - v2[0] * v0[1]) / den
    return 1.0 - l2 - l3, l2, l3
