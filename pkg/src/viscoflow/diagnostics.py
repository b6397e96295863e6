"""Varifold-level measurements: pushforward measures, density ratios,
stationarity and orthogonality residuals, atom and neck detection."""

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from . import _core
from .errors import FieldNotTangent, NoBoundary
from .immersion import vertex_areas

TANGENCY_TOL = 1e-8
ATOM_THRESHOLD_FRACTION = 0.1     # of total mass
SMALL_DIAMETER_FRACTION = 0.1     # of the ambient diameter scale


def _barycentric_grid(k):
    """Centroids of the k^2 congruent subdivision of the reference triangle."""
    pts = []
    for i in range(k):
        for j in range(k - i):
            pts.append(((3 * i + 1) / (3 * k), (3 * j + 1) / (3 * k)))
    for i in range(k):
        for j in range(k - 1 - i):
            pts.append(((3 * i + 2) / (3 * k), (3 * j + 2) / (3 * k)))
    return np.asarray(pts)


class PushforwardVarifold:
    """Weighted (point, tangent 2-plane) samples of the immersed surface."""

    def __init__(self, points, planes, weights, ambient, constraint=None,
                 boundary_points=None, mean_edge_length=None):
        self.points = points
        self.planes = planes
        self.weights = weights
        self.ambient = ambient
        self.constraint = constraint
        self.boundary_points = boundary_points
        self.mean_edge_length = mean_edge_length

    @property
    def total_mass(self):
        return float(np.sum(self.weights))

    def distances_to(self, p):
        return self.ambient.distance(self.points, np.asarray(p, dtype=float))


def pushforward(immersion, samples_per_face=1):
    """Sample the induced varifold: equal area shares per face at fixed
    barycentric points; tangent planes from the face differentials."""
    if samples_per_face < 1:
        raise ValueError("need at least one sample per face")
    mesh, pos = immersion.mesh, immersion.positions
    tri = mesh.triangles
    e11, e12, e22, det, areas = _core.face_metric(np, tri, pos)
    k = int(np.ceil(np.sqrt(samples_per_face)))
    bary = _barycentric_grid(k)[:samples_per_face]
    a = pos[tri[:, 0]]
    d1 = pos[tri[:, 1]] - a
    d2 = pos[tri[:, 2]] - a
    # orthonormal tangent pair per face
    b1 = d1 / np.sqrt(e11)[:, None]
    d2p = d2 - np.sum(d2 * b1, axis=1, keepdims=True) * b1
    b2 = d2p / np.linalg.norm(d2p, axis=1, keepdims=True)
    pts = (a[:, None, :] + bary[None, :, 0, None] * d1[:, None, :]
           + bary[None, :, 1, None] * d2[:, None, :])
    S = len(bary)
    F = len(tri)
    planes = np.broadcast_to(np.stack([b1, b2], axis=1)[:, None, :, :],
                             (F, S, 2, pos.shape[1])).reshape(F * S, 2, -1)
    weights = np.repeat(areas / S, S)
    boundary_pts = pos[mesh.boundary_vertices] if mesh.has_boundary else None
    return PushforwardVarifold(pts.reshape(F * S, -1), np.ascontiguousarray(planes),
                               weights, immersion.ambient, immersion.constraint,
                               boundary_pts, immersion.mean_edge_length())


def ball_mass(varifold, p, r):
    """Mass of the closed ambient ball (geodesic balls on sphere ambients)."""
    if r <= 0:
        raise ValueError("radius must be positive")
    return float(np.sum(varifold.weights[varifold.distances_to(p) <= r]))


class DensityCurve:
    """mu(B_r(p)) / (pi r^2) over a radii grid, with the worst monotone drop."""

    def __init__(self, center, radii, values, drop_statistic, boundary_point):
        self.center = center
        self.radii = radii
        self.values = values
        self.drop_statistic = drop_statistic
        self.boundary_point = boundary_point


def density_ratio_curve(varifold, p, radii):
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and increasing")
    d = varifold.distances_to(p)
    masses = np.asarray([np.sum(varifold.weights[d <= r]) for r in radii])
    values = masses / (np.pi * radii ** 2)
    drop = 0.0
    running_max = -np.inf
    for v in values:
        if running_max > 0 and v > 0:
            drop = max(drop, running_max / v)
        running_max = max(running_max, v)
    near_boundary = False
    if varifold.boundary_points is not None and varifold.mean_edge_length:
        gap = np.min(varifold.ambient.distance(varifold.boundary_points,
                                               np.asarray(p, dtype=float)))
        near_boundary = bool(gap <= 2.0 * varifold.mean_edge_length)
    return DensityCurve(np.asarray(p, dtype=float), radii, values, float(drop),
                        near_boundary)


def _check_field_admissible(varifold, field):
    if varifold.constraint is None:
        return
    if not field.tangent_to_N:
        raise FieldNotTangent(f"field {field.name} is not marked tangent to N")
    worst = field.check_tangency(varifold.constraint)
    if worst > TANGENCY_TOL:
        raise FieldNotTangent(
            f"field {field.name} violates tangency by {worst:.3e}")


def stationarity_residual(varifold, dictionary):
    """Normalized first-variation residual per test field.

    residual(X) = |sum w div_Pi X| / (C1 bound of X * total mass); returns
    (max residual, per-field table).
    """
    if not dictionary:
        raise ValueError("need at least one test field")
    table = {}
    mass = varifold.total_mass
    for X in dictionary:
        _check_field_admissible(varifold, X)
        div = X.divergence_on_plane(varifold.points, varifold.planes)
        raw = float(np.sum(varifold.weights * div))
        table[X.name] = abs(raw) / (X.c1_bound * mass)
    return max(table.values()), table


def orthogonality_residual(immersion):
    """Deviation (degrees) of the inward conormal from being normal to T_pN.

    Returns (max residual, per-boundary-vertex table).  Zero when the
    immersed surface meets N orthogonally along its boundary.
    """
    mesh, pos = immersion.mesh, immersion.positions
    if not mesh.has_boundary:
        raise NoBoundary("closed surface has no free boundary")
    if immersion.constraint is None:
        raise ValueError("orthogonality needs the constraint submanifold")
    statics = _core.fit_statics(mesh)
    e1, e2 = _core.chart_frames(np, pos, statics.ring_idx, statics.ring_cos,
                                statics.ring_sin)
    e11, e12, e22, det, areas = _core.face_metric(np, mesh.triangles, pos)
    centroids = pos[mesh.triangles].mean(axis=1)
    table = {}
    for v in mesh.boundary_vertices:
        v = int(v)
        prev_v, next_v = mesh.boundary_neighbors(v)
        tangent = pos[next_v] - pos[prev_v]
        faces = mesh.incident_faces[v]
        inward = np.sum((centroids[faces] - pos[v]) * areas[faces, None], axis=0)
        plane = np.stack([e1[v], e2[v]])
        t_in = plane.T @ (plane @ tangent)
        t_in /= np.linalg.norm(t_in)
        nu = plane.T @ (plane @ inward)
        nu = nu - np.dot(nu, t_in) * t_in
        nu /= np.linalg.norm(nu)
        p = immersion.constraint.project(pos[v])
        tangential = immersion.constraint.tangent_project(p, nu)
        cos_to_plane = np.clip(np.linalg.norm(tangential), 0.0, 1.0)
        # angle between nu and T_pN is arccos|P nu|; orthogonal => 90 degrees
        table[v] = float(np.degrees(np.arcsin(cos_to_plane)))
    return max(table.values()), table


def _graph_distances(immersion, sources=None):
    mesh, pos = immersion.mesh, immersion.positions
    e = mesh.edges
    lengths = np.sqrt(np.sum((pos[e[:, 1]] - pos[e[:, 0]]) ** 2, axis=1))
    V = mesh.vertex_count
    G = scipy.sparse.coo_matrix(
        (np.concatenate([lengths, lengths]),
         (np.concatenate([e[:, 0], e[:, 1]]),
          np.concatenate([e[:, 1], e[:, 0]]))), shape=(V, V)).tocsr()
    return scipy.sparse.csgraph.dijkstra(G, directed=False, indices=sources)


def detect_atoms(immersion, threshold=None, radius_grid=None, weights=None,
                 floor=None):
    """Domain vertices whose intrinsic balls hold >= threshold mass down to
    the grid floor (graph distance under the induced metric)."""
    w = vertex_areas(immersion) if weights is None else np.asarray(weights)
    total = float(np.sum(w))
    if threshold is None:
        threshold = ATOM_THRESHOLD_FRACTION * total
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    dist = _graph_distances(immersion)
    if radius_grid is None:
        floor = floor if floor is not None else 2.0 * immersion.mean_edge_length()
        top = float(np.max(dist[np.isfinite(dist)])) / 2.0
        if top <= floor:
            radius_grid = [floor]
        else:
            radius_grid = np.geomspace(top, floor, 6)
    radius_grid = np.sort(np.asarray(radius_grid, dtype=float))
    candidates = []
    for v in range(immersion.mesh.vertex_count):
        masses = [float(np.sum(w[dist[v] <= r])) for r in radius_grid]
        if all(m >= threshold for m in masses):
            candidates.append(v)
    return candidates


def _level_set_points(immersion, dist_from_center, radius):
    """Ambient positions where edges cross the intrinsic-distance level set."""
    mesh, pos = immersion.mesh, immersion.positions
    e = mesh.edges
    da, db = dist_from_center[e[:, 0]], dist_from_center[e[:, 1]]
    lo = np.minimum(da, db)
    hi = np.maximum(da, db)
    crossing = (lo <= radius) & (hi > radius) & np.isfinite(lo) & np.isfinite(hi)
    if not np.any(crossing):
        return np.zeros((0, pos.shape[1]))
    ea, eb = e[crossing, 0], e[crossing, 1]
    t = (radius - dist_from_center[ea]) / (dist_from_center[eb] - dist_from_center[ea])
    return pos[ea] + t[:, None] * (pos[eb] - pos[ea])


def _diameter(points):
    if len(points) < 2:
        return 0.0
    diff = points[:, None, :] - points[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))


def detect_necks(immersion, centers, dyadic_depth=4, outer_scale=None,
                 small_diameter=None, mass_threshold=None):
    """Flag dyadic annuli whose bounding curves have small ambient images
    while the enclosed inner region still carries at least the atom mass."""
    if dyadic_depth < 2:
        raise ValueError("dyadic depth must be >= 2")
    w = vertex_areas(immersion)
    total = float(np.sum(w))
    pos = immersion.positions
    if small_diameter is None:
        span = pos.max(axis=0) - pos.min(axis=0)
        small_diameter = SMALL_DIAMETER_FRACTION * float(np.linalg.norm(span))
    if mass_threshold is None:
        mass_threshold = ATOM_THRESHOLD_FRACTION * total
    centers = [int(c) for c in centers]
    dist = _graph_distances(immersion, sources=np.asarray(centers))
    if dist.ndim == 1:
        dist = dist[None, :]
    flagged = []
    for row, center in enumerate(centers):
        d = dist[row]
        R = outer_scale or float(np.max(d[np.isfinite(d)]))
        for j in range(dyadic_depth):
            r_out = R * 2.0 ** (-j)
            r_in = R * 2.0 ** (-j - 1)
            ann_mask = (d > r_in) & (d <= r_out)
            annulus_area = float(np.sum(w[ann_mask]))
            diam_in = _diameter(_level_set_points(immersion, d, r_in))
            diam_out = _diameter(_level_set_points(immersion, d, r_out))
            enclosed = float(np.sum(w[d <= r_in]))
            if (0.0 < diam_in <= small_diameter
                    and 0.0 < diam_out <= small_diameter
                    and enclosed >= mass_threshold):
                flagged.append({
                    "center": center, "inner_scale": r_in, "outer_scale": r_out,
                    "annulus_area": annulus_area, "inner_diameter": diam_in,
                    "outer_diameter": diam_out, "enclosed_mass": enclosed,
                })
    return flagged


def multiplicity_estimate(varifold, p, r):
    """Density ratio at one scale with its nearest-integer report."""
    ratio = ball_mass(varifold, p, r) / (np.pi * r * r)
    return ratio, int(round(ratio))
