"""Discrete immersions and their induced geometry (numpy measurement path)."""

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from . import _core
from .errors import (DegenerateFace, MeshInvalid, PointOffManifold,
                     StencilRankDeficient, WrongTopology)

DEGENERACY_FLOOR = 1e-14  # times (mean edge length)^4


class Immersion:
    """Vertex positions realizing the map Phi, with Phi(boundary) on N.

    Positions are never mutated in place; ``with_positions`` produces the
    next state.  Validation checks the on-manifold conditions and the
    face-degeneracy floor.
    """

    def __init__(self, mesh, positions, ambient, constraint=None,
                 degeneracy_floor=DEGENERACY_FLOOR, validate=True):
        self.mesh = mesh
        self.positions = np.asarray(positions, dtype=float)
        self.ambient = ambient
        self.constraint = constraint
        self.degeneracy_floor = float(degeneracy_floor)
        if self.positions.shape != (mesh.vertex_count, ambient.embedding_dim):
            raise MeshInvalid(
                f"positions must be ({mesh.vertex_count}, {ambient.embedding_dim})")
        self.positions.setflags(write=False)
        if validate:
            self.validate()

    def validate(self):
        if not self.ambient.contains(self.positions):
            raise PointOffManifold("a vertex is off the ambient manifold")
        if self.constraint is not None and self.mesh.has_boundary:
            if not self.constraint.contains(self.positions[self.mesh.boundary_vertices]):
                raise PointOffManifold("a boundary vertex is off the constraint")
        _, _, _, det, _ = _core.face_metric(np, self.mesh.triangles, self.positions)
        floor = self.degeneracy_floor * self.mean_edge_length() ** 4
        bad = np.nonzero(det < floor)[0]
        if len(bad):
            raise DegenerateFace(int(bad[0]), state=self)

    def with_positions(self, positions, validate=True):
        return Immersion(self.mesh, positions, self.ambient, self.constraint,
                         self.degeneracy_floor, validate=validate)

    def mean_edge_length(self):
        e = self.mesh.edges
        d = self.positions[e[:, 1]] - self.positions[e[:, 0]]
        return float(np.mean(np.sqrt(np.sum(d * d, axis=1))))

    def project_positions(self, positions):
        """Project raw positions onto M (and boundary rows onto N)."""
        return _core.project_positions(np, self.ambient, self.constraint,
                                       self.mesh.boundary_vertices, positions)


class MetricField:
    """Per-face induced metric, face areas, and boundary edge lengths."""

    def __init__(self, g, areas, boundary_lengths):
        self.g = g
        self.areas = areas
        self.boundary_lengths = boundary_lengths


class ShapeField:
    """Per-vertex |II|^2 with the unit normal frame and stencil metadata."""

    def __init__(self, f, normal_frames, stencil_sizes, stencil_extended):
        self.f = f
        self.normal_frames = normal_frames
        self.stencil_sizes = stencil_sizes
        self.stencil_extended = stencil_extended


def induced_metric(immersion):
    mesh, pos = immersion.mesh, immersion.positions
    e11, e12, e22, det, areas = _core.face_metric(np, mesh.triangles, pos)
    floor = immersion.degeneracy_floor * immersion.mean_edge_length() ** 4
    bad = np.nonzero(det < floor)[0]
    if len(bad):
        raise DegenerateFace(int(bad[0]), state=immersion)
    g = np.empty((mesh.face_count, 2, 2))
    g[:, 0, 0] = e11
    g[:, 0, 1] = g[:, 1, 0] = e12
    g[:, 1, 1] = e22
    blen = _core.boundary_edge_lengths(np, mesh.boundary_edges, pos)
    return MetricField(g, areas, blen)


def area(immersion):
    return float(np.sum(induced_metric(immersion).areas))


def boundary_length(immersion):
    return float(np.sum(induced_metric(immersion).boundary_lengths))


def vertex_areas(immersion):
    """Mixed Voronoi vertex areas under the induced metric."""
    mesh, pos = immersion.mesh, immersion.positions
    e11, e12, e22, det, areas = _core.face_metric(np, mesh.triangles, pos)
    return _core.vertex_mixed_areas(np, mesh.triangles, mesh.vertex_count,
                                    e11, e12, e22, areas)


def _check_stencil_rank(immersion):
    mesh, pos = immersion.mesh, immersion.positions
    statics = _core.fit_statics(mesh)
    e1, e2 = _core.chart_frames(np, pos, statics.ring_idx, statics.ring_cos,
                                statics.ring_sin)
    A, _, _, _ = _core.fit_design(np, pos, statics.stencil_idx,
                                  statics.stencil_mask, e1, e2)
    M = np.einsum("vka,vkb->vab", A, A)
    svals = np.linalg.svd(M, compute_uv=False)
    bad = np.nonzero(svals[:, -1] <= 1e-12 * svals[:, 0])[0]
    if len(bad):
        raise StencilRankDeficient(int(bad[0]))


def shape_operator(immersion):
    """Per-vertex |II|^2 by quadratic fitting over the local tangent chart."""
    mesh, pos = immersion.mesh, immersion.positions
    _check_stencil_rank(immersion)
    statics = _core.fit_statics(mesh)
    f, coef, ginv = _core.shape_squared_density(np, pos, statics)
    e1, e2 = _core.chart_frames(np, pos, statics.ring_idx, statics.ring_cos,
                                statics.ring_sin)
    # orthonormal complement of the chart plane: trailing columns of a full QR
    basis = np.stack([e1, e2], axis=-1)
    q_full, _ = np.linalg.qr(basis, mode="complete")
    frames = np.swapaxes(q_full[:, :, 2:], 1, 2)
    sizes = np.asarray([len(s) for s in mesh.stencils])
    return ShapeField(f, frames, sizes, mesh.stencil_extended)


def bending_integral(immersion):
    """Integral of |II|^4 against the induced area measure."""
    f = shape_operator(immersion).f
    return float(np.sum(f * f * vertex_areas(immersion)))


def cotangent_weights(mesh, positions):
    """Per-undirected-edge cotangent weights (1/2)(cot a + cot b)."""
    e11, e12, e22, det, areas = _core.face_metric(np, mesh.triangles, positions)
    two_area = 2.0 * areas
    cots = np.stack([e12 / two_area,            # angle at corner 0
                     (e11 - e12) / two_area,    # corner 1
                     (e22 - e12) / two_area],   # corner 2
                    axis=1)
    tri = mesh.triangles
    V = mesh.vertex_count
    rows, cols, vals = [], [], []
    opposite = [(1, 2), (2, 0), (0, 1)]
    for corner, (i, j) in enumerate(opposite):
        rows.append(tri[:, i])
        cols.append(tri[:, j])
        vals.append(0.5 * cots[:, corner])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    W = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(V, V))
    W = W + W.T
    return W.tocsr()


def annulus_modulus_estimate(immersion):
    """Conformal modulus of an annulus immersion from the harmonic potential.

    Solves the discrete harmonic function with values 0 and 1 on the two
    boundary loops (cotangent weights of the induced metric) and returns the
    reciprocal of its Dirichlet energy; equals log(R/r)/(2 pi) for the flat
    round annulus.
    """
    mesh = immersion.mesh
    if not (mesh.genus == 0 and mesh.boundary_component_count == 2):
        raise WrongTopology(
            f"need an annulus, got genus {mesh.genus} with "
            f"{mesh.boundary_component_count} boundary loops")
    W = cotangent_weights(mesh, immersion.positions)
    V = mesh.vertex_count
    deg = np.asarray(W.sum(axis=1)).ravel()
    L = scipy.sparse.diags(deg) - W
    u = np.zeros(V)
    loop0, loop1 = mesh.boundary_loops
    u[loop1] = 1.0
    fixed = np.zeros(V, dtype=bool)
    fixed[loop0] = True
    fixed[loop1] = True
    free = ~fixed
    if np.any(free):
        rhs = -L[free][:, fixed] @ u[fixed]
        u[free] = scipy.sparse.linalg.spsolve(L[free][:, free].tocsc(), rhs)
    du = u[mesh.edges[:, 0]] - u[mesh.edges[:, 1]]
    w_edge = np.asarray(W[mesh.edges[:, 0], mesh.edges[:, 1]]).ravel()
    dirichlet = float(np.sum(w_edge * du * du))
    return 1.0 / dirichlet
