"""Shared discrete-geometry formulas, written once for numpy and jax.numpy.

Every function takes an explicit array module ``xp``.  The numpy path backs
mesh-level measurements; the jax path backs the energy kernel, whose
gradient is the exact derivative of these very formulas.
"""

from collections import namedtuple

import numpy as np

# static per-mesh arrays driving the quadratic fit
FitStatics = namedtuple(
    "FitStatics", "stencil_idx stencil_mask ring_idx ring_cos ring_sin")


def fit_statics(mesh):
    sidx, smask = mesh.stencil_arrays()
    ridx, rcos, rsin = mesh.chart_arrays()
    return FitStatics(sidx, smask, ridx, rcos, rsin)


def scatter_add(xp, size, idx, vals):
    if xp is np:
        out = np.zeros(size, dtype=float)
        np.add.at(out, idx, vals)
        return out
    return xp.zeros(size, dtype=float).at[idx].add(vals)


def project_positions(xp, ambient, constraint, boundary_idx, pos):
    """The constrained-configuration map: all vertices onto M, boundary onto N."""
    y = ambient.project(pos, xp=xp)
    if constraint is not None and len(boundary_idx):
        yb = constraint.project(y[boundary_idx], xp=xp)
        if xp is np:
            y = np.array(y)
            y[boundary_idx] = yb
        else:
            y = y.at[boundary_idx].set(yb)
    return y


def face_metric(xp, tri, pos):
    """Per-face induced metric entries and areas.

    The metric is (dPhi)^T dPhi in the affine chart sending the unit right
    triangle to the face, i.e. the Gram matrix of the two edge vectors at
    the first corner.  Face area = (1/2) sqrt(det).
    """
    a = pos[tri[:, 0]]
    b = pos[tri[:, 1]]
    c = pos[tri[:, 2]]
    d1 = b - a
    d2 = c - a
    e11 = xp.sum(d1 * d1, axis=-1)
    e12 = xp.sum(d1 * d2, axis=-1)
    e22 = xp.sum(d2 * d2, axis=-1)
    det = e11 * e22 - e12 * e12
    area = 0.5 * xp.sqrt(det)
    return e11, e12, e22, det, area


def boundary_edge_lengths(xp, boundary_edges, pos):
    if len(boundary_edges) == 0:
        return xp.zeros(0, dtype=float)
    d = pos[boundary_edges[:, 1]] - pos[boundary_edges[:, 0]]
    return xp.sqrt(xp.sum(d * d, axis=-1))


def vertex_mixed_areas(xp, tri, nverts, e11, e12, e22, area):
    """Mixed Voronoi vertex areas (circumcentric, half/quarter split if obtuse)."""
    two_area = 2.0 * area
    cot_a = e12 / two_area
    cot_b = (e11 - e12) / two_area
    cot_c = (e22 - e12) / two_area
    l_ab, l_ac = e11, e22
    l_bc = e11 + e22 - 2.0 * e12
    w_a = 0.125 * (l_ab * cot_c + l_ac * cot_b)
    w_b = 0.125 * (l_ab * cot_c + l_bc * cot_a)
    w_c = 0.125 * (l_ac * cot_b + l_bc * cot_a)
    obtuse = (cot_a < 0) | (cot_b < 0) | (cot_c < 0)
    w_a = xp.where(obtuse, xp.where(cot_a < 0, 0.5 * area, 0.25 * area), w_a)
    w_b = xp.where(obtuse, xp.where(cot_b < 0, 0.5 * area, 0.25 * area), w_b)
    w_c = xp.where(obtuse, xp.where(cot_c < 0, 0.5 * area, 0.25 * area), w_c)
    out = scatter_add(xp, nverts, tri[:, 0], w_a)
    out = out + scatter_add(xp, nverts, tri[:, 1], w_b)
    out = out + scatter_add(xp, nverts, tri[:, 2], w_c)
    return out


def chart_frames(xp, pos, ring_idx, ring_cos, ring_sin):
    """Per-vertex orthonormal chart (e1, e2) from the ordered one-ring.

    Gram-Schmidt on the two fixed-weight ring combinations (the ring's
    fundamental Fourier mode).  Symmetric under the star's symmetries and
    smooth in positions: no eigen-decompositions, so autodiff stays finite.
    """
    delta = pos[ring_idx] - pos[:, None, :]
    a = xp.sum(ring_cos[:, :, None] * delta, axis=1)
    b = xp.sum(ring_sin[:, :, None] * delta, axis=1)
    e1 = a / xp.sqrt(xp.sum(a * a, axis=-1, keepdims=True))
    b_perp = b - xp.sum(b * e1, axis=-1, keepdims=True) * e1
    e2 = b_perp / xp.sqrt(xp.sum(b_perp * b_perp, axis=-1, keepdims=True))
    return e1, e2


def fit_design(xp, pos, stencil_idx, stencil_mask, e1, e2):
    """Masked quadratic design matrix over the chart coordinates.

    Returns (A, delta, u, v) with A of shape (V, K, 5); columns are
    (u^2/2, u v, v^2/2, u, v) so the first three fitted coefficients are the
    Hessian entries (H11, H12, H22) directly.
    """
    delta = pos[stencil_idx] - pos[:, None, :]
    u = xp.sum(delta * e1[:, None, :], axis=-1)
    v = xp.sum(delta * e2[:, None, :], axis=-1)
    A = xp.stack([0.5 * u * u, u * v, 0.5 * v * v, u, v], axis=-1)
    A = A * stencil_mask[:, :, None]
    return A, delta, u, v


def solve_fit(xp, A, targets):
    """Least-squares coefficients (V, 5, D) for masked targets (V, K, D)."""
    M = xp.einsum("vka,vkb->vab", A, A)
    rhs = xp.einsum("vka,vkd->vad", A, targets)
    return xp.linalg.solve(M, rhs)


def contracted_hessian_sq(xp, coef, ginv):
    """sum_q tr(g^-1 H_q g^-1 H_q) for fitted Hessians H_q = [[c0, c1], [c1, c2]]."""
    h11, h12, h22 = coef[:, 0, :], coef[:, 1, :], coef[:, 2, :]
    gi11 = ginv[:, 0, 0][:, None]
    gi12 = ginv[:, 0, 1][:, None]
    gi22 = ginv[:, 1, 1][:, None]
    # T = ginv @ H per ambient component
    t11 = gi11 * h11 + gi12 * h12
    t12 = gi11 * h12 + gi12 * h22
    t21 = gi12 * h11 + gi22 * h12
    t22 = gi12 * h12 + gi22 * h22
    return xp.sum(t11 * t11 + t12 * t21 + t21 * t12 + t22 * t22, axis=-1)


def vertex_metric_inverse(xp, J):
    """Inverse of g = I2 + J J^T at the vertex, J the fitted slopes (V, 2, Q)."""
    g11 = 1.0 + xp.sum(J[:, 0, :] * J[:, 0, :], axis=-1)
    g12 = xp.sum(J[:, 0, :] * J[:, 1, :], axis=-1)
    g22 = 1.0 + xp.sum(J[:, 1, :] * J[:, 1, :], axis=-1)
    det = g11 * g22 - g12 * g12
    ginv = xp.stack([
        xp.stack([g22 / det, -g12 / det], axis=-1),
        xp.stack([-g12 / det, g11 / det], axis=-1),
    ], axis=-2)
    return ginv


def shape_squared_density(xp, pos, statics):
    """Per-vertex |II|^2 by quadratic fitting of the normal offsets.

    Returns (f, coef, ginv): f is the squared second-fundamental-form
    magnitude; coef the raw fit coefficients (V, 5, Q); ginv the inverse
    vertex metric in the chart.
    """
    e1, e2 = chart_frames(xp, pos, statics.ring_idx, statics.ring_cos,
                          statics.ring_sin)
    A, delta, u, v = fit_design(xp, pos, statics.stencil_idx,
                                statics.stencil_mask, e1, e2)
    normal_resid = (delta
                    - u[:, :, None] * e1[:, None, :]
                    - v[:, :, None] * e2[:, None, :])
    normal_resid = normal_resid * statics.stencil_mask[:, :, None]
    coef = solve_fit(xp, A, normal_resid)
    ginv = vertex_metric_inverse(xp, coef[:, 3:5, :])
    f = contracted_hessian_sq(xp, coef, ginv)
    return f, coef, ginv


def field_hessian_sq(xp, pos, field, statics, ginv=None):
    """Per-vertex |grad^2 w|^2 of a vertex field by the same quadratic fit."""
    e1, e2 = chart_frames(xp, pos, statics.ring_idx, statics.ring_cos,
                          statics.ring_sin)
    A, _, _, _ = fit_design(xp, pos, statics.stencil_idx,
                            statics.stencil_mask, e1, e2)
    diffs = (field[statics.stencil_idx] - field[:, None, :]) \
        * statics.stencil_mask[:, :, None]
    coef = solve_fit(xp, A, diffs)
    if ginv is None:
        _, _, ginv = shape_squared_density(xp, pos, statics)
    return contracted_hessian_sq(xp, coef, ginv)


def face_gradient_sq(xp, tri, pos, field, e11, e12, e22, det):
    """Per-face |grad w|^2 = tr(g^-1 dW^T dW) of the linear interpolant."""
    w1 = field[tri[:, 1]] - field[tri[:, 0]]
    w2 = field[tri[:, 2]] - field[tri[:, 0]]
    q11 = xp.sum(w1 * w1, axis=-1)
    q12 = xp.sum(w1 * w2, axis=-1)
    q22 = xp.sum(w2 * w2, axis=-1)
    return (e22 * q11 - 2.0 * e12 * q12 + e11 * q22) / det
