"""Ambient manifold M in R^Q and the boundary-constraint submanifold N.

Both are closed-form kinds exposed as projection / tangent-projection
oracles.  Every geometric method accepts an ``xp`` array module so the same
formulas run under numpy (validation, diagnostics) and jax.numpy (the
differentiable energy kernel).
"""

import numpy as np

from .errors import BadRadii, PointOffManifold, ProjectionIllPosed

DEFAULT_TOLERANCE = 1e-9


def _norm(x, xp, axis=-1, keepdims=False):
    return xp.sqrt(xp.sum(x * x, axis=axis, keepdims=keepdims))


class AmbientManifold:
    """The target manifold (M, g) isometrically embedded in R^Q.

    Kinds: ``euclidean`` (M = R^m), ``sphere`` (round S^m of given radius),
    ``flat_torus`` (product of circles in R^{2m}, one per period).
    """

    def __init__(self, kind, dim, radius=1.0, center=None, periods=None,
                 tolerance=DEFAULT_TOLERANCE):
        kind = kind.lower()
        if kind not in ("euclidean", "sphere", "flat_torus"):
            raise ValueError(f"unknown ambient kind {kind!r}")
        self.kind = kind
        self.dim = int(dim)
        self.tolerance = float(tolerance)
        if kind == "euclidean":
            self.embedding_dim = self.dim
        elif kind == "sphere":
            self.embedding_dim = self.dim + 1
            self.radius = float(radius)
            self.center = (np.zeros(self.embedding_dim) if center is None
                           else np.asarray(center, dtype=float))
            if self.center.shape != (self.embedding_dim,):
                raise ValueError("sphere center has wrong dimension")
        else:
            self.periods = np.asarray(periods, dtype=float)
            if self.periods.ndim != 1 or len(self.periods) != self.dim:
                raise ValueError("flat_torus needs one period per dimension")
            if np.any(self.periods <= 0):
                raise ValueError("flat_torus periods must be positive")
            self.embedding_dim = 2 * self.dim
            self.circle_radii = self.periods / (2.0 * np.pi)
        if self.embedding_dim < 2:
            raise ValueError("embedding dimension must be >= 2")

    @property
    def is_flat(self):
        return self.kind == "euclidean"

    def project(self, x, xp=np):
        """Nearest-point projection onto M. Raises only under numpy."""
        x = xp.asarray(x, dtype=float)
        if self.kind == "euclidean":
            return x
        if self.kind == "sphere":
            d = x - self.center
            r = _norm(d, xp, keepdims=True)
            if xp is np and np.any(r < 1e-12 * max(self.radius, 1.0)):
                raise ProjectionIllPosed("point at sphere center")
            return self.center + self.radius * d / r
        # flat torus: radial projection in each coordinate pair
        shape = x.shape
        pairs = x.reshape(shape[:-1] + (self.dim, 2))
        r = _norm(pairs, xp, keepdims=True)
        if xp is np and np.any(r < 1e-12 * np.max(self.circle_radii)):
            raise ProjectionIllPosed("point on a torus circle axis")
        out = pairs / r * self.circle_radii.reshape((self.dim, 1))
        return out.reshape(shape)

    def contains(self, x):
        """True when every row of x lies on M to tolerance."""
        x = np.asarray(x, dtype=float)
        return bool(np.all(_norm(self.project(x) - x, np) <= self.tolerance))

    def tangent_project(self, p, v, xp=np, check=False):
        """Project v onto T_pM; p must lie on M (checked under numpy only)."""
        p = xp.asarray(p, dtype=float)
        v = xp.asarray(v, dtype=float)
        if check and xp is np and not self.contains(p):
            raise PointOffManifold("base point off the ambient manifold")
        if self.kind == "euclidean":
            return v
        if self.kind == "sphere":
            n = (p - self.center) / self.radius
            return v - xp.sum(v * n, axis=-1, keepdims=True) * n
        shape = p.shape
        pp = p.reshape(shape[:-1] + (self.dim, 2))
        vv = v.reshape(shape[:-1] + (self.dim, 2))
        n = pp / _norm(pp, xp, keepdims=True)
        out = vv - xp.sum(vv * n, axis=-1, keepdims=True) * n
        return out.reshape(shape)

    def tangent_projector(self, p):
        """The Q x Q orthogonal projector onto T_pM (single point, numpy)."""
        p = np.asarray(p, dtype=float)
        Q = self.embedding_dim
        eye = np.eye(Q)
        return np.stack([self.tangent_project(p, eye[i]) for i in range(Q)], axis=1)

    def distance(self, x, y):
        """Ambient distance: geodesic arc on the sphere, chordal elsewhere."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "sphere":
            u = (x - self.center) / self.radius
            w = (y - self.center) / self.radius
            c = np.clip(np.sum(u * w, axis=-1), -1.0, 1.0)
            return self.radius * np.arccos(c)
        return _norm(x - y, np)

    def describe(self):
        out = {"kind": self.kind, "dim": self.dim}
        if self.kind == "sphere":
            out["radius"] = self.radius
            out["center"] = self.center.tolist()
        elif self.kind == "flat_torus":
            out["periods"] = self.periods.tolist()
        return out


class ConstraintSubmanifold:
    """The closed submanifold N that boundary vertices must lie on.

    Kinds: ``sphere`` (hypersphere, n = Q-1), ``plane`` (affine n-plane),
    ``circle`` (round circle in a 2-plane), ``product_torus`` (product of
    circles in consecutive coordinate pairs).
    """

    def __init__(self, kind, embedding_dim, radius=1.0, center=None,
                 basepoint=None, basis=None, plane=None, radii=None,
                 tolerance=DEFAULT_TOLERANCE):
        kind = kind.lower()
        if kind not in ("sphere", "plane", "circle", "product_torus"):
            raise ValueError(f"unknown constraint kind {kind!r}")
        self.kind = kind
        self.embedding_dim = Q = int(embedding_dim)
        self.tolerance = float(tolerance)
        if kind == "sphere":
            self.radius = float(radius)
            self.center = np.zeros(Q) if center is None else np.asarray(center, float)
            self.dim = Q - 1
        elif kind == "plane":
            self.basepoint = np.zeros(Q) if basepoint is None else np.asarray(basepoint, float)
            B = np.asarray(basis, dtype=float)
            if B.ndim != 2 or B.shape[1] != Q:
                raise ValueError("plane basis must be (n, Q)")
            q, _ = np.linalg.qr(B.T)
            self.basis = q.T[: B.shape[0]]
            self.dim = B.shape[0]
        elif kind == "circle":
            self.radius = float(radius)
            self.center = np.zeros(Q) if center is None else np.asarray(center, float)
            P = np.asarray(plane, dtype=float)
            if P.shape != (2, Q):
                raise ValueError("circle plane must be two spanning vectors (2, Q)")
            q, _ = np.linalg.qr(P.T)
            self.plane = q.T[:2]
            self.dim = 1
        else:
            self.radii = np.asarray(radii, dtype=float)
            k = len(self.radii)
            if Q != 2 * k:
                raise ValueError("product_torus needs embedding_dim = 2 * len(radii)")
            self.dim = k
        if not (1 <= self.dim < Q):
            raise ValueError("constraint dimension must satisfy 1 <= n < Q")

    def project(self, x, xp=np):
        x = xp.asarray(x, dtype=float)
        if self.kind == "sphere":
            d = x - self.center
            r = _norm(d, xp, keepdims=True)
            if xp is np and np.any(r < 1e-12 * max(self.radius, 1.0)):
                raise ProjectionIllPosed("point at constraint sphere center")
            return self.center + self.radius * d / r
        if self.kind == "plane":
            d = x - self.basepoint
            coeff = d @ self.basis.T
            return self.basepoint + coeff @ self.basis
        if self.kind == "circle":
            d = x - self.center
            coeff = d @ self.plane.T
            r = _norm(coeff, xp, keepdims=True)
            if xp is np and np.any(r < 1e-12 * max(self.radius, 1.0)):
                raise ProjectionIllPosed("point on the circle's axis")
            return self.center + (self.radius * coeff / r) @ self.plane
        shape = x.shape
        k = self.dim
        pairs = x.reshape(shape[:-1] + (k, 2))
        r = _norm(pairs, xp, keepdims=True)
        if xp is np and np.any(r < 1e-12 * np.max(self.radii)):
            raise ProjectionIllPosed("point on a torus circle axis")
        out = pairs / r * self.radii.reshape((k, 1))
        return out.reshape(shape)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(_norm(self.project(x) - x, np) <= self.tolerance))

    def tangent_project(self, p, v, xp=np, check=False):
        """Rank-n projection of v onto T_pN; p must lie on N."""
        p = xp.asarray(p, dtype=float)
        v = xp.asarray(v, dtype=float)
        if check and xp is np and not self.contains(p):
            raise PointOffManifold("base point off the constraint")
        if self.kind == "sphere":
            n = (p - self.center) / self.radius
            return v - xp.sum(v * n, axis=-1, keepdims=True) * n
        if self.kind == "plane":
            return (v @ self.basis.T) @ self.basis
        if self.kind == "circle":
            coeff = (p - self.center) @ self.plane.T
            rho = coeff / _norm(coeff, xp, keepdims=True)
            # rotate the radial direction by 90 degrees inside the plane
            tang = xp.stack([-rho[..., 1], rho[..., 0]], axis=-1) @ self.plane
            return xp.sum(v * tang, axis=-1, keepdims=True) * tang
        shape = p.shape
        k = self.dim
        pp = p.reshape(shape[:-1] + (k, 2))
        vv = v.reshape(shape[:-1] + (k, 2))
        n = pp / _norm(pp, xp, keepdims=True)
        tang = xp.stack([-n[..., 1], n[..., 0]], axis=-1)
        out = xp.sum(vv * tang, axis=-1, keepdims=True) * tang
        return out.reshape(shape)

    def tangent_projector(self, p):
        p = np.asarray(p, dtype=float)
        Q = self.embedding_dim
        eye = np.eye(Q)
        return np.stack([self.tangent_project(p, eye[i]) for i in range(Q)], axis=1)

    def sample_points(self, count, seed=0):
        """Deterministic points on N, for tangency checks."""
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal((count, self.embedding_dim))
        if self.kind == "plane":
            raw = self.basepoint + (raw @ self.basis.T) @ self.basis
            return raw
        return self.project(raw + 1e-3)  # offset avoids exact focal points

    def describe(self):
        out = {"kind": self.kind, "dim": self.dim}
        if self.kind in ("sphere", "circle"):
            out["radius"] = self.radius
            out["center"] = self.center.tolist()
        if self.kind == "circle":
            out["plane"] = self.plane.tolist()
        if self.kind == "plane":
            out["basepoint"] = self.basepoint.tolist()
            out["basis"] = self.basis.tolist()
        if self.kind == "product_torus":
            out["radii"] = self.radii.tolist()
        return out


def smoothstep_complement(t):
    """C^2 cutoff profile: 1 on t<=0, 0 on t>=1, quintic in between."""
    t = np.clip(t, 0.0, 1.0)
    return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


def _smoothstep_complement_deriv(t):
    inside = (t > 0.0) & (t < 1.0)
    tt = np.where(inside, t, 0.5)
    d = -(30.0 * tt * tt * (1.0 - tt) ** 2)
    return np.where(inside, d, 0.0)


class TestVectorField:
    """Closed-form ambient vector field with an analytic Jacobian.

    ``kind`` is one of ``constant`` (X = value), ``linear``
    (X = matrix @ (x - center)) or ``radial_cutoff``
    (X = (x - center) * chi(|x - center|)).  ``c1_bound`` must upper-bound
    sup|X| + sup|DX| on the region of use.
    """

    def __init__(self, kind, tangent_to_N=False, value=None, matrix=None,
                 center=None, inner=None, outer=None, c1_bound=None, name=None):
        self.kind = kind
        self.tangent_to_N = bool(tangent_to_N)
        self.name = name or kind
        if kind == "constant":
            self.value = np.asarray(value, dtype=float)
            self.c1_bound = float(c1_bound) if c1_bound is not None else float(
                np.linalg.norm(self.value))
            self.cutoff = None
        elif kind == "linear":
            self.matrix = np.asarray(matrix, dtype=float)
            self.center = np.asarray(center, dtype=float)
            if c1_bound is None:
                raise ValueError("linear fields need an explicit c1_bound")
            self.c1_bound = float(c1_bound)
            self.cutoff = None
        elif kind == "radial_cutoff":
            if not (0.0 < inner < outer):
                raise BadRadii("need 0 < inner < outer")
            self.center = np.asarray(center, dtype=float)
            self.inner = float(inner)
            self.outer = float(outer)
            self.cutoff = (self.center, self.inner, self.outer)
            # sup|X| <= outer; sup|DX| <= 1 + outer * max|chi'|
            width = self.outer - self.inner
            self.c1_bound = self.outer + 1.0 + self.outer * 1.875 / width
        else:
            raise ValueError(f"unknown field kind {kind!r}")

    def _chi(self, rho):
        return smoothstep_complement((rho - self.inner) / (self.outer - self.inner))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.broadcast_to(self.value, x.shape).copy()
        if self.kind == "linear":
            return (x - self.center) @ self.matrix.T
        d = x - self.center
        rho = _norm(d, np, keepdims=True)
        out = d * self._chi(rho)
        return np.where(rho >= self.outer, 0.0, out)

    def jacobian(self, x):
        """Analytic Jacobian DX, shape (..., Q, Q)."""
        x = np.asarray(x, dtype=float)
        Q = x.shape[-1]
        if self.kind == "constant":
            return np.zeros(x.shape + (Q,))
        if self.kind == "linear":
            return np.broadcast_to(self.matrix, x.shape + (Q,)).copy()
        d = x - self.center
        rho = _norm(d, np, keepdims=True)
        width = self.outer - self.inner
        t = (rho - self.inner) / width
        chi = smoothstep_complement(t)
        dchi = _smoothstep_complement_deriv(t) / width
        safe_rho = np.where(rho > 0, rho, 1.0)
        eye = np.eye(Q)
        jac = chi[..., None] * eye + (dchi / safe_rho)[..., None] * d[..., :, None] * d[..., None, :]
        outside = (rho >= self.outer)[..., None]
        return np.where(outside, 0.0, jac)

    def divergence_on_plane(self, x, basis):
        """div_Pi X at points x for orthonormal plane bases (..., 2, Q)."""
        jac = self.jacobian(x)
        # sum_i e_i . (DX e_i)
        je = np.einsum("...qr,...ir->...iq", jac, basis)
        return np.einsum("...iq,...iq->...", basis, je)

    def check_tangency(self, constraint, count=100, tol=1e-10, seed=3):
        """Max normal component over sampled points of N (claimed-tangent fields)."""
        pts = constraint.sample_points(count, seed=seed)
        vals = self(pts)
        normal = vals - constraint.tangent_project(pts, vals)
        return float(np.max(_norm(normal, np))) if len(pts) else 0.0


def make_radial_cutoff_field(center, inner, outer, tangent_to_N=False):
    """Position field around ``center`` cut off between the two radii."""
    if not (0.0 < inner < outer):
        raise BadRadii(f"need 0 < inner < outer, got {inner}, {outer}")
    return TestVectorField("radial_cutoff", tangent_to_N=tangent_to_N,
                           center=center, inner=inner, outer=outer,
                           name=f"cutoff[{inner:g},{outer:g}]")


def make_rotation_fields(center, dim, scale_radius=2.0):
    """Generators of rotations about ``center``; tangent to any sphere centered there."""
    center = np.asarray(center, dtype=float)
    fields = []
    for i in range(dim):
        for j in range(i + 1, dim):
            S = np.zeros((dim, dim))
            S[i, j] = 1.0
            S[j, i] = -1.0
            fields.append(TestVectorField(
                "linear", tangent_to_N=True, matrix=S, center=center,
                c1_bound=scale_radius + 1.0, name=f"rot[{i}{j}]"))
    return fields


def make_coordinate_fields(dim):
    """Constant unit fields along each coordinate axis (not tangent to curved N)."""
    return [TestVectorField("constant", value=np.eye(dim)[i], name=f"coord[{i}]")
            for i in range(dim)]
