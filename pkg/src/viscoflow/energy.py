"""The relaxed energy, its gradient, the variation-field norm, and the
almost-criticality surrogate."""

import numpy as np

from .ambient import make_coordinate_fields, make_radial_cutoff_field, make_rotation_fields
from .errors import EmptyDictionary, FieldNotTangent
from .kernel import get_kernel


class EnergyBreakdown:
    """area + sigma * boundary length + sigma^4 * integral |II|^4, term by term."""

    def __init__(self, sigma, area, length, bending):
        self.sigma = float(sigma)
        self.area_term = float(area)
        self.boundary_term = self.sigma * float(length)
        self.bending_term = self.sigma ** 4 * float(bending)
        self.total = self.area_term + self.boundary_term + self.bending_term
        self.sigma_derivative = float(length) + 4.0 * self.sigma ** 3 * float(bending)
        self.boundary_length = float(length)
        self.bending_integral = float(bending)

    def entropy(self):
        """sigma log(1/sigma) L + sigma^4 log(1/sigma) * integral |II|^4."""
        if self.sigma <= 0.0:
            return 0.0
        log_inv = np.log(1.0 / self.sigma)
        return (self.sigma * log_inv * self.boundary_length
                + self.sigma ** 4 * log_inv * self.bending_integral)

    def as_dict(self):
        return {"sigma": self.sigma, "area_term": self.area_term,
                "boundary_term": self.boundary_term,
                "bending_term": self.bending_term, "total": self.total,
                "sigma_derivative": self.sigma_derivative}

    def __repr__(self):
        return (f"EnergyBreakdown(sigma={self.sigma:g}, total={self.total:.6g}, "
                f"area={self.area_term:.6g})")


class VariationField:
    """Per-vertex variation vectors, admissible when tangent to M (and to N
    on the boundary)."""

    def __init__(self, vectors, admissible=False):
        self.vectors = np.asarray(vectors, dtype=float)
        self.admissible = bool(admissible)

    def tangency_violation(self, immersion):
        """Max normal component against M (and N on boundary vertices)."""
        pos, amb = immersion.positions, immersion.ambient
        normal = self.vectors - amb.tangent_project(pos, self.vectors)
        worst = float(np.max(np.sqrt(np.sum(normal ** 2, axis=1))))
        if immersion.constraint is not None and immersion.mesh.has_boundary:
            b = immersion.mesh.boundary_vertices
            vb = self.vectors[b]
            nb = vb - immersion.constraint.tangent_project(pos[b], vb)
            worst = max(worst, float(np.max(np.sqrt(np.sum(nb ** 2, axis=1)))))
        return worst


def make_admissible(immersion, vectors):
    """Tangent-project vectors onto T_M (and T_N at boundary vertices)."""
    pos = immersion.positions
    out = immersion.ambient.tangent_project(pos, np.asarray(vectors, dtype=float))
    if immersion.constraint is not None and immersion.mesh.has_boundary:
        b = immersion.mesh.boundary_vertices
        out = np.array(out)
        out[b] = immersion.constraint.tangent_project(pos[b], out[b])
    return out


def energy(immersion, sigma):
    """Evaluate the relaxed energy at the given scale."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    kern = get_kernel(immersion)
    area, length, bending = kern.terms(immersion.positions, sigma)
    return EnergyBreakdown(sigma, area, length, bending)


def gradient(immersion, sigma):
    """Exact derivative of the discrete constrained energy, tangent-projected.

    Differentiates the composite (positions -> project to M, boundary to N
    -> energy); matches central finite differences of that composite.
    """
    kern = get_kernel(immersion)
    raw = kern.raw_gradient(immersion.positions, sigma)
    return VariationField(make_admissible(immersion, raw), admissible=True)


def finsler_norm(immersion, field):
    """sup|w| + sup|grad w| + L^4 norm of the quadratic-fit second derivative."""
    vecs = field.vectors if isinstance(field, VariationField) else np.asarray(field)
    return get_kernel(immersion).finsler_norm(immersion.positions, vecs)


def standard_dictionary(immersion, count_cutoffs=3, seed=0):
    """Default test fields for the criticality surrogate.

    Rotation generators about the constraint's center (tangent to spherical
    constraints), radial cutoff fields supported away from N, and coordinate
    fields when no boundary constraint restricts them.
    """
    Q = immersion.ambient.embedding_dim
    fields = []
    constraint = immersion.constraint
    if constraint is not None and constraint.kind in ("sphere", "circle"):
        fields += make_rotation_fields(constraint.center, Q)
    elif constraint is None:
        fields += make_coordinate_fields(Q)
        fields += make_rotation_fields(np.zeros(Q), Q)
        for f in fields:
            f.tangent_to_N = True  # no constraint to be tangent to
    rng = np.random.default_rng(seed)
    pos = immersion.positions
    pick = rng.choice(len(pos), size=min(count_cutoffs, len(pos)), replace=False)
    for v in np.sort(pick):
        center = pos[v]
        if constraint is not None:
            gap = float(np.linalg.norm(constraint.project(center) - center))
            if gap < 1e-6:
                continue
            outer = 0.9 * gap
        else:
            outer = 2.0 * immersion.mean_edge_length() * 4
        fields.append(make_radial_cutoff_field(center, 0.5 * outer, outer,
                                               tangent_to_N=True))
    return fields


def criticality_norm(immersion, sigma, dictionary, check_tangency=True,
                     _grad=None):
    """Dual-norm surrogate: max over test fields of |<dE, w>| / ||w||_Phi.

    The raw gradient direction is always included; under-estimation only
    weakens the stopping rule.
    """
    if not dictionary:
        raise EmptyDictionary("criticality surrogate needs test fields")
    if check_tangency and immersion.constraint is not None:
        for X in dictionary:
            if not X.tangent_to_N:
                raise FieldNotTangent(f"field {X.name} is not marked tangent to N")
    kern = get_kernel(immersion)
    grad = _grad if _grad is not None else gradient(immersion, sigma).vectors
    pos = immersion.positions
    best = 0.0
    candidates = [make_admissible(immersion, X(pos)) for X in dictionary]
    candidates.append(grad)
    for w in candidates:
        norm = kern.finsler_norm(pos, w)
        if norm > 0.0:
            best = max(best, abs(float(np.sum(grad * w))) / norm)
    return best
