"""Compiled evaluation of the relaxed energy and its exact position gradient.

The energy of a configuration is evaluated through the constrained
composite: raw positions are projected onto M (boundary rows additionally
onto N) before any geometric quantity is formed.  The gradient is the jax
derivative of exactly that composite, so it matches central finite
differences of the same map by construction.
"""

import weakref

import numpy as np
import jax

jax.config.update("jax_enable_x64", True)

import jax.numpy as jnp

from . import _core

_KERNELS = weakref.WeakKeyDictionary()


def get_kernel(immersion):
    """Kernel cache keyed on (mesh, ambient, constraint)."""
    per_mesh = _KERNELS.setdefault(immersion.mesh, {})
    key = (id(immersion.ambient), id(immersion.constraint))
    if key not in per_mesh:
        per_mesh[key] = EnergyKernel(immersion.mesh, immersion.ambient,
                                     immersion.constraint)
    return per_mesh[key]


class EnergyKernel:

    def __init__(self, mesh, ambient, constraint):
        self.mesh = mesh
        self.ambient = ambient
        self.constraint = constraint
        self.tri = np.asarray(mesh.triangles)
        self.boundary_edges = np.asarray(mesh.boundary_edges)
        self.boundary_idx = np.asarray(mesh.boundary_vertices)
        self.statics = _core.fit_statics(mesh)
        self.nverts = mesh.vertex_count

        self._terms_bend = jax.jit(lambda pos: self._terms(pos, True))
        self._terms_flat = jax.jit(lambda pos: self._terms(pos, False))
        self._grad_bend = jax.jit(jax.grad(
            lambda pos, sigma: self._total(pos, sigma, True)))
        self._grad_flat = jax.jit(jax.grad(
            lambda pos, sigma: self._total(pos, sigma, False)))
        self._finsler_jit = jax.jit(self._finsler)

    # -- jax-side formulas ---------------------------------------------------

    def _project(self, pos):
        return _core.project_positions(jnp, self.ambient, self.constraint,
                                       self.boundary_idx, pos)

    def _terms(self, pos, include_bending):
        y = self._project(pos)
        e11, e12, e22, det, area_f = _core.face_metric(jnp, self.tri, y)
        area = jnp.sum(area_f)
        length = jnp.sum(_core.boundary_edge_lengths(jnp, self.boundary_edges, y))
        if include_bending:
            f, _, _ = _core.shape_squared_density(jnp, y, self.statics)
            av = _core.vertex_mixed_areas(jnp, self.tri, self.nverts,
                                          e11, e12, e22, area_f)
            bending = jnp.sum(f * f * av)
        else:
            bending = jnp.asarray(0.0)
        return area, length, bending

    def _total(self, pos, sigma, include_bending):
        area, length, bending = self._terms(pos, include_bending)
        return area + sigma * length + sigma ** 4 * bending

    def _finsler(self, pos, w):
        e11, e12, e22, det, area_f = _core.face_metric(jnp, self.tri, pos)
        sup = jnp.max(jnp.sqrt(jnp.sum(w * w, axis=-1)))
        grad_sq = _core.face_gradient_sq(jnp, self.tri, pos, w, e11, e12, e22, det)
        sup_grad = jnp.sqrt(jnp.max(grad_sq))
        _, _, ginv = _core.shape_squared_density(jnp, pos, self.statics)
        m = _core.field_hessian_sq(jnp, pos, w, self.statics, ginv=ginv)
        av = _core.vertex_mixed_areas(jnp, self.tri, self.nverts,
                                      e11, e12, e22, area_f)
        l4 = jnp.sum(m * m * av) ** 0.25
        return sup + sup_grad + l4

    # -- numpy-facing API ------------------------------------------------------

    def terms(self, positions, sigma):
        """(area, boundary length, integral of |II|^4) of the projected state."""
        fn = self._terms_bend if sigma > 0.0 else self._terms_flat
        area, length, bending = fn(jnp.asarray(positions))
        return float(area), float(length), float(bending)

    def total(self, positions, sigma):
        area, length, bending = self.terms(positions, sigma)
        return area + sigma * length + sigma ** 4 * bending

    def raw_gradient(self, positions, sigma):
        """d(total)/d(positions) of the constrained composite, unprojected."""
        fn = self._grad_bend if sigma > 0.0 else self._grad_flat
        return np.asarray(fn(jnp.asarray(positions), float(sigma)))

    def finsler_norm(self, positions, field):
        """sup|w| + sup|grad w| + L^4 norm of the fitted second derivative."""
        return float(self._finsler_jit(jnp.asarray(positions), jnp.asarray(field)))
