"""Triangulated domain surfaces: topology, boundary loops, generators.

A SurfaceMesh is purely combinatorial (plus cached topological invariants);
vertex positions live in :class:`viscoflow.immersion.Immersion`.  Generators
return ``(mesh, positions)`` with canonical embeddings in R^3.
"""

import numpy as np

from .errors import MeshInvalid


class SurfaceMesh:
    """Oriented manifold triangle mesh, possibly with boundary.

    Validates manifoldness, orientability, and Euler-characteristic
    consistency on construction; immutable afterwards.
    """

    def __init__(self, triangles, vertex_count=None):
        tri = np.asarray(triangles, dtype=np.int64)
        if tri.ndim != 2 or tri.shape[1] != 3:
            raise MeshInvalid("triangles must be an (F, 3) index array")
        if tri.shape[0] == 0:
            raise MeshInvalid("mesh has no triangles")
        if np.any(tri < 0):
            raise MeshInvalid("negative vertex index")
        used = np.unique(tri)
        V = int(tri.max()) + 1 if vertex_count is None else int(vertex_count)
        if used.size != V or used[0] != 0 or used[-1] != V - 1:
            raise MeshInvalid("vertex indices must be exactly 0..V-1 with no gaps")
        if np.any(tri[:, 0] == tri[:, 1]) or np.any(tri[:, 1] == tri[:, 2]) \
                or np.any(tri[:, 0] == tri[:, 2]):
            raise MeshInvalid("triangle with repeated vertex")
        self.triangles = tri
        self.vertex_count = V
        self._build_edges()
        self._build_boundary_loops()
        self._build_topology()
        self._build_rings_and_stencils()
        self.triangles.setflags(write=False)

    # -- construction helpers -------------------------------------------------

    def _build_edges(self):
        tri = self.triangles
        # directed edges per face, in orientation order
        d = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        key = d[:, 0] * self.vertex_count + d[:, 1]
        if len(np.unique(key)) != len(key):
            raise MeshInvalid("duplicate directed edge: non-manifold or inconsistent winding")
        und = np.sort(d, axis=1)
        und_key = und[:, 0] * self.vertex_count + und[:, 1]
        uniq, counts = np.unique(und_key, return_counts=True)
        if np.any(counts > 2):
            raise MeshInvalid("edge shared by more than two triangles")
        self.edge_count = len(uniq)
        self.edges = np.stack([uniq // self.vertex_count,
                               uniq % self.vertex_count], axis=1)
        # boundary directed edges: those whose reverse never occurs
        rev_key = d[:, 1] * self.vertex_count + d[:, 0]
        has_twin = np.isin(rev_key, key)
        self.boundary_directed_edges = d[~has_twin]
        self._directed_edges = d

    def _build_boundary_loops(self):
        be = self.boundary_directed_edges
        loops = []
        if len(be):
            nxt = {}
            for a, b in be:
                if int(a) in nxt:
                    raise MeshInvalid("boundary vertex with two outgoing boundary edges")
                nxt[int(a)] = int(b)
            seen = set()
            for start in sorted(nxt):
                if start in seen:
                    continue
                loop = [start]
                seen.add(start)
                cur = nxt[start]
                while cur != start:
                    if cur in seen or cur not in nxt:
                        raise MeshInvalid("boundary edges do not close into loops")
                    loop.append(cur)
                    seen.add(cur)
                    cur = nxt[cur]
                loops.append(np.asarray(loop, dtype=np.int64))
        self.boundary_loops = loops
        if loops:
            self.boundary_vertices = np.concatenate(loops)
        else:
            self.boundary_vertices = np.zeros(0, dtype=np.int64)
        mask = np.zeros(self.vertex_count, dtype=bool)
        mask[self.boundary_vertices] = True
        self.is_boundary_vertex = mask
        # undirected boundary edges (a, b) as they appear along the loops
        self.boundary_edges = (self.boundary_directed_edges
                               if len(be) else np.zeros((0, 2), dtype=np.int64))

    def _build_topology(self):
        V, E, F = self.vertex_count, self.edge_count, len(self.triangles)
        chi = V - E + F
        b = len(self.boundary_loops)
        if (2 - b - chi) % 2 != 0 or (2 - b - chi) < 0:
            raise MeshInvalid(f"inconsistent topology: chi={chi}, b={b}")
        self.euler_characteristic = chi
        self.boundary_component_count = b
        self.genus = (2 - b - chi) // 2

    def _build_rings_and_stencils(self):
        V = self.vertex_count
        neighbors = [set() for _ in range(V)]
        for a, b in np.sort(self._directed_edges, axis=1):
            neighbors[a].add(int(b))
            neighbors[b].add(int(a))
        self.vertex_rings = [np.asarray(sorted(s), dtype=np.int64) for s in neighbors]
        # fitting stencil: one-ring, extended by the two-ring when < 5 points
        stencils = []
        for i in range(V):
            ring = set(int(j) for j in self.vertex_rings[i])
            if len(ring) < 5:
                for j in list(ring):
                    ring.update(int(k) for k in self.vertex_rings[j])
                ring.discard(i)
            stencils.append(np.asarray(sorted(ring), dtype=np.int64))
        self.stencils = stencils
        self.stencil_extended = np.asarray(
            [len(self.vertex_rings[i]) < 5 for i in range(V)], dtype=bool)
        self.incident_faces = [[] for _ in range(V)]
        for fi, t in enumerate(self.triangles):
            for v in t:
                self.incident_faces[int(v)].append(fi)
        self.incident_faces = [np.asarray(f, dtype=np.int64) for f in self.incident_faces]
        self._build_ordered_rings()

    def _build_ordered_rings(self):
        """One-rings in CCW orientation order (open chains at the boundary)."""
        V = self.vertex_count
        ordered = []
        for v in range(V):
            succ = {}
            for fi in self.incident_faces[v]:
                tri = [int(x) for x in self.triangles[fi]]
                k = tri.index(v)
                # link edge of the star, in face orientation order
                succ[tri[(k + 1) % 3]] = tri[(k + 2) % 3]
            if not succ:
                raise MeshInvalid(f"isolated vertex {v}")
            targets = set(succ.values())
            starts = [s for s in succ if s not in targets]
            if self.is_boundary_vertex[v]:
                if len(starts) != 1:
                    raise MeshInvalid(f"non-manifold vertex star at {v}")
                cur = starts[0]
            else:
                if starts:
                    raise MeshInvalid(f"non-manifold vertex star at {v}")
                cur = min(succ)
            ring = [cur]
            while True:
                nxt = succ.get(ring[-1])
                if nxt is None or nxt == ring[0]:
                    break
                ring.append(nxt)
            if len(ring) != len(self.vertex_rings[v]):
                raise MeshInvalid(f"vertex star at {v} is not a single fan")
            ordered.append(np.asarray(ring, dtype=np.int64))
        self.ordered_rings = ordered

    # -- queries ---------------------------------------------------------------

    @property
    def face_count(self):
        return len(self.triangles)

    @property
    def has_boundary(self):
        return self.boundary_component_count > 0

    def stencil_arrays(self):
        """Fitting stencils padded to uniform width: (indices (V, K), mask (V, K))."""
        if not hasattr(self, "_stencil_arrays"):
            K = max(len(s) for s in self.stencils)
            idx = np.zeros((self.vertex_count, K), dtype=np.int64)
            mask = np.zeros((self.vertex_count, K), dtype=float)
            for i, s in enumerate(self.stencils):
                idx[i, :len(s)] = s
                mask[i, :len(s)] = 1.0
            self._stencil_arrays = (idx, mask)
        return self._stencil_arrays

    def chart_arrays(self):
        """Padded ordered rings with chart combination weights.

        The local chart plane at a vertex is spanned by the two weighted
        one-ring combinations sum_k cos_w[k] * (x_k - x_v) and
        sum_k sin_w[k] * (x_k - x_v).  The weights realize the fundamental
        Fourier mode of the ordered ring (half-period over open boundary
        chains), so the chart is symmetric under the star's symmetries and
        smooth in positions.
        """
        if not hasattr(self, "_chart_arrays"):
            R = max(len(r) for r in self.ordered_rings)
            idx = np.zeros((self.vertex_count, R), dtype=np.int64)
            cos_w = np.zeros((self.vertex_count, R), dtype=float)
            sin_w = np.zeros((self.vertex_count, R), dtype=float)
            for i, ring in enumerate(self.ordered_rings):
                n = len(ring)
                idx[i, :n] = ring
                if self.is_boundary_vertex[i]:
                    if n == 2:
                        cos_w[i, :2] = (1.0, 0.0)
                        sin_w[i, :2] = (0.0, 1.0)
                    else:
                        phi = np.pi * np.arange(n) / (n - 1)
                        cos_w[i, :n] = np.cos(phi)
                        sin_w[i, :n] = np.sin(phi)
                else:
                    phi = 2.0 * np.pi * np.arange(n) / n
                    cos_w[i, :n] = np.cos(phi)
                    sin_w[i, :n] = np.sin(phi)
            self._chart_arrays = (idx, cos_w, sin_w)
        return self._chart_arrays

    def boundary_neighbors(self, v):
        """(previous, next) boundary vertices of v along its loop."""
        for loop in self.boundary_loops:
            where = np.nonzero(loop == v)[0]
            if len(where):
                i = int(where[0])
                return int(loop[i - 1]), int(loop[(i + 1) % len(loop)])
        raise ValueError(f"vertex {v} is not on the boundary")

    def __repr__(self):
        return (f"SurfaceMesh(V={self.vertex_count}, F={self.face_count}, "
                f"genus={self.genus}, boundary={self.boundary_component_count})")


# -- generators ----------------------------------------------------------------


def _merge_rings(inner_ids, outer_ids, faces):
    """Triangulate the annular strip between two concentric vertex rings.

    Assumes both rings are evenly spaced by angle, in CCW order.  Appends
    CCW-oriented faces (viewed from +z).
    """
    n1, n2 = len(inner_ids), len(outer_ids)
    i = j = 0
    while i < n1 or j < n2:
        adv_inner = (i + 1) * n2 <= (j + 1) * n1 if (i < n1 and j < n2) else (i < n1)
        if adv_inner:
            faces.append((inner_ids[i % n1], outer_ids[j % n2], inner_ids[(i + 1) % n1]))
            i += 1
        else:
            faces.append((inner_ids[i % n1], outer_ids[j % n2], outer_ids[(j + 1) % n2]))
            j += 1


def disk(refinement):
    """Flat unit disk triangulated by hexagonal rings; boundary on the unit circle."""
    if refinement < 0:
        raise ValueError("refinement must be >= 0")
    n = 2 ** refinement
    positions = [(0.0, 0.0, 0.0)]
    ring_ids = [[0]]
    for k in range(1, n + 1):
        ids = []
        for j in range(6 * k):
            theta = 2.0 * np.pi * j / (6 * k)
            r = k / n
            ids.append(len(positions))
            positions.append((r * np.cos(theta), r * np.sin(theta), 0.0))
        ring_ids.append(ids)
    faces = []
    for j in range(6):
        faces.append((0, ring_ids[1][j], ring_ids[1][(j + 1) % 6]))
    for k in range(1, n):
        _merge_rings(ring_ids[k], ring_ids[k + 1], faces)
    return SurfaceMesh(np.asarray(faces)), np.asarray(positions, dtype=float)


def annulus(refinement, ratio):
    """Flat annulus with inner radius 1 and outer radius ``ratio`` (> 1)."""
    if ratio <= 1.0:
        raise ValueError("ratio must exceed 1")
    n_theta = 12 * 2 ** refinement
    n_r = max(1, round(np.log(ratio) * n_theta / (2.0 * np.pi)))
    radii = np.exp(np.linspace(0.0, np.log(ratio), n_r + 1))
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    positions = []
    for r in radii:
        for t in theta:
            positions.append((r * np.cos(t), r * np.sin(t), 0.0))
    def vid(i, j):
        return i * n_theta + (j % n_theta)
    faces = []
    for i in range(n_r):
        for j in range(n_theta):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            faces.append((a, b, c))
            faces.append((a, c, d))
    return SurfaceMesh(np.asarray(faces)), np.asarray(positions, dtype=float)


_ICO_T = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = np.asarray([
    (-1, _ICO_T, 0), (1, _ICO_T, 0), (-1, -_ICO_T, 0), (1, -_ICO_T, 0),
    (0, -1, _ICO_T), (0, 1, _ICO_T), (0, -1, -_ICO_T), (0, 1, -_ICO_T),
    (_ICO_T, 0, -1), (_ICO_T, 0, 1), (-_ICO_T, 0, -1), (-_ICO_T, 0, 1),
], dtype=float)
_ICO_FACES = np.asarray([
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
], dtype=np.int64)


def sphere(subdivision):
    """Unit round sphere: icosahedron subdivided and radially projected."""
    verts = [v / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = [tuple(f) for f in _ICO_FACES]
    for _ in range(subdivision):
        cache = {}
        new_faces = []
        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return SurfaceMesh(np.asarray(faces)), np.asarray(verts, dtype=float)


def cylinder(refinement, height):
    """Open cylinder of radius 1, axis z, z in [-height/2, height/2]."""
    if height <= 0:
        raise ValueError("height must be positive")
    n_theta = 12 * 2 ** refinement
    n_z = max(1, round(height * n_theta / (2.0 * np.pi)))
    zs = np.linspace(-height / 2.0, height / 2.0, n_z + 1)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    positions = []
    for z in zs:
        for t in theta:
            positions.append((np.cos(t), np.sin(t), z))
    def vid(i, j):
        return i * n_theta + (j % n_theta)
    faces = []
    for i in range(n_z):
        for j in range(n_theta):
            a, b, c, d = vid(i, j), vid(i, j + 1), vid(i + 1, j + 1), vid(i + 1, j)
            faces.append((a, b, c))
            faces.append((a, c, d))
    return SurfaceMesh(np.asarray(faces)), np.asarray(positions, dtype=float)


def torus(refinement, major_radius=1.0, minor_radius=0.4):
    """Torus of revolution about the z axis."""
    n_u = 12 * 2 ** refinement
    n_v = max(6, round(n_u * minor_radius / major_radius))
    positions = []
    for i in range(n_v):
        phi = 2.0 * np.pi * i / n_v
        for j in range(n_u):
            th = 2.0 * np.pi * j / n_u
            w = major_radius + minor_radius * np.cos(phi)
            positions.append((w * np.cos(th), w * np.sin(th),
                              minor_radius * np.sin(phi)))
    def vid(i, j):
        return (i % n_v) * n_u + (j % n_u)
    faces = []
    for i in range(n_v):
        for j in range(n_u):
            a, b, c, d = vid(i, j), vid(i, j + 1), vid(i + 1, j + 1), vid(i + 1, j)
            faces.append((a, b, c))
            faces.append((a, c, d))
    return SurfaceMesh(np.asarray(faces)), np.asarray(positions, dtype=float)


_GENERATORS = {
    "disk": disk,
    "annulus": annulus,
    "sphere": sphere,
    "cylinder": cylinder,
    "torus": torus,
}


def build_mesh(spec):
    """Build a mesh from a generator spec dict, e.g. {"kind": "disk", "refinement": 3}.

    Returns (SurfaceMesh, canonical positions).
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _GENERATORS:
        raise ValueError(f"unknown mesh generator {kind!r}")
    if kind == "sphere":
        return sphere(int(spec.pop("subdivision", spec.pop("refinement", 2))))
    if kind == "disk":
        return disk(int(spec.pop("refinement", 3)))
    if kind == "annulus":
        return annulus(int(spec.pop("refinement", 2)), float(spec.pop("ratio")))
    if kind == "cylinder":
        return cylinder(int(spec.pop("refinement", 2)), float(spec.pop("height", 1.0)))
    return torus(int(spec.pop("refinement", 2)),
                 float(spec.pop("major_radius", 1.0)),
                 float(spec.pop("minor_radius", 0.4)))
