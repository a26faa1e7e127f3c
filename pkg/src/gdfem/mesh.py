"""Simplicial 2D meshes of the unit square and unit disc.

Disc meshes start from a fan of 6 triangles over a regular hexagon
inscribed in the unit circle and are refined uniformly (red refinement)
with new boundary vertices projected radially onto the circle.  For
geometry order g >= 2 the boundary-adjacent elements carry a polynomial
(isoparametric-style) map interpolating the circular arc; interior
elements stay affine.
"""

import numpy as np

from .reference import (EDGE_NORMALS, EDGE_VERTICES, REF_VERTICES,
                        lagrange_basis, lattice_multiindices)


class Mesh:
    """Immutable triangle mesh with facet topology and curved boundary data.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise
    facet_vertices : (nf, 2) int array, each row sorted ascending
    facet_elems : (nf, 2) int array, owner elements (-1 if boundary)
    facet_local : (nf, 2) int array, local edge index within each owner
    facet_boundary : (nf,) bool array
    elem_facets : (nt, 3) int array, facet index of each local edge
    geom_order : int
    domain : "disc", "square" or None
    curved_edge_nodes : dict facet -> (g-1, 2) interior arc nodes
    """

    def __init__(self, vertices, triangles, geom_order=1, domain=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=int)
        self.geom_order = int(geom_order)
        self.domain = domain
        if self.geom_order < 1:
            raise ValueError("geom_order must be >= 1")
        self._check_orientation()
        self._build_facets()
        self._build_curved_data()

    # -- construction ---------------------------------------------------

    def _check_orientation(self):
        v = self.vertices
        t = self.triangles
        e1 = v[t[:, 1]] - v[t[:, 0]]
        e2 = v[t[:, 2]] - v[t[:, 0]]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0):
            raise ValueError("all triangles must be counterclockwise")

    def _build_facets(self):
        key_to_idx = {}
        fverts, felems, flocal = [], [], []
        for e, tri in enumerate(self.triangles):
            for k, (a, b) in enumerate(EDGE_VERTICES):
                key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
                if key not in key_to_idx:
                    key_to_idx[key] = len(fverts)
                    fverts.append(key)
                    felems.append([e, -1])
                    flocal.append([k, -1])
                else:
                    f = key_to_idx[key]
                    if felems[f][1] != -1:
                        raise ValueError("facet with more than 2 owners")
                    felems[f][1] = e
                    flocal[f][1] = k
        self.facet_vertices = np.array(fverts, dtype=int)
        self.facet_elems = np.array(felems, dtype=int)
        self.facet_local = np.array(flocal, dtype=int)
        self.facet_boundary = self.facet_elems[:, 1] == -1
        self.elem_facets = np.full((len(self.triangles), 3), -1, dtype=int)
        for f, (elems, locs) in enumerate(zip(self.facet_elems, self.facet_local)):
            for e, k in zip(elems, locs):
                if e >= 0:
                    self.elem_facets[e, k] = f

    def _build_curved_data(self):
        self.curved_edge_nodes = {}
        self._curved_controls = {}
        if self.domain != "disc" or self.geom_order < 2:
            return
        g = self.geom_order
        for f in np.nonzero(self.facet_boundary)[0]:
            a, b = self.facet_vertices[f]
            self.curved_edge_nodes[f] = _arc_nodes(
                self.vertices[a], self.vertices[b], g)
        # per curved element: geometry lattice control points of degree g
        mi = lattice_multiindices(g)
        for f, arc in self.curved_edge_nodes.items():
            e = self.facet_elems[f, 0]
            k = self.facet_local[f, 0]
            pts = self._curved_controls.get(e)
            if pts is None:
                lam = np.array([[a0 / g, a1 / g, a2 / g] for a0, a1, a2 in mi])
                tri = self.triangles[e]
                pts = lam @ self.vertices[tri]  # affine positions
                self._curved_controls[e] = pts
            va, vb = EDGE_VERTICES[k]
            w0 = self.vertices[self.triangles[e][va]]
            w1 = self.vertices[self.triangles[e][vb]]
            other = 3 - va - vb
            for idx, tri_bary in enumerate(mi):
                lam_o = tri_bary[other] / g
                if lam_o == 1.0:
                    continue
                # parameter along the edge direction va -> vb
                t = tri_bary[vb] / (g - tri_bary[other])
                arc = _arc_point(w0, w1, t)
                chord = (1.0 - t) * w0 + t * w1
                # transfinite blend: full displacement on the edge itself,
                # decaying linearly towards the opposite vertex
                pts[idx] = pts[idx] + (1.0 - lam_o) * (arc - chord)

    # -- queries ---------------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @property
    def num_facets(self):
        return len(self.facet_vertices)

    def is_curved(self, elem):
        return elem in self._curved_controls

    def geometry(self, elem):
        return GeometryMap(self, elem)

    def facet_length(self, f):
        a, b = self.facet_vertices[f]
        return float(np.linalg.norm(self.vertices[a] - self.vertices[b]))

    def dump(self, path):
        """Plain-text debug dump."""
        with open(path, "w") as fh:
            fh.write("vertices %d triangles %d facets %d geom_order %d\n"
                     % (self.num_vertices, self.num_triangles,
                        self.num_facets, self.geom_order))
            for v in self.vertices:
                fh.write("v %.17g %.17g\n" % (v[0], v[1]))
            for t in self.triangles:
                fh.write("t %d %d %d\n" % tuple(t))
            for f in range(self.num_facets):
                a, b = self.facet_vertices[f]
                e0, e1 = self.facet_elems[f]
                fh.write("f %d %d %d %d %d\n"
                         % (a, b, e0, e1, int(self.facet_boundary[f])))


def _arc_nodes_full(w0, w1, g):
    """g+1 points on the unit circle, uniformly spaced in arc length from w0 to w1."""
    t0 = np.arctan2(w0[1], w0[0])
    t1 = np.arctan2(w1[1], w1[0])
    dt = t1 - t0
    if dt > np.pi:
        dt -= 2.0 * np.pi
    elif dt < -np.pi:
        dt += 2.0 * np.pi
    ang = t0 + dt * np.arange(g + 1) / g
    return np.column_stack([np.cos(ang), np.sin(ang)])


def _arc_nodes(w0, w1, g):
    return _arc_nodes_full(w0, w1, g)[1:-1]


def _arc_point(w0, w1, t):
    """Point at arc-length fraction t on the short unit-circle arc w0 -> w1."""
    t0 = np.arctan2(w0[1], w0[0])
    t1 = np.arctan2(w1[1], w1[0])
    dt = t1 - t0
    if dt > np.pi:
        dt -= 2.0 * np.pi
    elif dt < -np.pi:
        dt += 2.0 * np.pi
    ang = t0 + dt * t
    return np.array([np.cos(ang), np.sin(ang)])


class GeometryMap:
    """Polynomial map from the reference triangle to one physical element."""

    def __init__(self, mesh, elem):
        self.mesh = mesh
        self.elem = elem
        controls = mesh._curved_controls.get(elem)
        if controls is None:
            tri = mesh.triangles[elem]
            v = mesh.vertices[tri]
            self.affine = True
            self._origin = v[0]
            self._jac = np.column_stack([v[1] - v[0], v[2] - v[0]])
            self._det = float(np.linalg.det(self._jac))
        else:
            self.affine = False
            self._controls = controls
            self._basis = lagrange_basis(mesh.geom_order)

    def points(self, ref):
        ref = np.atleast_2d(ref)
        if self.affine:
            return self._origin + ref @ self._jac.T
        return self._basis.eval(ref) @ self._controls

    def jacobian(self, ref):
        ref = np.atleast_2d(ref)
        if self.affine:
            return np.broadcast_to(self._jac, (len(ref), 2, 2)).copy()
        G = self._basis.grad(ref)  # (n, ndof, 2)
        return np.einsum("njd,jc->ncd", G, self._controls)

    def jacobian_derivative(self, ref):
        """d J / d ref, shape (n, 2, 2, 2): out[n, c, d, e] = d^2 Phi_c / (d_d d_e)."""
        ref = np.atleast_2d(ref)
        if self.affine:
            return np.zeros((len(ref), 2, 2, 2))
        H = self._basis.hess(ref)  # (n, ndof, 2, 2)
        return np.einsum("njde,jc->ncde", H, self._controls)

    @staticmethod
    def dets(jac):
        return jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]

    @staticmethod
    def inv(jac):
        det = GeometryMap.dets(jac)[..., None, None]
        out = np.empty_like(jac)
        out[..., 0, 0] = jac[..., 1, 1]
        out[..., 0, 1] = -jac[..., 0, 1]
        out[..., 1, 0] = -jac[..., 1, 0]
        out[..., 1, 1] = jac[..., 0, 0]
        return out / det


def make_unit_square_mesh(n: int) -> Mesh:
    """n x n grid of unit-square cells, each split along the (+1,+1) diagonal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    verts = np.array([[x, y] for y in xs for x in xs])
    tris = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10 = v00 + 1
            v01 = v00 + (n + 1)
            v11 = v01 + 1
            tris.append([v00, v10, v11])
            tris.append([v00, v11, v01])
    return Mesh(verts, np.array(tris), geom_order=1, domain="square")


def make_unit_disc_mesh(level: int, geom_order: int = 1) -> Mesh:
    """Hexagon-fan mesh of the unit disc, red-refined `level` times."""
    if level < 0:
        raise ValueError("level must be >= 0")
    ang = np.pi / 3.0 * np.arange(6)
    verts = np.vstack([[0.0, 0.0], np.column_stack([np.cos(ang), np.sin(ang)])])
    tris = np.array([[0, 1 + k, 1 + (k + 1) % 6] for k in range(6)])
    mesh = Mesh(verts, tris, geom_order=geom_order, domain="disc")
    for _ in range(level):
        mesh = refine(mesh)
    return mesh


def refine(mesh: Mesh) -> Mesh:
    """One uniform red refinement; disc boundary vertices re-projected."""
    nv = mesh.num_vertices
    mids = 0.5 * (mesh.vertices[mesh.facet_vertices[:, 0]]
                  + mesh.vertices[mesh.facet_vertices[:, 1]])
    if mesh.domain == "disc":
        bnd = mesh.facet_boundary
        mids[bnd] /= np.linalg.norm(mids[bnd], axis=1)[:, None]
    verts = np.vstack([mesh.vertices, mids])
    tris = []
    for e, tri in enumerate(mesh.triangles):
        m = nv + mesh.elem_facets[e]  # midpoints of local edges 0,1,2
        v0, v1, v2 = tri
        tris.extend([[v0, m[0], m[2]],
                     [m[0], v1, m[1]],
                     [m[2], m[1], v2],
                     [m[0], m[1], m[2]]])
    return Mesh(verts, np.array(tris), geom_order=mesh.geom_order,
                domain=mesh.domain)


def mesh_size(mesh: Mesh) -> float:
    """Maximum element diameter over straight vertices."""
    v = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
    d01 = np.linalg.norm(v[:, 0] - v[:, 1], axis=1)
    d12 = np.linalg.norm(v[:, 1] - v[:, 2], axis=1)
    d20 = np.linalg.norm(v[:, 2] - v[:, 0], axis=1)
    return float(np.max([d01, d12, d20]))


def facet_sides(mesh, f):
    """(elem, local_edge, flipped) per owner of facet f.

    `flipped` is True when the local edge direction runs opposite to the
    global facet direction (lower vertex index -> higher).
    """
    a, _ = mesh.facet_vertices[f]
    sides = []
    for e, k in zip(mesh.facet_elems[f], mesh.facet_local[f]):
        if e < 0:
            continue
        va, vb = EDGE_VERTICES[k]
        sides.append((int(e), int(k), mesh.triangles[e][va] != a))
    return sides


def facet_ref_points(k, ts, flipped):
    """Reference coordinates of facet points at global params ts for local edge k."""
    va, vb = EDGE_VERTICES[k]
    s = 1.0 - ts if flipped else ts
    return REF_VERTICES[va] + np.outer(s, REF_VERTICES[vb] - REF_VERTICES[va])


class FacetGeometry:
    """Physical geometry of one facet sampled at global params ts in [0, 1].

    Provides physical points, arc-length weights per unit t, and the unit
    normal pointing out of owner 0 (for boundary facets: out of the domain).
    """

    def __init__(self, mesh, f, ts):
        self.ts = np.asarray(ts, dtype=float)
        self.sides = facet_sides(mesh, f)
        e0, k0, flip0 = self.sides[0]
        self.ref_points = [facet_ref_points(k, self.ts, fl)
                           for (_, k, fl) in self.sides]
        gm = mesh.geometry(e0)
        jac = gm.jacobian(self.ref_points[0])
        self.points = gm.points(self.ref_points[0])
        va, vb = EDGE_VERTICES[k0]
        dref = REF_VERTICES[vb] - REF_VERTICES[va]
        if flip0:
            dref = -dref
        tang = jac @ dref
        self.dline = np.linalg.norm(tang, axis=1)  # ds/dt
        # unnormalized outward normal: det(J) J^{-T} n_ref
        nref = EDGE_NORMALS[k0]
        co = np.empty_like(jac)
        co[:, 0, 0] = jac[:, 1, 1]
        co[:, 0, 1] = -jac[:, 1, 0]
        co[:, 1, 0] = -jac[:, 0, 1]
        co[:, 1, 1] = jac[:, 0, 0]
        nn = co @ nref
        self.normals = nn / np.linalg.norm(nn, axis=1)[:, None]

    def normal_from_side(self, mesh, side_index):
        """Outward unit normal recomputed from the given owner (for checks)."""
        e, k, _ = self.sides[side_index]
        gm = mesh.geometry(e)
        jac = gm.jacobian(self.ref_points[side_index])
        nref = EDGE_NORMALS[k]
        co = np.empty_like(jac)
        co[:, 0, 0] = jac[:, 1, 1]
        co[:, 0, 1] = -jac[:, 1, 0]
        co[:, 1, 0] = -jac[:, 0, 1]
        co[:, 1, 1] = jac[:, 0, 0]
        nn = co @ nref
        return nn / np.linalg.norm(nn, axis=1)[:, None]


def total_area(mesh, order=8):
    """Sum of element areas by quadrature (exercises the geometry maps)."""
    from .quadrature import triangle_rule
    rule = triangle_rule(order)
    area = 0.0
    for e in range(mesh.num_triangles):
        gm = mesh.geometry(e)
        det = GeometryMap.dets(gm.jacobian(rule.points))
        area += float(det @ rule.weights)
    return area
