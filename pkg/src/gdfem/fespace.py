"""Finite element spaces: reference bases, global dof maps, interpolation.

Four families are provided:

* ``scalar_lagrange`` -- continuous P^p (pseudo-pressure space),
* ``vector_lagrange`` -- continuous [P^p]^2 (H^1-conforming velocity),
* ``vector_dg``       -- discontinuous [P^p]^2, Piola-mapped,
* ``hdiv_bdm``        -- Brezzi-Douglas-Marini, normal-continuous.

The two discontinuous families are mapped with the contravariant Piola
transform.  On affine elements this is just a change of basis of [P^p]^2,
but on curved elements it is essential: it keeps element-wise divergence-free
reference fields divergence-free in physical space, which the locking-free
and gradient-robustness properties rely on.

BDM shape functions are contravariant Piola images of reference vector
monomials; the local basis on each element is obtained by inverting the
matrix of degree-of-freedom functionals (facet moments of the normal
trace against Legendre polynomials in the global facet parameter, plus
interior moments).  Because every element evaluates the *same* global
facet functionals, normal-trace continuity needs no orientation table.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import FacetGeometry, GeometryMap, facet_ref_points, facet_sides
from .quadrature import segment_rule, triangle_rule
from .reference import (EDGE_NORMALS, EDGE_VERTICES, REF_VERTICES,
                        eval_monomial_grads, eval_monomials, lagrange_basis,
                        monomial_exponents, shifted_legendre)

FAMILIES = ("scalar_lagrange", "vector_lagrange", "vector_dg", "hdiv_bdm")


class DegreeError(ValueError):
    pass


def build_space(family, mesh, p):
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if p < 1:
        raise DegreeError("degree must be >= 1")
    return FeSpace(family, mesh, p)


class FeSpace:
    def __init__(self, family, mesh, degree):
        self.family = family
        self.mesh = mesh
        self.degree = degree
        self._bdm_cache = {}
        self._build_dof_map()

    @property
    def ncomp(self):
        return 1 if self.family == "scalar_lagrange" else 2

    # -- dof maps ---------------------------------------------------------

    def _build_dof_map(self):
        p = self.degree
        mesh = self.mesh
        nt, nf, nv = mesh.num_triangles, mesh.num_facets, mesh.num_vertices
        if self.family in ("scalar_lagrange", "vector_lagrange"):
            nint = (p - 1) * (p - 2) // 2
            scal = np.zeros((nt, 3 + 3 * (p - 1) + nint), dtype=int)
            for e, tri in enumerate(mesh.triangles):
                scal[e, :3] = tri
                for k, (va, vb) in enumerate(EDGE_VERTICES):
                    f = mesh.elem_facets[e, k]
                    flipped = tri[va] != mesh.facet_vertices[f][0]
                    for s in range(1, p):
                        pos = (p - 1 - s) if flipped else (s - 1)
                        scal[e, 3 + k * (p - 1) + s - 1] = nv + f * (p - 1) + pos
                base = nv + nf * (p - 1) + e * nint
                scal[e, 3 + 3 * (p - 1):] = base + np.arange(nint)
            nsc = nv + nf * (p - 1) + nt * nint
            if self.family == "scalar_lagrange":
                self.dof_map = scal
                self.ndof = nsc
            else:
                nloc = scal.shape[1]
                vec = np.zeros((nt, 2 * nloc), dtype=int)
                vec[:, 0::2] = 2 * scal
                vec[:, 1::2] = 2 * scal + 1
                self.dof_map = vec
                self.ndof = 2 * nsc
            self.constrained_dofs = np.array([], dtype=int)
        elif self.family == "vector_dg":
            nloc = (p + 1) * (p + 2)
            self.dof_map = (np.arange(nt)[:, None] * nloc
                            + np.arange(nloc)[None, :])
            self.ndof = nt * nloc
            self.constrained_dofs = np.array([], dtype=int)
        else:  # hdiv_bdm
            nint = p * p - 1
            nloc = 3 * (p + 1) + nint
            dof = np.zeros((nt, nloc), dtype=int)
            for e in range(nt):
                for k in range(3):
                    f = mesh.elem_facets[e, k]
                    dof[e, k * (p + 1):(k + 1) * (p + 1)] = \
                        f * (p + 1) + np.arange(p + 1)
                base = nf * (p + 1) + e * nint
                dof[e, 3 * (p + 1):] = base + np.arange(nint)
            self.dof_map = dof
            self.ndof = nf * (p + 1) + nt * nint
            bnd = np.nonzero(mesh.facet_boundary)[0]
            self.constrained_dofs = (bnd[:, None] * (p + 1)
                                     + np.arange(p + 1)[None, :]).ravel()

    # -- basis evaluation ---------------------------------------------------

    def eval_basis(self, elem, ref_pts, need_grad=True):
        """Physical basis values on one element.

        Returns (values, gradients, divergences):
        scalar family: (nq, nloc), (nq, nloc, 2), None;
        vector families: (nq, nloc, 2), (nq, nloc, 2, 2) with
        grad[c, d] = d u_c / d x_d, and (nq, nloc).
        """
        ref_pts = np.atleast_2d(ref_pts)
        if self.family == "hdiv_bdm":
            exps = monomial_exponents(self.degree)
            return self._piola_eval(elem, ref_pts,
                                    eval_monomials(exps, ref_pts),
                                    eval_monomial_grads(exps, ref_pts),
                                    self._bdm_local(elem), need_grad)
        if self.family == "vector_dg":
            basis = lagrange_basis(self.degree)
            return self._piola_eval(elem, ref_pts, basis.eval(ref_pts),
                                    basis.grad(ref_pts), None, need_grad)
        basis = lagrange_basis(self.degree)
        vals = basis.eval(ref_pts)            # (nq, nsc)
        gm = self.mesh.geometry(elem)
        jac = gm.jacobian(ref_pts)
        jinv = GeometryMap.inv(jac)
        grads = np.einsum("njd,nde->nje", basis.grad(ref_pts), jinv)
        if self.family == "scalar_lagrange":
            return vals, grads, None
        nq, nsc = vals.shape
        v = np.zeros((nq, 2 * nsc, 2))
        g = np.zeros((nq, 2 * nsc, 2, 2))
        for c in range(2):
            v[:, c::2, c] = vals
            g[:, c::2, c, :] = grads
        div = np.zeros((nq, 2 * nsc))
        div[:, 0::2] = grads[:, :, 0]
        div[:, 1::2] = grads[:, :, 1]
        return v, g, div

    # -- BDM construction ---------------------------------------------------

    def _bdm_local(self, elem):
        """Coefficient matrix C of the element-local BDM basis.

        Column i of C expresses basis function i in the Piola images of the
        reference vector monomials; the basis is dual to the global facet
        moments and the element interior moments.
        """
        if elem in self._bdm_cache:
            return self._bdm_cache[elem]
        p = self.degree
        mesh = self.mesh
        g = mesh.geom_order
        exps = monomial_exponents(p)
        nm = len(exps)
        nloc = 2 * nm
        gm = mesh.geometry(elem)
        M = np.zeros((nloc, nloc))

        srule = segment_rule(2 * p + 2)
        ts = srule.points[:, 0]
        leg = np.array([shifted_legendre(j, ts) for j in range(p + 1)])
        for k in range(3):
            f = mesh.elem_facets[elem, k]
            a, b = mesh.facet_vertices[f]
            tri = mesh.triangles[elem]
            va, vb = EDGE_VERTICES[k]
            flipped = tri[va] != a
            sign = 1.0 if mesh.facet_elems[f, 0] == elem else -1.0
            ell = np.linalg.norm(REF_VERTICES[vb] - REF_VERTICES[va])
            chord = mesh.facet_length(f)
            rp = facet_ref_points(k, ts, flipped)
            mono = eval_monomials(exps, rp)            # (nq, nm)
            nref = EDGE_NORMALS[k]
            # identity (u . n) ds = (u_ref . n_ref) dl_ref makes the facet
            # moment a pure reference-element integral
            for j in range(p + 1):
                w = srule.weights * leg[j] * sign * ell / chord
                row = k * (p + 1) + j
                M[row, 0::2] = w @ (mono * nref[0])
                M[row, 1::2] = w @ (mono * nref[1])

        if p >= 2:
            vrule = triangle_rule(2 * p + 2 * (g - 1) + 6)
            jac = gm.jacobian(vrule.points)
            det = GeometryMap.dets(jac)
            phys = gm.points(vrule.points)
            mono = eval_monomials(exps, vrule.points)
            # Piola values of the shape functions, (nq, nloc, 2)
            shp = np.zeros((len(vrule.points), nloc, 2))
            shp[:, 0::2, :] = mono[:, :, None] * jac[:, None, :, 0] / det[:, None, None]
            shp[:, 1::2, :] = mono[:, :, None] * jac[:, None, :, 1] / det[:, None, None]
            wm = self._interior_moment_fields(elem, phys)  # (nq, nint, 2)
            area = float(det @ vrule.weights)
            wq = vrule.weights * det / area
            blk = np.einsum("q,qid,qmd->mi", wq, shp, wm)
            M[3 * (p + 1):, :] = blk

        C = np.linalg.inv(M)
        self._bdm_cache[elem] = C
        return C

    def _interior_moment_fields(self, elem, phys_pts):
        """Interior moment test fields at physical points, (nq, nint, 2).

        Full [P^{p-2}]^2 plus the rotated homogeneous tail X^perp * P~^{p-2},
        in element-centered, diameter-scaled coordinates.
        """
        p = self.degree
        tri = self.mesh.triangles[elem]
        v = self.mesh.vertices[tri]
        xc = v.mean(axis=0)
        h = max(np.linalg.norm(v[i] - v[j]) for i in range(3) for j in range(i))
        X = (phys_pts - xc) / h
        exps = monomial_exponents(p - 2)
        mono = eval_monomials(exps, X)  # (nq, nm2)
        nq, nm2 = mono.shape
        fields = np.zeros((nq, 2 * nm2 + (p - 1), 2))
        fields[:, 0:2 * nm2:2, 0] = mono
        fields[:, 1:2 * nm2:2, 1] = mono
        for i, a in enumerate(range(p - 1)):
            q = X[:, 0] ** a * X[:, 1] ** (p - 2 - a)
            fields[:, 2 * nm2 + i, 0] = -X[:, 1] * q
            fields[:, 2 * nm2 + i, 1] = X[:, 0] * q
        return fields

    def _piola_eval(self, elem, ref_pts, sval, sgrad, C, need_grad):
        """Values/gradients/divergences of Piola-mapped vector shapes.

        The shape set interleaves x/y copies of the scalar generators whose
        reference values and gradients are given by sval (nq, nm) and
        sgrad (nq, nm, 2).  C re-combines shapes into the local basis
        (columns), or None for the shapes themselves.
        """
        nm = sval.shape[1]
        nloc = 2 * nm
        gm = self.mesh.geometry(elem)
        jac = gm.jacobian(ref_pts)
        det = GeometryMap.dets(jac)
        jinv = GeometryMap.inv(jac)
        nq = len(ref_pts)

        shp = np.zeros((nq, nloc, 2))       # Piola values of shapes
        shp[:, 0::2, :] = sval[:, :, None] * jac[:, None, :, 0] / det[:, None, None]
        shp[:, 1::2, :] = sval[:, :, None] * jac[:, None, :, 1] / det[:, None, None]

        sdiv = np.zeros((nq, nloc))         # reference divergence of shapes
        sdiv[:, 0::2] = sgrad[:, :, 0]
        sdiv[:, 1::2] = sgrad[:, :, 1]

        gshp = None
        if need_grad:
            P = jac / det[:, None, None]                      # Piola matrix
            if gm.affine:
                dP = np.zeros((nq, 2, 2, 2))
            else:
                dJ = gm.jacobian_derivative(ref_pts)          # (nq, c, d, e)
                # d det / d ref_e = det * tr(J^-1 dJ/dref_e)
                ddet = det[:, None] * np.einsum("nij,njie->ne", jinv, dJ)
                dP = (dJ / det[:, None, None, None]
                      - jac[:, :, :, None] * ddet[:, None, None, :]
                      / (det ** 2)[:, None, None, None])
            dref = np.zeros((nq, nloc, 2, 2))  # [q, shape, c, e]
            for comp in range(2):
                sl = slice(comp, nloc, 2)
                dref[:, sl, :, :] += np.einsum("qm,qce->qmce",
                                               sval, dP[:, :, comp, :])
                dref[:, sl, :, :] += np.einsum("qme,qc->qmce",
                                               sgrad, P[:, :, comp])
            gshp = np.einsum("qmce,qed->qmcd", dref, jinv)

        if C is None:
            return shp, gshp, sdiv / det[:, None]
        vals = np.einsum("qmd,mi->qid", shp, C)
        div = np.einsum("qm,mi->qi", sdiv, C) / det[:, None]
        grads = np.einsum("qmcd,mi->qicd", gshp, C) if need_grad else None
        return vals, grads, div


class DiscreteField:
    """A coefficient vector in an FeSpace, evaluable element-wise."""

    def __init__(self, space, coefficients):
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (space.ndof,):
            raise ValueError("coefficient length does not match ndof")
        self.space = space
        self.coefficients = coefficients

    def evaluate(self, elem, ref_pts, need_grad=True):
        """(values, gradients, divergences) of the field on one element."""
        vals, grads, div = self.space.eval_basis(elem, ref_pts, need_grad)
        c = self.coefficients[self.space.dof_map[elem]]
        if self.space.family == "scalar_lagrange":
            v = vals @ c
            g = np.einsum("qjd,j->qd", grads, c)
            return v, g, None
        v = np.einsum("qjc,j->qc", vals, c)
        g = np.einsum("qjcd,j->qcd", grads, c) if grads is not None else None
        d = div @ c
        return v, g, d


def bdm_interpolate(space, v, order=None):
    """Element-wise BDM interpolation of a smooth vector field.

    Matches facet moments of v.n against P^p on each facet and interior
    moments against the reduced rotational set (empty for p = 1).  `order`
    raises the quadrature order used for the moments of a non-polynomial v.
    """
    if space.family != "hdiv_bdm":
        raise ValueError("bdm_interpolate requires an hdiv_bdm space")
    p = space.degree
    mesh = space.mesh
    g = mesh.geom_order
    coeffs = np.zeros(space.ndof)

    srule = segment_rule(order if order is not None
                         else 2 * p + 2 + 2 * (g - 1))
    ts = srule.points[:, 0]
    leg = np.array([shifted_legendre(j, ts) for j in range(p + 1)])
    for f in range(mesh.num_facets):
        fg = FacetGeometry(mesh, f, ts)
        vn = np.einsum("qc,qc->q", v(fg.points), fg.normals)
        chord = mesh.facet_length(f)
        for j in range(p + 1):
            mom = np.sum(srule.weights * leg[j] * vn * fg.dline) / chord
            coeffs[f * (p + 1) + j] = mom

    if p >= 2:
        nint = p * p - 1
        vrule = triangle_rule(order if order is not None
                              else 2 * p + 2 * (g - 1) + 6)
        for e in range(mesh.num_triangles):
            gm = mesh.geometry(e)
            jac = gm.jacobian(vrule.points)
            det = GeometryMap.dets(jac)
            phys = gm.points(vrule.points)
            wm = space._interior_moment_fields(e, phys)
            area = float(det @ vrule.weights)
            wq = vrule.weights * det / area
            moms = np.einsum("q,qd,qmd->m", wq, v(phys), wm)
            base = mesh.num_facets * (p + 1) + e * nint
            coeffs[base:base + nint] = moms
    return DiscreteField(space, coeffs)


def l2_project(space, f, weight=None, order=None):
    """Weighted L2 projection of f onto the space.

    Solves <w u_h, q_h> = <w f, q_h> for all q_h; w defaults to 1.
    """
    mesh = space.mesh
    p = space.degree
    if order is None:
        order = 2 * p + 2 * (mesh.geom_order - 1) + 2
    rule = triangle_rule(order)
    rows, cols, vals = [], [], []
    rhs = np.zeros(space.ndof)
    for e in range(mesh.num_triangles):
        gm = mesh.geometry(e)
        jac = gm.jacobian(rule.points)
        det = GeometryMap.dets(jac)
        phys = gm.points(rule.points)
        w = np.ones(len(phys)) if weight is None else np.asarray(weight(phys))
        wq = rule.weights * det * w
        bv, _, _ = space.eval_basis(e, rule.points, need_grad=False)
        fv = np.asarray(f(phys))
        if space.ncomp == 1:
            loc = np.einsum("q,qi,qj->ij", wq, bv, bv)
            lrhs = np.einsum("q,q,qj->j", wq, fv, bv)
        else:
            loc = np.einsum("q,qic,qjc->ij", wq, bv, bv)
            lrhs = np.einsum("q,qc,qjc->j", wq, fv, bv)
        dofs = space.dof_map[e]
        rows.append(np.repeat(dofs, len(dofs)))
        cols.append(np.tile(dofs, len(dofs)))
        vals.append(loc.ravel())
        np.add.at(rhs, dofs, lrhs)
    n = space.ndof
    A = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    x = spla.spsolve(A.tocsc(), rhs)
    return DiscreteField(space, x)
