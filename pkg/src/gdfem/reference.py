"""Reference-triangle polynomial machinery shared by geometry and FE bases.

The reference triangle has vertices V0=(0,0), V1=(1,0), V2=(0,1).
Local edges are numbered by their vertex pairs: edge 0 = (0,1),
edge 1 = (1,2), edge 2 = (2,0).
"""

import numpy as np

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
EDGE_VERTICES = [(0, 1), (1, 2), (2, 0)]
# outward unit normals of the reference edges
EDGE_NORMALS = np.array([[0.0, -1.0],
                         [1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0)],
                         [-1.0, 0.0]])


def monomial_exponents(p):
    """Exponent pairs (a, b) of all monomials x^a y^b with a + b <= p."""
    return [(a, b) for deg in range(p + 1) for a in range(deg, -1, -1)
            for b in [deg - a]]


def eval_monomials(exps, pts):
    """Values of monomials at pts, shape (npts, nmono)."""
    x, y = pts[:, 0], pts[:, 1]
    return np.column_stack([x ** a * y ** b for a, b in exps])


def eval_monomial_grads(exps, pts):
    """Gradients of monomials at pts, shape (npts, nmono, 2)."""
    x, y = pts[:, 0], pts[:, 1]
    n = len(pts)
    out = np.zeros((n, len(exps), 2))
    for m, (a, b) in enumerate(exps):
        if a > 0:
            out[:, m, 0] = a * x ** (a - 1) * y ** b
        if b > 0:
            out[:, m, 1] = b * x ** a * y ** (b - 1)
    return out


def eval_monomial_hessians(exps, pts):
    """Second derivatives of monomials, shape (npts, nmono, 2, 2)."""
    x, y = pts[:, 0], pts[:, 1]
    n = len(pts)
    out = np.zeros((n, len(exps), 2, 2))
    for m, (a, b) in enumerate(exps):
        if a > 1:
            out[:, m, 0, 0] = a * (a - 1) * x ** (a - 2) * y ** b
        if a > 0 and b > 0:
            mixed = a * b * x ** (a - 1) * y ** (b - 1)
            out[:, m, 0, 1] = mixed
            out[:, m, 1, 0] = mixed
        if b > 1:
            out[:, m, 1, 1] = b * (b - 1) * x ** a * y ** (b - 2)
    return out


def lattice_multiindices(p):
    """Barycentric integer triples (a0, a1, a2), a0+a1+a2 = p, of the P^p lattice.

    The point of node (a0, a1, a2) is (a1/p, a2/p).  Ordering is
    deterministic: vertices first, then edge nodes (walked from the lower
    local vertex of each edge), then interior nodes.
    """
    nodes = [(p, 0, 0), (0, p, 0), (0, 0, p)]
    for k, (va, vb) in enumerate(EDGE_VERTICES):
        for s in range(1, p):
            tri = [0, 0, 0]
            tri[va] = p - s
            tri[vb] = s
            nodes.append(tuple(tri))
    for a1 in range(1, p):
        for a2 in range(1, p - a1):
            nodes.append((p - a1 - a2, a1, a2))
    if p == 0:
        nodes = [(0, 0, 0)]
    return nodes


def lattice_points(p):
    mi = lattice_multiindices(p)
    return np.array([[a1 / p, a2 / p] for (_, a1, a2) in mi]) if p > 0 \
        else np.array([[1.0 / 3.0, 1.0 / 3.0]])


class LagrangeBasis:
    """Nodal Lagrange basis of degree p on the reference triangle.

    Built by inverting the monomial Vandermonde at the lattice nodes;
    fine for the moderate degrees (p <= 4, geometry orders alike) used here.
    """

    def __init__(self, p):
        self.p = p
        self.exps = monomial_exponents(p)
        self.nodes = lattice_points(p)
        self.multiindices = lattice_multiindices(p)
        V = eval_monomials(self.exps, self.nodes)
        self.coeffs = np.linalg.inv(V)  # column j: monomial coeffs of basis j
        self.ndof = len(self.nodes)

    def eval(self, pts):
        """Basis values, shape (npts, ndof)."""
        return eval_monomials(self.exps, pts) @ self.coeffs

    def grad(self, pts):
        """Reference gradients, shape (npts, ndof, 2)."""
        G = eval_monomial_grads(self.exps, pts)
        return np.einsum("nmd,mj->njd", G, self.coeffs)

    def hess(self, pts):
        """Reference second derivatives, shape (npts, ndof, 2, 2)."""
        H = eval_monomial_hessians(self.exps, pts)
        return np.einsum("nmde,mj->njde", H, self.coeffs)


_lagrange_cache = {}


def lagrange_basis(p):
    if p not in _lagrange_cache:
        _lagrange_cache[p] = LagrangeBasis(p)
    return _lagrange_cache[p]


def shifted_legendre(j, t):
    """Legendre polynomial of degree j shifted to [0, 1]."""
    return np.polynomial.legendre.legval(2.0 * np.asarray(t) - 1.0,
                                         [0.0] * j + [1.0])
