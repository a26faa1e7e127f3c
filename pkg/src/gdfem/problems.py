"""Manufactured problems on the unit disc for the rotational background flow.

All problems use rho = 1, b = 0.1 (-y, x) (so |b|_inf = 0.1 on the disc and
b.n = 0 on the boundary) and a constant sound speed c_s.  The strong operator
the forcings are derived from is

    (b.grad)^2 u - |b|_inf^2 u - grad(c_s^2 div u) = f,

the Euler-Lagrange form of -a + b with homogeneous normal trace.  The closed
forms below were derived and checked symbolically; validate() additionally
cross-checks them against finite differences at runtime.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .forms import CoefficientSet, rotational_flow


@dataclass
class ManufacturedProblem:
    """Exact solution plus matching forcing and coefficients."""
    name: str
    coeffs: CoefficientSet
    f: object                       # callable(pts) -> (n, 2)
    u: object = None                # exact solution, None if unknown
    grad_u: object = None           # (n, 2, 2), [q, c, d] = d_d u_c
    div_u: object = None

    @property
    def has_exact(self):
        return self.u is not None

    def validate(self, n_samples=40, h=1e-5, seed=4):
        """Finite-difference consistency of grad_u, div_u and f against u.

        Returns the worst relative defect found; raises AssertionError above
        the FD truncation floor.
        """
        if not self.has_exact:
            return 0.0
        rng = np.random.default_rng(seed)
        r = 0.8 * np.sqrt(rng.uniform(0.01, 1.0, n_samples))
        th = rng.uniform(0.0, 2.0 * np.pi, n_samples)
        pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
        ex = np.array([1.0, 0.0])
        ey = np.array([0.0, 1.0])
        gfd = np.stack([(self.u(pts + h * ex) - self.u(pts - h * ex)) / (2 * h),
                        (self.u(pts + h * ey) - self.u(pts - h * ey)) / (2 * h)],
                       axis=2)
        g = self.grad_u(pts)
        scale = max(float(np.abs(g).max()), 1.0)
        worst = float(np.abs(g - gfd).max()) / scale
        dfd = gfd[:, 0, 0] + gfd[:, 1, 1]
        worst = max(worst, float(np.abs(self.div_u(pts) - dfd).max()) / scale)
        ffd = _fd_operator(self.u, self.coeffs, pts, h=1e-4,
                           div_u=self.div_u)
        fscale = max(float(np.abs(self.f(pts)).max()), 1.0)
        worst = max(worst, float(np.abs(self.f(pts) - ffd).max()) / fscale)
        if worst > 1e-4:
            raise AssertionError(f"manufactured forms inconsistent: {worst:g}")
        return worst


def _fd_operator(u, coeffs, pts, h=1e-4, div_u=None):
    """(b.grad)^2 u - b_inf^2 u - grad(c^2 div u) by central differences.

    If div_u is given (already FD-checked against u) it replaces the inner
    difference quotient; this keeps the grad-div term to a single FD layer
    so large c_s^2 does not amplify truncation noise.
    """
    ex = np.array([1.0, 0.0])
    ey = np.array([0.0, 1.0])

    def conv(fun, q):
        b = coeffs.b_at(q)
        gx = (fun(q + h * ex) - fun(q - h * ex)) / (2 * h)
        gy = (fun(q + h * ey) - fun(q - h * ey)) / (2 * h)
        return b[:, :1] * gx + b[:, 1:] * gy

    def div(q):
        if div_u is not None:
            return coeffs.cs2_at(q) * div_u(q)
        dx = (u(q + h * ex)[:, 0] - u(q - h * ex)[:, 0]) / (2 * h)
        dy = (u(q + h * ey)[:, 1] - u(q - h * ey)[:, 1]) / (2 * h)
        return coeffs.cs2_at(q) * (dx + dy)

    graddiv = np.column_stack([(div(pts + h * ex) - div(pts - h * ex)) / (2 * h),
                               (div(pts + h * ey) - div(pts - h * ey)) / (2 * h)])
    return (conv(lambda q: conv(u, q), pts)
            - coeffs.b_inf ** 2 * u(pts) - graddiv)


def _coeffs(cs2, lambda_b, lambda_n):
    return CoefficientSet(rho=1.0, c_s=np.sqrt(cs2),
                          b_flow=rotational_flow(0.1), b_inf=0.1,
                          lambda_b=lambda_b, lambda_n=lambda_n)


def convergence_problem(p, cs2=1.0, lambda_b=None, lambda_n=None):
    """u = sin(pi x) cos(pi y) (-y, x); smooth, not divergence free."""
    co = _coeffs(cs2,
                 10.0 * p * p if lambda_b is None else lambda_b,
                 100.0 * p * p if lambda_n is None else lambda_n)
    pi = np.pi

    def u(pts):
        x, y = pts[:, 0], pts[:, 1]
        psi = np.sin(pi * x) * np.cos(pi * y)
        return np.column_stack([-y * psi, x * psi])

    def grad_u(pts):
        x, y = pts[:, 0], pts[:, 1]
        sx, cx = np.sin(pi * x), np.cos(pi * x)
        sy, cy = np.sin(pi * y), np.cos(pi * y)
        psi = sx * cy
        px = pi * cx * cy
        py = -pi * sx * sy
        g = np.empty((len(pts), 2, 2))
        g[:, 0, 0] = -y * px
        g[:, 0, 1] = -psi - y * py
        g[:, 1, 0] = psi + x * px
        g[:, 1, 1] = x * py
        return g

    def div_u(pts):
        x, y = pts[:, 0], pts[:, 1]
        sx, cx = np.sin(pi * x), np.cos(pi * x)
        sy, cy = np.sin(pi * y), np.cos(pi * y)
        return -pi * (x * sx * sy + y * cx * cy)

    def f(pts):
        x, y = pts[:, 0], pts[:, 1]
        sx, cx = np.sin(pi * x), np.cos(pi * x)
        sy, cy = np.sin(pi * y), np.cos(pi * y)
        psi = sx * cy
        # angular derivatives of psi (R = -y d_x + x d_y)
        rpsi = -pi * (x * sx * sy + y * cx * cy)
        r2psi = pi * (-pi * x * x * sx * cy + 2 * pi * x * y * sy * cx
                      - x * cx * cy - pi * y * y * sx * cy + y * sx * sy)
        # gradient of the divergence rpsi
        ddx = pi * (-pi * x * sy * cx + pi * y * sx * cy - sx * sy)
        ddy = pi * (-pi * x * sx * cy + pi * y * sy * cx - cx * cy)
        fx = (r2psi * (-y) + 2 * rpsi * (-x) + psi * y) / 100.0 \
            - (-y * psi) / 100.0 - cs2 * ddx
        fy = (r2psi * x + 2 * rpsi * (-y) + psi * (-x)) / 100.0 \
            - (x * psi) / 100.0 - cs2 * ddy
        return np.column_stack([fx, fy])

    return ManufacturedProblem("convergence", co, f, u, grad_u, div_u)


def locking_problem(cs2, p=2, lambda_b=None, lambda_n=None):
    """Divergence-free u = cos(pi (x^2 + y^2)) (-y, x).

    Since div u = 0, the forcing f = -0.02 u is independent of c_s, which is
    what exposes volume locking as c_s grows.
    """
    co = _coeffs(cs2,
                 10.0 * p * p if lambda_b is None else lambda_b,
                 10.0 * p * p if lambda_n is None else lambda_n)
    pi = np.pi

    def u(pts):
        x, y = pts[:, 0], pts[:, 1]
        phi = np.cos(pi * (x * x + y * y))
        return np.column_stack([-y * phi, x * phi])

    def grad_u(pts):
        x, y = pts[:, 0], pts[:, 1]
        r2 = x * x + y * y
        phi = np.cos(pi * r2)
        dphi = -2.0 * pi * np.sin(pi * r2)    # d phi / d(r^2) chain pieces
        g = np.empty((len(pts), 2, 2))
        g[:, 0, 0] = -y * x * dphi
        g[:, 0, 1] = -phi - y * y * dphi
        g[:, 1, 0] = phi + x * x * dphi
        g[:, 1, 1] = x * y * dphi
        return g

    def div_u(pts):
        return np.zeros(len(pts))

    def f(pts):
        return -0.02 * u(pts)

    return ManufacturedProblem("locking", co, f, u, grad_u, div_u)


def gradrob_problem(cs2, p=3, lambda_b=None, lambda_n=None):
    """Pure gradient forcing f = grad(x^6 + y^6); exact velocity not needed.

    A gradient-robust method produces u_h whose size scales like 1/c_s^2,
    uniformly in the mesh.
    """
    co = _coeffs(cs2,
                 10.0 * p * p if lambda_b is None else lambda_b,
                 100.0 * p * p if lambda_n is None else lambda_n)

    def f(pts):
        return np.column_stack([6.0 * pts[:, 0] ** 5, 6.0 * pts[:, 1] ** 5])

    return ManufacturedProblem("gradrob", co, f)


def gradient_potential(pts):
    """The potential of the gradient-forcing problem, phi = x^6 + y^6."""
    return pts[:, 0] ** 6 + pts[:, 1] ** 6


def gradient_potential_grad(pts):
    return np.column_stack([6.0 * pts[:, 0] ** 5, 6.0 * pts[:, 1] ** 5])
