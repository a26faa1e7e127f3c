"""Quadrature rules on the reference triangle and reference segment.

Triangle rules are built as collapsed (Duffy) tensor products of a
Gauss-Legendre rule with a Gauss-Jacobi rule absorbing the collapse
Jacobian, so arbitrary exactness orders come from a single construction
instead of hard-coded point tables.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_ORDER = 40


class UnsupportedOrderError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (n, 2) on the triangle, (n, 1) on the segment
    weights: np.ndarray  # (n,), all positive
    exactness_order: int


def _check_order(order):
    if order < 0:
        raise UnsupportedOrderError(f"negative quadrature order {order}")
    if order > MAX_ORDER:
        raise UnsupportedOrderError(
            f"quadrature order {order} exceeds supported maximum {MAX_ORDER}")


def segment_rule(order: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1], exact for polynomials of degree <= order."""
    _check_order(order)
    n = order // 2 + 1
    xs, ws = roots_legendre(n)
    pts = (xs[:, None] + 1.0) / 2.0
    return QuadratureRule(pts, ws / 2.0, order)


def triangle_rule(order: int) -> QuadratureRule:
    """Symmetric-weight positive rule on {x, y >= 0, x + y <= 1}.

    Exact for all bivariate polynomials of total degree <= order.
    """
    _check_order(order)
    n = order // 2 + 1
    xa, wa = roots_legendre(n)          # direction along the collapsed edge
    xb, wb = roots_jacobi(n, 1.0, 0.0)  # weight (1-x) absorbs the Duffy Jacobian
    a = (xa + 1.0) / 2.0
    b = (xb + 1.0) / 2.0
    wa = wa / 2.0
    wb = wb / 4.0  # includes the (1-b) factor of the collapse
    A, B = np.meshgrid(a, b, indexing="ij")
    WA, WB = np.meshgrid(wa, wb, indexing="ij")
    pts = np.column_stack([(A * (1.0 - B)).ravel(), B.ravel()])
    wts = (WA * WB).ravel()
    return QuadratureRule(pts, wts, order)
