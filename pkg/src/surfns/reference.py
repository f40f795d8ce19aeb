"""Reference triangle: Lagrange bases and quadrature.

Everything is expressed on the unit triangle with vertices (0,0), (1,0),
(0,1).  The quadratic (six-node) element places its midside nodes opposite
the corner of the same index: local node 3+i sits on the edge joining
corners (i+1) % 3 and (i+2) % 3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

__all__ = [
    "QuadratureRule",
    "quadrature_rule",
    "p2_values",
    "p2_gradients",
    "p1_values",
    "p1_gradients",
]

MAX_DEGREE = 20


def p2_values(points: np.ndarray) -> np.ndarray:
    """Quadratic basis values at reference points, shape (n_pts, 6)."""
    x = points[..., 0]
    y = points[..., 1]
    l0 = 1.0 - x - y
    out = np.empty(points.shape[:-1] + (6,))
    out[..., 0] = l0 * (2.0 * l0 - 1.0)
    out[..., 1] = x * (2.0 * x - 1.0)
    out[..., 2] = y * (2.0 * y - 1.0)
    out[..., 3] = 4.0 * x * y
    out[..., 4] = 4.0 * y * l0
    out[..., 5] = 4.0 * l0 * x
    return out


def p2_gradients(points: np.ndarray) -> np.ndarray:
    """Reference-coordinate gradients of the quadratic basis, (n_pts, 6, 2)."""
    x = points[..., 0]
    y = points[..., 1]
    out = np.empty(points.shape[:-1] + (6, 2))
    out[..., 0, 0] = 4.0 * (x + y) - 3.0
    out[..., 0, 1] = 4.0 * (x + y) - 3.0
    out[..., 1, 0] = 4.0 * x - 1.0
    out[..., 1, 1] = 0.0
    out[..., 2, 0] = 0.0
    out[..., 2, 1] = 4.0 * y - 1.0
    out[..., 3, 0] = 4.0 * y
    out[..., 3, 1] = 4.0 * x
    out[..., 4, 0] = -4.0 * y
    out[..., 4, 1] = 4.0 * (1.0 - x - 2.0 * y)
    out[..., 5, 0] = 4.0 * (1.0 - 2.0 * x - y)
    out[..., 5, 1] = -4.0 * x
    return out


def p1_values(points: np.ndarray) -> np.ndarray:
    """Linear (barycentric) basis values, shape (n_pts, 3)."""
    x = points[..., 0]
    y = points[..., 1]
    out = np.empty(points.shape[:-1] + (3,))
    out[..., 0] = 1.0 - x - y
    out[..., 1] = x
    out[..., 2] = y
    return out


def p1_gradients(n_pts: int) -> np.ndarray:
    """Constant reference gradients of the linear basis, (n_pts, 3, 2)."""
    g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return np.broadcast_to(g, (n_pts, 3, 2)).copy()


# Local reference coordinates of the six element nodes (corners then midsides).
P2_NODE_COORDS = np.array(
    [
        [0.0, 0.0],
        [1.0, 0.0],
        [0.0, 1.0],
        [0.5, 0.5],
        [0.0, 0.5],
        [0.5, 0.0],
    ]
)


@dataclass(frozen=True)
class QuadratureRule:
    """A positive-weight rule on the reference triangle.

    ``points`` has shape (n, 2) with all points strictly inside the
    triangle; ``weights`` sums to the reference area 1/2.  Basis tables at
    the rule's points are precomputed since every assembly path needs them.
    """

    degree: int
    points: np.ndarray
    weights: np.ndarray
    basis_p2: np.ndarray = field(repr=False, default=None)
    grads_p2: np.ndarray = field(repr=False, default=None)
    basis_p1: np.ndarray = field(repr=False, default=None)
    grads_p1: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.basis_p2 is None:
            object.__setattr__(self, "basis_p2", p2_values(self.points))
            object.__setattr__(self, "grads_p2", p2_gradients(self.points))
            object.__setattr__(self, "basis_p1", p1_values(self.points))
            object.__setattr__(self, "grads_p1", p1_gradients(len(self.points)))

    @property
    def n_points(self) -> int:
        return len(self.weights)


def quadrature_rule(degree: int = 17) -> QuadratureRule:
    """Conical-product rule exact for polynomials of total degree ``degree``.

    The rule collapses a tensor Gauss grid onto the triangle: a
    Gauss-Legendre rule in the first direction crossed with a Gauss-Jacobi
    rule (weight 1 - b) in the second, mapped by (a, b) -> (a(1-b), b).
    With n = ceil((degree+1)/2) points per direction the product integrates
    all monomials x^p y^q, p + q <= 2n - 1, exactly.
    """
    if not isinstance(degree, (int, np.integer)):
        raise ValueError(f"quadrature degree must be an integer, got {degree!r}")
    if degree < 1 or degree > MAX_DEGREE:
        raise ValueError(
            f"quadrature degree must lie in [1, {MAX_DEGREE}], got {degree}"
        )
    n = (degree + 2) // 2  # ceil((degree + 1) / 2)

    # Gauss-Legendre on [0, 1]: sum of weights 1.
    ga, wa = leggauss(n)
    ga = 0.5 * (ga + 1.0)
    wa = 0.5 * wa

    # Gauss-Jacobi for weight (1 - t) on [-1, 1], mapped to weight (1 - b)
    # on [0, 1]; the affine map contributes a factor 1/4.
    gb, wb = roots_jacobi(n, 1.0, 0.0)
    gb = 0.5 * (gb + 1.0)
    wb = 0.25 * wb

    a = np.repeat(ga, n)
    b = np.tile(gb, n)
    points = np.column_stack([a * (1.0 - b), b])
    weights = np.repeat(wa, n) * np.tile(wb, n)
    return QuadratureRule(degree=int(degree), points=points, weights=weights)
