"""NumPy reference implementations of the element-local assembly kernels.

Each function maps precomputed frame arrays to dense element-local
matrices or load vectors; the sparse scatter happens in ``assembly``.
Shapes: J elements, Q quadrature points; local vector degrees of freedom
are packed node-major, dof = 3 * local_node + component.

The compiled extension ``surfns._kernels`` mirrors these signatures
exactly; ``tests/test_kernels.py`` pins the two backends against each
other.
"""

from __future__ import annotations

import numpy as np


def local_mass(weights: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """(J, n, n) scalar mass matrices for an n-node basis table (Q, n)."""
    return np.einsum("eq,qk,ql->ekl", weights, basis, basis)


def local_stiffness(weights: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """(J, 6, 6) scalar stiffness from surface gradients (J, Q, 6, 3)."""
    return np.einsum("eq,eqkc,eqlc->ekl", weights, grads, grads)


def local_deformation(
    weights: np.ndarray, grads: np.ndarray, projection: np.ndarray
) -> np.ndarray:
    """(J, 18, 18) tangential-symmetric-gradient products.

    Entry (3k+i, 3l+j) integrates the contraction of the deformation
    tensors of basis fields chi_k e_i and chi_l e_j, which reduces to
    0.5 [P_ij (grad_k . grad_l) + grad_l[i] grad_k[j]].
    """
    term_a = np.einsum("eq,eqij,eqka,eqla->ekilj", weights, projection, grads, grads)
    term_b = np.einsum("eq,eqli,eqkj->ekilj", weights, grads, grads)
    out = 0.5 * (term_a + term_b)
    n = weights.shape[0]
    return out.reshape(n, 18, 18)


def local_div_coupling(
    weights: np.ndarray, grads: np.ndarray, basis_p1: np.ndarray
) -> np.ndarray:
    """(J, 18, 3) pressure-divergence coupling.

    Entry (3k+i, l) = - integral of psi_l * grad_k[i]; the sign makes the
    saddle system's momentum row carry +C P.
    """
    out = -np.einsum("eq,eqki,ql->ekil", weights, grads, basis_p1)
    n = weights.shape[0]
    return out.reshape(n, 18, 3)


def local_vector_load(
    weights: np.ndarray, basis: np.ndarray, values: np.ndarray
) -> np.ndarray:
    """(J, 18) load vector for pointwise vector data (J, Q, 3)."""
    out = np.einsum("eq,qk,eqi->eki", weights, basis, values)
    n = weights.shape[0]
    return out.reshape(n, 18)


def local_scalar_load(
    weights: np.ndarray, basis_p1: np.ndarray, values: np.ndarray
) -> np.ndarray:
    """(J, 3) linear-basis load vector for pointwise scalar data (J, Q)."""
    return np.einsum("eq,ql,eq->el", weights, basis_p1, values)


def local_bending_force(
    weights: np.ndarray,
    grads: np.ndarray,
    projection: np.ndarray,
    kappa_values: np.ndarray,
    kappa_jacobian: np.ndarray,
) -> np.ndarray:
    """(J, 18) explicit (geometry-frozen) part of the bending force.

    With G the surface Jacobian of the carried-over curvature field, entry
    (3k+i) integrates

        (tr G + 0.5 |kappa|^2) grad_k[i] - [P (G + G^T) grad_k]_i.
    """
    div_kappa = np.einsum("eqcc->eq", kappa_jacobian)
    knorm2 = np.einsum("eqc,eqc->eq", kappa_values, kappa_values)
    coeff = div_kappa + 0.5 * knorm2
    part_a = np.einsum("eq,eq,eqki->eki", weights, coeff, grads)
    sym2 = kappa_jacobian + np.swapaxes(kappa_jacobian, -1, -2)
    psym = np.einsum("eqij,eqjk->eqik", projection, sym2)
    part_b = np.einsum("eq,eqij,eqkj->eki", weights, psym, grads)
    n = weights.shape[0]
    return (part_a - part_b).reshape(n, 18)
