# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the NumPy assembly kernels.

Signatures and semantics match ``surfns._kernels_np`` exactly; the
equivalence is pinned by tests/test_kernels.py.  All inputs must be
C-contiguous float64 arrays (the frame container guarantees this).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def local_mass(const double[:, ::1] weights, const double[:, ::1] basis):
    cdef Py_ssize_t ne = weights.shape[0]
    cdef Py_ssize_t nq = weights.shape[1]
    cdef Py_ssize_t nb = basis.shape[1]
    out_arr = np.zeros((ne, nb, nb))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, q, k, l
    cdef double w
    for e in range(ne):
        for q in range(nq):
            w = weights[e, q]
            # basis product first: keeps the matrix bitwise symmetric
            for k in range(nb):
                for l in range(nb):
                    out[e, k, l] += w * (basis[q, k] * basis[q, l])
    return out_arr


def local_stiffness(const double[:, ::1] weights, const double[:, :, :, ::1] grads):
    cdef Py_ssize_t ne = weights.shape[0]
    cdef Py_ssize_t nq = weights.shape[1]
    out_arr = np.zeros((ne, 6, 6))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, q, k, l
    cdef double w, dot
    for e in range(ne):
        for q in range(nq):
            w = weights[e, q]
            for k in range(6):
                for l in range(6):
                    dot = (
                        grads[e, q, k, 0] * grads[e, q, l, 0]
                        + grads[e, q, k, 1] * grads[e, q, l, 1]
                        + grads[e, q, k, 2] * grads[e, q, l, 2]
                    )
                    out[e, k, l] += w * dot
    return out_arr


def local_deformation(
    const double[:, ::1] weights,
    const double[:, :, :, ::1] grads,
    const double[:, :, :, ::1] projection,
):
    cdef Py_ssize_t ne = weights.shape[0]
    cdef Py_ssize_t nq = weights.shape[1]
    out_arr = np.zeros((ne, 18, 18))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, q, k, l, i, j
    cdef double hw, dot
    for e in range(ne):
        for q in range(nq):
            hw = 0.5 * weights[e, q]
            for k in range(6):
                for l in range(6):
                    dot = (
                        grads[e, q, k, 0] * grads[e, q, l, 0]
                        + grads[e, q, k, 1] * grads[e, q, l, 1]
                        + grads[e, q, k, 2] * grads[e, q, l, 2]
                    )
                    for i in range(3):
                        for j in range(3):
                            out[e, 3 * k + i, 3 * l + j] += hw * (
                                projection[e, q, i, j] * dot
                                + grads[e, q, l, i] * grads[e, q, k, j]
                            )
    return out_arr


def local_div_coupling(
    const double[:, ::1] weights,
    const double[:, :, :, ::1] grads,
    const double[:, ::1] basis_p1,
):
    cdef Py_ssize_t ne = weights.shape[0]
    cdef Py_ssize_t nq = weights.shape[1]
    out_arr = np.zeros((ne, 18, 3))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, q, k, i, l
    cdef double w, wg
    for e in range(ne):
        for q in range(nq):
            w = weights[e, q]
            for k in range(6):
                for i in range(3):
                    wg = w * grads[e, q, k, i]
                    for l in range(3):
                        out[e, 3 * k + i, l] -= wg * basis_p1[q, l]
    return out_arr


def local_vector_load(
    const double[:, ::1] weights,
    const double[:, ::1] basis,
    const double[:, :, ::1] values,
):
    cdef Py_ssize_t ne = weights.shape[0]
    cdef Py_ssize_t nq = weights.shape[1]
    out_arr = np.zeros((ne, 18))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e, q, k, i
    cdef double wb
    for e in range(ne):
        for q in range(nq):
            for k in range(6):
                wb = weights[e, q] * basis[q, k]
                for i in range(3):
                    out[e, 3 * k + i] += wb * values[e, q, i]
    return out_arr


def local_scalar_load(
    const double[:, ::1] weights,
    const double[:, ::1] basis_p1,
    const double[:, ::1] values,
):
    cdef Py_ssize_t ne = weights.shape[0]
    cdef Py_ssize_t nq = weights.shape[1]
    out_arr = np.zeros((ne, 3))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e, q, l
    cdef double wv
    for e in range(ne):
        for q in range(nq):
            wv = weights[e, q] * values[e, q]
            for l in range(3):
                out[e, l] += wv * basis_p1[q, l]
    return out_arr


def local_bending_force(
    const double[:, ::1] weights,
    const double[:, :, :, ::1] grads,
    const double[:, :, :, ::1] projection,
    const double[:, :, ::1] kappa_values,
    const double[:, :, :, ::1] kappa_jacobian,
):
    cdef Py_ssize_t ne = weights.shape[0]
    cdef Py_ssize_t nq = weights.shape[1]
    out_arr = np.zeros((ne, 18))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e, q, k, i, j, m
    cdef double w, coeff, acc
    cdef double sym2[3][3]
    cdef double pg[3][3]
    for e in range(ne):
        for q in range(nq):
            w = weights[e, q]
            coeff = (
                kappa_jacobian[e, q, 0, 0]
                + kappa_jacobian[e, q, 1, 1]
                + kappa_jacobian[e, q, 2, 2]
                + 0.5
                * (
                    kappa_values[e, q, 0] * kappa_values[e, q, 0]
                    + kappa_values[e, q, 1] * kappa_values[e, q, 1]
                    + kappa_values[e, q, 2] * kappa_values[e, q, 2]
                )
            )
            for i in range(3):
                for j in range(3):
                    sym2[i][j] = kappa_jacobian[e, q, i, j] + kappa_jacobian[e, q, j, i]
            for i in range(3):
                for j in range(3):
                    acc = 0.0
                    for m in range(3):
                        acc += projection[e, q, i, m] * sym2[m][j]
                    pg[i][j] = acc
            for k in range(6):
                for i in range(3):
                    acc = coeff * grads[e, q, k, i]
                    for j in range(3):
                        acc -= pg[i][j] * grads[e, q, k, j]
                    out[e, 3 * k + i] += w * acc
    return out_arr
