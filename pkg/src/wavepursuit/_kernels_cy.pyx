# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil kernels.

Per-cell arithmetic mirrors _kernels_py.py exactly (same summation order,
same update expression) so both backends give bit-identical fields. Within
one color of a red-black sweep no two updated cells are 4-adjacent, which is
why the vectorized twin is equivalent to these sequential loops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

BACKEND = "cython"


def sor_sweep(double[:, ::1] values, const unsigned char[:, ::1] red,
              const unsigned char[:, ::1] black, double omega):
    cdef Py_ssize_t ni = values.shape[0] - 1
    cdef Py_ssize_t nj = values.shape[1] - 1
    cdef Py_ssize_t i, j, color
    cdef double v, s, new, d
    cdef double max_delta = 0.0
    cdef const unsigned char[:, ::1] mask
    for color in range(2):
        mask = red if color == 0 else black
        for i in range(1, ni):
            for j in range(1, nj):
                if mask[i, j]:
                    v = values[i, j]
                    s = ((values[i - 1, j] + values[i + 1, j]) + values[i, j - 1]) + values[i, j + 1]
                    new = v + omega * (0.25 * s - v)
                    d = fabs(new - v)
                    values[i, j] = new
                    if d > max_delta:
                        max_delta = d
    return max_delta


def diffusion_step(const double[:, ::1] values, double[:, ::1] out,
                   const unsigned char[:, ::1] update, double r):
    cdef Py_ssize_t ni = values.shape[0] - 1
    cdef Py_ssize_t nj = values.shape[1] - 1
    cdef Py_ssize_t i, j
    cdef double v, s
    for i in range(1, ni):
        for j in range(1, nj):
            if update[i, j]:
                v = values[i, j]
                s = ((values[i - 1, j] + values[i + 1, j]) + values[i, j - 1]) + values[i, j + 1]
                out[i, j] = v + r * (s - 4.0 * v)


def wave_step(const double[:, ::1] values, const double[:, ::1] prev,
              double[:, ::1] out, const unsigned char[:, ::1] update,
              double c2, double gdt):
    cdef Py_ssize_t ni = values.shape[0] - 1
    cdef Py_ssize_t nj = values.shape[1] - 1
    cdef Py_ssize_t i, j
    cdef double v, p, s
    for i in range(1, ni):
        for j in range(1, nj):
            if update[i, j]:
                v = values[i, j]
                p = prev[i, j]
                s = ((values[i - 1, j] + values[i + 1, j]) + values[i, j - 1]) + values[i, j + 1]
                out[i, j] = (2.0 * v - p) + c2 * (s - 4.0 * v) - gdt * (v - p)
