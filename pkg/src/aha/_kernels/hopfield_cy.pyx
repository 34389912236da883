# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Hopfield recall sweep; see hopfield_py for the reference."""

cimport numpy as cnp

cnp.import_array()


def hopfield_recall(cnp.float64_t[:, ::1] weights,
                    cnp.float64_t[::1] state,
                    cnp.int64_t[::1] order,
                    int max_sweeps,
                    cnp.float64_t[::1] field_offset,
                    double energy0=0.0,
                    cnp.float64_t[::1] energy_trace=None):
    """Same contract as hopfield_py.hopfield_recall."""
    cdef Py_ssize_t n = state.shape[0]
    cdef Py_ssize_t idx, i, j
    cdef int sweeps = 0, flips = 0
    cdef bint changed, track = energy_trace is not None
    cdef double h, new, energy = energy0
    cdef int sweep
    for sweep in range(max_sweeps):
        sweeps += 1
        changed = False
        for idx in range(n):
            i = order[idx]
            h = -field_offset[i]
            for j in range(n):
                h += weights[i, j] * state[j]
            if h > 0.0:
                new = 1.0
            elif h < 0.0:
                new = -1.0
            else:
                new = state[i]
            if new != state[i]:
                if track:
                    energy += 2.0 * state[i] * h
                    energy_trace[flips] = energy
                state[i] = new
                flips += 1
                changed = True
        if not changed:
            return sweeps, flips, True
    return sweeps, flips, False
