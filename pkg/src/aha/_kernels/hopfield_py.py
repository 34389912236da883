"""Pure-numpy Hopfield recall sweep; reference for the compiled kernel."""

import numpy as np


def hopfield_recall(weights, state, order, max_sweeps, field_offset,
                    energy0=0.0, energy_trace=None):
    """Asynchronous sign updates until a full sweep changes nothing.

    weights:      [n, n] float64, symmetric, zero diagonal.
    state:        [n] float64 in {-1, +1}, updated in place.
    order:        [n] int64 permutation, the unit visit order for every sweep.
    field_offset: [n] float64 subtracted from W @ state to form the local
                  field (zero for the classic network; activity bias and
                  firing threshold fold in here for sparse codes).
    energy_trace: optional preallocated float64 buffer receiving the energy
                  after each accepted flip, built incrementally from energy0
                  (a flip of unit i changes the energy by 2 * s_i * h_i).

    Returns (sweeps_run, flips, converged).  A zero local field leaves the
    unit unchanged.
    """
    n = state.shape[0]
    flips = 0
    sweeps = 0
    energy = energy0
    for _ in range(max_sweeps):
        sweeps += 1
        changed = False
        for idx in range(n):
            i = order[idx]
            h = float(weights[i] @ state) - field_offset[i]
            if h > 0.0:
                new = 1.0
            elif h < 0.0:
                new = -1.0
            else:
                new = state[i]
            if new != state[i]:
                if energy_trace is not None:
                    energy += 2.0 * state[i] * h
                    energy_trace[flips] = energy
                state[i] = new
                flips += 1
                changed = True
        if not changed:
            return sweeps, flips, True
    return sweeps, flips, False
