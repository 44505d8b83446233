"""Numba Metropolis sweep kernels for the two lattice samplers.

Both kernels consume pre-drawn random numbers (site-ordered Gaussian
proposals and uniform accept variates) so the sample sequence is fully
determined by the caller's generator, independent of threading.  They
release the GIL, which lets the thread-pool drivers overlap chains.

Sweep order is slice-major, site-minor.  The local action change uses
the left-point rule of effham.model: potential terms live on slices
0..N_t-1, so the free endpoint slice of a pinned-start chain couples
only through its single kinetic link.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def sweep_fixed_start(values, a_t, mass, omega2, omega02, lam, hbar,
                      spatial_periodic, step, normals, uniforms,
                      rec_every, rec_out):
    """Metropolis sweeps on a chain pinned at slice 0, free at slice N_t.

    values: (N_t + 1, N_s), slice 0 never touched.
    normals/uniforms: (n_sweeps, N_t, N_s).
    Records the endpoint slice into rec_out every rec_every sweeps
    (rec_every <= 0 disables recording).  Returns accepted-move count.
    """
    n_sweeps = normals.shape[0]
    n_t = values.shape[0] - 1
    n_s = values.shape[1]
    kin = mass / (2.0 * a_t)
    accepted = 0
    rec = 0
    for s in range(n_sweeps):
        for k in range(1, n_t + 1):
            for n in range(n_s):
                old = values[k, n]
                new = old + step * normals[s, k - 1, n]
                ds = kin * ((new - values[k - 1, n]) ** 2 - (old - values[k - 1, n]) ** 2)
                if k < n_t:
                    ds += kin * ((values[k + 1, n] - new) ** 2 - (values[k + 1, n] - old) ** 2)
                    pot = 0.5 * omega02 * (new * new - old * old) \
                        + 0.5 * lam * (new**4 - old**4)
                    if n_s > 1:
                        if spatial_periodic:
                            left = values[k, (n - 1) % n_s]
                            right = values[k, (n + 1) % n_s]
                            pot += 0.5 * omega2 * ((right - new) ** 2 - (right - old) ** 2
                                                   + (new - left) ** 2 - (old - left) ** 2)
                        else:
                            if n + 1 < n_s:
                                right = values[k, n + 1]
                                pot += 0.5 * omega2 * ((right - new) ** 2 - (right - old) ** 2)
                            if n - 1 >= 0:
                                left = values[k, n - 1]
                                pot += 0.5 * omega2 * ((new - left) ** 2 - (old - left) ** 2)
                    ds += a_t * pot
                if ds <= 0.0 or uniforms[s, k - 1, n] < np.exp(-ds / hbar):
                    values[k, n] = new
                    accepted += 1
        if rec_every > 0 and (s + 1) % rec_every == 0:
            for n in range(n_s):
                rec_out[rec, n] = values[n_t, n]
            rec += 1
    return accepted


@njit(cache=True, nogil=True)
def sweep_periodic(values, a_t, mass, omega2, omega02, lam, hbar,
                   spatial_periodic, step, normals, uniforms,
                   rec_every, rec_out):
    """Metropolis sweeps on a time-periodic lattice (thermal trace).

    values: (N_t, N_s), slice N_t identified with slice 0.
    normals/uniforms: (n_sweeps, N_t, N_s).
    Records full configurations into rec_out (n_rec, N_t, N_s).
    """
    n_sweeps = normals.shape[0]
    n_t = values.shape[0]
    n_s = values.shape[1]
    kin = mass / (2.0 * a_t)
    accepted = 0
    rec = 0
    for s in range(n_sweeps):
        for k in range(n_t):
            km = (k - 1) % n_t
            kp = (k + 1) % n_t
            for n in range(n_s):
                old = values[k, n]
                new = old + step * normals[s, k, n]
                ds = kin * ((new - values[km, n]) ** 2 - (old - values[km, n]) ** 2
                            + (values[kp, n] - new) ** 2 - (values[kp, n] - old) ** 2)
                pot = 0.5 * omega02 * (new * new - old * old) \
                    + 0.5 * lam * (new**4 - old**4)
                if n_s > 1:
                    if spatial_periodic:
                        left = values[k, (n - 1) % n_s]
                        right = values[k, (n + 1) % n_s]
                        pot += 0.5 * omega2 * ((right - new) ** 2 - (right - old) ** 2
                                               + (new - left) ** 2 - (old - left) ** 2)
                    else:
                        if n + 1 < n_s:
                            right = values[k, n + 1]
                            pot += 0.5 * omega2 * ((right - new) ** 2 - (right - old) ** 2)
                        if n - 1 >= 0:
                            left = values[k, n - 1]
                            pot += 0.5 * omega2 * ((new - left) ** 2 - (old - left) ** 2)
                ds += a_t * pot
                if ds <= 0.0 or uniforms[s, k, n] < np.exp(-ds / hbar):
                    values[k, n] = new
                    accepted += 1
        if rec_every > 0 and (s + 1) % rec_every == 0:
            for k in range(n_t):
                for n in range(n_s):
                    rec_out[rec, k, n] = values[k, n]
            rec += 1
    return accepted
