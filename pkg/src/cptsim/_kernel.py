"""Numba hot loop: fixed-step RK4 propagation of the 4x4 master equation.

The Python-facing contract lives in :mod:`cptsim.evolution`; this module
only knows flat arrays.  The right-hand side implemented here must stay
in lockstep with :func:`cptsim.evolution.master_equation_rhs` (a unit test
pins the two against each other at machine precision).

Kernels are compiled ``nogil`` so sweep workers can run them from a thread
pool, and ``cache=True`` so the compile cost is paid once per machine.
"""

import numpy as np
from numba import njit

DRIFT_TOL = 1e-9


@njit(cache=True, nogil=True, fastmath=True)
def propagate_phases(rho0, diag, stat_od,
                     t_rows, t_cols, t_amps, t_betas, t_phi0, t_sign,
                     rel_phases, env_code, ramp_ns, t_total, dt,
                     decay, gamma, rec_idx):
    """RK4-propagate one run per entry of ``rel_phases``.

    Parameters are prebuilt flat arrays:

    - ``diag``: frame detunings (4,), real, rad/ns
    - ``stat_od``: static couplings (4, 4), complex, zero diagonal
    - ``t_*``: beat terms as parallel arrays (row, col, complex amplitude,
      beat frequency, phase offset, relative-phase sign)
    - ``env_code``: 0 rectangular, 1 linear ramp of ``ramp_ns``
    - ``decay``: elementwise coherence/population decay rates (4, 4)
    - ``gamma``: population decay rate out of each level (4,)
    - ``rec_idx``: sorted step indices at which to record the state;
      index 0 is the initial state, ``n_steps`` the final one

    Returns ``(states, fixes)`` where ``states`` has shape
    ``(len(rel_phases), len(rec_idx), 4, 4)`` and ``fixes`` counts
    drift-triggered re-Hermitizations across all runs.
    """
    n_terms = t_rows.size
    n_phases = rel_phases.size
    m = rec_idx.size

    n_full = int(np.floor(t_total / dt + 1e-9))
    rem = t_total - n_full * dt
    has_partial = rem > 1e-12
    n_steps = n_full + (1 if has_partial else 0)

    out = np.empty((n_phases, m, 4, 4), np.complex128)
    fixes = 0

    H = np.empty((4, 4), np.complex128)
    A = np.empty((4, 4), np.complex128)
    k1 = np.empty((4, 4), np.complex128)
    k2 = np.empty((4, 4), np.complex128)
    k3 = np.empty((4, 4), np.complex128)
    k4 = np.empty((4, 4), np.complex128)
    tmp = np.empty((4, 4), np.complex128)
    rho = np.empty((4, 4), np.complex128)

    for p in range(n_phases):
        phase = rel_phases[p]
        for i in range(4):
            for j in range(4):
                rho[i, j] = rho0[i, j]
        rec_ptr = 0
        if m > 0 and rec_idx[0] == 0:
            out[p, 0] = rho
            rec_ptr = 1

        for step in range(n_steps):
            t = step * dt
            h = dt
            if has_partial and step == n_full:
                h = rem

            # RK4 stages; the midpoint Hamiltonian is shared by k2 and k3
            for which in range(3):
                if which == 0:
                    te = t
                elif which == 1:
                    te = t + 0.5 * h
                else:
                    te = t + h

                if env_code == 0:
                    env = 1.0
                else:
                    env = te / ramp_ns
                    e2 = (t_total - te) / ramp_ns
                    if e2 < env:
                        env = e2
                    if env > 1.0:
                        env = 1.0
                    if env < 0.0:
                        env = 0.0

                for i in range(4):
                    for j in range(4):
                        H[i, j] = stat_od[i, j]
                for k in range(n_terms):
                    z = t_amps[k] * np.exp(1j * (
                        t_betas[k] * te + t_phi0[k] + t_sign[k] * phase))
                    H[t_rows[k], t_cols[k]] += z
                    H[t_cols[k], t_rows[k]] += np.conj(z)
                for i in range(4):
                    for j in range(4):
                        H[i, j] *= env
                for i in range(4):
                    H[i, i] += diag[i]

                if which == 0:
                    src = rho
                    dst = k1
                elif which == 1:
                    for i in range(4):
                        for j in range(4):
                            tmp[i, j] = rho[i, j] + 0.5 * h * k1[i, j]
                    src = tmp
                    dst = k2
                else:
                    for i in range(4):
                        for j in range(4):
                            tmp[i, j] = rho[i, j] + h * k3[i, j]
                    src = tmp
                    dst = k4

                # dst = -i(H src - src H) - decay*src + cascade feed,
                # using (H src)^dagger = src H for Hermitian operands
                for i in range(4):
                    for j in range(4):
                        A[i, j] = (H[i, 0] * src[0, j] + H[i, 1] * src[1, j]
                                   + H[i, 2] * src[2, j] + H[i, 3] * src[3, j])
                for i in range(4):
                    for j in range(4):
                        dst[i, j] = (-1j * (A[i, j] - np.conj(A[j, i]))
                                     - decay[i, j] * src[i, j])
                for i in range(3):
                    dst[i, i] += gamma[i + 1] * src[i + 1, i + 1]

                if which == 1:
                    for i in range(4):
                        for j in range(4):
                            tmp[i, j] = rho[i, j] + 0.5 * h * k2[i, j]
                    for i in range(4):
                        for j in range(4):
                            A[i, j] = (H[i, 0] * tmp[0, j] + H[i, 1] * tmp[1, j]
                                       + H[i, 2] * tmp[2, j] + H[i, 3] * tmp[3, j])
                    for i in range(4):
                        for j in range(4):
                            k3[i, j] = (-1j * (A[i, j] - np.conj(A[j, i]))
                                        - decay[i, j] * tmp[i, j])
                    for i in range(3):
                        k3[i, i] += gamma[i + 1] * tmp[i + 1, i + 1]

            c = h / 6.0
            for i in range(4):
                for j in range(4):
                    rho[i, j] += c * (k1[i, j] + 2.0 * k2[i, j]
                                      + 2.0 * k3[i, j] + k4[i, j])

            if rec_ptr < m and rec_idx[rec_ptr] == step + 1:
                hd = 0.0
                for i in range(4):
                    for j in range(4):
                        d = abs(rho[i, j] - np.conj(rho[j, i]))
                        if d > hd:
                            hd = d
                tr = (rho[0, 0] + rho[1, 1] + rho[2, 2] + rho[3, 3]).real
                if hd > DRIFT_TOL or abs(tr - 1.0) > DRIFT_TOL:
                    fixes += 1
                    for i in range(4):
                        for j in range(4):
                            tmp[i, j] = 0.5 * (rho[i, j] + np.conj(rho[j, i]))
                    tr = (tmp[0, 0] + tmp[1, 1] + tmp[2, 2] + tmp[3, 3]).real
                    for i in range(4):
                        for j in range(4):
                            rho[i, j] = tmp[i, j] / tr
                out[p, rec_ptr] = rho
                rec_ptr += 1

    return out, fixes
