"""Data-parallel update kernels for the hierarchy propagation.

The right-hand-side kernel is a pure map over hierarchy positions: position k
reads its own matrix and up to 2*n_sites neighbor matrices from the read-only
input buffer and writes exactly one matrix in the output buffer. Per-position
term order is fixed so results are bitwise independent of the worker count.

Every output element is accumulated in one local double-precision variable
and stored exactly once, which keeps the single-precision build close to its
rounding floor. Site coupling operators are projectors, so a basis index
belongs to at most one site and each element receives raise/lower
contributions only through its row site and its column site (``site_of``
maps basis index -> site slot, -1 for none). The Hamiltonian must be real
symmetric, in rad/fs. Markovian population decay enters through the
per-state rate vector; jump refilling targets only the (excluded) sink
states and is integrated outside the kernel.
"""

import numpy as np
from numba import njit, prange


@njit(parallel=True, fastmath=True, nogil=True, cache=True)
def hierarchy_rhs_kernel(out, sig, h, site_of, plus, minus, nvec, tier_damp,
                         a_comm, b_anti, decay):
    n_tot = sig.shape[0]
    d = sig.shape[1]
    for k in prange(n_tot):
        s = sig[k]
        o = out[k]
        damp = tier_damp[k]
        for i in range(d):
            mi = site_of[i]
            di = decay[i]
            for j in range(d):
                acc = -(damp + 0.5 * (di + decay[j])) * s[i, j]
                cm = 0j
                for l in range(d):
                    cm += h[i, l] * s[l, j] - s[i, l] * h[l, j]
                acc += -1j * cm
                if mi >= 0:
                    p = plus[k, mi]
                    if p >= 0:
                        acc += 1j * sig[p][i, j]
                    q = minus[k, mi]
                    if q >= 0:
                        n_m = nvec[k, mi]
                        acc += (n_m * b_anti + 1j * (n_m * a_comm)) * sig[q][i, j]
                mj = site_of[j]
                if mj >= 0:
                    p = plus[k, mj]
                    if p >= 0:
                        acc -= 1j * sig[p][i, j]
                    q = minus[k, mj]
                    if q >= 0:
                        n_m = nvec[k, mj]
                        acc += (n_m * b_anti - 1j * (n_m * a_comm)) * sig[q][i, j]
                o[i, j] = acc


@njit(parallel=True, fastmath=True, nogil=True, cache=True)
def add_scaled(out, x, y, c):
    """out = x + c*y over flat arrays."""
    for i in prange(out.size):
        out[i] = x[i] + c * y[i]


@njit(parallel=True, fastmath=True, nogil=True, cache=True)
def rk4_update(sig, k1, k2, k3, k4, w):
    """sig += w*(k1 + 2*k2 + 2*k3 + k4) over flat arrays."""
    for i in prange(sig.size):
        sig[i] = sig[i] + w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])


@njit(nogil=True, cache=True)
def max_abs2(x):
    """Largest |x_i|^2 over a flat complex array."""
    m = 0.0
    for i in range(x.size):
        v = x[i]
        a = v.real * v.real + v.imag * v.imag
        if a > m:
            m = a
    return m
