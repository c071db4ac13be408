"""Brute-force reference constructions shared by the test modules.

Everything here is deliberately naive (Kronecker products, scipy.linalg.expm,
explicit index sums) and independent of the engines under test.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg

X = np.array([[0.0, 1.0], [1.0, 0.0]])
Z = np.diag([1.0, -1.0])
I2 = np.eye(2)


def site_op(op, site, N):
    """op on 0-based site, site 0 being the leftmost Kronecker factor."""
    out = np.ones((1, 1))
    for s in range(N):
        out = np.kron(out, op if s == site else I2)
    return out


def mixed_field(N, J, h, g):
    H = sum(J * site_op(Z, i, N) @ site_op(Z, i + 1, N) for i in range(N - 1))
    return H + sum(h * site_op(Z, i, N) + g * site_op(X, i, N) for i in range(N))


def tfim_parity(N, g, J=1.0):
    """-J sum X X - g sum Z + J P X_N X_1 with P = prod Z, built from Pauli strings."""
    H = -J * sum(site_op(X, i, N) @ site_op(X, i + 1, N) for i in range(N - 1))
    H = H - g * sum(site_op(Z, i, N) for i in range(N))
    P = np.eye(2**N)
    for i in range(N):
        P = P @ site_op(Z, i, N)
    return H + J * P @ site_op(X, N - 1, N) @ site_op(X, 0, N)


def z_field(eps):
    N = len(eps)
    return sum(-0.5 * e * site_op(Z, i, N) for i, e in enumerate(eps))


def gibbs(H, beta):
    w, v = np.linalg.eigh(H)
    p = np.exp(-beta * (w - w.min()))
    p /= p.sum()
    return (v * p) @ v.conj().T


def trotter_rho(rho, H0, H1, T, tau, gamma=lambda s: s):
    """Conjugate rho by prod_j expm(-i H(s_j) T/M), s_j = j/M, using scipy's expm."""
    M = int(np.ceil(T / tau - 1e-9))
    dt = T / M
    for j in range(1, M + 1):
        g = gamma(j / M)
        U = linalg.expm(-1j * dt * ((1 - g) * H0 + g * H1))
        rho = U @ rho @ U.conj().T
    return rho


def cod_commutator(rho, H):
    c = H @ rho - rho @ H
    return float(-np.trace(c @ c).real / np.trace(rho @ rho).real)


def jw_annihilators(N):
    """a_j = (prod_{s<j} -Z_s) sigma^-_j with spin up as the occupied state."""
    sm = np.array([[0.0, 0.0], [1.0, 0.0]])
    ops = []
    for j in range(N):
        m = np.ones((1, 1))
        for s in range(N):
            m = np.kron(m, -Z if s < j else (sm if s == j else I2))
        ops.append(m)
    return ops


def quadratic_operator(A, B, const, N):
    """sum A_ij a_i^dag a_j + 1/2 sum (B_ij a_i^dag a_j^dag + h.c.) + const on the spin space."""
    a = jw_annihilators(N)
    ad = [x.conj().T for x in a]
    H = const * np.eye(2**N, dtype=complex)
    for i in range(N):
        for j in range(N):
            H = H + A[i, j] * ad[i] @ a[j]
            if B[i, j] != 0:
                term = 0.5 * B[i, j] * ad[i] @ ad[j]
                H = H + term + term.conj().T
    return H


def partial_trace_loops(rho, keep, N):
    """Reduced density matrix by explicit index sums (0-based kept sites, ascending)."""
    drop = [s for s in range(N) if s not in keep]
    dk = 2 ** len(keep)
    out = np.zeros((dk, dk), dtype=complex)
    for a in range(dk):
        for b in range(dk):
            acc = 0.0
            for e in range(2 ** len(drop)):
                ia = ib = 0
                for pos, site in enumerate(keep):
                    ia |= ((a >> (len(keep) - 1 - pos)) & 1) << (N - 1 - site)
                    ib |= ((b >> (len(keep) - 1 - pos)) & 1) << (N - 1 - site)
                for pos, site in enumerate(drop):
                    bit = ((e >> (len(drop) - 1 - pos)) & 1) << (N - 1 - site)
                    ia |= bit
                    ib |= bit
                acc += rho[ia, ib]
            out[a, b] = acc
    return out
