"""Compiled inner loop for pooled particle features of exchangeable trig systems.

One particle is a row of N angles.  For every row the kernel evolves the
coupled map and, from the same initial angles, the time-dependent
mean-field map, and accumulates row averages of ``exp(-2 pi i k x)``.
Harmonics ``exp(2 pi i m x)`` are obtained by repeated multiplication from a
single ``sincos`` per angle and step.
"""
from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

HAVE_NUMBA = njit is not None

__all__ = ["HAVE_NUMBA", "pooled_features_compiled"]


def _pooled_features(x0, deg, shift, site_modes, terms, mf_c, mf_s, diag_w, K, Y, W):
    n, N = x0.shape
    T = terms.shape[0]
    t = mf_c.shape[0]
    n_site = site_modes.shape[0]
    mmax = 1
    for a in range(n_site):
        mmax = max(mmax, abs(int(site_modes[a, 1])))
    for a in range(T):
        p = int(terms[a, 1])
        q = int(terms[a, 2])
        mmax = max(mmax, abs(p), abs(q), abs(p + q))
    two_pi = 2.0 * math.pi
    x = np.empty(N)
    y = np.empty(N)
    xn = np.empty(N)
    pw = np.empty(2 * mmax + 1, dtype=np.complex128)
    site_rot = np.empty(n_site, dtype=np.complex128)
    for a in range(n_site):
        site_rot[a] = complex(math.cos(site_modes[a, 2]), math.sin(site_modes[a, 2]))
    term_rot = np.empty(T, dtype=np.complex128)
    for a in range(T):
        term_rot[a] = complex(math.cos(terms[a, 3]), math.sin(terms[a, 3]))
    Cq = np.empty(T)
    Sq = np.empty(T)
    for r in range(n):
        for j in range(N):
            x[j] = x0[r, j]
            y[j] = x0[r, j]
        for s in range(t + 1):
            # mean-field copy: record modes at time s, then step
            for i in range(N):
                e = complex(math.cos(two_pi * y[i]), math.sin(two_pi * y[i]))
                ec = e.conjugate()
                w = ec
                for k in range(K):
                    W[r, s, k] += w
                    w *= ec
                if s == t:
                    continue
                pw[mmax] = 1.0
                for m in range(1, mmax + 1):
                    pw[mmax + m] = pw[mmax + m - 1] * e
                    pw[mmax - m] = pw[mmax + m].conjugate()
                v = deg * y[i] + shift
                for a in range(n_site):
                    v += site_modes[a, 0] * (site_rot[a] * pw[mmax + int(site_modes[a, 1])]).imag
                for a in range(T):
                    z = term_rot[a] * pw[mmax + int(terms[a, 1])]
                    v += terms[a, 0] * (z.imag * mf_c[s, a] + z.real * mf_s[s, a])
                    if diag_w != 0.0:
                        v += diag_w * terms[a, 0] * (term_rot[a] * pw[mmax + int(terms[a, 1]) + int(terms[a, 2])]).imag
                y[i] = v - math.floor(v)
            if s == t:
                break
            # coupled map step
            for a in range(T):
                Cq[a] = 0.0
                Sq[a] = 0.0
            for j in range(N):
                th = two_pi * x[j]
                e = complex(math.cos(th), math.sin(th))
                for a in range(T):
                    q = int(terms[a, 2])
                    zq = 1.0 + 0.0j
                    base = e if q >= 0 else e.conjugate()
                    for _ in range(abs(q)):
                        zq *= base
                    Cq[a] += zq.real
                    Sq[a] += zq.imag
            for a in range(T):
                Cq[a] /= N
                Sq[a] /= N
            for i in range(N):
                th = two_pi * x[i]
                e = complex(math.cos(th), math.sin(th))
                pw[mmax] = 1.0
                for m in range(1, mmax + 1):
                    pw[mmax + m] = pw[mmax + m - 1] * e
                    pw[mmax - m] = pw[mmax + m].conjugate()
                v = deg * x[i] + shift
                for a in range(n_site):
                    v += site_modes[a, 0] * (site_rot[a] * pw[mmax + int(site_modes[a, 1])]).imag
                for a in range(T):
                    z = term_rot[a] * pw[mmax + int(terms[a, 1])]
                    v += terms[a, 0] * (z.imag * Cq[a] + z.real * Sq[a])
                xn[i] = v - math.floor(v)
            for i in range(N):
                x[i] = xn[i]
        for i in range(N):
            th = two_pi * x[i]
            ec = complex(math.cos(th), -math.sin(th))
            w = ec
            for k in range(K):
                Y[r, k] += w
                w *= ec
        for k in range(K):
            Y[r, k] /= N
            for s in range(t + 1):
                W[r, s, k] /= N


pooled_features_compiled = njit(cache=True)(_pooled_features) if HAVE_NUMBA else None
