"""Independent reference computations.

Deliberately naive: explicit loops and textbook Gaussian elimination, no
shared code with the library and no LAPACK calls.
"""
import math

import numpy as np


def normal_equations(target, regressors, weights, loading=0.0):
    """Assemble ``R`` and ``p`` entry by entry."""
    n_frames, m = len(regressors), len(regressors[0])
    r = [[0j] * m for _ in range(m)]
    p = [0j] * m
    for t in range(n_frames):
        x, w = regressors[t], float(weights[t])
        for i in range(m):
            p[i] += complex(x[i]) * complex(target[t]).conjugate() / w
            for j in range(m):
                r[i][j] += complex(x[i]) * complex(x[j]).conjugate() / w
    if loading:
        delta = loading * sum(r[i][i].real for i in range(m)) / m
        for i in range(m):
            r[i][i] += delta
    return r, p


def gauss_solve(a, b):
    """Solve ``a x = b`` by Gaussian elimination with partial pivoting."""
    n = len(b)
    a = [list(row) + [b[i]] for i, row in enumerate(a)]
    for col in range(n):
        piv = max(range(col, n), key=lambda i: abs(a[i][col]))
        a[col], a[piv] = a[piv], a[col]
        for i in range(col + 1, n):
            fac = a[i][col] / a[col][col]
            for j in range(col, n + 1):
                a[i][j] -= fac * a[col][j]
    x = [0j] * n
    for i in reversed(range(n)):
        acc = a[i][n] - sum(a[i][j] * x[j] for j in range(i + 1, n))
        x[i] = acc / a[i][i]
    return np.array(x)


def naive_wls(target, regressors, weights, loading=0.0):
    r, p = normal_equations(target, regressors, weights, loading)
    return gauss_solve(r, p)


def naive_covariance(s):
    """``sum_t s(t) s(t)^H`` with a double loop, ``s`` is ``[P, T]``."""
    n_ch, n_frames = s.shape
    out = np.zeros((n_ch, n_ch), dtype=complex)
    for i in range(n_ch):
        for j in range(n_ch):
            out[i, j] = sum(s[i, t] * np.conj(s[j, t]) for t in range(n_frames))
    return out


def naive_si_sdr(estimate, reference):
    """Uncapped SI-SDR with plain Python sums."""
    dot = math.fsum(e * r for e, r in zip(estimate, reference))
    rr = math.fsum(r * r for r in reference)
    alpha = dot / rr
    num = math.fsum((alpha * r) ** 2 for r in reference)
    den = math.fsum((e - alpha * r) ** 2 for e, r in zip(estimate, reference))
    return 10 * math.log10(num / den)


def schroeder_slope_db(h, sample_rate, lo_db=-5.0, hi_db=-35.0):
    """Decay rate in dB per second from a straight-line fit to the Schroeder
    backward-integrated energy curve between ``lo_db`` and ``hi_db``."""
    e = np.cumsum((np.asarray(h) ** 2)[::-1])[::-1]
    edc = 10 * np.log10(e / e[0])
    idx = np.flatnonzero((edc <= lo_db) & (edc >= hi_db))
    t = idx / sample_rate
    slope, _ = np.polyfit(t, edc[idx], 1)
    return slope
