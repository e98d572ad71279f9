# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled jump-unraveling kernel; fast twin of _jumppy.run_steps.

The arithmetic must stay in lockstep with the pure-python fallback so the
two backends are bit-identical; see the module docstring there.
"""

from libc.math cimport sqrt


def run_steps(
    const double[::1] are,
    const double[::1] aim,
    int dim,
    const long long[::1] src,
    const long long[::1] tgt,
    const double[::1] pcoef,
    const unsigned char[::1] det,
    const unsigned char[::1] absorbing,
    double[::1] pre,
    double[::1] pim,
    double t0,
    double dt,
    long long step0,
    long long nsteps,
    const double[::1] u,
    double[::1] jtimes,
    long long[::1] jchans,
    long long[::1] stat,
):
    cdef double s_re[8]
    cdef double s_im[8]
    cdef double q_re[8]
    cdef double q_im[8]
    cdef double dp[8]
    cdef long long nch = src.shape[0]
    cdef long long cap = jtimes.shape[0]
    cdef long long nj = stat[0]
    cdef long long selected = stat[1]
    cdef long long absorbed = 0
    cdef long long consumed = nsteps
    cdef long long k, a, chosen
    cdef long long s, tg
    cdef int i, j, base
    cdef double ptot, r, acc, m, ar, ai, sr, si, br, bi, n2, inv
    cdef int overflow = 0

    if dim > 8 or nch > 8:
        raise ValueError("kernel supports at most 8 levels and 8 channels")

    for i in range(dim):
        s_re[i] = pre[i]
        s_im[i] = pim[i]

    with nogil:
        for k in range(nsteps):
            ptot = 0.0
            for a in range(nch):
                s = src[a]
                dp[a] = pcoef[a] * (s_re[s] * s_re[s] + s_im[s] * s_im[s])
                ptot = ptot + dp[a]
            r = u[k]
            if r < ptot:
                acc = 0.0
                chosen = nch - 1
                for a in range(nch):
                    acc = acc + dp[a]
                    if r < acc:
                        chosen = a
                        break
                s = src[chosen]
                tg = tgt[chosen]
                m = sqrt(s_re[s] * s_re[s] + s_im[s] * s_im[s])
                ar = s_re[s] / m
                ai = s_im[s] / m
                for i in range(dim):
                    s_re[i] = 0.0
                    s_im[i] = 0.0
                s_re[tg] = ar
                s_im[tg] = ai
                if nj >= cap:
                    overflow = 1
                    break
                jtimes[nj] = t0 + (step0 + k + 1) * dt
                jchans[nj] = chosen
                nj = nj + 1
                if det[chosen]:
                    selected = 0
                if absorbing[tg]:
                    absorbed = 1
                    consumed = k + 1
                    break
            else:
                for i in range(dim):
                    sr = 0.0
                    si = 0.0
                    base = i * dim
                    for j in range(dim):
                        br = s_re[j]
                        bi = s_im[j]
                        sr = sr + (are[base + j] * br - aim[base + j] * bi)
                        si = si + (are[base + j] * bi + aim[base + j] * br)
                    q_re[i] = sr
                    q_im[i] = si
                n2 = 0.0
                for i in range(dim):
                    n2 = n2 + (q_re[i] * q_re[i] + q_im[i] * q_im[i])
                inv = 1.0 / sqrt(n2)
                for i in range(dim):
                    s_re[i] = q_re[i] * inv
                    s_im[i] = q_im[i] * inv

    if overflow:
        return -1

    for i in range(dim):
        pre[i] = s_re[i]
        pim[i] = s_im[i]
    stat[0] = nj
    stat[1] = selected
    stat[2] = absorbed
    return consumed
