"""Pure-python jump-unraveling kernel; fallback twin of _jumpcore.

Every floating-point operation here is written in the same order as in the
compiled kernel so that both backends produce bit-identical trajectories
(the extension is compiled with FMA contraction disabled for the same
reason).  Keep the two implementations in lockstep when editing.
"""

from math import sqrt


def run_steps(
    are,
    aim,
    dim,
    src,
    tgt,
    pcoef,
    det,
    absorbing,
    pre,
    pim,
    t0,
    dt,
    step0,
    nsteps,
    u,
    jtimes,
    jchans,
    stat,
):
    """Advance one trajectory by up to `nsteps` first-order jump steps.

    Per step: jump probability per channel dp_a = dt * rate_a * |psi_src|^2;
    a single uniform decides jump-vs-drift and selects the channel by
    cumulative sum; on drift the state is multiplied by A = 1 - i dt H_eff
    and renormalized; on jump it collapses onto the target level keeping
    the source amplitude's phase.  Early exit when an absorbing level is
    reached.  Returns the number of steps consumed, or -1 if the jump log
    overflowed.  stat = [n_jumps, selected, absorbed] is updated in place.
    """
    a_re = list(are)
    a_im = list(aim)
    s_re = list(pre)
    s_im = list(pim)
    csrc = list(src)
    ctgt = list(tgt)
    coef = list(pcoef)
    cdet = list(det)
    absb = list(absorbing)
    nch = len(csrc)
    cap = len(jtimes)

    nj = int(stat[0])
    selected = int(stat[1])
    absorbed = 0
    dp = [0.0] * nch
    q_re = [0.0] * dim
    q_im = [0.0] * dim
    consumed = nsteps

    for k in range(nsteps):
        ptot = 0.0
        for a in range(nch):
            s = csrc[a]
            dp[a] = coef[a] * (s_re[s] * s_re[s] + s_im[s] * s_im[s])
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
            s = csrc[chosen]
            tg = ctgt[chosen]
            m = sqrt(s_re[s] * s_re[s] + s_im[s] * s_im[s])
            ar = s_re[s] / m
            ai = s_im[s] / m
            for i in range(dim):
                s_re[i] = 0.0
                s_im[i] = 0.0
            s_re[tg] = ar
            s_im[tg] = ai
            if nj >= cap:
                return -1
            jtimes[nj] = t0 + (step0 + k + 1) * dt
            jchans[nj] = chosen
            nj = nj + 1
            if cdet[chosen]:
                selected = 0
            if absb[tg]:
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
                    sr = sr + (a_re[base + j] * br - a_im[base + j] * bi)
                    si = si + (a_re[base + j] * bi + a_im[base + j] * br)
                q_re[i] = sr
                q_im[i] = si
            n2 = 0.0
            for i in range(dim):
                n2 = n2 + (q_re[i] * q_re[i] + q_im[i] * q_im[i])
            inv = 1.0 / sqrt(n2)
            for i in range(dim):
                s_re[i] = q_re[i] * inv
                s_im[i] = q_im[i] * inv

    for i in range(dim):
        pre[i] = s_re[i]
        pim[i] = s_im[i]
    stat[0] = nj
    stat[1] = selected
    stat[2] = absorbed
    return consumed
