"""Compiled implementations of the hot numeric kernels.

Mirrors mbperiod.kernels._reference function by function; see that module
for the contracts and the shared degeneracy rules. Loops are written out
elementwise so numba can keep everything in registers; no temporaries of
size (frequencies x points) are formed.
"""

from __future__ import annotations

import numpy as np
from numba import njit

DEGENERACY_RTOL = 1e-12
DIAG_JITTER = 1e-10


@njit(cache=True, nogil=True)
def _band_solve(t, m, w, lo, hi, omega, sbuf, cbuf):
    """Weighted sinusoid regression for one band slice at one frequency.

    Returns (beta0, cs, cc, rss, bad) where rss is the half weighted RSS
    and bad marks a degenerate (perturbed) normal system. sbuf/cbuf are
    caller scratch of length >= hi - lo; the trig values are filled once
    and reused by the residual pass.
    """
    nb = hi - lo
    m11 = 0.0
    m12 = 0.0
    m13 = 0.0
    m22 = 0.0
    m23 = 0.0
    m33 = 0.0
    r1 = 0.0
    r2 = 0.0
    r3 = 0.0
    for i in range(lo, hi):
        s = np.sin(omega * t[i])
        c = np.cos(omega * t[i])
        sbuf[i - lo] = s
        cbuf[i - lo] = c
        wi = w[i]
        mi = m[i]
        m11 += wi * s * s
        m12 += wi * s * c
        m13 += wi * s
        m22 += wi * c * c
        m23 += wi * c
        m33 += wi
        r1 += wi * s * mi
        r2 += wi * c * mi
        r3 += wi * mi
    det = (
        m11 * (m22 * m33 - m23 * m23)
        - m12 * (m12 * m33 - m23 * m13)
        + m13 * (m12 * m23 - m22 * m13)
    )
    bad = (nb < 3) or (det <= DEGENERACY_RTOL * m11 * m22 * m33)
    if bad:
        jitter = DIAG_JITTER * max(m11, max(m22, m33))
        m11 += jitter
        m22 += jitter
        m33 += jitter
        det = (
            m11 * (m22 * m33 - m23 * m23)
            - m12 * (m12 * m33 - m23 * m13)
            + m13 * (m12 * m23 - m22 * m13)
        )
    if det > 0.0:
        x1 = (
            r1 * (m22 * m33 - m23 * m23)
            - m12 * (r2 * m33 - m23 * r3)
            + m13 * (r2 * m23 - m22 * r3)
        ) / det
        x2 = (
            m11 * (r2 * m33 - m23 * r3)
            - r1 * (m12 * m33 - m23 * m13)
            + m13 * (m12 * r3 - r2 * m13)
        ) / det
        x3 = (
            m11 * (m22 * r3 - r2 * m23)
            - m12 * (m12 * r3 - r2 * m13)
            + r1 * (m12 * m23 - m22 * m13)
        ) / det
    else:
        x1 = 0.0
        x2 = 0.0
        x3 = r3 / m33
    rss = 0.0
    for i in range(lo, hi):
        r = m[i] - x1 * sbuf[i - lo] - x2 * cbuf[i - lo] - x3
        rss += 0.5 * w[i] * r * r
    return x3, x1, x2, rss, bad


@njit(cache=True, nogil=True)
def profile_detail(t, m, w, offsets, omegas):
    """Per-band regressions at every frequency; see the reference kernel."""
    G = omegas.size
    B = offsets.size - 1
    ell = np.zeros(G)
    beta0 = np.zeros((G, B))
    cs = np.zeros((G, B))
    cc = np.zeros((G, B))
    degen = np.zeros((G, B), dtype=np.bool_)
    longest = 0
    for b in range(B):
        nb = offsets[b + 1] - offsets[b]
        if nb > longest:
            longest = nb
    sbuf = np.empty(longest)
    cbuf = np.empty(longest)
    for g in range(G):
        om = omegas[g]
        total = 0.0
        for b in range(B):
            lo = offsets[b]
            hi = offsets[b + 1]
            if hi == lo:
                degen[g, b] = True
                continue
            b0, x1, x2, rss, bad = _band_solve(t, m, w, lo, hi, om, sbuf, cbuf)
            beta0[g, b] = b0
            cs[g, b] = x1
            cc[g, b] = x2
            degen[g, b] = bad
            total += rss
        ell[g] = total
    return ell, beta0, cs, cc, degen


@njit(cache=True, nogil=True)
def solve_band(t, m, w, omega):
    sbuf = np.empty(t.size)
    cbuf = np.empty(t.size)
    return _band_solve(t, m, w, 0, t.size, omega, sbuf, cbuf)


@njit(cache=True, nogil=True)
def nll_value(t, m, w, offsets, omega, beta0, amp, rho):
    B = offsets.size - 1
    total = 0.0
    for b in range(B):
        for i in range(offsets[b], offsets[b + 1]):
            r = m[i] - beta0[b] - amp[b] * np.sin(omega * t[i] + rho[b])
            total += 0.5 * w[i] * r * r
    return total


@njit(cache=True, nogil=True)
def _pnll_inner(sf, cf, m, w, offsets, gamma1, gamma2, a_tilde, beta0, amp, rho):
    B = offsets.size - 1
    total = 0.0
    for b in range(B):
        cr = np.cos(rho[b])
        sr = np.sin(rho[b])
        for i in range(offsets[b], offsets[b + 1]):
            s = sf[i] * cr + cf[i] * sr
            r = m[i] - beta0[b] - amp[b] * s
            total += 0.5 * w[i] * r * r
    if gamma1 > 0.0:
        proj = 0.0
        for b in range(B):
            proj += a_tilde[b] * amp[b]
        j1 = 0.0
        for b in range(B):
            d = amp[b] - proj * a_tilde[b]
            j1 += d * d
        total += gamma1 * 0.5 * j1
    if gamma2 > 0.0:
        mean = 0.0
        for b in range(B):
            mean += rho[b]
        mean /= B
        j2 = 0.0
        for b in range(B):
            d = rho[b] - mean
            j2 += d * d
        total += gamma2 * 0.5 * j2
    return total


@njit(cache=True, nogil=True)
def bcd_rounds(
    t,
    m,
    w,
    offsets,
    omega,
    gamma1,
    gamma2,
    a_tilde,
    beta0,
    amp,
    rho,
    rel_tol,
    max_rounds,
    mm_steps,
    record_trace,
    trace,
    amp_degen,
):
    """Round-robin block descent; see the reference kernel for semantics."""
    B = offsets.size - 1
    N = t.size

    # sin(omega*t + rho) = sf*cos(rho) + cf*sin(rho); trig on data points is
    # hoisted out of the round loop
    sf = np.empty(N)
    cf = np.empty(N)
    for i in range(N):
        sf[i] = np.sin(omega * t[i])
        cf[i] = np.cos(omega * t[i])

    active = np.empty(B, dtype=np.bool_)
    n_frozen = 0
    for b in range(B):
        active[b] = offsets[b + 1] > offsets[b]
        if not active[b]:
            n_frozen += 1

    beta0_old = np.empty(B)
    amp_old = np.empty(B)
    rho_old = np.empty(B)
    e_diag = np.empty(B)
    xi = np.empty(B)
    lips = np.empty(B)
    grad = np.empty(B)

    if record_trace:
        trace[0] = _pnll_inner(
            sf, cf, m, w, offsets, gamma1, gamma2, a_tilde, beta0, amp, rho
        )

    converged = False
    rounds = 0
    for rnd in range(1, max_rounds + 1):
        rounds = rnd
        for b in range(B):
            beta0_old[b] = beta0[b]
            amp_old[b] = amp[b]
            rho_old[b] = rho[b]

        # update 1: intercepts
        for b in range(B):
            if not active[b]:
                continue
            cr = np.cos(rho[b])
            sr = np.sin(rho[b])
            num = 0.0
            den = 0.0
            for i in range(offsets[b], offsets[b + 1]):
                s = sf[i] * cr + cf[i] * sr
                num += w[i] * (m[i] - amp[b] * s)
                den += w[i]
            beta0[b] = num / den

        # update 2: amplitudes through the rank-one inversion formula
        for b in range(B):
            e_diag[b] = 0.0
            xi[b] = 0.0
            if not active[b]:
                continue
            cr = np.cos(rho[b])
            sr = np.sin(rho[b])
            sws = 0.0
            sxm = 0.0
            for i in range(offsets[b], offsets[b + 1]):
                s = sf[i] * cr + cf[i] * sr
                sws += w[i] * s * s
                sxm += w[i] * s * (m[i] - beta0[b])
            e_diag[b] = sws + gamma1
            xi[b] = sxm
        if gamma1 == 0.0:
            for b in range(B):
                if not active[b]:
                    continue
                if e_diag[b] > 0.0:
                    amp[b] = xi[b] / e_diag[b]
                else:
                    amp[b] = 0.0
                    amp_degen[b] = True
        else:
            frozen_dot = 0.0
            if n_frozen > 0:
                for b in range(B):
                    if not active[b]:
                        frozen_dot += a_tilde[b] * amp[b]
            q = 0.0
            r_corr = 0.0
            for b in range(B):
                if active[b]:
                    yb = (xi[b] + gamma1 * a_tilde[b] * frozen_dot) / e_diag[b]
                    q += a_tilde[b] * a_tilde[b] / e_diag[b]
                    r_corr += a_tilde[b] * yb
            denom = 1.0 - gamma1 * q
            if denom > 1e-12:
                for b in range(B):
                    if active[b]:
                        yb = (xi[b] + gamma1 * a_tilde[b] * frozen_dot) / e_diag[b]
                        amp[b] = yb + gamma1 * (a_tilde[b] / e_diag[b]) * (r_corr / denom)
            # else: singular coupled system; keep previous amplitudes

        # update 3: phases, majorize-minimize steps
        for _ in range(mm_steps):
            for b in range(B):
                lips[b] = 0.0
                grad[b] = 0.0
                if not active[b]:
                    continue
                cr = np.cos(rho[b])
                sr = np.sin(rho[b])
                ab = amp[b]
                g = 0.0
                kappa = 0.0
                wmu2 = 0.0
                for i in range(offsets[b], offsets[b + 1]):
                    s = sf[i] * cr + cf[i] * sr
                    c = cf[i] * cr - sf[i] * sr
                    mu = m[i] - beta0[b]
                    g += (ab * s - mu) * w[i] * c
                    kappa += w[i]
                    wmu2 += (w[i] * mu) * (w[i] * mu)
                nb = offsets[b + 1] - offsets[b]
                grad[b] = ab * g
                lips[b] = abs(ab) * (abs(ab) * kappa + np.sqrt(nb) * np.sqrt(wmu2))
            if gamma2 == 0.0:
                for b in range(B):
                    if active[b] and lips[b] > 0.0:
                        rho[b] = rho[b] - grad[b] / lips[b]
            else:
                frozen_sum = 0.0
                if n_frozen > 0:
                    for b in range(B):
                        if not active[b]:
                            frozen_sum += rho[b]
                q = 0.0
                r_corr = 0.0
                for b in range(B):
                    if active[b]:
                        fb = lips[b] + gamma2
                        yb = (lips[b] * rho[b] - grad[b] + (gamma2 / B) * frozen_sum) / fb
                        q += 1.0 / fb
                        r_corr += yb
                denom = B / gamma2 - q
                if denom > 1e-12 * (B / gamma2):
                    for b in range(B):
                        if active[b]:
                            fb = lips[b] + gamma2
                            yb = (lips[b] * rho[b] - grad[b] + (gamma2 / B) * frozen_sum) / fb
                            rho[b] = yb + (r_corr / denom) / fb
                # else: singular system; keep phases

        if record_trace:
            trace[rnd] = _pnll_inner(
                sf, cf, m, w, offsets, gamma1, gamma2, a_tilde, beta0, amp, rho
            )

        rel = 0.0
        for b in range(B):
            sc = max(1.0, abs(beta0_old[b]))
            rel = max(rel, abs(beta0[b] - beta0_old[b]) / sc)
            sc = max(1.0, abs(amp_old[b]))
            rel = max(rel, abs(amp[b] - amp_old[b]) / sc)
            sc = max(1.0, abs(rho_old[b]))
            rel = max(rel, abs(rho[b] - rho_old[b]) / sc)
        if rel < rel_tol:
            converged = True
            break

    return rounds, converged
