"""Vectorized numpy implementations of the hot numeric kernels.

These are the fallback path when the compiled kernels are unavailable or
disabled; see mbperiod.kernels for selection. Both implementations share
the same contracts and the same degeneracy rules, so results agree to
floating-point reordering tolerances.

Conventions used throughout:
  * per-band data is packed into flat arrays with an offsets vector of
    length B + 1 (band b is the slice offsets[b]:offsets[b+1]);
  * the per-band regression is on [sin(omega*t), cos(omega*t), 1] with
    weights w = sigma**-2, solved through the 3x3 normal equations;
  * a band is degenerate at a frequency when it has fewer than 3 points or
    the normal determinant falls below 1e-12 of the diagonal product, in
    which case the diagonal is inflated by 1e-10 of its largest entry.
"""

from __future__ import annotations

import numpy as np

DEGENERACY_RTOL = 1e-12
DIAG_JITTER = 1e-10

# cap on elements of a (frequencies x points) temporary, keeps chunked trig
# arrays around 8 MB apiece
_CHUNK_ELEMS = 1 << 20


def _det3(a11, a12, a13, a22, a23, a33):
    return (
        a11 * (a22 * a33 - a23 * a23)
        - a12 * (a12 * a33 - a23 * a13)
        + a13 * (a12 * a23 - a22 * a13)
    )


def _solve3(a11, a12, a13, a22, a23, a33, b1, b2, b3, det):
    """Cramer solve of a symmetric 3x3 system (vectorized over inputs)."""
    x1 = (
        b1 * (a22 * a33 - a23 * a23)
        - a12 * (b2 * a33 - a23 * b3)
        + a13 * (b2 * a23 - a22 * b3)
    ) / det
    x2 = (
        a11 * (b2 * a33 - a23 * b3)
        - b1 * (a12 * a33 - a23 * a13)
        + a13 * (a12 * b3 - b2 * a13)
    ) / det
    x3 = (
        a11 * (a22 * b3 - b2 * a23)
        - a12 * (a12 * b3 - b2 * a13)
        + b1 * (a12 * a23 - a22 * a13)
    ) / det
    return x1, x2, x3


def profile_detail(t, m, w, offsets, omegas):
    """Per-band regressions at every frequency.

    Returns (ell, beta0, cs, cc, degen) where ell[g] is the profile
    objective (half weighted RSS summed over bands), beta0/cs/cc are
    (G, B) coefficient arrays, and degen is a (G, B) bool array. Empty
    bands are marked degenerate everywhere and contribute nothing.
    """
    G = omegas.size
    B = offsets.size - 1
    ell = np.zeros(G)
    beta0 = np.zeros((G, B))
    cs = np.zeros((G, B))
    cc = np.zeros((G, B))
    degen = np.zeros((G, B), dtype=bool)

    for b in range(B):
        lo, hi = int(offsets[b]), int(offsets[b + 1])
        nb = hi - lo
        if nb == 0:
            degen[:, b] = True
            continue
        tb = t[lo:hi]
        mb = m[lo:hi]
        wb = w[lo:hi]
        m33 = float(wb.sum())
        b3 = float(np.dot(wb, mb))
        step = max(1, _CHUNK_ELEMS // nb)
        for g0 in range(0, G, step):
            g1 = min(G, g0 + step)
            ph = omegas[g0:g1, None] * tb[None, :]
            s = np.sin(ph)
            c = np.cos(ph)
            ws = s * wb
            wc = c * wb
            m11 = np.einsum("ij,ij->i", ws, s)
            m12 = np.einsum("ij,ij->i", ws, c)
            m13 = ws.sum(axis=1)
            m22 = np.einsum("ij,ij->i", wc, c)
            m23 = wc.sum(axis=1)
            r1 = ws @ mb
            r2 = wc @ mb
            det = _det3(m11, m12, m13, m22, m23, m33)
            bad = (nb < 3) | (det <= DEGENERACY_RTOL * m11 * m22 * m33)
            jitter = np.where(bad, DIAG_JITTER * np.maximum(m11, np.maximum(m22, m33)), 0.0)
            m11j = m11 + jitter
            m22j = m22 + jitter
            m33j = m33 + jitter
            detj = np.where(bad, _det3(m11j, m12, m13, m22j, m23, m33j), det)
            solvable = detj > 0.0
            safe_det = np.where(solvable, detj, 1.0)
            x1, x2, x3 = _solve3(m11j, m12, m13, m22j, m23, m33j, r1, r2, b3, safe_det)
            # last-ditch fallback: coefficients zero, intercept at the
            # weighted mean (keeps everything finite and deterministic)
            x1 = np.where(solvable, x1, 0.0)
            x2 = np.where(solvable, x2, 0.0)
            x3 = np.where(solvable, x3, b3 / m33)
            resid = mb[None, :] - x1[:, None] * s - x2[:, None] * c - x3[:, None]
            ell[g0:g1] += 0.5 * np.einsum("ij,ij,j->i", resid, resid, wb)
            cs[g0:g1, b] = x1
            cc[g0:g1, b] = x2
            beta0[g0:g1, b] = x3
            degen[g0:g1, b] = bad
    return ell, beta0, cs, cc, degen


def solve_band(t, m, w, omega):
    """Single-band regression at one frequency.

    Returns (beta0, cs, cc, rss, degenerate) with rss the half weighted
    residual sum of squares.
    """
    nb = t.size
    if nb == 0:
        raise ValueError("empty band")
    s = np.sin(omega * t)
    c = np.cos(omega * t)
    ws = s * w
    wc = c * w
    m11 = float(np.dot(ws, s))
    m12 = float(np.dot(ws, c))
    m13 = float(ws.sum())
    m22 = float(np.dot(wc, c))
    m23 = float(wc.sum())
    m33 = float(w.sum())
    r1 = float(np.dot(ws, m))
    r2 = float(np.dot(wc, m))
    r3 = float(np.dot(w, m))
    det = _det3(m11, m12, m13, m22, m23, m33)
    bad = (nb < 3) or (det <= DEGENERACY_RTOL * m11 * m22 * m33)
    if bad:
        jitter = DIAG_JITTER * max(m11, m22, m33)
        m11 += jitter
        m22 += jitter
        m33 += jitter
        det = _det3(m11, m12, m13, m22, m23, m33)
    if det > 0.0:
        x1, x2, x3 = _solve3(m11, m12, m13, m22, m23, m33, r1, r2, r3, det)
    else:
        x1, x2, x3 = 0.0, 0.0, r3 / m33
    resid = m - x1 * s - x2 * c - x3
    rss = 0.5 * float(np.dot(w * resid, resid))
    return x3, x1, x2, rss, bad


def nll_value(t, m, w, offsets, omega, beta0, amp, rho):
    """Data objective at the given parameters (half weighted RSS)."""
    B = offsets.size - 1
    total = 0.0
    for b in range(B):
        lo, hi = int(offsets[b]), int(offsets[b + 1])
        if hi == lo:
            continue
        r = m[lo:hi] - beta0[b] - amp[b] * np.sin(omega * t[lo:hi] + rho[b])
        total += 0.5 * float(np.dot(w[lo:hi] * r, r))
    return total


def _penalties(amp, rho, gamma1, gamma2, a_tilde):
    value = 0.0
    if gamma1 > 0.0:
        dev = amp - np.dot(a_tilde, amp) * a_tilde
        value += gamma1 * 0.5 * float(np.dot(dev, dev))
    if gamma2 > 0.0:
        dev = rho - rho.mean()
        value += gamma2 * 0.5 * float(np.dot(dev, dev))
    return value


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
    """Round-robin block descent on (beta0, amp, rho) at a fixed frequency.

    beta0/amp/rho are updated in place; trace[0] holds the initial
    penalized objective and trace[r] the value after round r when
    record_trace is set. Returns (rounds_used, converged).

    Empty bands are frozen at their initial values and skipped by every
    update; they still enter the penalty terms, which the update formulas
    account for through the frozen-band sums.
    """
    B = offsets.size - 1
    nb = (offsets[1:] - offsets[:-1]).astype(np.int64)
    active = nb > 0
    B_act = int(active.sum())
    frozen = ~active

    # phase decomposition sin(omega*t + rho) = sf*cos(rho) + cf*sin(rho)
    sf = [None] * B
    cf = [None] * B
    for b in range(B):
        lo, hi = int(offsets[b]), int(offsets[b + 1])
        if hi > lo:
            ph = omega * t[lo:hi]
            sf[b] = np.sin(ph)
            cf[b] = np.cos(ph)

    sqrt_nb = np.sqrt(nb.astype(np.float64))

    def data_nll():
        total = 0.0
        for b in range(B):
            if not active[b]:
                continue
            lo, hi = int(offsets[b]), int(offsets[b + 1])
            s = sf[b] * np.cos(rho[b]) + cf[b] * np.sin(rho[b])
            r = m[lo:hi] - beta0[b] - amp[b] * s
            total += 0.5 * float(np.dot(w[lo:hi] * r, r))
        return total

    if record_trace:
        trace[0] = data_nll() + _penalties(amp, rho, gamma1, gamma2, a_tilde)

    converged = False
    rounds = 0
    for rnd in range(1, max_rounds + 1):
        rounds = rnd
        beta0_old = beta0.copy()
        amp_old = amp.copy()
        rho_old = rho.copy()

        # update 1: intercepts, exact per-band minimizers
        for b in range(B):
            if not active[b]:
                continue
            lo, hi = int(offsets[b]), int(offsets[b + 1])
            s = sf[b] * np.cos(rho[b]) + cf[b] * np.sin(rho[b])
            wb = w[lo:hi]
            beta0[b] = float(np.dot(wb, m[lo:hi] - amp[b] * s)) / float(wb.sum())

        # update 2: amplitudes, exact joint minimizer of the coupled system
        e_diag = np.zeros(B)
        xi = np.zeros(B)
        for b in range(B):
            if not active[b]:
                continue
            lo, hi = int(offsets[b]), int(offsets[b + 1])
            s = sf[b] * np.cos(rho[b]) + cf[b] * np.sin(rho[b])
            wb = w[lo:hi]
            e_diag[b] = float(np.dot(wb * s, s)) + gamma1
            xi[b] = float(np.dot(wb * s, m[lo:hi] - beta0[b]))
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
            frozen_dot = float(np.dot(a_tilde[frozen], amp[frozen])) if B_act < B else 0.0
            xi_adj = xi + gamma1 * a_tilde * frozen_dot
            e_safe = np.where(active, e_diag, 1.0)
            y = np.where(active, xi_adj / e_safe, 0.0)
            z = np.where(active, a_tilde / e_safe, 0.0)
            q = float(np.dot(a_tilde[active], z[active]))
            denom = 1.0 - gamma1 * q
            if denom > 1e-12:
                r_corr = float(np.dot(a_tilde[active], y[active]))
                amp[active] = (y + gamma1 * z * (r_corr / denom))[active]
            # else: singular coupled system (no band constrains the
            # reference direction); keep the previous amplitudes

        # update 3: phases, one or more majorize-minimize steps
        for _ in range(int(mm_steps)):
            lips = np.zeros(B)
            grad = np.zeros(B)
            for b in range(B):
                if not active[b]:
                    continue
                lo, hi = int(offsets[b]), int(offsets[b + 1])
                wb = w[lo:hi]
                mu = m[lo:hi] - beta0[b]
                s = sf[b] * np.cos(rho[b]) + cf[b] * np.sin(rho[b])
                c = cf[b] * np.cos(rho[b]) - sf[b] * np.sin(rho[b])
                ab = amp[b]
                grad[b] = ab * float(np.dot(ab * s - mu, wb * c))
                kappa = float(wb.sum())
                wmu = wb * mu
                lips[b] = abs(ab) * (abs(ab) * kappa + sqrt_nb[b] * float(np.linalg.norm(wmu)))
            if gamma2 == 0.0:
                for b in range(B):
                    if active[b] and lips[b] > 0.0:
                        rho[b] = rho[b] - grad[b] / lips[b]
            else:
                frozen_sum = float(rho[frozen].sum()) if B_act < B else 0.0
                f_diag = lips + gamma2
                zeta = lips * rho - grad + (gamma2 / B) * frozen_sum
                y = np.where(active, zeta / f_diag, 0.0)
                q = float((1.0 / f_diag[active]).sum())
                denom = B / gamma2 - q
                if denom > 1e-12 * (B / gamma2):
                    r_corr = float(y[active].sum())
                    rho[active] = (y + (r_corr / denom) / f_diag)[active]
                # else: singular system (all curvatures zero); keep phases

        if record_trace:
            trace[rnd] = data_nll() + _penalties(amp, rho, gamma1, gamma2, a_tilde)

        scale = np.maximum(
            1.0, np.abs(np.concatenate([beta0_old, amp_old, rho_old]))
        )
        delta = np.abs(np.concatenate([beta0, amp, rho]) - np.concatenate([beta0_old, amp_old, rho_old]))
        if float((delta / scale).max()) < rel_tol:
            converged = True
            break

    return rounds, converged
