"""Compiled inner loops: right-hand side, RK4 stepping, batched policy evaluation.

State vector layout (length ``NSTATE``):

* ``5*j + c`` for group ``j`` and compartment ``c`` in S, E, I, R, D
* ``LOSS`` accumulated economic loss
* ``PENALTY`` integral of ICU load above the cap
* ``BREAKDOWN + 5*j + term`` per-group, per-term loss integrals

Group constants arrive as the (12, 3) ``ModelParams.packed`` array.
"""

import numpy as np
from numba import njit

NCOMP = 15
LOSS = 15
PENALTY = 16
BREAKDOWN = 17
NSTATE = 32

# rows of the packed group array
P_N, P_W, P_DELTA, P_IOTA, P_DBAR, P_GE, P_GI, P_THETA, P_XI, P_ETAI, P_ETAE, P_KAPPA = range(12)


@njit(cache=True)
def force_of_infection(y, L, gp, rho, beta, alpha, out):
    for j in range(3):
        s = 0.0
        for k in range(3):
            s += rho[j, k] * gp[P_ETAE, k] * gp[P_ETAI, k] * (1.0 - gp[P_THETA, k] * L[k]) * y[5 * k + 2]
        f = beta * (1.0 - gp[P_THETA, j] * L[j]) * y[5 * j] * s
        if alpha != 2.0:
            m = 0.0
            for k in range(3):
                sk = y[5 * k]
                ek = y[5 * k + 1]
                ik = y[5 * k + 2]
                rk = y[5 * k + 3]
                kap = gp[P_KAPPA, k]
                active = sk + gp[P_ETAE, k] * ek + gp[P_ETAE, k] * gp[P_ETAI, k] * ik + (1.0 - kap) * rk
                m += rho[j, k] * (active * (1.0 - gp[P_THETA, j] * L[k]) + kap * rk)
            f *= m ** (alpha - 2.0)
        out[j] = f


@njit(cache=True)
def death_rates(y, gp, lam, out):
    """Fill ``out`` with the congestion-adjusted ICU death rates; return count of clamped groups."""
    h = 0.0
    for j in range(3):
        h += gp[P_IOTA, j] * y[5 * j + 2]
    clamped = 0
    for j in range(3):
        d = gp[P_DBAR, j] * (1.0 + lam * h)
        if d > gp[P_GI, j]:
            d = gp[P_GI, j]
            clamped += 1
        out[j] = d
    return clamped


@njit(cache=True)
def loss_terms(y, L, gp, dd, out):
    """Per-group loss rates, shape (3, 5): shielded S, E, I, shielded R, deaths."""
    for j in range(3):
        w = gp[P_W, j]
        lost = (1.0 - gp[P_XI, j]) * w
        free = 1.0 - L[j]
        ee = gp[P_ETAE, j]
        ei = gp[P_ETAI, j]
        out[j, 0] = lost * y[5 * j] * L[j]
        out[j, 1] = lost * y[5 * j + 1] * (1.0 - ee * free)
        out[j, 2] = lost * y[5 * j + 2] * (1.0 - ee * ei * free)
        out[j, 3] = lost * (1.0 - gp[P_KAPPA, j]) * y[5 * j + 3] * L[j]
        out[j, 4] = w * gp[P_DELTA, j] * gp[P_IOTA, j] * dd[j] * y[5 * j + 2]


@njit(cache=True)
def rhs(y, L, gp, rho, beta, alpha, lam, hcap, dy, foi, dd, terms):
    """Evaluate the time derivative into ``dy``; returns the number of clamped death rates.

    ``foi``, ``dd`` (length 3) and ``terms`` (3x5) are scratch buffers.
    """
    force_of_infection(y, L, gp, rho, beta, alpha, foi)
    clamped = death_rates(y, gp, lam, dd)
    loss_terms(y, L, gp, dd, terms)
    h = 0.0
    total = 0.0
    for j in range(3):
        e = y[5 * j + 1]
        i = y[5 * j + 2]
        iota = gp[P_IOTA, j]
        ge = gp[P_GE, j]
        gi = gp[P_GI, j]
        h += iota * i
        dy[5 * j] = -foi[j]
        dy[5 * j + 1] = foi[j] - ge * e
        dy[5 * j + 2] = ge * e - gi * i
        dy[5 * j + 3] = (gi - dd[j]) * iota * i + gi * (1.0 - iota) * i
        dy[5 * j + 4] = dd[j] * iota * i
        for c in range(5):
            dy[BREAKDOWN + 5 * j + c] = terms[j, c]
            total += terms[j, c]
    dy[LOSS] = total
    if hcap > 0.0 and h > hcap:
        dy[PENALTY] = h - hcap
    else:
        dy[PENALTY] = 0.0
    return clamped


@njit(cache=True)
def _level(levels, block, horizon, t, out):
    if t >= horizon:
        for j in range(3):
            out[j] = 0.0
        return
    k = int(t / block)
    if k >= levels.shape[1]:
        k = levels.shape[1] - 1
    for j in range(3):
        out[j] = levels[j, k]


@njit(cache=True)
def integrate(y0, levels, block, horizon, dt, nsteps, gp, rho, beta, alpha, lam, hcap, record, out, lev_out):
    """Classic RK4 with the shielding level held at its value on each step.

    Writes every grid point into ``out``/``lev_out`` when ``record`` is true,
    otherwise only the final state into ``out[0]``. Returns
    ``(clamp_mass, clamped_rate_evaluations)``.
    """
    y = y0.copy()
    k1 = np.empty(NSTATE)
    k2 = np.empty(NSTATE)
    k3 = np.empty(NSTATE)
    k4 = np.empty(NSTATE)
    tmp = np.empty(NSTATE)
    L = np.empty(3)
    foi = np.empty(3)
    dd = np.empty(3)
    terms = np.empty((3, 5))
    clamp_mass = 0.0
    nclamp = 0
    if record:
        out[0, :] = y
        _level(levels, block, horizon, 0.0, L)
        lev_out[0, :] = L
    for n in range(nsteps):
        t = n * dt
        # mid-step lookup keeps knots that sit on the grid exact
        _level(levels, block, horizon, t + 0.5 * dt, L)
        nclamp += rhs(y, L, gp, rho, beta, alpha, lam, hcap, k1, foi, dd, terms)
        for i in range(NSTATE):
            tmp[i] = y[i] + 0.5 * dt * k1[i]
        nclamp += rhs(tmp, L, gp, rho, beta, alpha, lam, hcap, k2, foi, dd, terms)
        for i in range(NSTATE):
            tmp[i] = y[i] + 0.5 * dt * k2[i]
        nclamp += rhs(tmp, L, gp, rho, beta, alpha, lam, hcap, k3, foi, dd, terms)
        for i in range(NSTATE):
            tmp[i] = y[i] + dt * k3[i]
        nclamp += rhs(tmp, L, gp, rho, beta, alpha, lam, hcap, k4, foi, dd, terms)
        for i in range(NSTATE):
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for i in range(NCOMP):
            if y[i] < 0.0:
                clamp_mass -= y[i]
                y[i] = 0.0
        if record:
            out[n + 1, :] = y
            _level(levels, block, horizon, (n + 1) * dt, L)
            lev_out[n + 1, :] = L
    if not record:
        out[0, :] = y
    return clamp_mass, nclamp


@njit(cache=True)
def evaluate_batch(y0, levels_batch, block, horizon, dt, nsteps, gp, rho, beta, alpha, lam, hcap, finals, clamps):
    """Integrate every policy in ``levels_batch`` (B, 3, K); terminal states go to ``finals``."""
    out = np.empty((1, NSTATE))
    lev = np.empty((1, 3))
    for b in range(levels_batch.shape[0]):
        mass, _ = integrate(
            y0, levels_batch[b], block, horizon, dt, nsteps, gp, rho, beta, alpha, lam, hcap, False, out, lev
        )
        finals[b, :] = out[0]
        clamps[b] = mass


@njit(cache=True)
def spectral_radius(K, tol, max_iter):
    """Power iteration on a nonnegative matrix; returns ``(radius, converged)``."""
    n = K.shape[0]
    v = np.ones(n) / np.sqrt(n)
    w = np.empty(n)
    lam = 0.0
    for it in range(max_iter):
        norm = 0.0
        for i in range(n):
            s = 0.0
            for k in range(n):
                s += K[i, k] * v[k]
            w[i] = s
            norm += s * s
        norm = np.sqrt(norm)
        if norm == 0.0:
            return 0.0, True
        for i in range(n):
            v[i] = w[i] / norm
        if it > 0 and abs(norm - lam) <= tol * norm:
            return norm, True
        lam = norm
    return lam, False


@njit(cache=True)
def ngm(y, L, gp, rho, beta, out):
    for j in range(3):
        for k in range(3):
            out[j, k] = (
                beta
                * (1.0 - gp[P_THETA, j] * L[j])
                * y[5 * j]
                * rho[j, k]
                * gp[P_ETAE, k]
                * gp[P_ETAI, k]
                * (1.0 - gp[P_THETA, k] * L[k])
                / gp[P_GI, k]
            )


@njit(cache=True)
def rt_series(states, levels, gp, rho, beta, tol, max_iter, out):
    """Spectral radius of the next-generation matrix at every recorded grid point."""
    K = np.empty((3, 3))
    ok = True
    for n in range(states.shape[0]):
        ngm(states[n], levels[n], gp, rho, beta, K)
        r, conv = spectral_radius(K, tol, max_iter)
        out[n] = r
        ok = ok and conv
    return ok
