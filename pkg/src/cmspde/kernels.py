"""Ensemble time-stepping kernels.

Every kernel exists twice: an ``@njit`` loop over members and steps, and a
numpy implementation vectorised across members.  Both take pre-generated
Wiener increments so they consume identical noise; results agree to
rounding.  ``run(name, *args, backend=...)`` dispatches, defaulting to the
backend picked by ``CMSPDE_NUMBA``.

Blown-up members (non-finite or ``|x| > 1e9``) stop updating; their
remaining records are NaN and ``blow_step`` holds the offending step index
(``-1`` for members that finished cleanly).
"""
import numpy as np

from ._accel import default_backend, njit

LIMIT = 1e9

# Filter bank used by the strong models: (decay rate, index of source state;
# -1 means the white-noise driver).  Order: A=E2 phi, B=E2 E2 phi,
# C=E3 E2 phi, D=E2 E3 E2 phi, E=E4 E2 phi, F=E4 E3 E2 phi, G=E3 E2 E2 phi.
BANK_RATES = np.array([3.0, 3.0, 8.0, 3.0, 15.0, 15.0, 8.0])
BANK_SOURCE = np.array([-1, 0, 0, 2, 0, 2, 1])
N_BANK = 7

NAIVE = 0
NORMAL_FORM = 1


# ---------------------------------------------------------------- quad noise

@njit
def _quad_numba(dW, dt, beta1, beta2, n_burn, record_every):
    M, S = dW.shape
    n_rec = (S - n_burn) // record_every
    rec = np.full((M, n_rec, 4), np.nan)
    blow = np.full(M, -1, np.int64)
    for m in range(M):
        y1 = 0.0
        y2 = 0.0
        z1 = 0.0
        z2 = 0.0
        r = 0
        for s in range(S):
            w = dW[m, s]
            z1p = z1 - beta1 * z1 * dt + w
            z2p = z2 + (z1 - beta2 * z2) * dt
            if s >= n_burn:
                y1 += 0.5 * (z1 + z1p) * w
                y2 += 0.5 * (z2 + z2p) * w
            z1n = z1 - 0.5 * beta1 * (z1 + z1p) * dt + w
            z2 = z2 + 0.5 * (z1 + z1p - beta2 * (z2 + z2p)) * dt
            z1 = z1n
            if not (abs(y1) <= LIMIT and abs(y2) <= LIMIT and abs(z1) <= LIMIT and abs(z2) <= LIMIT):
                blow[m] = s
                break
            k = s + 1 - n_burn
            if k > 0 and k % record_every == 0:
                rec[m, r, 0] = y1
                rec[m, r, 1] = y2
                rec[m, r, 2] = z1
                rec[m, r, 3] = z2
                r += 1
    return rec, blow


def _quad_numpy(dW, dt, beta1, beta2, n_burn, record_every):
    M, S = dW.shape
    n_rec = (S - n_burn) // record_every
    rec = np.full((M, n_rec, 4), np.nan)
    blow = np.full(M, -1, np.int64)
    y1 = np.zeros(M)
    y2 = np.zeros(M)
    z1 = np.zeros(M)
    z2 = np.zeros(M)
    alive = np.ones(M, dtype=bool)
    r = 0
    for s in range(S):
        w = dW[:, s]
        z1p = z1 - beta1 * z1 * dt + w
        z2p = z2 + (z1 - beta2 * z2) * dt
        if s >= n_burn:
            y1 = y1 + 0.5 * (z1 + z1p) * w
            y2 = y2 + 0.5 * (z2 + z2p) * w
        z1n = z1 - 0.5 * beta1 * (z1 + z1p) * dt + w
        z2 = z2 + 0.5 * (z1 + z1p - beta2 * (z2 + z2p)) * dt
        z1 = z1n
        ok = (np.abs(y1) <= LIMIT) & (np.abs(y2) <= LIMIT) & (np.abs(z1) <= LIMIT) & (np.abs(z2) <= LIMIT)
        bad = alive & ~ok
        if bad.any():
            blow[bad] = s
            alive &= ok
            for v in (y1, y2, z1, z2):
                v[~alive] = np.nan
        k = s + 1 - n_burn
        if k > 0 and k % record_every == 0:
            rec[:, r, 0] = y1
            rec[:, r, 1] = y2
            rec[:, r, 2] = z1
            rec[:, r, 3] = z2
            r += 1
    return rec, blow


# ------------------------------------------------------------- strong models

@njit
def _bank_drift(z, out):
    for i in range(N_BANK):
        src = BANK_SOURCE[i]
        out[i] = -BANK_RATES[i] * z[i] + (z[src] if src >= 0 else 0.0)


@njit
def _strong_a_terms(a, z, gamma, sigma, variant):
    a3 = a * a * a
    f = -gamma * a - a3 / 12.0
    if variant == 0:
        f += sigma * a * 0.5 * (z[0] - gamma * z[1])
        f += sigma * a3 * (z[0] / 64.0 + z[1] / 12.0 + z[2] / 8.0 - 0.75 * z[3])
        g = 0.0
    else:
        g = sigma * a * (1.0 / 6.0 - gamma / 18.0) - sigma * sigma * a * (z[0] - 3.0 * z[2]) / 44.0
    return f, g


@njit
def _strong_numba(a0, z0, dW, dt, gamma, sigma, variant, record_every):
    M, S = dW.shape
    n_rec = S // record_every
    rec = np.full((M, n_rec, N_BANK + 1), np.nan)
    blow = np.full(M, -1, np.int64)
    z = np.empty(N_BANK)
    zp = np.empty(N_BANK)
    fz0 = np.empty(N_BANK)
    fz1 = np.empty(N_BANK)
    for m in range(M):
        a = a0[m]
        for i in range(N_BANK):
            z[i] = z0[m, i]
        r = 0
        for s in range(S):
            w = dW[m, s]
            _bank_drift(z, fz0)
            fa0, ga0 = _strong_a_terms(a, z, gamma, sigma, variant)
            for i in range(N_BANK):
                zp[i] = z[i] + fz0[i] * dt
            zp[0] += w
            ap = a + fa0 * dt + ga0 * w
            _bank_drift(zp, fz1)
            fa1, ga1 = _strong_a_terms(ap, zp, gamma, sigma, variant)
            a = a + 0.5 * (fa0 + fa1) * dt + 0.5 * (ga0 + ga1) * w
            finite = abs(a) <= LIMIT
            for i in range(N_BANK):
                z[i] = z[i] + 0.5 * (fz0[i] + fz1[i]) * dt
                finite = finite and abs(z[i]) <= LIMIT
            z[0] += w
            if not finite:
                blow[m] = s
                break
            if (s + 1) % record_every == 0:
                rec[m, r, 0] = a
                for i in range(N_BANK):
                    rec[m, r, i + 1] = z[i]
                r += 1
    return rec, blow


def _bank_drift_np(z):
    src = np.where(BANK_SOURCE[None, :] >= 0, z[:, np.maximum(BANK_SOURCE, 0)], 0.0)
    return -BANK_RATES * z + src


def _strong_a_terms_np(a, z, gamma, sigma, variant):
    f = -gamma * a - a ** 3 / 12.0
    if variant == NAIVE:
        f = f + sigma * a * 0.5 * (z[:, 0] - gamma * z[:, 1])
        f = f + sigma * a ** 3 * (z[:, 0] / 64.0 + z[:, 1] / 12.0 + z[:, 2] / 8.0 - 0.75 * z[:, 3])
        g = np.zeros_like(a)
    else:
        g = sigma * a * (1.0 / 6.0 - gamma / 18.0) - sigma ** 2 * a * (z[:, 0] - 3.0 * z[:, 2]) / 44.0
    return f, g


def _strong_numpy(a0, z0, dW, dt, gamma, sigma, variant, record_every):
    M, S = dW.shape
    n_rec = S // record_every
    rec = np.full((M, n_rec, N_BANK + 1), np.nan)
    blow = np.full(M, -1, np.int64)
    a = np.array(a0, dtype=float)
    z = np.array(z0, dtype=float)
    alive = np.ones(M, dtype=bool)
    r = 0
    for s in range(S):
        w = dW[:, s]
        fz0 = _bank_drift_np(z)
        fa0, ga0 = _strong_a_terms_np(a, z, gamma, sigma, variant)
        zp = z + fz0 * dt
        zp[:, 0] += w
        ap = a + fa0 * dt + ga0 * w
        fz1 = _bank_drift_np(zp)
        fa1, ga1 = _strong_a_terms_np(ap, zp, gamma, sigma, variant)
        a = a + 0.5 * (fa0 + fa1) * dt + 0.5 * (ga0 + ga1) * w
        z = z + 0.5 * (fz0 + fz1) * dt
        z[:, 0] += w
        ok = (np.abs(a) <= LIMIT) & np.all(np.abs(z) <= LIMIT, axis=1)
        bad = alive & ~ok
        if bad.any():
            blow[bad] = s
            alive &= ok
            a[~alive] = np.nan
            z[~alive] = np.nan
        if (s + 1) % record_every == 0:
            rec[:, r, 0] = a
            rec[:, r, 1:] = z
            r += 1
    return rec, blow


# ----------------------------------------------------------------- weak model

@njit
def _weak_numba(a0, dW, dt, linear, coefs, record_every):
    M, S, K = dW.shape
    n_rec = S // record_every
    rec = np.full((M, n_rec), np.nan)
    blow = np.full(M, -1, np.int64)
    for m in range(M):
        a = a0[m]
        r = 0
        for s in range(S):
            q = 0.0
            for k in range(K):
                q += coefs[k] * dW[m, s, k]
            f0 = linear * a - a * a * a / 12.0
            ap = a + f0 * dt + a * q
            f1 = linear * ap - ap * ap * ap / 12.0
            a = a + 0.5 * (f0 + f1) * dt + 0.5 * (a + ap) * q
            if not abs(a) <= LIMIT:
                blow[m] = s
                break
            if (s + 1) % record_every == 0:
                rec[m, r] = a
                r += 1
    return rec, blow


def _weak_numpy(a0, dW, dt, linear, coefs, record_every):
    M, S, K = dW.shape
    n_rec = S // record_every
    rec = np.full((M, n_rec), np.nan)
    blow = np.full(M, -1, np.int64)
    a = np.array(a0, dtype=float)
    alive = np.ones(M, dtype=bool)
    q_all = dW @ coefs
    r = 0
    for s in range(S):
        q = q_all[:, s]
        f0 = linear * a - a ** 3 / 12.0
        ap = a + f0 * dt + a * q
        f1 = linear * ap - ap ** 3 / 12.0
        a = a + 0.5 * (f0 + f1) * dt + 0.5 * (a + ap) * q
        ok = np.abs(a) <= LIMIT
        bad = alive & ~ok
        if bad.any():
            blow[bad] = s
            alive &= ok
            a[~alive] = np.nan
        if (s + 1) % record_every == 0:
            rec[:, r] = a
            r += 1
    return rec, blow


# ----------------------------------------------------------------------- SPDE

@njit
def _spde_rhs_numba(u, dx, gamma, advection, out):
    n = u.shape[0]
    inv_dx2 = 1.0 / (dx * dx)
    inv_4dx = 1.0 / (4.0 * dx)
    for i in range(n):
        left = u[i - 1] if i > 0 else 0.0
        right = u[i + 1] if i < n - 1 else 0.0
        out[i] = ((right - 2.0 * u[i] + left) * inv_dx2
                  - advection * (right * right - left * left) * inv_4dx
                  + (1.0 - gamma) * u[i])


@njit
def _spde_numba(u0, dW, dt, dx, gamma, sigma, forcing, advection, record_every):
    M, n = u0.shape
    S = dW.shape[1]
    K = dW.shape[2]
    n_rec = S // record_every
    rec = np.full((M, n_rec, n), np.nan)
    blow = np.full(M, -1, np.int64)
    u = np.empty(n)
    up = np.empty(n)
    f0 = np.empty(n)
    f1 = np.empty(n)
    eta = np.empty(n)
    for m in range(M):
        for i in range(n):
            u[i] = u0[m, i]
        r = 0
        for s in range(S):
            for i in range(n):
                acc = 0.0
                for k in range(K):
                    acc += forcing[k, i] * dW[m, s, k]
                eta[i] = sigma * acc
            _spde_rhs_numba(u, dx, gamma, advection, f0)
            for i in range(n):
                up[i] = u[i] + f0[i] * dt + eta[i]
            _spde_rhs_numba(up, dx, gamma, advection, f1)
            finite = True
            for i in range(n):
                u[i] = u[i] + 0.5 * (f0[i] + f1[i]) * dt + eta[i]
                finite = finite and abs(u[i]) <= LIMIT
            if not finite:
                blow[m] = s
                break
            if (s + 1) % record_every == 0:
                for i in range(n):
                    rec[m, r, i] = u[i]
                r += 1
    return rec, blow


def spde_rhs_numpy(u, dx, gamma, advection=1.0):
    """Deterministic SPDE right-hand side on interior nodes (last axis)."""
    pad = [(0, 0)] * (u.ndim - 1) + [(1, 1)]
    p = np.pad(u, pad)
    left = p[..., :-2]
    right = p[..., 2:]
    return ((right - 2.0 * u + left) / (dx * dx)
            - advection * (right * right - left * left) / (4.0 * dx)
            + (1.0 - gamma) * u)


def _spde_numpy(u0, dW, dt, dx, gamma, sigma, forcing, advection, record_every):
    M, n = u0.shape
    S = dW.shape[1]
    n_rec = S // record_every
    rec = np.full((M, n_rec, n), np.nan)
    blow = np.full(M, -1, np.int64)
    u = np.array(u0, dtype=float)
    alive = np.ones(M, dtype=bool)
    r = 0
    for s in range(S):
        eta = sigma * (dW[:, s, :] @ forcing)
        f0 = spde_rhs_numpy(u, dx, gamma, advection)
        up = u + f0 * dt + eta
        u = u + 0.5 * (f0 + spde_rhs_numpy(up, dx, gamma, advection)) * dt + eta
        ok = np.all(np.abs(u) <= LIMIT, axis=1)
        bad = alive & ~ok
        if bad.any():
            blow[bad] = s
            alive &= ok
            u[~alive] = np.nan
        if (s + 1) % record_every == 0:
            rec[:, r] = u
            r += 1
    return rec, blow


KERNELS = {
    "quad": (_quad_numba, _quad_numpy),
    "strong": (_strong_numba, _strong_numpy),
    "weak": (_weak_numba, _weak_numpy),
    "spde": (_spde_numba, _spde_numpy),
}


def run(name, *args, backend=None):
    """Dispatch kernel ``name`` to ``backend`` (``"numba"`` or ``"numpy"``)."""
    backend = backend or default_backend()
    nb, np_impl = KERNELS[name]
    if backend == "numba":
        return nb(*args)
    if backend == "numpy":
        return np_impl(*args)
    raise ValueError(f"unknown backend {backend!r}")
