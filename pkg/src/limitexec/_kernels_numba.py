"""Compiled scalar kernels.

Every intensity model is packed as ``(kind, prm)``: an int code plus a flat
float64 parameter vector (see ``intensity.IntensityModel.packed``).  All
kernels work on the log-intensity ``L = log(Lambda)`` and its first two
derivatives, which is what both the quote equation and the Hamiltonian need.

The numpy twin in ``_kernels_numpy`` must keep identical signatures and
semantics; ``tests/test_backends.py`` checks the two against each other.
"""
import math

import numpy as np
from numba import njit

KIND_EXP = 0
KIND_TAB = 1
MODE_NEWTON = 0
MODE_SCAN = 1
SCHEME_EULER = 0
SCHEME_RK4 = 1

QUOTE_TOL = 1e-12
MAX_ITER = 200
SCAN_POINTS = 2048


# ---------------------------------------------------------------- intensity

@njit(cache=True)
def _logint(kind, prm, x):
    if kind == KIND_EXP:
        return prm[0] - prm[1] * x, -prm[1], 0.0
    off = prm[0]
    n = int(prm[1])
    xs = prm[2:2 + n]
    ys = prm[2 + n:2 + 2 * n]
    ms = prm[2 + 2 * n:2 + 3 * n]
    if x <= xs[0]:
        return off + ys[0] + ms[0] * (x - xs[0]), ms[0], 0.0
    if x >= xs[n - 1]:
        return off + ys[n - 1] + ms[n - 1] * (x - xs[n - 1]), ms[n - 1], 0.0
    i = np.searchsorted(xs, x) - 1
    h = xs[i + 1] - xs[i]
    t = (x - xs[i]) / h
    t2 = t * t
    t3 = t2 * t
    y0 = ys[i]
    y1 = ys[i + 1]
    m0 = ms[i] * h
    m1 = ms[i + 1] * h
    val = ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0
           + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1)
    d1 = ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0
          + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1) / h
    d2 = ((12 * t - 6) * y0 + (6 * t - 4) * m0
          + (-12 * t + 6) * y1 + (6 * t - 2) * m1) / (h * h)
    return off + val, d1, d2


@njit(cache=True)
def log_intensity(kind, prm, x):
    n = x.size
    L = np.empty(n)
    L1 = np.empty(n)
    L2 = np.empty(n)
    for i in range(n):
        L[i], L1[i], L2[i] = _logint(kind, prm, x[i])
    return L, L1, L2


# ------------------------------------------------------------ quote solves

@njit(cache=True)
def _fval(kind, prm, c, x):
    """Left-hand side of the quote equation and its derivative.

    c = gamma * Delta; c == 0 selects the small-order limit x + Lambda/Lambda'.
    """
    _, L1, L2 = _logint(kind, prm, x)
    g = -L2 / (L1 * L1)
    if c > 0.0:
        return x - math.log1p(-c / L1) / c, 1.0 + g / (1.0 - c / L1)
    return x + 1.0 / L1, 1.0 + g


@njit(cache=True)
def _objective(kind, prm, c, gamma, p, d):
    L, _, _ = _logint(kind, prm, d)
    lam = math.exp(L)
    if c > 0.0:
        return -lam * math.expm1(-c * (d - p))
    return gamma * lam * (d - p)


@njit(cache=True)
def _newton_quote(kind, prm, c, p, guess):
    lo = p
    if math.isfinite(guess) and guess > p:
        x = guess
    else:
        _, L1, _ = _logint(kind, prm, p)
        x = p - 1.0 / L1
    fx, _ = _fval(kind, prm, c, x)
    if fx - p >= 0.0:
        hi = x
    else:
        lo = x
        w = 1.0
        hi = x + w
        fh, _ = _fval(kind, prm, c, hi)
        while fh - p < 0.0:
            lo = hi
            w *= 2.0
            if w > 1e9:
                return math.nan
            hi = x + w
            fh, _ = _fval(kind, prm, c, hi)
    for _ in range(MAX_ITER):
        fx, dfx = _fval(kind, prm, c, x)
        r = fx - p
        if abs(r) <= QUOTE_TOL:
            return x
        if r < 0.0:
            lo = x
        else:
            hi = x
        if hi - lo <= 4e-16 * (1.0 + abs(x)):
            return x
        xn = x - r / dfx if dfx > 0.0 else math.nan
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        x = xn
    return math.nan


@njit(cache=True)
def _scan_quote(kind, prm, c, gamma, p):
    # direct maximisation; used when the curvature hypothesis fails
    w = 1.0
    for _ in range(60):
        m = 0.0
        for i in range(1, 257):
            v = _objective(kind, prm, c, gamma, p, p + w * i / 256.0)
            if v > m:
                m = v
        if _objective(kind, prm, c, gamma, p, p + w) <= 1e-9 * m:
            break
        w *= 2.0
    best = -1.0
    ib = 0
    h = w / SCAN_POINTS
    for i in range(1, SCAN_POINTS + 1):
        v = _objective(kind, prm, c, gamma, p, p + h * i)
        if v > best:
            best = v
            ib = i
    a = p + h * (ib - 1)
    b = p + h * (ib + 1)
    gr = 0.6180339887498949
    x1 = b - gr * (b - a)
    x2 = a + gr * (b - a)
    f1 = _objective(kind, prm, c, gamma, p, x1)
    f2 = _objective(kind, prm, c, gamma, p, x2)
    while b - a > 1e-12 * (1.0 + abs(a)):
        if f1 >= f2:
            b = x2
            x2 = x1
            f2 = f1
            x1 = b - gr * (b - a)
            f1 = _objective(kind, prm, c, gamma, p, x1)
        else:
            a = x1
            x1 = x2
            f1 = f2
            x2 = a + gr * (b - a)
            f2 = _objective(kind, prm, c, gamma, p, x2)
    return 0.5 * (a + b)


@njit(cache=True)
def _quote_one(kind, prm, mode, c, gamma, p, guess):
    if mode == MODE_SCAN:
        return _scan_quote(kind, prm, c, gamma, p)
    return _newton_quote(kind, prm, c, p, guess)


@njit(cache=True)
def quote_batch(kind, prm, mode, c, gamma, p, guess, out_delta, out_h):
    """Optimal quote and Hamiltonian for every entry of ``p``.

    Returns -1 on success, else the index of the first failed solve.
    """
    bad = -1
    for i in range(p.size):
        d = _quote_one(kind, prm, mode, c, gamma, p[i], guess[i])
        out_delta[i] = d
        if math.isnan(d):
            out_h[i] = math.nan
            if bad < 0:
                bad = i
        else:
            out_h[i] = _objective(kind, prm, c, gamma, p[i], d)
    return bad


# ------------------------------------------------------------------ march

@njit(cache=True)
def _rhs(kind, prm, mode, c, gamma, src, step, state, guess, dmin, pmin,
         out_rate, out_delta):
    # backward-time derivative of theta: (source + H(p)) / gamma
    nq = state.size
    out_rate[0] = 0.0
    out_delta[0] = math.nan
    for j in range(1, nq):
        p = (state[j] - state[j - 1]) / step
        if p < pmin:
            d = dmin
            h = _objective(kind, prm, c, gamma, p, d)
        else:
            d = _quote_one(kind, prm, mode, c, gamma, p, guess[j])
            if math.isnan(d):
                return j
            h = _objective(kind, prm, c, gamma, p, d)
            if d < dmin:
                d = dmin
        out_delta[j] = d
        out_rate[j] = (src[j] + h) / gamma
    return -1


@njit(cache=True)
def march_liquidation(kind, prm, mode, c, gamma, mu, sigma, step, theta_T,
                      dt, nsteps, scheme, dmin, pmin):
    """Backward march of the triangular inventory system.

    ``dmin``/``pmin`` impose the quote floor (pass -inf for none).  Returns
    (theta, delta, status); status is -1 or the flat index n * nq + j of the
    node where a quote solve failed.
    """
    nq = theta_T.size
    theta = np.empty((nsteps + 1, nq))
    delta = np.empty((nsteps + 1, nq))
    src = np.empty(nq)
    for j in range(nq):
        q = j * step
        src[j] = gamma * mu * q - 0.5 * gamma * gamma * sigma * sigma * q * q
    cur = theta_T.copy()
    theta[nsteps] = cur
    guess = np.full(nq, math.nan)
    k1 = np.empty(nq)
    k2 = np.empty(nq)
    k3 = np.empty(nq)
    k4 = np.empty(nq)
    tmp = np.empty(nq)
    dscratch = np.empty(nq)
    bad = _rhs(kind, prm, mode, c, gamma, src, step, cur, guess, dmin, pmin,
               k1, delta[nsteps])
    if bad >= 0:
        return theta, delta, nsteps * nq + bad
    for n in range(nsteps - 1, -1, -1):
        for j in range(nq):
            guess[j] = delta[n + 1, j]
        if scheme == SCHEME_RK4:
            for j in range(nq):
                tmp[j] = cur[j] + 0.5 * dt * k1[j]
            bad = _rhs(kind, prm, mode, c, gamma, src, step, tmp, guess, dmin,
                       pmin, k2, dscratch)
            if bad >= 0:
                return theta, delta, (n + 1) * nq + bad
            for j in range(nq):
                tmp[j] = cur[j] + 0.5 * dt * k2[j]
            bad = _rhs(kind, prm, mode, c, gamma, src, step, tmp, guess, dmin,
                       pmin, k3, dscratch)
            if bad >= 0:
                return theta, delta, (n + 1) * nq + bad
            for j in range(nq):
                tmp[j] = cur[j] + dt * k3[j]
            bad = _rhs(kind, prm, mode, c, gamma, src, step, tmp, guess, dmin,
                       pmin, k4, dscratch)
            if bad >= 0:
                return theta, delta, n * nq + bad
            for j in range(nq):
                cur[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        else:
            for j in range(nq):
                cur[j] += dt * k1[j]
        cur[0] = 0.0
        theta[n] = cur
        bad = _rhs(kind, prm, mode, c, gamma, src, step, cur, guess, dmin, pmin,
                   k1, delta[n])
        if bad >= 0:
            return theta, delta, n * nq + bad
    return theta, delta, -1


# ---------------------------------------------------------------- sampling

@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _uniform(seed, path, stream, idx):
    z = _mix(np.uint64(seed) ^ np.uint64(0x9E3779B97F4A7C15))
    z = _mix(z + np.uint64(path))
    z = _mix(z + np.uint64(stream) * np.uint64(0xD1B54A32D192ED03)
             + np.uint64(idx))
    return (float(z >> np.uint64(11)) + 0.5) * 1.1102230246251565e-16


@njit(cache=True)
def uniforms(seed, paths, stream, idx):
    out = np.empty(paths.size)
    for i in range(paths.size):
        out[i] = _uniform(seed, paths[i], stream, idx[i])
    return out


@njit(cache=True)
def _normal(seed, path, node):
    u1 = _uniform(seed, path, 1, 2 * node)
    u2 = _uniform(seed, path, 1, 2 * node + 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@njit(cache=True)
def _brownian(seed, path, n, depth):
    # Levy midpoint construction on [0, 2**depth] in units of one time step
    lo = 0
    hi = 1 << depth
    wlo = 0.0
    whi = math.sqrt(float(hi)) * _normal(seed, path, 0)
    node = 1
    while True:
        if n == lo:
            return wlo
        if n == hi:
            return whi
        mid = (lo + hi) // 2
        wm = 0.5 * (wlo + whi) + math.sqrt(0.25 * (hi - lo)) * _normal(seed, path, node)
        if n <= mid:
            hi = mid
            whi = wm
            node = 2 * node
        else:
            lo = mid
            wlo = wm
            node = 2 * node + 1


@njit(cache=True)
def simulate_paths(hazard, quotes, seed, npaths, delta_size, mu, sigma, dt,
                   x0, s0, gamma, ell, depth):
    """Liquidation paths under a tabulated quote policy.

    hazard[j, n] is the cumulative fill hazard of level j up to step n
    (length nsteps + 1); quotes[n, j] the quote at step n and level j.
    """
    nlev = hazard.shape[0] - 1
    nsteps = hazard.shape[1] - 1
    fills = np.zeros(npaths, np.int64)
    cash = np.empty(npaths)
    q_end = np.empty(npaths)
    s_end = np.empty(npaths)
    util = np.empty(npaths)
    sdt = sigma * math.sqrt(dt)
    for path in range(npaths):
        j = nlev
        m = 0
        x = x0
        for f in range(nlev):
            e = -math.log(_uniform(seed, path, 0, f))
            row = hazard[j]
            i = np.searchsorted(row, row[m] + e)
            if i > nsteps:
                break
            n = i - 1
            s = s0 + mu * n * dt + sdt * _brownian(seed, path, n, depth)
            x += (s + quotes[n, j]) * delta_size
            j -= 1
            fills[path] += 1
            m = n + 1
            if j == 0:
                break
        st = s0 + mu * nsteps * dt + sdt * _brownian(seed, path, nsteps, depth)
        qt = j * delta_size
        cash[path] = x
        q_end[path] = qt
        s_end[path] = st
        util[path] = -math.exp(-gamma * (x + qt * (st - ell[j])))
    return fills, cash, q_end, s_end, util
