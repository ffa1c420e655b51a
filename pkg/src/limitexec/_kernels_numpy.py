"""Vectorised numpy kernels; drop-in fallback for ``_kernels_numba``.

Loops run over time steps (march) or fill events (simulation); the work
inside each iteration is vectorised over inventory levels or paths.
"""
import numpy as np

KIND_EXP = 0
KIND_TAB = 1
MODE_NEWTON = 0
MODE_SCAN = 1
SCHEME_EULER = 0
SCHEME_RK4 = 1

QUOTE_TOL = 1e-12
MAX_ITER = 200
SCAN_POINTS = 2048

_M64 = np.uint64


def log_intensity(kind, prm, x):
    x = np.asarray(x, dtype=float)
    if kind == KIND_EXP:
        return prm[0] - prm[1] * x, np.full_like(x, -prm[1]), np.zeros_like(x)
    off = prm[0]
    n = int(prm[1])
    xs = prm[2:2 + n]
    ys = prm[2 + n:2 + 2 * n]
    ms = prm[2 + 2 * n:2 + 3 * n]
    i = np.clip(np.searchsorted(xs, x) - 1, 0, n - 2)
    h = xs[i + 1] - xs[i]
    t = (x - xs[i]) / h
    t2 = t * t
    t3 = t2 * t
    y0, y1 = ys[i], ys[i + 1]
    m0, m1 = ms[i] * h, ms[i + 1] * h
    L = ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0
         + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1)
    L1 = ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0
          + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1) / h
    L2 = ((12 * t - 6) * y0 + (6 * t - 4) * m0
          + (-12 * t + 6) * y1 + (6 * t - 2) * m1) / (h * h)
    left = x <= xs[0]
    right = x >= xs[-1]
    L = np.where(left, ys[0] + ms[0] * (x - xs[0]), L)
    L = np.where(right, ys[-1] + ms[-1] * (x - xs[-1]), L)
    L1 = np.where(left, ms[0], np.where(right, ms[-1], L1))
    L2 = np.where(left | right, 0.0, L2)
    return off + L, L1, L2


def _fval(kind, prm, c, x):
    _, L1, L2 = log_intensity(kind, prm, x)
    g = -L2 / (L1 * L1)
    if c > 0.0:
        return x - np.log1p(-c / L1) / c, 1.0 + g / (1.0 - c / L1)
    return x + 1.0 / L1, 1.0 + g


def _objective(kind, prm, c, gamma, p, d):
    lam = np.exp(log_intensity(kind, prm, d)[0])
    if c > 0.0:
        return -lam * np.expm1(-c * (d - p))
    return gamma * lam * (d - p)


def _newton_quote(kind, prm, c, p, guess):
    p = np.asarray(p, dtype=float)
    guess = np.asarray(guess, dtype=float)
    use = np.isfinite(guess) & (guess > p)
    L1p = log_intensity(kind, prm, p)[1]
    x = np.where(use, guess, p - 1.0 / L1p)
    lo = p.copy()
    fx, _ = _fval(kind, prm, c, x)
    above = fx - p >= 0.0
    hi = np.where(above, x, np.inf)
    lo = np.where(above, lo, x)
    w = np.ones_like(x)
    pending = ~above
    out = np.full_like(x, np.nan)
    while pending.any():
        cand = x + w
        fh, _ = _fval(kind, prm, c, cand)
        got = pending & (fh - p >= 0.0)
        hi = np.where(got, cand, hi)
        grow = pending & ~got
        lo = np.where(grow, cand, lo)
        w = np.where(grow, 2.0 * w, w)
        pending = grow & (w <= 1e9)
    ok = np.isfinite(hi)
    active = ok.copy()
    for _ in range(MAX_ITER):
        if not active.any():
            break
        fx, dfx = _fval(kind, prm, c, x)
        r = fx - p
        done = active & (np.abs(r) <= QUOTE_TOL)
        out = np.where(done, x, out)
        active &= ~done
        lo = np.where(active & (r < 0.0), x, lo)
        hi = np.where(active & (r >= 0.0), x, hi)
        tight = active & (hi - lo <= 4e-16 * (1.0 + np.abs(x)))
        out = np.where(tight, x, out)
        active &= ~tight
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = np.where(dfx > 0.0, x - r / dfx, np.nan)
        inside = (lo < xn) & (xn < hi)
        x = np.where(active, np.where(inside, xn, 0.5 * (lo + hi)), x)
    return out


def _scan_quote(kind, prm, c, gamma, p):
    p = np.asarray(p, dtype=float)
    w = np.ones_like(p)
    frac = np.arange(1, 257) / 256.0
    grow = np.ones(p.shape, dtype=bool)
    for _ in range(60):
        if not grow.any():
            break
        m = _objective(kind, prm, c, gamma, p[:, None],
                       p[:, None] + w[:, None] * frac[None, :]).max(axis=1)
        stop = _objective(kind, prm, c, gamma, p, p + w) <= 1e-9 * m
        grow &= ~stop
        w = np.where(grow, 2.0 * w, w)
    h = w / SCAN_POINTS
    k = np.arange(1, SCAN_POINTS + 1)
    vals = _objective(kind, prm, c, gamma, p[:, None], p[:, None] + h[:, None] * k[None, :])
    ib = np.argmax(vals, axis=1) + 1
    a = p + h * (ib - 1)
    b = p + h * (ib + 1)
    gr = 0.6180339887498949
    x1 = b - gr * (b - a)
    x2 = a + gr * (b - a)
    f1 = _objective(kind, prm, c, gamma, p, x1)
    f2 = _objective(kind, prm, c, gamma, p, x2)
    while np.any(b - a > 1e-12 * (1.0 + np.abs(a))):
        left = f1 >= f2
        nb = np.where(left, x2, b)
        na = np.where(left, a, x1)
        nx1 = np.where(left, nb - gr * (nb - na), x2)
        nx2 = np.where(left, x1, na + gr * (nb - na))
        a, b, x1, x2 = na, nb, nx1, nx2
        f1 = _objective(kind, prm, c, gamma, p, x1)
        f2 = _objective(kind, prm, c, gamma, p, x2)
    return 0.5 * (a + b)


def _quotes(kind, prm, mode, c, gamma, p, guess):
    if mode == MODE_SCAN:
        return _scan_quote(kind, prm, c, gamma, p)
    return _newton_quote(kind, prm, c, p, guess)


def quote_batch(kind, prm, mode, c, gamma, p, guess, out_delta, out_h):
    d = _quotes(kind, prm, mode, c, gamma, p, guess)
    out_delta[:] = d
    with np.errstate(invalid="ignore"):
        out_h[:] = _objective(kind, prm, c, gamma, p, d)
    bad = np.flatnonzero(np.isnan(d))
    return int(bad[0]) if bad.size else -1


def _rhs(kind, prm, mode, c, gamma, src, step, state, guess, dmin, pmin):
    p = (state[1:] - state[:-1]) / step
    floor = p < pmin
    d = np.full(p.shape, dmin)
    free = ~floor
    if free.any():
        d[free] = _quotes(kind, prm, mode, c, gamma, p[free], guess[1:][free])
    bad = np.flatnonzero(np.isnan(d))
    if bad.size:
        return None, None, int(bad[0]) + 1
    h = _objective(kind, prm, c, gamma, p, d)
    rate = np.empty_like(state)
    rate[0] = 0.0
    rate[1:] = (src[1:] + h) / gamma
    delta = np.empty_like(state)
    delta[0] = np.nan
    delta[1:] = np.maximum(d, dmin)
    return rate, delta, -1


def march_liquidation(kind, prm, mode, c, gamma, mu, sigma, step, theta_T,
                      dt, nsteps, scheme, dmin, pmin):
    nq = theta_T.size
    theta = np.empty((nsteps + 1, nq))
    delta = np.empty((nsteps + 1, nq))
    q = np.arange(nq) * step
    src = gamma * mu * q - 0.5 * gamma * gamma * sigma * sigma * q * q
    cur = np.array(theta_T, dtype=float)
    theta[nsteps] = cur
    guess = np.full(nq, np.nan)
    k1, delta[nsteps], bad = _rhs(kind, prm, mode, c, gamma, src, step, cur,
                                  guess, dmin, pmin)
    if bad >= 0:
        return theta, delta, nsteps * nq + bad
    for n in range(nsteps - 1, -1, -1):
        guess = delta[n + 1]
        if scheme == SCHEME_RK4:
            k2, _, bad = _rhs(kind, prm, mode, c, gamma, src, step,
                              cur + 0.5 * dt * k1, guess, dmin, pmin)
            if bad >= 0:
                return theta, delta, (n + 1) * nq + bad
            k3, _, bad = _rhs(kind, prm, mode, c, gamma, src, step,
                              cur + 0.5 * dt * k2, guess, dmin, pmin)
            if bad >= 0:
                return theta, delta, (n + 1) * nq + bad
            k4, _, bad = _rhs(kind, prm, mode, c, gamma, src, step,
                              cur + dt * k3, guess, dmin, pmin)
            if bad >= 0:
                return theta, delta, n * nq + bad
            cur = cur + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            cur = cur + dt * k1
        cur[0] = 0.0
        theta[n] = cur
        k1, row, bad = _rhs(kind, prm, mode, c, gamma, src, step, cur, guess,
                            dmin, pmin)
        if bad >= 0:
            return theta, delta, n * nq + bad
        delta[n] = row
    return theta, delta, -1


# ---------------------------------------------------------------- sampling

def _mix(z):
    z = (z ^ (z >> _M64(30))) * _M64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _M64(27))) * _M64(0x94D049BB133111EB)
    return z ^ (z >> _M64(31))


def uniforms(seed, paths, stream, idx):
    paths = np.asarray(paths).astype(np.uint64)
    idx = np.asarray(idx).astype(np.uint64)
    with np.errstate(over="ignore"):
        z = _mix(np.full(paths.shape, _M64(seed) ^ _M64(0x9E3779B97F4A7C15), dtype=np.uint64))
        z = _mix(z + paths)
        z = _mix(z + _M64(stream) * _M64(0xD1B54A32D192ED03) + idx)
    return ((z >> _M64(11)).astype(float) + 0.5) * 1.1102230246251565e-16


def _normal(seed, paths, node):
    u1 = uniforms(seed, paths, 1, 2 * node)
    u2 = uniforms(seed, paths, 1, 2 * node + 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _brownian(seed, paths, n, depth):
    n = np.asarray(n, dtype=np.int64)
    lo = np.zeros_like(n)
    hi = np.full_like(n, 1 << depth)
    wlo = np.zeros(n.shape)
    whi = np.sqrt(float(1 << depth)) * _normal(seed, paths, np.zeros_like(n))
    node = np.ones_like(n)
    out = np.where(n == 0, 0.0, np.where(n == hi, whi, np.nan))
    todo = (n != 0) & (n != hi)
    while todo.any():
        mid = (lo + hi) // 2
        wm = 0.5 * (wlo + whi) + np.sqrt(0.25 * (hi - lo)) * _normal(seed, paths, node)
        go_left = n <= mid
        hi = np.where(go_left, mid, hi)
        whi = np.where(go_left, wm, whi)
        lo = np.where(go_left, lo, mid)
        wlo = np.where(go_left, wlo, wm)
        node = np.where(go_left, 2 * node, 2 * node + 1)
        hit = todo & (n == mid)
        out = np.where(hit, wm, out)
        todo &= ~hit
    return out


def simulate_paths(hazard, quotes, seed, npaths, delta_size, mu, sigma, dt,
                   x0, s0, gamma, ell, depth):
    nlev = hazard.shape[0] - 1
    nsteps = hazard.shape[1] - 1
    paths = np.arange(npaths, dtype=np.int64)
    level = np.full(npaths, nlev, dtype=np.int64)
    m = np.zeros(npaths, dtype=np.int64)
    x = np.full(npaths, float(x0))
    fills = np.zeros(npaths, dtype=np.int64)
    active = np.ones(npaths, dtype=bool)
    sdt = sigma * np.sqrt(dt)
    for f in range(nlev):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        j = nlev - f
        row = hazard[j]
        e = -np.log(uniforms(seed, idx, 0, np.full(idx.size, f)))
        i = np.searchsorted(row, row[m[idx]] + e)
        hit = i <= nsteps
        active[idx[~hit]] = False
        idx = idx[hit]
        n = i[hit] - 1
        s = s0 + mu * n * dt + sdt * _brownian(seed, idx, n, depth)
        x[idx] += (s + quotes[n, j]) * delta_size
        level[idx] -= 1
        fills[idx] += 1
        m[idx] = n + 1
    st = s0 + mu * nsteps * dt + sdt * _brownian(seed, paths, np.full(npaths, nsteps), depth)
    qt = level * delta_size
    util = -np.exp(-gamma * (x + qt * (st - ell[level])))
    return fills, x, qt.astype(float), st, util
