"""Pure-numpy fallback kernels.

Mirrors the public API of ``_kernels_numba`` one to one: same function
names, same argument conventions, same status codes, and the same
floating-point summation orders (aligned pairwise trees for Brownian
increments, left-to-right block folds, per-path loops in index order).
Used when the ``SFAVG_BACKEND=numpy`` environment flag is set or numba is
unavailable. Expect it to be one to two orders of magnitude slower; tests
that exercise this path use small problem sizes.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_C_D1 = 0x243F6A8885A308D3
_C_D2 = 0x13198A2E03707344
_TWO_NEG53 = 2.0 ** -53
_TWO_PI = 6.283185307179586

OK = 0
DIVERGED = 1
BREAKDOWN = 2


def _mix64_int(z):
    """splitmix64 finalizer on python ints (no overflow warnings)."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _mix64_arr(z):
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _gauss_grid(seed, stream, n_modes, cells_u64):
    """Standard Gaussians, shape (n_modes, len(cells))."""
    hs = np.uint64(_mix64_int(int(seed) ^ _mix64_int(int(stream))))
    a = _mix64_arr(hs ^ cells_u64)
    modes = np.arange(n_modes, dtype=np.uint64)
    b = _mix64_arr(a[None, :] ^ modes[:, None])
    h1 = _mix64_arr(b ^ np.uint64(_C_D1))
    h2 = _mix64_arr(b ^ np.uint64(_C_D2))
    u1 = ((h1 >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_NEG53
    u2 = ((h2 >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_NEG53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def gauss_cell(seed, stream, mode, cell):
    """Raw standard Gaussian for one (mode, nonnegative cell)."""
    g = _gauss_grid(seed, stream, int(mode) + 1, np.array([cell], dtype=np.uint64))
    return float(g[int(mode), 0])


def _cell_values(seed, spos, sneg, n_modes, cells, cell_scale):
    """Signed-cell leaf increments, shape (n_modes, len(cells))."""
    cells = np.asarray(cells, dtype=np.int64)
    out = np.empty((n_modes, cells.shape[0]), np.float64)
    pos = cells >= 0
    if pos.any():
        out[:, pos] = _gauss_grid(seed, spos, n_modes, cells[pos].astype(np.uint64))
    if (~pos).any():
        mirrored = (-1 - cells[~pos]).astype(np.uint64)
        out[:, ~pos] = -_gauss_grid(seed, sneg, n_modes, mirrored)
    return out * cell_scale


def _range_increment(seed, spos, sneg, n_modes, c0, c1, cell_scale):
    """Brownian increment over cells [c0, c1) for n_modes modes.

    Same block decomposition and pairwise reduction order as the compiled
    backend so both agree to per-operation rounding.
    """
    c0 = int(c0)
    c1 = int(c1)
    total = np.zeros(n_modes, np.float64)
    if c1 <= c0:
        return total
    first = True
    c = c0
    while c < c1:
        align = c & (-c) if c != 0 else 1 << 62
        rem = c1 - c
        size = 1
        while size * 2 <= rem and size * 2 <= align:
            size *= 2
        leaves = _cell_values(seed, spos, sneg, n_modes,
                              np.arange(c, c + size, dtype=np.int64), cell_scale)
        while leaves.shape[1] > 1:
            leaves = leaves[:, 0::2] + leaves[:, 1::2]
        if first:
            total = leaves[:, 0].copy()
            first = False
        else:
            total = total + leaves[:, 0]
        c += size
    return total


def wiener_sum(seed, spos, sneg, mode, c0, c1, cell_scale):
    """Brownian increment for one mode over cells [c0, c1)."""
    return float(_range_increment(seed, spos, sneg, int(mode) + 1, c0, c1, cell_scale)[int(mode)])


def wiener_increments(seed, spos, sneg, n_modes, cbounds, cell_scale):
    """Increments for all modes over consecutive cell intervals."""
    npts = len(cbounds)
    out = np.empty((npts - 1, n_modes), np.float64)
    for i in range(npts - 1):
        out[i] = _range_increment(seed, spos, sneg, n_modes, cbounds[i], cbounds[i + 1], cell_scale)
    return out


# ---------------------------------------------------------------------------
# scalar time coefficients
# ---------------------------------------------------------------------------


def tf_eval(kinds, pars, t):
    v = 0.0
    for i in range(len(kinds)):
        k = int(kinds[i])
        p0, p1, p2 = pars[i, 0], pars[i, 1], pars[i, 2]
        if k == 0:
            v += p0
        elif k == 1:
            v += p0 * np.sin(p1 * t + p2)
        elif k == 2:
            v += p0 * np.cos(p1 * t + p2)
        elif k == 3:
            v += p0 / (1.0 + abs(t) ** p1)
        else:
            n = np.arange(1, int(p1) + 1, dtype=np.float64)
            v += p0 * float(np.sum(np.sin(np.sqrt(n) * t) / (n * n)))
    return float(v)


# ---------------------------------------------------------------------------
# implicit per-mode solves (vectorized over modes, masked updates)
# ---------------------------------------------------------------------------


def _solve_cubic_vec(rhs, dt, alin, nu, tol, maxit):
    den = 1.0 + dt * alin
    z = rhs / den
    scale = 1.0 + np.abs(rhs)
    for _ in range(maxit):
        g = z * den + dt * nu * z ** 3 - rhs
        active = np.abs(g) > tol * scale
        if not active.any():
            return z, 0
        gp = den + 3.0 * dt * nu * z * z
        z = np.where(active, z - g / gp, z)
    g = z * den + dt * nu * z ** 3 - rhs
    bad = np.abs(g) > tol * scale
    if not bad.any():
        return z, 0
    b = np.abs(rhs) / den + 1.0
    lo = np.where(bad, -b, z)
    hi = np.where(bad, b, z)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = mid * den + dt * nu * mid ** 3 - rhs
        hi = np.where(gm > 0.0, mid, hi)
        lo = np.where(gm > 0.0, lo, mid)
    return np.where(bad, 0.5 * (lo + hi), z), int(bad.sum())


def _solve_fast_vec(rhs, r, lam, phiv, bnl, kappa, tol, maxit):
    den = 1.0 + r * (lam - phiv)
    z = rhs / den
    scale = 1.0 + np.abs(rhs)
    cnl = r * lam * bnl
    em2 = kappa - 2.0
    for _ in range(maxit):
        g = z * den + cnl * np.abs(z) ** em2 * z - rhs
        active = np.abs(g) > tol * scale
        if not active.any():
            return z, 0
        gp = den + cnl * (kappa - 1.0) * np.abs(z) ** em2
        z = np.where(active, z - g / gp, z)
    g = z * den + cnl * np.abs(z) ** em2 * z - rhs
    bad = np.abs(g) > tol * scale
    if not bad.any():
        return z, 0
    b = np.abs(rhs) / den + 1.0
    lo = np.where(bad, -b, z)
    hi = np.where(bad, b, z)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = mid * den + cnl * np.abs(mid) ** em2 * mid - rhs
        hi = np.where(gm > 0.0, mid, hi)
        lo = np.where(gm > 0.0, lo, mid)
    return np.where(bad, 0.5 * (lo + hi), z), int(bad.sum())


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------


def _table_mult_vec(tf0, dtf, tab, te):
    nt = tab.shape[0]
    if nt == 1:
        return tab[0]
    s = (te - tf0) / dtf
    if s <= 0.0:
        return tab[0]
    j = int(s)
    if j >= nt - 1:
        return tab[nt - 1]
    w = s - j
    return tab[j] * (1.0 - w) + tab[j + 1] * w


def _pad_to(vec, n):
    if vec.shape[0] == n:
        return vec
    out = np.zeros(n, np.float64)
    m = min(n, vec.shape[0])
    out[:m] = vec[:m]
    return out


def _noise_vec(seed, spos, sneg, nmod, n, c0, c1, cell_scale):
    dw = np.zeros(n, np.float64)
    m = min(nmod, n)
    if m > 0:
        dw[:m] = _range_increment(seed, spos, sneg, m, c0, c1, cell_scale)
    return dw


def _slow_step(x, yvec, c0, c1, cell_w, cell_scale, eps, seed, sw1, sw1n,
               lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
               use_table, tf0, dtf, tab, autonomous, ell1c, ell2c,
               scheme, tol, maxit, tpow, divthr, nmod1):
    n1 = x.shape[0]
    t = c0 * cell_w
    dt = (c1 - c0) * cell_w
    te = t / eps
    if autonomous == 1:
        ell1v, ell2v = ell1c, ell2c
    else:
        ell1v = tf_eval(ell1_k, ell1_p, te)
        ell2v = tf_eval(ell2_k, ell2_p, te)
    if use_table == 1:
        fk = _table_mult_vec(tf0, dtf, tab, te) * x
    else:
        fk = fx * x + fy * _pad_to(yvec, n1)
    dw = _noise_vec(seed, sw1, sw1n, nmod1, n1, c0, c1, cell_scale)
    nfail = 0
    if scheme == 0:
        rhs = x + dt * fk + ell2v * x * dw
        alin = ell1v * lam1pow
        if nu == 0.0:
            z = rhs / (1.0 + dt * alin)
        else:
            z, nfail = _solve_cubic_vec(rhs, dt, alin, nu, tol, maxit)
    else:
        drift = -(ell1v * lam1pow * x + nu * x ** 3) + fk
        den = 1.0 + dt * np.sqrt(np.sum(drift * drift)) ** tpow
        z = x + dt * drift / den + ell2v * x * dw
    if not np.all(np.isfinite(z)) or np.any(np.abs(z) > divthr):
        return z, DIVERGED, nfail
    return z, OK, nfail


def _fast_substep(y, xref, c0, c1, cell_w, cell_scale, eps, seed, sw2, sw2n,
                  lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                  scheme, tol, maxit, tpow, divthr, nmod2):
    n2 = y.shape[0]
    t = c0 * cell_w
    ds = (c1 - c0) * cell_w
    te = t / eps
    r = ds / eps
    sq = np.sqrt(1.0 / eps)
    phiv = tf_eval(phi_k, phi_p, te)
    xk = _pad_to(xref, n2)
    dw = _noise_vec(seed, sw2, sw2n, nmod2, n2, c0, c1, cell_scale)
    nfail = 0
    if scheme == 0:
        rhs = y + r * acoup * xk + sq * c2 * y * dw
        den = 1.0 + r * (lam2 - phiv)
        if np.any(den <= 1e-12):
            return y, BREAKDOWN, nfail
        if bnl == 0.0:
            z = rhs / den
        else:
            z, nfail = _solve_fast_vec(rhs, r, lam2, phiv, bnl, kappa, tol, maxit)
    else:
        drift = (phiv - lam2) * y - lam2 * bnl * np.abs(y) ** (kappa - 2.0) * y + acoup * xk
        den = 1.0 + r * np.sqrt(np.sum(drift * drift)) ** tpow
        z = y + r * drift / den + sq * c2 * y * dw
    if not np.all(np.isfinite(z)) or np.any(np.abs(z) > divthr):
        return z, DIVERGED, nfail
    return z, OK, nfail


def _substep_bounds(c0, c1, ns, j):
    ncells = c1 - c0
    base = ncells // ns
    rem = ncells - base * ns
    lo = c0 + base * j + min(j, rem)
    hi = lo + base + (1 if j < rem else 0)
    return lo, hi


# ---------------------------------------------------------------------------
# path simulations
# ---------------------------------------------------------------------------


def simulate_coupled_kernel(slow_out, fast_out, cbounds, nsub, cell_scale, eps,
                            seed, sw1, sw1n, sw2, sw2n,
                            lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
                            lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                            x0, y0, scheme, tol, maxit, tpow, divthr, nmod1, nmod2):
    npts = len(cbounds)
    cell_w = cell_scale * cell_scale
    x = x0.copy()
    y = y0.copy()
    tab0 = np.zeros((1, 1), np.float64)
    slow_out[0] = x
    fast_out[0] = y
    nfail = 0
    for i in range(npts - 1):
        c0 = int(cbounds[i])
        c1 = int(cbounds[i + 1])
        xn, st, nf = _slow_step(x, y, c0, c1, cell_w, cell_scale, eps, seed, sw1, sw1n,
                                lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
                                0, 0.0, 1.0, tab0, 0, 0.0, 0.0,
                                scheme, tol, maxit, tpow, divthr, nmod1)
        nfail += nf
        if st != OK:
            return st, nfail
        ns = int(nsub[i])
        for j in range(ns):
            lo, hi = _substep_bounds(c0, c1, ns, j)
            if hi <= lo:
                continue
            y, st, nf = _fast_substep(y, x, lo, hi, cell_w, cell_scale, eps, seed, sw2, sw2n,
                                      lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                                      scheme, tol, maxit, tpow, divthr, nmod2)
            nfail += nf
            if st != OK:
                return st, nfail
        x = xn
        slow_out[i + 1] = x
        fast_out[i + 1] = y
    return OK, nfail


def simulate_averaged_kernel(slow_out, cbounds, cell_scale, eps, seed, sw1, sw1n,
                             lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p,
                             tf0, dtf, tab, autonomous, ell1c, ell2c,
                             x0, scheme, tol, maxit, tpow, divthr, nmod1):
    npts = len(cbounds)
    cell_w = cell_scale * cell_scale
    x = x0.copy()
    yv = np.zeros(0, np.float64)
    slow_out[0] = x
    nfail = 0
    for i in range(npts - 1):
        x, st, nf = _slow_step(x, yv, int(cbounds[i]), int(cbounds[i + 1]), cell_w, cell_scale,
                               eps, seed, sw1, sw1n, lam1pow, nu,
                               ell1_k, ell1_p, ell2_k, ell2_p, 0.0, 0.0,
                               1, tf0, dtf, tab, autonomous, ell1c, ell2c,
                               scheme, tol, maxit, tpow, divthr, nmod1)
        nfail += nf
        if st != OK:
            return st, nfail
        slow_out[i + 1] = x
    return OK, nfail


def simulate_fast_kernel(fast_out, cbounds, nsub, cell_scale, eps, seed, sw2, sw2n,
                         lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                         xref_rows, row_of_step, y0,
                         scheme, tol, maxit, tpow, divthr, nmod2):
    npts = len(cbounds)
    cell_w = cell_scale * cell_scale
    y = y0.copy()
    fast_out[0] = y
    nfail = 0
    for i in range(npts - 1):
        c0 = int(cbounds[i])
        c1 = int(cbounds[i + 1])
        xref = xref_rows[int(row_of_step[i])]
        ns = int(nsub[i])
        for j in range(ns):
            lo, hi = _substep_bounds(c0, c1, ns, j)
            if hi <= lo:
                continue
            y, st, nf = _fast_substep(y, xref, lo, hi, cell_w, cell_scale, eps, seed, sw2, sw2n,
                                      lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                                      scheme, tol, maxit, tpow, divthr, nmod2)
            nfail += nf
            if st != OK:
                return st, nfail
        fast_out[i + 1] = y
    return OK, nfail


def _fast_final(y0, cbounds, nsub, cell_scale, eps, seed, sw2, sw2n,
                lam2, phi_k, phi_p, c2, acoup, bnl, kappa, xref,
                scheme, tol, maxit, tpow, divthr, nmod2):
    npts = len(cbounds)
    cell_w = cell_scale * cell_scale
    y = y0.copy()
    for i in range(npts - 1):
        c0 = int(cbounds[i])
        c1 = int(cbounds[i + 1])
        ns = int(nsub[i])
        for j in range(ns):
            lo, hi = _substep_bounds(c0, c1, ns, j)
            if hi <= lo:
                continue
            y, st, _nf = _fast_substep(y, xref, lo, hi, cell_w, cell_scale, eps, seed, sw2, sw2n,
                                       lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                                       scheme, tol, maxit, tpow, divthr, nmod2)
            if st != OK:
                return y, st
    return y, OK


def ensemble_final_kernel(out, status, seed_base, stride, y_init, cbounds, nsub,
                          cell_scale, eps, sw2, sw2n,
                          lam2, phi_k, phi_p, c2, acoup, bnl, kappa, xref,
                          scheme, tol, maxit, tpow, divthr, nmod2):
    M = out.shape[0]
    for mdx in range(M):
        seed_m = np.uint64((int(seed_base) + mdx * int(stride)) & _MASK64)
        y, st = _fast_final(y_init[mdx], cbounds, nsub, cell_scale, eps, seed_m, sw2, sw2n,
                            lam2, phi_k, phi_p, c2, acoup, bnl, kappa, xref,
                            scheme, tol, maxit, tpow, divthr, nmod2)
        status[mdx] = st
        out[mdx] = y


def mixing_pairs_kernel(d2, seed_base, stride, y0a, y0b, cbounds, nsub,
                        cell_scale, eps, sw2, sw2n,
                        lam2, phi_k, phi_p, c2, acoup, bnl, kappa, xref,
                        scheme, tol, maxit, tpow, divthr, nmod2, synchronous):
    R = d2.shape[0]
    npts = len(cbounds)
    cell_w = cell_scale * cell_scale
    shift = 0x51A5
    for rdx in range(R):
        seed_r = np.uint64((int(seed_base) + rdx * int(stride)) & _MASK64)
        sw2b = sw2 if synchronous == 1 else np.uint64((int(sw2) + shift) & _MASK64)
        sw2bn = sw2n if synchronous == 1 else np.uint64((int(sw2n) + shift) & _MASK64)
        ya = y0a.copy()
        yb = y0b.copy()
        d2[rdx, 0] = float(np.sum((ya - yb) ** 2))
        broke = False
        for i in range(npts - 1):
            c0 = int(cbounds[i])
            c1 = int(cbounds[i + 1])
            ns = int(nsub[i])
            for j in range(ns):
                lo, hi = _substep_bounds(c0, c1, ns, j)
                if hi <= lo:
                    continue
                ya, st1, _ = _fast_substep(ya, xref, lo, hi, cell_w, cell_scale, eps, seed_r,
                                           sw2, sw2n, lam2, phi_k, phi_p, c2, acoup, bnl,
                                           kappa, scheme, tol, maxit, tpow, divthr, nmod2)
                yb, st2, _ = _fast_substep(yb, xref, lo, hi, cell_w, cell_scale, eps, seed_r,
                                           sw2b, sw2bn, lam2, phi_k, phi_p, c2, acoup, bnl,
                                           kappa, scheme, tol, maxit, tpow, divthr, nmod2)
                if st1 != OK or st2 != OK:
                    d2[rdx, i + 1:] = np.nan
                    broke = True
                    break
            if broke:
                break
            d2[rdx, i + 1] = float(np.sum((ya - yb) ** 2))


# ---------------------------------------------------------------------------
# averaged-drift mean table
# ---------------------------------------------------------------------------


def ode_mean_table(lam2, phi_k, phi_p, te0, nt, dte, burn, hint):
    n2 = lam2.shape[0]
    out = np.empty((nt, n2), np.float64)
    m = 1.0 / lam2
    nb = max(1, int(np.ceil(burn / hint)))
    hb = burn / nb
    t = te0 - burn
    for _ in range(nb):
        m = _rk4_mean(m, t, hb, lam2, phi_k, phi_p)
        t += hb
    out[0] = m
    nsub = max(1, int(np.ceil(dte / hint)))
    hs = dte / nsub
    for j in range(1, nt):
        t = te0 + (j - 1) * dte
        for _ in range(nsub):
            m = _rk4_mean(m, t, hs, lam2, phi_k, phi_p)
            t += hs
        out[j] = m
    return out


def _rk4_mean(m, t, h, lam2, phi_k, phi_p):
    p0 = tf_eval(phi_k, phi_p, t)
    p1 = tf_eval(phi_k, phi_p, t + 0.5 * h)
    p2 = tf_eval(phi_k, phi_p, t + h)
    k1 = (p0 - lam2) * m + 1.0
    k2 = (p1 - lam2) * (m + 0.5 * h * k1) + 1.0
    k3 = (p1 - lam2) * (m + 0.5 * h * k2) + 1.0
    k4 = (p2 - lam2) * (m + h * k3) + 1.0
    return m + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ---------------------------------------------------------------------------
# Monte Carlo study drivers
# ---------------------------------------------------------------------------


def _sup_sq_dist(a, b):
    return float(np.max(np.sum((a - b) ** 2, axis=1)))


def t1_errors_kernel(err, failed, seed_base, stride, cbounds, nsub, cell_scale, eps,
                     sw1, sw1n, sw2, sw2n,
                     lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
                     lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                     tf0, dtf, tab, x0, y0,
                     scheme, tol, maxit, tpow, divthr, nmod1, nmod2):
    P = err.shape[0]
    npts = len(cbounds)
    for p in range(P):
        seed_p = np.uint64((int(seed_base) + p * int(stride)) & _MASK64)
        sc = np.empty((npts, x0.shape[0]), np.float64)
        fc = np.empty((npts, y0.shape[0]), np.float64)
        sa = np.empty((npts, x0.shape[0]), np.float64)
        st1, _ = simulate_coupled_kernel(sc, fc, cbounds, nsub, cell_scale, eps,
                                         seed_p, sw1, sw1n, sw2, sw2n,
                                         lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
                                         lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                                         x0, y0, scheme, tol, maxit, tpow, divthr, nmod1, nmod2)
        st2, _ = simulate_averaged_kernel(sa, cbounds, cell_scale, eps, seed_p, sw1, sw1n,
                                          lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p,
                                          tf0, dtf, tab, 0, 0.0, 0.0,
                                          x0, scheme, tol, maxit, tpow, divthr, nmod1)
        if st1 != OK or st2 != OK:
            failed[p] = 1
            err[p] = np.nan
        else:
            failed[p] = 0
            err[p] = _sup_sq_dist(sc, sa)


def t2_errors_kernel(err, err_diag, failed, seed_base, stride, cbounds, nsub, cell_scale, eps,
                     sw1, sw1n, sw2, sw2n,
                     lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
                     lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                     tf0, dtf, tab_eps, tab_lim, ell1c, ell2c, x0, y0,
                     scheme, tol, maxit, tpow, divthr, nmod1, nmod2):
    P = err.shape[0]
    npts = len(cbounds)
    for p in range(P):
        seed_p = np.uint64((int(seed_base) + p * int(stride)) & _MASK64)
        sc = np.empty((npts, x0.shape[0]), np.float64)
        fc = np.empty((npts, y0.shape[0]), np.float64)
        sa = np.empty((npts, x0.shape[0]), np.float64)
        sl = np.empty((npts, x0.shape[0]), np.float64)
        st1, _ = simulate_coupled_kernel(sc, fc, cbounds, nsub, cell_scale, eps,
                                         seed_p, sw1, sw1n, sw2, sw2n,
                                         lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
                                         lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                                         x0, y0, scheme, tol, maxit, tpow, divthr, nmod1, nmod2)
        st2, _ = simulate_averaged_kernel(sa, cbounds, cell_scale, eps, seed_p, sw1, sw1n,
                                          lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p,
                                          tf0, dtf, tab_eps, 0, 0.0, 0.0,
                                          x0, scheme, tol, maxit, tpow, divthr, nmod1)
        st3, _ = simulate_averaged_kernel(sl, cbounds, cell_scale, eps, seed_p, sw1, sw1n,
                                          lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p,
                                          0.0, 1.0, tab_lim, 1, ell1c, ell2c,
                                          x0, scheme, tol, maxit, tpow, divthr, nmod1)
        if st1 != OK or st2 != OK or st3 != OK:
            failed[p] = 1
            err[p] = np.nan
            err_diag[p] = np.nan
        else:
            failed[p] = 0
            err[p] = _sup_sq_dist(sc, sl)
            err_diag[p] = _sup_sq_dist(sa, sl)


def khasminskii_errors_kernel(err, failed, seed_base, stride, cbounds, nsub, cell_scale, eps,
                              sw1, sw1n, sw2, sw2n,
                              lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
                              lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                              x0, y0, row_of_step,
                              scheme, tol, maxit, tpow, divthr, nmod1, nmod2):
    P = err.shape[0]
    npts = len(cbounds)
    cell_w = cell_scale * cell_scale
    dts = (np.asarray(cbounds[1:]) - np.asarray(cbounds[:-1])) * cell_w
    for p in range(P):
        seed_p = np.uint64((int(seed_base) + p * int(stride)) & _MASK64)
        sc = np.empty((npts, x0.shape[0]), np.float64)
        fc = np.empty((npts, y0.shape[0]), np.float64)
        fa = np.empty((npts, y0.shape[0]), np.float64)
        st1, _ = simulate_coupled_kernel(sc, fc, cbounds, nsub, cell_scale, eps,
                                         seed_p, sw1, sw1n, sw2, sw2n,
                                         lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
                                         lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                                         x0, y0, scheme, tol, maxit, tpow, divthr, nmod1, nmod2)
        st2, _ = simulate_fast_kernel(fa, cbounds, nsub, cell_scale, eps, seed_p, sw2, sw2n,
                                      lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                                      sc, row_of_step, y0,
                                      scheme, tol, maxit, tpow, divthr, nmod2)
        if st1 != OK or st2 != OK:
            failed[p] = 1
            err[p] = np.nan
        else:
            failed[p] = 0
            d2 = np.sum((fc[:-1] - fa[:-1]) ** 2, axis=1)
            err[p] = float(np.sum(dts * d2))
