"""numba-compiled numeric kernels.

Everything here operates on flat float64/int64/uint64 arrays so the hot
loops stay allocation-light and callback-free. The pure-numpy module
``_kernels_numpy`` mirrors this API function-for-function; both follow the
same floating-point summation orders so results agree to rounding noise.

Noise model
-----------
A stream of standard Gaussians is defined per (seed, stream, mode, cell)
via a splitmix64 hash chain plus Box-Muller. A cell is a dyadic time slab
``[j*w, (j+1)*w)`` with ``w = cell_scale**2`` seconds; its increment has
standard deviation ``cell_scale``. Increments over a cell range are summed
with a globally aligned pairwise (binary tree) order, so the sum over
``[0, 1/2]`` plus the sum over ``[1/2, 1]`` reproduces the sum over
``[0, 1]`` bit-exactly. Cells at negative indices mirror to a companion
stream (index ``j < 0`` reads cell ``-1-j`` of the negative stream and
negates it), which realizes a two-sided Wiener process glued at zero.
"""

import numpy as np
from numba import njit, prange

# splitmix64 constants
_C_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_C_M1 = np.uint64(0xBF58476D1CE4E5B9)
_C_M2 = np.uint64(0x94D049BB133111EB)
_C_D1 = np.uint64(0x243F6A8885A308D3)
_C_D2 = np.uint64(0x13198A2E03707344)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_NEG53 = 2.0 ** -53
_TWO_PI = 6.283185307179586


@njit(cache=True, inline="always")
def _mix64(z):
    z = z + _C_GAMMA
    z = (z ^ (z >> _S30)) * _C_M1
    z = (z ^ (z >> _S27)) * _C_M2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def _gauss(seed, stream, mode, cell):
    h = _mix64(seed ^ _mix64(stream))
    h = _mix64(h ^ cell)
    h = _mix64(h ^ np.uint64(mode))
    h1 = _mix64(h ^ _C_D1)
    h2 = _mix64(h ^ _C_D2)
    u1 = (np.float64(h1 >> _S11) + 0.5) * _TWO_NEG53
    u2 = (np.float64(h2 >> _S11) + 0.5) * _TWO_NEG53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


@njit(cache=True)
def gauss_cell(seed, stream, mode, cell):
    """Raw standard Gaussian for one (mode, nonnegative cell)."""
    return _gauss(seed, stream, mode, np.uint64(cell))


@njit(cache=True, inline="always")
def _cell_value(seed, spos, sneg, mode, cell, cell_scale):
    if cell >= 0:
        return _gauss(seed, spos, mode, np.uint64(cell)) * cell_scale
    return -_gauss(seed, sneg, mode, np.uint64(-1 - cell)) * cell_scale


@njit(cache=True)
def wiener_sum(seed, spos, sneg, mode, c0, c1, cell_scale):
    """Brownian increment for one mode over cells [c0, c1).

    Decomposes the range into maximal aligned dyadic blocks (greedy from
    the left), reduces each block with a balanced pairwise tree, and folds
    the blocks left to right.
    """
    n = c1 - c0
    if n <= 0:
        return 0.0
    maxb = 1
    while maxb * 2 <= n:
        maxb *= 2
    buf = np.empty(maxb, np.float64)
    total = 0.0
    first = True
    c = c0
    while c < c1:
        if c == 0:
            align = np.int64(1) << np.int64(62)
        else:
            align = c & (-c)
        rem = c1 - c
        size = np.int64(1)
        while size * 2 <= rem and size * 2 <= align:
            size *= 2
        for j in range(size):
            buf[j] = _cell_value(seed, spos, sneg, mode, c + j, cell_scale)
        m = size
        while m > 1:
            h = m // 2
            for j in range(h):
                buf[j] = buf[2 * j] + buf[2 * j + 1]
            m = h
        if first:
            total = buf[0]
            first = False
        else:
            total = total + buf[0]
        c += size
    return total


@njit(cache=True)
def wiener_increments(seed, spos, sneg, n_modes, cbounds, cell_scale):
    """Increments for all modes over consecutive cell intervals.

    cbounds: int64 (npts,) strictly increasing cell indices.
    Returns float64 (npts-1, n_modes).
    """
    npts = cbounds.shape[0]
    out = np.empty((npts - 1, n_modes), np.float64)
    for i in range(npts - 1):
        for k in range(n_modes):
            out[i, k] = wiener_sum(seed, spos, sneg, k, cbounds[i], cbounds[i + 1], cell_scale)
    return out


# ---------------------------------------------------------------------------
# scalar time coefficients (atom sums; see timefuncs.py for the encoding)
# ---------------------------------------------------------------------------


@njit(cache=True)
def tf_eval(kinds, pars, t):
    v = 0.0
    for i in range(kinds.shape[0]):
        k = kinds[i]
        p0 = pars[i, 0]
        p1 = pars[i, 1]
        p2 = pars[i, 2]
        if k == 0:
            v += p0
        elif k == 1:
            v += p0 * np.sin(p1 * t + p2)
        elif k == 2:
            v += p0 * np.cos(p1 * t + p2)
        elif k == 3:
            v += p0 / (1.0 + np.abs(t) ** p1)
        else:
            nterm = np.int64(p1)
            for n in range(1, nterm + 1):
                fn = np.float64(n)
                v += p0 * np.sin(np.sqrt(fn) * t) / (fn * fn)
    return v


# ---------------------------------------------------------------------------
# implicit per-mode solves (diagonal monotone drifts)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _solve_cubic_mode(rhs, dt, alin, nu, tol, maxit):
    """Root of g(z) = z*(1 + dt*alin) + dt*nu*z**3 - rhs, alin, nu >= 0.

    Newton from the linearized solution with diagonal (exact scalar)
    Jacobian; guaranteed-bracket bisection fallback since g is strictly
    increasing. Returns (root, fail_flag)."""
    den = 1.0 + dt * alin
    z = rhs / den
    scale = 1.0 + np.abs(rhs)
    for _ in range(maxit):
        g = z * den + dt * nu * z * z * z - rhs
        if np.abs(g) <= tol * scale:
            return z, 0
        gp = den + 3.0 * dt * nu * z * z
        z = z - g / gp
    g = z * den + dt * nu * z * z * z - rhs
    if np.abs(g) <= tol * scale:
        return z, 0
    b = np.abs(rhs) / den + 1.0
    lo = -b
    hi = b
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = mid * den + dt * nu * mid * mid * mid - rhs
        if g > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi), 1


@njit(cache=True)
def _solve_fast_mode(rhs, r, lam, phiv, bnl, kappa, tol, maxit):
    """Root of g(z) = z*(1 + r*(lam-phiv)) + r*lam*bnl*|z|**(kappa-2)*z - rhs."""
    den = 1.0 + r * (lam - phiv)
    z = rhs / den
    scale = 1.0 + np.abs(rhs)
    cnl = r * lam * bnl
    em2 = kappa - 2.0
    for _ in range(maxit):
        az = np.abs(z)
        g = z * den + cnl * az ** em2 * z - rhs
        if np.abs(g) <= tol * scale:
            return z, 0
        gp = den + cnl * (kappa - 1.0) * az ** em2
        z = z - g / gp
    az = np.abs(z)
    g = z * den + cnl * az ** em2 * z - rhs
    if np.abs(g) <= tol * scale:
        return z, 0
    b = np.abs(rhs) / den + 1.0
    lo = -b
    hi = b
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        am = np.abs(mid)
        g = mid * den + cnl * am ** em2 * mid - rhs
        if g > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi), 1


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------

# status codes shared across kernels
OK = 0
DIVERGED = 1
BREAKDOWN = 2


@njit(cache=True)
def _table_mult(tf0, dtf, tab, te, k):
    """Clamped linear interpolation in te of column k of tab."""
    nt = tab.shape[0]
    if nt == 1:
        return tab[0, k]
    s = (te - tf0) / dtf
    if s <= 0.0:
        return tab[0, k]
    j = np.int64(s)
    if j >= nt - 1:
        return tab[nt - 1, k]
    w = s - np.float64(j)
    return tab[j, k] * (1.0 - w) + tab[j + 1, k] * w


@njit(cache=True)
def _slow_step(x, xn, yvec, c0, c1, cell_w, cell_scale, eps, seed, sw1, sw1n,
               lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
               use_table, tf0, dtf, tab, autonomous, ell1c, ell2c,
               scheme, tol, maxit, tpow, divthr, nmod1, scratch):
    """Advance the slow component over cells [c0, c1); new state in xn.

    Monotone diagonal drift implicit (or tamed), coupling/noise explicit
    at the old state, scalar coefficients at the old time.
    """
    n1 = x.shape[0]
    t = c0 * cell_w
    dt = (c1 - c0) * cell_w
    te = t / eps
    nfail = 0
    if autonomous == 1:
        ell1v = ell1c
        ell2v = ell2c
    else:
        ell1v = tf_eval(ell1_k, ell1_p, te)
        ell2v = tf_eval(ell2_k, ell2_p, te)
    if scheme == 0:
        for k in range(n1):
            if use_table == 1:
                fk = _table_mult(tf0, dtf, tab, te, k) * x[k]
            else:
                yk = yvec[k] if k < yvec.shape[0] else 0.0
                fk = fx * x[k] + fy * yk
            dw = wiener_sum(seed, sw1, sw1n, k, c0, c1, cell_scale) if k < nmod1 else 0.0
            rhs = x[k] + dt * fk + ell2v * x[k] * dw
            alin = ell1v * lam1pow[k]
            if nu == 0.0:
                z = rhs / (1.0 + dt * alin)
            else:
                z, nf = _solve_cubic_mode(rhs, dt, alin, nu, tol, maxit)
                nfail += nf
            if not np.isfinite(z) or np.abs(z) > divthr:
                return DIVERGED, nfail
            xn[k] = z
    else:
        nrm2 = 0.0
        for k in range(n1):
            if use_table == 1:
                fk = _table_mult(tf0, dtf, tab, te, k) * x[k]
            else:
                yk = yvec[k] if k < yvec.shape[0] else 0.0
                fk = fx * x[k] + fy * yk
            scratch[k] = -(ell1v * lam1pow[k] * x[k] + nu * x[k] * x[k] * x[k]) + fk
            nrm2 += scratch[k] * scratch[k]
        den = 1.0 + dt * np.sqrt(nrm2) ** tpow
        for k in range(n1):
            dw = wiener_sum(seed, sw1, sw1n, k, c0, c1, cell_scale) if k < nmod1 else 0.0
            z = x[k] + dt * scratch[k] / den + ell2v * x[k] * dw
            if not np.isfinite(z) or np.abs(z) > divthr:
                return DIVERGED, nfail
            xn[k] = z
    return OK, nfail


@njit(cache=True)
def _fast_substep(y, xref, c0, c1, cell_w, cell_scale, eps, seed, sw2, sw2n,
                  lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                  scheme, tol, maxit, tpow, divthr, nmod2, scratch):
    """Advance the fast component over cells [c0, c1) with frozen slow input."""
    n2 = y.shape[0]
    t = c0 * cell_w
    ds = (c1 - c0) * cell_w
    te = t / eps
    r = ds / eps
    sq = np.sqrt(1.0 / eps)
    phiv = tf_eval(phi_k, phi_p, te)
    nfail = 0
    if scheme == 0:
        for k in range(n2):
            dw = wiener_sum(seed, sw2, sw2n, k, c0, c1, cell_scale) if k < nmod2 else 0.0
            xk = xref[k] if k < xref.shape[0] else 0.0
            rhs = y[k] + r * acoup * xk + sq * c2 * y[k] * dw
            den = 1.0 + r * (lam2[k] - phiv)
            if den <= 1e-12:
                return BREAKDOWN, nfail
            if bnl == 0.0:
                z = rhs / den
            else:
                z, nf = _solve_fast_mode(rhs, r, lam2[k], phiv, bnl, kappa, tol, maxit)
                nfail += nf
            if not np.isfinite(z) or np.abs(z) > divthr:
                return DIVERGED, nfail
            y[k] = z
    else:
        nrm2 = 0.0
        for k in range(n2):
            xk = xref[k] if k < xref.shape[0] else 0.0
            ay = np.abs(y[k])
            scratch[k] = (phiv - lam2[k]) * y[k] - lam2[k] * bnl * ay ** (kappa - 2.0) * y[k] + acoup * xk
            nrm2 += scratch[k] * scratch[k]
        den = 1.0 + r * np.sqrt(nrm2) ** tpow
        for k in range(n2):
            dw = wiener_sum(seed, sw2, sw2n, k, c0, c1, cell_scale) if k < nmod2 else 0.0
            z = y[k] + r * scratch[k] / den + sq * c2 * y[k] * dw
            if not np.isfinite(z) or np.abs(z) > divthr:
                return DIVERGED, nfail
            y[k] = z
    return OK, nfail


@njit(cache=True)
def _substep_bounds(c0, c1, ns, j):
    """Cell bounds of fast substep j when [c0, c1) is split into ns
    near-equal integer chunks (first chunks take the remainder)."""
    ncells = c1 - c0
    base = ncells // ns
    rem = ncells - base * ns
    lo = c0 + base * j + min(j, rem)
    hi = lo + base + (1 if j < rem else 0)
    return lo, hi


# ---------------------------------------------------------------------------
# path simulations
# ---------------------------------------------------------------------------


@njit(cache=True)
def simulate_coupled_kernel(slow_out, fast_out, cbounds, nsub, cell_scale, eps,
                            seed, sw1, sw1n, sw2, sw2n,
                            lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
                            lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                            x0, y0, scheme, tol, maxit, tpow, divthr, nmod1, nmod2):
    """Coupled slow/fast pair on one grid; returns (status, newton_failures).

    slow_out: (npts, n1), fast_out: (npts, n2), preallocated.
    """
    npts = cbounds.shape[0]
    n1 = x0.shape[0]
    n2 = y0.shape[0]
    cell_w = cell_scale * cell_scale
    x = x0.copy()
    y = y0.copy()
    xn = np.empty(n1, np.float64)
    scr1 = np.empty(n1, np.float64)
    scr2 = np.empty(n2, np.float64)
    tab0 = np.zeros((1, 1), np.float64)
    for k in range(n1):
        slow_out[0, k] = x[k]
    for k in range(n2):
        fast_out[0, k] = y[k]
    nfail = 0
    for i in range(npts - 1):
        c0 = cbounds[i]
        c1 = cbounds[i + 1]
        st, nf = _slow_step(x, xn, y, c0, c1, cell_w, cell_scale, eps, seed, sw1, sw1n,
                            lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
                            0, 0.0, 1.0, tab0, 0, 0.0, 0.0,
                            scheme, tol, maxit, tpow, divthr, nmod1, scr1)
        nfail += nf
        if st != OK:
            return st, nfail
        ns = nsub[i]
        for j in range(ns):
            lo, hi = _substep_bounds(c0, c1, ns, j)
            if hi <= lo:
                continue
            st, nf = _fast_substep(y, x, lo, hi, cell_w, cell_scale, eps, seed, sw2, sw2n,
                                   lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                                   scheme, tol, maxit, tpow, divthr, nmod2, scr2)
            nfail += nf
            if st != OK:
                return st, nfail
        for k in range(n1):
            x[k] = xn[k]
            slow_out[i + 1, k] = x[k]
        for k in range(n2):
            fast_out[i + 1, k] = y[k]
    return OK, nfail


@njit(cache=True)
def simulate_averaged_kernel(slow_out, cbounds, cell_scale, eps, seed, sw1, sw1n,
                             lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p,
                             tf0, dtf, tab, autonomous, ell1c, ell2c,
                             x0, scheme, tol, maxit, tpow, divthr, nmod1):
    """Averaged slow equation driven by a per-mode drift-multiplier table."""
    npts = cbounds.shape[0]
    n1 = x0.shape[0]
    cell_w = cell_scale * cell_scale
    x = x0.copy()
    xn = np.empty(n1, np.float64)
    scr1 = np.empty(n1, np.float64)
    yv = np.zeros(0, np.float64)
    for k in range(n1):
        slow_out[0, k] = x[k]
    nfail = 0
    for i in range(npts - 1):
        st, nf = _slow_step(x, xn, yv, cbounds[i], cbounds[i + 1], cell_w, cell_scale, eps,
                            seed, sw1, sw1n, lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p,
                            0.0, 0.0, 1, tf0, dtf, tab, autonomous, ell1c, ell2c,
                            scheme, tol, maxit, tpow, divthr, nmod1, scr1)
        nfail += nf
        if st != OK:
            return st, nfail
        for k in range(n1):
            x[k] = xn[k]
            slow_out[i + 1, k] = x[k]
    return OK, nfail


@njit(cache=True)
def simulate_fast_kernel(fast_out, cbounds, nsub, cell_scale, eps, seed, sw2, sw2n,
                         lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                         xref_rows, row_of_step, y0,
                         scheme, tol, maxit, tpow, divthr, nmod2):
    """Fast equation alone, slow input frozen per step via row_of_step.

    Serves the frozen equation (one row, eps=1, two-sided noise) and the
    block-frozen auxiliary construction (rows indexed by block starts).
    """
    npts = cbounds.shape[0]
    n2 = y0.shape[0]
    cell_w = cell_scale * cell_scale
    y = y0.copy()
    scr2 = np.empty(n2, np.float64)
    for k in range(n2):
        fast_out[0, k] = y[k]
    nfail = 0
    for i in range(npts - 1):
        c0 = cbounds[i]
        c1 = cbounds[i + 1]
        xref = xref_rows[row_of_step[i]]
        ns = nsub[i]
        for j in range(ns):
            lo, hi = _substep_bounds(c0, c1, ns, j)
            if hi <= lo:
                continue
            st, nf = _fast_substep(y, xref, lo, hi, cell_w, cell_scale, eps, seed, sw2, sw2n,
                                   lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                                   scheme, tol, maxit, tpow, divthr, nmod2, scr2)
            nfail += nf
            if st != OK:
                return st, nfail
        for k in range(n2):
            fast_out[i + 1, k] = y[k]
    return OK, nfail


@njit(cache=True)
def _fast_final(y, cbounds, nsub, cell_scale, eps, seed, sw2, sw2n,
                lam2, phi_k, phi_p, c2, acoup, bnl, kappa, xref,
                scheme, tol, maxit, tpow, divthr, nmod2, scratch):
    """Fast path keeping only the terminal state (for particle ensembles)."""
    npts = cbounds.shape[0]
    for i in range(npts - 1):
        c0 = cbounds[i]
        c1 = cbounds[i + 1]
        ns = nsub[i]
        for j in range(ns):
            lo, hi = _substep_bounds(c0, c1, ns, j)
            if hi <= lo:
                continue
            st, _nf = _fast_substep(y, xref, lo, hi, cell_scale * cell_scale, cell_scale,
                                    eps, seed, sw2, sw2n, lam2, phi_k, phi_p, c2, acoup,
                                    bnl, kappa, scheme, tol, maxit, tpow, divthr, nmod2, scratch)
            if st != OK:
                return st
    return OK


@njit(cache=True, parallel=True)
def ensemble_final_kernel(out, status, seed_base, stride, y_init, cbounds, nsub,
                          cell_scale, eps, sw2, sw2n,
                          lam2, phi_k, phi_p, c2, acoup, bnl, kappa, xref,
                          scheme, tol, maxit, tpow, divthr, nmod2):
    """Terminal fast states for M independent particles.

    y_init is (M, n2) (per-particle starts; broadcast a common start by
    tiling). Particle m uses seed seed_base + m*stride, so results do not
    depend on the thread schedule.
    """
    M = out.shape[0]
    n2 = out.shape[1]
    for mdx in prange(M):
        y = np.empty(n2, np.float64)
        scratch = np.empty(n2, np.float64)
        for k in range(n2):
            y[k] = y_init[mdx, k]
        seed_m = seed_base + np.uint64(mdx) * stride
        st = _fast_final(y, cbounds, nsub, cell_scale, eps, seed_m, sw2, sw2n,
                         lam2, phi_k, phi_p, c2, acoup, bnl, kappa, xref,
                         scheme, tol, maxit, tpow, divthr, nmod2, scratch)
        status[mdx] = st
        for k in range(n2):
            out[mdx, k] = y[k]


@njit(cache=True, parallel=True)
def mixing_pairs_kernel(d2, seed_base, stride, y0a, y0b, cbounds, nsub,
                        cell_scale, eps, sw2, sw2n,
                        lam2, phi_k, phi_p, c2, acoup, bnl, kappa, xref,
                        scheme, tol, maxit, tpow, divthr, nmod2, synchronous):
    """Squared distance of two fast solutions per replica and grid point.

    d2: (replicas, npts). Both solutions see the same slow anchor; under
    synchronous coupling they share the noise stream, otherwise the second
    one uses a shifted stream.
    """
    R = d2.shape[0]
    npts = cbounds.shape[0]
    n2 = y0a.shape[0]
    for rdx in prange(R):
        seed_r = seed_base + np.uint64(rdx) * stride
        sw2b = sw2 if synchronous == 1 else sw2 + np.uint64(0x51A5)
        sw2bn = sw2n if synchronous == 1 else sw2n + np.uint64(0x51A5)
        ya = y0a.copy()
        yb = y0b.copy()
        sa = np.empty(n2, np.float64)
        sb = np.empty(n2, np.float64)
        acc = 0.0
        for k in range(n2):
            dd = ya[k] - yb[k]
            acc += dd * dd
        d2[rdx, 0] = acc
        broke = False
        for i in range(npts - 1):
            c0 = cbounds[i]
            c1 = cbounds[i + 1]
            ns = nsub[i]
            for j in range(ns):
                lo, hi = _substep_bounds(c0, c1, ns, j)
                if hi <= lo:
                    continue
                st1, _ = _fast_substep(ya, xref, lo, hi, cell_scale * cell_scale, cell_scale,
                                       eps, seed_r, sw2, sw2n, lam2, phi_k, phi_p, c2,
                                       acoup, bnl, kappa, scheme, tol, maxit, tpow,
                                       divthr, nmod2, sa)
                st2, _ = _fast_substep(yb, xref, lo, hi, cell_scale * cell_scale, cell_scale,
                                       eps, seed_r, sw2b, sw2bn, lam2, phi_k, phi_p, c2,
                                       acoup, bnl, kappa, scheme, tol, maxit, tpow,
                                       divthr, nmod2, sb)
                if st1 != OK or st2 != OK:
                    for ii in range(i + 1, npts):
                        d2[rdx, ii] = np.nan
                    broke = True
                    break
            if broke:
                break
            acc = 0.0
            for k in range(n2):
                dd = ya[k] - yb[k]
                acc += dd * dd
            d2[rdx, i + 1] = acc


# ---------------------------------------------------------------------------
# averaged-drift mean table (bounded solution of m' = (phi(s) - lam) m + 1)
# ---------------------------------------------------------------------------


@njit(cache=True)
def ode_mean_table(lam2, phi_k, phi_p, te0, nt, dte, burn, hint):
    """Per-mode bounded mean response I_k on the grid te0 + j*dte.

    Integrates m' = (phi(s) - lam_k) m + 1 with classical RK4 from
    te0 - burn (seeded at the autonomous fixed point 1/lam_k); the burn-in
    forgets the seed at rate lam_k. hint is the target internal step.
    """
    n2 = lam2.shape[0]
    out = np.empty((nt, n2), np.float64)
    m = np.empty(n2, np.float64)
    k1 = np.empty(n2, np.float64)
    k2 = np.empty(n2, np.float64)
    k3 = np.empty(n2, np.float64)
    k4 = np.empty(n2, np.float64)
    for k in range(n2):
        m[k] = 1.0 / lam2[k]
    nb = max(1, np.int64(np.ceil(burn / hint)))
    hb = burn / nb
    t = te0 - burn
    for _ in range(nb):
        _rk4_mean(m, t, hb, lam2, phi_k, phi_p, k1, k2, k3, k4)
        t += hb
    for k in range(n2):
        out[0, k] = m[k]
    nsub = max(1, np.int64(np.ceil(dte / hint)))
    hs = dte / nsub
    for j in range(1, nt):
        t = te0 + (j - 1) * dte
        for _ in range(nsub):
            _rk4_mean(m, t, hs, lam2, phi_k, phi_p, k1, k2, k3, k4)
            t += hs
        for k in range(n2):
            out[j, k] = m[k]
    return out


@njit(cache=True)
def _rk4_mean(m, t, h, lam2, phi_k, phi_p, k1, k2, k3, k4):
    p0 = tf_eval(phi_k, phi_p, t)
    p1 = tf_eval(phi_k, phi_p, t + 0.5 * h)
    p2 = tf_eval(phi_k, phi_p, t + h)
    for k in range(m.shape[0]):
        lam = lam2[k]
        k1[k] = (p0 - lam) * m[k] + 1.0
        k2[k] = (p1 - lam) * (m[k] + 0.5 * h * k1[k]) + 1.0
        k3[k] = (p1 - lam) * (m[k] + 0.5 * h * k2[k]) + 1.0
        k4[k] = (p2 - lam) * (m[k] + h * k3[k]) + 1.0
        m[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])


# ---------------------------------------------------------------------------
# Monte Carlo study drivers (path loop in prange; per-path seeds)
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True)
def t1_errors_kernel(err, failed, seed_base, stride, cbounds, nsub, cell_scale, eps,
                     sw1, sw1n, sw2, sw2n,
                     lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
                     lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                     tf0, dtf, tab, x0, y0,
                     scheme, tol, maxit, tpow, divthr, nmod1, nmod2):
    """sup-squared slow distance between the coupled path and the averaged
    path driven by the identical slow noise, per Monte Carlo path."""
    P = err.shape[0]
    npts = cbounds.shape[0]
    n1 = x0.shape[0]
    n2 = y0.shape[0]
    for p in prange(P):
        seed_p = seed_base + np.uint64(p) * stride
        sc = np.empty((npts, n1), np.float64)
        fc = np.empty((npts, n2), np.float64)
        sa = np.empty((npts, n1), np.float64)
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
            sup = 0.0
            for i in range(npts):
                acc = 0.0
                for k in range(n1):
                    dd = sc[i, k] - sa[i, k]
                    acc += dd * dd
                if acc > sup:
                    sup = acc
            err[p] = sup


@njit(cache=True, parallel=True)
def t2_errors_kernel(err, err_diag, failed, seed_base, stride, cbounds, nsub, cell_scale, eps,
                     sw1, sw1n, sw2, sw2n,
                     lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
                     lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                     tf0, dtf, tab_eps, tab_lim, ell1c, ell2c, x0, y0,
                     scheme, tol, maxit, tpow, divthr, nmod1, nmod2):
    """Distances to the coefficient-free averaged path.

    err: sup-squared distance coupled vs limit equation; err_diag: same for
    the eps-dependent averaged path vs the limit path (two-step route)."""
    P = err.shape[0]
    npts = cbounds.shape[0]
    n1 = x0.shape[0]
    n2 = y0.shape[0]
    for p in prange(P):
        seed_p = seed_base + np.uint64(p) * stride
        sc = np.empty((npts, n1), np.float64)
        fc = np.empty((npts, n2), np.float64)
        sa = np.empty((npts, n1), np.float64)
        sl = np.empty((npts, n1), np.float64)
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
            sup1 = 0.0
            sup2 = 0.0
            for i in range(npts):
                a1 = 0.0
                a2 = 0.0
                for k in range(n1):
                    d1 = sc[i, k] - sl[i, k]
                    d2 = sa[i, k] - sl[i, k]
                    a1 += d1 * d1
                    a2 += d2 * d2
                if a1 > sup1:
                    sup1 = a1
                if a2 > sup2:
                    sup2 = a2
            err[p] = sup1
            err_diag[p] = sup2


@njit(cache=True, parallel=True)
def khasminskii_errors_kernel(err, failed, seed_base, stride, cbounds, nsub, cell_scale, eps,
                              sw1, sw1n, sw2, sw2n,
                              lam1pow, nu, ell1_k, ell1_p, ell2_k, ell2_p, fx, fy,
                              lam2, phi_k, phi_p, c2, acoup, bnl, kappa,
                              x0, y0, row_of_step,
                              scheme, tol, maxit, tpow, divthr, nmod1, nmod2):
    """Time-integrated squared distance between the coupled fast path and
    the block-frozen auxiliary fast path sharing its noise."""
    P = err.shape[0]
    npts = cbounds.shape[0]
    n1 = x0.shape[0]
    n2 = y0.shape[0]
    cell_w = cell_scale * cell_scale
    for p in prange(P):
        seed_p = seed_base + np.uint64(p) * stride
        sc = np.empty((npts, n1), np.float64)
        fc = np.empty((npts, n2), np.float64)
        fa = np.empty((npts, n2), np.float64)
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
            acc = 0.0
            for i in range(npts - 1):
                dt = (cbounds[i + 1] - cbounds[i]) * cell_w
                d2 = 0.0
                for k in range(n2):
                    dd = fc[i, k] - fa[i, k]
                    d2 += dd * dd
                acc += dt * d2
            err[p] = acc
