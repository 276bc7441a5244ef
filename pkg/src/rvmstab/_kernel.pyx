# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trajectory kernels.

Same algorithm as ``_kernel_py`` but particle by particle, with the loop
over particles (or over deposition rows) run in parallel. Each parallel
iteration owns its output slice, so results do not depend on the thread
count.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt, fabs, floor, fmax, fmin, hypot, isfinite

cnp.import_array()

cdef enum:
    MAXK = 6
    COMPLETED = 0
    GRAZING = 1
    STEP_FAILURE = 2
    ZENO = 3
    MAX_EVENTS_PER_STEP = 64
    EVENT_WIDTH = 11

cdef double AXIS_EPS = 1e-10
cdef double BISECT_TOL = 1e-10
cdef double BOUNDARY_BAND = 1e-9
cdef double ROOT_FTOL = 1e-13
cdef int ROOT_MAXIT = 200
cdef double ROOT_GUARD = 0.01


cdef struct Model:
    const double* ftx
    const double* fty
    const double* cphi
    const double* cA
    int fntx
    int fnty
    int fk
    int zero
    int lkind
    double lp[4]
    const double* ltx
    const double* lty
    const double* lc
    int lntx
    int lnty


# B-splines ------------------------------------------------------------------

cdef inline int basis(const double* t, int nt, int k, double x,
                      double* N, double* dN) noexcept nogil:
    """Nonzero basis values and first derivatives at x; returns the span."""
    cdef int n = nt - k - 1
    cdef int l, j, r, i, lo, hi, mid
    cdef double left[MAXK + 1]
    cdef double right[MAXK + 1]
    cdef double M[MAXK + 1]
    cdef double saved, temp, d, d1, d2
    if x < t[k]:
        x = t[k]
    if x >= t[n]:
        x = t[n]
        l = n - 1
    else:
        lo = k
        hi = n
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if x < t[mid]:
                hi = mid
            else:
                lo = mid
        l = lo
    N[0] = 1.0
    M[0] = 1.0
    for j in range(1, k + 1):
        if j == k:
            for r in range(k):
                M[r] = N[r]
        left[j] = x - t[l + 1 - j]
        right[j] = t[l + j] - x
        saved = 0.0
        for r in range(j):
            temp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[j] = saved
    for r in range(k + 1):
        i = l - k + r
        d1 = 0.0
        d2 = 0.0
        if r >= 1:
            d = t[i + k] - t[i]
            if d > 0:
                d1 = M[r - 1] / d
        if r <= k - 1:
            d = t[i + k + 1] - t[i + 1]
            if d > 0:
                d2 = M[r] / d
        dN[r] = k * (d1 - d2)
    return l


cdef inline void spline2(const double* tx, int ntx, const double* ty, int nty, int k,
                         const double* c, double x, double y, double* out) noexcept nogil:
    """Value and both first partials of a tensor spline."""
    cdef double Nx[MAXK + 1]
    cdef double dNx[MAXK + 1]
    cdef double Ny[MAXK + 1]
    cdef double dNy[MAXK + 1]
    cdef int lx = basis(tx, ntx, k, x, Nx, dNx)
    cdef int ly = basis(ty, nty, k, y, Ny, dNy)
    cdef int nyc = nty - k - 1
    cdef int a, b, row
    cdef double cc, s = 0.0, sx = 0.0, sy = 0.0
    for a in range(k + 1):
        row = (lx - k + a) * nyc + ly - k
        for b in range(k + 1):
            cc = c[row + b]
            s += cc * Nx[a] * Ny[b]
            sx += cc * dNx[a] * Ny[b]
            sy += cc * Nx[a] * dNy[b]
    out[0] = s
    out[1] = sx
    out[2] = sy


cdef inline void field_values(Model* m, double r, double z, double* F) noexcept nogil:
    """F = (dphi/dr, dphi/dz, A, dA/dr, dA/dz), sharing the basis evaluation."""
    cdef double Nx[MAXK + 1]
    cdef double dNx[MAXK + 1]
    cdef double Ny[MAXK + 1]
    cdef double dNy[MAXK + 1]
    cdef int k = m.fk
    cdef int lx = basis(m.ftx, m.fntx, k, r, Nx, dNx)
    cdef int ly = basis(m.fty, m.fnty, k, z, Ny, dNy)
    cdef int nyc = m.fnty - k - 1
    cdef int a, b, idx
    cdef double pr = 0.0, pz = 0.0, av = 0.0, ar = 0.0, az = 0.0, cp, ca
    for a in range(k + 1):
        for b in range(k + 1):
            idx = (lx - k + a) * nyc + ly - k + b
            cp = m.cphi[idx]
            ca = m.cA[idx]
            pr += cp * dNx[a] * Ny[b]
            pz += cp * Nx[a] * dNy[b]
            av += ca * Nx[a] * Ny[b]
            ar += ca * dNx[a] * Ny[b]
            az += ca * Nx[a] * dNy[b]
    F[0] = pr
    F[1] = pz
    F[2] = av
    F[3] = ar
    F[4] = az


# level set --------------------------------------------------------------------

cdef inline double level(Model* m, const double* y, double* gr, double* gz) noexcept nogil:
    cdef double r = hypot(y[0], y[1])
    cdef double z = y[2]
    cdef double x, w, q, s, best
    cdef double out[3]
    if m.lkind == 0:
        x = (r - m.lp[0]) / m.lp[2]
        w = (z - m.lp[1]) / m.lp[3]
        q = sqrt(x * x + w * w)
        s = m.lp[2] if m.lp[2] < m.lp[3] else m.lp[3]
        if q < 1e-300:
            q = 1e-300
        gr[0] = s * x / (m.lp[2] * q)
        gz[0] = s * w / (m.lp[3] * q)
        return (q - 1.0) * s
    if m.lkind == 2:
        best = m.lp[0] - r
        gr[0] = -1.0
        gz[0] = 0.0
        if r - m.lp[1] > best:
            best = r - m.lp[1]
            gr[0] = 1.0
        if m.lp[2] - z > best:
            best = m.lp[2] - z
            gr[0] = 0.0
            gz[0] = -1.0
        if z - m.lp[3] > best:
            best = z - m.lp[3]
            gr[0] = 0.0
            gz[0] = 1.0
        return best
    spline2(m.ltx, m.lntx, m.lty, m.lnty, 3, m.lc, r, z, out)
    gr[0] = out[1]
    gz[0] = out[2]
    return out[0]


cdef inline double normal(Model* m, const double* y, double* n) noexcept nogil:
    """Unit outward normal in Cartesian components; returns the level value."""
    cdef double gr, gz, f, norm, r, c = 1.0, s = 0.0
    f = level(m, y, &gr, &gz)
    norm = hypot(gr, gz)
    gr = gr / norm
    gz = gz / norm
    r = hypot(y[0], y[1])
    if r > 0:
        c = y[0] / r
        s = y[1] / r
    n[0] = gr * c
    n[1] = gr * s
    n[2] = gz
    return f


# dynamics ---------------------------------------------------------------------

cdef inline void rhs(Model* m, double sign, const double* y, double* out) noexcept nogil:
    cdef double g = sqrt(1.0 + y[3] * y[3] + y[4] * y[4] + y[5] * y[5])
    cdef double v0 = y[3] / g, v1 = y[4] / g, v2 = y[5] / g
    cdef double F[5]
    cdef double r, c = 1.0, s = 0.0, er, ez, br, bz, E0, E1, E2, B0, B1, B2
    out[0] = v0
    out[1] = v1
    out[2] = v2
    if m.zero:
        out[3] = 0.0
        out[4] = 0.0
        out[5] = 0.0
        return
    r = hypot(y[0], y[1])
    if r > 0:
        c = y[0] / r
        s = y[1] / r
    field_values(m, r, y[2], F)
    er = -F[0]
    ez = -F[1]
    br = -F[4]
    if r < AXIS_EPS:
        bz = 2.0 * F[3]
    else:
        bz = F[2] / r + F[3]
    E0 = er * c
    E1 = er * s
    E2 = ez
    B0 = br * c
    B1 = br * s
    B2 = bz
    out[3] = sign * (E0 + v1 * B2 - v2 * B1)
    out[4] = sign * (E1 + v2 * B0 - v0 * B2)
    out[5] = sign * (E2 + v0 * B1 - v1 * B0)


cdef inline void rk4(Model* m, double sign, const double* y, double h, double* out) noexcept nogil:
    cdef double k1[6]
    cdef double k2[6]
    cdef double k3[6]
    cdef double k4[6]
    cdef double tmp[6]
    cdef int i
    rhs(m, sign, y, k1)
    for i in range(6):
        tmp[i] = y[i] + 0.5 * h * k1[i]
    rhs(m, sign, tmp, k2)
    for i in range(6):
        tmp[i] = y[i] + 0.5 * h * k2[i]
    rhs(m, sign, tmp, k3)
    for i in range(6):
        tmp[i] = y[i] + h * k3[i]
    rhs(m, sign, tmp, k4)
    for i in range(6):
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


cdef double bracket_root(Model* m, double sign, double* cur, double dt, double hi,
                         double fhi) noexcept nogil:
    """Largest step fraction known to stay inside, by the Illinois variant of
    regula falsi on the level set with a bisection every fourth pass."""
    cdef double trial[6]
    cdef double lo = 0.0, flo, mid, fmid, gr, gz
    cdef int it, side = 0
    flo = level(m, cur, &gr, &gz)
    if flo >= 0:
        flo = -ROOT_FTOL
    for it in range(ROOT_MAXIT):
        if hi - lo <= BISECT_TOL:
            break
        if it % 4 == 3 or fhi <= flo:
            mid = 0.5 * (lo + hi)
        else:
            # keep clear of the ends: right after a reflection the level
            # near lo is rounding noise
            mid = lo + (hi - lo) * fmin(fmax((-flo) / (fhi - flo), ROOT_GUARD), 1.0 - ROOT_GUARD)
        rk4(m, sign, cur, mid * dt, trial)
        fmid = level(m, trial, &gr, &gz)
        if fmid < 0:
            lo = mid
            flo = fmid
            if side == -1:
                fhi = 0.5 * fhi
            side = -1
        else:
            hi = mid
            fhi = fmid
            if side == 1:
                flo = 0.5 * flo
            side = 1
    return lo


cdef int advance(Model* m, double sign, double* y, double dt, double t0, long* ncoll,
                 long max_coll, double* evbuf, long evcap, long* evcount,
                 long pid) noexcept nogil:
    """One step of size dt with specular reflections; y is updated only on
    success."""
    cdef double cur[6]
    cdef double trial[6]
    cdef double ev[6]
    cdef double n[3]
    cdef double remaining = 1.0, done = 0.0, lo, hi, mid, vn, vout, pn, gr, gz
    cdef int i, it
    cdef double* row
    for i in range(6):
        cur[i] = y[i]
    for it in range(MAX_EVENTS_PER_STEP):
        rk4(m, sign, cur, remaining * dt, trial)
        for i in range(6):
            if not isfinite(trial[i]):
                return STEP_FAILURE
        if level(m, trial, &gr, &gz) < 0:
            for i in range(6):
                y[i] = trial[i]
            return COMPLETED
        lo = bracket_root(m, sign, cur, dt, remaining, level(m, trial, &gr, &gz))
        if lo > 0:
            rk4(m, sign, cur, lo * dt, ev)
        else:
            for i in range(6):
                ev[i] = cur[i]
        normal(m, ev, n)
        vn = ev[3] * n[0] + ev[4] * n[1] + ev[5] * n[2]
        # outward along the direction of integration
        vout = vn if dt > 0 else -vn
        pn = sqrt(ev[3] * ev[3] + ev[4] * ev[4] + ev[5] * ev[5])
        if fabs(vout) < 1e-10 * (1.0 + pn):
            return GRAZING
        if vout <= 0:
            return STEP_FAILURE
        done = done + lo
        if evbuf != NULL and evcount[0] < evcap:
            row = evbuf + evcount[0] * EVENT_WIDTH
            row[0] = pid
            row[1] = t0 + done * dt
            for i in range(3):
                row[2 + i] = ev[i]
                row[5 + i] = ev[3 + i]
                row[8 + i] = ev[3 + i] - 2.0 * vn * n[i]
        if evbuf != NULL:
            evcount[0] += 1
        for i in range(3):
            ev[3 + i] = ev[3 + i] - 2.0 * vn * n[i]
        for i in range(6):
            cur[i] = ev[i]
        remaining = remaining - lo
        ncoll[0] += 1
        if ncoll[0] > max_coll:
            return ZENO
    return STEP_FAILURE


cdef int initial_check(Model* m, double* y, long* ncoll, double dt) noexcept nogil:
    cdef double n[3]
    cdef double f, vn, pn
    cdef int i
    f = normal(m, y, n)
    if f < 0:
        return COMPLETED
    if f > BOUNDARY_BAND:
        return STEP_FAILURE
    vn = y[3] * n[0] + y[4] * n[1] + y[5] * n[2]
    pn = sqrt(y[3] * y[3] + y[4] * y[4] + y[5] * y[5])
    if fabs(vn) < 1e-10 * (1.0 + pn):
        return GRAZING
    if (vn > 0) == (dt > 0):
        for i in range(3):
            y[3 + i] = y[3 + i] - 2.0 * vn * n[i]
        ncoll[0] += 1
    return COMPLETED


# model setup -----------------------------------------------------------------

cdef Model make_model(double[::1] ftx, double[::1] fty, double[::1] cphi, double[::1] cA,
                      int fk, bint zero, int lkind, double[::1] lp, double[::1] ltx,
                      double[::1] lty, double[::1] lc):
    cdef Model m
    cdef int i
    m.ftx = &ftx[0]
    m.fty = &fty[0]
    m.cphi = &cphi[0]
    m.cA = &cA[0]
    m.fntx = ftx.shape[0]
    m.fnty = fty.shape[0]
    m.fk = fk
    m.zero = zero
    m.lkind = lkind
    for i in range(4):
        m.lp[i] = lp[i]
    m.ltx = &ltx[0] if ltx.shape[0] else NULL
    m.lty = &lty[0] if lty.shape[0] else NULL
    m.lc = &lc[0] if lc.shape[0] else NULL
    m.lntx = ltx.shape[0]
    m.lnty = lty.shape[0]
    return m


def _arrays(spline, levelspec):
    def c(a):
        a = np.ascontiguousarray(a, dtype=np.float64)
        return a if a.size else np.zeros(1)
    return (c(spline.tx), c(spline.ty), c(spline.coef_phi), c(spline.coef_A),
            c(levelspec.params), np.ascontiguousarray(levelspec.tx, dtype=np.float64),
            np.ascontiguousarray(levelspec.ty, dtype=np.float64),
            np.ascontiguousarray(levelspec.coef, dtype=np.float64))


# entry points -------------------------------------------------------------------

cdef int trace_one(Model* m, double sign, double* y, double* samples, long n_out,
                   double dt, long n_steps, long stride, long* ncoll, long max_coll,
                   double* evbuf, long evcap, long* evcount, long pid) noexcept nogil:
    cdef int status
    cdef long k, i
    for i in range(6):
        samples[i] = y[i]
    status = initial_check(m, y, ncoll, dt)
    for k in range(1, n_steps + 1):
        if status == COMPLETED:
            status = advance(m, sign, y, dt, (k - 1) * dt, ncoll, max_coll,
                             evbuf, evcap, evcount, pid)
        if k % stride == 0:
            for i in range(6):
                samples[(k // stride) * 6 + i] = y[i]
    return status


def trace(states, signs, spline, levelspec, double dt, long n_steps, long stride=1,
          long max_collisions=1000000, bint record=False, long event_capacity=100000,
          int threads=1):
    """Integrate a batch; return (samples, status, ncoll, events)."""
    cdef double[:, ::1] y = np.array(states, dtype=np.float64, order="C", copy=True)
    cdef long n = y.shape[0]
    cdef double[::1] sg = np.array(np.broadcast_to(np.asarray(signs, dtype=np.float64), (n,)))
    cdef long n_out = n_steps // stride + 1
    samples_arr = np.empty((n, n_out, 6))
    cdef double[:, :, ::1] samples = samples_arr
    status_arr = np.zeros(n, dtype=np.int64)
    ncoll_arr = np.zeros(n, dtype=np.int64)
    cdef long[::1] status = status_arr
    cdef long[::1] ncoll = ncoll_arr
    ftx, fty, cphi, cA, lp, ltx, lty, lc = _arrays(spline, levelspec)
    cdef Model m = make_model(ftx, fty, cphi, cA, spline.kx, spline.zero, levelspec.kind,
                              lp, ltx, lty, lc)
    cdef long i
    cdef long evcount = 0
    cdef double[:, ::1] evbuf
    if n == 0:
        return samples_arr, status_arr, ncoll_arr, ([] if record else None)
    if record:
        while True:
            evbuf = np.zeros((max(event_capacity, 1), EVENT_WIDTH))
            evcount = 0
            y = np.array(states, dtype=np.float64, order="C", copy=True)
            ncoll_arr[:] = 0
            for i in range(n):
                status[i] = trace_one(&m, sg[i], &y[i, 0], &samples[i, 0, 0], n_out, dt,
                                      n_steps, stride, &ncoll[i], max_collisions,
                                      &evbuf[0, 0], evbuf.shape[0], &evcount, i)
            if evcount <= evbuf.shape[0]:
                break
            event_capacity = 2 * evcount
        rows = np.asarray(evbuf)[:evcount]
        events = [(int(r[0]), float(r[1]), r[2:5].copy(), r[5:8].copy(), r[8:11].copy())
                  for r in rows]
        return samples_arr, status_arr, ncoll_arr, events
    for i in prange(n, nogil=True, num_threads=threads, schedule="dynamic"):
        status[i] = trace_one(&m, sg[i], &y[i, 0], &samples[i, 0, 0], n_out, dt, n_steps,
                              stride, &ncoll[i], max_collisions, NULL, 0, NULL, i)
    return samples_arr, status_arr, ncoll_arr, None


cdef void deposit_row(Model* m, long i, double r0_, double z0_, double sign,
                      const double* vel, long n_v, const double* coef, double dt, long n_steps,
                      const double* tw, long n_w, double g_r0, double g_z0, double h,
                      long nr, long nz, int mirror, long n_rows, double* out,
                      long* counts) noexcept nogil:
    cdef double y[6]
    cdef double vhat0, g, r, vphi, vhat, fr, fz, wr, wz, a, c0, c1, c2, t, wgt, par
    cdef long v, k, w, ir, iz, gi, gj, flat, ng = nr * nz, base
    cdef int status, dr, dz
    cdef long ncoll
    for v in range(n_v):
        a = coef[v]
        y[0] = r0_
        y[1] = 0.0
        y[2] = z0_
        y[3] = vel[3 * v]
        y[4] = vel[3 * v + 1]
        y[5] = vel[3 * v + 2]
        g = sqrt(1.0 + y[3] * y[3] + y[4] * y[4] + y[5] * y[5])
        vhat0 = y[4] / g
        ncoll = 0
        status = initial_check(m, y, &ncoll, dt)
        for k in range(n_steps + 1):
            if k > 0 and status == COMPLETED:
                status = advance(m, sign, y, dt, (k - 1) * dt, &ncoll, 1000000,
                                 NULL, 0, NULL, v)
            r = hypot(y[0], y[1])
            g = sqrt(1.0 + y[3] * y[3] + y[4] * y[4] + y[5] * y[5])
            if r > 0:
                vphi = (y[0] * y[4] - y[1] * y[3]) / r
            else:
                vphi = y[4]
            vhat = vphi / g
            fr = (r - g_r0) / h - 0.5
            fz = (y[2] - g_z0) / h - 0.5
            ir = <long>floor(fr)
            iz = <long>floor(fz)
            wr = fr - ir
            wz = fz - iz
            c0 = a
            c1 = a * vhat0
            c2 = c1 * vhat
            for dr in range(2):
                for dz in range(2):
                    gi = ir + dr
                    gj = iz + dz
                    par = 1.0
                    if mirror and gi == -1:
                        gi = 0
                        par = -1.0
                    if gi < 0 or gi >= nr or gj < 0 or gj >= nz:
                        continue
                    wgt = (wr if dr else 1.0 - wr) * (wz if dz else 1.0 - wz)
                    flat = gi * nz + gj
                    for w in range(n_w):
                        t = tw[w * (n_steps + 1) + k]
                        if t == 0:
                            continue
                        base = ((w * 3) * n_rows + i) * ng + flat
                        out[base] += t * c0 * wgt
                        out[base + n_rows * ng] += t * c1 * wgt
                        out[base + 2 * n_rows * ng] += t * c2 * wgt * par
        counts[status] += 1


def deposit(rows_rz, vel, coef, double sign, spline, levelspec, double dt, long n_steps,
            tw, grid_spec, int threads=1):
    """Time-weighted bilinear occupation of backward trajectories; see the
    pure numpy version for the layout of the result."""
    cdef double[:, ::1] rows = np.ascontiguousarray(rows_rz, dtype=np.float64)
    cdef double[:, ::1] V = np.ascontiguousarray(vel, dtype=np.float64)
    cdef double[:, ::1] C = np.ascontiguousarray(coef, dtype=np.float64)
    cdef double[:, ::1] T = np.ascontiguousarray(tw, dtype=np.float64)
    g_r0, g_z0, h, nr, nz = grid_spec[:5]
    cdef int mirror = len(grid_spec) > 5 and bool(grid_spec[5])
    cdef long n_rows = rows.shape[0], n_v = V.shape[0], n_w = T.shape[0]
    cdef long nr_ = int(nr), nz_ = int(nz)
    cdef double gr0 = g_r0, gz0 = g_z0, hh = h
    if T.shape[1] != n_steps + 1:
        raise ValueError("time weights must have n_steps + 1 columns")
    out_arr = np.zeros((n_w, 3, n_rows, nr_ * nz_))
    counts_arr = np.zeros((max(n_rows, 1), 4), dtype=np.int64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef long[:, ::1] counts = counts_arr
    ftx, fty, cphi, cA, lp, ltx, lty, lc = _arrays(spline, levelspec)
    cdef Model m = make_model(ftx, fty, cphi, cA, spline.kx, spline.zero, levelspec.kind,
                              lp, ltx, lty, lc)
    cdef long i
    if n_rows == 0 or n_v == 0:
        return out_arr, counts_arr.sum(axis=0)
    for i in prange(n_rows, nogil=True, num_threads=threads, schedule="dynamic"):
        deposit_row(&m, i, rows[i, 0], rows[i, 1], sign, &V[0, 0], n_v, &C[i, 0], dt,
                    n_steps, &T[0, 0], n_w, gr0, gz0, hh, nr_, nz_, mirror, n_rows,
                    &out[0, 0, 0, 0], &counts[i, 0])
    return out_arr, counts_arr.sum(axis=0)
