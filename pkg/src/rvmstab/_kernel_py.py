"""Pure numpy implementation of the trajectory kernels.

Particles are advanced together: every step is one vectorised RK4 update,
and particles whose step crosses the boundary are bisected as a group. The
compiled module ``_kernel`` implements the same algorithm particle by
particle; both must agree to rounding.

State vectors are Cartesian, (x, y, z, px, py, pz), with momentum p and
velocity p / sqrt(1 + |p|^2).
"""

from __future__ import annotations

import numpy as np

COMPLETED, GRAZING, STEP_FAILURE, ZENO = 0, 1, 2, 3
AXIS_EPS = 1e-10
BISECT_TOL = 1e-10
BOUNDARY_BAND = 1e-9
ROOT_FTOL = 1e-13
ROOT_MAXIT = 200
ROOT_GUARD = 0.01
MAX_EVENTS_PER_STEP = 64


class _Model:
    """Force field and level set evaluated on arrays of states."""

    def __init__(self, fields_obj, domain, sign):
        self.fields = fields_obj
        self.domain = domain
        self.sign = np.asarray(sign, dtype=float)
        self.zero = fields_obj is None or fields_obj.is_zero

    def rhs(self, y, sign):
        x, yy, z = y[:, 0], y[:, 1], y[:, 2]
        p = y[:, 3:6]
        gam = np.sqrt(1.0 + np.sum(p * p, axis=1))
        vel = p / gam[:, None]
        out = np.empty_like(y)
        out[:, 0:3] = vel
        if self.zero:
            out[:, 3:6] = 0.0
            return out
        r = np.hypot(x, yy)
        safe = np.where(r > 0, r, 1.0)
        c = np.where(r > 0, x / safe, 1.0)
        s = np.where(r > 0, yy / safe, 0.0)
        f = self.fields
        er = -f.phi(r, z, dr=1)
        ez = -f.phi(r, z, dz=1)
        A = f.A(r, z)
        Ar = f.A(r, z, dr=1)
        br = -f.A(r, z, dz=1)
        bz = np.where(r < AXIS_EPS, 2.0 * Ar, A / np.where(r < AXIS_EPS, 1.0, r) + Ar)
        E = np.column_stack([er * c, er * s, ez])
        B = np.column_stack([br * c, br * s, bz])
        out[:, 3:6] = sign[:, None] * (E + np.cross(vel, B))
        return out

    def rk4(self, y, h, sign):
        h = h[:, None] if np.ndim(h) else h
        k1 = self.rhs(y, sign)
        k2 = self.rhs(y + 0.5 * h * k1, sign)
        k3 = self.rhs(y + 0.5 * h * k2, sign)
        k4 = self.rhs(y + h * k3, sign)
        return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def level(self, y):
        return self.domain.levelset(np.hypot(y[:, 0], y[:, 1]), y[:, 2])

    def normal(self, y):
        r = np.hypot(y[:, 0], y[:, 1])
        gr, gz = self.domain.levelset_gradient(r, y[:, 2])
        norm = np.hypot(gr, gz)
        gr, gz = gr / norm, gz / norm
        safe = np.where(r > 0, r, 1.0)
        c = np.where(r > 0, y[:, 0] / safe, 1.0)
        s = np.where(r > 0, y[:, 1] / safe, 0.0)
        return np.column_stack([gr * c, gr * s, gz])


class _Events:
    def __init__(self):
        self.rows = []

    def add(self, idx, t, y, pre, post):
        for k in range(len(idx)):
            self.rows.append((int(idx[k]), float(t[k]), y[k].copy(), pre[k].copy(), post[k].copy()))


def _bracket_root(model, base, sgn, dt, hi, fhi):
    """Largest step fraction known to stay inside, by the Illinois variant of
    regula falsi on the level set with a bisection every fourth pass."""
    lo = np.zeros(len(base))
    flo = model.level(base)
    flo = np.where(flo >= 0, -ROOT_FTOL, flo)
    side = np.zeros(len(base), dtype=np.int64)
    live = hi - lo > BISECT_TOL
    for it in range(ROOT_MAXIT):
        li = np.flatnonzero(live)
        if li.size == 0:
            break
        l, h, fl, fh = lo[li], hi[li], flo[li], fhi[li]
        mid = 0.5 * (l + h)
        if it % 4 != 3:
            # keep clear of the ends: right after a reflection the level
            # near lo is rounding noise
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.clip((-fl) / (fh - fl), ROOT_GUARD, 1.0 - ROOT_GUARD)
            mid = np.where(fh > fl, l + (h - l) * t, mid)
        fmid = model.level(model.rk4(base[li], mid * dt, sgn[li]))
        inside = fmid < 0
        lo[li] = np.where(inside, mid, l)
        flo[li] = np.where(inside, fmid, np.where(side[li] == 1, 0.5 * fl, fl))
        hi[li] = np.where(inside, h, mid)
        fhi[li] = np.where(inside, np.where(side[li] == -1, 0.5 * fh, fh), fmid)
        side[li] = np.where(inside, -1, 1)
        live[li] = hi[li] - lo[li] > BISECT_TOL
    return lo


def _advance(model, y, sign, dt, t0, active, status, ncoll, max_collisions, events):
    """One full step of size dt for the particles flagged in ``active``."""
    idx = np.flatnonzero(active)
    remaining = np.ones(len(idx))
    cur = y[idx]
    sgn = sign[idx]
    done_time = np.zeros(len(idx))
    for _ in range(MAX_EVENTS_PER_STEP):
        live = remaining > 0
        if not live.any():
            break
        li = np.flatnonzero(live)
        trial = model.rk4(cur[li], remaining[li] * dt, sgn[li])
        blown = ~np.all(np.isfinite(trial), axis=1)
        if blown.any():
            status[idx[li[blown]]] = STEP_FAILURE
            remaining[li[blown]] = 0.0
            trial[blown] = cur[li[blown]]
        ok = (model.level(trial) < 0) & ~blown
        cur[li[ok]] = trial[ok]
        remaining[li[ok]] = 0.0
        hit = ~ok & ~blown
        cross = li[hit]
        if cross.size == 0:
            break
        base = cur[cross]
        lo = _bracket_root(model, base, sgn[cross], dt, remaining[cross].copy(),
                           model.level(trial[hit]))
        ev = model.rk4(base, lo * dt, sgn[cross]) if np.any(lo > 0) else base.copy()
        n = model.normal(ev)
        p = ev[:, 3:6]
        vn = np.sum(p * n, axis=1)
        vout = vn if dt > 0 else -vn
        pnorm = np.linalg.norm(p, axis=1)
        graze = np.abs(vn) < 1e-10 * (1.0 + pnorm)
        bad = (~graze) & (vout <= 0)
        good = ~(graze | bad)
        post = p - 2.0 * vn[:, None] * n
        gi = idx[cross]
        status[gi[graze]] = GRAZING
        status[gi[bad]] = STEP_FAILURE
        done_time[cross] += lo
        if events is not None and good.any():
            events.add(gi[good], t0 + done_time[cross[good]] * dt, ev[good, 0:3], p[good], post[good])
        ev[good, 3:6] = post[good]
        cur[cross] = ev
        remaining[cross] = np.where(good, remaining[cross] - lo, 0.0)
        ncoll[gi[good]] += 1
        status[gi[ncoll[gi] > max_collisions]] = ZENO
        stopped = status[idx] != COMPLETED
        remaining[stopped] = 0.0
    else:
        status[idx[remaining > 0]] = STEP_FAILURE
    finite = np.all(np.isfinite(cur), axis=1)
    status[idx[~finite]] = STEP_FAILURE
    keep = status[idx] == COMPLETED
    y[idx[keep]] = cur[keep]


def _initial_check(model, y, status, ncoll, dt):
    f = model.level(y)
    out = f >= 0
    if not out.any():
        return
    oi = np.flatnonzero(out)
    n = model.normal(y[oi])
    p = y[oi, 3:6]
    vn = np.sum(p * n, axis=1)
    graze = np.abs(vn) < 1e-10 * (1.0 + np.linalg.norm(p, axis=1))
    far = f[oi] > BOUNDARY_BAND
    status[oi[far]] = STEP_FAILURE
    status[oi[graze & ~far]] = GRAZING
    refl = (~graze) & (~far) & ((vn > 0) == (dt > 0))
    y[oi[refl], 3:6] = p[refl] - 2.0 * vn[refl, None] * n[refl]
    ncoll[oi[refl]] += 1


def trace(states, signs, fields_obj, domain, dt, n_steps, stride=1, max_collisions=10**6,
          record=False):
    """Integrate a batch; return (samples, status, ncoll, events)."""
    y = np.array(states, dtype=float, copy=True)
    sign = np.asarray(signs, dtype=float) * np.ones(len(y))
    model = _Model(fields_obj, domain, sign)
    n = len(y)
    status = np.zeros(n, dtype=np.int64)
    ncoll = np.zeros(n, dtype=np.int64)
    n_out = n_steps // stride + 1
    samples = np.empty((n, n_out, 6))
    samples[:, 0] = y
    events = _Events() if record else None
    _initial_check(model, y, status, ncoll, dt)
    for k in range(1, n_steps + 1):
        active = status == COMPLETED
        if active.any():
            _advance(model, y, sign, dt, (k - 1) * dt, active, status, ncoll, max_collisions, events)
        if k % stride == 0:
            samples[:, k // stride] = y
    return samples, status, ncoll, (events.rows if record else None)


def deposit(rows_rz, vel, coef, sign, fields_obj, domain, dt, n_steps, tw, grid_spec):
    """Accumulate time-weighted bilinear occupation of backward trajectories.

    Returns ``out`` of shape (n_w, 3, n_rows, nr*nz) holding, for every
    weight set w, the sums over velocity nodes of

        coef * tw[w, k] * B_g(X_k),
        coef * vhat_phi(0) * tw[w, k] * B_g(X_k),
        coef * vhat_phi(0) * vhat_phi(k) * tw[w, k] * B_g(X_k),

    where B_g are bilinear hat functions of the cell-centred grid node g.
    ``grid_spec`` is (r0, z0, h, nr, nz[, mirror]); with ``mirror`` set the
    box starts on the axis and weight falling on the ghost column at -r is
    folded onto the first column, with even parity for the first two
    channels and odd parity for the third.
    """
    r0, z0, h, nr, nz = grid_spec[:5]
    nr, nz = int(nr), int(nz)
    mirror = len(grid_spec) > 5 and bool(grid_spec[5])
    n_rows, n_v = coef.shape
    n_w = tw.shape[0]
    out = np.zeros((n_w, 3, n_rows, nr * nz))
    counts = np.zeros(4, dtype=np.int64)
    for i in range(n_rows):
        rr, zz = rows_rz[i]
        st = np.zeros((n_v, 6))
        st[:, 0] = rr
        st[:, 2] = zz
        st[:, 3:6] = vel
        model = _Model(fields_obj, domain, sign)
        sgn = np.full(n_v, float(sign))
        status = np.zeros(n_v, dtype=np.int64)
        ncoll = np.zeros(n_v, dtype=np.int64)
        gam0 = np.sqrt(1.0 + np.sum(vel * vel, axis=1))
        vhat0 = vel[:, 1] / gam0
        a = coef[i]
        _initial_check(model, st, status, ncoll, dt)
        for k in range(n_steps + 1):
            if k > 0:
                active = status == COMPLETED
                if active.any():
                    _advance(model, st, sgn, dt, (k - 1) * dt, active, status, ncoll, 10**6, None)
            r = np.hypot(st[:, 0], st[:, 1])
            z = st[:, 2]
            p = st[:, 3:6]
            gam = np.sqrt(1.0 + np.sum(p * p, axis=1))
            vphi = np.where(r > 0, (st[:, 0] * p[:, 1] - st[:, 1] * p[:, 0]) / np.where(r > 0, r, 1.0), p[:, 1])
            vhat = vphi / gam
            fr = (r - r0) / h - 0.5
            fz = (z - z0) / h - 0.5
            ir = np.floor(fr).astype(np.int64)
            iz = np.floor(fz).astype(np.int64)
            wr = fr - ir
            wz = fz - iz
            c0 = a
            c1 = a * vhat0
            c2 = c1 * vhat
            for dr_, dz_, wgt in ((0, 0, (1 - wr) * (1 - wz)), (1, 0, wr * (1 - wz)),
                                  (0, 1, (1 - wr) * wz), (1, 1, wr * wz)):
                gi = ir + dr_
                gj = iz + dz_
                parity = np.ones(n_v)
                if mirror:
                    # the ghost column at -r folds onto the first column
                    ghost = gi == -1
                    gi = np.where(ghost, 0, gi)
                    parity = np.where(ghost, -1.0, 1.0)
                ok = (gi >= 0) & (gi < nr) & (gj >= 0) & (gj < nz)
                flat = gi[ok] * nz + gj[ok]
                for w in range(n_w):
                    t = tw[w, k]
                    if t == 0:
                        continue
                    np.add.at(out[w, 0, i], flat, t * c0[ok] * wgt[ok])
                    np.add.at(out[w, 1, i], flat, t * c1[ok] * wgt[ok])
                    np.add.at(out[w, 2, i], flat, t * c2[ok] * wgt[ok] * parity[ok])
        counts += np.bincount(status, minlength=4)[:4]
    return out, counts
