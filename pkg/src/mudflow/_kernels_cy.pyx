# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# cython: language_level=3
"""Compiled solver kernels: the hot particle/grid transfer loops.

Same interface and semantics as `_kernels_np`. The grid is a single
(nx, ny, nz, 4) array interleaving [mass, px, py, pz] so each node touches
one cache line. Single-threaded by design so every reduction has a fixed
order and runs are bit-reproducible.
"""

import numpy as np

from libc.math cimport floor, fabs, sqrt, pow, isfinite

BACKEND_NAME = "compiled"


cdef inline int _clampi(int v, int lo, int hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline void _weights(double f, double* w) nogil:
    w[0] = 0.5 * (1.5 - f) * (1.5 - f)
    w[1] = 0.75 - (f - 1.0) * (f - 1.0)
    w[2] = 0.5 * (f - 0.5) * (f - 0.5)


def max_speed(double[:, ::1] vel):
    cdef Py_ssize_t i, n = vel.shape[0]
    cdef double best = 0.0, s
    with nogil:
        for i in range(n):
            s = vel[i, 0] * vel[i, 0] + vel[i, 1] * vel[i, 1] + vel[i, 2] * vel[i, 2]
            if s > best:
                best = s
    return sqrt(best)


def p2g(double[:, ::1] pos, double[:, ::1] vel, double[:, :, ::1] C, double[::1] J,
        double[::1] vol0, double[::1] mass, double dt, double dx, double[::1] origin,
        double eos_k, double eos_gamma, double[:, :, :, ::1] grid):
    cdef Py_ssize_t n = pos.shape[0], i
    cdef int nx = grid.shape[0], ny = grid.shape[1], nz = grid.shape[2]
    cdef int bi, bj, bk, di, dj, dk, gi, gj
    cdef double inv_dx = 1.0 / dx
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double Xx, Xy, Xz, m, Ji, pressure, s
    cdef double wx[3]
    cdef double wy[3]
    cdef double wz[3]
    cdef double dpx[3]
    cdef double dpy[3]
    cdef double dpz[3]
    cdef double A00, A01, A02, A10, A11, A12, A20, A21, A22
    cdef double mvx, mvy, mvz, w, wxy, ddy, ddz
    cdef double t0x, t0y, t0z, t1x, t1y, t1z
    cdef double* node

    with nogil:
        for i in range(n):
            Xx = (pos[i, 0] - ox) * inv_dx
            Xy = (pos[i, 1] - oy) * inv_dx
            Xz = (pos[i, 2] - oz) * inv_dx
            bi = _clampi(<int>floor(Xx - 0.5), 0, nx - 3)
            bj = _clampi(<int>floor(Xy - 0.5), 0, ny - 3)
            bk = _clampi(<int>floor(Xz - 0.5), 0, nz - 3)
            _weights(Xx - bi, wx)
            _weights(Xy - bj, wy)
            _weights(Xz - bk, wz)

            Ji = J[i]
            pressure = eos_k * (pow(1.0 / Ji, eos_gamma) - 1.0)
            s = dt * 4.0 * inv_dx * inv_dx * vol0[i] * Ji * pressure
            m = mass[i]
            A00 = m * C[i, 0, 0] + s
            A01 = m * C[i, 0, 1]
            A02 = m * C[i, 0, 2]
            A10 = m * C[i, 1, 0]
            A11 = m * C[i, 1, 1] + s
            A12 = m * C[i, 1, 2]
            A20 = m * C[i, 2, 0]
            A21 = m * C[i, 2, 1]
            A22 = m * C[i, 2, 2] + s
            mvx = m * vel[i, 0]
            mvy = m * vel[i, 1]
            mvz = m * vel[i, 2]

            for di in range(3):
                dpx[di] = (bi + di - Xx) * dx
                dpy[di] = (bj + di - Xy) * dx
                dpz[di] = (bk + di - Xz) * dx

            for di in range(3):
                gi = bi + di
                t0x = mvx + A00 * dpx[di]
                t0y = mvy + A10 * dpx[di]
                t0z = mvz + A20 * dpx[di]
                for dj in range(3):
                    gj = bj + dj
                    wxy = wx[di] * wy[dj]
                    ddy = dpy[dj]
                    t1x = t0x + A01 * ddy
                    t1y = t0y + A11 * ddy
                    t1z = t0z + A21 * ddy
                    node = &grid[gi, gj, bk, 0]
                    for dk in range(3):
                        w = wxy * wz[dk]
                        ddz = dpz[dk]
                        node[0] += w * m
                        node[1] += w * (t1x + A02 * ddz)
                        node[2] += w * (t1y + A12 * ddz)
                        node[3] += w * (t1z + A22 * ddz)
                        node += 4


cdef inline void _project_friction(double* vx, double* vy, double* vz,
                                   double nx, double ny, double nz, double mu) nogil:
    cdef double vn = vx[0] * nx + vy[0] * ny + vz[0] * nz
    cdef double tx, ty, tz, tn, scale
    if vn >= 0.0:
        return
    tx = vx[0] - vn * nx
    ty = vy[0] - vn * ny
    tz = vz[0] - vn * nz
    tn = sqrt(tx * tx + ty * ty + tz * tz)
    scale = 1.0
    if tn > 1e-12:
        scale = 1.0 + mu * vn / tn
        if scale < 0.0:
            scale = 0.0
    vx[0] = tx * scale
    vy[0] = ty * scale
    vz[0] = tz * scale


def grid_update(double[:, :, :, ::1] grid, double dt, double gravity_z,
                double[:, ::1] node_h, double[:, :, ::1] node_n,
                double[:, ::1] box_c, double[:, ::1] box_r, double[:, ::1] box_h,
                double friction, double[::1] origin, double dx,
                int wall_margin, bint walls_on):
    """Momentum to velocity, gravity, collider projection, wall clamps.

    grid[..., 1:4] holds momentum on entry and velocity on exit.
    """
    cdef int nx = grid.shape[0], ny = grid.shape[1], nz = grid.shape[2]
    cdef int i, j, k, b, ax
    cdef int nb = box_c.shape[0]
    cdef double m, vx, vy, vz, z, sdf, inv_m
    cdef double oz = origin[2]
    cdef double radius0, radius1, radius2
    cdef int lo0, lo1, lo2, hi0, hi1, hi2
    cdef double px, py, pz, p0, p1, p2, q0, q1, q2, qmax, sgn
    cdef double n0, n1, n2

    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    m = grid[i, j, k, 0]
                    if m <= 0.0:
                        continue
                    inv_m = 1.0 / m
                    vx = grid[i, j, k, 1] * inv_m
                    vy = grid[i, j, k, 2] * inv_m
                    vz = grid[i, j, k, 3] * inv_m - dt * gravity_z
                    z = oz + k * dx
                    sdf = z - node_h[i, j]
                    if sdf <= 0.0:
                        _project_friction(&vx, &vy, &vz,
                                          node_n[i, j, 0], node_n[i, j, 1], node_n[i, j, 2],
                                          friction)
                    grid[i, j, k, 1] = vx
                    grid[i, j, k, 2] = vy
                    grid[i, j, k, 3] = vz

        for b in range(nb):
            radius0 = fabs(box_r[b, 0]) * box_h[b, 0] + fabs(box_r[b, 1]) * box_h[b, 1] + fabs(box_r[b, 2]) * box_h[b, 2]
            radius1 = fabs(box_r[b, 3]) * box_h[b, 0] + fabs(box_r[b, 4]) * box_h[b, 1] + fabs(box_r[b, 5]) * box_h[b, 2]
            radius2 = fabs(box_r[b, 6]) * box_h[b, 0] + fabs(box_r[b, 7]) * box_h[b, 1] + fabs(box_r[b, 8]) * box_h[b, 2]
            lo0 = _clampi(<int>floor((box_c[b, 0] - radius0 - origin[0]) / dx), 0, nx)
            lo1 = _clampi(<int>floor((box_c[b, 1] - radius1 - origin[1]) / dx), 0, ny)
            lo2 = _clampi(<int>floor((box_c[b, 2] - radius2 - origin[2]) / dx), 0, nz)
            hi0 = _clampi(<int>floor((box_c[b, 0] + radius0 - origin[0]) / dx) + 2, 0, nx)
            hi1 = _clampi(<int>floor((box_c[b, 1] + radius1 - origin[1]) / dx) + 2, 0, ny)
            hi2 = _clampi(<int>floor((box_c[b, 2] + radius2 - origin[2]) / dx) + 2, 0, nz)
            for i in range(lo0, hi0):
                for j in range(lo1, hi1):
                    for k in range(lo2, hi2):
                        if grid[i, j, k, 0] <= 0.0:
                            continue
                        px = origin[0] + i * dx - box_c[b, 0]
                        py = origin[1] + j * dx - box_c[b, 1]
                        pz = origin[2] + k * dx - box_c[b, 2]
                        p0 = box_r[b, 0] * px + box_r[b, 3] * py + box_r[b, 6] * pz
                        p1 = box_r[b, 1] * px + box_r[b, 4] * py + box_r[b, 7] * pz
                        p2 = box_r[b, 2] * px + box_r[b, 5] * py + box_r[b, 8] * pz
                        q0 = fabs(p0) - box_h[b, 0]
                        q1 = fabs(p1) - box_h[b, 1]
                        q2 = fabs(p2) - box_h[b, 2]
                        qmax = q0
                        ax = 0
                        if q1 > qmax:
                            qmax = q1
                            ax = 1
                        if q2 > qmax:
                            qmax = q2
                            ax = 2
                        if qmax > 0.0:
                            continue
                        if ax == 0:
                            sgn = 1.0 if p0 >= 0.0 else -1.0
                            n0 = box_r[b, 0] * sgn
                            n1 = box_r[b, 3] * sgn
                            n2 = box_r[b, 6] * sgn
                        elif ax == 1:
                            sgn = 1.0 if p1 >= 0.0 else -1.0
                            n0 = box_r[b, 1] * sgn
                            n1 = box_r[b, 4] * sgn
                            n2 = box_r[b, 7] * sgn
                        else:
                            sgn = 1.0 if p2 >= 0.0 else -1.0
                            n0 = box_r[b, 2] * sgn
                            n1 = box_r[b, 5] * sgn
                            n2 = box_r[b, 8] * sgn
                        vx = grid[i, j, k, 1]
                        vy = grid[i, j, k, 2]
                        vz = grid[i, j, k, 3]
                        _project_friction(&vx, &vy, &vz, n0, n1, n2, friction)
                        grid[i, j, k, 1] = vx
                        grid[i, j, k, 2] = vy
                        grid[i, j, k, 3] = vz

        if walls_on and wall_margin > 0:
            for i in range(nx):
                for j in range(ny):
                    for k in range(wall_margin):
                        if grid[i, j, k, 3] < 0.0:
                            grid[i, j, k, 3] = 0.0
                    for k in range(nz - wall_margin, nz):
                        if grid[i, j, k, 3] > 0.0:
                            grid[i, j, k, 3] = 0.0
            for i in range(nx):
                for j in range(wall_margin):
                    for k in range(nz):
                        if grid[i, j, k, 2] < 0.0:
                            grid[i, j, k, 2] = 0.0
                for j in range(ny - wall_margin, ny):
                    for k in range(nz):
                        if grid[i, j, k, 2] > 0.0:
                            grid[i, j, k, 2] = 0.0
            for i in range(wall_margin):
                for j in range(ny):
                    for k in range(nz):
                        if grid[i, j, k, 1] < 0.0:
                            grid[i, j, k, 1] = 0.0
            for i in range(nx - wall_margin, nx):
                for j in range(ny):
                    for k in range(nz):
                        if grid[i, j, k, 1] > 0.0:
                            grid[i, j, k, 1] = 0.0


def g2p(double[:, ::1] pos, double[:, ::1] vel, double[:, :, ::1] C, double[::1] J,
        double dt, double dx, double[::1] origin, double[:, :, :, ::1] grid,
        const double[:, ::1] terr_h, double terr_ox, double terr_oy, double terr_cs,
        double[:, ::1] box_c, double[:, ::1] box_r, double[:, ::1] box_h,
        double[::1] domain_lo, double[::1] domain_hi):
    cdef Py_ssize_t n = pos.shape[0], i
    cdef int nx = grid.shape[0], ny = grid.shape[1], nz = grid.shape[2]
    cdef int n_rows = terr_h.shape[0], n_cols = terr_h.shape[1]
    cdef int nb = box_c.shape[0]
    cdef int bi, bj, bk, di, dj, dk, gi, gj, b, ax, c0, r0
    cdef double inv_dx = 1.0 / dx
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double Xx, Xy, Xz, w, wxy, ddz
    cdef double wx[3]
    cdef double wy[3]
    cdef double wz[3]
    cdef double dpx[3]
    cdef double dpy[3]
    cdef double dpz[3]
    cdef double cdx[3]
    cdef double cdy[3]
    cdef double cdz[3]
    cdef double vx, vy, vz, wgx, wgy, wgz, coef, trace, mult
    cdef double C00, C01, C02, C10, C11, C12, C20, C21, C22
    cdef double u, v, fu, fv, h00, h01, h10, h11, surf, gx, gy, nn, n0, n1, n2, vn
    cdef double px, py, pz, p0, p1, p2, q0, q1, q2, qmax, sgn, depth
    cdef double* node
    cdef Py_ssize_t bad = -1

    coef = 4.0 * inv_dx * inv_dx
    with nogil:
        for i in range(n):
            Xx = (pos[i, 0] - ox) * inv_dx
            Xy = (pos[i, 1] - oy) * inv_dx
            Xz = (pos[i, 2] - oz) * inv_dx
            bi = _clampi(<int>floor(Xx - 0.5), 0, nx - 3)
            bj = _clampi(<int>floor(Xy - 0.5), 0, ny - 3)
            bk = _clampi(<int>floor(Xz - 0.5), 0, nz - 3)
            _weights(Xx - bi, wx)
            _weights(Xy - bj, wy)
            _weights(Xz - bk, wz)
            for di in range(3):
                dpx[di] = (bi + di - Xx) * dx
                dpy[di] = (bj + di - Xy) * dx
                dpz[di] = (bk + di - Xz) * dx
                cdx[di] = coef * dpx[di]
                cdy[di] = coef * dpy[di]
                cdz[di] = coef * dpz[di]

            vx = vy = vz = 0.0
            C00 = C01 = C02 = C10 = C11 = C12 = C20 = C21 = C22 = 0.0
            for di in range(3):
                gi = bi + di
                for dj in range(3):
                    gj = bj + dj
                    wxy = wx[di] * wy[dj]
                    node = &grid[gi, gj, bk, 0]
                    for dk in range(3):
                        w = wxy * wz[dk]
                        wgx = w * node[1]
                        wgy = w * node[2]
                        wgz = w * node[3]
                        node += 4
                        vx += wgx
                        vy += wgy
                        vz += wgz
                        ddz = cdz[dk]
                        C00 += wgx * cdx[di]
                        C01 += wgx * cdy[dj]
                        C02 += wgx * ddz
                        C10 += wgy * cdx[di]
                        C11 += wgy * cdy[dj]
                        C12 += wgy * ddz
                        C20 += wgz * cdx[di]
                        C21 += wgz * cdy[dj]
                        C22 += wgz * ddz

            vel[i, 0] = vx
            vel[i, 1] = vy
            vel[i, 2] = vz
            C[i, 0, 0] = C00
            C[i, 0, 1] = C01
            C[i, 0, 2] = C02
            C[i, 1, 0] = C10
            C[i, 1, 1] = C11
            C[i, 1, 2] = C12
            C[i, 2, 0] = C20
            C[i, 2, 1] = C21
            C[i, 2, 2] = C22

            trace = C00 + C11 + C22
            mult = 1.0 + dt * trace
            if mult < 0.5:
                mult = 0.5
            elif mult > 2.0:
                mult = 2.0
            J[i] = J[i] * mult
            if J[i] < 0.05:
                J[i] = 0.05
            elif J[i] > 20.0:
                J[i] = 20.0

            pos[i, 0] += dt * vx
            pos[i, 1] += dt * vy
            pos[i, 2] += dt * vz

            # terrain projection on the bilinear patch
            u = (pos[i, 0] - terr_ox) / terr_cs - 0.5
            v = (pos[i, 1] - terr_oy) / terr_cs - 0.5
            if u < 0.0:
                u = 0.0
            elif u > n_cols - 1.0:
                u = n_cols - 1.0
            if v < 0.0:
                v = 0.0
            elif v > n_rows - 1.0:
                v = n_rows - 1.0
            c0 = _clampi(<int>floor(u), 0, n_cols - 2)
            r0 = _clampi(<int>floor(v), 0, n_rows - 2)
            fu = u - c0
            fv = v - r0
            h00 = terr_h[r0, c0]
            h01 = terr_h[r0, c0 + 1]
            h10 = terr_h[r0 + 1, c0]
            h11 = terr_h[r0 + 1, c0 + 1]
            surf = h00 * (1 - fu) * (1 - fv) + h01 * fu * (1 - fv) + h10 * (1 - fu) * fv + h11 * fu * fv
            if pos[i, 2] < surf:
                gx = ((h01 - h00) * (1 - fv) + (h11 - h10) * fv) / terr_cs
                gy = ((h10 - h00) * (1 - fu) + (h11 - h01) * fu) / terr_cs
                nn = sqrt(gx * gx + gy * gy + 1.0)
                n0 = -gx / nn
                n1 = -gy / nn
                n2 = 1.0 / nn
                pos[i, 2] = surf
                vn = vel[i, 0] * n0 + vel[i, 1] * n1 + vel[i, 2] * n2
                if vn < 0.0:
                    vel[i, 0] -= vn * n0
                    vel[i, 1] -= vn * n1
                    vel[i, 2] -= vn * n2

            for b in range(nb):
                px = pos[i, 0] - box_c[b, 0]
                py = pos[i, 1] - box_c[b, 1]
                pz = pos[i, 2] - box_c[b, 2]
                p0 = box_r[b, 0] * px + box_r[b, 3] * py + box_r[b, 6] * pz
                p1 = box_r[b, 1] * px + box_r[b, 4] * py + box_r[b, 7] * pz
                p2 = box_r[b, 2] * px + box_r[b, 5] * py + box_r[b, 8] * pz
                q0 = fabs(p0) - box_h[b, 0]
                q1 = fabs(p1) - box_h[b, 1]
                q2 = fabs(p2) - box_h[b, 2]
                qmax = q0
                ax = 0
                if q1 > qmax:
                    qmax = q1
                    ax = 1
                if q2 > qmax:
                    qmax = q2
                    ax = 2
                if qmax >= 0.0:
                    continue
                depth = -qmax
                if ax == 0:
                    sgn = 1.0 if p0 >= 0.0 else -1.0
                    n0 = box_r[b, 0] * sgn
                    n1 = box_r[b, 3] * sgn
                    n2 = box_r[b, 6] * sgn
                elif ax == 1:
                    sgn = 1.0 if p1 >= 0.0 else -1.0
                    n0 = box_r[b, 1] * sgn
                    n1 = box_r[b, 4] * sgn
                    n2 = box_r[b, 7] * sgn
                else:
                    sgn = 1.0 if p2 >= 0.0 else -1.0
                    n0 = box_r[b, 2] * sgn
                    n1 = box_r[b, 5] * sgn
                    n2 = box_r[b, 8] * sgn
                pos[i, 0] += depth * n0
                pos[i, 1] += depth * n1
                pos[i, 2] += depth * n2
                vn = vel[i, 0] * n0 + vel[i, 1] * n1 + vel[i, 2] * n2
                if vn < 0.0:
                    vel[i, 0] -= vn * n0
                    vel[i, 1] -= vn * n1
                    vel[i, 2] -= vn * n2

            for di in range(3):
                if pos[i, di] < domain_lo[di]:
                    pos[i, di] = domain_lo[di]
                elif pos[i, di] > domain_hi[di]:
                    pos[i, di] = domain_hi[di]

            if bad < 0:
                if not (isfinite(pos[i, 0]) and isfinite(pos[i, 1]) and isfinite(pos[i, 2])
                        and isfinite(vel[i, 0]) and isfinite(vel[i, 1]) and isfinite(vel[i, 2])):
                    bad = i

    return int(bad)
