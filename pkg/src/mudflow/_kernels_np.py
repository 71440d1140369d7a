"""Pure NumPy solver kernels: the portable fallback backend.

Semantics match `_kernels_cy` (the compiled backend). The grid is a single
(nx, ny, nz, 4) array interleaving [mass, px, py, pz]. Scatter adds go
through np.add.at, which applies updates in index order, so results are
deterministic for a fixed particle ordering. This backend is roughly an
order of magnitude slower than the compiled one; see benchmarks/throughput.py.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"

_OFFSETS = np.array([(i, j, k) for i in range(3) for j in range(3) for k in range(3)], dtype=np.intp)


def _spline_weights(fx: np.ndarray) -> np.ndarray:
    """Quadratic B-spline weights for the 3-node stencil, shape (n, 3)."""
    w = np.empty(fx.shape + (3,), dtype=fx.dtype)
    w[..., 0] = 0.5 * (1.5 - fx) ** 2
    w[..., 1] = 0.75 - (fx - 1.0) ** 2
    w[..., 2] = 0.5 * (fx - 0.5) ** 2
    return w


def _stencil(pos, origin, inv_dx, dims):
    X = (pos - origin) * inv_dx
    base = np.floor(X - 0.5).astype(np.intp)
    np.clip(base, 0, np.asarray(dims, dtype=np.intp) - 3, out=base)
    fx = X - base
    wx = _spline_weights(fx[:, 0])
    wy = _spline_weights(fx[:, 1])
    wz = _spline_weights(fx[:, 2])
    return X, base, wx, wy, wz


def max_speed(vel: np.ndarray) -> float:
    if len(vel) == 0:
        return 0.0
    return float(np.sqrt((vel * vel).sum(axis=1).max()))


def p2g(pos, vel, C, J, vol0, mass, dt, dx, origin, eos_k, eos_gamma, grid):
    """Scatter mass, momentum, and pressure stress onto the grid."""
    n = len(pos)
    if n == 0:
        return
    inv_dx = 1.0 / dx
    dims = grid.shape[:3]
    X, base, wx, wy, wz = _stencil(pos, origin, inv_dx, dims)
    # Tait-style weakly compressible EOS; J is the volume ratio V/V0.
    pressure = eos_k * (np.power(1.0 / J, eos_gamma) - 1.0)
    stress_coef = dt * 4.0 * inv_dx * inv_dx * (vol0 * J) * pressure
    affine = mass[:, None, None] * C
    affine[:, 0, 0] += stress_coef
    affine[:, 1, 1] += stress_coef
    affine[:, 2, 2] += stress_coef
    mv = mass[:, None] * vel

    g = grid.reshape(-1, 4)
    contrib = np.empty((n, 4), dtype=grid.dtype)
    for off in _OFFSETS:
        w = wx[:, off[0]] * wy[:, off[1]] * wz[:, off[2]]
        node = base + off
        dpos = (node.astype(pos.dtype) - X) * dx
        contrib[:, 0] = w * mass
        contrib[:, 1:] = w[:, None] * (mv + np.einsum("nij,nj->ni", affine, dpos))
        flat = (node[:, 0] * dims[1] + node[:, 1]) * dims[2] + node[:, 2]
        np.add.at(g, flat, contrib)


def grid_update(grid, dt, gravity_z, node_h, node_n,
                box_c, box_r, box_h, friction, origin, dx, wall_margin, walls_on):
    """Convert momentum to velocity, apply gravity and collider projection.

    grid[..., 1:4] holds momentum on entry and velocity on exit. Gravity
    acts along -z. Nodes at or below a collider surface lose their inward
    normal velocity and see Coulomb friction on the tangential remainder.
    """
    nx, ny, nz = grid.shape[:3]
    active = grid[..., 0] > 0.0
    v = grid[..., 1:4]
    v[active] /= grid[active][:, :1]
    v[~active] = 0.0
    v[active, 2] -= dt * gravity_z

    # terrain: vertical signed distance per node column
    zs = origin[2] + np.arange(nz) * dx
    sdf = zs[None, None, :] - node_h[:, :, None]
    mask = active & (sdf <= 0.0)
    if mask.any():
        idx = np.nonzero(mask)
        normals = node_n[idx[0], idx[1]]
        _project(v, idx, normals, friction)

    for b in range(len(box_c)):
        _box_project(v, active, grid.shape[:3], origin, dx,
                     box_c[b], box_r[b].reshape(3, 3), box_h[b], friction)

    if walls_on and wall_margin > 0:
        m = wall_margin
        np.maximum(v[:m, :, :, 0], 0.0, out=v[:m, :, :, 0])
        np.minimum(v[nx - m:, :, :, 0], 0.0, out=v[nx - m:, :, :, 0])
        np.maximum(v[:, :m, :, 1], 0.0, out=v[:, :m, :, 1])
        np.minimum(v[:, ny - m:, :, 1], 0.0, out=v[:, ny - m:, :, 1])
        np.maximum(v[:, :, :m, 2], 0.0, out=v[:, :, :m, 2])
        np.minimum(v[:, :, nz - m:, 2], 0.0, out=v[:, :, nz - m:, 2])


def _project(v, idx, normals, friction):
    """Remove inward normal velocity at the indexed nodes, with friction."""
    vn = np.einsum("mi,mi->m", v[idx], normals)
    hit = vn < 0.0
    if not hit.any():
        return
    sel = tuple(ix[hit] for ix in idx)
    n = normals[hit]
    vn = vn[hit]
    vt = v[sel] - vn[:, None] * n
    vt_norm = np.linalg.norm(vt, axis=1)
    scale = np.ones_like(vt_norm)
    moving = vt_norm > 1e-12
    scale[moving] = np.maximum(0.0, 1.0 + friction * vn[moving] / vt_norm[moving])
    v[sel] = vt * scale[:, None]


def _box_project(v, active, dims, origin, dx, center, rot, half, friction):
    nx, ny, nz = dims
    # restrict to the box's node AABB
    radius = np.abs(rot) @ half
    lo = np.maximum(np.floor((center - radius - origin) / dx).astype(int), 0)
    hi = np.minimum(np.floor((center + radius - origin) / dx).astype(int) + 2, [nx, ny, nz])
    if np.any(lo >= hi):
        return
    ii, jj, kk = np.meshgrid(*(np.arange(lo[d], hi[d]) for d in range(3)), indexing="ij")
    sub_active = active[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    if not sub_active.any():
        return
    ii, jj, kk = ii[sub_active], jj[sub_active], kk[sub_active]
    pts = origin + np.stack([ii, jj, kk], axis=1) * dx
    p_local = (pts - center) @ rot
    q = np.abs(p_local) - half
    inside = q.max(axis=1) <= 0.0
    if not inside.any():
        return
    sel = (ii[inside], jj[inside], kk[inside])
    pl = p_local[inside]
    qi = q[inside]
    ax = np.argmax(qi, axis=1)
    n_local = np.zeros_like(pl)
    rows = np.arange(len(pl))
    sign = np.sign(pl[rows, ax])
    sign[sign == 0] = 1.0
    n_local[rows, ax] = sign
    normals = n_local @ rot.T
    _project(v, sel, normals, friction)


def g2p(pos, vel, C, J, dt, dx, origin, grid,
        terr_h, terr_ox, terr_oy, terr_cs,
        box_c, box_r, box_h, domain_lo, domain_hi):
    """Gather velocities, advect, update volume ratios, resolve penetration.

    Returns the index of the first particle with a non-finite position, or -1.
    """
    n = len(pos)
    if n == 0:
        return -1
    inv_dx = 1.0 / dx
    dims = grid.shape[:3]
    X, base, wx, wy, wz = _stencil(pos, origin, inv_dx, dims)
    gv = grid.reshape(-1, 4)

    new_v = np.zeros_like(vel)
    new_C = np.zeros_like(C)
    for off in _OFFSETS:
        w = wx[:, off[0]] * wy[:, off[1]] * wz[:, off[2]]
        node = base + off
        dpos = (node.astype(pos.dtype) - X) * dx
        flat = (node[:, 0] * dims[1] + node[:, 1]) * dims[2] + node[:, 2]
        vn = gv[flat, 1:4]
        new_v += w[:, None] * vn
        new_C += (4.0 * inv_dx * inv_dx) * w[:, None, None] * np.einsum("ni,nj->nij", vn, dpos)

    vel[:] = new_v
    C[:] = new_C
    trace = new_C[:, 0, 0] + new_C[:, 1, 1] + new_C[:, 2, 2]
    np.multiply(J, np.clip(1.0 + dt * trace, 0.5, 2.0), out=J)
    np.clip(J, 0.05, 20.0, out=J)
    pos += dt * vel

    _particle_collisions(pos, vel, terr_h, terr_ox, terr_oy, terr_cs, box_c, box_r, box_h)

    np.clip(pos, domain_lo, domain_hi, out=pos)

    finite = np.isfinite(pos).all(axis=1) & np.isfinite(vel).all(axis=1)
    if not finite.all():
        return int(np.nonzero(~finite)[0][0])
    return -1


def _particle_collisions(pos, vel, terr_h, terr_ox, terr_oy, terr_cs, box_c, box_r, box_h):
    # terrain: push up to the surface, drop inward normal velocity
    n_rows, n_cols = terr_h.shape
    u = np.clip((pos[:, 0] - terr_ox) / terr_cs - 0.5, 0.0, n_cols - 1.0)
    v = np.clip((pos[:, 1] - terr_oy) / terr_cs - 0.5, 0.0, n_rows - 1.0)
    c0 = np.clip(np.floor(u).astype(np.intp), 0, n_cols - 2)
    r0 = np.clip(np.floor(v).astype(np.intp), 0, n_rows - 2)
    fu = u - c0
    fv = v - r0
    h00, h01 = terr_h[r0, c0], terr_h[r0, c0 + 1]
    h10, h11 = terr_h[r0 + 1, c0], terr_h[r0 + 1, c0 + 1]
    surf = h00 * (1 - fu) * (1 - fv) + h01 * fu * (1 - fv) + h10 * (1 - fu) * fv + h11 * fu * fv
    below = pos[:, 2] < surf
    if below.any():
        gx = ((h01 - h00) * (1 - fv) + (h11 - h10) * fv)[below] / terr_cs
        gy = ((h10 - h00) * (1 - fu) + (h11 - h01) * fu)[below] / terr_cs
        nrm = np.stack([-gx, -gy, np.ones_like(gx)], axis=1)
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        pos[below, 2] = surf[below]
        vb = vel[below]
        vn = np.einsum("mi,mi->m", vb, nrm)
        vb -= np.minimum(vn, 0.0)[:, None] * nrm
        vel[below] = vb

    for b in range(len(box_c)):
        rot = box_r[b].reshape(3, 3)
        p_local = (pos - box_c[b]) @ rot
        q = np.abs(p_local) - box_h[b]
        inside = q.max(axis=1) < 0.0
        if not inside.any():
            continue
        pl = p_local[inside]
        qi = q[inside]
        ax = np.argmax(qi, axis=1)
        rows = np.arange(len(pl))
        sign = np.sign(pl[rows, ax])
        sign[sign == 0] = 1.0
        n_local = np.zeros_like(pl)
        n_local[rows, ax] = sign
        normals = n_local @ rot.T
        depth = -qi[rows, ax]
        pos[inside] += depth[:, None] * normals
        vb = vel[inside]
        vn = np.einsum("mi,mi->m", vb, normals)
        vb -= np.minimum(vn, 0.0)[:, None] * normals
        vel[inside] = vb


def sample_grid(points, grid, origin, dx):
    """Interpolated (density, velocity) at arbitrary points.

    Density is nodal mass spread over a node cell volume; velocity is the
    plain B-spline interpolation of grid velocities.
    """
    m = len(points)
    dims = grid.shape[:3]
    if m == 0:
        return np.zeros(0), np.zeros((0, 3))
    inv_dx = 1.0 / dx
    X, base, wx, wy, wz = _stencil(np.asarray(points, dtype=np.float64), origin, inv_dx, dims)
    g = grid.reshape(-1, 4)
    rho = np.zeros(m)
    vel = np.zeros((m, 3))
    for off in _OFFSETS:
        w = wx[:, off[0]] * wy[:, off[1]] * wz[:, off[2]]
        node = base + off
        flat = (node[:, 0] * dims[1] + node[:, 1]) * dims[2] + node[:, 2]
        rho += w * g[flat, 0]
        vel += w[:, None] * g[flat, 1:4]
    rho /= dx ** 3
    return rho, vel


def scatter_impulse(points, impulses, grid, origin, dx):
    """Distribute impulses (kg*m/s) onto grid node velocities."""
    if len(points) == 0:
        return
    dims = grid.shape[:3]
    inv_dx = 1.0 / dx
    X, base, wx, wy, wz = _stencil(np.asarray(points, dtype=np.float64), origin, inv_dx, dims)
    g = grid.reshape(-1, 4)
    for off in _OFFSETS:
        w = wx[:, off[0]] * wy[:, off[1]] * wz[:, off[2]]
        node = base + off
        flat = (node[:, 0] * dims[1] + node[:, 1]) * dims[2] + node[:, 2]
        mass = g[flat, 0]
        ok = mass > 0.0
        if not ok.any():
            continue
        dv = np.zeros_like(impulses)
        dv[ok] = w[ok, None] * impulses[ok] / mass[ok, None]
        np.add.at(g[:, 1:4], flat, dv)
