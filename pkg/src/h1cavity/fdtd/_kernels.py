"""Numba kernels for the leapfrog Yee update.

Index conventions (x slowest, z fastest; ``i, j, k`` are node indices):

    Ex[i, j, k] at (i+1/2, j, k)      Hx[i, j, k] at (i, j+1/2, k+1/2)
    Ey[i, j, k] at (i, j+1/2, k)      Hy[i, j, k] at (i+1/2, j, k+1/2)
    Ez[i, j, k] at (i, j, k+1/2)      Hz[i, j, k] at (i+1/2, j+1/2, k)

H is updated for indices ``0..n-2`` and E for ``1..n-1`` along every axis;
the remaining boundary values stay zero (perfect-conductor backing) unless
they are overwritten by the periodic copies done outside the kernels.

Rows of cells inside the box ``[lo, hi)`` take the plain update.  Every other
cell is a split-field PML cell: one split part per component is stored (the
other is total minus stored part) and each part decays with the conductivity
profile of its own derivative axis.  Profile arrays hold ``a = exp(-sigma dt)``
and ``b = (1 - a) / (sigma dt)`` (``b = 1`` where sigma vanishes).

Each outer iteration owns one x-slab, so results do not depend on how the
slabs are distributed over threads; energy partial sums are stored per slab
and reduced sequentially by the caller.

Stored values below ``TINY`` in magnitude are flushed to zero.  Without this
the exponentially small fields ahead of a pulse front and inside the PML
reach the float32 subnormal range, where x86 arithmetic is 10-20x slower.
"""

import numba as nb
import numpy as np

TINY = 1e-30


@nb.njit(inline="always")
def _ftz(v):
    return v if abs(v) >= TINY else 0.0 * v


def _make_update_h(accumulate):
    @nb.njit(parallel=True, cache=True)
    def update_h(ex, ey, ez, hx, hy, hz, hxy, hyz, hzx, ch,
                 ax, bx, ay, by, az, bz, lo, hi, ilo, ihi, partial):
        nx, ny, nz = ex.shape
        for i in nb.prange(nx - 1):
            s = 0.0
            x_plain = lo[0] <= i < hi[0]
            x_in = ilo[0] <= i < ihi[0]
            for j in range(ny - 1):
                row_plain = x_plain and lo[1] <= j < hi[1]
                row_in = x_in and ilo[1] <= j < ihi[1]
                if row_plain:
                    k0 = lo[2]
                    k1 = hi[2]
                else:
                    k0 = nz - 1
                    k1 = nz - 1
                for k in range(k0, k1):
                    dyez = ez[i, j + 1, k] - ez[i, j, k]
                    dzey = ey[i, j, k + 1] - ey[i, j, k]
                    dzex = ex[i, j, k + 1] - ex[i, j, k]
                    dxez = ez[i + 1, j, k] - ez[i, j, k]
                    dxey = ey[i + 1, j, k] - ey[i, j, k]
                    dyex = ex[i, j + 1, k] - ex[i, j, k]
                    if accumulate:
                        o1 = hx[i, j, k]
                        o2 = hy[i, j, k]
                        o3 = hz[i, j, k]
                    hx[i, j, k] = _ftz(hx[i, j, k] + ch * (dzey - dyez))
                    hy[i, j, k] = _ftz(hy[i, j, k] + ch * (dxez - dzex))
                    hz[i, j, k] = _ftz(hz[i, j, k] + ch * (dyex - dxey))
                    if accumulate:
                        s += o1 * hx[i, j, k] + o2 * hy[i, j, k] + o3 * hz[i, j, k]
                for k in range(nz - 1):
                    if k0 <= k < k1:
                        continue
                    dyez = ez[i, j + 1, k] - ez[i, j, k]
                    dzey = ey[i, j, k + 1] - ey[i, j, k]
                    dzex = ex[i, j, k + 1] - ex[i, j, k]
                    dxez = ez[i + 1, j, k] - ez[i, j, k]
                    dxey = ey[i + 1, j, k] - ey[i, j, k]
                    dyex = ex[i, j + 1, k] - ex[i, j, k]
                    o1 = hx[i, j, k]
                    o2 = hy[i, j, k]
                    o3 = hz[i, j, k]
                    # Hx = Hxy + Hxz, Hy = Hyz + Hyx, Hz = Hzx + Hzy
                    p = ay[j] * hxy[i, j, k] - by[j] * ch * dyez
                    q = az[k] * (o1 - hxy[i, j, k]) + bz[k] * ch * dzey
                    hxy[i, j, k] = _ftz(p)
                    hx[i, j, k] = _ftz(p + q)
                    p = az[k] * hyz[i, j, k] - bz[k] * ch * dzex
                    q = ax[i] * (o2 - hyz[i, j, k]) + bx[i] * ch * dxez
                    hyz[i, j, k] = _ftz(p)
                    hy[i, j, k] = _ftz(p + q)
                    p = ax[i] * hzx[i, j, k] - bx[i] * ch * dxey
                    q = ay[j] * (o3 - hzx[i, j, k]) + by[j] * ch * dyex
                    hzx[i, j, k] = _ftz(p)
                    hz[i, j, k] = _ftz(p + q)
                    if accumulate and row_in and ilo[2] <= k < ihi[2]:
                        s += o1 * hx[i, j, k] + o2 * hy[i, j, k] + o3 * hz[i, j, k]
            partial[i] = s
    return update_h


update_h = _make_update_h(False)
update_h_energy = _make_update_h(True)


@nb.njit(parallel=True, cache=True)
def update_e(ex, ey, ez, hx, hy, hz, exy, eyz, ezx, cex, cey, cez,
             ax, bx, ay, by, az, bz, lo, hi):
    nx, ny, nz = ex.shape
    for i in nb.prange(1, nx):
        x_plain = lo[0] <= i < hi[0]
        for j in range(1, ny):
            if x_plain and lo[1] <= j < hi[1]:
                k0 = lo[2]
                k1 = hi[2]
            else:
                k0 = nz
                k1 = nz
            for k in range(k0, k1):
                dyhz = hz[i, j, k] - hz[i, j - 1, k]
                dzhy = hy[i, j, k] - hy[i, j, k - 1]
                dzhx = hx[i, j, k] - hx[i, j, k - 1]
                dxhz = hz[i, j, k] - hz[i - 1, j, k]
                dxhy = hy[i, j, k] - hy[i - 1, j, k]
                dyhx = hx[i, j, k] - hx[i, j - 1, k]
                ex[i, j, k] = _ftz(ex[i, j, k] + cex[i, j, k] * (dyhz - dzhy))
                ey[i, j, k] = _ftz(ey[i, j, k] + cey[i, j, k] * (dzhx - dxhz))
                ez[i, j, k] = _ftz(ez[i, j, k] + cez[i, j, k] * (dxhy - dyhx))
            for k in range(1, nz):
                if k0 <= k < k1:
                    continue
                dyhz = hz[i, j, k] - hz[i, j - 1, k]
                dzhy = hy[i, j, k] - hy[i, j, k - 1]
                dzhx = hx[i, j, k] - hx[i, j, k - 1]
                dxhz = hz[i, j, k] - hz[i - 1, j, k]
                dxhy = hy[i, j, k] - hy[i - 1, j, k]
                dyhx = hx[i, j, k] - hx[i, j - 1, k]
                # Ex = Exy + Exz, Ey = Eyz + Eyx, Ez = Ezx + Ezy
                c = cex[i, j, k]
                p = ay[j] * exy[i, j, k] + by[j] * c * dyhz
                q = az[k] * (ex[i, j, k] - exy[i, j, k]) - bz[k] * c * dzhy
                exy[i, j, k] = _ftz(p)
                ex[i, j, k] = _ftz(p + q)
                c = cey[i, j, k]
                p = az[k] * eyz[i, j, k] + bz[k] * c * dzhx
                q = ax[i] * (ey[i, j, k] - eyz[i, j, k]) - bx[i] * c * dxhz
                eyz[i, j, k] = _ftz(p)
                ey[i, j, k] = _ftz(p + q)
                c = cez[i, j, k]
                p = ax[i] * ezx[i, j, k] + bx[i] * c * dxhy
                q = ay[j] * (ez[i, j, k] - ezx[i, j, k]) - by[j] * c * dyhx
                ezx[i, j, k] = _ftz(p)
                ez[i, j, k] = _ftz(p + q)


@nb.njit(parallel=True, cache=True)
def electric_energy(ex, ey, ez, cex, cey, cez, ch, ilo, ihi, partial):
    """Per-slab sums of eps |E|^2 over the box [ilo, ihi)."""
    nx = ex.shape[0]
    for i in nb.prange(nx):
        s = 0.0
        if ilo[0] <= i < ihi[0]:
            for j in range(ilo[1], ihi[1]):
                for k in range(ilo[2], ihi[2]):
                    a = ex[i, j, k]
                    b = ey[i, j, k]
                    c = ez[i, j, k]
                    if a != 0.0:
                        s += a * a * (ch / cex[i, j, k])
                    if b != 0.0:
                        s += b * b * (ch / cey[i, j, k])
                    if c != 0.0:
                        s += c * c * (ch / cez[i, j, k])
        partial[i] = s
