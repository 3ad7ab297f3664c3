"""Hot numerical kernels: wave-equation time steps and disk rasterization.

Every public function has a numba ``@njit`` implementation and a pure-numpy
one with identical semantics; :mod:`sedinv._backend` picks which is exported.
All 2D arrays are float64, C-contiguous, shape (ny, nx), row-major with x
varying fastest.

Wave stepping uses a 4th-order Laplacian and leaves a two-cell ring of zeros
around the padded grid (homogeneous Dirichlet far inside the sponge).
The forward step advances

    u_next = d1 * (2 u - d2 * u_prev + coef * lap4(u))

with coef = dt^2 / m and d1, d2 the sponge damping factors; the adjoint step
is its exact transpose,

    lam_next = d1 * (2 lam - d2_shifted * lam_prev2 + lap4(coef * lam)).
"""

from __future__ import annotations

import numpy as np

from ._backend import USE_NUMBA, backend_name

__all__ = [
    "backend_name",
    "step_forward",
    "step_adjoint",
    "lap4",
    "accumulate_lap_product",
    "cover_mask",
]

# 4th-order central second-derivative coefficients (offsets 0, +-1, +-2).
_C0 = -5.0 / 2.0
_C1 = 4.0 / 3.0
_C2 = -1.0 / 12.0


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def _lap4_np(u: np.ndarray, inv_dx2: float, inv_dy2: float, out: np.ndarray) -> None:
    out[:] = 0.0
    c = u[2:-2, 2:-2]
    out[2:-2, 2:-2] = (
        inv_dx2
        * (_C0 * c + _C1 * (u[2:-2, 1:-3] + u[2:-2, 3:-1])
           + _C2 * (u[2:-2, :-4] + u[2:-2, 4:]))
        + inv_dy2
        * (_C0 * c + _C1 * (u[1:-3, 2:-2] + u[3:-1, 2:-2])
           + _C2 * (u[:-4, 2:-2] + u[4:, 2:-2]))
    )


def _step_forward_np(prev, cur, coef, d1, d2, inv_dx2, inv_dy2, out) -> None:
    out[:] = 0.0
    c = cur[2:-2, 2:-2]
    lap = (
        inv_dx2
        * (_C0 * c + _C1 * (cur[2:-2, 1:-3] + cur[2:-2, 3:-1])
           + _C2 * (cur[2:-2, :-4] + cur[2:-2, 4:]))
        + inv_dy2
        * (_C0 * c + _C1 * (cur[1:-3, 2:-2] + cur[3:-1, 2:-2])
           + _C2 * (cur[:-4, 2:-2] + cur[4:, 2:-2]))
    )
    out[2:-2, 2:-2] = d1[2:-2, 2:-2] * (
        2.0 * c - d2[2:-2, 2:-2] * prev[2:-2, 2:-2] + coef[2:-2, 2:-2] * lap
    )


def _step_adjoint_np(prev2, prev1, coef, d1, d2, inv_dx2, inv_dy2, out) -> None:
    # transpose of the forward step: the Laplacian acts on coef * lam.
    out[:] = 0.0
    w = coef * prev1
    c = w[2:-2, 2:-2]
    lap = (
        inv_dx2
        * (_C0 * c + _C1 * (w[2:-2, 1:-3] + w[2:-2, 3:-1])
           + _C2 * (w[2:-2, :-4] + w[2:-2, 4:]))
        + inv_dy2
        * (_C0 * c + _C1 * (w[1:-3, 2:-2] + w[3:-1, 2:-2])
           + _C2 * (w[:-4, 2:-2] + w[4:, 2:-2]))
    )
    out[2:-2, 2:-2] = d1[2:-2, 2:-2] * (
        2.0 * prev1[2:-2, 2:-2] - d2[2:-2, 2:-2] * prev2[2:-2, 2:-2] + lap
    )


def _accumulate_lap_product_np(u, lam, inv_dx2, inv_dy2, accum) -> None:
    c = u[2:-2, 2:-2]
    lap = (
        inv_dx2
        * (_C0 * c + _C1 * (u[2:-2, 1:-3] + u[2:-2, 3:-1])
           + _C2 * (u[2:-2, :-4] + u[2:-2, 4:]))
        + inv_dy2
        * (_C0 * c + _C1 * (u[1:-3, 2:-2] + u[3:-1, 2:-2])
           + _C2 * (u[:-4, 2:-2] + u[4:, 2:-2]))
    )
    accum[2:-2, 2:-2] += lam[2:-2, 2:-2] * lap


def _cover_mask_np(xc, yc, px, py, eps) -> np.ndarray:
    """Cells whose center lies strictly within eps of any point.

    Paints each point's disk bounding box; equivalent to the per-cell
    nearest-point test.
    """
    ny = yc.shape[0]
    nx = xc.shape[0]
    mask = np.zeros((ny, nx), dtype=np.uint8)
    if px.shape[0] == 0:
        return mask
    eps2 = eps * eps
    for x, y in zip(px, py):
        i0 = int(np.searchsorted(xc, x - eps, side="left"))
        i1 = int(np.searchsorted(xc, x + eps, side="right"))
        j0 = int(np.searchsorted(yc, y - eps, side="left"))
        j1 = int(np.searchsorted(yc, y + eps, side="right"))
        if i0 >= i1 or j0 >= j1:
            continue
        dx = xc[i0:i1] - x
        dy = yc[j0:j1] - y
        d2 = dy[:, None] ** 2 + dx[None, :] ** 2
        mask[j0:j1, i0:i1] |= (d2 < eps2).astype(np.uint8)
    return mask


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if USE_NUMBA:
    from numba import njit

    @njit(cache=True, nogil=True)
    def _step_forward_nb(prev, cur, coef, d1, d2, inv_dx2, inv_dy2, out):
        ny, nx = cur.shape
        for j in range(2, ny - 2):
            for i in range(2, nx - 2):
                lap = (
                    inv_dx2
                    * (_C0 * cur[j, i]
                       + _C1 * (cur[j, i - 1] + cur[j, i + 1])
                       + _C2 * (cur[j, i - 2] + cur[j, i + 2]))
                    + inv_dy2
                    * (_C0 * cur[j, i]
                       + _C1 * (cur[j - 1, i] + cur[j + 1, i])
                       + _C2 * (cur[j - 2, i] + cur[j + 2, i]))
                )
                out[j, i] = d1[j, i] * (
                    2.0 * cur[j, i] - d2[j, i] * prev[j, i] + coef[j, i] * lap
                )

    @njit(cache=True, nogil=True)
    def _step_adjoint_nb(prev2, prev1, coef, d1, d2, inv_dx2, inv_dy2, out):
        ny, nx = prev1.shape
        for j in range(2, ny - 2):
            for i in range(2, nx - 2):
                lap = (
                    inv_dx2
                    * (_C0 * coef[j, i] * prev1[j, i]
                       + _C1 * (coef[j, i - 1] * prev1[j, i - 1]
                                + coef[j, i + 1] * prev1[j, i + 1])
                       + _C2 * (coef[j, i - 2] * prev1[j, i - 2]
                                + coef[j, i + 2] * prev1[j, i + 2]))
                    + inv_dy2
                    * (_C0 * coef[j, i] * prev1[j, i]
                       + _C1 * (coef[j - 1, i] * prev1[j - 1, i]
                                + coef[j + 1, i] * prev1[j + 1, i])
                       + _C2 * (coef[j - 2, i] * prev1[j - 2, i]
                                + coef[j + 2, i] * prev1[j + 2, i]))
                )
                out[j, i] = d1[j, i] * (
                    2.0 * prev1[j, i] - d2[j, i] * prev2[j, i] + lap
                )

    @njit(cache=True, nogil=True)
    def _lap4_nb(u, inv_dx2, inv_dy2, out):
        ny, nx = u.shape
        for j in range(ny):
            for i in range(nx):
                out[j, i] = 0.0
        for j in range(2, ny - 2):
            for i in range(2, nx - 2):
                out[j, i] = (
                    inv_dx2
                    * (_C0 * u[j, i]
                       + _C1 * (u[j, i - 1] + u[j, i + 1])
                       + _C2 * (u[j, i - 2] + u[j, i + 2]))
                    + inv_dy2
                    * (_C0 * u[j, i]
                       + _C1 * (u[j - 1, i] + u[j + 1, i])
                       + _C2 * (u[j - 2, i] + u[j + 2, i]))
                )

    @njit(cache=True, nogil=True)
    def _accumulate_lap_product_nb(u, lam, inv_dx2, inv_dy2, accum):
        ny, nx = u.shape
        for j in range(2, ny - 2):
            for i in range(2, nx - 2):
                lap = (
                    inv_dx2
                    * (_C0 * u[j, i]
                       + _C1 * (u[j, i - 1] + u[j, i + 1])
                       + _C2 * (u[j, i - 2] + u[j, i + 2]))
                    + inv_dy2
                    * (_C0 * u[j, i]
                       + _C1 * (u[j - 1, i] + u[j + 1, i])
                       + _C2 * (u[j - 2, i] + u[j + 2, i]))
                )
                accum[j, i] += lam[j, i] * lap

    @njit(cache=True, nogil=True)
    def _cover_mask_hashed_nb(xc, yc, px, py, eps,
                              bucket_start, bucket_pts, nbx, nby, bx0, by0):
        ny = yc.shape[0]
        nx = xc.shape[0]
        mask = np.zeros((ny, nx), dtype=np.uint8)
        eps2 = eps * eps
        for j in range(ny):
            y = yc[j]
            by = int((y - by0) / eps)
            for i in range(nx):
                x = xc[i]
                bx = int((x - bx0) / eps)
                hit = False
                for bj in range(max(0, by - 1), min(nby, by + 2)):
                    if hit:
                        break
                    for bi in range(max(0, bx - 1), min(nbx, bx + 2)):
                        b = bj * nbx + bi
                        for q in range(bucket_start[b], bucket_start[b + 1]):
                            p = bucket_pts[q]
                            dx = px[p] - x
                            dy = py[p] - y
                            if dx * dx + dy * dy < eps2:
                                hit = True
                                break
                        if hit:
                            break
                if hit:
                    mask[j, i] = 1
        return mask

    def _cover_mask_nb(xc, yc, px, py, eps):
        ny = yc.shape[0]
        nx = xc.shape[0]
        if px.shape[0] == 0:
            return np.zeros((ny, nx), dtype=np.uint8)
        # hash points into buckets of side eps covering cells and points
        bx0 = min(xc[0], px.min()) - eps
        by0 = min(yc[0], py.min()) - eps
        bx1 = max(xc[-1], px.max()) + eps
        by1 = max(yc[-1], py.max()) + eps
        nbx = max(1, int(np.ceil((bx1 - bx0) / eps)))
        nby = max(1, int(np.ceil((by1 - by0) / eps)))
        bi = np.minimum(((px - bx0) / eps).astype(np.int64), nbx - 1)
        bj = np.minimum(((py - by0) / eps).astype(np.int64), nby - 1)
        bucket = bj * nbx + bi
        order = np.argsort(bucket, kind="stable")
        counts = np.bincount(bucket, minlength=nbx * nby)
        start = np.zeros(nbx * nby + 1, dtype=np.int64)
        np.cumsum(counts, out=start[1:])
        return _cover_mask_hashed_nb(
            xc, yc, px, py, eps, start, order, nbx, nby, bx0, by0
        )


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if USE_NUMBA:
    step_forward = _step_forward_nb
    step_adjoint = _step_adjoint_nb
    lap4 = _lap4_nb
    accumulate_lap_product = _accumulate_lap_product_nb
    cover_mask = _cover_mask_nb
else:
    step_forward = _step_forward_np
    step_adjoint = _step_adjoint_np
    lap4 = _lap4_np
    accumulate_lap_product = _accumulate_lap_product_np
    cover_mask = _cover_mask_np
