"""Uniform 2D grids: fields, mollification, resampling and GRD1 file I/O.

Fields live at cell centers of a uniform rectilinear grid. Values are stored
as a flat float64 array of length nx*ny, row-major with x varying fastest
(entry j*nx + i is cell column i, row j). Arrays are marked read-only;
fields are immutable values safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve

__all__ = [
    "GridGeometry",
    "ScalarField2D",
    "MollifierSpec",
    "mollify",
    "mollify_transpose",
    "resample",
    "read_field",
    "write_field",
    "bilinear_sample",
    "bilinear_stencil",
]

_MAGIC = "GRD1"


@dataclass(frozen=True)
class GridGeometry:
    """Cell counts, cell sizes (meters) and origin of a uniform grid.

    The physical extent is (nx*dx, ny*dy); cell centers sit at
    x0 + (i + 0.5)*dx, y0 + (j + 0.5)*dy.
    """

    nx: int
    ny: int
    dx: float
    dy: float
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"cell counts must be >= 1, got nx={self.nx}, ny={self.ny}")
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError(f"cell sizes must be > 0, got dx={self.dx}, dy={self.dy}")

    @property
    def extent(self) -> tuple[float, float]:
        return (self.nx * self.dx, self.ny * self.dy)

    @property
    def shape(self) -> tuple[int, int]:
        """(ny, nx) — numpy layout of the 2D view."""
        return (self.ny, self.nx)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def x_centers(self) -> np.ndarray:
        return self.x0 + (np.arange(self.nx) + 0.5) * self.dx

    def y_centers(self) -> np.ndarray:
        return self.y0 + (np.arange(self.ny) + 0.5) * self.dy


@dataclass(frozen=True)
class ScalarField2D:
    """Real-valued field on a :class:`GridGeometry`."""

    geometry: GridGeometry
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size != self.geometry.n_cells:
            raise ValueError(
                f"length mismatch: {v.size} values for "
                f"{self.geometry.nx}x{self.geometry.ny} grid"
            )
        if not np.all(np.isfinite(v)):
            i = int(np.flatnonzero(~np.isfinite(v))[0])
            raise ValueError(f"non-finite value at index {i}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_grid(cls, geometry: GridGeometry, grid: np.ndarray) -> "ScalarField2D":
        if grid.shape != geometry.shape:
            raise ValueError(f"grid shape {grid.shape} != geometry shape {geometry.shape}")
        return cls(geometry, np.asarray(grid, dtype=np.float64).reshape(-1))

    @classmethod
    def constant(cls, geometry: GridGeometry, value: float) -> "ScalarField2D":
        return cls(geometry, np.full(geometry.n_cells, float(value)))

    def as_grid(self) -> np.ndarray:
        """Read-only (ny, nx) view."""
        return self.values.reshape(self.geometry.shape)


@dataclass(frozen=True)
class MollifierSpec:
    """Truncated Gaussian smoothing kernel in grid-cell units.

    sigma_cells = 0 selects the identity. The kernel support is
    ceil(truncation_radius * sigma_cells) cells per axis and the discrete
    weights are normalized to unit sum; near boundaries the weights are
    renormalized over the in-domain support.
    """

    sigma_cells: float
    truncation_radius: float = 4.0

    def __post_init__(self) -> None:
        if self.sigma_cells < 0:
            raise ValueError(f"sigma_cells must be >= 0, got {self.sigma_cells}")
        if self.truncation_radius <= 0:
            raise ValueError(
                f"truncation_radius must be > 0, got {self.truncation_radius}"
            )

    @property
    def is_identity(self) -> bool:
        return self.sigma_cells == 0.0

    def kernel_1d(self) -> np.ndarray:
        """Unnormalized 1D weights on offsets -R..R."""
        r = math.ceil(self.truncation_radius * self.sigma_cells)
        offsets = np.arange(-r, r + 1, dtype=np.float64)
        return np.exp(-0.5 * (offsets / self.sigma_cells) ** 2)


def _kernel_2d(spec: MollifierSpec) -> np.ndarray:
    w = spec.kernel_1d()
    k = np.outer(w, w)
    return k / k.sum()


def mollify(field: ScalarField2D, spec: MollifierSpec) -> ScalarField2D:
    """Smooth a field with a normalized, truncated Gaussian kernel.

    The kernel sums to one, so constants are fixed points; near the boundary
    the weights are renormalized over the in-domain support.
    """
    if spec.is_identity:
        return field
    kern = _kernel_2d(spec)
    g = field.as_grid()
    num = convolve(g, kern, mode="same")
    den = convolve(np.ones_like(g), kern, mode="same")
    return ScalarField2D.from_grid(field.geometry, num / den)


def mollify_transpose(field: ScalarField2D, spec: MollifierSpec) -> ScalarField2D:
    """Exact transpose of :func:`mollify` on the same geometry.

    Away from boundaries the mollifier is self-adjoint and this coincides
    with :func:`mollify`; the boundary renormalization makes the general
    transpose conv(g / den) rather than conv(g) / den.
    """
    if spec.is_identity:
        return field
    kern = _kernel_2d(spec)
    g = field.as_grid()
    den = convolve(np.ones_like(g), kern, mode="same")
    return ScalarField2D.from_grid(field.geometry, convolve(g / den, kern, mode="same"))


def _is_integer_multiple(a: int, b: int) -> bool:
    return b >= 1 and a % b == 0


def resample(field: ScalarField2D, target: GridGeometry) -> ScalarField2D:
    """Transfer a field to a new grid covering the same physical extent.

    Integer-ratio coarsening averages cell blocks (the restriction consistent
    with locally averaged effective models); anything else interpolates
    bilinearly at the target cell centers.
    """
    src = field.geometry
    ex_s, ey_s = src.extent
    ex_t, ey_t = target.extent
    tol_x, tol_y = target.dx, target.dy
    if (
        abs(ex_s - ex_t) > tol_x
        or abs(ey_s - ey_t) > tol_y
        or abs(src.x0 - target.x0) > tol_x
        or abs(src.y0 - target.y0) > tol_y
    ):
        raise ValueError(
            "extent mismatch: source covers "
            f"[{src.x0}, {src.x0 + ex_s}]x[{src.y0}, {src.y0 + ey_s}], target "
            f"[{target.x0}, {target.x0 + ex_t}]x[{target.y0}, {target.y0 + ey_t}]"
        )

    g = field.as_grid()
    if _is_integer_multiple(src.nx, target.nx) and _is_integer_multiple(src.ny, target.ny):
        rx = src.nx // target.nx
        ry = src.ny // target.ny
        blocks = g.reshape(target.ny, ry, target.nx, rx)
        return ScalarField2D.from_grid(target, blocks.mean(axis=(1, 3)))

    xt = target.x_centers()
    yt = target.y_centers()
    out = _bilinear_grid(g, src, xt, yt)
    return ScalarField2D.from_grid(target, out)


def _bilinear_grid(g: np.ndarray, geom: GridGeometry, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of a (ny, nx) grid at the tensor product xs x ys."""
    u = np.clip((xs - geom.x0) / geom.dx - 0.5, 0.0, geom.nx - 1.0)
    v = np.clip((ys - geom.y0) / geom.dy - 0.5, 0.0, geom.ny - 1.0)
    i0 = np.minimum(u.astype(np.int64), geom.nx - 2) if geom.nx > 1 else np.zeros_like(u, dtype=np.int64)
    j0 = np.minimum(v.astype(np.int64), geom.ny - 2) if geom.ny > 1 else np.zeros_like(v, dtype=np.int64)
    fu = u - i0
    fv = v - j0
    i1 = np.minimum(i0 + 1, geom.nx - 1)
    j1 = np.minimum(j0 + 1, geom.ny - 1)
    fv_col = fv[:, None]
    fu_row = fu[None, :]
    # difference-form lerp reproduces constants exactly in floating point
    g00 = g[np.ix_(j0, i0)]
    g01 = g[np.ix_(j0, i1)]
    g10 = g[np.ix_(j1, i0)]
    g11 = g[np.ix_(j1, i1)]
    top = g00 + fu_row * (g01 - g00)
    bottom = g10 + fu_row * (g11 - g10)
    return top + fv_col * (bottom - top)


def bilinear_sample(field_grid: np.ndarray, geom: GridGeometry, x: float, y: float) -> float:
    """Bilinearly interpolated value at one physical point."""
    (j0, i0), w = bilinear_stencil(geom, x, y)
    return float(
        w[0, 0] * field_grid[j0, i0]
        + w[0, 1] * field_grid[j0, i0 + 1]
        + w[1, 0] * field_grid[j0 + 1, i0]
        + w[1, 1] * field_grid[j0 + 1, i0 + 1]
    )


def bilinear_stencil(geom: GridGeometry, x: float, y: float) -> tuple[tuple[int, int], np.ndarray]:
    """4-point stencil ((j0, i0) corner, 2x2 weights) for a physical point.

    Points within half a cell of the boundary are clamped onto the outermost
    cell-center square.
    """
    if geom.nx < 2 or geom.ny < 2:
        raise ValueError("bilinear stencil needs at least a 2x2 grid")
    u = np.clip((x - geom.x0) / geom.dx - 0.5, 0.0, geom.nx - 1.0)
    v = np.clip((y - geom.y0) / geom.dy - 0.5, 0.0, geom.ny - 1.0)
    i0 = min(int(u), geom.nx - 2)
    j0 = min(int(v), geom.ny - 2)
    fu = u - i0
    fv = v - j0
    w = np.array([[(1 - fv) * (1 - fu), (1 - fv) * fu], [fv * (1 - fu), fv * fu]])
    return (j0, i0), w


# ---------------------------------------------------------------------------
# GRD1 file format: 7 text header lines, then little-endian float64 payload
# ---------------------------------------------------------------------------

def write_field(field: ScalarField2D, path) -> None:
    g = field.geometry
    header = "\n".join(
        [_MAGIC, str(g.nx), str(g.ny), repr(g.dx), repr(g.dy), repr(g.x0), repr(g.y0)]
    ) + "\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(field.values.astype("<f8", copy=False).tobytes())


def read_field(path) -> ScalarField2D:
    with open(path, "rb") as f:
        lines = [f.readline() for _ in range(7)]
        payload = f.read()
    if not lines[-1]:
        raise ValueError(f"{path}: malformed header, expected 7 lines")
    try:
        text = [ln.decode("ascii").strip() for ln in lines]
    except UnicodeDecodeError as e:
        raise ValueError(f"{path}: malformed header: {e}") from None
    if text[0] != _MAGIC:
        raise ValueError(f"{path}: malformed header, bad magic {text[0]!r}")
    try:
        nx, ny = int(text[1]), int(text[2])
        dx, dy, x0, y0 = (float(t) for t in text[3:7])
    except ValueError:
        raise ValueError(f"{path}: malformed header, non-numeric geometry") from None
    geom = GridGeometry(nx=nx, ny=ny, dx=dx, dy=dy, x0=x0, y0=y0)
    if len(payload) != 8 * geom.n_cells:
        raise ValueError(
            f"{path}: length mismatch, header declares {geom.n_cells} values, "
            f"payload holds {len(payload) // 8}"
        )
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ValueError(f"{path}: non-finite value at index {int(bad[0])}")
    return ScalarField2D(geom, values)
