"""Random sediment media: Poisson clouds, rasterization and effective models.

A nonnegative density rho drives an inhomogeneous Poisson point process of
particle centers at heterogeneity scale eps (mean count over a region A is
(1/(pi eps^2)) * integral of rho over A). The union of eps-disks around the
centers is the sediment phase; the macroscopic arrival probability is
p = 1 - exp(-rho) and the effective slowness-squared of the two-phase medium
is m = p/c1^2 + (1-p)/c0^2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve

from . import kernels
from .grid import GridGeometry, ScalarField2D

__all__ = [
    "MediumConstants",
    "DensityField",
    "ProbabilityField",
    "PoissonCloud",
    "ProbabilityRecovery",
    "sample_cloud",
    "cover_mask",
    "rasterize_velocity",
    "coverage_probability",
    "probability_from_density",
    "density_from_probability",
    "effective_slowness_squared",
    "effective_velocity",
    "probability_from_slowness",
    "gaussian_profile",
    "chiu_profile",
    "chiu_curve",
    "write_cloud",
    "read_cloud",
]

_P_MAX_ALLOWED = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class MediumConstants:
    """P-wave speeds of water (c0) and sediment (c1), m/s."""

    c0: float = 1500.0
    c1: float = 3000.0

    def __post_init__(self) -> None:
        if self.c0 <= 0 or self.c1 <= 0:
            raise ValueError(f"speeds must be > 0, got c0={self.c0}, c1={self.c1}")
        if self.c0 == self.c1:
            raise ValueError("c0 and c1 must differ")

    @property
    def m_water(self) -> float:
        return 1.0 / self.c0**2

    @property
    def m_sediment(self) -> float:
        return 1.0 / self.c1**2


@dataclass(frozen=True)
class DensityField:
    """Nonnegative Poisson density rho; optionally zero on a boundary margin."""

    field: ScalarField2D
    boundary_margin: float = 0.0

    def __post_init__(self) -> None:
        v = self.field.values
        if np.any(v < 0):
            raise ValueError("density must be nonnegative everywhere")
        if self.boundary_margin > 0:
            g = self.field.geometry
            xs = g.x_centers()
            ys = g.y_centers()
            inner_x = (xs >= g.x0 + self.boundary_margin) & (xs <= g.x0 + g.extent[0] - self.boundary_margin)
            inner_y = (ys >= g.y0 + self.boundary_margin) & (ys <= g.y0 + g.extent[1] - self.boundary_margin)
            outside = ~(inner_y[:, None] & inner_x[None, :])
            if np.any(self.field.as_grid()[outside] != 0.0):
                raise ValueError(
                    f"density must vanish within {self.boundary_margin} m of the boundary"
                )

    @property
    def geometry(self) -> GridGeometry:
        return self.field.geometry


@dataclass(frozen=True)
class ProbabilityField:
    """Pointwise sediment probability, 0 <= p < 1."""

    field: ScalarField2D

    def __post_init__(self) -> None:
        v = self.field.values
        if np.any(v < 0) or np.any(v >= 1):
            raise ValueError("probabilities must satisfy 0 <= p < 1")

    @property
    def geometry(self) -> GridGeometry:
        return self.field.geometry


@dataclass(frozen=True)
class PoissonCloud:
    """One realization of particle centers of radius epsilon."""

    epsilon: float
    centers: np.ndarray = field(repr=False)  # (n, 2) meters
    seed: int = 0
    density_ref: str = ""

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        c = np.ascontiguousarray(self.centers, dtype=np.float64).reshape(-1, 2)
        if c.size and not np.all(np.isfinite(c)):
            raise ValueError("cloud centers must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    @property
    def n_points(self) -> int:
        return self.centers.shape[0]


def sample_cloud(density: DensityField, epsilon: float, seed: int,
                 density_ref: str = "") -> PoissonCloud:
    """Draw one Poisson cloud by thinning a homogeneous proposal process.

    A homogeneous process at rate max(rho)/(pi eps^2) over the density grid's
    extent is thinned with probability rho(x)/max(rho), rho interpolated
    bilinearly. Deterministic given the seed.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    geom = density.geometry
    rho = density.field.as_grid()
    rho_max = float(rho.max())
    rng = np.random.default_rng(seed)
    if rho_max == 0.0:
        return PoissonCloud(epsilon, np.empty((0, 2)), seed, density_ref)
    lx, ly = geom.extent
    rate = rho_max / (math.pi * epsilon**2)
    n = rng.poisson(rate * lx * ly)
    pts = rng.uniform(size=(n, 2))
    pts[:, 0] = geom.x0 + pts[:, 0] * lx
    pts[:, 1] = geom.y0 + pts[:, 1] * ly
    if n:
        rho_at = _bilinear_grid_points(rho, geom, pts)
        keep = rng.uniform(size=n) < rho_at / rho_max
        pts = pts[keep]
    return PoissonCloud(epsilon, pts, seed, density_ref)


def _bilinear_grid_points(g: np.ndarray, geom: GridGeometry, pts: np.ndarray) -> np.ndarray:
    """Bilinear values of a (ny, nx) grid at scattered points (n, 2)."""
    u = np.clip((pts[:, 0] - geom.x0) / geom.dx - 0.5, 0.0, geom.nx - 1.0)
    v = np.clip((pts[:, 1] - geom.y0) / geom.dy - 0.5, 0.0, geom.ny - 1.0)
    i0 = np.minimum(u.astype(np.int64), max(geom.nx - 2, 0))
    j0 = np.minimum(v.astype(np.int64), max(geom.ny - 2, 0))
    fu = u - i0
    fv = v - j0
    i1 = np.minimum(i0 + 1, geom.nx - 1)
    j1 = np.minimum(j0 + 1, geom.ny - 1)
    return (
        g[j0, i0] * (1 - fv) * (1 - fu)
        + g[j0, i1] * (1 - fv) * fu
        + g[j1, i0] * fv * (1 - fu)
        + g[j1, i1] * fv * fu
    )


def cover_mask(cloud: PoissonCloud, geometry: GridGeometry) -> np.ndarray:
    """uint8 (ny, nx) mask of cells whose center is within epsilon of a center."""
    return kernels.cover_mask(
        geometry.x_centers(),
        geometry.y_centers(),
        np.ascontiguousarray(cloud.centers[:, 0]),
        np.ascontiguousarray(cloud.centers[:, 1]),
        float(cloud.epsilon),
    )


def rasterize_velocity(cloud: PoissonCloud, constants: MediumConstants,
                       geometry: GridGeometry) -> ScalarField2D:
    """Binary velocity field: c1 inside the particle union (open disks), c0 outside."""
    if min(geometry.dx, geometry.dy) > cloud.epsilon / 2:
        warnings.warn(
            f"cell size {min(geometry.dx, geometry.dy):g} m exceeds epsilon/2 = "
            f"{cloud.epsilon / 2:g} m; particles are under-resolved",
            stacklevel=2,
        )
    mask = cover_mask(cloud, geometry)
    vel = np.where(mask.astype(bool), constants.c1, constants.c0)
    return ScalarField2D.from_grid(geometry, vel)


def coverage_probability(density: DensityField, epsilon: float) -> ScalarField2D:
    """Finite-scale coverage probability p_eps = 1 - exp(-ball average of rho).

    The ball average uses midpoint quadrature over cell centers within
    distance epsilon, renormalized over the in-domain part of the ball.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    geom = density.geometry
    ri = int(epsilon / geom.dx)
    rj = int(epsilon / geom.dy)
    ox = np.arange(-ri, ri + 1) * geom.dx
    oy = np.arange(-rj, rj + 1) * geom.dy
    footprint = (oy[:, None] ** 2 + ox[None, :] ** 2) <= epsilon**2
    fp = footprint.astype(np.float64)
    rho = density.field.as_grid()
    num = convolve(rho, fp, mode="same")
    den = convolve(np.ones_like(rho), fp, mode="same")
    avg = num / den
    return ScalarField2D.from_grid(geom, -np.expm1(-avg))


def probability_from_density(density: DensityField) -> ProbabilityField:
    """Macroscopic limit p = 1 - exp(-rho)."""
    p = -np.expm1(-density.field.values)
    return ProbabilityField(ScalarField2D(density.geometry, p))


def density_from_probability(prob: ProbabilityField) -> DensityField:
    """Exact inverse rho = -ln(1 - p); requires p < 1 strictly."""
    rho = -np.log1p(-prob.field.values)
    return DensityField(ScalarField2D(prob.geometry, rho))


def effective_slowness_squared(prob: ProbabilityField,
                               constants: MediumConstants) -> ScalarField2D:
    """Homogenized slowness-squared m = p/c1^2 + (1-p)/c0^2 (s^2/m^2)."""
    p = prob.field.values
    m = p * constants.m_sediment + (1.0 - p) * constants.m_water
    return ScalarField2D(prob.geometry, m)


def effective_velocity(m: ScalarField2D) -> ScalarField2D:
    """Companion map c = m^(-1/2)."""
    if np.any(m.values <= 0):
        raise ValueError("slowness-squared must be positive")
    return ScalarField2D(m.geometry, 1.0 / np.sqrt(m.values))


@dataclass(frozen=True)
class ProbabilityRecovery:
    """Recovered probability plus the count of cells clamped into [0, 1)."""

    prob: ProbabilityField
    clamped: int


def probability_from_slowness(m: ScalarField2D,
                              constants: MediumConstants) -> ProbabilityRecovery:
    """Invert the effective model: p = (m - 1/c0^2) / (1/c1^2 - 1/c0^2).

    Inverted models may overshoot the physical range slightly; values are
    clamped into [0, 1) and the clamp count reported.
    """
    raw = (m.values - constants.m_water) / (constants.m_sediment - constants.m_water)
    clamped = int(np.count_nonzero((raw < 0.0) | (raw > _P_MAX_ALLOWED)))
    p = np.clip(raw, 0.0, _P_MAX_ALLOWED)
    return ProbabilityRecovery(ProbabilityField(ScalarField2D(m.geometry, p)), clamped)


def gaussian_profile(p_max: float, center: tuple[float, float], sigma: float,
                     geometry: GridGeometry) -> ProbabilityField:
    """Isotropic Gaussian probability bump p = p_max exp(-|x-x0|^2 / (2 sigma^2))."""
    if not 0 <= p_max < 1:
        raise ValueError(f"p_max must lie in [0, 1), got {p_max}")
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    xs = geometry.x_centers() - center[0]
    ys = geometry.y_centers() - center[1]
    r2 = ys[:, None] ** 2 + xs[None, :] ** 2
    return ProbabilityField(
        ScalarField2D.from_grid(geometry, p_max * np.exp(-r2 / (2.0 * sigma**2)))
    )


def chiu_curve(x2: np.ndarray, p_max: float, big_m: float, lam: float) -> np.ndarray:
    """Depth profile p(x2) = p_max * (x2 / (e^M - x2 (e^M - 1)))^(lambda G).

    x2 is the depth normalized to [0, 1]; p = 0 at the surface (x2 = 0) and
    p = p_max at the bed (x2 = 1). G = (1 - e^-M)/(M phi) with
    phi = e^M/(e^M - 1) - 1/M.
    """
    if big_m <= 0 or lam <= 0:
        raise ValueError(f"M and lambda must be > 0, got M={big_m}, lambda={lam}")
    x2 = np.asarray(x2, dtype=np.float64)
    if np.any(x2 < 0) or np.any(x2 > 1):
        raise ValueError("normalized depth must lie in [0, 1]")
    em = math.exp(big_m)
    phi = em / (em - 1.0) - 1.0 / big_m
    g = (1.0 - math.exp(-big_m)) / (big_m * phi)
    inner = x2 / (em - x2 * (em - 1.0))
    return p_max * inner ** (lam * g)


def chiu_profile(p_max: float, big_m: float, lam: float,
                 geometry: GridGeometry) -> ProbabilityField:
    """Depth-only concentration profile; the bed (x2 = 1) is the bottom edge y = y0."""
    if not 0 <= p_max < 1:
        raise ValueError(f"p_max must lie in [0, 1), got {p_max}")
    ly = geometry.extent[1]
    x2 = 1.0 - (geometry.y_centers() - geometry.y0) / ly
    col = chiu_curve(x2, p_max, big_m, lam)
    return ProbabilityField(
        ScalarField2D.from_grid(geometry, np.tile(col[:, None], (1, geometry.nx)))
    )


# ---------------------------------------------------------------------------
# cloud CSV serialization
# ---------------------------------------------------------------------------

def write_cloud(cloud: PoissonCloud, path) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(f"# epsilon,{cloud.epsilon!r}\n")
        f.write(f"# seed,{cloud.seed}\n")
        f.write(f"# density_ref,{cloud.density_ref}\n")
        f.write("x,y\n")
        for x, y in cloud.centers:
            f.write(f"{x:.17g},{y:.17g}\n")


def read_cloud(path) -> PoissonCloud:
    epsilon = None
    seed = 0
    density_ref = ""
    pts: list[tuple[float, float]] = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(",")
                key = key.strip()
                if key == "epsilon":
                    epsilon = float(val)
                elif key == "seed":
                    seed = int(val)
                elif key == "density_ref":
                    density_ref = val
                continue
            if line == "x,y":
                continue
            sx, _, sy = line.partition(",")
            pts.append((float(sx), float(sy)))
    if epsilon is None:
        raise ValueError(f"{path}: missing epsilon header")
    centers = np.array(pts, dtype=np.float64).reshape(-1, 2)
    return PoissonCloud(epsilon, centers, seed, density_ref)
