"""Time-domain 2D acoustic solver for m(x) u_tt = lap(u) + f.

Explicit leapfrog stepping (2nd order in time, 4th order in space) on a grid
padded with sponge absorbing layers that emulate free space. Point sources
carry a Ricker time signature and are injected bilinearly; receivers sample
bilinearly at the internal CFL time step and records are decimated to the
recording rate through a zero-phase anti-alias low-pass.

:class:`WaveOperator` exposes the discrete forward map together with its
exact adjoint so the inversion gradient matches finite differences to
round-off; :func:`simulate` is the one-shot convenience wrapper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from . import kernels
from .grid import GridGeometry, ScalarField2D, bilinear_stencil

__all__ = [
    "RickerSource",
    "AcquisitionGeometry",
    "ShotRecord",
    "SolverConfig",
    "WaveOperator",
    "ricker",
    "simulate",
    "forward_heterogeneous",
    "forward_effective",
    "average_records",
    "boundary_receivers",
    "bottom_sources",
    "write_record",
    "read_record",
    "first_arrival_sample",
]


def ricker(t: np.ndarray, f0: float, t0: float, amplitude: float = 1.0) -> np.ndarray:
    """Ricker wavelet r(t) = (1 - 2 pi^2 f0^2 (t-t0)^2) exp(-pi^2 f0^2 (t-t0)^2)."""
    a = (math.pi * f0) ** 2 * (np.asarray(t, dtype=np.float64) - t0) ** 2
    return amplitude * (1.0 - 2.0 * a) * np.exp(-a)


@dataclass(frozen=True)
class RickerSource:
    """Point source with Ricker signature; t0 defaults to 1.2/f0 so the
    wavelet is effectively zero at t = 0 (zero initial conditions)."""

    position: tuple[float, float]
    f0: float
    t0: float | None = None
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if self.f0 <= 0:
            raise ValueError(f"f0 must be > 0, got {self.f0}")
        if self.t0 is None:
            object.__setattr__(self, "t0", 1.2 / self.f0)
        if self.t0 < 1.0 / self.f0:
            raise ValueError(f"t0 must be >= 1/f0 = {1.0 / self.f0:g}, got {self.t0}")


@dataclass(frozen=True)
class AcquisitionGeometry:
    """Sources, receiver positions and the recording clock."""

    sources: tuple[RickerSource, ...]
    receivers: np.ndarray = field(repr=False)  # (nr, 2) meters
    record_dt: float = 20e-6
    record_T: float = 1e-3

    def __post_init__(self) -> None:
        object.__setattr__(self, "sources", tuple(self.sources))
        r = np.ascontiguousarray(self.receivers, dtype=np.float64).reshape(-1, 2)
        r.setflags(write=False)
        object.__setattr__(self, "receivers", r)
        if self.record_dt <= 0 or self.record_T <= 0:
            raise ValueError("record_dt and record_T must be > 0")
        steps = self.record_T / self.record_dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ValueError(
                f"record_dt {self.record_dt:g} must divide record_T {self.record_T:g}"
            )

    @property
    def n_receivers(self) -> int:
        return self.receivers.shape[0]

    @property
    def nt(self) -> int:
        return int(round(self.record_T / self.record_dt)) + 1

    def times(self) -> np.ndarray:
        return np.arange(self.nt) * self.record_dt


@dataclass(frozen=True)
class ShotRecord:
    """Receiver traces for one source firing: samples[it, ir]."""

    source_id: str
    receiver_positions: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)
    dt: float = 20e-6

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"record dt must be > 0, got {self.dt}")
        rp = np.ascontiguousarray(self.receiver_positions, dtype=np.float64).reshape(-1, 2)
        rp.setflags(write=False)
        s = np.ascontiguousarray(self.samples, dtype=np.float64)
        if s.ndim != 2 or s.shape[1] != rp.shape[0]:
            raise ValueError(
                f"samples shape {s.shape} inconsistent with {rp.shape[0]} receivers"
            )
        if not np.all(np.isfinite(s)):
            raise ValueError("record contains non-finite samples")
        s.setflags(write=False)
        object.__setattr__(self, "receiver_positions", rp)
        object.__setattr__(self, "samples", s)

    @property
    def nt(self) -> int:
        return self.samples.shape[0]

    @property
    def n_receivers(self) -> int:
        return self.samples.shape[1]

    def times(self) -> np.ndarray:
        return np.arange(self.nt) * self.dt


@dataclass(frozen=True)
class SolverConfig:
    """Stability factor and absorbing-layer controls.

    The internal step is dt = cfl_factor * min(dx, dy) / (c_max * sqrt(2)).
    The 4th-order stencil is von Neumann stable only up to an effective
    factor of sqrt(3/8)*sqrt(2) ~ 0.866 in this normalization, hence the
    0.8 default; factors above 0.86 are rejected.

    absorber_width_cells = None sizes the sponge to span two dominant
    wavelengths of the slowest (water) speed. c_max_hint pins the CFL speed
    so the internal dt does not depend on the current model (used by the
    inversion, where m changes per iterate).
    """

    cfl_factor: float = 0.8
    absorber_width_cells: int | None = None
    absorber_kind: str = "sponge"
    c_max_hint: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.cfl_factor <= 0.86:
            raise ValueError(
                f"cfl_factor must lie in (0, 0.86] for the 4th-order stencil, "
                f"got {self.cfl_factor}"
            )
        if self.absorber_width_cells is not None and self.absorber_width_cells < 4:
            raise ValueError("absorber needs at least 4 cells")
        if self.absorber_kind != "sponge":
            raise ValueError(f"unknown absorber kind {self.absorber_kind!r}")


def _antialias_kernel(stride: int, dt: float, record_dt: float) -> np.ndarray:
    """Zero-phase windowed-sinc low-pass, cutoff 0.45/record_dt, unit DC gain."""
    half = 4 * stride
    n = np.arange(-half, half + 1, dtype=np.float64)
    fc = 0.45 / record_dt
    h = 2.0 * fc * dt * np.sinc(2.0 * fc * dt * n)
    h *= np.hamming(2 * half + 1)
    return h / h.sum()


class WaveOperator:
    """Discrete wave-equation forward map for a fixed geometry/acquisition.

    The operator owns everything that must not change across model updates:
    padded grid, internal time step, sponge profile, source signatures and
    the receiver sampling/decimation pipeline.
    """

    #: sponge reflection design target for the quadratic damping ramp
    _R_TARGET = 1e-4

    def __init__(self, geometry: GridGeometry, acq: AcquisitionGeometry,
                 cfg: SolverConfig, *, c_max: float, c_slow: float | None = None):
        if c_max <= 0:
            raise ValueError("c_max must be > 0")
        lx, ly = geometry.extent
        for kind, pts in (("source", [s.position for s in acq.sources]),
                          ("receiver", acq.receivers)):
            for x, y in pts:
                if not (geometry.x0 <= x <= geometry.x0 + lx
                        and geometry.y0 <= y <= geometry.y0 + ly):
                    raise ValueError(
                        f"{kind} at ({x}, {y}) lies outside the grid "
                        f"[{geometry.x0}, {geometry.x0 + lx}] x "
                        f"[{geometry.y0}, {geometry.y0 + ly}]"
                    )
        self.geometry = geometry
        self.acq = acq
        self.cfg = cfg
        self.c_max = float(c_max)
        c_slow = float(c_slow) if c_slow is not None else self.c_max

        h_min = min(geometry.dx, geometry.dy)
        dt_cfl = cfg.cfl_factor * h_min / (self.c_max * math.sqrt(2.0))
        self.stride = max(1, math.ceil(acq.record_dt / dt_cfl - 1e-9))
        self.dt = acq.record_dt / self.stride
        self.n_steps = (acq.nt - 1) * self.stride

        f0_min = min(s.f0 for s in acq.sources)
        if cfg.absorber_width_cells is not None:
            self.width = cfg.absorber_width_cells
        else:
            lam_dom = c_slow / f0_min
            self.width = math.ceil(2.0 * lam_dom / h_min)
        w = self.width
        self.padded = GridGeometry(
            nx=geometry.nx + 2 * w,
            ny=geometry.ny + 2 * w,
            dx=geometry.dx,
            dy=geometry.dy,
            x0=geometry.x0 - w * geometry.dx,
            y0=geometry.y0 - w * geometry.dy,
        )
        self.inv_dx2 = 1.0 / geometry.dx**2
        self.inv_dy2 = 1.0 / geometry.dy**2

        # quadratic damping ramp sigma(xi) = sigma_max * xi^2 into the sponge
        sigma_max = 3.0 * self.c_max * math.log(1.0 / self._R_TARGET) / (2.0 * w * h_min)
        ix = np.arange(self.padded.nx)
        iy = np.arange(self.padded.ny)
        depth_x = np.maximum(np.maximum(w - ix, ix - (w + geometry.nx - 1)), 0)
        depth_y = np.maximum(np.maximum(w - iy, iy - (w + geometry.ny - 1)), 0)
        xi = np.maximum(depth_y[:, None], depth_x[None, :]) / w
        sigma = sigma_max * xi**2
        # cap keeps 1 - sigma dt positive on very coarse/large-dt grids at the
        # price of weaker absorption there
        sdt = np.minimum(sigma * self.dt, 0.9)
        self.d1 = np.ascontiguousarray(1.0 / (1.0 + sdt))
        self.d2 = np.ascontiguousarray(1.0 - sdt)

        # bilinear source injection (scaled by cell area) and signatures
        self._src_cells: list[np.ndarray] = []
        self._src_weights: list[np.ndarray] = []
        self._src_amps: list[np.ndarray] = []
        t_int = np.arange(self.n_steps + 1) * self.dt
        for s in acq.sources:
            (j0, i0), wts = bilinear_stencil(self.padded, *s.position)
            cells = np.array([[j0, i0], [j0, i0 + 1], [j0 + 1, i0], [j0 + 1, i0 + 1]])
            self._src_cells.append(cells)
            self._src_weights.append(
                np.array([wts[0, 0], wts[0, 1], wts[1, 0], wts[1, 1]])
                / geometry.cell_area
            )
            self._src_amps.append(ricker(t_int, s.f0, s.t0, s.amplitude))

        # receiver sampling matrix rows (4 cells each)
        nr = acq.n_receivers
        self._rec_j = np.empty((nr, 4), dtype=np.int64)
        self._rec_i = np.empty((nr, 4), dtype=np.int64)
        self._rec_w = np.empty((nr, 4))
        for r, (x, y) in enumerate(acq.receivers):
            (j0, i0), wts = bilinear_stencil(self.padded, x, y)
            self._rec_j[r] = (j0, j0, j0 + 1, j0 + 1)
            self._rec_i[r] = (i0, i0 + 1, i0, i0 + 1)
            self._rec_w[r] = (wts[0, 0], wts[0, 1], wts[1, 0], wts[1, 1])

        self._aa = _antialias_kernel(self.stride, self.dt, acq.record_dt) \
            if self.stride > 1 else None

    # -- model handling ----------------------------------------------------

    def _coef(self, m: ScalarField2D) -> np.ndarray:
        if m.geometry != self.geometry:
            raise ValueError("model geometry does not match the operator")
        vals = m.values
        if np.any(vals <= 0):
            raise ValueError("slowness-squared must be strictly positive")
        c_model = 1.0 / math.sqrt(float(vals.min()))
        if c_model > self.c_max * (1 + 1e-12):
            raise ValueError(
                f"model speed {c_model:g} exceeds the CFL speed {self.c_max:g}"
            )
        m_pad = np.pad(m.as_grid(), self.width, mode="edge")
        return np.ascontiguousarray(self.dt**2 / m_pad), m_pad

    def _sample_receivers(self, u: np.ndarray) -> np.ndarray:
        return (u[self._rec_j, self._rec_i] * self._rec_w).sum(axis=1)

    def _decimate(self, traces: np.ndarray) -> np.ndarray:
        """Anti-aliased decimation of (n_steps+1, nr) internal traces."""
        if self.stride == 1:
            return traces.copy()
        filt = correlate1d(traces, self._aa, axis=0, mode="constant", cval=0.0)
        return filt[:: self.stride]

    def _lift_adjoint_record(self, adj: np.ndarray) -> np.ndarray:
        """Exact transpose of :meth:`_decimate` (zero-stuff, then filter)."""
        full = np.zeros((self.n_steps + 1, adj.shape[1]))
        full[:: self.stride] = adj
        if self.stride == 1:
            return full
        return correlate1d(full, self._aa, axis=0, mode="constant", cval=0.0)

    # -- forward / adjoint -------------------------------------------------

    def forward(self, m: ScalarField2D, source_idx: int = 0, *,
                store: bool = False, checkpoint_stride: int = 1,
                collect_energy: bool = False):
        """Propagate one shot; returns (record, stored wavefields, energies).

        With store=True and checkpoint_stride=1 every state u^n is kept in
        one dense array; a stride > 1 keeps (u^{n-1}, u^n) pairs at
        checkpoints and the adjoint pass recomputes between them. Energy
        collection evaluates the conserved leapfrog energy at each step
        (diagnostic, costs one extra Laplacian per step).
        """
        coef, m_pad = self._coef(m)
        shape = self.padded.shape
        u_prev = np.zeros(shape)
        u_cur = np.zeros(shape)
        u_next = np.zeros(shape)
        cells = self._src_cells[source_idx]
        weights = self._src_weights[source_idx]
        amps = self._src_amps[source_idx]

        traces = np.empty((self.n_steps + 1, self.acq.n_receivers))
        traces[0] = self._sample_receivers(u_cur)
        stored = None
        if store:
            if checkpoint_stride == 1:
                stored = np.zeros((self.n_steps + 1, *shape))
            else:
                stored = [(0, u_prev.copy(), u_cur.copy())]
        energies = [] if collect_energy else None
        lap_buf = np.empty(shape) if collect_energy else None

        for n in range(self.n_steps):
            kernels.step_forward(u_prev, u_cur, coef, self.d1, self.d2,
                                 self.inv_dx2, self.inv_dy2, u_next)
            a = amps[n]
            if a != 0.0:
                for (cj, ci), wt in zip(cells, weights):
                    u_next[cj, ci] += self.d1[cj, ci] * coef[cj, ci] * wt * a
            u_prev, u_cur, u_next = u_cur, u_next, u_prev
            traces[n + 1] = self._sample_receivers(u_cur)
            if store:
                if checkpoint_stride == 1:
                    stored[n + 1] = u_cur
                elif (n + 1) % checkpoint_stride == 0:
                    stored.append((n + 1, u_prev.copy(), u_cur.copy()))
            if collect_energy:
                energies.append(self._energy(u_prev, u_cur, m_pad, lap_buf))

        record = ShotRecord(
            source_id=f"src{source_idx}",
            receiver_positions=self.acq.receivers,
            dt=self.acq.record_dt,
            samples=self._decimate(traces),
        )
        return record, stored, (np.array(energies) if collect_energy else None)

    def _energy(self, u_old: np.ndarray, u_new: np.ndarray, m_pad: np.ndarray,
                lap_buf: np.ndarray) -> float:
        """Conserved discrete leapfrog energy at the half step between the fields."""
        area = self.geometry.cell_area
        dudt = (u_new - u_old) / self.dt
        kinetic = 0.5 * float(np.sum(m_pad * dudt * dudt)) * area
        kernels.lap4(u_new, self.inv_dx2, self.inv_dy2, lap_buf)
        potential = -0.5 * float(np.sum(lap_buf * u_old)) * area
        return kinetic + potential

    def record(self, m: ScalarField2D, source_idx: int = 0) -> ShotRecord:
        rec, _, _ = self.forward(m, source_idx)
        return rec

    def adjoint_gradient(self, m: ScalarField2D, source_idx: int,
                         stored, checkpoint_stride: int,
                         adjoint_record: np.ndarray) -> np.ndarray:
        """Exact gradient of a record functional w.r.t. the physical m values.

        adjoint_record is d(misfit)/d(record samples), shape (nt, nr); the
        return value is the flat gradient on the operator's physical grid.
        `stored` is the wavefield storage produced by :meth:`forward` with
        the same checkpoint stride.
        """
        coef, m_pad = self._coef(m)
        shape = self.padded.shape
        w_int = self._lift_adjoint_record(adjoint_record)

        cells = self._src_cells[source_idx]
        weights = self._src_weights[source_idx]
        amps = self._src_amps[source_idx]

        lam_pp = np.zeros(shape)   # lambda^{j+2}
        lam_p = np.zeros(shape)    # lambda^{j+1}
        lam = np.zeros(shape)
        grad_c = np.zeros(shape)

        if checkpoint_stride == 1:
            def u_at(n: int) -> np.ndarray:
                return stored[n]
        else:
            states = {n: (up, uc) for n, up, uc in stored}
            window: dict[int, np.ndarray] = {}

            def u_at(n: int) -> np.ndarray:
                if n in window:
                    return window[n]
                # recompute forward from the nearest checkpoint at or before n
                n0 = (n // checkpoint_stride) * checkpoint_stride
                while n0 not in states:
                    n0 -= checkpoint_stride
                up, uc = states[n0]
                up, uc = up.copy(), uc.copy()
                window.clear()
                window[n0] = uc.copy()
                nxt = np.zeros(shape)
                for step in range(n0, n):
                    kernels.step_forward(up, uc, coef, self.d1, self.d2,
                                         self.inv_dx2, self.inv_dy2, nxt)
                    a = amps[step]
                    if a != 0.0:
                        for (cj, ci), wt in zip(cells, weights):
                            nxt[cj, ci] += self.d1[cj, ci] * coef[cj, ci] * wt * a
                    up, uc, nxt = uc, nxt, up
                    window[step + 1] = uc.copy()
                return window[n]

        lap_u = np.zeros(shape)
        for j in range(self.n_steps, 0, -1):
            kernels.step_adjoint(lam_pp, lam_p, coef, self.d1, self.d2,
                                 self.inv_dx2, self.inv_dy2, lam)
            wj = w_int[j]
            if np.any(wj):
                np.add.at(
                    lam,
                    (self._rec_j, self._rec_i),
                    self.d1[self._rec_j, self._rec_i] * self._rec_w * wj[:, None],
                )
            # gradient term for n = j - 1: lambda^j * (lap u^{j-1} + s^{j-1})
            u_n = u_at(j - 1)
            kernels.accumulate_lap_product(u_n, lam, self.inv_dx2, self.inv_dy2, grad_c)
            a = amps[j - 1]
            if a != 0.0:
                for (cj, ci), wt in zip(cells, weights):
                    grad_c[cj, ci] += lam[cj, ci] * wt * a
            lam_pp, lam_p, lam = lam_p, lam, lam_pp

        grad_m_pad = grad_c * (-self.dt**2 / m_pad**2)
        return self._fold_padding(grad_m_pad).reshape(-1)

    def _fold_padding(self, g: np.ndarray) -> np.ndarray:
        """Transpose of edge padding: sum sponge-band entries onto edge cells."""
        w = self.width
        nx, ny = self.geometry.nx, self.geometry.ny
        core_x = g[:, w:w + nx].copy()
        core_x[:, 0] += g[:, :w].sum(axis=1)
        core_x[:, -1] += g[:, w + nx:].sum(axis=1)
        core = core_x[w:w + ny]
        core[0] += core_x[:w].sum(axis=0)
        core[-1] += core_x[w + ny:].sum(axis=0)
        return core


def simulate(m: ScalarField2D, source: RickerSource, acq: AcquisitionGeometry,
             cfg: SolverConfig | None = None) -> ShotRecord:
    """Run one shot of the given source through the model m (slowness-squared)."""
    cfg = cfg or SolverConfig()
    if np.any(m.values <= 0):
        raise ValueError("slowness-squared must be strictly positive")
    c_max = cfg.c_max_hint or 1.0 / math.sqrt(float(m.values.min()))
    c_slow = 1.0 / math.sqrt(float(m.values.max()))
    try:
        source_idx = acq.sources.index(source)
        acq_run = acq
    except ValueError:
        acq_run = AcquisitionGeometry(
            sources=(source,),
            receivers=acq.receivers,
            record_dt=acq.record_dt,
            record_T=acq.record_T,
        )
        source_idx = 0
    op = WaveOperator(m.geometry, acq_run, cfg, c_max=c_max, c_slow=c_slow)
    return op.record(m, source_idx)


def forward_heterogeneous(density, epsilon: float, constants, acq: AcquisitionGeometry,
                          cfg: SolverConfig, seeds, geometry: GridGeometry | None = None,
                          threads: int = 1) -> list[list[ShotRecord]]:
    """Heterogeneous data: per seed, sample a cloud, rasterize, fire every source.

    Returns records[seed_index][source_index]; the fine simulation grid
    defaults to the density's own grid. Realizations are independent and may
    run in parallel; results are collected in seed order so output is
    deterministic regardless of scheduling.
    """
    if geometry is None:
        geometry = density.geometry
    from concurrent.futures import ThreadPoolExecutor

    from .medium import rasterize_velocity, sample_cloud

    def one_seed(seed: int) -> list[ShotRecord]:
        cloud = sample_cloud(density, epsilon, seed)
        vel = rasterize_velocity(cloud, constants, geometry)
        m = ScalarField2D(geometry, 1.0 / vel.values**2)
        run_cfg = cfg if cfg.c_max_hint else SolverConfig(
            cfl_factor=cfg.cfl_factor,
            absorber_width_cells=cfg.absorber_width_cells,
            absorber_kind=cfg.absorber_kind,
            c_max_hint=max(constants.c0, constants.c1),
        )
        op = WaveOperator(geometry, acq, run_cfg,
                          c_max=run_cfg.c_max_hint, c_slow=min(constants.c0, constants.c1))
        return [op.record(m, i) for i in range(len(acq.sources))]

    seeds = list(seeds)
    if threads <= 1:
        return [one_seed(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one_seed, seeds))


def forward_effective(prob, constants, acq: AcquisitionGeometry,
                      cfg: SolverConfig) -> list[ShotRecord]:
    """Effective-medium data: one record per source from m = p/c1^2 + (1-p)/c0^2."""
    from .medium import effective_slowness_squared

    m = effective_slowness_squared(prob, constants)
    c_max = cfg.c_max_hint or 1.0 / math.sqrt(float(m.values.min()))
    op = WaveOperator(m.geometry, acq, cfg, c_max=c_max,
                      c_slow=1.0 / math.sqrt(float(m.values.max())))
    return [op.record(m, i) for i in range(len(acq.sources))]


def average_records(records: list[ShotRecord]) -> ShotRecord:
    """Samplewise arithmetic mean of records sharing one acquisition."""
    if not records:
        raise ValueError("no records to average")
    first = records[0]
    for r in records[1:]:
        if r.samples.shape != first.samples.shape or r.dt != first.dt:
            raise ValueError("records disagree in shape or dt")
        if not np.array_equal(r.receiver_positions, first.receiver_positions):
            raise ValueError("records disagree in receiver positions")
    stacked = np.stack([r.samples for r in records])
    return ShotRecord(
        source_id=first.source_id,
        receiver_positions=first.receiver_positions,
        dt=first.dt,
        samples=stacked.mean(axis=0),
    )


def boundary_receivers(geometry: GridGeometry, n: int) -> np.ndarray:
    """n receiver positions evenly spread along the left, top and right sides."""
    lx, ly = geometry.extent
    x0, y0 = geometry.x0, geometry.y0
    perimeter = 2 * ly + lx
    s = (np.arange(n) + 0.5) / n * perimeter
    pts = np.empty((n, 2))
    for k, d in enumerate(s):
        if d < ly:  # left side, bottom -> top
            pts[k] = (x0, y0 + d)
        elif d < ly + lx:  # top side, left -> right
            pts[k] = (x0 + (d - ly), y0 + ly)
        else:  # right side, top -> bottom
            pts[k] = (x0 + lx, y0 + ly - (d - ly - lx))
    return pts


def bottom_sources(geometry: GridGeometry, n: int, f0: float,
                   amplitude: float = 1.0) -> tuple[RickerSource, ...]:
    """n Ricker sources evenly spaced along the bottom side."""
    lx = geometry.extent[0]
    xs = geometry.x0 + (np.arange(n) + 0.5) / n * lx
    return tuple(RickerSource(position=(float(x), geometry.y0), f0=f0,
                              amplitude=amplitude) for x in xs)


def first_arrival_sample(trace: np.ndarray, threshold: float = 0.01) -> int:
    """Index of the first sample whose magnitude exceeds threshold * peak."""
    peak = np.abs(trace).max()
    if peak == 0:
        return len(trace)
    return int(np.argmax(np.abs(trace) >= threshold * peak))


# ---------------------------------------------------------------------------
# SRC1 record files: comment header, receiver row, one CSV row per time sample
# ---------------------------------------------------------------------------

def write_record(record: ShotRecord, path) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(
            f"# SRC1,source_id={record.source_id},dt={record.dt:.17g},"
            f"nt={record.nt},nr={record.n_receivers}\n"
        )
        pos = ";".join(f"{x:.17g} {y:.17g}" for x, y in record.receiver_positions)
        f.write(f"# receivers,{pos}\n")
        for row in record.samples:
            f.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_record(path) -> ShotRecord:
    with open(path) as f:
        head = f.readline().strip()
        if not head.startswith("# SRC1,"):
            raise ValueError(f"{path}: not a SRC1 record")
        meta = dict(kv.split("=", 1) for kv in head[len("# SRC1,"):].split(","))
        rec_line = f.readline().strip()
        if not rec_line.startswith("# receivers,"):
            raise ValueError(f"{path}: missing receiver header")
        pairs = rec_line[len("# receivers,"):].split(";")
        positions = np.array([[float(c) for c in p.split()] for p in pairs])
        nt, nr = int(meta["nt"]), int(meta["nr"])
        samples = np.empty((nt, nr))
        for it in range(nt):
            line = f.readline()
            if not line:
                raise ValueError(f"{path}: truncated at row {it}")
            samples[it] = [float(v) for v in line.split(",")]
    return ShotRecord(
        source_id=meta["source_id"],
        receiver_positions=positions,
        dt=float(meta["dt"]),
        samples=samples,
    )
