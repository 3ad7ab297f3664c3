"""Data misfits: least-squares and trace-wise quadratic Wasserstein.

Each misfit returns its scalar value together with the adjoint source, the
exact derivative of the value with respect to the synthetic samples — the
quantity injected at receiver positions by the adjoint wave solve. The W2
distance normalizes every trace to a probability density by squaring and
dividing by its mass, then transports it onto the observed density through
the piecewise-linear inverse of the observed cumulative distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .grid import MollifierSpec
from .wavesim import ShotRecord

__all__ = [
    "MisfitResult",
    "l2_misfit",
    "w2_misfit",
    "w2_trace",
    "mollify_record",
    "mollify_record_transpose",
]

_MASS_FLOOR = 1e-30


@dataclass(frozen=True)
class MisfitResult:
    value: float
    adjoint_source: np.ndarray = field(repr=False)  # (nt, nr)


def _check_compatible(synthetic: ShotRecord, observed: ShotRecord) -> None:
    if synthetic.samples.shape != observed.samples.shape:
        raise ValueError(
            f"record shapes differ: {synthetic.samples.shape} vs {observed.samples.shape}"
        )
    if abs(synthetic.dt - observed.dt) > 1e-12 * observed.dt:
        raise ValueError(f"record dt differ: {synthetic.dt} vs {observed.dt}")


def l2_misfit(synthetic: ShotRecord, observed: ShotRecord) -> MisfitResult:
    """value = 1/2 sum (s - d)^2 dt, adjoint source (s - d) dt."""
    _check_compatible(synthetic, observed)
    dt = synthetic.dt
    r = synthetic.samples - observed.samples
    return MisfitResult(value=0.5 * float(np.sum(r * r)) * dt, adjoint_source=r * dt)


def w2_trace(s: np.ndarray, d: np.ndarray, dt: float,
             trace_label: str = "trace") -> tuple[float, np.ndarray]:
    """Squared 1D Wasserstein distance between one synthetic/observed trace pair.

    Both traces are squared and mass-normalized; the synthetic mass atoms
    f_i dt at times t_i are transported to G^{-1}(F_i) with G the observed
    cumulative distribution inverted piecewise-linearly. Returns the value
    and its exact derivative with respect to the synthetic samples.
    """
    nt = s.shape[0]
    ms = float(np.sum(s * s)) * dt
    md = float(np.sum(d * d)) * dt
    if md < _MASS_FLOOR:
        raise ValueError(f"observed {trace_label} has zero energy")
    if ms < _MASS_FLOOR:
        raise ValueError(f"synthetic {trace_label} has zero energy")

    t = np.arange(nt) * dt
    f = s * s / ms
    g = d * d / md
    cum_f = np.cumsum(f) * dt
    # observed CDF knots, prepended with (t0 - dt, 0) so inversion covers [0, 1]
    knots_t = np.concatenate(([t[0] - dt], t))
    knots_g = np.concatenate(([0.0], np.cumsum(g) * dt))

    q = np.minimum(cum_f, knots_g[-1])
    seg = np.searchsorted(knots_g, q, side="left")
    seg = np.clip(seg, 1, nt)
    g_lo = knots_g[seg - 1]
    g_hi = knots_g[seg]
    width = g_hi - g_lo
    # segments carrying < 1e-14 of the unit mass are treated as flats of the
    # quantile function (their inverse slope would overflow)
    safe = width > 1e-14
    frac = np.where(safe, (q - g_lo) / np.where(safe, width, 1.0), 1.0)
    transported = knots_t[seg - 1] + frac * dt
    # clamped queries sit on a flat of the quantile function
    clamped = cum_f >= knots_g[-1]
    slope_inv = np.where(safe & ~clamped, dt / np.where(safe, width, 1.0), 0.0)

    diff = t - transported
    value = float(np.sum(diff * diff * f)) * dt

    # d value / d f_j: direct density term plus the transport tail through F
    tail = np.cumsum((diff * slope_inv * f)[::-1])[::-1] * dt
    dval_df = diff * diff * dt - 2.0 * dt * tail
    # chain through the squaring normalization f = s^2 / (sum s^2 dt)
    inner = float(np.sum(dval_df * f))
    dval_ds = (2.0 * s / ms) * (dval_df - dt * inner)
    return value, dval_ds


def w2_misfit(synthetic: ShotRecord, observed: ShotRecord,
              normalization: str = "square") -> MisfitResult:
    """Trace-wise quadratic Wasserstein misfit, summed over receivers."""
    if normalization != "square":
        raise ValueError(f"unsupported normalization {normalization!r}")
    _check_compatible(synthetic, observed)
    dt = synthetic.dt
    total = 0.0
    adj = np.zeros_like(synthetic.samples)
    for r in range(synthetic.n_receivers):
        value, dval = w2_trace(
            synthetic.samples[:, r], observed.samples[:, r], dt,
            trace_label=f"trace {r}",
        )
        total += value
        adj[:, r] = dval
    return MisfitResult(value=total, adjoint_source=adj)


def _time_kernel(spec: MollifierSpec) -> np.ndarray:
    w = spec.kernel_1d()
    return w / w.sum()


def mollify_record(record: ShotRecord, spec: MollifierSpec) -> ShotRecord:
    """Smooth every trace along time with a normalized truncated Gaussian,
    renormalized over the in-record support at the ends."""
    if spec.is_identity:
        return record
    k = _time_kernel(spec)
    num = correlate1d(record.samples, k, axis=0, mode="constant", cval=0.0)
    den = correlate1d(np.ones(record.nt), k, mode="constant", cval=0.0)
    return ShotRecord(
        source_id=record.source_id,
        receiver_positions=record.receiver_positions,
        dt=record.dt,
        samples=num / den[:, None],
    )


def mollify_record_transpose(samples: np.ndarray, spec: MollifierSpec) -> np.ndarray:
    """Exact transpose of :func:`mollify_record` on raw (nt, nr) samples;
    needed to chain adjoint sources through data mollification."""
    if spec.is_identity:
        return samples
    k = _time_kernel(spec)
    den = correlate1d(np.ones(samples.shape[0]), k, mode="constant", cval=0.0)
    return correlate1d(samples / den[:, None], k, axis=0, mode="constant", cval=0.0)
