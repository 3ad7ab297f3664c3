"""Adjoint-state gradients and bounded quasi-Newton model inversion.

The unknown is the coarse-grid slowness-squared field. Three workflow
variants are supported: plain misfit minimization, model mollification
(the unknown is reparameterized as K * theta, published iterates are the
mollified image), and data mollification (both observed and synthetic
records are filtered identically). Shot-averaged data is inverted by simply
passing the averaged records. A low-dimensional parametric driver fits the
profile families directly, bypassing the field inversion.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import GridGeometry, MollifierSpec, ScalarField2D, mollify, mollify_transpose, read_field, write_field
from .medium import MediumConstants, chiu_profile, gaussian_profile
from .misfit import l2_misfit, mollify_record, mollify_record_transpose, w2_misfit
from .optimize import minimize_bounded
from .wavesim import AcquisitionGeometry, ShotRecord, SolverConfig, WaveOperator, forward_effective

__all__ = [
    "InversionConfig",
    "InversionState",
    "ParametricResult",
    "default_bounds",
    "water_model",
    "gradient",
    "invert",
    "invert_parametric",
    "directional_derivative_check",
    "write_checkpoint",
    "load_checkpoint",
]

_IDENTITY = MollifierSpec(0.0)


def default_bounds(constants: MediumConstants) -> tuple[float, float]:
    """Physical slowness-squared box [1/c1^2, 1.05/c0^2] (c1 > c0)."""
    lo = min(constants.m_water, constants.m_sediment)
    hi = max(constants.m_water, constants.m_sediment)
    return (lo, 1.05 * hi)


def water_model(geometry: GridGeometry, constants: MediumConstants) -> ScalarField2D:
    """Homogeneous no-sediment initial model m = 1/c0^2."""
    return ScalarField2D.constant(geometry, constants.m_water)


@dataclass(frozen=True)
class InversionConfig:
    misfit_kind: str = "l2"
    model_mollifier: MollifierSpec = _IDENTITY
    data_mollifier: MollifierSpec = _IDENTITY
    bounds: tuple[float, float] = (1.0 / 3000.0**2, 1.05 / 1500.0**2)
    max_iterations: int = 100
    gradient_tolerance: float = 0.0
    optimizer_memory: int = 10
    initial_model: ScalarField2D | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    memory_budget_mb: float = 512.0
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self) -> None:
        if self.misfit_kind not in ("l2", "w2"):
            raise ValueError(f"misfit_kind must be 'l2' or 'w2', got {self.misfit_kind!r}")
        lo, hi = self.bounds
        if not (0 < lo < hi):
            raise ValueError(f"bounds must satisfy 0 < m_min < m_max, got {self.bounds}")
        if self.optimizer_memory < 1:
            raise ValueError("optimizer memory must be >= 1")


@dataclass(frozen=True)
class InversionState:
    """Result of a field inversion: published iterate plus raw parameters."""

    iterate: ScalarField2D
    raw_parameters: ScalarField2D
    misfit_history: tuple[float, ...]
    gradient_norm_history: tuple[float, ...]
    step_history: tuple[float, ...]
    termination_reason: str
    n_iterations: int


@dataclass(frozen=True)
class ParametricResult:
    parameters: np.ndarray
    probability: "object"
    misfit_history: tuple[float, ...]
    termination_reason: str
    n_iterations: int


def _misfit_fn(kind: str):
    return l2_misfit if kind == "l2" else w2_misfit


def _checkpoint_stride(op: WaveOperator, budget_mb: float) -> int:
    full_bytes = (op.n_steps + 1) * op.padded.n_cells * 8
    return 1 if full_bytes <= budget_mb * 2**20 else 10


def gradient(m: ScalarField2D, observed: list[ShotRecord], acq: AcquisitionGeometry,
             cfg: SolverConfig | None = None, *, misfit_kind: str = "l2",
             model_mollifier: MollifierSpec = _IDENTITY,
             data_mollifier: MollifierSpec = _IDENTITY,
             operator: WaveOperator | None = None,
             memory_budget_mb: float = 512.0) -> tuple[float, ScalarField2D]:
    """Misfit value and its adjoint-state gradient w.r.t. the model field.

    observed[i] must correspond to acq.sources[i]. With model mollification
    the returned gradient is that of m -> misfit(K * m), i.e. the mollifier
    transpose is chained onto the field gradient; with data mollification
    both record sides are filtered and the adjoint source is chained through
    the filter transpose.
    """
    if len(observed) != len(acq.sources):
        raise ValueError(
            f"{len(observed)} observed records for {len(acq.sources)} sources"
        )
    cfg = cfg or SolverConfig()
    m_eff = mollify(m, model_mollifier)
    if operator is None:
        c_max = cfg.c_max_hint or 1.0 / math.sqrt(float(m_eff.values.min()))
        operator = WaveOperator(m.geometry, acq, cfg, c_max=c_max,
                                c_slow=1.0 / math.sqrt(float(m_eff.values.max())))
    stride = _checkpoint_stride(operator, memory_budget_mb)
    fn = _misfit_fn(misfit_kind)

    total = 0.0
    accum = np.zeros(m.geometry.n_cells)
    for idx, obs in enumerate(observed):
        syn, stored, _ = operator.forward(m_eff, idx, store=True,
                                          checkpoint_stride=stride)
        obs_f = mollify_record(obs, data_mollifier)
        syn_f = mollify_record(syn, data_mollifier)
        res = fn(syn_f, obs_f)
        adj = res.adjoint_source
        if not data_mollifier.is_identity:
            adj = mollify_record_transpose(adj, data_mollifier)
        total += res.value
        accum += operator.adjoint_gradient(m_eff, idx, stored, stride, adj)
        if not np.all(np.isfinite(accum)):
            raise RuntimeError("non-finite adjoint wavefield (instability)")
    grad_field = ScalarField2D(m.geometry, accum)
    if not model_mollifier.is_identity:
        grad_field = mollify_transpose(grad_field, model_mollifier)
    return total, grad_field


def misfit_only(m: ScalarField2D, observed: list[ShotRecord], acq: AcquisitionGeometry,
                cfg: SolverConfig | None = None, *, misfit_kind: str = "l2",
                model_mollifier: MollifierSpec = _IDENTITY,
                data_mollifier: MollifierSpec = _IDENTITY,
                operator: WaveOperator | None = None) -> float:
    """Misfit value without the adjoint pass (used by value-only probes)."""
    cfg = cfg or SolverConfig()
    m_eff = mollify(m, model_mollifier)
    if operator is None:
        c_max = cfg.c_max_hint or 1.0 / math.sqrt(float(m_eff.values.min()))
        operator = WaveOperator(m.geometry, acq, cfg, c_max=c_max,
                                c_slow=1.0 / math.sqrt(float(m_eff.values.max())))
    fn = _misfit_fn(misfit_kind)
    total = 0.0
    for idx, obs in enumerate(observed):
        syn = operator.record(m_eff, idx)
        res = fn(mollify_record(syn, data_mollifier), mollify_record(obs, data_mollifier))
        total += res.value
    return total


def invert(observed: list[ShotRecord], config: InversionConfig,
           acq: AcquisitionGeometry) -> InversionState:
    """Bounded quasi-Newton inversion of (possibly averaged) records.

    Raises RuntimeError on divergence (misfit above 10x its initial value).
    """
    if config.initial_model is None:
        raise ValueError("config.initial_model is required")
    geom = config.initial_model.geometry
    lo, hi = config.bounds
    cfg = config.solver
    if cfg.c_max_hint is None:
        cfg = replace(cfg, c_max_hint=1.0 / math.sqrt(lo))
    op = WaveOperator(geom, acq, cfg, c_max=cfg.c_max_hint,
                      c_slow=1.0 / math.sqrt(hi))

    obs_filtered = [mollify_record(o, config.data_mollifier) for o in observed]
    stride = _checkpoint_stride(op, config.memory_budget_mb)
    fn = _misfit_fn(config.misfit_kind)

    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        theta = ScalarField2D(geom, x)
        m_eff = mollify(theta, config.model_mollifier)
        total = 0.0
        accum = np.zeros(geom.n_cells)
        for idx, obs_f in enumerate(obs_filtered):
            syn, stored, _ = op.forward(m_eff, idx, store=True,
                                        checkpoint_stride=stride)
            syn_f = mollify_record(syn, config.data_mollifier)
            res = fn(syn_f, obs_f)
            adj = res.adjoint_source
            if not config.data_mollifier.is_identity:
                adj = mollify_record_transpose(adj, config.data_mollifier)
            total += res.value
            accum += op.adjoint_gradient(m_eff, idx, stored, stride, adj)
        if not np.all(np.isfinite(accum)) or not np.isfinite(total):
            raise RuntimeError("non-finite wavefield (instability)")
        g = ScalarField2D(geom, accum)
        if not config.model_mollifier.is_identity:
            g = mollify_transpose(g, config.model_mollifier)
        return total, g.values.copy()

    callback = None
    if config.checkpoint_every > 0 and config.checkpoint_dir:
        os.makedirs(config.checkpoint_dir, exist_ok=True)

        def callback(it, x, f, gnorm, step):
            if it % config.checkpoint_every == 0:
                theta = ScalarField2D(geom, x)
                published = mollify(theta, config.model_mollifier)
                write_checkpoint(config.checkpoint_dir, published, it, f, gnorm, step)

    outcome = minimize_bounded(
        objective,
        config.initial_model.values,
        lo,
        hi,
        memory=config.optimizer_memory,
        max_iterations=config.max_iterations,
        gradient_tolerance=config.gradient_tolerance,
        callback=callback,
    )
    if outcome.reason == "divergence":
        raise RuntimeError(
            "inversion diverged: misfit rose above 10x its initial value "
            f"(history: {[f'{v:.3e}' for v in outcome.value_history]})"
        )
    theta = ScalarField2D(geom, outcome.x)
    return InversionState(
        iterate=mollify(theta, config.model_mollifier),
        raw_parameters=theta,
        misfit_history=tuple(outcome.value_history),
        gradient_norm_history=tuple(outcome.grad_norm_history),
        step_history=tuple(outcome.step_history),
        termination_reason=outcome.reason,
        n_iterations=outcome.n_iterations,
    )


def _profile_from_params(family: str, params: np.ndarray, geometry: GridGeometry):
    if family == "gaussian":
        p_max, cx, cy, sigma = params
        return gaussian_profile(p_max, (cx, cy), sigma, geometry)
    if family == "chiu":
        p_max, big_m, lam = params
        return chiu_profile(p_max, big_m, lam, geometry)
    raise ValueError(f"unknown profile family {family!r}")


def invert_parametric(observed: list[ShotRecord], family: str,
                      config: InversionConfig, acq: AcquisitionGeometry, *,
                      geometry: GridGeometry, constants: MediumConstants,
                      lower: np.ndarray, upper: np.ndarray,
                      x0: np.ndarray) -> ParametricResult:
    """Fit a low-dimensional profile family directly to the records.

    Uses the same misfit and quasi-Newton driver with central
    finite-difference gradients over the parameter box.
    """
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    n_expected = 4 if family == "gaussian" else 3
    if not (lower.shape == upper.shape == x0.shape == (n_expected,)):
        raise ValueError(f"{family} family takes {n_expected} parameters")
    if np.any(lower >= upper):
        raise ValueError("infeasible parameter box")
    cfg = config.solver
    if cfg.c_max_hint is None:
        cfg = replace(cfg, c_max_hint=max(constants.c0, constants.c1))

    def value(params: np.ndarray) -> float:
        prob = _profile_from_params(family, params, geometry)
        synth = forward_effective(prob, constants, acq, cfg)
        fn = _misfit_fn(config.misfit_kind)
        return sum(
            fn(mollify_record(s, config.data_mollifier),
               mollify_record(o, config.data_mollifier)).value
            for s, o in zip(synth, observed)
        )

    h = 1e-5 * (upper - lower)

    def objective(params: np.ndarray) -> tuple[float, np.ndarray]:
        f = value(params)
        g = np.empty_like(params)
        for i in range(params.size):
            up = params.copy()
            dn = params.copy()
            up[i] = min(params[i] + h[i], upper[i])
            dn[i] = max(params[i] - h[i], lower[i])
            g[i] = (value(up) - value(dn)) / (up[i] - dn[i])
        return f, g

    outcome = minimize_bounded(
        objective, x0, lower, upper,
        memory=config.optimizer_memory,
        max_iterations=config.max_iterations,
        gradient_tolerance=config.gradient_tolerance,
    )
    return ParametricResult(
        parameters=outcome.x,
        probability=_profile_from_params(family, outcome.x, geometry),
        misfit_history=tuple(outcome.value_history),
        termination_reason=outcome.reason,
        n_iterations=outcome.n_iterations,
    )


def directional_derivative_check(objective, x: np.ndarray, direction: np.ndarray,
                                 h_values: tuple[float, ...] = (1e-2, 1e-3, 1e-4),
                                 ) -> tuple[float, float, dict[float, float]]:
    """Central finite-difference check of <grad, direction>.

    objective(x) must return (value, gradient). Returns (best relative
    error, analytic directional derivative, per-h relative errors); the step
    h is swept and the best agreement reported, since too-large h suffers
    truncation and too-small h cancellation.
    """
    _, g = objective(x)
    analytic = float(g @ direction)
    errs: dict[float, float] = {}
    denom = max(abs(analytic), 1e-300)
    for h in h_values:
        f_plus, _ = objective(x + h * direction)
        f_minus, _ = objective(x - h * direction)
        fd = (f_plus - f_minus) / (2.0 * h)
        errs[h] = abs(fd - analytic) / denom
    return min(errs.values()), analytic, errs


def write_checkpoint(directory: str, model: ScalarField2D, iteration: int,
                     misfit: float, grad_norm: float, step: float) -> None:
    """GRD1 model snapshot plus an appended history CSV row."""
    write_field(model, os.path.join(directory, f"model_iter{iteration:05d}.grd"))
    hist = os.path.join(directory, "history.csv")
    new = not os.path.exists(hist)
    with open(hist, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(["iter", "misfit", "grad_norm", "step_length"])
        w.writerow([iteration, f"{misfit:.17g}", f"{grad_norm:.17g}", f"{step:.17g}"])


def load_checkpoint(directory: str) -> tuple[ScalarField2D, list[dict]]:
    """Latest model snapshot and the parsed history (for resuming)."""
    snaps = sorted(f for f in os.listdir(directory)
                   if f.startswith("model_iter") and f.endswith(".grd"))
    if not snaps:
        raise FileNotFoundError(f"no checkpoints in {directory}")
    model = read_field(os.path.join(directory, snaps[-1]))
    history = []
    hist = os.path.join(directory, "history.csv")
    if os.path.exists(hist):
        with open(hist) as fh:
            for row in csv.DictReader(fh):
                history.append({
                    "iter": int(row["iter"]),
                    "misfit": float(row["misfit"]),
                    "grad_norm": float(row["grad_norm"]),
                    "step_length": float(row["step_length"]),
                })
    return model, history
