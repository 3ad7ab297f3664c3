"""Concentration estimates, three-way truth comparison and data diagnostics.

Volume concentration is the domain average of the sediment probability
(midpoint rule). Reports mirror the three reference columns used throughout:
the fraction counted on a single realization, the integral of the designed
probability pattern, and the mean fraction over many realizations. Mass
concentration is the same number times the sediment density (optional
multiplier, off by default).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import ScalarField2D
from .medium import MediumConstants, ProbabilityField, probability_from_slowness
from .wavesim import ShotRecord, average_records

__all__ = [
    "ConcentrationReport",
    "ComparisonReport",
    "concentration_from_probability",
    "concentration_from_realization",
    "build_report",
    "first_arrival_windows",
    "data_comparison",
    "write_report_csv",
    "format_report_table",
]

METHOD_LABELS = ("plain", "shot_averaging", "model_mollification", "both")


@dataclass(frozen=True)
class ConcentrationReport:
    method_label: str
    inverted_value: float
    exact_single: float
    estimated_from_p: float
    exact_multi: float
    relative_errors: dict[str, float] = field(default_factory=dict)
    clamped_cells: int = 0

    def __post_init__(self) -> None:
        for name in ("inverted_value", "exact_single", "estimated_from_p", "exact_multi"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} = {v} is not a volume fraction")


def concentration_from_probability(p: ProbabilityField,
                                   sediment_density: float | None = None) -> float:
    """Volume concentration = integral of p over the domain / |D|.

    Passing a sediment density converts to mass concentration.
    """
    c = float(np.mean(p.field.values))
    return c * sediment_density if sediment_density is not None else c


def concentration_from_realization(velocity: ScalarField2D,
                                   constants: MediumConstants) -> float:
    """Sediment fraction of one rasterized realization (cells equal to c1)."""
    return float(np.mean(velocity.values == constants.c1))


def build_report(inverted_m: ScalarField2D, prob_truth: ProbabilityField,
                 realizations: list[ScalarField2D], constants: MediumConstants,
                 label: str) -> ConcentrationReport:
    """Assemble one comparison row from an inverted model and ground truths."""
    if label not in METHOD_LABELS:
        raise ValueError(f"unknown method label {label!r}; expected one of {METHOD_LABELS}")
    if not realizations:
        raise ValueError("need at least one realization for the exact columns")
    recovery = probability_from_slowness(inverted_m, constants)
    inverted = concentration_from_probability(recovery.prob)
    single = concentration_from_realization(realizations[0], constants)
    from_p = concentration_from_probability(prob_truth)
    multi = float(np.mean([
        concentration_from_realization(r, constants) for r in realizations
    ]))
    def rel_err(target: float) -> float:
        if target == 0.0:
            return 0.0 if inverted == 0.0 else float("inf")
        return abs(inverted - target) / target

    errors = {
        "exact_single": rel_err(single),
        "estimated_from_p": rel_err(from_p),
        "exact_multi": rel_err(multi),
    }
    return ConcentrationReport(
        method_label=label,
        inverted_value=inverted,
        exact_single=single,
        estimated_from_p=from_p,
        exact_multi=multi,
        relative_errors=errors,
        clamped_cells=recovery.clamped,
    )


def first_arrival_windows(source_position: tuple[float, float],
                          receivers: np.ndarray, c0: float, f0: float,
                          record_T: float) -> np.ndarray:
    """Per-receiver window [0.9 t_geom, t_geom + 3/f0] around the water arrival."""
    d = np.hypot(receivers[:, 0] - source_position[0],
                 receivers[:, 1] - source_position[1])
    t_geom = d / c0
    lo = 0.9 * t_geom
    hi = np.minimum(t_geom + 3.0 / f0, record_T)
    return np.column_stack([lo, hi])


@dataclass(frozen=True)
class ComparisonReport:
    """Per-trace relative L2 differences against the effective record."""

    windows: np.ndarray = field(repr=False)
    diff_single: np.ndarray = field(repr=False)
    diff_averaged: np.ndarray = field(repr=False)
    n_realizations: int = 0

    @property
    def fraction_averaged_within(self) -> float:
        """Fraction of traces with averaged difference <= 10%."""
        return float(np.mean(self.diff_averaged <= 0.10))

    @property
    def fraction_single_exceeds(self) -> float:
        """Fraction of traces where the single realization is strictly worse."""
        return float(np.mean(self.diff_single > self.diff_averaged))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as f:
            f.write("trace,window_lo,window_hi,diff_single,diff_averaged\n")
            for r in range(len(self.diff_single)):
                f.write(
                    f"{r},{self.windows[r, 0]:.17g},{self.windows[r, 1]:.17g},"
                    f"{self.diff_single[r]:.17g},{self.diff_averaged[r]:.17g}\n"
                )


def data_comparison(d_eff: ShotRecord, d_het_list: list[ShotRecord],
                    windows: np.ndarray) -> ComparisonReport:
    """Windowed relative L2 distance of single and averaged data to d_eff."""
    if not d_het_list:
        raise ValueError("need at least one heterogeneous record")
    d_avg = average_records(d_het_list)
    times = d_eff.times()
    nr = d_eff.n_receivers
    diff_single = np.empty(nr)
    diff_avg = np.empty(nr)
    for r in range(nr):
        sel = (times >= windows[r, 0]) & (times <= windows[r, 1])
        ref = d_eff.samples[sel, r]
        denom = float(np.linalg.norm(ref))
        if denom == 0.0:
            raise ValueError(f"effective record is zero inside the window of trace {r}")
        diff_single[r] = float(np.linalg.norm(d_het_list[0].samples[sel, r] - ref)) / denom
        diff_avg[r] = float(np.linalg.norm(d_avg.samples[sel, r] - ref)) / denom
    return ComparisonReport(
        windows=windows,
        diff_single=diff_single,
        diff_averaged=diff_avg,
        n_realizations=len(d_het_list),
    )


def write_report_csv(reports: list[ConcentrationReport], path) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(
            "method,inverted_value,exact_single,estimated_from_p,exact_multi,"
            "err_exact_single,err_estimated_from_p,err_exact_multi\n"
        )
        for r in reports:
            f.write(
                f"{r.method_label},{r.inverted_value:.17g},{r.exact_single:.17g},"
                f"{r.estimated_from_p:.17g},{r.exact_multi:.17g},"
                f"{r.relative_errors['exact_single']:.17g},"
                f"{r.relative_errors['estimated_from_p']:.17g},"
                f"{r.relative_errors['exact_multi']:.17g}\n"
            )


def format_report_table(reports: list[ConcentrationReport]) -> str:
    """Plain-text table: one row per method, the three truths and errors."""
    lines = [
        f"{'method':<24}{'inverted':>10}{'single':>10}{'from p':>10}{'multi':>10}"
        f"{'err(sgl)':>10}{'err(p)':>10}{'err(mlt)':>10}"
    ]
    for r in reports:
        e = r.relative_errors
        lines.append(
            f"{r.method_label:<24}{r.inverted_value:>10.4f}{r.exact_single:>10.4f}"
            f"{r.estimated_from_p:>10.4f}{r.exact_multi:>10.4f}"
            f"{e['exact_single']:>9.2%} {e['estimated_from_p']:>9.2%} "
            f"{e['exact_multi']:>9.2%}"
        )
    return "\n".join(lines)
