"""Experiment configuration: flat `key = value` files, presets and seeding.

The config format is line oriented for diffability: one dotted key per line,
`#` comments, values typed by the schema. A master seed expands into
per-realization seeds through a splitmix64-style mix, so realization k is
reproducible in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .grid import GridGeometry, MollifierSpec
from .medium import (
    DensityField,
    MediumConstants,
    ProbabilityField,
    chiu_profile,
    density_from_probability,
    gaussian_profile,
)
from .wavesim import AcquisitionGeometry, SolverConfig, bottom_sources, boundary_receivers

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config_text",
    "load_config",
    "resolve_config",
    "derive_seed",
    "PRESETS",
]


class ConfigError(ValueError):
    """Invalid configuration; message names the offending field."""


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


# key -> (parser, default). Parsed left to right into a flat dict.
_SCHEMA: dict[str, tuple] = {
    "domain.extent_x": (float, 1.0),
    "domain.extent_y": (float, 1.0),
    "domain.x0": (float, 0.0),
    "domain.y0": (float, 0.0),
    "fine.nx": (int, 1000),
    "fine.ny": (int, 1000),
    "coarse.nx": (int, 100),
    "coarse.ny": (int, 100),
    "medium.c0": (float, 1500.0),
    "medium.c1": (float, 3000.0),
    "medium.epsilon": (float, 0.002),
    "profile.kind": (str, "gaussian"),
    "profile.p_max": (float, 0.15),
    "profile.center_x": (float, 0.5),
    "profile.center_y": (float, 0.5),
    "profile.sigma": (float, 0.18),
    "profile.m": (float, 1.0),
    "profile.lambda": (float, 2.0),
    "acquisition.n_sources": (int, 4),
    "acquisition.n_receivers": (int, 60),
    "acquisition.f0": (float, 15000.0),
    "acquisition.amplitude": (float, 1.0),
    "acquisition.record_dt": (float, 20e-6),
    "acquisition.record_T": (float, 1e-3),
    "solver.fine_cfl": (float, 0.8),
    "solver.coarse_cfl": (float, 0.8),
    "solver.absorber_width_cells": (int, 0),  # 0 selects the automatic width
    "inversion.misfit": (str, "w2"),
    "inversion.max_iterations": (int, 100),
    "inversion.gradient_tolerance": (float, 0.0),
    "inversion.memory": (int, 10),
    "inversion.mollify_model_sigma": (float, 0.0),
    "inversion.mollify_data_sigma": (float, 0.0),
    "inversion.memory_budget_mb": (float, 512.0),
    "realizations.n": (int, 50),
    "seeds.master": (int, 20240601),
    "helmholtz.extent": (float, 0.256),
    "helmholtz.dx": (float, 0.001),
    "helmholtz.wavelengths": (float, 6.0),
    "helmholtz.kappa0": (float, 2.0),
    "helmholtz.kappa1": (float, 2.0),
    "helmholtz.eps_list": (_parse_float_list, (0.016, 0.008, 0.004)),
    "helmholtz.realizations": (int, 32),
    "helmholtz.rho_amplitude": (float, 1.0),
    "helmholtz.rho_sigma_frac": (float, 1.0 / 6.0),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Typed view over the resolved key/value map."""

    entries: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        merged = {k: d for k, (_, d) in _SCHEMA.items()}
        merged.update(self.entries)
        object.__setattr__(self, "entries", merged)
        self.validate()

    def __getitem__(self, key: str):
        return self.entries[key]

    def validate(self) -> None:
        e = self.entries
        if e["profile.kind"] not in ("gaussian", "chiu"):
            raise ConfigError(
                f"profile.kind: unknown profile {e['profile.kind']!r} "
                "(expected 'gaussian' or 'chiu')"
            )
        for key in ("domain.extent_x", "domain.extent_y", "medium.epsilon",
                    "acquisition.f0", "acquisition.record_dt", "acquisition.record_T",
                    "profile.sigma", "helmholtz.extent", "helmholtz.dx"):
            if e[key] <= 0:
                raise ConfigError(f"{key}: must be > 0, got {e[key]}")
        for key in ("fine.nx", "fine.ny", "coarse.nx", "coarse.ny",
                    "acquisition.n_sources", "acquisition.n_receivers",
                    "realizations.n"):
            if e[key] < 1:
                raise ConfigError(f"{key}: must be >= 1, got {e[key]}")
        if not 0 <= e["profile.p_max"] < 1:
            raise ConfigError(f"profile.p_max: must lie in [0, 1), got {e['profile.p_max']}")
        if e["inversion.misfit"] not in ("l2", "w2"):
            raise ConfigError(
                f"inversion.misfit: unknown misfit {e['inversion.misfit']!r} "
                "(expected 'l2' or 'w2')"
            )
        for key in ("solver.fine_cfl", "solver.coarse_cfl"):
            if not 0 < e[key] <= 0.86:
                raise ConfigError(f"{key}: must lie in (0, 0.86], got {e[key]}")

    # -- builders -----------------------------------------------------------

    def fine_geometry(self) -> GridGeometry:
        return self._geometry(self["fine.nx"], self["fine.ny"])

    def coarse_geometry(self) -> GridGeometry:
        return self._geometry(self["coarse.nx"], self["coarse.ny"])

    def _geometry(self, nx: int, ny: int) -> GridGeometry:
        return GridGeometry(
            nx=nx, ny=ny,
            dx=self["domain.extent_x"] / nx, dy=self["domain.extent_y"] / ny,
            x0=self["domain.x0"], y0=self["domain.y0"],
        )

    def constants(self) -> MediumConstants:
        return MediumConstants(c0=self["medium.c0"], c1=self["medium.c1"])

    def profile(self, geometry: GridGeometry) -> ProbabilityField:
        if self["profile.kind"] == "gaussian":
            return gaussian_profile(
                self["profile.p_max"],
                (self["profile.center_x"], self["profile.center_y"]),
                self["profile.sigma"],
                geometry,
            )
        return chiu_profile(
            self["profile.p_max"], self["profile.m"], self["profile.lambda"], geometry
        )

    def density(self, geometry: GridGeometry) -> DensityField:
        return density_from_probability(self.profile(geometry))

    def acquisition(self) -> AcquisitionGeometry:
        geom = self.fine_geometry()
        return AcquisitionGeometry(
            sources=bottom_sources(geom, self["acquisition.n_sources"],
                                   self["acquisition.f0"],
                                   self["acquisition.amplitude"]),
            receivers=boundary_receivers(geom, self["acquisition.n_receivers"]),
            record_dt=self["acquisition.record_dt"],
            record_T=self["acquisition.record_T"],
        )

    def solver(self, which: str) -> SolverConfig:
        cfl = self["solver.fine_cfl"] if which == "fine" else self["solver.coarse_cfl"]
        width = self["solver.absorber_width_cells"] or None
        return SolverConfig(
            cfl_factor=cfl,
            absorber_width_cells=width,
            c_max_hint=max(self["medium.c0"], self["medium.c1"]),
        )

    def model_mollifier(self) -> MollifierSpec:
        return MollifierSpec(self["inversion.mollify_model_sigma"])

    def data_mollifier(self) -> MollifierSpec:
        return MollifierSpec(self["inversion.mollify_data_sigma"])

    def seeds(self, n: int | None = None) -> list[int]:
        n = self["realizations.n"] if n is None else n
        return [derive_seed(self["seeds.master"], k) for k in range(n)]

    def to_text(self) -> str:
        lines = []
        for key in _SCHEMA:
            v = self.entries[key]
            if isinstance(v, tuple):
                lines.append(f"{key} = {','.join(repr(x) for x in v)}")
            elif isinstance(v, float):
                lines.append(f"{key} = {v!r}")
            else:
                lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str, overrides: dict | None = None) -> ExperimentConfig:
    entries: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{key}: unknown configuration key")
        parser = _SCHEMA[key][0]
        try:
            entries[key] = parser(value)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {value!r}") from None
    if overrides:
        entries.update(overrides)
    return ExperimentConfig(entries)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    with open(path) as f:
        return parse_config_text(f.read(), overrides)


PRESETS: dict[str, dict] = {
    # desk-scale analogues of the full experiments: fine 1000^2, coarse 100^2,
    # f0 = 15 kHz, T = 1 ms, c0 = 1500, c1 = 3000, N = 50 realizations
    "gaussian-desk": {
        "profile.kind": "gaussian",
        "profile.p_max": 0.15,
        "profile.sigma": 0.18,
    },
    "chiu-desk": {
        "profile.kind": "chiu",
        "profile.p_max": 0.13,
        "profile.m": 1.0,
        "profile.lambda": 2.0,
        "inversion.mollify_model_sigma": 20.0,
    },
}
PRESETS["gaussian-desk"]["inversion.mollify_model_sigma"] = 10.0


def resolve_config(path_or_preset: str, overrides: dict | None = None) -> ExperimentConfig:
    """Load a config file, or fall back to a named preset."""
    import os

    if os.path.exists(path_or_preset):
        return load_config(path_or_preset, overrides)
    if path_or_preset in PRESETS:
        entries = dict(PRESETS[path_or_preset])
        if overrides:
            entries.update(overrides)
        return ExperimentConfig(entries)
    raise ConfigError(
        f"config: {path_or_preset!r} is neither a file nor a preset "
        f"(presets: {', '.join(sorted(PRESETS))})"
    )


_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def derive_seed(master: int, index: int) -> int:
    """splitmix64-style expansion: seed k depends only on (master, k)."""
    z = (master + (index + 1) * _GOLDEN) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)
