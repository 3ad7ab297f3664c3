import math

import numpy as np
import pytest

from sedinv.grid import GridGeometry, ScalarField2D
from sedinv.helmholtz import (
    ComplexField2D,
    ConvergenceStudySpec,
    HelmholtzConfig,
    convergence_study,
    heterogeneous_index,
    homogenized_index,
    point_source,
    read_study_report,
    required_padding_cells,
    solve_helmholtz,
    write_study_report,
)
from sedinv.medium import DensityField, ProbabilityField, sample_cloud

EULER_GAMMA = 0.5772156649015328606


def hankel1_0_oracle(z: complex) -> complex:
    """H0^(1) by power series (small |z|) / asymptotic expansion (large |z|).

    Independent of scipy; good to ~1e-9 relative on the moduli used here.
    """
    if abs(z) <= 10.0:
        # ascending series: J0 = sum (-w)^k/(k!)^2 with w = z^2/4,
        # Y0 = (2/pi)[(ln(z/2) + gamma) J0 + sum (-1)^{k+1} H_k w^k/(k!)^2]
        w = z * z / 4.0
        j0 = 1.0 + 0.0j
        term = 1.0 + 0.0j
        for k in range(1, 60):
            term *= -w / (k * k)
            j0 += term
        y_sum = 0.0 + 0.0j
        term = 1.0 + 0.0j
        harmonic = 0.0
        for k in range(1, 60):
            term *= w / (k * k)
            harmonic += 1.0 / k
            y_sum += ((-1.0) ** (k + 1)) * harmonic * term
        y0 = (2.0 / math.pi) * ((np.log(z / 2.0) + EULER_GAMMA) * j0 + y_sum)
        return j0 + 1j * y0
    # Hankel asymptotic expansion: a_k = prod (4*0 - (2j-1)^2) / (k! 8^k)
    a = 1.0
    s = 1.0 + 0.0j
    for k in range(1, 8):
        a *= -((2 * k - 1) ** 2) / (k * 8.0)
        s += (1j ** k) * a / z**k
    return np.sqrt(2.0 / (math.pi * z)) * np.exp(1j * (z - math.pi / 4.0)) * s


def test_hankel_oracle_against_scipy():
    from scipy.special import hankel1

    rng = np.random.default_rng(0)
    zs = np.concatenate([
        rng.uniform(0.2, 9.5, 20) + 1j * rng.uniform(0.01, 3.0, 20),
        rng.uniform(10.5, 80.0, 20) + 1j * rng.uniform(0.1, 30.0, 20),
    ])
    for z in zs:
        ours = hankel1_0_oracle(complex(z))
        ref = complex(hankel1(0, z))
        assert abs(ours - ref) / abs(ref) < 1e-8


def small_config(n=64, dx=1e-3, k=250.0, kappa=4.0):
    geom = GridGeometry(nx=n, ny=n, dx=dx, dy=dx)
    return HelmholtzConfig(k=k, geometry=geom, kappa0=kappa, kappa1=kappa, n1=0.5)


class TestSolver:
    def test_zero_source_zero_solution(self):
        cfg = small_config()
        ns = ComplexField2D(cfg.geometry,
                            np.full(cfg.geometry.n_cells, cfg.ns0))
        f = ComplexField2D(cfg.geometry,
                           np.zeros(cfg.geometry.n_cells, dtype=complex))
        u, diag = solve_helmholtz(ns, cfg, f)
        assert np.all(u.values == 0.0)

    def test_energy_bound_on_random_media(self):
        rng = np.random.default_rng(1)
        cfg = small_config(kappa=2.0)
        geom = cfg.geometry
        for trial in range(3):
            p = rng.uniform(0.0, 0.5, geom.n_cells)
            ns = ComplexField2D(geom, p * cfg.ns1 + (1 - p) * cfg.ns0)
            f = ComplexField2D(
                geom, rng.standard_normal(geom.n_cells)
                + 1j * rng.standard_normal(geom.n_cells))
            _, diag = solve_helmholtz(ns, cfg, f)
            assert diag.energy_ratio <= 1.05

    def test_linearity_in_source(self):
        cfg = small_config(n=48)
        geom = cfg.geometry
        rng = np.random.default_rng(2)
        ns = ComplexField2D(geom, np.full(geom.n_cells, cfg.ns0))
        f1 = ComplexField2D(geom, rng.standard_normal(geom.n_cells).astype(complex))
        f2 = ComplexField2D(geom, rng.standard_normal(geom.n_cells).astype(complex))
        fsum = ComplexField2D(geom, f1.values + f2.values)
        pad = required_padding_cells(cfg)
        u1, _ = solve_helmholtz(ns, cfg, f1, pad_cells=pad)
        u2, _ = solve_helmholtz(ns, cfg, f2, pad_cells=pad)
        usum, _ = solve_helmholtz(ns, cfg, fsum, pad_cells=pad)
        err = np.abs(usum.values - u1.values - u2.values).max()
        assert err < 1e-12 * np.abs(usum.values).max()

    def test_absorption_required(self):
        cfg = small_config(n=16)
        geom = cfg.geometry
        ns = ComplexField2D(geom, np.full(geom.n_cells, 1.0 + 0.0j))
        f = ComplexField2D(geom, np.ones(geom.n_cells, dtype=complex))
        with pytest.raises(ValueError, match="absorption"):
            solve_helmholtz(ns, cfg, f)

    def test_constant_medium_matches_green_function(self):
        # point source in uniform water: discrete solution vs
        # (i/4) H0^(1)(k sqrt(ns0) |x - y|), 5% relative L2 outside 3 cells
        n, dx = 160, 1e-3
        cfg = small_config(n=n, dx=dx, k=150.0, kappa=2.0)
        geom = cfg.geometry
        ns = ComplexField2D(geom, np.full(geom.n_cells, cfg.ns0))
        src_pos = (geom.x0 + n // 2 * dx + dx / 2, geom.y0 + n // 2 * dx + dx / 2)
        f = point_source(geom, src_pos)
        u, _ = solve_helmholtz(ns, cfg, f)

        xs, ys = geom.x_centers(), geom.y_centers()
        rr = np.hypot(xs[None, :] - src_pos[0], ys[:, None] - src_pos[1])
        root = complex(np.sqrt(complex(cfg.ns0)))
        mask = rr > 3 * dx
        green = np.zeros(geom.shape, dtype=complex)
        for j, i in zip(*np.nonzero(mask)):
            green[j, i] = 0.25j * hankel1_0_oracle(cfg.k * root * rr[j, i])
        diff = (u.as_grid() - green)[mask]
        rel = np.linalg.norm(diff) / np.linalg.norm(green[mask])
        assert rel < 0.05


class TestHomogenizedIndex:
    def geom(self):
        return GridGeometry(nx=8, ny=8, dx=0.1, dy=0.1)

    def test_pure_water(self):
        g = self.geom()
        cfg = HelmholtzConfig(k=10.0, geometry=g, kappa0=0.1, kappa1=0.1, n1=0.5)
        p = ProbabilityField(ScalarField2D.constant(g, 0.0))
        mu = homogenized_index(p, cfg)
        assert np.allclose(mu.values, cfg.ns0)

    def test_pure_sediment(self):
        g = self.geom()
        cfg = HelmholtzConfig(k=10.0, geometry=g, kappa0=0.1, kappa1=0.1, n1=0.5)
        p = ProbabilityField(ScalarField2D.constant(g, np.nextafter(1.0, 0.0)))
        mu = homogenized_index(p, cfg)
        assert np.allclose(mu.values, cfg.ns1, rtol=1e-12)

    def test_mix_hand_value(self):
        g = self.geom()
        cfg = HelmholtzConfig(k=10.0, geometry=g, kappa0=0.1, kappa1=0.1, n1=0.5)
        p = ProbabilityField(ScalarField2D.constant(g, 0.3))
        mu = homogenized_index(p, cfg)
        assert np.allclose(mu.values, 0.775 + 0.1j, rtol=1e-12)

    def test_absorption_floor(self):
        g = self.geom()
        cfg = HelmholtzConfig(k=10.0, geometry=g, kappa0=0.3, kappa1=0.7, n1=0.5)
        rng = np.random.default_rng(3)
        p = ProbabilityField(ScalarField2D(g, rng.uniform(0, 0.999, g.n_cells)))
        mu = homogenized_index(p, cfg)
        assert mu.values.imag.min() >= min(cfg.kappa0, cfg.kappa1) - 1e-12


def gaussian_density(geom: GridGeometry, amplitude: float, sigma: float) -> DensityField:
    xs = geom.x_centers() - (geom.x0 + geom.extent[0] / 2)
    ys = geom.y_centers() - (geom.y0 + geom.extent[1] / 2)
    r2 = ys[:, None] ** 2 + xs[None, :] ** 2
    return DensityField(
        ScalarField2D.from_grid(geom, amplitude * np.exp(-r2 / (2 * sigma**2))))


def gaussian_source(geom: GridGeometry, width: float) -> ComplexField2D:
    xs = geom.x_centers() - (geom.x0 + geom.extent[0] / 2)
    ys = geom.y_centers() - (geom.y0 + geom.extent[1] / 2)
    r2 = ys[:, None] ** 2 + xs[None, :] ** 2
    return ComplexField2D(geom, np.exp(-r2 / (2 * width**2)).reshape(-1).astype(complex))


class TestConvergenceStudy:
    def study_config(self, n=48):
        geom = GridGeometry(nx=n, ny=n, dx=1e-3, dy=1e-3)
        extent = n * 1e-3
        k = 2 * math.pi * 1.5 / extent
        cfg = HelmholtzConfig(k=k, geometry=geom, kappa0=4.0, kappa1=4.0, n1=0.5)
        return geom, cfg

    def test_zero_density_zero_error(self):
        geom, cfg = self.study_config()
        spec = ConvergenceStudySpec(
            epsilons=(0.016, 0.008, 0.004),
            realizations_per_eps=8,
            density=DensityField(ScalarField2D.constant(geom, 0.0)),
            holder_alpha=1.0,
            source=gaussian_source(geom, 0.01),
            seed=7,
        )
        report = convergence_study(spec, cfg, bootstrap=10)
        assert all(e == 0.0 for e in report.mean_sq_errors)
        assert math.isnan(report.slope)

    def test_doubling_realizations_is_consistent(self):
        geom, cfg = self.study_config()
        density = gaussian_density(geom, 1.5, 0.008)
        source = gaussian_source(geom, 0.01)
        reports = []
        for m, seed in [(8, 11), (16, 12)]:
            spec = ConvergenceStudySpec(
                epsilons=(0.016, 0.008, 0.004), realizations_per_eps=m,
                density=density, holder_alpha=1.0, source=source, seed=seed,
            )
            reports.append(convergence_study(spec, cfg, bootstrap=20))
        for e8, s8, e16, s16 in zip(reports[0].mean_sq_errors, reports[0].stderrs,
                                    reports[1].mean_sq_errors, reports[1].stderrs):
            assert abs(e8 - e16) < 3.0 * math.hypot(s8, s16)

    def test_under_resolved_epsilon_rejected(self):
        geom, cfg = self.study_config()
        spec = ConvergenceStudySpec(
            epsilons=(0.016, 0.008, 0.002),  # 2 cells at dx = 1 mm
            realizations_per_eps=8,
            density=gaussian_density(geom, 1.0, 0.01),
            holder_alpha=1.0,
            source=gaussian_source(geom, 0.01),
        )
        with pytest.raises(ValueError, match="under-resolved"):
            convergence_study(spec, cfg)

    def test_heterogeneous_index_uses_cloud(self):
        geom, cfg = self.study_config(n=32)
        density = gaussian_density(geom, 2.0, 0.008)
        cloud = sample_cloud(density, 0.004, seed=3)
        ns = heterogeneous_index(cloud, cfg, geom)
        vals = set(np.unique(ns.values))
        assert vals <= {complex(cfg.ns0), complex(cfg.ns1)}


class TestStudyReportIO:
    def test_roundtrip(self, tmp_path):
        from sedinv.helmholtz import StudyReport

        report = StudyReport(
            epsilons=(0.016, 0.008, 0.004),
            mean_sq_errors=(1e-4, 2.6e-5, 6.1e-6),
            stderrs=(1e-5, 2e-6, 5e-7),
            realizations_per_eps=32,
            slope=2.02,
            slope_ci=(1.8, 2.2),
            u_norm_sq=1.23,
            max_energy_ratio=0.4,
        )
        path = tmp_path / "study.csv"
        write_study_report(report, path)
        back = read_study_report(path)
        assert np.allclose(back["epsilon"], report.epsilons)
        assert np.allclose(back["mean_sq_error"], report.mean_sq_errors)
        assert back["slope"] == pytest.approx(2.02)
        assert back["M"].tolist() == [32, 32, 32]
