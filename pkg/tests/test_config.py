import pytest

from sedinv.config import (
    ConfigError,
    ExperimentConfig,
    derive_seed,
    load_config,
    parse_config_text,
    resolve_config,
)


class TestParsing:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg["fine.nx"] == 1000
        assert cfg["medium.c0"] == 1500.0
        assert cfg["profile.kind"] == "gaussian"

    def test_parse_overrides(self):
        cfg = parse_config_text("fine.nx = 200\nprofile.kind = chiu\n")
        assert cfg["fine.nx"] == 200
        assert cfg["profile.kind"] == "chiu"

    def test_comments_and_blank_lines(self):
        cfg = parse_config_text("# a comment\n\nmedium.c1 = 2500\n")
        assert cfg["medium.c1"] == 2500.0

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown configuration key"):
            parse_config_text("nonsense.key = 3\n")

    def test_unknown_profile_names_field(self):
        with pytest.raises(ConfigError, match="profile.kind"):
            parse_config_text("profile.kind = wedge\n")

    def test_bad_value_names_field(self):
        with pytest.raises(ConfigError, match="fine.nx"):
            parse_config_text("fine.nx = pony\n")

    def test_roundtrip_lossless(self):
        cfg = parse_config_text(
            "fine.nx = 180\nmedium.epsilon = 0.004\n"
            "helmholtz.eps_list = 0.02,0.01,0.005\nprofile.kind = chiu\n")
        again = parse_config_text(cfg.to_text())
        assert again == cfg

    def test_validation_ranges(self):
        with pytest.raises(ConfigError, match="profile.p_max"):
            parse_config_text("profile.p_max = 1.5\n")
        with pytest.raises(ConfigError, match="solver.fine_cfl"):
            parse_config_text("solver.fine_cfl = 0.95\n")


class TestBuilders:
    def test_geometries_cover_domain(self):
        cfg = ExperimentConfig({"fine.nx": 200, "fine.ny": 100})
        g = cfg.fine_geometry()
        assert g.extent == (1.0, 1.0)
        assert g.nx == 200 and g.ny == 100

    def test_acquisition_counts(self):
        cfg = ExperimentConfig({"acquisition.n_sources": 3,
                                "acquisition.n_receivers": 17})
        acq = cfg.acquisition()
        assert len(acq.sources) == 3
        assert acq.n_receivers == 17

    def test_profile_dispatch(self):
        gauss = ExperimentConfig().profile(ExperimentConfig().coarse_geometry())
        assert gauss.field.values.max() > 0
        chiu_cfg = ExperimentConfig({"profile.kind": "chiu"})
        chiu = chiu_cfg.profile(chiu_cfg.coarse_geometry())
        assert chiu.field.as_grid()[0, 0] > chiu.field.as_grid()[-1, 0]


class TestPresets:
    def test_known_presets_resolve(self):
        for name in ("gaussian-desk", "chiu-desk"):
            cfg = resolve_config(name)
            assert cfg["fine.nx"] == 1000
            assert cfg["coarse.nx"] == 100
            assert cfg["acquisition.f0"] == 15000.0
            assert cfg["acquisition.record_T"] == 1e-3
            assert cfg["medium.c0"] == 1500.0
            assert cfg["medium.c1"] == 3000.0
            assert cfg["realizations.n"] == 50

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="neither a file nor a preset"):
            resolve_config("no-such-thing")

    def test_file_beats_preset(self, tmp_path):
        p = tmp_path / "gaussian-desk"
        p.write_text("fine.nx = 77\n")
        cfg = resolve_config(str(p))
        assert cfg["fine.nx"] == 77

    def test_load_config(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("coarse.nx = 64\ncoarse.ny = 64\n")
        cfg = load_config(p)
        assert cfg.coarse_geometry().nx == 64


class TestSeeds:
    def test_derivation_deterministic(self):
        a = derive_seed(123, 0)
        b = derive_seed(123, 0)
        assert a == b
        assert derive_seed(123, 1) != a
        assert derive_seed(124, 0) != a

    def test_seed_list(self):
        cfg = ExperimentConfig({"realizations.n": 5, "seeds.master": 99})
        seeds = cfg.seeds()
        assert len(seeds) == 5
        assert len(set(seeds)) == 5
        assert seeds[2] == derive_seed(99, 2)

    def test_64_bit_range(self):
        for k in range(50):
            s = derive_seed(2**63, k)
            assert 0 <= s < 2**64
