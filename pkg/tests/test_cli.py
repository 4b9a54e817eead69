import hashlib

import numpy as np
import pytest

from fluidsea.cli import main
from fluidsea.controllers import CompositeConfig
from fluidsea.experiments import (
    ConfigError,
    parse_config,
    preset_config,
    presets,
    run_experiment,
    run_preset,
    serialize_config,
)

WORKLOOP_CFG = """
[controller]
type = composite
lambda_hz = 20

[analysis]
type = workloop
backdrive_cycles = 4
fit_dahl = true
"""

PASSIVITY_CFG = """
[controller]
type = dob
lambda = 20

[analysis]
type = passivity
"""


class TestConfigParsing:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.plant.m == pytest.approx(1.1116e-3)
        assert cfg.controller is None
        assert cfg.analysis.kind == "simulate"

    def test_round_trip(self):
        cfg = parse_config(WORKLOOP_CFG)
        again = parse_config(serialize_config(cfg))
        assert again == cfg

    def test_round_trip_all_controllers(self):
        for block in (
            "type = none",
            "type = proportional\nK_f = 0.7\nsource = external",
            "type = dob\nlambda = 30\nm_n = 1e-3\nb_n = 1e-4\nk_n = 0.01",
            "type = pd\nK_p = 50\nK_d = 1\ndelay_samples = 1",
            "type = composite\nlambda = 20\nff_dahl = false",
        ):
            text = f"[controller]\n{block}\n\n[analysis]\ntype = simulate\n"
            cfg = parse_config(text)
            assert parse_config(serialize_config(cfg)) == cfg

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="banana"):
            parse_config("[plant]\nbanana = 1\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="motor"):
            parse_config("[motor]\nm = 1\n")

    def test_bad_number_named(self):
        with pytest.raises(ConfigError, match="m"):
            parse_config("[plant]\nm = fast\n")

    def test_lambda_units_exclusive(self):
        with pytest.raises(ConfigError, match="lambda"):
            parse_config("[controller]\ntype = dob\nlambda = 20\nlambda_hz = 20\n")

    def test_lambda_hz_converted(self):
        cfg = parse_config("[controller]\ntype = dob\nlambda_hz = 20\n")
        assert cfg.controller.lam == pytest.approx(2 * np.pi * 20.0)

    def test_invalid_plant_value(self):
        with pytest.raises(ConfigError, match="plant"):
            parse_config("[plant]\nm = -1\n")

    def test_dt_domain(self):
        with pytest.raises(ConfigError, match="dt"):
            parse_config("[run]\ndt = 0.5\n")


class TestPresets:
    def test_seven_presets(self):
        names = presets()
        assert len(names) == 7
        assert set(names) == {
            "fig3-chirp", "fig4-sysid", "fig5-ff-compare", "fig6a-workloop",
            "fig6b-feedforward", "fig6c-zwidth", "fig7-dahl-fit",
        }

    def test_configs_build(self):
        for name in presets():
            cfg = preset_config(name)
            assert cfg.analysis.kind in (
                "simulate", "sysid", "impedance", "workloop", "zwidth"
            )

    def test_feedforward_presets_use_hz_reading(self):
        cfg = preset_config("fig6b-feedforward")
        assert isinstance(cfg.controller, CompositeConfig)
        assert cfg.controller.dob.lam == pytest.approx(2 * np.pi * 20.0)
        zcfg = preset_config("fig6c-zwidth")
        assert zcfg.controller.dob.lam == pytest.approx(20.0)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            preset_config("fig9-nope")

    def test_fig5_preset_runs(self, tmp_path):
        files = run_preset("fig5-ff-compare", str(tmp_path))
        assert "impedance_passive.csv" in files
        assert "impedance_internal.csv" in files
        assert "impedance_external.csv" in files
        assert "manifest.txt" in files
        data = np.loadtxt(tmp_path / "impedance_internal.csv", delimiter=",", skiprows=1)
        assert data.shape[1] == 3

    def test_fig7_preset_runs(self, tmp_path):
        files = run_preset("fig7-dahl-fit", str(tmp_path))
        assert "loop_external.csv" in files
        report = open(tmp_path / "workloop_report.txt").read()
        assert "dahl fit" in report
        assert "0.032" in report and "12.8" in report


class TestRunExperiment:
    def test_manifest_hashes(self, tmp_path):
        cfg = parse_config(PASSIVITY_CFG)
        files = run_experiment(cfg, str(tmp_path))
        manifest = {}
        for line in open(tmp_path / "manifest.txt"):
            digest, name = line.strip().split("  ", 1)
            manifest[name] = digest
        for name in files:
            if name == "manifest.txt":
                continue
            digest = hashlib.sha256(open(tmp_path / name, "rb").read()).hexdigest()
            assert manifest[name] == digest

    def test_deterministic_outputs(self, tmp_path):
        cfg = parse_config(WORKLOOP_CFG)
        run_experiment(cfg, str(tmp_path / "a"))
        run_experiment(cfg, str(tmp_path / "b"))
        for name in ("loop_external.csv", "workloop_report.txt", "manifest.txt"):
            assert (
                open(tmp_path / "a" / name, "rb").read()
                == open(tmp_path / "b" / name, "rb").read()
            )

    def test_noise_is_seeded(self, tmp_path):
        text = """
[excitation]
type = chirp
amplitude = 0.3
f0 = 0.05
f1 = 400
duration = 60
noise_std = 1e-5

[analysis]
type = sysid

[run]
seed = 7
"""
        import warnings

        cfg = parse_config(text)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            run_experiment(cfg, str(tmp_path / "a"))
            run_experiment(cfg, str(tmp_path / "b"))
        assert (
            open(tmp_path / "a" / "frf_motor.csv", "rb").read()
            == open(tmp_path / "b" / "frf_motor.csv", "rb").read()
        )


class TestCli:
    def test_passivity_command(self, tmp_path, capsys):
        cfg_path = tmp_path / "exp.ini"
        cfg_path.write_text(PASSIVITY_CFG)
        rc = main(["passivity", str(cfg_path), "--out", str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "passivity_report.txt").exists()

    def test_command_analysis_mismatch(self, tmp_path):
        cfg_path = tmp_path / "exp.ini"
        cfg_path.write_text(PASSIVITY_CFG)
        rc = main(["simulate", str(cfg_path), "--out", str(tmp_path / "out")])
        assert rc == 2

    def test_validation_exit_code(self, tmp_path, capsys):
        cfg_path = tmp_path / "exp.ini"
        cfg_path.write_text("[plant]\nbanana = 1\n")
        rc = main(["simulate", str(cfg_path)])
        assert rc == 2
        assert "banana" in capsys.readouterr().err

    def test_numerical_failure_exit_code(self, tmp_path):
        cfg_path = tmp_path / "exp.ini"
        cfg_path.write_text(
            """
[controller]
type = pd
K_p = 2e5
K_d = 4e3
delay_samples = 1

[excitation]
type = sine
amplitude = 0.5
omega = 5

[plant]
m = 1.1116e-3
b = 0

[analysis]
type = simulate

[run]
duration = 5
"""
        )
        out = tmp_path / "out"
        rc = main(["simulate", str(cfg_path), "--out", str(out)])
        assert rc == 3
        assert (out / "manifest.txt").exists()  # partial manifest

    def test_missing_config_file(self, tmp_path):
        rc = main(["simulate", str(tmp_path / "nope.ini")])
        assert rc == 2

    def test_lambda_override(self, tmp_path):
        cfg_path = tmp_path / "exp.ini"
        cfg_path.write_text(PASSIVITY_CFG)
        rc = main(
            ["passivity", str(cfg_path), "--out", str(tmp_path / "o"), "--lambda", "40"]
        )
        assert rc == 0
        assert "lambda 40.0" in open(tmp_path / "o" / "passivity_report.txt").read()

    def test_presets_listing(self, capsys):
        assert main(["presets"]) == 0
        out = capsys.readouterr().out
        assert "fig6c-zwidth" in out and out.count("fig") == 7

    def test_zwidth_command_small_grid(self, gripper, tmp_path):
        cfg_path = tmp_path / "exp.ini"
        cfg_path.write_text(
            """
[controller]
type = composite
lambda = 20

[analysis]
type = zwidth
grid_min = 3
grid_max = 10
grid_points = 2
"""
        )
        out = tmp_path / "zw"
        rc = main(["zwidth", str(cfg_path), "--out", str(out)])
        assert rc == 0
        data = np.loadtxt(out / "zwidth.csv", delimiter=",", skiprows=1)
        assert data.shape == (2, 4)
        assert np.all(data[:, 3] > 20.0)  # healthy width on both points
