"""Command line layer: config parsing, file formats, exit codes."""

import hashlib
import os
import subprocess
import sys

import numpy as np
import pytest

from ntcircle import GOLDEN_MEAN, cli


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def md5(path):
    with open(path, "rb") as fh:
        return hashlib.md5(fh.read()).hexdigest()


class TestConfigParsing:
    def test_empty_text_gives_defaults(self):
        assert cli.parse_config("") == cli.RunConfig()

    def test_comments_blanks_and_golden_keyword(self):
        cfg = cli.parse_config(
            "# header comment\n"
            "\n"
            "omega = golden   # trailing comment\n"
            "sigma = 0.5\n"
        )
        assert cfg.omega == GOLDEN_MEAN
        assert cfg.sigma == 0.5

    def test_unknown_key_points_at_line(self):
        with pytest.raises(ValueError, match=r"line 2: unknown config key"):
            cli.parse_config("sigma = 0.5\nsgima = 0.5\n")

    def test_duplicate_key_points_at_line(self):
        with pytest.raises(ValueError, match=r"line 3: duplicate key"):
            cli.parse_config("sigma = 0.5\n\nsigma = 0.6\n")

    def test_line_without_equals_rejected(self):
        with pytest.raises(ValueError, match=r"line 1: expected key=value"):
            cli.parse_config("just words\n")

    def test_uncastable_value_names_key(self):
        with pytest.raises(ValueError, match=r"line 1: bad value for n_min"):
            cli.parse_config("n_min = many\n")

    def test_boolean_spellings(self):
        for text, want in (("on", True), ("TRUE", True), ("1", True),
                           ("off", False), ("no", False), ("0", False)):
            assert cli.parse_config(f"timing = {text}\n").timing is want
        with pytest.raises(ValueError, match="line 1"):
            cli.parse_config("timing = maybe\n")

    def test_float_list(self):
        cfg = cli.parse_config("b_a0_list = -0.2, 0, 0.2\n")
        assert cfg.b_a0_list == (-0.2, 0.0, 0.2)
        with pytest.raises(ValueError, match="line 1"):
            cli.parse_config("b_a0_list = ,\n")


class TestConfigValidation:
    @pytest.mark.parametrize(
        "text, match",
        [
            ("family = std", "unknown family"),
            ("variant = twisted", "unknown forcing variant"),
            ("sigma = 1.5", "sigma in"),
            ("omega = 0", "omega in"),
            ("eps_target = -1", "nonnegative"),
            ("tol = 0", "must be positive"),
            ("step_init = 0.5\nstep_max = 0.2", "step_min <= step_init"),
            ("threads = 0", "at least 1"),
            ("n_min = 512\nn_max = 256", "n_min <= n_max"),
            ("sweep_which = b", "sweep_which"),
            ("sweep_order = 3", "sweep_order"),
        ],
    )
    def test_bad_configs_rejected(self, text, match):
        with pytest.raises(ValueError, match=match):
            cli.parse_config(text + "\n")


class TestCsvCells:
    def test_float_cells_round_trip_exactly(self, tmp_path):
        rows = [(1.0 / 3.0, GOLDEN_MEAN), (0.1, -2.5e17), (1e-300, 4.0)]
        path = str(tmp_path / "table.csv")
        cli.write_csv(path, ("eps", "alpha"), rows)
        back = cli.read_alpha_csv(path)
        assert [(p.eps, p.alpha) for p in back] == rows

    def test_cell_formats(self):
        assert cli._fmt(True) == "1"
        assert cli._fmt(False) == "0"
        assert cli._fmt(7) == "7"
        assert cli._fmt(np.int64(-3)) == "-3"
        assert float(cli._fmt(np.float64(0.1))) == 0.1


BASE_CFG = """
family = dsntm
variant = symmetric
sigma = 0.8
omega = golden
"""


class TestContinueCommand:
    def test_reaches_target_and_writes_tables(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, BASE_CFG + "eps_target = 0.25\n")
        out = str(tmp_path / "out")
        rc = cli.main(["continue-nontwist", "--config", cfg, "--out", out])
        assert rc == 0
        assert "stopped: target" in capsys.readouterr().out

        with open(os.path.join(out, "path.csv")) as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",")
        assert tuple(header) == cli.PATH_HEADER
        eps = data[:, 0]
        assert eps[0] == 0.0 and eps[-1] == 0.25
        assert np.all(np.diff(eps) > 0)
        assert np.all(data[:, 4] <= 1e-10)       # invariance errors
        assert np.all(data[:, 9] == 0.0)         # timing off: wall_ms zeroed

        circle = np.loadtxt(os.path.join(out, "final_circle.csv"),
                            delimiter=",", skiprows=1)
        assert circle.shape == (int(data[-1, 3]), 5)

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_CFG + "eps_target = 0.15\n")
        sums = []
        for tag in ("one", "two"):
            out = str(tmp_path / tag)
            assert cli.main(["continue-nontwist", "--config", cfg,
                             "--out", out]) == 0
            sums.append((md5(os.path.join(out, "path.csv")),
                         md5(os.path.join(out, "final_circle.csv"))))
        assert sums[0] == sums[1]

    def test_alpha_floor_stop_returns_2(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, BASE_CFG
                        + "eps_target = 5.0\nalpha_floor = 1.5\n")
        rc = cli.main(["continue-nontwist", "--config", cfg,
                       "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "stopped: alpha-floor" in capsys.readouterr().out

    def test_out_dir_precedence(self, tmp_path, monkeypatch):
        cfg_dir = tmp_path / "from_cfg"
        env_dir = tmp_path / "from_env"
        flag_dir = tmp_path / "from_flag"
        cfg = write_cfg(tmp_path, BASE_CFG
                        + f"eps_target = 0.0\nout_dir = {cfg_dir}\n")

        monkeypatch.setenv(cli.ENV_OUT_DIR, str(env_dir))
        assert cli.main(["continue-nontwist", "--config", cfg,
                         "--out", str(flag_dir)]) == 0
        assert (flag_dir / "path.csv").exists()
        assert not env_dir.exists()

        assert cli.main(["continue-nontwist", "--config", cfg]) == 0
        assert (env_dir / "path.csv").exists()
        assert not cfg_dir.exists()

        monkeypatch.delenv(cli.ENV_OUT_DIR)
        assert cli.main(["continue-nontwist", "--config", cfg]) == 0
        assert (cfg_dir / "path.csv").exists()

    def test_missing_config_reports_error(self, tmp_path, capsys):
        rc = cli.main(["continue-nontwist",
                       "--config", str(tmp_path / "nope.cfg")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_config_error_reports_error(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "sigma = 2.0\n")
        assert cli.main(["continue-nontwist", "--config", cfg]) == 1
        assert "sigma" in capsys.readouterr().err

    def test_unknown_command_is_usage_error(self, tmp_path):
        cfg = write_cfg(tmp_path, "")
        with pytest.raises(SystemExit):
            cli.main(["jiggle", "--config", cfg])


class TestBreakdownCommand:
    def fit_value(self, out, name):
        with open(os.path.join(out, "fit.txt")) as fh:
            for line in fh:
                key, _, val = line.partition("=")
                if key.strip() == name:
                    return float(val)
        raise AssertionError(f"{name} missing from fit.txt")

    def test_input_table_mode_fits_linear_crossing(self, tmp_path, capsys):
        table = str(tmp_path / "alpha_in.csv")
        eps = 3.0 + 0.01 * np.arange(31)
        cli.write_csv(table, ("eps", "alpha"),
                      zip(eps, 0.5 * (3.8 - eps)))
        cfg = write_cfg(tmp_path, BASE_CFG + f"alpha_input = {table}\n")
        out = str(tmp_path / "out")
        rc = cli.main(["breakdown", "--config", cfg, "--out", out])
        assert rc == 0
        assert "stopped: input" in capsys.readouterr().out
        assert self.fit_value(out, "eps_c") == pytest.approx(3.8, abs=1e-9)
        assert self.fit_value(out, "slope") == pytest.approx(-0.5, abs=1e-9)
        # the table is echoed back with exact float cells
        back = cli.read_alpha_csv(os.path.join(out, "alpha.csv"))
        assert [(p.eps, p.alpha) for p in back] == \
            [(p.eps, p.alpha) for p in cli.read_alpha_csv(table)]

    def test_non_shrinking_angle_flagged_low_confidence(self, tmp_path,
                                                        capsys):
        table = str(tmp_path / "alpha_in.csv")
        eps = 0.1 * np.arange(10)
        cli.write_csv(table, ("eps", "alpha"), zip(eps, np.full(10, 0.5)))
        cfg = write_cfg(tmp_path, BASE_CFG + f"alpha_input = {table}\n")
        rc = cli.main(["breakdown", "--config", cfg,
                       "--out", str(tmp_path / "out")])
        assert rc == 0
        assert "low confidence" in capsys.readouterr().out


class TestSweepCommand:
    def test_integrable_sweep_is_a_parabola(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_CFG + (
            "eps_target = 0.0\n"
            "sweep_which = a\n"
            "sweep_halfwidth = 0.02\n"
            "sweep_step = 0.01\n"
            "sweep_grid = 256\n"
        ))
        out = str(tmp_path / "out")
        rc = cli.main(["rotnum-sweep", "--config", cfg, "--out", out])
        assert rc == 0
        data = np.loadtxt(os.path.join(out, "rho_vs_param.csv"),
                          delimiter=",", skiprows=1)
        a, rho, err, locked = data.T
        assert len(a) == 5
        # flat family: rotation number is omega + a^2, nothing locks
        assert np.max(np.abs(rho - (GOLDEN_MEAN + a ** 2))) <= 1e-9
        assert np.all(locked == 0.0)
        assert np.all(err <= 1e-9)

    def test_early_stop_skips_sweep(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, BASE_CFG
                        + "eps_target = 5.0\nalpha_floor = 1.5\n")
        out = str(tmp_path / "out")
        rc = cli.main(["rotnum-sweep", "--config", cfg, "--out", out])
        assert rc == 2
        assert "no sweep" in capsys.readouterr().out
        assert not os.path.exists(os.path.join(out, "rho_vs_param.csv"))


class TestTwistSurfaceCommand:
    def test_integrable_surface_rows(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_CFG + (
            "eps_target = 0.0\n"
            "b_a0_list = -0.2, 0.0, 0.2\n"
        ))
        out = str(tmp_path / "out")
        rc = cli.main(["twist-surface", "--config", cfg, "--out", out])
        assert rc == 0
        data = np.loadtxt(os.path.join(out, "surface.csv"),
                          delimiter=",", skiprows=1)
        b, eps, a, mu = data.T
        assert list(b) == [-0.2, 0.0, 0.2]
        assert np.all(eps == 0.0)
        assert np.max(np.abs(a - b / 2.0)) <= 1e-10
        assert np.max(np.abs(mu - (GOLDEN_MEAN - a ** 2))) <= 1e-10


class TestVerifyCommand:
    def test_battery_passes_clean(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, BASE_CFG + "eps_target = 0.5\n")
        rc = cli.main(["verify", "--config", cfg])
        out = capsys.readouterr().out
        assert rc == 0
        assert "OK (0 failing checks)" in out
        assert "FAIL " not in out


class TestConsoleScript:
    def test_installed_entry_point(self, tmp_path):
        table = str(tmp_path / "alpha_in.csv")
        eps = 1.0 + 0.05 * np.arange(8)
        cli.write_csv(table, ("eps", "alpha"), zip(eps, 1.5 - eps))
        cfg = write_cfg(tmp_path, f"alpha_input = {table}\n")
        out = str(tmp_path / "out")
        proc = subprocess.run(
            ["ntcircle", "breakdown", "--config", cfg, "--out", out],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 0, proc.stderr
        assert os.path.exists(os.path.join(out, "fit.txt"))

    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "ntcircle.cli", "--help"],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 0
        assert "continue-nontwist" in proc.stdout
