import json

import pytest

from rpolab.cli import (
    DEFAULTS,
    PARSERS,
    _parse_bool,
    _parse_float_list,
    _parse_int_list,
    build_parser,
    main,
    read_config_file,
    resolve_settings,
)
from rpolab.errors import ConfigError, TrainingDiverged


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for key in PARSERS:
        monkeypatch.delenv(f"RPOLAB_{key.upper()}", raising=False)
    monkeypatch.delenv("RPOLAB_CONFIG", raising=False)


def parse(argv):
    return build_parser().parse_args(argv)


class TestValueParsers:
    def test_bool_spellings(self):
        for raw in ("1", "true", "Yes", "ON"):
            assert _parse_bool(raw) is True
        for raw in ("0", "false", "No", "off"):
            assert _parse_bool(raw) is False
        with pytest.raises(ValueError):
            _parse_bool("maybe")

    def test_int_list(self):
        assert _parse_int_list("1,2,3") == [1, 2, 3]
        assert _parse_int_list("7") == [7]
        with pytest.raises(ValueError):
            _parse_int_list("")
        with pytest.raises(ValueError):
            _parse_int_list("1,x")

    def test_float_list(self):
        assert _parse_float_list("0.001,0.5,1000") == [0.001, 0.5, 1000.0]
        with pytest.raises(ValueError):
            _parse_float_list(",")


class TestConfigFile:
    def test_parse_with_comments_and_dashes(self, tmp_path):
        cfg = tmp_path / "rpolab.cfg"
        cfg.write_text("# sweep defaults\n\nenv = pendulum\nent-coef = 0.01\nseeds=1,2\n")
        assert read_config_file(cfg) == {"env": "pendulum", "ent_coef": "0.01",
                                         "seeds": "1,2"}

    def test_unknown_key_names_location(self, tmp_path):
        cfg = tmp_path / "rpolab.cfg"
        cfg.write_text("env=pendulum\nlearning-rate=0.1\n")
        with pytest.raises(ConfigError, match=r"rpolab\.cfg:2"):
            read_config_file(cfg)

    def test_missing_equals_rejected(self, tmp_path):
        cfg = tmp_path / "rpolab.cfg"
        cfg.write_text("pendulum\n")
        with pytest.raises(ConfigError, match=r"rpolab\.cfg:1"):
            read_config_file(cfg)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            read_config_file(tmp_path / "nope.cfg")


class TestPrecedence:
    def test_flag_beats_env_beats_config_beats_default(self, monkeypatch):
        ns = parse(["train", "--env", "pointmass"])
        config = {"ent_coef": "0.01", "out": "from-config"}

        s = resolve_settings(ns, config)
        assert (s.ent_coef, s.out) == (0.01, "from-config")

        monkeypatch.setenv("RPOLAB_ENT_COEF", "0.05")
        monkeypatch.setenv("RPOLAB_OUT", "from-env")
        s = resolve_settings(ns, config)
        assert (s.ent_coef, s.out) == (0.05, "from-env")

        ns = parse(["train", "--env", "pointmass", "--ent-coef", "0.5",
                    "--out", "from-flag"])
        s = resolve_settings(ns, config)
        assert (s.ent_coef, s.out) == (0.5, "from-flag")

    def test_defaults_when_nothing_set(self):
        s = resolve_settings(parse(["train"]), {})
        assert (s.out, s.seeds, s.workers, s.algo) == ("runs", [1], 1, "ppo")
        assert s.env is None and s.alpha is None

    def test_env_var_parse_error(self, monkeypatch):
        monkeypatch.setenv("RPOLAB_SEEDS", "1;2")
        with pytest.raises(ConfigError, match="seeds"):
            resolve_settings(parse(["train", "--env", "pointmass"]), {})

    def test_unused_defaults_are_conservative(self):
        assert DEFAULTS["fixed_wall_clock"] is False and DEFAULTS["quiet"] is False


class TestMainErrorPaths:
    def test_unknown_env_exits_2(self, capsys):
        assert main(["train", "--env", "walker"]) == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_missing_env_exits_2(self, capsys):
        assert main(["train"]) == 2
        assert "missing required option: env" in capsys.readouterr().err

    def test_sweep_alpha_requires_alphas(self, capsys):
        assert main(["sweep-alpha", "--env", "pointmass"]) == 2
        assert "alphas" in capsys.readouterr().err

    def test_alpha_with_ppo_exits_2(self, capsys):
        assert main(["train", "--env", "pointmass", "--algo", "ppo",
                     "--alpha", "0.3"]) == 2
        assert "alpha" in capsys.readouterr().err

    def test_bad_env_var_bool_exits_2(self, monkeypatch, capsys):
        monkeypatch.setenv("RPOLAB_QUIET", "maybe")
        assert main(["train", "--env", "pointmass"]) == 2
        assert "quiet" in capsys.readouterr().err

    def test_config_env_var_missing_file_exits_2(self, monkeypatch, capsys):
        monkeypatch.setenv("RPOLAB_CONFIG", "/does/not/exist.cfg")
        assert main(["aggregate"]) == 2
        assert "not found" in capsys.readouterr().err

    def test_aggregate_without_runs_exits_2(self, tmp_path, capsys):
        assert main(["aggregate", "--out", str(tmp_path)]) == 2
        assert str(tmp_path) in capsys.readouterr().err

    def test_no_subcommand_is_usage_error(self, capsys):
        with pytest.raises(SystemExit):
            main([])

    def test_divergence_exits_1(self, monkeypatch, capsys):
        def boom(*a, **kw):
            raise TrainingDiverged("probability ratio overflow", {"iteration": 3})

        monkeypatch.setattr("rpolab.cli.run", boom)
        assert main(["train", "--env", "pointmass", "--quiet"]) == 1
        err = capsys.readouterr().err
        assert "training diverged" in err and "iteration" in err


class TestEndToEnd:
    def train_args(self, out, extra=()):
        return ["train", "--env", "pointmass", "--total-timesteps", "2048",
                "--fixed-wall-clock", "--quiet", "--out", str(out), *extra]

    def test_train_aggregate_plot_pipeline(self, tmp_path, capsys):
        assert main(self.train_args(tmp_path)) == 0
        out = capsys.readouterr().out
        csv = tmp_path / "pointmass" / "ppo-gaussian" / "seed1.csv"
        assert str(csv) in out and csv.exists()

        assert main(["aggregate", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "pointmass/ppo-gaussian: return" in out
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["pointmass/ppo-gaussian"]["seeds"] == [1]

        assert main(["plot", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert (tmp_path / "charts" / "pointmass_return.svg").exists()
        assert "pointmass_entropy.svg" in out

    def test_fixed_clock_runs_reproduce_bytes(self, tmp_path, capsys):
        assert main(self.train_args(tmp_path / "a")) == 0
        assert main(self.train_args(tmp_path / "b")) == 0
        capsys.readouterr()
        a = (tmp_path / "a" / "pointmass" / "ppo-gaussian" / "seed1.csv").read_bytes()
        b = (tmp_path / "b" / "pointmass" / "ppo-gaussian" / "seed1.csv").read_bytes()
        assert a == b

    def test_multiple_seeds_make_multiple_csvs(self, tmp_path, capsys):
        assert main(self.train_args(tmp_path, extra=["--seeds", "1,2"])) == 0
        capsys.readouterr()
        variant = tmp_path / "pointmass" / "ppo-gaussian"
        assert sorted(p.name for p in variant.iterdir()) == ["seed1.csv", "seed2.csv"]

    def test_progress_lines_unless_quiet(self, tmp_path, capsys):
        args = self.train_args(tmp_path)
        args.remove("--quiet")
        assert main(args) == 0
        assert "done in" in capsys.readouterr().err
        assert main(self.train_args(tmp_path / "q")) == 0
        assert capsys.readouterr().err == ""

    def test_sweep_ent_with_explicit_coefs(self, tmp_path, capsys):
        assert main(["sweep-ent", "--env", "pointmass", "--coefs", "0.0,0.01",
                     "--total-timesteps", "2048", "--fixed-wall-clock",
                     "--quiet", "--out", str(tmp_path)]) == 0
        capsys.readouterr()
        env_dir = tmp_path / "pointmass"
        assert sorted(p.name for p in env_dir.iterdir()) == [
            "ppo-gaussian", "ppo-gaussian-ent0.01"]

    def test_sweep_alpha_end_to_end(self, tmp_path, capsys):
        assert main(["sweep-alpha", "--env", "pointmass", "--alphas", "0.0,0.5",
                     "--total-timesteps", "2048", "--fixed-wall-clock",
                     "--quiet", "--out", str(tmp_path)]) == 0
        capsys.readouterr()
        env_dir = tmp_path / "pointmass"
        assert sorted(p.name for p in env_dir.iterdir()) == [
            "rpo-gaussian-a0", "rpo-gaussian-a0.5"]

    def test_config_file_via_flag(self, tmp_path, capsys):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(f"env=pointmass\ntotal-timesteps=2048\nquiet=1\n"
                       f"fixed-wall-clock=1\nout={tmp_path / 'runs'}\n")
        assert main(["train", "--config", str(cfg)]) == 0
        capsys.readouterr()
        assert (tmp_path / "runs" / "pointmass" / "ppo-gaussian" / "seed1.csv").exists()
