import dataclasses

import pytest

from coevgan import cli
from coevgan.config import OUT_ENV, ConfigError, ExperimentConfig, default_out_dir, load_config


def test_defaults_without_file():
    cfg = load_config()
    assert cfg == ExperimentConfig()
    assert (cfg.runs, cfg.generations, cfg.pop_size, cfg.mutation_step) == (120, 100, 10, 1.0)


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    assert load_config(p) == ExperimentConfig()


def test_file_values_and_comments(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("# comment\nruns = 5  # trailing\nexecution = async\ntrace = yes\nmutation_step=0.5\n")
    cfg = load_config(p)
    assert (cfg.runs, cfg.execution, cfg.trace, cfg.mutation_step) == (5, "async", True, 0.5)


def test_zero_runs_names_key(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("runs = 0\n")
    with pytest.raises(ConfigError, match="runs"):
        load_config(p)


def test_unknown_key_and_line_number(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("runs = 3\npopsize = 4\n")
    with pytest.raises(ConfigError, match=r"a\.cfg:2: unknown key 'popsize'"):
        load_config(p)
    p.write_text("runs = 3\n\ngenerations = many\n")
    with pytest.raises(ConfigError, match=r":3:.*generations"):
        load_config(p)
    p.write_text("just words\n")
    with pytest.raises(ConfigError, match=":1:"):
        load_config(p)


def test_override_precedence(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("generations = 100\n")
    assert load_config(p, {"generations": "7"}).generations == 7


def test_paper_scale():
    cfg = load_config(overrides={"paper_scale": True})
    assert (cfg.heatmap_step, cfg.heatmap_runs, cfg.heatmap_generations) == (0.1, 120, 100)


def test_validation_messages():
    with pytest.raises(ConfigError, match="selection_prob"):
        dataclasses.replace(ExperimentConfig(), selection_prob=1.5).validate()
    with pytest.raises(ConfigError, match="heatmap_lo"):
        dataclasses.replace(ExperimentConfig(), heatmap_lo=3.0, heatmap_hi=3.0).validate()


def test_out_env(monkeypatch):
    monkeypatch.delenv(OUT_ENV, raising=False)
    assert default_out_dir() == "results"
    monkeypatch.setenv(OUT_ENV, "/tmp/elsewhere")
    assert default_out_dir() == "/tmp/elsewhere"


def test_cli_flag_overrides_file(tmp_path, monkeypatch):
    p = tmp_path / "a.cfg"
    p.write_text("generations = 100\nruns = 1\npop_size = 2\n")
    seen = {}
    monkeypatch.setattr(cli, "run", lambda cmd, cfg, out: seen.update(cfg=cfg, out=out) or {"runs": 1})
    code = cli.main(["converge", "--config", str(p), "--generations=7", "--seed", "3", "--out", str(tmp_path)])
    assert code == 0
    assert seen["cfg"].generations == 7 and seen["cfg"].master_seed == 3 and seen["out"] == str(tmp_path)


def test_cli_global_flags(monkeypatch, tmp_path):
    seen = {}
    monkeypatch.setattr(cli, "run", lambda cmd, cfg, out: seen.update(cfg=cfg) or {"k": 0, "g": 0.0})
    assert cli.main(["grid-run", "--async", "--weighted-fitness", "--workers", "2", "--out", str(tmp_path)]) == 0
    cfg = seen["cfg"]
    assert (cfg.execution, cfg.fitness_weighting, cfg.workers, cfg.experiment) == ("async", "weighted", 2, "grid-run")


def test_cli_env_out_dir(monkeypatch, tmp_path):
    seen = {}
    monkeypatch.setattr(cli, "run", lambda cmd, cfg, out: seen.update(out=out) or {"runs": 1})
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["baseline", "--runs", "1"]) == 0
    assert seen["out"] == str(tmp_path / "env")


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    assert cli.main(["converge", "--runs", "0", "--out", str(tmp_path)]) == 1
    assert "runs" in capsys.readouterr().err
    assert cli.main(["converge", "--config", str(tmp_path / "missing.cfg")]) == 1

    def boom(*a):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["converge", "--out", str(tmp_path)]) == 2
    assert "disk on fire" in capsys.readouterr().err


def test_cli_rejects_unknown_subcommand():
    with pytest.raises(SystemExit):
        cli.main(["sideways"])
