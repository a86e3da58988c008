import json

import numpy as np
import pytest

from spikeproj import ConfigError
from spikeproj.cli import main, parse_config_file


GOOD_CONFIG = """\
# null calibration cell, written out long-hand
experiment = size_table
spikes = 5:1
bulk = 2:0.5, 1:0.5
rotation = identity
n = 200
c = 0.1
replicates = 6
seed = 11
"""


def write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# ----------------------------------------------------------------- config file


def test_parse_config_round_trip(tmp_path):
    cfg = parse_config_file(write(tmp_path, GOOD_CONFIG))
    assert cfg.experiment == "size_table"
    assert cfg.spikes == ((5.0, 1),)
    assert cfg.bulk == ((2.0, 0.5), (1.0, 0.5))
    assert cfg.p == 20  # c = 0.1 with n = 200
    assert cfg.replicates == 6
    assert cfg.seed == 11
    assert cfg.level == 0.05


def test_parse_config_rich_keys(tmp_path):
    text = """\
experiment = clt_figure
spikes = 4:1, 3:2
bulk = 1:1
rotation = bidiagonal:0.4
distribution = student_t:6
p = 30
n = 120
track = 1, 2
"""
    cfg = parse_config_file(write(tmp_path, text))
    assert cfg.rotation.kind == "bidiagonal"
    assert cfg.rotation.tau == 0.4
    assert cfg.distribution.kind == "student_t"
    assert cfg.distribution.dof == 6.0
    assert cfg.track == (0, 1)  # file is 1-based, config is 0-based


@pytest.mark.parametrize(
    "mutation,needle",
    [
        ("n = 200", "already set"),  # duplicated key
        ("color = red", "unknown key"),
        ("p = 30", "give 'p' or 'c', not both"),
        ("", "missing required key"),
    ],
)
def test_parse_config_rejects_bad_files(tmp_path, mutation, needle):
    text = GOOD_CONFIG + mutation + "\n"
    if needle.startswith("missing"):
        text = text.replace("experiment = size_table\n", "")
    with pytest.raises(ConfigError, match=needle):
        parse_config_file(write(tmp_path, text))


def test_parse_config_requires_integer_p(tmp_path):
    text = GOOD_CONFIG.replace("n = 200", "n = 155")
    with pytest.raises(ConfigError, match="non-integer p"):
        parse_config_file(write(tmp_path, text))


def test_parse_config_missing_file():
    with pytest.raises(ConfigError, match="cannot read config"):
        parse_config_file("/nonexistent/path.cfg")


# ------------------------------------------------------------------ exit codes


def test_usage_error_exits_64(capsys):
    assert main([]) == 64
    capsys.readouterr()


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "validate-model" in capsys.readouterr().out


def test_config_error_exits_2(tmp_path, capsys):
    bad = write(tmp_path, GOOD_CONFIG + "color = red\n")
    assert main(["simulate", "--config", bad]) == 2
    assert "config error" in capsys.readouterr().err


# ----------------------------------------------------------------- subcommands


def test_validate_model_prints_detectability(tmp_path, capsys):
    assert main(["validate-model", "--config", write(tmp_path, GOOD_CONFIG)]) == 0
    out = capsys.readouterr().out
    assert "p = 20" in out
    assert "yes" in out  # d2 = 5 is detectable at c = 0.1


def test_simulate_writes_reports_and_json(tmp_path, capsys):
    out_dir = tmp_path / "rep"
    code = main(
        [
            "simulate",
            "--config", write(tmp_path, GOOD_CONFIG),
            "--output", str(out_dir),
        ]
    )
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["experiment"] == "size_table"
    assert summary["replicates"] == 6
    assert (out_dir / "records.csv").exists()
    assert (out_dir / "summary.json").exists()
    assert (out_dir / "hist.csv").exists()


def test_simulate_overrides_replicates(tmp_path, capsys):
    code = main(
        ["simulate", "--config", write(tmp_path, GOOD_CONFIG), "--replicates", "3"]
    )
    assert code == 0
    assert json.loads(capsys.readouterr().out)["replicates"] == 3


def _spiked_csv(tmp_path, p=20, n=100, d2=10.0, seed=2):
    rng = np.random.default_rng(seed)
    t = np.sqrt(np.concatenate([[d2], np.ones(p - 1)]))
    data = t[:, None] * rng.standard_normal((p, n))
    path = tmp_path / "data.csv"
    np.savetxt(path, data, delimiter=",")
    return str(path)


def test_estimate_reads_csv_and_inverts(tmp_path, capsys):
    data = _spiked_csv(tmp_path)
    assert main(["estimate", "--data", data, "--ranks", "0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["p"] == 20
    assert out["n"] == 100
    est = out["estimates"][0]
    assert est["rank"] == 0
    assert est["spike_estimate"] == pytest.approx(10.0, rel=0.4)


def test_test_subcommand_runs_the_eigenspace_test(tmp_path, capsys):
    data = _spiked_csv(tmp_path)
    basis = np.zeros((20, 1))
    basis[0, 0] = 1.0
    basis_path = tmp_path / "dir.csv"
    np.savetxt(basis_path, basis, delimiter=",")
    code = main(["test", "--data", data, "--basis", str(basis_path), "--rank", "0"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) >= {"t1", "t2", "p_value", "reject", "spike_estimate", "mode"}
    assert out["mode"] == "adaptive"
    assert 0.0 <= out["p_value"] <= 1.0


def test_test_subcommand_dimension_mismatch(tmp_path, capsys):
    data = _spiked_csv(tmp_path)
    basis_path = tmp_path / "short.csv"
    np.savetxt(basis_path, np.ones((3, 1)), delimiter=",")
    assert main(["test", "--data", data, "--basis", str(basis_path)]) == 2
    capsys.readouterr()


def test_reproduce_table_single_cell(tmp_path, capsys):
    code = main(
        [
            "reproduce-table1",
            "--cell", "d2=5,c=0.1,n=200",
            "--fast",
            "--seed", "20260101",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    lines = [l for l in out.splitlines() if l.strip()]
    assert len(lines) == 2  # header plus the one requested cell
    assert "0.0530" in lines[1]


def test_reproduce_table_rejects_unknown_cell(capsys):
    assert main(["reproduce-table1", "--cell", "d2=7,c=0.1,n=200"]) == 2
    capsys.readouterr()
