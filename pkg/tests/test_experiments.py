import csv
import io

import numpy as np
import pytest

from pgue import cli
from pgue import experiments as ex


# --- configuration ------------------------------------------------------------

def test_config_defaults_and_parsing():
    cfg = ex.ExperimentConfig.from_text("""
        # comment line
        experiment = identities
        n_list = 2, 4
        tau = 0.5, 1.5   # trailing comment
        precision_bits = 128
    """)
    assert cfg.experiment == "identities"
    assert cfg.n_list == (2, 4)
    assert cfg.tau == (0.5, 1.5)
    assert cfg.precision_bits == 128
    assert cfg.grid == (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)


def test_config_overrides_win(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("n_list = 8\ns = 1.0\n")
    cfg = ex.ExperimentConfig.from_file(p, s="2.5", rtol=None)
    assert cfg.n_list == (8,) and cfg.s == 2.5 and cfg.rtol == 1e-10


@pytest.mark.parametrize("text", [
    "bogus = 1",
    "n_list = 4\nnot a pair",
    "tau = 1, 2, 3",
    "tau = 1, -1",
    "precision_bits = 32",
    "grid = -1, 0, 1",
    "n_list = 0",
    "s = abc",
])
def test_config_errors(text):
    with pytest.raises(ex.ConfigError):
        ex.ExperimentConfig.from_text(text)


# --- reports ------------------------------------------------------------------

def test_report_row_abs_error_exact():
    r = ex.ReportRow({"n": 4}, 0.1, 0.30000000000000004)
    assert r.abs_error == abs(0.1 - 0.30000000000000004)


def test_csv_numpy_scalars_plain():
    r = ex.ReportRow({"n": 4, "s": np.float64(0.25)}, np.float64(1.5), 1.0)
    rec = ex.csv_to_records(ex.rows_to_csv([r]))[0]
    assert rec["s"] == "0.25"
    assert ex.table_to_csv(["a"], [[np.float64(2.5)]]) == "a\n2.5\n"


def test_csv_round_trip():
    rows = [ex.ReportRow({"experiment": "kernel-limit", "n": n, "m": 1, "s": 0.0,
                          "tau": (1.0, 1.0), "u": 0.5, "v": -1.0},
                         1 / 3 + n, np.pi, {"precision_bits": 256, "rtol": 1e-10, "wall_ms": 3})
            for n in (64, 128)]
    text = ex.rows_to_csv(rows)
    assert text.splitlines()[0].split(",") == list(ex.COLUMNS)
    back = ex.csv_to_records(text)
    for r, b in zip(rows, back):
        assert b["finite_value"] == r.finite_value
        assert b["limit_value"] == r.limit_value
        assert b["abs_error"] == r.abs_error
        assert b["tau"] == "1.0;1.0" and b["n"] == str(r.labels["n"])


# --- command line ---------------------------------------------------------------

def test_cli_bad_config(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("nonsense = 3\n")
    assert cli.main(["identities", "--config", str(p)]) == 2
    assert "config error" in capsys.readouterr().err
    assert cli.main(["identities", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_cli_identities_pass(tmp_path):
    out = tmp_path / "id.csv"
    code = cli.main(["identities", "--n_list", "4", "--lam_list", "1.5", "--out", str(out),
                     "--assert"])
    assert code == 0
    recs = ex.csv_to_records(out.read_text())
    assert len(recs) == 2
    assert {r["v"] for r in recs} == {"1", "2"}


def test_cli_identities_n_limit(capsys):
    assert cli.main(["identities", "--n_list", "16"]) == 2


def test_cli_assert_breach(monkeypatch, capsys):
    # a fabricated b1 report that does not shrink with n trips --assert
    def fake(cfg):
        return [ex.ReportRow({"experiment": "b1-crosscheck", "n": n, "s": 0.0}, 0.1 + 1e-3 * n, 0.0)
                for n in cfg.n_list]

    monkeypatch.setitem(ex.COMMANDS, "b1-crosscheck", fake)
    assert cli.main(["b1-crosscheck", "--n_list", "64,128", "--assert"]) == 4
    assert "FAIL" in capsys.readouterr().err
    assert cli.main(["b1-crosscheck", "--n_list", "64,128"]) == 0


def test_cli_numeric_failure(capsys):
    # lambda = 1 + O(1) is outside the sloc map at n = 64, s = 20
    assert cli.main(["b1-crosscheck", "--n_list", "64", "--grid", "20"]) == 3
    assert "numeric failure" in capsys.readouterr().err


def test_cli_painleve_solve_dump(capsys, traj11):
    assert cli.main(["painleve-solve", "--ds", "1.0", "--s_min", "-3", "--s_max", "25"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["s", "b_1", "b_2", "b_3", "a1", "integral_drift"]
    body = np.array(rows[1:], float)
    assert body.shape == (29, 6)
    assert body[0, 0] == 25.0 and body[-1, 0] == -3.0
    assert np.max(body[:, -1]) < 1e-6
    np.testing.assert_allclose(body[body[:, 0] == 0.0, 1], [traj11.b(0.0)], rtol=1e-12)


def test_cli_recurrence_dump_deterministic(capsys):
    args = ["recurrence", "--n_list", "6", "--precision", "128"]
    assert cli.main(args) == 0
    first = capsys.readouterr().out
    assert cli.main(args) == 0
    assert capsys.readouterr().out == first
    rows = list(csv.reader(io.StringIO(first)))
    assert rows[0] == ["k", "alpha", "beta", "gamma", "p1"]
    beta = np.array([r[2] for r in rows[1:]], float)
    assert np.all(beta[1:] > 0)


def test_run_dispatch_rejects_unknown():
    cfg = ex.ExperimentConfig()
    object.__setattr__(cfg, "experiment", "nope")
    with pytest.raises(ex.ConfigError):
        ex.run(cfg)
