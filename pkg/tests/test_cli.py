import csv
import subprocess
import sys

import numpy as np
import pytest

from rgpo_rfs.cli import CSV_COLUMNS, ConfigError, ExperimentConfig, main, parse_config, read_metrics_csv
from rgpo_rfs.tracker import TrackerConfig

SHORT = "n_steps = 20\nruns = 2\nattack.1.start = 5\nattack.1.vpo = 0.5\n"


def write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults_match_published_parameters():
    exp = ExperimentConfig()
    assert (exp.prune_threshold, exp.cap, exp.lambda1_bar, exp.alpha, exp.b_na) == (1e-5, 100, 3.0, 10.0, 70.0)
    assert (exp.na_eig_los, exp.na_eig_perp) == (500.0, 1.0)
    assert (exp.u_act, exp.t_act, exp.u_dorm, exp.t_dorm) == (5.0, 7.0, 5.0, 4.0)
    t = TrackerConfig()
    assert (t.prune_threshold, t.cap, t.lambda1_bar, t.alpha, t.b_na, t.na_eigvals) == \
        (1e-5, 100, 3.0, 10.0, 70.0, (500.0, 1.0))


def test_parse_config_attacks_and_values():
    exp = parse_config("scenario = 2  # turns\nattack.2.start = 30\nattack.2.vpo = 3\n"
                       "attack.1.start = 10\nattack.1.end = 20\nattack.1.vpo = 0.5\ncap = 50\n")
    assert exp.scenario == 2 and exp.cap == 50
    assert [(a.start_step, a.end_step, a.pull_off_velocity) for a in exp.attacks] == \
        [(10, 20, 0.5), (30, None, 3.0)]


@pytest.mark.parametrize("text,needle", [
    ("cap = 100\nbogus = 1\n", "<config>:2: unknown key 'bogus'"),
    ("cap = -3\n", "<config>:1: invalid value '-3' for 'cap'"),
    ("alpha\n", "<config>:1: expected 'key = value'"),
    ("cap = 1\ncap = 2\n", "already set on line 1"),
    ("attack.1.start = 4\n", "attack.1 is missing vpo"),
    ("attack.1.start = 9\nattack.1.end = 3\nattack.1.vpo = 1\n", "attack.1"),
    ("trackers = adaptive,oracle\n", "'trackers'"),
])
def test_parse_config_errors(text, needle):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert needle in str(err.value)


def test_run_writes_deterministic_outputs(tmp_path, capsys):
    cfg = write(tmp_path, SHORT)
    args = ["run", str(cfg), "--seed", "7", "--tracker", "naive", "--tracker", "adaptive"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    out = capsys.readouterr().out
    assert out.count("\n") == 2 and out.startswith("naive:")
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("metrics.csv", "rmse.svg", "p_jam.svg", "bias.svg", "c_k.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    raw = (tmp_path / "a" / "metrics.csv").read_bytes()
    assert raw.startswith(b"k,tracker,rmse_m,p_jam,bias_true_m,bias_est_m,bias_std_m,c_k_mean\n")
    assert b"\r" not in raw
    rows = list(csv.DictReader((tmp_path / "a" / "metrics.csv").open()))
    assert {r["tracker"] for r in rows} == {"naive", "adaptive"} and len(rows) == 40
    used = (tmp_path / "a" / "config_used.txt").read_text()
    assert "n_steps = 20" in used and "attack.1.vpo = 0.5" in used and "cap = 100" in used


def test_plot_reproduces_run_svgs(tmp_path):
    cfg = write(tmp_path, SHORT)
    assert main(["run", str(cfg), "--tracker", "adaptive", "--out", str(tmp_path / "run")]) == 0
    assert main(["plot", str(tmp_path / "run" / "metrics.csv"), "--out", str(tmp_path / "re")]) == 0
    for name in ("rmse.svg", "p_jam.svg", "bias.svg", "c_k.svg"):
        assert (tmp_path / "run" / name).read_bytes() == (tmp_path / "re" / name).read_bytes()


def test_loe_adds_pcrb_and_ignores_attacks(tmp_path):
    cfg = write(tmp_path, SHORT)
    assert main(["loe", str(cfg), "--tracker", "naive", "--tracker", "adaptive",
                 "--out", str(tmp_path / "loe")]) == 0
    cols = read_metrics_csv(tmp_path / "loe" / "metrics.csv")
    pcrb = np.array(cols["pcrb_m"][:20])
    assert np.all(pcrb > 0) and np.all(np.diff(pcrb) <= 1e-9)
    assert all(np.isnan(cols["bias_true_m"]))
    used = (tmp_path / "loe" / "config_used.txt").read_text()
    assert "attack." not in used


def test_plot_errors(tmp_path, capsys):
    bad = write(tmp_path, "k,tracker,rmse_m\n1,naive,0.5\n", "bad.csv")
    assert main(["plot", str(bad)]) != 0
    assert "p_jam" in capsys.readouterr().err
    empty = write(tmp_path, ",".join(CSV_COLUMNS) + "\n", "empty.csv")
    assert main(["plot", str(empty)]) != 0
    assert "no data rows" in capsys.readouterr().err


def test_invalid_config_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "runs = 2\nwidth = 3\n")
    assert main(["run", str(cfg)]) != 0
    err = capsys.readouterr().err
    assert "exp.cfg:2" in err and "width" in err
    assert main(["run", str(tmp_path / "missing.cfg")]) != 0


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "rgpo_rfs", "plot", str(tmp_path / "none.csv")],
                         capture_output=True, text=True)
    assert res.returncode != 0
    res = subprocess.run([sys.executable, "-m", "rgpo_rfs", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "loe" in res.stdout
