import subprocess
import sys

import numpy as np
import pytest

from dalgame.cli import main
from dalgame.reports import read_csv
from dalgame.stability import discrete_stability_map, exact_threshold
from dalgame.quadratic import make_example2

RUN_TOML = """
seed = 0
record_every = 500

[game]
name = "example2"
init = [1.0, 1.0, 1.0]

[[arms]]
method = "euler"
eta = 5e-4
max_iters = 200000
stop_grad_norm = 1e-8

[[arms]]
method = "euler"
eta = 5e-3
max_iters = 200000
stop_grad_norm = 1e-8

[[arms]]
method = "rk2"
eta = 5e-3
max_iters = 200000
stop_grad_norm = 1e-8
"""

SWEEP_TOML = """
seed = 0

[game]
name = "example2"

[sweep]
methods = ["euler", "rk2", "rk4", "eg"]
eta_min = 1e-4
eta_max = 1e-2
n_eta = 21
max_iters = 200000
stop_grad_norm = 1e-8
"""

DAL_TOML = """
seed = 0
record_every = 10

[game]
name = "dal-toy"

[task]
n_per_domain = 60

[[arms]]
method = "euler"
eta = 1.0
max_iters = 300

[[arms]]
method = "rk2"
eta = 1.0
max_iters = 300

[[arms]]
method = "rk2"
eta = 1.0
max_iters = 300
lam = 0.0
"""


def _cfg(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _rows(path, name):
    header, rows = read_csv(path, name)
    return [dict(zip(header, r)) for r in rows]


def _tree(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


# -- analyze ----------------------------------------------------------------------------

def test_analyze_example2(tmp_path):
    assert main(["analyze", "--game", "example2", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "analyze_example2.txt").read_text()
    kv = dict(line.split(": ", 1) for line in text.splitlines() if ": " in line)
    eigs = sorted((complex(kv[f"eigenvalue_{k}"].replace(" ", "").replace("i", "j"))
                   for k in range(3)), key=lambda z: (z.real, z.imag))
    ref = sorted([-2.0, -3 + 2j * np.sqrt(2449), -3 - 2j * np.sqrt(2449)], key=lambda z: (z.real, z.imag))
    np.testing.assert_allclose(eigs, ref, rtol=1e-9)
    assert float(kv["gd_eta_bound"]) == pytest.approx(6 / 9787, rel=1e-9)
    assert kv["hurwitz_stable"] == "True" and kv["rk2_stable_flag"] == "True"
    assert float(kv["exact_threshold_euler"]) == pytest.approx(6 / 9805, rel=1e-9)
    for m in ("rk2", "rk4", "eg"):
        assert float(kv[f"exact_threshold_{m}"]) > 6 / 9805
    assert kv["strict_holds"] == "True"


def test_analyze_example1_two_player_flags_no_ne(tmp_path):
    assert main(["analyze", "--game", "example1-2p", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "analyze_example1-2p.txt").read_text()
    assert "no NE at origin" in text
    assert "necessary_holds: False" in text


def test_analyze_dal_trained_point(tmp_path):
    cfg = _cfg(tmp_path, '[game]\nname="dal-toy"\n[task]\nn_per_domain=30\n'
                         '[analyze]\ntrain_iters=50\n')
    assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "analyze_dal-toy.txt").read_text()
    assert "trained_with: rk2" in text and "game_class: General" in text
    assert "exact_threshold" not in text


def test_missing_config_no_output(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", str(tmp_path / "missing.toml"), "--out", str(out)]) == 2
    assert not out.exists()


def test_config_required(tmp_path):
    assert main(["sweep", "--out", str(tmp_path)]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numeric_failure_exit_code(tmp_path):
    cfg = _cfg(tmp_path, '[game]\nname="quadratic"\nsizes=[1,1]\n'
                         'Q=[[[1e308, 1e308],[1e308, 0.0]], [[0.0, -1e308],[-1e308, 1e308]]]\n')
    assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    assert not (tmp_path / "o").exists()


# -- run -----------------------------------------------------------------------------

def test_run_example2_statuses_and_determinism(tmp_path, capsys):
    cfg = _cfg(tmp_path, RUN_TOML)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(a)]) == 0
    out = capsys.readouterr().out
    assert "arm 0 euler eta=0.0005: Converged" in out
    assert "arm 1 euler eta=0.005: Diverged" in out
    assert "arm 2 rk2 eta=0.005: Converged" in out
    last = _rows(a / "run_arm00_euler.csv", "trajectory")[-1]
    assert float(last["grad_norm"]) <= 1e-8
    assert main(["run", "--config", cfg, "--out", str(b)]) == 0
    assert _tree(a) == _tree(b)


def test_run_refuses_overwrite(tmp_path):
    cfg = _cfg(tmp_path, RUN_TOML)
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    (out / "run_arm00_euler.csv").write_text("sentinel")
    assert main(["run", "--config", cfg, "--out", str(out)]) == 2
    assert (out / "run_arm00_euler.csv").read_text() == "sentinel"
    assert main(["run", "--config", cfg, "--out", str(out), "--overwrite"]) == 0
    assert (out / "run_arm00_euler.csv").read_text().startswith("# schema")


def test_run_seed_flag_changes_init(tmp_path):
    cfg = _cfg(tmp_path, '[game]\nname="example2"\n[[arms]]\nmethod="rk2"\neta=1e-3\nmax_iters=10\n')
    main(["run", "--config", cfg, "--out", str(tmp_path / "s0")])
    main(["run", "--config", cfg, "--out", str(tmp_path / "s1"), "--seed", "1"])
    assert _tree(tmp_path / "s0") != _tree(tmp_path / "s1")


def test_console_script_exit_codes(tmp_path):
    cfg = _cfg(tmp_path, '[game]\nname="example2"\n[[arms]]\nmethod="euler"\neta=0.01\nmax_iters=5000\n')
    ok = subprocess.run([sys.executable, "-m", "dalgame.cli", "run", "--config", cfg,
                         "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert ok.returncode == 0 and "Diverged" in ok.stdout
    bad = subprocess.run([sys.executable, "-m", "dalgame.cli", "run", "--config", cfg,
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert bad.returncode == 2 and "overwrite" in bad.stderr


# -- sweep -----------------------------------------------------------------------------

def test_sweep_example2(tmp_path):
    cfg = _cfg(tmp_path, SWEEP_TOML)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    rows = _rows(tmp_path / "a" / "sweep.csv", "sweep")
    assert len(rows) == 4 * 21
    euler = [r for r in rows if r["method"] == "euler"]
    etas = np.array([float(r["eta"]) for r in euler])
    conv = np.array([r["terminal_status"] == "Converged" for r in euler])
    assert conv[0] and not conv[-1]
    boundary_lo = etas[conv].max()
    boundary_hi = etas[~conv].min()
    step = etas[1] / etas[0]
    exact = 6 / 9805
    assert boundary_lo < exact < boundary_hi and boundary_hi / boundary_lo <= step * (1 + 1e-9)
    for r in rows:
        rho = float(r["spectral_radius"])
        status = r["terminal_status"]
        if status == "Converged":
            assert rho < 1
        elif status == "Diverged":
            assert rho > 1
        else:  # too slow to settle either way within max_iters: trend must match
            assert (rho < 1) == (float(r["final_grad_norm"]) < 1.0)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


def test_sweep_rk4_at_2e_2(tmp_path):
    cfg = _cfg(tmp_path, '[game]\nname="example2"\n[sweep]\nmethods=["rk4", "euler"]\netas=[2e-2]\n'
                         'max_iters=200000\n')
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "sweep.csv", "sweep")
    assert rows[0]["terminal_status"] == "Converged" and float(rows[0]["spectral_radius"]) < 1
    assert rows[1]["terminal_status"] == "Diverged"


def test_sweep_grids(tmp_path):
    cfg = _cfg(tmp_path, '[game]\nname="example2"\n[sweep]\nmethods=["rk2", "co"]\netas=[1e-3]\n'
                         'rk_alphas=[0.5, 1.0]\ngammas=[0.0, 1e-6]\nlams=[0.5, 1.0]\nmax_iters=100\n')
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "sweep.csv", "sweep")
    assert len(rows) == 2 * (2 + 2)
    assert {r["lam"] for r in rows} == {"0.5", "1.0"}
    assert {r["rk_alpha"] for r in rows if r["method"] == "rk2"} == {"0.5", "1.0"}
    assert {r["gamma"] for r in rows if r["method"] == "co"} == {"0.0", "1e-06"}


def test_sweep_lam_grid_needs_split_game(tmp_path):
    cfg = _cfg(tmp_path, '[game]\nname="example1-3p"\n[sweep]\netas=[1e-3]\nlams=[0.5]\n')
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


# -- dal ---------------------------------------------------------------------------------

def test_dal_command(tmp_path):
    cfg = _cfg(tmp_path, DAL_TOML)
    a = tmp_path / "a"
    assert main(["dal", "--config", cfg, "--out", str(a)]) == 0
    arms = [_rows(a / f"dal_arm0{k}_{m}.csv", "trajectory") for k, m in enumerate(["euler", "rk2", "rk2"])]
    assert list(arms[0][0]) == ["iter", "grad_norm", "J1", "J2", "J3", "source_acc", "target_acc"]
    # early source accuracy trends upward for both optimizers from the shared init
    for rows in arms[:2]:
        acc = np.array([float(r["source_acc"]) for r in rows[:16]])
        assert np.polyfit(np.arange(acc.size), acc, 1)[0] > 0
        assert acc[-1] > acc[0]
    assert arms[0][0] == arms[1][0]  # shared initialization
    summary = _rows(a / "dal_summary.csv", "dal-summary")
    assert [s["method"] for s in summary] == ["euler", "rk2", "rk2"]
    assert summary[2]["lam"] == "0.0"
    assert main(["dal", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    assert _tree(a) == _tree(tmp_path / "b")


def test_dal_lambda_zero_matches_source_only(tmp_path):
    base = DAL_TOML.split("[[arms]]")[0]
    lam0 = base + '[[arms]]\nmethod="rk2"\neta=1.0\nmax_iters=300\nlam=0.0\n'
    src_only = lam0.replace('name = "dal-toy"', 'name = "dal-toy"\nalpha = 0.0').replace("lam=0.0\n", "")
    assert main(["dal", "--config", _cfg(tmp_path, lam0, "a.toml"), "--out", str(tmp_path / "a")]) == 0
    assert main(["dal", "--config", _cfg(tmp_path, src_only, "b.toml"), "--out", str(tmp_path / "b")]) == 0
    a = _rows(tmp_path / "a" / "dal_arm00_rk2.csv", "trajectory")
    b = _rows(tmp_path / "b" / "dal_arm00_rk2.csv", "trajectory")
    assert [r["target_acc"] for r in a] == [r["target_acc"] for r in b]
    assert [r["source_acc"] for r in a] == [r["source_acc"] for r in b]


def test_dal_needs_dal_game(tmp_path):
    assert main(["dal", "--config", _cfg(tmp_path, RUN_TOML), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()
