"""End-to-end checks of the command-line entry points."""

import csv
import json
import os
import shutil

import numpy as np
import pytest

from qaglass.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, _parse_grid, main
from qaglass.disorder import load_instance


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------- grids


def test_grid_parsing():
    assert _parse_grid("0:0.5:1") == (0.0, 0.5, 1.0)
    assert _parse_grid("0:0.1:2")[-1] == 2.0  # stop included
    assert _parse_grid("0.3,1.5,0.7") == (0.3, 1.5, 0.7)
    assert _parse_grid([0.1, 0.2]) == (0.1, 0.2)
    with pytest.raises(Exception):
        _parse_grid("1:2")
    with pytest.raises(Exception):
        _parse_grid("0:-0.5:1")


# ------------------------------------------------------------------ gen


def test_gen_writes_instance_and_manifest(tmp_path):
    out = str(tmp_path / "inst.json")
    rc = main(["gen", "--n-sites", "8", "--sigma", "0.7", "--gamma", "0.2",
               "--seed", "99", "--out", out])
    assert rc == EXIT_OK
    inst = load_instance(out)
    assert inst.n_sites == 8
    manifest = json.load(open(str(tmp_path / "inst_manifest.json")))
    assert manifest["command"] == "gen"
    assert manifest["master_seed"] == 99
    assert manifest["artifacts"] == [out]
    assert manifest["params"]["sigma"] == 0.7

    # manifest replay reproduces the data file byte for byte
    out2 = str(tmp_path / "inst2.json")
    rc = main(["gen", "--config", str(tmp_path / "inst_manifest.json"),
               "--out", out2])
    assert rc == EXIT_OK
    assert read_bytes(out2) == read_bytes(out)


def test_gen_rejects_bad_input(tmp_path):
    out = str(tmp_path / "x.json")
    assert main(["gen", "--n-sites", "2", "--out", out]) == EXIT_CONFIG
    assert main(["gen", "--sigma", "-1", "--out", out]) == EXIT_CONFIG

    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    assert main(["gen", "--config", str(cfg), "--out", out]) == EXIT_CONFIG
    cfg.write_text(json.dumps({"no_such_key": 1}))
    assert main(["gen", "--config", str(cfg), "--out", out]) == EXIT_CONFIG
    missing = str(tmp_path / "nope.json")
    assert main(["gen", "--config", missing, "--out", out]) == EXIT_IO


# --------------------------------------------------------- ladder-sweep


SWEEP_ARGS = ["ladder-sweep", "--n-sites", "6", "--sigma", "1.0",
              "--gamma", "0.4", "--seed", "7", "--grid", "0:0.5:1",
              "--n-realizations", "3", "--solver", "lanczos"]


def run_sweep_cli(out_dir, extra=()):
    return main(SWEEP_ARGS + ["--out-dir", str(out_dir)] + list(extra))


def test_ladder_sweep_artifacts(tmp_path):
    assert run_sweep_cli(tmp_path) == EXIT_OK
    curve = read_rows(tmp_path / "sweep_curve.csv")
    reals = read_rows(tmp_path / "sweep_realizations.csv")
    assert curve[0] == ["gamma_field", "mean_M", "stderr", "n", "flagged_rate"]
    assert reals[0] == ["realization", "gamma_field", "overlap",
                        "solver_status"]
    assert len(curve) == 4   # header + 3 grid points
    assert len(reals) == 10  # header + 3 realizations x 3 points

    # curve means must match the per-realization rows they summarize
    by_field = {}
    for _, g, ov, status in reals[1:]:
        assert status.startswith("ok")
        by_field.setdefault(g, []).append(float(ov))
    for g, mean_s, *_ in curve[1:]:
        assert float(mean_s) == pytest.approx(np.mean(by_field[g]), abs=1e-15)

    meta = json.load(open(tmp_path / "sweep_curve.meta.json"))
    assert meta["n_sites"] == 6
    manifest = json.load(open(tmp_path / "sweep_manifest.json"))
    assert set(manifest["artifacts"]) == {
        str(tmp_path / "sweep_curve.csv"),
        str(tmp_path / "sweep_realizations.csv"),
        str(tmp_path / "sweep_curve.meta.json"),
    }


def test_ladder_sweep_manifest_replay_and_workers(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert run_sweep_cli(a) == EXIT_OK
    assert main(["ladder-sweep", "--config", str(a / "sweep_manifest.json"),
                 "--out-dir", str(b)]) == EXIT_OK
    assert read_bytes(a / "sweep_curve.csv") == read_bytes(b / "sweep_curve.csv")
    assert read_bytes(a / "sweep_realizations.csv") == \
        read_bytes(b / "sweep_realizations.csv")

    assert run_sweep_cli(c, ["--workers", "2"]) == EXIT_OK
    assert read_bytes(a / "sweep_curve.csv") == read_bytes(c / "sweep_curve.csv")
    assert read_bytes(a / "sweep_realizations.csv") == \
        read_bytes(c / "sweep_realizations.csv")


def test_ladder_sweep_resume(tmp_path):
    full, part = tmp_path / "full", tmp_path / "part"
    assert run_sweep_cli(full) == EXIT_OK
    part.mkdir()
    for name in ("sweep_curve.meta.json", "sweep_realizations.csv"):
        shutil.copy(full / name, part / name)

    # drop the last realization to mimic an interrupted run
    rows = read_rows(part / "sweep_realizations.csv")
    keep = [r for r in rows[1:] if r[0] != "2"]
    with open(part / "sweep_realizations.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(rows[0])
        w.writerows(keep)

    assert run_sweep_cli(part, ["--resume"]) == EXIT_OK
    assert read_bytes(part / "sweep_curve.csv") == \
        read_bytes(full / "sweep_curve.csv")
    assert read_bytes(part / "sweep_realizations.csv") == \
        read_bytes(full / "sweep_realizations.csv")

    # a resume under different parameters must refuse to touch the data
    rc = main(SWEEP_ARGS + ["--out-dir", str(part), "--resume",
                            "--gamma", "0.9"])
    assert rc == EXIT_CONFIG


# -------------------------------------------------------------- mf-solve


def test_mf_solve_point(tmp_path):
    out = str(tmp_path / "pt.json")
    rc = main(["mf-solve", "--sigma", "0.5", "--gamma", "0.75",
               "--beta0", "8", "--beta", "8", "--field", "1.0",
               "--out", out])
    assert rc == EXIT_OK
    point = json.load(open(out))
    assert point["converged"] is True
    assert point["beta"] == 8.0
    assert 0.0 <= point["q"] <= point["r"] <= 1.0 + 1e-12
    assert abs(point["m"]) <= 1.0
    assert -1.0 <= point["overlap"] <= 1.0
    assert isinstance(point["rsb_warning"], bool)
    manifest = json.load(open(str(tmp_path / "pt_manifest.json")))
    assert manifest["command"] == "mf-solve"
    assert manifest["artifacts"] == [out]


def test_mf_solve_rejects_bad_params(tmp_path):
    out = str(tmp_path / "pt.json")
    assert main(["mf-solve", "--sigma", "-0.5", "--out", out]) == EXIT_CONFIG
    assert main(["mf-solve", "--beta", "0", "--out", out]) == EXIT_CONFIG
    assert main(["mf-solve", "--field", "-1", "--out", out]) == EXIT_CONFIG


# -------------------------------------------------------------- mf-sweep


MF_ARGS = ["mf-sweep", "--sigma", "0.5", "--gamma", "0.5,0.75",
           "--beta0", "8", "--beta", "8", "--field-grid", "0.2:0.4:1.8"]


def test_mf_sweep_csv_layout_and_replay(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(MF_ARGS + ["--out-dir", str(a)]) == EXIT_OK
    rows = read_rows(a / "mf_curve.csv")
    assert rows[0] == ["gamma_noise", "field", "m0", "q0", "m", "q", "r",
                       "overlap", "residual", "converged", "rsb_warning"]
    assert len(rows) == 1 + 2 * 5  # two noise widths, five fields each
    assert [r[0] for r in rows[1:6]] == ["0.5"] * 5
    assert [float(r[1]) for r in rows[1:6]] == [0.2, 0.6, 1.0, 1.4, 1.8]
    assert all(r[9] == "true" for r in rows[1:])

    # per-width clean parameters are constant down the file
    assert len({(r[2], r[3]) for r in rows[1:6]}) == 1

    assert main(["mf-sweep", "--config", str(a / "mf_manifest.json"),
                 "--out-dir", str(b)]) == EXIT_OK
    assert read_bytes(a / "mf_curve.csv") == read_bytes(b / "mf_curve.csv")

    assert main(MF_ARGS + ["--out-dir", str(c), "--workers", "2"]) == EXIT_OK
    assert read_bytes(a / "mf_curve.csv") == read_bytes(c / "mf_curve.csv")


def test_mf_sweep_rejects_bad_grid(tmp_path):
    rc = main(["mf-sweep", "--field-grid", "1:2",
               "--out-dir", str(tmp_path)])
    assert rc == EXIT_CONFIG


# ------------------------------------------------------------------ fit


def test_fit_recovers_power_law(tmp_path):
    pts = tmp_path / "pts.csv"
    with open(pts, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gamma", "gamma_opt"])
        for x in (0.2, 0.4, 0.6, 0.8, 1.0):
            w.writerow([x, 1.7 * x ** 2.1])
    out = str(tmp_path / "fit.json")
    assert main(["fit", str(pts), "--out", out]) == EXIT_OK
    res = json.load(open(out))
    assert res["amplitude"] == pytest.approx(1.7, abs=1e-10)
    assert res["exponent"] == pytest.approx(2.1, abs=1e-10)
    assert res["n_points"] == 5

    assert main(["fit", str(pts), "--y-col", "nope",
                 "--out", out]) == EXIT_CONFIG
    assert main(["fit", "--out", out]) == EXIT_CONFIG
