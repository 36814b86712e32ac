import csv
import json

import pytest

from stochvort.cli import main
from stochvort.io import read_spectral_csv

SMALL = {"K": 8, "n": 26, "T": 0.1, "dt": 0.01, "noise_cutoff": 2, "samples": 20, "ic": "sin_cos"}


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMALL))
    return p


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["bogus"]) == 2
    assert main([]) == 2


def test_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"b": -1}))
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "requires b > 0" in capsys.readouterr().err
    p.write_text(json.dumps({"p": 3}))
    assert main(["malliavin", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "requires p > 4" in capsys.readouterr().err


def test_simulate_outputs(cfg_file, tmp_path):
    out = tmp_path / "sim"
    cfg = json.loads(cfg_file.read_text()) | {"snapshot_every": 5}
    cfg_file.write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(cfg_file), "--out", str(out), "--seed", "4"]) == 0
    rows = _rows(out / "norms.csv")
    assert list(rows[0]) == ["t", "l2", "lp", "sigma_hit_flag"] and len(rows) == 11
    assert read_spectral_csv(out / "snapshots" / "xi_000005.csv").cutoff == 8
    man = json.loads((out / "manifest.json").read_text())
    assert man["subcommand"] == "simulate" and man["config"]["seed"] == 4 and len(man["config_hash"]) == 64


def test_simulate_flags_truncation_hit(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(SMALL | {"ic": "random", "ic_amplitude": 3.0, "N": 1.0}))
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    assert _rows(tmp_path / "o" / "norms.csv")[0]["sigma_hit_flag"] == "1"


def test_kernel_check(tmp_path):
    out = tmp_path / "k"
    assert main(["kernel-check", "--out", str(out)]) == 0
    rows = _rows(out / "kernel_check.csv")
    assert list(rows[0])[:6] == ["beta", "s", "integral", "fitted_slope", "target_slope", "pass"]
    assert all(r["pass"] == "true" for r in rows)


def test_convolution_check(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"K": 6, "n": 16, "samples": 2000}))
    assert main(["convolution-check", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    rows = _rows(tmp_path / "o" / "convolution_check.csv")
    assert len(rows) == 4 and list(rows[0]) == ["b", "t", "empirical_var", "closed_form", "stderr", "pass"]


def test_picard(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(SMALL | {"T": 0.05, "dt": 0.005, "N": 5.0, "ic": "random", "ic_amplitude": 4.0}))
    assert main(["picard", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    assert len(_rows(tmp_path / "o" / "picard.csv")) >= 3


def test_malliavin(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(SMALL | {"T": 0.3, "samples": 3}))
    assert main(["malliavin", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    rows = _rows(tmp_path / "o" / "malliavin.csv")
    assert len(rows) == 9
    assert all(float(r["A_eps"]) >= float(r["lower_bound"]) for r in rows)
    assert _rows(tmp_path / "o" / "small_ball.csv")


def test_density_outputs(cfg_file, tmp_path):
    out = tmp_path / "d"
    code = main(["density", "--config", str(cfg_file), "--out", str(out)])
    assert code in (0, 1)
    assert len(_rows(out / "samples.csv")) == 20
    assert list(_rows(out / "kde.csv")[0]) == ["x", "density"]
    diag = json.loads((out / "diagnostics.json").read_text())
    for key in ("atom_max_multiplicity", "ks_stat", "ks_threshold", "local_mass_table", "pass"):
        assert key in diag
    assert code == (0 if diag["pass"] else 1)


def test_reruns_and_thread_counts_give_identical_csv(cfg_file, tmp_path):
    payloads = []
    for i, threads in enumerate(("1", "1", "4")):
        out = tmp_path / f"r{i}"
        main(["density", "--config", str(cfg_file), "--out", str(out), "--threads", threads])
        payloads.append({f.name: f.read_bytes() for f in out.glob("*.csv")})
    assert payloads[0] == payloads[1] == payloads[2]
