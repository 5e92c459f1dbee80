import dataclasses
import hashlib
import io
import json
import math

import pytest

from taperscat import cli
from taperscat.synthesis import load_dataset
from taperscat.validation import RESONANT_K

BASE = ["simulate", "--shape", "circle", "--k", "25", "--g", "0.01", "--nd", "8", "--nr", "64",
        "--radius", "5", "--noise", "0.05", "--seed", "42"]


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    out = d / "ds.txt"
    assert cli.main(BASE + ["--out", str(out)]) == 0
    return out


def test_simulate_example(simulated):
    ds = load_dataset(simulated)
    assert ds.noisy.shape == (8, 64)
    assert ds.config.seed == 42 and ds.config.noise_delta == 0.05
    manifest = json.loads((simulated.parent / "ds.txt.manifest.json").read_text())
    assert manifest["outputs"]["ds.txt"] == sha(simulated)
    assert manifest["config"]["shape"] == "circle"


def test_simulate_twice_identical(simulated, tmp_path):
    again = tmp_path / "ds.txt"
    assert cli.main(BASE + ["--out", str(again)]) == 0
    assert again.read_bytes() == simulated.read_bytes()


@pytest.mark.parametrize("extra", [["--noise", "1.5"], ["--shape", "banana"], ["--nd", "0"],
                                   ["--nd", "6"], ["--grid", "1,2,3"], ["--radius", "0.5"],
                                   ["--aperture", "7"], ["--k", "abc"], ["--nystrom", "31"]])
def test_bad_arguments_exit_2(extra, tmp_path):
    assert cli.main(BASE + extra + ["--out", str(tmp_path / "x.txt")]) == 2


def test_missing_command_exit_2():
    assert cli.main([]) == 2


def test_missing_dataset_exit_3(tmp_path):
    code = cli.main(["reconstruct", "--data", str(tmp_path / "none.txt"), "--out", str(tmp_path / "p.txt")])
    assert code == 3


def test_version_mismatch_exit_3(simulated, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text(simulated.read_text().replace("taperscat-ds-1", "taperscat-ds-0", 1))
    assert cli.main(["reconstruct", "--data", str(bad), "--out", str(tmp_path / "p.txt")]) == 3


def test_all_directions_missing_grid_exit_3(simulated, tmp_path):
    code = cli.main(["reconstruct", "--data", str(simulated), "--out", str(tmp_path / "p.txt"),
                     "--grid", "3,4,3,4,10,10"])
    assert code == 3


def test_reconstruct_with_heatmaps(simulated, tmp_path, capsys):
    out = tmp_path / "pts.txt"
    hm = tmp_path / "hm"
    code = cli.main(["reconstruct", "--data", str(simulated), "--out", str(out),
                     "--heatmap-dir", str(hm), "--directions", "1,5"])
    assert code == 0
    assert sorted(p.name for p in hm.glob("*.pgm")) == ["indicator_d00001.pgm", "indicator_d00005.pgm"]
    rows = out.read_text().splitlines()[1:]
    assert 0 < len(rows) <= 4
    assert "mean distance" in capsys.readouterr().out


def test_full_reconstruct_row_cap(simulated, tmp_path):
    out = tmp_path / "pts.txt"
    assert cli.main(["reconstruct", "--data", str(simulated), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) - 1 <= 2 * 8


def test_separated_mode(simulated, tmp_path):
    out = tmp_path / "pts.txt"
    code = cli.main(["reconstruct", "--data", str(simulated), "--out", str(out), "--mode", "separated",
                     "--split-y", "0", "--per-domain", "3", "--grid", "-2,2,-2,2,40,40", "--clean"])
    assert code == 0
    ys = [float(r.split()[1]) for r in out.read_text().splitlines()[1:]]
    assert len(ys) == 6 and sum(y <= 0 for y in ys) == 3


def test_manifest_reruns_experiment(simulated, tmp_path):
    cfg = cli.config_from_manifest(str(simulated) + ".manifest.json")
    again = tmp_path / "rerun.txt"
    cli.run_simulate(dataclasses.replace(cfg, out=str(again)))
    assert sha(again) == sha(simulated)


def test_preset_fills_settings():
    args = cli.build_parser().parse_args(["simulate", "--preset", "example2", "--out", "x"])
    cfg = cli.config_from_args(args)
    assert (cfg.shape, cfg.k, cfg.g, cfg.nd, cfg.nr) == ("kite", 20.0, 5e-4, 256, 256)
    args = cli.build_parser().parse_args(["simulate", "--preset", "example2", "--k", "7", "--out", "x"])
    assert cli.config_from_args(args).k == 7.0


@pytest.mark.parametrize("text,expect", [("pi", (0.0, math.pi)), ("0.5,pi", (0.5, math.pi)),
                                         ("6.283185307179586", (0.0, 2 * math.pi))])
def test_aperture_parsing(text, expect):
    assert cli._parse_aperture(text) == pytest.approx(expect)


def test_thread_count_does_not_change_outputs(tmp_path, monkeypatch):
    paths = []
    for threads in ("1", "3"):
        monkeypatch.setenv("TAPERSCAT_THREADS", threads)
        ds = tmp_path / f"ds{threads}.txt"
        pts = tmp_path / f"p{threads}.txt"
        assert cli.main(BASE + ["--out", str(ds)]) == 0
        assert cli.main(["reconstruct", "--data", str(ds), "--out", str(pts)]) == 0
        paths.append((ds, pts))
    (d1, p1), (d3, p3) = paths
    assert d1.read_bytes() == d3.read_bytes()
    assert p1.read_bytes() == p3.read_bytes()


@pytest.fixture(scope="module")
def validate_report():
    buf = io.StringIO()
    ok, results = cli.run_validate(stream=buf)
    return ok, results, buf.getvalue()


def test_validate_passes_with_magnitudes(validate_report):
    ok, results, text = validate_report
    assert ok
    assert text.strip().endswith("all checks passed")
    for r in results:
        assert f"{r.error:.3e}" in text


def test_uncoupled_equation_fails_at_resonance(capsys):
    buf = io.StringIO()
    ok, results = cli.run_validate(eta_scale=0.0, stream=buf)
    assert not ok
    failed = [r.name for r in results if not r.passed]
    assert failed == [f"Nystrom vs Mie series, circle, k={RESONANT_K:.6g}"]
    assert "FAILED: Nystrom vs Mie series" in buf.getvalue()


def test_validate_exit_code(monkeypatch):
    monkeypatch.setattr(cli, "run_validate", lambda eta_scale=1.0, stream=None: (False, []))
    assert cli.main(["validate"]) == 1
    monkeypatch.setattr(cli, "run_validate", lambda eta_scale=1.0, stream=None: (True, []))
    assert cli.main(["validate"]) == 0
