import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from singular_yamabe import __version__
from singular_yamabe.cli import main
from singular_yamabe.fowler import energy_level
from singular_yamabe.geometry import setup


def run(tmp_path, *args, out="out"):
    d = tmp_path / out
    code = main([*args, "--out", str(d)])
    manifest = json.loads((d / "manifest.json").read_text()) if (d / "manifest.json").exists() else None
    return code, d, manifest


def load(path):
    return json.loads(path.read_text())


# -- fowler ------------------------------------------------------------------------


def test_fowler_energy(tmp_path):
    code, d, man = run(tmp_path, "fowler", "--n", "3", "--eps", "0.5")
    assert code == 0
    s = load(d / "summary.json")
    assert s["energy"] == pytest.approx(-15 / 256, abs=1e-10)
    assert man["exit_code"] == 0 and man["command"] == "fowler"
    assert man["version"] == __version__
    assert sorted(man["outputs"]) == ["orbit.csv", "summary.json"]
    header = (d / "orbit.csv").read_text().splitlines()[0]
    assert header == "t,v,w"


def test_fowler_at_eps0(tmp_path):
    code, d, _ = run(tmp_path, "fowler", "--n", "3", "--eps", "eps0")
    assert code == 0
    assert load(d / "summary.json")["period"] == pytest.approx(2 * math.pi, abs=1e-12)


@pytest.mark.parametrize("args", [["--eps", "1.5"], ["--eps", "abc"], ["--n", "2"], ["--tol", "-1"]])
def test_fowler_bad_input(tmp_path, args):
    # argparse rejects malformed flags itself; range errors are reported in the manifest
    try:
        code = main(["fowler", *args, "--out", str(tmp_path / "o")])
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_fowler_sweep(tmp_path):
    code, d, man = run(tmp_path, "fowler", "--sweep", "eps=0.2:0.4:0.1", "--jobs", "2")
    assert code == 0
    idx = load(d / "index.json")
    assert [row["eps"] for row in idx] == [0.2, 0.3, 0.4]
    for i, row in enumerate(idx):
        assert row["outputs"] == [f"case{i:03d}_orbit.csv", f"case{i:03d}_summary.json"]
        assert load(d / row["outputs"][1])["eps"] == pytest.approx(row["eps"], abs=1e-15)
    assert "index.json" in man["outputs"]


# -- spectrum ----------------------------------------------------------------------


def test_spectrum(tmp_path):
    code, d, _ = run(tmp_path, "spectrum", "--eps", "0.4", "--degrees", "0,1")
    assert code == 0
    rows = load(d / "spectrum.json")
    assert rows[0]["gamma"] == 0
    assert rows[1]["gamma"] == pytest.approx(1.0, abs=1e-6)


def test_spectrum_degree2_small_eps(tmp_path):
    code, d, _ = run(tmp_path, "spectrum", "--eps", "0.05", "--degrees", "2", "--n", "3")
    assert code == 0
    g = load(d / "spectrum.json")[0]["gamma"]
    assert abs(g - 2.5) < 0.15


# -- pohozaev ----------------------------------------------------------------------


def test_pohozaev_dilation(tmp_path):
    code, d, _ = run(tmp_path, "pohozaev", "--eps", "0.5", "--field", "dilation")
    assert code == 0
    rep = load(d / "pohozaev.json")
    scale = abs(setup(3).omega * energy_level(0.5, 3))
    assert rep["abs_err"] <= 1e-4 * scale
    assert set(rep) >= {"field", "center", "etas", "values", "extrapolated", "closed_form", "abs_err"}


@pytest.mark.parametrize("field", ["rotation", "parabolic_zero"])
def test_pohozaev_vanishing_fields(tmp_path, field):
    code, d, _ = run(tmp_path, "pohozaev", "--eps", "0.5", "--a", "0.2,0,0", "--T", "0.7", "--field", field)
    assert code == 0
    assert abs(load(d / "pohozaev.json")["extrapolated"]) <= 1e-6


def test_pohozaev_bad_vector(tmp_path):
    code, _, man = run(tmp_path, "pohozaev", "--a", "0.1,0.2")
    assert code == 2 and "3 components" in man["error"]


# -- balance -----------------------------------------------------------------------


def write_config(tmp_path, cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_balance_symmetric(tmp_path):
    cfg = write_config(tmp_path, {"n": 3, "points": [[-1, 0, 0], [1, 0, 0]], "necksizes": [0.3, 0.3],
                                  "translations": [[0.5, 0, 0], [-0.5, 0, 0]]})
    code, d, man = run(tmp_path, "balance", str(cfg))
    assert code == 0
    assert load(d / "balance.json")["max_abs"] <= 1e-12
    assert man["inputs"] == [str(cfg)]


def test_balance_zero_translations(tmp_path):
    cfg = write_config(tmp_path, {"n": 3, "points": [[-1, 0, 0], [1, 0, 0]], "necksizes": [0.3, 0.5],
                                  "translations": [[0, 0, 0], [0, 0, 0]]})
    code, d, _ = run(tmp_path, "balance", str(cfg))
    assert code == 0
    dil = load(d / "balance.json")["residuals"]["dilation"][0]
    assert dil == pytest.approx(0.5 * (energy_level(0.3, 3) + energy_level(0.5, 3)), rel=1e-15)


def test_balance_solve(tmp_path):
    cfg = write_config(tmp_path, {"n": 3, "points": [[0, 0, 0], [1, 0, 0], [0, 1.5, 0.3]],
                                  "necksizes": [0.2, 0.4, 0.6]})
    code, d, _ = run(tmp_path, "balance", str(cfg), "--solve")
    assert code == 0
    rep = load(d / "balance.json")
    assert "nullity" in rep and rep["residual_norm"] <= 1e-10
    assert rep["max_abs"] <= 1e-10


@pytest.mark.parametrize("text", ["{broken", json.dumps({"n": 3, "points": [[0, 0, 0]], "necksizes": [0.3]})])
def test_balance_malformed(tmp_path, text):
    path = tmp_path / "cfg.json"
    path.write_text(text)
    code, _, _ = run(tmp_path, "balance", str(path))
    assert code == 2


def test_balance_needs_translations_or_solve(tmp_path):
    cfg = write_config(tmp_path, {"n": 3, "points": [[-1, 0, 0], [1, 0, 0]], "necksizes": [0.3, 0.3]})
    assert run(tmp_path, "balance", str(cfg))[0] == 2


# -- sample and fit ----------------------------------------------------------------


@pytest.fixture(scope="module")
def sampled(tmp_path_factory):
    base = tmp_path_factory.mktemp("sampled")
    code = main(["sample", "--eps", "0.4", "--a", "0.1,0,0", "--T", "1.0", "--out", str(base / "s")])
    assert code == 0
    return base / "s" / "samples.csv"


def test_fit_roundtrip(tmp_path, sampled):
    code, d, _ = run(tmp_path, "fit", str(sampled))
    assert code == 0
    res = load(d / "fit.json")
    assert res["eps_hat"] == pytest.approx(0.4, abs=1e-3)
    assert res["T_hat"] == pytest.approx(1.0, abs=1e-3)
    assert np.allclose(res["a_hat"], [0.1, 0, 0], atol=1e-3)


def test_fit_homoclinic_exits_3(tmp_path):
    assert main(["sample", "--model", "homoclinic", "--out", str(tmp_path / "h")]) == 0
    code, _, man = run(tmp_path, "fit", str(tmp_path / "h" / "samples.csv"))
    assert code == 3 and man["exit_code"] == 3


def test_fit_truncated_exits_2(tmp_path, sampled):
    text = sampled.read_text()
    bad = tmp_path / "bad.csv"
    bad.write_text(text[: len(text) // 2])
    assert run(tmp_path, "fit", str(bad))[0] == 2


def test_fit_missing_file_exits_2(tmp_path):
    assert run(tmp_path, "fit", str(tmp_path / "missing.csv"))[0] == 2


def test_sample_bad_range(tmp_path):
    assert run(tmp_path, "sample", "--t0", "5", "--t1", "4")[0] == 2


# -- cross-cutting ---------------------------------------------------------------------


@pytest.mark.parametrize("args,payload", [
    (["fowler", "--eps", "0.3"], ["summary.json", "orbit.csv"]),
    (["spectrum", "--eps", "0.3"], ["spectrum.json"]),
    (["pohozaev", "--eps", "0.3", "--a", "0.1,0,0", "--etas", "0.2,0.1,0.05", "--degree", "12"], ["pohozaev.json"]),
])
def test_byte_identical_outputs(tmp_path, args, payload):
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    for name in payload:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ma, mb = load(tmp_path / "a" / "manifest.json"), load(tmp_path / "b" / "manifest.json")
    ma.pop("wall_time"), mb.pop("wall_time")
    assert ma == mb


def test_writes_only_inside_out(tmp_path, monkeypatch, sampled):
    work = tmp_path / "work"
    work.mkdir()
    monkeypatch.chdir(work)
    for args in (["fowler"], ["spectrum"], ["sample", "--t1", "7"], ["fit", str(sampled)]):
        assert main([*args, "--out", "o"]) == 0
    assert sorted(p.name for p in work.iterdir()) == ["o"]


def test_manifest_records_failure(tmp_path):
    code, _, man = run(tmp_path, "pohozaev", "--a", "1,2")
    assert code == 2
    assert man["exit_code"] == 2 and man["outputs"] == [] and man["error"]
    assert man["parameters"]["a"] == [1.0, 2.0]


def test_missing_subcommand_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


@pytest.mark.skipif(shutil.which("singular-yamabe") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["singular-yamabe", "fowler", "--eps", "0.5", "--out", str(tmp_path / "c")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "c" / "manifest.json").exists()
    proc = subprocess.run(["singular-yamabe", "fowler", "--eps", "1.5", "--out", str(tmp_path / "d")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
