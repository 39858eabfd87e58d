import json
from pathlib import Path

import pytest
import yaml

from mjspectra.cli import main, slope_fit
from mjspectra.config import load_config, validate, with_value
from mjspectra.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def summary(out):
    return json.loads((Path(out) / "summary.json").read_text())


def check_hashes(out, h):
    for f in Path(out).rglob("*"):
        if f.suffix == ".csv":
            assert f.read_text().splitlines()[0] == f"# config_hash={h}", f
        elif f.suffix == ".json":
            assert json.loads(f.read_text())["config_hash"] == h, f


def test_compare_flat(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["compare", "--config", str(CONFIGS / "compare_flat.yaml"), "--out", str(out)]) == 0
    s = summary(out)
    assert s["passed"] and s["results"]["max_error"] <= 1e-12
    assert "PASS all_matched_h0.1" in capsys.readouterr().out
    check_hashes(out, s["config_hash"])


def test_bad_delta(tmp_path, capsys):
    code = main(["quantize", "--config", str(CONFIGS / "bad_delta.yaml"), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "quantize.delta" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_pipeline_mismatch(tmp_path):
    assert main(["katok", "--config", str(CONFIGS / "trace.yaml"), "--out", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize("path,value,field", [
    ("trace.tol", -1.0, "trace.tol"),
    ("trace.x", [0.1], "trace.x"),
    ("model.variant", "nope", "model"),
    ("trace.section.index", 7, "trace.section.index"),
])
def test_field_paths(tmp_path, path, value, field):
    raw = with_value(load_config(CONFIGS / "trace.yaml"), path, value)
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        validate("trace", raw)


def test_unknown_field_key():
    raw = load_config(CONFIGS / "trace.yaml")
    raw["model"]["V"] = {"f1": {"a": [0.0, 0.3]}}
    with pytest.raises(ConfigError):
        validate("trace", raw)


def test_empty_axis():
    raw = load_config(CONFIGS / "katok_sweep.yaml")
    raw["sweep"]["values"] = []
    with pytest.raises(ConfigError, match="sweep.values"):
        validate("katok", raw)


def test_bad_sweep_value_detected_first():
    raw = load_config(CONFIGS / "katok_sweep.yaml")
    raw["sweep"]["values"] = [0.3, 1.5]
    with pytest.raises(ConfigError, match="katok"):
        validate("katok", raw)


def test_katok_sweep(tmp_path):
    out = tmp_path / "sweep"
    assert main(["katok", "--config", str(CONFIGS / "katok_sweep.yaml"), "--out", str(out), "--jobs", "2"]) == 0
    index = json.loads((out / "index.json").read_text())
    assert [r["value"] for r in index["runs"]] == [0.3, 0.5, 0.6180339887498949]
    assert all(r["passed"] for r in index["runs"])
    for r in index["runs"]:
        assert (out / r["dir"] / "katok_report.json").exists()


def test_trace_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = str(CONFIGS / "trace.yaml")
    assert main(["trace", "--config", cfg, "--out", str(a)]) == 0
    assert main(["trace", "--config", cfg, "--out", str(b)]) == 0
    files = sorted(p.name for p in a.iterdir() if p.name != "timing.json")
    assert files == sorted(p.name for p in b.iterdir() if p.name != "timing.json")
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    check_hashes(a, summary(a)["config_hash"])


def test_failed_assertion_exit_code(tmp_path, capsys):
    raw = load_config(CONFIGS / "mjverify.yaml")
    raw["mjverify"]["coincidence"].update(n_points=2, T=5.0, max_distance=1e-300)
    raw["mjverify"]["torus"] = None
    assert main(["mjverify", "--config", write(tmp_path, raw), "--out", str(tmp_path / "o")]) == 3
    assert "FAIL orbit_coincidence" in capsys.readouterr().out
    assert summary(tmp_path / "o")["passed"] is False


def test_numerical_failure_exit_code(tmp_path, capsys):
    raw = load_config(CONFIGS / "quantize.yaml")
    raw["quantize"].update(h=[0.5], C0=0.01)
    assert main(["quantize", "--config", write(tmp_path, raw), "--out", str(tmp_path / "o")]) == 3
    s = summary(tmp_path / "o")
    assert s["status"] == "numerical_failure" and "WindowEmpty" in s["error"] and s["failed_stage"]


def test_gaps_artifacts(tmp_path):
    raw = load_config(CONFIGS / "gaps.yaml")
    raw["gaps"].update(h=[0.2, 0.1], C1=0.2, min_fraction=0.0)
    out = tmp_path / "g"
    main(["gaps", "--config", write(tmp_path, raw), "--out", str(out)])
    s = summary(out)
    assert s["status"] == "ok"
    assert s["results"]["trend"]["h"] == [0.2, 0.1]
    assert (out / "window_h0.2.csv").exists() and (out / "gaps_h0.1.json").exists()


def test_larmor_profile(tmp_path):
    out = tmp_path / "l"
    assert main(["larmor", "--config", str(CONFIGS / "larmor.yaml"), "--out", str(out)]) == 0
    s = summary(out)
    assert s["results"]["reeb"]["intervals"][1]["components"] == 1
    check_hashes(out, s["config_hash"])


def test_slope_fit():
    hs = [0.1, 0.05, 0.025]
    assert slope_fit(hs, [3 * h ** 2 for h in hs]) == pytest.approx(2.0)
