import json

import pytest

from coupledmaps.cli import SCHEMA, ConfigError, load_config, main, parse_config, run, serialize_config

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib


def _write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_schema_defaults_are_valid_types():
    for key, field in SCHEMA.items():
        if field.choices and field.default is not None:
            assert field.default in field.choices, key


def test_validate_enumerates_errors(tmp_path, capsys):
    p = _write(tmp_path, 'experiment = "chaos"\nbogus = 1\nhilbert.pairs = 3\n[chaos]\nt = "three"\nN_list = [64, 16]\n')
    assert main(["validate", str(p)]) == 2
    rec = json.loads(capsys.readouterr().err)
    keys = {e["key"] for e in rec["errors"]}
    assert rec["status"] == "error" and rec["kind"] == "config"
    assert {"bogus", "hilbert.pairs", "chaos.t"} <= keys


def test_cross_checks():
    with pytest.raises(ConfigError) as exc:
        parse_config({"experiment": "chaos", "chaos": {"N_list": [64, 16]}})
    assert exc.value.errors[0][0] == "chaos.N_list"
    with pytest.raises(ConfigError):
        parse_config({"experiment": "certificate", "certificate": {"a0": 3.0, "b0": 2.0}})
    with pytest.raises(ConfigError):
        parse_config({"experiment": "hilbert-selftest", "hilbert": {"M": 1000}})
    with pytest.raises(ConfigError):
        parse_config({"seed": 1})


def test_missing_and_malformed_files(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "nope.toml")]) == 2
    assert json.loads(capsys.readouterr().err)["kind"] == "io"
    assert main(["validate", str(_write(tmp_path, "experiment = [\n"))]) == 2


def test_validate_ok(tmp_path, capsys):
    p = _write(tmp_path, 'experiment = "hilbert-selftest"\nseed = 4\n')
    assert main(["validate", str(p)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "ok" and out["output_dir"].startswith("runs/hilbert-selftest-")


@pytest.mark.parametrize("raw", [
    {"experiment": "chaos", "seed": 3, "system": {"site": "tripling", "epsilon": 0.05}, "chaos": {"N_list": [8, 32]}},
    {"experiment": "good-set", "system": {"coupling": "trig", "terms": [[0.1, 0, 1, 0.0]]}},
    {"experiment": "certificate", "certificate": {"brute_force": False}},
    {"experiment": "sto-fixpoint", "initial": {"kind": "uniform"}},
])
def test_round_trip(raw):
    cfg = parse_config(raw)
    again = parse_config(tomllib.loads(serialize_config(cfg)))
    assert again == cfg and again.hash() == cfg.hash()


def test_hilbert_selftest_run(tmp_path):
    cfg = parse_config({"experiment": "hilbert-selftest", "hilbert": {"pairs": 5, "M": 256}})
    m = run(cfg, tmp_path / "run")
    summary = json.loads((tmp_path / "run" / "summary.json").read_text())
    assert summary["metrics"]["all_passed"] and summary["config_hash"] == cfg.hash()
    assert set(m.files) == {"results.csv", "plot.csv", "summary.json", "config.toml"}
    assert (tmp_path / "run" / "plot.csv").read_text().startswith("series,x,y,err\n")
    assert load_config(tmp_path / "run" / "config.toml") == cfg


def test_rerun_reproduces_checksums(tmp_path):
    raw = {"experiment": "concentration", "seed": 11, "initial": {"kind": "uniform", "M": 64},
           "concentration": {"N": 20, "P": 5000, "eps_list": [0.1, 0.2]}}
    a = run(parse_config(raw), tmp_path / "a")
    b = run(parse_config(raw), tmp_path / "b")
    assert a.files == b.files
    for name in a.files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["files"] == a.files and manifest["seed"] == 11


def test_run_writes_only_inside_run_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    p = _write(tmp_path, 'experiment = "hilbert-selftest"\n[hilbert]\npairs = 2\nM = 128\n')
    assert main(["run", str(p)]) == 0
    created = sorted(q.relative_to(tmp_path).parts[0] for q in tmp_path.iterdir())
    assert created == ["cfg.toml", "runs"]


def test_uncoupled_chaos_note(tmp_path):
    raw = {"experiment": "chaos", "system": {"coupling": "none"}, "initial": {"M": 256},
           "chaos": {"t": 2, "N_list": [4, 16, 64], "P": 4000, "bootstrap": 50}}
    run(parse_config(raw), tmp_path / "c")
    metrics = json.loads((tmp_path / "c" / "summary.json").read_text())["metrics"]
    assert any("uncoupled: exact equality expected" in n for n in metrics["notes"])
    assert -0.7 < metrics["slope"] < -0.3


def test_computation_error_exit_code(tmp_path, capsys):
    # amplitude 1 makes the site lift non-monotone, which only the computation detects
    p = _write(tmp_path, 'experiment = "sto-fixpoint"\noutput_dir = "%s"\n[system]\nsite = "expanding"\n'
               'modes = [[1.0, 1.0, 0.0]]\n' % (tmp_path / "out").as_posix())
    assert main(["run", str(p)]) == 1
    rec = json.loads(capsys.readouterr().err)
    assert rec["kind"] == "computation" and rec["message"] == "lift derivative must be positive"
