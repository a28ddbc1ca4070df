"""Tests for config loading, hashing, manifests, and the CLI entry point."""

import hashlib
import json

import pytest

from extrapolab.cli import (
    ConfigError,
    ExperimentConfig,
    config_hash,
    load_config,
    main,
    run,
    write_manifest,
)

# -------------------------------------------------------------------- configs


def write_config(tmp_path, text, name="exp.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_load_config_happy_path(tmp_path):
    path = write_config(tmp_path, """
kind = "ntk-exact"
seed = 7
out = "runs/x"

[params]
dims = [2]
n_transforms = 2
n_test = 50
""")
    cfg = load_config(path)
    assert cfg.kind == "ntk-exact"
    assert cfg.seed == 7
    assert cfg.params["dims"] == [2]


def test_load_config_missing_file_raises():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/exp.toml")


def test_load_config_rejects_bad_toml(tmp_path):
    path = write_config(tmp_path, "kind = [unclosed")
    with pytest.raises(ConfigError):
        load_config(path)


def test_load_config_rejects_unknown_fields(tmp_path):
    path = write_config(tmp_path, 'kind = "ntk-exact"\nbudget = 5\n')
    with pytest.raises(ConfigError, match="budget"):
        load_config(path)


def test_load_config_requires_kind(tmp_path):
    path = write_config(tmp_path, 'seed = 3\n')
    with pytest.raises(ConfigError, match="kind"):
        load_config(path)


def test_unknown_experiment_kind_names_the_field():
    with pytest.raises(ConfigError, match="kind"):
        ExperimentConfig(kind="warp-drive")


def test_schema_version_is_checked():
    with pytest.raises(ConfigError, match="schema_version"):
        ExperimentConfig(kind="ntk-exact", schema_version=99)


# -------------------------------------------------------------------- hashing


def test_config_hash_ignores_output_location():
    a = ExperimentConfig(kind="ntk-exact", seed=1, out="runs/a", params={"x": 1})
    b = ExperimentConfig(kind="ntk-exact", seed=1, out="/elsewhere", params={"x": 1})
    assert config_hash(a) == config_hash(b)


def test_config_hash_depends_on_settings():
    a = ExperimentConfig(kind="ntk-exact", seed=1)
    b = ExperimentConfig(kind="ntk-exact", seed=2)
    c = ExperimentConfig(kind="ntk-exact", seed=1, params={"dims": [4]})
    assert len({config_hash(a), config_hash(b), config_hash(c)}) == 3


def test_config_hash_is_key_order_independent():
    a = ExperimentConfig(kind="ntk-exact", params={"x": 1, "y": 2})
    b = ExperimentConfig(kind="ntk-exact", params={"y": 2, "x": 1})
    assert config_hash(a) == config_hash(b)


# ------------------------------------------------------------------- manifests


def test_manifest_hashes_every_file(tmp_path):
    f1 = tmp_path / "a.csv"
    f1.write_text("x,y\n1,2\n")
    f2 = tmp_path / "b.json"
    f2.write_text("{}\n")
    write_manifest(tmp_path, [("metrics", f1), ("summary", f2)])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["partial"] is False
    assert len(manifest["files"]) == 2
    by_name = {e["path"]: e for e in manifest["files"]}
    assert by_name["a.csv"]["sha256"] == hashlib.sha256(f1.read_bytes()).hexdigest()
    assert by_name["a.csv"]["role"] == "metrics"


def test_partial_manifest_is_flagged(tmp_path):
    write_manifest(tmp_path, [], partial=True)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["partial"] is True
    assert manifest["files"] == []


# ------------------------------------------------------------------ run bundle


NTK_CONFIG = """
kind = "ntk-exact"
seed = 0
out = "{out}"

[params]
dims = [2]
n_transforms = 2
n_test = 100
"""


def test_run_writes_complete_bundle(tmp_path):
    out = tmp_path / "bundle"
    path = write_config(tmp_path, NTK_CONFIG.format(out=out))
    result = run(path)
    assert (out / "metrics.csv").is_file()
    assert (out / "result.json").is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    for entry in manifest["files"]:
        blob = (out / entry["path"]).read_bytes()
        assert hashlib.sha256(blob).hexdigest() == entry["sha256"]
    payload = json.loads((out / "result.json").read_text())
    assert payload["config_hash"] == result.config_hash
    assert payload["summary"]["max_error"] < 1e-6


def test_rerunning_same_config_is_byte_identical(tmp_path):
    out = tmp_path / "bundle"
    path = write_config(tmp_path, NTK_CONFIG.format(out=out))
    run(path)
    first = (out / "metrics.csv").read_bytes()
    run(path)
    assert (out / "metrics.csv").read_bytes() == first


def test_seed_grid_runs_match_across_thread_counts(tmp_path):
    config = """
kind = "mlp-extrap"
seed = 0
out = "{out}"

[params]
seeds = [0, 1]
targets = ["linear"]
n_train = 96
n_val = 48
n_test = 64
width = 8
epochs = 3
batch_size = 32
"""
    out1, out2 = tmp_path / "serial", tmp_path / "pool"
    p1 = write_config(tmp_path, config.format(out=out1), "serial.toml")
    p2 = write_config(tmp_path, config.format(out=out2), "pool.toml")
    run(p1, threads=1)
    run(p2, threads=2)
    assert (out1 / "metrics.csv").read_bytes() == (out2 / "metrics.csv").read_bytes()


def test_direction_sweep_config_emits_ray_records(tmp_path):
    out = tmp_path / "sweep"
    path = write_config(tmp_path, f"""
kind = "direction-sweep"
seed = 0
out = "{out}"

[params]
n_dirs = 10
n_train = 128
width = 8
epochs = 3
batch_size = 32
""")
    result = run(path)
    assert len(result.records) == 10
    assert "fraction_above" in result.summary
    header = (out / "metrics.csv").read_text().splitlines()[0]
    assert "r_squared" in header


# ------------------------------------------------------------------ exit codes


def test_main_success_exit_zero(tmp_path, capsys):
    out = tmp_path / "ok"
    path = write_config(tmp_path, NTK_CONFIG.format(out=out))
    assert main(["run", path]) == 0
    assert "config_hash" in capsys.readouterr().out


def test_main_validation_error_exit_one(tmp_path, capsys):
    path = write_config(tmp_path, 'kind = "warp-drive"\n')
    assert main(["run", path]) == 1
    assert "kind" in capsys.readouterr().err


def test_main_runtime_failure_exit_two(tmp_path, capsys):
    out = tmp_path / "boom"
    path = write_config(tmp_path, f"""
kind = "ntk-exact"
out = "{out}"

[params]
dims = [0]
""")
    assert main(["run", path]) == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["partial"] is True


def test_main_rejects_unknown_subcommand():
    assert main(["defragment"]) == 1


def test_gen_requires_exactly_one_source(tmp_path):
    assert main(["gen", "--out", str(tmp_path / "g1")]) == 1
    assert main(["gen", "--target", "l1", "--family", "path",
                 "--out", str(tmp_path / "g2")]) == 1


def test_gen_target_writes_dataset(tmp_path, capsys):
    out = tmp_path / "data"
    assert main(["gen", "--target", "sqrt", "--n", "50", "--out", str(out)]) == 0
    assert (out / "data.csv").is_file()
    assert (out / "manifest.json").is_file()
    # sqrt inputs must be nonnegative, which needs the shifted cube
    from extrapolab.synthdata import load_csv

    x, y, _ = load_csv(str(out / "data.csv"))
    assert x.min() >= 0.0
    assert len(y) == 50


def test_gen_family_writes_graphs(tmp_path):
    out = tmp_path / "graphs"
    assert main(["gen", "--family", "cycle", "--n", "4", "--out", str(out)]) == 0
    from extrapolab.graphgen import read_jsonl

    graphs, labels = read_jsonl(str(out / "graphs.jsonl"))
    assert len(graphs) == 4
    assert all((g.degrees() == 2).all() for g in graphs)


def test_report_summarizes_run(tmp_path, capsys):
    out = tmp_path / "rep"
    path = write_config(tmp_path, NTK_CONFIG.format(out=out))
    assert main(["run", path]) == 0
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
