import json

import pytest
from hypothesis import given, strategies as st

from tcpwindow.cli import main
from tcpwindow.experiments import ConfigError, ExperimentConfig, list_experiments, resolve
from tcpwindow.toy import toy_moment_exact

NAMES = [
    "figure-comp", "embedded-contraction", "continuous-decay", "strong-ergodicity", "real-tcp",
    "constant-rate", "invariant-law", "concentration", "gross-tails", "toy-chain",
]


def _write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_list_experiments(capsys):
    assert main(["list-experiments"]) == 0
    out = capsys.readouterr().out
    assert [line.split("\t")[0] for line in out.splitlines()] == NAMES
    assert list_experiments() == NAMES


@pytest.mark.parametrize("name", NAMES)
def test_every_default_config_validates(name, tmp_path, capsys):
    assert main(["validate", _write(tmp_path, {"experiment": name})]) == 0
    assert capsys.readouterr().out.startswith(f"ok: {name}")


@pytest.mark.parametrize(
    "data, field",
    [
        ({"experiment": "toy-chain", "n_replicsa": 5}, "n_replicsa"),
        ({"experiment": "nope"}, "experiment"),
        ({"experiment": "real-tcp", "options": {"fdstep": 0.1}}, "options.fdstep"),
        ({"experiment": "real-tcp", "rate_model": "constant"}, "rate_model"),
        ({"experiment": "continuous-decay", "jump_law": {"kind": "dirac", "delta": 1.5}}, "jump_law"),
        ({"experiment": "figure-comp", "jump_law": {"kind": "uniform"}}, "jump_law"),
        ({"experiment": "continuous-decay", "time_grid": [2.0, 1.0]}, "time_grid"),
        ({"experiment": "constant-rate", "lambda": 0.0}, "lambda"),
        ({"experiment": "toy-chain", "root_seed": -3}, "root_seed"),
        ({"n_replicas": 10}, "experiment"),
    ],
)
def test_invalid_configs_name_the_field(data, field, tmp_path, capsys):
    assert main(["validate", _write(tmp_path, data)]) == 2
    err = capsys.readouterr().err
    assert f"{field}:" in err


def test_malformed_json(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["validate", str(p)]) == 2
    assert main(["validate", str(tmp_path / "missing.json")]) == 2


def test_run_toy_chain(tmp_path, capsys):
    out = tmp_path / "toy"
    assert main(["run", _write(tmp_path, {"experiment": "toy-chain"}), "--out", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert sum(line.startswith("[PASS]") for line in lines) == 3
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json", "reports.json", "toy_chain.csv"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["root_seed"] == 0 and manifest["all_satisfied"] is True
    assert set(manifest) >= {"config_sha256", "version", "wall_time_s", "config"}
    rows = (out / "toy_chain.csv").read_text().splitlines()
    assert len(rows) == 202
    # 17 significant digits
    assert rows[4].split(",")[1] == format(float(toy_moment_exact(3, 1)), ".17g")
    assert float(rows[60].split(",")[1]) == float(toy_moment_exact(59, 1))


def _run_bytes(tmp_path, tag, *extra):
    cfg = _write(tmp_path, {"experiment": "continuous-decay", "time_grid": [0.5, 1.0]}, f"{tag}.json")
    out = tmp_path / tag
    assert main(["run", cfg, "--replicas", "20000", "--seed", "5", "--out", str(out), *extra]) == 0
    return (out / "continuous_decay.csv").read_bytes(), (out / "reports.json").read_bytes()


def test_outputs_are_deterministic_across_runs_and_workers(tmp_path, capsys):
    first = _run_bytes(tmp_path, "a")
    assert _run_bytes(tmp_path, "b") == first
    assert _run_bytes(tmp_path, "c", "--workers", "2") == first
    assert _run_bytes(tmp_path, "d", "--seed", "6") != first


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = _write(tmp_path, {"experiment": "toy-chain"})
    assert main(["run", cfg, "--out", str(blocker / "sub")]) == 2
    assert "not writable" in capsys.readouterr().err


def test_failing_report_gives_exit_one(tmp_path, capsys):
    # a tolerance of zero with an unreachable threshold forces a failure
    cfg = _write(tmp_path, {"experiment": "invariant-law", "n_replicas": 1000, "options": {"ks_threshold": 1e-9}})
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "[FAIL] KS" in capsys.readouterr().out


finite = st.floats(0, 1e6, allow_nan=False)


@given(
    st.sampled_from(NAMES),
    st.one_of(st.none(), finite),
    st.one_of(st.none(), st.lists(finite, min_size=1, max_size=5).map(tuple)),
    st.integers(0, 2**63),
    st.dictionaries(st.text(min_size=1, max_size=5), st.one_of(finite, st.integers())),
)
def test_config_round_trip(name, x0, grid, seed, options):
    cfg = ExperimentConfig(experiment=name, x0=x0, time_grid=grid, root_seed=seed, options=options)
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("name", NAMES)
def test_resolved_config_round_trip(name):
    cfg = resolve(ExperimentConfig(experiment=name))
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg and resolve(back) == cfg and back.digest() == cfg.digest()


def test_lambda_key_spelling():
    cfg = ExperimentConfig.from_dict({"experiment": "constant-rate", "lambda": 2.0})
    assert cfg.lam == 2.0
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"experiment": "constant-rate", "lam": 2.0})
