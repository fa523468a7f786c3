import json
import os
import subprocess
import sys

import pytest

from memtraj.cli import main
from memtraj.config import load_config, validate_config
from memtraj.errors import ConfigError


def write(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def test_minimal_config_fills_defaults(tmp_path):
    cfg = load_config(write(tmp_path, {"model": "atom_cavity"}), run="compare")
    assert cfg.seed == 42
    assert cfg.physics == {"omega_q": 1.0, "delta": 1.0, "g": 1.0,
                           "gamma": 2.0, "plant_state": "plus_x"}
    assert cfg.numerics["dt"] == 1e-3
    assert cfg.numerics["n_cavity"] == 16
    assert cfg.run == "compare"


def test_config_round_trip(tmp_path):
    cfg = load_config(write(tmp_path, {
        "model": "linear_optomech",
        "seed": 7,
        "physics": {"g_prime": 0.1},
        "numerics": {"t_final": 3.0},
    }), run="compare")
    echo = cfg.echo()
    again = validate_config(echo)
    assert again.echo() == echo


def test_zero_dt_rejected_with_field_name(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_config(write(tmp_path, {"model": "atom_cavity",
                                     "numerics": {"dt": 0.0}}), run="sse")
    assert err.value.field == "numerics.dt"


def test_unknown_keys_rejected(tmp_path):
    for payload, field in (
        ({"model": "atom_cavity", "bogus": 1}, "bogus"),
        ({"model": "atom_cavity", "physics": {"omega": 1}}, "physics.omega"),
        ({"model": "atom_cavity", "numerics": {"dx": 1}}, "numerics.dx"),
        ({"model": "atom_cavity", "experiment": {"foo": 1}}, "experiment.foo"),
    ):
        with pytest.raises(ConfigError) as err:
            load_config(write(tmp_path, payload), run="compare")
        assert err.value.field == field


def test_model_and_run_validation(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, {"model": "nope"}), run="sse")
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, {"model": "atom_cavity"}))  # no run anywhere
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, {"model": "atom_cavity"}), run="dance")


def test_truncation_list_validation(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, {"model": "atom_cavity",
                                     "experiment": {"truncations": [4, 2]}}),
                    run="converge")
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, {"model": "atom_cavity",
                                     "experiment": {"truncations": [1, 2]}}),
                    run="converge")


def test_seed_override(tmp_path):
    path = write(tmp_path, {"model": "atom_cavity", "seed": 9})
    assert load_config(path, run="sse").seed == 9
    assert load_config(path, run="sse", seed=123).seed == 123


def test_missing_file_is_config_error():
    with pytest.raises(ConfigError):
        load_config("/no/such/file.json", run="sse")


ATOM_SHORT = {"model": "atom_cavity", "numerics": {"t_final": 0.5}}


def test_cli_success_and_outputs(tmp_path):
    cfg = write(tmp_path, ATOM_SHORT)
    out = tmp_path / "out"
    rc = main(["compare", "--config", cfg, "--out", str(out), "--no-figures"])
    assert rc == 0
    csv = out / "compare_atom_cavity.csv"
    report = out / "compare_atom_cavity.report.json"
    assert csv.exists() and report.exists()
    lines = csv.read_text().splitlines()
    assert lines[0].startswith("# memtraj")
    echoed = json.loads(lines[1].removeprefix("# config: "))
    assert echoed["model"] == "atom_cavity"
    body = json.loads(report.read_text())
    assert body["status"] == "ok"
    assert body["summary"]["max_distance"] < 0.05


def test_cli_figures_rendered(tmp_path):
    cfg = write(tmp_path, ATOM_SHORT)
    out = tmp_path / "fig"
    rc = main(["sme", "--config", cfg, "--out", str(out)])
    assert rc == 0
    assert (out / "sme_atom_cavity.png").exists()


def test_cli_exit_codes(tmp_path):
    # missing run / missing config
    assert main([]) == 2
    assert main(["compare"]) == 2
    # invalid config content
    bad = write(tmp_path, {"model": "atom_cavity", "numerics": {"dt": -1}})
    assert main(["compare", "--config", bad, "--out", str(tmp_path)]) == 2
    # wrong model for a command
    quad = write(tmp_path, {"model": "quadratic_optomech"}, "quad.json")
    assert main(["compare", "--config", quad, "--out", str(tmp_path)]) == 2
    assert main(["ensemble", "--config", quad, "--out", str(tmp_path)]) == 2
    # regime guards
    bench = write(tmp_path, {"model": "atom_cavity"}, "bench.json")
    assert main(["markovian", "--config", bench, "--out", str(tmp_path)]) == 2
    # numerical failure: absurd step size blows the norm window
    huge = write(tmp_path, {"model": "atom_cavity",
                            "physics": {"gamma": 40.0},
                            "numerics": {"dt": 0.5, "t_final": 50.0}},
                 "huge.json")
    assert main(["sse", "--config", huge, "--out", str(tmp_path),
                 "--no-figures"]) == 3


def test_cli_list_models_and_version(capsys):
    assert main(["--list-models"]) == 0
    out = capsys.readouterr().out
    assert "atom_cavity" in out and "quadratic_optomech" in out
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_cli_byte_determinism_across_runs_and_threads(tmp_path):
    cfg_payload = dict(ATOM_SHORT)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(cfg_payload))
    outputs = []
    for name, threads in (("a", "1"), ("b", "4"), ("c", "1")):
        out = tmp_path / name
        env = dict(os.environ)
        env["OMP_NUM_THREADS"] = threads
        env["OPENBLAS_NUM_THREADS"] = threads
        env["MKL_NUM_THREADS"] = threads
        proc = subprocess.run(
            [sys.executable, "-m", "memtraj.cli", "compare", "--config",
             str(cfg), "--out", str(out), "--no-figures"],
            env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outputs.append((out / "compare_atom_cavity.csv").read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_cli_seed_changes_output(tmp_path):
    cfg = write(tmp_path, ATOM_SHORT)
    outs = []
    for seed, name in ((1, "s1"), (2, "s2")):
        out = tmp_path / name
        assert main(["sme", "--config", cfg, "--seed", str(seed), "--out",
                     str(out), "--no-figures"]) == 0
        outs.append((out / "sme_atom_cavity.csv").read_bytes())
    assert outs[0] != outs[1]
