import json
import math

import numpy as np
import pytest

from skewflow import cli
from skewflow.config import SEED_ENV, ConfigError, parse_config

MINIMAL = {"T": 1.0, "curves": [{"kind": "constant", "params": [0.0]}], "gap": 1.0, "beta": [1 / 3]}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_minimal_config():
    rc = parse_config(json.dumps(MINIMAL), env={})
    assert rc.problem.beta.value(1, 0.5) == pytest.approx(1 / 3)
    assert rc.seed == 0 and rc.problem.sigma.lower == 1.0


def test_beta_out_of_range_message():
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps({**MINIMAL, "beta": [1.5]}), env={})
    assert any("beta out of (-1, 1)" in e for e in exc.value.errors)


def test_crossing_curves_message():
    cfg = {**MINIMAL, "curves": [{"kind": "constant", "params": [1.0]}, {"kind": "constant", "params": [0.0]}],
           "beta": [0.1, 0.1], "gap": 0.1}
    with pytest.raises(ConfigError, match="ordering"):
        parse_config(json.dumps(cfg), env={})


@pytest.mark.parametrize("patch,fragment", [
    ({"curves": [{"kind": "spiral", "params": [0.0]}]}, "curves[0].kind: unknown kind"),
    ({"curves": None}, "curves: missing field"),
    ({"beta": None}, "beta: missing field"),
    ({"sigma": {"kind": "affine", "params": [1.0]}}, "sigma.params"),
    ({"seed": -3}, "seed"),
    ({"pde": {"f": {"kind": "wavelet"}}}, "pde.f.kind"),
])
def test_schema_errors_carry_paths(patch, fragment):
    cfg = {**MINIMAL, **patch}
    cfg = {k: v for k, v in cfg.items() if v is not None}
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(cfg), env={})
    assert any(fragment in e for e in exc.value.errors), exc.value.errors


def test_invalid_json():
    with pytest.raises(ConfigError, match="invalid JSON"):
        parse_config("{", env={})


def test_seed_env_override():
    assert parse_config(json.dumps(MINIMAL), env={SEED_ENV: "42"}).seed == 42


def test_bounds_inferred_from_samples():
    cfg = {**MINIMAL, "sigma": [1.0, {"kind": "arctan", "params": [1.5, 0.2, 1.0]}]}
    sig = parse_config(json.dumps(cfg), env={}).problem.sigma
    assert sig.lower == pytest.approx(1.0) and sig.upper <= 1.5 + 0.2 * math.pi / 2


def test_unknown_command_exit_2(tmp_path, capsys):
    assert cli.main(["frobnicate", write(tmp_path, MINIMAL)]) == cli.EXIT_USAGE


def test_missing_config_exit_3(tmp_path):
    assert cli.main(["simulate", str(tmp_path / "nope.json")]) == cli.EXIT_IO


def test_bad_config_exit_2(tmp_path, capsys):
    assert cli.main(["simulate", write(tmp_path, {**MINIMAL, "beta": [1.5]})]) == cli.EXIT_USAGE
    assert "beta out of" in capsys.readouterr().err


def test_unwritable_output_exit_3(tmp_path):
    cfg = {**MINIMAL, "simulate": {"n_paths": 4, "n_steps": 4}}
    out = str(tmp_path / "missing_dir" / "paths.csv")
    assert cli.main(["simulate", write(tmp_path, cfg), "--output", out]) == cli.EXIT_IO


def test_bad_threads(tmp_path):
    assert cli.main(["simulate", write(tmp_path, MINIMAL), "--threads", "0"]) == cli.EXIT_USAGE


def test_simulate_outputs(tmp_path, capsys):
    cfg = {**MINIMAL, "seed": 3, "simulate": {"n_paths": 5, "n_steps": 10, "format": "csv"}}
    out = tmp_path / "paths.csv"
    assert cli.main(["simulate", write(tmp_path, cfg), "-o", str(out)]) == 0
    assert out.read_text().startswith("path,step,t,x,y\n")
    text = capsys.readouterr().out
    assert "paths 5 steps 10 seed 3" in text
    token = text.split("mean_X_T ")[1].split()[0]
    assert cli._g(float(token)) == token


def test_transform_dump_deterministic(tmp_path):
    cfg = {"T": 1.0, "curves": [{"kind": "sinusoid", "params": [0.0, 0.3, 1.0, 0.0]},
                                {"kind": "linear", "params": [1.0, 0.2]}],
           "gap": 0.3, "beta": [{"kind": "sinusoid", "params": [0.2, 0.1, 1.0, 0.0]}, -0.3],
           "transform_dump": {"t": [0.0, 0.5], "x": {"lo": -2, "hi": 2, "n": 9}}}
    path = write(tmp_path, cfg)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["transform-dump", path, "-o", str(a)]) == 0
    assert cli.main(["transform-dump", path, "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "t,x,mu,R,r,Psi,sigma_bar,b_bar,y_1,y_2" and len(lines) == 19
    row = [float(v) for v in lines[3].split(",")]
    assert row[4] == pytest.approx(row[1]) and row[8] == 0.0


def test_solve_pde_command(tmp_path, capsys):
    cfg = {**MINIMAL, "pde": {"lambda": 0.5, "f": {"kind": "gaussian", "params": [1, 0.3, 0.5]},
                              "L": 5, "N": 100, "M": 10, "points": [0.0],
                              "grid_dump": str(tmp_path / "u.bin")}}
    assert cli.main(["solve-pde", write(tmp_path, cfg), "-o", str(tmp_path / "u.csv")]) == 0
    assert (tmp_path / "u.bin").stat().st_size > 32
    assert "max_flux_mismatch" in capsys.readouterr().out


def test_validate_fk_reference(tmp_path, capsys):
    cfg = {**MINIMAL, "seed": 1, "validate_fk": {
        "lambda": 0.5, "f": {"kind": "gaussian", "params": [1, 0.3, 0.5]},
        "g": {"kind": "bump", "params": [0.5, 0, 1]}, "N": 200, "M": 200,
        "n_paths": 20000, "n_steps": 200, "points": [[0, -0.5], [0, 0.0], [0, 0.5]]}}
    out = tmp_path / "fk.csv"
    assert cli.main(["validate-fk", write(tmp_path, cfg), "-o", str(out)]) == cli.EXIT_OK
    assert len(out.read_text().splitlines()) == 4


def test_validate_gen_negative_control(tmp_path, capsys):
    cfg = {**MINIMAL, "seed": 2, "validate_gen": {"enforce": False, "starts": [0.0], "check_times": [1.0],
                                                  "n_paths": 10000, "n_steps": 400}}
    assert cli.main(["validate-gen", write(tmp_path, cfg)]) == cli.EXIT_FAIL
    assert capsys.readouterr().out.strip().endswith("FAIL")


def test_validate_ip_time_function(tmp_path, capsys):
    cfg = {**MINIMAL, "validate_ip": {"kind": "time", "n_paths": 100, "n_steps": 50}}
    assert cli.main(["validate-ip", write(tmp_path, cfg)]) == cli.EXIT_OK


def test_validate_ck_constant(tmp_path, capsys):
    cfg = {**MINIMAL, "validate_ck": {"phi": {"kind": "constant", "params": [1.0]}, "n_paths": 500,
                                      "n_steps": 50, "inner_paths": 50}}
    assert cli.main(["validate-ck", write(tmp_path, cfg)]) == cli.EXIT_OK
    assert "defect 0 " in capsys.readouterr().out


def test_runtime_error_maps_to_usage(tmp_path, capsys):
    cfg = {**MINIMAL, "pde": {"theta": 0.2, "N": 100, "M": 5}}
    assert cli.main(["solve-pde", write(tmp_path, cfg)]) == cli.EXIT_USAGE


def test_float_format():
    assert cli._g(0.1) == "0.10000000000000001"
    assert float(cli._g(np.pi)) == np.pi
