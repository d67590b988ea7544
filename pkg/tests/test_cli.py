import json
import pathlib
import subprocess
import sys

import pytest
import yaml

from gmcsim.cli import main

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "demos" / "configs"


def run(tmp_path, name, capsys, **changes):
    """Run ``name`` from a demo config with ``changes`` merged in; return (code, stdout, stderr)."""
    cfg = yaml.safe_load((CONFIGS / f"{name}.yaml").read_text())
    cfg["out"] = str(tmp_path)
    for k, v in changes.items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k].update(v)
        else:
            cfg[k] = v
    path = tmp_path / f"{name}.yaml"
    path.write_text(yaml.safe_dump(cfg))
    command = name.removesuffix("-flat").removesuffix("-quick")
    code = main([command, "--config", str(path)])
    out, err = capsys.readouterr()
    return code, out, err


def report(tmp_path, command, seed):
    return json.loads((tmp_path / f"{command}-{seed}.json").read_text())


def test_thresholds(tmp_path, capsys):
    code, out, _ = run(tmp_path, "thresholds", capsys)
    assert code == 0
    rep = json.loads(out.splitlines()[0])
    assert rep["mcond"] is True


def test_thresholds_gamma_zero(tmp_path, capsys):
    code, _, err = run(tmp_path, "thresholds", capsys, gamma=0.0)
    assert code == 2 and "gamma-zero" in err


@pytest.mark.parametrize("change, field", [
    ({"gamma": 2.5}, "gamma"),
    ({"levels": [5]}, "levels"),
    ({"replicates": 0}, "replicates"),
    ({"backend": "gpu"}, "backend"),
    ({"domain": {"kind": "triangle"}}, "domain.kind"),
    ({"tolerances": {"bogus": 1}}, "tolerances.bogus"),
])
def test_malformed_config_names_field(tmp_path, capsys, change, field):
    code, _, err = run(tmp_path, "simulate-quick", capsys, **change)
    assert code == 2
    assert "bad-config" in err and field in err


def test_unparseable_yaml(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("gamma: [1,\n")
    assert main(["simulate", "--config", str(p)]) == 2
    assert "bad-config" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["thresholds", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_missing_seed(tmp_path, capsys):
    code, _, err = run(tmp_path, "simulate-quick", capsys, seed=None)
    assert code == 2 and "seed" in err


def test_simulate_flat_is_constant(tmp_path, capsys):
    code, out, _ = run(tmp_path, "simulate-quick", capsys, gamma=0.0, replicates=3, levels=[3, 5])
    assert code == 0 and "PASS" in out
    lines = (tmp_path / "simulate-7.csv").read_text().splitlines()
    assert lines[0].startswith("# ") and lines[1] == "replicate,level,mass"
    masses = {float(l.split(",")[2]) for l in lines[2:]}
    assert len(masses) == 1


def test_simulate_same_seed_identical(tmp_path, capsys):
    runs = []
    for _ in range(2):
        assert run(tmp_path, "simulate-quick", capsys, replicates=5)[0] in (0, 1)
        runs.append((tmp_path / "simulate-7.csv").read_bytes())
    assert runs[0] == runs[1]
    head = json.loads(runs[0].decode().splitlines()[0][2:])
    assert head["seed"] == 7 and head["command"] == "simulate"
    assert {"config_digest", "versions", "overrides"} <= head.keys()


def test_seed_override(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    cfg = yaml.safe_load((CONFIGS / "simulate-quick.yaml").read_text())
    cfg.update(out=str(tmp_path), replicates=2)
    p.write_text(yaml.safe_dump(cfg))
    main(["simulate", "--config", str(p), "--seed", "123"])
    head = json.loads((tmp_path / "simulate-123.csv").read_text().splitlines()[0][2:])
    assert head["overrides"] == {"seed": 123}


def test_simulate_budget_exit(tmp_path, capsys):
    code, _, err = run(tmp_path, "simulate-quick", capsys, backend="exact",
                       measure={"kind": "lebesgue", "h": 1 / 128}, levels=[3, 6])
    assert code == 3 and "ladder-too-large" in err


def test_dimension_flat(tmp_path, capsys):
    code, out, _ = run(tmp_path, "dimension-flat", capsys)
    assert code == 0 and "PASS" in out
    assert report(tmp_path, "dimension", 1)["report"]["target"] == 2.0


def test_project_flat(tmp_path, capsys):
    code, out, _ = run(tmp_path, "project-flat", capsys)
    assert code == 0 and "PASS" in out
    assert report(tmp_path, "project", 1)["report"]["max_abs_error"] < 1e-12


def test_project_needs_centred_disk(tmp_path, capsys):
    code, _, err = run(tmp_path, "project-flat", capsys, domain={"kind": "unit-square"})
    assert code == 2 and "domain" in err


def test_holder_positive(tmp_path, capsys):
    code, _, _ = run(tmp_path, "holder", capsys, replicates=2, holder={"thetas": 16, "us": 32})
    assert code == 0
    assert all(b > 0 for b in report(tmp_path, "holder", 5)["report"]["beta_hat"])


def test_quantum_length_flat(tmp_path, capsys):
    code, out, _ = run(tmp_path, "quantum-length", capsys, gamma=0.0, replicates=1)
    assert code == 0 and "PASS" in out


def test_module_entry_point(tmp_path):
    cfg = CONFIGS / "thresholds.yaml"
    res = subprocess.run([sys.executable, "-m", "gmcsim", "thresholds", "--config", str(cfg)],
                         capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == 0 and "mcond" in res.stdout


def test_calibrate_grid(tmp_path, capsys):
    code, out, _ = run(tmp_path, "calibrate-grid", capsys)
    assert code == 0 and "PASS" in out
    assert (tmp_path / "calibrate-grid-2.json").exists()
