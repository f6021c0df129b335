"""Config parsing, run manifests, and the batch front-end.

CLI runs happen in-process through cli.main(argv) so exit codes and
output files can be asserted without subprocess plumbing.
"""

import math

import numpy as np
import pytest
import yaml

from driftlab import cli
from driftlab.config import ExperimentConfig, config_hash
from driftlab.errors import ConfigError
from driftlab.records import read_csv_columns, read_record

BASE = """\
output_dir: {out}
seed: 3
workers: 1
figures: false
system:
  mu: 0.0
  a0: 10.0
  perturbation: arnold
melnikov:
  omega_values: [1.0]
  grid_n: 17
  certify: true
  sweep_step: 0.0
"""


def _write_config(tmp_path, text=None, name="exp.yaml"):
    out = tmp_path / "runs"
    path = tmp_path / name
    path.write_text((text or BASE).format(out=out))
    return path, out


# ---------------------------------------------------------------------------
# config objects


def test_config_round_trip(tmp_path):
    path, _ = _write_config(tmp_path)
    cfg = ExperimentConfig.load(path)
    again = ExperimentConfig.loads(cfg.dumps())
    assert again.to_dict() == cfg.to_dict()
    assert again.melnikov.omega_values == (1.0,)
    assert cfg.figures is False
    assert cfg.loop is None


def test_empty_config_is_all_defaults():
    cfg = ExperimentConfig.loads("")
    assert cfg.system.mu == 0.0
    assert cfg.system.perturbation == "arnold"
    assert cfg.melnikov is None and cfg.scaling is None


def test_unknown_key_is_named():
    text = "system:\n  mu: 0.01\n  perturbatoin: arnold\n"
    with pytest.raises(ConfigError, match="perturbatoin"):
        ExperimentConfig.loads(text)
    with pytest.raises(ConfigError, match="outputdir"):
        ExperimentConfig.loads("outputdir: runs\n")


def test_require_names_missing_stage():
    cfg = ExperimentConfig.loads("system:\n  mu: 0.0\n")
    with pytest.raises(ConfigError, match="transition"):
        cfg.require("transition")
    assert cfg.require("system").mu == 0.0


def test_perturbation_term_list():
    text = (
        "system:\n"
        "  mu: 0.02\n"
        "  perturbation:\n"
        "    - {c: 1.0, kQ: 1, kq: 0, kt: 0, phi: 0.0}\n"
        "    - {c: -0.5, kQ: 0, kq: 1, kt: 2, phi: 0.7}\n"
    )
    s = ExperimentConfig.loads(text).system.to_system()
    assert len(s.perturbation.terms) == 2
    assert s.perturbation.terms[1].kt == 2
    assert s.perturbation.max_abs() == pytest.approx(1.5)


def test_perturbation_rejects_other_types():
    cfg = ExperimentConfig.loads("system:\n  perturbation: 7\n")
    with pytest.raises(ConfigError):
        cfg.system.to_system()


def test_config_hash_ignores_key_order(tmp_path):
    a = ExperimentConfig.loads("seed: 3\nsystem:\n  mu: 0.01\n  a0: 5.0\n")
    b = ExperimentConfig.loads("system:\n  a0: 5.0\n  mu: 0.01\nseed: 3\n")
    assert config_hash(a) == config_hash(b)
    c = ExperimentConfig.loads("seed: 3\nsystem:\n  mu: 0.02\n  a0: 5.0\n")
    assert config_hash(a) != config_hash(c)
    assert len(config_hash(a)) == 64


def test_config_save_load(tmp_path):
    cfg = ExperimentConfig.loads("system:\n  mu: 0.05\nloop:\n  omega: 1.3\n")
    p = tmp_path / "saved.yaml"
    cfg.save(p)
    assert ExperimentConfig.load(p).to_dict() == cfg.to_dict()


# ---------------------------------------------------------------------------
# melnikov subcommand


def test_melnikov_run_writes_outputs_and_manifest(tmp_path, capsys):
    path, out = _write_config(tmp_path)
    rc = cli.main(["melnikov", "-c", str(path)])
    assert rc == 0
    field_csv = out / "melnikov_field_omega1.csv"
    cert_yaml = out / "condition1_omega1.yaml"
    manifest = out / "manifest_melnikov.yaml"
    assert field_csv.exists() and cert_yaml.exists() and manifest.exists()
    assert "gap" in capsys.readouterr().out

    man = read_record(manifest)
    assert man["record"] == "manifest"
    assert man["command"] == "melnikov"
    assert man["config_hash"] == config_hash(ExperimentConfig.load(path))
    assert set(man["written"]) == {field_csv.name, cert_yaml.name}
    assert man["versions"]["numpy"] == np.__version__

    cert = read_record(cert_yaml)
    assert cert["record"] == "condition1_certificate"
    assert cert["gap"] > 0.0
    assert cert["min_value"] == pytest.approx(-5.4605556026468625, abs=1e-5)


def test_melnikov_csv_is_lossless(tmp_path):
    from driftlab.melnikov import melnikov_field
    from driftlab.model import PerturbationSpec

    path, out = _write_config(tmp_path)
    assert cli.main(["melnikov", "-c", str(path)]) == 0
    cols = read_csv_columns(out / "melnikov_field_omega1.csv")
    assert list(cols) == ["T0", "Q0", "value"]
    field = melnikov_field(1.0, 17, 17, PerturbationSpec.preset("arnold"))
    assert np.array_equal(cols["value"], field.values.ravel())


def test_runs_are_deterministic(tmp_path):
    path, out = _write_config(tmp_path)
    assert cli.main(["melnikov", "-c", str(path), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["melnikov", "-c", str(path), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "melnikov_field_omega1.csv").read_bytes()
    b = (tmp_path / "b" / "melnikov_field_omega1.csv").read_bytes()
    assert a == b


def test_figure_rendering(tmp_path):
    text = BASE.replace("figures: false", "figures: true").replace("grid_n: 17", "grid_n: 9")
    path, out = _write_config(tmp_path, text)
    assert cli.main(["melnikov", "-c", str(path)]) == 0
    png = out / "melnikov_field_omega1.png"
    assert png.exists() and png.stat().st_size > 1000
    man = read_record(out / "manifest_melnikov.yaml")
    assert png.name in man["written"]


# ---------------------------------------------------------------------------
# failure exit codes


def test_missing_config_file_exits_2(tmp_path, capsys):
    rc = cli.main(["melnikov", "-c", str(tmp_path / "nope.yaml")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path, capsys):
    path, _ = _write_config(tmp_path, BASE + "  gridn: 3\n")
    rc = cli.main(["melnikov", "-c", str(path)])
    assert rc == 2
    assert "gridn" in capsys.readouterr().err


def test_missing_stage_section_exits_2(tmp_path, capsys):
    path, _ = _write_config(tmp_path, "output_dir: {out}\nfigures: false\n")
    rc = cli.main(["loop", "-c", str(path)])
    assert rc == 2
    assert "loop" in capsys.readouterr().err


def test_zero_coupling_certification_exits_3(tmp_path, capsys):
    text = BASE.replace("perturbation: arnold", "perturbation: zero")
    path, out = _write_config(tmp_path, text)
    rc = cli.main(["melnikov", "-c", str(path)])
    assert rc == 3
    assert not (out / "manifest_melnikov.yaml").exists()


# ---------------------------------------------------------------------------
# loop subcommand


def test_loop_run_at_mu_zero(tmp_path, capsys):
    text = BASE + "loop:\n  omega: 1.3\n"
    path, out = _write_config(tmp_path, text)
    rc = cli.main(["loop", "-c", str(path)])
    assert rc == 0
    cols = read_csv_columns(out / "loop_curve.csv")
    assert list(cols) == ["t", "q", "Q"]
    assert cols["t"][-1] == 120.0  # mu = 0 falls back to the frozen window
    rec = read_record(out / "loop_record.yaml")
    assert rec["record"] == "loop"
    assert rec["action"] == rec["action_kinetic_geometric"]  # mu = 0
    assert rec["action"] == pytest.approx(0.5 * 1.3**2 * 120.0 + 8.0, abs=0.05)
    assert rec["grad_max"] <= 1e-7
    assert "loop solved" in capsys.readouterr().out


def test_version_flag():
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["--version"])
    assert excinfo.value.code == 0
