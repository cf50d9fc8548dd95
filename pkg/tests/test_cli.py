import json

import numpy as np
import pytest

from fracsource.cli import EXPERIMENTS, ExperimentConfig, load_config, main
from fracsource.errors import ConfigError

SMOOTH_F = {"terms": [{"time": {"kind": "exp", "rate": 1.0},
                       "space": {"kind": "bump", "p": 3, "m": 4, "orthogonalize": True}}]}


def write_config(tmp_path, body, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(body))
    return path


def run_cli(tmp_path, experiment, body, out="out", capsys=None):
    cfg = write_config(tmp_path, body)
    code = main([experiment, "--config", str(cfg), "--out", str(tmp_path / out)])
    summary = None
    if capsys is not None and code == 0:
        summary = json.loads(capsys.readouterr().out)
    return code, summary


def read(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def test_eigen_zero_eigenvalue(tmp_path, capsys):
    body = {"experiment": "eigen", "problem": {"a": 1.0, "b": -1.0, "d": 1.0}, "eigen": {"count": 6}}
    code, summary = run_cli(tmp_path, "eigen", body, capsys=capsys)
    assert code == 0 and summary["mu0"] == 0.0 and summary["kind0"] == "linear"
    table = read(tmp_path / "out" / "eigen.csv")
    assert table.shape == (7, 6) and table[0, 1] == 0.0  # modes 0..count
    assert (tmp_path / "out" / "eigen.csv").read_text().splitlines()[0] == "n,mu,s,X1,int01,norm_sq"


def test_mlf_table(tmp_path):
    body = {"experiment": "mlf", "mlf": {"q": 1.0, "beta": 1.0, "z_min": -5, "z_max": 5, "n": 11}}
    assert run_cli(tmp_path, "mlf", body)[0] == 0
    z, v = read(tmp_path / "out" / "mlf.csv").T
    assert np.allclose(v, np.exp(z), rtol=1e-14)


def test_roundtrip_case_a(tmp_path, capsys):
    body = {"experiment": "roundtrip", "case": "A", "problem": {"Nt": 512, "n_modes": 64}}
    code, summary = run_cli(tmp_path, "roundtrip", body, capsys=capsys)
    assert code == 0
    assert summary["max_rel_error"] <= 1e-2
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    for key in ("residual", "kernel_bound_C", "constants", "assumption_report", "runtime_ms"):
        assert key in report
    assert set(report["constants"]) == {"N0", "N1", "N2", "N3", "N4", "N5", "M1", "M2", "M3", "M4"}


def test_invert_homogeneous_energy(tmp_path, capsys):
    body = {"experiment": "invert", "problem": {"Nt": 64, "n_modes": 16},
            "functions": {"f": SMOOTH_F, "phi": {"kind": "bump", "p": 3, "m": 4, "orthogonalize": True},
                          "E": {"kind": "homogeneous"}}}
    code, summary = run_cli(tmp_path, "invert", body, capsys=capsys)
    assert code == 0 and summary["max_abs_r"] < 1e-12
    assert read(tmp_path / "out" / "r.csv").shape == (65, 2)
    assert read(tmp_path / "out" / "u.csv").shape[1] == 3
    assert "assumption_report" in json.loads((tmp_path / "out" / "diagnostics.json").read_text())


def test_direct_and_fd_with_tabulated_r(tmp_path, capsys):
    t = np.linspace(0, 1, 11)
    np.savetxt(tmp_path / "r.csv", np.c_[t, 1 + t**2], delimiter=",", header="t,r", comments="")
    body = {"experiment": "direct", "problem": {"Nt": 64, "n_modes": 32},
            "functions": {"f": SMOOTH_F, "r": {"kind": "table", "path": "r.csv"}},
            "fd": {"Nx": 100}}
    code, direct = run_cli(tmp_path, "direct", body, out="d", capsys=capsys)
    assert code == 0
    code, fd = run_cli(tmp_path, "fd-direct", body, out="f", capsys=capsys)
    assert code == 0
    Ed = read(tmp_path / "d" / "energy.csv")
    Ef = read(tmp_path / "f" / "energy.csv")
    assert np.array_equal(Ed[:, 0], Ef[:, 0])
    assert np.abs(Ed[:, 1] - Ef[:, 1]).max() < 1e-3


def test_stability(tmp_path, capsys):
    body = {"experiment": "stability", "problem": {"Nt": 64, "n_modes": 16},
            "functions": {"f": SMOOTH_F, "r": {"kind": "poly", "coeffs": [1, 0, 1]}},
            "noise": {"amplitudes": [1e-3, 1e-2], "k": 2}}
    code, summary = run_cli(tmp_path, "stability", body, capsys=capsys)
    assert code == 0 and summary["ratio_spread"] < 1.01
    rep = json.loads((tmp_path / "out" / "stability.json").read_text())
    assert len(rep["perturbations"]) == 2


def test_byte_identical_outputs(tmp_path):
    body = {"experiment": "stability", "problem": {"Nt": 32, "n_modes": 8},
            "functions": {"f": SMOOTH_F, "r": {"kind": "poly", "coeffs": [1, 0, 1]}},
            "noise": {"kind": "random", "amplitudes": [1e-4], "seed": 3}}
    run_cli(tmp_path, "stability", body, out="a")
    run_cli(tmp_path, "stability", body, out="b")
    assert (tmp_path / "a" / "stability.csv").read_bytes() == (tmp_path / "b" / "stability.csv").read_bytes()


def test_config_round_trip(tmp_path):
    body = {"experiment": "roundtrip", "case": "A", "problem": {"Nt": 128}, "noise": {"k": 3}}
    cfg = load_config(write_config(tmp_path, body))
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert again.to_dict() == cfg.to_dict()


@pytest.mark.parametrize("body,field", [
    ({"experiment": "eigen", "problem": {"a": 1.0, "d": -1.0}}, "a*d"),
    ({"experiment": "eigen", "problem": {"q": 1.5}}, "q"),
    ({"experiment": "eigen", "colour": 1}, "colour"),
    ({"experiment": "eigen", "problem": {"Nx": 3}}, "Nx"),
    ({"experiment": "direct", "functions": {"r": {"kind": "table", "path": "missing.csv"}}}, "missing.csv"),
    ({"experiment": "direct", "case": "Z"}, "case"),
])
def test_config_errors(tmp_path, body, field):
    with pytest.raises(ConfigError, match=field.replace("*", r"\*")):
        load_config(write_config(tmp_path, body))


def test_exit_codes(tmp_path, capsys):
    assert run_cli(tmp_path, "eigen", {"experiment": "eigen", "problem": {"a": 0.0}})[0] == 2
    assert main(["eigen", "--config", str(tmp_path / "nope.json")]) == 2
    body = {"experiment": "invert", "problem": {"Nt": 16, "n_modes": 16},
            "functions": {"f": SMOOTH_F, "E": {"kind": "homogeneous"},
                          "phi": {"kind": "bump", "p": 3, "m": 4, "orthogonalize": True}},
            "tolerances": {"denom_min": 1e3}}
    assert run_cli(tmp_path, "invert", body)[0] == 1
    assert "DenominatorTooSmall" in capsys.readouterr().err


def test_subcommand_overrides_file(tmp_path):
    cfg = load_config(write_config(tmp_path, {"experiment": "eigen"}), "mlf")
    assert cfg.experiment == "mlf" and set(EXPERIMENTS) >= {cfg.experiment}
