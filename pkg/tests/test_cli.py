import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ksopde.cli import ModelError, load_model, run
from ksopde.expr import Dims
from ksopde.sections import GridMap, heat_solution, read_csv, write_csv

MODELS = Path(__file__).parent / "models"


def model(name):
    return str(MODELS / f"{name}.model")


def test_load_model_substitutes_constants():
    m = load_model("n = 1\nk = 1\nconst c = 2\nconst cc = 5\nxi[1][1][1] = -c*v1_1^2 + cc  # comment\n")
    assert m.dims == Dims(1, 1)
    assert m.sopde is not None and m.connection is None and m.lagrangian is None
    assert float(m.sopde.evaluate(np.array([0.0, 3.0]))[0, 0, 0]) == -18.0 + 5.0


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("k = 1\n", "must set n"),
        ("n = x\nk = 1\n", "integer"),
        ("n = 1\nk = 1\nxi[2][1][1] = 0\n", "outside dims"),
        ("n = 1\nk = 1\nfoo = 1\n", "unknown key"),
        ("n = 1\nk = 1\nL = q2\n", "line 3"),
        ("n = 1\nk = 1\nL\n", "name = value"),
        ("n = 0\nk = 1\n", "n >= 1"),
    ],
)
def test_load_model_errors(text, fragment):
    with pytest.raises(ModelError) as info:
        load_model(text)
    assert fragment in str(info.value)


def test_check_heat_passes():
    code, out, err = run(["check", model("heat")])
    assert code == 0, out + err
    assert "check integrability_symmetry: PASS" in out
    assert "status: PASS" in out and out.endswith("exit: 0\n")
    assert out.splitlines()[1:3] == ["seed: 0", "probes: 32"]


def test_check_asymmetric_fails():
    code, out, _ = run(["check", model("asymmetric")])
    assert code == 1
    assert "check integrability_symmetry: FAIL" in out


def test_check_connection_model():
    code, out, _ = run(["check", model("curved"), "--probes", "5"])
    assert code == 0
    assert "check connection.gamma_round_trip: PASS" in out


def test_malformed_expression_reports_position():
    code, out, err = run(["check", model("malformed")])
    assert code == 2
    assert out == ""
    assert "line 3, column 16" in err


def test_missing_model_file():
    code, _, err = run(["check", model("does-not-exist")])
    assert code == 2 and "cannot read model" in err


def test_check_needs_sopde_or_connection():
    code, _, err = run(["check", model("wave")])
    assert code == 2 and "xi[...]" in err


def test_reports_are_deterministic():
    first = run(["check", model("heat"), "--seed", "7", "--probes", "9"])
    second = run(["check", model("heat"), "--seed", "7", "--probes", "9"])
    assert first == second
    assert "seed: 7" in first[1]


def test_connection_command():
    code, out, _ = run(["connection", model("heat")])
    assert code == 0
    assert "N[1][1][1] = 0.6666666666666666 " in out
    assert "N[1][2][1] = 0 " in out
    _, out, _ = run(["connection", model("spray")])
    assert "N[1][1][1] = v1_1 " in out
    _, out, _ = run(["connection", model("zero")])
    assert "N[1][1][1] = 0 " in out and "N[1][2][1] = 0 " in out


def test_curvature_command():
    _, out, _ = run(["curvature", model("heat")])
    assert "max_abs_curvature: 0.000000e+00" in out and "vanishes: yes" in out
    _, out, _ = run(["curvature", model("curved")])
    assert "Omega[1][1][1][2] = 0.5" in out and "vanishes: no" in out


def test_el_command():
    code, out, _ = run(["el", model("wave"), "--point", "0.3, 1, 2, -1", "--symmetrize"])
    assert code == 0
    assert "hessian_abs_det: min=1.000000e+00 max=1.000000e+00" in out
    assert "check el_residual: PASS" in out
    code, out, _ = run(["el", model("free"), "--point", "1 2"])
    assert code == 0 and "xi[1][1][1] = 0" in out
    code, out, _ = run(["el", model("singular")])
    assert code == 1
    assert "min=0.000000e+00" in out and "singular" in out
    code, _, err = run(["el", model("wave"), "--point", "1 2"])
    assert code == 2 and "4 coordinates" in err


def _heat_csv(tmp_path, count=32):
    g = heat_solution().sample((0.0, 1.0, count), (0.0, 2 * np.pi, count))
    path = tmp_path / "heat.csv"
    write_csv(g, path)
    return str(path)


def test_verify_section_heat(tmp_path):
    code, out, _ = run(["verify-section", model("heat"), "--grid", _heat_csv(tmp_path)])
    assert code == 0, out
    assert "tolerance:" in out and "10 h^2" in out
    assert "worst (1,2):" in out


def test_verify_section_non_solution(tmp_path):
    g = GridMap.from_function(lambda t, x: t * x, ((0.0, 1.0, 32), (0.0, 2 * np.pi, 32)))
    path = tmp_path / "tx.csv"
    write_csv(g, path)
    code, out, _ = run(["verify-section", model("heat"), "--grid", str(path)])
    assert code == 1 and "check section_residual: FAIL" in out


def test_verify_section_zero_sopde(tmp_path):
    g = GridMap.from_function(lambda t, x: np.full(t.shape, 4.0), ((0.0, 1.0, 6), (0.0, 1.0, 6)))
    path = tmp_path / "const.csv"
    write_csv(g, path)
    code, out, _ = run(["verify-section", model("zero"), "--grid", str(path)])
    assert code == 0 and "max_residual=0.000000e+00" in out


def test_verify_section_plane_wave(tmp_path):
    K = (np.sqrt(2.0), -1.0, -1.0)
    g = GridMap.from_function(lambda a, b, c: np.sin(K[0] * a + K[1] * b + K[2] * c), ((0.0, 1.0, 24),) * 3)
    path = tmp_path / "wave.csv"
    write_csv(g, path)
    code, out, _ = run(["verify-section", model("plane_wave"), "--grid", str(path)])
    assert code == 0, out


def test_verify_section_schema_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t1,phi1\n0,0\n1,0\n")
    code, _, err = run(["verify-section", model("heat"), "--grid", str(path)])
    assert code == 2 and "R^1 -> R^1" in err
    code, _, err = run(["verify-section", model("heat")])
    assert code == 2 and "--grid" in err


def test_integrate_command(tmp_path):
    out_path = tmp_path / "curve.csv"
    code, out, _ = run(["integrate", model("oscillator"), "--point", "1 0", "--t-end", "1", "--steps", "50", "--out", str(out_path)])
    assert code == 0 and "wrote 51 nodes" in out
    g = read_csv(out_path, n=1, k=1)
    assert abs(g.values[-1, 0] - np.cos(1.0)) <= 1e-8
    code, out, _ = run(["integrate", model("oscillator"), "--point", "1 0", "--steps", "4"])
    assert code == 0 and out.startswith("t1,phi1\n")
    code, _, err = run(["integrate", model("heat")])
    assert code == 2 and "k = 1" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "ksopde", "curvature", model("heat")], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert "vanishes: yes" in proc.stdout
