import json

import numpy as np
import pytest

from qsym.cli import main, run_command
from qsym.modelfile import serialize_model
from qsym.builtin import make_cycle4

GOOD = """space 2
experiment a
  outcomes 2
  theta 0 1
  row 0: 0.7 0.3
  row 1: 0.2 0.8
end
"""


@pytest.fixture
def model(tmp_path):
    def write(text, name="m.qsm"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def test_validate_file_and_builtin(model):
    code, rep = run_command(["validate", model(GOOD)])
    assert code == 0 and rep["valid"]
    assert run_command(["validate", "example1"])[0] == 0


def test_validate_semantic_error(model):
    code, rep = run_command(["validate", model(GOOD.replace("0.2 0.8", "0.2 0.9"))])
    assert code == 1 and rep["diagnostics"][0]["line"] == 6


def test_validate_parse_error(model):
    code, rep = run_command(["validate", model(GOOD.replace("0.7 0.3", "0.7 x"))])
    assert code == 3 and rep["diagnostics"][0]["line"] == 5


def test_missing_file():
    assert run_command(["validate", "/nonexistent/model.qsm"])[0] == 3


def test_usage_error_exits_1():
    with pytest.raises(SystemExit) as err:
        run_command(["lattice"])
    assert err.value.code == 1


def test_permissible():
    assert run_command(["permissible", "cycle4"])[0] == 0
    code, rep = run_command(["permissible", "envelope"])
    assert code == 2 and rep["experiments"][0]["witness"] is not None


def test_lattice_checks():
    code, rep = run_command(["lattice", "example1", "--check", "distributive"])
    assert code == 2 and rep["witness"]["law"] == "meet over join"
    code, rep = run_command(["lattice", "cycle4", "--check", "orthomodular"])
    assert code == 0
    assert run_command(["lattice", "cycle4", "--check", "atoms"])[0] == 0
    assert run_command(["lattice", "example1", "--check", "assumption1"])[0] == 2


def test_rep_correspondence():
    code, rep = run_command(["rep", "cycle4", "--correspondence"])
    assert code == 0 and rep["correspondence"]["bijective"]
    assert rep["correspondence"]["permissible"] == 3


def test_fit(tmp_path):
    code, rep = run_command(["fit", "envelope", "--gamma", "0.3", "--dim", "2"])
    assert code == 0 and rep["residual"] < 1e-12
    assert np.allclose(rep["rho"], np.eye(2) / 2)
    assert run_command(["fit", "envelope", "--dim", "3"])[0] == 1
    fam = tmp_path / "fam.json"
    fam.write_text(json.dumps({"frames": [np.eye(3).tolist(), np.eye(3)[:, :2].tolist()]}))
    code, rep = run_command(["fit", "example1", "--phi", "0", "--family", str(fam)])
    # the file holds the standard frames, so the result matches the default family
    _, default = run_command(["fit", "example1", "--phi", "0"])
    assert code == 0 and rep["residual"] == pytest.approx(default["residual"], abs=1e-12)


def test_estimate(tmp_path):
    code, rep = run_command(["estimate", "bsc", "--experiment", "channel", "--outcome", "0"])
    assert code == 0 and np.allclose(rep["posterior"], [0.8, 0.2])
    emb = tmp_path / "emb.txt"
    emb.write_text("1\n-1\n")
    code, rep = run_command(["estimate", "bsc", "--experiment", "channel", "--outcome", "0",
                             "--embed", str(emb)])
    assert np.allclose(rep["estimate"], [0.6])
    assert run_command(["estimate", "bsc", "--experiment", "nope", "--outcome", "0"])[0] == 1


def test_evolve(model):
    path = model(serialize_model(make_cycle4()))
    code, rep = run_command(["evolve", path, "--step", "1,2,3,0", "--t", "0.5"])
    assert code == 0 and rep["log_residual"] < 1e-12
    assert np.allclose(rep["eigenphases"], [-np.pi / 2, 0, np.pi / 2, np.pi])
    assert run_command(["evolve", path, "--step", "1,1,3,0", "--t", "1"])[0] == 1


def test_examples():
    assert run_command(["example", "example1"])[0] == 2
    code, rep = run_command(["example", "envelope", "--gamma", "1"])
    assert code == 0 and rep["S"] == pytest.approx(-2.0)
    code, rep = run_command(["example", "s3"])
    assert code == 0 and rep["is_s3"]


def test_json_output(capsys):
    code = main(["--format", "json", "example", "envelope", "--gamma", "0.5"])
    data = json.loads(capsys.readouterr().out)
    assert code == 0 and data["S"] == pytest.approx(-1.0)
    main(["validate", "cycle4", "--format", "json"])
    assert json.loads(capsys.readouterr().out)["group_order"] == 4


def test_text_output(capsys):
    assert main(["validate", "example1"]) == 0
    assert "valid" in capsys.readouterr().out


def test_example_qsm_round_trip(capsys, model):
    main(["example", "envelope", "--qsm"])
    path = model(capsys.readouterr().out)
    assert run_command(["validate", path])[0] == 0
