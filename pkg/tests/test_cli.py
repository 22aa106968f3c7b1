import json
import subprocess
import sys

import numpy as np
import pytest

from luremor import (HeatflowSpec, LureModel, StateSpace, build_heatflow, hinf_p_norm,
                     loop_transform)
from luremor.cli import dump_model, dumps, load_model, main
from luremor.errors import DimensionMismatch, ParseError, UnknownNonlinearityKind


def write(path, doc):
    path.write_text(json.dumps(doc))
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def heat_file(tmp_path):
    path = tmp_path / "heat.json"
    dump_model(build_heatflow(HeatflowSpec()), path)
    return path


def test_one_state_model(tmp_path):
    model = load_model(write(tmp_path / "m.json", {"A": [[-1]], "B": [[1]], "C": [[2]]}))
    assert isinstance(model, StateSpace) and model.n == 1


def test_wrong_b_rows_names_field(tmp_path):
    path = write(tmp_path / "m.json", {"A": [[-1, 0], [0, -2]], "B": [[1]], "C": [[1, 1]]})
    with pytest.raises(DimensionMismatch, match="'B'"):
        load_model(path)


def test_parse_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"A": [[-1]],\n "B": [[1]] "C": [[1]]}')
    with pytest.raises(ParseError, match="line 2"):
        load_model(bad)
    with pytest.raises(ParseError, match="'C'"):
        load_model(write(tmp_path / "c.json", {"A": [[-1]], "B": [[1]]}))
    with pytest.raises(ParseError):
        load_model(tmp_path / "missing.json")
    doc = {"A": [[-1]], "B": [[1, 0]], "C": [[1], [1]],
           "channels": {"u": 0, "w": 1, "y": 0, "z": 1}, "phi": {"kind": "cubic", "gain": 1}}
    with pytest.raises(UnknownNonlinearityKind):
        load_model(write(tmp_path / "k.json", doc))
    doc["phi"] = {"kind": "linear", "gain": 1}
    doc["channels"]["z"] = 4
    with pytest.raises(DimensionMismatch, match="'C'"):
        load_model(write(tmp_path / "z.json", doc))


def test_channel_permutation(tmp_path):
    doc = {"A": [[-1]], "B": [[5, 7]], "C": [[2], [3]],
           "channels": {"u": 1, "w": 0, "y": 1, "z": 0},
           "phi": {"kind": "shifted", "gain": 4, "offset": 2}}
    model = load_model(write(tmp_path / "m.json", doc))
    assert isinstance(model, LureModel)
    np.testing.assert_array_equal(model.linear.B, [[7, 5]])
    np.testing.assert_array_equal(model.linear.C, [[3], [2]])
    assert model.phi.sector == (-2.0, 2.0)


def test_heatflow_model_round_trip(tmp_path, capsys):
    path = tmp_path / "heat.json"
    code, out, _ = run(capsys, "heatflow", "--orders", "5", "--no-simulate",
                       "--emit-model", path)
    assert code == 0
    model = load_model(path)
    ref = build_heatflow(HeatflowSpec())
    for a, b in [(model.linear.A, ref.linear.A), (model.linear.B, ref.linear.B),
                 (model.linear.C, ref.linear.C)]:
        np.testing.assert_array_equal(a, b)
    assert model.phi == ref.phi


def test_dumps_format():
    text = dumps({"x": 0.1, "v": [1.0, 2.5e-20], "b": True, "nan": float("nan")})
    doc = json.loads(text)
    assert doc["x"] == 0.1 and doc["b"] is True and doc["nan"] is None
    assert "0.10000000000000001" in text


def test_heatflow_report(capsys, tmp_path):
    code, out, err = run(capsys, "heatflow", "--n", 29, "--kappa", 1, "--kp", 20,
                         "--orders", "3,4,5", "--rate", 12, "--no-simulate")
    assert code == 0
    rep = json.loads(out)
    for got, ref in zip(rep["epsilons"], [3.27e-3, 2.55e-4, 2.28e-5]):
        assert got == pytest.approx(ref, rel=0.02)
    assert "pipeline" in err


def test_report_is_deterministic(capsys, tmp_path):
    outs = []
    for _ in range(2):
        code, out, _ = run(capsys, "heatflow", "--orders", "4", "--no-simulate")
        outs.append(out)
    assert outs[0] == outs[1]


def test_reduce_below_degree_fails(capsys, heat_file):
    code, out, err = run(capsys, "reduce", heat_file, "--rate", 12, "--order", 1)
    assert code == 1 and "OrderTooSmall" in err and out == ""


def test_reduce_writes_model(capsys, heat_file, tmp_path):
    target = tmp_path / "red.json"
    code, out, _ = run(capsys, "reduce", heat_file, "--rate", 12, "--order", 5,
                       "--output", target)
    assert code == 0
    rep = json.loads(out)
    assert rep["order"] == 5 and rep["p"] == 2
    red = load_model(target)
    assert isinstance(red, LureModel) and red.n == 5


def test_analyze_matches_library(capsys, tmp_path):
    model = build_heatflow(HeatflowSpec())
    path = tmp_path / "h.json"
    dump_model(loop_transform(model, 10.0), path)
    code, out, _ = run(capsys, "analyze", path, "--rate", 12, "--out", tmp_path / "o")
    rep = json.loads(out)
    ref = hinf_p_norm(load_model(path).zw, 12.0)
    assert rep["norm"] == ref.gamma and rep["p"] == ref.p == 2
    assert code == 0 and rep["circle"]["pass"] and rep["circle"]["sector"] == [-10, 10]
    assert (tmp_path / "o" / "nyquist.csv").exists()


def test_analyze_fail_exit_code(capsys, tmp_path):
    path = write(tmp_path / "s.json", {"A": [[-1]], "B": [[1]], "C": [[1]]})
    code, out, _ = run(capsys, "analyze", path, "--rate", 0, "--sector", -2, 2)
    assert code == 2 and json.loads(out)["circle"]["pass"] is False
    code, out, _ = run(capsys, "analyze", path, "--rate", 0, "--sector", -0.5, 0.5)
    assert code == 0


def test_certify(capsys, heat_file):
    code, out, _ = run(capsys, "certify", heat_file, "--rate", 12)
    rep = json.loads(out)
    assert code == 0 and rep["inertia"] == [2, 0, 27]


def test_simulate_with_env_out_dir(capsys, heat_file, tmp_path, monkeypatch):
    monkeypatch.setenv("LUREMOR_OUT_DIR", str(tmp_path / "env"))
    code, out, _ = run(capsys, "simulate", heat_file, "--tend", 5, "--dt", 1e-4,
                       "--x0", "e1:1e-3")
    rep = json.loads(out)
    assert code == 0 and rep["limit_cycle"]["periodic"]
    assert (tmp_path / "env" / "trajectory.csv").exists()


def test_simulate_bad_x0(capsys, heat_file):
    code, _, err = run(capsys, "simulate", heat_file, "--x0", "1,2,3")
    assert code == 1 and "DimensionMismatch" in err


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code != 0


def test_console_entry_point(heat_file):
    proc = subprocess.run([sys.executable, "-m", "luremor.cli", "certify", str(heat_file),
                           "--rate", "12"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["pass"] is True
