import numpy as np
import pytest

from conftest import rel_err
from luremor import (HeatflowSpec, build_heatflow, classify_modes, closed_form_transfer,
                     eval_transfer, loop_transform, reproduce_paper)
from luremor.errors import PoleHit
from luremor.heatflow import _zw_bound

REFERENCE_EPS = {3: 3.27e-3, 4: 2.55e-4, 5: 2.28e-5}


@pytest.fixture(scope="module")
def report():
    return reproduce_paper(orders=(3, 4, 5), simulate_orders=())


def test_two_node_matrices():
    spec = HeatflowSpec(n=2)
    assert spec.h == pytest.approx(1 / 3)
    model = build_heatflow(spec)
    np.testing.assert_allclose(model.linear.A, 9 * np.array([[-1.0, 1.0], [1.0, -1.0]]))
    np.testing.assert_allclose(model.linear.B, 3 * np.array([[1.0, 1.0], [0.0, 0.0]]))
    np.testing.assert_array_equal(model.Cy, [0.0, 1.0])
    np.testing.assert_array_equal(model.Cz, [0.0, 1.0])
    assert model.phi.kind == "scaled_tanh" and model.phi.sector == (0.0, 20.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        HeatflowSpec(n=1)
    with pytest.raises(ValueError):
        HeatflowSpec(kappa=0.0)


def test_eigenvalues_match_formula():
    spec = HeatflowSpec()
    A = build_heatflow(spec).linear.A
    np.testing.assert_array_equal(A, A.T)
    ev = np.sort(np.linalg.eigvalsh(A))[::-1]
    lam = spec.eigenvalues()
    assert lam[0] == 0.0 and abs(ev[0]) < 1e-9
    np.testing.assert_allclose(-ev[1:], lam[1:], rtol=1e-6)


def test_closed_form_small():
    spec = HeatflowSpec(n=2)
    G = eval_transfer(build_heatflow(spec).linear, 1.0)
    np.testing.assert_allclose(G, np.full((2, 2), closed_form_transfer(spec, 1.0)), rtol=1e-10)


def test_closed_form_pole():
    spec = HeatflowSpec()
    with pytest.raises(PoleHit):
        closed_form_transfer(spec, -spec.eigenvalues()[1])


def test_closed_form_large():
    spec = HeatflowSpec()
    s = 12 + 10j
    G = eval_transfer(build_heatflow(spec).linear, s)
    assert rel_err(G, np.full((2, 2), closed_form_transfer(spec, s))) <= 1e-6


@pytest.mark.parametrize("n", [2, 5, 29])
def test_closed_form_grid(n):
    spec = HeatflowSpec(n=n)
    lin = build_heatflow(spec).linear
    for w in np.geomspace(1e-2, 1e4, 100):
        s = -12 + 1j * w
        g = closed_form_transfer(spec, s)
        assert rel_err(eval_transfer(lin, s), np.full((2, 2), g)) <= 1e-6


def test_loop_transformed_dominance():
    h = loop_transform(build_heatflow(HeatflowSpec()), 10.0)
    modes = classify_modes(h.linear, 12.0)
    assert modes.p_dominant == 2 and modes.boundary_count == 0


def test_reference_error_bounds(report):
    for row in report.orders:
        assert row["epsilon"] == pytest.approx(REFERENCE_EPS[row["order"]], rel=0.02)
    eps = report.epsilons
    assert eps[0] > eps[1] > eps[2]


def test_epsilon_convention():
    """Only the open-loop zw channel reproduces the reference bounds; the
    2x2 block doubles them and the loop transformation shifts them by more
    than the 2% tolerance."""
    model = build_heatflow(HeatflowSpec())
    h = loop_transform(model, 10.0)
    for nu, ref in REFERENCE_EPS.items():
        assert _zw_bound(model.linear, 12.0, nu) == pytest.approx(ref, rel=0.02)
        assert abs(_zw_bound(h.linear, 12.0, nu) / ref - 1) > 0.02


def test_report_contents(report):
    assert report.dominant_loop_transformed == 2 == report.dominant_open_loop
    assert report.hzw_norm < 0.1 and report.hzw_p == 2
    assert report.circle["pass"] and report.circle["p_claimed"] == 2
    for row in report.orders:
        assert row["error_p"] == 0
        assert row["reduced_zw_norm"] < 0.1 - row["epsilon"]
        assert row["theorem1"]["conclusion"] and row["corollary1"]["conclusion"]
        assert row["small_gain"]["holds"]
    d = report.to_dict()
    assert set(d["spec"]) == {"n", "kappa", "kp", "h"}


def test_full_order_is_exact():
    rep = reproduce_paper(orders=[29])
    row = rep.orders[0]
    assert row["epsilon"] == 0.0 and row["epsilon_conventions"]["loop_transformed_mimo"] == 0.0
    assert row["error_norm"] < 1e-10
    assert rep.simulation == {}


def test_artifacts(tmp_path):
    rep = reproduce_paper(orders=[5], t_end=1.0, out_dir=tmp_path)
    names = sorted(p.split("/")[-1] for p in rep.artifacts)
    assert names == ["bode_hzw.csv", "bode_hzw_hat_nu5.csv", "nyquist_hzw.csv",
                     "trajectory_full.csv", "trajectory_nu5.csv"]
    head = (tmp_path / "nyquist_hzw.csv").read_text().splitlines()[0]
    assert head == "omega,re,im"
