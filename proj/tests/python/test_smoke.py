import numpy as np
import pytest

import gradflux


def test_version():
    assert gradflux.__version__ == "0.1.0"


def test_potentials():
    U = gradflux.Potential.power_plus_quadratic(4)
    assert U(2.0) == pytest.approx(20.0)
    assert gradflux.Potential.quadratic().derivative(1.5) == pytest.approx(3.0)


def test_gaussian_energy_matches_conductance():
    B = gradflux.LatticeGraph.box(2, 3)
    centre = B.vertex_at([2, 2])
    c = gradflux.effective_conductance(B, [], B.boundary, [centre])
    assert c == pytest.approx(4.0)
    eta = [0.0] * B.vertex_count
    eta[centre] = 1.0
    assert gradflux.d_eta_t(B, gradflux.Potential.quadratic(), eta, 2.0) == pytest.approx(4.0 * c)


def test_sampler_shapes_and_determinism():
    T = gradflux.LatticeGraph.torus(2, 2)
    U = gradflux.Potential.power(4)
    a = gradflux.sample(T, U, [1, 5], chains=2, samples=50, seed=4)
    b = gradflux.sample(T, U, [1, 5], chains=2, samples=50, seed=4, workers=2)
    assert a.shape == (2, 50, 2)
    assert np.array_equal(a, b)


def test_scan_settings_and_errors():
    t = gradflux.energy_bound_table({"graph.d": 3, "graph.L": 2, "potential.name": "power", "t_grid": "4,8"})
    assert t["columns"][0] == "t"
    assert len(t["rows"]) == 2
    with pytest.raises(gradflux.Error):
        gradflux.variance_scan({"graph.width": 3})


def test_small_suites():
    assert all(r["pass"] for r in gradflux.verify_isoperimetry())
    assert gradflux.connected_graph_count(5) == 21
    assert gradflux.dstar_exponent(3, 4, [4, 8])["value"][1] > 0


def test_convexity_gap_of_quadratic():
    assert gradflux.convexity_gap(gradflux.Potential.quadratic(), 0.7) == pytest.approx(0.49)
    assert gradflux.second_order_ratio(gradflux.Potential.quadratic(), 0.3) == pytest.approx(2.0)
