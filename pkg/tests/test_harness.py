import csv
import json
import math

import numpy as np
import pytest

from thinrod import geometry as g
from thinrod import harness as h
from thinrod.limit1d import solve_limit_spectrum

SMALL = h.ResolutionPolicy(n1=32, n_sec=4, n_cells=2000)


@pytest.fixture(scope="module")
def constant_mixed():
    return h.sweep(g.preset("constant"), "mixed", [0.4, 0.2, 0.1], k=3,
                   resolution_policy=h.ResolutionPolicy(n1=128, n_sec=4))


def test_separable_constant_section(constant_mixed):
    rep = constant_mixed
    exact = (np.arange(1, 4) * np.pi) ** 2
    assert np.all(np.abs(rep.lambda_eps - exact) / exact < 1e-2)
    spread = (rep.lambda_eps.max(axis=0) - rep.lambda_eps.min(axis=0)) / exact
    assert np.all(spread < 1e-3)
    assert not rep.failed
    assert np.all(rep.longitudinal_fraction > 0.99)


def test_lambda0_matches_fresh_limit_solve(constant_mixed):
    fresh = solve_limit_spectrum(g.preset("constant"), "mixed", 3, 10_000)
    assert np.array_equal(constant_mixed.lambda0, fresh.eigenvalues)


def test_mu_columns(constant_mixed):
    rep = constant_mixed
    np.testing.assert_allclose(rep.mu_eps * rep.lambda_eps, 1.0, rtol=0, atol=1e-14)
    assert np.all(rep.rel_error >= 0)


def test_mixed_lower_bound(constant_mixed):
    lam1 = constant_mixed.lambda_eps[:, 0]
    assert np.all(constant_mixed.lambda_eps > 0)
    assert lam1.min() > 9.0


def test_constant_neumann_zero_mode():
    rep = h.sweep(g.preset("constant"), "neumann", [0.4, 0.2, 0.1], k=2, resolution_policy=SMALL)
    assert np.all(np.abs(rep.lambda_eps[:, 0]) < 1e-8)
    np.testing.assert_allclose(rep.mu_eps * (rep.lambda_eps + 1), 1.0, rtol=0, atol=1e-14)


def test_cluster_detect_examples():
    assert h.cluster_detect([1.0, 2.0, 3.0]) == [[1], [2], [3]]
    assert h.cluster_detect([1.0, 1 + 1e-9, 3.0]) == [[1, 2], [3]]
    assert h.cluster_detect([0.0, 1e-12, 1.0]) == [[1, 2], [3]]
    assert h.cluster_detect([]) == []
    with pytest.raises(ValueError):
        h.cluster_detect([1.0], rel_tol=0)


def test_crossing_cluster_in_report():
    # unit square section: transverse (pi/eps)^2 meets longitudinal (2 pi)^2 at eps = 1/2;
    # with n1 = 2 n_sec the discrete values coincide too
    p = g.rect_heights(0.5, 0.5, 0.5, 0.5)
    rep = h.sweep(p, "neumann", [0.5], k=6, resolution_policy=h.ResolutionPolicy(16, 8, 2000))
    assert [3, 4, 5] in rep.clusters[0]
    notes = rep.annotations()
    assert {"epsilon": 0.5, "cluster": [3, 4, 5]} in notes
    assert any(n.get("transverse") for n in notes)
    lam = rep.lambda_eps[0, 2:5]
    assert np.ptp(lam) <= 1e-9 * lam[0]
    assert lam[0] == pytest.approx(4 * np.pi ** 2, rel=2e-2)


def test_empirical_rate():
    eps = [0.4, 0.2, 0.1, 0.05]
    assert h.empirical_rate([e ** 2 for e in eps], eps) == pytest.approx(2.0, abs=1e-10)
    assert h.empirical_rate([3.0] * 4, eps) == pytest.approx(0.0, abs=1e-12)
    assert h.empirical_rate([1.0, 0.0, 1.0, 1.0], eps) == math.inf
    assert h.empirical_rate([1.0], [0.1]) is None
    with pytest.raises(ValueError):
        h.empirical_rate([1.0, 2.0], [0.1])


def test_relative_error_zero_limit():
    np.testing.assert_allclose(h.relative_error([1e-9, 2.0], [0.0, 1.0]), [1e-9, 1.0])


@pytest.mark.parametrize("eps", [[0.2, 0.4], [1.5], [0.0], [0.3, 0.3], []])
def test_eps_validation(eps):
    with pytest.raises(ValueError):
        h.sweep(g.preset("constant"), "mixed", eps, k=1, resolution_policy=SMALL)


def test_k_validation():
    with pytest.raises(ValueError):
        h.sweep(g.preset("constant"), "mixed", [0.2], k=0, resolution_policy=SMALL)


def test_failed_column(monkeypatch):
    orig = h.RodProblem.solve

    def flaky(self, epsilon, k, **kw):
        if epsilon == 0.2:
            raise RuntimeError("boom")
        return orig(self, epsilon, k, **kw)

    monkeypatch.setattr(h.RodProblem, "solve", flaky)
    rep = h.sweep(g.preset("dome"), "mixed", [0.4, 0.2, 0.1], k=2, resolution_policy=SMALL)
    assert list(rep.failed) == [0.2]
    assert "boom" in rep.failed[0.2]
    assert np.all(np.isnan(rep.lambda_eps[1]))
    assert np.all(np.isfinite(rep.lambda_eps[[0, 2]]))
    assert all(r is not None for r in rep.rates())
    d = rep.to_dict()
    assert d["modes"][0]["lambda_eps"][1] is None
    assert d["failed"] == {"0.2": "RuntimeError: boom"}


def test_report_serialization(tmp_path):
    rep = h.sweep(g.preset("dome"), "neumann", [0.4, 0.2], k=3, resolution_policy=SMALL)
    rep.write_json(tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["schema_version"] == h.SCHEMA_VERSION
    assert d["eps"] == [0.4, 0.2] and d["k"] == 3 and "runtimes" in d
    assert [m["n"] for m in d["modes"]] == [1, 2, 3]
    assert all("rate" in m for m in d["modes"])
    assert d["modes"][1]["lambda_eps"][1] == rep.lambda_eps[1, 1]
    assert "runtimes" not in rep.to_dict(runtimes=False)
    rep.write_csv(tmp_path / "r.csv")
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert len(rows) == 6
    assert float(rows[4]["lambda_eps"]) == rep.lambda_eps[0, 2]
    assert float(rows[4]["rel_error"]) == rep.rel_error[0, 2]


def test_single_eps_has_no_rate():
    rep = h.sweep(g.preset("dome"), "mixed", [0.2], k=2, resolution_policy=SMALL)
    assert rep.rates() is None
    assert all("rate" not in m for m in rep.to_dict()["modes"])
    assert np.all(np.isfinite(rep.lambda_eps))


def test_dome_rates_positive():
    rep = h.sweep(g.preset("dome"), "mixed", [0.4, 0.2, 0.1, 0.05], k=2, resolution_policy=SMALL)
    assert all(r > 0 for r in rep.rates())


def test_sweep_deterministic():
    a = h.sweep(g.preset("trumpet"), "mixed", [0.3, 0.1], k=2, resolution_policy=SMALL)
    b = h.sweep(g.preset("trumpet"), "mixed", [0.3, 0.1], k=2, resolution_policy=SMALL)
    assert np.array_equal(a.lambda_eps, b.lambda_eps)
    assert a.to_dict(runtimes=False) == b.to_dict(runtimes=False)


def test_refine_policy():
    assert h.ResolutionPolicy(n1=16, mode="refine").mesh_n1 == 32
    with pytest.raises(ValueError):
        h.ResolutionPolicy(mode="adaptive")


@pytest.mark.parametrize("name", ["constant", "two_cuboids"])
def test_c1_exact_presets(name):
    t = h.verify_C1(g.preset(name), ((16, 4), (32, 4)))
    assert t.passed, t.failures
    assert max(r["discrepancy"] for r in t.rows) <= 1e-12


def test_c1_unit_square_sine_and_cuboid_linear():
    sq = g.rect_heights(0.5, 0.5, 0.5, 0.5)
    t = h.verify_C1(sq, ((64, 2),), {"sin": lambda y: np.sin(np.pi * y)})
    assert t.rows[0]["discrepancy"] <= 1e-12
    t = h.verify_C1(g.preset("two_cuboids"), ((16, 4),), {"y1": lambda y: y})
    assert t.rows[0]["discrepancy"] <= 1e-12


@pytest.mark.parametrize("name", g.PRESETS)
def test_c1_constant_function_consistent(name):
    t = h.verify_C1(g.preset(name), ((16, 4), (32, 4)), {"1": lambda y: np.ones_like(y)})
    for row in t.rows:
        assert row["consistent"] <= 1e-12
        assert row["norm_R"] == pytest.approx(row["norm_w"], rel=1e-3)


def test_c1_coarse_tolerance_and_failure():
    p = g.preset("dome")
    assert h.verify_C1(p, ((8, 4), (16, 4)), tol=1e-2).passed
    t = h.verify_C1(p, ((8, 4), (16, 4)))
    assert not t.passed
    assert any("n1=16" in f for f in t.failures)


def test_c1_empty_family():
    with pytest.raises(ValueError):
        h.verify_C1(g.preset("dome"), test_functions={})


def test_c3_constant_flat():
    p = g.rect_heights(0.5, 0.5, 0.5, 0.5)
    t = h.verify_C3(p, "mixed", resolution_policy=h.ResolutionPolicy(32, 4))
    assert t.passed
    d = [r["distance"] for r in t.rows]
    assert max(d) <= 1e-12


def test_c3_zero_data():
    t = h.verify_C3(g.preset("dome"), "neumann", f=lambda y: np.zeros_like(y),
                    resolution_policy=SMALL)
    assert all(r["distance"] == 0.0 for r in t.rows)
    assert t.passed


def test_c3_dome_coarse_decreases():
    for bc in ("mixed", "neumann"):
        t = h.verify_C3(g.preset("dome"), bc, resolution_policy=SMALL)
        assert t.passed, t.failures
        assert t.name == f"C3-{bc}"


def test_table_csv(tmp_path):
    t = h.verify_C3(g.preset("dome"), "mixed", [0.4, 0.2], resolution_policy=SMALL)
    t.write_csv(tmp_path / "c3.csv")
    rows = list(csv.DictReader(open(tmp_path / "c3.csv")))
    assert [float(r["epsilon"]) for r in rows] == [0.4, 0.2]
    assert float(rows[1]["distance"]) == t.rows[1]["distance"]
    assert t.to_dict()["passed"] is True


def test_stationary_neumann_constant_data():
    prob = h.RodProblem(g.preset("trumpet"), "neumann", 8, 4)
    from thinrod.reduction import Field3D
    u = prob.stationary(0.2, Field3D(np.ones(prob.mesh.n_nodes), prob.mesh))
    np.testing.assert_allclose(u.values, 1.0, rtol=1e-10)


def test_exact_geometry():
    assert h.exact_geometry(g.preset("constant"))
    assert h.exact_geometry(g.preset("two_cuboids"))
    assert h.exact_geometry(g.rect_heights(0.5, 0.5, 0.5, [{"poly": [0.5, 0.2]}]))
    assert not h.exact_geometry(g.preset("dome"))
    assert not h.exact_geometry(g.preset("trumpet"))
