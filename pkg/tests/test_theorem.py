import numpy as np
import pytest

from pfgc.errors import ConfigError, UsageError
from pfgc.graph import AttributedGraph, homophily_ratio, normalize
from pfgc.spectral import EigenCache, SpectralBasis, filter_response
from pfgc.theorem import (
    SbmConfig,
    cluster_gap,
    edge_distance_totals,
    expected_edge_gap,
    filtered_signals,
    identity_gap,
    laplacian_basis,
    mc_cluster_gap,
    pair_responses,
    parse_sweep,
    random_unit_coefficients,
    sbm_generate,
    sweep_configs,
    theorem_verdict,
    verify_theorem,
    write_theorem_csv,
)


def test_sbm_extremes():
    g = sbm_generate(SbmConfig(20, 2, 1.0, 0.0))
    assert homophily_ratio(g) == 1.0 and g.n_edges == 2 * 45
    g = sbm_generate(SbmConfig(21, 3, 0.0, 1.0))
    assert homophily_ratio(g) == 0.0 and g.n_edges == 3 * 7 * 7
    with pytest.raises(ConfigError):
        SbmConfig(10, 3, 0.5, 0.5)
    with pytest.raises(ConfigError):
        SbmConfig(9, 3, 1.5, 0.5)


def test_sbm_expected_homophily():
    cfg = SbmConfig(120, 3, 0.3, 0.02, seed=0)
    assert cfg.expected_homophily() == pytest.approx(0.88, abs=0.005)
    rs = [homophily_ratio(sbm_generate(SbmConfig(120, 3, 0.3, 0.02, seed=s))) for s in range(5)]
    assert abs(np.mean(rs) - 0.88) <= 0.05


def test_from_homophily():
    cfg = SbmConfig.from_homophily(120, 3, 0.6, mean_degree=10)
    assert cfg.expected_homophily() == pytest.approx(0.6)
    assert cfg.p_in * 39 + cfg.p_out * 80 == pytest.approx(10)


def test_edge_gap_examples():
    b = SpectralBasis(np.eye(2), np.array([0.0, 1.0]), "p2")
    # h1 = (e^{-lam} - e^{-1}) / (1 - e^{-1}) = (1, 0); h2 = 1 - lam = (1, 0)
    assert expected_edge_gap(b, "h1_vs_h2") == pytest.approx(0.0, abs=1e-15)
    # h3 = (e^lam - 1)/(e - 1) = (0, 1); h4 = lam = (0, 1)
    assert expected_edge_gap(b, "h3_vs_h4") == pytest.approx(0.0, abs=1e-15)
    b3 = SpectralBasis(np.eye(3), np.array([0.0, 0.5, 1.0]), "p3")
    h1 = (np.exp(-0.5) - np.exp(-1)) / (1 - np.exp(-1))
    assert expected_edge_gap(b3, "h1_vs_h2") == pytest.approx(0.5 * (h1**2 - 0.25) / 3)
    deg = SpectralBasis(np.eye(2), np.zeros(2), "z")
    with pytest.warns(RuntimeWarning):
        assert expected_edge_gap(deg, "h1_vs_h2") == 0.0
    with pytest.raises(UsageError):
        expected_edge_gap(b, "h1_vs_h4")


def test_local_filters_use_measured_lambda_max():
    b = SpectralBasis(np.eye(3), np.array([0.0, 0.4, 1.2]), "m")
    ha, hb = pair_responses(b, "h1_vs_h2")
    np.testing.assert_allclose(hb, 1 - b.eigvals / 1.2)
    ha, hb = pair_responses(b, "h3_vs_h4")
    np.testing.assert_allclose(hb, b.eigvals / 1.2)


def test_h1_h2_edge_gap_nonpositive():
    for s in range(10):
        for r in (0.1, 0.5, 0.9):
            g = sbm_generate(SbmConfig.from_homophily(60, 3, r, seed=s))
            assert expected_edge_gap(laplacian_basis(g, EigenCache()), "h1_vs_h2") <= 1e-12


def test_quadratic_form_identity():
    g = sbm_generate(SbmConfig.from_homophily(60, 3, 0.7, seed=1))
    b = laplacian_basis(g, EigenCache())
    rng = np.random.default_rng(0)
    a = random_unit_coefficients(10, g.n_nodes, rng)
    for kind in ("h1", "h2", "h3", "h4"):
        h = filter_response(kind, b, b.lambda_max)
        x = filtered_signals(b, h, a)
        s_in, s_out = edge_distance_totals(g, x)
        expected = np.sum(a**2 * b.eigvals * h**2, axis=1)
        np.testing.assert_allclose(s_in + s_out, expected, atol=1e-8)
        # the same quadratic form through the Laplacian itself
        L = normalize(g.adjacency).laplacian
        np.testing.assert_allclose(s_in + s_out, np.einsum("ti,ij,tj->t", x, L, x), atol=1e-10)


def test_all_ones_response_conserves_energy():
    g = sbm_generate(SbmConfig.from_homophily(30, 3, 0.5, seed=2))
    b = laplacian_basis(g, EigenCache())
    a = random_unit_coefficients(5, 30, np.random.default_rng(1))
    x = filtered_signals(b, np.ones(30), a)
    np.testing.assert_allclose(np.sum(x**2, axis=1), 1.0, atol=1e-10)


def test_gap_scale_invariant():
    g = sbm_generate(SbmConfig.from_homophily(30, 3, 0.8, seed=3))
    b = laplacian_basis(g, EigenCache())
    m1 = mc_cluster_gap(g, b, "h1_vs_h2", 20, seed=4)
    # unit normalization makes the estimator blind to coefficient scale
    a = random_unit_coefficients(20, 30, np.random.default_rng(4))
    ha, hb = pair_responses(b, "h1_vs_h2")
    d = cluster_gap(g, filtered_signals(b, ha, 7 * a / 7)) - cluster_gap(g, filtered_signals(b, hb, a))
    assert d.mean() == pytest.approx(m1.mean, rel=1e-12)
    with pytest.raises(UsageError):
        mc_cluster_gap(g, b, "h1_vs_h2", 1)
    with pytest.raises(UsageError):
        edge_distance_totals(AttributedGraph(np.ones((2, 1)), np.zeros((2, 2))), np.ones(2))


def test_theorem_directions_and_identity():
    configs = sweep_configs(120, 3, [0.85, 0.1], seed=0)
    reps = verify_theorem(configs, n_trials=200, seed=0)
    by = {(round(r.r, 2) > 1 / 3, r.pair): r for r in reps}
    hi = by[(True, "h1_vs_h2")]
    lo = by[(False, "h3_vs_h4")]
    assert hi.mc_gap_mean > 2 * hi.mc_gap_stderr and hi.verdict == "PASS" and hi.in_premise
    assert lo.mc_gap_mean < -2 * lo.mc_gap_stderr and lo.verdict == "PASS" and lo.in_premise
    for r in reps:
        assert abs(r.identity_z) <= 4


def test_verdict_rules():
    assert theorem_verdict("h1_vs_h2", 1 / 3, 3, 1.0, 0.1, 0.0)[0] == "INCONCLUSIVE"
    assert theorem_verdict("h1_vs_h2", 0.8, 3, 1.0, 0.1, 1.0) == ("PASS", True)
    assert theorem_verdict("h1_vs_h2", 0.8, 3, -1.0, 0.1, 1.0) == ("FAIL", True)
    assert theorem_verdict("h1_vs_h2", 0.8, 3, 0.1, 0.1, 1.0)[0] == "INCONCLUSIVE"
    assert theorem_verdict("h3_vs_h4", 0.1, 3, -1.0, 0.1, -1.0) == ("PASS", True)
    assert theorem_verdict("h3_vs_h4", 0.8, 3, 1.0, 0.1, 1.0) == ("PASS", False)


def test_near_chance_homophily_is_inconclusive():
    reps = verify_theorem(sweep_configs(120, 3, [1 / 3], seed=5), n_trials=50, seed=1)
    for r in reps:
        if abs(1 - 3 * r.r) < 0.05:
            assert r.verdict == "INCONCLUSIVE"
        assert abs(identity_gap(r.edge_gap, 120, 3, 1 / 3)) <= 1e-15


def test_parse_sweep():
    vals = parse_sweep("r=0.05:0.95:0.1")
    assert len(vals) == 10 and vals[0] == 0.05 and vals[-1] == pytest.approx(0.95)
    assert parse_sweep("r=0.2,0.4") == [0.2, 0.4]
    for bad in ("0.1:0.2:0.1", "r=0.5:0.1:0.1", "r=0:2:1", "r=a,b"):
        with pytest.raises(ConfigError):
            parse_sweep(bad)


def test_csv_columns(tmp_path):
    reps = verify_theorem(sweep_configs(30, 3, [0.9], seed=0), n_trials=10, seed=0)
    write_theorem_csv(tmp_path / "r.csv", reps)
    header = (tmp_path / "r.csv").read_text().splitlines()[0].split(",")
    assert header[:6] == ["r", "pair", "analytic_gap", "mc_mean", "mc_stderr", "verdict"]
