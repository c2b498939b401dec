import numpy as np
import pytest

from saltflow.gpc import (
    GpcSurrogate,
    approximation_error_report,
    basis_eval,
    build_multiindex_set,
    legendre_eval,
    load_surrogate,
    project,
    save_surrogate,
    surrogate_eval,
    surrogate_mean,
    surrogate_sample_stats,
    surrogate_variance,
)
from saltflow.quadrature import gauss_legendre_1d, gauss_legendre_tensor, halton, tensor_rule

# closed forms of the first Legendre polynomials (recurrence-consistent)
CLOSED_FORMS = [
    lambda x: np.ones_like(x),
    lambda x: x,
    lambda x: 1.5 * x**2 - 0.5,
    lambda x: 2.5 * x**3 - 1.5 * x,
    lambda x: (35.0 * x**4 - 30.0 * x**2 + 3.0) / 8.0,
    lambda x: (63.0 * x**5 - 70.0 * x**3 + 15.0 * x) / 8.0,
]


class TestMultiIndexSet:
    def test_total_degree_m3_p4_has_35(self):
        s = build_multiindex_set(3, 4, "total_degree")
        assert len(s) == 35

    def test_m1_any_rule(self):
        for rule in ("total_degree", "max_degree", "product_degree"):
            s = build_multiindex_set(1, 2, rule)
            assert [tuple(b) for b in s.indices] == [(0,), (1,), (2,)]

    def test_max_degree_m2_p1(self):
        s = build_multiindex_set(2, 1, "max_degree")
        assert {tuple(b) for b in s.indices} == {(0, 0), (0, 1), (1, 0), (1, 1)}
        assert len(s) == 4

    def test_product_degree_protects_zeros(self):
        s = build_multiindex_set(2, 2, "product_degree")
        # prod(max(b_j, 1)) <= 2 keeps (2,0) and (0,2) but drops (2,2)
        members = {tuple(b) for b in s.indices}
        assert (2, 0) in members and (0, 2) in members
        assert (2, 2) not in members and (1, 1) in members

    def test_graded_lex_order_and_zero_first(self):
        s = build_multiindex_set(3, 3, "total_degree")
        assert tuple(s.indices[0]) == (0, 0, 0)
        keys = [(int(b.sum()), tuple(b)) for b in s.indices]
        assert keys == sorted(keys)

    def test_norms(self):
        s = build_multiindex_set(2, 3, "total_degree")
        k = [tuple(b) for b in s.indices].index((2, 1))
        assert s.norms[k] == pytest.approx(1.0 / 5.0 / 3.0, rel=1e-14)


class TestLegendreEval:
    def test_point_values(self):
        assert legendre_eval(2, 1.0) == pytest.approx(1.0, abs=1e-15)
        assert legendre_eval(2, 0.0) == pytest.approx(-0.5, abs=1e-15)
        assert legendre_eval(4, 0.5) == pytest.approx(-0.2890625, abs=1e-15)

    def test_matches_closed_forms(self):
        rng = np.random.default_rng(17)
        x = rng.uniform(-1.0, 1.0, size=100)
        for n, psi in enumerate(CLOSED_FORMS):
            assert np.max(np.abs(legendre_eval(n, x) - psi(x))) <= 1e-13

    def test_orthonormality_under_uniform_density(self):
        x, w = gauss_legendre_1d(8)
        wp = 0.5 * w
        for n in range(6):
            for m in range(6):
                val = wp @ (legendre_eval(n, x) * legendre_eval(m, x))
                expected = 1.0 / (2 * n + 1) if n == m else 0.0
                assert abs(val - expected) <= 1e-12


class TestBasisEval:
    def test_zero_index_is_one(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            theta = rng.uniform(-1, 1, size=3)
            assert basis_eval((0, 0, 0), theta) == 1.0

    def test_product_of_coordinates(self):
        assert basis_eval((1, 1, 0), (0.5, -0.5, 0.9)) == pytest.approx(-0.25, abs=1e-15)

    def test_orthogonality_matrix(self):
        rule = gauss_legendre_tensor(5, 3)
        idx = build_multiindex_set(3, 4, "max_degree")
        G = np.empty((len(idx), len(idx)))
        vals = np.array([basis_eval(b, rule.nodes) for b in idx.indices])
        G = (vals * rule.weights) @ vals.T
        expected = np.diag(idx.norms)
        assert np.max(np.abs(G - expected)) <= 1e-12


class TestProjection:
    def test_linear_model_recovery(self):
        rule = gauss_legendre_tensor(5, 3)
        idx = build_multiindex_set(3, 4, "total_degree")
        s = project(rule.nodes[:, 0], rule, idx)
        k = [tuple(b) for b in idx.indices].index((1, 0, 0))
        assert s.coeffs[k] == pytest.approx(1.0, abs=1e-13)
        others = np.delete(s.coeffs, k)
        assert np.max(np.abs(others)) <= 1e-13

    def test_quadratic_model_recovery(self):
        rule = gauss_legendre_tensor(5, 3)
        idx = build_multiindex_set(3, 4, "total_degree")
        s = project(rule.nodes[:, 0] ** 2, rule, idx)
        names = [tuple(b) for b in idx.indices]
        assert s.coeffs[names.index((0, 0, 0))] == pytest.approx(1.0 / 3.0, abs=1e-13)
        assert s.coeffs[names.index((2, 0, 0))] == pytest.approx(2.0 / 3.0, abs=1e-13)
        rest = np.delete(s.coeffs, [names.index((0, 0, 0)), names.index((2, 0, 0))])
        assert np.max(np.abs(rest)) <= 1e-13

    def test_projection_idempotent(self):
        rule = gauss_legendre_tensor(5, 2)
        idx = build_multiindex_set(2, 3, "total_degree")
        rng = np.random.default_rng(23)
        s = GpcSurrogate(idx, rng.standard_normal(len(idx)))
        s2 = project(surrogate_eval(s, rule.nodes), rule, idx)
        assert np.max(np.abs(s2.coeffs - s.coeffs)) <= 1e-12

    def test_field_valued_samples(self):
        rule = gauss_legendre_tensor(3, 2)
        idx = build_multiindex_set(2, 2, "total_degree")
        fields = np.stack([np.array([t[0], t[0] * t[1], 1.0]) for t in rule.nodes])
        s = project(fields, rule, idx)
        assert s.coeffs.shape == (len(idx), 3)
        assert surrogate_mean(s) == pytest.approx([0.0, 0.0, 1.0], abs=1e-14)


class TestMoments:
    def test_linear(self):
        rule = gauss_legendre_tensor(5, 1)
        idx = build_multiindex_set(1, 4, "total_degree")
        s = project(rule.nodes[:, 0], rule, idx)
        assert surrogate_mean(s) == pytest.approx(0.0, abs=1e-14)
        assert surrogate_variance(s) == pytest.approx(1.0 / 3.0, abs=1e-13)

    def test_quadratic(self):
        rule = gauss_legendre_tensor(5, 1)
        idx = build_multiindex_set(1, 4, "total_degree")
        s = project(rule.nodes[:, 0] ** 2, rule, idx)
        assert surrogate_mean(s) == pytest.approx(1.0 / 3.0, abs=1e-13)
        assert surrogate_variance(s) == pytest.approx(4.0 / 45.0, abs=1e-13)

    def test_constant(self):
        rule = gauss_legendre_tensor(3, 2)
        idx = build_multiindex_set(2, 2, "total_degree")
        s = project(np.full(rule.n_nodes, 0.1), rule, idx)
        assert surrogate_mean(s) == pytest.approx(0.1, abs=1e-14)
        assert surrogate_variance(s) == pytest.approx(0.0, abs=1e-14)

    def test_mean_equals_weighted_sample_mean(self):
        rule = gauss_legendre_tensor(4, 2)
        idx = build_multiindex_set(2, 3, "total_degree")
        samples = np.cos(rule.nodes[:, 0]) * np.exp(rule.nodes[:, 1])
        s = project(samples, rule, idx)
        assert surrogate_mean(s) == pytest.approx(rule.weights @ samples, abs=1e-12)


class TestEvaluation:
    def test_reproduces_samples_for_in_span_model(self):
        rule = gauss_legendre_tensor(5, 2)
        idx = build_multiindex_set(2, 4, "total_degree")
        samples = rule.nodes[:, 0] ** 2 * rule.nodes[:, 1]
        s = project(samples, rule, idx)
        vals = surrogate_eval(s, rule.nodes)
        assert np.max(np.abs(vals - samples)) <= 1e-12

    def test_odd_terms_vanish_at_origin(self):
        idx = build_multiindex_set(2, 3, "total_degree")
        coeffs = np.zeros(len(idx))
        for k, b in enumerate(idx.indices):
            if np.any(np.asarray(b) % 2 == 1):
                coeffs[k] = 1.0
        s = GpcSurrogate(idx, coeffs)
        assert surrogate_eval(s, np.zeros(2)) == pytest.approx(0.0, abs=1e-15)

    def test_linear_in_coefficients(self):
        idx = build_multiindex_set(2, 2, "total_degree")
        rng = np.random.default_rng(5)
        c1, c2 = rng.standard_normal((2, len(idx)))
        theta = rng.uniform(-1, 1, size=(10, 2))
        lhs = surrogate_eval(GpcSurrogate(idx, c1 + c2), theta)
        rhs = surrogate_eval(GpcSurrogate(idx, c1), theta) + surrogate_eval(GpcSurrogate(idx, c2), theta)
        assert np.allclose(lhs, rhs, atol=1e-13)


class TestSampleStats:
    def test_symmetric_exceedance(self):
        rule = gauss_legendre_tensor(3, 1)
        idx = build_multiindex_set(1, 2, "total_degree")
        s = project(rule.nodes[:, 0], rule, idx)
        ns = 200_000
        stats = surrogate_sample_stats(s, None, ns, thresholds=[0.0], quantiles=[0.5], seed=42)
        assert abs(stats.exceedance[0] - 0.5) <= 3.0 / np.sqrt(ns)
        assert abs(stats.quantiles[0]) <= 3.0 / np.sqrt(ns)

    def test_threshold_above_max(self):
        idx = build_multiindex_set(1, 1, "total_degree")
        s = GpcSurrogate(idx, np.array([0.0, 1.0]))  # c = theta_1, max 1
        stats = surrogate_sample_stats(s, None, 10_000, thresholds=[1.5], seed=0)
        assert stats.exceedance[0] == 0.0

    def test_parseval_consistency(self):
        rule = gauss_legendre_tensor(5, 2)
        idx = build_multiindex_set(2, 4, "total_degree")
        samples = np.sin(rule.nodes[:, 0] + 0.3) * (1.0 + 0.5 * rule.nodes[:, 1] ** 2)
        s = project(samples, rule, idx)
        n = 100_000
        rng = np.random.default_rng(99)
        pts = rng.uniform(-1, 1, size=(n, 2))
        vals = surrogate_eval(s, pts)
        mc_var = np.var(vals)
        m2 = np.mean((vals - vals.mean()) ** 2)
        m4 = np.mean((vals - vals.mean()) ** 4)
        se = np.sqrt(max(m4 - m2**2, 0.0) / n)
        assert abs(mc_var - surrogate_variance(s)) <= 5.0 * se


class TestErrorReport:
    def test_exact_model_zero_error(self):
        rule = gauss_legendre_tensor(5, 2)
        idx = build_multiindex_set(2, 4, "total_degree")
        model = lambda t: t[:, 0] ** 2 + 0.5 * t[:, 1]
        s = project(model(rule.nodes), rule, idx)
        fresh = halton(50, 2)
        rep = approximation_error_report(s, fresh.nodes, model(fresh.nodes))
        assert rep.rms <= 1e-12 and rep.max <= 1e-12

    def test_exp_model_accuracy_and_monotonicity(self):
        x, w = gauss_legendre_1d(8)
        rule = tensor_rule(x, w, 1, "gauss_legendre_tensor")
        fresh = halton(100, 1)
        truth = np.exp(fresh.nodes[:, 0])
        errors = []
        for p in (1, 2, 3, 4):
            idx = build_multiindex_set(1, p, "total_degree")
            s = project(np.exp(rule.nodes[:, 0]), rule, idx)
            errors.append(approximation_error_report(s, fresh.nodes, truth).rms)
        assert errors[-1] <= 1e-3
        assert all(errors[i + 1] < errors[i] for i in range(3))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        rule = gauss_legendre_tensor(3, 2)
        idx = build_multiindex_set(2, 2, "total_degree")
        fields = np.stack([np.array([[t[0], t[1]], [t[0] * t[1], 1.0]]) for t in rule.nodes])
        s = project(fields, rule, idx, snapshot_times=[0.5, 1.0],
                    grid_descriptor={"lo": [0.0], "hi": [1.0], "n": [2]})
        path = tmp_path / "surrogate.npz"
        save_surrogate(path, s)
        loaded = load_surrogate(path)
        assert np.array_equal(loaded.index_set.indices, idx.indices)
        assert np.allclose(loaded.coeffs, s.coeffs, atol=0.0)
        assert np.allclose(loaded.snapshot_times, [0.5, 1.0])
        assert loaded.grid_descriptor["n"] == [2]
