import numpy as np
import pytest

from crkdg.basis import (
    Basis,
    build_decomposition,
    cfl_constants,
    gauss_lobatto_rule,
    gauss_rule,
    tensor_gauss,
)

SQRT3 = np.sqrt(3.0)


class TestGaussRule:
    def test_one_point_is_midpoint(self):
        rule = gauss_rule(1)
        np.testing.assert_allclose(rule.points, [0.5])
        np.testing.assert_allclose(rule.weights, [1.0])

    def test_two_point_nodes_match_legendre_roots(self):
        # Shifted P2 is 6x^2 - 6x + 1; its roots are 1/2 +- 1/(2 sqrt 3).
        roots = np.sort(np.roots([6.0, -6.0, 1.0]))
        rule = gauss_rule(2)
        np.testing.assert_allclose(rule.points, roots, atol=1e-15)
        np.testing.assert_allclose(rule.points, [0.5 - 1 / (2 * SQRT3), 0.5 + 1 / (2 * SQRT3)])
        np.testing.assert_allclose(rule.weights, [0.5, 0.5])

    def test_two_point_exact_for_cubic(self):
        rule = gauss_rule(2)
        assert rule.integrate(lambda x: x**3) == pytest.approx(0.25, abs=1e-15)

    @pytest.mark.parametrize("n", range(1, 7))
    def test_exactness_degree(self, n):
        rule = gauss_rule(n)
        for p in range(2 * n):
            exact = 1.0 / (p + 1)
            assert rule.integrate(lambda x: x**p) == pytest.approx(exact, rel=1e-13)

    def test_invalid_count(self):
        with pytest.raises(ValueError):
            gauss_rule(0)


class TestGaussLobattoRule:
    def test_two_point_is_trapezoid(self):
        rule = gauss_lobatto_rule(2)
        np.testing.assert_allclose(rule.points, [0.0, 1.0])
        np.testing.assert_allclose(rule.weights, [0.5, 0.5])

    def test_three_point_nodes_and_weights(self):
        # Interior node is the root of P2' (i.e. x = 1/2 shifted); weights 1/6, 2/3, 1/6.
        rule = gauss_lobatto_rule(3)
        np.testing.assert_allclose(rule.points, [0.0, 0.5, 1.0], atol=1e-15)
        np.testing.assert_allclose(rule.weights, [1 / 6, 2 / 3, 1 / 6], atol=1e-15)

    def test_four_point_endpoint_weight(self):
        # Endpoint weight on the unit interval is 1/(n(n-1)).
        rule = gauss_lobatto_rule(4)
        assert rule.weights[0] == pytest.approx(1 / 12, abs=1e-15)
        assert rule.weights[-1] == pytest.approx(1 / 12, abs=1e-15)

    @pytest.mark.parametrize("n", range(2, 7))
    def test_includes_endpoints_and_exactness(self, n):
        rule = gauss_lobatto_rule(n)
        assert rule.points[0] == 0.0 and rule.points[-1] == pytest.approx(1.0)
        for p in range(2 * n - 2):
            assert rule.integrate(lambda x: x**p) == pytest.approx(1 / (p + 1), rel=1e-12)

    def test_invalid_count(self):
        with pytest.raises(ValueError):
            gauss_lobatto_rule(1)


class TestBasis:
    @pytest.mark.parametrize("kind,k,dim,expected", [
        ("P", 1, 1, 2), ("P", 3, 1, 4),
        ("P", 2, 2, 6), ("Q", 2, 2, 9),
        ("P", 3, 2, 10), ("Q", 3, 2, 16),
    ])
    def test_dimension_counts(self, kind, k, dim, expected):
        assert Basis(kind=kind, degree=k, dim=dim).n_basis == expected

    @pytest.mark.parametrize("kind,dim", [("P", 1), ("P", 2), ("Q", 2)])
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_mass_matrix_is_identity(self, kind, k, dim):
        basis = Basis(kind=kind, degree=k, dim=dim)
        M = basis.mass_matrix()
        np.testing.assert_allclose(M, np.eye(basis.n_basis), atol=1e-13)

    def test_gradient_matches_finite_differences(self):
        basis = Basis(kind="Q", degree=3, dim=2)
        rng = np.random.default_rng(7)
        pts = rng.uniform(0.1, 0.9, size=(20, 2))
        g = basis.grad(pts)
        h = 1e-6
        for axis in range(2):
            shift = np.zeros(2)
            shift[axis] = h
            fd = (basis.eval(pts + shift) - basis.eval(pts - shift)) / (2 * h)
            np.testing.assert_allclose(g[:, :, axis], fd, atol=5e-8, rtol=1e-6)

    def test_first_function_is_constant_one(self):
        for kind, dim in [("P", 1), ("P", 2), ("Q", 2)]:
            basis = Basis(kind=kind, degree=2, dim=dim)
            pts = np.random.default_rng(0).uniform(size=(5, dim))
            np.testing.assert_allclose(basis.eval(pts)[:, 0], 1.0)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            Basis(kind="R", degree=2, dim=1)
        with pytest.raises(ValueError):
            Basis(kind="P", degree=0, dim=1)


class TestConvexDecomposition:
    def test_k1_1d_endpoints(self):
        d = build_decomposition(1, 1)
        np.testing.assert_allclose(d.points[:, 0], [0.0, 1.0])
        np.testing.assert_allclose(d.weights, [0.5, 0.5])
        assert cfl_constants(d) == (pytest.approx(0.5), pytest.approx(0.5))

    def test_k2_1d_endpoint_weight(self):
        d = build_decomposition(2, 1)
        assert d.weights[0] == pytest.approx(1 / 6, abs=1e-15)
        assert d.c_G == pytest.approx(1 / 6, abs=1e-15)

    def test_k3_1d_cfl_constants(self):
        d = build_decomposition(3, 1)
        assert cfl_constants(d) == (pytest.approx(1 / 12), pytest.approx(1 / 12))

    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("dim", [1, 2])
    def test_weights_positive_and_sum_to_one(self, k, dim):
        d = build_decomposition(k, dim)
        assert np.all(d.weights > 0) and np.all(d.weights < 1)
        assert np.sum(d.weights) == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_2d_face_points_are_edge_gauss_points(self, k):
        d = build_decomposition(k, 2)
        g = gauss_rule(k + 1)
        for face, axis, value in [(0, 0, 0.0), (1, 0, 1.0), (2, 1, 0.0), (3, 1, 1.0)]:
            pts = d.points[d.face_point_idx[face]]
            np.testing.assert_allclose(pts[:, axis], value, atol=1e-14)
            np.testing.assert_allclose(np.sort(pts[:, 1 - axis]), g.points, atol=1e-14)
        np.testing.assert_allclose(np.sum(d.edge_weights), 1.0, atol=1e-15)

    @pytest.mark.parametrize("kind", ["P", "Q"])
    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("dim", [1, 2])
    def test_average_identity_random_polynomials(self, kind, k, dim):
        # Oracle: 10-point tensor Gauss reference average over 100 random polys.
        if dim == 1 and kind == "Q":
            pytest.skip("Q == P in 1D")
        d = build_decomposition(k, dim)
        basis = Basis(kind=kind, degree=k, dim=dim)
        pts10, w10 = tensor_gauss(10, dim)
        rng = np.random.default_rng(42)
        coeffs = rng.standard_normal((100, basis.n_basis))
        avg_ref = coeffs @ (basis.eval(pts10).T @ w10)
        avg_dec = coeffs @ (basis.eval(d.points).T @ d.weights)
        np.testing.assert_allclose(avg_dec, avg_ref, atol=1e-13)

    def test_k3_cubic_identity_tight(self):
        d = build_decomposition(3, 1)
        basis = Basis(kind="P", degree=3, dim=1)
        pts10, w10 = tensor_gauss(10, 1)
        rng = np.random.default_rng(3)
        c = rng.standard_normal(basis.n_basis)
        ref = float(c @ (basis.eval(pts10).T @ w10))
        dec = float(c @ (basis.eval(d.points).T @ d.weights))
        assert dec == pytest.approx(ref, abs=1e-14)

    def test_2d_cfl_constants_match_both_slots(self):
        d = build_decomposition(2, 2)
        cf, cg = cfl_constants(d)
        assert cf == cg and cf > 0

    def test_rejects_unsupported_degree(self):
        with pytest.raises(ValueError):
            build_decomposition(4, 1)
        with pytest.raises(ValueError):
            build_decomposition(0, 2)
