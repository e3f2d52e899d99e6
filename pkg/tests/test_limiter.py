import numpy as np
import pytest

from crkdg.basis import Basis
from crkdg.limiter import LimiterPreconditionError, limit_euler, limit_scalar
from crkdg.mesh import Outflow, Periodic, build_box, build_interval
from crkdg.models import AdvectionModel, EulerModel
from crkdg.operators import Discretization, SolutionField

SQRT3 = np.sqrt(3.0)


def scalar_disc(n=4, k=1, bounds=(1.0, 2.0)):
    mesh = build_interval(0.0, 1.0, n, Periodic(), Periodic())
    return Discretization(mesh, Basis(kind="P", degree=k, dim=1),
                          AdvectionModel([1.0], bounds))


def euler_disc(n=4, k=1, dim=1, eps=1e-8):
    if dim == 1:
        mesh = build_interval(0.0, 1.0, n, Outflow(), Outflow())
    else:
        mesh = build_box((0, 1, 0, 1), n, n, bcs={"W": Outflow(), "E": Outflow(),
                                                  "S": Outflow(), "N": Outflow()})
    return Discretization(mesh, Basis(kind="P" if dim == 1 else "Q", degree=k, dim=dim),
                          EulerModel(dim=dim, eps=eps))


class TestScalarLimiter:
    def test_linear_cell_clamped_to_bounds(self):
        # p with average 1.5 and endpoint range [0.5, 2.5] against bounds [1, 2]:
        # theta = 0.5, limited endpoint values exactly 1 and 2.
        disc = scalar_disc(n=1, k=1)
        coeffs = np.zeros((1, 2, 1))
        coeffs[0, 0, 0] = 1.5
        coeffs[0, 1, 0] = 1.0 / SQRT3
        fld = SolutionField(disc.mesh, disc.basis, coeffs)
        report = limit_scalar(disc, fld, (1.0, 2.0))
        vals = disc.decomposition_values(fld)[0, :, 0]
        np.testing.assert_allclose(np.sort(vals), [1.0, 2.0], atol=1e-14)
        assert report.theta_min == pytest.approx(0.5)
        assert report.cells_touched == 1
        assert fld.averages[0, 0] == pytest.approx(1.5, abs=1e-15)

    def test_inside_bounds_is_identity(self):
        disc = scalar_disc(n=3, k=2)
        rng = np.random.default_rng(0)
        coeffs = np.zeros((3, 3, 1))
        coeffs[:, 0, 0] = 1.5
        coeffs[:, 1:, 0] = rng.uniform(-0.05, 0.05, size=(3, 2))
        fld = SolutionField(disc.mesh, disc.basis, coeffs)
        before = fld.coeffs.copy()
        report = limit_scalar(disc, fld, (1.0, 2.0))
        np.testing.assert_array_equal(fld.coeffs, before)
        assert report.cells_touched == 0 and report.theta_min == 1.0

    def test_idempotent(self):
        disc = scalar_disc(n=6, k=2)
        rng = np.random.default_rng(1)
        coeffs = np.zeros((6, 3, 1))
        coeffs[:, 0, 0] = rng.uniform(1.0, 2.0, size=6)
        coeffs[:, 1:, 0] = rng.normal(scale=0.8, size=(6, 2))
        fld = SolutionField(disc.mesh, disc.basis, coeffs)
        limit_scalar(disc, fld, (1.0, 2.0))
        once = fld.coeffs.copy()
        limit_scalar(disc, fld, (1.0, 2.0))
        np.testing.assert_array_equal(fld.coeffs, once)

    def test_average_outside_bounds_names_cell(self):
        disc = scalar_disc(n=4, k=1)
        coeffs = np.zeros((4, 2, 1))
        coeffs[:, 0, 0] = 1.5
        coeffs[2, 0, 0] = 2.5
        fld = SolutionField(disc.mesh, disc.basis, coeffs)
        with pytest.raises(LimiterPreconditionError, match=r"\(2,\)"):
            limit_scalar(disc, fld, (1.0, 2.0))

    def test_theta_monotone_in_bounds_width(self):
        disc = scalar_disc(n=5, k=2)
        rng = np.random.default_rng(2)
        coeffs = np.zeros((5, 3, 1))
        coeffs[:, 0, 0] = rng.uniform(1.2, 1.8, size=5)
        coeffs[:, 1:, 0] = rng.normal(scale=1.0, size=(5, 2))
        base = SolutionField(disc.mesh, disc.basis, coeffs.copy())
        rep_narrow = limit_scalar(disc, base, (1.0, 2.0))
        wide = SolutionField(disc.mesh, disc.basis, coeffs.copy())
        rep_wide = limit_scalar(disc, wide, (0.5, 2.5))
        assert rep_wide.theta_min >= rep_narrow.theta_min

    def test_randomized_average_preservation_and_bounds(self):
        # Acceptance-grade sweep: averages exact, S_K values in bounds.
        disc = scalar_disc(n=10_000, k=2)
        rng = np.random.default_rng(3)
        coeffs = np.zeros((10_000, 3, 1))
        coeffs[:, 0, 0] = rng.uniform(1.0, 2.0, size=10_000)
        coeffs[:, 1:, 0] = rng.normal(scale=2.0, size=(10_000, 2))
        fld = SolutionField(disc.mesh, disc.basis, coeffs)
        avg_before = fld.averages.copy()
        limit_scalar(disc, fld, (1.0, 2.0))
        np.testing.assert_array_equal(fld.averages, avg_before)
        vals = disc.decomposition_values(fld)[..., 0]
        assert vals.min() >= 1.0 - 1e-12
        assert vals.max() <= 2.0 + 1e-12


class TestEulerLimiter:
    def make_field(self, disc, rho_coeffs, mom=0.0, E=10.0):
        n = disc.mesh.counts[0]
        nb = disc.basis.n_basis
        coeffs = np.zeros((n, nb, disc.model.m))
        coeffs[:, : rho_coeffs.shape[1], 0] = rho_coeffs
        coeffs[:, 0, 1] = mom
        coeffs[:, 0, 2] = E
        return SolutionField(disc.mesh, disc.basis, coeffs)

    def test_density_stage_theta(self):
        # Min density -0.1 with average 1: theta1 = (1 - eps)/1.1, post-min = eps.
        eps = 1e-8
        disc = euler_disc(n=1, k=1, eps=eps)
        rho = np.array([[1.0, 1.1 / SQRT3]])
        fld = self.make_field(disc, rho)
        report = limit_euler(disc, fld, eps)
        vals = disc.decomposition_values(fld)
        assert vals[..., 0].min() == pytest.approx(eps, abs=1e-15)
        expected_theta = (1.0 - eps) / 1.1
        assert report.theta_min == pytest.approx(expected_theta, rel=1e-12)
        assert report.stage_active == [True, False]

    def test_positive_cell_untouched(self):
        disc = euler_disc(n=3, k=2)
        rho = np.tile([[1.0, 0.05, -0.03]], (3, 1))
        fld = self.make_field(disc, rho)
        before = fld.coeffs.copy()
        report = limit_euler(disc, fld, 1e-8)
        np.testing.assert_array_equal(fld.coeffs, before)
        assert report.cells_touched == 0

    def test_energy_stage_enforces_internal_energy_floor(self):
        eps = 1e-8
        disc = euler_disc(n=1, k=1, eps=eps)
        coeffs = np.zeros((1, 2, 3))
        coeffs[0, 0] = [1.0, 0.0, 1.0]     # rho e average = 1
        coeffs[0, 1, 2] = 1.2 / SQRT3      # energy dips to -0.2 at one endpoint
        fld = SolutionField(disc.mesh, disc.basis, coeffs)
        limit_euler(disc, fld, eps)
        vals = disc.decomposition_values(fld)
        rhoe = vals[..., 2] - 0.5 * vals[..., 1] ** 2 / vals[..., 0]
        assert rhoe.min() >= eps - 1e-12

    def test_average_preservation_exact(self):
        disc = euler_disc(n=200, k=2)
        rng = np.random.default_rng(5)
        model = disc.model
        u_avg = model.primitive_to_conservative(
            rng.uniform(0.5, 3.0, 200),
            rng.uniform(-1.0, 1.0, (200, 1)),
            rng.uniform(0.5, 3.0, 200))
        coeffs = np.zeros((200, 3, 3))
        coeffs[:, 0, :] = u_avg
        coeffs[:, 1:, :] = rng.normal(scale=1.5, size=(200, 2, 3))
        fld = SolutionField(disc.mesh, disc.basis, coeffs)
        avg_before = fld.averages.copy()
        limit_euler(disc, fld, 1e-8)
        np.testing.assert_array_equal(fld.averages, avg_before)

    def test_idempotent(self):
        disc = euler_disc(n=50, k=2)
        rng = np.random.default_rng(6)
        model = disc.model
        u_avg = model.primitive_to_conservative(
            rng.uniform(0.1, 2.0, 50),
            rng.uniform(-2.0, 2.0, (50, 1)),
            rng.uniform(0.1, 2.0, 50))
        coeffs = np.zeros((50, 3, 3))
        coeffs[:, 0, :] = u_avg
        coeffs[:, 1:, :] = rng.normal(scale=1.0, size=(50, 2, 3))
        fld = SolutionField(disc.mesh, disc.basis, coeffs)
        limit_euler(disc, fld, 1e-8)
        once = fld.coeffs.copy()
        limit_euler(disc, fld, 1e-8)
        np.testing.assert_array_equal(fld.coeffs, once)

    def test_randomized_post_limit_admissibility(self):
        # 10^4 random cells: rho and rho e at S_K >= eps - 1e-12 afterwards,
        # averages bitwise preserved (concavity backstop included).
        n = 10_000
        disc = euler_disc(n=n, k=2)
        rng = np.random.default_rng(7)
        model = disc.model
        u_avg = model.primitive_to_conservative(
            10.0 ** rng.uniform(-7, 1, n),
            rng.uniform(-3.0, 3.0, (n, 1)),
            10.0 ** rng.uniform(-7, 1, n))
        coeffs = np.zeros((n, 3, 3))
        coeffs[:, 0, :] = u_avg
        coeffs[:, 1:, :] = rng.normal(scale=0.7, size=(n, 2, 3)) * \
            np.abs(u_avg[:, None, :])
        fld = SolutionField(disc.mesh, disc.basis, coeffs)
        avg_before = fld.averages.copy()
        limit_euler(disc, fld, 1e-8)
        np.testing.assert_array_equal(fld.averages, avg_before)
        vals = disc.decomposition_values(fld)
        rho = vals[..., 0]
        rhoe = vals[..., 2] - 0.5 * vals[..., 1] ** 2 / rho
        assert rho.min() >= 1e-8 - 1e-12
        assert rhoe.min() >= 1e-8 - 1e-12

    def test_inadmissible_average_raises(self):
        disc = euler_disc(n=4, k=1)
        coeffs = np.zeros((4, 2, 3))
        coeffs[:, 0] = [1.0, 0.0, 1.0]
        coeffs[3, 0] = [1.0, 0.0, -1.0]
        fld = SolutionField(disc.mesh, disc.basis, coeffs)
        with pytest.raises(LimiterPreconditionError, match=r"\(3,\)"):
            limit_euler(disc, fld, 1e-8)

    def test_floor_average_flattens_cell(self):
        eps = 1e-8
        disc = euler_disc(n=1, k=1, eps=eps)
        coeffs = np.zeros((1, 2, 3))
        coeffs[0, 0] = [eps, 0.0, 10.0]
        coeffs[0, 1, 0] = 0.5  # density wiggles below the floor
        fld = SolutionField(disc.mesh, disc.basis, coeffs)
        report = limit_euler(disc, fld, eps)
        vals = disc.decomposition_values(fld)
        np.testing.assert_allclose(vals[..., 0], eps, atol=1e-20)
        assert report.boundary_cells == 1
