import numpy as np
import pytest

from helmrank import grid
from helmrank.errors import ParameterError, SamplingError

THETA = np.pi / 6


class TestBuildEcsAxis:
    def test_node_counts_and_interior_step(self):
        ax = grid.build_ecs_axis(100, 10.0, THETA, 0.33)
        assert ax.size == 133
        assert ax.interior_count == 100
        assert ax.step == pytest.approx(0.1)
        interior = ax.nodes[:100]
        assert np.allclose(interior.imag, 0.0)
        assert np.allclose(np.diff(interior.real), 0.1)

    def test_large_axis_matches_ceil_rule(self):
        ax = grid.build_ecs_axis(1000, 10.0, THETA, 0.33)
        assert ax.exterior_count == 330
        assert ax.step == pytest.approx(0.01)

    def test_minimum_one_exterior_point(self):
        ax = grid.build_ecs_axis(2, 1.0, THETA, 0.0)
        assert ax.size == 3
        assert ax.exterior_count == 1

    def test_last_node_on_ray(self):
        ax = grid.build_ecs_axis(100, 10.0, THETA, 0.33)
        expected = 10.0 + 0.33 * 10.0 * np.exp(1j * THETA)
        assert abs(ax.nodes[-1] - expected) < 1e-12

    def test_ray_property(self):
        ax = grid.build_ecs_axis(50, 5.0, 0.4, 0.5)
        exterior = ax.nodes[ax.interior_count:]
        assert np.allclose(np.angle(exterior - 5.0), 0.4, atol=1e-12)

    def test_domain_start_offset(self):
        ax = grid.build_ecs_axis(40, 10.0, THETA, 0.25, domain_start=-10.0)
        assert ax.nodes[0].real == pytest.approx(-10.0 + 0.5)
        assert ax.nodes[ax.interior_count - 1].real == pytest.approx(10.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(interior_count=1, domain_end=1.0, rotation_angle=THETA, ecs_fraction=0.3),
            dict(interior_count=10, domain_end=1.0, rotation_angle=0.0, ecs_fraction=0.3),
            dict(interior_count=10, domain_end=1.0, rotation_angle=2.0, ecs_fraction=0.3),
            dict(interior_count=10, domain_end=1.0, rotation_angle=THETA, ecs_fraction=-0.1),
            dict(interior_count=10, domain_end=np.inf, rotation_angle=THETA, ecs_fraction=0.3),
            dict(interior_count=10, domain_end=-1.0, rotation_angle=THETA, ecs_fraction=0.3,
                 domain_start=0.0),
        ],
    )
    def test_parameter_errors(self, kwargs):
        with pytest.raises(ParameterError):
            grid.build_ecs_axis(**kwargs)


class TestSecondDerivative:
    def test_interior_stencil_uniform(self):
        ax = grid.real_axis(9, 0.0, 10.0)  # h = 1
        d = grid.second_derivative(ax)
        assert d[4, 3] == pytest.approx(1.0)
        assert d[4, 4] == pytest.approx(-2.0)
        assert d[4, 5] == pytest.approx(1.0)

    def test_zero_vector_maps_to_zero(self):
        ax = grid.build_ecs_axis(20, 2.0, THETA, 0.5)
        d = grid.second_derivative(ax)
        assert np.all(d @ np.zeros(ax.size) == 0.0)

    def test_sine_second_derivative_accuracy(self):
        # Taylor oracle: второй derivative of sin(kx) is -k^2 sin(kx).
        k = 3.0
        errors = []
        for m in (200, 400):
            ax = grid.real_axis(m, 0.0, np.pi)
            d = grid.second_derivative(ax)
            u = np.sin(k * ax.nodes.real)
            errors.append(np.abs(d @ u + k * k * u).max())
        assert errors[0] < 5e-2
        order = np.log2(errors[0] / errors[1])
        assert 1.7 < order < 2.3

    def test_boundary_node_couples_only_stencil_neighbours(self):
        ax = grid.build_ecs_axis(10, 1.0, THETA, 0.5)
        d = grid.second_derivative(ax)
        e0 = np.zeros(ax.size)
        e0[0] = 1.0
        image = d @ e0
        assert np.all(image[2:] == 0.0)
        assert image[0] != 0.0 and image[1] != 0.0

    def test_tridiagonal_structure(self):
        ax = grid.build_ecs_axis(12, 2.0, THETA, 0.4)
        d = grid.second_derivative(ax)
        off = np.triu(np.abs(d), 2) + np.tril(np.abs(d), -2)
        assert np.all(off == 0.0)


class TestSampleField:
    def test_zero_function(self):
        ax = grid.build_ecs_axis(5, 1.0, THETA, 0.4)
        values = grid.sample_field([ax, ax], lambda x, y: np.zeros_like(x))
        assert values.shape == (ax.size, ax.size)
        assert np.all(values == 0.0)

    def test_gaussian_at_origin_like_node(self):
        # -exp(-x^2-y^2) equals -1 at the origin; sample on axes through 0.
        ax = grid.real_axis(19, -1.0, 1.0)  # node exactly at 0
        values = grid.sample_field([ax, ax], lambda x, y: -np.exp(-x**2 - y**2))
        i0 = np.argmin(np.abs(ax.nodes.real))
        assert values[i0, i0] == pytest.approx(-1.0)

    def test_exp_ridge_continuation_at_real_nodes(self):
        ax = grid.real_axis(9, 0.0, 10.0)  # nodes 1..9
        values = grid.sample_field(
            [ax, ax], lambda x, y: np.exp(-np.sqrt((x - y) ** 2 + 0j))
        )
        assert values[0, 2] == pytest.approx(np.exp(-2.0))

    def test_non_finite_sample_raises_with_index(self):
        ax = grid.real_axis(4, 0.0, 5.0)

        def bad(x, y):
            out = np.ones_like(x, dtype=complex)
            out[1, 2] = np.nan
            return out

        with pytest.raises(SamplingError) as info:
            grid.sample_field([ax, ax], bad)
        assert info.value.index == (1, 2)

    def test_dimension_guard(self):
        ax = grid.real_axis(4, 0.0, 5.0)
        with pytest.raises(ParameterError):
            grid.sample_field([ax], lambda x: x)


class TestWaveNumberField:
    def test_variation_windowed_to_support(self):
        ax = grid.build_ecs_axis(20, 2.0, THETA, 0.5)
        field = grid.sample_wavenumber(
            [ax, ax], 2.0, lambda x, y: np.exp(-x**2 - y**2), 2.0
        )
        m = ax.interior_count
        # node at the bound and all exterior nodes carry zero variation
        assert np.all(field.variation[m - 1:, :] == 0.0)
        assert np.all(field.variation[:, m - 1:] == 0.0)
        assert np.any(field.variation[: m - 1, : m - 1] != 0.0)

    def test_squared_field_constant_outside(self):
        ax = grid.build_ecs_axis(20, 2.0, THETA, 0.5)
        field = grid.sample_wavenumber([ax, ax], 3.0, lambda x, y: np.exp(-x**2 - y**2), 2.0)
        k2 = field.squared()
        assert np.all(k2[ax.interior_count:, :] == 3.0)


class TestGridRefinement:
    def test_1d_helmholtz_solution_second_order(self):
        # Solves (-D - k0^2) u = f on nested axes; interior values of the
        # coarse solve converge at second order to the fine ones.
        from helmrank import kron

        k2 = 2.0
        f = lambda x: np.exp(-4.0 * (x - 5.0) ** 2)
        solutions = {}
        for m in (100, 200, 400):
            ax = grid.build_ecs_axis(m, 10.0, THETA, 1 / 3)
            d = grid.second_derivative(ax)
            op = kron.KronSumOperator(
                mode_sizes=(ax.size,),
                terms=[(-d,)],
                diagonal_part=-k2 * np.ones(ax.size),
            )
            rhs = f(ax.nodes.real) * (ax.nodes.imag == 0.0)
            solutions[m] = (ax, kron.full_solve(op, rhs))
        ax_c, u_c = solutions[100]
        ax_m, u_m = solutions[200]
        ax_f, u_f = solutions[400]
        # compare on the shared coarse interior nodes
        err_c = np.abs(u_c[:100] - u_m[1:200:2][:100]).max()
        err_m = np.abs(u_m[:200] - u_f[1:400:2][:200]).max()
        order = np.log2(err_c / err_m)
        assert 1.6 < order < 2.4
