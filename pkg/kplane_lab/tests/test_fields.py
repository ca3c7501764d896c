# Copyright Kevin Deldycke <kevin@deldycke.com> and contributors.
# All Rights Reserved.
#
# This program is Free Software; you can redistribute it and/or
# modify it under the terms of the GNU General Public License
# as published by the Free Software Foundation; either version 2
# of the License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, write to the Free Software
# Foundation, Inc., 59 Temple Place - Suite 330, Boston, MA  02111-1307, USA.

import math

import numpy as np
import pytest

from .. import (
    ConsistencyError,
    DimensionError,
    InfiniteMeasureError,
    NonIntegrableError,
    ParameterError,
    SingularityError,
)
from ..estimate import MonteCarloConfig
from ..fields import (
    AffineMap,
    AnalyticField,
    ExtremizerField,
    GridField,
    JField,
    ZeroField,
    apply_affine_symmetry,
    apply_J,
    discretize,
    extremizer_field,
    full_rearrange,
    gaussian_field,
    indicator_field,
    layer_cake_reconstruct,
    lp_distance,
    lp_norm,
    radial_order,
    slice_measure,
    slice_radius,
    slice_rearrange,
    sum_field,
    superlevel_layers,
)
from ..indicators import Ball
from ..sampling import ball_volume


def test_affine_map_algebra(rng):
    phi, psi = AffineMap.random(3, rng), AffineMap.random(3, rng)
    points = rng.standard_normal((5, 3))
    assert np.allclose((phi @ psi)(points), phi(psi(points)))
    assert np.allclose(phi.inverse()(phi(points)), points)
    assert (phi @ phi.inverse()).allclose(AffineMap.identity(3))
    assert AffineMap.scaling(3, 2.0).jacobian == pytest.approx(8.0)
    assert np.allclose(AffineMap.shift([1.0, 2.0])([[0.0, 0.0]]), [[1.0, 2.0]])


def test_singular_affine_map():
    with pytest.raises(SingularityError):
        AffineMap([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(DimensionError):
        AffineMap(np.eye(2), [1.0, 2.0, 3.0])


def test_extremizer_values():
    f = extremizer_field(2, 1)
    assert f([0.0, 0.0]) == pytest.approx(1.0)
    assert f([0.6, 0.8]) == pytest.approx(0.5)
    g = extremizer_field(3, 2, AffineMap.scaling(3, 2.0), c=3.0)
    assert g([0.0, 0.0, 1.0]) == pytest.approx(3 * 5 ** -1.5)
    assert g([0.0, 0.0, 1.0]) == pytest.approx(0.2683, abs=1e-4)
    assert f.decay == 2 and g.decay == 3
    with pytest.raises(DimensionError):
        f([0.0, 0.0, 0.0])


def test_extremizer_is_positive(rng):
    f = extremizer_field(3, 1, AffineMap.random(3, rng))
    assert np.all(f(50 * rng.standard_normal((1000, 3))) > 0)


def test_lp_norm_of_unit_disk():
    disk = indicator_field(2, "ball", size=1.0)
    norm = lp_norm(disk, 1.5, MonteCarloConfig(samples=100_000, seed=3))
    assert norm.agrees_with(math.pi ** (2 / 3))


def test_lp_norm_of_extremizer():
    norm = lp_norm(extremizer_field(2, 1), 1.5, MonteCarloConfig(samples=100_000, seed=4))
    assert norm.agrees_with((2 * math.pi) ** (2 / 3))
    assert norm.value == pytest.approx(3.398, rel=0.02)


def test_lp_norm_edge_cases():
    assert lp_norm(ZeroField(2), 1.5).value == 0
    with pytest.raises(ParameterError):
        lp_norm(extremizer_field(2, 1), 0.5)
    # Decay 2 is too slow for an L^1 norm in the plane.
    with pytest.raises(NonIntegrableError):
        lp_norm(extremizer_field(2, 1), 1.0)


def test_slice_radius_closed_form():
    f = extremizer_field(2, 1)
    assert slice_radius(f, [0.0], 0.5) == pytest.approx(1.0)
    x_prime, s = 0.5, 0.3
    assert slice_radius(f, [x_prime], s) == pytest.approx(
        math.sqrt(s ** -1 - 1 - x_prime ** 2)
    )
    # Above the slice supremum.
    assert slice_radius(f, [0.0], 1.5) == 0
    with pytest.raises(InfiniteMeasureError):
        slice_radius(f, [0.0], 0.0)


def test_slice_radius_matches_sampled_measure(rng):
    f = extremizer_field(3, 1, AffineMap(AffineMap.random(3, rng).linear))
    x_prime, s = np.array([0.2]), 0.3
    opaque = AnalyticField(3, f.evaluator, decay=2, center=f.center, scale=f.scale)
    measure = slice_measure(opaque, x_prime, s, MonteCarloConfig(samples=100_000, seed=8))
    assert measure.agrees_with(ball_volume(2, f.slice_radius(x_prime, s)))


def test_sampled_slice_radius_of_gaussian():
    radius = slice_radius(
        gaussian_field(2), [0.0], math.exp(-1), MonteCarloConfig(samples=100_000, seed=5)
    )
    assert radius == pytest.approx(1.0, rel=0.03)


def test_slice_radius_is_concave(rng):
    f = extremizer_field(3, 2)
    s = 0.2
    # Support of x' ↦ ρ(x', s) is the ball of radius sqrt(s^(-2/3) - 1).
    reach = math.sqrt(s ** (-2 / 3) - 1)
    for _ in range(200):
        first, second = rng.uniform(-1, 1, (2, 2)) * reach / math.sqrt(2)
        middle = slice_radius(f, (first + second) / 2, s)
        assert middle >= (slice_radius(f, first, s) + slice_radius(f, second, s)) / 2 - 1e-12


def test_radial_order():
    assert radial_order((4,)).tolist() == [1, 2, 0, 3]
    order = radial_order((3, 3))
    assert order[0] == 4


def test_slice_rearrange_places_values_radially():
    grid = GridField([[0.0, 3.0, 1.0, 2.0]], 1.0)
    result = slice_rearrange(grid, 1)
    assert result.values.tolist() == [[1.0, 3.0, 2.0, 0.0]]


def test_slice_rearrange_fixed_point():
    grid = GridField([[1.0, 3.0, 2.0, 0.0], [2.0, 5.0, 4.0, 1.0]], 0.5)
    assert np.array_equal(slice_rearrange(grid, 1).values, grid.values)


def test_rearrangements_are_equimeasurable(rng):
    for _ in range(50):
        dims = tuple(rng.integers(2, 9, 2))
        grid = GridField(rng.exponential(size=dims), 0.1, rng.uniform(-1, 1, 2))
        for result in (full_rearrange(grid), slice_rearrange(grid, 1)):
            assert np.array_equal(np.sort(result.values, axis=None), np.sort(grid.values, axis=None))
            assert result.integral(1.5) == pytest.approx(grid.integral(1.5), rel=1e-9)
            assert result.is_centered or result.lower[0] == grid.lower[0]


def test_full_rearrange_of_indicator():
    values = np.zeros((20, 20))
    values[2:6, 12:18] = 1.0
    result = full_rearrange(GridField(values, 0.1))
    assert result.values.sum() == values.sum()
    assert result.is_centered
    # The cells around the origin are filled first.
    assert np.all(result.values[9:11, 9:11] == 1.0)
    assert result.values[0, 0] == 0.0


def test_rearranged_extremizers(rng):
    phi = AffineMap.random(3, rng)
    f = extremizer_field(3, 1, phi)
    assert full_rearrange(extremizer_field(2, 1, AffineMap.shift([1.0, -2.0]))).is_standard
    assert full_rearrange(f).phi.jacobian == pytest.approx(phi.jacobian)
    sharp = slice_rearrange(f, 1)
    assert isinstance(sharp, ExtremizerField)
    assert sharp.phi.jacobian == pytest.approx(phi.jacobian)
    for x_prime in rng.standard_normal((5, 1)):
        assert sharp.slice_radius(x_prime, 0.2) == pytest.approx(f.slice_radius(x_prime, 0.2))
        assert np.allclose(sharp.slice_center(x_prime), 0, atol=1e-9)


def test_rearranging_analytic_fields_needs_a_grid():
    with pytest.raises(ParameterError):
        full_rearrange(gaussian_field(2))


def test_affine_symmetry(rng):
    f = gaussian_field(2, center=[0.3, -0.2])
    points = rng.standard_normal((10, 2))
    identity = apply_affine_symmetry(f, AffineMap.identity(2), 1.5)
    assert np.allclose(identity(points), f(points))

    doubled = apply_affine_symmetry(f, AffineMap.scaling(2, 2.0), 1.5)
    assert np.allclose(doubled(points), 4 ** (2 / 3) * f(2 * points))
    exact = (math.pi / 1.5) ** (2 / 3)
    mc = MonteCarloConfig(samples=50_000, seed=6)
    assert lp_norm(doubled, 1.5, mc).agrees_with(exact)

    # Translations leave the sampled values unchanged.
    shifted = apply_affine_symmetry(f, AffineMap.shift([1.0, 2.0]), 1.5)
    assert lp_norm(shifted, 1.5, mc).value == pytest.approx(
        lp_norm(f, 1.5, mc).value, rel=1e-9
    )


def test_affine_symmetry_of_extremizers(rng):
    phi = AffineMap.random(2, rng)
    image = apply_affine_symmetry(extremizer_field(2, 1), phi, 1.5)
    assert isinstance(image, ExtremizerField)
    points = rng.standard_normal((10, 2))
    assert np.allclose(
        image(points), phi.jacobian ** (2 / 3) * extremizer_field(2, 1)(phi(points))
    )


def test_J_of_rectangle_on_grid():
    lower = np.array([0.0, 0.0])
    h = 0.01
    template = GridField(np.zeros((250, 150)), h, lower)
    centers = template.cell_centers
    inside = (centers[..., 0] > 1) & (centers[..., 0] < 2) & (centers[..., 1] < 1)
    f = template.with_values(inside.astype(float))
    assert f.integral(1.5) == pytest.approx(1.0, rel=1e-9)
    image = apply_J(f, 1)
    assert image.integral(1.5) == pytest.approx(1.0, rel=0.03)
    assert np.all(image.values[0] == 0)


def test_J_of_rectangle_analytic():
    f = indicator_field(2, "box", center=[1.5, 0.5], size=0.5)
    image = apply_J(f, 1)
    assert isinstance(image, JField)
    assert image([0.75, 0.5]) == pytest.approx(0.75 ** -2)
    assert image([0.75, 0.8]) == 0
    assert image([0.0, 0.3]) == 0
    assert image.bound >= 0.75 ** -2
    norm = lp_norm(image, 1.5, MonteCarloConfig(samples=100_000, seed=2))
    assert norm.agrees_with(1.0, atol=0.01)


def test_J_bound():
    f = gaussian_field(2, center=[2.0, 0.0])
    image = apply_J(f, 1)
    # Supremum of t² exp(-(t - 2)²), reached at t = 1 + √2 on the axis.
    peak = 1 + math.sqrt(2)
    assert image.bound == pytest.approx(peak ** 2 * math.exp(-((peak - 2) ** 2)))
    s = np.linspace(0.05, 2.0, 20_001)
    values = image(np.stack([s, np.zeros_like(s)], axis=-1))
    assert values.max() <= image.bound * (1 + 1e-12)
    assert values.max() == pytest.approx(image.bound, rel=1e-6)

    assert apply_J(extremizer_field(2, 1, AffineMap.shift([0.5, 0.0])), 1).bound == 1
    slow = AnalyticField(2, lambda x: (1 + np.sum(x ** 2, axis=-1)) ** -0.75, decay=1.5)
    assert math.isinf(apply_J(slow, 1).bound)


def test_J_is_an_involution(rng):
    f = gaussian_field(3, center=[0.5, 0.1, -0.3])
    twice = apply_J(apply_J(f, 2), 2)
    points = rng.standard_normal((100, 3))
    assert np.allclose(twice(points), f(points))


def test_J_fixes_the_standard_extremizer(rng):
    f = extremizer_field(2, 1)
    assert apply_J(f, 1) is f
    points = rng.standard_normal((100, 2))
    assert np.allclose(JField(f, 1)(points), f(points))


def test_grid_field():
    grid = GridField([[1.0, 2.0], [3.0, 4.0]], 1.0)
    assert grid.n == 2 and grid.dims == (2, 2)
    assert np.allclose(grid.lower, [-1, -1])
    assert grid([[-0.5, 0.5], [0.5, -0.5], [3.0, 0.0]]).tolist() == [2.0, 3.0, 0.0]
    assert grid.integral() == 10.0
    with pytest.raises(ValueError):
        grid.values[0, 0] = 5.0
    with pytest.raises(ParameterError):
        GridField([[-1.0]], 1.0)
    with pytest.raises(ParameterError):
        GridField([[1.0]], 0.0)


def test_discretize_and_distance():
    f = gaussian_field(2)
    grid = discretize(f, 3.0, 0.1)
    assert grid.dims == (60, 60)
    assert grid.is_centered
    assert grid.integral() == pytest.approx(math.pi, rel=1e-3)
    assert lp_distance(grid, f, 1.5) == 0
    assert lp_distance(grid, grid.scaled(2.0), 1.0) == pytest.approx(grid.integral())
    with pytest.raises(ParameterError):
        lp_distance(f, f, 1.5)


def test_sum_field():
    f = discretize(gaussian_field(2), 2.0, 0.5)
    g = sum_field(f, gaussian_field(2, center=[1.0, 0.0]), 0.5)
    assert g.same_lattice(f)
    with pytest.raises(ParameterError):
        sum_field(f, f, -2.0)
    analytic = sum_field(extremizer_field(2, 1), gaussian_field(2), 0.1)
    assert analytic([0.0, 0.0]) == pytest.approx(1.1)
    assert analytic.decay == 2


def test_layer_cake():
    grid = GridField(np.zeros((40, 40)), 0.1)
    single = layer_cake_reconstruct([(1.0, Ball([0, 0], 1.0))], grid)
    assert np.array_equal(single.values, Ball([0, 0], 1.0)(grid.cell_centers))

    nested = layer_cake_reconstruct(
        [(1.0, Ball([0, 0], 1.5)), (1.0, Ball([0, 0], 0.5))], grid
    )
    assert nested([0.0, 0.05]) == 2.0
    assert nested([1.0, 0.05]) == 1.0
    assert nested([1.9, 1.9]) == 0.0

    with pytest.raises(ConsistencyError):
        layer_cake_reconstruct(
            [(1.0, Ball([-1, 0], 0.5)), (1.0, Ball([1, 0], 0.4))], grid
        )


def test_layer_cake_of_own_superlevel_sets(rng):
    values = rng.integers(0, 5, (10, 10)) * 0.25
    f = GridField(values, 0.2)
    thresholds = np.unique(values[values > 0])
    rebuilt = layer_cake_reconstruct(superlevel_layers(f, thresholds), f)
    assert np.allclose(rebuilt.values, values)

    # Dyadic thresholds round values up to the next one.
    smooth = discretize(gaussian_field(2), 2.0, 0.1)
    dyadic = 2.0 ** -np.arange(10, -1, -1)
    rebuilt = layer_cake_reconstruct(superlevel_layers(smooth, dyadic), smooth)
    assert np.all(rebuilt.values >= smooth.values)
    assert np.all(rebuilt.values <= np.maximum(2 * smooth.values, dyadic[0]))
