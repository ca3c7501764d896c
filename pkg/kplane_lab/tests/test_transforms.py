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

from .. import BoundaryError, DimensionError, NonIntegrableError, ParameterError
from ..estimate import MonteCarloConfig, QuadratureConfig
from ..fields import AffineMap, AnalyticField, apply_J, extremizer_field, gaussian_field
from ..geometry import AffinePlane, OrthonormalFrame
from ..sampling import uniform_sphere
from ..transforms import (
    HemisphereFunction,
    HemispherePoint,
    MatrixPlane,
    apply_R,
    apply_R_sharp,
    elliptic_lift,
    elliptic_norm_check,
    elliptic_transform,
    integrate_planes,
    kplane_transform,
    lq_sharp_norm,
    lq_transform_norm,
    sharp_transform,
)


def line(angle, offset):
    direction = np.array([math.cos(angle), math.sin(angle)])
    normal = np.array([-math.sin(angle), math.cos(angle)])
    return AffinePlane(OrthonormalFrame(direction, normal), offset * normal)


@pytest.mark.parametrize("angle", [0.0, 0.4, math.pi / 2, 2.5])
@pytest.mark.parametrize("offset", [0.0, 0.5, -1.7])
def test_xray_of_gaussian(angle, offset):
    value = kplane_transform(gaussian_field(2), line(angle, offset))
    assert value.value == pytest.approx(math.sqrt(math.pi) * math.exp(-(offset ** 2)))
    assert value.stderr < 1e-6


@pytest.mark.parametrize("offset", [0.0, 0.5, 3.0])
def test_xray_of_extremizer(offset):
    value = kplane_transform(extremizer_field(2, 1), line(0.3, offset))
    exact = math.pi / math.sqrt(1 + offset ** 2)
    assert value.agrees_with(exact)
    assert value.value == pytest.approx(exact, rel=1e-9)
    assert value.stderr < 1e-8


def test_truncation_enters_the_stderr():
    quad = QuadratureConfig(tolerance=1e-3)
    value = kplane_transform(gaussian_field(2), line(0.0, 0.0), quad)
    exact = math.sqrt(math.pi)
    assert exact - value.value > 1e-4
    assert value.agrees_with(exact)


def test_plane_transform_of_extremizer():
    plane = AffinePlane.from_coordinates(OrthonormalFrame.canonical(3, 2), [0.8])
    value = kplane_transform(extremizer_field(3, 2), plane)
    assert value.agrees_with(2 * math.pi / math.sqrt(1.64))
    assert value.value == pytest.approx(2 * math.pi / math.sqrt(1.64), rel=1e-9)
    gaussian = kplane_transform(gaussian_field(3), plane)
    assert gaussian.value == pytest.approx(math.pi * math.exp(-0.64), rel=1e-6)


def test_transform_errors():
    with pytest.raises(DimensionError):
        kplane_transform(gaussian_field(3), line(0.0, 0.0))
    slow = AnalyticField(2, lambda x: (1 + np.sum(x ** 2, axis=-1)) ** -0.5, decay=1)
    with pytest.raises(NonIntegrableError):
        kplane_transform(slow, line(0.0, 0.0))


def test_integrate_planes_batches():
    f = gaussian_field(2)
    origins = np.array([[0.0, t] for t in np.linspace(-2, 2, 9)])
    bases = np.broadcast_to([[1.0, 0.0]], (9, 1, 2))
    values = integrate_planes(f, origins, bases)
    np.testing.assert_allclose(
        values, math.sqrt(math.pi) * np.exp(-origins[:, 1] ** 2), rtol=1e-8
    )


def test_lq_transform_norm_of_extremizer(extremizer, mc):
    norm = lq_transform_norm(extremizer, 1, mc)
    assert norm.agrees_with((2 * math.pi ** 3) ** (1 / 3), atol=0.01)
    assert norm.seed == mc.seed


def test_lq_transform_norm_of_gaussian(mc):
    norm = lq_transform_norm(gaussian_field(2), 1, mc)
    assert norm.agrees_with((math.pi ** 2 / math.sqrt(3)) ** (1 / 3), atol=0.01)


def test_lq_transform_norm_is_reproducible(extremizer):
    estimates = {
        workers: lq_transform_norm(
            extremizer, 1, MonteCarloConfig(samples=10_000, seed=3, workers=workers)
        )
        for workers in (1, 3)
    }
    assert estimates[1] == estimates[3]


def test_sharp_transform_of_gaussian():
    value = sharp_transform(gaussian_field(2), MatrixPlane([[0.5]], [0.3]))
    assert value.value == pytest.approx(
        math.sqrt(math.pi / 1.25) * math.exp(-0.09 / 1.25), rel=1e-8
    )


def test_matrix_plane():
    mp = MatrixPlane([[0.5, 1.0], [2.0, 3.0]], [4.0, 5.0])
    assert (mp.n, mp.k) == (4, 2)
    np.testing.assert_array_equal(mp.origin, [0, 0, 4, 5])
    np.testing.assert_array_equal(mp.basis, [[1, 0, 0.5, 1], [0, 1, 2, 3]])
    swapped = mp.swapped()
    np.testing.assert_array_equal(swapped.A, [[4, 5], [2, 3]])
    np.testing.assert_array_equal(swapped.b, [0.5, 1.0])
    restored = MatrixPlane.from_vector(mp.as_vector(), 4, 2)
    np.testing.assert_array_equal(restored.A, mp.A)
    np.testing.assert_array_equal(restored.b, mp.b)
    with pytest.raises(DimensionError):
        MatrixPlane([[1.0, 2.0]], [1.0])


def test_apply_R_sharp():
    f = gaussian_field(2, center=[0.2, -0.1])
    mp = MatrixPlane([[0.7]], [-0.4])
    G = apply_R_sharp(lambda plane: sharp_transform(f, plane).value)
    assert G(mp) == sharp_transform(f, MatrixPlane([[-0.4]], [0.7])).value


@pytest.mark.parametrize("field", ["gaussian", "extremizer"])
def test_sharp_constant(field, test_fields, mc):
    """ Matrix-parameterized and Euclidean norms differ by π^(1/3) on lines. """
    f = test_fields[field]
    sharp = lq_sharp_norm(f, 1, mc.child(0))
    euclidean = lq_transform_norm(f, 1, mc.child(1))
    assert sharp.ratio(euclidean).agrees_with(math.pi ** (1 / 3), atol=0.01)


def test_hemisphere_point():
    point = HemispherePoint.from_euclidean([3.0, 4.0])
    assert point.n == 2
    np.testing.assert_allclose(point.theta, np.array([3, 4, 1]) / math.sqrt(26))
    np.testing.assert_allclose(point.to_euclidean(), [3.0, 4.0])
    with pytest.raises(BoundaryError):
        HemispherePoint([0.0, 0.0, -1.0])
    with pytest.raises(BoundaryError):
        HemispherePoint([1.0, 0.0, 0.0])
    with pytest.raises(ParameterError):
        HemispherePoint([0.0, 0.0, 2.0])
    with pytest.raises(DimensionError):
        HemispherePoint([1.0])


def test_hemisphere_function_boundary():
    F = HemisphereFunction(2, lambda thetas: 1 + thetas[..., 0])
    assert F(HemispherePoint([0.6, 0.0, 0.8])) == pytest.approx(1.6)
    with pytest.raises(BoundaryError):
        F(np.array([[0.6, 0.0, -0.8]]))
    np.testing.assert_allclose(
        F.values(np.array([[0.6, 0.0, -0.8], [1.0, 0.0, 0.0]])), [0.4, 0.0]
    )


def test_elliptic_lift_of_standard_extremizer(rng):
    thetas = uniform_sphere(3, 1000, rng)
    thetas[:, -1] = np.abs(thetas[:, -1])
    lifted = elliptic_lift(extremizer_field(2, 1), 1)
    np.testing.assert_allclose(lifted(thetas), 1.0, rtol=1e-12)
    # The generic lift of an opaque copy agrees with the closed form.
    opaque = AnalyticField(2, extremizer_field(2, 1).evaluator, decay=2)
    np.testing.assert_allclose(elliptic_lift(opaque, 1)(thetas), 1.0, rtol=1e-12)


def test_elliptic_lift_of_extremizers(rng):
    f = extremizer_field(3, 1, AffineMap.random(3, rng), c=2.0)
    opaque = AnalyticField(3, f.evaluator, decay=2)
    thetas = uniform_sphere(4, 200, rng)
    thetas[:, -1] = np.abs(thetas[:, -1]) + 0.05
    thetas /= np.linalg.norm(thetas, axis=-1, keepdims=True)
    np.testing.assert_allclose(
        elliptic_lift(f, 1)(thetas), elliptic_lift(opaque, 1)(thetas), rtol=1e-10
    )


@pytest.mark.parametrize(
    "f",
    [
        gaussian_field(2, center=[0.3, 0.2]),
        extremizer_field(2, 1, AffineMap([[1.2, 0.3], [0.0, 0.8]], [0.4, -0.2])),
    ],
)
def test_sharp_J_and_R_intertwine(f, rng):
    """ ``T♯(Jf) = R♯(T♯f)`` on random matrix planes. """
    image = apply_J(f, 1)
    G = apply_R_sharp(lambda plane: sharp_transform(f, plane))
    for a, b in rng.normal(scale=0.7, size=(20, 2)):
        mp = MatrixPlane([[a]], [b])
        lhs, rhs = sharp_transform(image, mp), G(mp)
        assert lhs.value == pytest.approx(rhs.value, abs=1e-6)
        assert lhs.stderr < 1e-6


@pytest.mark.parametrize(
    "f",
    [
        gaussian_field(3, center=[0.3, -0.2, 0.1]),
        extremizer_field(3, 1, AffineMap.shift([0.5, 0.0, -0.5])),
    ],
)
def test_J_and_R_intertwine(f, rng):
    """ Lifting ``Jf`` gives ``R`` applied to the lift of ``f``. """
    thetas = uniform_sphere(4, 500, rng)
    thetas = thetas[(thetas[:, -1] > 0.05) & (np.abs(thetas[:, 0]) > 0.05)]
    lifted = elliptic_lift(apply_J(f, 1), 1)
    rotated = apply_R(elliptic_lift(f, 1))
    np.testing.assert_allclose(lifted(thetas), rotated(thetas), rtol=1e-10)


def test_elliptic_transform_of_constant():
    F = HemisphereFunction(2, lambda thetas: np.ones(thetas.shape[:-1]))
    value = elliptic_transform(F, OrthonormalFrame.canonical(3, 2))
    assert value.value == pytest.approx(1.0)
    assert value.stderr == pytest.approx(0.0)
    with pytest.raises(DimensionError):
        elliptic_transform(F, OrthonormalFrame.canonical(4, 2))


def test_elliptic_norm_check(extremizer, mc):
    check = elliptic_norm_check(extremizer, 1, mc)
    assert check["lifted_gap"].agrees_with(0.0, atol=0.01)
    assert check["lifted_norm"].agrees_with((2 * math.pi) ** (2 / 3), atol=0.01)
    assert check["constant"].value > 0


@pytest.mark.slow
def test_elliptic_constant_is_field_independent(test_fields, mc):
    constants = [
        elliptic_norm_check(test_fields[name], 1, mc)["constant"]
        for name in ("gaussian", "extremizer")
    ]
    assert constants[0].agrees_with(constants[1], atol=0.01)
