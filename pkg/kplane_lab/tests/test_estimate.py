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

from .. import NonIntegrableError, ParameterError
from ..estimate import Estimate, MonteCarloConfig


def uniform_draw(rng, size):
    return rng.random(size)


def test_from_samples():
    estimate = Estimate.from_samples([1.0, 2.0, 3.0, 4.0], seed=3)
    assert estimate.value == 2.5
    assert estimate.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert estimate.samples == 4
    assert estimate.seed == 3
    assert Estimate.from_samples([5.0]).stderr == 0.0
    assert Estimate.from_samples([]) == Estimate(0.0, 0.0, 0, None)


def test_from_non_finite_samples():
    with pytest.raises(NonIntegrableError):
        Estimate.from_samples([1.0, math.inf])


def test_power():
    cube = Estimate(8.0, 0.3, 100)
    root = cube.power(1 / 3)
    assert root.value == pytest.approx(2.0)
    assert root.stderr == pytest.approx(2.0 / 3 * 0.3 / 8.0)
    assert root.samples == 100
    assert Estimate(0.0, 0.0).power(0.5) == Estimate(0.0, 0.0)


def test_scaled():
    assert Estimate(2.0, 0.1).scaled(-3) == Estimate(-6.0, pytest.approx(0.3))


def test_ratio_and_difference():
    quotient = Estimate(3.0, 0.3, 10).ratio(Estimate(2.0, 0.2, 20))
    assert quotient.value == 1.5
    assert quotient.stderr == pytest.approx(1.5 * math.hypot(0.1, 0.1))
    assert quotient.samples == 10
    gap = Estimate(3.0, 0.3).difference(Estimate(2.0, 0.4))
    assert gap.value == 1.0
    assert gap.stderr == pytest.approx(0.5)
    with pytest.raises(ZeroDivisionError):
        Estimate(1.0).ratio(Estimate(0.0))


def test_agrees_with():
    estimate = Estimate(1.0, 0.1)
    assert estimate.agrees_with(1.25)
    assert not estimate.agrees_with(1.35)
    assert estimate.agrees_with(1.35, atol=0.1)
    assert estimate.agrees_with(1.35, sigmas=4)
    assert estimate.agrees_with(Estimate(1.5, 0.2))
    assert Estimate(0.0).agrees_with(0.0)


@pytest.mark.parametrize(
    "kwargs", [{"samples": 0}, {"samples": -5}, {"workers": 0}]
)
def test_invalid_config(kwargs):
    with pytest.raises(ParameterError):
        MonteCarloConfig(**kwargs)


def test_chunk_sizes():
    assert MonteCarloConfig(samples=10, chunk_size=4).chunk_sizes() == [4, 4, 2]
    assert MonteCarloConfig(samples=8, chunk_size=4).chunk_sizes() == [4, 4]
    assert MonteCarloConfig(samples=3, chunk_size=4).chunk_sizes() == [3]


def test_child_streams():
    mc = MonteCarloConfig(samples=100, seed=5, stream=2)
    assert mc.stream == (2,)
    child = mc.child(1)
    assert child.stream == (2, 1)
    assert child.samples == 100
    assert mc.child(1, samples=1e3).samples == 1000
    assert not np.array_equal(child.map(uniform_draw), mc.child(0).map(uniform_draw))
    assert np.array_equal(child.map(uniform_draw), mc.child(1).map(uniform_draw))


@pytest.mark.parametrize("workers", [2, 3, 8])
def test_map_ignores_workers(workers):
    mc = MonteCarloConfig(samples=10_000, seed=9, chunk_size=512)

    def draw(rng, size):
        return rng.standard_normal(size), rng.random((size, 2))

    first, second = mc.map(draw)
    threaded_first, threaded_second = MonteCarloConfig(
        samples=10_000, seed=9, chunk_size=512, workers=workers
    ).map(draw)
    assert first.shape == (10_000,)
    assert second.shape == (10_000, 2)
    assert np.array_equal(first, threaded_first)
    assert np.array_equal(second, threaded_second)


def test_estimate_mean():
    mc = MonteCarloConfig(samples=50_000, seed=1)
    estimate = mc.estimate(uniform_draw)
    assert estimate.samples == 50_000
    assert estimate.seed == 1
    assert estimate.stderr == pytest.approx(math.sqrt(1 / 12 / 50_000), rel=0.02)
    assert estimate.agrees_with(0.5)


def test_seed_changes_draws():
    assert not np.array_equal(
        MonteCarloConfig(samples=10, seed=1).map(uniform_draw),
        MonteCarloConfig(samples=10, seed=2).map(uniform_draw),
    )
