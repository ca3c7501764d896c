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

""" Random and deterministic point sets used by all estimators. """

import math

import numpy as np
from scipy.special import gammaln
from scipy.stats import norm, qmc


def ball_volume(dim, radius=1.0):
    """ Volume of the ``dim``-dimensional ball of the given radius. """
    return math.exp(
        dim / 2 * math.log(math.pi) - gammaln(dim / 2 + 1)
    ) * radius ** dim


def sphere_area(dim):
    """ Surface area of the unit sphere of ``R^dim``. """
    return 2 * math.exp(dim / 2 * math.log(math.pi) - gammaln(dim / 2))


def uniform_sphere(dim, size, rng):
    """ ``size`` uniform points on the unit sphere of ``R^dim``. """
    points = rng.standard_normal((size, dim))
    return points / np.linalg.norm(points, axis=-1, keepdims=True)


def uniform_ball(dim, size, rng):
    """ ``size`` uniform points in the unit ball of ``R^dim``. """
    radii = rng.random(size) ** (1 / dim)
    return uniform_sphere(dim, size, rng) * radii[:, None]


def heavy_tail_normalization(dim):
    return dim * math.exp(gammaln(dim / 2)) / (2 * math.pi ** (dim / 2))


def heavy_tail_density(points):
    """Density ``q(x) ∝ (1 + |x|)^(-dim-1)`` of the default importance law.

    It matches the decay of the extremizers and has heavier tails than every
    field with a finite norm, which keeps importance weights bounded.
    """
    points = np.asarray(points, dtype=float)
    dim = points.shape[-1]
    radii = np.linalg.norm(points, axis=-1)
    return heavy_tail_normalization(dim) * (1 + radii) ** (-dim - 1)


def heavy_tail_sample(dim, size, rng):
    """Draw from ``heavy_tail_density``.

    The radius ``r`` satisfies ``r / (1 + r) = U^(1/dim)`` for a uniform ``U``.
    """
    ratio = rng.random(size) ** (1 / dim)
    radii = ratio / (1 - ratio)
    return uniform_sphere(dim, size, rng) * radii[:, None]


def sphere_nodes(dim, count, rng=None):
    """Equal-weight quadrature directions on the unit sphere of ``R^dim``.

    Two antipodes in dimension 1, ``count`` equispaced angles on the circle,
    scrambled Sobol points pushed to the sphere above. Without ``rng`` the
    layout is fixed: a half-step phase on the circle, seed 0 for Sobol.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        phase = 0.5 if rng is None else rng.random()
        angles = 2 * math.pi * (np.arange(count) + phase) / count
        return np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    sobol = qmc.Sobol(d=dim, scramble=True, seed=0 if rng is None else rng)
    cube = sobol.random_base2(max(1, math.ceil(math.log2(count))))
    points = norm.ppf(np.clip(cube, 1e-12, 1 - 1e-12))
    return points / np.linalg.norm(points, axis=-1, keepdims=True)
