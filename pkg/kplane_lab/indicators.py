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

"""Measurable sets of ``R^d`` entering the multilinear forms as indicator
functions.

Every set knows its volume, tests membership, samples itself uniformly, and
maps to its symmetric rearrangement: the centered ball of equal volume.
"""

import math

import numpy as np
from boltons.cacheutils import cachedproperty

from . import DimensionError, EmptySetError, ParameterError
from .fields import ExtremizerField, GridField
from .sampling import ball_volume, uniform_ball


def merge_intervals(intervals):
    """ Union of 1-D intervals as sorted disjoint ``(low, high)`` pairs. """
    merged = []
    for low, high in sorted(i for i in intervals if i[1] > i[0]):
        if merged and low <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], high))
        else:
            merged.append((low, high))
    return merged


class IndicatorSet:

    """ Base class of sets with finite volume. """

    def __init__(self, dim):
        if dim < 1:
            raise DimensionError(f"Sets live in R^d with d ≥ 1, got {dim}.")
        self.dim = dim

    def __repr__(self):
        return f"<{self.__class__.__name__} dim={self.dim} volume={self.volume:.4g}>"

    @property
    def volume(self):
        raise NotImplementedError

    @property
    def is_empty(self):
        return self.volume == 0

    def contains(self, points):
        raise NotImplementedError

    def __call__(self, points):
        """ Indicator function. """
        return self.contains(points).astype(float)

    def sample(self, size, rng):
        """ ``size`` points drawn uniformly in the set. """
        raise NotImplementedError

    def rearranged(self):
        """ Centered open ball with the same volume. """
        if self.is_empty:
            return EmptySet(self.dim)
        radius = (self.volume / ball_volume(self.dim)) ** (1 / self.dim)
        return Ball(np.zeros(self.dim), radius)

    def scaled(self, factor):
        """ Image under ``x ↦ factor · x``. """
        raise NotImplementedError

    def translated(self, vector):
        raise NotImplementedError

    def intervals(self):
        """ Disjoint intervals making up a 1-D set. """
        raise NotImplementedError

    def _check_line(self):
        if self.dim != 1:
            raise DimensionError(f"Interval decomposition of a set of R^{self.dim}.")


class EmptySet(IndicatorSet):

    volume = 0.0

    def contains(self, points):
        return np.zeros(np.shape(points)[:-1], dtype=bool)

    def sample(self, size, rng):
        raise EmptySetError("Cannot sample the empty set.")

    def scaled(self, factor):
        return self

    def translated(self, vector):
        return self

    def intervals(self):
        self._check_line()
        return []


class FullSpace(IndicatorSet):

    """ The whole space, standing for factors that do not constrain a form. """

    volume = math.inf

    def contains(self, points):
        return np.ones(np.shape(points)[:-1], dtype=bool)

    def sample(self, size, rng):
        raise ParameterError("Cannot sample the whole space uniformly.")

    def rearranged(self):
        return self

    def scaled(self, factor):
        return self

    def translated(self, vector):
        return self

    def intervals(self):
        self._check_line()
        return [(-math.inf, math.inf)]


class Ellipsoid(IndicatorSet):

    """``{x : (x - center)ᵀ shape⁻¹ (x - center) < 1}`` for a symmetric positive
    definite ``shape``."""

    def __init__(self, center, shape):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        super().__init__(len(center))
        self.center = center
        self.shape = np.atleast_2d(np.asarray(shape, dtype=float))
        if self.shape.shape != (self.dim, self.dim):
            raise DimensionError(f"Shape matrix must be {self.dim}×{self.dim}.")
        if not np.allclose(self.shape, self.shape.T):
            raise ParameterError("Shape matrix must be symmetric.")
        try:
            self.cholesky = np.linalg.cholesky(self.shape)
        except np.linalg.LinAlgError as ex:
            raise ParameterError("Shape matrix must be positive definite.") from ex

    @cachedproperty
    def volume(self):
        return ball_volume(self.dim) * float(np.prod(np.diag(self.cholesky)))

    @cachedproperty
    def _inverse_shape(self):
        return np.linalg.inv(self.shape)

    def contains(self, points):
        offsets = np.asarray(points, dtype=float) - self.center
        return np.einsum("...i,ij,...j->...", offsets, self._inverse_shape, offsets) < 1

    def sample(self, size, rng):
        return self.center + uniform_ball(self.dim, size, rng) @ self.cholesky.T

    def scaled(self, factor):
        return Ellipsoid(factor * self.center, factor ** 2 * self.shape)

    def translated(self, vector):
        return Ellipsoid(self.center + vector, self.shape)

    def linear_image(self, linear):
        """ Image under an invertible linear map. """
        linear = np.atleast_2d(linear)
        return Ellipsoid(linear @ self.center, linear @ self.shape @ linear.T)

    def intervals(self):
        self._check_line()
        half = math.sqrt(self.shape[0, 0])
        return [(self.center[0] - half, self.center[0] + half)]


class Ball(Ellipsoid):

    def __init__(self, center, radius):
        if radius <= 0:
            raise ParameterError(f"Ball radius must be positive: {radius}.")
        center = np.atleast_1d(np.asarray(center, dtype=float))
        super().__init__(center, radius ** 2 * np.eye(len(center)))
        self.radius = float(radius)

    def __repr__(self):
        return f"<{self.__class__.__name__} center={self.center} radius={self.radius:g}>"

    def contains(self, points):
        offsets = np.asarray(points, dtype=float) - self.center
        return np.sum(offsets ** 2, axis=-1) < self.radius ** 2

    def scaled(self, factor):
        return Ball(factor * self.center, abs(factor) * self.radius)

    def translated(self, vector):
        return Ball(self.center + vector, self.radius)


class BoxUnion(IndicatorSet):

    """ Finite union of open axis-aligned boxes, possibly overlapping. """

    def __init__(self, lowers, uppers):
        self.lowers = np.atleast_2d(np.asarray(lowers, dtype=float))
        self.uppers = np.atleast_2d(np.asarray(uppers, dtype=float))
        super().__init__(self.lowers.shape[1])
        if self.uppers.shape != self.lowers.shape:
            raise DimensionError("Box corners do not match.")
        if np.any(self.uppers <= self.lowers):
            raise ParameterError("Boxes must have positive side lengths.")

    @classmethod
    def box(cls, lower, upper):
        return cls([lower], [upper])

    @classmethod
    def cube(cls, center, half_width):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls([center - half_width], [center + half_width])

    def _covering(self, points):
        points = np.asarray(points, dtype=float)[..., None, :]
        return np.all((points > self.lowers) & (points < self.uppers), axis=-1)

    def contains(self, points):
        return np.any(self._covering(points), axis=-1)

    @cachedproperty
    def box_volumes(self):
        return np.prod(self.uppers - self.lowers, axis=1)

    @cachedproperty
    def volume(self):
        """Exact union volume by coordinate compression: elementary cells between
        consecutive corner coordinates are counted once if any box covers them."""
        if len(self.lowers) == 1:
            return float(self.box_volumes[0])
        axes = [
            np.unique(np.concatenate([self.lowers[:, i], self.uppers[:, i]]))
            for i in range(self.dim)
        ]
        mids = [(axis[1:] + axis[:-1]) / 2 for axis in axes]
        widths = [np.diff(axis) for axis in axes]
        centers = np.stack(np.meshgrid(*mids, indexing="ij"), axis=-1)
        cells = np.prod(np.meshgrid(*widths, indexing="ij"), axis=0)
        return float(np.sum(cells[self.contains(centers)]))

    def sample(self, size, rng):
        """Draw a box in proportion to its volume, a point in it, and keep the
        point with probability one over its covering multiplicity."""
        chunks, count = [], 0
        while count < size:
            boxes = rng.choice(
                len(self.lowers), size=size, p=self.box_volumes / self.box_volumes.sum()
            )
            points = rng.uniform(self.lowers[boxes], self.uppers[boxes])
            multiplicity = self._covering(points).sum(axis=-1)
            keep = rng.random(size) * multiplicity < 1
            chunks.append(points[keep])
            count += np.count_nonzero(keep)
        return np.concatenate(chunks)[:size]

    def scaled(self, factor):
        if factor <= 0:
            raise ParameterError(f"Scaling factor must be positive: {factor}.")
        return BoxUnion(factor * self.lowers, factor * self.uppers)

    def translated(self, vector):
        return BoxUnion(self.lowers + vector, self.uppers + vector)

    def intervals(self):
        self._check_line()
        return merge_intervals(zip(self.lowers[:, 0], self.uppers[:, 0]))


class GridMask(IndicatorSet):

    """ Union of the lattice cells flagged in a boolean mask. """

    def __init__(self, mask, h, lower=None):
        self.mask = np.array(mask, dtype=bool)
        super().__init__(self.mask.ndim)
        if h <= 0:
            raise ParameterError(f"Cell size must be positive: {h}.")
        self.h = float(h)
        self.lower = (
            -self.h * np.array(self.mask.shape) / 2
            if lower is None
            else np.asarray(lower, dtype=float)
        )

    @classmethod
    def from_grid(cls, grid, mask):
        return cls(mask, grid.h, grid.lower)

    @cachedproperty
    def volume(self):
        return np.count_nonzero(self.mask) * self.h ** self.dim

    def contains(self, points):
        index = np.floor((np.asarray(points, float) - self.lower) / self.h).astype(np.int64)
        dims = np.array(self.mask.shape)
        inside = np.all((index >= 0) & (index < dims), axis=-1)
        clipped = np.clip(index, 0, dims - 1)
        return inside & self.mask[tuple(np.moveaxis(clipped, -1, 0))]

    def sample(self, size, rng):
        cells = np.argwhere(self.mask)
        if not len(cells):
            raise EmptySetError("Cannot sample an empty mask.")
        picked = cells[rng.integers(len(cells), size=size)]
        return self.lower + self.h * (picked + rng.random((size, self.dim)))

    def scaled(self, factor):
        if factor <= 0:
            raise ParameterError(f"Scaling factor must be positive: {factor}.")
        return GridMask(self.mask, factor * self.h, factor * self.lower)

    def translated(self, vector):
        return GridMask(self.mask, self.h, self.lower + vector)

    def intervals(self):
        self._check_line()
        return merge_intervals(
            (self.lower[0] + self.h * i, self.lower[0] + self.h * (i + 1))
            for i in np.flatnonzero(self.mask)
        )


class SetUnion(IndicatorSet):

    """ Union of pairwise disjoint sets. """

    def __init__(self, parts):
        self.parts = tuple(parts)
        if not self.parts:
            raise ParameterError("Union of no set.")
        super().__init__(self.parts[0].dim)
        if any(part.dim != self.dim for part in self.parts):
            raise DimensionError("Union of sets of different dimensions.")

    @cachedproperty
    def volume(self):
        return float(sum(part.volume for part in self.parts))

    def contains(self, points):
        return np.any([part.contains(points) for part in self.parts], axis=0)

    def sample(self, size, rng):
        volumes = np.array([part.volume for part in self.parts])
        if not volumes.sum():
            raise EmptySetError("Cannot sample an empty union.")
        counts = np.bincount(
            rng.choice(len(self.parts), size=size, p=volumes / volumes.sum()),
            minlength=len(self.parts),
        )
        points = np.concatenate(
            [part.sample(c, rng) for part, c in zip(self.parts, counts) if c]
        )
        return points[rng.permutation(size)]

    def scaled(self, factor):
        return SetUnion(part.scaled(factor) for part in self.parts)

    def translated(self, vector):
        return SetUnion(part.translated(vector) for part in self.parts)

    def intervals(self):
        self._check_line()
        return merge_intervals(i for part in self.parts for i in part.intervals())


class HyperplaneCut(IndicatorSet):

    """ A set with the hyperplane ``{x : ⟨normal, x⟩ = offset}`` removed. """

    def __init__(self, base, normal, offset=0.0):
        super().__init__(base.dim)
        self.base = base
        self.normal = np.atleast_1d(np.asarray(normal, dtype=float))
        self.offset = float(offset)

    @property
    def volume(self):
        return self.base.volume

    def contains(self, points):
        on_plane = np.asarray(points, dtype=float) @ self.normal == self.offset
        return self.base.contains(points) & ~on_plane

    def sample(self, size, rng):
        return self.base.sample(size, rng)

    def scaled(self, factor):
        return HyperplaneCut(self.base.scaled(factor), self.normal, factor * self.offset)

    def translated(self, vector):
        return HyperplaneCut(
            self.base.translated(vector), self.normal, self.offset + self.normal @ vector
        )

    def intervals(self):
        return self.base.intervals()


def superlevel_set(f, s):
    """The superlevel set ``{f > s}`` of a field.

    Extremizers give ellipsoids, grids give cell masks.
    """
    if s <= 0:
        raise ParameterError(f"Superlevel {s} may have infinite measure.")
    if isinstance(f, GridField):
        mask = f.values > s
        return GridMask.from_grid(f, mask) if mask.any() else EmptySet(f.n)
    if isinstance(f, ExtremizerField):
        if s >= f.c:
            return EmptySet(f.n)
        # 1 + |φ(x)|² < (s/c)^(-2/(k+1))
        reach = (s / f.c) ** (-2 / (f.k + 1)) - 1
        inverse = np.linalg.inv(f.phi.linear)
        return Ellipsoid(f.center, reach * inverse @ inverse.T)
    raise ParameterError(f"Discretize {f!r} on a grid to take its superlevel sets.")
