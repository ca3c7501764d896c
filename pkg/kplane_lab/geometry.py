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

""" Grassmannians, affine k-planes, simplex volumes and Drury coefficients. """

import math

import numpy as np
from boltons.cacheutils import cachedproperty
from scipy.linalg import null_space

from . import (
    SINGULARITY_TOLERANCE,
    DimensionError,
    ParameterError,
    SingularityError,
    check_dimensions,
)
from .sampling import ball_volume, heavy_tail_density, heavy_tail_sample, uniform_ball

# Orthonormality is checked to this absolute precision.
FRAME_TOLERANCE = 1e-12


class OrthonormalFrame:

    """A k-dimensional linear subspace of ``R^n`` with an orthonormal basis of it
    and of its orthogonal complement."""

    def __init__(self, basis, complement_basis):
        self.basis = np.atleast_2d(np.asarray(basis, dtype=float))
        self.complement_basis = np.asarray(complement_basis, dtype=float).reshape(
            -1, self.basis.shape[1]
        )
        self.k, self.n = self.basis.shape
        if self.k + len(self.complement_basis) != self.n:
            raise DimensionError(
                f"{self.k} + {len(self.complement_basis)} vectors do not span "
                f"R^{self.n}."
            )
        gram = self.matrix @ self.matrix.T
        if not np.allclose(gram, np.eye(self.n), rtol=0, atol=1e3 * FRAME_TOLERANCE):
            raise ParameterError("Frame vectors are not orthonormal.")

    def __repr__(self):
        return f"<{self.__class__.__name__} k={self.k} n={self.n}>"

    @cachedproperty
    def matrix(self):
        """ Orthogonal matrix whose rows are the basis then the complement. """
        return np.vstack([self.basis, self.complement_basis])

    @classmethod
    def canonical(cls, n, k):
        """ Span of the first ``k`` coordinate axes. """
        check_dimensions(n, k)
        identity = np.eye(n)
        return cls(identity[:k], identity[k:])

    def rotated(self, rotation):
        """ Image of the subspace under the orthogonal matrix ``rotation``. """
        return self.__class__(
            self.basis @ rotation.T, self.complement_basis @ rotation.T
        )


class AffinePlane:

    """ The affine k-plane ``θ + y`` with ``y`` in the orthogonal complement of ``θ``. """

    def __init__(self, frame, offset=None):
        self.frame = frame
        self.offset = (
            np.zeros(frame.n) if offset is None else np.asarray(offset, dtype=float)
        )
        if self.offset.shape != (frame.n,):
            raise DimensionError(f"Offset must be a vector of R^{frame.n}.")
        leak = np.abs(frame.basis @ self.offset).max(initial=0)
        if leak > FRAME_TOLERANCE * max(1.0, np.linalg.norm(self.offset)):
            raise ParameterError(f"Offset is not orthogonal to the plane ({leak:.2e}).")

    def __repr__(self):
        return f"<{self.__class__.__name__} k={self.frame.k} n={self.frame.n}>"

    @classmethod
    def from_coordinates(cls, frame, coordinates):
        """ Plane whose offset has the given coordinates in the complement basis. """
        return cls(frame, np.asarray(coordinates, dtype=float) @ frame.complement_basis)

    def points(self, coordinates):
        """ Points of the plane at the given frame coordinates. """
        return self.offset + np.asarray(coordinates, dtype=float) @ self.frame.basis


class Simplex:

    """ A simplex given by its vertices, one per row. """

    def __init__(self, vertices):
        self.vertices = np.atleast_2d(np.asarray(vertices, dtype=float))

    def __repr__(self):
        return f"<{self.__class__.__name__} {len(self.vertices)} vertices>"

    @property
    def dimension(self):
        return len(self.vertices) - 1

    @property
    def ambient_dimension(self):
        return self.vertices.shape[1]

    @property
    def edges(self):
        return self.vertices[1:] - self.vertices[0]


class CoefficientMatrix:

    """Barycentric coefficients ``b[i][j]`` of the points ``x'_i`` with respect to
    the anchor simplex ``x'_0, ..., x'_k``.

    Rows ``0..k`` are the identity.
    """

    def __init__(self, entries, base_points=None):
        self.entries = np.asarray(entries, dtype=float)
        if self.entries.ndim != 2 or self.entries.shape[0] <= self.entries.shape[1]:
            raise DimensionError(
                f"Expected (n+1)×(k+1) coefficients, got {self.entries.shape}."
            )
        self.base_points = None if base_points is None else np.asarray(base_points)

    def __repr__(self):
        return f"<{self.__class__.__name__} n={self.n} k={self.k}>"

    def __getitem__(self, index):
        return self.entries[index]

    @property
    def n(self):
        return self.entries.shape[0] - 1

    @property
    def k(self):
        return self.entries.shape[1] - 1

    @classmethod
    def from_rows(cls, rows):
        """Complete the trailing rows ``k+1..n`` with the identity block.

        Allows to describe the coefficients of hand-made test configurations.
        """
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        k = rows.shape[1] - 1
        return cls(np.vstack([np.eye(k + 1), rows]))

    def interpolate(self, values):
        """ ``Σ_j b[i][j] v_j`` for every row, with ``values`` of shape (k+1, m). """
        return self.entries @ np.asarray(values, dtype=float)


def sample_frames(n, k, size, rng):
    """Draw ``size`` Haar-distributed frames.

    Returns the bases with shape ``(size, k, n)`` and the complement bases with
    shape ``(size, n - k, n)``. Frames are the columns of the Q factor of a
    Gaussian matrix, with the signs of the R diagonal moved into Q so that the
    law is exactly rotation-invariant.
    """
    check_dimensions(n, k)
    gaussian = rng.standard_normal((size, n, n))
    q_factor, r_factor = np.linalg.qr(gaussian)
    signs = np.where(np.diagonal(r_factor, axis1=-2, axis2=-1) < 0, -1.0, 1.0)
    rows = np.swapaxes(q_factor * signs[:, None, :], -1, -2)
    return rows[:, :k], rows[:, k:]


def sample_grassmannian(n, k, rng):
    """ Haar-distributed k-plane through the origin of ``R^n``. """
    basis, complement = sample_frames(n, k, 1, rng)
    return OrthonormalFrame(basis[0], complement[0])


def sample_affine_planes(n, k, size, rng, offset_radius=None, center=None, scale=1.0):
    """Draw affine k-planes with their importance weights.

    With an ``offset_radius``, the offset is uniform in that ball of the
    orthogonal complement and weighted by the ball volume. Without it, the
    offset follows the heavy-tailed law around the projection of ``center``,
    dilated by ``scale``, and is weighted by the inverse density.

    Returns the bases, the offsets with shape ``(size, n)`` and the weights.
    """
    basis, complement = sample_frames(n, k, size, rng)
    dim = n - k
    if offset_radius is not None:
        if offset_radius <= 0:
            raise ParameterError(f"Offset radius must be positive: {offset_radius}.")
        coords = uniform_ball(dim, size, rng) * offset_radius
        weights = np.full(size, ball_volume(dim, offset_radius))
    else:
        standard = heavy_tail_sample(dim, size, rng)
        weights = scale ** dim / heavy_tail_density(standard)
        coords = scale * standard
        if center is not None:
            coords = coords + np.einsum("sjn,n->sj", complement, center)
    offsets = np.einsum("sj,sjn->sn", coords, complement)
    return basis, offsets, weights


def sample_affine_plane(n, k, offset_radius, rng):
    """Haar frame and uniform offset in the ball of radius ``offset_radius``.

    Returns the plane and its importance weight.
    """
    if offset_radius is None or offset_radius <= 0:
        raise ParameterError(f"Offset radius must be positive: {offset_radius}.")
    basis, complement = sample_frames(n, k, 1, rng)
    frame = OrthonormalFrame(basis[0], complement[0])
    coords = uniform_ball(n - k, 1, rng)[0] * offset_radius
    return (
        AffinePlane.from_coordinates(frame, coords),
        ball_volume(n - k, offset_radius),
    )


def simplex_volume(simplex, signed=False):
    """Volume of a simplex in its own dimension.

    The signed variant is the determinant of the edge matrix divided by the
    factorial, and requires the ambient dimension to equal the simplex's one.
    Lower-dimensional simplices use the Gram determinant. Degenerate simplices
    have volume 0.
    """
    if not isinstance(simplex, Simplex):
        simplex = Simplex(simplex)
    dim, ambient = simplex.dimension, simplex.ambient_dimension
    factorial = math.factorial(dim)
    if signed:
        if dim != ambient:
            raise DimensionError(
                f"Signed volume of a {dim}-simplex in R^{ambient} is undefined."
            )
        return float(np.linalg.det(simplex.edges)) / factorial
    if dim > ambient:
        return 0.0
    if dim == ambient:
        return abs(float(np.linalg.det(simplex.edges))) / factorial
    gram = simplex.edges @ simplex.edges.T
    return math.sqrt(max(float(np.linalg.det(gram)), 0.0)) / factorial


def _anchor_system(anchors):
    """ Matrix whose columns are the anchors topped by a row of ones. """
    anchors = np.asarray(anchors, dtype=float)
    k = anchors.shape[-1]
    system = np.ones(anchors.shape[:-2] + (k + 1, k + 1))
    system[..., :k, :] = np.swapaxes(anchors, -1, -2)
    return system


def barycentric_coordinates(anchors, points):
    """Signed barycentric coordinates by Cramer's rule.

    ``anchors`` has shape ``(..., k+1, k)`` and ``points`` ``(..., r, k)``. The
    result has shape ``(..., r, k+1)``: each coefficient is the signed volume of
    the simplex where the point replaces the anchor, over the anchor volume.
    Coordinates of points outside the anchor simplex are negative.
    """
    system = _anchor_system(anchors)
    points = np.asarray(points, dtype=float)
    rhs = np.concatenate([points, np.ones(points.shape[:-1] + (1,))], axis=-1)
    determinant = np.linalg.det(system)
    replaced = np.repeat(system[..., None, :, :], points.shape[-2], axis=-3)
    coefficients = np.empty(rhs.shape)
    for j in range(system.shape[-1]):
        column = replaced.copy()
        column[..., :, j] = rhs
        coefficients[..., j] = np.linalg.det(column) / determinant[..., None]
    return coefficients


def anchor_volumes(anchors):
    """ Signed k-volumes of batched anchor simplices of shape (..., k+1, k). """
    anchors = np.asarray(anchors, dtype=float)
    k = anchors.shape[-1]
    return np.linalg.det(_anchor_system(anchors)) / math.factorial(k)


def drury_coefficients(anchors, extras):
    """Coefficient matrix of the extra points with respect to the anchor simplex.

    Raises ``SingularityError`` if the anchors are degenerate, that is when their
    k-volume is below ``1e-12 · scale^k`` with ``scale`` their diameter.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    extras = np.asarray(extras, dtype=float).reshape(-1, anchors.shape[1])
    k = anchors.shape[1]
    if anchors.shape[0] != k + 1:
        raise DimensionError(f"Expected {k + 1} anchors in R^{k}.")

    scale = max(np.ptp(anchors, axis=0).max(), 1e-300)
    volume = anchor_volumes(anchors)
    if abs(volume) < SINGULARITY_TOLERANCE * scale ** k:
        raise SingularityError(f"Degenerate anchor simplex of volume {volume:.3e}.")

    rows = barycentric_coordinates(anchors, extras) if len(extras) else np.empty((0, k + 1))
    return CoefficientMatrix(
        np.vstack([np.eye(k + 1), rows]), base_points=np.vstack([anchors, extras])
    )


def regular_simplex_directions(k):
    """Unit vertices of a regular simplex of ``R^k`` centered at the origin.

    Omitting any vertex leaves a sub-simplex with the origin of the same volume,
    so the origin has all its barycentric coordinates equal to ``1/(k+1)``.
    """
    if k < 1:
        raise DimensionError(f"Requires k ≥ 1, got {k}.")
    centered = np.eye(k + 1) - 1 / (k + 1)
    vertices = centered @ null_space(np.ones((1, k + 1)))
    vertices /= np.linalg.norm(vertices, axis=1, keepdims=True)
    if vertices[0, 0] < 0:
        vertices = -vertices
    return vertices
