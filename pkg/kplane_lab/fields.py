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

""" Fields on ``R^n``: analytic and grid representations, norms, superlevel sets,
rearrangements and the symmetries of the endpoint inequality. """

import math

import numpy as np
from boltons.cacheutils import cachedproperty
from scipy.linalg import null_space

from . import (
    TRUNCATION_TOLERANCE,
    ConsistencyError,
    DimensionError,
    InfiniteMeasureError,
    NonIntegrableError,
    ParameterError,
    SingularityError,
    check_dimensions,
    logger,
)
from .estimate import Estimate, MonteCarloConfig
from .sampling import ball_volume, heavy_tail_density, heavy_tail_sample


class AffineMap:

    """ Invertible affine endomorphism ``x ↦ Lx + t`` of ``R^n``. """

    def __init__(self, linear, translation=None):
        self.linear = np.atleast_2d(np.asarray(linear, dtype=float))
        n = self.linear.shape[0]
        if self.linear.shape != (n, n):
            raise DimensionError(f"Linear part must be square: {self.linear.shape}.")
        self.translation = (
            np.zeros(n) if translation is None else np.asarray(translation, dtype=float)
        )
        if self.translation.shape != (n,):
            raise DimensionError(f"Translation must be a vector of R^{n}.")
        if not self.jacobian > 0 or not np.isfinite(self.jacobian):
            raise SingularityError("Affine map is not invertible.")

    def __repr__(self):
        return f"<{self.__class__.__name__} n={self.n} jacobian={self.jacobian:.4g}>"

    def __call__(self, points):
        return np.asarray(points, dtype=float) @ self.linear.T + self.translation

    def __matmul__(self, other):
        return self.compose(other)

    @property
    def n(self):
        return len(self.translation)

    @cachedproperty
    def jacobian(self):
        """ Absolute value of the determinant of the linear part. """
        return abs(float(np.linalg.det(self.linear)))

    @cachedproperty
    def singular_values(self):
        return np.linalg.svd(self.linear, compute_uv=False)

    def compose(self, other):
        """ The map ``x ↦ self(other(x))``. """
        return AffineMap(
            self.linear @ other.linear, self.linear @ other.translation + self.translation
        )

    def inverse(self):
        inverse = np.linalg.inv(self.linear)
        return AffineMap(inverse, -inverse @ self.translation)

    def allclose(self, other, atol=1e-9):
        return np.allclose(self.linear, other.linear, rtol=0, atol=atol) and np.allclose(
            self.translation, other.translation, rtol=0, atol=atol
        )

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @classmethod
    def shift(cls, vector):
        """ The translation ``x ↦ x + vector``. """
        vector = np.asarray(vector, dtype=float)
        return cls(np.eye(len(vector)), vector)

    @classmethod
    def scaling(cls, n, factor):
        return cls(factor * np.eye(n))

    @classmethod
    def random(cls, n, rng, spread=0.5):
        """Random well-conditioned map: a rotation times a diagonal with singular
        values in ``[e^-spread, e^spread]``, then a standard normal translation."""
        rotation, _ = np.linalg.qr(rng.standard_normal((n, n)))
        stretch = np.exp(rng.uniform(-spread, spread, n))
        return cls(rotation * stretch, rng.standard_normal(n))


class Field:

    """Nonnegative function on ``R^n``.

    Subclasses expose the metadata used by quadratures: ``center`` locates the
    mass, ``scale`` its width, ``decay`` the exponent ``d`` of a bound
    ``f(x) ≤ bound · (1 + |x|)^-d`` and ``support_radius`` a ball centered at the
    origin containing the support.
    """

    kind = None

    decay = math.inf
    support_radius = math.inf
    scale = 1.0
    bound = 1.0

    def __init__(self, n):
        if n < 1:
            raise DimensionError(f"Fields live in R^n with n ≥ 1, got {n}.")
        self.n = n

    def __repr__(self):
        return f"<{self.__class__.__name__} n={self.n}>"

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != self.n:
            raise DimensionError(
                f"Points of R^{points.shape[-1]} given to a field on R^{self.n}."
            )
        return self.evaluate(points)

    def evaluate(self, points):
        raise NotImplementedError

    @property
    def center(self):
        return np.zeros(self.n)

    @property
    def compact(self):
        return math.isfinite(self.support_radius)

    @property
    def is_zero(self):
        return self.bound == 0

    def truncation_radius(self, tolerance=TRUNCATION_TOLERANCE):
        """Radius of a ball centered at the origin outside of which the field is
        below ``tolerance`` times its peak bound.

        Infinite for polynomial decay: these tails are integrated in full.
        """
        if self.compact:
            return self.support_radius
        if math.isfinite(self.decay):
            return math.inf
        # Gaussian-type tails.
        offset = float(np.linalg.norm(self.center))
        return offset + self.scale * math.sqrt(math.log(1 / tolerance))

    def scaled(self, factor):
        """ The field ``factor · f``. """
        raise NotImplementedError


class ZeroField(Field):

    kind = "analytic"
    bound = 0.0

    def evaluate(self, points):
        return np.zeros(points.shape[:-1])

    def scaled(self, factor):
        return self


class AnalyticField(Field):

    """ Field with a closed-form evaluator. """

    kind = "analytic"

    def __init__(
        self,
        n,
        evaluator,
        decay,
        bound=1.0,
        center=None,
        scale=1.0,
        support_radius=math.inf,
        label="analytic",
    ):
        super().__init__(n)
        self.evaluator = evaluator
        self.decay = decay
        self.bound = bound
        self._center = np.zeros(n) if center is None else np.asarray(center, float)
        self.scale = scale
        self.support_radius = support_radius
        self.label = label

    def __repr__(self):
        return f"<{self.__class__.__name__} {self.label} n={self.n}>"

    def evaluate(self, points):
        return self.evaluator(points)

    @property
    def center(self):
        return self._center

    def scaled(self, factor):
        if factor < 0:
            raise ParameterError("Fields are nonnegative.")
        return AnalyticField(
            self.n,
            lambda points: factor * self.evaluator(points),
            self.decay,
            bound=factor * self.bound,
            center=self.center,
            scale=self.scale,
            support_radius=self.support_radius,
            label=f"{factor:g}·{self.label}",
        )


class ExtremizerField(AnalyticField):

    """The extremizer ``c (1 + |φ(x)|²)^(-(k+1)/2)`` of the endpoint inequality.

    Its superlevel slices are ellipsoids with affine centers and a shared shape,
    computed here in closed form.
    """

    def __init__(self, n, k, phi=None, c=1.0):
        check_dimensions(n, k)
        self.k = k
        self.phi = AffineMap.identity(n) if phi is None else phi
        if self.phi.n != n:
            raise DimensionError(f"Affine map acts on R^{self.phi.n}, not R^{n}.")
        if c < 0:
            raise ParameterError(f"Amplitude must be nonnegative: {c}.")
        self.c = c
        exponent = -(k + 1) / 2
        phi = self.phi
        super().__init__(
            n,
            lambda points: c * (1 + np.sum(phi(points) ** 2, axis=-1)) ** exponent,
            decay=k + 1,
            bound=c,
            center=phi.inverse().translation,
            scale=1 / phi.singular_values.min(),
            label="extremizer",
        )

    def __repr__(self):
        return f"<{self.__class__.__name__} n={self.n} k={self.k} c={self.c:g}>"

    @property
    def is_standard(self):
        return self.c == 1 and self.phi.allclose(AffineMap.identity(self.n), atol=0)

    def scaled(self, factor):
        return ExtremizerField(self.n, self.k, self.phi, self.c * factor)

    def composed(self, phi, p):
        """ ``|J_φ|^(1/p) f∘φ``, again an extremizer. """
        return ExtremizerField(
            self.n, self.k, self.phi.compose(phi), self.c * phi.jacobian ** (1 / p)
        )

    @cachedproperty
    def lift_matrix(self):
        """Matrix ``M`` of ``R^(n+1)`` with ``1 + |φ(x)|² = |M (x, 1)|²``."""
        matrix = np.eye(self.n + 1)
        matrix[: self.n, : self.n] = self.phi.linear
        matrix[: self.n, self.n] = self.phi.translation
        return matrix

    @cachedproperty
    def slice_blocks(self):
        split = self.k
        slice_part = self.phi.linear[:, split:]
        gram = slice_part.T @ slice_part
        return self.phi.linear[:, :split], slice_part, gram, np.linalg.inv(gram)

    def slice_center(self, x_prime):
        """ Center ``γ(x')`` of every superlevel set of the slice at ``x'``. """
        base, slice_part, _, inverse = self.slice_blocks
        shift = base @ np.asarray(x_prime, float) + self.phi.translation
        return -inverse @ slice_part.T @ shift

    def slice_ellipsoid(self, x_prime, s):
        """Superlevel set ``{v : f(x', v) > s}`` as ``(center, shape)``.

        The set is ``{v : (v - center)ᵀ shape⁻¹ (v - center) < 1}``. ``shape`` is
        ``None`` for an empty set.
        """
        if s <= 0:
            raise InfiniteMeasureError(f"Superlevel {s} of a positive field.")
        base, slice_part, gram, inverse = self.slice_blocks
        shift = base @ np.asarray(x_prime, float) + self.phi.translation
        projected = slice_part.T @ shift
        residual = shift @ shift - projected @ inverse @ projected
        level = (s / self.c) ** (-2 / (self.k + 1)) - 1 if self.c else -1.0
        reach = level - residual
        center = -inverse @ projected
        if reach <= 0:
            return center, None
        return center, reach * inverse

    def slice_radius(self, x_prime, s):
        """ Closed-form radius of the ball with the measure of the slice set. """
        _, shape = self.slice_ellipsoid(x_prime, s)
        if shape is None:
            return 0.0
        dim = self.n - self.k
        return float(np.linalg.det(shape)) ** (1 / (2 * dim))

    def slice_rearranged(self):
        """Slice rearrangement, again an extremizer.

        Each slice ``v ↦ f(x', v)`` is a radial profile of a quadratic form in
        ``v``. Centering and rounding that form leaves the ``x'``-dependent
        residual, which is the squared norm of an affine function of ``x'``.
        """
        base, slice_part, gram, _ = self.slice_blocks
        dim = self.n - self.k
        complement = null_space(slice_part.T)
        linear = np.zeros((self.n, self.n))
        linear[: self.k, : self.k] = complement.T @ base
        linear[self.k :, self.k :] = np.linalg.det(gram) ** (1 / (2 * dim)) * np.eye(dim)
        translation = np.zeros(self.n)
        translation[: self.k] = complement.T @ self.phi.translation
        return ExtremizerField(self.n, self.k, AffineMap(linear, translation), self.c)

    def rearranged(self):
        """ Symmetric decreasing rearrangement, again an extremizer. """
        return ExtremizerField(
            self.n,
            self.k,
            AffineMap.scaling(self.n, self.phi.jacobian ** (1 / self.n)),
            self.c,
        )


def extremizer_field(n, k, phi=None, c=1.0):
    """ Extremizer ``c (1 + |φ(x)|²)^(-(k+1)/2)`` of the k-plane transform. """
    return ExtremizerField(n, k, phi, c)


def gaussian_field(n, center=None, scale=1.0, c=1.0):
    """ ``c · exp(-|x - center|² / scale²)``. """
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    return AnalyticField(
        n,
        lambda points: c * np.exp(-np.sum((points - center) ** 2, axis=-1) / scale ** 2),
        decay=math.inf,
        bound=c,
        center=center,
        scale=scale,
        label="gaussian",
    )


def indicator_field(n, shape="box", center=None, size=1.0, c=1.0):
    """Indicator of a ball of radius ``size`` or of a cube of half-width ``size``,
    times ``c``."""
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    if size <= 0:
        raise ParameterError(f"Indicator size must be positive: {size}.")
    if shape == "box":

        def evaluator(points):
            inside = np.all(np.abs(points - center) < size, axis=-1)
            return c * inside.astype(float)

        reach = size * math.sqrt(n)
    elif shape == "ball":

        def evaluator(points):
            inside = np.sum((points - center) ** 2, axis=-1) < size ** 2
            return c * inside.astype(float)

        reach = size
    else:
        raise ParameterError(f"Unknown indicator shape {shape!r}.")
    return AnalyticField(
        n,
        evaluator,
        decay=math.inf,
        bound=c,
        center=center,
        scale=size,
        support_radius=float(np.linalg.norm(center)) + reach,
        label=f"{shape} indicator",
    )


class GridField(Field):

    """Piecewise-constant field on an axis-aligned lattice of cubic cells of side
    ``h``, zero outside its support box."""

    kind = "grid"

    def __init__(self, values, h, lower=None):
        super().__init__(np.ndim(values))
        self.values = np.array(values, dtype=float)
        self.values.setflags(write=False)
        if h <= 0:
            raise ParameterError(f"Cell size must be positive: {h}.")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ParameterError("Grid values must be finite and nonnegative.")
        self.h = float(h)
        self.lower = (
            -self.h * np.array(self.dims) / 2
            if lower is None
            else np.asarray(lower, dtype=float)
        )
        if self.lower.shape != (self.n,):
            raise DimensionError(f"Lower corner must be a vector of R^{self.n}.")

    def __repr__(self):
        return f"<{self.__class__.__name__} dims={self.dims} h={self.h:g}>"

    @property
    def dims(self):
        return self.values.shape

    @property
    def upper(self):
        return self.lower + self.h * np.array(self.dims)

    @property
    def cell_volume(self):
        return self.h ** self.n

    @property
    def center(self):
        return (self.lower + self.upper) / 2

    @property
    def bound(self):
        return float(self.values.max(initial=0))

    @property
    def scale(self):
        return self.h * max(self.dims) / 4

    @property
    def support_radius(self):
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    @property
    def is_centered(self):
        return np.allclose(self.lower, -self.upper, rtol=0, atol=1e-12 * self.h)

    @cachedproperty
    def cell_centers(self):
        axes = [
            self.lower[i] + self.h * (np.arange(d) + 0.5)
            for i, d in enumerate(self.dims)
        ]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def evaluate(self, points):
        index = np.floor((points - self.lower) / self.h).astype(np.int64)
        inside = np.all((index >= 0) & (index < np.array(self.dims)), axis=-1)
        clipped = np.clip(index, 0, np.array(self.dims) - 1)
        values = self.values[tuple(np.moveaxis(clipped, -1, 0))]
        return np.where(inside, values, 0.0)

    def with_values(self, values):
        """ New field on the same lattice. """
        return GridField(values, self.h, self.lower)

    def scaled(self, factor):
        if factor < 0:
            raise ParameterError("Fields are nonnegative.")
        return self.with_values(self.values * factor)

    def integral(self, power=1.0):
        """ Exact ``∫ f^power`` of the piecewise-constant field. """
        return float(np.sum(self.values ** power) * self.cell_volume)

    def same_lattice(self, other):
        return (
            isinstance(other, GridField)
            and other.dims == self.dims
            and other.h == self.h
            and np.array_equal(other.lower, self.lower)
        )


def discretize(f, half_width, cell):
    """ Sample ``f`` at the cell centers of the origin-centered cube of half-width
    ``half_width``. """
    if isinstance(f, GridField):
        raise ParameterError("Field is already a grid.")
    count = max(1, int(round(2 * half_width / cell)))
    template = GridField(np.zeros((count,) * f.n), cell)
    return template.with_values(f(template.cell_centers))


def sum_field(f, g, epsilon=1.0):
    """The field ``f + ε g``.

    Grids on the same lattice stay grids. The metadata of ``f`` drives the
    quadratures, so that ``f`` and ``f + ε g`` share their sample layout.
    """
    if f.n != g.n:
        raise DimensionError("Fields live in different dimensions.")
    if isinstance(f, GridField):
        values = f.values + epsilon * g(f.cell_centers)
        if np.any(values < 0):
            raise ParameterError("Perturbed field is negative somewhere.")
        return f.with_values(values)
    if epsilon < 0:
        logger.debug("Negative perturbation: nonnegativity is checked on evaluation.")

    def evaluator(points):
        values = f(points) + epsilon * g(points)
        if np.any(values < -1e-12 * max(f.bound, 1.0)):
            raise ParameterError("Perturbed field is negative somewhere.")
        return np.maximum(values, 0.0)

    return AnalyticField(
        f.n,
        evaluator,
        decay=min(f.decay, g.decay),
        bound=f.bound + abs(epsilon) * g.bound,
        center=f.center,
        scale=f.scale,
        support_radius=max(f.support_radius, g.support_radius),
        label="sum",
    )


class TransformedField(AnalyticField):

    """ ``|J_φ|^(1/p) f∘φ`` for an arbitrary analytic ``f``. """

    def __init__(self, f, phi, p):
        self.base, self.phi, self.p = f, phi, p
        factor = phi.jacobian ** (1 / p)
        inverse = phi.inverse()
        stretch = phi.singular_values
        super().__init__(
            f.n,
            lambda points: factor * f(phi(points)),
            decay=f.decay,
            bound=factor * f.bound,
            center=inverse(f.center),
            scale=f.scale / stretch.min(),
            support_radius=float(np.linalg.norm(inverse.translation))
            + f.support_radius / stretch.min(),
            label=f"transported {getattr(f, 'label', 'field')}",
        )

    def truncation_radius(self, tolerance=TRUNCATION_TOLERANCE):
        return (
            float(np.linalg.norm(self.phi.inverse().translation))
            + self.base.truncation_radius(tolerance) / self.phi.singular_values.min()
        )


def apply_affine_symmetry(f, phi, p):
    """ The symmetry image ``|J_φ|^(1/p) f∘φ`` of ``f``. """
    if phi.n != f.n:
        raise DimensionError(f"Affine map acts on R^{phi.n}, not R^{f.n}.")
    if isinstance(f, ExtremizerField):
        return f.composed(phi, p)
    if isinstance(f, GridField):
        factor = phi.jacobian ** (1 / p)
        return f.with_values(factor * f(phi(f.cell_centers)))
    return TransformedField(f, phi, p)


def inversion_bound(f, k):
    """Supremum of ``Jf`` implied by the bound and decay of ``f``.

    Infinite when ``f`` decays slower than ``|x|^(-k-1)``: ``Jf`` then blows up
    near ``{s = 0}``.
    """
    if f.compact:
        return f.bound * f.support_radius ** (k + 1)
    if math.isinf(f.decay):
        # Maximum of t^(k+1) exp(-(t - |center|)² / scale²).
        offset = float(np.linalg.norm(f.center))
        peak = (offset + math.sqrt(offset ** 2 + 2 * (k + 1) * f.scale ** 2)) / 2
        decay = math.exp(-(((peak - offset) / f.scale) ** 2))
        return f.bound * peak ** (k + 1) * decay
    if f.decay < k + 1:
        return math.inf
    # Maximum of |s|^(d-k-1) (1 + |s|)^-d.
    peak = (f.decay - k - 1) / (k + 1)
    return f.bound * peak ** (f.decay - k - 1) / (1 + peak) ** f.decay


class JField(AnalyticField):

    """ ``Jf(s, y) = |s|^(-k-1) f(1/s, y/s)``, zero on ``{s = 0}``. """

    def __init__(self, f, k):
        self.base, self.k = f, k
        super().__init__(
            f.n,
            self._evaluate,
            decay=min(f.decay, k + 1),
            bound=inversion_bound(f, k),
            label=f"J image of {getattr(f, 'label', 'field')}",
        )

    def _evaluate(self, points):
        s = points[..., 0]
        regular = s != 0
        safe = np.where(regular, s, 1.0)
        mapped = points / safe[..., None]
        mapped[..., 0] = 1 / safe
        values = np.abs(safe) ** (-self.k - 1) * self.base(mapped)
        return np.where(regular, values, 0.0)


def apply_J(f, k):
    """The weighted inversion ``Jf(s, y) = |s|^(-k-1) f(1/s, y/s)``.

    Grids are resampled on their own lattice, with the cells meeting ``{s = 0}``
    set to zero.
    """
    check_dimensions(f.n, k)
    if isinstance(f, ExtremizerField) and f.is_standard:
        return f
    if isinstance(f, GridField):
        centers = f.cell_centers
        s = centers[..., 0]
        singular = np.abs(s) <= f.h / 2 * (1 + 1e-9)
        safe = np.where(singular, 1.0, s)
        mapped = centers / safe[..., None]
        mapped[..., 0] = 1 / safe
        values = np.abs(safe) ** (-k - 1) * f(mapped)
        return f.with_values(np.where(singular, 0.0, values))
    return JField(f, k)


def lp_power_samples(f, p, mc):
    """Per-sample importance contributions to ``∫ f^p`` for analytic fields.

    Points follow the heavy-tailed law around the field center, dilated by the
    field scale.
    """
    n, center, scale = f.n, f.center, f.scale

    def chunk(rng, size):
        standard = heavy_tail_sample(n, size, rng)
        density = heavy_tail_density(standard) / scale ** n
        return f(center + scale * standard) ** p / density

    return mc.map(chunk)


def lp_norm(f, p, mc=None):
    """Estimate of ``(∫ |f|^p)^(1/p)``.

    Exact for grids, importance-sampled for analytic fields.
    """
    if p < 1:
        raise ParameterError(f"Exponent must be at least 1: {p}.")
    if isinstance(f, GridField):
        return Estimate(f.integral(p) ** (1 / p), 0.0, f.values.size)
    if f.is_zero:
        return Estimate(0.0, 0.0, 0, getattr(mc, "seed", None))
    if not f.compact and f.decay * p <= f.n:
        raise NonIntegrableError(
            f"Decay {f.decay} is too slow for an L^{p:g} norm in R^{f.n}."
        )
    mc = MonteCarloConfig() if mc is None else mc
    total = Estimate.from_samples(lp_power_samples(f, p, mc), seed=mc.seed)
    return total.power(1 / p)


def lp_distance(f, g, p):
    """ ``‖f - g‖_p`` on the lattice of the grid among both fields. """
    grid = f if isinstance(f, GridField) else g
    if not isinstance(grid, GridField):
        raise ParameterError("At least one field must be a grid.")
    other = g if grid is f else f
    values = (
        other.values if grid.same_lattice(other) else other(grid.cell_centers)
    )
    difference = np.abs(grid.values - values)
    return float(np.sum(difference ** p) * grid.cell_volume) ** (1 / p)


def slice_measure(f, x_prime, s, mc=None):
    """ Measure of ``{v : f(x', v) > s}``. """
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    k = len(x_prime)
    dim = f.n - k
    if s <= 0:
        raise InfiniteMeasureError(f"Superlevel {s} may have infinite measure.")
    if isinstance(f, ExtremizerField) and f.k == k:
        return Estimate(ball_volume(dim, f.slice_radius(x_prime, s)))
    if isinstance(f, GridField):
        index = np.floor((x_prime - f.lower[:k]) / f.h).astype(int)
        if np.any(index < 0) or np.any(index >= np.array(f.dims[:k])):
            return Estimate(0.0)
        cells = f.values[tuple(index)]
        count = np.count_nonzero(cells > s)
        return Estimate(count * f.h ** dim, 0.0, cells.size)

    mc = MonteCarloConfig() if mc is None else mc
    center, scale = f.center[k:], f.scale

    def chunk(rng, size):
        standard = heavy_tail_sample(dim, size, rng)
        v = center + scale * standard
        points = np.concatenate([np.broadcast_to(x_prime, (size, k)), v], axis=-1)
        return (f(points) > s) * scale ** dim / heavy_tail_density(standard)

    return mc.estimate(chunk)


def slice_radius(f, x_prime, s, mc=None):
    """Radius ``ρ(x', s)`` of the ``(n-k)``-ball with the measure of the slice
    superlevel set ``{v : f(x', v) > s}``.

    Closed form for extremizers, exact for grids, sampled otherwise.
    """
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if isinstance(f, ExtremizerField) and f.k == len(x_prime):
        if s <= 0:
            raise InfiniteMeasureError(f"Superlevel {s} of a positive field.")
        return f.slice_radius(x_prime, s)
    dim = f.n - len(x_prime)
    volume = slice_measure(f, x_prime, s, mc).value
    return (volume / ball_volume(dim)) ** (1 / dim)


def radial_order(dims):
    """Cell indices of a centered lattice sorted by distance to the origin.

    Distances are compared exactly through doubled integer offsets, ties are
    broken by cell index.
    """
    offsets = [2 * np.arange(d) + 1 - d for d in dims]
    grids = np.meshgrid(*offsets, indexing="ij")
    squared = sum(axis.astype(np.int64) ** 2 for axis in grids).ravel()
    return np.lexsort((np.arange(squared.size), squared))


def _rearranged_values(values, order):
    placed = np.empty_like(values)
    placed[order] = np.sort(values)[::-1]
    return placed


def full_rearrange(f):
    """Symmetric decreasing rearrangement ``f*``.

    Grids are rearranged onto the origin-centered lattice with the same cells,
    preserving the value multiset exactly.
    """
    if isinstance(f, GridField):
        order = radial_order(f.dims)
        values = _rearranged_values(f.values.ravel(), order)
        return GridField(values.reshape(f.dims), f.h)
    if isinstance(f, ExtremizerField):
        return f.rearranged()
    if f.is_zero:
        return f
    raise ParameterError(f"Discretize {f!r} on a grid before rearranging it.")


def slice_rearrange(f, k):
    """Rearrange every slice ``v ↦ f(x', v)`` over the last ``n - k`` axes.

    Grids keep their first ``k`` axes and get centered slice axes.
    """
    check_dimensions(f.n, k)
    if isinstance(f, GridField):
        slice_dims = f.dims[k:]
        order = radial_order(slice_dims)
        rows = f.values.reshape(-1, int(np.prod(slice_dims)))
        placed = np.stack([_rearranged_values(row, order) for row in rows])
        lower = np.concatenate([f.lower[:k], -f.h * np.array(slice_dims) / 2])
        return GridField(placed.reshape(f.dims), f.h, lower)
    if isinstance(f, ExtremizerField) and f.k == k:
        return f.slice_rearranged()
    if f.is_zero:
        return f
    raise ParameterError(f"Discretize {f!r} on a grid before rearranging it.")


def _layer_mask(layer_set, grid):
    if isinstance(layer_set, np.ndarray):
        if layer_set.shape != grid.dims:
            raise DimensionError(f"Mask shape {layer_set.shape} is not {grid.dims}.")
        return layer_set.astype(bool)
    return np.asarray(layer_set.contains(grid.cell_centers), dtype=bool)


def layer_cake_reconstruct(layers, grid):
    """Sum of ``height · 1_E`` over ``(height, E)`` layers, on the lattice of
    ``grid``.

    Sets are boolean masks or objects with a ``contains`` method. They must be
    nested: ``ConsistencyError`` is raised otherwise.
    """
    masks = []
    for height, layer_set in layers:
        if height <= 0:
            raise ParameterError(f"Layer heights must be positive: {height}.")
        masks.append((height, _layer_mask(layer_set, grid)))
    masks.sort(key=lambda layer: -np.count_nonzero(layer[1]))

    values = np.zeros(grid.dims)
    previous = None
    for height, mask in masks:
        if previous is not None and np.any(mask & ~previous):
            raise ConsistencyError("Layers are not nested.")
        values += height * mask
        previous = mask
    return grid.with_values(values)


def superlevel_layers(f, thresholds, grid=None):
    """Layers ``(t_i - t_{i-1}, {f > t_{i-1}})`` of increasing ``thresholds``, with
    ``t_0 = 0``, as masks on the lattice of ``grid`` (``f`` itself by default).

    Their sum rounds ``f`` up to the next threshold, below the last one.
    """
    grid = f if grid is None else grid
    values = f.values if grid is f else f(grid.cell_centers)
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(thresholds) <= 0) or thresholds[0] < 0:
        raise ParameterError("Thresholds must be nonnegative and increasing.")
    lowers = np.concatenate([[0.0], thresholds[:-1]])
    return [
        (high - low, values > low)
        for low, high in zip(lowers, thresholds)
        if high > low
    ]
