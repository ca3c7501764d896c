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

"""The k-plane transform in its Euclidean, matrix-parameterized and elliptic
realizations, with their ``L^(n+1)`` norm estimators."""

import math
from dataclasses import dataclass

import numpy as np
from boltons.cacheutils import LRI, cached
from scipy.special import gammaincc, roots_legendre

from . import (
    PANEL_SIZE,
    BoundaryError,
    DimensionError,
    NonIntegrableError,
    ParameterError,
    check_dimensions,
    endpoint_exponents,
    logger,
)
from .estimate import Estimate, MonteCarloConfig, QuadratureConfig
from .fields import ExtremizerField, lp_norm
from .geometry import OrthonormalFrame, sample_affine_planes, sample_frames
from .sampling import (
    heavy_tail_density,
    heavy_tail_sample,
    sphere_area,
    sphere_nodes,
    uniform_sphere,
)

__all__ = [
    "Estimate",
    "HemisphereFunction",
    "HemispherePoint",
    "MatrixPlane",
    "apply_R",
    "apply_R_sharp",
    "elliptic_lift",
    "elliptic_norm_check",
    "elliptic_transform",
    "integrate_planes",
    "kplane_transform",
    "lq_sharp_norm",
    "lq_transform_norm",
    "sharp_transform",
    "transform_power_samples",
]

# Quadrature points evaluated at once.
POINT_BUDGET = 2 ** 20


@cached(LRI(32))
def radial_rule(panels):
    """Composite Gauss-Legendre rule on ``[0, 1]`` with ``panels`` panels of
    ``PANEL_SIZE`` nodes."""
    nodes, weights = roots_legendre(PANEL_SIZE)
    edges = np.linspace(0, 1, panels + 1)
    half = np.diff(edges) / 2
    mids = (edges[1:] + edges[:-1]) / 2
    return (
        (mids[:, None] + half[:, None] * nodes).ravel(),
        (half[:, None] * weights).ravel(),
    )


def check_plane_integrability(f, k):
    if not f.compact and f.decay <= k:
        raise NonIntegrableError(
            f"Decay {f.decay} is too slow for integrals over {k}-planes."
        )


def _integrate_batch(f, origins, bases, directions, rule, radius):
    nodes, weights = rule
    k = bases.shape[1]
    # Foot of the field center in plane coordinates.
    gram = bases @ np.swapaxes(bases, -1, -2)
    rhs = np.einsum("mkn,mn->mk", bases, f.center - origins)
    feet = np.linalg.solve(gram, rhs[..., None])[..., 0]
    start = origins + np.einsum("mk,mkn->mn", feet, bases)

    # Ray parameters inside the truncation ball: a r² + 2 b r + c ≤ 0. Whole rays
    # for an infinite radius.
    steps = np.einsum("dk,mkn->mdn", directions, bases)
    a = np.sum(steps ** 2, axis=-1)
    b = np.einsum("mdn,mn->md", steps, start)
    c = np.sum(start ** 2, axis=-1)[:, None] - radius ** 2
    root = np.sqrt(np.maximum(b ** 2 - a * c, 0))
    upper = (root - b) / a
    lower = np.maximum(-(root + b) / a, 0)
    inside = upper > lower
    upper = np.where(inside, upper, lower)

    if f.compact:
        span = (upper - lower)[..., None]
        radii = lower[..., None] + span * nodes
        jacobian = span * weights
    else:
        spread = f.scale / np.sqrt(a)
        u_low = np.arctan(lower / spread)[..., None]
        u_span = np.arctan(upper / spread)[..., None] - u_low
        angles = u_low + u_span * nodes
        radii = spread[..., None] * np.tan(angles)
        jacobian = spread[..., None] * u_span * weights / np.cos(angles) ** 2

    points = start[:, None, None, :] + radii[..., None] * steps[:, :, None, :]
    integrand = f(points) * jacobian
    if k > 1:
        integrand = integrand * radii ** (k - 1)
    return np.sum(integrand, axis=(1, 2))


def integrate_planes(f, origins, bases, quad=None, coarse=False, rng=None):
    """Integrate ``f`` over the parameterized planes ``u ↦ origin + uᵀ basis``.

    ``origins`` has shape ``(m, n)`` and ``bases`` shape ``(m, k, n)``. Bases need
    not be orthonormal: the integral is taken against Lebesgue measure on the
    parameters ``u ∈ R^k``. The rule is polar around the point of each plane
    closest to the field center, with ``sphere_nodes`` directions and composite
    Gauss-Legendre radial panels, truncated to the field's truncation ball.
    Rays of fields with polynomial decay are mapped onto ``[0, π/2)`` and
    integrated to infinity.
    ``coarse`` halves the panel count.
    """
    quad = QuadratureConfig() if quad is None else quad
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    bases = np.asarray(bases, dtype=float)
    if bases.ndim == 2:
        bases = bases[None]
    k = bases.shape[1]
    check_plane_integrability(f, k)
    if f.is_zero:
        return np.zeros(len(origins))

    directions = sphere_nodes(k, quad.directions, rng)
    direction_weight = 1.0 if k == 1 else sphere_area(k) / len(directions)
    panels = quad.nodes // PANEL_SIZE
    rule = radial_rule(max(1, panels // 2) if coarse else panels)
    radius = f.truncation_radius(quad.tolerance)

    batch = max(1, POINT_BUDGET // (len(directions) * len(rule[0])))
    values = np.empty(len(origins))
    for first in range(0, len(origins), batch):
        window = slice(first, first + batch)
        values[window] = _integrate_batch(
            f, origins[window], bases[window], directions, rule, radius
        )
    return direction_weight * values


def truncation_tail(f, basis, tolerance):
    """Mass of the Gaussian-type majorant ``bound · exp(-|x - center|² / scale²)``
    outside the truncation ball, against Lebesgue measure on the parameters of
    ``basis``.

    Zero for compact fields and for polynomial decay, which is integrated in
    full.
    """
    if f.compact or math.isfinite(f.decay) or f.is_zero:
        return 0.0
    basis = np.atleast_2d(basis)
    k = basis.shape[0]
    volume = math.sqrt(np.linalg.det(basis @ basis.T))
    tail = gammaincc(k / 2, math.log(1 / tolerance))
    mass = (math.pi * f.scale ** 2) ** (k / 2) * tail
    return f.bound * mass / volume


def _quadrature_estimate(f, origin, basis, quad):
    fine = float(integrate_planes(f, origin, basis, quad)[0])
    coarse = float(integrate_planes(f, origin, basis, quad, coarse=True)[0])
    rounding = np.finfo(float).eps * quad.nodes * quad.directions * abs(fine)
    stderr = abs(fine - coarse) + truncation_tail(f, basis, quad.tolerance) + rounding
    return Estimate(fine, stderr, quad.nodes)


def kplane_transform(f, plane, quad=None):
    """``T f(θ, y)``: integral of ``f`` over the affine plane ``y + θ``.

    The standard error adds the gap with the rule of half as many panels, the
    mass left outside the truncation ball and the rounding of the sums.
    """
    quad = QuadratureConfig() if quad is None else quad
    if plane.frame.n != f.n:
        raise DimensionError(f"Plane of R^{plane.frame.n} for a field on R^{f.n}.")
    return _quadrature_estimate(f, plane.offset, plane.frame.basis, quad)


def transform_power_samples(f, k, mc, quad=None, offset_radius=None):
    """Per-plane contributions ``|T f|^(n+1) · weight`` over random affine planes.

    Planes are Haar frames with offsets around the field center. Fields sharing
    their center and scale get the same planes from the same ``mc``.
    """
    n = f.n
    check_dimensions(n, k)
    check_plane_integrability(f, k)
    q = n + 1

    def chunk(rng, size):
        bases, offsets, weights = sample_affine_planes(
            n, k, size, rng, offset_radius, center=f.center, scale=f.scale
        )
        return integrate_planes(f, offsets, bases, quad) ** q * weights

    return mc.map(chunk)


def lq_transform_norm(f, k, mc=None, quad=None, offset_radius=None):
    """Estimate ``‖T f‖_(n+1)`` over the affine Grassmannian.

    Without ``offset_radius`` plane offsets follow a heavy-tailed law, which
    removes the truncation bias of the uniform-ball offsets.
    """
    mc = MonteCarloConfig() if mc is None else mc
    if f.is_zero:
        return Estimate(0.0, 0.0, mc.samples, mc.seed)
    samples = transform_power_samples(f, k, mc, quad, offset_radius)
    return Estimate.from_samples(samples, seed=mc.seed).power(1 / (f.n + 1))


@dataclass(frozen=True)
class MatrixPlane:

    """The graph ``x' ↦ (x', Aᵀx' + b)`` of an affine map ``R^k → R^(n-k)``.

    Row ``i`` of ``A`` is the image of the ``i``-th basis vector.
    """

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[1] != b.shape[0]:
            raise DimensionError(f"Matrix {A.shape} and vector {b.shape} mismatch.")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def k(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[0] + self.A.shape[1]

    @property
    def origin(self):
        return np.concatenate([np.zeros(self.k), self.b])

    @property
    def basis(self):
        return np.hstack([np.eye(self.k), self.A])

    def swapped(self):
        """ The first row of ``A`` exchanged with ``b``. """
        A = self.A.copy()
        A[0] = self.b
        return MatrixPlane(A, self.A[0].copy())

    def as_vector(self):
        return np.concatenate([self.A.ravel(), self.b])

    @classmethod
    def from_vector(cls, vector, n, k):
        vector = np.asarray(vector, dtype=float)
        return cls(vector[: k * (n - k)].reshape(k, n - k), vector[k * (n - k) :])


def sharp_transform(f, mp, quad=None):
    """ ``T♯f(A, b) = ∫ f(x', Aᵀx' + b) dx'`` over ``R^k``. """
    quad = QuadratureConfig() if quad is None else quad
    if mp.n != f.n:
        raise DimensionError(f"Matrix plane of R^{mp.n} for a field on R^{f.n}.")
    return _quadrature_estimate(f, mp.origin, mp.basis, quad)


def lq_sharp_norm(f, k, mc=None, quad=None):
    """Estimate ``‖T♯f‖_(n+1)`` over ``(A, b) ∈ R^((k+1)(n-k))``.

    The parameters follow a heavy-tailed law centered on the graphs through the
    field center, with the offsets dilated by the field scale.
    """
    n = f.n
    check_dimensions(n, k)
    check_plane_integrability(f, k)
    mc = MonteCarloConfig() if mc is None else mc
    if f.is_zero:
        return Estimate(0.0, 0.0, mc.samples, mc.seed)
    dim = (k + 1) * (n - k)
    center_x, center_v = f.center[:k], f.center[k:]
    scale = f.scale

    def chunk(rng, size):
        standard = heavy_tail_sample(dim, size, rng)
        weights = scale ** (n - k) / heavy_tail_density(standard)
        A = standard[:, : k * (n - k)].reshape(size, k, n - k)
        shift = scale * standard[:, k * (n - k) :]
        b = center_v - np.einsum("k,skj->sj", center_x, A) + shift
        origins = np.concatenate([np.zeros((size, k)), b], axis=-1)
        bases = np.concatenate([np.broadcast_to(np.eye(k), (size, k, k)), A], axis=-1)
        return integrate_planes(f, origins, bases, quad) ** (n + 1) * weights

    samples = mc.map(chunk)
    return Estimate.from_samples(samples, seed=mc.seed).power(1 / (n + 1))


def apply_R_sharp(G):
    """ ``R♯G(A, b) = G(A_b, a_1)``: swap the first row of ``A`` with ``b``. """
    return lambda mp: G(mp.swapped())


@dataclass(frozen=True)
class HemispherePoint:

    """ Unit vector of ``R^(n+1)`` with a positive last coordinate. """

    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 1 or len(theta) < 2:
            raise DimensionError(f"Not a point of a sphere: {theta}.")
        if abs(np.linalg.norm(theta) - 1) > 1e-12:
            raise ParameterError(f"Not a unit vector: |θ| = {np.linalg.norm(theta)}.")
        if theta[-1] <= 0:
            raise BoundaryError(f"Point {theta} is off the open northern hemisphere.")
        object.__setattr__(self, "theta", theta)

    @property
    def n(self):
        return len(self.theta) - 1

    @classmethod
    def from_euclidean(cls, x):
        """ Central projection ``x ↦ (x, 1) / √(1 + |x|²)``. """
        lifted = np.append(np.asarray(x, dtype=float), 1.0)
        return cls(lifted / np.linalg.norm(lifted))

    def to_euclidean(self):
        return self.theta[:-1] / self.theta[-1]


class HemisphereFunction:

    """Function on lines of ``R^(n+1)``, seen on the open northern hemisphere.

    Calling it on points with a nonpositive last coordinate raises
    ``BoundaryError``. ``values`` folds every point to the northern
    representative of its line and sets the equator to zero.
    """

    def __init__(self, n, evaluator):
        self.n = n
        self.evaluator = evaluator

    def __call__(self, thetas):
        if isinstance(thetas, HemispherePoint):
            return float(self.evaluator(thetas.theta[None])[0])
        thetas = np.asarray(thetas, dtype=float)
        if np.any(thetas[..., -1] <= 0):
            raise BoundaryError("Evaluation off the open northern hemisphere.")
        return self.evaluator(thetas)

    def values(self, thetas):
        thetas = np.asarray(thetas, dtype=float)
        last = thetas[..., -1:]
        folded = np.where(last < 0, -thetas, thetas)
        equator = folded[..., -1] == 0
        folded[..., -1] = np.where(equator, 1.0, folded[..., -1])
        return np.where(equator, 0.0, self.evaluator(folded))


def elliptic_lift(f, k):
    """``F(θ) = θ_(n+1)^-(k+1) f(θ' / θ_(n+1))`` on the northern hemisphere.

    Extremizers lift to ``c |L θ|^-(k+1)`` with ``L`` their lifted matrix.
    """
    n = f.n
    check_dimensions(n, k)
    if isinstance(f, ExtremizerField) and f.k == k:
        lift, amplitude = f.lift_matrix, f.c

        def evaluator(thetas):
            return amplitude * np.linalg.norm(thetas @ lift.T, axis=-1) ** (-k - 1)

    else:

        def evaluator(thetas):
            last = thetas[..., -1]
            return last ** (-k - 1) * f(thetas[..., :-1] / last[..., None])

    return HemisphereFunction(n, evaluator)


def apply_R(F):
    """``RF(θ) = F(sgn θ_1 θ_(n+1), sgn θ_1 θ_2, …, sgn θ_1 θ_n, |θ_1|)``, zero
    where ``θ_1 = 0``."""

    def evaluator(thetas):
        first = thetas[..., :1]
        signs = np.sign(first)
        swapped = np.concatenate(
            [signs * thetas[..., -1:], signs * thetas[..., 1:-1], np.abs(first)], axis=-1
        )
        return F.values(swapped)

    return HemisphereFunction(F.n, evaluator)


def _line_averages(F, bases, nodes):
    """ Averages of ``F`` over the lines spanned by ``nodes`` in each subspace. """
    thetas = np.einsum("dj,mjn->mdn", nodes, bases)
    return F.values(thetas).mean(axis=-1)


def elliptic_transform(F, pi, directions=None, rng=None):
    """``T^E F(π)``: Haar average of ``F`` over the lines of the subspace ``π``.

    Lines are quadrature directions of the unit sphere of ``π`` with a random
    phase from ``rng``. The standard error is the gap with every other direction.
    """
    basis = np.asarray(pi.basis if isinstance(pi, OrthonormalFrame) else pi, float)
    if basis.shape[1] != F.n + 1:
        raise DimensionError(f"Subspace of R^{basis.shape[1]}, expected R^{F.n + 1}.")
    count = 2 * (directions or 32)
    nodes = sphere_nodes(basis.shape[0], count, rng)
    full = float(_line_averages(F, basis[None], nodes)[0])
    half = float(_line_averages(F, basis[None], nodes[::2])[0])
    return Estimate(full, abs(full - half), len(nodes))


def elliptic_norm_check(f, k, mc=None, quad=None, offset_radius=None):
    """Compare the Euclidean and elliptic sides of the norm correspondence.

    Reports ``c_n^(1/p) ‖F‖_p`` against ``‖f‖_p`` with ``c_n`` half the area of
    the unit sphere of ``R^(n+1)``, and the constant ``‖T^E F‖ / ‖T f‖`` of the
    ``L^(n+1)`` norms, all with standard errors.
    """
    n = f.n
    p, q = endpoint_exponents(n, k)
    mc = MonteCarloConfig() if mc is None else mc
    quad = QuadratureConfig() if quad is None else quad
    F = elliptic_lift(f, k)
    half_area = sphere_area(n + 1) / 2

    def lifted_chunk(rng, size):
        thetas = uniform_sphere(n + 1, size, rng)
        return F.values(thetas) ** p

    lifted = mc.child(0).estimate(lifted_chunk).power(1 / p).scaled(half_area ** (1 / p))
    field_norm = lp_norm(f, p, mc.child(1))

    def elliptic_chunk(rng, size):
        bases, _ = sample_frames(n + 1, k + 1, size, rng)
        nodes = sphere_nodes(k + 1, 2 * quad.directions, rng)
        return _line_averages(F, bases, nodes) ** q

    elliptic = mc.child(2).estimate(elliptic_chunk).power(1 / q)
    euclidean = lq_transform_norm(f, k, mc.child(3), quad, offset_radius)
    logger.debug(f"Elliptic side {elliptic}, Euclidean side {euclidean}.")
    return {
        "lifted_norm": lifted,
        "field_norm": field_norm,
        "lifted_gap": lifted.difference(field_norm),
        "elliptic_norm": elliptic,
        "transform_norm": euclidean,
        "constant": elliptic.ratio(euclidean),
    }
