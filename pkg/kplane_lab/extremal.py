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

"""The extremal problem: the ratio functional, perturbations, symmetrization
dynamics and the geometric probes of extremizers."""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import minimize_scalar

from . import (
    SIGMAS,
    DimensionError,
    EmptySetError,
    IterationError,
    ParameterError,
    SingularityError,
    UndefinedRatioError,
    check_dimensions,
    endpoint_exponents,
    logger,
)
from .estimate import Estimate, MonteCarloConfig
from .fields import (
    AffineMap,
    AnalyticField,
    ExtremizerField,
    GridField,
    apply_affine_symmetry,
    discretize,
    extremizer_field,
    lp_distance,
    lp_norm,
    lp_power_samples,
    sum_field,
)
from .indicators import Ellipsoid, IndicatorSet, superlevel_set
from .sampling import ball_volume, heavy_tail_sample
from .schedule import DEFAULT_SCHEDULE, MONOTONE_STEPS, apply_step, parse_schedule
from .transforms import lq_transform_norm, transform_power_samples


@dataclass(frozen=True)
class RatioReport:

    """ ``‖T f‖_q / ‖f‖_p`` with both norms. """

    numerator: Estimate
    denominator: Estimate
    ratio: Estimate

    def as_dict(self):
        return {
            "numerator": self.numerator.as_dict(),
            "denominator": self.denominator.as_dict(),
            "ratio": self.ratio.as_dict(),
        }


def ratio(f, k, mc=None, quad=None, offset_radius=None):
    """ The ratio functional at the endpoint exponents. """
    n = f.n
    check_dimensions(n, k)
    p, _ = endpoint_exponents(n, k)
    mc = MonteCarloConfig() if mc is None else mc
    denominator = lp_norm(f, p, mc.child(1))
    if not denominator.value:
        raise UndefinedRatioError("The ratio of a null field is undefined.")
    numerator = lq_transform_norm(f, k, mc.child(0), quad, offset_radius)
    return RatioReport(numerator, denominator, numerator.ratio(denominator))


def bump_field(n, center, radius, c=1.0):
    """ Smooth compactly supported bump ``c (1 - |x - center|²/radius²)₊²``. """
    center = np.asarray(center, dtype=float)
    return AnalyticField(
        n,
        lambda points: c
        * np.maximum(1 - np.sum((points - center) ** 2, axis=-1) / radius ** 2, 0) ** 2,
        decay=math.inf,
        bound=c,
        center=center,
        scale=radius,
        support_radius=float(np.linalg.norm(center)) + radius,
        label="bump",
    )


def bump_family(n, count, rng, spread=1.5, radius=0.5):
    """ Bumps centered at ``count`` random points of the cube of half-width ``spread``. """
    centers = spread * rng.uniform(-1, 1, (count, n))
    return [
        (f"bump@{np.round(c, 3).tolist()}", bump_field(n, c, radius)) for c in centers
    ]


def _norm_parts(f, p, mc):
    """ Per-sample contributions to ``∫ f^p``, or its exact value for grids. """
    if isinstance(f, GridField):
        return None, f.integral(p)
    samples = lp_power_samples(f, p, mc)
    return samples, samples.mean()


def perturbation_test(f, perturbations, k, epsilon=0.1, mc=None, quad=None):
    """Ratio differences ``ratio(f + ε g) - ratio(f)`` for each ``(label, g)``.

    Both ratios reuse the planes and the points of ``f``, so the difference is
    estimated from paired samples. ``increase`` flags differences above
    ``SIGMAS`` standard errors.
    """
    n = f.n
    check_dimensions(n, k)
    p, q = endpoint_exponents(n, k)
    mc = MonteCarloConfig() if mc is None else mc
    base_transform = transform_power_samples(f, k, mc.child(0), quad)
    base_samples, base_norm = _norm_parts(f, p, mc.child(1))
    if not base_norm:
        raise UndefinedRatioError("The ratio of a null field is undefined.")
    base_ratio = base_transform.mean() ** (1 / q) / base_norm ** (1 / p)

    results = []
    for label, g in perturbations:
        perturbed = sum_field(f, g, epsilon)
        transform = transform_power_samples(perturbed, k, mc.child(0), quad)
        samples, norm = _norm_parts(perturbed, p, mc.child(1))
        value = transform.mean() ** (1 / q) / norm ** (1 / p)
        # Delta method on both ratios, paired sample by sample.
        influence = value / (q * transform.mean()) * transform - base_ratio / (
            q * base_transform.mean()
        ) * base_transform
        variance = influence.var(ddof=1) / len(influence)
        if samples is not None:
            norm_influence = base_ratio / (p * base_norm) * base_samples - value / (
                p * norm
            ) * samples
            variance += norm_influence.var(ddof=1) / len(norm_influence)
        difference = Estimate(
            value - base_ratio, math.sqrt(variance), len(influence), mc.seed
        )
        logger.debug(f"Perturbation {label}: {difference}")
        results.append(
            {
                "label": label,
                "epsilon": epsilon,
                "ratio": value,
                "difference": difference,
                "increase": difference.value > SIGMAS * difference.stderr,
            }
        )
    return {
        "base_ratio": base_ratio,
        "perturbations": results,
        "any_increase": any(r["increase"] for r in results),
    }


def affine_normalize(f, p):
    """Bring a grid field to a canonical position of its affine orbit.

    Translates by the centroid and whitens by the covariance of the superlevel
    set at the median positive height, with a unimodular map. The result lives
    on the origin-centered lattice with the same cells.
    """
    if not isinstance(f, GridField):
        raise ParameterError("Affine normalization works on grid fields.")
    mass = f.values.sum()
    if not mass:
        raise UndefinedRatioError("Cannot normalize a null field.")
    centers = f.cell_centers.reshape(-1, f.n)
    values = f.values.ravel()
    centroid = values @ centers / mass
    level = np.median(values[values > 0])
    above = values > level
    if np.count_nonzero(above) <= f.n:
        above = values >= level
    members = centers[above]
    covariance = np.atleast_2d(np.cov(members, rowvar=False))
    eigenvalues, eigenvectors = eigh(covariance)
    if eigenvalues.min() <= 0:
        return apply_affine_symmetry(f, AffineMap.shift(centroid), p)
    root = eigenvectors * np.sqrt(eigenvalues) @ eigenvectors.T
    root /= np.prod(eigenvalues) ** (1 / (2 * f.n))
    phi = AffineMap(root, centroid)
    template = GridField(np.zeros(f.dims), f.h)
    return template.with_values(phi.jacobian ** (1 / p) * f(phi(template.cell_centers)))


def radial_profile(grid, k, width, p):
    """ The extremizer ``(1 + |x/width|²)^(-(k+1)/2)`` on ``grid``, unit in ``L^p``. """
    profile = grid.with_values(
        (1 + np.sum((grid.cell_centers / width) ** 2, axis=-1)) ** (-(k + 1) / 2)
    )
    return profile.scaled(1 / profile.integral(p) ** (1 / p))


def profile_distance(f, k, p=None, normalize=True):
    """``L^p`` distance from the unit-normalized ``f`` to the closest dilate of
    the radial extremizer profile, after affine normalization.

    Returns the distance and the fitted width.
    """
    p = endpoint_exponents(f.n, k)[0] if p is None else p
    g = affine_normalize(f, p) if normalize else f
    g = g.scaled(1 / g.integral(p) ** (1 / p))

    def objective(log_width):
        return lp_distance(g, radial_profile(g, k, math.exp(log_width), p), p)

    extent = math.log(g.h * max(g.dims))
    fit = minimize_scalar(
        objective, bounds=(extent - 8, extent), method="bounded", options={"xatol": 1e-4}
    )
    return float(fit.fun), math.exp(fit.x)


@dataclass(frozen=True)
class TraceRecord:

    step: int
    tag: str
    ratio: Estimate
    distance: float


@dataclass
class IterationTrace:

    """ Append-only record of a symmetrization run. """

    schedule: tuple
    records: List[TraceRecord] = field(default_factory=list)

    def append(self, tag, ratio_estimate, distance):
        step = len(self.records)
        self.records.append(TraceRecord(step, tag, ratio_estimate, distance))

    @property
    def ratios(self):
        return [record.ratio for record in self.records]

    @property
    def initial_distance(self):
        return self.records[0].distance

    @property
    def final_distance(self):
        return self.records[-1].distance

    def monotonicity_violations(self, sigmas=SIGMAS):
        """Steps of a ratio-nondecreasing kind whose ratio dropped by more than
        ``sigmas`` combined standard errors."""
        violations = []
        for before, after in zip(self.records, self.records[1:]):
            if after.tag not in MONOTONE_STEPS:
                continue
            drop = before.ratio.value - after.ratio.value
            if drop > sigmas * math.hypot(before.ratio.stderr, after.ratio.stderr):
                violations.append(after.step)
        return violations

    def rows(self):
        """ ``step, tag, ratio, stderr, distance`` rows, the initial state first. """
        return [
            (r.step, r.tag, r.ratio.value, r.ratio.stderr, r.distance)
            for r in self.records
        ]


def symmetrize_iterate(
    f0, k, steps, schedule=DEFAULT_SCHEDULE, mc=None, quad=None, half_width=4.0, cell=0.1
):
    """Alternate the symmetrization steps of ``schedule`` for ``steps`` steps.

    Analytic fields are first discretized on the origin-centered cube of
    half-width ``half_width``. Fields are renormalized to unit ``L^p`` norm after
    every step, and their ratio is always estimated on the same random stream.
    Returns the trace and the final field; ``steps = 0`` returns ``f0`` itself.
    """
    check_dimensions(f0.n, k)
    if steps < 0:
        raise ParameterError(f"Step count must be nonnegative: {steps}.")
    schedule = parse_schedule(schedule)
    mc = MonteCarloConfig() if mc is None else mc
    p, _ = endpoint_exponents(f0.n, k)
    trace = IterationTrace(schedule)

    current = f0 if isinstance(f0, GridField) else discretize(f0, half_width, cell)
    norm = current.integral(p) ** (1 / p)
    if not norm:
        raise IterationError("Initial field has a null norm.")
    current = current.scaled(1 / norm)
    distance, _ = profile_distance(current, k, p)
    trace.append("initial", ratio(current, k, mc, quad).ratio, distance)
    if not steps:
        return trace, f0

    for index in range(steps):
        tag = schedule[index % len(schedule)]
        current = apply_step(tag, current, k)
        norm = current.integral(p) ** (1 / p)
        if not norm > 1e-12:
            raise IterationError(f"Field collapsed at step {index + 1} ({tag}).")
        current = current.scaled(1 / norm)
        estimate = ratio(current, k, mc, quad).ratio
        distance, _ = profile_distance(current, k, p)
        logger.info(
            f"Step {index + 1} ({tag}): ratio {estimate.value:.6f}, "
            f"distance {distance:.4f}"
        )
        trace.append(tag, estimate, distance)

    violations = trace.monotonicity_violations()
    if violations:
        logger.warning(f"Ratio decreased at rearrangement steps {violations}.")
    if trace.final_distance >= trace.initial_distance:
        logger.warning("Iteration did not get closer to the radial profile.")
    return trace, current


def _slice_evaluator(f, x_prime):
    k = len(x_prime)

    def evaluate(v):
        anchor = np.broadcast_to(x_prime, v.shape[:-1] + (k,))
        return f(np.concatenate([anchor, v], axis=-1))

    return evaluate


@dataclass(frozen=True)
class SliceFit:

    """ Ellipsoid fitted to a slice superlevel set. """

    ellipsoid: Optional[Ellipsoid]
    volume: Estimate
    fraction: Estimate

    @property
    def radius(self):
        """ Radius of the ball with the fitted volume. """
        dim = self.ellipsoid.dim
        return (self.ellipsoid.volume / ball_volume(dim)) ** (1 / dim)

    def as_dict(self):
        return {
            "center": self.ellipsoid.center.tolist(),
            "shape": self.ellipsoid.shape.tolist(),
            "volume": self.volume.as_dict(),
            "fraction": self.fraction.as_dict(),
        }


def ellipsoid_slice_fit(f, x_prime, s, mc=None):
    """Fit an ellipsoid to ``E(x', s) = {v : f(x', v) > s}``.

    A heavy-tailed pilot locates the set, a uniform sample of its enlarged
    bounding box gives the second moments, and the shape is rescaled to the
    estimated volume. A fresh uniform sample estimates ``|E Δ fit| / |E|``.
    """
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    dim = f.n - len(x_prime)
    if dim < 1:
        raise DimensionError("Slices need at least one free coordinate.")
    if s <= 0:
        raise ParameterError(f"Superlevel {s} may have infinite measure.")
    mc = MonteCarloConfig() if mc is None else mc
    slice_f = _slice_evaluator(f, x_prime)
    rng = np.random.default_rng(np.random.SeedSequence(mc.seed, spawn_key=mc.stream))

    pilot = f.center[len(x_prime) :] + f.scale * heavy_tail_sample(dim, mc.samples, rng)
    members = pilot[slice_f(pilot) > s]
    if len(members) < dim + 1:
        raise EmptySetError(f"No mass above {s} on the slice at {x_prime}.")
    low, high = members.min(axis=0), members.max(axis=0)
    margin = 0.25 * (high - low) + 1e-9
    low, high = low - margin, high + margin
    box_volume = float(np.prod(high - low))

    uniform = rng.uniform(low, high, (mc.samples, dim))
    inside = slice_f(uniform) > s
    if np.count_nonzero(inside) < dim + 2:
        raise EmptySetError(f"Slice superlevel set at {x_prime} is too thin to fit.")
    hits = inside.mean()
    volume = Estimate(
        box_volume * hits,
        box_volume * math.sqrt(hits * (1 - hits) / mc.samples),
        mc.samples,
        mc.seed,
    )
    points = uniform[inside]
    center = points.mean(axis=0)
    shape = (dim + 2) * np.atleast_2d(np.cov(points, rowvar=False))
    fitted = Ellipsoid(center, shape)
    fitted = Ellipsoid(
        center, shape * (volume.value / fitted.volume) ** (2 / dim)
    )

    # Fresh sample over a box holding both sets.
    reach = np.sqrt(np.diag(fitted.shape))
    low, high = np.minimum(low, center - reach), np.maximum(high, center + reach)
    fresh = rng.uniform(low, high, (mc.samples, dim))
    in_set = slice_f(fresh) > s
    in_fit = fitted.contains(fresh)
    members = max(np.count_nonzero(in_set), 1)
    fraction = np.count_nonzero(in_set ^ in_fit) / members
    fraction_stderr = math.sqrt(np.count_nonzero(in_set ^ in_fit)) / members
    return SliceFit(
        fitted, volume, Estimate(fraction, fraction_stderr, mc.samples, mc.seed)
    )


def rms_norm(vectors):
    """ Root mean square of the Euclidean norms of the rows of ``vectors``. """
    return float(np.sqrt(np.mean(np.sum(vectors ** 2, axis=-1))))


def shared_geometry_check(f, x_primes, levels, mc=None, tolerance=0.05):
    """Test whether slice superlevel sets share one ellipsoid shape with affine
    centers.

    Reports the dispersion of the unimodular shapes, the residual of the least
    squares affine fit of centers against their spread, and the largest
    symmetric difference fraction. Extremizers are also compared with their
    closed-form slice centers and radii.
    """
    mc = MonteCarloConfig() if mc is None else mc
    x_primes = np.atleast_2d(np.asarray(x_primes, dtype=float))
    k = x_primes.shape[1]
    check_dimensions(f.n, k)
    dim = f.n - k
    fits, positions = [], []
    for index, (x_prime, s) in enumerate(
        (x, s) for x in x_primes for s in np.atleast_1d(levels)
    ):
        try:
            fit = ellipsoid_slice_fit(f, x_prime, s, mc.child(index))
        except EmptySetError:
            logger.warning(f"Empty slice superlevel set at {x_prime}, level {s}.")
            continue
        fits.append((x_prime, s, fit))
        positions.append(x_prime)
    if len(fits) < 2:
        raise EmptySetError("Too few nonempty slices to compare.")

    shapes = [fit.ellipsoid.shape for _, _, fit in fits]
    unimodular = np.array([shape / np.linalg.det(shape) ** (1 / dim) for shape in shapes])
    mean_shape = unimodular.mean(axis=0)
    dispersion = max(
        np.linalg.norm(shape - mean_shape) / np.linalg.norm(mean_shape)
        for shape in unimodular
    )

    centers = np.array([fit.ellipsoid.center for _, _, fit in fits])
    design = np.hstack([np.array(positions), np.ones((len(fits), 1))])
    coefficients, *_ = np.linalg.lstsq(design, centers, rcond=None)
    residual = rms_norm(design @ coefficients - centers)
    spread = rms_norm(centers - centers.mean(axis=0))
    size = float(np.mean([fit.radius for _, _, fit in fits]))
    # Centers that do not move are compared with the slice size instead.
    reference = spread if spread > 1e-3 * size else size
    max_fraction = max(fit.fraction.value for _, _, fit in fits)

    report = {
        "slices": len(fits),
        "shape_dispersion": float(dispersion),
        "affine_residual": residual,
        "center_spread": spread,
        "relative_residual": residual / reference,
        "max_fraction": float(max_fraction),
        "shared_shape": bool(dispersion < tolerance),
        "affine_centers": bool(residual < tolerance * reference),
    }
    if isinstance(f, ExtremizerField) and f.k == k:
        center_errors, radius_errors = [], []
        for x_prime, s, fit in fits:
            center, _ = f.slice_ellipsoid(x_prime, s)
            radius = f.slice_radius(x_prime, s)
            center_errors.append(np.linalg.norm(fit.ellipsoid.center - center) / radius)
            radius_errors.append(abs(fit.radius - radius) / radius)
        report["max_center_error"] = float(max(center_errors))
        report["max_radius_error"] = float(max(radius_errors))
    return report


def almost_convexity_probe(E, pairs=10000, segment_samples=16, delta=0.0, mc=None):
    """Share of point pairs of ``E`` whose sampled segments stay in ``E``.

    A pair passes when at least ``1 - delta`` of the points drawn uniformly on
    its segment are members. ``E`` is a set or a ``(field, level)`` pair.
    """
    if not isinstance(E, IndicatorSet):
        E = superlevel_set(*E)
    if E.is_empty:
        raise EmptySetError("Convexity of the empty set.")
    mc = MonteCarloConfig(samples=pairs) if mc is None else mc

    def chunk(rng, size):
        start, end = E.sample(size, rng), E.sample(size, rng)
        t = rng.random((size, segment_samples, 1))
        points = start[:, None] + t * (end - start)[:, None]
        share = E.contains(points).mean(axis=-1)
        return (share >= 1 - delta).astype(float)

    return mc.estimate(chunk)


def scaled_skew_reflection(phi, gamma, L):
    """``Φ = φ⁻¹ ψ⁻¹ 𝓛⁻¹ R 𝓛 ψ φ``.

    ``ψ(x', v) = (x', v - γ(x'))`` for the affine ``γ(x') = G x' + g``,
    ``𝓛(x', v) = (x', L v)`` and ``R`` negates the last coordinate. ``gamma`` is
    the pair ``(G, g)``.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    dim = L.shape[0]
    if L.shape != (dim, dim):
        raise DimensionError(f"L must be square, got {L.shape}.")
    if abs(np.linalg.det(L)) < 1e-12 * max(np.abs(L).max(), 1.0) ** dim:
        raise SingularityError("L is singular.")
    G, g = gamma
    G = np.asarray(G, dtype=float).reshape(dim, -1)
    k = G.shape[1]
    n = k + dim
    phi = phi if isinstance(phi, AffineMap) else AffineMap(phi)
    if phi.n != n:
        raise DimensionError(f"φ acts on R^{phi.n}, expected R^{n}.")

    shear = np.eye(n)
    shear[k:, :k] = -G
    psi = AffineMap(shear, np.concatenate([np.zeros(k), -np.asarray(g, dtype=float)]))
    stretch = np.eye(n)
    stretch[k:, k:] = L
    lift = AffineMap(stretch)
    reflection = AffineMap(np.diag([1.0] * (n - 1) + [-1.0]))
    inner = lift @ psi @ phi
    return inner.inverse() @ reflection @ inner


def matched_skew_reflection(f, phi):
    """The scaled skew reflection leaving the extremizer ``f`` invariant.

    ``γ`` and ``L`` come from the slices of ``f ∘ φ⁻¹``: ``γ`` is their center
    map and ``L`` the square root of their shared quadratic form.
    """
    if not isinstance(f, ExtremizerField):
        raise ParameterError("Matched reflections are built for extremizers.")
    phi = phi if isinstance(phi, AffineMap) else AffineMap(phi)
    g = ExtremizerField(f.n, f.k, f.phi @ phi.inverse(), f.c)
    base, slice_part, _, inverse = g.slice_blocks
    G = -inverse @ slice_part.T @ base
    offset = -inverse @ slice_part.T @ g.phi.translation
    eigenvalues, eigenvectors = eigh(slice_part.T @ slice_part)
    root = eigenvectors * np.sqrt(eigenvalues) @ eigenvectors.T
    return scaled_skew_reflection(phi, (G, offset), root)


def extremizer_corpus(n, k, rng, count=5):
    """ Standard extremizer and ``count`` random affine images of it. """
    p, _ = endpoint_exponents(n, k)
    base = extremizer_field(n, k)
    return [base] + [
        apply_affine_symmetry(base, AffineMap.random(n, rng), p) for _ in range(count)
    ]
