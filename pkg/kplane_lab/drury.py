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

"""Multilinear forms behind the endpoint inequality: the sliced form ``Tx``,
its rearrangement gap, the set functional ``I``, admissibility of radii and the
probes of the equality cases."""

import math
from dataclasses import dataclass
from itertools import product
from typing import Optional, Tuple

import numpy as np

from . import (
    DEFAULT_VOL_THRESHOLD,
    DimensionError,
    ParameterError,
    check_dimensions,
    logger,
)
from .estimate import Estimate, MonteCarloConfig
from .fields import Field, GridField, full_rearrange
from .geometry import (
    CoefficientMatrix,
    anchor_volumes,
    barycentric_coordinates,
    drury_coefficients,
)
from .indicators import Ball, BoxUnion, Ellipsoid, FullSpace, IndicatorSet
from .sampling import ball_volume, heavy_tail_density, heavy_tail_sample
from .transforms import transform_power_samples


@dataclass(frozen=True)
class RadiusFamily:

    """ Positive radii ``ρ_0..ρ_m``, with the coefficients they are tested against. """

    radii: Tuple[float, ...]
    coefficients: Optional[CoefficientMatrix] = None

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        if not radii or min(radii) <= 0:
            raise ParameterError(f"Radii must be positive: {radii}.")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def of_sets(cls, sets, coefficients=None):
        """ Radii of the balls with the volumes of ``sets``. """
        dim = sets[0].dim
        return cls(
            tuple((s.volume / ball_volume(dim)) ** (1 / dim) for s in sets),
            coefficients,
        )


def strict_admissibility(rho):
    """ Strict generalized triangle inequality ``Σ_(j≠i) ρ_j > ρ_i`` for every ``i``. """
    radii = rho.radii if isinstance(rho, RadiusFamily) else tuple(rho)
    total = sum(radii)
    return all(total - r > r for r in radii)


def _entries(b):
    return np.asarray(b.entries if isinstance(b, CoefficientMatrix) else b, float)


def permissibility(rho, b=None):
    """Check both clauses of permissibility of radii with respect to ``b``.

    The first clause is strict admissibility of the weighted radii
    ``|b_(k+1),j| ρ_j`` for ``j ≤ k+1``, with ``b_(k+1),(k+1) = 1``. The second
    requires ``Σ_(j≤k) |b_ij| ρ_j < ρ_i`` for every row ``i ≥ k+2``.

    Returns the verdict and a report of each clause per index.
    """
    if isinstance(rho, RadiusFamily):
        b = rho.coefficients if b is None else b
        radii = np.array(rho.radii)
    else:
        radii = np.asarray(rho, dtype=float)
    if b is None:
        raise ParameterError("Permissibility needs a coefficient matrix.")
    entries = _entries(b)
    rows, columns = entries.shape
    k = columns - 1
    if len(radii) != rows:
        raise DimensionError(f"{len(radii)} radii for {rows} coefficient rows.")

    pivot = np.append(np.abs(entries[k + 1]), 1.0) * radii[: k + 2]
    adm_a = [bool(pivot.sum() - pivot[i] > pivot[i]) for i in range(k + 2)]
    adm_b = [
        bool(np.abs(entries[i]) @ radii[: k + 1] < radii[i]) for i in range(k + 2, rows)
    ]
    failures = [f"admA[{i}]" for i, ok in enumerate(adm_a) if not ok] + [
        f"admB[{i}]" for i, ok in zip(range(k + 2, rows), adm_b) if not ok
    ]
    verdict = not failures
    return verdict, {
        "permissible": verdict,
        "admA": adm_a,
        "admB": adm_b,
        "failed": failures,
    }


def _slot_dim(slot):
    return slot.dim if isinstance(slot, IndicatorSet) else slot.n


def draw_slot(slot, size, rng):
    """Points and weights whose weighted mean integrates against ``slot``.

    Sets are sampled uniformly with their volume as weight. Grid fields sample
    cells in proportion to their values with the total mass as weight. Other
    fields use the heavy-tailed law around their center.
    """
    dim = _slot_dim(slot)
    if isinstance(slot, FullSpace):
        raise ParameterError("The whole space cannot be a sampled slot.")
    if isinstance(slot, IndicatorSet):
        if slot.is_empty:
            return np.zeros((size, dim)), np.zeros(size)
        return slot.sample(size, rng), np.full(size, slot.volume)
    if isinstance(slot, GridField):
        mass = slot.integral()
        if not mass:
            return np.zeros((size, dim)), np.zeros(size)
        weights = slot.values.ravel() / slot.values.sum()
        cells = rng.choice(slot.values.size, size=size, p=weights)
        index = np.stack(np.unravel_index(cells, slot.dims), axis=-1)
        points = slot.lower + slot.h * (index + rng.random((size, dim)))
        return points, np.full(size, mass)
    standard = heavy_tail_sample(dim, size, rng)
    points = slot.center + slot.scale * standard
    return points, slot(points) * slot.scale ** dim / heavy_tail_density(standard)


def slot_values(slot, points):
    if isinstance(slot, IndicatorSet):
        return slot.contains(points).astype(float)
    return slot(points)


def _check_slots(slots, entries):
    if len(slots) != entries.shape[0]:
        raise DimensionError(f"{len(slots)} slots for {entries.shape[0]} rows.")
    dims = {_slot_dim(slot) for slot in slots}
    if len(dims) != 1:
        raise DimensionError(f"Slots live in different dimensions: {dims}.")


def tx_samples(slots, entries, size, rng):
    """ Per-sample contributions to ``Tx(F_0, …, F_n)``. """
    k = entries.shape[1] - 1
    draws = [draw_slot(slot, size, rng) for slot in slots[: k + 1]]
    v = np.stack([points for points, _ in draws])
    values = np.prod([weights for _, weights in draws], axis=0)
    for slot, row in zip(slots[k + 1 :], entries[k + 1 :]):
        if isinstance(slot, FullSpace):
            continue
        values = values * slot_values(slot, np.einsum("j,jsd->sd", row, v))
    return values


def multilinear_form_Tx(slots, b, mc=None):
    """Estimate ``∫ Π_i F_i(Σ_j b_ij v_j) dv_0 … dv_k``.

    Slots are fields or indicator sets on ``R^(n-k)``. The first ``k+1`` slots
    drive the sampling, the others are evaluated at the combinations.
    """
    mc = MonteCarloConfig() if mc is None else mc
    entries = _entries(b)
    _check_slots(slots, entries)
    return mc.estimate(lambda rng, size: tx_samples(slots, entries, size, rng))


def paired_samples(first, second, mc):
    """Per-sample differences ``second - first`` with common random numbers.

    Both sample functions replay the same generator state in every chunk.
    """

    def chunk(rng, size):
        state = rng.bit_generator.state
        base = first(rng, size)
        rng.bit_generator.state = state
        return base, second(rng, size)

    return mc.map(chunk)


def rearrange_slot(slot):
    if isinstance(slot, IndicatorSet):
        return slot.rearranged()
    if isinstance(slot, Field):
        return full_rearrange(slot)
    raise ParameterError(f"Cannot rearrange {slot!r}.")


def bll_gap(slots, b, mc=None):
    """``Tx(F_0*, …, F_n*) - Tx(F_0, …, F_n)``, nonnegative up to sampling error.

    Both forms share their random streams and the standard error comes from
    the paired differences.
    """
    mc = MonteCarloConfig() if mc is None else mc
    entries = _entries(b)
    _check_slots(slots, entries)
    stars = [rearrange_slot(slot) for slot in slots]
    original, rearranged = paired_samples(
        lambda rng, size: tx_samples(slots, entries, size, rng),
        lambda rng, size: tx_samples(stars, entries, size, rng),
        mc,
    )
    return Estimate.from_samples(rearranged - original, seed=mc.seed)


def indicator_form_I(sets, mc=None):
    """Estimate ``∫ Π_(i≥1) 1_(E_i)(x_i) · 1_(E_0)(x_1 - Σ_(i≥2) x_i)``.

    Symmetric in ``E_1..E_m`` when ``E_0`` is symmetric about the origin.
    """
    mc = MonteCarloConfig() if mc is None else mc
    if len(sets) < 2:
        raise DimensionError("The set functional needs at least two sets.")
    if any(s.is_empty for s in sets):
        return Estimate(0.0, 0.0, 0, mc.seed)
    constraint, factors = sets[0], sets[1:]
    signs = np.array([1.0] + [-1.0] * (len(factors) - 1))

    def chunk(rng, size):
        points = np.stack([s.sample(size, rng) for s in factors])
        volume = math.prod(s.volume for s in factors)
        return volume * constraint(np.einsum("i,isd->sd", signs, points))

    return mc.estimate(chunk)


def clip_polygon(polygon, normal, bound):
    """ Part of a convex polygon in the half-plane ``⟨normal, x⟩ ≤ bound``. """
    clipped = []
    for index, current in enumerate(polygon):
        previous = polygon[index - 1]
        current_in = normal @ current <= bound
        previous_in = normal @ previous <= bound
        if current_in != previous_in:
            t = (bound - normal @ previous) / (normal @ (current - previous))
            clipped.append(previous + t * (current - previous))
        if current_in:
            clipped.append(current)
    return clipped


def polygon_area(polygon):
    """ Shoelace formula. """
    if len(polygon) < 3:
        return 0.0
    x, y = np.array(polygon).T
    return abs(float(x @ np.roll(y, -1) - y @ np.roll(x, -1))) / 2


def _rectangle(first, second):
    return [
        np.array(corner)
        for corner in (
            (first[0], second[0]),
            (first[1], second[0]),
            (first[1], second[1]),
            (first[0], second[1]),
        )
    ]


def exact_planar_form(sets, b):
    """Exact ``Tx`` of 1-D sets with two sampled slots.

    Each term clips a rectangle of interval pairs with the slabs of the other
    constraints. Every set must be a finite union of bounded intervals, except
    constraint sets which may be the whole line.
    """
    entries = _entries(b)
    if entries.shape[1] != 2:
        raise DimensionError("Exact planar forms need exactly two sampled slots.")
    _check_slots(sets, entries)
    if _slot_dim(sets[0]) != 1:
        raise DimensionError("Exact planar forms need sets of the line.")
    constraints = [
        (row, s.intervals()) for row, s in zip(entries[2:], sets[2:])
        if not isinstance(s, FullSpace)
    ]
    total = 0.0
    for first, second in product(sets[0].intervals(), sets[1].intervals()):
        if any(map(math.isinf, first + second)):
            raise ParameterError("Sampled slots must be bounded.")
        pieces = [_rectangle(first, second)]
        for row, intervals in constraints:
            pieces = [
                clip_polygon(clip_polygon(piece, row, high), -row, -low)
                for piece in pieces
                for low, high in intervals
            ]
            pieces = [piece for piece in pieces if len(piece) > 2]
        total += sum(polygon_area(piece) for piece in pieces)
    return total


def exact_indicator_form(sets):
    """ Exact ``I(E_0, E_1, E_2)`` of 1-D sets. """
    if len(sets) != 3:
        raise DimensionError("Exact set functional needs three sets.")
    return exact_planar_form(
        [sets[1], sets[2], sets[0]], np.array([[1.0, 0.0], [0.0, 1.0], [1.0, -1.0]])
    )


def redundancy_check(sets, b, mc=None):
    """Compare ``Tx(E_0*, …, E_n*)`` with the form where the sets after ``E_(k+1)*``
    are replaced by the whole space.

    Permissible radii make the trailing constraints redundant: the two forms
    agree. Both forms share their random streams.
    """
    mc = MonteCarloConfig() if mc is None else mc
    entries = _entries(b)
    _check_slots(sets, entries)
    k = entries.shape[1] - 1
    verdict, clauses = False, {}
    if not any(s.is_empty for s in sets):
        verdict, clauses = permissibility(RadiusFamily.of_sets(sets), entries)
    stars = [rearrange_slot(s) for s in sets]
    relaxed = stars[: k + 2] + [FullSpace(s.dim) for s in stars[k + 2 :]]
    full, truncated = paired_samples(
        lambda rng, size: tx_samples(stars, entries, size, rng),
        lambda rng, size: tx_samples(relaxed, entries, size, rng),
        mc,
    )
    gap = Estimate.from_samples(truncated - full, seed=mc.seed)
    return {
        "full": Estimate.from_samples(full, seed=mc.seed),
        "relaxed": Estimate.from_samples(truncated, seed=mc.seed),
        "gap": gap,
        "redundant": gap.agrees_with(0.0),
        "permissible": verdict,
        "clauses": clauses,
    }


def burchard_equality_probe(sets, b, mc=None):
    """Normalized rearrangement gap ``[Tx(E*) - Tx(E)] / Tx(E*)``.

    Vanishes for ellipsoidal families with compatible centers and dilations,
    and is positive for perturbed families.
    """
    mc = MonteCarloConfig() if mc is None else mc
    entries = _entries(b)
    _check_slots(sets, entries)
    stars = [rearrange_slot(s) for s in sets]
    original, rearranged = paired_samples(
        lambda rng, size: tx_samples(sets, entries, size, rng),
        lambda rng, size: tx_samples(stars, entries, size, rng),
        mc,
    )
    star_form = Estimate.from_samples(rearranged, seed=mc.seed)
    if not star_form.value:
        return {"form": star_form, "gap": Estimate(0.0), "equality": True}
    # Delta method on the paired ratio.
    influence = (rearranged - original) / star_form.value - (
        1 - original.mean() / rearranged.mean()
    ) * rearranged / star_form.value
    normalized = Estimate(
        1 - original.mean() / rearranged.mean(),
        float(influence.std(ddof=1) / math.sqrt(len(influence))),
        len(influence),
        mc.seed,
    )
    verdict, clauses = permissibility(RadiusFamily.of_sets(sets), entries)
    return {
        "form": star_form,
        "original_form": Estimate.from_samples(original, seed=mc.seed),
        "gap": normalized,
        # Rearranged radii round to a few ulps.
        "equality": normalized.agrees_with(0.0, atol=1e-12),
        "permissible": verdict,
        "clauses": clauses,
    }


def random_bll_instance(n, k, rng, spread=1.0):
    """Random boxes of ``R^(n-k)`` with generic translations, and the coefficients
    of random Gaussian anchors and extra points of ``R^k``."""
    check_dimensions(n, k)
    dim = n - k
    points = rng.standard_normal((n + 1, k))
    b = drury_coefficients(points[: k + 1], points[k + 1 :])
    halves = rng.uniform(0.3, 1.0, (n + 1, dim))
    centers = spread * rng.uniform(-1, 1, (n + 1, dim))
    sets = [BoxUnion.box(c - h, c + h) for c, h in zip(centers, halves)]
    return sets, b


def square_substitution(sets, index=0):
    """Replace ``sets[index]`` by the cube of the same volume and center."""
    target = sets[index]
    center = getattr(target, "center", np.zeros(target.dim))
    half = target.volume ** (1 / target.dim) / 2
    return sets[:index] + [BoxUnion.cube(center, half)] + sets[index + 1 :]


def ellipsoidal_family(b, alphas, betas, shape):
    """Sets in the equality form ``b_(k+1),i E_i = β_i + α_i 𝓔``.

    ``𝓔`` is the centered ellipsoid of the given shape, ``betas`` holds
    ``β_0..β_k`` and ``β_(k+1)`` is their sum. Rows past ``k+1`` get balls large
    enough to contain every combination ``Σ_j b_ij v_j``.
    """
    entries = _entries(b)
    k = entries.shape[1] - 1
    alphas = np.asarray(alphas, dtype=float)
    betas = np.atleast_2d(np.asarray(betas, dtype=float))
    if len(alphas) != k + 2 or len(betas) != k + 1:
        raise DimensionError(f"Expected {k + 2} dilations and {k + 1} centers.")
    if np.any(alphas <= 0):
        raise ParameterError("Dilations must be positive.")
    pivot = np.append(entries[k + 1], 1.0)
    if np.any(pivot == 0):
        raise ParameterError("The equality form needs nonzero coefficients.")
    centers = np.vstack([betas, betas.sum(axis=0)])
    base = Ellipsoid(np.zeros(betas.shape[1]), shape)
    sets = [
        Ellipsoid(center / weight, (alpha / weight) ** 2 * base.shape)
        for center, alpha, weight in zip(centers, alphas, pivot)
    ]
    reach = [math.sqrt(np.linalg.eigvalsh(s.shape).max()) for s in sets[: k + 1]]
    for row in entries[k + 2 :]:
        center = sum(weight * s.center for weight, s in zip(row, sets))
        sets.append(Ball(center, 1.5 * np.abs(row) @ reach))
    return sets


def drury_identity_check(
    f, k, mc=None, quad=None, anchor_law="heavy", vol_threshold=DEFAULT_VOL_THRESHOLD
):
    """Compare ``‖T f‖^(n+1)`` with the sliced multilinear integral.

    The sliced side integrates ``|vol_k(x'_0..x'_k)|^(k-n) Π_i f(x'_i, Σ_j b_ij v_j)``
    over anchors ``x'_0..x'_n`` and ``v_0..v_k``. Anchor simplices with a volume
    below ``vol_threshold · scale^k`` are rejected; their count and the share of
    the sampled mass they carry are reported.
    """
    n = f.n
    check_dimensions(n, k)
    if anchor_law not in ("heavy", "gaussian"):
        raise ParameterError(f"Unknown anchor law {anchor_law!r}.")
    mc = MonteCarloConfig() if mc is None else mc
    dim = n - k
    center, scale = f.center, f.scale
    threshold = vol_threshold * scale ** k

    def draw_anchors(rng, size):
        if anchor_law == "gaussian":
            standard = rng.standard_normal((n + 1, size, k))
            squares = np.sum(standard ** 2, axis=-1)
            density = np.exp(-squares / 2) / (2 * math.pi) ** (k / 2)
        else:
            standard = heavy_tail_sample(k, (n + 1) * size, rng).reshape(n + 1, size, k)
            density = heavy_tail_density(standard)
        weights = np.prod(scale ** k / density, axis=0)
        return center[:k] + scale * standard, weights

    def chunk(rng, size):
        anchors, weights = draw_anchors(rng, size)
        simplex = np.swapaxes(anchors[: k + 1], 0, 1)
        volumes = np.abs(anchor_volumes(simplex))
        kept = volumes >= threshold
        regular = volumes > 0
        standard = heavy_tail_sample(dim, (k + 1) * size, rng).reshape(k + 1, size, dim)
        v = center[k:] + scale * standard
        with np.errstate(all="ignore"):
            coefficients = barycentric_coordinates(
                np.where(regular[:, None, None], simplex, np.eye(k + 1, k)),
                np.swapaxes(anchors[k + 1 :], 0, 1),
            )
            combos = np.einsum("sij,jsd->isd", coefficients, v)
            anchored = f(np.concatenate([anchors[: k + 1], v], axis=-1))
            extras = f(np.concatenate([anchors[k + 1 :], combos], axis=-1))
            values = (
                weights
                * np.prod(anchored / heavy_tail_density(standard), axis=0)
                * scale ** (dim * (k + 1))
                * np.prod(extras, axis=0)
                * np.where(regular, volumes, 1.0) ** (k - n)
            )
        values = np.where(regular, values, 0.0)
        return np.where(kept, values, 0.0), np.where(kept, 0.0, values), ~kept

    if f.is_zero:
        zero = Estimate(0.0, 0.0, mc.samples, mc.seed)
        return {
            "transform_side": zero,
            "sliced_side": zero,
            "constant": None,
            "rejected_fraction": 0.0,
            "rejected_mass": 0.0,
        }

    transform_side = Estimate.from_samples(
        transform_power_samples(f, k, mc.child(0), quad), seed=mc.seed
    )
    kept, rejected, flags = mc.child(1).map(chunk)
    sliced_side = Estimate.from_samples(kept, seed=mc.seed)
    rejected = rejected[np.isfinite(rejected)]
    total = kept.sum() + rejected.sum()
    rejected_mass = float(rejected.sum() / total) if total else 0.0
    rejected_fraction = float(flags.mean())
    logger.debug(
        f"Rejected {flags.sum()} degenerate anchor simplices "
        f"({rejected_mass:.2e} of the sampled mass)."
    )
    if rejected_mass > 0.01:
        logger.warning(f"Rejected anchors carry {rejected_mass:.2%} of the mass.")
    return {
        "transform_side": transform_side,
        "sliced_side": sliced_side,
        "constant": transform_side.ratio(sliced_side) if sliced_side.value else None,
        "rejected_fraction": rejected_fraction,
        "rejected_mass": rejected_mass,
    }
