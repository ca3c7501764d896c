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

""" Estimates and the reproducible, worker-splittable Monte Carlo machinery. """

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from . import (
    DEFAULT_CHUNK_SIZE,
    DEFAULT_DIRECTIONS,
    DEFAULT_NODES,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    SIGMAS,
    TRUNCATION_TOLERANCE,
    NonIntegrableError,
    ParameterError,
    logger,
)


@dataclass(frozen=True)
class Estimate:

    """A sampled or quadrature value with its standard error.

    For Monte Carlo estimates ``stderr`` derives from the sample variance and
    ``value`` is the sample mean. Deterministic quadratures report the gap with
    a coarser rule as their ``stderr`` and have no ``seed``.
    """

    value: float
    stderr: float = 0.0
    samples: int = 0
    seed: Optional[int] = None

    @classmethod
    def from_samples(cls, values, seed=None):
        """ Mean and standard error of a 1-D array of i.i.d. contributions. """
        values = np.asarray(values, dtype=float).ravel()
        if not np.all(np.isfinite(values)):
            raise NonIntegrableError(
                f"{np.count_nonzero(~np.isfinite(values))} non-finite contributions."
            )
        count = values.size
        if not count:
            return cls(0.0, 0.0, 0, seed)
        stderr = float(values.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
        return cls(float(values.mean()), stderr, count, seed)

    def power(self, exponent):
        """ Propagate the error to ``value ** exponent`` with the delta method. """
        if self.value == 0:
            return replace(self, stderr=self.stderr ** exponent if self.stderr else 0.0)
        value = abs(self.value) ** exponent
        return replace(
            self,
            value=value,
            stderr=abs(exponent) * value / abs(self.value) * self.stderr,
        )

    def scaled(self, factor):
        return replace(self, value=self.value * factor, stderr=self.stderr * abs(factor))

    def ratio(self, other):
        """Quotient of two independent estimates.

        Raises ``ZeroDivisionError`` on a null denominator.
        """
        value = self.value / other.value
        rel = math.hypot(
            self.stderr / self.value if self.value else 0.0,
            other.stderr / other.value,
        )
        return Estimate(
            value, abs(value) * rel, min(self.samples, other.samples), self.seed
        )

    def difference(self, other):
        """ Difference of two independent estimates. """
        return Estimate(
            self.value - other.value,
            math.hypot(self.stderr, other.stderr),
            min(self.samples, other.samples),
            self.seed,
        )

    def agrees_with(self, target, sigmas=SIGMAS, atol=0.0):
        """ Is ``target`` within ``sigmas`` standard errors (plus ``atol``)? """
        target_err = getattr(target, "stderr", 0.0)
        target = getattr(target, "value", target)
        return abs(self.value - target) <= sigmas * math.hypot(
            self.stderr, target_err
        ) + atol

    def as_dict(self):
        return {
            "value": self.value,
            "stderr": self.stderr,
            "samples": self.samples,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class QuadratureConfig:

    """ Plane quadrature settings. """

    nodes: int = DEFAULT_NODES
    directions: int = DEFAULT_DIRECTIONS
    tolerance: float = TRUNCATION_TOLERANCE


@dataclass(frozen=True)
class MonteCarloConfig:

    """Sample budget and seeding of a stochastic estimator.

    ``stream`` is the spawn key of the estimator's substream below the run seed:
    estimators of one report get distinct keys and stay independent.
    """

    samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    workers: int = 1
    stream: Tuple[int, ...] = field(default=())
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def __post_init__(self):
        if self.samples <= 0:
            raise ParameterError(f"Sample count must be positive: {self.samples}.")
        if self.workers < 1:
            raise ParameterError(f"Worker count must be positive: {self.workers}.")
        if isinstance(self.stream, int):
            object.__setattr__(self, "stream", (self.stream,))

    def child(self, key, samples=None):
        """ Independent substream, optionally with another sample budget. """
        return replace(
            self,
            stream=self.stream + (key,),
            samples=self.samples if samples is None else int(samples),
        )

    def chunk_sizes(self):
        full, rest = divmod(self.samples, self.chunk_size)
        return [self.chunk_size] * full + ([rest] if rest else [])

    def generators(self):
        """ One generator per chunk, spawned from the substream seed sequence. """
        root = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        sizes = self.chunk_sizes()
        return [np.random.default_rng(child) for child in root.spawn(len(sizes))]

    def map(self, func):
        """Evaluate ``func(rng, size)`` on every chunk and concatenate the results.

        ``func`` returns an array or a tuple of arrays, whose first axis runs over
        samples. Chunks are reduced in their natural order whatever the number of
        workers, so the output only depends on the seed and the sample count.
        """
        sizes = self.chunk_sizes()
        rngs = self.generators()
        logger.debug(
            f"Draw {self.samples} samples in {len(sizes)} chunks on "
            f"{self.workers} workers (stream {self.stream})."
        )
        if self.workers == 1:
            parts = [func(rng, size) for rng, size in zip(rngs, sizes)]
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                parts = list(executor.map(func, rngs, sizes))

        if isinstance(parts[0], tuple):
            return tuple(np.concatenate(group) for group in zip(*parts))
        return np.concatenate(parts)

    def estimate(self, func):
        """ Shortcut producing the ``Estimate`` of the mean of ``func``'s samples. """
        return Estimate.from_samples(self.map(func), seed=self.seed)
