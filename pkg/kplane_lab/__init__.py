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

""" Expose package-wide elements. """

import logging
from pathlib import Path

import tomlkit
from boltons.ecoutils import get_profile

# Canonical name of the CLI.
CLI_NAME = "kplab"

__version__ = "1.0.0"


# Environment data.
env_data = get_profile(scrub=True)


# Initialize global logger.
logger = logging.getLogger(CLI_NAME)


# Default seed of all random streams. Every report records the seed it used.
DEFAULT_SEED = 0

# Default number of outer Monte Carlo samples per estimator.
DEFAULT_SAMPLES = 20_000

# Samples are processed in chunks of this size, each with its own random
# substream. The chunk layout only depends on the sample count, so that results
# do not change with the number of workers.
DEFAULT_CHUNK_SIZE = 4096

# Radial Gauss-Legendre nodes per ray of the plane quadrature. Must be a
# multiple of the panel size.
DEFAULT_NODES = 96
PANEL_SIZE = 16

# Number of directions of the angular rule of the plane quadrature when k ≥ 2.
DEFAULT_DIRECTIONS = 32

# Plane integrals are truncated where the declared decay bound of a field drops
# below this fraction of its peak.
TRUNCATION_TOLERANCE = 1e-8

# Anchor simplices with a k-volume below this threshold, relative to the field
# scale, are rejected in the sliced Drury integral.
DEFAULT_VOL_THRESHOLD = 1e-3

# Anchors of the Drury coefficients are considered degenerate below this
# relative k-volume.
SINGULARITY_TOLERANCE = 1e-12

# Number of standard errors within which two estimates are considered equal.
SIGMAS = 3


class KPlaneError(Exception):

    """ Base class of all errors raised by the laboratory. """


class ConfigError(KPlaneError, ValueError):

    """ Run configuration is inconsistent. """


class DimensionError(KPlaneError, ValueError):

    """ Dimensions or shapes are out of range or mismatched. """


class ParameterError(KPlaneError, ValueError):

    """ A scalar parameter is out of its allowed range. """


class ConsistencyError(KPlaneError, ValueError):

    """ Inputs contradict a structural requirement, like nested layers. """


class EmptySetError(KPlaneError, ValueError):

    """ A set expected to have positive volume is empty. """


class BoundaryError(KPlaneError, ValueError):

    """ Evaluation on the equator of the hemisphere. """


class NumericalError(KPlaneError, ArithmeticError):

    """ Base class of numerical failures, reported by the CLI with exit code 1. """


class SingularityError(NumericalError):

    """ Degenerate simplex or singular linear map. """


class NonIntegrableError(NumericalError):

    """ An integral diverges or an estimate is not finite. """


class InfiniteMeasureError(NumericalError):

    """ A superlevel set or an integration slot has infinite measure. """


class UndefinedRatioError(NumericalError):

    """ The ratio functional is undefined on a field of zero norm. """


class IterationError(NumericalError):

    """ The symmetrization iteration collapsed to the zero field. """


def endpoint_exponents(n, k):
    """Returns the ``(p, q)`` endpoint exponents of the k-plane transform in
    dimension ``n``."""
    return (n + 1) / (k + 1), n + 1


def check_dimensions(n, k):
    """ Raise a ``DimensionError`` unless ``1 ≤ k ≤ n - 1``. """
    if not (isinstance(n, int) and isinstance(k, int)) or not 1 <= k <= n - 1:
        raise DimensionError(f"Requires 1 ≤ k ≤ n - 1, got n={n!r} and k={k!r}.")


class RunConfig:

    """ Holds the configuration of an experiment run. """

    # Keep these defaults in sync with CLI option definitions.
    default_conf = {
        "n": 2,
        "k": 1,
        "seed": DEFAULT_SEED,
        "samples": DEFAULT_SAMPLES,
        "workers": 1,
        "nodes": DEFAULT_NODES,
        "directions": DEFAULT_DIRECTIONS,
        "offset_radius": None,
        "vol_threshold": DEFAULT_VOL_THRESHOLD,
        "tolerance": TRUNCATION_TOLERANCE,
        "out": None,
        "fields": (),
    }

    def __init__(self, **kwargs):
        """ Validates configuration parameter types and values. """
        # Load default values.
        self.conf = self.default_conf.copy()

        unrecognized_options = set(kwargs) - set(self.default_conf)
        if unrecognized_options:
            raise ConfigError(f"Unrecognized {unrecognized_options} options.")

        # Replace defaults values with our config, skipping unset CLI options.
        self.conf.update({key: val for key, val in kwargs.items() if val is not None})

        try:
            check_dimensions(self.n, self.k)
        except DimensionError as ex:
            raise ConfigError(str(ex)) from ex
        if self.samples <= 0:
            raise ConfigError(f"Sample count must be positive, got {self.samples}.")
        if self.workers < 1:
            raise ConfigError(f"Worker count must be positive, got {self.workers}.")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"Seed must be a 64-bit unsigned integer: {self.seed}.")
        if self.nodes < PANEL_SIZE or self.nodes % PANEL_SIZE:
            raise ConfigError(f"Nodes must be a positive multiple of {PANEL_SIZE}.")
        if self.offset_radius is not None and self.offset_radius <= 0:
            raise ConfigError("Offset radius must be positive.")

        self.fields = tuple(self.fields)
        if self.out:
            self.out = Path(self.out).resolve()

    def __getattr__(self, attr_id):
        """ Expose configuration entries as properties. """
        if attr_id != "conf" and attr_id in self.conf:
            return self.conf[attr_id]
        raise AttributeError(attr_id)

    def __setattr__(self, attr_id, value):
        if attr_id != "conf" and attr_id in self.default_conf:
            self.conf[attr_id] = value
        else:
            super().__setattr__(attr_id, value)

    @classmethod
    def from_toml(cls, path, **overrides):
        """Load configuration from a TOML file.

        Command-line values in ``overrides`` take precedence over file content.
        """
        logger.debug(f"Load configuration from {path}")
        document = tomlkit.parse(Path(path).read_text())
        file_conf = {
            key.replace("-", "_"): value.unwrap() if hasattr(value, "unwrap") else value
            for key, value in document.items()
        }
        file_conf.update({key: val for key, val in overrides.items() if val is not None})
        return cls(**file_conf)

    def as_dict(self):
        """ Resolved configuration, serializable as JSON. """
        resolved = dict(self.conf)
        resolved["out"] = str(self.out) if self.out else None
        resolved["fields"] = list(self.fields)
        return resolved

    def mc_config(self, offset=0):
        """Derive the Monte Carlo configuration of an estimator.

        ``offset`` selects an independent child stream of the run seed.
        """
        # Local import: estimate depends on this module.
        from .estimate import MonteCarloConfig

        return MonteCarloConfig(
            samples=self.samples,
            seed=self.seed,
            workers=self.workers,
            stream=offset,
        )

    def quadrature_config(self):
        """ Derive the plane quadrature configuration. """
        from .estimate import QuadratureConfig

        return QuadratureConfig(
            nodes=self.nodes, directions=self.directions, tolerance=self.tolerance
        )
