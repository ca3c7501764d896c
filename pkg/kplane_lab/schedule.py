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

""" Symmetrization steps and schedules. """

from boltons.dictutils import FrozenDict
from boltons.iterutils import unique

from . import ParameterError, endpoint_exponents, logger
from .fields import apply_J, full_rearrange, slice_rearrange


def step_rearrange(f, k):
    """ Symmetric decreasing rearrangement over all coordinates. """
    return full_rearrange(f)


def step_slice_rearrange(f, k):
    """ Symmetric decreasing rearrangement of every slice ``v ↦ f(x', v)``. """
    return slice_rearrange(f, k)


def step_J(f, k):
    """ Weighted inversion of the first coordinate. """
    return apply_J(f, k)


def step_affine_normalize(f, k):
    """ Recenter and whiten by the shape of the median superlevel set. """
    # Local import: extremal depends on this module.
    from .extremal import affine_normalize

    return affine_normalize(f, endpoint_exponents(f.n, k)[0])


REARRANGE = "rearrange"
FULL_REARRANGE = "full-rearrange"
SLICE_REARRANGE = "slice-rearrange"
SHARP = "sharp"
J = "J"
INVERSION = "inversion"
AFFINE_NORMALIZE = "affine-normalize"
NORMALIZE = "normalize"


# Steps and their aliases.
STEP_ALIASES = frozenset(
    [
        (REARRANGE, FULL_REARRANGE),
        (SLICE_REARRANGE, SHARP),
        (J, INVERSION),
        (AFFINE_NORMALIZE, NORMALIZE),
    ]
)

# Steps not increasing the transform norm at fixed L^p norm.
MONOTONE_STEPS = frozenset([REARRANGE, FULL_REARRANGE, SLICE_REARRANGE, SHARP])

DEFAULT_SCHEDULE = (REARRANGE, J)


def get_method_id(step_id):
    """ Transform a step ID to its method ID. """
    return "step_" + step_id.replace("-", "_")


def build_method_mapping():
    """Map all step IDs to their method, aliases falling back to the method of
    their canonical step."""
    methods = dict()
    for steps in STEP_ALIASES:
        fallback_method = None
        for step_id in steps:
            method = globals().get(get_method_id(step_id))
            if method:
                fallback_method = method
            if not fallback_method:
                raise NotImplementedError(f"Can't find {get_method_id(step_id)}() method.")
            methods[step_id] = fallback_method
    return methods


STEP_METHODS = FrozenDict(build_method_mapping())


def parse_schedule(schedule):
    """ Validate a schedule given as a sequence or a comma-separated string. """
    if isinstance(schedule, str):
        schedule = [step.strip() for step in schedule.split(",") if step.strip()]
    schedule = tuple(schedule)
    if not schedule:
        raise ParameterError("Empty symmetrization schedule.")
    unknown = [step for step in schedule if step not in STEP_METHODS]
    if unknown:
        raise ParameterError(
            f"Unknown {', '.join(unique(unknown))} steps. Choose among "
            f"{', '.join(sorted(STEP_METHODS))}."
        )
    return schedule


def apply_step(step_id, f, k):
    """ Perform the symmetrization step on the provided field. """
    if step_id not in STEP_METHODS:
        raise ParameterError(f"Unknown {step_id} step.")
    method = STEP_METHODS[step_id]
    logger.debug(f"Apply {method.__name__}...")
    return method(f, k)
