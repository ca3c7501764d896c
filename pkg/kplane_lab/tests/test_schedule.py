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

from string import ascii_lowercase

import numpy as np
import pytest

from .. import ParameterError
from ..fields import (
    AffineMap,
    ExtremizerField,
    GridField,
    discretize,
    extremizer_field,
    full_rearrange,
    gaussian_field,
    slice_rearrange,
)
from ..schedule import (
    DEFAULT_SCHEDULE,
    J,
    MONOTONE_STEPS,
    STEP_ALIASES,
    STEP_METHODS,
    apply_step,
    parse_schedule,
)


def test_step_definitions():
    """ Test symmetrization step definitions. """
    for step_id, method in STEP_METHODS.items():
        # Step IDs are lower case strings with dashes, besides the inversion.
        assert isinstance(step_id, str)
        assert step_id == J or set(step_id).issubset(ascii_lowercase + "-")
        assert callable(method)
    assert MONOTONE_STEPS.issubset(STEP_METHODS)


@pytest.mark.parametrize("aliases", sorted(STEP_ALIASES))
def test_aliases_share_method(aliases):
    assert len({STEP_METHODS[step_id] for step_id in aliases}) == 1


@pytest.mark.parametrize(
    "schedule,expected",
    [
        ("rearrange,J", ("rearrange", "J")),
        (" sharp , inversion ,", ("sharp", "inversion")),
        (["normalize"], ("normalize",)),
        (DEFAULT_SCHEDULE, DEFAULT_SCHEDULE),
    ],
)
def test_parse_schedule(schedule, expected):
    assert parse_schedule(schedule) == expected


@pytest.mark.parametrize("schedule", ["", " , ", [], "rearrange,twist", ["flip"]])
def test_parse_invalid_schedule(schedule):
    with pytest.raises(ParameterError):
        parse_schedule(schedule)


def test_unknown_step_names_choices():
    with pytest.raises(ParameterError) as excinfo:
        parse_schedule("twist,twist,J")
    assert "Unknown twist steps" in str(excinfo.value)
    assert "slice-rearrange" in str(excinfo.value)


def test_apply_step_on_extremizer():
    f = ExtremizerField(3, 1, np.diag([2.0, 0.5, 1.0]))
    rearranged = apply_step("full-rearrange", f, 1)
    assert isinstance(rearranged, ExtremizerField)
    assert rearranged.phi.jacobian == pytest.approx(f.phi.jacobian)
    standard = extremizer_field(3, 1)
    assert apply_step("inversion", standard, 1) is standard


def test_apply_step_on_grid(rng):
    grid = GridField(rng.random((6, 8)), 0.25)
    assert np.array_equal(
        apply_step("rearrange", grid, 1).values,
        full_rearrange(grid).values
    )
    assert np.array_equal(
        apply_step("sharp", grid, 1).values,
        slice_rearrange(grid, 1).values
    )
    normalized = apply_step("normalize", grid, 1)
    assert normalized.dims == grid.dims


def test_apply_step_errors():
    f = gaussian_field(2)
    with pytest.raises(ParameterError):
        apply_step("twist", f, 1)
    # Analytic fields need a grid for rearrangements and normalization.
    for step_id in ("rearrange", "slice-rearrange", "normalize"):
        with pytest.raises(ParameterError):
            apply_step(step_id, f, 1)
    assert isinstance(apply_step("rearrange", discretize(f, 2.0, 0.25), 1), GridField)
