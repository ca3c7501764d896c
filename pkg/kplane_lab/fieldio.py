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

""" Field specifications and grid serialization. """

import json
import struct
from pathlib import Path

import numpy as np
import tomlkit
from boltons.dictutils import FrozenDict

from . import ConsistencyError, DimensionError, ParameterError, logger
from .fields import (
    AffineMap,
    GridField,
    extremizer_field,
    gaussian_field,
    indicator_field,
)
from .geometry import CoefficientMatrix
from .indicators import (
    Ball,
    BoxUnion,
    Ellipsoid,
    EmptySet,
    FullSpace,
    GridMask,
    SetUnion,
)

BUILTIN_PREFIX = "builtin:"
FILE_PREFIX = "file:"

BINARY_SUFFIX = ".kpf"
TEXT_SUFFIX = ".toml"

# Axis names of center coordinates in field specifications.
CENTER_KEYS = ("cx", "cy", "cz", "cw")

FIELD_PARAMETERS = frozenset(("c", "scale", "shear", "half", "radius") + CENTER_KEYS)


def _center(params, n):
    center = np.zeros(n)
    for axis, key in enumerate(CENTER_KEYS):
        if key in params:
            if axis >= n:
                raise DimensionError(f"No {key!r} coordinate in R^{n}.")
            center[axis] = params[key]
    return center


def build_extremizer(n, k, params):
    """``c (1 + |φ(x)|²)^(-(k+1)/2)`` with ``φ(x) = S (x - center) / scale`` and
    ``S`` the unit shear mixing the last axis into the first one."""
    scale = params.get("scale", 1.0)
    if scale <= 0:
        raise ParameterError(f"Scale must be positive: {scale}.")
    linear = np.eye(n)
    linear[0, n - 1] += params.get("shear", 0.0)
    linear /= scale
    center = _center(params, n)
    return extremizer_field(
        n, k, AffineMap(linear, -linear @ center), params.get("c", 1.0)
    )


def build_gaussian(n, k, params):
    """Gaussian field of the given ``scale`` and amplitude ``c`` at ``center``."""
    return gaussian_field(
        n, _center(params, n), params.get("scale", 1.0), params.get("c", 1.0)
    )


def build_indicator_box(n, k, params):
    """``c`` times the indicator of the box of half-width ``half`` at ``center``."""
    return indicator_field(
        n, "box", _center(params, n), params.get("half", 0.5), params.get("c", 1.0)
    )


def build_indicator_ball(n, k, params):
    """``c`` times the indicator of the ball of given ``radius`` at ``center``."""
    return indicator_field(
        n, "ball", _center(params, n), params.get("radius", 1.0), params.get("c", 1.0)
    )


# Builtin kinds and their aliases.
BUILTIN_ALIASES = frozenset(
    [
        ("extremizer", "standard"),
        ("gaussian", "normal"),
        ("indicator:box", "indicator:cube"),
        ("indicator:ball", "indicator:disk"),
    ]
)


def get_builder_id(kind):
    """ Transform a builtin kind to its builder function name. """
    return "build_" + kind.replace(":", "_")


def build_builder_mapping():
    """Map every builtin kind, aliases included, to the builder of its canonical
    form."""
    builders = dict()
    for kinds in BUILTIN_ALIASES:
        builder = None
        for kind in kinds:
            builder = globals().get(get_builder_id(kind)) or builder
            if not builder:
                raise NotImplementedError(f"Can't find {get_builder_id(kind)}().")
            builders[kind] = builder
    return builders


BUILTIN_BUILDERS = FrozenDict(build_builder_mapping())


def parse_builtin(spec):
    """Split ``extremizer:cx=1,scale=2`` into its kind and its float parameters.

    Segments are separated by ``:`` or ``,``. Segments without ``=`` make the
    kind, the others are parameters.
    """
    kind_parts, params = [], {}
    for segment in spec.replace(",", ":").split(":"):
        segment = segment.strip()
        if not segment:
            continue
        if "=" not in segment:
            if params:
                raise ParameterError(f"Kind segment {segment!r} after parameters.")
            kind_parts.append(segment)
            continue
        key, _, value = segment.partition("=")
        key = key.strip()
        if key not in FIELD_PARAMETERS:
            raise ParameterError(f"Unknown field parameter {key!r}.")
        try:
            params[key] = float(value)
        except ValueError as ex:
            raise ParameterError(f"Parameter {key!r} is not a number: {value!r}") from ex
    kind = ":".join(kind_parts)
    if kind not in BUILTIN_BUILDERS:
        raise ParameterError(
            f"Unknown builtin field {kind!r}. Choose among "
            f"{', '.join(sorted(BUILTIN_BUILDERS))}."
        )
    return kind, params


def load_field(spec, n, k):
    """Build a field from its command-line specification.

    ``builtin:<kind>[:<key>=<value>...]`` selects a closed-form field,
    ``file:<path>`` or any other string loads a serialized grid.
    """
    if spec.startswith(BUILTIN_PREFIX):
        kind, params = parse_builtin(spec[len(BUILTIN_PREFIX) :])
        logger.debug(f"Build builtin {kind} field with {params}.")
        return BUILTIN_BUILDERS[kind](n, k, params)
    path = spec[len(FILE_PREFIX) :] if spec.startswith(FILE_PREFIX) else spec
    field = read_grid(path)
    if field.n != n:
        raise DimensionError(f"{path} holds a field on R^{field.n}, not R^{n}.")
    return field


def write_grid(grid, path):
    """ Serialize ``grid`` to the binary or TOML layout selected by the suffix. """
    path = Path(path)
    if path.suffix == TEXT_SUFFIX:
        path.write_text(dumps_grid(grid))
    else:
        path.write_bytes(grid_to_bytes(grid))
    logger.debug(f"{grid!r} written to {path}")
    return path


def read_grid(path):
    path = Path(path)
    if not path.is_file():
        raise ParameterError(f"No field file at {path}.")
    if path.suffix == TEXT_SUFFIX:
        return loads_grid(path.read_text())
    return grid_from_bytes(path.read_bytes())


def grid_to_bytes(grid):
    """Binary layout: little-endian int64 ``n`` and dims, float64 cell size,
    lower then upper support corners, then the row-major float64 values."""
    header = struct.pack(f"<q{grid.n}q", grid.n, *grid.dims)
    box = np.concatenate([[grid.h], grid.lower, grid.upper]).astype("<f8")
    return header + box.tobytes() + np.ascontiguousarray(grid.values, "<f8").tobytes()


def _check_box(dims, h, lower, upper):
    expected = lower + h * np.array(dims)
    if not np.allclose(upper, expected, rtol=1e-12, atol=1e-12 * h):
        raise ConsistencyError(f"Support box upper corner {upper} is not {expected}.")


def grid_from_bytes(data):
    if len(data) < 8:
        raise ConsistencyError("Truncated field header.")
    (n,) = struct.unpack_from("<q", data)
    if n < 1:
        raise ConsistencyError(f"Invalid dimension {n} in field header.")
    offset = 8 * (n + 1)
    dims = struct.unpack_from(f"<{n}q", data, 8)
    box = np.frombuffer(data, "<f8", 2 * n + 1, offset)
    h, lower, upper = box[0], box[1 : n + 1], box[n + 1 :]
    _check_box(dims, h, lower, upper)
    payload = np.frombuffer(data, "<f8", offset=offset + 8 * (2 * n + 1))
    if payload.size != np.prod(dims):
        raise ConsistencyError(
            f"Payload holds {payload.size} values for a {dims} lattice."
        )
    return GridField(payload.reshape(dims), h, lower)


def dumps_grid(grid):
    """ Portable text form, for small grids. """
    document = tomlkit.document()
    document.add(tomlkit.comment(f"{grid.n}-dimensional grid field"))
    document["n"] = grid.n
    document["dims"] = list(grid.dims)
    document["h"] = grid.h
    document["lower"] = grid.lower.tolist()
    document["upper"] = grid.upper.tolist()
    document["values"] = grid.values.ravel().tolist()
    return tomlkit.dumps(document)


def loads_grid(text):
    document = tomlkit.parse(text)
    try:
        dims = tuple(int(d) for d in document["dims"])
        h = float(document["h"])
        lower = np.array(document["lower"], dtype=float)
        upper = np.array(document["upper"], dtype=float)
        values = np.array(document["values"], dtype=float)
    except KeyError as ex:
        raise ConsistencyError(f"Missing {ex} entry in field file.") from ex
    if int(document.get("n", len(dims))) != len(dims):
        raise ConsistencyError("Dimension does not match the lattice.")
    _check_box(dims, h, lower, upper)
    if values.size != np.prod(dims):
        raise ConsistencyError(f"{values.size} values for a {dims} lattice.")
    return GridField(values.reshape(dims), h, lower)


def set_from_dict(entry, dim=None):
    """Build an indicator set from its JSON description.

    Kinds are ``ball`` (center, radius), ``ellipsoid`` (center, shape), ``box``
    (lower, upper), ``boxes`` (lowers, uppers), ``mask`` (mask, h, lower),
    ``union`` (parts), ``empty`` and ``full`` (dim).
    """
    kind = entry.get("kind")
    try:
        if kind == "ball":
            return Ball(entry["center"], entry["radius"])
        if kind == "ellipsoid":
            return Ellipsoid(entry["center"], entry["shape"])
        if kind == "box":
            return BoxUnion.box(entry["lower"], entry["upper"])
        if kind == "boxes":
            return BoxUnion(entry["lowers"], entry["uppers"])
        if kind == "mask":
            return GridMask(entry["mask"], entry["h"], entry.get("lower"))
        if kind == "union":
            return SetUnion(set_from_dict(part, dim) for part in entry["parts"])
        if kind in ("empty", "full"):
            size = entry.get("dim", dim)
            if size is None:
                raise ConsistencyError(f"Dimension of the {kind} set is unknown.")
            return EmptySet(size) if kind == "empty" else FullSpace(size)
    except KeyError as ex:
        raise ConsistencyError(f"Missing {ex} entry in {kind} set.") from ex
    raise ConsistencyError(f"Unknown set kind {kind!r}.")


def load_problem(path):
    """Read a multilinear problem: ``sets``, ``radii`` and ``coefficients``.

    ``coefficients`` lists the rows of the extra points only. The anchor rows
    form the identity. Every entry is optional.
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as ex:
        raise ConsistencyError(f"{path} is not valid JSON: {ex}") from ex
    problem = {}
    if "coefficients" in document:
        problem["coefficients"] = CoefficientMatrix.from_rows(document["coefficients"])
    if "sets" in document:
        dim = document.get("dim")
        problem["sets"] = [set_from_dict(entry, dim) for entry in document["sets"]]
    if "radii" in document:
        problem["radii"] = tuple(float(r) for r in document["radii"])
    return problem
