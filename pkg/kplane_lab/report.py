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

""" Report serialization and human-readable summaries. """

import csv
import io
import json
import math
from collections import OrderedDict
from pathlib import Path

import numpy as np
from boltons.iterutils import remap
from tabulate import tabulate

from . import NumericalError, logger
from .estimate import Estimate

# Report entries worth a line in the summary table, with their description.
SUMMARY_DEF = OrderedDict(
    [
        ("value", "Estimated value."),
        ("ratio", "Ratio ‖T f‖_q / ‖f‖_p."),
        ("numerator", "Transform norm ‖T f‖_q."),
        ("denominator", "Field norm ‖f‖_p."),
        ("constant", "Fitted constant between both sides."),
        ("transform_side", "‖T f‖_q^q."),
        ("sliced_side", "Sliced multilinear integral."),
        ("lifted_norm", "Hemisphere side c_n^(1/p) ‖F‖_p."),
        ("field_norm", "Euclidean side ‖f‖_p."),
        ("elliptic_norm", "Elliptic transform norm."),
        ("transform_norm", "Euclidean transform norm."),
        ("sharp_norm", "Matrix-parameterized transform norm."),
        ("gap", "Rearrangement gap."),
        ("fraction", "Sampled fraction."),
        ("rejected_fraction", "Share of rejected degenerate anchors."),
        ("rejected_mass", "Share of the sampled mass carried by rejected anchors."),
        ("permissible", "Permissibility verdict."),
        ("strictly_admissible", "Strict admissibility verdict."),
        ("shape_dispersion", "Dispersion of unimodular slice shapes."),
        ("relative_residual", "Affine fit residual of slice centers."),
        ("max_fraction", "Largest symmetric difference fraction."),
        ("initial_distance", "Initial distance to the radial profile."),
        ("final_distance", "Final distance to the radial profile."),
    ]
)


def to_jsonable(payload):
    """ Convert estimates and numpy types of a nested payload to plain JSON types. """

    def visit(path, key, value):
        if isinstance(value, Estimate) or hasattr(value, "as_dict"):
            return key, to_jsonable(value.as_dict())
        if isinstance(value, np.ndarray):
            return key, value.tolist()
        if isinstance(value, np.bool_):
            return key, bool(value)
        if isinstance(value, np.integer):
            return key, int(value)
        if isinstance(value, np.floating):
            return key, float(value)
        if isinstance(value, Path):
            return key, str(value)
        if isinstance(value, tuple):
            return key, list(value)
        return key, value

    return remap(payload, visit=visit)


def check_finite(payload):
    """Raise ``NumericalError`` if any number of the payload is not finite.

    Allows the command line to fail on diverging estimates.
    """

    def visit(path, key, value):
        if isinstance(value, float) and not math.isfinite(value):
            raise NumericalError(f"Non-finite {'.'.join(map(str, path + (key,)))}.")
        return True

    remap(payload, visit=visit)


def dumps(payload):
    """ Canonical JSON: sorted keys, two-space indent, trailing newline. """
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def summary_table(payload):
    """ Render the known top-level entries of a report as a table. """
    table = [["Entry", "Value", "Std. error", "Description"]]
    for entry_id, desc in SUMMARY_DEF.items():
        value = payload.get(entry_id)
        if isinstance(value, dict) and "value" in value:
            table.append([entry_id, value["value"], value.get("stderr"), desc])
        elif isinstance(value, (bool, int, float)):
            table.append([entry_id, value, "", desc])
    if len(table) == 1:
        return ""
    return tabulate(table, tablefmt="fancy_grid", headers="firstrow", floatfmt=".6g")


def trace_csv(rows):
    """ CSV text of a symmetrization trace. """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["step", "tag", "ratio", "stderr", "distance"])
    for step, tag, value, stderr, distance in rows:
        writer.writerow(
            [step, tag] + [repr(float(number)) for number in (value, stderr, distance)]
        )
    return buffer.getvalue()


def write_text(text, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info(f"Report written to {path}")
    return path
