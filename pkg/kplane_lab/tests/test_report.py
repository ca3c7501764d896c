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

import json
import math
from pathlib import Path

import numpy as np
import pytest

from .. import NumericalError
from ..estimate import Estimate
from ..report import (
    check_finite,
    dumps,
    summary_table,
    to_jsonable,
    trace_csv,
    write_text,
)


def test_to_jsonable():
    payload = {
        "ratio": Estimate(1.25, 0.01, 1000, 7),
        "radii": np.array([1.0, 0.5]),
        "permissible": np.bool_(True),
        "count": np.int64(3),
        "gap": np.float64(0.5),
        "pair": (1, 2),
        "path": Path("out") / "report.json",
        "nested": {"estimates": [Estimate(2.0)]},
    }
    result = to_jsonable(payload)
    assert result == {
        "ratio": {"value": 1.25, "stderr": 0.01, "samples": 1000, "seed": 7},
        "radii": [1.0, 0.5],
        "permissible": True,
        "count": 3,
        "gap": 0.5,
        "pair": [1, 2],
        "path": str(Path("out") / "report.json"),
        "nested": {
            "estimates": [{"value": 2.0, "stderr": 0.0, "samples": 0, "seed": None}]
        },
    }
    assert type(result["permissible"]) is bool
    assert type(result["count"]) is int
    # Plain JSON all the way down.
    assert json.loads(json.dumps(result)) == result


def test_check_finite():
    check_finite({"ratio": {"value": 1.0, "stderr": 0.0}, "label": "ok", "count": 2})
    with pytest.raises(NumericalError) as excinfo:
        check_finite({"ratio": {"value": math.inf}})
    assert "ratio.value" in str(excinfo.value)
    with pytest.raises(NumericalError) as excinfo:
        check_finite({"trace": [1.0, math.nan]})
    assert "trace.1" in str(excinfo.value)


def test_dumps_is_canonical():
    text = dumps({"b": 1, "a": {"d": 2.5, "c": "π"}})
    assert text == '{\n  "a": {\n    "c": "π",\n    "d": 2.5\n  },\n  "b": 1\n}\n'
    assert dumps({"a": 1, "b": 2}) == dumps({"b": 2, "a": 1})


def test_summary_table():
    table = summary_table(
        {
            "ratio": {"value": 1.1623, "stderr": 0.002},
            "permissible": True,
            "label": "ignored",
        }
    )
    assert "ratio" in table
    assert "1.1623" in table
    assert "permissible" in table
    assert "label" not in table
    assert "Description" in table


def test_empty_summary_table():
    assert summary_table({"label": "nothing to show"}) == ""


def test_trace_csv():
    rows = [(0, "initial", 1.0, 0.01, 0.5), (1, "rearrange", np.float64(1.1), 0.0, 0.25)]
    text = trace_csv(rows)
    assert text.splitlines() == [
        "step,tag,ratio,stderr,distance",
        "0,initial,1.0,0.01,0.5",
        "1,rearrange,1.1,0.0,0.25",
    ]
    assert trace_csv([]) == "step,tag,ratio,stderr,distance\n"


def test_write_text(tmp_path):
    path = write_text("content\n", tmp_path / "nested" / "dir" / "report.json")
    assert path.read_text() == "content\n"
