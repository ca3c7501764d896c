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

""" Fixtures, configuration and helpers for tests. """

import json
from pathlib import Path
from textwrap import indent

import click
import numpy as np
import pytest
from boltons.iterutils import flatten, same
from boltons.tbutils import ExceptionInfo
from click.testing import CliRunner

from .. import CLI_NAME
from ..cli import kplab
from ..estimate import MonteCarloConfig, QuadratureConfig
from ..fields import extremizer_field, gaussian_field, indicator_field


def print_cli_output(cmd, output):
    """ Simulate CLI output. Used to print debug traces in test results. """
    print("\n► {}".format(click.style(" ".join(cmd), fg="white")))
    if output:
        print(indent(output, "  "))


@pytest.fixture
def runner():
    runner = CliRunner()
    with runner.isolated_filesystem():
        yield runner


@pytest.fixture
def invoke(runner):
    """ Executes Click's CLI, print output and return results. """

    def _run(*args, color=False):
        # We allow for nested iterables and None values as args for
        # convenience. We just need to flatten and filters them out.
        args = list(filter(None.__ne__, flatten(args)))
        if args:
            assert same(map(type, args), str)

        result = runner.invoke(kplab, args, color=color)

        print_cli_output([CLI_NAME] + args, result.output)

        # Print some more debug info.
        print(result)
        if result.exception:
            print(ExceptionInfo.from_exc_info(*result.exc_info).get_formatted())

        return result

    return _run


@pytest.fixture
def run_report(invoke):
    """Run a subcommand with its report written to a file, and return the exit
    code and the parsed report."""

    def _run(*args, out="report.json"):
        result = invoke(args, "--out", out)
        report = None
        if Path(out).exists():
            report = json.loads(Path(out).read_text())
        return result, report

    return _run


@pytest.fixture
def rng():
    return np.random.default_rng(20211123)


@pytest.fixture
def mc():
    return MonteCarloConfig(samples=20_000, seed=11)


@pytest.fixture
def quad():
    return QuadratureConfig()


@pytest.fixture
def extremizer():
    """ Standard extremizer of the X-ray transform in the plane. """
    return extremizer_field(2, 1)


@pytest.fixture
def test_fields():
    """ Fields of the plane with known transforms. """
    return {
        "gaussian": gaussian_field(2),
        "extremizer": extremizer_field(2, 1),
        "box": indicator_field(2, "box", size=0.5),
    }
