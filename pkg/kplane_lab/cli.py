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

import functools
import logging
from itertools import combinations

import arrow
import click
import click_log
import numpy as np
from click_help_colors import version_option
from scipy.linalg import null_space

from . import (
    CLI_NAME,
    KPlaneError,
    NumericalError,
    RunConfig,
    __version__,
    endpoint_exponents,
    env_data,
    logger,
)
from .colorize import choice_style, collect_keywords, colorized_help, colors
from .drury import (
    RadiusFamily,
    bll_gap,
    burchard_equality_probe,
    drury_identity_check,
    ellipsoidal_family,
    exact_planar_form,
    permissibility,
    random_bll_instance,
    square_substitution,
    strict_admissibility,
)
from .extremal import (
    almost_convexity_probe,
    bump_family,
    ellipsoid_slice_fit,
    perturbation_test,
    ratio,
    shared_geometry_check,
    symmetrize_iterate,
)
from .fieldio import BUILTIN_BUILDERS, load_field, load_problem, write_grid
from .fields import (
    ExtremizerField,
    GridField,
    discretize,
    full_rearrange,
    lp_norm,
    slice_rearrange,
)
from .geometry import AffinePlane, CoefficientMatrix, OrthonormalFrame
from .indicators import superlevel_set
from .report import (
    check_finite,
    dumps,
    summary_table,
    to_jsonable,
    trace_csv,
    write_text,
)
from .schedule import DEFAULT_SCHEDULE, STEP_METHODS
from .transforms import (
    elliptic_norm_check,
    kplane_transform,
    lq_sharp_norm,
    lq_transform_norm,
)

click_log.basic_config(logger)


DEFAULT_FIELD = "builtin:extremizer"

# Starting point of the symmetrization dynamics: a shifted cube.
DEFAULT_SYMMETRIZE_FIELD = "builtin:indicator:box:cx=0.7,half=0.6"

# Independent random streams of a run. Estimators use the Monte Carlo streams
# below 0, random instance construction the ones below 1.
ESTIMATOR_STREAM = 0
INSTANCE_STREAM = 1


def parse_count(ctx, param, value):
    """ Accept integers in scientific notation, like ``1e6``. """
    if value is None:
        return None
    try:
        count = float(value)
    except ValueError:
        raise click.BadParameter(f"{value!r} is not a number.")
    if not count.is_integer() or count <= 0:
        raise click.BadParameter(f"{value!r} is not a positive integer.")
    return int(count)


def parse_floats(ctx, param, value):
    """ Parse comma-separated numbers, or a tuple of them for repeated options. """
    if value is None:
        return None
    if isinstance(value, tuple):
        return tuple(parse_floats(ctx, param, item) for item in value)
    try:
        return tuple(float(item) for item in value.split(",") if item.strip())
    except ValueError:
        raise click.BadParameter(f"{value!r} is not a comma-separated list of numbers.")


# Options shared by all experiments. Defaults are left unset so values of the
# --config file apply, and are documented from RunConfig.
run_options = [
    click.option(
        "--n",
        "n",
        type=int,
        help=f"Dimension of the ambient space. Defaults to {RunConfig.default_conf['n']}.",
    ),
    click.option(
        "--k",
        "k",
        type=int,
        help="Dimension of the integration planes, between 1 and n - 1. Defaults "
        f"to {RunConfig.default_conf['k']}.",
    ),
    click.option(
        "--seed",
        type=click.IntRange(0, 2 ** 64 - 1),
        help="Root seed of all random streams. Reports record it. Defaults to "
        f"{RunConfig.default_conf['seed']}.",
    ),
    click.option(
        "--samples",
        callback=parse_count,
        metavar="COUNT",
        help="Outer Monte Carlo samples per estimator. Accepts scientific notation. "
        f"Defaults to {RunConfig.default_conf['samples']}.",
    ),
    click.option(
        "--workers",
        type=click.IntRange(1),
        help="Threads evaluating sample chunks. Results do not depend on it. "
        "Defaults to 1.",
    ),
    click.option(
        "--nodes",
        type=int,
        help="Radial Gauss-Legendre nodes per ray of the plane quadrature. Defaults "
        f"to {RunConfig.default_conf['nodes']}.",
    ),
    click.option(
        "--directions",
        type=click.IntRange(1),
        help="Directions of the angular rule of the plane quadrature. Defaults to "
        f"{RunConfig.default_conf['directions']}.",
    ),
    click.option(
        "--offset-radius",
        type=float,
        metavar="RADIUS",
        help="Draw plane offsets uniformly in the ball of this radius around the "
        "field center. If not set, offsets follow a heavy-tailed law without "
        "truncation.",
    ),
    click.option(
        "--out",
        type=click.Path(dir_okay=False, resolve_path=True),
        metavar="PATH",
        help="Write the JSON report to this file instead of the standard output.",
    ),
    click.option(
        "--config",
        "config_file",
        type=click.Path(exists=True, dir_okay=False, resolve_path=True),
        metavar="TOML_FILE",
        help="Read run options from a TOML file. Command-line values take "
        "precedence.",
    ),
]


field_option = click.option(
    "-f",
    "--field",
    "fields",
    multiple=True,
    metavar="FIELD_SPEC",
    help="Field to study. Either builtin:<kind>[:<param>=<value>,...], "
    "file:<path> or a grid file path. Defaults to "
    f"{choice_style(DEFAULT_FIELD)}.",
)


problem_option = click.option(
    "-p",
    "--problem",
    type=click.Path(exists=True, dir_okay=False, resolve_path=True),
    metavar="JSON_FILE",
    help="JSON description of the sets, radii and coefficient rows of a "
    "multilinear problem.",
)


def emit(conf, command, payload, path=None):
    """Serialize the report of ``command`` with the resolved configuration.

    The report goes to ``path``, or to ``conf.out``, or to the standard output.
    """
    report = {"command": command, "params": conf.as_dict()}
    report.update(payload)
    report = to_jsonable(report)
    check_finite(report)
    table = summary_table(report)
    if table:
        logger.info(f"Summary:\n{table}")
    text = dumps(report)
    path = path or conf.out
    if path:
        write_text(text, path)
    else:
        click.echo(text, nl=False)
    return report


def experiment(func):
    """Attach the run options to a subcommand and run it as an experiment.

    The wrapped function receives the ``RunConfig`` first and returns its report
    payload, or ``None`` if it emitted its reports itself. Configuration errors
    exit with code 2, numerical failures with code 1.
    """

    @functools.wraps(func)
    def wrapper(*args, config_file=None, **kwargs):
        ctx = click.get_current_context()
        overrides = {
            key: kwargs.pop(key) for key in list(kwargs) if key in RunConfig.default_conf
        }
        if not overrides.get("fields"):
            overrides.pop("fields", None)
        try:
            if config_file:
                conf = RunConfig.from_toml(config_file, **overrides)
            else:
                conf = RunConfig(**overrides)
        except KPlaneError as ex:
            raise click.UsageError(str(ex))

        start = arrow.now()
        logger.debug(f"Run {ctx.info_name} with {conf.as_dict()}")
        try:
            payload = func(conf, *args, **kwargs)
            if payload is not None:
                emit(conf, ctx.info_name, payload)
        except NumericalError as ex:
            logger.error(f"{ex.__class__.__name__}: {ex}")
            ctx.exit(1)
        except (KPlaneError, OSError) as ex:
            raise click.UsageError(str(ex))
        logger.info(f"{ctx.info_name} done in {arrow.now() - start}.")

    for option in reversed(run_options):
        wrapper = option(wrapper)
    return wrapper


def field_specs(conf, default=DEFAULT_FIELD):
    return conf.fields or (default,)


def load_fields(conf, default=DEFAULT_FIELD):
    """ Fields of the run, with their specification. """
    return [
        (spec, load_field(spec, conf.n, conf.k)) for spec in field_specs(conf, default)
    ]


def load_single_field(conf, default=DEFAULT_FIELD):
    fields = load_fields(conf, default)
    if len(fields) > 1:
        raise click.UsageError("This experiment studies a single field.")
    return fields[0]


def instance_rng(conf, index=0):
    """ Generator of random problem instances, independent of the estimator streams. """
    return np.random.default_rng(
        np.random.SeedSequence(conf.seed, spawn_key=(INSTANCE_STREAM, index))
    )


def compare_constants(entries, key="constant"):
    """ Do the constants of all fields agree within the default sigmas? """
    constants = [entry[key] for entry in entries if entry.get(key) is not None]
    return all(a.agrees_with(b) for a, b in combinations(constants, 2))


def plane_from_options(n, k, basis, offset):
    """Plane spanned by the rows of ``basis``, orthonormalized, shifted by
    ``offset``. Defaults to the first ``k`` coordinate axes through the origin."""
    if not basis:
        frame = OrthonormalFrame.canonical(n, k)
    else:
        rows = np.array(basis, dtype=float)
        if rows.shape != (k, n):
            raise click.BadParameter(f"Expected {k} basis vectors of R^{n}.")
        q, r = np.linalg.qr(rows.T)
        if np.any(np.abs(np.diag(r)) < 1e-12):
            raise click.BadParameter("Basis vectors are linearly dependent.")
        orthonormal = q.T
        if not np.allclose(rows @ rows.T, np.eye(k)):
            logger.warning("Basis vectors orthonormalized.")
        frame = OrthonormalFrame(orthonormal, null_space(orthonormal).T)
    return AffinePlane(frame, offset)


def estimate_payload(estimate, **extra):
    """ Top-level ``value``, ``stderr``, ``samples`` and ``seed`` of an estimate. """
    payload = estimate.as_dict()
    payload.update(extra)
    return payload


@click.group(invoke_without_command=True)
@click_log.simple_verbosity_option(
    logger,
    default="INFO",
    metavar="LEVEL",
    type=click.Choice(
        ["CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"], case_sensitive=False
    ),
    help="Either CRITICAL, ERROR, WARNING, INFO or DEBUG. Defaults to INFO.",
)
@version_option(
    version=__version__,
    prog_name=CLI_NAME,
    version_color="green",
    prog_name_color=colors["cli"]["fg"],
    message=f"%(prog)s %(version)s\n{env_data}",
    message_color="bright_black",
)
@click.pass_context
def kplab(ctx):
    """Numerical laboratory of the k-plane transform and of its endpoint
    inequality.

    \b
    Every subcommand runs one experiment and emits a JSON report embedding its
    resolved configuration. Runs sharing the same options and seed produce
    byte-identical reports, whatever the number of workers.
    """
    level = logger.level
    level_name = logging._levelToName.get(level, level)
    logger.debug(f"Verbosity set to {level_name}.")

    if ctx.invoked_subcommand is not None:
        return

    keywords = collect_keywords(ctx)
    click.echo(colorized_help(ctx.get_help(), keywords))

    # Reference tables of builtin fields and symmetrization steps, with
    # grouped aliases.
    formatter = ctx.make_formatter()
    for title, mapping in (
        ("Builtin fields", BUILTIN_BUILDERS),
        ("Symmetrization steps", STEP_METHODS),
    ):
        method_to_ids = {}
        for method_id, method in sorted(mapping.items(), reverse=True):
            method_to_ids.setdefault(method, []).append(method_id)
        table = sorted(
            ("|".join(ids), " ".join(method.__doc__.split()))
            for method, ids in method_to_ids.items()
        )
        formatter.write_paragraph()
        with formatter.section(title):
            formatter.write_dl(table)
    click.echo(colorized_help(formatter.getvalue().rstrip(), keywords))
    ctx.exit()


@kplab.command(short_help="Integrate a field over one plane.")
@field_option
@click.option(
    "--basis",
    multiple=True,
    callback=parse_floats,
    metavar="VECTOR",
    help="Comma-separated vector spanning the plane. Repeat k times. Defaults to "
    "the first k coordinate axes.",
)
@click.option(
    "--offset",
    callback=parse_floats,
    metavar="VECTOR",
    help="Comma-separated offset of the plane, orthogonal to it. Defaults to the "
    "origin.",
)
@experiment
def transform(conf, basis, offset):
    """Compute T f on one affine k-plane with the deterministic plane quadrature.

    The standard error is the gap with the rule of half as many panels.
    """
    spec, f = load_single_field(conf)
    plane = plane_from_options(conf.n, conf.k, basis, offset)
    value = kplane_transform(f, plane, conf.quadrature_config())
    return estimate_payload(
        value,
        field=spec,
        basis=plane.frame.basis,
        offset=plane.offset,
    )


@kplab.command(short_help="Estimate the L^q norm of T f.")
@field_option
@click.option(
    "--of-field",
    is_flag=True,
    default=False,
    help="Estimate the L^p norm of the field itself instead, at the endpoint "
    "exponent p.",
)
@experiment
def norm(conf, of_field):
    """Estimate ‖T f‖_q at the endpoint exponent q = n + 1 by Monte Carlo over
    random affine planes."""
    spec, f = load_single_field(conf)
    p, q = endpoint_exponents(conf.n, conf.k)
    if of_field:
        value = lp_norm(f, p, conf.mc_config(ESTIMATOR_STREAM))
        return estimate_payload(value, field=spec, exponent=p)
    value = lq_transform_norm(
        f, conf.k, conf.mc_config(ESTIMATOR_STREAM), conf.quadrature_config(),
        conf.offset_radius,
    )
    return estimate_payload(value, field=spec, exponent=q)


@kplab.command("sharp-norm", short_help="Compare the matrix-parameterized norm.")
@field_option
@experiment
def sharp_norm(conf):
    """Estimate the L^q norm of the transform parameterized by graphs
    x' ↦ A x' + b, and its constant ratio to ‖T f‖_q.

    Repeat --field to check that the ratio does not depend on the field.
    """
    quad = conf.quadrature_config()
    entries = []
    for index, (spec, f) in enumerate(load_fields(conf)):
        mc = conf.mc_config(ESTIMATOR_STREAM).child(index)
        sharp = lq_sharp_norm(f, conf.k, mc.child(0), quad)
        euclidean = lq_transform_norm(f, conf.k, mc.child(1), quad, conf.offset_radius)
        entries.append(
            {
                "field": spec,
                "sharp_norm": sharp,
                "transform_norm": euclidean,
                "constant": sharp.ratio(euclidean),
            }
        )
    first = entries[0]
    return estimate_payload(
        first["sharp_norm"],
        sharp_norm=first["sharp_norm"],
        transform_norm=first["transform_norm"],
        constant=first["constant"],
        fields=entries,
        constants_agree=compare_constants(entries),
    )


@kplab.command("elliptic-check", short_help="Compare the elliptic realization.")
@field_option
@experiment
def elliptic_check(conf):
    """Lift fields to the hemisphere and compare norms on both sides, and the
    elliptic transform norm with the Euclidean one.

    Repeat --field to check that the constant does not depend on the field.
    """
    quad = conf.quadrature_config()
    entries = []
    for index, (spec, f) in enumerate(load_fields(conf)):
        report = elliptic_norm_check(
            f, conf.k, conf.mc_config(ESTIMATOR_STREAM).child(index), quad,
            conf.offset_radius,
        )
        report["field"] = spec
        entries.append(report)
    first = dict(entries[0])
    first.pop("field")
    return estimate_payload(
        first["constant"],
        fields=entries,
        constants_agree=compare_constants(entries),
        **first,
    )


@kplab.command("drury-check", short_help="Check the sliced Drury identity.")
@field_option
@click.option(
    "--anchor-law",
    type=click.Choice(["heavy", "gaussian"], case_sensitive=False),
    default="heavy",
    help="Proposal law of the anchor points. Defaults to heavy.",
)
@click.option(
    "--vol-threshold",
    type=float,
    metavar="RATIO",
    help="Reject anchor simplices below this k-volume, relative to the field "
    f"scale. Defaults to {RunConfig.default_conf['vol_threshold']}.",
)
@experiment
def drury_check(conf, anchor_law):
    """Compare ‖T f‖_q^q with the sliced multilinear integral and fit the
    constant between both sides.

    Repeat --field to check that the constant only depends on n and k.
    Rejected degenerate anchors are counted and reported with their share of
    the sampled mass.
    """
    quad = conf.quadrature_config()
    entries = []
    for index, (spec, f) in enumerate(load_fields(conf)):
        report = drury_identity_check(
            f,
            conf.k,
            conf.mc_config(ESTIMATOR_STREAM).child(index),
            quad,
            anchor_law=anchor_law.lower(),
            vol_threshold=conf.vol_threshold,
        )
        report["field"] = spec
        entries.append(report)
    first = entries[0]
    if first["constant"] is None:
        raise NumericalError("Sliced side of the identity vanishes.")
    return estimate_payload(
        first["constant"],
        constant=first["constant"],
        transform_side=first["transform_side"],
        sliced_side=first["sliced_side"],
        rejected_fraction=max(entry["rejected_fraction"] for entry in entries),
        rejected_mass=max(entry["rejected_mass"] for entry in entries),
        fields=entries,
        constants_agree=compare_constants(entries),
    )


def problem_slots(conf, problem_file, needs_sets=True):
    """Sets and coefficients of a problem file, with ``n`` and ``k`` of the run
    updated to match them."""
    problem = load_problem(problem_file)
    b = problem.get("coefficients")
    sets = problem.get("sets")
    if b is None or (needs_sets and sets is None):
        raise click.BadParameter(
            f"{problem_file} needs coefficients{' and sets' if needs_sets else ''}.",
            param_hint="--problem",
        )
    conf.n, conf.k = b.n, b.k
    return sets, b, problem


@kplab.command("bll-gap", short_help="Measure rearrangement gaps of Tx.")
@problem_option
@click.option(
    "--instances",
    type=click.IntRange(1),
    default=1,
    help="Number of random instances of translated boxes and random coefficients "
    "to draw when no --problem is given. Defaults to 1.",
)
@experiment
def bll_gap_command(conf, problem, instances):
    """Estimate Tx(E_0*, ..., E_n*) - Tx(E_0, ..., E_n), which is nonnegative up to
    sampling error.

    Without --problem, draws random instances of boxes with generic translations.
    """
    mc = conf.mc_config(ESTIMATOR_STREAM)
    if problem:
        sets, b, _ = problem_slots(conf, problem)
        gap = bll_gap(sets, b, mc)
        return estimate_payload(gap, gap=gap)

    results = []
    for index in range(instances):
        sets, b = random_bll_instance(conf.n, conf.k, instance_rng(conf, index))
        gap = bll_gap(sets, b, mc.child(index))
        results.append(
            {
                "gap": gap,
                "nonnegative": gap.value >= -3 * gap.stderr,
                "positive": gap.value > 3 * gap.stderr,
            }
        )
        logger.debug(f"Instance #{index}: gap {gap}")
    nonnegative = sum(result["nonnegative"] for result in results)
    positive = sum(result["positive"] for result in results)
    return {
        "value": min(result["gap"].value for result in results),
        "instances": results,
        "nonnegative": nonnegative,
        "positive": positive,
        "fraction": positive / instances,
    }


@kplab.command("burchard-probe", short_help="Probe the equality cases of Tx.")
@problem_option
@click.option(
    "--family",
    type=click.Choice(["ellipsoidal", "square"], case_sensitive=False),
    default="ellipsoidal",
    help="Without --problem, build an ellipsoidal equality family, or the same "
    "family with its first set replaced by a cube of equal volume. Defaults to "
    "ellipsoidal.",
)
@experiment
def burchard_probe(conf, problem, family):
    """Estimate the normalized gap [Tx(E*) - Tx(E)] / Tx(E*).

    Ellipsoidal families with compatible centers and dilations give a null gap,
    perturbed families a positive one. Sets of the line with two sampled slots
    are cross-checked against the exact polygon clipping oracle.
    """
    mc = conf.mc_config(ESTIMATOR_STREAM)
    if problem:
        sets, b, _ = problem_slots(conf, problem)
    else:
        n, k = conf.n, conf.k
        rng = instance_rng(conf)
        b = CoefficientMatrix.from_rows(np.full((n - k, k + 1), 1 / (k + 1)))
        sets = ellipsoidal_family(
            b,
            rng.uniform(0.7, 1.3, k + 2),
            0.3 * rng.standard_normal((k + 1, n - k)),
            np.eye(n - k),
        )
        if family.lower() == "square":
            sets = square_substitution(sets)
    report = burchard_equality_probe(sets, b, mc)
    payload = estimate_payload(report["gap"], family=family.lower(), **report)
    if b.k == 1 and sets[0].dim == 1:
        exact = [exact_planar_form(sets, b)]
        exact.append(exact_planar_form([s.rearranged() for s in sets], b))
        payload["exact_form"] = exact[0]
        payload["exact_gap"] = 1 - exact[0] / exact[1] if exact[1] else 0.0
    return payload


@kplab.command(short_help="Check permissibility of radii.")
@problem_option
@click.option(
    "--radii",
    callback=parse_floats,
    metavar="RADII",
    help="Comma-separated radii ρ_0, ..., ρ_n.",
)
@click.option(
    "--coeffs",
    callback=parse_floats,
    metavar="ROWS",
    help="Comma-separated coefficient rows of the extra points k+1..n, flattened. "
    "The anchor rows are the identity.",
)
@experiment
def permissible(conf, problem, radii, coeffs):
    """Check both clauses of permissibility of radii with respect to barycentric
    coefficients, and the strict admissibility of the radii.

    The plane dimension k is inferred from the number of radii and coefficients.
    """
    if problem:
        sets, b, document = problem_slots(conf, problem, needs_sets=False)
        radii = radii or document.get("radii")
        if radii is None and sets:
            radii = RadiusFamily.of_sets(sets).radii
    else:
        if not radii or coeffs is None:
            raise click.UsageError("Either --problem or both --radii and --coeffs.")
        b = CoefficientMatrix.from_rows(
            np.reshape(coeffs, (-1, infer_k(conf, len(radii), len(coeffs)) + 1))
        )
        conf.n, conf.k = b.n, b.k
    if radii is None:
        raise click.BadParameter("No radii to check.", param_hint="--radii")
    rho = RadiusFamily(tuple(radii), b)
    _, clauses = permissibility(rho)
    clauses["strictly_admissible"] = strict_admissibility(rho)
    clauses["radii"] = rho.radii
    clauses["coefficients"] = b.entries
    return clauses


def infer_k(conf, radius_count, coefficient_count):
    """``k`` such that ``n - k`` rows of ``k + 1`` coefficients go with ``n + 1``
    radii. Falls back on ``--k`` between several candidates."""
    n = radius_count - 1
    candidates = [k for k in range(1, n) if (n - k) * (k + 1) == coefficient_count]
    if len(candidates) == 1:
        return candidates[0]
    if conf.k in candidates:
        return conf.k
    if not candidates:
        raise click.BadParameter(
            f"{coefficient_count} coefficients do not fit {radius_count} radii.",
            param_hint="--coeffs",
        )
    raise click.UsageError(
        f"Ambiguous plane dimension among {candidates}: set it with --k."
    )


@kplab.command("ratio", short_help="Estimate the ratio functional.")
@field_option
@experiment
def ratio_command(conf):
    """Estimate ‖T f‖_q / ‖f‖_p at the endpoint exponents, with both norms."""
    spec, f = load_single_field(conf)
    report = ratio(
        f, conf.k, conf.mc_config(ESTIMATOR_STREAM), conf.quadrature_config(),
        conf.offset_radius,
    )
    return estimate_payload(report.ratio, field=spec, **report.as_dict())


@kplab.command(short_help="Perturb a field along bump directions.")
@field_option
@click.option(
    "--epsilon",
    type=float,
    default=0.1,
    help="Size of the perturbations f + ε g. Defaults to 0.1.",
)
@click.option(
    "--bumps",
    type=click.IntRange(1),
    default=8,
    help="Number of random bump directions g. Defaults to 8.",
)
@click.option(
    "--spread",
    type=float,
    default=1.5,
    help="Bump centers are drawn in the cube of this half-width. Defaults to 1.5.",
)
@click.option(
    "--radius",
    type=float,
    default=0.5,
    help="Radius of the support of the bumps. Defaults to 0.5.",
)
@experiment
def perturb(conf, epsilon, bumps, spread, radius):
    """Search for perturbation directions increasing the ratio functional.

    Extremizers admit none. Ratio differences are estimated from paired samples.
    """
    spec, f = load_single_field(conf)
    directions = bump_family(conf.n, bumps, instance_rng(conf), spread, radius)
    report = perturbation_test(
        f,
        directions,
        conf.k,
        epsilon,
        conf.mc_config(ESTIMATOR_STREAM),
        conf.quadrature_config(),
    )
    report["field"] = spec
    report["value"] = max(item["difference"].value for item in report["perturbations"])
    return report


@kplab.command(short_help="Run the symmetrization dynamics.")
@field_option
@click.option(
    "--steps",
    type=click.IntRange(0),
    default=20,
    help="Number of symmetrization steps. Defaults to 20.",
)
@click.option(
    "--schedule",
    default=",".join(DEFAULT_SCHEDULE),
    metavar="STEPS",
    help="Comma-separated steps cycled through. Defaults to "
    f"{choice_style(','.join(DEFAULT_SCHEDULE))}.",
)
@click.option(
    "--half-width",
    type=float,
    default=4.0,
    help="Half-width of the grid analytic fields are discretized on. Defaults to "
    "4.",
)
@click.option(
    "--cell",
    type=float,
    default=0.1,
    help="Cell size of the grid. Defaults to 0.1.",
)
@experiment
def symmetrize(conf, steps, schedule, half_width, cell):
    """Alternate rearrangements and the J inversion, tracking the ratio and the
    distance to the radial extremizer profile.

    With --out, writes the CSV trace to the given path and the JSON summary next
    to it with a .json suffix. Otherwise prints the CSV trace.
    """
    spec, f = load_single_field(conf, DEFAULT_SYMMETRIZE_FIELD)
    trace, _ = symmetrize_iterate(
        f,
        conf.k,
        steps,
        schedule,
        conf.mc_config(ESTIMATOR_STREAM),
        conf.quadrature_config(),
        half_width=half_width,
        cell=cell,
    )
    rows = trace.rows()
    check_finite([float(value) for row in rows for value in row[2:]])
    csv_text = trace_csv(rows)
    violations = trace.monotonicity_violations()
    payload = {
        "field": spec,
        "schedule": trace.schedule,
        "steps": steps,
        "initial_distance": trace.initial_distance,
        "final_distance": trace.final_distance,
        "ratio": trace.ratios[-1],
        "monotonicity_violations": violations,
        "halved_distance": trace.final_distance <= trace.initial_distance / 2,
    }
    if conf.out:
        write_text(csv_text, conf.out)
        summary_path = conf.out.with_suffix(".json")
        if summary_path == conf.out:
            summary_path = conf.out.with_suffix(".summary.json")
        emit(conf, "symmetrize", payload, path=summary_path)
    else:
        click.echo(csv_text, nl=False)
        for line in summary_table(to_jsonable(payload)).splitlines():
            logger.info(line)


@kplab.command("slice-fit", short_help="Fit ellipsoids to slice superlevel sets.")
@field_option
@click.option(
    "--x-prime",
    "x_primes",
    multiple=True,
    callback=parse_floats,
    metavar="VECTOR",
    help="Comma-separated first k coordinates of a slice. Repeat for several "
    "slices. If not set, --slices random ones are drawn.",
)
@click.option(
    "--slices",
    type=click.IntRange(1),
    default=10,
    help="Number of random slices drawn in [-1, 1]^k. Defaults to 10.",
)
@click.option(
    "--level",
    "levels",
    multiple=True,
    type=float,
    help="Superlevel s of the slice sets. Repeat for several levels. Defaults to "
    "a third of the field bound.",
)
@click.option(
    "--tolerance",
    type=float,
    default=0.05,
    help="Relative tolerance of the shared shape and affine center tests. Defaults "
    "to 0.05.",
)
@experiment
def slice_fit(conf, x_primes, slices, levels, tolerance):
    """Fit ellipsoids to the slice superlevel sets {v : f(x', v) > s}.

    A single slice and level reports the fit itself. Several test whether all
    fits share one shape with affinely moving centers.
    """
    spec, f = load_single_field(conf)
    if not x_primes:
        x_primes = instance_rng(conf).uniform(-1, 1, (slices, conf.k))
    x_primes = np.atleast_2d(np.array(x_primes, dtype=float))
    if x_primes.shape[1] != conf.k:
        raise click.BadParameter(f"Slices need {conf.k} coordinates.")
    levels = levels or (f.bound / 3,)
    mc = conf.mc_config(ESTIMATOR_STREAM)
    if len(x_primes) == 1 and len(levels) == 1:
        fit = ellipsoid_slice_fit(f, x_primes[0], levels[0], mc)
        return estimate_payload(
            fit.fraction, field=spec, radius=fit.radius, **fit.as_dict()
        )
    report = shared_geometry_check(f, x_primes, levels, mc, tolerance)
    report["field"] = spec
    return report


@kplab.command("convexity-probe", short_help="Probe convexity of a set.")
@field_option
@problem_option
@click.option(
    "--level",
    type=float,
    help="Probe the superlevel set {f > s} of the field. Defaults to a third of "
    "the field bound.",
)
@click.option(
    "--segment-samples",
    type=click.IntRange(1),
    default=16,
    help="Points drawn on each segment. Defaults to 16.",
)
@click.option(
    "--delta",
    type=click.FloatRange(0, 1),
    default=0.0,
    help="Share of segment points allowed outside the set. Defaults to 0.",
)
@experiment
def convexity_probe(conf, problem, level, segment_samples, delta):
    """Estimate the share of point pairs of a set whose segments stay in the set.

    The set is the first one of --problem, or a superlevel set of --field.
    Convex sets score 1.
    """
    if problem:
        sets = load_problem(problem).get("sets")
        if not sets:
            raise click.BadParameter(f"{problem} has no sets.", param_hint="--problem")
        target, label = sets[0], problem
    else:
        spec, f = load_single_field(conf)
        level = f.bound / 3 if level is None else level
        if not isinstance(f, (GridField, ExtremizerField)):
            f = discretize(f, 4.0, 0.05)
        target, label = superlevel_set(f, level), spec
    fraction = almost_convexity_probe(
        target,
        segment_samples=segment_samples,
        delta=delta,
        mc=conf.mc_config(ESTIMATOR_STREAM),
    )
    return estimate_payload(fraction, fraction=fraction, set=label, level=level)


@kplab.command(short_help="Rearrange a field on a grid.")
@field_option
@click.option(
    "--mode",
    type=click.Choice(["full", "slice"], case_sensitive=False),
    default="full",
    help="Symmetric decreasing rearrangement over all coordinates, or over the "
    "last n - k ones of every slice. Defaults to full.",
)
@click.option(
    "--half-width",
    type=float,
    default=4.0,
    help="Half-width of the grid analytic fields are discretized on. Defaults to "
    "4.",
)
@click.option(
    "--cell",
    type=float,
    default=0.1,
    help="Cell size of the grid. Defaults to 0.1.",
)
@click.option(
    "--save",
    type=click.Path(dir_okay=False, resolve_path=True),
    metavar="GRID_FILE",
    help="Write the rearranged grid to this .kpf or .toml file.",
)
@experiment
def rearrange(conf, mode, half_width, cell, save):
    """Rearrange a field and check that its value multiset and norm are kept."""
    spec, f = load_single_field(conf)
    grid = f if isinstance(f, GridField) else discretize(f, half_width, cell)
    if mode.lower() == "full":
        result = full_rearrange(grid)
    else:
        result = slice_rearrange(grid, conf.k)
    p, _ = endpoint_exponents(conf.n, conf.k)
    before, after = grid.integral(p) ** (1 / p), result.integral(p) ** (1 / p)
    if save:
        write_grid(result, save)
    return {
        "field": spec,
        "mode": mode.lower(),
        "dims": grid.dims,
        "cell": grid.h,
        "norm_before": before,
        "norm_after": after,
        "value": after - before,
        "multiset_preserved": bool(
            np.array_equal(
                np.sort(grid.values, axis=None), np.sort(result.values, axis=None)
            )
        ),
        "saved": save,
    }
