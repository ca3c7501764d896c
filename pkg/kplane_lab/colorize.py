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

""" Help screen styling. """

import re
from functools import partial

import click
from click_log.core import ColorFormatter

from . import CLI_NAME, logger

# Help screen colors, merged with the log level colors of click-log.
colors = {
    "cli": dict(fg="bright_white"),
    "title": dict(fg="bright_green", bold=True),
    "subcommand": dict(fg="bright_cyan"),
    "option": dict(fg="cyan"),
    "choice": dict(fg="magenta"),
    "metavar": dict(fg="bright_black"),
}

assert set(colors).isdisjoint(ColorFormatter.colors)
colors.update(ColorFormatter.colors)

for category, color_params in colors.items():
    globals()[f"{category}_style"] = partial(click.style, **color_params)


def collect_keywords(ctx):
    """Collect option names, choices and metavars of a command, and of all its
    subcommands when it is a group."""
    options = set(ctx.help_option_names)
    choices, metavars, subcommands = set(), set(), set()
    commands = [ctx.command]
    if isinstance(ctx.command, click.Group):
        subcommands.update(ctx.command.list_commands(ctx))
        commands.extend(ctx.command.get_command(ctx, name) for name in subcommands)
    for command in commands:
        for param in command.params:
            options.update(param.opts)
            if isinstance(param.type, click.Choice):
                choices.update(param.type.choices)
            if param.metavar:
                metavars.add(param.metavar)
    logger.debug(f"Styling {len(options)} options and {len(subcommands)} subcommands.")
    return options, choices, metavars, subcommands


def colorized_help(help_txt, keywords):
    """ Colorize section titles, the CLI name, numbers and collected keywords. """
    options, choices, metavars, subcommands = keywords

    def colorize(match, **kwargs):
        """ Style the named group of the match, keep the other groups as-is. """
        return "".join(
            click.style(group, **kwargs) if group in match.groupdict().values() else group
            for group in match.groups()
        )

    help_txt = re.sub(
        r"(\s)(?P<colorize>-?\d+(?:\.\d+)?(?:e-?\d+)?)\b",
        partial(colorize, **colors["choice"]),
        help_txt,
    )
    help_txt = re.sub(
        fr"(\s)(?P<colorize>{CLI_NAME})\b", partial(colorize, **colors["cli"]), help_txt
    )
    help_txt = re.sub(
        r"^(?P<colorize>\S[\S+ ]+)(:)",
        partial(colorize, **colors["title"]),
        help_txt,
        flags=re.MULTILINE,
    )
    help_txt = re.sub(
        r"^(\s+)(?P<colorize>{})(\s)".format(
            "|".join(map(re.escape, sorted(subcommands, reverse=True))) or "(?!)"
        ),
        partial(colorize, **colors["subcommand"]),
        help_txt,
        flags=re.MULTILINE,
    )
    for matching_keywords, color in [
        (sorted(options, reverse=True), colors["option"]),
        (sorted(choices, reverse=True), colors["choice"]),
        (sorted(metavars, reverse=True), colors["metavar"]),
    ]:
        for keyword in matching_keywords:
            # Accounts for text wrapping after a dash.
            pattern = re.escape(keyword).replace("\\-", "-\\s*")
            help_txt = re.sub(
                fr"([\s\[\|\(])(?P<colorize>{pattern})",
                partial(colorize, **color),
                help_txt,
            )
    return help_txt
