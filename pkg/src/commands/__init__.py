"""
Experiment commands, one module per `command` value of an experiment document.
"""
from typing import Dict

from ..mflab_process import Command
from ..mflab_validation import ValidationError
from . import (critical_points, curie_weiss, gibbs, inequalities, pde, potential_report, saddle_exit, simulate,
               transition)

REGISTRY: Dict[str, Command] = {
    module.command.name: module.command
    for module in (potential_report, critical_points, gibbs, simulate, pde, transition, saddle_exit, inequalities,
                   curie_weiss)
}


def get_command(name: str) -> Command:
    """Look up a registered command by its document name."""
    try:
        return REGISTRY[name]
    except KeyError:
        raise ValidationError(f"unknown command '{name}'", "cli.get_command")
