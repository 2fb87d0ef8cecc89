"""A simple experiment module loader."""
import importlib
import logging
from typing import Optional

logger = logging.getLogger(__name__)

EXPERIMENT_MODULES = [
    'wedgecp.experiments.survival',
    'wedgecp.experiments.coupling',
    'wedgecp.experiments.percolation',
    'wedgecp.experiments.gbt_coexistence',
    'wedgecp.experiments.critical',
    'wedgecp.experiments.oracles',
]


class ModuleInterface:
    """Represents an experiment module interface. An experiment module has a single register function."""

    @staticmethod
    def register() -> None:
        """Register the module experiments in the experiment factory."""


def import_module(name: str) -> ModuleInterface:
    """Imports a module given a name."""
    return importlib.import_module(name)  # type: ignore


def load_experiments(modules: Optional[list[str]] = None) -> None:
    """Loads the experiment modules and registers their experiments."""
    from wedgecp.experiments import factory

    for name in modules if modules is not None else EXPERIMENT_MODULES:
        import_module(name).register()
        logger.debug(f'loaded experiment module {name!r}; registered: {factory.get_experiment_names()}')

