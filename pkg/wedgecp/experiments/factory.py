"""Factory for creating an experiment object."""

from typing import Callable

from wedgecp.errors import InvalidArgumentError
from wedgecp.experiments.experiment import AbstractExperiment

experiment_creation_funcs: dict[str, Callable[..., AbstractExperiment]] = {}


def register(experiment_name: str, experiment_creator_fn: Callable[..., AbstractExperiment]) -> None:
    """Register a new experiment.

    eg: register('survival-curve', SurvivalCurveExperiment)
    """
    experiment_creation_funcs[experiment_name] = experiment_creator_fn


def unregister(experiment_name: str) -> None:
    """Unregister an experiment."""
    experiment_creation_funcs.pop(experiment_name, None)


def get_experiment_names() -> list[str]:
    return sorted(experiment_creation_funcs.keys())


def create_experiment(experiment_name: str) -> AbstractExperiment:
    """Create an experiment object given its name."""
    try:
        creator_func = experiment_creation_funcs[experiment_name]
    except KeyError:
        raise InvalidArgumentError(f'No experiment defined for {experiment_name!r}. '
                                   f'Registered experiments: {get_experiment_names()}.') from None
    return creator_func()
