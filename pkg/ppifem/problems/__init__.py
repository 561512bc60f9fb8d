from ..exceptions import ConfigError
from . import example1, example2
from .base import ProblemSpec, manufactured_problem

EXAMPLES = {1: example1.problem, 2: example2.problem}


def get_problem(example: int, beta) -> ProblemSpec:
    try:
        factory = EXAMPLES[int(example)]
    except (KeyError, ValueError):
        raise ConfigError(f"unknown example {example!r}", key="example")
    return factory(tuple(beta))
