from .dispatchers import Dispatcher, build_dispatcher
from .perturbation import PerturbationError, default_perturbation, max_chi
from .ranking import QueueSnapshot, Ranking, rank

__all__ = [
    "Dispatcher",
    "build_dispatcher",
    "PerturbationError",
    "default_perturbation",
    "max_chi",
    "QueueSnapshot",
    "Ranking",
    "rank",
]
