"""Extended XHSTT toolkit: model, XML I/O, evaluation, modular expansion, ILP generation and local search."""

from .evaluator import DeviationReport, evaluate
from .model import Instance, Solution, SolutionEvent
from .xmlio import parse_instance, parse_solution, serialize_instance, serialize_solution

__version__ = "0.1.0"

__all__ = ["DeviationReport", "evaluate", "Instance", "Solution", "SolutionEvent",
           "parse_instance", "parse_solution", "serialize_instance", "serialize_solution", "__version__"]
