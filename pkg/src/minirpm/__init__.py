"""Desk-scale Raven's Progressive Matrices workbench.

Subpackages: ``engine`` (float64 tape autodiff), ``generator``/``oracle``/
``raster`` (procedural puzzles with a rule-search validator), ``data``
(binary dataset format and import), ``model`` (dual-contrast network),
``training`` (experiment protocols), ``cli`` (command-line entry point).
"""

from .generator import AttributeVector, Puzzle, Rule, RuleSet, generate_dataset
from .model import DualContrastNet, ModelConfig
from .oracle import AmbiguousPuzzleError, solve_by_rules
from .training import TrainConfig, evaluate, train

__all__ = [
    "AttributeVector",
    "Puzzle",
    "Rule",
    "RuleSet",
    "generate_dataset",
    "DualContrastNet",
    "ModelConfig",
    "AmbiguousPuzzleError",
    "solve_by_rules",
    "TrainConfig",
    "train",
    "evaluate",
]

__version__ = "0.1.0"
