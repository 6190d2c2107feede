from src.experiments.heldout import HeldoutScores, evaluate_heldout
from src.experiments.sweeps import COMPONENT_ROWS, fixer_component_ablation, noise_level_sweep, write_rows

__all__ = [
    "HeldoutScores",
    "evaluate_heldout",
    "COMPONENT_ROWS",
    "fixer_component_ablation",
    "noise_level_sweep",
    "write_rows",
]
