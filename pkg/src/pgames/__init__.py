"""Log-linear learning in finite potential games.

Subpackages: game_core (games and constants), dynamics (learning rules),
markov (exact chain oracles), bounds (closed-form thresholds and times),
experiments (sweep/comparison harness), cli (command line).
"""

from .game_core import (
    GameConstants,
    OccupancyState,
    PotentialGame,
    enumerate_occupancy_space,
    expected_potential,
    game_constants,
    index_to_profile,
    is_eps_efficient,
    is_nash,
    is_symmetric,
    occupancy_of,
    profile_to_index,
    verify_potential,
)
from .dynamics import DynamicsConfig, Rule, Trajectory, run_trajectory
from .markov import TransitionMatrix, build_transition, gibbs_stationary
from .bounds import BoundsReport, assemble_report

__all__ = [
    "BoundsReport",
    "DynamicsConfig",
    "GameConstants",
    "OccupancyState",
    "PotentialGame",
    "Rule",
    "Trajectory",
    "TransitionMatrix",
    "assemble_report",
    "build_transition",
    "enumerate_occupancy_space",
    "expected_potential",
    "game_constants",
    "gibbs_stationary",
    "index_to_profile",
    "is_eps_efficient",
    "is_nash",
    "is_symmetric",
    "occupancy_of",
    "profile_to_index",
    "run_trajectory",
    "verify_potential",
]

__version__ = "0.1.0"
