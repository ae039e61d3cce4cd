"""Shared fixtures: the two-player introductory game and random game suites."""

import numpy as np
import pytest

from pgames.game_core import PotentialGame, game_constants

INTRO_U1 = np.array([[5.0, -1.0], [-5.0, 1.0]])
INTRO_U2 = np.array([[2.0, -2.0], [-4.0, 4.0]])
INTRO_PHI = np.array([[4.0, 0.0], [-6.0, 2.0]])


@pytest.fixture
def intro_game() -> PotentialGame:
    """The 2x2 coordination game with potential [[4,0],[-6,2]]."""
    return PotentialGame(2, 2, np.array([INTRO_U1, INTRO_U2]), INTRO_PHI)


def random_potential_game(num_players: int, num_actions: int, rng,
                          potential_high: float = 0.6,
                          offset_high: float = 0.4,
                          identical_interest: bool = False,
                          min_delta: float = 0.0) -> PotentialGame:
    """Theorem-compatible random game: potential U[0, potential_high] plus
    per-player offsets depending only on opponents' actions.

    ``min_delta`` rejection-samples until the suboptimality gap is at least
    that large (keeps chains verifiable at the resulting beta thresholds).
    """
    shape = (num_actions,) * num_players
    while True:
        potential = rng.uniform(0.0, potential_high, size=shape)
        utilities = np.empty((num_players,) + shape)
        for i in range(num_players):
            if identical_interest:
                offsets = 0.0
            else:
                off_shape = [num_actions] * num_players
                off_shape[i] = 1
                offsets = rng.uniform(0.0, offset_high, size=tuple(off_shape))
            utilities[i] = potential + offsets
        game = PotentialGame(num_players, num_actions, utilities, potential)
        if game_constants(game).delta >= min_delta:
            return game


def acceptance_suite(seed: int = 2024):
    """The 20-game oracle suite: N=2, A cycling through {3, 4, 5}."""
    rng = np.random.default_rng(seed)
    return [random_potential_game(2, [3, 4, 5][k % 3], rng) for k in range(20)]
