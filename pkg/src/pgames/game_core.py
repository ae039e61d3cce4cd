"""Finite potential games: representation, validation, and game-level constants.

A game has N players sharing one action set {0, ..., A-1}. Utilities are
stored as one tensor per player over the joint action space, the potential
as a single tensor of the same shape. Joint actions ("profiles") are tuples
of ints; the canonical flat encoding is mixed-radix with player 0 as the
least significant digit:

    index(a) = sum_i a_i * A**i

All flat views of tensors therefore use Fortran order, so that
``tensor.reshape(-1, order="F")[index(a)] == tensor[a]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations

import numpy as np

DEFAULT_TOL = 1e-12

Profile = tuple[int, ...]


class GameStructureError(ValueError):
    """Inconsistent shapes or malformed game data."""


class ValidationError(ValueError):
    """Inputs violate a documented precondition."""


def profile_to_index(profile, num_actions: int) -> int:
    """Mixed-radix flat index of a profile, player 0 least significant."""
    idx = 0
    for i, a in enumerate(profile):
        if not 0 <= a < num_actions:
            raise ValidationError(f"action {a} out of range [0, {num_actions})")
        idx += int(a) * num_actions ** i
    return idx


def index_to_profile(index: int, num_players: int, num_actions: int) -> Profile:
    """Inverse of :func:`profile_to_index`."""
    if not 0 <= index < num_actions ** num_players:
        raise ValidationError(f"index {index} out of range")
    out = []
    for _ in range(num_players):
        out.append(index % num_actions)
        index //= num_actions
    return tuple(out)


@dataclass(frozen=True)
class PotentialGame:
    """An N-player game with shared action set and a potential function.

    ``utilities`` has shape (N,) + (A,)*N with axis i+1 indexing player i's
    action; ``potential`` has shape (A,)*N. Games whose utility or potential
    values leave [0, 1] are accepted but flagged ``theorem_compatible=False``
    so that the closed-form bounds can refuse them.
    """

    num_players: int
    num_actions: int
    utilities: np.ndarray
    potential: np.ndarray
    theorem_compatible: bool = field(init=False)

    def __post_init__(self):
        n, a = self.num_players, self.num_actions
        if n < 1 or a < 1:
            raise GameStructureError("need at least one player and one action")
        shape = (a,) * n
        util = np.asarray(self.utilities, dtype=float)
        pot = np.asarray(self.potential, dtype=float)
        if util.shape != (n,) + shape:
            raise GameStructureError(
                f"utilities shape {util.shape} != {(n,) + shape}")
        if pot.shape != shape:
            raise GameStructureError(f"potential shape {pot.shape} != {shape}")
        util.setflags(write=False)
        pot.setflags(write=False)
        object.__setattr__(self, "utilities", util)
        object.__setattr__(self, "potential", pot)
        ok = bool(
            util.min() >= 0.0 and util.max() <= 1.0
            and pot.min() >= 0.0 and pot.max() <= 1.0
        )
        object.__setattr__(self, "theorem_compatible", ok)

    @property
    def num_profiles(self) -> int:
        return self.num_actions ** self.num_players

    def potential_flat(self) -> np.ndarray:
        """Potential over profiles in canonical index order."""
        return self.potential.reshape(-1, order="F")

    def utility_flat(self, player: int) -> np.ndarray:
        return self.utilities[player].reshape(-1, order="F")

    def potential_of(self, profile) -> float:
        return float(self.potential[tuple(profile)])

    def utility_of(self, player: int, profile) -> float:
        return float(self.utilities[player][tuple(profile)])


@dataclass(frozen=True)
class GameConstants:
    """Suboptimality gap and the optimal-profile set of a game.

    ``degenerate`` is set when every profile maximizes the potential; the
    gap is then meaningless and bound computations must refuse the game.
    """

    delta: float
    max_potential: float
    optimal_set: tuple[Profile, ...]
    optimal_count: int
    degenerate: bool


@dataclass(frozen=True)
class OccupancyState:
    """Fractions of players on each action, stored exactly as counts/N."""

    counts: tuple[int, ...]
    num_players: int

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValidationError("negative occupancy count")
        if sum(self.counts) != self.num_players:
            raise ValidationError("occupancy counts must sum to num_players")

    @property
    def fractions(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(c, self.num_players) for c in self.counts)


def verify_potential(game: PotentialGame, tol: float = DEFAULT_TOL):
    """Check the potential identity on every unilateral deviation.

    For each player i the function U_i - Phi must not depend on player i's
    own action. Returns ``(True, None)`` when that holds everywhere within
    ``tol``, else ``(False, (player, a_i, a_i_prime, a_minus_i))`` where
    (a_i, a_i_prime) is the most-violating action pair at the first
    offending opponent profile in scan order.
    """
    for i in range(game.num_players):
        diff = np.moveaxis(game.utilities[i] - game.potential, i, -1)
        span = diff.max(axis=-1) - diff.min(axis=-1)
        bad = span > tol
        if bad.any():
            a_minus = tuple(int(x) for x in np.argwhere(bad)[0])
            row = diff[a_minus]
            return False, (i, int(row.argmax()), int(row.argmin()), a_minus)
    return True, None


def game_constants(game: PotentialGame) -> GameConstants:
    """Gap, maximum, and optimal set by exhaustive enumeration."""
    flat = game.potential_flat()
    max_pot = float(flat.max())
    optimal_idx = np.nonzero(flat == max_pot)[0]
    optimal = tuple(
        index_to_profile(int(k), game.num_players, game.num_actions)
        for k in optimal_idx
    )
    suboptimal = flat[flat < max_pot]
    if suboptimal.size == 0:
        return GameConstants(0.0, max_pot, optimal, len(optimal), True)
    delta = float(max_pot - suboptimal.max())
    return GameConstants(delta, max_pot, optimal, len(optimal), False)


def is_nash(game: PotentialGame, profile) -> bool:
    """True iff no unilateral deviation strictly improves the deviator."""
    profile = tuple(profile)
    for i in range(game.num_players):
        current = game.utility_of(i, profile)
        row = game.utilities[i][profile[:i] + (slice(None),) + profile[i + 1:]]
        if row.max() > current:
            return False
    return True


def is_eps_efficient(game: PotentialGame, profile, eps: float) -> bool:
    """True iff the profile's potential is within eps of the maximum."""
    if eps <= 0:
        raise ValidationError("eps must be positive")
    return game.potential_of(profile) >= float(game.potential.max()) - eps


def expected_potential(game: PotentialGame, dist) -> float:
    """Expectation of the potential under a distribution over profiles."""
    dist = np.asarray(dist, dtype=float)
    if dist.shape != (game.num_profiles,):
        raise ValidationError(
            f"distribution length {dist.shape} != {game.num_profiles}")
    if abs(dist.sum() - 1.0) > DEFAULT_TOL or dist.min() < -DEFAULT_TOL:
        raise ValidationError("distribution is not normalized")
    return float(dist @ game.potential_flat())


def is_symmetric(game: PotentialGame, max_exhaustive_players: int = 6,
                 num_samples: int = 200, seed: int = 0,
                 tol: float = DEFAULT_TOL) -> bool:
    """Check player interchangeability: U_i(a) == U_{pi(i)}(a \\circ pi).

    Exhaustive over all N! permutations for N <= max_exhaustive_players;
    beyond that a seeded sample of permutations is checked, which makes the
    result probabilistic (a True answer may be a false negative of the
    asymmetry test).
    """
    n = game.num_players
    if n <= max_exhaustive_players:
        perms = permutations(range(n))
    else:
        rng = np.random.default_rng(seed)
        perms = (tuple(rng.permutation(n)) for _ in range(num_samples))
    for pi in perms:
        # Relabeling players by pi sends profile a to b with b_{pi(j)} = a_j;
        # interchangeability demands U_i(a) == U_{pi(i)}(b) for every i, a.
        # As tensors: transpose U_{pi(i)} by axes=pi, then compare to U_i.
        for i in range(n):
            permuted = np.transpose(game.utilities[pi[i]], axes=pi)
            if not np.allclose(game.utilities[i], permuted, rtol=0.0, atol=tol):
                return False
    return True


def occupancy_of(profile, num_players: int, num_actions: int) -> OccupancyState:
    """Occupancy (action-usage) state of a profile."""
    profile = tuple(profile)
    if len(profile) != num_players:
        raise ValidationError("profile length != num_players")
    counts = [0] * num_actions
    for a in profile:
        counts[a] += 1
    return OccupancyState(tuple(counts), num_players)


def enumerate_occupancy_space(num_players: int, num_actions: int,
                              max_states: int = 10 ** 7) -> list[OccupancyState]:
    """All compositions of N into A nonnegative parts, lexicographic."""
    total = math.comb(num_players + num_actions - 1, num_actions - 1)
    if total > max_states:
        raise ValidationError(f"occupancy space has {total} > {max_states} states")
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(OccupancyState(tuple(prefix + [remaining]), num_players))
            return
        for v in range(remaining + 1):
            rec(prefix + [v], remaining - v, slots - 1)

    rec([], num_players, num_actions)
    return out


def load_game_json(source) -> PotentialGame:
    """Load a game from the JSON interchange format.

    Expected keys: ``num_players``, ``num_actions``, ``utilities`` as
    [player][flat profile index] in the canonical encoding, and optionally
    ``potential`` as [flat index]. A missing potential is reconstructed by
    telescoping utility differences along the path that rewrites the
    all-zeros profile into the target one coordinate at a time (anchored at
    player 0's utility of the all-zeros profile), then validated.
    """
    if isinstance(source, (str, bytes)):
        data = json.loads(source)
    else:
        data = json.load(source)
    n = int(data["num_players"])
    a = int(data["num_actions"])
    shape = (a,) * n
    util = np.array(
        [np.asarray(row, dtype=float).reshape(shape, order="F")
         for row in data["utilities"]]
    )
    if "potential" in data and data["potential"] is not None:
        pot = np.asarray(data["potential"], dtype=float).reshape(shape, order="F")
    else:
        pot = _reconstruct_potential(n, a, util)
    game = PotentialGame(n, a, util, pot)
    ok, witness = verify_potential(game)
    if not ok:
        raise GameStructureError(f"potential identity violated at {witness}")
    return game


def dump_game_json(game: PotentialGame) -> str:
    payload = {
        "num_players": game.num_players,
        "num_actions": game.num_actions,
        "utilities": [game.utility_flat(i).tolist()
                      for i in range(game.num_players)],
        "potential": game.potential_flat().tolist(),
    }
    return json.dumps(payload)


def _reconstruct_potential(n: int, a: int, util: np.ndarray) -> np.ndarray:
    pot = np.zeros((a,) * n)
    root = (0,) * n
    for idx in np.ndindex(*pot.shape):
        val = util[0][root]
        prev = list(root)
        for i in range(n):
            before = tuple(prev)
            prev[i] = idx[i]
            val += util[i][tuple(prev)] - util[i][before]
        pot[idx] = val
    return pot
