"""Learning-rule samplers: single steps, trajectories, and baselines.

Five asynchronous rules act on a potential game: softmax resampling by one
uniformly chosen player (log-linear), its two-point variant (binary), the
uniform-exploration mixture (fixed share), softmax on noise-corrupted
utilities (noisy), and the continuous-time clock-driven variant for
symmetric games. Multiplicative-weights baselines (Hedge, EXP3, annealed
exponential weights) are provided for experimental comparison only.

All samplers take an explicit numpy Generator; trajectories are
reproducible from (game, config, steps, initial) alone.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .game_core import (
    PotentialGame,
    ValidationError,
    is_symmetric,
    profile_to_index,
)


class Rule(Enum):
    LOG_LINEAR = "log_linear"
    BINARY_LOG_LINEAR = "binary_log_linear"
    FIXED_SHARE = "fixed_share"
    NOISY_LOG_LINEAR = "noisy_log_linear"
    MODIFIED_SYMMETRIC = "modified_symmetric"


class BaselineRule(Enum):
    HEDGE = "hedge"
    EXP3 = "exp3"
    ANNEALED_EW = "annealed_ew"


@dataclass(frozen=True)
class DynamicsConfig:
    """Parameters of a learning rule.

    ``beta`` is the rationality level (0 = uniform play, large = near best
    response). ``xi`` is the exploration share for FIXED_SHARE (in [0, 1],
    both boundaries allowed for testing) or the noise bound for
    NOISY_LOG_LINEAR. ``alpha`` scales the exponential-clock rates of
    MODIFIED_SYMMETRIC. ``noise_mode`` "fixed" draws one noise table per
    trajectory (time-homogeneous chain); "iid" redraws every step and falls
    outside the perturbation analysis.
    """

    rule: Rule
    beta: float
    xi: float = 0.0
    alpha: float = 1.0
    seed: int = 0
    noise_mode: str = "fixed"

    def __post_init__(self):
        if self.beta < 0:
            raise ValidationError("beta must be nonnegative")
        if self.rule is Rule.FIXED_SHARE and not 0.0 <= self.xi <= 1.0:
            raise ValidationError("fixed-share xi must lie in [0, 1]")
        if self.rule is Rule.NOISY_LOG_LINEAR:
            if self.xi < 0:
                raise ValidationError("noise bound xi must be nonnegative")
            if 2.0 * self.beta * self.xi > 1.0:
                warnings.warn(
                    "2*beta*xi > 1: noise bound exceeds the robustness "
                    "hypothesis; slack formulas will refuse these values",
                    stacklevel=2,
                )
        if self.rule is Rule.MODIFIED_SYMMETRIC and self.alpha <= 0:
            raise ValidationError("clock rate scale alpha must be positive")
        if self.noise_mode not in ("fixed", "iid"):
            raise ValidationError("noise_mode must be 'fixed' or 'iid'")


@dataclass(frozen=True)
class Trajectory:
    """A realized path: profiles, their potentials, and (optionally) event
    times for the continuous-time rule."""

    profiles: np.ndarray          # (T+1, N) ints
    potentials: np.ndarray        # (T+1,)
    event_times: np.ndarray | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.profiles) != len(self.potentials):
            raise ValidationError("profiles/potentials length mismatch")
        if self.event_times is not None and len(self.event_times) != len(self.profiles):
            raise ValidationError("event_times length mismatch")


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed))


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max()
    w = np.exp(z)
    return w / w.sum()


def _sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    c = np.cumsum(probs)
    return int(np.searchsorted(c, rng.random() * c[-1], side="right"))


def _own_utility_row(tensor: np.ndarray, state, player: int) -> np.ndarray:
    """Player's utility over own actions with everyone else fixed."""
    key = tuple(state[:player]) + (slice(None),) + tuple(state[player + 1:])
    return tensor[key]


def log_linear_distribution(game: PotentialGame, state, player: int,
                            beta: float) -> np.ndarray:
    """Softmax of beta * U_i(., a_-i) over the player's actions."""
    return softmax(beta * _own_utility_row(game.utilities[player], state, player))


def fixed_share_distribution(game: PotentialGame, state, player: int,
                             beta: float, xi: float) -> np.ndarray:
    base = log_linear_distribution(game, state, player, beta)
    return xi / game.num_actions + (1.0 - xi) * base


def noisy_log_linear_distribution(game: PotentialGame, noise: np.ndarray,
                                  state, player: int, beta: float) -> np.ndarray:
    row = (_own_utility_row(game.utilities[player], state, player)
           + _own_utility_row(noise[player], state, player))
    return softmax(beta * row)


def binary_log_linear_distribution(game: PotentialGame, state, player: int,
                                   beta: float) -> np.ndarray:
    """Marginal next-action law of the trial-then-choose two-point rule.

    A trial action is uniform over A; the player keeps her current action or
    switches via the two-point softmax, so only trial==b can produce b != a_i.
    """
    a = game.num_actions
    row = _own_utility_row(game.utilities[player], state, player)
    cur = state[player]
    with np.errstate(over="ignore"):
        switch = 1.0 / (1.0 + np.exp(beta * (row[cur] - row)))
    probs = switch / a
    probs[cur] = 0.0
    probs[cur] = 1.0 - probs.sum()
    return probs


def sample_noise_table(game: PotentialGame, xi: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Per-(player, profile) noise, i.i.d. uniform on [-xi, xi]."""
    return rng.uniform(-xi, xi, size=game.utilities.shape)


def _replace_action(state, player: int, action: int):
    out = list(state)
    out[player] = action
    return tuple(out)


def log_linear_step(game: PotentialGame, state, beta: float,
                    rng: np.random.Generator):
    state = tuple(state)
    player = int(rng.integers(game.num_players))
    probs = log_linear_distribution(game, state, player, beta)
    return _replace_action(state, player, _sample(probs, rng))


def binary_log_linear_step(game: PotentialGame, state, beta: float,
                           rng: np.random.Generator):
    state = tuple(state)
    player = int(rng.integers(game.num_players))
    trial = int(rng.integers(game.num_actions))
    cur = state[player]
    if trial == cur:
        return state
    row = _own_utility_row(game.utilities[player], state, player)
    with np.errstate(over="ignore"):
        p_trial = 1.0 / (1.0 + np.exp(beta * (row[cur] - row[trial])))
    if rng.random() < p_trial:
        return _replace_action(state, player, trial)
    return state


def fixed_share_step(game: PotentialGame, state, beta: float, xi: float,
                     rng: np.random.Generator):
    if not 0.0 <= xi <= 1.0:
        raise ValidationError("fixed-share xi must lie in [0, 1]")
    state = tuple(state)
    player = int(rng.integers(game.num_players))
    probs = fixed_share_distribution(game, state, player, beta, xi)
    return _replace_action(state, player, _sample(probs, rng))


def noisy_log_linear_step(game: PotentialGame, noise: np.ndarray, state,
                          beta: float, rng: np.random.Generator):
    state = tuple(state)
    player = int(rng.integers(game.num_players))
    probs = noisy_log_linear_distribution(game, noise, state, player, beta)
    return _replace_action(state, player, _sample(probs, rng))


def clock_rates(state, alpha: float) -> np.ndarray:
    """Per-player firing rates alpha / z_i, z_i the fraction of players
    sharing player i's current action."""
    state = tuple(state)
    n = len(state)
    same = np.array([sum(1 for b in state if b == a) for a in state], dtype=float)
    return alpha * n / same


def modified_symmetric_step(game: PotentialGame, state, beta: float,
                            alpha: float, rng: np.random.Generator):
    """One event of the clock-driven rule: (next profile, elapsed time).

    The next event is the minimum of the players' exponential clocks, so
    the elapsed time is exponential with the summed rate and the firing
    player is rate-proportional; the firing player resamples by softmax.
    """
    state = tuple(state)
    rates = clock_rates(state, alpha)
    total = rates.sum()
    elapsed = float(rng.exponential(1.0 / total))
    player = _sample(rates / total, rng)
    probs = log_linear_distribution(game, state, player, beta)
    return _replace_action(state, player, _sample(probs, rng)), elapsed


def run_trajectory(game: PotentialGame, config: DynamicsConfig, steps: int,
                   initial) -> Trajectory:
    """Simulate ``steps`` updates (events for MODIFIED_SYMMETRIC).

    ``initial`` is either a profile or a distribution over profile indices,
    sampled first. Deterministic given (game, config, steps, initial).
    """
    rng = make_rng(config.seed)
    notes: list[str] = []
    state = _initial_state(game, initial, rng)

    noise = None
    if config.rule is Rule.NOISY_LOG_LINEAR and config.noise_mode == "fixed":
        noise = sample_noise_table(game, config.xi, rng)
    if config.rule is Rule.MODIFIED_SYMMETRIC and not is_symmetric(game):
        notes.append("asymmetric-game: occupancy reduction is invalid")

    profiles = np.empty((steps + 1, game.num_players), dtype=np.int64)
    potentials = np.empty(steps + 1)
    times = np.zeros(steps + 1) if config.rule is Rule.MODIFIED_SYMMETRIC else None
    profiles[0] = state
    potentials[0] = game.potential_of(state)

    for t in range(1, steps + 1):
        if config.rule is Rule.LOG_LINEAR:
            state = log_linear_step(game, state, config.beta, rng)
        elif config.rule is Rule.BINARY_LOG_LINEAR:
            state = binary_log_linear_step(game, state, config.beta, rng)
        elif config.rule is Rule.FIXED_SHARE:
            state = fixed_share_step(game, state, config.beta, config.xi, rng)
        elif config.rule is Rule.NOISY_LOG_LINEAR:
            table = noise if noise is not None else sample_noise_table(
                game, config.xi, rng)
            state = noisy_log_linear_step(game, table, state, config.beta, rng)
        elif config.rule is Rule.MODIFIED_SYMMETRIC:
            state, elapsed = modified_symmetric_step(
                game, state, config.beta, config.alpha, rng)
            times[t] = times[t - 1] + elapsed
        else:  # pragma: no cover
            raise ValidationError(f"unknown rule {config.rule}")
        profiles[t] = state
        potentials[t] = game.potential_of(state)

    return Trajectory(profiles, potentials, times, tuple(notes))


def _initial_state(game, initial, rng):
    initial = np.asarray(initial)
    if initial.ndim == 1 and len(initial) == game.num_players and \
            np.issubdtype(initial.dtype, np.integer):
        return tuple(int(a) for a in initial)
    if initial.ndim == 1 and len(initial) == game.num_profiles:
        probs = initial.astype(float)
        if abs(probs.sum() - 1.0) > 1e-9 or probs.min() < 0:
            raise ValidationError("initial distribution is not normalized")
        idx = _sample(probs, rng)
        out = []
        for _ in range(game.num_players):
            out.append(idx % game.num_actions)
            idx //= game.num_actions
        return tuple(out)
    raise ValidationError("initial must be a profile or a profile distribution")


def dump_trajectory_csv(traj: Trajectory, game: PotentialGame, path) -> None:
    """Write (t | event_time, profile_index, potential) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "profile_index", "potential"])
        for k in range(len(traj.profiles)):
            t = traj.event_times[k] if traj.event_times is not None else k
            writer.writerow([
                repr(float(t)) if traj.event_times is not None else int(t),
                profile_to_index(traj.profiles[k], game.num_actions),
                f"{traj.potentials[k]:.17g}",
            ])


# --- multiplicative-weights baselines (experimental comparison only) -------


@dataclass(frozen=True)
class BaselineState:
    """Cumulative (possibly importance-weighted) score per player/action.

    Scores live in the exponent: sampling uses softmax(eta * scores), which
    keeps the update overflow-free however large the importance weights get.
    ``t`` counts completed rounds.
    """

    scores: np.ndarray            # (N, A)
    t: int = 0
    exploration: float = 0.0      # uniform mixing, used by EXP3 only

    @staticmethod
    def fresh(game: PotentialGame, exploration: float = 0.0) -> "BaselineState":
        return BaselineState(
            np.zeros((game.num_players, game.num_actions)), 0, exploration)


def exp3_exploration(num_actions: int, horizon: int) -> float:
    """Canonical uniform-mixing level for EXP3 run over a known horizon."""
    return min(1.0, np.sqrt(num_actions * np.log(num_actions)
                            / ((np.e - 1.0) * horizon)))


def annealed_rate(num_actions: int, t: int) -> float:
    """Decaying temperature ln(A)/sqrt(t) for round t >= 1."""
    return np.log(num_actions) / np.sqrt(t)


def baseline_sampling_probs(state: BaselineState, rule: BaselineRule,
                            step_size: float) -> np.ndarray:
    """Per-player action distributions for the upcoming round."""
    a = state.scores.shape[1]
    if rule is BaselineRule.ANNEALED_EW:
        eta = annealed_rate(a, state.t + 1)
    else:
        eta = step_size
    z = eta * state.scores
    z = z - z.max(axis=1, keepdims=True)
    w = np.exp(z)
    probs = w / w.sum(axis=1, keepdims=True)
    if rule is BaselineRule.EXP3 and state.exploration > 0.0:
        probs = (1.0 - state.exploration) * probs + state.exploration / a
    return probs


def baseline_step(game: PotentialGame, state: BaselineState,
                  rule: BaselineRule, step_size: float,
                  rng: np.random.Generator):
    """All players sample simultaneously, observe, and update.

    Hedge adds each player's full utility vector against the realized
    opponent profile; EXP3 and annealed EW add only the played action's
    utility, importance-weighted by its sampling probability.
    Returns (updated state, sampled profile).
    """
    probs = baseline_sampling_probs(state, rule, step_size)
    profile = tuple(_sample(probs[i], rng) for i in range(game.num_players))
    scores = state.scores.copy()
    for i in range(game.num_players):
        if rule is BaselineRule.HEDGE:
            scores[i] += _own_utility_row(game.utilities[i], profile, i)
        else:
            u = game.utility_of(i, profile)
            scores[i, profile[i]] += u / probs[i, profile[i]]
    return replace(state, scores=scores, t=state.t + 1), profile
