"""Closed-form thresholds and time bounds, assembled into checkable reports.

Every formula here is an explicit function of game-level constants (N, A,
the suboptimality gap, optimal-set size) and chain-level constants (the
stationary floor mu_min and the transition envelope p_min). The markov
module supplies exact realizations of the chain constants, so each bound
can be verified against brute force.

Clamping conventions (all enlarge bounds, never shrink them): the inner
argument of every log-log term is floored at e, and the log(beta) term is
floored at 0. Quantities that would overflow double precision are reported
in log10 and flagged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .game_core import (
    GameConstants,
    PotentialGame,
    ValidationError,
    game_constants,
)
from .dynamics import DynamicsConfig, Rule
from . import markov

BETA_VARIANTS = {
    "stationary": 1.0,         # whole eps budget spent at stationarity
    "with_mixing": 2.0,        # eps/2 reserved for the mixing loss
    "with_perturbation": 4.0,  # eps/4 budget of the perturbation analysis
}


class DegenerateGameError(ValidationError):
    """The suboptimality gap is zero; threshold formulas are undefined."""


def _require_positive_gap(delta: float) -> None:
    if delta <= 0.0:
        raise DegenerateGameError(
            "suboptimality gap must be positive; degenerate games have "
            "every profile optimal and need no learning bound")


def beta_threshold_general(delta: float, num_actions: int, num_players: int,
                           opt_count: int, eps: float,
                           variant: str = "with_mixing") -> float:
    """Rationality threshold for eps-efficiency over the joint action space.

    (1/delta) * log((A^N - A*) * (c/(eps A*) - 1/A*)) with c the variant
    factor (1, 2, or 4). Returns 0 when the log argument drops below 1
    (any nonnegative beta suffices there).
    """
    _require_positive_gap(delta)
    if not 0.0 < eps < 1.0:
        raise ValidationError("eps must lie in (0, 1)")
    total = num_actions ** num_players
    if opt_count >= total:
        raise DegenerateGameError("all profiles optimal")
    if variant not in BETA_VARIANTS:
        raise ValidationError(f"unknown variant {variant!r}")
    c = BETA_VARIANTS[variant]
    arg = (total - opt_count) * (c / (eps * opt_count) - 1.0 / opt_count)
    if arg <= 1.0:
        return 0.0
    return math.log(arg) / delta


def beta_threshold_symmetric(delta: float, num_actions: int, num_players: int,
                             opt_count: int, eps: float) -> float:
    """Threshold over the occupancy space, whose size is <= (N+1)^(A-1)."""
    _require_positive_gap(delta)
    if not 0.0 < eps < 1.0:
        raise ValidationError("eps must lie in (0, 1)")
    if opt_count < 1:
        raise ValidationError("need at least one optimal occupancy state")
    arg = (num_players + 1) ** (num_actions - 1) * (
        1.0 / (eps * opt_count) - 1.0 / opt_count)
    if arg <= 1.0:
        return 0.0
    return math.log(arg) / delta


def log_sobolev_lower_bound(num_players: int, num_actions: int,
                            mu_min: float, p_min: float) -> float:
    """Lower bound on rho(P P*) for single-deviation chains with envelope
    p_min and stationary floor mu_min: 16 pi^2 A^(N-2) mu_min p_min^3 / (25 N^2).

    Only valid for A >= 4 (the underlying cycle-walk comparison needs it).
    """
    if num_actions < 4:
        raise ValidationError(
            "the log-Sobolev lower bound requires at least 4 actions; the "
            "comparison chain argument breaks down for smaller action sets")
    if not 0.0 <= p_min <= 1.0:
        raise ValidationError("p_min must lie in [0, 1]")
    return (16.0 * math.pi ** 2 * num_actions ** (num_players - 2)
            * mu_min * p_min ** 3 / (25.0 * num_players ** 2))


def _loglog_clamped(x: float) -> float:
    """log(max(log(x), e)); the floor only enlarges the bounds using it."""
    return math.log(max(math.log(x), math.e))


def mixing_time_upper_bound(rho: float, mu_min: float, eps: float) -> float:
    """Time to drive TV distance below eps/4:
    (1/rho) (loglog(1/mu_min) + 2 log(4/eps))."""
    if rho <= 0.0:
        raise ValidationError("rho must be positive")
    if not 0.0 < mu_min < 1.0:
        raise ValidationError("mu_min must lie in (0, 1)")
    if not 0.0 < eps <= 4.0:
        raise ValidationError("eps must lie in (0, 4]")
    return (_loglog_clamped(1.0 / mu_min) + 2.0 * math.log(4.0 / eps)) / rho


def convergence_time(variant: str, num_players: int, num_actions: int,
                     beta: float, eps: float) -> float:
    """Steps guaranteeing an eps-efficient expected potential.

    Variant "log_linear" (full softmax resampling) uses the constant
    25 N^2 A^5 / (16 pi^2); variant "binary_log_linear" (two-point
    resampling) is exactly 8x that. Both multiply e^(4 beta) (loglog A^N + log beta + 2 log(4/eps))
    with log(beta) floored at 0.
    """
    if num_actions < 4:
        raise ValidationError("convergence-time bounds require A >= 4")
    if beta <= 0.0:
        raise ValidationError("beta must be positive")
    if not 0.0 < eps < 1.0:
        raise ValidationError("eps must lie in (0, 1)")
    factor = {"log_linear": 1.0, "binary_log_linear": 8.0}.get(variant)
    if factor is None:
        raise ValidationError(f"unknown variant {variant!r}")
    base = 25.0 * num_players ** 2 * num_actions ** 5 / (16.0 * math.pi ** 2)
    bracket = (_loglog_clamped(float(num_actions) ** num_players)
               + max(math.log(beta), 0.0) + 2.0 * math.log(4.0 / eps))
    with np.errstate(over="ignore"):
        return float(factor * base * np.exp(4.0 * beta) * bracket)


def lipschitz_constant(rho_ppstar: float, mu_min: float,
                       num_states: int) -> float:
    """Sensitivity of the stationary law to transition perturbations:
    ||mu1 - mu2||_2 <= L ||P1 - P2||_2 with
    L = (2 S / rho) (loglog(1/mu_min) + log(8 S))."""
    if rho_ppstar <= 0.0 or num_states < 1:
        raise ValidationError("need positive rho and at least one state")
    if not 0.0 < mu_min < 1.0:
        raise ValidationError("mu_min must lie in (0, 1)")
    return (2.0 * num_states / rho_ppstar) * (
        _loglog_clamped(1.0 / mu_min) + math.log(8.0 * num_states))


def envelope_mixing_time_bound(num_players: int, num_actions: int, p_min: float,
                  eps: float) -> float:
    """Mixing-time bound for any single-deviation chain with envelope p_min,
    to TV accuracy eps/(4 sqrt(A^N)):

    25 N^(3/2) e^N / ((2 pi)^(5/2) A^N p_min^(N+3))
        * log(4 A^N / eps^2 * log(e^N / (p_min^N sqrt(2 pi N)))).
    """
    if not 0.0 < p_min <= 1.0:
        raise ValidationError("p_min must lie in (0, 1]")
    if not 0.0 < eps < 1.0:
        raise ValidationError("eps must lie in (0, 1)")
    n = num_players
    states = float(num_actions) ** n
    prefactor = (25.0 * n ** 1.5 * math.exp(n)
                 / ((2.0 * math.pi) ** 2.5 * states * p_min ** (n + 3)))
    inner = n - n * math.log(p_min) - 0.5 * math.log(2.0 * math.pi * n)
    inner = max(inner, 1.0)
    outer_arg = max(4.0 * states / eps ** 2 * inner, math.e)
    return prefactor * math.log(outer_arg)


def perturbation_slack(kind: str, lipschitz: float, num_players: int,
                       num_actions: int, beta: float, xi: float) -> float:
    """Additive potential loss from a perturbed rule.

    "noisy" (utilities corrupted within [-xi, xi], needs 2 beta xi <= 1):
    7 L A^(3N/2) beta xi / (2N). "fixed_share" (uniform exploration xi):
    L A^N xi / sqrt(N).
    """
    if xi < 0.0:
        raise ValidationError("xi must be nonnegative")
    if xi == 0.0:
        return 0.0
    if kind == "noisy":
        if 2.0 * beta * xi > 1.0:
            raise ValidationError(
                "noise bound violates the hypothesis 2*beta*xi <= 1 of the "
                "corrupted-utility robustness result")
        return (7.0 * lipschitz * float(num_actions) ** (1.5 * num_players)
                * beta * xi / (2.0 * num_players))
    if kind == "fixed_share":
        return (lipschitz * float(num_actions) ** num_players * xi
                / math.sqrt(num_players))
    raise ValidationError(f"unknown perturbation kind {kind!r}")


def symmetric_convergence_time(num_players: int, num_actions: int, beta: float,
                    eps: float, alpha: float = 1.0, c: float = 1.0) -> float:
    """Event-time bound for the clock-driven symmetric rule, up to the
    unspecified positive constant c (exposed as an input, default 1):
    (N / (alpha c)) e^(3 beta) (log((A-1) log(N+1)) + log beta + 2 log(4/eps)).
    """
    if alpha <= 0.0 or c <= 0.0:
        raise ValidationError("alpha and c must be positive")
    if beta <= 0.0 or not 0.0 < eps < 1.0:
        raise ValidationError("need beta > 0 and eps in (0, 1)")
    bracket = (math.log(max((num_actions - 1)
                            * math.log(num_players + 1.0), math.e))
               + max(math.log(beta), 0.0) + 2.0 * math.log(4.0 / eps))
    with np.errstate(over="ignore"):
        return float(num_players / (alpha * c) * np.exp(3.0 * beta) * bracket)


@dataclass(frozen=True)
class BoundsReport:
    """All closed-form quantities for one (game, rule, eps) triple.

    When ``log_space`` is set, the five magnitude fields (rho_lower through
    perturbation_slack) hold base-10 logarithms because the plain values
    overflow double precision; beta_threshold is always linear.
    """

    beta_threshold: float
    rho_lower: float
    mixing_time_upper: float
    convergence_time: float
    lipschitz_L: float
    perturbation_slack: float
    inputs: dict
    log_space: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def assemble_report(game: PotentialGame, config: DynamicsConfig, eps: float,
                    max_states: int = markov.DEFAULT_STATE_CAP) -> BoundsReport:
    """Compute every bound for a discrete-time rule on a verified game.

    Selects beta from the rule's matching threshold, builds the exact chain
    to extract the realized stationary floor and envelope, and fills every
    report field. Deterministic. Theorem-incompatible or degenerate games
    are refused; enormous beta switches the report to log-space using the
    analytic envelope specializations instead of the built chain.
    """
    if not game.theorem_compatible:
        raise ValidationError(
            "game is flagged theorem-incompatible (utilities or potential "
            "leave [0, 1]); rescale before computing bounds")
    if config.rule is Rule.MODIFIED_SYMMETRIC:
        raise ValidationError(
            "reports cover the discrete-time rules; use symmetric_convergence_time and "
            "beta_threshold_symmetric for the clock-driven variant")
    consts = game_constants(game)
    if consts.degenerate:
        raise DegenerateGameError("degenerate game: all profiles optimal")

    n, a = game.num_players, game.num_actions
    variant = ("with_perturbation"
               if config.rule in (Rule.NOISY_LOG_LINEAR, Rule.FIXED_SHARE)
               else "with_mixing")
    beta = beta_threshold_general(consts.delta, a, n, consts.optimal_count,
                                  eps, variant)
    time_variant = "binary_log_linear" if config.rule is Rule.BINARY_LOG_LINEAR else "log_linear"
    states = a ** n

    # Beyond beta ~ 170 the realized-envelope path degrades: e^{4 beta}
    # overflows shortly after and the chain's envelope cubes underflow.
    log_space = beta > 170.0
    if log_space:
        # Analytic specializations; all entries are log10 of the bound.
        ln = math.log(10.0)
        log_mu_min = (-beta - n * math.log(a)) / ln
        penalty = math.log(2.0) / ln if time_variant == "binary_log_linear" else 0.0
        log_p_min = (-beta - math.log(a)) / ln - penalty
        log_rho = (math.log(16.0 * math.pi ** 2 * a ** (n - 2) / (25.0 * n ** 2)) / ln
                   + log_mu_min + 3.0 * log_p_min)
        bracket = (_loglog_clamped(a ** n) + max(math.log(beta), 0.0)
                   + 2.0 * math.log(4.0 / eps))
        log_mix = math.log(bracket) / ln - log_rho
        log_conv = (math.log(25.0 * n ** 2 * a ** 5 / (16.0 * math.pi ** 2)
                             * ({"log_linear": 1.0, "binary_log_linear": 8.0}[time_variant])) / ln
                    + 4.0 * beta / ln + math.log(bracket) / ln)
        # loglog(1/mu_min) with mu_min = e^-beta / A^N, no exponentiation.
        loglog_mu = math.log(max(beta + n * math.log(a), math.e))
        log_lip = (math.log(2.0 * states) / ln - log_rho
                   + math.log(loglog_mu + math.log(8.0 * states)) / ln)
        slack = 0.0
        if config.rule is Rule.NOISY_LOG_LINEAR and config.xi > 0.0:
            slack = (math.log(7.0 * beta * config.xi / (2.0 * n)) / ln
                     + 1.5 * n * math.log(a) / ln + log_lip)
        elif config.rule is Rule.FIXED_SHARE and config.xi > 0.0:
            slack = (math.log(config.xi / math.sqrt(n)) / ln
                     + n * math.log(a) / ln + log_lip)
        inputs = _report_inputs(game, consts, config, eps, variant,
                                mu_min=None, p_min=None)
        return BoundsReport(beta, log_rho, log_mix, log_conv, log_lip, slack,
                            inputs, log_space=True)

    chain_cfg = DynamicsConfig(config.rule, beta=beta, xi=config.xi,
                               alpha=config.alpha, seed=config.seed,
                               noise_mode=config.noise_mode)
    P = markov.build_transition(game, chain_cfg, max_states=max_states)
    mu = markov.stationary_of(P)
    mu_min = float(mu.min())
    rho = log_sobolev_lower_bound(n, a, mu_min, P.p_min)
    mix = mixing_time_upper_bound(rho, mu_min, eps)
    conv = convergence_time(time_variant, n, a, beta, eps)
    lip = lipschitz_constant(rho, mu_min, states)
    slack = 0.0
    if config.rule is Rule.NOISY_LOG_LINEAR:
        slack = perturbation_slack("noisy", lip, n, a, beta, config.xi)
    elif config.rule is Rule.FIXED_SHARE:
        slack = perturbation_slack("fixed_share", lip, n, a, beta, config.xi)
    inputs = _report_inputs(game, consts, config, eps, variant,
                            mu_min=mu_min, p_min=P.p_min)
    return BoundsReport(beta, rho, mix, conv, lip, slack, inputs)


def _report_inputs(game: PotentialGame, consts: GameConstants,
                   config: DynamicsConfig, eps: float, variant: str,
                   mu_min, p_min) -> dict:
    return {
        "num_players": game.num_players,
        "num_actions": game.num_actions,
        "delta": consts.delta,
        "optimal_count": consts.optimal_count,
        "eps": eps,
        "xi": config.xi,
        "rule": config.rule.value,
        "beta_variant": variant,
        "mu_min": mu_min,
        "p_min": p_min,
    }
