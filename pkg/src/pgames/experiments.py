"""Experiment harness: plateau games, gap/precision sweeps, baselines, CSV.

The reference family is the two-player, ten-action identical-interest
"plateau" game: one cell pinned at 1, a second plateau at 1 - delta, all
other entries i.i.d. uniform below the second plateau. Sweeps vary the gap
delta or the precision eps, set beta from the matching rationality
threshold, and track the expected potential over time.

Curves are evaluated on a geometric time grid. The default estimator is
exact distribution evolution (the state space is only A^N = 100); a
Monte-Carlo mode with matrix-row sampling is available and is validated
against the exact mode in the test suite.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .game_core import PotentialGame, ValidationError, game_constants
from .dynamics import BaselineRule, DynamicsConfig, Rule, make_rng
from .bounds import beta_threshold_general
from . import dynamics as dyn
from . import markov

PLATEAU_ACTIONS = 10
PLATEAU_BEST = (1, 1)        # pinned at potential 1
PLATEAU_SECOND = (8, 8)      # pinned at potential 1 - delta

FULL_FEEDBACK_ALGOS = ("log_linear", "hedge")
REDUCED_FEEDBACK_ALGOS = ("binary_log_linear", "exp3", "annealed_ew")


@dataclass(frozen=True)
class ExperimentConfig:
    """Protocol of one sweep or comparison run.

    ``delta_values`` x ``eps_values`` are crossed; a conventional sweep
    keeps one of them a singleton. ``mode`` selects the exact evolver or
    Monte-Carlo trajectories. Defaults (30 games, uniform initial
    distribution, geometric grid) are recorded in the CSV metadata since
    the experiment protocol leaves them open.
    """

    delta_values: tuple[float, ...]
    eps_values: tuple[float, ...]
    game_family: str = "plateau_identical_interest"
    num_games: int = 30
    rule: Rule = Rule.LOG_LINEAR
    xi: float = 0.0
    horizon: int = 100_000
    base_seed: int = 0
    trajectories_per_game: int = 100
    mode: str = "exact"
    grid_points: int = 400
    beta_variant: str = "with_mixing"
    beta_override: float | None = None
    output_path: str | None = None

    def __post_init__(self):
        if self.num_games < 1 or self.horizon < 1:
            raise ValidationError("need at least one game and one step")
        if self.mode not in ("exact", "mc"):
            raise ValidationError("mode must be 'exact' or 'mc'")
        if not self.delta_values or not self.eps_values:
            raise ValidationError("delta_values and eps_values must be nonempty")


@dataclass(frozen=True)
class SweepCurve:
    """Per-game curves and hitting times for one sweep setting."""

    sweep_id: str
    delta: float
    eps: float
    beta: float
    times: np.ndarray                  # (T,)
    per_game: np.ndarray               # (G, T) expected/empirical potential
    per_game_std: np.ndarray           # (G, T) across trajectories; 0 if exact
    hitting: tuple                     # per game: time of first crossing | None
    mean: np.ndarray                   # (T,) across games
    std: np.ndarray                    # (T,) across games
    aggregate_hit: int | None          # first time mean curve crosses


@dataclass(frozen=True)
class SweepResult:
    curves: tuple[SweepCurve, ...]
    metadata: dict = field(default_factory=dict)


def generate_plateau_game(delta: float, seed: int) -> PotentialGame:
    """Two-player identical-interest plateau game with gap exactly delta."""
    if not 0.0 < delta < 1.0:
        raise ValidationError("delta must lie in (0, 1)")
    rng = make_rng(seed)
    u = rng.uniform(0.0, 1.0 - delta, size=(PLATEAU_ACTIONS, PLATEAU_ACTIONS))
    u[PLATEAU_BEST] = 1.0
    u[PLATEAU_SECOND] = 1.0 - delta
    return PotentialGame(2, PLATEAU_ACTIONS, np.array([u, u]), u)


def hitting_time(curve, threshold: float):
    """Index of the first curve value >= threshold, or None."""
    curve = np.asarray(curve, dtype=float)
    hits = np.nonzero(curve >= threshold)[0]
    return int(hits[0]) if hits.size else None


def geometric_grid(horizon: int, points: int) -> np.ndarray:
    """0 plus ~points geometrically spaced integer times up to horizon."""
    if horizon < 1:
        return np.array([0], dtype=np.int64)
    ts = np.unique(np.round(np.geomspace(1.0, horizon, points)).astype(np.int64))
    return np.concatenate(([0], ts))


def _max_workers() -> int:
    env = os.environ.get("PP_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def exact_potential_curve(P, phi_flat: np.ndarray, mu0: np.ndarray,
                          times: np.ndarray) -> np.ndarray:
    """E_{mu^t}[Phi] on an increasing integer grid via cached squarings."""
    P = P.probs if hasattr(P, "probs") else np.asarray(P, dtype=float)
    gaps = np.diff(times)
    powers = [P]
    max_gap = int(gaps.max()) if gaps.size else 0
    for _ in range(max(max_gap, 1).bit_length() - 1):
        nxt = powers[-1] @ powers[-1]
        nxt /= nxt.sum(axis=1, keepdims=True)
        powers.append(nxt)
    mu = np.asarray(mu0, dtype=float).copy()
    out = np.empty(len(times))
    out[0] = mu @ phi_flat
    for j, gap in enumerate(gaps, start=1):
        gap = int(gap)
        k = 0
        while gap:
            if gap & 1:
                mu = mu @ powers[k]
            gap >>= 1
            k += 1
        mu /= mu.sum()
        out[j] = mu @ phi_flat
    return out


def mc_potential_curves(P, phi_flat: np.ndarray, times: np.ndarray,
                        n_traj: int, seed: int):
    """Empirical mean/std of the potential across matrix-sampled chains.

    All trajectories start from the uniform profile distribution and
    advance together through the row-cumulative transition matrix.
    """
    P = P.probs if hasattr(P, "probs") else np.asarray(P, dtype=float)
    size = P.shape[0]
    rng = make_rng(seed)
    cum = np.cumsum(P, axis=1)
    states = rng.integers(0, size, size=n_traj)
    mean = np.empty(len(times))
    std = np.empty(len(times))
    pos = 0
    vals = phi_flat[states]
    mean[0], std[0] = vals.mean(), vals.std()
    horizon = int(times[-1])
    for t in range(1, horizon + 1):
        u = rng.random(n_traj)
        states = (cum[states] < u[:, None]).sum(axis=1)
        if t == times[pos + 1]:
            pos += 1
            vals = phi_flat[states]
            mean[pos], std[pos] = vals.mean(), vals.std()
    return mean, std


def _game_for(config: ExperimentConfig, delta: float, game_id: int) -> PotentialGame:
    if config.game_family != "plateau_identical_interest":
        raise ValidationError(
            f"unknown game family {config.game_family!r}; pass games "
            "explicitly through run_sweep(..., games=...)")
    return generate_plateau_game(delta, config.base_seed + game_id)


def _sweep_task(config: ExperimentConfig, delta: float, eps: float,
                game_id: int, times: np.ndarray, game: PotentialGame | None):
    game = game if game is not None else _game_for(config, delta, game_id)
    consts = game_constants(game)
    if config.beta_override is not None:
        beta = config.beta_override
    else:
        beta = beta_threshold_general(consts.delta, game.num_actions,
                                      game.num_players, consts.optimal_count,
                                      eps, config.beta_variant)
    chain_cfg = DynamicsConfig(config.rule, beta=beta, xi=config.xi,
                               seed=config.base_seed + game_id)
    P = markov.build_transition(game, chain_cfg)
    phi = game.potential_flat()
    mu0 = np.full(game.num_profiles, 1.0 / game.num_profiles)
    if config.mode == "exact":
        curve = exact_potential_curve(P, phi, mu0, times)
        cstd = np.zeros_like(curve)
    else:
        traj_seed = config.base_seed + 100_000 * (game_id + 1)
        curve, cstd = mc_potential_curves(P, phi, times,
                                          config.trajectories_per_game,
                                          traj_seed)
    thr = consts.max_potential - eps
    hit_idx = hitting_time(curve, thr)
    hit = int(times[hit_idx]) if hit_idx is not None else None
    return beta, curve, cstd, hit


def run_sweep(config: ExperimentConfig,
              games: list[PotentialGame] | None = None) -> SweepResult:
    """Curves and hitting times over the delta x eps grid.

    Games are regenerated per delta from seeds base_seed + game_id (or
    supplied explicitly); work fans out over a thread pool capped by the
    PP_THREADS environment variable, with a deterministic ordered reduction.
    """
    times = geometric_grid(config.horizon, config.grid_points)
    curves = []
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        for delta in config.delta_values:
            for eps in config.eps_values:
                futures = [
                    pool.submit(_sweep_task, config, delta, eps, g, times,
                                games[g] if games is not None else None)
                    for g in range(config.num_games)
                ]
                results = [f.result() for f in futures]
                # Semicolon keeps sweep ids free of CSV quoting.
                curves.append(_collect_curve(
                    f"delta={delta:g};eps={eps:g}", delta, eps, times, results))
    metadata = _metadata(config)
    return SweepResult(tuple(curves), metadata)


def _collect_curve(sweep_id, delta, eps, times, results) -> SweepCurve:
    betas = [r[0] for r in results]
    per_game = np.array([r[1] for r in results])
    per_std = np.array([r[2] for r in results])
    hits = tuple(r[3] for r in results)
    mean = per_game.mean(axis=0)
    std = per_game.std(axis=0)
    # Aggregate star: plateau-family maximum potential is 1 by construction.
    agg_idx = hitting_time(mean, 1.0 - eps)
    return SweepCurve(sweep_id, delta, eps, float(np.mean(betas)), times,
                      per_game, per_std, hits, mean, std,
                      int(times[agg_idx]) if agg_idx is not None else None)


def _metadata(config: ExperimentConfig) -> dict:
    return {
        "game_family": config.game_family,
        "num_games": config.num_games,
        "rule": config.rule.value,
        "mode": config.mode,
        "horizon": config.horizon,
        "base_seed": config.base_seed,
        "trajectories_per_game": config.trajectories_per_game,
        "initial_distribution": "uniform",
        "beta_variant": config.beta_variant,
        "grid": "geometric",
    }


# --- baseline comparison ----------------------------------------------------


def hedge_step_size(num_actions: int, horizon: int) -> float:
    return float(np.sqrt(8.0 * np.log(num_actions) / horizon))


def _batch_baseline_curves(games, rule: BaselineRule, times: np.ndarray,
                           n_traj: int, seed: int):
    """Vectorized two-player baseline runner: all games and trajectories
    advance in lockstep; one Philox stream keyed by ``seed``.

    Utility lookups go through flattened tables with precomputed per-row
    offsets, which keeps the per-step cost to a handful of 1-D gathers.
    """
    n_games = len(games)
    a = games[0].num_actions
    horizon = int(times[-1])
    u1 = np.array([g.utilities[0] for g in games])
    u2 = np.array([g.utilities[1] for g in games])
    u1_flat = u1.reshape(-1)
    u2_flat = u2.reshape(-1)
    phi_flat = np.array([g.potential for g in games]).reshape(-1)
    u1_by_opponent = u1.transpose(0, 2, 1).reshape(n_games * a, a)
    u2_by_opponent = u2.reshape(n_games * a, a)
    rows = n_games * n_traj
    gidx = np.repeat(np.arange(n_games), n_traj)
    goff = gidx * a * a
    grow = gidx * a
    eta = hedge_step_size(a, horizon)
    gamma = dyn.exp3_exploration(a, horizon) if rule is BaselineRule.EXP3 else 0.0
    s1 = np.zeros((rows, a))
    s2 = np.zeros((rows, a))
    rng = make_rng(seed)
    mean = np.empty((n_games, len(times)))
    std = np.empty((n_games, len(times)))
    r = np.arange(rows)

    def record(pos, vals):
        per = vals.reshape(n_games, n_traj)
        mean[:, pos] = per.mean(axis=1)
        std[:, pos] = per.std(axis=1)

    pos = 0
    # Position 0 records the first round (sampling starts uniform there).
    for t in range(1, horizon + 1):
        eta_t = dyn.annealed_rate(a, t) if rule is BaselineRule.ANNEALED_EW else eta
        p1 = _softmax_rows(eta_t * s1)
        p2 = _softmax_rows(eta_t * s2)
        if gamma > 0.0:
            p1 = (1.0 - gamma) * p1 + gamma / a
            p2 = (1.0 - gamma) * p2 + gamma / a
        a1 = _sample_rows(p1, rng)
        a2 = _sample_rows(p2, rng)
        if rule is BaselineRule.HEDGE:
            s1 += u1_by_opponent[grow + a2]
            s2 += u2_by_opponent[grow + a1]
        else:
            joint = goff + a1 * a + a2
            s1[r, a1] += u1_flat[joint] / p1[r, a1]
            s2[r, a2] += u2_flat[joint] / p2[r, a2]
        if pos == 0 or (pos < len(times) and t == times[pos]):
            vals = phi_flat[goff + a1 * a + a2]
            if pos == 0:
                record(0, vals)
                pos = 1
            if pos < len(times) and t == times[pos]:
                record(pos, vals)
                pos += 1
    return mean, std


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=1, keepdims=True)


def _sample_rows(p: np.ndarray, rng) -> np.ndarray:
    c = np.cumsum(p, axis=1)
    u = rng.random(p.shape[0]) * c[:, -1]
    return (c < u[:, None]).sum(axis=1)


def run_comparison(config: ExperimentConfig) -> SweepResult:
    """Full- and reduced-feedback algorithms on the same plateau games.

    Exact evolution for the softmax-resampling rules, Monte-Carlo for the
    multiplicative-weights baselines. Uses the first delta and eps of the
    config; sweep ids are the algorithm names.
    """
    delta = config.delta_values[0]
    eps = config.eps_values[0]
    times = geometric_grid(config.horizon, config.grid_points)
    games = [_game_for(config, delta, g) for g in range(config.num_games)]
    curves = []

    for algo, rule in (("log_linear", Rule.LOG_LINEAR),
                       ("binary_log_linear", Rule.BINARY_LOG_LINEAR)):
        chain_conf = ExperimentConfig(
            delta_values=(delta,), eps_values=(eps,), rule=rule,
            num_games=config.num_games, horizon=config.horizon,
            base_seed=config.base_seed, grid_points=config.grid_points,
            mode="exact", game_family=config.game_family)
        with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
            futures = [pool.submit(_sweep_task, chain_conf, delta, eps, g,
                                   times, games[g])
                       for g in range(config.num_games)]
            results = [f.result() for f in futures]
        curves.append(_collect_curve(algo, delta, eps, times, results))

    baseline_seed_offsets = {"hedge": 1, "exp3": 2, "annealed_ew": 3}
    for algo, rule in (("hedge", BaselineRule.HEDGE),
                       ("exp3", BaselineRule.EXP3),
                       ("annealed_ew", BaselineRule.ANNEALED_EW)):
        mean, std = _batch_baseline_curves(
            games, rule, times, config.trajectories_per_game,
            config.base_seed + 1_000_000 * baseline_seed_offsets[algo])
        thr = 1.0 - eps
        hits = tuple(
            int(times[h]) if (h := hitting_time(mean[g], thr)) is not None else None
            for g in range(config.num_games))
        agg = mean.mean(axis=0)
        agg_idx = hitting_time(agg, thr)
        curves.append(SweepCurve(
            algo, delta, eps, float("nan"), times, mean, std, hits,
            agg, mean.std(axis=0),
            int(times[agg_idx]) if agg_idx is not None else None))

    metadata = _metadata(config)
    metadata.update({
        "hedge_exp3_step_size": hedge_step_size(PLATEAU_ACTIONS, config.horizon),
        "exp3_exploration": dyn.exp3_exploration(PLATEAU_ACTIONS, config.horizon),
        "annealed_schedule": "log(A)/sqrt(t)",
        "full_feedback": ",".join(FULL_FEEDBACK_ALGOS),
        "reduced_feedback": ",".join(REDUCED_FEEDBACK_ALGOS),
    })
    return SweepResult(tuple(curves), metadata)


# --- CSV export -------------------------------------------------------------


def export_csv(result: SweepResult, path) -> str:
    """Write curve rows and the sibling hitting-time file.

    Curve schema: sweep_id, game_id, t, mean_potential, std_potential.
    Hitting schema: sweep_id, game_id, hitting_t (empty when never hit).
    Floats carry 17 significant digits so read-back is exact. Returns the
    hitting-file path.
    """
    path = str(path)
    with open(path, "w", newline="") as fh:
        for key, value in sorted(result.metadata.items()):
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sweep_id", "game_id", "t",
                         "mean_potential", "std_potential"])
        for curve in result.curves:
            for g in range(curve.per_game.shape[0]):
                for j, t in enumerate(curve.times):
                    writer.writerow([
                        curve.sweep_id, g, int(t),
                        f"{curve.per_game[g, j]:.17g}",
                        f"{curve.per_game_std[g, j]:.17g}",
                    ])
    hit_path = _hitting_path(path)
    with open(hit_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sweep_id", "game_id", "hitting_t"])
        for curve in result.curves:
            for g, hit in enumerate(curve.hitting):
                writer.writerow([curve.sweep_id, g,
                                 "" if hit is None else int(hit)])
    return hit_path


def _hitting_path(path: str) -> str:
    stem, ext = os.path.splitext(path)
    return f"{stem}_hitting{ext or '.csv'}"


# --- invariant checks (CLI --check mode) ------------------------------------


def check_sweep_result(result: SweepResult, kind: str = "sweep") -> list[str]:
    """Assertions the produced result must satisfy; returns failure strings."""
    failures = []
    for curve in result.curves:
        if np.isnan(curve.per_game).any():
            failures.append(f"{curve.sweep_id}: NaN in curves")
        if curve.per_game.min() < -1e-12 or curve.per_game.max() > 1.0 + 1e-12:
            failures.append(f"{curve.sweep_id}: curve leaves [0, 1]")
    if kind == "sweep":
        failures.extend(_check_monotone_hits(result))
    elif kind == "comparison":
        failures.extend(_check_comparison(result))
    return failures


def _mean_hit(curve: SweepCurve, horizon: int) -> float:
    return float(np.mean([h if h is not None else horizon
                          for h in curve.hitting]))


def _check_monotone_hits(result: SweepResult) -> list[str]:
    failures = []
    horizon = int(result.metadata.get("horizon", 0)) or int(
        result.curves[0].times[-1])
    by_eps: dict = {}
    by_delta: dict = {}
    for c in result.curves:
        by_eps.setdefault(c.eps, []).append(c)
        by_delta.setdefault(c.delta, []).append(c)
    for eps, group in by_eps.items():
        if len(group) < 2:
            continue
        group = sorted(group, key=lambda c: -c.delta)  # decreasing gap
        means = [_mean_hit(c, horizon) for c in group]
        if not all(a < b for a, b in zip(means, means[1:])):
            failures.append(
                f"hit times not increasing as delta decreases at eps={eps}: "
                f"{means}")
    for delta, group in by_delta.items():
        if len(group) < 2:
            continue
        group = sorted(group, key=lambda c: -c.eps)  # decreasing precision
        means = [_mean_hit(c, horizon) for c in group]
        if not all(a < b for a, b in zip(means, means[1:])):
            failures.append(
                f"hit times not increasing as eps decreases at delta={delta}: "
                f"{means}")
    return failures


def _check_comparison(result: SweepResult) -> list[str]:
    failures = []
    curves = {c.sweep_id: c for c in result.curves}
    for algo in ("log_linear", "binary_log_linear"):
        c = curves.get(algo)
        if c is None:
            failures.append(f"missing {algo} curve")
            continue
        frac = np.mean([h is not None for h in c.hitting])
        if frac < 0.9:
            failures.append(f"{algo}: only {frac:.0%} of games reached 1-eps")
    annealed = curves.get("annealed_ew")
    if annealed is None:
        failures.append("missing annealed_ew curve")
    elif annealed.aggregate_hit is not None:
        failures.append("annealed_ew mean curve reached 1-eps; expected it "
                        "to fail within the horizon")
    return failures
