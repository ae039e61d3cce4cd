"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one [PASS]/[FAIL] line (run with -s to see them on
success). Brute-force oracles come from the markov module; the closed-form
side comes from bounds. Criteria with astronomically conservative time
bounds are verified at t clamped to 2**63 - 1, which is sound because
total-variation distance to stationarity never increases with t.
"""

import math
import time

import numpy as np
import pytest

from pgames import bounds, markov
from pgames.dynamics import DynamicsConfig, Rule, run_trajectory
from pgames.experiments import (
    ExperimentConfig,
    generate_plateau_game,
    run_comparison,
    run_sweep,
)
from pgames.game_core import (
    PotentialGame,
    expected_potential,
    game_constants,
    occupancy_of,
)

from conftest import acceptance_suite, random_potential_game

MAX_T = 2 ** 63 - 1
BETAS = (0.0, 1.0, 5.0, 20.0)
RULES = (Rule.LOG_LINEAR, Rule.BINARY_LOG_LINEAR)


def _report(name: str, failures: list, elapsed: float, budget: float | None = None):
    ok = not failures
    if budget is not None and elapsed > budget:
        ok = False
        failures = failures + [f"runtime {elapsed:.1f}s exceeds {budget:.0f}s"]
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name} ({elapsed:.1f}s)")
    assert ok, f"{name}: {failures[:5]}"


@pytest.fixture(scope="module")
def suite():
    return acceptance_suite()


@pytest.fixture(scope="module")
def suite_chains(suite):
    """(game, rule, beta) -> (TransitionMatrix, stationary, gibbs)."""
    cache = {}
    for gi, game in enumerate(suite):
        for rule in RULES:
            for beta in BETAS:
                P = markov.build_transition(
                    game, DynamicsConfig(rule, beta=beta))
                mu = markov.stationary_of(P)
                gibbs = markov.gibbs_stationary(game, beta)
                cache[(gi, rule, beta)] = (P, mu, gibbs)
    return cache


def test_stationary_distribution_identity(suite, suite_chains):
    t0 = time.monotonic()
    failures = []
    for (gi, rule, beta), (P, mu, gibbs) in suite_chains.items():
        tv = markov.tv_distance(mu, gibbs)
        if tv > 1e-10:
            failures.append(f"game {gi} {rule.value} beta={beta}: TV={tv:.2e}")
    _report("stationary distribution matches Gibbs law (TV <= 1e-10)",
            failures, time.monotonic() - t0, budget=30.0)


def test_detailed_balance(suite, suite_chains):
    t0 = time.monotonic()
    failures = []
    for (gi, rule, beta), (P, _, gibbs) in suite_chains.items():
        ok, violation = markov.check_detailed_balance(P, gibbs, tol=1e-12)
        if not ok:
            failures.append(
                f"game {gi} {rule.value} beta={beta}: violation={violation:.2e}")
    _report("detailed balance (max violation <= 1e-12)", failures,
            time.monotonic() - t0)


def test_stationary_expectation_threshold(suite):
    t0 = time.monotonic()
    failures = []
    for gi, game in enumerate(suite):
        consts = game_constants(game)
        for eps in (0.5, 0.2, 0.1):
            beta = bounds.beta_threshold_general(
                consts.delta, game.num_actions, game.num_players,
                consts.optimal_count, eps, variant="stationary")
            value = expected_potential(game, markov.gibbs_stationary(game, beta))
            if value < consts.max_potential - eps:
                failures.append(f"game {gi} eps={eps}: E={value:.4f}")
    _report("rationality threshold delivers eps-efficient stationary "
            "expectation", failures, time.monotonic() - t0)


def test_log_sobolev_necessary_conditions(suite, suite_chains):
    t0 = time.monotonic()
    failures = []
    for (gi, rule, beta), (P, mu, _) in suite_chains.items():
        game = suite[gi]
        if game.num_actions < 4:
            continue
        rho_lb = bounds.log_sobolev_lower_bound(
            game.num_players, game.num_actions, float(mu.min()), P.p_min)
        PP = markov.multiplicative_reversibilization(P, mu)
        lam = markov.spectral_gap(PP, mu)
        if lam < 2.0 * rho_lb:
            failures.append(f"game {gi} {rule.value} beta={beta}: "
                            f"gap {lam:.2e} < 2*{rho_lb:.2e}")
        est = markov.estimate_log_sobolev(PP, mu, restarts=64)
        if est.value < rho_lb:
            failures.append(f"game {gi} {rule.value} beta={beta}: "
                            f"estimate {est.value:.2e} < {rho_lb:.2e}")
    _report("log-Sobolev lower bound consistent with gap and estimator "
            "(A >= 4 chains, 64 restarts)", failures,
            time.monotonic() - t0, budget=120.0)


def test_mixing_time_bound_soundness(suite, suite_chains):
    t0 = time.monotonic()
    eps = 0.2
    failures = []
    for (gi, rule, beta), (P, mu, _) in suite_chains.items():
        game = suite[gi]
        if game.num_actions < 4:
            continue
        mu_min = float(mu.min())
        rho_lb = bounds.log_sobolev_lower_bound(
            game.num_players, game.num_actions, mu_min, P.p_min)
        if rho_lb == 0.0:
            failures.append(f"game {gi}: vacuous rho bound")
            continue
        t_bound = math.ceil(bounds.mixing_time_upper_bound(rho_lb, mu_min, eps))
        # TV to stationarity is non-increasing, so checking at the clamp
        # covers any larger bound.
        t_check = min(t_bound, MAX_T)
        mu0 = np.full(game.num_profiles, 1.0 / game.num_profiles)
        tv = markov.tv_distance(markov.distribution_at_time(P, mu0, t_check), mu)
        if tv > eps / 4.0:
            failures.append(f"game {gi} {rule.value} beta={beta}: "
                            f"TV={tv:.2e} at t={t_check:.3g}")
    _report("mixing-time upper bound reaches TV <= eps/4 (binary "
            "exponentiation, huge t)", failures,
            time.monotonic() - t0, budget=60.0)


@pytest.fixture(scope="module")
def theorem_games():
    rng = np.random.default_rng(777)
    return [random_potential_game(2, 4, rng, min_delta=0.1) for _ in range(20)]


def _end_to_end(games, rule, variant):
    eps = 0.2
    failures = []
    for gi, game in enumerate(games):
        consts = game_constants(game)
        beta = bounds.beta_threshold_general(
            consts.delta, 4, 2, consts.optimal_count, eps)
        t_thm = bounds.convergence_time(variant, 2, 4, beta, eps)
        t_check = int(min(t_thm, MAX_T))
        P = markov.build_transition(game, DynamicsConfig(rule, beta=beta))
        mu0 = np.full(16, 1.0 / 16.0)
        mu_t = markov.distribution_at_time(P, mu0, t_check)
        if t_check < t_thm:
            # Clamped: confirm the chain is already mixed so the conclusion
            # transfers to the bound's larger t by TV monotonicity.
            gibbs = markov.gibbs_stationary(game, beta)
            tv = markov.tv_distance(mu_t, gibbs)
            if tv > eps / 4.0:
                failures.append(f"game {gi}: unmixed at clamp, TV={tv:.2e}")
                continue
        value = float(mu_t @ game.potential_flat())
        if value < consts.max_potential - eps:
            failures.append(f"game {gi}: E={value:.4f} < "
                            f"{consts.max_potential - eps:.4f}")
    return failures


def test_log_linear_end_to_end_guarantee(theorem_games):
    t0 = time.monotonic()
    failures = _end_to_end(theorem_games, Rule.LOG_LINEAR, "log_linear")
    _report("softmax resampling reaches eps-efficiency at the bound's "
            "(beta, t): 20/20 games", failures, time.monotonic() - t0)


def test_binary_log_linear_end_to_end_guarantee(theorem_games):
    t0 = time.monotonic()
    failures = _end_to_end(theorem_games, Rule.BINARY_LOG_LINEAR, "binary_log_linear")
    for beta in (0.7, 1.3, 9.0):
        ratio = (bounds.convergence_time("binary_log_linear", 2, 4, beta, 0.2)
                 / bounds.convergence_time("log_linear", 2, 4, beta, 0.2))
        if ratio != 8.0:
            failures.append(f"constant ratio {ratio} != 8")
    _report("two-point resampling reaches eps-efficiency; time constant "
            "exactly 8x", failures, time.monotonic() - t0)


@pytest.fixture(scope="module")
def perturbed_pairs():
    """50 (base chain, perturbed chain) pairs on 4-action games."""
    rng = np.random.default_rng(4242)
    pairs = []
    for k in range(25):
        game = random_potential_game(2, 4, rng)
        beta = (0.5, 1.0, 2.0)[k % 3]
        base = markov.build_transition(
            game, DynamicsConfig(Rule.LOG_LINEAR, beta=beta))
        for rule, xi in ((Rule.FIXED_SHARE, 0.05),
                         (Rule.NOISY_LOG_LINEAR, 0.02)):
            pert = markov.build_transition(
                game, DynamicsConfig(rule, beta=beta, xi=xi, seed=k))
            pairs.append((game, beta, rule, xi, base, pert))
    return pairs


def test_lipschitz_stationary_sensitivity(perturbed_pairs):
    t0 = time.monotonic()
    failures = []
    for i, (game, beta, rule, xi, base, pert) in enumerate(perturbed_pairs):
        mu1 = markov.stationary_of(base)
        mu2 = markov.stationary_of(pert)
        rho_lb = bounds.log_sobolev_lower_bound(2, 4, float(mu1.min()),
                                                base.p_min)
        L = bounds.lipschitz_constant(rho_lb, float(mu1.min()), 16)
        lhs = float(np.linalg.norm(mu1 - mu2))
        rhs = L * float(np.linalg.norm(base.probs - pert.probs, 2))
        if lhs > rhs:
            failures.append(f"pair {i}: {lhs:.2e} > {rhs:.2e}")
    _report("stationary laws are Lipschitz in the transition matrix "
            "(50 perturbed pairs)", failures, time.monotonic() - t0)


def test_perturbation_premises(perturbed_pairs):
    t0 = time.monotonic()
    failures = []
    for i, (game, beta, rule, xi, base, pert) in enumerate(perturbed_pairs):
        diff = pert.probs - base.probs
        if rule is Rule.NOISY_LOG_LINEAR:
            if 2.0 * beta * xi > 1.0:
                failures.append(f"pair {i}: hypothesis violated by setup")
            bound = 7.0 * beta * xi / (2.0 * 2)
            worst = float(np.abs(diff).max())
            if worst > bound:
                failures.append(f"pair {i} noisy: |dP|={worst:.3e} > {bound:.3e}")
        else:
            bound = xi * math.sqrt(16.0 / 2.0)
            norm = float(np.linalg.norm(diff, 2))
            if norm > bound:
                failures.append(f"pair {i} share: |dP|_2={norm:.3e} > {bound:.3e}")
    _report("perturbed transition matrices stay inside the analytic "
            "envelopes", failures, time.monotonic() - t0)


def test_perturbed_stationary_floor(perturbed_pairs):
    t0 = time.monotonic()
    failures = []
    for i, (game, beta, rule, xi, base, pert) in enumerate(perturbed_pairs):
        mu = markov.stationary_of(pert)
        floor = math.factorial(2) * (pert.p_min / 2.0) ** 2
        if float(mu.min()) < floor:
            failures.append(f"pair {i}: {mu.min():.3e} < {floor:.3e}")
    _report("perturbed chains keep the N!(p_min/N)^N stationary floor",
            failures, time.monotonic() - t0)


def test_qualitative_reproduction():
    t0 = time.monotonic()
    failures = []

    delta_cfg = ExperimentConfig(delta_values=(0.15, 0.10, 0.075),
                                 eps_values=(0.05,), num_games=30,
                                 horizon=10 ** 9, grid_points=400,
                                 base_seed=1000)
    delta_result = run_sweep(delta_cfg)
    delta_means = []
    for curve in delta_result.curves:
        if any(h is None for h in curve.hitting):
            failures.append(f"{curve.sweep_id}: unhit game within horizon")
        delta_means.append(float(np.mean([h for h in curve.hitting
                                          if h is not None])))
    if not (delta_means[0] < delta_means[1] < delta_means[2]):
        failures.append(f"gap sweep not monotone: {delta_means}")

    eps_cfg = ExperimentConfig(delta_values=(0.1,),
                               eps_values=(0.1, 0.05, 0.025, 0.01),
                               num_games=30, horizon=4 * 10 ** 9,
                               grid_points=400, base_seed=1000)
    eps_result = run_sweep(eps_cfg)
    eps_means = []
    for curve in eps_result.curves:
        if any(h is None for h in curve.hitting):
            failures.append(f"{curve.sweep_id}: unhit game within horizon")
        eps_means.append(float(np.mean([h for h in curve.hitting
                                        if h is not None])))
    if not all(a < b for a, b in zip(eps_means, eps_means[1:])):
        failures.append(f"precision sweep not monotone: {eps_means}")

    comp_cfg = ExperimentConfig(delta_values=(0.15,), eps_values=(0.05,),
                                num_games=30, horizon=100_000,
                                grid_points=300, base_seed=1000,
                                trajectories_per_game=25)
    comparison = run_comparison(comp_cfg)
    by_id = {c.sweep_id: c for c in comparison.curves}
    for algo in ("log_linear", "binary_log_linear"):
        frac = float(np.mean([h is not None for h in by_id[algo].hitting]))
        if frac < 0.9:
            failures.append(f"{algo}: hit fraction {frac:.2f} < 0.9")
    annealed = by_id["annealed_ew"]
    if annealed.aggregate_hit is not None or annealed.mean.max() >= 0.95:
        failures.append("annealed EW reached 1-eps within the horizon")

    _report("qualitative sweep/comparison behavior "
            f"(gap means {[f'{m:.3g}' for m in delta_means]}, "
            f"precision means {[f'{m:.3g}' for m in eps_means]})",
            failures, time.monotonic() - t0, budget=600.0)


def test_modified_symmetric_occupancy_frequencies():
    t0 = time.monotonic()
    reduced = {(0, 3): 0.2, (1, 2): 0.6, (2, 1): 0.3, (3, 0): 0.9}
    phi = np.empty((2, 2, 2))
    for p in np.ndindex(2, 2, 2):
        phi[p] = reduced[occupancy_of(p, 3, 2).counts]
    game = PotentialGame(3, 2, np.array([phi] * 3), phi)
    beta = 1.5

    states, target = markov.gibbs_occupancy(game, beta)
    keys = [s.counts for s in states]

    replicates = 24
    events = 20_000
    burn = 2_000
    freqs = np.zeros((replicates, len(keys)))
    for r in range(replicates):
        config = DynamicsConfig(Rule.MODIFIED_SYMMETRIC, beta=beta,
                                alpha=1.0, seed=9000 + r)
        traj = run_trajectory(game, config, events, (0, 0, 0))
        tail = traj.__class__(traj.profiles[burn:], traj.potentials[burn:],
                              traj.event_times[burn:])
        table = markov.occupancy_trajectory_frequencies(tail, 2)
        freqs[r] = [table.get(k, 0.0) for k in keys]

    mean = freqs.mean(axis=0)
    se = freqs.std(axis=0, ddof=1) / math.sqrt(replicates)
    failures = []
    for k, key in enumerate(keys):
        if abs(mean[k] - target[k]) > 4.0 * se[k]:
            failures.append(f"occupancy {key}: {mean[k]:.4f} vs {target[k]:.4f}"
                            f" (se {se[k]:.4f})")
    _report("clock-driven dynamics reproduces the occupancy Gibbs law "
            "(4 standard errors)", failures, time.monotonic() - t0)
