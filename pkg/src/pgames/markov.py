"""Exact Markov-chain machinery over the joint action space.

Everything here is dense, double precision, and desk scale (state-space cap
20 000). These are the brute-force oracles the closed-form bounds are
checked against: exact transition matrices with their envelope constants,
stationary distributions via squaring-accelerated power iteration, detailed
balance, total-variation evolution through binary exponentiation (t up to
2**63), spectral gaps of reversible chains, and a variational estimator
that upper-bounds the log-Sobolev constant.

The log-Sobolev constant of a chain (P, mu) is

    rho(P) = inf_f  E_P(f, f) / L(f^2),

with Dirichlet form E_P(f,f) = (1/2) sum_{a,b} (f(a)-f(b))^2 P_{a,b} mu(a)
and L(f^2) = sum_a f(a)^2 log(f(a)^2 / ||f||_{2,mu}^2) mu(a). Any feasible
f upper-bounds the infimum, so the estimator returns a certified upper
bound on rho; analytical lower bounds live in :mod:`pgames.bounds`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .game_core import PotentialGame, ValidationError, occupancy_of
from . import dynamics as dyn
from .dynamics import DynamicsConfig, Rule

DEFAULT_STATE_CAP = 20_000
MAX_TIME = 2 ** 63 - 1


class ReducibilityError(RuntimeError):
    """Power iteration failed to converge; the chain looks reducible."""


@dataclass(frozen=True)
class TransitionMatrix:
    """Dense row-stochastic matrix over profiles with envelope constants.

    ``p_min``/``p_max`` are computed over off-diagonal single-deviation
    transitions: every such entry lies in [p_min/N, p_max/N]. The diagonal
    (the aggregated self-loop mass of all players) satisfies the lower
    bound automatically and is excluded from the envelope.
    """

    probs: np.ndarray
    num_players: int
    num_actions: int
    p_min: float
    p_max: float
    rule: str = ""

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    def __post_init__(self):
        p = self.probs
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValidationError("transition matrix must be square")
        if p.min() < 0:
            raise ValidationError("negative transition probability")
        if np.abs(p.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValidationError("rows must sum to 1 within 1e-12")


def _as_probs(P) -> np.ndarray:
    return P.probs if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)


def validate_distribution(d, size: int | None = None, tol: float = 1e-12) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if size is not None and d.shape != (size,):
        raise ValidationError(f"distribution length {d.shape} != {size}")
    if d.min() < -tol or abs(d.sum() - 1.0) > tol:
        raise ValidationError("not a probability vector")
    return d


def _neighbor_targets(num_actions: int, player: int, idx: np.ndarray) -> np.ndarray:
    """Flat indices of all profiles reachable by changing one player's action."""
    stride = num_actions ** player
    digit = (idx // stride) % num_actions
    base = idx - digit * stride
    return base[:, None] + np.arange(num_actions)[None, :] * stride


def build_transition(game: PotentialGame, config: DynamicsConfig,
                     max_states: int = DEFAULT_STATE_CAP,
                     noise_table: np.ndarray | None = None) -> TransitionMatrix:
    """Exact transition matrix of the configured single-step rule.

    The per-player stay probabilities are aggregated into the diagonal.
    For NOISY_LOG_LINEAR a noise table is drawn from config.seed unless one
    is supplied, matching what ``run_trajectory`` would use.
    """
    n, a = game.num_players, game.num_actions
    size = game.num_profiles
    if size > max_states:
        raise ValidationError(f"state space {size} exceeds cap {max_states}")
    if config.rule is Rule.MODIFIED_SYMMETRIC:
        raise ValidationError(
            "modified symmetric dynamics is continuous-time; build the "
            "occupancy oracle from gibbs_occupancy instead")

    util_flat = np.array([game.utility_flat(i) for i in range(n)])
    if config.rule is Rule.NOISY_LOG_LINEAR:
        if noise_table is None:
            noise_table = dyn.sample_noise_table(
                game, config.xi, dyn.make_rng(config.seed))
        util_flat = util_flat + np.array(
            [noise_table[i].reshape(-1, order="F") for i in range(n)])

    P = np.zeros((size, size))
    idx = np.arange(size)
    for i in range(n):
        targets = _neighbor_targets(a, i, idx)
        u = util_flat[i][targets]                       # (size, A)
        if config.rule is Rule.BINARY_LOG_LINEAR:
            cur = util_flat[i][idx][:, None]
            with np.errstate(over="ignore"):
                w = 1.0 / (1.0 + np.exp(config.beta * (cur - u))) / a
            # Trial action b != current switches with two-point softmax mass;
            # the current action keeps the complement plus the trial==current case.
            digit = (idx // a ** i) % a
            w[np.arange(size), digit] = (1.0 + _binary_stay_mass(
                config.beta, util_flat[i], targets, idx, digit)) / a
        else:
            z = config.beta * u
            z = z - z.max(axis=1, keepdims=True)
            w = np.exp(z)
            w = w / w.sum(axis=1, keepdims=True)
            if config.rule is Rule.FIXED_SHARE:
                w = config.xi / a + (1.0 - config.xi) * w
        P[idx[:, None], targets] += w / n

    offdiag = _offdiagonal_neighbor_entries(P, n, a)
    return TransitionMatrix(P, n, a, float(n * offdiag.min()),
                            float(n * offdiag.max()), config.rule.value)


def _binary_stay_mass(beta, uflat, targets, idx, digit):
    """Sum over non-trial-equal actions of the keep-current probability."""
    u = uflat[targets]
    cur = uflat[idx][:, None]
    with np.errstate(over="ignore"):
        keep = 1.0 / (1.0 + np.exp(beta * (u - cur)))
    keep[np.arange(len(idx)), digit] = 0.0
    return keep.sum(axis=1)


def _offdiagonal_neighbor_entries(P: np.ndarray, n: int, a: int) -> np.ndarray:
    size = P.shape[0]
    idx = np.arange(size)
    vals = []
    for i in range(n):
        targets = _neighbor_targets(a, i, idx)
        entries = P[idx[:, None], targets]
        mask = targets != idx[:, None]
        vals.append(entries[mask])
    return np.concatenate(vals)


def gibbs_stationary(game: PotentialGame, beta: float) -> np.ndarray:
    """softmax(beta * potential) over profiles, log-sum-exp stabilized."""
    z = beta * game.potential_flat()
    z = z - z.max()
    w = np.exp(z)
    return w / w.sum()


def gibbs_occupancy(game: PotentialGame, beta: float):
    """Gibbs law on occupancy states of a symmetric game.

    Returns (states, probs) where states is the lexicographic occupancy
    enumeration and probs the softmax of beta times the reduced potential.
    """
    from .game_core import enumerate_occupancy_space

    states = enumerate_occupancy_space(game.num_players, game.num_actions)
    values = np.empty(len(states))
    for k, occ in enumerate(states):
        profile = []
        for action, count in enumerate(occ.counts):
            profile.extend([action] * count)
        values[k] = game.potential_of(tuple(profile))
    z = beta * values
    z = z - z.max()
    w = np.exp(z)
    return states, w / w.sum()


def stationary_of(P, tol: float = 1e-13, max_doublings: int = 96) -> np.ndarray:
    """Left fixed point of an ergodic chain, independent of the start.

    Power iteration accelerated by repeated squaring: after k squarings the
    uniform start has evolved 2**k steps, so even slowly mixing desk-scale
    chains converge in a few dozen matrix products. Rows are renormalized
    after every squaring to cancel round-off drift.
    """
    P = _as_probs(P)
    Q = P.copy()
    mu = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_doublings):
        v = mu @ Q
        v /= v.sum()
        if np.abs(v @ P - v).sum() <= tol:
            return v
        Q = Q @ Q
        Q /= Q.sum(axis=1, keepdims=True)
    raise ReducibilityError(
        f"no stationary fixed point to residual {tol} after "
        f"{max_doublings} doublings; chain may be reducible or periodic")


def check_detailed_balance(P, mu, tol: float = 1e-12):
    """Max violation of mu(a) P(a,b) == mu(b) P(b,a) over all pairs."""
    P = _as_probs(P)
    mu = validate_distribution(mu, P.shape[0])
    flow = mu[:, None] * P
    violation = float(np.abs(flow - flow.T).max())
    return violation <= tol, violation


def time_reversal(P, mu) -> np.ndarray:
    """Adjoint chain P*(a,b) = mu(b) P(b,a) / mu(a)."""
    P = _as_probs(P)
    mu = validate_distribution(mu, P.shape[0])
    if mu.min() <= 0.0:
        raise ValidationError("time reversal needs strictly positive mu")
    return (P.T * mu[None, :]) / mu[:, None]


def multiplicative_reversibilization(P, mu) -> np.ndarray:
    """P P*, the reversible chain the log-Sobolev machinery works on."""
    P = _as_probs(P)
    return P @ time_reversal(P, mu)


def tv_distance(d1, d2) -> float:
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if d1.shape != d2.shape:
        raise ValidationError("length mismatch")
    return 0.5 * float(np.abs(d1 - d2).sum())


def distribution_at_time(P, mu0, t: int, return_drift: bool = False):
    """mu0 P^t by binary exponentiation; t may be as large as 2**63 - 1.

    Squared powers are renormalized row-wise, bounding drift by
    size * machine-epsilon per squaring; the accumulated bound is returned
    when ``return_drift`` is set.
    """
    P = _as_probs(P)
    if not 0 <= t <= MAX_TIME:
        raise ValidationError(f"t must lie in [0, 2**63 - 1], got {t}")
    v = validate_distribution(mu0, P.shape[0]).copy()
    base = P
    squarings = 0
    t = int(t)
    while t:
        if t & 1:
            v = v @ base
            v /= v.sum()
        t >>= 1
        if t:
            base = base @ base
            base /= base.sum(axis=1, keepdims=True)
            squarings += 1
    drift = squarings * P.shape[0] * np.finfo(float).eps
    return (v, drift) if return_drift else v


def empirical_mixing_time(P, mu0, eps: float, t_cap: int = MAX_TIME) -> int:
    """Smallest t with TV(mu0 P^t, stationary) <= eps, by doubling + bisection.

    Valid because total-variation distance to stationarity is non-increasing
    in t (every stochastic map contracts TV).
    """
    P = _as_probs(P)
    mu = stationary_of(P)
    mu0 = validate_distribution(mu0, P.shape[0])
    if tv_distance(mu0, mu) <= eps:
        return 0
    t = 1
    while tv_distance(distribution_at_time(P, mu0, t), mu) > eps:
        if t >= t_cap:
            raise ReducibilityError(f"mixing time exceeds cap {t_cap}")
        t = min(2 * t, t_cap)
    lo, hi = t // 2, t
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tv_distance(distribution_at_time(P, mu0, mid), mu) <= eps:
            hi = mid
        else:
            lo = mid
    return hi


def _symmetrize(P: np.ndarray, mu: np.ndarray) -> np.ndarray:
    d = np.sqrt(mu)
    return (d[:, None] * P) / d[None, :]


def spectral_gap(P, mu=None, tol: float = 1e-10) -> float:
    """Smallest nonzero eigenvalue of I - S, S the mu-symmetrization of P.

    Requires (P, mu) reversible; apply to P P* otherwise. ``mu`` defaults
    to the computed stationary distribution.
    """
    P = _as_probs(P)
    mu = stationary_of(P) if mu is None else validate_distribution(mu, P.shape[0])
    ok, violation = check_detailed_balance(P, mu, tol)
    if not ok:
        raise ValidationError(
            f"chain is not reversible (violation {violation:.3e}); apply "
            "spectral_gap to multiplicative_reversibilization(P, mu)")
    S = _symmetrize(P, mu)
    eigs = np.linalg.eigvalsh((S + S.T) / 2.0)
    return float(1.0 - eigs[-2])


def dirichlet_form(f: np.ndarray, P, mu) -> float:
    """E_P(f, f) = <f, (I-P) f>_mu."""
    P = _as_probs(P)
    return float(mu @ (f * (f - P @ f)))


def entropy_like(f: np.ndarray, mu) -> float:
    """L(f^2) with the f-norm taken under mu."""
    f2 = f * f
    norm2 = float(mu @ f2)
    if norm2 <= 0.0:
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(f2 > 0.0, f2 * np.log(f2 / norm2), 0.0)
    return float(mu @ terms)


@dataclass(frozen=True)
class SobolevEstimate:
    """Best Rayleigh-type quotient found; an upper bound on the true rho."""

    value: float
    restarts: int
    converged: bool


def estimate_log_sobolev(P, mu, restarts: int = 64, max_iter: int = 400,
                         seed: int = 0, rel_tol: float = 1e-10) -> SobolevEstimate:
    """Multi-start projected gradient descent on E(f,f) / L(f^2).

    Minimizes over f with ||f||_{2,mu} = 1, all restarts advancing in one
    batch. Every iterate is replaced by its absolute value (never increases
    the quotient) and the mu-mean is projected out of rows whose L
    degenerates. The degeneracy floor is 1e-10 rather than machine level:
    L is a cancelling sum near constant f, so quotients below the floor
    carry relative noise ~eps/L and cannot be trusted. Only quotients from
    the trusted region are accepted or reported, so the returned minimum is
    a certified upper bound on the true log-Sobolev constant.
    """
    P = _as_probs(P)
    mu = validate_distribution(mu, P.shape[0])
    n = P.shape[0]
    l_floor = 1e-10
    M = mu[:, None] * (np.eye(n) - P)
    M = (M + M.T) / 2.0
    rng = np.random.default_rng(seed)

    def normalize(F):
        return F / np.sqrt((F ** 2) @ mu)[:, None]

    def quotients(F):
        e = np.einsum("ri,ri->r", F @ M, F)
        f2 = F * F
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(f2 > 0.0, f2 * np.log(f2), 0.0)
        l = terms @ mu
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(l > l_floor, e / np.maximum(l, 1e-300), np.inf)
        return q, e, l

    F = normalize(np.abs(rng.standard_normal((restarts, n))) + 0.1)
    q, e, l = quotients(F)
    best = float(q[np.isfinite(q)].min()) if np.isfinite(q).any() else np.inf
    stalled = ~np.isfinite(q)
    for _ in range(max_iter):
        degenerate = l <= l_floor
        if degenerate.any():
            # Constant-f rows: knock out the mu-mean and retry once.
            G = F[degenerate] - (F[degenerate] @ mu)[:, None]
            norms = np.sqrt((G ** 2) @ mu)
            fixable = norms > 1e-12
            rows = np.nonzero(degenerate)[0][fixable]
            if rows.size:
                F[rows] = normalize(np.abs(G[fixable]) + 1e-12)
            dead = np.nonzero(degenerate)[0][~fixable]
            stalled[dead] = True
            q, e, l = quotients(F)
        work = ~stalled & np.isfinite(q)
        if not work.any():
            break
        grad = (l[:, None] * (2.0 * F @ M)
                - e[:, None] * (2.0 * mu[None, :] * F * _safe_log_sq(F)))
        grad /= np.maximum(l, 1e-300)[:, None] ** 2
        G = grad / mu[None, :]
        G -= np.einsum("ri,ri,i->r", G, F, mu)[:, None] * F
        step = np.where(work, 1.0, 0.0)
        improved = np.zeros(restarts, dtype=bool)
        for _ in range(50):
            trying = work & ~improved & (step > 1e-12)
            if not trying.any():
                break
            cand = normalize(np.abs(F[trying] - step[trying, None] * G[trying]))
            q2, e2, l2 = quotients(cand)
            better = q2 < q[trying]
            rows = np.nonzero(trying)[0]
            good = rows[better]
            rel = (q[good] - q2[better]) / np.maximum(q[good], 1e-300)
            F[good] = cand[better]
            q[good], e[good], l[good] = q2[better], e2[better], l2[better]
            improved[good] = True
            stalled[good[rel < rel_tol]] = True
            step[rows[~better]] /= 2.0
            if good.size:
                best = min(best, float(q[good].min()))
        stalled |= work & ~improved
        if stalled.all():
            break
    return SobolevEstimate(float(best), restarts, bool(np.isfinite(best)))


def _safe_log_sq(f: np.ndarray) -> np.ndarray:
    f2 = f * f
    with np.errstate(divide="ignore"):
        out = np.where(f2 > 0.0, np.log(np.maximum(f2, 1e-300)), 0.0)
    return out


def cycle_random_walk(k: int) -> np.ndarray:
    """Simple +/-1 random walk on the k-cycle (uniform stationary law)."""
    if k < 2:
        raise ValidationError("cycle needs k >= 2")
    P = np.zeros((k, k))
    for j in range(k):
        P[j, (j + 1) % k] += 0.5
        P[j, (j - 1) % k] += 0.5
    return P


def occupancy_trajectory_frequencies(traj, num_actions: int):
    """Time-weighted occupancy frequencies of a continuous-time trajectory.

    Dwell time in the state *before* each event is the inter-event gap;
    the final state contributes nothing (its dwell is unobserved).
    Returns a dict mapping occupancy counts tuple -> fraction of time.
    """
    if traj.event_times is None:
        raise ValidationError("trajectory has no event times")
    gaps = np.diff(traj.event_times)
    total = gaps.sum()
    freq: dict[tuple, float] = {}
    n = traj.profiles.shape[1]
    for k, gap in enumerate(gaps):
        occ = occupancy_of(traj.profiles[k], n, num_actions).counts
        freq[occ] = freq.get(occ, 0.0) + gap
    return {k: v / total for k, v in freq.items()}


# --- dumps ------------------------------------------------------------------

BINARY_MAGIC = b"PPMC1"


def write_matrix_csv(array, path) -> None:
    arr = np.atleast_2d(np.asarray(array, dtype=float))
    with open(path, "w") as fh:
        for row in arr:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_matrix_binary(array, path) -> None:
    """Compact dump: magic 'PPMC1', two little-endian uint64 dims, then
    row-major little-endian float64 payload."""
    arr = np.atleast_2d(np.asarray(array, dtype=float))
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<QQ", arr.shape[0], arr.shape[1]))
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_matrix_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(BINARY_MAGIC))
        if magic != BINARY_MAGIC:
            raise ValidationError(f"bad magic {magic!r}")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    return data.reshape(rows, cols).astype(float)
