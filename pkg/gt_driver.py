#!/usr/bin/env python3
"""
rs-DZGT: decentralized zeroth-order gradient tracking for SMPECs

One outer round, for all agents at once,
    X <- W X - gamma Y
    g_i <- zeroth-order gradient of agent i at its new x_i (two inexact lower solves)
    Y <- W Y + G_new - G_prev
The round is synchronous: every agent reads the previous (X, Y) snapshot.

Randomness is split into independent substreams keyed by (role, agent,
epoch), so one agent's draws never depend on another agent's. The initial
points and the objective evaluation draw from a separate common seed, which
a sweep shares between runs of the same repeat: every agent count then starts
from the same mean iterate and is scored on the same noise.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from errors import InvalidInstance, InvariantViolation, NonFiniteIterate, RangeError
from lower_solver import InnerConfig, solve_inner
from network import MixingMatrix, second_eigenvalue
from smoothing import sample_sphere, zo_estimate
from theory_constants import beta_upper_bound, theory_constants

logger = logging.getLogger(__name__)

STREAM_ROLES = {
    "init": 0,
    "xi": 1,
    "sphere": 2,
    "zeta_x": 3,
    "zeta_xv": 4,
    "eval": 5,
    "centre": 6,
}

# roles drawn from the common seed
COMMON_ROLES = ("init", "eval", "centre")

GAMMA_RULES = ("fixed", "theory")


@dataclass(frozen=True)
class SeedStreams:
    """Generator factory for the (role, agent, epoch) substreams of one run"""

    seed: int
    common_seed: Optional[int] = None

    def rng(self, role, agent=0, epoch=0):
        key = (STREAM_ROLES[role], int(agent), int(epoch))
        root = self.seed
        if role in COMMON_ROLES and self.common_seed is not None:
            root = self.common_seed
        return np.random.default_rng(np.random.SeedSequence(root, spawn_key=key))


@dataclass(frozen=True)
class RunConfig:
    """
    Settings of a single rs-DZGT run

    gamma_rule "theory" replaces gamma by C0 / sqrt(K) at the start of run();
    beta=None then picks the midpoint of its admissible interval. eval_every <= 0
    turns objective evaluation off; K = 0 records the initial epoch only.
    common_seed=None draws the initial points and evaluation noise from seed.
    """

    gamma: float = 1e-5
    eta: float = 0.1
    K: int = 100
    inner: Optional[InnerConfig] = None
    topology: str = "complete"
    seed: int = 0
    common_seed: Optional[int] = None
    num_repeats: int = 5
    eval_samples: int = 200
    eval_inner_budget: int = 2000
    eval_every: int = 1
    warm_start: bool = True
    init_std: float = 1.0
    check_invariants: bool = False
    invariant_tol: float = 1e-10
    gamma_rule: str = "fixed"
    beta: Optional[float] = None
    alpha: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise RangeError("gamma", self.gamma, "must be positive")
        if not self.eta > 0:
            raise RangeError("eta", self.eta, "must be positive")
        if self.K < 0:
            raise RangeError("K", self.K, "must be >= 0")
        if self.num_repeats < 1:
            raise RangeError("num_repeats", self.num_repeats, "must be >= 1")
        if self.eval_samples < 2:
            raise RangeError("eval_samples", self.eval_samples, "must be >= 2")
        if self.init_std < 0:
            raise RangeError("init_std", self.init_std, "must be nonnegative")
        if self.gamma_rule not in GAMMA_RULES:
            raise RangeError("gamma_rule", self.gamma_rule, f"must be one of {GAMMA_RULES}")

    def inner_for(self, instance):
        return self.inner if self.inner is not None else InnerConfig.default_for(instance)


@dataclass
class SwarmState:
    """Stacked agent iterates (row i belongs to agent i) after epoch k"""

    X: np.ndarray
    Y: np.ndarray
    G_prev: np.ndarray
    k: int = 0
    Z_x: Optional[np.ndarray] = field(default=None, repr=False)
    Z_xv: Optional[np.ndarray] = field(default=None, repr=False)
    inner_steps: int = 0
    eps_estimate: float = float("nan")

    @property
    def m(self):
        return self.X.shape[0]

    @property
    def x_bar(self):
        return self.X.mean(axis=0)


@dataclass
class TrajectoryRecord:
    """Per-epoch metrics of one run; objective entries are nan on skipped epochs"""

    gamma: float
    epochs: List[int] = field(default_factory=list)
    objective_mean: List[float] = field(default_factory=list)
    objective_se: List[float] = field(default_factory=list)
    consensus_violation: List[float] = field(default_factory=list)
    tracker_dispersion: List[float] = field(default_factory=list)
    inner_steps: List[int] = field(default_factory=list)
    stationarity: List[float] = field(default_factory=list)
    mean_iterates: List[np.ndarray] = field(default_factory=list, repr=False)
    final_state: Optional[SwarmState] = field(default=None, repr=False)

    def __len__(self):
        return len(self.epochs)

    def last_consensus_violation(self):
        return self.consensus_violation[-1]

    def last_objective(self):
        """Most recent evaluated objective (nan if evaluation was off)"""
        for value in reversed(self.objective_mean):
            if not np.isnan(value):
                return value
        return float("nan")

    def best_stationarity(self, upto=None):
        """Smallest recorded stationarity over epochs 0..upto (all epochs if None)"""
        values = np.asarray(self.stationarity if upto is None else self.stationarity[:upto + 1], dtype=float)
        return float(np.nanmin(values)) if np.any(~np.isnan(values)) else float("nan")

    def last_stationarity(self):
        return float(self.stationarity[-1]) if self.stationarity else float("nan")

    def rows(self):
        """(epoch, objective_mean, objective_se, consensus_violation, tracker_dispersion, inner_steps)"""
        return list(zip(self.epochs, self.objective_mean, self.objective_se,
                        self.consensus_violation, self.tracker_dispersion, self.inner_steps))


# ===== METRICS AND IDENTITIES =====

def _matrix(state_or_matrix, attribute):
    return np.asarray(getattr(state_or_matrix, attribute, state_or_matrix), dtype=float)


def consensus_violation(state):
    """||X - 1 x_bar||_F^2"""
    X = _matrix(state, "X")
    return float(np.sum((X - X.mean(axis=0)) ** 2))


def tracker_dispersion(state):
    """||Y - 1 y_bar||_F^2"""
    Y = _matrix(state, "Y")
    return float(np.sum((Y - Y.mean(axis=0)) ** 2))


def tracking_residual(state):
    """||mean(Y) - mean(G)||, zero in exact arithmetic"""
    return float(np.linalg.norm(state.Y.mean(axis=0) - state.G_prev.mean(axis=0)))


def mean_update_residual(previous, current, gamma):
    """||x_bar_{k+1} - x_bar_k + gamma mean(Y_k)||"""
    return float(np.linalg.norm(current.X.mean(axis=0) - previous.X.mean(axis=0)
                                + gamma * previous.Y.mean(axis=0)))


def centering_residual(matrix):
    """||1^T (M - 1 mean(M))||"""
    M = np.asarray(matrix, dtype=float)
    return float(np.linalg.norm(np.sum(M - M.mean(axis=0), axis=0)))


def check_identities(previous, current, gamma, tol):
    """Raise InvariantViolation when a gradient-tracking identity breaks"""
    scale_y = 1.0 + np.linalg.norm(current.Y)
    if tracking_residual(current) > tol * scale_y:
        raise InvariantViolation(f"tracking identity broken at k={current.k}: {tracking_residual(current):.3e}")
    if centering_residual(current.Y) > tol * scale_y:
        raise InvariantViolation(f"centering identity broken at k={current.k}")
    if previous is not None:
        scale_x = 1.0 + np.linalg.norm(previous.X) + gamma * np.linalg.norm(previous.Y)
        if mean_update_residual(previous, current, gamma) > tol * scale_x:
            raise InvariantViolation(f"mean-update identity broken at k={current.k}")


# ===== LOCAL ORACLE =====

def local_zo_gradient(instance, i, x_i, epoch, cfg, inner_cfg, streams, z_x0, z_xv0):
    """
    Agent i's inexact zeroth-order gradient at x_i for the given epoch

    Both function values share one xi draw; each inner solve has its own
    zeta stream and budget inner_cfg.budget_rule(epoch).

    Returns:
        (ZoGradient, InnerSolveResult at x_i, InnerSolveResult at x_i + v)
    """
    xi = instance.noise_xi.draw(streams.rng("xi", i, epoch))
    sample = sample_sphere(instance.n, cfg.eta, streams.rng("sphere", i, epoch))
    at_x = solve_inner(instance, x_i, epoch, inner_cfg, z_x0, streams.rng("zeta_x", i, epoch))
    shifted = x_i + sample.v
    at_xv = solve_inner(instance, shifted, epoch, inner_cfg, z_xv0, streams.rng("zeta_xv", i, epoch))
    h_x = instance.objective(i, x_i, at_x.z, xi)
    h_xv = instance.objective(i, shifted, at_xv.z, xi)
    grad = zo_estimate(h_x, h_xv, sample, instance.n, exact=False,
                       inner_accuracy=max(at_x.epsilon_estimate, at_xv.epsilon_estimate))
    return grad, at_x, at_xv


def _gradients(instance, X, epoch, cfg, inner_cfg, streams, Z_x, Z_xv):
    m, p = X.shape[0], instance.p
    G = np.empty_like(X)
    new_x = np.empty((m, p))
    new_xv = np.empty((m, p))
    steps = 0
    accuracy = []
    for i in range(m):
        grad, at_x, at_xv = local_zo_gradient(instance, i, X[i], epoch, cfg, inner_cfg, streams, Z_x[i], Z_xv[i])
        G[i] = grad.g
        new_x[i] = at_x.z
        new_xv[i] = at_xv.z
        steps += at_x.iterations_used + at_xv.iterations_used
        accuracy.append(grad.inner_accuracy)
    if not np.all(np.isfinite(G)):
        raise NonFiniteIterate(f"zeroth-order gradients are not finite at epoch {epoch}")
    eps = float(np.nanmean(accuracy)) if np.any(~np.isnan(accuracy)) else float("nan")
    return G, new_x, new_xv, steps, eps


def _weights(W):
    matrix = W.W if isinstance(W, MixingMatrix) else np.asarray(W, dtype=float)
    return matrix


# ===== DRIVER =====

def initial_points(m, n, init_std, streams):
    """
    x_{i,0} = c + init_std (u_i - mean_j u_j) with c ~ N(0, init_std^2 I)

    c and the u_i come from the common streams, so the mean iterate is c for
    every m and agent i's offset draw is shared by all graphs on m agents.
    m = 1 starts at c.
    """
    centre = init_std * streams.rng("centre").standard_normal(n)
    draws = np.stack([streams.rng("init", i, 0).standard_normal(n) for i in range(m)])
    return centre + init_std * (draws - draws.mean(axis=0))


def init_swarm(instance, W, cfg, streams):
    """
    Random initial iterates around a common centre and y_0 = g_0 (budget t_0 = 1)

    Args:
        instance (SmpecInstance): problem
        W (MixingMatrix or array): mixing weights, m x m
        cfg (RunConfig): run settings
        streams (SeedStreams): randomness of this run

    Returns:
        SwarmState at k = 0
    """
    weights = _weights(W)
    if weights.shape != (instance.m, instance.m):
        raise InvalidInstance(f"mixing matrix is {weights.shape}, instance has m={instance.m}")
    X = initial_points(instance.m, instance.n, cfg.init_std, streams)
    zeros = np.zeros((instance.m, instance.p))
    G, Z_x, Z_xv, steps, eps = _gradients(instance, X, 0, cfg, cfg.inner_for(instance), streams, zeros, zeros)
    state = SwarmState(X=X, Y=G.copy(), G_prev=G, k=0, Z_x=Z_x, Z_xv=Z_xv, inner_steps=steps, eps_estimate=eps)
    if cfg.check_invariants:
        check_identities(None, state, cfg.gamma, cfg.invariant_tol)
    return state


def step(state, instance, W, cfg, streams):
    """One synchronous round k -> k + 1 (inner budget ceil(sqrt(k + 2)))"""
    weights = _weights(W)
    epoch = state.k + 1
    X = weights @ state.X - cfg.gamma * state.Y
    if not np.all(np.isfinite(X)):
        raise NonFiniteIterate(f"upper-level iterates diverged at epoch {epoch} (gamma={cfg.gamma})")
    if cfg.warm_start:
        z_x0, z_xv0 = state.Z_x, state.Z_xv
    else:
        z_x0 = z_xv0 = np.zeros((instance.m, instance.p))
    G, Z_x, Z_xv, steps, eps = _gradients(instance, X, epoch, cfg, cfg.inner_for(instance), streams, z_x0, z_xv0)
    Y = weights @ state.Y + G - state.G_prev
    new_state = SwarmState(X=X, Y=Y, G_prev=G, k=epoch, Z_x=Z_x, Z_xv=Z_xv,
                           inner_steps=state.inner_steps + steps, eps_estimate=eps)
    if cfg.check_invariants:
        check_identities(state, new_state, cfg.gamma, cfg.invariant_tol)
    return new_state


def estimate_objective(instance, x, cfg, streams, z0=None, inner_cfg=None):
    """
    Sample-mean implicit objective (1/m) sum_i E[h_i(x, z(x), xi)] at a frozen x

    z(x) comes from a long inner solve (cfg.eval_inner_budget steps) on the
    eval stream; the same stream is reused each call, so evaluations at
    different epochs share their noise.

    Returns:
        (mean, standard_error, z)
    """
    rng = streams.rng("eval")
    inner_cfg = inner_cfg or cfg.inner_for(instance)
    start = np.zeros(instance.p) if z0 is None else z0
    solved = solve_inner(instance, x, 0, replace(inner_cfg, diagnostics=False), start, rng,
                         budget=cfg.eval_inner_budget)
    xis = instance.noise_xi.draw(rng, cfg.eval_samples)
    values = np.mean([np.broadcast_to(objective(x, solved.z, xis), xis.shape[:1])
                      for objective in instance.local_objectives], axis=0)
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size)), solved.z


def smoothed_stationarity(instance, x, eta):
    """||(1/m) sum_i grad f_i^eta(x)||^2 when the instance carries closed forms, else nan"""
    reference = instance.reference
    if reference is None or not hasattr(reference, "average_smoothed_gradient"):
        return float("nan")
    gradient = reference.average_smoothed_gradient(x, eta)
    return float(gradient @ gradient)


def theory_stepsize(instance, W, cfg, eps0):
    """gamma = C0 / sqrt(K) with the instance constants and the network's rho"""
    rho = W.rho if isinstance(W, MixingMatrix) else second_eigenvalue(_weights(W))
    beta = cfg.beta if cfg.beta is not None else 0.5 * beta_upper_bound(rho)
    eps0 = 0.0 if np.isnan(eps0) else eps0
    constants = theory_constants(instance.L0, instance.L0_tilde, instance.n, instance.m, cfg.eta,
                                 rho, beta, cfg.alpha, eps0, K=max(cfg.K, 1))
    logger.debug("theory stepsize gamma=%.6g (C0=%.6g, K=%d)", constants.gamma, constants.C0, constants.K)
    return constants.gamma


def run(instance, W, cfg, progress=None):
    """
    init_swarm plus K rounds, recording metrics every epoch

    Args:
        instance (SmpecInstance): problem
        W (MixingMatrix or array): mixing weights
        cfg (RunConfig): run settings (cfg.seed seeds the gradient substreams,
            cfg.common_seed the initial points and evaluation)
        progress (callable): optional hook called with the epoch after each round

    Returns:
        TrajectoryRecord
    """
    streams = SeedStreams(cfg.seed, cfg.common_seed)
    state = init_swarm(instance, W, cfg, streams)
    if cfg.gamma_rule == "theory":
        cfg = replace(cfg, gamma=theory_stepsize(instance, W, cfg, state.eps_estimate), gamma_rule="fixed")

    record = TrajectoryRecord(gamma=cfg.gamma)
    eval_z = None

    def observe(current):
        nonlocal eval_z
        x_bar = current.x_bar
        evaluate = cfg.eval_every > 0 and (current.k % cfg.eval_every == 0 or current.k == cfg.K)
        if evaluate:
            mean, se, eval_z = estimate_objective(instance, x_bar, cfg, streams,
                                                  z0=eval_z if cfg.warm_start else None)
        else:
            mean, se = float("nan"), float("nan")
        record.epochs.append(current.k)
        record.objective_mean.append(mean)
        record.objective_se.append(se)
        record.consensus_violation.append(consensus_violation(current))
        record.tracker_dispersion.append(tracker_dispersion(current))
        record.inner_steps.append(current.inner_steps)
        record.stationarity.append(smoothed_stationarity(instance, x_bar, cfg.eta))
        record.mean_iterates.append(x_bar)

    observe(state)
    for _ in range(cfg.K):
        state = step(state, instance, W, cfg, streams)
        observe(state)
        if progress is not None:
            progress(state.k)
    record.final_state = state
    return record
