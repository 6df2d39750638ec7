"""EXP3 obtained from the drifting-game recipe with importance-weighted movements.

Randomness comes from numpy's PCG64 ``Generator`` seeded per run; actions are
drawn by inverse CDF over the weight vector (see ``hedge.sample_actions``),
one uniform per round, so a run is reproducible from its seed alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .hedge import CumulativeState, normalize_log, sample_actions, weights
from .potentials import Exp, PotentialContext


def auto_eta(T: int, N: int) -> float:
    """``min(1, sqrt(2 ln N / (T (1 + N sqrt e))))``."""
    return min(1.0, math.sqrt(2.0 * math.log(N) / (T * (1.0 + N * math.sqrt(math.e)))))


def exp3_regret_bound(T: int, N: int) -> float:
    """``sqrt(2 T (1 + N sqrt e) ln N)``, the bound at the auto learning rate."""
    return math.sqrt(2.0 * T * (1.0 + N * math.sqrt(math.e)) * math.log(N))


def exp3_alpha(eta: float) -> float:
    """Closed form ``e^eta eta^2 / (2 (e^eta - e^-eta))``."""
    return math.exp(eta) * eta ** 2 / (2.0 * (math.exp(eta) - math.exp(-eta)))


def exp3_growth(eta: float, N: int) -> float:
    """Per-round factor ``(e^eta + e^-eta + N e^eta eta^2) / 2`` of the EXP3 potential."""
    return (math.exp(eta) + math.exp(-eta) + N * math.exp(eta) * eta ** 2) / 2.0


def exp3_potential(eta: float, N: int, ctx: PotentialContext, s, R: float = 0.0):
    """``exp(-eta (s + R)) K^(T - t)`` with ``K = exp3_growth(eta, N)``."""
    s = np.asarray(s, dtype=float)
    log_k = math.log(exp3_growth(eta, N))
    out = np.exp((ctx.horizon - ctx.t) * log_k - eta * (s + R))
    return out if out.ndim else float(out)


def numeric_alpha(potential, s_grid, h: float = 0.05) -> float:
    """``1/2 max_s Phi''(s - 1) / (Phi(s - 1) - Phi(s + 1))`` by finite differences.

    ``potential`` is any callable ``s -> Phi(s)``.  The second derivative is a
    central difference Richardson-extrapolated from steps ``h`` and ``h/2``.
    """
    s = np.asarray(s_grid, dtype=float)

    def second(step):
        return (potential(s - 1 + step) - 2.0 * potential(s - 1) + potential(s - 1 - step)) / step ** 2

    curvature = (4.0 * second(h / 2) - second(h)) / 3.0
    gap = potential(s - 1) - potential(s + 1)
    ratio = np.where(gap > 0, curvature / np.where(gap > 0, gap, 1.0), np.inf)
    return 0.5 * float(np.max(ratio))


@dataclass
class BanditState:
    s_hat: np.ndarray
    round_t: int
    rng: np.random.Generator

    @classmethod
    def start(cls, n: int, seed) -> "BanditState":
        return cls(np.zeros(n), 0, np.random.default_rng(seed))


def estimate_movements(action: int, loss: float, p) -> np.ndarray:
    """``z_i = 1{i = i_t} loss / p_{i_t} - loss``."""
    p = np.asarray(p, dtype=float)
    if p[action] <= 0:
        raise RuntimeError(f"action {action} was drawn with zero probability")
    z = np.full(p.shape, -float(loss))
    z[action] += loss / p[action]
    return z


def exp3_weights(state: BanditState, eta: float) -> np.ndarray:
    return weights(Exp(eta), CumulativeState(state.s_hat, state.round_t))


def bandit_step(state: BanditState, eta: float, hidden_loss, rule=None):
    """Draw an action, reveal only its loss, move the estimated chips.

    Returns ``(action, new_state)``; ``hidden_loss`` stays with the caller.
    """
    rule = Exp(eta) if rule is None else rule
    p = weights(rule, CumulativeState(state.s_hat, state.round_t))
    action = int(sample_actions(p, state.rng)[0])
    observed = float(np.asarray(hidden_loss)[action])
    z = estimate_movements(action, observed, p)
    return action, BanditState(state.s_hat + z, state.round_t + 1, state.rng)


@dataclass
class DGv2Report:
    mean: np.ndarray
    second_moment: np.ndarray
    mean_pz: float
    min_z: float
    problems: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


def dgv2_condition_check(p, hidden_losses, tol: float = 1e-12) -> DGv2Report:
    """Moments of the estimated movements by enumerating every ``i_t``."""
    p = np.asarray(p, dtype=float)
    loss = np.asarray(hidden_losses, dtype=float)
    N = p.size
    # row k: movements when action k is drawn
    Z = -np.broadcast_to(loss[:, None], (N, N)).copy()
    Z[np.arange(N), np.arange(N)] += loss / p
    mean = p @ Z
    second = p @ Z ** 2
    mean_pz = float(p @ (Z @ p))
    problems = []
    if np.any(mean > 1 + tol):
        problems.append("E[z_i] > 1")
    if np.any(second > (1.0 / p) * (1 + tol)):
        problems.append("E[z_i^2] > 1/p_i")
    if abs(mean_pz) > tol:
        problems.append(f"E[p.z] = {mean_pz:.3g}")
    if Z.min() < -1 - tol:
        problems.append("some z_i < -1")
    return DGv2Report(mean, second, mean_pz, float(Z.min()), problems)


@dataclass
class BanditRun:
    actions: np.ndarray
    weights: np.ndarray
    losses: np.ndarray
    positions: np.ndarray

    @property
    def incurred(self) -> float:
        return float(self.losses[np.arange(len(self.actions)), self.actions].sum())

    @property
    def regret(self) -> float:
        return self.incurred - float(self.losses.sum(axis=0).min())

    @property
    def zero_count(self) -> np.ndarray:
        return np.sum(self.weights == 0, axis=1)


def _check_rule(rule, experimental: bool):
    if rule is not None and not isinstance(rule, Exp) and not experimental:
        raise ValueError("non-exponential potentials carry no bandit guarantee; pass experimental=True")


def run_bandit(eta: float, losses, seed, rule=None, experimental: bool = False) -> BanditRun:
    """One bandit run on an oblivious ``T x N`` stream, or an adaptive
    ``adversary(t, p, history)`` callable when ``losses`` is callable (then
    pass ``T`` and ``N`` through ``losses.T`` and ``losses.N``)."""
    _check_rule(rule, experimental)
    rule = Exp(eta) if rule is None else rule
    if callable(losses):
        T, N = losses.T, losses.N
    else:
        losses = np.asarray(losses, dtype=float)
        T, N = losses.shape
    state = BanditState.start(N, seed)
    actions = np.empty(T, dtype=np.int64)
    P = np.empty((T, N))
    L = np.empty((T, N))
    positions = [state.s_hat.copy()]
    history = []
    for t in range(T):
        P[t] = weights(rule, CumulativeState(state.s_hat, state.round_t))
        L[t] = losses(t + 1, P[t], history) if callable(losses) else losses[t]
        history.append(L[t])
        actions[t], state = bandit_step(state, eta, L[t], rule)
        positions.append(state.s_hat.copy())
    return BanditRun(actions, P, L, np.array(positions))


@dataclass
class BanditBatch:
    regret: np.ndarray
    incurred: np.ndarray
    potential_sum: Optional[np.ndarray] = None
    actions: Optional[np.ndarray] = None


def run_bandit_batch(eta: float, losses, seeds, track_potential: bool = False,
                     record_actions: bool = False, chunk: int = 4096) -> BanditBatch:
    """EXP3 on one oblivious ``T x N`` stream for many seeds at once.

    Seed ``k`` owns its generator and consumes one uniform per round, so each
    row reproduces ``run_bandit(eta, losses, seeds[k])`` exactly.  With
    ``track_potential`` the EXP3 potential sum is recorded for ``t = 0..T``.
    """
    losses = np.asarray(losses, dtype=float)
    T, N = losses.shape
    seeds = list(seeds)
    S = len(seeds)
    rngs = [np.random.default_rng(sd) for sd in seeds]
    s_hat = np.zeros((S, N))
    incurred = np.zeros(S)
    rows = np.arange(S)
    pot = np.empty((S, T + 1)) if track_potential else None
    acts = np.empty((S, T), dtype=np.int64) if record_actions else None
    if track_potential:
        pot[:, 0] = N * exp3_potential(eta, N, PotentialContext(T, 0), 0.0)
        log_k = math.log(exp3_growth(eta, N))
    for start in range(0, T, chunk):
        stop = min(T, start + chunk)
        u = 1.0 - np.stack([g.random(stop - start) for g in rngs])
        for t in range(start, stop):
            p = normalize_log(-eta * s_hat)
            cdf = np.cumsum(p, axis=-1)
            a = np.minimum(np.sum(cdf < u[:, t - start, None] * cdf[:, -1:], axis=-1), N - 1)
            observed = losses[t, a]
            incurred += observed
            # same rounding order as estimate_movements: z = -loss, then z_a += loss / p_a
            z = np.repeat(-observed[:, None], N, axis=1)
            z[rows, a] += observed / p[rows, a]
            s_hat += z
            if acts is not None:
                acts[:, t] = a
            if pot is not None:
                pot[:, t + 1] = np.exp((T - t - 1) * log_k - eta * s_hat).sum(axis=1)
    return BanditBatch(incurred - losses.sum(axis=0).min(), incurred, pot, acts)
