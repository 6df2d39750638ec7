"""Potential-based Hedge: weight rules, state updates and epsilon-regret.

Chip positions follow the drifting-game convention: ``s_i`` accumulates
``loss_i - p . loss``, so an action that has done *better* than the player
sits at a *negative* position and receives weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import optimize, special

from .potentials import (
    BoostByMajority,
    Exp,
    NormalHedgeDT,
    PotentialContext,
    PotentialFamily,
    TwoNorm,
    eval_potential,
    neg_part,
)


@dataclass(frozen=True)
class NormalHedge:
    """Original NormalHedge: ``p_i ∝ -[s_i]_- exp([s_i]_-^2 / c)`` with ``c``
    found numerically every round.  Not derived from a potential here."""


Rule = Union[Exp, TwoNorm, NormalHedgeDT, NormalHedge]

# signature: adversary(t, p, history) -> loss vector; t is 1-based
Adversary = Callable[[int, np.ndarray, Sequence[np.ndarray]], np.ndarray]


class NoSolution(ValueError):
    """Raised when ``sum_i exp([s_i]_-^2 / c) = N e`` has no root."""


@dataclass
class CumulativeState:
    s: np.ndarray
    round_t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "CumulativeState":
        return cls(np.zeros(n), 0)

    @property
    def n(self) -> int:
        return self.s.shape[-1]


def check_distribution(p, atol: float = 1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(~np.isfinite(p)):
        raise ValueError("weights must be finite and nonnegative")
    if not np.allclose(p.sum(axis=-1), 1.0, rtol=0, atol=atol):
        raise ValueError(f"weights sum to {p.sum(axis=-1)}, not 1")
    return p


def normalize_log(log_w: np.ndarray) -> np.ndarray:
    """Normalize log-weights along the last axis; ``-inf`` entries get exactly 0.

    Rows where every entry is ``-inf`` fall back to uniform.
    """
    log_w = np.asarray(log_w, dtype=float)
    top = np.max(log_w, axis=-1, keepdims=True)
    dead = ~np.isfinite(top)
    w = np.exp(log_w - np.where(dead, 0.0, top))
    w = np.where(dead, 1.0, w)
    return w / w.sum(axis=-1, keepdims=True)


def solve_c(s, rtol: float = 1e-10) -> float:
    """Root ``c`` of ``sum_i exp([s_i]_-^2 / c) = N e``.

    The left side decreases strictly in ``c`` whenever some ``s_i < 0``, so the
    root is bracketed by doubling and then refined with Brent's method.
    """
    s = np.asarray(s, dtype=float)
    q = neg_part(s) ** 2
    if not np.any(q > 0):
        raise NoSolution("all positions are nonnegative")
    target = math.log(s.size) + 1.0

    def gap(log_c):
        return special.logsumexp(q / math.exp(log_c)) - target

    hi = math.log(q.max())
    while gap(hi) > 0:
        hi += 1.0
    lo = hi - 1.0
    while gap(lo) < 0:
        lo -= 1.0
    log_c = optimize.brentq(gap, lo, hi, xtol=rtol / 4, rtol=4 * np.finfo(float).eps)
    return math.exp(log_c)


def log_weights(rule: Rule, state: CumulativeState) -> np.ndarray:
    """Unnormalized log-weights for the round after ``state``; ``-inf`` = zero."""
    s = np.asarray(state.s, dtype=float)
    t = state.round_t + 1
    if isinstance(rule, Exp):
        return -rule.eta * s
    if isinstance(rule, TwoNorm):
        w = neg_part(s - 1.0) ** 2 - neg_part(s + 1.0) ** 2
        with np.errstate(divide="ignore"):
            return np.log(w)
    if isinstance(rule, NormalHedgeDT):
        hi = neg_part(s - 1.0) ** 2 / (rule.d * t)
        lo = neg_part(s + 1.0) ** 2 / (rule.d * t)
        # e^hi - e^lo = e^hi (1 - e^(lo - hi)), exact zero when hi == lo
        with np.errstate(divide="ignore"):
            return hi + np.log(-np.expm1(lo - hi))
    if isinstance(rule, NormalHedge):
        if s.ndim != 1:
            raise ValueError("NormalHedge weights are computed one run at a time")
        if state.round_t == 0:
            return np.zeros_like(s)
        try:
            c = solve_c(s)
        except NoSolution:
            return np.zeros_like(s)
        neg = neg_part(s)
        with np.errstate(divide="ignore"):
            return np.log(-neg) + neg ** 2 / c
    if isinstance(rule, BoostByMajority):
        raise TypeError("boost-by-majority needs a horizon; use drift.BBMPlayer")
    raise TypeError(f"unknown rule {rule!r}")


def weights(rule: Rule, state: CumulativeState) -> np.ndarray:
    """Distribution ``p_t`` played after ``state`` (uniform if every weight vanishes)."""
    return normalize_log(log_weights(rule, state))


def potential_differences(family: PotentialFamily, state: CumulativeState, horizon: int) -> np.ndarray:
    """``Phi_t(s - 1) - Phi_t(s + 1)`` evaluated straight from the potential."""
    ctx = PotentialContext(horizon, state.round_t + 1)
    s = np.asarray(state.s, dtype=float)
    return np.asarray(eval_potential(family, ctx, s - 1)) - np.asarray(eval_potential(family, ctx, s + 1))


def _check_losses(loss) -> np.ndarray:
    loss = np.asarray(loss, dtype=float)
    if np.any(loss < 0) or np.any(loss > 1) or np.any(np.isnan(loss)):
        raise ValueError("losses must lie in [0, 1]")
    return loss


def hedge_step(state: CumulativeState, loss, p) -> CumulativeState:
    """Move each chip by ``loss_i - p . loss``."""
    loss = _check_losses(loss)
    p = np.asarray(p, dtype=float)
    if loss.shape != state.s.shape or p.shape != state.s.shape:
        raise ValueError("state, loss and weights must have the same shape")
    z = loss - np.sum(p * loss, axis=-1, keepdims=True)
    return CumulativeState(state.s + z, state.round_t + 1)


def randomized_hedge_step(state: CumulativeState, loss, sampled_action) -> CumulativeState:
    """Move each chip by ``loss_i - loss_{i_t}`` for the sampled action ``i_t``."""
    loss = _check_losses(loss)
    if loss.shape != state.s.shape:
        raise ValueError("state and loss must have the same shape")
    action = np.asarray(sampled_action)
    if np.any(action < 0) or np.any(action >= state.n):
        raise IndexError(f"action {sampled_action} out of range for N={state.n}")
    if loss.ndim == 1:
        chosen = loss[int(action)]
    else:
        chosen = np.take_along_axis(loss, action.reshape(-1, 1), axis=-1)
    return CumulativeState(state.s + (loss - chosen), state.round_t + 1)


def sample_actions(p, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draw from each row of ``p`` (one uniform per row).

    Uses ``u`` in ``(0, 1]`` and the first index whose running sum reaches
    ``u``, so zero-probability actions are never chosen.
    """
    p = np.atleast_2d(p)
    cdf = np.cumsum(p, axis=-1)
    u = 1.0 - rng.random(p.shape[0])
    idx = np.sum(cdf < u[:, None] * cdf[:, -1:], axis=-1)
    return np.minimum(idx, p.shape[-1] - 1)


def as_fraction(epsilon) -> Fraction:
    """Exact rational for an epsilon given as str, Fraction, int or float.

    Floats go through their shortest decimal repr so ``0.1`` means ``1/10``.
    """
    if isinstance(epsilon, float):
        if math.isinf(epsilon):
            return epsilon
        return Fraction(repr(epsilon))
    return Fraction(epsilon)


def _rank(n: int, epsilon) -> Optional[int]:
    eps = as_fraction(epsilon)
    if eps == math.inf or eps > 1:
        return None
    if eps <= 0:
        return 0
    x = n * eps
    if isinstance(epsilon, float):
        # a float such as 1/41 carries rounding noise; snap when n*eps is an integer up to it
        m = round(x)
        if abs(x - m) <= 1e-9 * max(1, m):
            return max(int(m), 1)
    return math.ceil(x)


def epsilon_regret(loss_matrix, player_losses, epsilon) -> float:
    """Player loss minus the loss of the ``ceil(N eps)``-th best action.

    Actions are ranked by total loss, ties by index.  ``eps <= 0`` gives
    ``+inf`` and ``eps > 1`` gives ``-inf``.
    """
    loss_matrix = np.atleast_2d(np.asarray(loss_matrix, dtype=float))
    player_losses = np.asarray(player_losses, dtype=float).reshape(-1)
    if loss_matrix.shape[0] != player_losses.shape[0]:
        raise ValueError(f"{loss_matrix.shape[0]} loss rows but {player_losses.shape[0]} player losses")
    k = _rank(loss_matrix.shape[1], epsilon)
    if k is None:
        return -math.inf
    if k == 0:
        return math.inf
    # sequential sums in one order for player and actions, so identical
    # sequences cancel exactly (and match epsilon_regret_curve)
    if loss_matrix.shape[0] == 0:
        return 0.0
    totals = np.cumsum(loss_matrix, axis=0)[-1]
    player = np.cumsum(player_losses)[-1]
    order = np.lexsort((np.arange(totals.size), totals))
    return float(player - totals[order[k - 1]])


def epsilon_regret_curve(loss_matrix, player_losses, epsilon) -> np.ndarray:
    """``epsilon_regret`` of every prefix ``1..T`` at once."""
    loss_matrix = np.asarray(loss_matrix, dtype=float)
    k = _rank(loss_matrix.shape[1], epsilon)
    T = loss_matrix.shape[0]
    if k is None:
        return np.full(T, -np.inf)
    if k == 0:
        return np.full(T, np.inf)
    cum = np.cumsum(loss_matrix, axis=0)
    kth = np.partition(cum, k - 1, axis=1)[:, k - 1]
    return np.cumsum(player_losses) - kth


@dataclass
class RunRecord:
    """Trace of a Hedge (or Hedge-like) run.

    ``positions`` and ``potential_sum`` have one more row than the per-round
    arrays: entry 0 is the starting state.
    """

    weights: np.ndarray
    losses: np.ndarray
    player_loss: np.ndarray
    zero_count: np.ndarray
    positions: np.ndarray
    potential_sum: np.ndarray
    rule: object = None
    meta: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return len(self.player_loss)

    @property
    def n(self) -> int:
        return self.positions.shape[1]

    @property
    def movements(self) -> np.ndarray:
        return np.diff(self.positions, axis=0)

    def epsilon_regret(self, epsilon) -> float:
        return epsilon_regret(self.losses, self.player_loss, epsilon)

    def regret_curve(self, epsilon) -> np.ndarray:
        return epsilon_regret_curve(self.losses, self.player_loss, epsilon)

    @classmethod
    def empty(cls, n: int) -> "RunRecord":
        return cls(np.zeros((0, n)), np.zeros((0, n)), np.zeros(0), np.zeros(0, dtype=int),
                   np.zeros((1, n)), np.zeros(1))


def potential_sum(family, state: CumulativeState, horizon: int) -> float:
    if isinstance(family, NormalHedge) or family is None:
        return math.nan
    ctx = PotentialContext(horizon, state.round_t)
    return float(np.sum(eval_potential(family, ctx, state.s)))


def run_hedge(rule: Rule, adversary: Adversary, T: int, N: int) -> RunRecord:
    """Play ``T`` rounds of Hedge against an adversary that sees ``p_t`` first."""
    state = CumulativeState.zeros(N)
    ps, ls, history = [], [], []
    positions = [state.s.copy()]
    sums = [potential_sum(rule, state, T)]
    for t in range(1, T + 1):
        p = weights(rule, state)
        loss = _check_losses(adversary(t, p, history))
        state = hedge_step(state, loss, p)
        ps.append(p)
        ls.append(loss)
        history.append(loss)
        positions.append(state.s.copy())
        sums.append(potential_sum(rule, state, T))
    P = np.array(ps).reshape(T, N)
    L = np.array(ls).reshape(T, N)
    return RunRecord(
        weights=P,
        losses=L,
        player_loss=np.einsum("ti,ti->t", P, L),
        zero_count=np.sum(P == 0, axis=1),
        positions=np.array(positions),
        potential_sum=np.array(sums),
        rule=rule,
        meta={"T": T, "N": N},
    )


class PotentialHedge:
    """Stateful Hedge learner for a weight rule (``predict`` then ``observe``)."""

    def __init__(self, rule: Rule, n: int):
        self.rule = rule
        self.state = CumulativeState.zeros(n)
        self._p = None

    def predict(self) -> np.ndarray:
        self._p = weights(self.rule, self.state)
        return self._p

    def observe(self, loss) -> None:
        p = self._p if self._p is not None else weights(self.rule, self.state)
        self.state = hedge_step(self.state, loss, p)
        self._p = None


def run_randomized_hedge(rule: Rule, losses, runs: int, seed: int, T: Optional[int] = None,
                         N: Optional[int] = None) -> np.ndarray:
    """Regret to the best action of ``runs`` independent randomized plays.

    ``losses`` is an oblivious ``T x N`` stream, a ``runs x T x N`` array, or
    a callable ``losses(t, P) -> runs x N`` that may react to each run's
    current weights ``P`` (then ``T`` and ``N`` are required).  Each round
    every run draws ``i_t ~ p_t`` and moves chips by ``loss_i - loss_{i_t}``.
    """
    adaptive = callable(losses)
    if not adaptive:
        losses = np.asarray(losses, dtype=float)
        if losses.ndim == 2:
            losses = np.broadcast_to(losses, (runs,) + losses.shape)
        _, T, N = losses.shape
    rng = np.random.default_rng(seed)
    state = CumulativeState(np.zeros((runs, N)), 0)
    incurred = np.zeros(runs)
    totals = np.zeros((runs, N))
    rows = np.arange(runs)
    for t in range(T):
        p = weights(rule, state)
        actions = sample_actions(p, rng)
        step = _check_losses(losses(t + 1, p)) if adaptive else losses[:, t, :]
        incurred += step[rows, actions]
        totals += step
        state = randomized_hedge_step(state, step, actions)
    return incurred - totals.min(axis=1)


def run_hedge_batch(rule: Rule, losses) -> tuple[np.ndarray, np.ndarray]:
    """Run Hedge on a batch of loss sequences ``B x T x N`` at once.

    Returns the weights ``B x T x N`` and the per-round player losses ``B x T``.
    """
    losses = _check_losses(losses)
    B, T, N = losses.shape
    state = CumulativeState(np.zeros((B, N)), 0)
    P = np.empty_like(losses)
    for t in range(T):
        P[:, t] = weights(rule, state)
        state = hedge_step(state, losses[:, t], P[:, t])
    return P, np.einsum("btn,btn->bt", P, losses)
