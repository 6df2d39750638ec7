"""DGv1 simulator, Hedge <-> drifting-game conversions and potential-sum traces."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .hedge import (
    CumulativeState,
    RunRecord,
    Rule,
    normalize_log,
    weights,
)
from .potentials import BoostByMajority, PotentialContext, eval_potential

MOVE_TOL = 1e-12

# signature: adversary(t, p, history) -> movement vector z; t is 1-based
DriftAdversary = Callable[[int, np.ndarray, Sequence[np.ndarray]], np.ndarray]


class InvalidMove(ValueError):
    def __init__(self, round_t: int, problems: list[str]):
        super().__init__(f"round {round_t}: " + "; ".join(problems))
        self.round_t = round_t
        self.problems = problems


def validate_dgv1_move(p, z, tol: float = MOVE_TOL) -> list[str]:
    """Problems with movement ``z`` under weights ``p``; empty list means legal."""
    p = np.asarray(p, dtype=float)
    z = np.asarray(z, dtype=float)
    if p.shape != z.shape:
        raise ValueError(f"shape mismatch: p {p.shape}, z {z.shape}")
    problems = []
    if np.any(np.abs(z) > 1 + tol):
        problems.append(f"movement outside [-1, 1]: {z[np.abs(z) > 1 + tol]}")
    spread = z.max() - z.min() if z.size else 0.0
    if spread > 1 + tol:
        problems.append(f"spread {spread:.6g} > 1")
    pz = float(p @ z)
    if pz < -tol:
        problems.append(f"p.z = {pz:.6g} < 0")
    return problems


def validate_walk_move(p, z, tol: float = MOVE_TOL) -> list[str]:
    """Free +-1 walk: every chip moves by exactly -1 or +1, no weight constraint."""
    z = np.asarray(z, dtype=float)
    off = np.abs(np.abs(z) - 1) > tol
    return [f"non +-1 movements at chips {np.flatnonzero(off)}"] if off.any() else []


# --- strategies -----------------------------------------------------------
# A Hedge strategy exposes predict() -> p and observe(loss); a DGv1 player
# exposes predict() -> p and observe(z).  Both are stateful objects.


class PotentialPlayer:
    """DGv1 player that weights chips by a potential's weight rule."""

    def __init__(self, rule: Rule, n: int):
        self.rule = rule
        self.state = CumulativeState.zeros(n)

    def predict(self) -> np.ndarray:
        return weights(self.rule, self.state)

    def observe(self, z) -> None:
        self.state = CumulativeState(self.state.s + np.asarray(z, dtype=float), self.state.round_t + 1)


class BBMPlayer:
    """Boost-by-majority player: ``p_i ∝ Phi_t(s_i - 1) - Phi_t(s_i + 1)``."""

    def __init__(self, beta: float, horizon: int, n: int, threshold: float = 0.0):
        self.family = BoostByMajority(beta, threshold)
        self.horizon = horizon
        self.state = CumulativeState.zeros(n)

    def predict(self) -> np.ndarray:
        ctx = PotentialContext(self.horizon, self.state.round_t + 1)
        s = self.state.s
        diff = eval_potential(self.family, ctx, s - 1) - eval_potential(self.family, ctx, s + 1)
        diff = np.maximum(np.asarray(diff, dtype=float), 0.0)
        with np.errstate(divide="ignore"):
            return normalize_log(np.log(diff))

    def observe(self, z) -> None:
        self.state = CumulativeState(self.state.s + np.asarray(z, dtype=float), self.state.round_t + 1)


class HedgeAsPlayer:
    """Hedge strategy run as a DGv1 player: feeds it ``z - min z`` as losses."""

    def __init__(self, hedge):
        self.hedge = hedge

    def predict(self) -> np.ndarray:
        return self.hedge.predict()

    def observe(self, z) -> None:
        z = np.asarray(z, dtype=float)
        self.hedge.observe(z - z.min())


class PlayerAsHedge:
    """DGv1 player run as a Hedge strategy: moves chips by ``loss - p . loss``."""

    def __init__(self, player):
        self.player = player
        self._p = None

    def predict(self) -> np.ndarray:
        self._p = self.player.predict()
        return self._p

    def observe(self, loss) -> None:
        loss = np.asarray(loss, dtype=float)
        p = self._p if self._p is not None else self.player.predict()
        self.player.observe(loss - p @ loss)
        self._p = None


def hedge_to_player(hedge) -> HedgeAsPlayer:
    return HedgeAsPlayer(hedge)


def player_to_hedge(player) -> PlayerAsHedge:
    return PlayerAsHedge(player)


# --- game play ------------------------------------------------------------


@dataclass
class GameOutcome:
    final_positions: np.ndarray
    average_loss: float
    threshold: float


def play_dgv1(player, adversary: DriftAdversary, T: int, N: int, R: float,
              validator=validate_dgv1_move) -> GameOutcome:
    """Play ``T`` rounds; every move is checked by ``validator`` before it lands."""
    s = np.zeros(N)
    history = []
    for t in range(1, T + 1):
        p = np.asarray(player.predict(), dtype=float)
        z = np.asarray(adversary(t, p, history), dtype=float)
        problems = validator(p, z)
        if problems:
            raise InvalidMove(t, problems)
        player.observe(z)
        history.append(z)
        s = s + z
    return GameOutcome(s, float(np.mean(s <= -R)), R)


def zero_adversary(t, p, history):
    return np.zeros_like(p)


def constant_adversary(c: float) -> DriftAdversary:
    if not 0 <= c <= 1:
        raise ValueError("a constant move needs c in [0, 1] to keep p.z >= 0")
    return lambda t, p, history: np.full_like(p, c)


def random_sign_adversary(rng: np.random.Generator) -> DriftAdversary:
    """Independent fair +-1 steps for every chip (a free walk, not DGv1-legal)."""
    return lambda t, p, history: rng.choice([-1.0, 1.0], size=p.shape)


def push_heavy_adversary(t, p, history):
    """Split chips at weight 1/2: heavy ones drift right by ``x``, the rest left
    by ``1 - x``, with ``x`` chosen so ``p . z = 0``.  This is the movement view
    of charging loss 1 to the heaviest actions."""
    order = np.argsort(-p, kind="stable")
    heavy_count = int(np.searchsorted(np.cumsum(p[order]), 0.5 - 1e-15)) + 1
    heavy = np.zeros(p.shape, dtype=bool)
    heavy[order[:heavy_count]] = True
    x = 1.0 - float(p[heavy].sum())
    return np.where(heavy, x, x - 1.0)


def potential_sum_trace(record: RunRecord, family, T: Optional[int] = None) -> np.ndarray:
    """``sum_i Phi_t(s_{t,i})`` for ``t = 0..rounds`` along a recorded run.

    The caller must pass the family whose weight rule produced ``record``.
    """
    T = record.rounds if T is None else T
    return np.array([
        float(np.sum(eval_potential(family, PotentialContext(T, t), s)))
        for t, s in enumerate(record.positions)
    ])


# --- exhaustive small-instance checks of the Hedge/DGv1 equivalence --------


def ternary_loss_sequences(N: int, T: int) -> np.ndarray:
    """Every loss sequence with entries in {0, 1/2, 1}: shape ``3^(NT) x T x N``."""
    grid = np.array(list(itertools.product((0.0, 0.5, 1.0), repeat=N * T)))
    return grid.reshape(-1, T, N)


def dgv1_game_tree(rule: Rule, N: int, T: int, grid=(-0.5, 0.0, 0.5), with_inner: bool = False):
    """All adversary paths on a movement grid against a Hedge rule turned player.

    The player is ``hedge_to_player`` of the rule's Hedge, so its internal
    state moves by ``z - p . z`` while the chips move by ``z``.  Moves that
    break a DGv1 constraint are pruned.  Returns final chip positions, plus
    the Hedge's own final positions (minus its regrets) with ``with_inner``.
    """
    moves = np.array(list(itertools.product(grid, repeat=N)))
    moves = moves[(np.ptp(moves, axis=1) <= 1 + MOVE_TOL) & (np.abs(moves).max(axis=1) <= 1)]
    chips = np.zeros((1, N))
    inner = np.zeros((1, N))
    for t in range(T):
        p = weights(rule, CumulativeState(inner, t))
        pz = p @ moves.T  # histories x moves
        ok = pz >= -MOVE_TOL
        h, m = np.nonzero(ok)
        z = moves[m]
        chips = chips[h] + z
        # synthesized losses z - min z, then a Hedge update with them
        loss = z - z.min(axis=1, keepdims=True)
        inner = inner[h] + loss - np.sum(p[h] * loss, axis=1, keepdims=True)
    return (chips, inner) if with_inner else chips


def sorted_regrets(losses, player_loss) -> np.ndarray:
    """Per-sequence regrets to each action, largest first (``B x N``)."""
    regrets = player_loss.sum(axis=1)[:, None] - losses.sum(axis=1)
    return -np.sort(-regrets, axis=1)


def bracket_index(regrets_desc, R) -> np.ndarray:
    """Largest ``i`` with ``R <= R^{i/N}``, where ``R^{0/N} = +inf``.

    With regrets sorted in decreasing order the ``i``-th entry is the
    ``i/N``-regret, so ``i`` is just the count of regrets ``>= R``.
    """
    return np.sum(regrets_desc >= R, axis=-1)
