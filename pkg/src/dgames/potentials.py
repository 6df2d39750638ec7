"""Potential functions for drifting games.

A potential ``Phi_t(s)`` upper-bounds the loss a chip at position ``s`` can
still suffer with ``T - t`` rounds left.  Every family here is convex,
nonincreasing and nonnegative in ``s``, and satisfies (or, for the exponential
family, meets with equality) the two-step relaxation

    Phi_t(s - 1) + Phi_t(s + 1) <= 2 * Phi_{t-1}(s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np
from scipy import special, stats


def neg_part(s):
    """Truncation ``[s]_- = min(0, s)``; works on scalars and arrays."""
    return np.minimum(s, 0.0)


@dataclass(frozen=True)
class Exp:
    """Exponential potential ``e^{-eta (s + shift)}``."""

    eta: float
    shift: float = 0.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")


@dataclass(frozen=True)
class TwoNorm:
    """Squared-truncation potential ``a([s]_-^2 + T - t)``."""

    a: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")


@dataclass(frozen=True)
class NormalHedgeDT:
    """``a(exp([s]_-^2 / (d t)) - b_t)``; the two-step inequality needs d >= 3."""

    a: float = 1.0
    d: float = 3.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if not self.d >= 3:
            raise ValueError(f"d must be >= 3, got {self.d}")

    @classmethod
    def unchecked(cls, a: float = 1.0, d: float = 3.0) -> "NormalHedgeDT":
        # Skips the d >= 3 guard; only for probing where the inequality fails.
        obj = object.__new__(cls)
        object.__setattr__(obj, "a", float(a))
        object.__setattr__(obj, "d", float(d))
        return obj


@dataclass(frozen=True)
class BoostByMajority:
    """Boost-by-majority potential: probability that a ``beta``-biased +-1
    walk ends at or below ``-threshold``."""

    beta: float
    threshold: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")


PotentialFamily = Union[Exp, TwoNorm, NormalHedgeDT, BoostByMajority]


@dataclass(frozen=True)
class PotentialContext:
    horizon: int
    t: int

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not 0 <= self.t <= self.horizon:
            raise ValueError(f"round {self.t} outside [0, {self.horizon}]")


def b_coefficient(t: int, T: int, d: float = 3.0) -> float:
    """Offset ``b_t = 1 - 1/2 sum_{tau=t+1}^T (exp(4/(d tau)) - 1)``."""
    if not 0 <= t <= T:
        raise ValueError(f"need 0 <= t <= T, got t={t}, T={T}")
    if t == T:
        return 1.0
    tau = np.arange(t + 1, T + 1, dtype=float)
    return 1.0 - 0.5 * math.fsum(np.expm1(4.0 / (d * tau)))


def b_coefficients(T: int, d: float = 3.0) -> np.ndarray:
    """All offsets ``b_0, ..., b_T`` at once."""
    terms = np.zeros(T + 1)
    terms[1:] = np.expm1(4.0 / (d * np.arange(1, T + 1)))
    # suffix sums: b_t needs terms t+1..T
    tail = np.concatenate([np.cumsum(terms[::-1])[::-1][1:], [0.0]])
    return 1.0 - 0.5 * tail


def eval_potential(family: PotentialFamily, ctx: PotentialContext, s):
    """Evaluate ``Phi_t(s)`` for the given family; ``s`` may be an array."""
    T, t = ctx.horizon, ctx.t
    s = np.asarray(s, dtype=float)
    if isinstance(family, Exp):
        log_factor = (T - t) * math.log(math.cosh(family.eta))
        out = np.exp(log_factor - family.eta * (s + family.shift))
    elif isinstance(family, TwoNorm):
        out = family.a * (neg_part(s) ** 2 + (T - t))
    elif isinstance(family, NormalHedgeDT):
        b = b_coefficient(t, T, family.d)
        if t == 0:
            out = np.full(s.shape, family.a * (1.0 - b))
        else:
            with np.errstate(over="ignore"):
                out = family.a * (np.exp(neg_part(s) ** 2 / (family.d * t)) - b)
    elif isinstance(family, BoostByMajority):
        out = bbm_potential(family.beta, ctx, s, family.threshold)
    else:
        raise TypeError(f"unknown potential family {family!r}")
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Violation:
    s: float
    lhs: float
    rhs: float


def check_two_step_inequality(family: PotentialFamily, ctx: PotentialContext,
                              s_grid, tolerance: float = 1e-9) -> list[Violation]:
    """Points where ``Phi_t(s-1) + Phi_t(s+1) <= 2 Phi_{t-1}(s)`` fails.

    A point counts as a violation when the excess exceeds
    ``tolerance * max(1, |rhs|)``.  For NormalHedgeDT at ``t = 1`` the
    inequality is not claimed in general, so only the anchor ``s = 0`` (the
    single position every chip occupies at round 0) is checked.
    """
    if ctx.t < 1:
        raise ValueError("the two-step inequality needs t >= 1")
    prev = PotentialContext(ctx.horizon, ctx.t - 1)
    s = np.atleast_1d(np.asarray(s_grid, dtype=float))
    if isinstance(family, NormalHedgeDT) and ctx.t == 1:
        s = np.array([0.0])
    if isinstance(family, NormalHedgeDT):
        # exp([s]_-^2/(dt)) overflows far out on the grid, so compare every
        # term after dividing by a shared factor e^M
        def expo(x, t):
            return neg_part(x) ** 2 / (family.d * t) if t > 0 else np.zeros_like(x)

        M = np.maximum.reduce([expo(s - 1, ctx.t), expo(s + 1, ctx.t), expo(s, prev.t)])

        def scaled(x, c):
            b = b_coefficient(c.t, c.horizon, family.d)
            if c.t == 0:
                return family.a * (1.0 - b) * np.exp(-M)
            return family.a * (np.exp(expo(x, c.t) - M) - b * np.exp(-M))

        lhs = scaled(s - 1, ctx) + scaled(s + 1, ctx)
        rhs = 2.0 * scaled(s, prev)
        unit = np.exp(-M)
    else:
        lhs = np.asarray(eval_potential(family, ctx, s - 1)) + np.asarray(eval_potential(family, ctx, s + 1))
        rhs = 2.0 * np.asarray(eval_potential(family, prev, s))
        unit = np.ones(s.shape)
        M = np.zeros(s.shape)
    lhs, rhs = np.broadcast_to(lhs, s.shape), np.broadcast_to(rhs, s.shape)
    bad = lhs - rhs > tolerance * np.maximum(unit, np.abs(rhs))
    with np.errstate(over="ignore"):
        scale = np.exp(M[bad])
    return [Violation(float(a), float(b * k), float(c * k))
            for a, b, c, k in zip(s[bad], lhs[bad], rhs[bad], scale)]


def regret_bound(family: PotentialFamily, T: int, epsilon: float, tuned: bool = True) -> float:
    """Closed-form epsilon-regret bound after ``T`` rounds.

    For ``Exp`` the default is the optimally tuned value ``sqrt(2 T ln(1/eps))``;
    pass ``tuned=False`` for ``ln(1/eps)/eta + T eta / 2`` at the family's own eta.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    epsilon = float(epsilon)
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if isinstance(family, Exp):
        if tuned:
            return math.sqrt(2.0 * T * math.log(1.0 / epsilon))
        return math.log(1.0 / epsilon) / family.eta + T * family.eta / 2.0
    if isinstance(family, TwoNorm):
        return math.sqrt(T / epsilon)
    if isinstance(family, NormalHedgeDT):
        d = family.d
        mass = math.expm1(4.0 / d) * (math.log(T) + 1.0) / 2.0
        return math.sqrt(d * T * math.log(mass / epsilon + 1.0))
    raise TypeError(f"no Hedge regret bound for {type(family).__name__}")


def tuned_exp_eta(T: int, epsilon: float) -> float:
    """Learning rate ``sqrt(2 ln(1/eps) / T)`` that minimizes the EXP bound."""
    return math.sqrt(2.0 * math.log(1.0 / float(epsilon)) / T)


def relaxed_minimax_loss(T: int, R: int):
    """``2^-T sum_{j=0}^{(T-R)/2} C(T+1, j)``, the minimax loss of the relaxed game.

    Exact ``Fraction`` for ``T <= 200``; a float computed in log space beyond.
    """
    if not 0 <= R <= T:
        raise ValueError(f"need 0 <= R <= T, got R={R}, T={T}")
    if (T - R) % 2:
        raise ValueError(f"T and R must share parity, got T={T}, R={R}")
    top = (T - R) // 2
    if T <= 200:
        return Fraction(sum(math.comb(T + 1, j) for j in range(top + 1)), 2 ** T)
    j = np.arange(top + 1)
    log_terms = special.gammaln(T + 2) - special.gammaln(j + 1) - special.gammaln(T + 2 - j)
    return float(np.exp(special.logsumexp(log_terms) - T * math.log(2.0)))


def bbm_potential(beta: float, ctx: PotentialContext, s, loss_threshold: float = 0.0):
    """Chance that a walk with ``P(+1) = (1 + beta)/2`` over the remaining
    ``T - t`` steps, started at ``s``, finishes at or below ``-loss_threshold``."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    k = ctx.horizon - ctx.t
    s = np.asarray(s, dtype=float)
    # final = s + 2j - k <= -R  <=>  j <= (k - R - s) / 2
    j_max = np.floor((k - loss_threshold - s) / 2.0 + 1e-12)
    out = stats.binom.cdf(j_max, k, (1.0 + beta) / 2.0) if k else (s <= -loss_threshold).astype(float)
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)
