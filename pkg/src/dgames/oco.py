"""Online convex optimization by running Hedge over a grid of the domain.

Each grid point is a chip.  The prediction is the weight-averaged point, and
every chip moves by ``f_t(x) - f_t(x_t)``, which has nonnegative weighted mean
by Jensen's inequality.  Grid counting stands in for volume.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .hedge import CumulativeState, Rule, epsilon_regret, epsilon_regret_curve, potential_sum, weights
from .potentials import Exp, NormalHedgeDT, regret_bound

JENSEN_TOL = 1e-10

# vectorized loss: (k, d) array of points -> (k,) values in [0, 1]
ConvexLoss = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Box:
    bounds: tuple  # ((lo, hi), ...) one pair per axis


@dataclass(frozen=True)
class Simplex:
    dim: int  # points x >= 0 with sum(x) <= 1


@dataclass
class DiscretizedDomain:
    points: np.ndarray  # M x d
    spacing: float

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def discretize_domain(shape: Union[Box, Simplex], resolution: int) -> DiscretizedDomain:
    """Regular grid with ``resolution`` points per axis (box) or per edge (simplex)."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if isinstance(shape, Box):
        axes = [np.linspace(lo, hi, resolution) for lo, hi in shape.bounds]
        pts = np.array(list(itertools.product(*axes)), dtype=float)
        spacing = max((hi - lo) / (resolution - 1) for lo, hi in shape.bounds)
        return DiscretizedDomain(pts, spacing)
    if isinstance(shape, Simplex):
        k = resolution - 1
        idx = [c for c in itertools.product(range(k + 1), repeat=shape.dim) if sum(c) <= k]
        return DiscretizedDomain(np.array(idx, dtype=float) / k, 1.0 / k)
    raise TypeError(f"unknown domain {shape!r}")


def quadratic_loss(center) -> ConvexLoss:
    """``x -> ||x - center||^2``; stays in [0, 1] on [0, 1] for a center inside."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    return lambda X: np.sum((np.atleast_2d(X) - center) ** 2, axis=-1)


class JensenViolation(AssertionError):
    pass


def _evaluate(f: ConvexLoss, X) -> np.ndarray:
    v = np.asarray(f(np.atleast_2d(X)), dtype=float).reshape(-1)
    if np.any(v < 0) or np.any(v > 1) or np.any(np.isnan(v)):
        raise ValueError("loss values must lie in [0, 1]")
    return v


def oco_step(state: CumulativeState, rule: Rule, f: ConvexLoss, domain: DiscretizedDomain):
    """One round: returns ``(x_t, new_state, p_t, point_losses, f(x_t))``."""
    if state.n != domain.size:
        raise ValueError(f"state has {state.n} chips but the domain has {domain.size} points")
    p = weights(rule, state)
    x = p @ domain.points
    fx_grid = _evaluate(f, domain.points)
    fx = float(_evaluate(f, x)[0])
    slack = float(p @ fx_grid) - fx
    if slack < -JENSEN_TOL:
        raise JensenViolation(f"round {state.round_t + 1}: E_p[f] - f(x_t) = {slack:.3g}")
    new = CumulativeState(state.s + (fx_grid - fx), state.round_t + 1)
    return x, new, p, fx_grid, fx


@dataclass
class OcoRecord:
    predictions: np.ndarray  # T x d
    player_loss: np.ndarray  # f_t(x_t)
    point_losses: np.ndarray  # T x M
    zero_count: np.ndarray
    jensen_slack: np.ndarray
    potential_sum: np.ndarray  # t = 0..T
    spacing: float
    meta: dict = field(default_factory=dict)


def run_oco(rule: Rule, losses: Union[Sequence[ConvexLoss], Callable[[int], ConvexLoss]],
            domain: DiscretizedDomain, T: int) -> OcoRecord:
    """``losses`` is a sequence of loss callables or a map ``t -> loss`` (1-based)."""
    pick = losses if callable(losses) else (lambda t: losses[t - 1])
    state = CumulativeState.zeros(domain.size)
    xs, fxs, grid_losses, zeros, slacks = [], [], [], [], []
    sums = [potential_sum(rule, state, T)]
    for t in range(1, T + 1):
        x, state, p, fx_grid, fx = oco_step(state, rule, pick(t), domain)
        xs.append(x)
        fxs.append(fx)
        grid_losses.append(fx_grid)
        zeros.append(int(np.sum(p == 0)))
        slacks.append(float(p @ fx_grid) - fx)
        sums.append(potential_sum(rule, state, T))
    return OcoRecord(np.array(xs).reshape(T, domain.dim), np.array(fxs), np.array(grid_losses).reshape(T, domain.size),
                     np.array(zeros), np.array(slacks), np.array(sums), domain.spacing, {"T": T, "M": domain.size})


def oco_epsilon_regret(record: OcoRecord, epsilon) -> float:
    """Player loss minus the total loss of the ``ceil(M eps)``-th best grid point."""
    return epsilon_regret(record.point_losses, record.player_loss, epsilon)


def oco_regret_curve(record: OcoRecord, epsilon) -> np.ndarray:
    return epsilon_regret_curve(record.point_losses, record.player_loss, epsilon)


def oco_usual_regret_bound(T: int, d: int, family) -> float:
    """Bound on regret to every point: the ``eps = T^-d`` bound plus ``T eps^(1/d) = 1``."""
    if not isinstance(family, (Exp, NormalHedgeDT)):
        raise ValueError("needs a family with a sqrt(T ln(1/eps)) bound (Exp or NormalHedgeDT)")
    eps = float(T) ** (-d)
    return regret_bound(family, T, eps) + T * eps ** (1.0 / d)


def chord_violations(f: ConvexLoss, domain: DiscretizedDomain, samples: int = 1000, seed: int = 0,
                     tol: float = 1e-12) -> list:
    """Random chords ``(a, b, lam)`` where ``f`` is not below its secant line.

    Only a diagnostic: passing says nothing definite about convexity.
    """
    rng = np.random.default_rng(seed)
    i = rng.integers(domain.size, size=samples)
    j = rng.integers(domain.size, size=samples)
    lam = rng.random(samples)[:, None]
    a, b = domain.points[i], domain.points[j]
    mid = f(lam * a + (1 - lam) * b)
    secant = lam[:, 0] * f(a) + (1 - lam[:, 0]) * f(b)
    bad = np.flatnonzero(mid > secant + tol)
    return [(a[k], b[k], float(lam[k, 0])) for k in bad]
