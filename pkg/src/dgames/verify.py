"""Grid and enumeration suites shared by the CLI ``verify`` command and the tests."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .bandit import dgv2_condition_check, exp3_alpha, exp3_potential, numeric_alpha
from .potentials import (
    Exp,
    NormalHedgeDT,
    PotentialContext,
    TwoNorm,
    check_two_step_inequality,
    eval_potential,
)


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


def default_grid(step: float = 0.01, radius: float = 50.0) -> np.ndarray:
    n = int(round(2 * radius / step))
    return np.linspace(-radius, radius, n + 1)


def two_step_suite(family, max_T: int = 200, grid=None, tolerance: float = 1e-9,
                   first_t: int = 1) -> CheckResult:
    """Two-step inequality for every ``first_t <= t <= T <= max_T``."""
    grid = default_grid() if grid is None else grid
    worst = None
    count = 0
    for T in range(1, max_T + 1):
        for t in range(first_t, T + 1):
            bad = check_two_step_inequality(family, PotentialContext(T, t), grid, tolerance)
            count += len(bad)
            if bad and worst is None:
                worst = (T, t, bad[0])
    name = f"two-step inequality {type(family).__name__}"
    detail = f"{count} violations" + (f"; first at T={worst[0]}, t={worst[1]}: {worst[2]}" if worst else "")
    return CheckResult(name, count == 0, detail)


def nhdt_anchor_suite(max_T: int = 200, d: float = 3.0) -> CheckResult:
    """``Phi_1(-1) + Phi_1(1) <= 2 Phi_0(0)`` for every horizon."""
    fam = NormalHedgeDT(d=d) if d >= 3 else NormalHedgeDT.unchecked(d=d)
    bad = [T for T in range(1, max_T + 1)
           if check_two_step_inequality(fam, PotentialContext(T, 1), [0.0])]
    return CheckResult("NormalHedgeDT anchor at t=1", not bad, f"violating horizons: {bad[:5]}")


def exp_equality_suite(etas=(0.01, 0.1, 0.5, 1.0), max_T: int = 200, grid=None,
                       tolerance: float = 1e-12) -> CheckResult:
    grid = default_grid() if grid is None else grid
    worst = 0.0
    for eta in etas:
        fam = Exp(eta)
        for T in (1, 2, 10, max_T):
            for t in range(1, T + 1):
                lhs = eval_potential(fam, PotentialContext(T, t), grid - 1) + eval_potential(fam, PotentialContext(T, t), grid + 1)
                rhs = 2 * eval_potential(fam, PotentialContext(T, t - 1), grid)
                worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.abs(rhs))))
    return CheckResult("EXP recurrence equality", worst <= tolerance, f"max relative gap {worst:.3g}")


def bandit_equality_suite(etas=(0.01, 0.1, 0.5, 1.0), N: int = 10, T: int = 200, grid=None,
                          tolerance: float = 1e-10) -> CheckResult:
    """``(1/2 + N a) Phi_t(s-1) + (1/2 - N a) Phi_t(s+1) = Phi_{t-1}(s)`` for EXP3."""
    grid = default_grid() if grid is None else grid
    worst = 0.0
    for eta in etas:
        a = exp3_alpha(eta)
        for t in range(1, T + 1):
            ctx, prev = PotentialContext(T, t), PotentialContext(T, t - 1)
            lhs = (0.5 + N * a) * exp3_potential(eta, N, ctx, grid - 1) + (0.5 - N * a) * exp3_potential(eta, N, ctx, grid + 1)
            rhs = exp3_potential(eta, N, prev, grid)
            worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.abs(rhs))))
    return CheckResult("EXP3 potential recurrence equality", worst <= tolerance, f"max relative gap {worst:.3g}")


def alpha_suite(etas=(0.001, 0.01, 0.1, 0.5, 1.0), N: int = 10, T: int = 100, grid=None,
                tolerance: float = 1e-6) -> CheckResult:
    grid = default_grid() if grid is None else grid
    worst = 0.0
    for eta in etas:
        for t in (0, 1, T // 2, T):
            ctx = PotentialContext(T, t)
            num = numeric_alpha(lambda s: exp3_potential(eta, N, ctx, s), grid)
            worst = max(worst, abs(num - exp3_alpha(eta)) / exp3_alpha(eta))
    return CheckResult("EXP3 alpha closed form vs numeric", worst <= tolerance, f"max relative gap {worst:.3g}")


def potentials_suite(max_T: int = 200, step: float = 0.01) -> list:
    grid = default_grid(step)
    return [
        two_step_suite(TwoNorm(), max_T, grid),
        two_step_suite(NormalHedgeDT(), max_T, grid, first_t=2),
        nhdt_anchor_suite(max_T),
        exp_equality_suite(max_T=max_T, grid=grid),
        bandit_equality_suite(T=max_T, grid=grid),
        alpha_suite(grid=grid),
    ]


def unbiasedness_suite(pairs: int = 10_000, max_N: int = 16, seed: int = 0) -> list:
    """Enumerate every draw for random ``(p, loss)`` pairs: the movement
    estimate is unbiased and the DGv2 moment limits hold."""
    rng = np.random.default_rng(seed)
    worst_bias, dg_bad = 0.0, 0
    for _ in range(pairs):
        N = int(rng.integers(1, max_N + 1))
        p = rng.dirichlet(np.ones(N))
        p = np.maximum(p, 1e-12)
        p /= p.sum()
        loss = rng.random(N)
        rep = dgv2_condition_check(p, loss, tol=1e-9)
        target = loss - p @ loss
        worst_bias = max(worst_bias, float(np.max(np.abs(rep.mean - target))))
        dg_bad += not rep.ok
    return [
        CheckResult("importance-weighted estimate unbiased", worst_bias <= 1e-9, f"max bias {worst_bias:.3g}"),
        CheckResult("DGv2 moment conditions", dg_bad == 0, f"{dg_bad} failing pairs"),
    ]


SUITES = {
    "potentials": potentials_suite,
    "bandit": unbiasedness_suite,
}


def run_suite(name: str) -> tuple:
    start = time.perf_counter()
    results = SUITES[name]()
    return results, time.perf_counter() - start
