"""Boosting with decision stumps: NH-Boost.DT, NH-Boost and an AdaBoost baseline.

Examples play the role of Hedge actions.  An example the weak hypothesis
gets right is charged loss 1, so its chip moves by ``y h / 2 - gamma``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataio import BinaryDataset
from .hedge import CumulativeState, NormalHedge, normalize_log, weights
from .potentials import NormalHedgeDT, regret_bound

ALGOS = ("nhboost-dt", "nhboost", "adaboost")
ADA_CLIP = 1e-10


@dataclass(frozen=True)
class Stump:
    feature: int  # 0-based column
    polarity: int  # +1: predict +1 when the bit is set

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X)
        return np.where(X[:, self.feature] == 1, self.polarity, -self.polarity).astype(np.int8)


def best_stump(data: BinaryDataset, p) -> tuple:
    """Stump with the largest edge ``1/2 sum_i p_i y_i h(x_i)``.

    Only rows with positive weight are touched.  Ties go to the lower feature
    index, then to polarity +1.
    """
    if data.n_features == 0:
        raise ValueError("no features to split on")
    p = np.asarray(p, dtype=float)
    nz = np.flatnonzero(p > 0)
    py = p[nz] * data.y[nz]
    # a +1 stump predicts +1 on set bits and -1 elsewhere
    plus = py @ data.X[nz] - 0.5 * py.sum()
    edges = np.empty(2 * data.n_features)
    edges[0::2] = plus
    edges[1::2] = -plus
    k = int(np.argmax(edges))
    return Stump(k // 2, 1 if k % 2 == 0 else -1), float(edges[k])


def ada_alpha(edge: float) -> float:
    err = min(max(0.5 - edge, ADA_CLIP), 1.0 - ADA_CLIP)
    return 0.5 * math.log((1.0 - err) / err)


@dataclass
class BoostState:
    s: np.ndarray  # chip positions, or the AdaBoost exponent sum_t alpha_t y h_t
    round_t: int = 0

    @classmethod
    def start(cls, n: int) -> "BoostState":
        return cls(np.zeros(n), 0)


def boost_weights(algo: str, state: BoostState) -> np.ndarray:
    if algo == "nhboost-dt":
        return weights(NormalHedgeDT(), CumulativeState(state.s, state.round_t))
    if algo == "nhboost":
        return weights(NormalHedge(), CumulativeState(state.s, state.round_t))
    if algo == "adaboost":
        return normalize_log(-state.s)
    raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGOS}")


def boost_round(algo: str, state: BoostState, data: BinaryDataset):
    """One round: returns ``(p, stump, edge, new_state)``."""
    p = boost_weights(algo, state)
    stump, edge = best_stump(data, p)
    yh = data.y * stump.predict(data.X)
    if algo == "adaboost":
        s = state.s + ada_alpha(edge) * yh
    else:
        s = state.s + 0.5 * yh - edge
    return p, stump, edge, BoostState(s, state.round_t + 1)


@dataclass
class BoostModel:
    algo: str
    stumps: list = field(default_factory=list)
    edges: list = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return len(self.stumps)

    def vote_weights(self) -> np.ndarray:
        if self.algo == "adaboost":
            return np.array([ada_alpha(g) for g in self.edges])
        return np.ones(self.rounds)

    def votes(self, X) -> np.ndarray:
        w = self.vote_weights()
        return sum((w[k] * st.predict(X) for k, st in enumerate(self.stumps)), np.zeros(len(X)))

    def predict(self, X) -> np.ndarray:
        # an exact tie in the vote predicts +1
        return np.where(self.votes(X) >= 0, 1, -1)

    def to_text(self) -> str:
        lines = [f"# algo {self.algo}"]
        lines += [f"{t + 1} {st.feature + 1} {st.polarity:+d} {edge!r}"
                  for t, (st, edge) in enumerate(zip(self.stumps, self.edges))]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, algo: Optional[str] = None) -> "BoostModel":
        model = cls(algo or "nhboost-dt")
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("# algo"):
                model.algo = algo or line.split()[2]
                continue
            if not line or line.startswith("#"):
                continue
            rnd, feat, pol, edge = line.split()
            if int(rnd) != model.rounds + 1:
                raise ValueError(f"round {rnd} out of order")
            model.stumps.append(Stump(int(feat) - 1, int(pol)))
            model.edges.append(float(edge))
        return model


@dataclass
class BoostRun:
    model: BoostModel
    train_err: np.ndarray
    test_err: np.ndarray
    zero_frac: np.ndarray
    round_time: np.ndarray
    max_abs_pz: np.ndarray  # |p . z| per round (NH variants)

    @property
    def edges(self) -> np.ndarray:
        return np.asarray(self.model.edges)

    def rows(self) -> list:
        return [(t + 1, self.model.edges[t], self.train_err[t], self.test_err[t], self.zero_frac[t])
                for t in range(self.model.rounds)]


def run_boosting(algo: str, data: BinaryDataset, T: int, test: Optional[BinaryDataset] = None) -> BoostRun:
    if T < 1:
        raise ValueError("T must be >= 1")
    if algo not in ALGOS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGOS}")
    state = BoostState.start(data.n)
    model = BoostModel(algo)
    train_votes = np.zeros(data.n)
    test_votes = np.zeros(test.n) if test is not None else None
    tr_err, te_err, zf, times, pz = (np.full(T, np.nan) for _ in range(5))
    for t in range(T):
        start = time.perf_counter()
        p, stump, edge, new = boost_round(algo, state, data)
        times[t] = time.perf_counter() - start
        if algo != "adaboost":
            pz[t] = abs(float(p @ (new.s - state.s)))
        state = new
        model.stumps.append(stump)
        model.edges.append(edge)
        w = ada_alpha(edge) if algo == "adaboost" else 1.0
        train_votes += w * stump.predict(data.X)
        tr_err[t] = np.mean(np.where(train_votes >= 0, 1, -1) != data.y)
        if test is not None:
            test_votes += w * stump.predict(test.X)
            te_err[t] = np.mean(np.where(test_votes >= 0, 1, -1) != test.y)
        zf[t] = np.mean(p == 0)
    return BoostRun(model, tr_err, te_err, zf, times, pz)


def margins(model: BoostModel, data: BinaryDataset) -> np.ndarray:
    """``y_i`` times the normalized vote; plain vote fraction for unweighted votes."""
    if model.rounds == 0:
        raise ValueError("empty model")
    w = model.vote_weights()
    return data.y * model.votes(data.X) / np.sum(np.abs(w))


def zero_weight_fraction(run: BoostRun) -> np.ndarray:
    return run.zero_frac


@dataclass
class EnvelopeReport:
    gamma_hat: float
    skipped: bool
    train_error: float
    train_limit: float
    margin_violations: list


def theorem_envelopes(model: BoostModel, data: BinaryDataset, thetas=None) -> EnvelopeReport:
    """Training-error and margin envelopes from the minimum edge and the
    NormalHedge.DT epsilon-regret bound at ``eps = j/N``.

    Training error must be at most ``(j-1)/N`` for the smallest ``j`` with
    ``gamma_hat > R^{j/N}/T``; the fraction of margins at most ``theta`` must
    be at most ``(j-1)/N`` for the smallest ``j`` with
    ``theta < 2 (gamma_hat - R^{j/N}/T)``.  Skipped when ``gamma_hat <= 0``.
    """
    T, N = model.rounds, data.n
    gamma_hat = float(np.min(model.edges))
    if gamma_hat <= 0:
        return EnvelopeReport(gamma_hat, True, math.nan, math.nan, [])
    family = NormalHedgeDT()
    scaled = np.array([regret_bound(family, T, j / N) / T for j in range(1, N + 1)])
    # scaled bounds shrink as j grows, so the first qualifying j is found by search
    ok = np.flatnonzero(gamma_hat > scaled)
    j = ok[0] + 1 if ok.size else N + 1
    H = model.predict(data.X)
    train_error = float(np.mean(H != data.y))
    limit = (j - 1) / N
    marg = data.y * model.votes(data.X) / T
    if thetas is None:
        thetas = np.linspace(-1, 1, 201)
    bad = []
    for theta in thetas:
        okm = np.flatnonzero(theta < 2 * (gamma_hat - scaled))
        jm = okm[0] + 1 if okm.size else N + 1
        frac = float(np.mean(marg <= theta))
        if frac > (jm - 1) / N:
            bad.append((float(theta), frac, (jm - 1) / N))
    return EnvelopeReport(gamma_hat, False, train_error, limit, bad)
