import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from dgames.boosting import (
    BoostModel,
    BoostState,
    Stump,
    ada_alpha,
    best_stump,
    boost_round,
    boost_weights,
    margins,
    run_boosting,
    theorem_envelopes,
)
from dgames.dataio import BinaryDataset, parse_libsvm
from dgames.potentials import NormalHedgeDT, regret_bound

from conftest import FIXTURES
from synthetic import guaranteed_edge, planted_edge_data

FOUR = BinaryDataset(np.array([[1], [1], [0], [0]]), np.array([1, 1, -1, -1]))
UNIFORM4 = np.full(4, 0.25)


# --- weak learner ------------------------------------------------------------------


def test_stump_on_four_examples():
    stump, edge = best_stump(FOUR, UNIFORM4)
    assert stump == Stump(0, 1) and edge == 0.5


@pytest.mark.parametrize("bits,expected", [((1, 1, 1, 0), Stump(0, 1)), ((1, 0, 0, 0), Stump(0, -1))])
def test_all_positive_labels_follow_majority_bit(bits, expected):
    data = BinaryDataset(np.array(bits)[:, None], np.ones(4))
    stump, edge = best_stump(data, UNIFORM4)
    h_plus = np.where(np.array(bits) == 1, 1, -1)
    assert stump == expected
    assert edge == pytest.approx(0.5 * abs(UNIFORM4 @ h_plus))


def test_all_weight_on_one_example():
    data = BinaryDataset(np.array([[0, 1], [1, 1], [1, 0]]), np.array([-1, 1, 1]))
    for i in range(3):
        _, edge = best_stump(data, np.eye(3)[i])
        assert edge == 0.5


def test_stump_predictions():
    X = np.array([[1, 0], [0, 1]])
    assert Stump(0, 1).predict(X).tolist() == [1, -1]
    assert Stump(1, -1).predict(X).tolist() == [1, -1]


def test_ties_go_to_lower_feature_then_plus():
    dup = BinaryDataset(np.array([[1, 1], [0, 0]]), np.array([1, -1]))
    assert best_stump(dup, [0.5, 0.5]) == (Stump(0, 1), 0.5)
    flat = BinaryDataset(np.array([[1], [1]]), np.array([1, -1]))
    assert best_stump(flat, [0.5, 0.5]) == (Stump(0, 1), 0.0)


def test_no_features():
    with pytest.raises(ValueError):
        best_stump(BinaryDataset(np.zeros((3, 0)), np.ones(3)), np.full(3, 1 / 3))


@st.composite
def weighted_data(draw):
    n = draw(st.integers(1, 15))
    F = draw(st.integers(1, 8))
    X = draw(hnp.arrays(np.uint8, (n, F), elements=st.integers(0, 1)))
    y = draw(hnp.arrays(np.int8, n, elements=st.sampled_from([-1, 1])))
    w = draw(hnp.arrays(float, n, elements=st.one_of(st.just(0.0), st.floats(0.01, 1.0))))
    if w.sum() == 0:
        w[0] = 1.0
    return BinaryDataset(X, y), w / w.sum()


@given(weighted_data())
def test_zero_weight_rows_change_nothing(dp):
    data, p = dp
    keep = p > 0
    assert best_stump(data, p) == best_stump(data.subset(keep), p[keep])


@given(weighted_data())
def test_best_stump_matches_enumeration(dp):
    data, p = dp
    best = max(
        ((0.5 * float(np.sum(p * data.y * Stump(f, pol).predict(data.X))), -f, pol) for f in range(data.n_features) for pol in (1, -1))
    )
    stump, edge = best_stump(data, p)
    assert edge == pytest.approx(best[0], abs=1e-12)
    assert -0.5 <= edge <= 0.5


# --- rounds ---------------------------------------------------------------------------


def test_first_round_weights_uniform():
    for algo in ("nhboost-dt", "nhboost", "adaboost"):
        assert np.array_equal(boost_weights(algo, BoostState.start(5)), np.full(5, 0.2))
    with pytest.raises(ValueError):
        boost_weights("gradient", BoostState.start(3))


def test_perfect_stump_leaves_chips_in_place():
    p, stump, edge, new = boost_round("nhboost-dt", BoostState.start(4), FOUR)
    assert edge == 0.5 and np.array_equal(new.s, np.zeros(4))


def test_two_round_hand_trace():
    X = np.array([[1, 1], [1, 0], [0, 1], [0, 0]])
    y = np.array([1, 1, -1, 1])
    data = BinaryDataset(X, y)
    # round 1, uniform weights: (f1,+) and (f2,-) both reach 1/4; the lower feature wins
    p1, s1, g1, st1 = boost_round("nhboost-dt", BoostState.start(4), data)
    assert s1 == Stump(0, 1) and g1 == pytest.approx(0.25)
    # y h = (+1, +1, +1, -1), so z = y h / 2 - 1/4
    assert st1.s == pytest.approx([0.25, 0.25, 0.25, -0.75])
    # round 2 weights: exp([s-1]_-^2 / 6) - exp([s+1]_-^2 / 6)
    a = math.exp(0.75 ** 2 / 6) - 1.0
    b = math.exp(1.75 ** 2 / 6) - 1.0
    pa, pb = a / (3 * a + b), b / (3 * a + b)
    p2, s2, g2, st2 = boost_round("nhboost-dt", st1, data)
    assert p2 == pytest.approx([pa, pa, pa, pb], rel=1e-12)
    # (f2,-) predicts (-,+,-,+): y h = (-1, +1, +1, +1)
    assert s2 == Stump(1, -1)
    assert g2 == pytest.approx(0.5 * (pa + pb), rel=1e-12)
    yh = np.array([-1, 1, 1, 1])
    assert st2.s == pytest.approx(st1.s + 0.5 * yh - g2, rel=1e-12)


def test_nhdt_weights_vanish_at_or_above_one():
    state = BoostState(np.array([1.0, 2.0, -0.5, 0.3]), 3)
    p = boost_weights("nhboost-dt", state)
    assert p[0] == 0 and p[1] == 0 and p[2] > 0 and p[3] > 0


@pytest.mark.parametrize("algo", ["nhboost-dt", "nhboost", "adaboost"])
def test_separable_data_trained_in_one_round(algo):
    data = BinaryDataset(np.array([[1, 0], [1, 1], [0, 1], [0, 0]]), np.array([1, 1, -1, -1]))
    run = run_boosting(algo, data, 3)
    assert run.train_err[0] == 0.0


@pytest.mark.parametrize("algo", ["nhboost-dt", "nhboost"])
def test_weighted_movement_is_zero(algo):
    run = run_boosting(algo, planted_edge_data(120, 20, 14, seed=3), 60)
    assert np.nanmax(run.max_abs_pz) <= 1e-12


def test_adaboost_never_zeroes_weights():
    run = run_boosting("adaboost", planted_edge_data(100, 20, 13, seed=1), 80)
    assert np.all(run.zero_frac == 0)


def test_nhdt_produces_zero_weights():
    run = run_boosting("nhboost-dt", planted_edge_data(150, 30, 21, seed=2), 100)
    assert run.zero_frac[0] == 0 and run.zero_frac.max() > 0


def test_run_shapes_and_errors():
    data = parse_libsvm(FIXTURES / "mini.libsvm")
    run = run_boosting("nhboost-dt", data, 5, test=data)
    assert len(run.model.stumps) == len(run.model.edges) == 5
    assert run.train_err.shape == run.test_err.shape == run.zero_frac.shape == (5,)
    assert np.all(run.round_time > 0)
    assert len(run.rows()) == 5
    with pytest.raises(ValueError):
        run_boosting("nhboost-dt", data, 0)
    with pytest.raises(ValueError):
        run_boosting("lpboost", data, 3)


# --- model -----------------------------------------------------------------------------


def test_margin_examples():
    data = BinaryDataset(np.array([[1, 1, 0]]), np.array([1]))
    model = BoostModel("nhboost-dt", [Stump(0, 1), Stump(1, 1), Stump(2, 1)], [0.1, 0.1, 0.1])
    assert margins(model, data)[0] == pytest.approx(1 / 3)
    same = BoostModel("nhboost-dt", [Stump(0, 1)] * 4, [0.2] * 4)
    assert margins(same, data)[0] == 1.0
    with pytest.raises(ValueError):
        margins(BoostModel("nhboost-dt"), data)


def test_tied_vote_predicts_plus_one():
    model = BoostModel("nhboost-dt", [Stump(0, 1), Stump(0, -1)], [0.1, 0.1])
    assert model.predict(np.array([[1], [0]])).tolist() == [1, 1]


def test_adaboost_vote_weights():
    assert ada_alpha(0.0) == 0.0
    assert ada_alpha(0.25) == pytest.approx(0.5 * math.log(3))
    assert math.isfinite(ada_alpha(0.5))
    model = BoostModel("adaboost", [Stump(0, 1), Stump(0, -1)], [0.25, 0.1])
    assert model.vote_weights() == pytest.approx([ada_alpha(0.25), ada_alpha(0.1)])
    assert model.predict(np.array([[1], [0]])).tolist() == [1, -1]


def test_model_text_round_trip():
    run = run_boosting("adaboost", planted_edge_data(60, 12, 9, seed=4), 25)
    text = run.model.to_text()
    back = BoostModel.from_text(text)
    assert back.algo == "adaboost"
    assert back.stumps == run.model.stumps and back.edges == run.model.edges
    assert back.to_text() == text
    assert text.splitlines()[1].split()[0] == "1"
    with pytest.raises(ValueError):
        BoostModel.from_text("2 1 +1 0.1\n")


# --- guarantees ---------------------------------------------------------------------------


def test_planted_edge_is_real():
    data = planted_edge_data(300, 40, 30, seed=5)
    rng = np.random.default_rng(0)
    for _ in range(50):
        _, edge = best_stump(data, rng.dirichlet(np.ones(data.n)))
        assert edge >= guaranteed_edge(40, 30) - 1e-12


def test_envelopes_on_planted_edge():
    N, T = 200, 1000
    data = planted_edge_data(N, 40, 30, seed=0)
    run = run_boosting("nhboost-dt", data, T)
    rep = theorem_envelopes(run.model, data)
    assert not rep.skipped and rep.gamma_hat >= guaranteed_edge() - 1e-12
    # the j = 1 scaled bound is below the edge, so training error must be zero
    assert regret_bound(NormalHedgeDT(), T, 1 / N) / T < rep.gamma_hat
    assert rep.train_limit == 0.0 and rep.train_error == 0.0
    assert rep.margin_violations == []
    floor = 2 * (rep.gamma_hat - regret_bound(NormalHedgeDT(), T, 1 / N) / T)
    assert margins(run.model, data).min() >= floor


def test_envelopes_skip_without_edge():
    data = BinaryDataset(np.array([[1], [1]]), np.array([1, -1]))
    rep = theorem_envelopes(BoostModel("nhboost-dt", [Stump(0, 1)], [0.0]), data)
    assert rep.skipped
