import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from dgames import dataio
from dgames.dataio import (
    HEDGE_COLUMNS,
    BinaryDataset,
    best_hiding_losses,
    format_libsvm,
    hedge_rows,
    parse_libsvm,
    parse_libsvm_lines,
    read_csv,
    synth_loss_stream,
    write_csv,
)
from dgames.hedge import RunRecord, run_hedge
from dgames.potentials import TwoNorm

from conftest import FIXTURES, ROOT


# --- LIBSVM --------------------------------------------------------------------


def test_parse_single_line():
    data = parse_libsvm_lines(["+1 3:1 7:1"])
    assert data.y.tolist() == [1]
    assert data.n_features == 7
    assert set(np.flatnonzero(data.X[0]) + 1) == {3, 7}


def test_parse_fixture_file():
    data = parse_libsvm(FIXTURES / "mini.libsvm")
    assert data.n == 6 and data.n_features == 4
    assert data.y.tolist() == [1, 1, -1, -1, 1, -1]
    assert data.X[1].tolist() == [1, 1, 1, 0]


def test_expected_features_widen_matrix():
    assert parse_libsvm_lines(["-1 2:1"], expected_features=10).n_features == 10


def test_explicit_zero_values_are_unset_bits():
    data = parse_libsvm_lines(["+1 1:0 2:1"])
    assert data.X[0].tolist() == [0, 1]


@pytest.mark.parametrize("line,fragment", [
    ("+2 1:1", "label"),
    ("abc 1:1", "bad label"),
    ("+1 3-1", "malformed"),
    ("+1 0:1", "malformed"),
    ("+1 3:0.5", "non-binary"),
    ("+1 3:x", "malformed value"),
    ("+1 5:1 2:1", "ascending"),
])
def test_malformed_lines_report_line_number(line, fragment):
    with pytest.raises(ValueError) as info:
        parse_libsvm_lines(["+1 1:1", "", line], source="f")
    assert "f:3" in str(info.value) and fragment in str(info.value)


def test_zero_one_labels_are_remapped():
    with pytest.warns(UserWarning):
        data = parse_libsvm_lines(["1 1:1", "0 2:1"])
    assert data.y.tolist() == [1, -1]
    with pytest.raises(ValueError):
        parse_libsvm_lines(["-1 1:1", "0 2:1"])


def test_comments_and_blank_lines_skipped():
    data = parse_libsvm_lines(["# header", "", "-1 2:1  # trailing"])
    assert data.n == 1 and data.X[0].tolist() == [0, 1]


@given(hnp.arrays(np.uint8, st.tuples(st.integers(0, 12), st.integers(1, 15)), elements=st.integers(0, 1)),
       st.data())
def test_format_parse_round_trip(X, draw):
    y = np.array(draw.draw(st.lists(st.sampled_from([-1, 1]), min_size=X.shape[0], max_size=X.shape[0])), dtype=np.int8)
    data = BinaryDataset(X, y)
    back = parse_libsvm_lines(format_libsvm(data).splitlines(), expected_features=X.shape[1])
    assert np.array_equal(back.X, X) and np.array_equal(back.y, y)


def bundled_files():
    return sorted((ROOT / "data").glob("*.train")) + sorted((ROOT / "data").glob("*.test")) + [FIXTURES / "mini.libsvm"]


@pytest.mark.parametrize("path", bundled_files(), ids=lambda p: p.name)
def test_bundled_files_parse_serialize_parse(path):
    first = parse_libsvm(path)
    second = parse_libsvm_lines(format_libsvm(first).splitlines(), expected_features=first.n_features)
    assert np.array_equal(first.X, second.X) and np.array_equal(first.y, second.y)
    assert format_libsvm(second) == format_libsvm(first)


def test_dataset_validation():
    with pytest.raises(ValueError):
        BinaryDataset(np.array([[2]]), np.array([1]))
    with pytest.raises(ValueError):
        BinaryDataset(np.array([[1]]), np.array([0]))
    with pytest.raises(ValueError):
        BinaryDataset(np.zeros((2, 3)), np.array([1]))


@pytest.mark.parametrize("name,n_train,n_test,F", [("splice", 500, 500, 240), ("census", 1000, 1000, 131)])
def test_prepared_dataset_shapes(name, n_train, n_test, F):
    train, test = dataio.load_dataset(name)
    assert (train.n, test.n) == (n_train, n_test)
    assert train.n_features == test.n_features == F
    if name == "splice":
        # one bit per nucleotide position, at most
        assert train.X.sum(axis=1).max() <= 60


def test_data_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("DGAMES_DATA_DIR", str(tmp_path))
    assert dataio.data_dir() == tmp_path
    monkeypatch.delenv("DGAMES_DATA_DIR")
    assert str(dataio.data_dir()) == "data"


def test_missing_dataset_without_preparation(monkeypatch, tmp_path):
    monkeypatch.setenv("DGAMES_DATA_DIR", str(tmp_path))
    with pytest.raises(FileNotFoundError):
        dataio.load_dataset("splice", prepare_missing=False)


def test_splice_raw_encoding(tmp_path):
    raw = tmp_path / "raw.data"
    raw.write_text(",".join("ACGT" * 15) + ",EI\n" + ",".join("N" + "A" * 59) + ",N\n", encoding="utf-8")
    data = dataio.splice_from_raw(raw)
    assert data.X.shape == (2, 240)
    assert data.y.tolist() == [1, -1]
    assert data.X[0, :8].tolist() == [1, 0, 0, 0, 0, 1, 0, 0]
    assert data.X[1, :4].sum() == 0 and data.X[1].sum() == 59


def test_adult_binarization():
    row = dict(zip(dataio.ADULT_COLUMNS, ["39", "State-gov", "77516", "Bachelors", "13", "Never-married",
                                            "Adm-clerical", "Not-in-family", "White", "Male", "2174", "0", "40",
                                            "United-States"]))
    X = dataio.adult_features([row])
    assert X.shape == (1, 131)
    assert X.sum() == len(dataio.ADULT_CATEGORIES) + len(dataio.ADULT_CUTS)


# --- loss streams ----------------------------------------------------------------------


def test_streams_are_pure_functions_of_their_arguments():
    a = synth_loss_stream("uniform_random", 5, 20, seed=3)
    b = synth_loss_stream("uniform_random", 5, 20, seed=3)
    assert np.array_equal(a.matrix(), b.matrix())
    assert not np.array_equal(a.matrix(), synth_loss_stream("uniform_random", 5, 20, seed=4).matrix())
    adv = synth_loss_stream("adversarial_best_hiding", 4, 20, seed=1)
    p = np.array([0.4, 0.1, 0.4, 0.1])
    assert np.array_equal(adv(7, p), synth_loss_stream("adversarial_best_hiding", 4, 20, seed=1)(7, p))
    with pytest.raises(ValueError):
        adv.matrix()
    with pytest.raises(ValueError):
        synth_loss_stream("chaotic", 3, 3)


def test_constant_stream():
    m = synth_loss_stream("constant", 4, 6).matrix()
    assert np.all(m == m[0, 0])


def test_best_hiding_charges_the_heavy_half():
    loss = best_hiding_losses(np.array([0.1, 0.6, 0.3]), np.random.default_rng(0))
    assert loss.tolist() == [0.0, 1.0, 0.0]
    loss = best_hiding_losses(np.array([0.3, 0.1, 0.35, 0.25]), np.random.default_rng(0))
    assert loss.tolist() == [1.0, 0.0, 1.0, 0.0]


def test_best_hiding_stresses_uniform_weights():
    T, N = 100, 2
    regrets = []
    for seed in range(300):
        stream = synth_loss_stream("adversarial_best_hiding", N, T, seed)
        p = np.full(N, 1 / N)
        L = np.array([stream(t, p) for t in range(1, T + 1)])
        regrets.append(L @ p @ np.ones(T) - L.sum(axis=0).min())
    # |Binomial(T, 1/2) - T/2| has mean about 0.4 sqrt(T)
    assert np.mean(regrets) >= 0.25 * math.sqrt(T)


# --- CSV ------------------------------------------------------------------------------------


def test_empty_record_gives_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    write_csv(path, HEDGE_COLUMNS, hedge_rows(RunRecord.empty(3)))
    assert path.read_text(encoding="utf-8") == ",".join(HEDGE_COLUMNS) + "\n"


def test_three_round_run_gives_four_lines(tmp_path):
    rec = run_hedge(TwoNorm(), synth_loss_stream("uniform_random", 4, 3, seed=0), 3, 4)
    path = tmp_path / "run.csv"
    write_csv(path, HEDGE_COLUMNS, hedge_rows(rec))
    assert len(path.read_text(encoding="utf-8").splitlines()) == 4


def test_csv_round_trip(tmp_path):
    rec = run_hedge(TwoNorm(), synth_loss_stream("uniform_random", 10, 50, seed=2), 50, 10)
    path = tmp_path / "run.csv"
    write_csv(path, HEDGE_COLUMNS, hedge_rows(rec), comment="config a=1\nsecond line")
    text = path.read_text(encoding="utf-8")
    assert text.startswith("# config a=1\n# second line\n")
    cols = read_csv(path)
    assert list(cols) == list(HEDGE_COLUMNS)
    assert np.allclose(cols["player_loss"], rec.player_loss, rtol=1e-11)
    assert np.allclose(cols["potential_sum"], rec.potential_sum[1:], rtol=1e-11)
    best = np.cumsum(rec.player_loss) - np.cumsum(rec.losses, axis=0).min(axis=1)
    assert np.allclose(cols["regret_best"], best, rtol=1e-11, atol=1e-12)
    assert np.allclose(cols["eps_regret_0.1"], rec.regret_curve("0.1"), rtol=1e-11, atol=1e-12)


def test_csv_number_formatting(tmp_path):
    path = tmp_path / "x.csv"
    write_csv(path, ("a", "b", "c", "d"), [(3, 1 / 3, math.inf, math.nan)])
    assert path.read_text(encoding="utf-8").splitlines()[1] == "3,0.333333333333,inf,nan"
