"""LIBSVM parsing, synthetic loss streams, CSV output and dataset preparation."""

from __future__ import annotations

import csv
import importlib.util
import math
import os
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

DATA_ENV = "DGAMES_DATA_DIR"


@dataclass
class BinaryDataset:
    X: np.ndarray  # N x F, values 0/1 (uint8)
    y: np.ndarray  # N, values -1/+1 (int8)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.uint8)
        self.y = np.asarray(self.y, dtype=np.int8)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError(f"shape mismatch: X {self.X.shape}, y {self.y.shape}")
        if np.any(self.X > 1):
            raise ValueError("features must be binary")
        if not np.all(np.abs(self.y) == 1):
            raise ValueError("labels must be -1 or +1")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "BinaryDataset":
        return BinaryDataset(self.X[rows], self.y[rows])


def data_dir() -> Path:
    return Path(os.environ.get(DATA_ENV, "./data"))


# --- LIBSVM ---------------------------------------------------------------


def parse_libsvm_lines(lines: Iterable[str], expected_features: Optional[int] = None,
                       source: str = "<lines>") -> BinaryDataset:
    labels, rows = [], []
    width = 0
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *tokens = line.split()
        try:
            label = int(float(head))
        except ValueError:
            raise ValueError(f"{source}:{lineno}: bad label {head!r}") from None
        if float(head) != label or label not in (-1, 0, 1):
            raise ValueError(f"{source}:{lineno}: label {head!r} is not in {{-1, +1, 0, 1}}")
        idx = []
        for tok in tokens:
            key, sep, val = tok.partition(":")
            if not sep or not key.isdigit() or int(key) < 1:
                raise ValueError(f"{source}:{lineno}: malformed feature {tok!r}")
            try:
                v = float(val)
            except ValueError:
                raise ValueError(f"{source}:{lineno}: malformed value in {tok!r}") from None
            if v not in (0.0, 1.0):
                raise ValueError(f"{source}:{lineno}: non-binary value {val!r}")
            k = int(key)
            if idx and k <= idx[-1][0]:
                raise ValueError(f"{source}:{lineno}: indices must be strictly ascending")
            idx.append((k, v))
        labels.append(label)
        rows.append([k for k, v in idx if v == 1.0])
        if idx:
            width = max(width, idx[-1][0])
    F = max(width, expected_features or 0)
    X = np.zeros((len(rows), F), dtype=np.uint8)
    for r, cols in enumerate(rows):
        X[r, np.asarray(cols, dtype=int) - 1] = 1
    y = np.asarray(labels, dtype=np.int8)
    if np.any(y == 0):
        if np.any(y == -1):
            raise ValueError(f"{source}: labels mix -1 and 0")
        warnings.warn(f"{source}: remapping 0/1 labels to -1/+1")
        y = np.where(y == 0, -1, 1).astype(np.int8)
    return BinaryDataset(X, y)


def parse_libsvm(path, expected_features: Optional[int] = None) -> BinaryDataset:
    with open(path, encoding="utf-8") as fh:
        return parse_libsvm_lines(fh, expected_features, str(path))


def format_libsvm(data: BinaryDataset) -> str:
    out = []
    for x, label in zip(data.X, data.y):
        feats = " ".join(f"{k + 1}:1" for k in np.flatnonzero(x))
        out.append(f"{'+1' if label > 0 else '-1'} {feats}".rstrip())
    return "\n".join(out) + ("\n" if out else "")


def write_libsvm(data: BinaryDataset, path) -> None:
    Path(path).write_text(format_libsvm(data), encoding="utf-8")


# --- synthetic loss streams -----------------------------------------------

STREAM_KINDS = ("uniform_random", "adversarial_best_hiding", "constant")


class LossStream:
    """Loss source usable as a Hedge adversary ``stream(t, p, history)``.

    Every kind is a pure function of ``(kind, N, T, seed)`` and, for the
    adaptive kind, the weights it is shown.
    """

    def __init__(self, kind: str, N: int, T: int, seed: int = 0, level: float = 0.5):
        if kind not in STREAM_KINDS:
            raise ValueError(f"unknown stream kind {kind!r}; choose from {STREAM_KINDS}")
        self.kind, self.N, self.T, self.seed, self.level = kind, N, T, seed, level
        self._matrix = None
        if kind == "uniform_random":
            self._matrix = np.random.default_rng(seed).random((T, N))
        elif kind == "constant":
            self._matrix = np.full((T, N), float(level))

    @property
    def oblivious(self) -> bool:
        return self._matrix is not None

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            raise ValueError(f"{self.kind} adapts to the weights and has no fixed matrix")
        return self._matrix

    def __call__(self, t: int, p, history=()) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix[t - 1]
        return best_hiding_losses(p, np.random.default_rng([self.seed, t]))


def best_hiding_losses(p, rng: np.random.Generator) -> np.ndarray:
    """Loss 1 on the heaviest actions until they hold half the weight, 0 elsewhere.

    Equal weights are ordered by a random permutation drawn from ``rng``.
    """
    p = np.asarray(p, dtype=float)
    tiebreak = rng.permutation(p.size)
    order = np.lexsort((tiebreak, -p))
    count = int(np.searchsorted(np.cumsum(p[order]), 0.5 - 1e-12)) + 1
    loss = np.zeros(p.size)
    loss[order[:count]] = 1.0
    return loss


def synth_loss_stream(kind: str, N: int, T: int, seed: int = 0) -> LossStream:
    return LossStream(kind, N, T, seed)


# --- CSV --------------------------------------------------------------------

HEDGE_COLUMNS = ("round", "player_loss", "regret_best", "eps_regret_0.01", "eps_regret_0.1",
                 "zero_frac", "potential_sum")
BOOST_COLUMNS = ("round", "edge", "train_err", "test_err", "zero_frac")
MARGIN_COLUMNS = ("example", "margin")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], comment: Optional[str] = None) -> None:
    """Header plus one row per record; floats get 12 significant digits.

    ``comment`` (e.g. the run configuration) is written first as ``# ...``.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment is not None:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path) -> dict:
    """Columns of a CSV written by ``write_csv`` as float arrays (comments skipped)."""
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader)
        body = [list(map(float, r)) for r in reader]
    table = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: table[:, k] for k, name in enumerate(header)}


def hedge_rows(record) -> list:
    """Rows in ``HEDGE_COLUMNS`` order for a ``hedge.RunRecord``."""
    from .hedge import epsilon_regret_curve

    T, N = record.losses.shape
    if T == 0:
        return []
    best = record.player_loss.cumsum() - record.losses.cumsum(axis=0).min(axis=1)
    e1 = epsilon_regret_curve(record.losses, record.player_loss, "0.01")
    e2 = epsilon_regret_curve(record.losses, record.player_loss, "0.1")
    return [(t + 1, record.player_loss[t], best[t], e1[t], e2[t], record.zero_count[t] / N,
             record.potential_sum[t + 1]) for t in range(T)]


# --- raw dataset preparation --------------------------------------------------


def _package_file(package: str, *parts: str) -> Path:
    spec = importlib.util.find_spec(package)
    if spec is None or not spec.submodule_search_locations:
        raise FileNotFoundError(f"package {package!r} with the raw data is not installed")
    path = Path(list(spec.submodule_search_locations)[0], *parts)
    if not path.exists():
        raise FileNotFoundError(path)
    return path


def splice_raw_path() -> Path:
    return _package_file("keel_ds", "data", "balanced", "raw", "splice.dat")


def adult_raw_paths() -> tuple:
    return (_package_file("responsibly", "dataset", "adult", "adult.data"),
            _package_file("responsibly", "dataset", "adult", "adult.test"))


NUCLEOTIDES = "ACGT"


def splice_from_raw(path) -> BinaryDataset:
    """60 nucleotides one-hot encoded into 240 bits; a junction (EI or IE) is +1.

    Ambiguity codes (N, D, R, S) leave all four bits of their position unset.
    """
    X, y = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            fields = [f.strip() for f in line.strip().split(",")]
            if len(fields) != 61:
                if line.strip():
                    raise ValueError(f"{path}:{lineno}: expected 61 fields, got {len(fields)}")
                continue
            bits = np.zeros((60, 4), dtype=np.uint8)
            for pos, ch in enumerate(fields[:60]):
                k = NUCLEOTIDES.find(ch)
                if k >= 0:
                    bits[pos, k] = 1
            X.append(bits.reshape(-1))
            y.append(-1 if fields[60] == "N" else 1)
    return BinaryDataset(np.array(X), np.array(y))


ADULT_COLUMNS = ("age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
                 "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
                 "hours-per-week", "native-country")
ADULT_CATEGORIES = {
    "workclass": ("Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov",
                  "State-gov", "Without-pay", "Never-worked"),
    "education": ("Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm",
                  "Assoc-voc", "9th", "7th-8th", "12th", "Masters", "1st-4th", "10th", "Doctorate",
                  "5th-6th", "Preschool"),
    "marital-status": ("Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed",
                       "Married-spouse-absent", "Married-AF-spouse"),
    "occupation": ("Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial",
                   "Prof-specialty", "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
                   "Farming-fishing", "Transport-moving", "Priv-house-serv", "Protective-serv",
                   "Armed-Forces"),
    "relationship": ("Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried"),
    "race": ("White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"),
    "sex": ("Female", "Male"),
    "native-country": ("United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany",
                       "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece", "South", "China",
                       "Cuba", "Iran", "Honduras", "Philippines", "Italy", "Poland", "Jamaica",
                       "Vietnam", "Mexico", "Portugal", "Ireland", "France", "Dominican-Republic",
                       "Laos", "Ecuador", "Taiwan", "Haiti", "Columbia", "Hungary", "Guatemala",
                       "Nicaragua", "Scotland", "Thailand", "Yugoslavia", "El-Salvador",
                       "Trinadad&Tobago", "Peru", "Hong", "Holand-Netherlands"),
}
# interval boundaries for the continuous attributes: 7+6+6+3+3+7 = 32 bits
ADULT_CUTS = {
    "age": (25, 30, 35, 40, 50, 60),
    "fnlwgt": (100000, 150000, 200000, 250000, 300000),
    "education-num": (8.5, 9.5, 10.5, 12.5, 13.5),
    "capital-gain": (0.5, 5000),
    "capital-loss": (0.5, 1800),
    "hours-per-week": (25, 35, 40.5, 45.5, 50.5, 60.5),
}


def read_adult(path) -> tuple:
    """Rows of the raw census-income file as (list of field dicts, labels)."""
    rows, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            fields = [f.strip() for f in line.strip().rstrip(".").split(",")]
            if len(fields) != 15:
                continue
            rows.append(dict(zip(ADULT_COLUMNS, fields[:14])))
            labels.append(1 if fields[14].startswith(">50K") else -1)
    return rows, np.array(labels, dtype=np.int8)


def adult_features(rows) -> np.ndarray:
    """One-hot categorical values ('?' sets nothing) plus one-hot interval bins."""
    blocks = []
    for name, values in ADULT_CATEGORIES.items():
        col = np.array([r[name] for r in rows])
        blocks.append(np.stack([col == v for v in values], axis=1))
    for name, cuts in ADULT_CUTS.items():
        v = np.array([float(r[name]) for r in rows])
        idx = np.searchsorted(cuts, v, side="right")
        blocks.append(np.eye(len(cuts) + 1, dtype=bool)[idx])
    return np.concatenate(blocks, axis=1).astype(np.uint8)


def prepare_splice(out_dir, seed: int = 0, n_train: int = 500, n_test: int = 500) -> tuple:
    data = splice_from_raw(splice_raw_path())
    order = np.random.default_rng(seed).permutation(data.n)
    train = data.subset(order[:n_train])
    test = data.subset(order[n_train:n_train + n_test])
    return _write_pair(out_dir, "splice", train, test)


def prepare_census(out_dir, seed: int = 0, n_train: int = 1000, n_test: int = 1000) -> tuple:
    train_path, test_path = adult_raw_paths()
    rows_tr, y_tr = read_adult(train_path)
    rows_te, y_te = read_adult(test_path)
    rng = np.random.default_rng(seed)
    pick_tr = np.sort(rng.choice(len(rows_tr), n_train, replace=False))
    pick_te = np.sort(rng.choice(len(rows_te), n_test, replace=False))
    train = BinaryDataset(adult_features([rows_tr[i] for i in pick_tr]), y_tr[pick_tr])
    test = BinaryDataset(adult_features([rows_te[i] for i in pick_te]), y_te[pick_te])
    return _write_pair(out_dir, "census", train, test)


def _write_pair(out_dir, name, train, test) -> tuple:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = (out / f"{name}.train", out / f"{name}.test")
    write_libsvm(train, paths[0])
    write_libsvm(test, paths[1])
    return paths


DATASETS = {"splice": (prepare_splice, 240), "census": (prepare_census, 131)}


def load_dataset(name: str, prepare_missing: bool = True) -> tuple:
    """Train and test splits of a named dataset from the data directory."""
    prepare, F = DATASETS[name]
    train_path, test_path = data_dir() / f"{name}.train", data_dir() / f"{name}.test"
    if not (train_path.exists() and test_path.exists()):
        if not prepare_missing:
            raise FileNotFoundError(train_path)
        prepare(data_dir())
    return parse_libsvm(train_path, F), parse_libsvm(test_path, F)
