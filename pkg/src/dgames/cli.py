"""``dgames`` command line: hedge, bandit, oco, boost, verify, summarize, prepare-data."""

from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import dataio
from .bandit import auto_eta, exp3_potential, run_bandit
from .boosting import ALGOS, margins, run_boosting, theorem_envelopes
from .dataio import BOOST_COLUMNS, HEDGE_COLUMNS, MARGIN_COLUMNS, write_csv
from .hedge import NormalHedge, RunRecord, run_hedge
from .oco import Box, discretize_domain, oco_epsilon_regret, quadratic_loss, run_oco
from .potentials import Exp, NormalHedgeDT, PotentialContext, TwoNorm, tuned_exp_eta
from .verify import SUITES, run_suite

TRACE_TOL = 1e-8


class CheckFailed(RuntimeError):
    pass


def _epsilon(text: str) -> str:
    """Validated decimal string; kept as text so the exact rational is used downstream."""
    try:
        Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"epsilon must be a decimal string, got {text!r}") from None
    return text


def _eta(text: str):
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"eta must be 'auto' or a positive number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("eta must be positive")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def make_rule(algo: str, eta, d: float, T: int, eps: str):
    if algo == "exp":
        return Exp(tuned_exp_eta(T, float(Fraction(eps))) if eta == "auto" else eta)
    if algo == "twonorm":
        return TwoNorm()
    if algo == "nhdt":
        return NormalHedgeDT(d=d)
    if algo == "normalhedge":
        return NormalHedge()
    raise ValueError(algo)


def check_trace(trace) -> None:
    """Raise when a potential sum grows beyond the relative tolerance."""
    trace = np.asarray(trace)
    rise = np.diff(trace) - TRACE_TOL * np.maximum(1.0, np.abs(trace[:-1]))
    bad = np.flatnonzero(rise > 0)
    if bad.size:
        t = int(bad[0]) + 1
        raise CheckFailed(f"potential sum increased at round {t}: {trace[t - 1]!r} -> {trace[t]!r}")


# where results are written does not change them, so paths stay out of the echo
NOT_ECHOED = {"func", "out", "margins_out", "model_out"}


def config_line(args) -> str:
    items = {k: v for k, v in sorted(vars(args).items()) if k not in NOT_ECHOED}

    def show(v):
        return ",".join(map(str, v)) if isinstance(v, list) else str(v)

    return "config " + " ".join(f"{k}={show(v)}" for k, v in items.items())


def _summary(eps_list, values) -> str:
    return "final eps-regret: " + ", ".join(f"{e}={v:.6g}" for e, v in zip(eps_list, values))


def cmd_hedge(args) -> int:
    rule = make_rule(args.algo, args.eta, args.d, args.T, args.eps[0])
    kind = {"random": "uniform_random", "adversarial": "adversarial_best_hiding", "constant": "constant"}[args.adversary]
    stream = dataio.synth_loss_stream(kind, args.N, args.T, args.seed)
    record = run_hedge(rule, stream, args.T, args.N)
    if not isinstance(rule, NormalHedge):
        check_trace(record.potential_sum)
    if args.out:
        write_csv(args.out, HEDGE_COLUMNS, dataio.hedge_rows(record), config_line(args))
    print(_summary(args.eps, [record.epsilon_regret(e) for e in args.eps]))
    return 0


def cmd_bandit(args) -> int:
    stream = dataio.synth_loss_stream("uniform_random", args.N, args.T, args.seed)
    losses = stream.matrix()
    eta = auto_eta(args.T, args.N) if args.eta == "auto" else args.eta
    run = run_bandit(eta, losses, args.seed)
    realized = run.losses[np.arange(args.T), run.actions]
    pot = np.array([np.sum(exp3_potential(eta, args.N, PotentialContext(args.T, t), s))
                    for t, s in enumerate(run.positions)])
    record = RunRecord(run.weights, run.losses, realized, run.zero_count, run.positions, pot)
    if args.out:
        write_csv(args.out, HEDGE_COLUMNS, dataio.hedge_rows(record), config_line(args) + f" eta_used={eta!r}")
    print(f"regret to best action: {run.regret:.6g} (eta={eta:.6g})")
    return 0


def cmd_oco(args) -> int:
    rule = make_rule(args.algo, args.eta, args.d, args.T, args.eps[0])
    domain = discretize_domain(Box(((0.0, 1.0),)), args.M)
    centers = np.random.default_rng(args.seed).random(args.T)
    rec = run_oco(rule, [quadratic_loss(c) for c in centers], domain, args.T)
    check_trace(rec.potential_sum)
    if args.out:
        record = RunRecord(np.zeros((args.T, 0)), rec.point_losses, rec.player_loss, rec.zero_count,
                           np.zeros((args.T + 1, 0)), rec.potential_sum)
        write_csv(args.out, HEDGE_COLUMNS, dataio.hedge_rows(record), config_line(args))
    print(_summary(args.eps, [oco_epsilon_regret(rec, e) for e in args.eps]))
    return 0


def cmd_boost(args) -> int:
    train = dataio.parse_libsvm(args.data)
    test = dataio.parse_libsvm(args.test, train.n_features) if args.test else None
    if test is not None and test.n_features > train.n_features:
        train = dataio.BinaryDataset(np.pad(train.X, ((0, 0), (0, test.n_features - train.n_features))), train.y)
    run = run_boosting(args.algo, train, args.rounds, test)
    if args.algo == "nhboost-dt":
        rep = theorem_envelopes(run.model, train)
        if not rep.skipped and (rep.train_error > rep.train_limit or rep.margin_violations):
            raise CheckFailed(f"training-error/margin envelope violated: {rep}")
    if args.out:
        write_csv(args.out, BOOST_COLUMNS, run.rows(), config_line(args))
    if args.margins_out:
        m = margins(run.model, train)
        write_csv(args.margins_out, MARGIN_COLUMNS, [(i + 1, v) for i, v in enumerate(m)], config_line(args))
    if args.model_out:
        Path(args.model_out).write_text(run.model.to_text(), encoding="utf-8")
    test_err = run.test_err[-1] * 100 if test is not None else math.nan
    print(format_table([(args.algo, run.zero_frac.mean() * 100, run.train_err[-1] * 100, test_err)]))
    return 0


def cmd_verify(args) -> int:
    failed = 0
    names = list(SUITES) if args.suite == "all" else [args.suite]
    for name in names:
        results, elapsed = run_suite(name)
        for r in results:
            print(f"{'PASS' if r.ok else 'FAIL'}  {r.name}: {r.detail}")
            failed += not r.ok
        print(f"suite {name} finished in {elapsed:.1f}s")
    return 1 if failed else 0


TABLE_HEADER = f"{'algo':<12} {'zeros %':>8} {'train err %':>12} {'test err %':>11}"


def format_table(rows) -> str:
    lines = [TABLE_HEADER]
    for algo, zeros, train, test in rows:
        lines.append(f"{algo:<12} {zeros:>8.1f} {train:>12.1f} {test:>11.1f}")
    return "\n".join(lines)


def read_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# config "):
                return dict(kv.split("=", 1) for kv in line[len("# config "):].split())
    return {}


def cmd_summarize(args) -> int:
    rows = []
    for path in args.records:
        cols = dataio.read_csv(path)
        if "train_err" not in cols:
            raise ValueError(f"{path} is not a boosting record")
        algo = read_config(path).get("algo", Path(path).stem)
        if len(cols["round"]) == 0:
            continue
        rows.append((algo, cols["zero_frac"].mean() * 100, cols["train_err"][-1] * 100, cols["test_err"][-1] * 100))
    print(format_table(rows))
    return 0


def cmd_prepare(args) -> int:
    out = Path(args.out) if args.out else dataio.data_dir()
    names = list(dataio.DATASETS) if args.dataset == "all" else [args.dataset]
    for name in names:
        paths = dataio.DATASETS[name][0](out, seed=args.seed)
        print(f"{name}: wrote {paths[0]} and {paths[1]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgames", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_rule=True):
        p.add_argument("--T", type=_positive, default=1000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out")
        if with_rule:
            p.add_argument("--eps", type=_epsilon, nargs="+", default=["0.01", "0.1", "0.5"])
            p.add_argument("--eta", type=_eta, default="auto")
            p.add_argument("--d", type=float, default=3.0)

    p = sub.add_parser("hedge", help="run a Hedge algorithm on a synthetic loss stream")
    p.add_argument("--algo", choices=("exp", "twonorm", "nhdt", "normalhedge"), default="nhdt")
    p.add_argument("--N", type=_positive, default=100)
    p.add_argument("--adversary", choices=("random", "adversarial", "constant"), default="random")
    common(p)
    p.set_defaults(func=cmd_hedge)

    p = sub.add_parser("bandit", help="run EXP3 on a random oblivious stream")
    p.add_argument("--N", type=_positive, default=10)
    common(p, with_rule=False)
    p.add_argument("--eta", type=_eta, default="auto")
    p.set_defaults(func=cmd_bandit)

    p = sub.add_parser("oco", help="discretized OCO on (x - c_t)^2 over [0, 1]")
    p.add_argument("--algo", choices=("exp", "twonorm", "nhdt"), default="nhdt")
    p.add_argument("--M", type=int, default=1001)
    common(p)
    p.set_defaults(func=cmd_oco)

    p = sub.add_parser("boost", help="boost decision stumps on a LIBSVM dataset")
    p.add_argument("--algo", choices=ALGOS, default="nhboost-dt")
    p.add_argument("--data", required=True)
    p.add_argument("--test")
    p.add_argument("--rounds", type=_positive, default=200)
    p.add_argument("--out")
    p.add_argument("--margins-out")
    p.add_argument("--model-out")
    p.set_defaults(func=cmd_boost)

    p = sub.add_parser("verify", help="run grid and enumeration check suites")
    p.add_argument("--suite", choices=tuple(SUITES) + ("all",), default="all")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("summarize", help="tabulate boosting CSV records")
    p.add_argument("records", nargs="*")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("prepare-data", help="build LIBSVM splits from the raw splice/census files")
    p.add_argument("--dataset", choices=tuple(dataio.DATASETS) + ("all",), default="all")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_prepare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"dgames: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
