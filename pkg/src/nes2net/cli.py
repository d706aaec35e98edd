"""Command-line entry point: ``nes2net {profile,gradcheck,train,score,eval,avg}``.

Exit codes are 0 on success, 1 when a computation fails (gradient check
breach, divergence, schema mismatch) and 2 for usage or config errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import core, profiler
from .config import ConfigError, load_config
from .evaluation import ScoreFileError, ScoreSet, read_scores, summarize, write_scores
from .gradcheck import MAX_PARAMS, THRESHOLD, check_inputs, model_grad_check
from .models import build_model
from .seeding import int_seed
from .training import (Checkpoint, CheckpointError, DivergenceError, average_checkpoints,
                       score_dataset, synth_generate, train)
from .training.data import SPLITS, Dataset

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class Failure(Exception):
    """Computational failure, mapped to exit code 1."""


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _eps(text: str) -> float:
    value = float(text)
    if not 1e-7 <= value <= 1e-3:
        raise argparse.ArgumentTypeError(f"eps must lie in [1e-7, 1e-3], got {text}")
    return value


# ---------------------------------------------------------------------------
# commands

def cmd_profile(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg.model, seed=0)
    report = profiler.profile(model, frames=args.frames)
    print(report.to_tsv() if args.format == "tsv" else report.to_table(), end="")
    if args.verify:
        bad = {k: v for k, v in profiler.verify_counts(model, args.frames).items() if v}
        if bad:
            for k, v in sorted(bad.items()):
                print(f"mismatch {k} {v}", file=sys.stderr)
            raise Failure("analytic and instrumented counts disagree")
        print("verify: analytic counts match the model", file=sys.stderr)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = load_config(args.config)
    if cfg.model.dtype != "f64":
        raise ConfigError("gradcheck needs [model] dtype = f64")
    model = build_model(cfg.model, seed=int_seed(args.seed, "model.init"))
    if model.num_parameters() > args.max_params:
        raise ConfigError(f"model has {model.num_parameters()} parameters, above the "
                          f"gradcheck cap of {args.max_params}; use a reduced config")
    x, labels = check_inputs(model, args.frames, int_seed(args.seed, "gradcheck.input"))
    if args.inject_fault:
        with core.inject_backward_fault(args.inject_fault):
            errors = model_grad_check(model, x, labels, args.eps, args.max_params)
    else:
        errors = model_grad_check(model, x, labels, args.eps, args.max_params)
    failed = []
    for layer, err in errors.items():
        status = "ok" if err < THRESHOLD else "FAIL"
        print(f"{layer}\t{err:.3e}\t{status}")
        if err >= THRESHOLD:
            failed.append(layer)
    worst = max(errors.values(), default=0.0)
    print(f"max_rel_error\t{worst:.3e}")
    if failed:
        raise Failure(f"gradient check failed in: {', '.join(failed)}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    data_cfg = cfg.data_for(int_seed(args.seed, "data"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dtype = np.float64 if cfg.model.dtype == "f64" else np.float32
    train_data = synth_generate(data_cfg, "train", dtype)
    dev_data = synth_generate(data_cfg, "dev", dtype)
    model = build_model(cfg.model, seed=int_seed(args.seed, "model.init"))
    log_path = out / "train.log"
    with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch\tlr\ttrain_loss\tdev_eer\n")

        def on_epoch(entry):
            fh.write(entry.line() + "\n")
            fh.flush()

        try:
            result = train(model, train_data, dev_data, cfg.train,
                           seed=int_seed(args.seed, "train"), on_epoch=on_epoch)
        except DivergenceError as exc:
            raise Failure(f"training diverged: {exc}; partial log kept at {log_path}") from None
    for rank, ckpt in enumerate(result.top, 1):
        ckpt.save(out / f"top{rank}.ckpt")
    if result.best is not None:
        result.best.save(out / "best.ckpt")
        print(f"best epoch {result.best.metadata['epoch']} "
              f"dev_eer {result.best.metadata['dev_eer']}")
    print(f"wrote {log_path} and {len(result.top)} checkpoint(s) to {out}")
    return EXIT_OK


def _load_trials(args, cfg, dtype) -> Dataset:
    if args.features:
        try:
            with np.load(args.features, allow_pickle=False) as z:
                feats = z["features"].astype(dtype)
                keys = [str(k) for k in z["keys"]]
                ids = [str(u) for u in z["utt_ids"]]
                attacks = [str(a) for a in z["attacks"]] if "attacks" in z else ["-"] * len(ids)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read trials from {args.features}: {exc}") from None
        labels = np.array([1 if k == "bonafide" else 0 for k in keys])
        return Dataset(feats, labels, ids, attacks)
    data_cfg = cfg.data_for(int_seed(args.seed, "data"))
    return synth_generate(data_cfg, args.split, dtype)


def cmd_score(args) -> int:
    cfg = load_config(args.config)
    try:
        ckpt = Checkpoint.load(args.checkpoint)
    except OSError as exc:
        raise ConfigError(f"cannot read checkpoint {args.checkpoint}: {exc.strerror}") from None
    except CheckpointError as exc:
        raise Failure(f"{args.checkpoint}: {exc}") from None
    model = build_model(cfg.model, seed=0)
    try:
        model.load_state(ckpt.entries)
    except ValueError as exc:
        raise Failure(f"checkpoint does not match config: {exc}") from None
    dtype = np.float64 if cfg.model.dtype == "f64" else np.float32
    trials = _load_trials(args, cfg, dtype)
    scores = score_dataset(model, trials)
    write_scores(scores, args.out)
    print(f"scored {len(scores)} trials into {args.out}")
    return EXIT_OK


def format_metrics(summary: dict) -> str:
    """One ``name value`` line per metric, values printed at full precision."""
    lines = [f"eer\t{summary['eer']!r}"]
    for attack, value in sorted(summary["per_attack_eer"].items()):
        lines.append(f"eer[{attack}]\t{value!r}")
    lines.append(f"min_dcf\t{summary['min_dcf']!r}")
    lines.append(f"cllr\t{summary['cllr']!r}")
    lines.append(f"n_bonafide\t{summary['n_bonafide']}")
    lines.append(f"n_spoof\t{summary['n_spoof']}")
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    params = dict(p_target=args.p_target, c_miss=args.c_miss, c_fa=args.c_fa)
    if args.config:
        ev = load_config(args.config).eval
        params = dict(p_target=ev.p_target, c_miss=ev.c_miss, c_fa=ev.c_fa)
    try:
        scores: ScoreSet = read_scores(args.scorefile)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.scorefile}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise ConfigError(f"{args.scorefile}: not utf-8 text") from None
    try:
        summary = summarize(scores, **params)
    except ValueError as exc:
        raise Failure(str(exc)) from None
    print(format_metrics(summary), end="")
    return EXIT_OK


def cmd_avg(args) -> int:
    ckpts = []
    for path in args.checkpoints:
        try:
            ckpts.append(Checkpoint.load(path))
        except OSError as exc:
            raise ConfigError(f"cannot read checkpoint {path}: {exc.strerror}") from None
        except CheckpointError as exc:
            raise Failure(f"{path}: {exc}") from None
    for path, c in zip(args.checkpoints, ckpts):
        meta = " ".join(f"{k}={v}" for k, v in sorted(c.metadata.items()))
        print(f"{path}\t{meta}")
    try:
        avg = average_checkpoints(ckpts, sources=[Path(p).name for p in args.checkpoints])
    except CheckpointError as exc:
        raise Failure(str(exc)) from None
    avg.save(args.out)
    print(f"averaged {len(ckpts)} checkpoint(s) into {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nes2net", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="parameter and MAC report")
    p.add_argument("config")
    p.add_argument("--frames", type=_positive, default=200)
    p.add_argument("--format", choices=("table", "tsv"), default="table")
    p.add_argument("--verify", action="store_true",
                   help="fail unless analytic counts equal the built and instrumented model")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=_eps, default=1e-5)
    p.add_argument("--frames", type=_positive, default=16)
    p.add_argument("--max-params", type=_positive, default=MAX_PARAMS)
    p.add_argument("--inject-fault", metavar="OP", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train", help="train on synthetic data")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="write a score file for a trial set")
    p.add_argument("checkpoint")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=SPLITS, default="eval")
    p.add_argument("--features", help=".npz with features, keys, utt_ids[, attacks]")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="metrics of a score file")
    p.add_argument("scorefile")
    p.add_argument("--config", help="take [eval] cost parameters from this config")
    p.add_argument("--p-target", type=float, default=0.05)
    p.add_argument("--c-miss", type=float, default=1.0)
    p.add_argument("--c-fa", type=float, default=10.0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("avg", help="average checkpoints")
    p.add_argument("checkpoints", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_avg)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:          # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ScoreFileError) as exc:
        print(f"nes2net {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (Failure, core.NonFiniteError) as exc:
        print(f"nes2net {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
