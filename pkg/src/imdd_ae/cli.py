"""Command-line front end.

Subcommands: train, evaluate, sweep-distance, sweep-window, grad-check,
param-count. Flags mirror the config-file keys and override them; any
failed invariant exits nonzero.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import baselines, config, training, transceiver


def _load_app(args) -> config.AppConfig:
    app = config.load(args.config) if args.config else config.AppConfig()
    tr = app.train
    ev = app.eval
    overrides = {
        "system": args.system, "distance_km": args.distance,
        "batch": args.batch, "iterations": args.iterations,
        "seed": args.seed, "window": args.window,
        "learning_rate": args.learning_rate,
    }
    for key, val in overrides.items():
        if val is not None:
            tr = replace(tr, **{key: val})
    if getattr(args, "rate", None) is not None:
        M, n = config.rate_point(args.rate)
        tr = replace(tr, M=M, n=n)
    for key, arg in (("sequences", "sequences"),
                     ("window", "eval_window"), ("seed", "eval_seed")):
        val = getattr(args, arg, None)
        if val is not None:
            ev = replace(ev, **{key: val})
    return config.AppConfig(channel=app.channel, train=tr, eval=ev)


def _add_common(p):
    p.add_argument("--config", help="config file (INI sections)")
    p.add_argument("--system", choices=config.SYSTEMS)
    p.add_argument("--rate", type=int, choices=(42, 84),
                   help="information rate point; sets M and n")
    p.add_argument("--distance", type=float, help="fiber length in km")
    p.add_argument("--batch", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--window", type=int, help="processing window (training)")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--sequences", type=int, help="test sequences")
    p.add_argument("--eval-window", type=int, dest="eval_window")
    p.add_argument("--eval-seed", type=int, dest="eval_seed")


def cmd_train(args) -> int:
    app = _load_app(args)
    result = training.train(app, quiet=args.quiet)
    training.save_checkpoint(args.out, result.model, result.train_cfg)
    if args.trace:
        training.write_loss_trace(args.trace, result.record)
    if args.record:
        training.write_run_record(args.record, result.record)
    print(f"trained {app.train.system} at {app.train.distance_km} km "
          f"({app.train.iterations} iterations, "
          f"{result.record.wallclock_s:.1f} s) -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    app = _load_app(args)
    model, tcfg = training.load_checkpoint_model(args.checkpoint)
    if args.distance is not None:
        tcfg = replace(tcfg, distance_km=args.distance)
    res = training.evaluate(model, tcfg, app.eval, app.channel)
    r = res.report
    print(f"system={tcfg.system} distance={tcfg.distance_km} km "
          f"W={app.eval.window} sequences={app.eval.sequences}")
    print(f"BER={r.ber:.6e} BLER={r.bler:.6e} "
          f"({r.bit_errors} bit / {r.block_errors} block errors over "
          f"{r.message_count} messages)")
    if args.out:
        training.write_csv(args.out,
                           [training._csv_row(tcfg, app.eval.window, r,
                                              tcfg.seed)])
    return 0


def cmd_sweep_distance(args) -> int:
    app = _load_app(args)
    distances = [float(d) for d in args.distances.split(",")]
    rows = training.sweep_distance(app, distances, runs=args.runs,
                                   quiet=args.quiet)
    training.write_csv(args.out, rows)
    for row in rows:
        print(f"{row['distance_km']:>8} km  BER {row['ber']}")
    return 0


def cmd_sweep_window(args) -> int:
    app = _load_app(args)
    model, tcfg = training.load_checkpoint_model(args.checkpoint)
    windows = [int(w) for w in args.windows.split(",")]
    rows = training.sweep_window(app, model, tcfg, windows)
    training.write_csv(args.out, rows)
    for row in rows:
        print(f"W={row['W']:>4}  BER {row['ber']}")
    return 0


def cmd_grad_check(args) -> int:
    report = training.grad_check(seed=args.seed if args.seed is not None else 7)
    status = 0
    for path, err in report.items():
        ok = err < 1e-4
        status |= 0 if ok else 1
        print(f"{path:>10}: max relative error {err:.3e} "
              f"{'ok' if ok else 'FAILED (>= 1e-4)'}")
    return status


def cmd_param_count(args) -> int:
    M = args.M
    for n, rate in ((48, 42), (24, 84)):
        counts = {
            "vanilla": transceiver.node_count("vanilla", M, n),
            "lstm-gru": transceiver.node_count("lstm-gru", M, n),
            "ffnn": baselines.ffnn_node_count(M, n),
        }
        g = n // (M.bit_length() - 1)
        for z, layers in ((11, 6), (21, 7), (61, 9)):
            counts[f"pam2 Z={z}"] = baselines.pam2_node_count(z, g, layers)
        print(f"{rate} Gb/s (M={M}, n={n}):")
        for name, c in counts.items():
            print(f"  {name:>10}: {c}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="imdd-ae",
        description="End-to-end learned transceivers over a simulated "
                    "dispersive IM/DD fiber link")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="optimize a transceiver")
    _add_common(p)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--trace", help="loss trace CSV path")
    p.add_argument("--record", help="run-record text path")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="Monte-Carlo error rates")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("sweep-distance", help="train+evaluate per distance")
    _add_common(p)
    p.add_argument("--distances", required=True,
                   help="comma-separated distances in km")
    p.add_argument("--runs", type=int, default=1,
                   help="independent training runs per distance (best kept)")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_sweep_distance)

    p = sub.add_parser("sweep-window", help="evaluate one checkpoint at "
                                            "several inference windows")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--windows", required=True,
                   help="comma-separated window sizes")
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(fn=cmd_sweep_window)

    p = sub.add_parser("grad-check", help="finite-difference gradient audit")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_grad_check)

    p = sub.add_parser("param-count", help="architecture node counts")
    p.add_argument("--M", type=int, default=64)
    p.set_defaults(fn=cmd_param_count)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, training.TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
