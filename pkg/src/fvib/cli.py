"""``fvib`` command line: train, sweep, calibrate, eval, verify.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 a numeric
verification check failed.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import checkpoint as ckpt
from . import config as cfgmod
from . import experiments, verify
from .errors import ConfigError, DataError, DomainError, EmptyInputError, NumericError, ShapeError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_VERIFY = 0, 2, 3, 4


def _on_off(value):
    v = value.lower()
    if v not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return v == "on"


def _eval_section(args):
    cfg = cfgmod.load(args.config) if getattr(args, "config", None) else cfgmod.merge({})
    return cfg["eval"]


def _pick(value, default):
    return default if value is None else value


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def cmd_train(args):
    if not args.config:
        raise ConfigError("train needs --config")
    overrides = {"train": {}, "model": {}}
    if args.seed is not None:
        overrides["train"]["seed"] = args.seed
    if args.ct is not None:
        overrides["model"]["ct"] = args.ct
    if args.beta is not None:
        overrides["model"]["beta"] = args.beta
    cfg = cfgmod.load(args.config, overrides)
    doc, header, rows = experiments.run_train(cfg)
    out = Path(args.out or "fvib-checkpoint.json")
    ckpt.save(doc, out)
    log_path = Path(args.log) if args.log else out.with_suffix(".train.csv")
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with log_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        last = None
        for row in rows:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
            last = row
    print(f"checkpoint: {out}")
    print(f"training log: {log_path}")
    if last is not None:
        print("final: " + ", ".join(f"{k}={v}" for k, v in zip(header, last)))
    return EXIT_OK


def cmd_sweep(args):
    ev = _eval_section(args)
    doc = ckpt.read(args.checkpoint)
    grid = cfgmod.beta_grid(_pick(args.beta_grid, ev["beta_grid"]))
    result = experiments.sweep(doc, grid, _pick(args.samples, ev["samples"]),
                               _pick(args.seed, ev["seed"]), args.ct, ev["bins"],
                               _pick(args.workers, ev["workers"]))
    result.meta["checkpoint"] = ckpt.file_digest(args.checkpoint)[:16]
    text = result.to_csv()
    if args.out:
        _write(args.out, text)
        print(f"sweep: {args.out} ({len(result.rows)} rows)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_calibrate(args):
    ev = _eval_section(args)
    doc = ckpt.read(args.checkpoint)
    methods = [m for m in args.methods.split(",") if m] if args.methods is not None \
        else ["beta0", "discrete", "continuous"]
    baseline = ckpt.read(args.baseline) if args.baseline else None
    grid = cfgmod.beta_grid(_pick(args.beta_grid, ev["beta_grid"]))
    reports = experiments.calibrate(doc, methods, _pick(args.samples, ev["samples"]),
                                    _pick(args.seed, ev["seed"]), ev["bins"], grid, baseline)
    table = experiments.comparison_csv(reports)
    if args.out:
        out = _write(args.out, table)
        _write(out.with_suffix(".json"),
               json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n")
        for r in reports:
            _write(out.with_name(f"{out.stem}.{r.method}.bins.csv"), r.bins_csv())
        print(f"calibration: {out}")
    sys.stdout.write(table)
    return EXIT_OK


def cmd_eval(args):
    ev = _eval_section(args)
    doc = ckpt.read(args.checkpoint)
    rep = experiments.evaluate(doc, args.beta, _pick(args.samples, ev["accuracy_samples"]),
                               _pick(args.seed, ev["seed"]), ev["bins"], args.split)
    text = rep.to_json() + "\n"
    if args.out:
        _write(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args):
    suites = args.suite or None
    checks = verify.run(suites)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="fvib", description="Flexible variational information "
                                "bottleneck: train once, evaluate any beta.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, checkpoint=True):
        sp.add_argument("--config", help="YAML/JSON run config (eval section supplies defaults)")
        if checkpoint:
            sp.add_argument("--checkpoint", required=True)
        sp.add_argument("--samples", type=int, help="Monte-Carlo samples S")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")

    t = sub.add_parser("train", help="train a model and write a checkpoint")
    common(t, checkpoint=False)
    t.add_argument("--ct", type=_on_off, help="confidence tuning stored in the checkpoint")
    t.add_argument("--beta", type=float, help="beta for per-beta baselines (vib, taylor)")
    t.add_argument("--log", help="training-log CSV (default: <out>.train.csv)")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="IB curve over a beta grid from one checkpoint")
    common(s)
    s.add_argument("--beta-grid", help="comma list, or 'standard'")
    s.add_argument("--ct", type=_on_off)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("calibrate", help="compare calibration strategies on the test split")
    common(c)
    c.add_argument("--methods", help=f"comma list from {','.join(experiments.CALIBRATION_METHODS)}")
    c.add_argument("--baseline", help="cross-entropy checkpoint for the 'ts' method")
    c.add_argument("--beta-grid", help="grid for discrete selection")
    c.set_defaults(func=cmd_calibrate)

    e = sub.add_parser("eval", help="accuracy, NLL and ECE of a checkpoint")
    common(e)
    e.add_argument("--beta", type=float)
    e.add_argument("--split", default="test", choices=("train", "val", "test"))
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run the numeric self-check suites")
    v.add_argument("--suite", action="append", choices=sorted(verify.SUITES))
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        problems = getattr(exc, "problems", [str(exc)])
        for msg in problems:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ShapeError, EmptyInputError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
