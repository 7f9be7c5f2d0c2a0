"""Command-line entry point: ``mdsampling {synth,train,eval,bench,mc-stats}``."""
import argparse
import json
import logging
from dataclasses import replace
from pathlib import Path
import sys

from .harness.config import METHODS, ExperimentConfig, load_config
from .harness.data import make_sequence, TEST
from .harness.evaluation import REFERENCE_MS, run_evaluation, run_timing_bench
from .harness.metrics import emit_metrics
from .harness.training import run_training
from .neural.checkpoint import load_checkpoint
from .synth_channel import save_trace

log = logging.getLogger("mdsampling")


def _config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    if getattr(args, "method", None):
        methods = tuple(m.strip() for m in args.method.split(",") if m.strip())
        bad = set(methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods: {', '.join(sorted(bad))}")
        cfg = replace(cfg, methods=methods)
    if getattr(args, "sample_actions", False):
        cfg = replace(cfg, greedy_eval=False)
    return cfg


def _policy(cfg, args):
    if "ppo" not in cfg.methods:
        return None
    path = Path(args.checkpoint) if args.checkpoint else Path(cfg.out_dir) / cfg.tag / "policy.ckpt"
    return load_checkpoint(path, expected="policy")


def cmd_synth(cfg, args):
    out = Path(cfg.out_dir) / "traces"
    out.mkdir(parents=True, exist_ok=True)
    for s in range(args.sequences):
        seq = make_sequence(cfg, TEST, s, args.windows or cfg.test_windows)
        save_trace(seq, out / f"seq{s:03d}.csv")
    print(f"wrote {args.sequences} traces to {out}")


def cmd_train(cfg, args):
    out = Path(cfg.out_dir) / cfg.tag
    run_training(cfg, out)
    print(f"checkpoints and learning curve in {out}")


def cmd_eval(cfg, args):
    policy = _policy(cfg, args)
    csv_path, json_path = emit_metrics(run_evaluation(cfg, policy), Path(cfg.out_dir) / cfg.tag)
    print(f"wrote {csv_path} and {json_path}")


def cmd_bench(cfg, args):
    policy = _policy(cfg, args)
    medians = run_timing_bench(cfg, policy, calls=args.calls)
    out = Path(cfg.out_dir) / cfg.tag
    out.mkdir(parents=True, exist_ok=True)
    report = {m: {"median_ms_per_sample": v, "reference_ms": REFERENCE_MS.get(m)}
              for m, v in medians.items()}
    (out / "timing.json").write_text(json.dumps(report, indent=2))
    for m, v in medians.items():
        print(f"{m:8s} {v:10.4f} ms/sample   (reference {REFERENCE_MS[m]} ms)")


def cmd_mc_stats(cfg, args):
    methods = tuple(m for m in cfg.methods if m != "ppo" or args.checkpoint)
    cfg = replace(cfg, methods=methods)
    policy = _policy(cfg, args)
    csv_path, json_path = emit_metrics(run_evaluation(cfg, policy), Path(cfg.out_dir) / cfg.tag, stem="mc")
    summary = json.loads(json_path.read_text())
    for tag, by_method in summary.items():
        for m, s in by_method.items():
            mc = s["mc"]
            print(f"{tag} {m:8s} MC p25={mc['p25']:.4f} p50={mc['p50']:.4f} p75={mc['p75']:.4f}")


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval, "bench": cmd_bench,
            "mc-stats": cmd_mc_stats}


def build_parser():
    parser = argparse.ArgumentParser(prog="mdsampling", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        if name in ("eval", "bench", "mc-stats"):
            p.add_argument("--method", help=f"comma-separated subset of {','.join(METHODS)}")
            p.add_argument("--checkpoint", help="policy checkpoint (default: <out>/<tag>/policy.ckpt)")
        if name == "eval":
            p.add_argument("--sample-actions", action="store_true",
                           help="sample PPO actions instead of taking the argmax")
        if name == "synth":
            p.add_argument("--sequences", type=int, default=1)
            p.add_argument("--windows", type=int)
        if name == "bench":
            p.add_argument("--calls", type=int, default=1000)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        COMMANDS[args.command](cfg, args)
    except Exception as exc:  # one-line diagnostic for every failure
        print(f"mdsampling {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
