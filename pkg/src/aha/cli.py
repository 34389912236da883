"""Command-line entry point: pretrain, eval, sweep, report, selftest, synth.

Exit codes: 0 success, 1 internal failure, 2 bad configuration or arguments,
3 missing inputs (dataset, checkpoint, or empty results).  The dataset root
resolves as --data flag, then AHA_DATA_DIR, then the config file.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_BAD_CONFIG = 2
EXIT_MISSING_INPUT = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aha",
        description="One-shot memory benchmark: pretrain the vision component, "
                    "evaluate episodes, sweep corruption grids, render reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=False):
        p.add_argument("--config", type=Path, default=None,
                       help="JSON config file (defaults apply when omitted)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the base seed")
        p.add_argument("--data", type=Path, default=None,
                       help="dataset root (fallback: AHA_DATA_DIR, then config)")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (default from config)")
        if checkpoint:
            p.add_argument("--checkpoint", type=Path, default=None,
                           help="pretrained checkpoint path (default <out>/ltm.ckpt)")

    p = sub.add_parser("pretrain", help="train the vision component, write a checkpoint")
    common(p)

    p = sub.add_parser("eval", help="run a single study/recall evaluation")
    common(p, checkpoint=True)
    p.add_argument("--task", choices=("classification", "instance"), default="classification")
    p.add_argument("--kind", choices=("none", "occlusion", "noise"), default="none")
    p.add_argument("--level", type=float, default=0.0)
    p.add_argument("--run", type=int, default=0, help="run index within the panel")
    p.add_argument("--eval-seed", type=int, default=0, help="evaluation seed index")

    p = sub.add_parser("sweep", help="evaluate the full task x corruption grid")
    common(p, checkpoint=True)
    p.add_argument("--fast", action="store_true", help="CI profile: 5 runs, 3 seeds, 5 levels")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("report", help="aggregate a results CSV and render SVG charts")
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("selftest", help="run the invariant suites (no pretraining)")
    p.add_argument("--suite", action="append", default=None,
                   help="restrict to a suite (repeatable)")

    p = sub.add_parser("synth", help="generate the procedural glyph corpus")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--small", action="store_true",
                   help="tiny corpus for smoke tests instead of the full layout")
    return parser


def _load_config(args):
    from .config import Config, load_config

    cfg = load_config(args.config) if args.config else Config()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, sweep=replace(cfg.sweep, base_seed=args.seed))
    return cfg


def _resolve_data_root(args, cfg) -> Path:
    candidates = [getattr(args, "data", None), os.environ.get("AHA_DATA_DIR"),
                  cfg.dataset.root]
    for c in candidates:
        if c:
            return Path(c)
    raise FileNotFoundError(
        "no dataset root: pass --data, set AHA_DATA_DIR, or set dataset.root")


def _out_dir(args, cfg) -> Path:
    out = args.out if getattr(args, "out", None) else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg, out: Path) -> None:
    from .config import save_config

    save_config(cfg, out / "config.json")


def _cmd_pretrain(args) -> int:
    from .config import save_config
    from .dataset import load_omniglot
    from .ltm import pretrain

    cfg = _load_config(args)
    root = _resolve_data_root(args, cfg)
    out = _out_dir(args, cfg)
    ds = load_omniglot(root, cfg.dataset.image_size)
    print(f"pretraining on {len(ds.background.images)} background images "
          f"({ds.background.n_classes} classes)")
    ltm = pretrain(ds.background.images, cfg.ltm, seed=cfg.sweep.base_seed,
                   image_size=cfg.dataset.image_size, log=print)
    ckpt = out / "ltm.ckpt"
    ltm.save(ckpt)
    _echo_config(cfg, out)
    print(f"checkpoint written: {ckpt}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .dataset import CorruptionSpec, load_omniglot
    from .harness import RunProvider, evaluate_run
    from .ltm import VisionLtm

    cfg = _load_config(args)
    root = _resolve_data_root(args, cfg)
    out = _out_dir(args, cfg)
    ckpt = args.checkpoint or out / "ltm.ckpt"
    if not Path(ckpt).exists():
        raise FileNotFoundError(f"missing checkpoint: {ckpt}")
    ltm = VisionLtm.load(ckpt)
    ds = load_omniglot(root, cfg.dataset.image_size)
    provider = RunProvider(ds, cfg.sweep.base_seed, cfg.dataset.runs_dir)
    run = provider.get(args.task, args.run)
    spec = CorruptionSpec(kind=args.kind, level=args.level, seed=args.eval_seed)
    result = evaluate_run(ltm, run, spec, task=args.task, seed=args.eval_seed,
                          run_idx=args.run, base_seed=cfg.sweep.base_seed,
                          aha_config=cfg.aha, fastnn_config=cfg.fastnn)
    print(f"task={result.task} kind={result.kind} level={result.level} "
          f"seed={result.seed} run={result.run}")
    for signal, acc in result.accuracy.items():
        print(f"  {signal:8s} accuracy {acc:.3f}")
    for model, loss in result.recall_loss.items():
        shown = "n/a" if loss is None else f"{loss:.5f}"
        print(f"  {model:8s} recall loss {shown}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .config import apply_fast_profile
    from .harness import sweep

    cfg = _load_config(args)
    if args.fast:
        cfg = apply_fast_profile(cfg)
    root = _resolve_data_root(args, cfg)
    out = _out_dir(args, cfg)
    ckpt = args.checkpoint or out / "ltm.ckpt"
    _echo_config(cfg, out)
    path = sweep(ckpt, root, cfg.sweep, out, aha_config=cfg.aha,
                 fastnn_config=cfg.fastnn, workers=args.workers,
                 runs_dir=cfg.dataset.runs_dir,
                 image_size=cfg.dataset.image_size, log=print)
    print(f"results written: {path}")
    return EXIT_OK


def _cmd_report(args) -> int:
    from .report import write_report

    if not args.results.exists():
        raise FileNotFoundError(f"missing results file: {args.results}")
    try:
        written = write_report(args.results, args.out)
    except ValueError as exc:
        if "no results" in str(exc):
            raise FileNotFoundError(str(exc)) from exc
        raise
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    ok = run_selftest(emit=print, suites=args.suite)
    return EXIT_OK if ok else EXIT_INTERNAL


def _cmd_synth(args) -> int:
    from .synthglyphs import GlyphCorpusSpec, generate_corpus, small_test_spec

    spec = small_test_spec(args.seed) if args.small else GlyphCorpusSpec(seed=args.seed)
    generate_corpus(args.out, spec)
    print(f"corpus ready at {args.out}")
    return EXIT_OK


_COMMANDS = {
    "pretrain": _cmd_pretrain,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
    "selftest": _cmd_selftest,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    from .config import ConfigError
    from .dataset import DatasetError

    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except (FileNotFoundError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except Exception as exc:  # noqa: BLE001 - map anything else to exit 1
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
