"""Command-line entry point for campaign stages.

Subcommands map one-to-one onto pipeline stages; ``run-all`` chains them.
Every subcommand accepts ``--config`` (JSON campaign config; built-in
defaults when omitted), ``--out`` (overrides the config's output directory)
and ``--workers``. Exit code is 0 on success and 1 on failure, with the
failing stage named on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import campaign
from .config import CampaignConfig, default_config, load_config


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="campaign config JSON (defaults used if omitted)")
    parser.add_argument("--out", metavar="DIR", help="output directory (overrides config out_dir)")
    parser.add_argument("--workers", type=int, default=1, metavar="N", help="worker count (outputs are worker-independent)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ice", description="Iterative controlled extrapolation campaigns")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, descr in (
        ("gen-landscape", "draw the ground-truth landscape"),
        ("gen-data", "sample the corpus, supervised split, starts, and targets"),
        ("train-scorer", "fit the ridge surrogate scorer and its correlation report"),
        ("gen-pairs", "fit the infill model and synthesize directed edit pairs"),
        ("train-editor", "fit the edit model and the score-conditioned baseline"),
        ("evaluate", "fill oracle columns and write all report CSVs"),
        ("sweep", "run the beam/top-k/iterations grid"),
        ("run-all", "run every stage in order"),
    ):
        p = sub.add_parser(name, help=descr)
        _common(p)

    p = sub.add_parser("infer", help="run inference for one method")
    _common(p)
    p.add_argument("--method", choices=["ice", "sampling", "iter-sampling", "score-cond"], default="ice")
    p.add_argument("--mode", choices=["scorer-free", "scorer-guided"], default="scorer-guided",
                   help="inference mode (only meaningful for --method ice)")
    p.add_argument("--k", type=int, default=None, help="candidates per step for scorer-guided methods")
    p.add_argument("--beam", type=int, default=None, help="beam width for scorer-free inference")
    p.add_argument("--iters", type=int, default=None, help="refinement iterations")
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--seed", type=int, default=None, help="override the master seed for this run")
    return parser


def _resolve(args: argparse.Namespace) -> tuple[CampaignConfig, Path]:
    cfg = load_config(args.config) if args.config else default_config()
    out = Path(args.out) if args.out else Path(cfg.out_dir)
    if args.workers < 1:
        raise ValueError("workers must be >= 1")
    return cfg, out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, out = _resolve(args)
        if args.command == "run-all":
            campaign.run_all(cfg, out, workers=args.workers)
        elif args.command == "gen-landscape":
            campaign._staged("gen-landscape", campaign.stage_gen_landscape, cfg, out)
        elif args.command == "gen-data":
            campaign._staged("gen-data", campaign.stage_gen_data, cfg, out)
        elif args.command == "train-scorer":
            campaign._staged("train-scorer", campaign.stage_train_scorer, cfg, out)
        elif args.command == "gen-pairs":
            campaign._staged("gen-pairs", campaign.stage_gen_pairs, cfg, out)
        elif args.command == "train-editor":
            campaign._staged("train-editor", campaign.stage_train_editor, cfg, out)
        elif args.command == "infer":
            method = args.method if args.method != "ice" else f"ice-{args.mode}"
            campaign._staged(
                "infer",
                campaign.stage_infer,
                cfg,
                out,
                method,
                iters=args.iters,
                beam_width=args.beam,
                top_k=args.k,
                temperature=args.temperature,
                seed=args.seed,
            )
        elif args.command == "evaluate":
            campaign._staged("evaluate", campaign.stage_evaluate, cfg, out)
        elif args.command == "sweep":
            campaign._staged("sweep", campaign.stage_sweep, cfg, out)
        else:  # pragma: no cover
            raise ValueError(f"unhandled command {args.command}")
    except campaign.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
