"""Command-line entry point: ``tsmot run|sweep|evaluate|throughput``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import experiment as exp
from .metrics import evaluate
from .motfile import MotFormatError, load_mot_ground_truth, load_mot_results
from .scheduler import simulated_throughput

log = logging.getLogger("tsmot")


def _k_list(text: str) -> list[int]:
    """Parse ``2,4,6`` or a range ``2-12``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty K list")
    return out


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="experiment JSON (default: shipped benchmark-default.json)")
    p.add_argument("--out", type=Path, help="output directory (overrides the config's 'output')")
    p.add_argument("--seed", type=int, action="append", help="run only this seed (repeatable)")
    p.add_argument("--policy", action="append", help="run only this policy (repeatable)")
    p.add_argument("--gt", type=Path, help="MOTChallenge ground-truth file replacing the synthetic world")
    p.add_argument("--alignment", choices=["off", "on", "efm"], help="cross-model feature alignment")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes (0 = all CPUs)")
    p.add_argument("--quiet", action="store_true", help="only report errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsmot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the (policy, K, seed) grid and write results.csv + summary.json")
    _common(run)
    run.add_argument("--k", type=int, action="append", help="run only this K (repeatable)")
    run.add_argument("--save-tracks", action="store_true",
                     help="also write per-run MOTChallenge result files with timing sidecars")

    sweep = sub.add_parser("sweep", help="mean MOTA and simulated FPS per (policy, K)")
    _common(sweep)
    sweep.add_argument("--ks", type=_k_list, default=list(range(2, 13)), help="K values, e.g. 2-12 or 2,4,6")

    ev = sub.add_parser("evaluate", help="score a MOTChallenge result file against ground truth")
    ev.add_argument("--gt", type=Path, required=True)
    ev.add_argument("--hyp", type=Path, required=True)
    ev.add_argument("--iou", type=float, default=0.5)

    tp = sub.add_parser("throughput", help="amortized frames/second of a K-interleaved schedule")
    tp.add_argument("--teacher-ms", type=float, required=True)
    tp.add_argument("--student-ms", type=float, required=True)
    tp.add_argument("--k", type=int, required=True)
    return parser


def _resolve_config(args) -> exp.ExperimentConfig:
    cfg = exp.load_config(args.config)
    changes = {}
    if args.seed:
        changes["seeds"] = args.seed
    if args.policy:
        changes["policies"] = args.policy
    if getattr(args, "k", None):
        changes["K_values"] = args.k
    if args.gt:
        changes["gt_path"] = str(args.gt)
    if args.alignment:
        changes["alignment"] = args.alignment
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        if args.command == "throughput":
            print(f"{simulated_throughput(args.teacher_ms, args.student_ms, args.k):.4f}")
            return 0
        if args.command == "evaluate":
            gt = load_mot_ground_truth(args.gt.read_text())
            hyp = load_mot_results(args.hyp.read_text(), n_frames=len(gt))
            rep = evaluate(gt, hyp, args.iou)
            print(f"MOTA={rep.mota:.6f} IDF1={rep.idf1:.6f} FP={rep.fp} FN={rep.fn} "
                  f"IDSW={rep.idsw} GT={rep.gt_total}")
            return 0
        cfg = _resolve_config(args)
        jobs = exp.default_jobs() if args.jobs == 0 else args.jobs
        out_dir = args.out if args.out is not None else Path(cfg.output)
        if args.command == "run":
            paths = exp.run_experiment(cfg, out_dir, jobs=jobs, save_tracks=args.save_tracks)
            log.info("wrote %s and %s", paths["csv"], paths["summary"])
        else:
            rows = exp.sweep_k(cfg, args.ks, out_dir, jobs=jobs)
            for r in rows:
                log.info("%-17s K=%-2d MOTA=%.4f FPS=%.2f", r["policy"], r["K"], r["MOTA"], r["FPS_sim"])
            log.info("wrote %s", out_dir / "sweep.csv")
        return 0
    except exp.ConfigError as exc:
        print(f"tsmot: config error: {exc}", file=sys.stderr)
        return 2
    except (MotFormatError, OSError, ValueError) as exc:
        print(f"tsmot: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
