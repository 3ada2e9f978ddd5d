"""Command-line entry point: ``ddir {deblur,phase-ct,compare,estimate-q}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments

log = logging.getLogger("ddir")


def _levels(text):
    try:
        return tuple(float(s) for s in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad noise level list {text!r}") from exc


def _names(text):
    return tuple(s for s in text.replace(",", " ").split() if s)


def _common(p):
    p.add_argument("--config", type=Path, help="INI file of key = value settings")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--small", action="store_true", default=None,
                   help="halve image sides for quick runs")
    p.add_argument("-v", "--verbose", action="store_true")


def _experiment(p):
    p.add_argument("--noise-levels", type=_levels, help="relative noise levels, e.g. 0.005,0.001")
    p.add_argument("--denoisers", type=_names, help="median, tv-prox or identity; comma separated")
    p.add_argument("--phantom", help="shepp-logan, binary-blobs, flat, impulse or an image path")
    p.add_argument("--side", type=int)
    p.add_argument("--max-iters", type=int)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ddir", description="Denoiser-driven iterative regularisation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("deblur", help="Gaussian-blur deblurring")
    _common(p)
    _experiment(p)
    p.add_argument("--sigma", type=float, help="blur width (default 1.5)")

    p = sub.add_parser("phase-ct", help="phase-retrieval tomography")
    _common(p)
    _experiment(p)
    p.add_argument("--num-angles", type=int)
    p.add_argument("--zeta", type=float)

    p = sub.add_parser("compare", help="Wiener vs PnP-FBS vs DDIR on shared data")
    _common(p)
    _experiment(p)
    p.add_argument("--sigma", type=float)
    p.add_argument("--nsr", dest="wiener_nsr", type=float,
                   help="Wiener noise-to-signal ratio (default delta^2/||v||^2)")

    p = sub.add_parser("estimate-q", help="empirical contraction constant of a denoiser")
    _common(p)
    p.add_argument("--denoiser", default="tv-prox", choices=["median", "tv-prox", "identity"])
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--side", type=int, default=64)
    return parser


def _config(args, problem):
    overrides = {k: getattr(args, k, None) for k in
                 ("seed", "small", "noise_levels", "denoisers", "phantom", "side", "max_iters",
                  "sigma", "num_angles", "zeta", "wiener_nsr")}
    overrides["problem"] = problem
    if args.config is None and problem == "phase-ct" and args.phantom is None:
        overrides["phantom"] = "binary-blobs"
    return experiments.load_config(args.config, **overrides)


def _print_rows(rows, stream):
    cols = ["cell", "k_dp", "termination", "re", "psnr", "ssim"]
    print("  ".join(f"{c:>21}" for c in cols), file=stream)
    for row in rows:
        vals = []
        for c in cols:
            v = row.get(c, "")
            vals.append(f"{v:>21.4f}" if isinstance(v, float) else f"{v!s:>21}")
        print("  ".join(vals), file=stream)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "estimate-q":
            cfg = experiments.load_config(args.config) if args.config else None
            side = args.side // 2 if args.small else args.side
            rep = experiments.run_estimate_q(args.denoiser, args.pairs, side,
                                             args.seed if args.seed is not None else 0, cfg)
            text = "\n".join(rep.lines()) + "\n"
            sys.stdout.write(text)
            if args.out is not None:
                args.out.mkdir(parents=True, exist_ok=True)
                (args.out / "estimate_q.txt").write_text(text, encoding="utf-8")
            if not rep.contractive:
                print(f"error: q = {rep.q:.6f} >= 1, denoiser is not contractive", file=sys.stderr)
                return 1
            return 0
        problem = "phase-ct" if args.command == "phase-ct" else "deblur"
        cfg = _config(args, problem)
        runner = {"deblur": experiments.run_deblur, "phase-ct": experiments.run_phase_ct,
                  "compare": experiments.run_compare}[args.command]
        rows = runner(cfg, args.out)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_rows(rows, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
