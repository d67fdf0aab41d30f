#!/usr/bin/env python3
"""Average PSNR/SSIM table (hazy input vs DCP vs MLDCP) on a paired manifest.

Point it at a manifest of SOTS-outdoor pairs (clean ground truth, hazy
input) and either trained dehaze params or a training manifest::

    python scripts/sots_table.py sots_outdoor.csv --params mldcp.json
    python scripts/sots_table.py sots_outdoor.csv --train-manifest ots.csv

Each row is produced by ``hazeforge eval`` with the matching restorer; the
per-pair CSVs and JSON summaries are left in ``--out-dir``.
"""

import argparse
import json
import sys
from pathlib import Path

from hazeforge import cli


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("manifest", type=Path, help="evaluation manifest (clean,hazy pairs)")
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--params", type=Path, help="trained dehaze-direction params JSON")
    src.add_argument("--train-manifest", type=Path, help="train MLDCP on this manifest first")
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out-dir", type=Path, default=Path("sots_reports"))
    ap.add_argument("--jobs", type=int, default=None)
    args = ap.parse_args(argv)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    jobs = ["--jobs", str(args.jobs)] if args.jobs else []
    params = args.params
    if params is None:
        params = args.out_dir / "mldcp_params.json"
        status = cli.main(jobs + ["train", str(args.train_manifest), "--out", str(params),
                                  "--epochs", str(args.epochs), "--lr", str(args.lr),
                                  "--seed", str(args.seed)])
        if status != 0:
            return status

    rows = []
    for label, restorer in (("Hazy input", "none"), ("DCP", "dcp"), ("MLDCP", "mldcp")):
        report = args.out_dir / f"{restorer}.csv"
        argv = jobs + ["eval", str(args.manifest), "--restorer", restorer,
                       "--report-out", str(report)]
        if restorer == "mldcp":
            argv += ["--params", str(params)]
        status = cli.main(argv)
        if status == 2:
            return status
        rows.append((label, json.loads(report.with_suffix(".json").read_text())))

    print()
    print(f"{'Method':<12} {'PSNR (dB)':>10} {'SSIM':>8} {'pairs':>6}")
    for label, s in rows:
        psnr = "inf" if s["mean_psnr"] is None else f"{s['mean_psnr']:.2f}"
        ssim = "n/a" if s["mean_ssim"] is None else f"{s['mean_ssim']:.4f}"
        print(f"{label:<12} {psnr:>10} {ssim:>8} {s['pairs']:>6}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
