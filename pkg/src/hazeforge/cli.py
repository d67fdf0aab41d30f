"""Batch command line: ``hazeforge {dehaze,synthesize,train,eval,fixtures}``.

Exit status: 0 success, 1 some items failed, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from hazeforge import dataset, imgcore, metrics
from hazeforge.dcp import DcpConfig, dehaze_dcp
from hazeforge.mlr import DIRECTIONS, RegressionParams, TrainConfig, dehaze_mldcp, train
from hazeforge.synth import HazeSpec, synthesize

log = logging.getLogger("hazeforge")

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}
DEFAULT_ATMOSPHERE = (0.9, 0.9, 0.9)


class UsageError(Exception):
    pass


# -- argument types ----------------------------------------------------------


def _typed(conv, check, msg):
    def parse(text):
        try:
            v = conv(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}")
        if not check(v):
            raise argparse.ArgumentTypeError(f"{text} {msg}")
        return v

    return parse


positive_float = _typed(float, lambda v: v > 0, "must be > 0")
positive_int = _typed(int, lambda v: v >= 1, "must be >= 1")
odd_int = _typed(int, lambda v: v >= 1 and v % 2 == 1, "must be an odd integer >= 1")
unit_float = _typed(float, lambda v: 0 <= v <= 1, "must lie in [0, 1]")
open_unit_float = _typed(float, lambda v: 0 < v < 1, "must lie in (0, 1)")
density_float = _typed(float, lambda v: 0 <= v < 1, "must lie in [0, 1)")


def _default_jobs() -> int:
    env = os.environ.get("HAZEFORGE_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _add_dcp_flags(p: argparse.ArgumentParser) -> None:
    d = DcpConfig()
    g = p.add_argument_group("dark channel prior")
    g.add_argument("--patch", type=odd_int, default=d.patch)
    g.add_argument("--omega", type=unit_float, default=d.omega)
    g.add_argument("--t0", type=open_unit_float, default=d.t0)
    g.add_argument("--no-refine", dest="refine", action="store_false",
                   help="skip guided-filter refinement of the transmission")
    g.add_argument("--guided-radius", type=positive_int, default=d.guided_radius)
    g.add_argument("--guided-eps", type=positive_float, default=d.guided_eps)
    g.add_argument("--bright-fraction", type=open_unit_float, default=d.bright_fraction)
    g.add_argument("--average-atmosphere", action="store_true",
                   help="average the airlight candidates instead of taking the brightest")


def _dcp_config(args) -> DcpConfig:
    return DcpConfig(
        patch=args.patch,
        omega=args.omega,
        t0=args.t0,
        refine=args.refine,
        guided_radius=args.guided_radius,
        guided_eps=args.guided_eps,
        bright_fraction=args.bright_fraction,
        average_atmosphere=args.average_atmosphere,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hazeforge", description="Dark channel prior dehazing, regression refinement and haze synthesis.")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--jobs", type=positive_int, default=None,
                        help="worker threads (default: $HAZEFORGE_JOBS or CPU count)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dehaze", help="remove haze with DCP or trained MLDCP weights")
    p.add_argument("input", type=Path, help="image file or directory")
    p.add_argument("output", type=Path, help="output directory")
    p.add_argument("--params", type=Path,
                   help="dehaze-direction params JSON (enables MLDCP); "
                        "its embedded DCP config overrides the DCP flags")
    p.add_argument("--dump-intermediates", action="store_true",
                   help="also write transmission and dark-channel rasters")
    _add_dcp_flags(p)
    p.set_defaults(func=cmd_dehaze)

    p = sub.add_parser("synthesize", help="add uniform synthetic haze")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--density", type=density_float, required=True)
    p.add_argument("--params", type=Path, help="synth-direction params JSON")
    atm = p.add_mutually_exclusive_group()
    atm.add_argument("--atmosphere", type=unit_float, nargs=3, metavar=("R", "G", "B"),
                     default=DEFAULT_ATMOSPHERE)
    atm.add_argument("--estimate-atmosphere", action="store_true",
                     help="estimate airlight from each clean image instead")
    _add_dcp_flags(p)
    p.set_defaults(func=cmd_synthesize)

    t = TrainConfig()
    p = sub.add_parser("train", help="fit regression weights on a paired manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--direction", choices=DIRECTIONS, default="dehaze")
    p.add_argument("--out", type=Path, required=True, help="params JSON to write")
    p.add_argument("--report", type=Path, help="per-epoch JSON lines (default: <out>.jsonl)")
    p.add_argument("--lr", type=positive_float, default=t.learning_rate)
    p.add_argument("--epochs", type=positive_int, default=t.epochs)
    p.add_argument("--batch", type=positive_int, default=None,
                   help="pixels per SGD step (default: one whole image)")
    p.add_argument("--seed", type=int, default=t.seed)
    p.add_argument("--raw-t", dest="use_refined_t", action="store_false",
                   help="train on unrefined transmission")
    p.add_argument("--no-shuffle", dest="shuffle", action="store_false")
    _add_dcp_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="PSNR/SSIM of restored hazy images against clean ones")
    p.add_argument("manifest", type=Path)
    p.add_argument("--params", type=Path)
    p.add_argument("--restorer", choices=("none", "dcp", "mldcp"), default=None,
                   help="default: mldcp with --params, otherwise dcp")
    p.add_argument("--report-out", type=Path, required=True,
                   help="CSV path; the JSON summary goes next to it")
    _add_dcp_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fixtures", help="render a deterministic desk-scale dataset")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--count", type=positive_int, default=20)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_fixtures)
    return parser


# -- helpers -----------------------------------------------------------------


def _collect_inputs(path: Path) -> list[Path]:
    if not path.exists():
        raise UsageError(f"input {path} does not exist")
    if path.is_dir():
        files = sorted(p for p in path.iterdir()
                       if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise UsageError(f"no PNG/JPEG images in {path}")
        return files
    return [path]


def _load_params(path: Path, direction: str) -> RegressionParams:
    try:
        params = RegressionParams.load(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read params {path}: {exc}")
    if params.direction != direction:
        raise UsageError(
            f"params {path} are for direction {params.direction!r}, need {direction!r}"
        )
    return params


def _run_each(func, items, jobs: int) -> int:
    """Apply ``func`` to every item, report failures, return the exit status."""

    def guarded(item):
        try:
            func(item)
            return None
        except (OSError, ValueError) as exc:
            return f"{item}: {exc}"

    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            errors = list(pool.map(guarded, items))
    else:
        errors = [guarded(i) for i in items]
    errors = [e for e in errors if e]
    for e in errors:
        print(f"failed: {e}", file=sys.stderr)
    return 1 if errors else 0


# -- subcommands ---------------------------------------------------------------


def cmd_dehaze(args) -> int:
    inputs = _collect_inputs(args.input)
    params = _load_params(args.params, "dehaze") if args.params else None
    cfg = _dcp_config(args)
    args.output.mkdir(parents=True, exist_ok=True)

    def one(path: Path):
        img = imgcore.load_image(path)
        res = dehaze_mldcp(img, params) if params else dehaze_dcp(img, cfg)
        imgcore.save_image(res.image, args.output / f"{path.stem}.png")
        if args.dump_intermediates:
            imgcore.save_field(res.transmission, args.output / f"{path.stem}_transmission.png")
            imgcore.save_field(res.dark, args.output / f"{path.stem}_dark.png")

    return _run_each(one, inputs, args.jobs)


def cmd_synthesize(args) -> int:
    inputs = _collect_inputs(args.input)
    params = _load_params(args.params, "synth") if args.params else None
    override = None if args.estimate_atmosphere else tuple(args.atmosphere)
    try:
        spec = HazeSpec(args.density, atmosphere_override=override, params=params)
    except ValueError as exc:
        raise UsageError(str(exc))
    cfg = _dcp_config(args)
    args.output.mkdir(parents=True, exist_ok=True)

    def one(path: Path):
        hazy = synthesize(imgcore.load_image(path), spec, cfg)
        imgcore.save_image(hazy, args.output / f"{path.stem}.png")

    return _run_each(one, inputs, args.jobs)


def _read_manifest(path: Path) -> dataset.DatasetManifest:
    if not path.is_file():
        raise UsageError(f"manifest {path} does not exist")
    try:
        return dataset.load_manifest(path)
    except ValueError as exc:
        raise UsageError(str(exc))


def cmd_train(args) -> int:
    manifest = _read_manifest(args.manifest)
    if not len(manifest):
        raise UsageError(f"manifest {args.manifest} has no rows")
    missing = [r for r in manifest if r.hazy_path is None]
    if missing:
        raise UsageError(f"{len(missing)} manifest rows lack a hazy_path")
    cfg = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch=args.batch,
        seed=args.seed,
        use_refined_t=args.use_refined_t,
        shuffle=args.shuffle,
    )
    try:
        params, report = train(manifest.rows, args.direction, _dcp_config(args), cfg, args.jobs)
    except RuntimeError as exc:
        print(f"hazeforge train: {exc}", file=sys.stderr)
        return 1
    params.save(args.out)
    report.save(args.report or args.out.with_suffix(".jsonl"))
    for path, msg in report.failures:
        print(f"failed: {path}: {msg}", file=sys.stderr)
    print(f"final mean loss {report.losses[-1]:.6g}")
    return 1 if report.failures else 0


def cmd_eval(args) -> int:
    manifest = _read_manifest(args.manifest)
    restorer = args.restorer or ("mldcp" if args.params else "dcp")
    if restorer == "mldcp":
        if not args.params:
            raise UsageError("--restorer mldcp needs --params")
        params = _load_params(args.params, "dehaze")
        fn = lambda img: dehaze_mldcp(img, params).image  # noqa: E731
    elif restorer == "dcp":
        cfg = _dcp_config(args)
        fn = lambda img: dehaze_dcp(img, cfg).image  # noqa: E731
    else:
        fn = metrics.identity_restorer
    report = metrics.evaluate_pairs(manifest, fn, args.jobs)
    args.report_out.parent.mkdir(parents=True, exist_ok=True)
    report.write_csv(args.report_out)
    report.write_summary(args.report_out.with_suffix(".json"))
    s = report.summary()
    print(f"{restorer}: pairs {s['pairs']} failures {s['failures']} "
          f"mean PSNR {s['mean_psnr']} dB mean SSIM {s['mean_ssim']}")
    return 1 if report.failures else 0


def cmd_fixtures(args) -> int:
    manifest = dataset.make_fixtures(args.out_dir, args.count, args.seed)
    print(f"wrote {len(manifest)} pairs to {args.out_dir / 'manifest.csv'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs is None:
        args.jobs = _default_jobs()
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hazeforge {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
