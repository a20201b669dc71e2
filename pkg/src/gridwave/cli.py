"""Command-line front end.

Exit codes: 0 success, 1 internal error, 2 input-contract violation
(bad flags, malformed files, marker above mask), 3 domain error (no
background pixel in a distance-transform input).
"""

import argparse
import sys

import numpy as np

from .bench import EXPERIMENTS, run_experiment, to_csv, to_json
from .edt import edt, edt_tiled
from .engine import EngineConfig
from .errors import ContractViolation, NoBackgroundError, PgmFormatError
from .grid import Image2D, StructuringElement
from .imgio import gen_marker, read_pgm, write_f32_raw, write_pgm
from .recon import (
    ReconInput,
    recon_fh,
    recon_parallel,
    recon_qb,
    recon_sr,
    recon_tiled,
)
from .tiles import PipelineConfig
from .verify import SUITES, run_suites
from .wqueue import QueueConfig, QueueStrategy

_STRATEGIES = {
    "naive": QueueStrategy.NAIVE,
    "prefix": QueueStrategy.PREFIX_SUM,
    "perworker": QueueStrategy.PER_WORKER,
}


def _parse_dims(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    try:
        w, h = (int(p) for p in parts)
    except ValueError:
        raise ContractViolation(f"expected WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise ContractViolation(f"dimensions must be >= 1, got {text!r}")
    return w, h


def _queue_config(args) -> QueueConfig:
    cap = None if args.gbq_capacity == "auto" else int(args.gbq_capacity)
    return QueueConfig(strategy=_STRATEGIES[args.queue], gbq_capacity=cap)


def _as_binary(img: Image2D) -> Image2D:
    """Accept a stored two-level image whatever maxval it was written
    with; anything with intermediate values is not a mask."""
    if img.elem_kind == "binary":
        return img
    vals = np.unique(img.data)
    if not np.isin(vals, (0, 255)).all():
        raise ContractViolation("input is not two-level; cannot use as mask")
    return Image2D(img.width, img.height, "binary", img.data.astype(np.uint8))


def cmd_recon(args) -> int:
    mask = read_pgm(args.mask)
    if args.marker is not None:
        marker = read_pgm(args.marker)
    else:
        marker = gen_marker(mask, args.auto_marker)
    inp = ReconInput(marker, mask, StructuringElement(args.conn))
    if args.algo == "sr":
        out = recon_sr(inp)
    elif args.algo == "qb":
        out = recon_qb(inp)
    elif args.algo == "fh":
        out = recon_fh(inp)
    elif args.algo == "parallel":
        out = recon_parallel(
            inp, EngineConfig(n_workers=args.workers, queue=_queue_config(args))
        )
    else:
        out = recon_tiled(
            inp, _parse_dims(args.tile), PipelineConfig(n_workers=args.workers)
        )
    write_pgm(out, args.out)
    return 0


def cmd_edt(args) -> int:
    mask = _as_binary(read_pgm(args.input))
    se = StructuringElement(args.conn)
    if args.mode == "tiled":
        _, dist = edt_tiled(
            mask, se, _parse_dims(args.tile), PipelineConfig(n_workers=args.workers)
        )
    else:
        mode = "sequential" if args.mode == "seq" else "parallel"
        cfg = EngineConfig(n_workers=args.workers, queue=_queue_config(args))
        _, dist = edt(mask, se, mode=mode, cfg=cfg)
    if args.out.endswith(".f32"):
        write_f32_raw(dist, args.out)
    else:
        # quantized view: nearest integer, saturating at the u8 ceiling
        q = np.minimum(np.rint(dist.data), 255).astype(np.uint8)
        write_pgm(Image2D(dist.width, dist.height, "u8", q), args.out)
    return 0


def cmd_verify(args) -> int:
    results = run_suites(args.suite, args.cases, args.seed, _parse_dims(args.size))
    for r in results:
        print(r.line())
    return 0 if all(r.ok for r in results) else 1


def cmd_bench(args) -> int:
    reports = run_experiment(
        args.experiment, _parse_dims(args.size), args.seed, args.workers
    )
    sys.stdout.write(to_csv(reports))
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(to_csv(reports))
    if args.json:
        with open(args.json, "w") as f:
            f.write(to_json(reports))
    return 0


def _add_engine_flags(p: argparse.ArgumentParser):
    p.add_argument("--conn", type=int, choices=(4, 8), default=8)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tile", default="64x64", help="tile dims as WxH")
    p.add_argument("--queue", choices=sorted(_STRATEGIES), default="perworker")
    p.add_argument("--gbq-capacity", default="auto",
                   help="global queue capacity, or 'auto'")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gridwave",
        description="Wavefront propagation on 2-D grids.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recon", help="morphological reconstruction")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--marker", help="marker PGM path")
    src.add_argument("--auto-marker", type=int, metavar="H",
                     help="derive the marker as max(mask - H, 0)")
    p.add_argument("--mask", required=True, help="mask PGM path")
    p.add_argument("--out", required=True, help="output PGM path")
    p.add_argument("--algo", choices=("sr", "qb", "fh", "parallel", "tiled"),
                   default="fh")
    _add_engine_flags(p)
    p.set_defaults(fn=cmd_recon)

    p = sub.add_parser("edt", help="euclidean distance transform")
    p.add_argument("--input", required=True, help="two-level PGM path")
    p.add_argument("--out", required=True,
                   help="output path: .f32 raw, anything else quantized PGM")
    p.add_argument("--mode", choices=("seq", "parallel", "tiled"), default="seq")
    _add_engine_flags(p)
    p.set_defaults(fn=cmd_edt)

    p = sub.add_parser("verify", help="randomized oracle suites")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--cases", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", default="64x64")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", help="benchmark experiments")
    p.add_argument("--experiment", choices=sorted(EXPERIMENTS), required=True)
    p.add_argument("--size", default="512x512")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--csv", help="also write the CSV here")
    p.add_argument("--json", help="also write the JSON here")
    p.set_defaults(fn=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ContractViolation, PgmFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NoBackgroundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - the CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
