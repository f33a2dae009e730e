"""
Command-line harness: generate, mask, complete, evaluate, sweep.

Exit codes: 0 success (or converged), 1 usage or I/O error, 2 the solver
stopped at max_iter without converging.
"""
import argparse
import sys
from typing import List, Optional, Sequence
import logging

from src.errors import TensorCompletionError
from src.etl.config_file import read_config
from src.etl.models import GAMMA_A_PRESETS, LratmConfig, gamma_a_preset
from src.etl.tensor_file import read_mask, read_mask_index_list, read_tensor, write_mask, write_tensor
from src.math.synthetic import estimate_ranks, synth_lowrank
from src.math.tensor import sample_mask
from src import pipeline

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MAX_ITER = 2


class HarnessArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; here 2 means "iteration limit"."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def parse_shape(text: str) -> List[int]:
    try:
        shape = [int(part) for part in text.lower().split("x")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"shape must look like 40x40x40, got '{text}'") from None
    if any(s < 1 for s in shape):
        raise argparse.ArgumentTypeError(f"shape extents must be >= 1, got '{text}'")
    return shape


def parse_int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None


def _load_config(path: Optional[str]) -> LratmConfig:
    return read_config(path) if path else LratmConfig()


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------
def cmd_synth(args) -> int:
    if len(args.ranks) != len(args.shape):
        raise TensorCompletionError(f"--ranks has {len(args.ranks)} entries for a {len(args.shape)}-way --shape")
    t = synth_lowrank(args.shape, args.ranks, args.seed)
    write_tensor(args.out, t)
    logger.info(f"Wrote rank-{tuple(args.ranks)} tensor {t.shape} to {args.out}")
    return EXIT_OK


def cmd_mask(args) -> int:
    if args.index_list:
        mask = read_mask_index_list(args.index_list, args.shape)
    elif args.sr is not None:
        mask = sample_mask(args.shape, args.sr, args.seed)
    else:
        raise TensorCompletionError("mask needs --sr or --index-list")
    write_mask(args.out, mask)
    logger.info(f"Wrote mask {mask.shape} with {mask.count} observed (SR {mask.sampling_rate:.4f}) to {args.out}")
    return EXIT_OK


def cmd_complete(args) -> int:
    observed = read_tensor(args.observed)
    mask = read_mask(args.mask)
    config = _load_config(args.config)
    if args.preset:
        gamma = gamma_a_preset(args.preset, mask.sampling_rate)
        logger.info(f"Preset {args.preset}: gamma_A = {gamma}")
        config = config.model_copy(update={"gamma_A": gamma})
    reference = read_tensor(args.ref) if args.ref else None

    run = pipeline.run_completion(
        observed, mask, config,
        log_path=args.log,
        out_path=args.out,
        reference=reference,
        tmac=args.baseline == "tmac",
    )
    if run.rel_error is not None:
        print(f"rel_err={run.rel_error:.17g}")
    return EXIT_OK if run.result.converged else EXIT_MAX_ITER


def cmd_metrics(args) -> int:
    pipeline.run_metrics(read_tensor(args.ref), read_tensor(args.est), args.out)
    return EXIT_OK


def cmd_estimate_rank(args) -> int:
    if not 0.0 < args.fraction < 1.0:
        raise TensorCompletionError(f"--fraction must be in (0, 1), got {args.fraction}")
    ranks = estimate_ranks(read_tensor(args.tensor), args.fraction)
    print(",".join(str(r) for r in ranks))
    return EXIT_OK


def cmd_sweep(args) -> int:
    observed = read_tensor(args.observed)
    mask = read_mask(args.mask)
    config = _load_config(args.config)
    reference = read_tensor(args.ref) if args.ref else None
    summary = pipeline.run_gamma_sweep(
        observed, mask, config, args.gamma_list, args.out_dir,
        reference=reference, jobs=args.jobs,
    )
    return EXIT_OK if bool(summary["converged"].all()) else EXIT_MAX_ITER


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = HarnessArgumentParser(
        prog="lratm",
        description="Low-rank tensor completion experiments (LRATM and the Tmac baseline).",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log every solver iteration")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("synth", help="Write a random tensor of given multilinear rank")
    p.add_argument("--shape", type=parse_shape, required=True, help="Extents, e.g. 40x40x40")
    p.add_argument("--ranks", type=parse_int_list, required=True, help="Per-mode ranks, e.g. 3,3,3")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("mask", help="Write an observation mask")
    p.add_argument("--shape", type=parse_shape, required=True)
    p.add_argument("--sr", type=float, help="Sampling rate in [0, 1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--index-list", help="Text file of 1-based comma-separated indices (replaces --sr)")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_mask)

    p = sub.add_parser("complete", help="Complete an observed tensor")
    p.add_argument("--observed", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--config", help="key = value config file; defaults if omitted")
    p.add_argument("--out", required=True)
    p.add_argument("--log", required=True, help="Iteration log CSV")
    p.add_argument("--baseline", choices=["tmac"], help="Run a baseline instead of LRATM")
    p.add_argument("--ref", help="Reference tensor; prints the relative error")
    p.add_argument("--preset", choices=sorted(GAMMA_A_PRESETS), help="Take gamma_A from the tuned table")
    p.set_defaults(handler=cmd_complete)

    p = sub.add_parser("metrics", help="PSNR/SSIM/ERGAS/SAM report of an estimate")
    p.add_argument("--ref", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser("estimate-rank", help="Print per-mode rank estimates")
    p.add_argument("--tensor", required=True)
    p.add_argument("--fraction", type=float, default=0.005)
    p.set_defaults(handler=cmd_estimate_rank)

    p = sub.add_parser("sweep", help="Complete once per gamma_A value")
    p.add_argument("--observed", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--config")
    p.add_argument("--gamma-list", type=parse_float_list, required=True, help="e.g. 1.5,2.5,3.5")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ref", help="Reference tensor; fills the quality columns")
    p.add_argument("--jobs", type=int, default=1, help="Parallel gamma runs")
    p.set_defaults(handler=cmd_sweep)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s: %(message)s",
    )

    try:
        return args.handler(args)
    except (TensorCompletionError, OSError, ValueError) as e:
        logger.error(str(e))
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
