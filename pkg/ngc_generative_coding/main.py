# Python libraries
import argparse
import logging

# Local libraries.
from .config import RunConfig, load_run_config
from .health_checks import health_check_decorator, set_log_dir
from .runner import (
    cmd_baseline,
    cmd_classify,
    cmd_complete,
    cmd_eval,
    cmd_sample,
    cmd_train,
    resolve_output_dir,
)


# Arguments shared by every subcommand.
def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Path to a JSON run configuration (defaults when omitted).")
    common.add_argument("--checkpoint", help="Checkpoint directory (default: <output dir>/checkpoint).")
    common.add_argument("--seed", type=int, help="Override the run and model seed.")
    common.add_argument("--threads", type=int, help="Threads for batch-parallel settling (default 1).")
    common.add_argument("--verbose", action="store_true", help="Log at DEBUG level.")
    common.add_argument("--quiet", action="store_true", help="Hide progress bars.")
    return common

def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="ngc-generative-coding",
        description="Train and evaluate a neural generative coding network (GNCN) on binarized images.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("train", parents=[common], help="Train a model and fit its latent prior.")
    commands.add_parser("eval", parents=[common], help="Report test BCE, log p(x) and sparsity.")
    sample = commands.add_parser("sample", parents=[common], help="Write a grid of model samples.")
    sample.add_argument("--n", type=int, help="Number of samples.")
    sample.add_argument("--grid", type=int, nargs=2, metavar=("ROWS", "COLS"), help="Grid shape.")
    complete = commands.add_parser("complete", parents=[common], help="Pattern completion on masked test images.")
    complete.add_argument("--mask-kind", choices=["right-half", "all-ones", "custom"], help="Mask to apply (custom reads eval.mask_path).")
    commands.add_parser("classify", parents=[common], help="Maxent probe on top-layer codes.")
    commands.add_parser("baseline", parents=[common], help="Pixel-space mixture baseline log p(x).")
    return parser

# Read the config file and fold in command line overrides.
def resolve_config(args):
    config = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config.seed = args.seed
        config.model.seed = args.seed
    if args.threads is not None:
        config.threads = args.threads
    return config.validate()


# Main executable for running the commands from the command line.
@health_check_decorator
def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    config = resolve_config(args)
    out = resolve_output_dir(config)
    set_log_dir(out)

    if args.command == "train":
        result = cmd_train(config, args.checkpoint, quiet=args.quiet)
        print(f"Checkpoint written to {result['checkpoint']}", flush=True)
        print(f"Epoch metrics written to {result['metrics']}", flush=True)
    elif args.command == "eval":
        report = cmd_eval(config, args.checkpoint)
        print(f"BCE: {report.bce:.4f} nats", flush=True)
        print(f"log p(x): {report.log_px:.4f} +/- {report.log_px_stderr:.4f} nats (std. error over test records)", flush=True)
        print("Sparsity: " + ", ".join(f"{rho:.4f}" for rho in report.sparsity), flush=True)
    elif args.command == "sample":
        path = cmd_sample(config, args.checkpoint, n=args.n, grid=args.grid)
        print(f"Samples written to {path}", flush=True)
    elif args.command == "complete":
        mmse, baseline = cmd_complete(config, args.checkpoint, mask_kind=args.mask_kind)
        print(f"M-MSE: {mmse:.4f} (mean-fill baseline {baseline:.4f})", flush=True)
    elif args.command == "classify":
        err, baseline = cmd_classify(config, args.checkpoint)
        print(f"Err: {err:.2f}% (raw-pixel baseline {baseline:.2f}%)", flush=True)
    elif args.command == "baseline":
        report = cmd_baseline(config)
        print(f"Pixel GMM log p(x): {report.log_px:.4f} +/- {report.log_px_stderr:.4f} nats (std. error over test records)", flush=True)
    return 0



if __name__ == "__main__":
    # Execute the decorated main function.
    main()
