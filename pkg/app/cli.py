"""Command-line surface: train, generate, estimate, extrapolate, simulate, report, replay.

Every command writes a run manifest next to its output (or into the reports
directory when the output goes to stdout). Exit codes: 0 success, 2 usage,
3 data or parse error, 4 numeric or domain error.
"""
import argparse
import glob
import hashlib
import logging
import os
import sys
from typing import Dict, List, Optional

from . import __version__
from .analyzer import ConvergenceAnalyzer
from .config import (DEFAULT_B, DEFAULT_ERR_INF_N_TEST, DEFAULT_QUANTILES, DEFAULT_T0, configure_logging,
                     get_build_hash, get_reports_dir, get_threads)
from .ensemble import HOLDOUT, MODES
from .errors import EnsconvError, ReplayMismatchError, UsageError
from .parser import ModelSpecParser
from .report_store import MANIFEST_SUFFIX, ReportStore, RunManifest
from .utils import dumps_json, file_digest, write_json

logger = logging.getLogger(__name__)

MANIFEST_EXCLUDED = ('func', 'threads', 'log_level')


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_hash() -> str:
    env_hash = get_build_hash()
    if env_hash:
        return env_hash
    sha = hashlib.sha256()
    for path in sorted(glob.glob(os.path.join(os.path.dirname(__file__), "*.py"))):
        sha.update(os.path.basename(path).encode())
        sha.update(file_digest(path).encode())
    return sha.hexdigest()[:12]


def version_string() -> str:
    return f"{__version__}+{build_hash()}"


def _probs(text: str) -> List[float]:
    try:
        return [float(p) for p in text.split(',') if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid probability list {text!r}")


def _emit(report: Dict, out: Optional[str]) -> Optional[str]:
    if out:
        write_json(out, report)
        return out
    sys.stdout.write(dumps_json(report))
    return None


# Commands


def cmd_estimate(args, analyzer: ConvergenceAnalyzer):
    array, truth, mask = analyzer.load_inputs(args.predictions, args.truth, args.mask)
    report = analyzer.estimate(array, truth, mask, mode=args.mode, B=args.B, seed=args.seed,
                               target_class=args.target_class, probs=args.quantiles, t0=args.t0,
                               targets=args.targets, eps=args.eps, eta=args.eta)
    outputs = [_emit(report, args.out)]
    if args.store:
        outputs.append(ReportStore(args.reports_dir).save_report(report, "estimate"))
    return [args.predictions, args.truth, args.mask], outputs


def cmd_extrapolate(args, analyzer: ConvergenceAnalyzer):
    if args.t is None and args.eps is None:
        raise UsageError("extrapolate needs --t or --eps")
    report = analyzer.extrapolate(args.sigma0, args.t0, t=args.t, eps=args.eps, targets=args.targets)
    return [], [_emit(report, args.out)]


def cmd_train(args, analyzer: ConvergenceAnalyzer):
    metadata = analyzer.train(args.data, args.out_dir, args.trees, max_depth=args.depth, min_leaf=args.min_leaf,
                              mtry=args.mtry, seed=args.seed, holdout_frac=args.holdout_frac,
                              ground_frac=args.ground_frac)
    metadata_path = write_json(os.path.join(args.out_dir, "ensemble.json"), metadata)
    outputs = [os.path.join(args.out_dir, name) for name in metadata['outputs']]
    return [args.data], outputs + [metadata_path]


def cmd_generate(args, analyzer: ConvergenceAnalyzer):
    path = analyzer.generate(args.kind, args.n_per_class, args.out, p=args.p, seed=args.seed)
    return [], [path]


def _summary_path(args) -> str:
    return args.summary or os.path.splitext(args.out)[0] + ".json"


def cmd_simulate(args, analyzer: ConvergenceAnalyzer):
    model = ModelSpecParser().parse_model_spec(args.model)
    outputs = [args.out]
    if args.kind == 'paths':
        sigma_out = args.sigma_out or os.path.splitext(args.out)[0] + "_sigma.csv"
        summary = analyzer.simulate_paths(model, args.t, args.runs, args.seed, args.out, sigma_out,
                                          same_stream=args.same_stream, n_test=args.n_test)
        if args.runs >= 2:
            outputs.append(sigma_out)
    elif args.kind == 'sigma':
        summary = analyzer.simulate_sigma(model, args.t, args.runs, args.seed, args.out,
                                          same_stream=args.same_stream, n_test=args.n_test)
    elif args.kind == 'clt':
        summary = analyzer.simulate_clt(model, args.t, args.runs, args.seed, args.out, n_test=args.n_test)
    else:
        summary = analyzer.simulate_bootstrap_check(model, args.t, args.runs, args.B, args.seed, args.out)
    outputs.append(write_json(_summary_path(args), summary))
    return [args.model], outputs


def cmd_report(args, analyzer: ConvergenceAnalyzer):
    store = ReportStore(args.dir or args.reports_dir)
    summary = {'command': 'report', 'statistics': store.get_statistics(), 'reports': store.list_reports()}
    return [], [_emit(summary, args.out)]


def cmd_replay(args) -> int:
    manifest = RunManifest.load(args.manifest)
    for path, digest in manifest.inputs.items():
        if not os.path.exists(path) or file_digest(path) != digest:
            logger.warning("Input %s differs from the recorded run", path)
    code = main(manifest.argv)
    mismatched = [path for path, digest in manifest.outputs.items()
                  if not os.path.exists(path) or file_digest(path) != digest]
    for path in mismatched:
        logger.error("Replayed output %s differs from the recorded run", path)
    sys.stdout.write(dumps_json({'command': 'replay', 'manifest': args.manifest, 'exit_code': code,
                                 'outputs_match': not mismatched, 'mismatched': mismatched}))
    if code == 0 and mismatched:
        raise ReplayMismatchError(f"{len(mismatched)} replayed output(s) differ from {args.manifest}")
    return code


# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="ensconv", description="Algorithmic variance of randomized ensembles")
    parser.add_argument("--version", action="version", version=f"%(prog)s {version_string()}")
    parser.add_argument("--threads", type=int, default=None, help="worker cap (results do not depend on it)")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--reports-dir", default=None, help="report and manifest directory")
    commands = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)
    commands.required = True

    p = commands.add_parser("estimate", help="bootstrap estimate of sigma_t from a prediction array")
    p.add_argument("--predictions", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--mode", choices=MODES, default=HOLDOUT)
    p.add_argument("--mask")
    p.add_argument("--B", type=int, default=DEFAULT_B)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--class", dest="target_class", type=int, default=None)
    p.add_argument("--quantiles", type=_probs, default=list(DEFAULT_QUANTILES),
                   help="comma-separated probabilities in (0, 1)")
    p.add_argument("--t0", type=int, default=None, help="estimate on the first t0 classifiers")
    p.add_argument("--targets", type=int, nargs="+", default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--out")
    p.add_argument("--store", action="store_true", help="also save the report in the reports directory")
    p.set_defaults(func=cmd_estimate)

    p = commands.add_parser("extrapolate", help="sqrt(t0/t) scaling and minimum ensemble size")
    p.add_argument("--sigma0", type=float, required=True)
    p.add_argument("--t0", type=int, default=DEFAULT_T0)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--targets", type=int, nargs="+", default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_extrapolate)

    p = commands.add_parser("train", help="train a bagged tree ensemble on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--trees", type=int, required=True)
    p.add_argument("--depth", type=int, default=16)
    p.add_argument("--min-leaf", type=int, default=1)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout-frac", type=float, default=0.0)
    p.add_argument("--ground-frac", type=float, default=0.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("generate", help="write a synthetic two-class dataset CSV")
    p.add_argument("kind", choices=("continuous", "discrete"))
    p.add_argument("--n-per-class", type=int, required=True)
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = commands.add_parser("simulate", help="first-order model simulations")
    p.add_argument("kind", choices=("paths", "sigma", "clt", "bootstrap-check"))
    p.add_argument("--model", required=True, help="model spec JSON")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--B", type=int, default=DEFAULT_B)
    p.add_argument("--n-test", type=int, default=DEFAULT_ERR_INF_N_TEST)
    p.add_argument("--same-stream", action="store_true", help="give every run the same random stream")
    p.add_argument("--out", required=True, help="CSV output")
    p.add_argument("--summary", default=None, help="JSON summary (default: CSV path with .json)")
    p.add_argument("--sigma-out", default=None, help="sigma curve CSV for paths")
    p.set_defaults(func=cmd_simulate)

    p = commands.add_parser("report", help="summarize stored reports and manifests")
    p.add_argument("--dir", default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = commands.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=None)
    return parser


def _manifest_path(args, outputs: List[Optional[str]]) -> Optional[str]:
    if args.command == 'train':
        return os.path.join(args.out_dir, "manifest.json")
    primary = next((path for path in outputs if path), None)
    if primary and getattr(args, 'out', None):
        return primary + MANIFEST_SUFFIX
    return None


def _run(args, argv: List[str]) -> int:
    if args.command == 'replay':
        return cmd_replay(args)
    args.reports_dir = args.reports_dir or get_reports_dir()
    analyzer = ConvergenceAnalyzer(threads=get_threads(args.threads))
    inputs, outputs = args.func(args, analyzer)

    parameters = {key: value for key, value in sorted(vars(args).items()) if key not in MANIFEST_EXCLUDED}
    manifest = RunManifest(command=args.command, version=version_string(), seed=getattr(args, 'seed', None),
                           argv=list(argv), parameters=parameters)
    manifest.record_inputs(inputs)
    manifest.record_outputs(outputs)
    path = _manifest_path(args, outputs)
    if path:
        manifest.write(path)
    else:
        path = ReportStore(args.reports_dir).save_manifest(manifest)
    logger.info("Wrote manifest %s", path)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"{e}\n")
        return e.exit_code
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)

    configure_logging(args.log_level)
    try:
        return _run(args, argv)
    except EnsconvError as e:
        logger.error("%s", e)
        return e.exit_code
    except OSError as e:
        logger.error("%s", e)
        return 3


if __name__ == "__main__":
    sys.exit(main())
