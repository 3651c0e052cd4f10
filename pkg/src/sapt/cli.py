"""Command-line front end.

    sapt --dataset iris --replicas 4 --samples 8000 --proposal lg

runs the sampler on a registered dataset (or a label-last CSV path) and
writes manifest.txt, report.txt, posterior/trace CSVs and, when the
surrogate was active, surrogate_trace.csv into --out-dir.

Exit codes: 0 success, 1 configuration or input error, 2 runtime
failure (including partial runs after a worker loss).
"""

from __future__ import annotations

import argparse
import csv
import sys
import traceback
from pathlib import Path

from . import __version__
from .bnn import NetworkTopology, PriorConfig
from .data import load_csv, load_registry, load_registered, split
from .diagnostics import (MODE_PER_SAMPLE, MODE_POSTERIOR_MEAN,
                          compose_report, emit_posterior, posterior_accuracy,
                          write_manifest, write_surrogate_trace)
from .exceptions import ConfigError, ContractError, DataFormatError
from .orchestrator import SamplerConfig, run
from .tempering import KIND_LANGEVIN_MIX, KIND_RANDOM_WALK, ProposalConfig

PROPOSAL_FLAGS = {"rw": KIND_RANDOM_WALK, "lg": KIND_LANGEVIN_MIX}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sapt",
        description="Tempered MCMC sampling for Bayesian neural network "
                    "classification, with an optional surrogate for the "
                    "likelihood.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("--dataset", default="iris",
                        help="registered dataset name or a label-last CSV "
                             "path (default: iris)")
    parser.add_argument("--replicas", type=int, default=10, metavar="M")
    parser.add_argument("--samples", type=int, default=50000, metavar="N",
                        help="total samples across all replicas")
    parser.add_argument("--swap-interval", type=int, default=50)
    parser.add_argument("--surrogate-interval", type=int, default=50)
    parser.add_argument("--surrogate-prob", type=float, default=0.0,
                        help="per-step probability of the surrogate path "
                             "(0 disables the surrogate)")
    parser.add_argument("--max-temp", type=float, default=5.0)
    parser.add_argument("--proposal", choices=sorted(PROPOSAL_FLAGS),
                        default="rw",
                        help="rw: random walk; lg: gradient-drift mix")
    parser.add_argument("--lg-prob", type=float, default=0.5,
                        help="probability of the gradient-drift proposal "
                             "inside lg mode")
    parser.add_argument("--lg-rate", type=float, default=0.5,
                        help="descent step length of the drift proposal")
    parser.add_argument("--rw-sd", type=float, default=0.025,
                        help="random-walk (and drift noise) step sd")
    parser.add_argument("--burn-in", type=float, default=0.5,
                        help="fraction of steps in the tempered phase")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sequential", action="store_true",
                        help="run replicas round-robin in one process "
                             "(deterministic scheduling)")
    parser.add_argument("--out-dir", default="sapt-out")
    parser.add_argument("--thin", type=int, default=10,
                        help="posterior thinning stride for accuracy and "
                             "emission")
    parser.add_argument("--hidden", type=int, default=None,
                        help="hidden units (default: registry value; "
                             "required for CSV paths)")
    parser.add_argument("--train-fraction", type=float, default=0.6)
    parser.add_argument("--prior-var", type=float, default=25.0,
                        help="Gaussian prior variance on every parameter")
    parser.add_argument("--surrogate-hidden", type=int, nargs=2,
                        default=None, metavar=("H1", "H2"))
    parser.add_argument("--timeout", type=float, default=600.0,
                        help="seconds the manager waits on a worker message")
    parser.add_argument("--accuracy-mode",
                        choices=[MODE_PER_SAMPLE, MODE_POSTERIOR_MEAN],
                        default=MODE_PER_SAMPLE)
    return parser


def _scan_csv(path: Path):
    """Column count and label range of a raw CSV, for schema inference."""
    feature_count = None
    max_label = 0
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or all(not cell.strip() for cell in row):
                continue
            if feature_count is None:
                feature_count = len(row) - 1
            try:
                label = float(row[-1])
            except ValueError:
                continue  # load_csv reports the precise line
            if label == int(label):
                max_label = max(max_label, int(label))
    if feature_count is None or feature_count < 1:
        raise DataFormatError(f"{path}: no usable data rows")
    return feature_count, max_label + 1


def _resolve_dataset(args):
    """-> (dataset_id, topology, surrogate_hidden, train, test)."""
    registry = load_registry()
    if args.dataset in registry:
        entry, train, test = load_registered(
            args.dataset, args.train_fraction, seed=args.seed)
        hidden = args.hidden if args.hidden is not None \
            else entry.hidden_units
        topology = NetworkTopology(entry.attribute_count, hidden,
                                   entry.class_count)
        surrogate_hidden = tuple(args.surrogate_hidden) \
            if args.surrogate_hidden else entry.surrogate_hidden
        return args.dataset, topology, surrogate_hidden, train, test
    path = Path(args.dataset)
    if not path.exists():
        raise FileNotFoundError(
            f"{args.dataset!r} is neither a registered dataset "
            f"({', '.join(sorted(registry))}) nor an existing file"
        )
    if args.hidden is None:
        raise ConfigError("--hidden is required for a dataset given by path")
    feature_count, class_count = _scan_csv(path)
    full = load_csv(path, feature_count, class_count, name=path.stem)
    train, test = split(full, args.train_fraction, seed=args.seed)
    topology = NetworkTopology(feature_count, args.hidden, class_count)
    surrogate_hidden = tuple(args.surrogate_hidden) \
        if args.surrogate_hidden else (64, 16)
    return str(path), topology, surrogate_hidden, train, test


def _manifest_entries(args, dataset_id, topology, config: SamplerConfig):
    return {
        "version": __version__,
        "dataset": dataset_id,
        "feature_count": topology.input_count,
        "class_count": topology.output_count,
        "hidden_units": topology.hidden_count,
        "train_fraction": f"{args.train_fraction:.17g}",
        "split_seed": args.seed,
        "replica_count": config.replica_count,
        "total_samples": config.total_samples,
        "steps_per_replica": config.steps_per_replica,
        "swap_interval": config.swap_interval,
        "surrogate_interval": config.surrogate_interval,
        "surrogate_prob": f"{config.surrogate_prob:.17g}",
        "max_temp": f"{config.max_temp:.17g}",
        "burn_in_fraction": f"{config.burn_in_fraction:.17g}",
        "proposal": config.proposal.kind,
        "rw_step_sd": f"{config.proposal.rw_step_sd:.17g}",
        "lg_learning_rate": f"{config.proposal.lg_learning_rate:.17g}",
        "lg_prob": f"{config.proposal.lg_prob:.17g}",
        "prior_sigma_sq": f"{config.prior.sigma_sq:.17g}",
        "base_seed": config.base_seed,
        "sequential_mode": config.sequential_mode,
        "worker_timeout": f"{config.worker_timeout:.17g}",
        "surrogate_hidden": f"{config.surrogate_hidden[0]} "
                            f"{config.surrogate_hidden[1]}",
        "thin": args.thin,
        "accuracy_mode": args.accuracy_mode,
    }


def _run_command(args) -> int:
    dataset_id, topology, surrogate_hidden, train, test = \
        _resolve_dataset(args)
    config = SamplerConfig(
        replica_count=args.replicas,
        total_samples=args.samples,
        swap_interval=args.swap_interval,
        surrogate_interval=args.surrogate_interval,
        surrogate_prob=args.surrogate_prob,
        max_temp=args.max_temp,
        burn_in_fraction=args.burn_in,
        proposal=ProposalConfig(
            kind=PROPOSAL_FLAGS[args.proposal],
            rw_step_sd=args.rw_sd,
            lg_learning_rate=args.lg_rate,
            lg_prob=args.lg_prob,
        ),
        prior=PriorConfig(sigma_sq=args.prior_var),
        base_seed=args.seed,
        sequential_mode=args.sequential,
        worker_timeout=args.timeout,
        surrogate_hidden=surrogate_hidden,
    )
    if args.thin < 1:
        raise ConfigError("--thin must be >= 1")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chain, report = run(config, train, topology)
    write_manifest(out / "manifest.txt",
                   _manifest_entries(args, dataset_id, topology, config))
    if not chain.traces:
        (out / "report.txt").write_text(report.to_text())
        print(f"run failed: {report.failure}", file=sys.stderr)
        return 2
    summary = posterior_accuracy(chain, train, test, topology,
                                 thin=args.thin, mode=args.accuracy_mode,
                                 elapsed_seconds=report.elapsed_seconds)
    (out / "report.txt").write_text(compose_report(report, summary))
    emit_posterior(chain, out, thin=args.thin)
    if report.surrogate_evals > 0:
        write_surrogate_trace(chain, out / "surrogate_trace.csv")
    print(f"dataset {dataset_id}: {train.sample_count} train / "
          f"{test.sample_count} test")
    print(f"train accuracy [mean, std, best]: {summary.train_mean:.2f} "
          f"{summary.train_std:.2f} {summary.train_best:.2f}")
    print(f"test accuracy  [mean, std, best]: {summary.test_mean:.2f} "
          f"{summary.test_std:.2f} {summary.test_best:.2f}")
    print(f"true evals {report.true_evals}, surrogate evals "
          f"{report.surrogate_evals}, elapsed {summary.elapsed_minutes:.2f} "
          f"min")
    print(f"outputs in {out}")
    if report.partial:
        print(f"partial run: {report.failure}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run_command(args)
    except (ConfigError, ContractError, DataFormatError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
