"""Posterior summaries and plot-ready file emission.

All files are plain CSV with deterministic %.17g formatting, so writing
the same chain twice produces byte-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bnn import NetworkTopology, class_probabilities, predict_accuracy
from .exceptions import ConfigError, ContractError
from .orchestrator import PosteriorChain, RunReport

HISTOGRAM_BINS = 50

MODE_PER_SAMPLE = "per_sample"
MODE_POSTERIOR_MEAN = "posterior_mean"


@dataclass(frozen=True)
class AccuracySummary:
    """Classification accuracy statistics over retained posterior samples.

    All accuracy fields are percentages in [0, 100].
    """

    train_mean: float
    train_std: float
    train_best: float
    test_mean: float
    test_std: float
    test_best: float
    elapsed_minutes: float = 0.0

    def __post_init__(self):
        slack = 1e-9
        for tag, mean, std, best in (
            ("train", self.train_mean, self.train_std, self.train_best),
            ("test", self.test_mean, self.test_std, self.test_best),
        ):
            if std < 0:
                raise ContractError(f"{tag} accuracy std is negative")
            if best < mean - slack:
                raise ContractError(f"{tag} best accuracy below the mean")
            for value in (mean, best):
                if not -slack <= value <= 100 + slack:
                    raise ContractError(f"{tag} accuracy outside [0,100]")

    def to_text(self) -> str:
        return (
            f"train_accuracy_mean {self.train_mean:.8g}\n"
            f"train_accuracy_std {self.train_std:.8g}\n"
            f"train_accuracy_best {self.train_best:.8g}\n"
            f"test_accuracy_mean {self.test_mean:.8g}\n"
            f"test_accuracy_std {self.test_std:.8g}\n"
            f"test_accuracy_best {self.test_best:.8g}\n"
            f"elapsed_minutes {self.elapsed_minutes:.8g}\n"
        )


def _mean_prediction_accuracy(thetas, dataset, topology) -> float:
    probs = np.zeros((dataset.sample_count, dataset.class_count))
    for theta in thetas:
        probs += class_probabilities(theta, dataset.features, topology)
    predicted = probs.argmax(axis=1)
    return 100.0 * float(np.mean(predicted == dataset.labels))


def posterior_accuracy(chain: PosteriorChain, train, test,
                       topology: NetworkTopology, thin: int = 10,
                       mode: str = MODE_PER_SAMPLE,
                       elapsed_seconds: float = 0.0) -> AccuracySummary:
    """Accuracy statistics of the retained posterior.

    per_sample scores every thinned sample separately and reports
    mean/std/best over those scores; posterior_mean averages the class
    probabilities across samples first and scores that single
    prediction, so mean = best and std = 0.
    """
    thetas = chain.combined_posterior(thin)
    if thetas.shape[0] == 0:
        raise ContractError("posterior is empty after thinning")
    minutes = elapsed_seconds / 60.0
    if mode == MODE_PER_SAMPLE:
        train_acc = np.array(
            [predict_accuracy(t, train, topology) for t in thetas])
        test_acc = np.array(
            [predict_accuracy(t, test, topology) for t in thetas])
        return AccuracySummary(
            train_mean=float(train_acc.mean()),
            train_std=float(train_acc.std()),
            train_best=float(train_acc.max()),
            test_mean=float(test_acc.mean()),
            test_std=float(test_acc.std()),
            test_best=float(test_acc.max()),
            elapsed_minutes=minutes,
        )
    if mode == MODE_POSTERIOR_MEAN:
        train_acc = _mean_prediction_accuracy(thetas, train, topology)
        test_acc = _mean_prediction_accuracy(thetas, test, topology)
        return AccuracySummary(
            train_mean=train_acc, train_std=0.0, train_best=train_acc,
            test_mean=test_acc, test_std=0.0, test_best=test_acc,
            elapsed_minutes=minutes,
        )
    raise ConfigError(f"unknown accuracy mode {mode!r}")


def surrogate_report(report: RunReport) -> str:
    """Text block describing surrogate quality, or a not-applicable stub.

    Prediction RMSE is in raw log-likelihood units; the per-interval
    training RMSE statistics are in the scaler's [0,1] units, which is
    why the two columns differ by orders of magnitude.
    """
    if report.surrogate_evals == 0 and not report.train_rmse:
        return ("surrogate not applicable (surrogate_prob = 0)\n"
                "surrogate_prediction_rmse_raw n/a\n"
                "surrogate_train_rmse_mean_scaled n/a\n"
                "surrogate_train_rmse_std_scaled n/a\n")
    pred = "n/a" if report.prediction_rmse is None \
        else f"{report.prediction_rmse:.8g}"
    if report.train_rmse:
        rmse = np.asarray(report.train_rmse)
        mean = f"{rmse.mean():.8g}"
        std = f"{rmse.std():.8g}"
    else:
        mean = std = "n/a"
    return (f"surrogate_path_steps {report.surrogate_evals}\n"
            f"surrogate_prediction_rmse_raw {pred}\n"
            f"surrogate_train_rmse_mean_scaled {mean}\n"
            f"surrogate_train_rmse_std_scaled {std}\n")


def compose_report(report: RunReport, summary: AccuracySummary) -> str:
    return (report.to_text() + "\n" + summary.to_text() + "\n"
            + surrogate_report(report))


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def emit_posterior(chain: PosteriorChain, out_dir, thin: int = 1) -> list:
    """Write posterior columns, per-replica traces and histogram summaries.

    posterior_p<k>.csv holds the thinned exploit-phase samples of
    parameter k, one value per line. trace_replica<i>.csv covers every
    step of replica i. histograms.csv bins each parameter's retained
    samples into 50 equal-width bins. Returns the written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    posterior = chain.combined_posterior(thin)
    if posterior.shape[0] == 0:
        raise ContractError("nothing to emit: posterior is empty")
    written = []
    for k in range(chain.parameter_count):
        path = out / f"posterior_p{k}.csv"
        with open(path, "w") as fh:
            for value in posterior[:, k]:
                fh.write(_fmt(value) + "\n")
        written.append(path)
    for trace in chain.traces:
        path = out / f"trace_replica{trace.replica}.csv"
        with open(path, "w") as fh:
            fh.write("step,log_lik,source,phase\n")
            for s in range(trace.steps):
                fh.write(f"{s},{_fmt(trace.log_liks[s])},"
                         f"{trace.sources[s]},{trace.phases[s]}\n")
        written.append(path)
    path = out / "histograms.csv"
    with open(path, "w") as fh:
        fh.write("parameter,bin_lo,bin_hi,count\n")
        for k in range(chain.parameter_count):
            counts, edges = np.histogram(posterior[:, k], bins=HISTOGRAM_BINS)
            for b in range(HISTOGRAM_BINS):
                fh.write(f"{k},{_fmt(edges[b])},{_fmt(edges[b + 1])},"
                         f"{counts[b]}\n")
    written.append(path)
    return written


def write_surrogate_trace(chain: PosteriorChain, path) -> int:
    """One row per surrogate-path step: the pseudo value the sampler used
    and the true value measured alongside (nan when tracking was off).
    Returns the row count."""
    rows = 0
    with open(path, "w") as fh:
        fh.write("step,replica,log_lik,source,true_log_lik\n")
        for trace in chain.traces:
            for j in range(trace.surrogate_steps.shape[0]):
                fh.write(f"{trace.surrogate_steps[j]},{trace.replica},"
                         f"{_fmt(trace.surrogate_estimates[j])},surrogate,"
                         f"{_fmt(trace.surrogate_truths[j])}\n")
                rows += 1
    return rows


def write_manifest(path, entries: dict) -> None:
    """Key-value run echo; enough to reproduce the run in sequential mode."""
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key} {value}\n")
