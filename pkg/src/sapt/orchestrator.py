"""Replica-ensemble driver: tempered exploration, swaps, surrogate refits.

One manager coordinates M replicas. Each replica runs Metropolis steps
in blocks of swap_interval; after every block all running replicas
synchronize for a neighbor-pair swap sweep, and at surrogate-interval
boundaries the manager gathers the staged true-likelihood rows, refits
the shared surrogate and broadcasts the new snapshot. Once a replica's
step budget crosses burn_in_fraction of its total, its temperature
drops to 1 and recorded samples switch to the exploit phase; only those
samples enter the combined posterior.

Determinism contract (identical in sequential and parallel mode):

* replica i draws from default_rng(base_seed + i); its first use is the
  initial theta (parameter_count normals at the prior sd), then per
  step: the surrogate selector kappa (only when surrogate_prob > 0),
  the proposal draws, and the accept uniform.
* swap decisions come from default_rng(base_seed + replica_count); one
  uniform per considered pair, ascending order, and a pair is skipped
  (no draw) when its lower member just swapped.
* the surrogate's init and shuffles use
  default_rng(base_seed + replica_count + 1) via its own generator.

Scheduling never touches these streams, so a round-robin in-process run
and the multiprocess run produce bit-identical chains.
"""

from __future__ import annotations

import logging
import math
import time
import traceback
import multiprocessing as mp
from dataclasses import dataclass, field, replace

import numpy as np

from .bnn import BnnPosterior, NetworkTopology, PriorConfig
from .exceptions import ConfigError, ContractError
from .surrogate import LikelihoodHistory, SurrogateBatch, SurrogateModel, blend
from .tempering import (PHASE_EXPLOIT, PHASE_TEMPERED, ProposalConfig,
                        ReplicaState, apply_swap, build_ladder, make_proposal,
                        metropolis_step, swap_probability)

log = logging.getLogger(__name__)

SOURCE_TRUE = "true"
SOURCE_SURROGATE = "surrogate"


@dataclass(frozen=True)
class SamplerConfig:
    """Run-shaping knobs; defaults mirror the reference experiments."""

    replica_count: int = 10
    total_samples: int = 50000
    swap_interval: int = 50
    surrogate_interval: int = 50
    surrogate_prob: float = 0.0
    max_temp: float = 5.0
    burn_in_fraction: float = 0.5
    proposal: ProposalConfig = ProposalConfig()
    prior: PriorConfig = PriorConfig()
    base_seed: int = 0
    sequential_mode: bool = False
    worker_timeout: float = 600.0
    track_surrogate_truth: bool = True
    surrogate_hidden: tuple = (64, 16)

    def __post_init__(self):
        if self.replica_count < 2:
            raise ConfigError("replica_count must be at least 2")
        if self.total_samples < self.replica_count:
            raise ConfigError("total_samples gives some replica zero steps")
        if self.swap_interval < 1:
            raise ConfigError("swap_interval must be >= 1")
        if self.surrogate_interval < 1 \
                or self.surrogate_interval % self.swap_interval:
            raise ConfigError(
                "surrogate_interval must be a positive multiple of "
                "swap_interval"
            )
        if not 0.0 <= self.surrogate_prob <= 1.0:
            raise ConfigError("surrogate_prob must lie in [0,1]")
        if not 0.0 < self.burn_in_fraction < 1.0:
            raise ConfigError("burn_in_fraction must lie in (0,1)")
        if self.max_temp < 1.0:
            raise ConfigError("max_temp must be >= 1")
        if self.worker_timeout <= 0:
            raise ConfigError("worker_timeout must be positive")
        if len(self.surrogate_hidden) != 2 \
                or min(self.surrogate_hidden) < 1:
            raise ConfigError("surrogate_hidden must be two positive sizes")

    @property
    def steps_per_replica(self) -> int:
        """Per-replica step budget; a non-divisible remainder is dropped."""
        return self.total_samples // self.replica_count

    @property
    def blocks_per_interval(self) -> int:
        return self.surrogate_interval // self.swap_interval


@dataclass
class ReplicaTrace:
    """Everything one replica recorded: one row per Metropolis step."""

    replica: int
    samples: np.ndarray        # steps x parameter_count
    log_liks: np.ndarray       # value each step ran on (pseudo on surrogate path)
    sources: np.ndarray        # "true" / "surrogate" per step
    phases: np.ndarray         # "tempered" / "exploit" per step
    exploit_start: int
    true_evals: int
    surrogate_evals: int
    accepted_count: int
    proposed_count: int
    surrogate_steps: np.ndarray      # step indices that took the surrogate path
    surrogate_estimates: np.ndarray  # blended values used at those steps
    surrogate_truths: np.ndarray     # true values there (nan when untracked)

    @property
    def steps(self) -> int:
        return self.samples.shape[0]

    @property
    def acceptance_rate(self) -> float:
        if self.proposed_count == 0:
            return 0.0
        return self.accepted_count / self.proposed_count


@dataclass
class PosteriorChain:
    """All replica traces plus the combined post-burn-in view."""

    traces: list
    parameter_count: int

    @property
    def replica_count(self) -> int:
        return len(self.traces)

    def combined_posterior(self, thin: int = 1) -> np.ndarray:
        """Exploit-phase samples of every replica, thinned per replica."""
        if thin < 1:
            raise ContractError(f"thin must be >= 1, got {thin}")
        parts = [t.samples[t.exploit_start::thin] for t in self.traces]
        if not parts:
            return np.empty((0, self.parameter_count))
        return np.concatenate(parts)

    def combined_log_liks(self, thin: int = 1) -> np.ndarray:
        if thin < 1:
            raise ContractError(f"thin must be >= 1, got {thin}")
        parts = [t.log_liks[t.exploit_start::thin] for t in self.traces]
        return np.concatenate(parts) if parts else np.empty(0)


@dataclass
class RunReport:
    """Counters and timings of one run; to_text() is the emitted schema."""

    elapsed_seconds: float
    replica_count: int
    steps_per_replica: int
    true_evals: int
    surrogate_evals: int
    swap_attempts: int
    swap_accepts: int
    replica_acceptance: list
    train_rmse: list = field(default_factory=list)  # scaled units, per interval
    prediction_rmse: float | None = None            # raw units
    partial: bool = False
    failure: str = ""

    @property
    def swap_acceptance_rate(self) -> float:
        if self.swap_attempts == 0:
            return 0.0
        return self.swap_accepts / self.swap_attempts

    def to_text(self) -> str:
        lines = [
            f"elapsed_seconds {self.elapsed_seconds:.6f}",
            f"replica_count {self.replica_count}",
            f"steps_per_replica {self.steps_per_replica}",
            f"true_evals {self.true_evals}",
            f"surrogate_evals {self.surrogate_evals}",
            f"swap_attempts {self.swap_attempts}",
            f"swap_accepts {self.swap_accepts}",
            f"swap_acceptance_rate {self.swap_acceptance_rate:.8g}",
        ]
        for i, rate in enumerate(self.replica_acceptance):
            lines.append(f"acceptance_rate_replica{i} {rate:.8g}")
        for k, rmse in enumerate(self.train_rmse, start=1):
            lines.append(f"surrogate_train_rmse_interval{k} {rmse:.8g}")
        pred = "n/a" if self.prediction_rmse is None \
            else f"{self.prediction_rmse:.8g}"
        lines.append(f"surrogate_prediction_rmse {pred}")
        lines.append(f"partial {'true' if self.partial else 'false'}")
        if self.failure:
            lines.append(f"failure {self.failure}")
        return "\n".join(lines) + "\n"


def swap_sweep(states, rng):
    """One ascending pass of neighbor-pair exchanges.

    Pairs are (0,1), (1,2), ...; each considered pair draws one uniform
    b and swaps iff b <= beta. A pair is skipped without a draw when its
    lower member just swapped, so a replica moves at most once per
    sweep. Returns (new_states, accepted_mask).
    """
    states = list(states)
    accepted = np.zeros(max(len(states) - 1, 0), dtype=bool)
    for p in range(len(states) - 1):
        if p > 0 and accepted[p - 1]:
            continue
        beta = swap_probability(states[p], states[p + 1])
        if rng.uniform() <= beta:
            states[p], states[p + 1] = apply_swap(states[p], states[p + 1])
            accepted[p] = True
    return states, accepted


def collect_surrogate_data(replicas) -> SurrogateBatch:
    """Concatenate and clear every replica's staged training rows."""
    return SurrogateBatch.concat([r.collect() for r in replicas])


class _ReplicaRunner:
    """Step engine for one replica; the same object runs in either mode."""

    def __init__(self, index: int, config: SamplerConfig, target,
                 parameter_count: int, temperature: float, max_steps: int):
        self.index = index
        self.config = config
        self.target = target
        self.parameter_count = parameter_count
        self.max_steps = max_steps
        self.exploit_start = int(config.burn_in_fraction * max_steps)
        seed = config.base_seed + index
        self.rng = np.random.default_rng(seed)
        theta0 = self.rng.normal(0.0, math.sqrt(config.prior.sigma_sq),
                                 parameter_count)
        self.state = ReplicaState(
            theta=theta0, temperature=temperature,
            log_lik=target.log_likelihood(theta0),
            log_prior=target.log_prior(theta0), rng_seed=seed,
        )
        self.history = LikelihoodHistory()
        self.model: SurrogateModel | None = None
        self.step = 0
        self._samples: list = []
        self._log_liks: list = []
        self._sources: list = []
        self._phases: list = []
        self._staged_inputs: list = []
        self._staged_targets: list = []
        self._surr_steps: list = []
        self._surr_estimates: list = []
        self._surr_truths: list = []
        self.true_evals = 0
        self.surrogate_evals = 0

    def _one_step(self) -> None:
        s = self.step
        if s >= self.exploit_start and self.state.phase == PHASE_TEMPERED:
            self.state = replace(self.state, temperature=1.0,
                                 phase=PHASE_EXPLOIT)
        s_prob = self.config.surrogate_prob
        kappa = self.rng.uniform() if s_prob > 0 else None
        proposal, log_q = make_proposal(self.state.theta,
                                        self.target, self.config.proposal,
                                        self.rng)
        use_surrogate = (kappa is not None and kappa < s_prob
                         and s >= self.config.surrogate_interval
                         and self.model is not None)
        if use_surrogate:
            estimate = blend(self.model.predict(proposal), self.history)
            if self.config.track_surrogate_truth:
                truth = self.target.log_likelihood(proposal)
            else:
                truth = math.nan
            self._surr_steps.append(s)
            self._surr_estimates.append(estimate)
            self._surr_truths.append(truth)
            evaluated = estimate
            self.surrogate_evals += 1
            source = SOURCE_SURROGATE
        else:
            evaluated = self.target.log_likelihood(proposal)
            if s_prob > 0:
                self._staged_inputs.append(proposal)
                self._staged_targets.append(evaluated)
            self.true_evals += 1
            source = SOURCE_TRUE
        self.state = metropolis_step(self.state, proposal, log_q, self.target,
                                     self.rng, proposal_log_lik=evaluated)
        self.history.push(evaluated)
        self._samples.append(self.state.theta)
        self._log_liks.append(self.state.log_lik)
        self._sources.append(source)
        self._phases.append(self.state.phase)
        self.step += 1

    def run_block(self, count: int) -> None:
        for _ in range(count):
            self._one_step()

    def collect(self) -> SurrogateBatch:
        if self._staged_inputs:
            inputs = np.array(self._staged_inputs)
            targets = np.array(self._staged_targets)
        else:
            inputs = np.empty((0, self.parameter_count))
            targets = np.empty(0)
        batch = SurrogateBatch(inputs, targets,
                               np.full(len(targets), self.index, dtype=np.int64))
        self._staged_inputs = []
        self._staged_targets = []
        return batch

    def finish(self) -> ReplicaTrace:
        if self.step != self.max_steps:
            raise ContractError(
                f"replica {self.index} finished at step {self.step}, "
                f"expected {self.max_steps}"
            )
        return ReplicaTrace(
            replica=self.index,
            samples=np.array(self._samples),
            log_liks=np.array(self._log_liks),
            sources=np.array(self._sources),
            phases=np.array(self._phases),
            exploit_start=self.exploit_start,
            true_evals=self.true_evals,
            surrogate_evals=self.surrogate_evals,
            accepted_count=self.state.accepted_count,
            proposed_count=self.state.proposed_count,
            surrogate_steps=np.array(self._surr_steps, dtype=np.int64),
            surrogate_estimates=np.array(self._surr_estimates),
            surrogate_truths=np.array(self._surr_truths),
        )


class _Manager:
    """Swap and surrogate bookkeeping shared by both drivers."""

    def __init__(self, config: SamplerConfig, parameter_count: int,
                 max_steps_list):
        self.config = config
        self.max_steps_list = list(max_steps_list)
        self.rng = np.random.default_rng(config.base_seed
                                         + config.replica_count)
        self.active = config.surrogate_prob > 0
        self.model = None
        if self.active:
            h1, h2 = config.surrogate_hidden
            self.model = SurrogateModel(
                parameter_count, h1, h2,
                seed=config.base_seed + config.replica_count + 1,
            )
        self.train_rmse: list = []
        self.swap_attempts = 0
        self.swap_accepts = 0
        self.alive = config.replica_count
        self.total_blocks = max(
            -(-steps // config.swap_interval) for steps in self.max_steps_list
        )

    def participants(self, block: int) -> list:
        start = block * self.config.swap_interval
        return [i for i, steps in enumerate(self.max_steps_list)
                if steps > start]

    def block_steps(self, block: int, index: int) -> int:
        start = block * self.config.swap_interval
        return min(self.config.swap_interval,
                   self.max_steps_list[index] - start)

    def is_boundary(self, block: int) -> bool:
        return self.active \
            and (block + 1) % self.config.blocks_per_interval == 0

    def sweep(self, states) -> list:
        """Neighbor sweep over the running subset, with mixed-phase guard.

        Unequal step budgets let a short replica enter the exploit phase
        (T=1) while a colder slot is still tempered; such an inverted
        pair is skipped without drawing, everything else follows
        swap_sweep's rules.
        """
        states = list(states)
        accepted = [False] * max(len(states) - 1, 0)
        for p in range(len(states) - 1):
            if p > 0 and accepted[p - 1]:
                continue
            if states[p + 1].temperature < states[p].temperature:
                continue
            self.swap_attempts += 1
            beta = swap_probability(states[p], states[p + 1])
            if self.rng.uniform() <= beta:
                states[p], states[p + 1] = apply_swap(states[p], states[p + 1])
                accepted[p] = True
                self.swap_accepts += 1
        return states

    def train(self, batches):
        """Refit on this interval's rows; returns the broadcast snapshot."""
        merged = SurrogateBatch.concat(batches)
        if merged.rows == 0:
            log.warning("surrogate interval yielded no true-likelihood rows; "
                        "training skipped")
        else:
            self.train_rmse.append(self.model.train(merged))
        return self.model if self.model.train_count > 0 else None

    def mark_done(self) -> None:
        self.alive -= 1
        if self.alive < 0:
            raise ContractError("replica completion signaled twice")


def _run_sequential(config: SamplerConfig, target, parameter_count: int,
                    max_steps_list):
    ladder = build_ladder(config.replica_count, config.max_temp)
    runners = [
        _ReplicaRunner(i, config, target, parameter_count,
                       float(ladder.temps[i]), max_steps_list[i])
        for i in range(config.replica_count)
    ]
    manager = _Manager(config, parameter_count, max_steps_list)
    finished = [False] * config.replica_count
    for block in range(manager.total_blocks):
        parts = manager.participants(block)
        for i in parts:
            runners[i].run_block(manager.block_steps(block, i))
        new_states = manager.sweep([runners[i].state for i in parts])
        for i, state in zip(parts, new_states):
            runners[i].state = state
        if manager.is_boundary(block):
            snapshot = manager.train([runners[i].collect() for i in parts])
            if snapshot is not None:
                for i in parts:
                    runners[i].model = snapshot
        for i in parts:
            if runners[i].step == max_steps_list[i] and not finished[i]:
                finished[i] = True
                manager.mark_done()
    traces = [runner.finish() for runner in runners]
    return traces, manager, ""


class _WorkerFailure(RuntimeError):
    pass


def _worker_main(conn, index: int, config: SamplerConfig, target,
                 parameter_count: int, temperature: float, max_steps: int):
    try:
        runner = _ReplicaRunner(index, config, target, parameter_count,
                                temperature, max_steps)
        blocks = -(-max_steps // config.swap_interval)
        for block in range(blocks):
            start = block * config.swap_interval
            runner.run_block(min(config.swap_interval, max_steps - start))
            conn.send(("sync", index, runner.state))
            _, state = conn.recv()
            runner.state = state
            if config.surrogate_prob > 0 \
                    and (block + 1) % config.blocks_per_interval == 0:
                batch = runner.collect()
                conn.send(("rows", index, batch.inputs, batch.targets))
                _, model = conn.recv()
                if model is not None:
                    runner.model = model
        conn.send(("done", index, runner.finish()))
    except Exception:
        try:
            conn.send(("fail", index, traceback.format_exc()))
        except (BrokenPipeError, OSError):
            pass
    finally:
        conn.close()


def _send(conn, message, index: int):
    try:
        conn.send(message)
    except (BrokenPipeError, OSError) as exc:
        raise _WorkerFailure(f"replica {index} pipe closed ({exc})") from None


def _recv(conn, timeout: float, expect: str, index: int):
    try:
        if not conn.poll(timeout):
            raise _WorkerFailure(
                f"replica {index} sent nothing for {timeout:g}s"
            )
        message = conn.recv()
    except (EOFError, OSError) as exc:
        raise _WorkerFailure(f"replica {index} pipe closed ({exc})") from None
    if message[0] == "fail":
        raise _WorkerFailure(f"replica {index} crashed:\n{message[2]}")
    if message[0] != expect or message[1] != index:
        raise _WorkerFailure(
            f"replica {index} broke protocol: got {message[0]!r}, "
            f"expected {expect!r}"
        )
    return message


def _run_parallel(config: SamplerConfig, target, parameter_count: int,
                  max_steps_list):
    ctx = mp.get_context("spawn")
    ladder = build_ladder(config.replica_count, config.max_temp)
    manager = _Manager(config, parameter_count, max_steps_list)
    pipes, procs = [], []
    traces = [None] * config.replica_count
    failure = ""
    try:
        for i in range(config.replica_count):
            parent_end, child_end = ctx.Pipe()
            proc = ctx.Process(
                target=_worker_main,
                args=(child_end, i, config, target, parameter_count,
                      float(ladder.temps[i]), max_steps_list[i]),
                daemon=True,
            )
            proc.start()
            child_end.close()
            pipes.append(parent_end)
            procs.append(proc)
        timeout = config.worker_timeout
        for block in range(manager.total_blocks):
            parts = manager.participants(block)
            states = [_recv(pipes[i], timeout, "sync", i)[2] for i in parts]
            for i, state in zip(parts, manager.sweep(states)):
                _send(pipes[i], ("state", state), i)
            if manager.is_boundary(block):
                batches = []
                for i in parts:
                    _, _, inputs, targets = _recv(pipes[i], timeout, "rows", i)
                    batches.append(SurrogateBatch(
                        inputs, targets,
                        np.full(len(targets), i, dtype=np.int64)))
                snapshot = manager.train(batches)
                for i in parts:
                    _send(pipes[i], ("model", snapshot), i)
        for i in range(config.replica_count):
            traces[i] = _recv(pipes[i], timeout, "done", i)[2]
            manager.mark_done()
    except _WorkerFailure as exc:
        failure = str(exc)
        log.error("aborting run: %s", failure)
    finally:
        for proc in procs:
            if proc.is_alive():
                proc.terminate()
        for proc in procs:
            proc.join(5.0)
        for pipe in pipes:
            pipe.close()
    return [t for t in traces if t is not None], manager, failure


def run_target(config: SamplerConfig, target, parameter_count: int,
               _max_steps_override=None):
    """Sample any target exposing log_likelihood / log_prior / sse_gradient.

    Returns (PosteriorChain, RunReport). _max_steps_override injects
    unequal per-replica budgets for early-termination tests; production
    runs give every replica total_samples // replica_count steps.
    """
    if parameter_count < 1:
        raise ConfigError("parameter_count must be >= 1")
    if _max_steps_override is None:
        max_steps_list = [config.steps_per_replica] * config.replica_count
    else:
        max_steps_list = [int(s) for s in _max_steps_override]
        if len(max_steps_list) != config.replica_count:
            raise ConfigError("override length must equal replica_count")
        if min(max_steps_list) < 1:
            raise ConfigError("every replica needs at least one step")
    started = time.perf_counter()
    if config.sequential_mode:
        traces, manager, failure = _run_sequential(
            config, target, parameter_count, max_steps_list)
    else:
        traces, manager, failure = _run_parallel(
            config, target, parameter_count, max_steps_list)
    elapsed = time.perf_counter() - started

    truths = np.concatenate([t.surrogate_truths for t in traces]) \
        if traces else np.empty(0)
    estimates = np.concatenate([t.surrogate_estimates for t in traces]) \
        if traces else np.empty(0)
    tracked = np.isfinite(truths)
    prediction_rmse = None
    if tracked.any():
        residual = truths[tracked] - estimates[tracked]
        prediction_rmse = float(np.sqrt(np.mean(residual ** 2)))

    report = RunReport(
        elapsed_seconds=elapsed,
        replica_count=config.replica_count,
        steps_per_replica=config.steps_per_replica,
        true_evals=sum(t.true_evals for t in traces),
        surrogate_evals=sum(t.surrogate_evals for t in traces),
        swap_attempts=manager.swap_attempts,
        swap_accepts=manager.swap_accepts,
        replica_acceptance=[t.acceptance_rate for t in traces],
        train_rmse=list(manager.train_rmse),
        prediction_rmse=prediction_rmse,
        partial=bool(failure),
        failure=failure,
    )
    chain = PosteriorChain(traces=traces, parameter_count=parameter_count)
    return chain, report


def run(config: SamplerConfig, dataset, topology: NetworkTopology):
    """Full protocol on a classification dataset; see run_target."""
    target = BnnPosterior(topology, dataset, config.prior)
    return run_target(config, target, topology.parameter_count)
