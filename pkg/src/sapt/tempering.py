"""Single-replica Metropolis-Hastings stepping and replica exchange.

A replica is one chain pinned to a ladder slot. The likelihood term in
its acceptance ratio is divided by the slot temperature; the prior and
any proposal-density correction enter untempered. Swap decisions between
neighboring slots compare untempered log-likelihoods.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigError, ContractError

log = logging.getLogger(__name__)

KIND_RANDOM_WALK = "random_walk"
KIND_LANGEVIN_MIX = "langevin_mix"

PHASE_TEMPERED = "tempered"
PHASE_EXPLOIT = "exploit"


@dataclass(frozen=True)
class TemperatureLadder:
    temps: np.ndarray
    max_temp: float
    replica_count: int


def build_ladder(replica_count: int, max_temp: float) -> TemperatureLadder:
    """Geometric temperature ladder from 1.0 up to max_temp.

    temps[i] = max_temp ** (i / (replica_count - 1)); both endpoints are
    exact. max_temp = 1 is allowed and gives a flat all-ones ladder.
    """
    if replica_count < 2:
        raise ConfigError(f"ladder needs at least 2 replicas, got {replica_count}")
    if max_temp < 1.0:
        raise ConfigError(f"max_temp must be >= 1, got {max_temp}")
    exponents = np.arange(replica_count) / (replica_count - 1)
    temps = float(max_temp) ** exponents
    temps[0] = 1.0
    temps[-1] = float(max_temp)
    return TemperatureLadder(temps=temps, max_temp=float(max_temp),
                             replica_count=replica_count)


@dataclass(frozen=True)
class ReplicaState:
    """Sampler state of one ladder slot.

    log_lik and log_prior cache the current theta's values so rejected
    steps cost nothing; log_lik is stored untempered. Counters describe
    the slot, so swaps move theta and the caches but not the counters.
    """

    theta: np.ndarray
    temperature: float
    log_lik: float
    log_prior: float
    accepted_count: int = 0
    proposed_count: int = 0
    rng_seed: int = 0
    phase: str = PHASE_TEMPERED

    @property
    def acceptance_rate(self) -> float:
        if self.proposed_count == 0:
            return 0.0
        return self.accepted_count / self.proposed_count


@dataclass(frozen=True)
class ProposalConfig:
    kind: str = KIND_RANDOM_WALK
    rw_step_sd: float = 0.025
    lg_learning_rate: float = 0.5
    lg_prob: float = 0.5

    def __post_init__(self):
        if self.kind not in (KIND_RANDOM_WALK, KIND_LANGEVIN_MIX):
            raise ConfigError(f"unknown proposal kind {self.kind!r}")
        if self.rw_step_sd <= 0:
            raise ConfigError("rw_step_sd must be positive")
        if self.lg_learning_rate <= 0:
            raise ConfigError("lg_learning_rate must be positive")
        if not 0.0 <= self.lg_prob <= 1.0:
            raise ConfigError("lg_prob must lie in [0,1]")


def propose_rw(theta: np.ndarray, step_sd: float, rng) -> np.ndarray:
    """Random-walk proposal: theta plus iid Gaussian noise (symmetric)."""
    if step_sd <= 0:
        raise ContractError(f"step_sd must be positive, got {step_sd}")
    return theta + rng.normal(0.0, step_sd, size=theta.shape)


def langevin_log_q_ratio(theta, proposal, grad_theta, grad_proposal,
                         learning_rate: float, step_sd: float) -> float:
    """log q(theta | proposal) - log q(proposal | theta).

    Both proposal densities are isotropic Gaussians centered one descent
    step away from their conditioning point; the shared normalization
    cancels, leaving only the two quadratic forms.
    """
    mean_fwd = theta - learning_rate * grad_theta
    mean_rev = proposal - learning_rate * grad_proposal
    two_var = 2.0 * step_sd * step_sd
    log_fwd = -float(np.sum((proposal - mean_fwd) ** 2)) / two_var
    log_rev = -float(np.sum((theta - mean_rev) ** 2)) / two_var
    return log_rev - log_fwd


def propose_langevin(theta: np.ndarray, target, config: ProposalConfig, rng):
    """Gradient-drift proposal with its proposal-density correction.

    The mean takes one descent step on the squared-error surface
    (theta - learning_rate * gradient) before Gaussian noise of
    rw_step_sd is added. Returns (proposal, log_q_ratio); the ratio
    needs a second gradient evaluation at the proposal.
    """
    if config.lg_learning_rate <= 0:
        raise ContractError("lg_learning_rate must be positive")
    grad = target.sse_gradient(theta)
    mean_fwd = theta - config.lg_learning_rate * grad
    proposal = mean_fwd + rng.normal(0.0, config.rw_step_sd, size=theta.shape)
    grad_star = target.sse_gradient(proposal)
    ratio = langevin_log_q_ratio(theta, proposal, grad, grad_star,
                                 config.lg_learning_rate, config.rw_step_sd)
    return proposal, ratio


def make_proposal(theta: np.ndarray, target, config: ProposalConfig, rng):
    """Next proposal per the configured scheme -> (proposal, log_q_ratio).

    langevin_mix draws the scheme selector before any proposal noise so
    a replica's RNG stream is consumed in a fixed order.
    """
    if config.kind == KIND_RANDOM_WALK:
        return propose_rw(theta, config.rw_step_sd, rng), 0.0
    if rng.uniform() < config.lg_prob:
        return propose_langevin(theta, target, config, rng)
    return propose_rw(theta, config.rw_step_sd, rng), 0.0


def acceptance_probability(delta_log_lik: float, temperature: float,
                           delta_log_prior: float, log_q_ratio: float) -> float:
    """min(1, exp(delta_log_lik / T + delta_log_prior + log_q_ratio)).

    Only the likelihood difference is tempered. Returns nan when the
    exponent is not finite; callers treat that as a rejection.
    """
    if temperature <= 0:
        raise ContractError(f"temperature must be positive, got {temperature}")
    exponent = delta_log_lik / temperature + delta_log_prior + log_q_ratio
    if not np.isfinite(exponent):
        return float("nan")
    return float(np.exp(min(0.0, exponent)))


def metropolis_step(state: ReplicaState, proposal: np.ndarray,
                    log_q_ratio: float, target, rng,
                    proposal_log_lik: float | None = None,
                    proposal_log_prior: float | None = None) -> ReplicaState:
    """One tempered accept/reject decision for a replica.

    Evaluates the target at the proposal unless precomputed values are
    passed in (the surrogate path hands over its blended estimate that
    way). On acceptance the returned state carries the proposal and its
    cached values; on rejection only proposed_count changes, so the
    caller's chain records the previous sample again. A non-finite
    acceptance exponent rejects and logs a diagnostic.
    """
    prop_ll = float(proposal_log_lik) if proposal_log_lik is not None \
        else target.log_likelihood(proposal)
    prop_lp = float(proposal_log_prior) if proposal_log_prior is not None \
        else target.log_prior(proposal)
    prob = acceptance_probability(prop_ll - state.log_lik, state.temperature,
                                  prop_lp - state.log_prior, log_q_ratio)
    u = rng.uniform()
    if np.isnan(prob):
        log.warning("non-finite acceptance exponent at T=%g (log_lik*=%g); "
                    "rejecting", state.temperature, prop_ll)
        accept = False
    else:
        accept = u <= prob
    if accept:
        return replace(state, theta=proposal, log_lik=prop_ll,
                       log_prior=prop_lp,
                       accepted_count=state.accepted_count + 1,
                       proposed_count=state.proposed_count + 1)
    return replace(state, proposed_count=state.proposed_count + 1)


def swap_probability(state_i: ReplicaState, state_j: ReplicaState) -> float:
    """Exchange probability for a (cold, hot) neighbor pair.

    beta = min(1, exp((1/T_j - 1/T_i) * (L_j - L_i))) with untempered
    log-likelihoods. Equal temperatures (the all-ones exploit ladder)
    give beta = 1; a pair ordered hot-to-cold is a contract violation.
    """
    if state_j.temperature < state_i.temperature:
        raise ContractError(
            f"swap pair must be ordered cold to hot, got temperatures "
            f"{state_i.temperature} and {state_j.temperature}"
        )
    exponent = (1.0 / state_j.temperature - 1.0 / state_i.temperature) \
        * (state_j.log_lik - state_i.log_lik)
    return float(np.exp(min(0.0, exponent)))


def apply_swap(state_i: ReplicaState, state_j: ReplicaState):
    """Exchange theta and cached values; slots keep temperature, phase
    and counters."""
    new_i = replace(state_i, theta=state_j.theta, log_lik=state_j.log_lik,
                    log_prior=state_j.log_prior)
    new_j = replace(state_j, theta=state_i.theta, log_lik=state_i.log_lik,
                    log_prior=state_i.log_prior)
    return new_i, new_j
