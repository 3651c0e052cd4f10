"""Picklable stand-in targets for sampler tests.

Defined in a real module (not inline in a test) so spawned worker
processes can unpickle them by import.
"""
import time

import numpy as np


class QuadraticTarget:
    """Smooth bowl: log-density and squared-error share the same center."""

    def __init__(self, center, lik_scale=1.0):
        self.center = np.asarray(center, dtype=np.float64)
        self.lik_scale = float(lik_scale)

    def log_likelihood(self, theta):
        d = theta - self.center
        return float(-0.5 * d @ d / self.lik_scale**2)

    def log_prior(self, theta):
        return float(-0.5 * theta @ theta / 100.0)

    def sse_gradient(self, theta):
        # E = |theta - center|^2, so the descent direction is -2d.
        return 2.0 * (theta - self.center)


class GaussianToyTarget:
    """1-D conjugate setup: y_i ~ N(theta, noise_sd^2), theta ~ N(0, prior_var).

    Constants are dropped; Metropolis only ever sees differences.
    """

    def __init__(self, y, noise_sd, prior_var):
        self.y = np.asarray(y, dtype=np.float64)
        self.noise_sd = float(noise_sd)
        self.prior_var = float(prior_var)

    def log_likelihood(self, theta):
        r = self.y - theta[0]
        return float(-0.5 * r @ r / self.noise_sd**2)

    def log_prior(self, theta):
        return float(-0.5 * theta[0] ** 2 / self.prior_var)

    def sse_gradient(self, theta):
        return np.array([-2.0 * np.sum(self.y - theta[0])])

    def posterior_mean_sd(self):
        n = self.y.size
        precision = n / self.noise_sd**2 + 1.0 / self.prior_var
        mean = (self.y.sum() / self.noise_sd**2) / precision
        return mean, np.sqrt(1.0 / precision)


class SleepyTarget(QuadraticTarget):
    """Stalls every likelihood call; drives the worker-timeout path."""

    def __init__(self, center, delay):
        super().__init__(center)
        self.delay = float(delay)

    def log_likelihood(self, theta):
        time.sleep(self.delay)
        return super().log_likelihood(theta)


class FailingTarget(QuadraticTarget):
    """Raises after a fixed number of likelihood calls in one process."""

    def __init__(self, center, fail_after):
        super().__init__(center)
        self.fail_after = int(fail_after)
        self.calls = 0

    def log_likelihood(self, theta):
        self.calls += 1
        if self.calls > self.fail_after:
            raise RuntimeError("likelihood backend gave up")
        return super().log_likelihood(theta)
