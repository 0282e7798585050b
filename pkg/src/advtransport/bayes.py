"""Minimum expected adversarial loss after learning from n samples under a Gaussian prior.

Setup: ``mu ~ N(0, I/m)``, labelled samples ``x | y ~ N(y mu, I)``. After ``n``
samples the posterior mean ``mu_hat`` is ``N(0, I / rho^2)`` with
``rho^2 = m (m + n) / n``, and the best achievable loss is ``E[Q(alpha*(beta, mu_hat))]``.
Equivalently it is the probability that ``V = (X, T) ~ N(0, I_{d+1})`` lands in

    S(rho, beta rho) = {(x, t) : t >= 0, dist_2(x, beta rho B) <= t rho}.

Monte-Carlo estimators share the draw layout below so that, for a fixed seed,
they use the same ``X`` samples (common random numbers):

* trials are processed in blocks of ``BLOCK`` draws;
* block ``b`` reads ``X`` from RNG stream ``2b`` and ``T`` from stream ``2b + 1``.

Results therefore do not depend on the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .gaussian import alpha_star_identity
from .numerics import L2, LINF, BallSpec, ball_norms, q_function, rng_stream

BLOCK = 8192
DEFAULT_TRIALS = 100_000


@dataclass(frozen=True)
class BayesSetup:
    d: int
    m: float
    n: int
    ball: BallSpec
    beta: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if not self.m > 0:
            raise ValueError(f"m must be > 0, got {self.m}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.ball.dim is not None and self.ball.dim != self.d:
            raise ValueError("ball shape dimension does not match d")

    @property
    def rho(self) -> float:
        return rho(self.m, self.n)


@dataclass(frozen=True)
class McEstimate:
    value: float
    standard_error: float
    trials: int
    seed: int
    exact: float | None = None

    def within(self, other: float, n_se: float = 3.0) -> bool:
        return abs(self.value - other) <= n_se * self.standard_error


def binomial_se(p: float, trials: int) -> float:
    """Standard error of an indicator mean whose true success probability is ``p``."""
    p = min(max(p, 0.0), 1.0)
    return math.sqrt(p * (1.0 - p) / trials)


def estimator_agreement(posterior: McEstimate, membership: McEstimate) -> float:
    """Discrepancy between the two loss estimators in combined standard errors.

    The indicator's binomial error is evaluated at the posterior-average value:
    a plug-in ``p(1 - p)`` collapses to zero when a rare event is never hit.
    """
    se = math.hypot(posterior.standard_error, binomial_se(posterior.value, membership.trials))
    diff = abs(posterior.value - membership.value)
    if se == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / se


def rho(m: float, n: int) -> float:
    """Posterior signal scale ``sqrt(m (m + n) / n)``."""
    if not m > 0 or n < 1:
        raise ValueError(f"need m > 0 and n >= 1, got m={m}, n={n}")
    return math.sqrt(m * (m + n) / n)


def _blocks(trials: int):
    if trials < 1:
        raise ValueError("trials must be >= 1")
    full, rest = divmod(trials, BLOCK)
    return [BLOCK] * full + ([rest] if rest else [])


def _run_blocks(setup: BayesSetup, trials: int, seed: int, fn, need_t: bool, workers: int) -> np.ndarray:
    sizes = _blocks(trials)

    def one(b):
        x = rng_stream(seed, 2 * b).standard_normal((sizes[b], setup.d))
        t = rng_stream(seed, 2 * b + 1).standard_normal(sizes[b]) if need_t else None
        return fn(x, t)

    if workers <= 1:
        parts = [one(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    return np.concatenate(parts)


def _indicator_estimate(hits: np.ndarray, seed: int, exact=None) -> McEstimate:
    p = float(np.mean(hits))
    se = math.sqrt(p * (1.0 - p) / len(hits))
    return McEstimate(p, se, len(hits), seed, exact)


def bayes_loss_via_posterior(setup: BayesSetup, trials: int = DEFAULT_TRIALS, seed: int = 0,
                             workers: int = 1) -> McEstimate:
    """Average of ``Q(alpha*(beta, mu_hat))`` over posterior-mean draws ``mu_hat = X / rho``."""
    r = setup.rho

    def fn(x, _t):
        return q_function(alpha_star_identity(x / r, setup.ball, setup.beta))

    vals = _run_blocks(setup, trials, seed, fn, False, workers)
    se = float(np.std(vals, ddof=1)) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
    return McEstimate(float(np.mean(vals)), se, len(vals), seed)


def in_s_region(x, t, scale: float, radius: float, ball: BallSpec) -> np.ndarray:
    """Membership of rows ``(x, t)`` in ``S(scale, radius)``: ``x`` within ``t * scale`` (l2) of ``radius * B``.

    Only ``t >= 0`` can qualify.
    """
    dist = alpha_star_identity(x, ball, radius)
    return (np.asarray(t) >= 0) & (dist <= np.asarray(t) * scale)


def bayes_loss_via_membership(setup: BayesSetup, trials: int = DEFAULT_TRIALS, seed: int = 0,
                              workers: int = 1) -> McEstimate:
    """Fraction of ``V = (X, T) ~ N(0, I)`` draws inside ``S(rho, beta rho)``."""
    r = setup.rho

    def fn(x, t):
        return in_s_region(x, t, r, setup.beta * r, setup.ball)

    return _indicator_estimate(_run_blocks(setup, trials, seed, fn, True, workers), seed)


def ball_probability_exact(d: int, radius: float, ball: BallSpec) -> float | None:
    """``Pr[X in radius * B]`` for ``X ~ N(0, I_d)`` where a closed form exists (l-infinity, l2)."""
    if ball.kind == LINF:
        return float(special.erf(radius / math.sqrt(2.0)) ** d)
    if ball.kind == L2:
        return float(stats.chi2.cdf(radius * radius, d))
    return None


def ball_probability(setup: BayesSetup, trials: int = DEFAULT_TRIALS, seed: int = 0,
                     workers: int = 1) -> McEstimate:
    """``Pr[X in beta rho B]``: posteriors of the two classes are adversarially indistinguishable.

    For l-infinity the exact value ``(1 - 2 Q(beta rho))^d`` is attached.
    """
    radius = setup.beta * setup.rho

    def fn(x, _t):
        return ball_norms(x, setup.ball) <= radius

    hits = _run_blocks(setup, trials, seed, fn, False, workers)
    return _indicator_estimate(hits, seed, ball_probability_exact(setup.d, radius, setup.ball))


def schmidt_lower_bound(setup: BayesSetup, trials: int = DEFAULT_TRIALS, seed: int = 0,
                        workers: int = 1) -> McEstimate:
    """The noise-free comparison bound ``Pr[V in S(0, beta rho)]`` (half the indistinguishable mass)."""
    radius = setup.beta * setup.rho

    def fn(x, t):
        return (t >= 0) & (ball_norms(x, setup.ball) <= radius)

    hits = _run_blocks(setup, trials, seed, fn, True, workers)
    exact = ball_probability_exact(setup.d, radius, setup.ball)
    return _indicator_estimate(hits, seed, None if exact is None else 0.5 * exact)
