"""Adversarial robustness for the symmetric Gaussian pair N(mu, Sigma) vs N(-mu, Sigma).

The adversary adds any perturbation in ``beta * B``. The optimal loss is
``Q(alpha)`` where ``alpha`` is the smallest inverse-covariance norm
``|mu - z|_Sigma`` over ``|z|_B <= beta``; the optimal coupling cost is
``1 - 2 Q(alpha)``. Solvers return a certificate ``(z, y, w, gamma)`` whose
equalities can be checked independently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .numerics import (
    L2,
    LINF,
    MAHALANOBIS,
    BallSpec,
    SpdMatrix,
    ball_norm,
    ball_norms,
    dual_norm,
    project_ball,
    q_function,
    sigma_seminorm,
)

CLOSED_FORM_TOL = 1e-12
GENERIC_TOL = 1e-6


@dataclass(frozen=True)
class GaussianProblem:
    mu: np.ndarray
    sigma: SpdMatrix
    ball: BallSpec
    beta: float

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        if mu.ndim != 1:
            raise ValueError("mu must be a vector")
        if mu.shape[0] != self.sigma.dim:
            raise ValueError(f"mu has dimension {mu.shape[0]}, sigma has {self.sigma.dim}")
        if self.ball.dim is not None and self.ball.dim != mu.shape[0]:
            raise ValueError("ball shape dimension does not match mu")
        if not self.beta >= 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if not np.all(np.isfinite(mu)):
            raise ValueError("mu must be finite")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    def with_beta(self, beta: float) -> "GaussianProblem":
        return GaussianProblem(self.mu, self.sigma, self.ball, beta)


@dataclass(frozen=True)
class AlphaCertificate:
    """Primal point ``z`` (with ``y = mu - z``) and dual direction ``w``.

    ``residuals`` are, in order: ``|y|_Sigma - alpha``, ``|z|_B - beta``,
    ``|w|_Sigma* - 1``, ``|w|_B* - gamma``, ``w.y - alpha``, ``w.z - beta*gamma``.
    When ``degenerate`` (``y = 0``) no unit ``w`` exists; ``w`` is zero and
    the three ``w``-normalisation residuals are NaN.
    """

    alpha: float
    z: np.ndarray
    y: np.ndarray
    w: np.ndarray
    gamma: float
    residuals: tuple[float, ...]
    duality_gap: float
    converged: bool = True
    degenerate: bool = False
    iterations: int = 0
    method: str = ""

    @property
    def dual_value(self) -> float:
        """Lower bound ``mu.w - beta*gamma`` on alpha certified by ``w``."""
        return self.alpha - self.duality_gap

    def max_residual(self) -> float:
        r = list(self.residuals)
        if self.degenerate:
            # slack budget is allowed once the whole mean is erased
            r[1] = max(r[1], 0.0)
        vals = [abs(v) for v in r if not math.isnan(v)]
        return max(vals + [abs(self.duality_gap)])

    def is_valid(self, tol: float) -> bool:
        return self.max_residual() <= tol * (1.0 + abs(self.alpha))


def _certificate(problem: GaussianProblem, z, *, method: str, iterations: int = 0, converged: bool = True,
                 w_hint=None) -> AlphaCertificate:
    mu, sigma, ball, beta = problem.mu, problem.sigma, problem.ball, problem.beta
    z = np.array(z, dtype=float)
    y = mu - z
    alpha = sigma_seminorm(y, sigma)
    zb = ball_norm(z, ball)
    if alpha == 0.0:
        nan = float("nan")
        res = (0.0, zb - beta, nan, nan, 0.0, nan)
        return AlphaCertificate(0.0, z, y, np.zeros_like(mu), 0.0, res, 0.0, converged, True, iterations, method)
    w = sigma.solve(y) / alpha if w_hint is None else np.asarray(w_hint, dtype=float)
    gamma = dual_norm(w, ball)
    w_sigma_star = math.sqrt(max(float(w @ sigma.matrix @ w), 0.0))
    res = (
        0.0,  # alpha is defined as |y|_Sigma
        zb - beta,
        w_sigma_star - 1.0,
        dual_norm(w, ball) - gamma,
        float(w @ y) - alpha,
        float(w @ z) - beta * gamma,
    )
    gap = alpha - (float(mu @ w) - beta * gamma)
    return AlphaCertificate(alpha, z, y, w, gamma, res, gap, converged, False, iterations, method)


def alpha_star_matching_norm(problem: GaussianProblem) -> AlphaCertificate:
    """Closed form when ``B`` is the covariance ellipsoid: ``alpha = (|mu|_Sigma - beta)_+``.

    The optimal erosion is ``z = beta mu / |mu|_Sigma`` and one direction
    ``w = Sigma^{-1} mu / |mu|_Sigma`` is optimal at every budget.
    """
    ball, sigma = problem.ball, problem.sigma
    if ball.kind != MAHALANOBIS or not np.allclose(ball.shape.matrix, sigma.matrix, rtol=1e-12, atol=0):
        raise ValueError("matching-norm closed form needs the ellipsoid ball of the covariance")
    norm_mu = sigma_seminorm(problem.mu, sigma)
    if norm_mu <= problem.beta:
        return _certificate(problem, problem.mu.copy(), method="matching-norm")
    z = problem.beta * problem.mu / norm_mu
    w = sigma.solve(problem.mu) / norm_mu
    return _certificate(problem, z, method="matching-norm", w_hint=w)


def alpha_star_linf_explicit(problem: GaussianProblem) -> AlphaCertificate:
    """Identity covariance with an l-infinity adversary: clip each coordinate of mu to ``[-beta, beta]``."""
    if problem.ball.kind != LINF or not problem.sigma.is_identity():
        raise ValueError("explicit l-infinity solution needs Sigma = I and an l-infinity ball")
    z = np.sign(problem.mu) * np.minimum(np.abs(problem.mu), problem.beta)
    return _certificate(problem, z, method="linf-explicit")


def _power_iteration_inverse(sigma: SpdMatrix, iters: int = 500, rtol: float = 1e-12) -> float:
    """Largest eigenvalue of ``Sigma^{-1}``."""
    d = sigma.dim
    v = np.ones(d) / math.sqrt(d) + np.linspace(0.0, 1e-3, d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        u = sigma.solve(v)
        new = float(np.linalg.norm(u))
        if new == 0.0:
            return 0.0
        v = u / new
        if abs(new - lam) <= rtol * new:
            lam = new
            break
        lam = new
    return lam


def alpha_star_generic(problem: GaussianProblem, tol: float = 1e-10, max_iters: int = 100_000) -> AlphaCertificate:
    """Projected gradient descent on ``(mu - z)^T Sigma^{-1} (mu - z)`` over ``beta * B``.

    Fixed step ``1 / L`` with ``L = 2 lambda_max(Sigma^{-1})``. Stops when every
    certificate residual and the duality gap are within ``tol * (1 + alpha)``;
    otherwise returns the best iterate with ``converged=False``.
    """
    mu, sigma, ball, beta = problem.mu, problem.sigma, problem.ball, problem.beta
    if beta == 0.0:
        return _certificate(problem, np.zeros_like(mu), method="generic")
    # power iteration converges from below; the margin keeps the step safe
    lip = 2.0 * _power_iteration_inverse(sigma) * (1.0 + 1e-6)
    step = 1.0 / lip
    z = project_ball(mu, ball, beta)
    best = None
    for it in range(max_iters + 1):
        cert = _certificate(problem, z, method="generic", iterations=it)
        if best is None or cert.max_residual() < best.max_residual():
            best = cert
        if cert.is_valid(tol):
            return cert
        z = project_ball(z + 2.0 * step * sigma.solve(mu - z), ball, beta)
    return AlphaCertificate(best.alpha, best.z, best.y, best.w, best.gamma, best.residuals, best.duality_gap,
                            False, best.degenerate, best.iterations, best.method)


def alpha_star(problem: GaussianProblem, tol: float = 1e-10, max_iters: int = 100_000) -> AlphaCertificate:
    """Closed form where one applies, the generic solver otherwise."""
    ball, sigma = problem.ball, problem.sigma
    if ball.kind == LINF and sigma.is_identity():
        return alpha_star_linf_explicit(problem)
    if ball.kind == MAHALANOBIS and np.allclose(ball.shape.matrix, sigma.matrix, rtol=1e-12, atol=0):
        return alpha_star_matching_norm(problem)
    if ball.kind == L2 and sigma.is_identity():
        return alpha_star_matching_norm(GaussianProblem(problem.mu, sigma, BallSpec(MAHALANOBIS, sigma), problem.beta))
    return alpha_star_generic(problem, tol=tol, max_iters=max_iters)


def alpha_star_identity(mu, ball: BallSpec, beta: float) -> np.ndarray:
    """``alpha*`` for ``Sigma = I``: the Euclidean distance from each row of ``mu`` to ``beta * B``."""
    mu = np.asarray(mu, dtype=float)
    return ball_norms(mu - project_ball(mu, ball, beta), BallSpec(L2))


def optimal_adv_loss(alpha: float) -> float:
    """Minimum adversarial 0-1 loss ``Q(alpha)``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return q_function(alpha)


def optimal_transport_cost(alpha: float) -> float:
    """Coupling cost ``1 - 2 Q(alpha)``, evaluated as ``erf(alpha / sqrt 2)``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return float(special.erf(alpha / math.sqrt(2.0)))


def tv_gaussians_symmetric(mu_eff, sigma: SpdMatrix) -> float:
    """Total variation between ``N(mu_eff, Sigma)`` and ``N(-mu_eff, Sigma)``."""
    return optimal_transport_cost(sigma_seminorm(mu_eff, sigma))


def translate_and_pair_upper_bound(problem: GaussianProblem, z) -> float:
    """Cost of shifting the two classes by ``-z`` and ``+z`` and coupling them in place."""
    z = np.asarray(z, dtype=float)
    if ball_norm(z, problem.ball) > problem.beta * (1.0 + 1e-9):
        raise ValueError("translation z lies outside beta * B")
    return tv_gaussians_symmetric(problem.mu - z, problem.sigma)


def linear_classifier_adv_loss(problem: GaussianProblem, w) -> float:
    """Adversarial 0-1 loss of ``sign(w.x)`` against a worst-case ``beta * B`` perturbation.

    Equals ``Q((w.mu - beta |w|_B*) / sqrt(w^T Sigma w))``.
    """
    w = np.asarray(w, dtype=float)
    if not np.any(w):
        raise ValueError("w must be nonzero")
    scale = math.sqrt(float(w @ problem.sigma.matrix @ w))
    margin = float(w @ problem.mu) - problem.beta * dual_norm(w, problem.ball)
    return q_function(margin / scale)
