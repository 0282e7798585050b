import math

import numpy as np
import pytest
from scipy import integrate, stats

from advtransport.gaussian import (
    GaussianProblem,
    alpha_star,
    alpha_star_generic,
    alpha_star_identity,
    alpha_star_linf_explicit,
    alpha_star_matching_norm,
    linear_classifier_adv_loss,
    optimal_adv_loss,
    optimal_transport_cost,
    translate_and_pair_upper_bound,
    tv_gaussians_symmetric,
)
from advtransport.numerics import BallSpec, SpdMatrix, ball_norm, q_function, sigma_seminorm

from .conftest import random_spd

I2 = SpdMatrix.identity(2)


def _problem(mu, beta, ball="linf", sigma=None):
    sigma = SpdMatrix.identity(len(mu)) if sigma is None else sigma
    b = BallSpec("mahalanobis", sigma) if ball == "match" else BallSpec(ball)
    return GaussianProblem(np.asarray(mu, dtype=float), sigma, b, beta)


def test_matching_norm_examples():
    assert alpha_star_matching_norm(_problem([3.0, 0.0], 1.0, "match")).alpha == 2.0
    sigma = SpdMatrix(np.diag([4.0, 1.0]))
    mu = np.array([2.0, 1.0])
    norm = sigma_seminorm(mu, sigma)
    assert alpha_star_matching_norm(_problem(mu, 0.0, "match", sigma)).alpha == pytest.approx(norm, rel=1e-15)
    cert = alpha_star_matching_norm(_problem(mu, norm, "match", sigma))
    assert cert.alpha == pytest.approx(0.0, abs=1e-15)


def test_linf_explicit_examples():
    cert = alpha_star_linf_explicit(_problem([2.0, 0.5], 1.0))
    np.testing.assert_array_equal(cert.z, [1.0, 0.5])
    np.testing.assert_array_equal(cert.y, [1.0, 0.0])
    assert cert.alpha == 1.0
    assert alpha_star_linf_explicit(_problem([2.0, -0.5], 2.0)).alpha == 0.0
    assert alpha_star_linf_explicit(_problem([3.0, -4.0], 0.0)).alpha == 5.0


def test_closed_form_certificates(rng):
    for _ in range(50):
        d = int(rng.integers(1, 15))
        mu = rng.standard_normal(d) * 2
        beta = float(rng.uniform(0, 2))
        c = alpha_star_linf_explicit(_problem(mu, beta))
        assert c.is_valid(1e-12)
        sigma = random_spd(rng, d)
        c = alpha_star_matching_norm(_problem(mu, beta, "match", sigma))
        assert c.is_valid(1e-12)


def test_generic_matches_closed_forms(rng):
    for _ in range(30):
        d = int(rng.integers(1, 30))
        mu = rng.standard_normal(d) * 2
        beta = float(rng.uniform(0, 2))
        p = _problem(mu, beta)
        assert abs(alpha_star_generic(p).alpha - alpha_star_linf_explicit(p).alpha) <= 1e-6
        sigma = random_spd(rng, min(d, 12))
        mu = mu[: sigma.dim]
        p = _problem(mu, beta, "match", sigma)
        expected = max(sigma_seminorm(mu, sigma) - beta, 0.0)
        assert abs(alpha_star_generic(p).alpha - expected) <= 1e-8


def test_generic_beta_zero_exact(rng):
    for ball in ("l1", "l2", "linf"):
        sigma = random_spd(rng, 4)
        mu = rng.standard_normal(4)
        assert alpha_star_generic(_problem(mu, 0.0, ball, sigma)).alpha == sigma_seminorm(mu, sigma)


def _alpha_oracle(mu, sigma, ball, beta):
    import cvxpy as cp

    z = cp.Variable(len(mu))
    lw = np.linalg.inv(sigma.chol)
    norm = {"l1": cp.norm1, "l2": cp.norm2, "linf": cp.norm_inf}[ball]
    prob = cp.Problem(cp.Minimize(cp.norm2(lw @ (mu - z))), [norm(z) <= beta])
    prob.solve()
    return prob.value


def test_generic_vs_convex_solver(rng):
    for _ in range(15):
        d = int(rng.integers(2, 8))
        sigma = random_spd(rng, d)
        mu = rng.standard_normal(d) * 2
        for ball in ("l1", "l2", "linf"):
            beta = float(rng.uniform(0.1, 1.5))
            cert = alpha_star_generic(_problem(mu, beta, ball, sigma))
            assert cert.converged and cert.is_valid(1e-6)
            assert cert.alpha == pytest.approx(_alpha_oracle(mu, sigma, ball, beta), abs=1e-5)


def test_dispatch_methods(rng):
    assert alpha_star(_problem([1.0, 2.0], 0.5)).method == "linf-explicit"
    assert alpha_star(_problem([1.0, 2.0], 0.5, "l2")).method == "matching-norm"
    assert alpha_star(_problem([1.0, 2.0], 0.5, "l1")).method == "generic"


def test_loss_and_cost_examples():
    assert optimal_adv_loss(0.0) == 0.5
    assert optimal_transport_cost(0.0) == 0.0
    assert optimal_adv_loss(1.0) == pytest.approx(0.158655253931457, rel=1e-14)
    assert optimal_adv_loss(40.0) < 1e-300
    assert optimal_transport_cost(40.0) == 1.0
    with pytest.raises(ValueError):
        optimal_adv_loss(-1.0)


def test_tv_against_quadrature():
    # TV = integral of max(p - q, 0) over the line joining the means (1-D after whitening)
    def tv_quad(a):
        f = lambda x: max(stats.norm.pdf(x, a, 1) - stats.norm.pdf(x, -a, 1), 0.0)
        return integrate.quad(f, 0, a + 40, epsabs=1e-13, epsrel=1e-13)[0]

    assert tv_gaussians_symmetric(np.zeros(3), SpdMatrix.identity(3)) == 0.0
    assert tv_gaussians_symmetric([1.0, 0.0], I2) == pytest.approx(0.682689492137086, rel=1e-13)
    for a in (0.1, 0.5, 1.0, 2.0, 3.5):
        assert tv_gaussians_symmetric([a], SpdMatrix.identity(1)) == pytest.approx(tv_quad(a), abs=1e-11)
    assert tv_gaussians_symmetric([50.0, 0.0], I2) == 1.0


def test_translate_and_linear_bounds_examples(rng):
    sigma = random_spd(rng, 3)
    mu = rng.standard_normal(3)
    p = _problem(mu, 0.0, "l2", sigma)
    assert translate_and_pair_upper_bound(p, np.zeros(3)) == pytest.approx(1 - 2 * q_function(sigma_seminorm(mu, sigma)))
    w = sigma.solve(mu)
    assert linear_classifier_adv_loss(p, w) == pytest.approx(q_function(sigma_seminorm(mu, sigma)), rel=1e-12)
    with pytest.raises(ValueError):
        translate_and_pair_upper_bound(_problem(mu, 0.1, "l2", sigma), np.ones(3))
    with pytest.raises(ValueError):
        linear_classifier_adv_loss(p, np.zeros(3))


def test_bounds_sandwich_at_certificate(rng):
    for _ in range(30):
        d = int(rng.integers(1, 10))
        sigma = random_spd(rng, d)
        mu = rng.standard_normal(d) * 2
        ball = str(rng.choice(["l1", "l2", "linf"]))
        p = _problem(mu, float(rng.uniform(0.05, 1.0)), ball, sigma)
        cert = alpha_star(p)
        target = 1 - 2 * q_function(cert.alpha)
        upper = translate_and_pair_upper_bound(p, cert.z)
        if cert.degenerate:
            assert upper == pytest.approx(0.0, abs=1e-12)
            continue
        lower = 1 - 2 * linear_classifier_adv_loss(p, cert.w)
        assert upper - lower <= 1e-6
        assert abs(upper - target) <= 1e-6 and abs(lower - target) <= 1e-6


def test_bounds_optimality_property(rng):
    for _ in range(40):
        d = int(rng.integers(1, 6))
        sigma = random_spd(rng, d)
        mu = rng.standard_normal(d) * 2
        ball = BallSpec(str(rng.choice(["l1", "l2", "linf"])))
        beta = float(rng.uniform(0.05, 1.0))
        p = GaussianProblem(mu, sigma, ball, beta)
        a = alpha_star(p).alpha
        for _ in range(10):
            z = rng.standard_normal(d)
            z *= beta * rng.uniform() / ball_norm(z, ball)
            assert translate_and_pair_upper_bound(p, z) >= 1 - 2 * q_function(a) - 1e-9
            assert linear_classifier_adv_loss(p, rng.standard_normal(d)) >= q_function(a) - 1e-9


def test_alpha_nonincreasing_convex_in_beta(rng):
    sigma = random_spd(rng, 4)
    mu = rng.standard_normal(4) * 2
    betas = np.linspace(0, 2, 41)
    for ball in ("l1", "l2", "linf"):
        p = _problem(mu, 0.0, ball, sigma)
        a = np.array([alpha_star(p.with_beta(b)).alpha for b in betas])
        assert np.all(np.diff(a) <= 1e-9)
        assert np.all(a[:-2] - 2 * a[1:-1] + a[2:] >= -1e-8)


def test_scale_equivariance(rng):
    # alpha*(c beta, c mu; c^2 Sigma) = alpha*(beta, mu; Sigma)
    for ball in ("l1", "l2", "linf"):
        sigma = random_spd(rng, 3)
        mu = rng.standard_normal(3)
        c = 2.5
        a1 = alpha_star(_problem(mu, 0.4, ball, sigma)).alpha
        a2 = alpha_star(_problem(c * mu, c * 0.4, ball, SpdMatrix(c * c * sigma.matrix))).alpha
        assert a1 == pytest.approx(a2, abs=1e-8)


def test_endpoint_zero_when_mu_in_ball(rng):
    for ball in ("l1", "l2", "linf"):
        mu = rng.standard_normal(5)
        p = _problem(mu, ball_norm(mu, BallSpec(ball)) * 1.01, ball, random_spd(rng, 5))
        cert = alpha_star(p)
        assert cert.alpha <= 1e-8
        assert optimal_adv_loss(cert.alpha) == pytest.approx(0.5, abs=1e-8)


def test_alpha_star_identity_batched(rng):
    x = rng.standard_normal((20, 4))
    for ball in ("l1", "l2", "linf"):
        batch = alpha_star_identity(x, BallSpec(ball), 0.3)
        single = [alpha_star(_problem(r, 0.3, ball)).alpha for r in x]
        np.testing.assert_allclose(batch, single, atol=1e-8)


def test_problem_validation():
    with pytest.raises(ValueError):
        _problem([1.0, 2.0], -0.1)
    with pytest.raises(ValueError):
        GaussianProblem(np.ones(3), I2, BallSpec("l2"), 0.1)
    with pytest.raises(ValueError):
        alpha_star_linf_explicit(_problem([1.0, 2.0], 0.1, "l2"))
    assert math.isnan(alpha_star(_problem([0.1, 0.1], 1.0)).residuals[2])
