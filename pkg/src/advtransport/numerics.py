"""Shared numerics: Gaussian tail, norm balls, projections and seeded RNG streams."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

_SQRT2 = math.sqrt(2.0)

L1 = "l1"
L2 = "l2"
LINF = "linf"
MAHALANOBIS = "mahalanobis"
BALL_KINDS = (L1, L2, LINF, MAHALANOBIS)


def q_function(x):
    """Standard normal upper tail ``Pr[Z >= x]``.

    Accepts scalars or arrays. Evaluated through ``erfc`` so the upper tail
    keeps full relative precision instead of cancelling against 1.
    """
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / _SQRT2)
    if np.ndim(out) == 0:
        return float(out)
    return out


class SpdMatrix:
    """Dense symmetric positive-definite matrix with a cached Cholesky factor."""

    def __init__(self, matrix, rtol: float = 1e-12):
        a = np.array(matrix, dtype=float, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        scale = max(float(np.max(np.abs(a))), np.finfo(float).tiny)
        if np.max(np.abs(a - a.T)) > rtol * scale:
            raise ValueError("matrix is not symmetric")
        a = 0.5 * (a + a.T)
        try:
            chol = linalg.cholesky(a, lower=True)
        except linalg.LinAlgError as exc:
            raise ValueError("matrix is not positive definite") from exc
        if not np.all(np.diag(chol) > 0):
            raise ValueError("matrix is not positive definite")
        a.setflags(write=False)
        chol.setflags(write=False)
        self.matrix = a
        self.chol = chol
        self._eig = None

    @classmethod
    def identity(cls, d: int) -> "SpdMatrix":
        return cls(np.eye(d))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(self.dim)))

    def solve(self, b):
        """``A^{-1} b`` through the Cholesky factor."""
        return linalg.cho_solve((self.chol, True), b)

    def whiten(self, b):
        """``L^{-1} b`` where ``A = L L^T``; ``|L^{-1} b|_2`` is the inverse-metric norm."""
        return linalg.solve_triangular(self.chol, b, lower=True)

    @property
    def eigh(self):
        if self._eig is None:
            vals, vecs = np.linalg.eigh(self.matrix)
            self._eig = (vals, vecs)
        return self._eig

    def __repr__(self) -> str:
        return f"SpdMatrix(dim={self.dim})"


def _check_dim(v: np.ndarray, d: int | None) -> None:
    if d is not None and v.shape[-1] != d:
        raise ValueError(f"dimension mismatch: vector has {v.shape[-1]} entries, expected {d}")


@dataclass(frozen=True)
class BallSpec:
    """Closed origin-symmetric unit ball ``B``.

    ``kind`` is one of ``l1``, ``l2``, ``linf`` or ``mahalanobis``; the latter is
    the ellipsoid ``{z : z^T S^{-1} z <= 1}`` for the SPD matrix ``shape``.
    """

    kind: str
    shape: SpdMatrix | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in BALL_KINDS:
            raise ValueError(f"unknown ball kind {self.kind!r}; expected one of {BALL_KINDS}")
        if (self.kind == MAHALANOBIS) != (self.shape is not None):
            raise ValueError("a shape matrix is required for (and only for) mahalanobis balls")

    @classmethod
    def parse(cls, name: str, shape=None) -> "BallSpec":
        key = name.strip().lower()
        aliases = {"1": L1, "2": L2, "inf": LINF, "l_inf": LINF, "linfty": LINF, "maha": MAHALANOBIS}
        key = aliases.get(key, key)
        if key == MAHALANOBIS and shape is not None and not isinstance(shape, SpdMatrix):
            shape = SpdMatrix(shape)
        return cls(key, shape)

    @property
    def dim(self) -> int | None:
        return None if self.shape is None else self.shape.dim

    def __str__(self) -> str:
        return self.kind


def sigma_seminorm(y, sigma: SpdMatrix) -> float:
    """``sqrt(y^T Sigma^{-1} y)`` via a triangular solve."""
    y = np.asarray(y, dtype=float)
    _check_dim(y, sigma.dim)
    u = sigma.whiten(y)
    return float(np.sqrt(np.sum(u * u)))


def ball_norms(z, ball: BallSpec) -> np.ndarray:
    """Gauge ``|z|_B`` of every row of ``z`` (reduction over the last axis)."""
    z = np.asarray(z, dtype=float)
    _check_dim(z, ball.dim)
    if ball.kind == L2:
        return np.sqrt(np.sum(z * z, axis=-1))
    if ball.kind == L1:
        return np.sum(np.abs(z), axis=-1)
    if ball.kind == LINF:
        if z.shape[-1] == 0:
            return np.zeros(z.shape[:-1])
        return np.max(np.abs(z), axis=-1)
    flat = z.reshape(-1, z.shape[-1])
    u = ball.shape.whiten(flat.T)
    return np.sqrt(np.sum(u * u, axis=0)).reshape(z.shape[:-1])


def ball_norm(z, ball: BallSpec) -> float:
    z = np.asarray(z, dtype=float)
    return float(ball_norms(z[None, :], ball)[0])


def dual_norm(w, ball: BallSpec) -> float:
    """Norm dual to ``|.|_B``: l1 <-> linf, l2 <-> l2, ellipsoid S <-> sqrt(w^T S w)."""
    w = np.asarray(w, dtype=float)
    _check_dim(w, ball.dim)
    if ball.kind == L2:
        return float(np.sqrt(np.sum(w * w)))
    if ball.kind == L1:
        return float(np.max(np.abs(w))) if w.size else 0.0
    if ball.kind == LINF:
        return float(np.sum(np.abs(w)))
    return float(np.sqrt(max(w @ ball.shape.matrix @ w, 0.0)))


def support_point(w, ball: BallSpec, beta: float) -> np.ndarray:
    """A maximiser of ``w^T z`` over ``beta * B``; the origin when ``w = 0``."""
    w = np.asarray(w, dtype=float)
    _check_dim(w, ball.dim)
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    out = np.zeros_like(w)
    if not np.any(w):
        return out
    if ball.kind == LINF:
        return beta * np.sign(w)
    if ball.kind == L1:
        i = int(np.argmax(np.abs(w)))
        out[i] = beta * np.sign(w[i])
        return out
    if ball.kind == L2:
        return beta * w / np.sqrt(np.sum(w * w))
    sw = ball.shape.matrix @ w
    return beta * sw / np.sqrt(w @ sw)


def _project_l1(x: np.ndarray, beta: float) -> np.ndarray:
    # sort-and-threshold projection onto the l1 ball, row-wise
    a = np.abs(x)
    inside = np.sum(a, axis=-1) <= beta
    if np.all(inside):
        return x.copy()
    if beta == 0:
        return np.zeros_like(x)
    d = x.shape[-1]
    u = -np.sort(-a, axis=-1)
    css = np.cumsum(u, axis=-1)
    idx = np.arange(1, d + 1)
    cond = u * idx > (css - beta)
    cond[..., 0] = True  # exact for beta > 0; can round away when beta is subnormal
    last = d - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = (np.take_along_axis(css, last[..., None], axis=-1)[..., 0] - beta) / (last + 1.0)
    out = np.sign(x) * np.maximum(a - theta[..., None], 0.0)
    return np.where(inside[..., None], x, out)


def _project_ellipsoid(x: np.ndarray, shape: SpdMatrix, beta: float, tol: float = 1e-12) -> np.ndarray:
    # min |x - z|_2  s.t. z^T S^{-1} z <= beta^2.  KKT: z = S (S + lam I)^{-1} x, in the eigenbasis
    # of S a scalar secular equation in lam; Newton on 1/beta - 1/|z(lam)|_B, which is concave
    # and increasing, so iterates from lam = 0 increase monotonically to the root.
    s, v = shape.eigh
    xt = v.T @ x
    sq = xt * xt
    norm2 = float(np.sum(sq / s))
    if norm2 <= beta * beta:
        return x.copy()
    if beta == 0:
        return np.zeros_like(x)
    lam = 0.0
    for _ in range(200):
        den = s + lam
        phi = float(np.sum(s * sq / (den * den)))
        dphi = float(-2.0 * np.sum(s * sq / (den * den * den)))
        r = math.sqrt(phi)
        g = 1.0 / beta - 1.0 / r
        dg = 0.5 * dphi / (phi * r)
        step = -g / dg
        lam += step
        if abs(step) <= tol * max(lam, 1.0):
            break
    return v @ (xt * s / (s + lam))


def project_ball(x, ball: BallSpec, beta: float) -> np.ndarray:
    """Euclidean projection onto ``beta * B``; 2-D input is projected row by row."""
    x = np.asarray(x, dtype=float)
    _check_dim(x, ball.dim)
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if ball.kind == LINF:
        return np.clip(x, -beta, beta)
    if ball.kind == L2:
        n = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
        scale = np.where(n > beta, beta / np.where(n > 0, n, 1.0), 1.0)
        return x * scale
    if ball.kind == L1:
        return _project_l1(x, beta)
    if x.ndim == 1:
        return _project_ellipsoid(x, ball.shape, beta)
    return np.stack([_project_ellipsoid(row, ball.shape, beta) for row in x.reshape(-1, x.shape[-1])]).reshape(x.shape)


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``(seed, stream_id)``.

    Both values are taken modulo 2**64. Normal variates come from numpy's
    ziggurat sampler over the Philox stream.
    """
    key = (int(stream_id) % 2**64) << 64 | (int(seed) % 2**64)
    return np.random.Generator(np.random.Philox(key=key))
