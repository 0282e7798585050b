"""Command-line front end: budget sweeps written as CSV.

Exit codes: 0 success, 1 data error, 2 usage error, 3 solver did not converge
on some row (rows are still written).
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bayes as bayes_mod
from .cost import load_distances, pairwise_distances, save_distances
from .dataset import DatasetError, load_cifar10, load_csv, load_idx, make_binary_task
from .gaussian import GaussianProblem, alpha_star, optimal_adv_loss, optimal_transport_cost
from .matching import robustness_curve
from .numerics import MAHALANOBIS, BallSpec, SpdMatrix, rng_stream

log = logging.getLogger("advtransport")

EXIT_OK, EXIT_DATA, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _clean(x: float) -> float:
    # drop accumulated step error so 0.1*3 prints as 0.3
    return float(f"{x:.12g}")


def parse_grid(text: str) -> list[float]:
    """``a:b:s`` (both endpoints included, up to float tolerance) or ``v1,v2,...``.

    The grid must be nonempty, strictly increasing and nonnegative.
    """
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise UsageError(f"grid {text!r}: expected start:stop:step")
            a, b, s = parts
            if not s > 0:
                raise UsageError(f"grid {text!r}: step must be positive")
            count = int(math.floor((b - a) / s + 1e-9)) + 1
            values = [_clean(a + i * s) for i in range(max(count, 0))]
        else:
            values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise UsageError(f"grid {text!r}: {exc}") from None
    if not values:
        raise UsageError(f"grid {text!r} is empty")
    if any(not math.isfinite(v) or v < 0 for v in values):
        raise UsageError(f"grid {text!r}: values must be finite and >= 0")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise UsageError(f"grid {text!r}: values must be strictly increasing")
    return values


def _int_list(text: str) -> list[int]:
    try:
        if ":" in text:
            return [int(v) for v in parse_grid(text)]
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad integer list {text!r}: {exc}") from None
    if not vals:
        raise UsageError("empty integer list")
    return vals


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _read_matrix(path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from None


def _pool_map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _load_dataset(args):
    if args.format == "idx":
        if not args.labels:
            raise UsageError("--labels is required for --format idx")
        return load_idx(args.images[0], args.labels)
    if args.format == "cifar10":
        return load_cifar10(args.images)
    return load_csv(args.images[0])


def cmd_empirical(args) -> int:
    betas = parse_grid(args.betas)
    ball = BallSpec.parse(args.norm)
    data = _load_dataset(args)
    task = make_binary_task(data, args.class_a, args.class_b, args.k, args.seed)
    log.info("task: k=%d d=%d classes %d/%d", task.k, task.dim, args.class_a, args.class_b)
    dist = None
    if args.cache and Path(args.cache).exists():
        cached, dim, kind = load_distances(args.cache)
        if cached.shape[0] == task.k and dim == task.dim and kind == ball.kind:
            log.info("using cached distances from %s", args.cache)
            dist = cached
        else:
            log.warning("ignoring stale distance cache %s", args.cache)
    if dist is None:
        log.info("computing %dx%d %s distances", task.k, task.k, ball)
        dist = pairwise_distances(task, ball, workers=args.threads)
        if args.cache:
            save_distances(args.cache, dist, task.dim, ball)
    bounds = robustness_curve(dist, betas, workers=args.threads)
    rows = [(b, r.matching_size, r.transport_cost, r.min_loss) for b, r in zip(betas, bounds)]
    _write_csv(args.out, ["beta", "matching_size", "transport_cost", "min_loss"], rows)
    return EXIT_OK


def _gaussian_mean(args) -> np.ndarray:
    given = [x is not None for x in (args.mu, args.mu_file, args.mu_random)]
    if sum(given) != 1:
        raise UsageError("give exactly one of --mu, --mu-file, --mu-random")
    if args.mu is not None:
        try:
            return np.array([float(v) for v in args.mu.split(",")])
        except ValueError as exc:
            raise UsageError(f"--mu: {exc}") from None
    if args.mu_file is not None:
        return _read_matrix(args.mu_file).ravel()
    if args.mu_random < 1:
        raise UsageError("--mu-random needs a positive dimension")
    return rng_stream(args.seed, 0).standard_normal(args.mu_random)


def cmd_gaussian(args) -> int:
    betas = parse_grid(args.betas)
    mu = _gaussian_mean(args)
    sigma = SpdMatrix(_read_matrix(args.sigma_file)) if args.sigma_file else SpdMatrix.identity(len(mu))
    if sigma.dim != len(mu):
        raise DatasetError(f"mean has dimension {len(mu)} but covariance is {sigma.dim}x{sigma.dim}")
    ball = BallSpec(MAHALANOBIS, sigma) if args.norm == MAHALANOBIS else BallSpec.parse(args.norm)

    def solve(beta):
        cert = alpha_star(GaussianProblem(mu, sigma, ball, beta), tol=args.tol, max_iters=args.max_iters)
        if not cert.converged:
            log.warning("beta=%g: solver stopped after %d iterations (gap %.3g)", beta, cert.iterations, cert.duality_gap)
        return cert

    certs = _pool_map(solve, betas, args.threads)
    rows = [
        (b, c.alpha, optimal_adv_loss(c.alpha), optimal_transport_cost(c.alpha), c.duality_gap, c.converged)
        for b, c in zip(betas, certs)
    ]
    _write_csv(args.out, ["beta", "alpha_star", "optimal_loss", "transport_cost", "duality_gap", "converged"], rows)
    return EXIT_OK if all(c.converged for c in certs) else EXIT_NONCONVERGED


def cmd_bayes(args) -> int:
    ns = _int_list(args.n)
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    ball = BallSpec.parse(args.norm)
    rows = []
    for n in ns:
        try:
            setup = bayes_mod.BayesSetup(args.d, args.m, n, ball, args.beta)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        loss = bayes_mod.bayes_loss_via_posterior(setup, args.trials, args.seed, workers=args.threads)
        sb = bayes_mod.schmidt_lower_bound(setup, args.trials, args.seed, workers=args.threads)
        log.info("n=%d: loss %.5f +- %.5f", n, loss.value, loss.standard_error)
        rows.append((n, setup.rho, loss.value, loss.standard_error, sb.value, sb.standard_error))
    _write_csv(args.out, ["n", "rho", "bayes_loss", "bayes_se", "schmidt_bound", "schmidt_se"], rows)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="advtransport", description="Lower bounds on adversarial 0-1 loss via optimal transport.")
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, default_norm, norms=("l1", "l2", "linf")):
        sp.add_argument("--out", required=True, help="output CSV path")
        sp.add_argument("--norm", default=default_norm, choices=list(norms))
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    e = sub.add_parser("empirical", help="matching bound on a two-class dataset")
    e.add_argument("--format", choices=["idx", "cifar10", "csv"], required=True)
    e.add_argument("--images", nargs="+", required=True, help="IDX images, CIFAR-10 batches, or CSV file")
    e.add_argument("--labels", help="IDX labels file")
    e.add_argument("--class-a", type=int, required=True)
    e.add_argument("--class-b", type=int, required=True)
    e.add_argument("--k", type=int, default=None, help="samples per class (default: all of the smaller class)")
    e.add_argument("--betas", required=True, help="start:stop:step or comma list")
    e.add_argument("--cache", help="distance-matrix cache file")
    common(e, "l2")
    e.set_defaults(func=cmd_empirical)

    g = sub.add_parser("gaussian", help="alpha* curve for N(mu, Sigma) vs N(-mu, Sigma)")
    g.add_argument("--mu", help="comma-separated mean")
    g.add_argument("--mu-file", help="CSV file holding the mean")
    g.add_argument("--mu-random", type=int, help="draw mu ~ N(0, I) of this dimension from --seed")
    g.add_argument("--sigma-file", help="CSV covariance matrix (default identity)")
    g.add_argument("--betas", required=True)
    g.add_argument("--tol", type=float, default=1e-10)
    g.add_argument("--max-iters", type=int, default=100_000)
    common(g, "linf", ("l1", "l2", "linf", MAHALANOBIS))
    g.set_defaults(func=cmd_gaussian)

    b = sub.add_parser("bayes", help="minimum learning loss vs number of samples")
    b.add_argument("--d", type=int, required=True)
    b.add_argument("--m", type=float, required=True)
    b.add_argument("--n", required=True, help="comma list or start:stop:step of sample counts")
    b.add_argument("--beta", type=float, required=True)
    b.add_argument("--trials", type=int, default=bayes_mod.DEFAULT_TRIALS)
    common(b, "linf")
    b.set_defaults(func=cmd_bayes)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"advtransport: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, OSError, ValueError) as exc:
        print(f"advtransport: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
