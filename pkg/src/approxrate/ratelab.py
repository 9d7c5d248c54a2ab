"""Error measurement, log-log rate fitting, and the Hamming covering oracle.

Rate exponents here are empirical: a finite (size, error) sample and an
ordinary least-squares slope stand in for suprema that cannot be computed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DomainError,
    InputShapeError,
    ResolutionMismatchError,
    SizeError,
    UnreachableError,
)
from .nnet import Network, evaluate_batch

__all__ = [
    "RateReport",
    "measure_error",
    "sup_error_on_grid",
    "l2_error_quad",
    "l2_error_pixels",
    "fit_rate",
    "covering_distortion_exact",
    "covering_distortion_greedy",
    "empirical_minimax_length",
]


def _as_callable(obj):
    if isinstance(obj, Network):
        return lambda xs: evaluate_batch(obj, np.asarray(xs)[None, :])[0]
    if callable(obj):
        return lambda xs: np.array([obj(x) for x in np.asarray(xs).ravel()])
    raise InputShapeError("expected a Network or a callable target")


def sup_error_on_grid(candidate, target, lo, hi, points=10_000) -> float:
    """Max abs difference on a uniform grid over [lo, hi]."""
    xs = np.linspace(float(lo), float(hi), int(points))
    return float(np.max(np.abs(_as_callable(candidate)(xs) - _as_callable(target)(xs))))


def _simpson_weights(panels: int):
    w = np.ones(2 * panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w


def l2_error_quad(candidate, target, lo, hi, panels: int = 2048) -> float:
    """L2 distance on [lo, hi] by composite Simpson quadrature."""
    panels = int(panels)
    xs = np.linspace(float(lo), float(hi), 2 * panels + 1)
    diff = _as_callable(candidate)(xs) - _as_callable(target)(xs)
    h = (hi - lo) / panels
    val = h / 6.0 * float(np.dot(_simpson_weights(panels), diff * diff))
    return math.sqrt(max(val, 0.0))


def l2_error_pixels(a, b) -> float:
    """L2 distance of two pixel arrays viewed as functions on [0,1]^2."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ResolutionMismatchError(f"shapes {a.shape} and {b.shape} differ")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def measure_error(candidate, target, domain, norm: str) -> float:
    """Dispatch on the declared norm: sup_grid, l2_quad, or l2_pixels."""
    if norm == "sup_grid":
        lo, hi = domain
        return sup_error_on_grid(candidate, target, lo, hi)
    if norm == "l2_quad":
        lo, hi = domain
        return l2_error_quad(candidate, target, lo, hi)
    if norm == "l2_pixels":
        return l2_error_pixels(candidate, target)
    raise DomainError(f"unknown norm {norm!r}")


@dataclass(frozen=True)
class RateReport:
    """Log-log regression of error against size: error ~ size^slope."""

    samples: tuple
    fitted_slope: float
    intercept: float
    r_squared: float
    slope_ci: tuple = (float("nan"), float("nan"))

    @property
    def sizes(self):
        return [s for s, _ in self.samples]

    @property
    def errors(self):
        return [e for _, e in self.samples]


def fit_rate(samples, bootstrap: int = 200, seed: int = 0) -> RateReport:
    """OLS on (log size, log error) with a bootstrap slope interval.

    The interval is informational; acceptance decisions use the point
    estimate only.
    """
    samples = [(float(s), float(e)) for s, e in samples]
    if len(samples) < 3:
        raise DomainError("need at least 3 samples to fit a rate")
    sizes = np.array([s for s, _ in samples])
    errors = np.array([e for _, e in samples])
    if np.any(sizes[1:] <= sizes[:-1]):
        raise DomainError("sizes must be strictly increasing")
    if np.any(errors <= 0.0) or np.any(sizes <= 0.0):
        raise DomainError("sizes and errors must be positive")
    lx, ly = np.log(sizes), np.log(errors)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    total = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / total if total > 0 else 1.0
    rng = np.random.default_rng(seed)
    slopes = []
    for _ in range(int(bootstrap)):
        idx = rng.integers(0, len(samples), len(samples))
        if len(set(lx[idx])) < 2:
            continue
        slopes.append(np.polyfit(lx[idx], ly[idx], 1)[0])
    ci = (float(np.percentile(slopes, 2.5)), float(np.percentile(slopes, 97.5))) \
        if slopes else (float("nan"), float("nan"))
    return RateReport(tuple(samples), float(slope), float(intercept), r2, ci)


def _popcount_matrix(words, codebook):
    x = np.bitwise_xor(words[:, None], codebook[None, :])
    return np.bitwise_count(x)


def covering_distortion_exact(m: int, R: int) -> float:
    """Exact min over all 2^R-point codebooks of the mean Hamming distance.

    Exhaustive over all C(2^m, 2^R) codebooks; guarded to m <= 4, R <= 3.
    """
    if m < 1 or R < 0:
        raise DomainError("need m >= 1 and R >= 0")
    if 2 ** R > 2 ** m:
        raise DomainError("codebook larger than the cube")
    if m > 4 or R > 3:
        raise SizeError("exact search guarded to m <= 4, R <= 3; use greedy")
    words = np.arange(1 << m, dtype=np.uint32)
    size = 1 << R
    best = math.inf
    for combo in itertools.combinations(range(1 << m), size):
        dist = _popcount_matrix(words, np.array(combo, dtype=np.uint32))
        best = min(best, float(dist.min(axis=1).mean()))
    return best


def covering_distortion_greedy(m: int, R: int, restarts: int = 8,
                               seed: int = 0) -> float:
    """Greedy upper bound on the covering distortion, best of restarts.

    Forward selection: each slot adds the candidate that minimizes the
    running mean nearest-codeword distance.  On large cubes both the
    candidate pool and the scoring words are seeded subsamples, but the
    reported distortion is always the exact mean over the whole cube for
    the codebook actually built, so the value is a true upper bound.
    """
    if m < 1 or m > 24:
        raise DomainError("greedy variant supports 1 <= m <= 24")
    if 2 ** R > 2 ** m:
        raise DomainError("codebook larger than the cube")
    words = np.arange(1 << m, dtype=np.uint32)
    size = 1 << R
    pool_cap, sample_cap = 1024, 1 << 14
    rng = np.random.default_rng(seed)
    best = math.inf
    for _ in range(int(restarts)):
        current = np.full(len(words), np.int64(m))
        for slot in range(size):
            pool = words if len(words) <= pool_cap else \
                rng.choice(words, size=pool_cap, replace=False)
            sample = words if len(words) <= sample_cap else \
                rng.choice(words, size=sample_cap, replace=False)
            if slot == 0 and len(words) > pool_cap:
                pool = rng.choice(words, size=1)
            cand = _popcount_matrix(sample, pool.astype(np.uint32))
            scores = np.minimum(cand, current[sample][:, None]).mean(axis=0)
            pick = int(pool[int(np.argmin(scores))])
            current = np.minimum(
                current, np.bitwise_count(np.bitwise_xor(words, np.uint32(pick))))
        best = min(best, float(current.mean()))
    return best


def empirical_minimax_length(encode_at, test_functions, eps: float,
                             knobs) -> int:
    """Smallest bit length over the knob sweep meeting max error <= eps.

    ``encode_at(knob, f)`` must return (bits, error); the bit length for a
    knob is the max over the test set, as one length must serve the whole
    class.
    """
    if not test_functions:
        raise DomainError("need a nonempty test set")
    best = None
    achieved = math.inf
    for knob in knobs:
        bits = 0
        worst = 0.0
        for f in test_functions:
            b, e = encode_at(knob, f)
            bits = max(bits, int(b))
            worst = max(worst, float(e))
        achieved = min(achieved, worst)
        if worst <= eps and (best is None or bits < best):
            best = bits
    if best is None:
        raise UnreachableError(
            f"no knob reached eps={eps:g}; best achieved {achieved:g}",
            best_achieved=achieved)
    return best
