"""Weight discretization onto eta^m Z clamped to [-eta^-k, eta^-k].

The grid exponent m trades accuracy for bits; find_min_m searches for the
smallest exponent whose quantized network stays within eta of the original
on a dense grid.  Ties round toward zero everywhere.
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import QuantizerError, SearchExhaustedError
from .nnet import AffineStep, Network, evaluate_batch

__all__ = [
    "quantize_weights",
    "find_min_m",
    "bits_per_weight",
    "weight_range_exponent",
]


def _check_eta(eta):
    # 1/2 itself is admitted: the bit formula is exercised there
    if not (0.0 < eta <= 0.5):
        raise QuantizerError("eta must lie in (0, 1/2]")


def _round_toward_zero(ratio: float) -> int:
    """Nearest integer with .5 ties resolved toward zero."""
    if ratio >= 0.0:
        return int(math.ceil(ratio - 0.5))
    return -int(math.ceil(-ratio - 0.5))


def quantize_value(w: float, eta: float, k: int, m: int) -> float:
    """Nearest point of eta^m Z within the clamp range, ties toward zero.

    The cap keeps |q| <= eta^-(m+k) and representable in the declared bit
    budget; when the budget is exactly tight (eta an inverse power of two)
    the single extreme grid point is shaved off.
    """
    step = eta ** m
    q = _round_toward_zero(w / step)
    q_cap = min(int(math.floor(eta ** (-(m + k)) * (1.0 + 1e-12))),
                (1 << (bits_per_weight(eta, k, m) - 1)) - 1)
    q = max(-q_cap, min(q_cap, q))
    return q * step


def quantize_weights(net: Network, eta: float, k: int, m: int) -> Network:
    """Round every weight to the nearest grid point; structure preserved.

    Requires every |weight| <= eta^-k (the grid's clamp range).  A weight
    may round to exactly zero and is then dropped, so connectivity never
    increases.
    """
    _check_eta(eta)
    if k < 1 or m < 1:
        raise QuantizerError("k and m must be >= 1")
    cap = eta ** (-k)
    worst = net.max_abs_weight()
    if worst > cap * (1.0 + 1e-12):
        raise QuantizerError(
            f"max |weight| {worst:.6g} exceeds eta^-k = {cap:.6g}")
    steps = []
    for step in net.steps:
        edges = tuple((r, c, quantize_value(v, eta, k, m))
                      for r, c, v in step.edge_weights)
        nodes = tuple((r, quantize_value(v, eta, k, m))
                      for r, v in step.node_weights)
        steps.append(AffineStep(step.in_dim, step.out_dim, edges, nodes))
    return Network(tuple(steps), net.activation)


def bits_per_weight(eta: float, k: int, m: int) -> int:
    """ceil((k + m) log2(1/eta)) + 1; the extra bit carries the sign."""
    _check_eta(eta)
    return int(math.ceil((k + m) * math.log2(1.0 / eta) - 1e-12)) + 1


def weight_range_exponent(net: Network, eta: float) -> int:
    """Smallest k >= 1 with max |weight| <= eta^-k."""
    _check_eta(eta)
    worst = net.max_abs_weight()
    k = 1
    while eta ** (-k) * (1.0 + 1e-12) < worst:
        k += 1
        if k > 64:
            raise QuantizerError("weights too large for any reasonable range")
    return k


def _quantization_grid(d: int, D: float, grid: int):
    if d == 1:
        return np.linspace(-float(D), float(D), int(grid))[None, :]
    if d == 2:
        side = max(2, int(math.isqrt(int(grid))))
        axis = np.linspace(-float(D), float(D), side)
        xg, yg = np.meshgrid(axis, axis)
        return np.stack([xg.ravel(), yg.ravel()])
    raise QuantizerError("sup grids are provided for input dimension <= 2")


def find_min_m(net: Network, eta: float, k: int, D: float, grid: int = 10_000,
               m_cap: int = 64) -> int:
    """Smallest m in [1, m_cap] with sup-grid quantization error <= eta.

    The theory guarantees some m works for acceptable activations; the
    sharp value is network-specific, so we search instead of trusting the
    proof's constants.  The grid covers [-D, D]^d with about ``grid``
    points per input dimension (d <= 2).
    """
    _check_eta(eta)
    xs = _quantization_grid(net.input_dim, D, grid)
    ref = evaluate_batch(net, xs)
    for m in range(1, m_cap + 1):
        qnet = quantize_weights(net, eta, k, m)
        err = float(np.max(np.abs(evaluate_batch(qnet, xs) - ref)))
        if err <= eta:
            return m
    raise SearchExhaustedError(
        f"no m <= {m_cap} met the target (net likely ill-conditioned)")
