"""Sparse feed-forward networks: representation, evaluation, combinators.

A network is an ordered list of sparse affine steps with one activation
function applied between consecutive steps (never after the last one).
Connectivity is the number of stored nonzero edge and node weights, which
is the complexity budget everything downstream accounts against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    CompositionError,
    EvalOverflowError,
    FormatError,
    InputShapeError,
)

__all__ = [
    "AffineStep",
    "ActivationSpec",
    "Network",
    "SigmoidalReport",
    "relu_power",
    "logistic_power",
    "evaluate",
    "evaluate_batch",
    "connectivity",
    "serial_compose",
    "parallel_compose",
    "identity_extend",
    "verify_sigmoidal",
    "standard_probe",
    "network_to_json",
    "network_from_json",
]


def _clean_triples(triples, out_dim, in_dim):
    """Sort, validate, and drop exact zeros from (row, col, value) triples."""
    seen = set()
    kept = []
    for row, col, val in triples:
        row, col, val = int(row), int(col), float(val)
        if not (0 <= row < out_dim and 0 <= col < in_dim):
            raise InputShapeError(f"edge index ({row},{col}) outside {out_dim}x{in_dim}")
        if (row, col) in seen:
            raise FormatError(f"duplicate edge entry ({row},{col})")
        seen.add((row, col))
        if not math.isfinite(val):
            raise FormatError(f"non-finite edge weight at ({row},{col})")
        if val != 0.0:
            kept.append((row, col, val))
    kept.sort(key=lambda t: (t[0], t[1]))
    return tuple(kept)


def _clean_pairs(pairs, out_dim):
    seen = set()
    kept = []
    for row, val in pairs:
        row, val = int(row), float(val)
        if not 0 <= row < out_dim:
            raise InputShapeError(f"node index {row} outside dimension {out_dim}")
        if row in seen:
            raise FormatError(f"duplicate node entry {row}")
        seen.add(row)
        if not math.isfinite(val):
            raise FormatError(f"non-finite node weight at {row}")
        if val != 0.0:
            kept.append((row, val))
    kept.sort()
    return tuple(kept)


@dataclass(frozen=True)
class AffineStep:
    """One affine map x -> Ax + b stored as sparse triples/pairs.

    Only nonzero entries are stored; zeros are silently dropped so the
    connectivity count stays honest.
    """

    in_dim: int
    out_dim: int
    edge_weights: tuple = ()
    node_weights: tuple = ()

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise InputShapeError("affine step dimensions must be positive")
        object.__setattr__(self, "edge_weights",
                           _clean_triples(self.edge_weights, self.out_dim, self.in_dim))
        object.__setattr__(self, "node_weights",
                           _clean_pairs(self.node_weights, self.out_dim))

    @classmethod
    def from_dense(cls, matrix, bias=None):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise InputShapeError("dense affine matrix must be 2-d")
        out_dim, in_dim = matrix.shape
        edges = [(r, c, matrix[r, c]) for r in range(out_dim) for c in range(in_dim)
                 if matrix[r, c] != 0.0]
        nodes = []
        if bias is not None:
            bias = np.asarray(bias, dtype=float).reshape(-1)
            if bias.shape != (out_dim,):
                raise InputShapeError("bias length must equal out_dim")
            nodes = [(r, bias[r]) for r in range(out_dim) if bias[r] != 0.0]
        return cls(in_dim, out_dim, tuple(edges), tuple(nodes))

    def matrix(self):
        a = np.zeros((self.out_dim, self.in_dim))
        for r, c, v in self.edge_weights:
            a[r, c] = v
        return a

    def bias(self):
        b = np.zeros(self.out_dim)
        for r, v in self.node_weights:
            b[r] = v
        return b

    @property
    def weight_count(self):
        return len(self.edge_weights) + len(self.node_weights)


_KINDS = ("relu_power", "logistic_power", "tabulated")


@dataclass(frozen=True)
class ActivationSpec:
    """Activation with its sigmoidal order and growth/decay constants.

    ``constants = (C, a, b)`` quantify the decay of rho(x)/x^k toward 0
    and 1 and bound |rho| and |rho'|; they are verified numerically, not
    proved.  The ``tabulated`` kind interpolates a sample table and is for
    experiments only -- constructors refuse it because no constants are
    declared for it.
    """

    kind: str
    k: int
    C: float = 1.0
    a: float = 1.0
    b: float = 1.0
    table: tuple = ()  # ((x, value), ...) for kind == "tabulated"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise FormatError(f"unknown activation kind {self.kind!r}")
        if self.k < 1:
            raise FormatError("sigmoidal order k must be >= 1")
        if self.kind != "tabulated" and not (self.C > 0 and self.a > 0 and self.b > 0):
            raise FormatError("constants (C, a, b) must be positive")
        if self.kind == "tabulated" and len(self.table) < 2:
            raise FormatError("tabulated activation needs at least two samples")

    @property
    def has_constants(self):
        return self.kind != "tabulated"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "relu_power":
            return np.maximum(x, 0.0) ** self.k
        if self.kind == "logistic_power":
            return x ** self.k * _sigmoid(x)
        xs, ys = self._table_arrays()
        return np.interp(x, xs, ys)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "relu_power":
            if self.k == 1:
                return (x > 0).astype(float)
            return self.k * np.maximum(x, 0.0) ** (self.k - 1)
        if self.kind == "logistic_power":
            s = _sigmoid(x)
            return self.k * x ** (self.k - 1) * s + x ** self.k * s * (1.0 - s)
        h = 1e-6
        return (self(x + h) - self(x - h)) / (2.0 * h)

    def _table_arrays(self):
        xs = np.array([p[0] for p in self.table])
        ys = np.array([p[1] for p in self.table])
        return xs, ys


def _sigmoid(x):
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu_power(k):
    """x -> max(0, x)^k with its canonical verified constants."""
    return ActivationSpec("relu_power", int(k), C=float(max(1, k)), a=1.0,
                          b=float(max(1, k - 1)))


def logistic_power(k):
    """x -> x^k * sigmoid(x); order-k sigmoidal, smooth everywhere."""
    return ActivationSpec("logistic_power", int(k), C=2.0, a=1.0, b=float(k))


@dataclass(frozen=True)
class Network:
    """Feed-forward net: affine steps with activation between them.

    The chain ``steps[l].in_dim == steps[l-1].out_dim`` is enforced; depth
    is ``len(steps)`` and the activation acts after every step except the
    last.  Instances are immutable value objects.
    """

    steps: tuple
    activation: ActivationSpec

    def __post_init__(self):
        steps = tuple(self.steps)
        if len(steps) < 2:
            raise CompositionError("a network needs at least 2 layers")
        for prev, cur in zip(steps, steps[1:]):
            if cur.in_dim != prev.out_dim:
                raise InputShapeError(
                    f"dimension chain broken: {prev.out_dim} -> {cur.in_dim}")
        object.__setattr__(self, "steps", steps)

    @property
    def input_dim(self):
        return self.steps[0].in_dim

    @property
    def output_dim(self):
        return self.steps[-1].out_dim

    @property
    def depth(self):
        return len(self.steps)

    def max_abs_weight(self):
        vals = [abs(v) for s in self.steps for _, _, v in s.edge_weights]
        vals += [abs(v) for s in self.steps for _, v in s.node_weights]
        return max(vals) if vals else 0.0

    def __call__(self, x):
        return evaluate(self, x)


def connectivity(net: Network) -> int:
    """Total number of stored nonzero edge and node weights."""
    return sum(s.weight_count for s in net.steps)


def evaluate(net: Network, x) -> np.ndarray:
    """Evaluate the network on one input vector of length ``input_dim``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (net.input_dim,):
        raise InputShapeError(
            f"expected input of length {net.input_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputShapeError("input contains non-finite entries")
    return evaluate_batch(net, x[:, None])[:, 0]


def evaluate_batch(net: Network, xs) -> np.ndarray:
    """Evaluate on a (input_dim, n) batch; returns (output_dim, n).

    Power activations run through compensated (double-double) arithmetic:
    the explicit constructions sum terms of size far beyond 1/eps that
    cancel to order one, which raw float64 cannot survive.
    """
    z = np.asarray(xs, dtype=float)
    if z.ndim != 2 or z.shape[0] != net.input_dim:
        raise InputShapeError(
            f"expected batch of shape ({net.input_dim}, n), got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InputShapeError("batch contains non-finite entries")
    if net.activation.kind == "relu_power":
        return _evaluate_dd(net, z)
    last = len(net.steps) - 1
    for layer, step in enumerate(net.steps):
        z = step.matrix() @ z + step.bias()[:, None]
        if layer != last:
            z = net.activation(z)
        if not np.all(np.isfinite(z)):
            raise EvalOverflowError(f"non-finite value after layer {layer + 1}")
    return z


_SPLITTER = 134217729.0  # 2^27 + 1, Dekker's constant


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _two_prod(a, b):
    p = a * b
    ta = _SPLITTER * a
    ahi = ta - (ta - a)
    alo = a - ahi
    tb = _SPLITTER * b
    bhi = tb - (tb - b)
    blo = b - bhi
    return p, ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo


def _dd_add(xh, xl, yh, yl):
    sh, sl = _two_sum(xh, yh)
    return _quick_two_sum(sh, sl + (xl + yl))


def _dd_mul(xh, xl, yh, yl):
    ph, pl = _two_prod(xh, yh)
    return _quick_two_sum(ph, pl + (xh * yl + xl * yh))


def _dd_scale(xh, xl, c):
    ph, pl = _two_prod(xh, c)
    return _quick_two_sum(ph, pl + c * xl)


def _dd_relu_pow(zh, zl, k):
    keep = (zh > 0.0) | ((zh == 0.0) & (zl > 0.0))
    h = np.where(keep, zh, 0.0)
    l = np.where(keep, zl, 0.0)
    rh, rl = h, l
    for _ in range(k - 1):
        rh, rl = _dd_mul(rh, rl, h, l)
    return rh, rl


def _evaluate_dd(net: Network, z: np.ndarray) -> np.ndarray:
    k = net.activation.k
    zh = z.astype(float)
    zl = np.zeros_like(zh)
    batch = zh.shape[1]
    last = len(net.steps) - 1
    with np.errstate(over="ignore", invalid="ignore"):
        for layer, step in enumerate(net.steps):
            oh = np.zeros((step.out_dim, batch))
            ol = np.zeros((step.out_dim, batch))
            for r, c, v in step.edge_weights:
                th, tl = _dd_scale(zh[c], zl[c], v)
                oh[r], ol[r] = _dd_add(oh[r], ol[r], th, tl)
            for r, v in step.node_weights:
                sh, sl = _two_sum(oh[r], v)
                oh[r], ol[r] = _quick_two_sum(sh, sl + ol[r])
            # checked before the activation: its clamping would erase the
            # non-finite evidence of an affine overflow
            if not np.all(np.isfinite(oh)):
                raise EvalOverflowError(f"non-finite value after layer {layer + 1}")
            if layer != last:
                oh, ol = _dd_relu_pow(oh, ol, k)
                if not np.all(np.isfinite(oh)):
                    raise EvalOverflowError(
                        f"non-finite value after layer {layer + 1}")
            zh, zl = oh, ol
    return zh + zl


def _check_same_activation(a: Network, b: Network):
    if a.activation != b.activation:
        raise CompositionError("activation specs differ")


def serial_compose(first: Network, second: Network) -> Network:
    """Feed ``first`` into ``second``; the junction affine maps are fused.

    No activation separates first's last step from second's first step, so
    their composition is a single affine map and the result has depth
    L1 + L2 - 1.  Entries that cancel to exactly 0.0 are dropped.
    """
    _check_same_activation(first, second)
    if second.input_dim != first.output_dim:
        raise CompositionError(
            f"cannot chain output dim {first.output_dim} into input dim "
            f"{second.input_dim}")
    f_last, s_first = first.steps[-1], second.steps[0]
    fused_a = s_first.matrix() @ f_last.matrix()
    fused_b = s_first.matrix() @ f_last.bias() + s_first.bias()
    fused = AffineStep.from_dense(fused_a, fused_b)
    return Network(first.steps[:-1] + (fused,) + second.steps[1:],
                   first.activation)


def parallel_compose(nets, coeffs, shifts=None) -> Network:
    """Run the nets side by side and combine outputs affinely.

    Computes sum_i coeffs[i] * nets[i](x + shifts[i]).  Shifts become
    first-layer node weights (entering as A_first @ shift); the combining
    coefficients are folded multiplicatively into each subnet's final step,
    so depth is unchanged and no extra weights appear for them.  Subnets
    with a zero coefficient are pruned entirely.
    """
    nets = list(nets)
    coeffs = [float(c) for c in coeffs]
    if shifts is None:
        shifts = [0.0] * len(nets)
    shifts = [float(s) for s in shifts]
    if not nets or len(nets) != len(coeffs) or len(nets) != len(shifts):
        raise CompositionError("nets, coeffs and shifts must align and be nonempty")
    keep = [(n, c, s) for n, c, s in zip(nets, coeffs, shifts) if c != 0.0]
    if not keep:
        raise CompositionError("all combining coefficients are zero")
    nets, coeffs, shifts = zip(*keep)
    base = nets[0]
    d = base.input_dim
    for net in nets[1:]:
        _check_same_activation(base, net)
        if net.input_dim != d:
            raise CompositionError("input dimensions differ")
        if net.depth != base.depth:
            raise CompositionError(
                "ragged depths; identity-extend the shallow nets first")

    depth = base.depth
    out_dim = base.output_dim
    if any(net.output_dim != out_dim for net in nets):
        raise CompositionError("output dimensions differ")

    new_steps = []
    for layer in range(depth):
        blocks = [net.steps[layer] for net in nets]
        last = layer == depth - 1
        in_dim = d if layer == 0 else sum(b.in_dim for b in blocks)
        edges = {}
        bias = {}
        in_off = 0
        out_off = 0
        for i, blk in enumerate(blocks):
            col_base = 0 if layer == 0 else in_off
            row_base = 0 if last else out_off
            scale = coeffs[i] if last else 1.0
            for r, c, v in blk.edge_weights:
                key = (row_base + r, col_base + c)
                edges[key] = edges.get(key, 0.0) + scale * v
            blk_bias = blk.bias() * scale
            if layer == 0 and shifts[i] != 0.0:
                blk_bias = blk_bias + scale * (blk.matrix() @ np.full(d, shifts[i]))
            for r in range(blk.out_dim):
                if blk_bias[r] != 0.0:
                    key = row_base + r
                    bias[key] = bias.get(key, 0.0) + blk_bias[r]
            in_off += blk.in_dim
            out_off += blk.out_dim
        step_out = out_dim if last else out_off
        new_steps.append(AffineStep(
            in_dim, step_out,
            tuple((r, c, v) for (r, c), v in edges.items()),
            tuple((r, v) for r, v in bias.items())))
    return Network(tuple(new_steps), base.activation)


def identity_extend(net: Network) -> Network:
    """Deepen a relu_power(k=1) network by one exact identity layer.

    Uses x = relu(x) - relu(-x) on the scalar output, so only order-1 ReLU
    nets can be extended exactly.
    """
    act = net.activation
    if not (act.kind == "relu_power" and act.k == 1):
        raise CompositionError("exact identity extension needs relu_power k=1")
    if net.output_dim != 1:
        raise CompositionError("identity extension expects a scalar output")
    last = net.steps[-1]
    up = AffineStep(last.in_dim, 2 * last.out_dim,
                    tuple([(r, c, v) for r, c, v in last.edge_weights]
                          + [(last.out_dim + r, c, -v) for r, c, v in last.edge_weights]),
                    tuple([(r, v) for r, v in last.node_weights]
                          + [(last.out_dim + r, -v) for r, v in last.node_weights]))
    down = AffineStep(2 * last.out_dim, last.out_dim,
                      ((0, 0, 1.0), (0, 1, -1.0)))
    return Network(net.steps[:-1] + (up, down), act)


@dataclass(frozen=True)
class SigmoidalReport:
    """Max violations of the four strong-sigmoidality inequalities."""

    left_decay: float
    right_decay: float
    growth: float
    derivative: float
    tolerance: float

    @property
    def passed(self):
        return max(self.left_decay, self.right_decay,
                   self.growth, self.derivative) <= self.tolerance


def standard_probe(count=400, span=1e3):
    """Symmetric log-spaced probe over 1 <= |x| <= span (large-|x| regime)."""
    pos = np.logspace(0.0, math.log10(span), count)
    return np.concatenate([-pos[::-1], pos])


def verify_sigmoidal(spec: ActivationSpec, probe=None, tolerance=1e-9) -> SigmoidalReport:
    """Report how badly the declared (C, a, b) fail on a probe grid.

    All four inequalities are checked pointwise; a violation is the excess
    LHS - RHS clipped at zero, so exact activations report 0.0.
    """
    if probe is None:
        probe = standard_probe()
    x = np.asarray(probe, dtype=float)
    x = x[x != 0.0]
    neg, pos = x[x < 0], x[x > 0]
    rho_neg, rho_pos = spec(neg), spec(pos)
    C, a, b, k = spec.C, spec.a, spec.b, spec.k

    v_left = np.abs(rho_neg / neg ** k) - C * np.abs(neg) ** (-a)
    v_right = np.abs(rho_pos / pos ** k - 1.0) - C * pos ** (-a)
    v_growth = np.abs(spec(x)) - C * (1.0 + np.abs(x)) ** k
    v_deriv = np.abs(spec.derivative(x)) - C * np.abs(x) ** b

    def worst(v):
        return float(max(0.0, v.max())) if v.size else 0.0

    return SigmoidalReport(worst(v_left), worst(v_right), worst(v_growth),
                           worst(v_deriv), float(tolerance))


NETWORK_FORMAT_VERSION = 1


def network_to_json(net: Network) -> str:
    """Serialize with full-precision decimal numbers (repr round-trip)."""
    act = net.activation
    doc = {
        "format": NETWORK_FORMAT_VERSION,
        "d": net.input_dim,
        "L": net.depth,
        "activation": {"kind": act.kind, "k": act.k, "C": act.C,
                       "a": act.a, "b": act.b},
        "steps": [
            {
                "in": s.in_dim,
                "out": s.out_dim,
                "edges": [[r, c, v] for r, c, v in s.edge_weights],
                "nodes": [[r, v] for r, v in s.node_weights],
            }
            for s in net.steps
        ],
    }
    if act.kind == "tabulated":
        doc["activation"]["table"] = [list(p) for p in act.table]
    return json.dumps(doc, indent=1)


def network_from_json(text: str) -> Network:
    """Parse and validate a serialized network (all invariants re-checked)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid network JSON: {exc}") from exc
    try:
        a = doc["activation"]
        spec = ActivationSpec(a["kind"], int(a["k"]), float(a.get("C", 1.0)),
                              float(a.get("a", 1.0)), float(a.get("b", 1.0)),
                              tuple(tuple(p) for p in a.get("table", ())))
        steps = tuple(
            AffineStep(int(s["in"]), int(s["out"]),
                       tuple((int(r), int(c), float(v)) for r, c, v in s["edges"]),
                       tuple((int(r), float(v)) for r, v in s["nodes"]))
            for s in doc["steps"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed network document: {exc}") from exc
    net = Network(steps, spec)
    if net.input_dim != int(doc.get("d", net.input_dim)):
        raise FormatError("declared input dimension disagrees with steps")
    if net.depth != int(doc.get("L", net.depth)):
        raise FormatError("declared depth disagrees with steps")
    return net
