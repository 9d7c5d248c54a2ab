"""Edgelet dictionary, quadtree fitting, and the bit-exact wedge codec.

Arrays are n x n pixel averages on [0,1]^2 (row i is the y-band
[i/n, (i+1)/n)).  A partition leaf is a dyadic square or one side of an
edgelet-split square; masks are per-pixel inside fractions computed from a
deterministic s^2 stratified sampler, with s fixed to 4 inside the codec
so streams decode without extra context.

All geometry (squares, boundary vertices, samples) is dyadic-rational and
therefore exact in binary floating point; side membership never depends on
rounding.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from math import comb

import numpy as np

from .exceptions import (
    CorruptionError,
    DegenerateWedgeError,
    FormatError,
    InputShapeError,
    RangeError,
)

__all__ = [
    "DyadicSquare",
    "Edgelet",
    "EdRdpLeaf",
    "EdRdp",
    "WedgeCode",
    "DEFAULT_M_CAP",
    "CODEC_SUPERSAMPLE",
    "WEDGE_FORMAT_VERSION",
    "vertex_budget",
    "edgelet_count",
    "enumerate_vertices",
    "wedge_mask",
    "project",
    "fit_rdp",
    "encode",
    "decode",
    "encode_to_target",
]

DEFAULT_M_CAP = 32
CODEC_SUPERSAMPLE = 4
WEDGE_FORMAT_VERSION = 1
_MAGIC = b"WDGL"


@dataclass(frozen=True)
class DyadicSquare:
    """Square [ix, ix+1] x [iy, iy+1] in units of 2^-j."""

    j: int
    ix: int
    iy: int

    def __post_init__(self):
        if self.j < 0 or not (0 <= self.ix < 1 << self.j) \
                or not (0 <= self.iy < 1 << self.j):
            raise InputShapeError(f"square ({self.j},{self.ix},{self.iy}) invalid")

    @property
    def side(self):
        return 2.0 ** (-self.j)

    @property
    def x0(self):
        return self.ix * self.side

    @property
    def y0(self):
        return self.iy * self.side

    def children(self):
        return [DyadicSquare(self.j + 1, 2 * self.ix + dx, 2 * self.iy + dy)
                for dy in (0, 1) for dx in (0, 1)]


def vertex_budget(j: int, J: int, K: int, m_cap: int = DEFAULT_M_CAP) -> int:
    """Boundary vertex count M_j = min(4 * 2^(J+K-j), m_cap)."""
    if m_cap < 4 or m_cap % 4:
        raise FormatError("M_cap must be a multiple of 4 and at least 4")
    return min(4 * (1 << (J + K - j)), m_cap)


def _perimeter_point(square: DyadicSquare, t: float):
    """Clockwise perimeter position from the upper-left corner, t in [0, 4*side)."""
    side = square.side
    x0, y0 = square.x0, square.y0
    x1, y1 = x0 + side, y0 + side
    e, r = divmod(t, side)
    if e == 0:
        return (x0 + r, y1)
    if e == 1:
        return (x1, y1 - r)
    if e == 2:
        return (x1 - r, y0)
    return (x0, y0 + r)


def enumerate_vertices(square: DyadicSquare, J: int, K: int,
                       m_cap: int = DEFAULT_M_CAP):
    """Equally spaced boundary vertices, clockwise from the upper-left corner."""
    if square.j > J:
        raise InputShapeError("square finer than the pixel scale")
    m_j = vertex_budget(square.j, J, K, m_cap)
    spacing = 4.0 * square.side / m_j
    return [_perimeter_point(square, i * spacing) for i in range(m_j)]


def _vertex_edge_ids(index: int, m_j: int):
    """Which closed square edges (0..3) the vertex with this index lies on."""
    per_edge = m_j // 4
    edge, pos = divmod(index, per_edge)
    return {edge, (edge - 1) % 4} if pos == 0 else {edge}


def _is_degenerate(v1: int, v2: int, m_j: int) -> bool:
    """True when both vertices share a square edge (zero-area side)."""
    return bool(_vertex_edge_ids(v1, m_j) & _vertex_edge_ids(v2, m_j))


@dataclass(frozen=True)
class Edgelet:
    """Segment between two boundary vertices of a dyadic square."""

    square: DyadicSquare
    v1: int
    v2: int
    m_count: int

    def __post_init__(self):
        if not (0 <= self.v1 < self.v2 < self.m_count):
            raise InputShapeError("edgelet needs 0 <= v1 < v2 < M_j")

    @property
    def local_index(self):
        """Colex rank of (v1, v2) among all vertex pairs."""
        return self.v2 * (self.v2 - 1) // 2 + self.v1

    @classmethod
    def from_local_index(cls, square, idx, m_count):
        v2 = (1 + math.isqrt(1 + 8 * idx)) // 2
        while v2 * (v2 - 1) // 2 > idx:
            v2 -= 1
        v1 = idx - v2 * (v2 - 1) // 2
        return cls(square, v1, v2, m_count)

    def endpoints(self):
        spacing = 4.0 * self.square.side / self.m_count
        return (_perimeter_point(self.square, self.v1 * spacing),
                _perimeter_point(self.square, self.v2 * spacing))


@dataclass(frozen=True)
class EdRdpLeaf:
    """Unsplit square (split is None) or one side of a split square."""

    square: DyadicSquare
    split: tuple | None = None  # (Edgelet, side bit)

    @property
    def edgelet(self):
        return None if self.split is None else self.split[0]

    @property
    def side(self):
        return None if self.split is None else self.split[1]


@dataclass(frozen=True)
class EdRdp:
    """Edgelet-decorated recursive dyadic partition of [0,1]^2."""

    leaves: tuple
    n: int
    K: int
    m_cap: int

    @property
    def J(self):
        return int(math.log2(self.n))

    def validate(self):
        """Quadtree structural check: leaves tile the unit square."""
        leafset = {}
        for leaf in self.leaves:
            key = (leaf.square.j, leaf.square.ix, leaf.square.iy)
            leafset.setdefault(key, []).append(leaf)
        J = self.J

        def covered(sq: DyadicSquare):
            key = (sq.j, sq.ix, sq.iy)
            if key in leafset:
                group = leafset[key]
                if len(group) == 1 and group[0].split is None:
                    return True
                if len(group) == 2 and all(l.split is not None for l in group):
                    sides = {l.side for l in group}
                    eds = {l.edgelet for l in group}
                    return sides == {0, 1} and len(eds) == 1
                return False
            if sq.j >= J:
                return False
            return all(covered(c) for c in sq.children())

        if not covered(DyadicSquare(0, 0, 0)):
            raise FormatError("leaves do not form a valid partition")
        return True


def edgelet_count(J: int, K: int, m_cap: int | None = None) -> int:
    """Exact dictionary size: sum over scales of 4^j * C(M_j, 2)."""
    if J < 0 or K < 0:
        raise InputShapeError("J and K must be >= 0")
    total = 0
    for j in range(J + 1):
        m_j = vertex_budget(j, J, K, m_cap if m_cap is not None else 1 << 62)
        total += 4 ** j * comb(m_j, 2)
    return total


def _sample_offsets(s: int):
    return (np.arange(s) + 0.5) / s


def _cross_sign_fractions(p1, p2, x0, y0, px, rows, cols, s):
    """Side-0 sample fraction per pixel of a block; exact via affinity.

    p1, p2 are absolute endpoints; pixels are px wide starting at (x0, y0);
    rows/cols index the block.  Side 0 is the counter-clockwise (left)
    side of p1 -> p2, with on-line samples assigned to side 1.
    """
    dx, dy = p2[0] - p1[0], p2[1] - p1[1]

    def cross(x, y):
        return dx * (y - p1[1]) - dy * (x - p1[0])

    xs = x0 + np.arange(cols + 1) * px
    ys = y0 + np.arange(rows + 1) * px
    corner = cross(xs[None, :], ys[:, None])  # (rows+1, cols+1)
    c00 = corner[:-1, :-1]
    c01 = corner[:-1, 1:]
    c10 = corner[1:, :-1]
    c11 = corner[1:, 1:]
    cmin = np.minimum(np.minimum(c00, c01), np.minimum(c10, c11))
    cmax = np.maximum(np.maximum(c00, c01), np.maximum(c10, c11))
    frac = np.zeros((rows, cols))
    frac[cmin > 0.0] = 1.0
    straddle = (cmin <= 0.0) & (cmax > 0.0)
    rr, cc = np.nonzero(straddle)
    if rr.size:
        off = _sample_offsets(s) * px
        sx = x0 + cc[:, None, None] * px + off[None, None, :]
        sy = y0 + rr[:, None, None] * px + off[None, :, None]
        inside = cross(sx, sy) > 0.0
        frac[rr, cc] = inside.sum(axis=(1, 2)) / (s * s)
    return frac


def _leaf_block(leaf: EdRdpLeaf, n: int, s: int):
    """(block array, row0, col0) for the leaf's pixel window."""
    sq = leaf.square
    if (n & (n - 1)) != 0:
        raise FormatError("n must be a power of two")
    J = int(math.log2(n))
    if sq.j > J:
        raise InputShapeError("leaf square finer than the pixel grid")
    size = 1 << (J - sq.j)
    row0, col0 = sq.iy * size, sq.ix * size
    if leaf.split is None:
        return np.ones((size, size)), row0, col0
    edge, side = leaf.split
    if _is_degenerate(edge.v1, edge.v2, edge.m_count):
        raise DegenerateWedgeError(
            f"edgelet ({edge.v1},{edge.v2}) runs along the square boundary")
    p1, p2 = edge.endpoints()
    frac0 = _cross_sign_fractions(p1, p2, sq.x0, sq.y0, 1.0 / n, size, size, s)
    block = frac0 if side == 0 else 1.0 - frac0
    return block, row0, col0


def wedge_mask(leaf: EdRdpLeaf, n: int, supersample: int = CODEC_SUPERSAMPLE):
    """Per-pixel average of the leaf's indicator as a full n x n array."""
    block, row0, col0 = _leaf_block(leaf, n, int(supersample))
    out = np.zeros((n, n))
    out[row0:row0 + block.shape[0], col0:col0 + block.shape[1]] = block
    return out


@dataclass(frozen=True)
class Projection:
    """Least-squares fit of an array onto a partition's masks."""

    leaves: tuple
    coefficients: tuple  # f_P per leaf (raw mask units)
    thetas: tuple  # coefficients in normalized-mask units
    reconstruction: np.ndarray


def _group_leaves(leaves):
    """Pair up the two wedgelets of each split square; singles stay alone."""
    groups = {}
    order = []
    for idx, leaf in enumerate(leaves):
        key = (leaf.square.j, leaf.square.ix, leaf.square.iy)
        groups.setdefault(key, []).append(idx)
        if len(groups[key]) == 1:
            order.append(key)
    return [groups[key] for key in order]


def project(f_array, partition: EdRdp, supersample: int = CODEC_SUPERSAMPLE):
    """Exact least-squares projection of ``f_array`` onto the leaf masks.

    Masks of distinct squares have disjoint pixel support; the two sides
    of one split square share the pixels the edgelet crosses, so those
    pairs are solved through their 2x2 normal equations.
    """
    f = _check_array(f_array, partition.n)
    n = partition.n
    norm = 1.0 / (n * n)
    recon = np.zeros_like(f)
    coefs = [0.0] * len(partition.leaves)
    thetas = [0.0] * len(partition.leaves)
    blocks = [_leaf_block(leaf, n, supersample) for leaf in partition.leaves]
    for group in _group_leaves(partition.leaves):
        if len(group) == 1:
            idx = group[0]
            blk, r0, c0 = blocks[idx]
            g = float(np.sum(blk * blk)) * norm
            if g <= 0.0:
                raise DegenerateWedgeError("zero-norm mask in partition")
            v = float(np.sum(f[r0:r0 + blk.shape[0], c0:c0 + blk.shape[1]] * blk)) * norm
            coefs[idx] = v / g
            thetas[idx] = v / math.sqrt(g)
            recon[r0:r0 + blk.shape[0], c0:c0 + blk.shape[1]] += coefs[idx] * blk
        elif len(group) == 2:
            i0, i1 = group
            b0, r0, c0 = blocks[i0]
            b1, _, _ = blocks[i1]
            window = f[r0:r0 + b0.shape[0], c0:c0 + b0.shape[1]]
            g00 = float(np.sum(b0 * b0)) * norm
            g11 = float(np.sum(b1 * b1)) * norm
            g01 = float(np.sum(b0 * b1)) * norm
            v0 = float(np.sum(window * b0)) * norm
            v1 = float(np.sum(window * b1)) * norm
            det = g00 * g11 - g01 * g01
            if g00 <= 0.0 or g11 <= 0.0 or det <= 1e-30:
                raise DegenerateWedgeError("degenerate wedge pair in partition")
            a0 = (g11 * v0 - g01 * v1) / det
            a1 = (g00 * v1 - g01 * v0) / det
            coefs[i0], coefs[i1] = a0, a1
            thetas[i0] = a0 * math.sqrt(g00)
            thetas[i1] = a1 * math.sqrt(g11)
            recon[r0:r0 + b0.shape[0], c0:c0 + b0.shape[1]] += a0 * b0 + a1 * b1
        else:
            raise FormatError("more than two wedgelets share a square")
    return Projection(partition.leaves, tuple(coefs), tuple(thetas), recon)


def _check_array(f_array, n):
    f = np.asarray(f_array, dtype=float)
    if f.shape != (n, n):
        raise InputShapeError(f"expected a {n}x{n} array, got {f.shape}")
    return f


def _valid_edgelets(m_j: int):
    """Local indices and vertex pairs excluding boundary-collinear pairs."""
    out = []
    for v2 in range(1, m_j):
        for v1 in range(v2):
            if not _is_degenerate(v1, v2, m_j):
                out.append((v2 * (v2 - 1) // 2 + v1, v1, v2))
    return out


def _unit_vertices(m_j: int):
    """Vertex positions on the unit square (templates are scale-free)."""
    sq = DyadicSquare(0, 0, 0)
    spacing = 4.0 / m_j
    return [_perimeter_point(sq, i * spacing) for i in range(m_j)]


def fit_rdp(f_array, J: int, K: int, m_cap: int = DEFAULT_M_CAP,
            lam: float = 0.0, supersample: int = CODEC_SUPERSAMPLE) -> EdRdp:
    """Globally optimal penalized fit over the capped edgelet dictionary.

    Bottom-up dynamic program minimizing squared L2 error plus
    ``lam * leaf_count``; per square the best edgelet split (both wedge
    coefficients fitted jointly) competes against staying a leaf and
    against the quad split.  Ties prefer smaller edgelet indices, then the
    unsplit leaf, then the leaf over the quad, so results are reproducible
    bit for bit.
    """
    n = 1 << J
    f = _check_array(f_array, n)
    if lam < 0.0:
        raise RangeError("lambda must be >= 0")
    s = int(supersample)
    norm = 1.0 / (n * n)

    leaf_cost = {}
    leaf_choice = {}  # (j) -> array of (-2 quad, -1 unsplit, >=0 edgelet index)
    best_cost = {}
    # pixel-scale squares: plain leaves only
    for j in range(J, -1, -1):
        size = 1 << (J - j)
        nsq = 1 << (2 * j)
        blocks = f.reshape(1 << j, size, 1 << j, size).transpose(0, 2, 1, 3)
        blocks = blocks.reshape(nsq, size, size)  # index = iy * 2^j + ix
        sums = blocks.sum(axis=(1, 2))
        sumsq = (blocks * blocks).sum(axis=(1, 2))
        sse_unsplit = (sumsq - sums * sums / (size * size)) * norm
        cost_leaf = sse_unsplit + lam
        choice = np.full(nsq, -1, dtype=np.int64)
        if j < J:
            m_j = vertex_budget(j, J, K, m_cap)
            verts = _unit_vertices(m_j)
            best_split = np.full(nsq, np.inf)
            split_idx = np.full(nsq, -1, dtype=np.int64)
            for local_idx, v1, v2 in _valid_edgelets(m_j):
                p1, p2 = verts[v1], verts[v2]
                frac0 = _cross_sign_fractions(p1, p2, 0.0, 0.0, 1.0 / size,
                                              size, size, s)
                g00 = float(np.sum(frac0 * frac0)) * norm
                sum0 = float(np.sum(frac0))
                g01 = float(np.sum(frac0 * (1.0 - frac0))) * norm
                g11 = (size * size - 2.0 * sum0) * norm + g00
                det = g00 * g11 - g01 * g01
                if g00 <= 0.0 or g11 <= 0.0 or det <= 1e-30:
                    continue
                v0 = np.einsum("sij,ij->s", blocks, frac0) * norm
                v1_ = sums * norm - v0
                quad = (g11 * v0 * v0 - 2.0 * g01 * v0 * v1_ + g00 * v1_ * v1_) / det
                cost = sumsq * norm - quad + 2.0 * lam
                better = cost < best_split
                best_split[better] = cost[better]
                split_idx[better] = local_idx
            use_split = best_split < cost_leaf  # tie -> unsplit preferred
            cost_leaf = np.where(use_split, best_split, cost_leaf)
            choice = np.where(use_split, split_idx, choice)
        leaf_cost[j] = cost_leaf
        leaf_choice[j] = choice
        if j == J:
            best_cost[j] = cost_leaf.copy()
        else:
            child = best_cost[j + 1].reshape(1 << (j + 1), 1 << (j + 1))
            quad_cost = child.reshape(1 << j, 2, 1 << j, 2).sum(axis=(1, 3)).reshape(-1)
            take_leaf = cost_leaf <= quad_cost  # tie -> leaf preferred
            best_cost[j] = np.where(take_leaf, cost_leaf, quad_cost)
            leaf_choice[j] = np.where(take_leaf, choice, -2)

    leaves = []

    def emit(sq: DyadicSquare):
        lin = sq.iy * (1 << sq.j) + sq.ix
        pick = int(leaf_choice[sq.j][lin])
        if pick == -2:
            for child in sq.children():
                emit(child)
        elif pick == -1:
            leaves.append(EdRdpLeaf(sq, None))
        else:
            m_j = vertex_budget(sq.j, J, K, m_cap)
            edge = Edgelet.from_local_index(sq, pick, m_j)
            leaves.append(EdRdpLeaf(sq, (edge, 0)))
            leaves.append(EdRdpLeaf(sq, (edge, 1)))

    emit(DyadicSquare(0, 0, 0))
    return EdRdp(tuple(leaves), n, K, m_cap)


def fit_cost(f_array, partition: EdRdp, lam: float,
             supersample: int = CODEC_SUPERSAMPLE) -> float:
    """Penalized cost of a given partition (for cross-checking the DP)."""
    f = _check_array(f_array, partition.n)
    proj = project(f, partition, supersample)
    norm = 1.0 / (partition.n ** 2)
    sse = float(np.sum((f - proj.reconstruction) ** 2)) * norm
    return sse + lam * len(partition.leaves)


class _BitWriter:
    def __init__(self):
        self.bytes = bytearray()
        self.acc = 0
        self.nbits = 0

    def write(self, value: int, width: int):
        if width < 0 or (width == 0 and value != 0) or value < 0 \
                or (width > 0 and value >= 1 << width):
            raise FormatError(f"value {value} does not fit in {width} bits")
        for shift in range(width - 1, -1, -1):
            self.acc = (self.acc << 1) | ((value >> shift) & 1)
            self.nbits += 1
            if self.nbits == 8:
                self.bytes.append(self.acc)
                self.acc = 0
                self.nbits = 0

    def flush(self) -> bytes:
        if self.nbits:
            self.bytes.append(self.acc << (8 - self.nbits))
            self.acc = 0
            self.nbits = 0
        return bytes(self.bytes)


class _BitReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def read(self, width: int) -> int:
        value = 0
        for _ in range(width):
            byte = self.pos >> 3
            if byte >= len(self.data):
                raise CorruptionError("payload truncated")
            bit = (self.data[byte] >> (7 - (self.pos & 7))) & 1
            value = (value << 1) | bit
            self.pos += 1
        return value


def _scale_bits(J: int) -> int:
    return max(1, math.ceil(math.log2(J + 1))) if J > 0 else 0


def _edge_bits(m_j: int) -> int:
    pairs = comb(m_j, 2)
    return max(1, math.ceil(math.log2(pairs))) if pairs > 1 else 0


def _coef_bits(n: int) -> int:
    return math.ceil(math.log2(2 * n * n + 3))


@dataclass(frozen=True)
class WedgeCode:
    """Decoded header plus per-leaf records (leaf, integer coefficient q).

    theta = q / n^2; records with q = 0 are never stored.  The serialized
    layout is: magic 'WDGL', version byte, J byte, K byte, M_cap (2-byte
    little endian), record count (4-byte little endian), then per record
    [scale j][ix: j bits][iy: j bits][split flag][edgelet index][side]
    [coefficient field q + n^2 + 1], zero-padded to a byte boundary.
    """

    J: int
    K: int
    m_cap: int
    records: tuple  # of (EdRdpLeaf, int q)

    @property
    def n(self):
        return 1 << self.J

    @property
    def eta(self):
        return 1.0 / (self.n * self.n)

    @property
    def bit_length(self):
        return 8 * len(self.to_bytes())

    def to_bytes(self) -> bytes:
        header = _MAGIC + struct.pack("<BBBHI", WEDGE_FORMAT_VERSION, self.J,
                                      self.K, self.m_cap, len(self.records))
        w = _BitWriter()
        sbits = _scale_bits(self.J)
        cbits = _coef_bits(self.n)
        offset = self.n * self.n + 1
        for leaf, q in self.records:
            sq = leaf.square
            w.write(sq.j, sbits)
            w.write(sq.ix, sq.j)
            w.write(sq.iy, sq.j)
            if leaf.split is None:
                w.write(0, 1)
            else:
                edge, side = leaf.split
                w.write(1, 1)
                w.write(edge.local_index,
                        _edge_bits(vertex_budget(sq.j, self.J, self.K, self.m_cap)))
                w.write(side, 1)
            if not 0 <= q + offset <= 2 * offset:
                raise RangeError("coefficient outside the stream alphabet")
            w.write(q + offset, cbits)
        return header + w.flush()

    @classmethod
    def from_bytes(cls, data: bytes) -> "WedgeCode":
        if len(data) < 13:
            raise CorruptionError("stream shorter than the fixed header")
        if data[:4] != _MAGIC:
            raise CorruptionError("bad magic")
        version, J, K, m_cap, count = struct.unpack("<BBBHI", data[4:13])
        if version != WEDGE_FORMAT_VERSION:
            raise CorruptionError(f"unsupported version {version}")
        if J > 15:
            raise CorruptionError("implausible pixel scale in header")
        r = _BitReader(data[13:])
        sbits = _scale_bits(J)
        n = 1 << J
        cbits = _coef_bits(n)
        offset = n * n + 1
        records = []
        for _ in range(count):
            j = r.read(sbits)
            if j > J:
                raise CorruptionError("leaf scale beyond header scale")
            ix = r.read(j)
            iy = r.read(j)
            sq = DyadicSquare(j, ix, iy)
            if r.read(1):
                m_j = vertex_budget(j, J, K, m_cap)
                idx = r.read(_edge_bits(m_j))
                if idx >= comb(m_j, 2):
                    raise CorruptionError("edgelet index out of range")
                side = r.read(1)
                edge = Edgelet.from_local_index(sq, idx, m_j)
                leaf = EdRdpLeaf(sq, (edge, side))
            else:
                leaf = EdRdpLeaf(sq, None)
            q = r.read(cbits) - offset
            records.append((leaf, q))
        return cls(J, K, m_cap, tuple(records))


def encode(f_array, J: int, K: int, m_cap: int = DEFAULT_M_CAP,
           lam: float = 0.0) -> WedgeCode:
    """Fit, project, quantize, and pack; zero coefficients are dropped.

    Coefficients are taken against unit-normalized masks, rounded to the
    nearest multiple of eta = n^-2 with ties toward zero.
    """
    n = 1 << J
    f = _check_array(f_array, n)
    partition = fit_rdp(f, J, K, m_cap, lam)
    proj = project(f, partition)
    eta = 1.0 / (n * n)
    records = []
    for leaf, theta in zip(partition.leaves, proj.thetas):
        if abs(theta) > 1.0 + eta + 1e-12:
            raise RangeError(
                f"coefficient {theta:.6g} outside [-1-eta, 1+eta]")
        q = _round_half_toward_zero(theta / eta)
        if q != 0:
            records.append((leaf, q))
    return WedgeCode(J, K, m_cap, tuple(records))


def _round_half_toward_zero(x: float) -> int:
    if x >= 0.0:
        return int(math.ceil(x - 0.5))
    return -int(math.ceil(-x - 0.5))


def decode(code: WedgeCode) -> np.ndarray:
    """Reconstruct sum_theta_P phi_P; lossless given the stored integers."""
    n = code.n
    out = np.zeros((n, n))
    covered = np.zeros((n, n), dtype=np.int32)
    norm = 1.0 / (n * n)
    for leaf, q in code.records:
        block, r0, c0 = _leaf_block(leaf, n, CODEC_SUPERSAMPLE)
        nsq = float(np.sum(block * block)) * norm
        if nsq <= 0.0:
            raise DegenerateWedgeError("zero-norm mask in stream")
        theta = q * code.eta
        out[r0:r0 + block.shape[0], c0:c0 + block.shape[1]] += \
            theta / math.sqrt(nsq) * block
        covered[r0:r0 + block.shape[0], c0:c0 + block.shape[1]] += block > 0.5
    if np.any(covered > 1):
        warnings.warn("overlapping leaves in stream; emitting the sum anyway")
    return out


def encode_to_target(f_array, J: int, K: int, m_cap: int, target_eps: float,
                     sweeps: int = 16):
    """Bisection on the split penalty to meet an L2 error target.

    A larger penalty means fewer leaves, fewer bits, and more error, so we
    push the penalty as high as the target allows.  Returns
    (code, error, reached); when the target is unreachable even at zero
    penalty the best-effort code comes back with reached = False.
    """
    n = 1 << J
    f = _check_array(f_array, n)

    def attempt(lam):
        code = encode(f, J, K, m_cap, lam)
        err = float(np.sqrt(np.mean((decode(code) - f) ** 2)))
        return code, err

    code, err = attempt(0.0)
    if err > target_eps:
        return code, err, False
    best = (code, err)
    lo, hi = 0.0, 1.0
    for _ in range(sweeps):
        mid = (lo + hi) / 2.0
        code, err = attempt(mid)
        if err <= target_eps:
            lo = mid
            if code.bit_length < best[0].bit_length:
                best = (code, err)
        else:
            hi = mid
    return best[0], best[1], True
