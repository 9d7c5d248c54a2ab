import numpy as np
import pytest

from approxrate.cartoon import disc_star, rasterize
from approxrate.exceptions import (
    CorruptionError,
    DegenerateWedgeError,
    FormatError,
    InputShapeError,
)
from approxrate.wedgelet import (
    DyadicSquare,
    EdRdp,
    EdRdpLeaf,
    Edgelet,
    WedgeCode,
    decode,
    edgelet_count,
    encode,
    encode_to_target,
    enumerate_vertices,
    fit_cost,
    fit_rdp,
    project,
    vertex_budget,
    wedge_mask,
)
from brute import brute_best_cost

UNIT = DyadicSquare(0, 0, 0)


def test_edgelet_count_examples():
    assert edgelet_count(1, 1) == 232
    assert edgelet_count(0, 0) == 6
    assert edgelet_count(1, 1, 8) == 140
    # uncapped value obeys the 8 (J+1) / delta^2 bound
    for J, K in ((1, 1), (2, 2), (3, 1)):
        delta = 2.0 ** -(J + K)
        assert edgelet_count(J, K) <= 8 * (J + 1) * delta ** -2


def test_vertex_budget():
    assert vertex_budget(0, 1, 1, 1 << 40) == 16
    assert vertex_budget(1, 1, 1, 1 << 40) == 8
    assert vertex_budget(0, 3, 3, 32) == 32
    with pytest.raises(FormatError):
        vertex_budget(0, 1, 1, 6)


def test_enumerate_vertices_clockwise_from_upper_left():
    assert enumerate_vertices(UNIT, 0, 0, 4) == [
        (0.0, 1.0), (1.0, 1.0), (1.0, 0.0), (0.0, 0.0)]


def test_enumerate_vertices_spacing():
    verts = enumerate_vertices(UNIT, 2, 1, 1 << 40)
    m = vertex_budget(0, 2, 1, 1 << 40)
    assert len(verts) == m == 4 * 2 ** 3
    d = np.hypot(verts[1][0] - verts[0][0], verts[1][1] - verts[0][1])
    assert d == pytest.approx(4.0 / m)


def test_edgelet_local_index_roundtrip():
    m = 8
    seen = set()
    for v2 in range(1, m):
        for v1 in range(v2):
            e = Edgelet(UNIT, v1, v2, m)
            back = Edgelet.from_local_index(UNIT, e.local_index, m)
            assert (back.v1, back.v2) == (v1, v2)
            seen.add(e.local_index)
    assert seen == set(range(m * (m - 1) // 2))


def test_wedge_mask_unsplit_ones():
    mask = wedge_mask(EdRdpLeaf(UNIT, None), 4)
    assert np.array_equal(mask, np.ones((4, 4)))


def test_wedge_mask_diagonal_halves():
    n = 256
    edge = Edgelet(UNIT, 0, 2, 4)  # corner (0,1) to corner (1,0)
    m0 = wedge_mask(EdRdpLeaf(UNIT, (edge, 0)), n)
    assert m0.mean() == pytest.approx(0.5, abs=2.0 / n)


def test_wedge_mask_sides_complement_exactly():
    n = 32
    m_j = vertex_budget(0, 5, 5, 16)
    for pair in ((0, 6), (1, 9), (3, 13)):
        edge = Edgelet(UNIT, pair[0], pair[1], m_j)
        m0 = wedge_mask(EdRdpLeaf(UNIT, (edge, 0)), n)
        m1 = wedge_mask(EdRdpLeaf(UNIT, (edge, 1)), n)
        assert np.array_equal(m0 + m1, np.ones((n, n)))


def test_wedge_mask_degenerate_rejected():
    edge = Edgelet(UNIT, 0, 1, 4)  # both on the top edge
    with pytest.raises(DegenerateWedgeError):
        wedge_mask(EdRdpLeaf(UNIT, (edge, 0)), 8)


def test_wedge_mask_support_confined():
    sq = DyadicSquare(1, 1, 0)
    mask = wedge_mask(EdRdpLeaf(sq, None), 8)
    assert np.all(mask[4:, :] == 0.0)
    assert np.all(mask[:, :4] == 0.0)
    assert np.all(mask[0:4, 4:8] == 1.0)


def test_project_constant():
    f = np.ones((8, 8))
    part = fit_rdp(f, 3, 3, 8, lam=0.01)
    assert len(part.leaves) == 1
    proj = project(f, part)
    assert proj.coefficients[0] == pytest.approx(1.0)
    assert np.allclose(proj.reconstruction, 1.0)


def test_project_disc_mean():
    f = rasterize(disc_star(0.25), 64, 4)
    part = EdRdp((EdRdpLeaf(UNIT, None),), 64, 6, 32)
    proj = project(f, part)
    assert proj.coefficients[0] == pytest.approx(f.mean(), abs=1e-12)


def test_project_residual_orthogonal():
    f = rasterize(disc_star(0.25), 32, 4)
    part = fit_rdp(f, 5, 5, 16, lam=1e-3)
    proj = project(f, part)
    resid = f - proj.reconstruction
    n = part.n
    for leaf in part.leaves:
        mask = wedge_mask(leaf, n)
        assert abs(float(np.sum(resid * mask)) / n ** 2) <= 1e-10


def test_partition_tiles_unit_square():
    f = rasterize(disc_star(0.25), 32, 4)
    part = fit_rdp(f, 5, 5, 16, lam=1e-3)
    part.validate()
    total = np.zeros((32, 32))
    for leaf in part.leaves:
        total += wedge_mask(leaf, 32)
    assert np.max(np.abs(total - 1.0)) <= 1e-9


def test_masks_of_distinct_squares_orthogonal():
    f = rasterize(disc_star(0.25), 32, 4)
    part = fit_rdp(f, 5, 5, 16, lam=1e-3)
    masks = [wedge_mask(leaf, 32) for leaf in part.leaves]
    for i, a in enumerate(part.leaves):
        for j in range(i + 1, len(part.leaves)):
            b = part.leaves[j]
            same_square = a.square == b.square
            ip = float(np.sum(masks[i] * masks[j]))
            if not same_square:
                assert ip == 0.0


def test_validate_rejects_partial_cover():
    leaf = EdRdpLeaf(DyadicSquare(1, 0, 0), None)
    part = EdRdp((leaf,), 4, 2, 8)
    with pytest.raises(FormatError):
        part.validate()


def test_fit_half_plane_exact():
    # the dictionary contains the corner-to-corner diagonal, so its own
    # averaged indicator is exactly representable by a single split
    n = 8
    m_j = vertex_budget(0, 3, 3, 8)
    diag = next(Edgelet(UNIT, v1, v2, m_j)
                for v1 in range(m_j) for v2 in range(v1 + 1, m_j)
                if enumerate_vertices(UNIT, 3, 3, 8)[v1] == (0.0, 0.0)
                and enumerate_vertices(UNIT, 3, 3, 8)[v2] == (1.0, 1.0)
                or enumerate_vertices(UNIT, 3, 3, 8)[v1] == (1.0, 1.0)
                and enumerate_vertices(UNIT, 3, 3, 8)[v2] == (0.0, 0.0))
    f = wedge_mask(EdRdpLeaf(UNIT, (diag, 0)), n)
    part = fit_rdp(f, 3, 3, 8, lam=1e-4)
    assert len(part.leaves) == 2
    proj = project(f, part)
    assert np.max(np.abs(proj.reconstruction - f)) <= 1e-12


def test_dp_matches_bruteforce_on_seeded_arrays():
    rng = np.random.default_rng(42)
    for trial in range(5):
        base = rng.random((8, 8)) * 0.1
        cx, cy = rng.random(2)
        yy, xx = np.meshgrid((np.arange(8) + 0.5) / 8, (np.arange(8) + 0.5) / 8,
                             indexing="ij")
        base += ((xx - cx) * 2 + (yy - cy) > 0).astype(float) * 0.7
        lam = 0.01
        part = fit_rdp(base, 3, 3, 8, lam)
        assert len(part.leaves) <= 10
        dp_cost = fit_cost(base, part, lam)
        brute = brute_best_cost(base, 3, 3, 8, lam, max_leaves=10)
        assert dp_cost == pytest.approx(brute, abs=1e-9)


def test_fit_rdp_deterministic():
    f = rasterize(disc_star(0.25), 32, 4)
    a = fit_rdp(f, 5, 5, 16, lam=1e-3)
    b = fit_rdp(f, 5, 5, 16, lam=1e-3)
    assert a == b


def test_coefficient_quantization_example():
    # theta = 0.3001 at n = 16 lands on grid point 77/256
    n = 16
    f = np.full((n, n), 0.3001)
    code = encode(f, 4, 4, 8, lam=1.0)
    assert len(code.records) == 1
    leaf, q = code.records[0]
    assert leaf.split is None
    # single all-ones mask has norm 1, so theta == mean == 0.3001
    assert q == 77
    assert q * code.eta == pytest.approx(77.0 / 256.0)


def test_roundtrip_constant():
    n = 16
    f = np.full((n, n), 0.5)
    code = encode(f, 4, 4, 8, lam=0.0)
    rec = decode(code)
    assert np.max(np.abs(rec - 0.5)) <= code.eta


def test_serialization_bit_exact():
    f = rasterize(disc_star(0.25), 32, 4)
    code = encode(f, 5, 5, 16, lam=1e-3)
    data = code.to_bytes()
    back = WedgeCode.from_bytes(data)
    assert back == code
    assert back.to_bytes() == data
    assert np.array_equal(decode(back), decode(code))
    assert code.bit_length == 8 * len(data)


def test_corruption_detected():
    f = np.full((8, 8), 0.25)
    data = encode(f, 3, 3, 8, lam=0.0).to_bytes()
    with pytest.raises(CorruptionError):
        WedgeCode.from_bytes(b"XXXX" + data[4:])
    with pytest.raises(CorruptionError):
        WedgeCode.from_bytes(data[:10])
    with pytest.raises(CorruptionError):
        WedgeCode.from_bytes(data[:-2])


def test_decode_reprojection_recovers_thetas():
    f = rasterize(disc_star(0.25), 32, 4)
    part = fit_rdp(f, 5, 5, 16, lam=1e-3)
    code = encode(f, 5, 5, 16, lam=1e-3)
    rec = decode(code)
    proj = project(rec, part)
    stored = {}
    for leaf, q in code.records:
        stored[leaf] = q * code.eta
    for leaf, theta in zip(part.leaves, proj.thetas):
        assert theta == pytest.approx(stored.get(leaf, 0.0), abs=1e-9)


def test_roundtrip_error_budget():
    f = rasterize(disc_star(0.25), 64, 4)
    lam = 64.0 ** -3
    part = fit_rdp(f, 6, 6, 32, lam)
    proj = project(f, part)
    fit_err = float(np.sqrt(np.mean((f - proj.reconstruction) ** 2)))
    code = encode(f, 6, 6, 32, lam)
    rec = decode(code)
    total = float(np.sqrt(np.mean((f - rec) ** 2)))
    budget = fit_err + 0.5 * len(part.leaves) * code.eta
    assert total <= budget + 1e-12


def test_disc_leaf_count_linear_in_n():
    n = 128
    f = rasterize(disc_star(0.25), n, 4)
    part = fit_rdp(f, 7, 7, 32, lam=float(n) ** -3.0)
    assert len(part.leaves) <= 8 * n


def test_fitted_rate_respects_fundamental_bound():
    # a different cap and seed still keep the fitted exponent under
    # beta/2 + 0.3 for the beta = 2 family
    from approxrate.cartoon import make_hypercube, vertex_function
    from approxrate.ratelab import fit_rate, l2_error_pixels

    rng = np.random.default_rng(99)
    spec = make_hypercube(2.0 ** -4, 2.0, 1.0)
    stars = [disc_star(), vertex_function(spec, rng.integers(0, 2, spec.m))]
    ns, errs = [32, 64, 128], []
    for n in ns:
        J = int(np.log2(n))
        worst = 0.0
        for star in stars:
            arr = rasterize(star, n, 4)
            code = encode(arr, J, J, 16, lam=float(n) ** -3.0)
            worst = max(worst, l2_error_pixels(decode(code), arr))
        errs.append(worst)
    slope = fit_rate(list(zip(ns, errs))).fitted_slope
    assert -slope <= 1.0 + 0.3


def test_encode_to_target():
    f = rasterize(disc_star(0.25), 32, 4)
    code, err, reached = encode_to_target(f, 5, 5, 16, 0.05)
    assert reached and err <= 0.05
    code0 = encode(f, 5, 5, 16, lam=0.0)
    assert code.bit_length <= code0.bit_length
    _, best, reached = encode_to_target(f, 5, 5, 16, 1e-9)
    assert not reached and best > 1e-9


def test_input_validation():
    with pytest.raises(InputShapeError):
        fit_rdp(np.ones((8, 8)), 4, 4, 8, 0.0)
    with pytest.raises(InputShapeError):
        Edgelet(UNIT, 3, 1, 8)
    with pytest.raises(InputShapeError):
        DyadicSquare(1, 2, 0)
