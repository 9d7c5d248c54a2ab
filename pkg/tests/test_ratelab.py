import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from approxrate.constructors import build_bspline_net
from approxrate.exceptions import (
    DomainError,
    ResolutionMismatchError,
    SizeError,
    UnreachableError,
)
from approxrate.nnet import relu_power
from approxrate.ratelab import (
    covering_distortion_exact,
    covering_distortion_greedy,
    empirical_minimax_length,
    fit_rate,
    l2_error_pixels,
    measure_error,
    sup_error_on_grid,
)
from approxrate.splines import bspline_closed


def test_measure_error_trivials():
    f = np.zeros((8, 8))
    assert measure_error(f, f.copy(), None, "l2_pixels") == 0.0
    ones = np.ones((8, 8))
    assert measure_error(ones, np.zeros((8, 8)), None, "l2_pixels") == 1.0


def test_measure_error_resolution_mismatch():
    with pytest.raises(ResolutionMismatchError):
        l2_error_pixels(np.ones((4, 4)), np.ones((8, 8)))


def test_measure_error_unknown_norm():
    with pytest.raises(DomainError):
        measure_error(np.ones((2, 2)), np.ones((2, 2)), None, "l7")


def test_measure_error_bspline_net():
    rep = build_bspline_net(2, 0.01, 3.0, relu_power(1))
    err = measure_error(rep.network, lambda x: bspline_closed(2, x),
                        (-3.0, 3.0), "l2_quad")
    assert err <= 1e-10


def test_sup_error_on_grid_symmetric():
    f = lambda x: x * x
    g = lambda x: x * x + 0.25
    assert sup_error_on_grid(f, g, -1, 1) == pytest.approx(0.25)


def test_fit_rate_exact_power_law():
    samples = [(m, float(m) ** -2) for m in (2, 4, 8, 16)]
    rep = fit_rate(samples)
    assert rep.fitted_slope == pytest.approx(-2.0, abs=1e-12)
    assert rep.r_squared == pytest.approx(1.0)


def test_fit_rate_constant():
    rep = fit_rate([(m, 0.5) for m in (2, 4, 8)])
    assert rep.fitted_slope == pytest.approx(0.0, abs=1e-12)


def test_fit_rate_validation():
    with pytest.raises(DomainError):
        fit_rate([(1, 0.5), (2, 0.4)])
    with pytest.raises(DomainError):
        fit_rate([(1, 0.5), (2, 0.4), (2, 0.3)])
    with pytest.raises(DomainError):
        fit_rate([(1, 0.5), (2, -0.4), (3, 0.3)])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0))
def test_fit_rate_affine_equivariance(c):
    samples = [(m, float(m) ** -1.5 * 2.0) for m in (2, 4, 8, 16)]
    scaled = [(m, e * c) for m, e in samples]
    base = fit_rate(samples)
    shifted = fit_rate(scaled)
    assert shifted.fitted_slope == pytest.approx(base.fitted_slope, abs=1e-9)
    assert shifted.intercept - base.intercept == pytest.approx(np.log(c), abs=1e-9)


def test_covering_exact_values():
    assert covering_distortion_exact(1, 1) == 0.0
    assert covering_distortion_exact(2, 1) == 0.5
    assert covering_distortion_exact(3, 3) == 0.0


def test_covering_exact_zero_iff_full_cube_small():
    for m in (1, 2, 3):
        for R in range(0, m + 1):
            val = covering_distortion_exact(m, R)
            if R == m:
                assert val == 0.0
            else:
                assert val > 0.0


def test_covering_exact_guards():
    with pytest.raises(DomainError):
        covering_distortion_exact(2, 3)
    with pytest.raises(SizeError):
        covering_distortion_exact(5, 1)


def test_greedy_matches_exact_at_4_2():
    exact = covering_distortion_exact(4, 2)
    greedy = covering_distortion_greedy(4, 2, restarts=8)
    assert greedy == pytest.approx(exact)


def test_greedy_upper_bounds_exact():
    for m, R in ((2, 1), (3, 1), (3, 2), (4, 1), (4, 3)):
        assert covering_distortion_greedy(m, R, restarts=6) >= \
            covering_distortion_exact(m, R) - 1e-12


def test_greedy_monotone_in_codebook_size():
    d_small = covering_distortion_greedy(8, 1, restarts=4)
    d_large = covering_distortion_greedy(8, 2, restarts=4)
    assert d_large <= d_small + 1e-12


def test_greedy_linear_band():
    ratios = []
    for m in (8, 12):
        d = covering_distortion_greedy(m, m // 4, restarts=3)
        ratios.append(d / m)
    assert min(ratios) > 0.05
    assert max(ratios) / min(ratios) <= 2.0


def test_empirical_minimax_length():
    # toy codec: knob n costs 10 n bits and achieves error 1/n
    def encode_at(n, f):
        return 10 * n, 1.0 / n
    bits = empirical_minimax_length(encode_at, ["f"], 0.25, [1, 2, 4, 8, 16])
    assert bits == 40
    with pytest.raises(UnreachableError) as info:
        empirical_minimax_length(encode_at, ["f"], 0.001, [1, 2, 4])
    assert info.value.best_achieved == pytest.approx(0.25)


def test_empirical_minimax_monotone():
    def encode_at(n, f):
        return 10 * n, 1.0 / n
    knobs = [1, 2, 4, 8, 16]
    l_coarse = empirical_minimax_length(encode_at, ["f"], 0.5, knobs)
    l_fine = empirical_minimax_length(encode_at, ["f"], 0.1, knobs)
    assert l_fine >= l_coarse


def test_empirical_minimax_disc_halving_ratio():
    # halving eps roughly doubles the code length when the rate is ~1
    from approxrate.cartoon import disc_star, rasterize
    from approxrate.wedgelet import DEFAULT_M_CAP, decode, encode

    arrays = {}

    def encode_at(n, star):
        J = int(np.log2(n))
        if n not in arrays:
            arrays[n] = rasterize(star, n, 4)
        arr = arrays[n]
        code = encode(arr, J, J, DEFAULT_M_CAP, lam=float(n) ** -3.0)
        err = l2_error_pixels(decode(code), arr)
        return code.bit_length, err

    knobs = [32, 64, 128]
    disc = disc_star()
    l1 = empirical_minimax_length(encode_at, [disc], 0.014, knobs)
    l2 = empirical_minimax_length(encode_at, [disc], 0.007, knobs)
    assert 1.3 <= l2 / l1 <= 4.0
