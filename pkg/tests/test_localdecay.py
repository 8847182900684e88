import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgscatter import localdecay as ld
from kgscatter.spectral import bracket, make_grid


@pytest.fixture(scope="module")
def grid():
    return ld.default_grid()


@pytest.fixture(scope="module")
def small_grid():
    return make_grid(200.0, 4096)


@pytest.fixture(scope="module")
def scans(grid):
    t = ld.scan_times(10.0, 300.0, 8)
    return {v: ld.decay_scan(v, 2.0, 0.0, t, grid) for v in ld.VARIANTS}


# --- build_matrix ---------------------------------------------------------------


def test_identity_at_time_zero(small_grid):
    spec = ld.WeightedPropagatorSpec(a=2.0, t=0.0, W=20.0, band_limit=False)
    M = ld.build_matrix(spec, small_grid)
    idx = ld.window_nodes(small_grid, 20.0)
    assert np.allclose(M, np.diag(bracket(small_grid.x[idx]) ** -4.0), atol=1e-15)
    # power iteration at tolerance 1e-8; the top singular values are nearly degenerate here
    assert ld.operator_norm(M) == pytest.approx(1.0, rel=1e-6)
    assert ld.operator_norm(M) <= 1.0


def test_band_limited_time_zero_contraction(small_grid):
    M = ld.build_matrix(ld.WeightedPropagatorSpec(a=2.0, t=0.0, W=20.0), small_grid)
    # the band limiter is 1 at the low frequencies the weights see
    assert ld.operator_norm(M) <= 1.0
    assert np.all(np.abs(np.diag(M)) >= np.abs(M - np.diag(np.diag(M))).max(axis=1))


@pytest.mark.parametrize("t", [0.7, 5.0, 40.0])
@pytest.mark.parametrize("band_limit", [True, False])
def test_hermitian_symmetry(small_grid, t, band_limit):
    M = ld.build_matrix(ld.WeightedPropagatorSpec(t=t, W=20.0, band_limit=band_limit), small_grid)
    Mm = ld.build_matrix(ld.WeightedPropagatorSpec(t=-t, W=20.0, band_limit=band_limit), small_grid)
    assert np.max(np.abs(M.conj().T - Mm)) <= 1e-10
    Ms = ld.build_matrix(ld.WeightedPropagatorSpec(t=t, W=20.0, sign=-1, band_limit=band_limit), small_grid)
    assert np.array_equal(Ms, Mm)


def test_column_count(small_grid):
    M = ld.build_matrix(ld.WeightedPropagatorSpec(t=3.0, W=15.0), small_grid)
    n = int(np.sum(np.abs(small_grid.x) <= 15.0))
    assert M.shape == (n, n)


def test_column_is_operator_on_indicator(small_grid):
    # direct spectral application to one node indicator, sampled on the window
    spec = ld.WeightedPropagatorSpec(a=1.5, b=1.0, variant="px_over_bracket", t=7.0, W=10.0)
    M = ld.build_matrix(spec, small_grid)
    idx = ld.window_nodes(small_grid, 10.0)
    j = 17
    e = np.zeros(small_grid.N)
    e[idx[j]] = bracket(small_grid.x[idx[j]]) ** -1.5
    col = np.fft.ifft(ld.full_symbol(spec, small_grid) * np.fft.fft(e))[idx]
    col *= bracket(small_grid.x[idx]) ** -1.5
    assert np.allclose(M[:, j], col, atol=1e-15)


def test_build_errors(grid, small_grid):
    with pytest.raises(ld.WindowTooLargeError):
        ld.build_matrix(ld.WeightedPropagatorSpec(W=80.0), grid)
    with pytest.raises(ValueError):
        ld.build_matrix(ld.WeightedPropagatorSpec(W=150.0), small_grid)
    with pytest.raises(ValueError):
        ld.build_matrix(ld.WeightedPropagatorSpec(a=0.5, W=10.0), small_grid)
    with pytest.raises(ValueError):
        ld.build_matrix(ld.WeightedPropagatorSpec(b=-1.0, W=10.0), small_grid)
    with pytest.raises(ValueError):
        ld.build_matrix(ld.WeightedPropagatorSpec(variant="laplace", W=10.0), small_grid)
    with pytest.raises(ValueError):
        ld.build_matrix(ld.WeightedPropagatorSpec(sign=0, W=10.0), small_grid)


def test_band_limiter_shape(grid):
    chi = ld.band_limiter(grid)
    nyq = math.pi / grid.dx
    a = np.abs(grid.xi)
    assert np.all(chi[a <= 0.5 * nyq] == 1.0)
    assert np.all(chi[a >= 0.9 * nyq] == 0.0)
    o = np.argsort(a)
    assert np.all(np.diff(chi[o]) <= 0)
    s = ld._smooth_step(np.array([0.5]))
    assert s[0] == pytest.approx(0.5, abs=1e-15)


# --- operator_norm --------------------------------------------------------------


def test_norm_identity_and_diagonal():
    assert ld.operator_norm(np.eye(7)) == pytest.approx(1.0, rel=1e-12)
    assert ld.operator_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0, rel=1e-8)
    assert ld.operator_norm(np.zeros((4, 4))) == 0.0


def test_norm_random_vs_svd():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(50, 50)) + 1j * rng.normal(size=(50, 50))
    assert ld.operator_norm(A) == pytest.approx(np.linalg.svd(A, compute_uv=False)[0], rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), m=st.integers(2, 30), n=st.integers(2, 30))
def test_norm_rectangular_vs_svd(seed, m, n):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] - s[1] < 1e-3 * s[0]:
        return  # nearly degenerate top pair: convergence too slow to be a fair example
    assert ld.operator_norm(A) == pytest.approx(s[0], rel=1e-6)


def test_norm_of_built_matrix_vs_svd(grid):
    for v in ld.VARIANTS:
        M = ld.build_matrix(ld.WeightedPropagatorSpec(variant=v, t=30.0, W=30.0), grid)
        assert ld.operator_norm(M) == pytest.approx(np.linalg.norm(M, 2), rel=1e-6)


def test_norm_rejects_vector():
    with pytest.raises(ValueError):
        ld.operator_norm(np.ones(3))


# --- decay_scan -----------------------------------------------------------------


def test_plain_exponent(scans):
    assert -0.65 <= scans["plain"].exponent <= -0.45


def test_px_over_bracket_exponent(scans):
    assert -1.7 <= scans["px_over_bracket"].exponent <= -1.3


@pytest.mark.xfail(
    strict=True,
    reason="measured rate is -3/2: the second stationary-phase term of a symbol "
    "vanishing to second order does not vanish (see test_bracket_minus_one_kernel_rate)",
)
def test_bracket_minus_one_exponent_target(scans):
    assert -2.3 <= scans["bracket_minus_one"].exponent <= -1.8


def test_bracket_minus_one_exponent_measured(scans):
    assert -1.7 <= scans["bracket_minus_one"].exponent <= -1.4


def test_bracket_minus_one_kernel_rate(grid):
    # stationary phase for int (<xi>-1)/<xi> e^{it<xi>} dxi / 2pi: the leading
    # term vanishes, the next one is (1/2pi) sqrt(2pi/t) * (1/2t) * m''(0)
    # with m''(0) = 1, i.e. |K_t(0)| t^{3/2} -> 1 / (2 sqrt(2pi))
    target = 1.0 / (2.0 * math.sqrt(2.0 * math.pi))
    for t in (100.0, 300.0, 1000.0):
        spec = ld.WeightedPropagatorSpec(variant="bracket_minus_one", t=t)
        k0 = np.fft.ifft(ld.full_symbol(spec, grid))[0] / grid.dx
        assert abs(k0) * t**1.5 == pytest.approx(target, rel=0.3 / t)


def test_plain_exponent_with_smoothing(grid):
    sc = ld.decay_scan("plain", 2.0, 1.0, ld.scan_times(10.0, 300.0, 5), grid)
    assert -0.65 <= sc.exponent <= -0.45


def test_sharp_truncation_masks_vanishing_symbol(grid):
    # without the band limiter the Nyquist jump of xi/<xi> leaves an O(1/t) kernel
    t = ld.scan_times(10.0, 300.0, 5)
    sharp = ld.decay_scan("px_over_bracket", 2.0, 0.0, t, grid, band_limit=False)
    assert -1.2 <= sharp.exponent <= -0.9


def test_scan_fit_quality(scans):
    for sc in scans.values():
        assert sc.residual < 0.05
        assert np.all(np.diff(sc.norms) < 0)
        d = sc.to_dict()
        assert d["variant"] == sc.variant and len(d["t"]) == len(d["norms"]) == 8


def test_scan_jobs_deterministic(grid):
    t = [10.0, 40.0, 160.0]
    a = ld.decay_scan("px_over_bracket", 2.0, 0.0, t, grid, jobs=1)
    b = ld.decay_scan("px_over_bracket", 2.0, 0.0, t, grid, jobs=3)
    assert np.array_equal(a.norms, b.norms)


def test_scan_rejects_bad_times(grid):
    with pytest.raises(ValueError):
        ld.decay_scan("plain", 2.0, 0.0, [10.0], grid)
    with pytest.raises(ValueError):
        ld.decay_scan("plain", 2.0, 0.0, [0.0, 10.0], grid)


def test_default_grid_wraparound_margin():
    assert ld.default_grid(300.0).L >= 1200.0
    assert ld.default_grid(500.0).L >= 2000.0


# --- invariants -----------------------------------------------------------------


@settings(max_examples=8, deadline=None)
@given(t=st.floats(10.0, 300.0))
def test_rate_hierarchy(grid, t):
    n = {v: ld.norm_at(v, 2.0, 0.0, t, grid) for v in ld.VARIANTS}
    assert n["bracket_minus_one"] <= 3 * n["px_over_bracket"]
    assert n["px_over_bracket"] <= 3 * n["plain"]


@pytest.mark.parametrize("t", [10.0, 100.0, 300.0])
@pytest.mark.parametrize("variant", ld.VARIANTS)
def test_window_saturation(grid, t, variant):
    a = ld.norm_at(variant, 2.0, 0.0, t, grid, W=25.0)
    b = ld.norm_at(variant, 2.0, 0.0, t, grid, W=50.0)
    assert abs(b - a) < 0.02 * b


@settings(max_examples=10, deadline=None)
@given(t=st.floats(0.0, 300.0), a=st.floats(1.0, 3.0))
def test_plain_contraction(grid, t, a):
    assert ld.norm_at("plain", a, 0.0, t, grid, W=30.0) <= 1.0 + 1e-12
