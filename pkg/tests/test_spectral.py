import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgscatter import spectral as sp


@pytest.fixture(scope="module")
def grid():
    return sp.make_grid(100.0, 2048)


def gauss(grid, s=1.0, x0=0.0):
    return sp.Field(grid, np.exp(-((grid.x - x0) ** 2) / (2 * s * s)))


# --------------------------------------------------------------------- grid


def test_make_grid_arithmetic():
    g = sp.make_grid(100.0, 2048)
    assert g.dx == pytest.approx(0.09765625)
    assert g.xi_max == pytest.approx(32.17, abs=5e-3)
    assert np.all(np.diff(g.x) > 0)
    assert g.x[g.origin_index] == 0.0
    assert np.allclose(np.diff(g.xi[g.order]), g.dxi)
    assert g.xi.min() == pytest.approx(-g.xi_max)


def test_make_grid_boundary_accepted():
    g = sp.make_grid(50.0, 256)
    assert g.xi_max == pytest.approx(2.56 * np.pi)


@pytest.mark.parametrize("L,N", [(100.0, 100), (100.0, 255), (0.0, 256), (-1.0, 256), (100.0, 128)])
def test_make_grid_rejects(L, N):
    with pytest.raises(ValueError):
        sp.make_grid(L, N)


def test_make_grid_underresolved():
    with pytest.raises(sp.ResolutionError):
        sp.make_grid(200.0, 256)


# ------------------------------------------------------------- transforms


def test_gaussian_transform(grid):
    F = sp.to_spectrum(gauss(grid))
    assert np.max(np.abs(F.values - np.exp(-grid.xi**2 / 2))) <= 1e-10


def test_narrow_gaussian_transform(grid):
    F = sp.to_spectrum(sp.Field(grid, np.exp(-grid.x**2)))
    exact = np.exp(-grid.xi**2 / 4) / np.sqrt(2)
    assert np.max(np.abs(F.values - exact)) <= 1e-10


def test_shifted_gaussian_phase(grid):
    F = sp.to_spectrum(gauss(grid, x0=3.0))
    exact = np.exp(-3j * grid.xi) * np.exp(-grid.xi**2 / 2)
    assert np.max(np.abs(F.values - exact)) <= 1e-10


def test_transform_matches_direct_sum():
    g = sp.make_grid(20.0, 256)
    rng = np.random.default_rng(0)
    f = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    direct = g.dx / np.sqrt(2 * np.pi) * np.exp(-1j * np.outer(g.xi, g.x)) @ f
    assert np.allclose(sp.to_spectrum(sp.Field(g, f)).values, direct, atol=1e-12)


def test_round_trip(grid):
    rng = np.random.default_rng(1)
    f = sp.Field(grid, rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N))
    back = sp.from_spectrum(sp.to_spectrum(f))
    assert np.max(np.abs(back.values - f.values)) <= 1e-12 * np.max(np.abs(f.values))


def test_real_field_conjugate_symmetry(grid):
    f = sp.Field(grid, np.exp(-((grid.x - 1.3) ** 2)) * np.cos(grid.x))
    F = sp.to_spectrum(f).values
    # xi_{-k} sits at index (N - k) mod N
    mirrored = np.roll(F[::-1], 1)
    assert np.max(np.abs(mirrored - np.conj(F))) <= 1e-12


def test_grid_mismatch():
    a = sp.Field(sp.make_grid(50.0, 256), np.zeros(256))
    b = sp.Field(sp.make_grid(40.0, 256), np.zeros(256))
    with pytest.raises(ValueError):
        a + b
    with pytest.raises(ValueError):
        sp.Field(sp.make_grid(50.0, 256), np.zeros(512))


def test_real_tag():
    g = sp.make_grid(50.0, 256)
    assert sp.Field(g, np.ones(256) + 1e-14j).is_real
    assert not sp.Field(g, np.ones(256) + 1e-6j).is_real


# ------------------------------------------------------------- multipliers


def test_symbol_values():
    assert sp.bracket_power(1.0)(np.array(0.0)) == 1.0
    assert sp.bracket_power(1.0)(np.array(np.sqrt(3.0))) == pytest.approx(2.0, abs=1e-15)
    assert sp.inv_two_plus()(np.array(0.0)) == pytest.approx(1 / 3)
    assert sp.bracket_minus_one()(np.array(0.0)) == 0.0
    assert sp.deriv_over_bracket()(np.array(1.0)) == pytest.approx(1 / np.sqrt(2))


def test_zero_time_propagator_identity(grid):
    F = sp.to_spectrum(gauss(grid))
    G = sp.apply_multiplier(F, sp.propagator(0.0))
    assert np.array_equal(F.values, G.values)


def test_guarded_division_rejects_resonant_data(grid):
    # a lattice point inside the band is needed; pick a grid where one lands there
    g = sp.make_grid(32 * np.pi / np.sqrt(3.0), 512)  # xi_k = sqrt(3) at k = 32
    assert np.any(sp.guard_band(g.xi))
    F = sp.Spectrum(g, np.ones(g.N, dtype=complex))
    with pytest.raises(sp.ResonanceError):
        sp.apply_multiplier(F, sp.inv_two_minus())
    Z = sp.Spectrum(g, np.where(sp.guard_band(g.xi), 0.0, 1.0).astype(complex))
    out = sp.apply_multiplier(Z, sp.inv_two_minus())
    assert np.all(np.isfinite(out.values))
    assert np.all(out.values[sp.guard_band(g.xi)] == 0)


def test_derivative_oracle(grid):
    f = gauss(grid)
    df = sp.derivative(f)
    assert np.max(np.abs(df.values + grid.x * f.values)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(s=st.floats(-3, 3), t1=st.floats(-50, 50), t2=st.floats(-50, 50))
def test_multiplier_properties(s, t1, t2):
    g = sp.make_grid(60.0, 1024)
    f = sp.to_spectrum(sp.Field(g, np.exp(-g.x**2 / 3) * (1 + 0.5j * np.sin(g.x))))
    back = sp.apply_multiplier(sp.apply_multiplier(f, sp.bracket_power(s)), sp.bracket_power(-s))
    assert np.max(np.abs(back.values - f.values)) <= 1e-12 * np.max(np.abs(f.values))
    two = sp.apply_multiplier(sp.apply_multiplier(f, sp.propagator(t1)), sp.propagator(t2))
    one = sp.apply_multiplier(f, sp.propagator(t1 + t2))
    assert np.max(np.abs(two.values - one.values)) <= 1e-10
    assert sp.from_spectrum(one).norm() == pytest.approx(sp.from_spectrum(f).norm(), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(c=st.floats(-5, 5), w=st.floats(0.3, 4), k=st.floats(-3, 3))
def test_parseval(c, w, k):
    g = sp.make_grid(80.0, 2048)
    f = sp.Field(g, np.exp(-((g.x - c) ** 2) / (2 * w * w)) * np.exp(1j * k * g.x))
    assert g.l2(f.values) == pytest.approx(sp.to_spectrum(f).norm(), rel=1e-10)


def test_dispersive_decay():
    g = sp.make_grid(400.0, 8192)
    f0 = gauss(g)
    scaled = [sp.free_flow(f0, t).sup() * np.sqrt(t) for t in np.geomspace(10, 200, 9)]
    assert max(scaled) / min(scaled) < 1.5
    assert max(scaled) < 2.0


# --------------------------------------------------------------- ft_at


def test_ft_at_gaussian(grid):
    val = sp.ft_at(gauss(grid), np.sqrt(3.0))
    assert val == pytest.approx(np.exp(-1.5), abs=1e-12)
    assert abs(val - 0.223130) < 1e-6


def test_ft_at_symmetries(grid):
    f = sp.Field(grid, np.exp(-((grid.x - 0.7) ** 2)) * (1 + grid.x))
    assert sp.ft_at(f, -np.sqrt(3)) == pytest.approx(np.conj(sp.ft_at(f, np.sqrt(3))), abs=1e-14)
    odd = sp.Field(grid, grid.x * np.exp(-grid.x**2))
    assert abs(sp.ft_at(odd, 0.0)) < 1e-14


def test_ft_at_matches_lattice(grid):
    f = gauss(grid, 1.5, 2.0)
    F = sp.to_spectrum(f).values
    assert np.allclose(sp.ft_at(f, grid.xi[:40]), F[:40], atol=1e-12)


def test_ft_at_warns_without_decay():
    g = sp.make_grid(50.0, 512)
    with pytest.warns(RuntimeWarning):
        sp.ft_at(sp.Field(g, np.ones(g.N)), 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sp.ft_at(gauss(g), 1.0)


# --------------------------------------------------- free wave asymptotics


def test_free_wave_asymptotic_light_cone(grid):
    f0 = gauss(grid)
    assert sp.free_wave_asymptotic(f0, 10.0, 10.0) == 0
    assert sp.free_wave_asymptotic(f0, 10.0, -12.0) == 0
    with pytest.raises(ValueError):
        sp.free_wave_asymptotic(f0, 0.5, 0.0)


def test_free_wave_asymptotic_origin(grid):
    f0 = gauss(grid, 1.0, 0.5)
    t = 37.0
    expected = t**-0.5 * np.exp(1j * np.pi / 4) * np.exp(1j * t) * sp.ft_at(f0, 0.0)
    assert sp.free_wave_asymptotic(f0, t, 0.0) == pytest.approx(expected, abs=1e-14)


def test_free_wave_asymptotic_resonant_ray(grid):
    f0 = gauss(grid)
    t = 40.0
    x = np.sqrt(3) / 2 * t
    expected = t**-0.5 * np.exp(1j * np.pi / 4) * np.exp(1j * t / 2) * 2**1.5 * sp.ft_at(f0, -np.sqrt(3))
    assert sp.free_wave_asymptotic(f0, t, x) == pytest.approx(expected, rel=1e-12)


def test_free_wave_asymptotic_accuracy():
    g = sp.make_grid(400.0, 8192)
    f0 = gauss(g)
    t = 100.0
    v = sp.free_flow(f0, t).values
    sel = np.abs(g.x) <= 0.9 * t
    approx = sp.free_wave_asymptotic(f0, t, g.x[sel])
    err = np.max(np.abs(v[sel] - approx))
    assert err < 0.2 * np.max(np.abs(v[sel]))


# ------------------------------------------------------------ L operator


def test_l_operator_at_zero_time(grid):
    v = gauss(grid, 1.0, 1.0)
    lhs = sp.l_operator(v, 0.0).values
    rhs = sp.apply_field(sp.Field(grid, grid.x * v.values), sp.bracket_power(1.0)).values
    assert np.max(np.abs(lhs - rhs)) < 1e-13


def _fd_second(values, h):
    return (np.roll(values, -1) - 2 * values + np.roll(values, 1)) / h**2


def test_l_norm_finite_difference_oracle():
    # ||<D> L v|| at t = 0 equals ||(1 - d^2)(x v)||; second derivative by
    # central differences on two resolutions combined with Richardson.
    g1 = sp.make_grid(40.0, 4096)
    g2 = sp.make_grid(40.0, 8192)

    def fd_norm(g):
        w = g.x * np.exp(-g.x**2 / 2)
        return g.l2(w - _fd_second(w, g.dx))

    n1, n2 = fd_norm(g1), fd_norm(g2)
    richardson = (4 * n2 - n1) / 3
    spectral = sp.l_operator_norm(sp.Field(g1, np.exp(-g1.x**2 / 2)), 0.0)
    assert spectral == pytest.approx(richardson, abs=1e-6)
    # closed form: int (4x - x^3)^2 e^{-x^2} dx = 31 sqrt(pi) / 8
    assert spectral == pytest.approx(np.sqrt(31 * np.sqrt(np.pi) / 8), rel=1e-12)


def test_l_norm_conserved_by_free_flow():
    g = sp.make_grid(200.0, 4096)
    v0 = sp.Field(g, np.exp(-(g.x**2) / 2) * (1 + 0.3j * g.x))
    norms = [sp.l_operator_norm(sp.free_flow(v0, t), t) for t in (0.0, 5.0, 25.0, 60.0)]
    assert np.ptp(norms) < 1e-9 * norms[0]
