import numpy as np
import pytest
from scipy.signal import convolve

from snlslab.errors import ConfigError, LatticeMismatchError
from snlslab.spectral import (
    CubeSpec,
    FrequencyLattice,
    TorusField,
    bessel_multiplier,
    bump,
    cube_project,
    free_evolve,
    lp_project,
    lp_symbol,
    quintic_nonlinearity,
    to_grid,
    to_modes,
)


def rand_field(K, seed=0, M=None):
    lat = FrequencyLattice(K, M)
    return TorusField.random(lat, np.random.default_rng(seed))


def brute_quintic(c):
    """|f|^4 f by direct (non-FFT) convolution of coefficient arrays."""
    K = (c.shape[0] - 1) // 2
    cbar = np.conj(c[::-1, ::-1, ::-1])
    acc = c
    for factor in (c, c, cbar, cbar):
        acc = convolve(acc, factor, method="direct")
    mid = (acc.shape[0] - 1) // 2
    return acc[mid - K : mid + K + 1, mid - K : mid + K + 1, mid - K : mid + K + 1]


class TestTransforms:
    def test_constant_roundtrip(self):
        lat = FrequencyLattice(3)
        f = TorusField.constant(lat, 1.0)
        g = to_grid(f)
        assert np.allclose(g, 1.0, atol=0, rtol=1e-15)
        assert np.max(np.abs(to_modes(lat, g).coeffs - f.coeffs)) < 1e-15

    def test_single_mode_grid_values(self):
        lat = FrequencyLattice(2, M=8)
        f = TorusField.single_mode(lat, (1, 0, 0))
        x = 2 * np.pi * np.arange(8) / 8
        expected = np.exp(1j * x)[:, None, None] * np.ones((8, 8, 8))
        assert np.max(np.abs(to_grid(f) - expected)) < 1e-12
        assert np.max(np.abs(to_modes(lat, to_grid(f)).coeffs - f.coeffs)) < 1e-12

    def test_random_roundtrip(self):
        f = rand_field(4, M=16)
        back = to_modes(f.lattice, to_grid(f))
        assert np.linalg.norm(back.coeffs - f.coeffs) / np.linalg.norm(f.coeffs) < 1e-12

    def test_grid_roundtrip_on_minimal_grid(self):
        lat = FrequencyLattice(3, M=7)
        g = np.random.default_rng(1).standard_normal((7, 7, 7)) + 0j
        back = to_grid(to_modes(lat, g))
        assert np.linalg.norm(back - g) / np.linalg.norm(g) < 1e-12

    @pytest.mark.parametrize("K,M", [(2, 5), (4, 16), (5, 13)])
    def test_plancherel(self, K, M):
        f = rand_field(K, seed=K, M=M)
        g = to_grid(f)
        lhs = np.mean(np.abs(g) ** 2)
        assert abs(lhs - f.l2_squared()) / f.l2_squared() < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(LatticeMismatchError):
            TorusField(FrequencyLattice(2), np.zeros((3, 3, 3)))

    def test_grid_too_small(self):
        with pytest.raises(ConfigError):
            FrequencyLattice(4, M=8)


class TestLittlewoodPaley:
    def test_bump_shape(self):
        assert bump(0.0) == 1.0 and bump(1.0) == 1.0 and bump(2.0) == 0.0
        assert bump(1.5) == pytest.approx(0.5, abs=1e-15)
        s = np.linspace(1, 2, 101)
        assert np.all(np.diff(bump(s)) <= 0)
        assert np.allclose(bump(-s), bump(s))

    def test_zero_mode(self):
        lat = FrequencyLattice(2)
        f = TorusField.constant(lat, 2.5)
        assert np.array_equal(lp_project(f, 1).coeffs, f.coeffs)

    def test_partition_of_unity(self):
        f = rand_field(8, seed=3)
        total = sum(lp_project(f, N).coeffs for N in (1, 2, 4, 8, 16))
        assert np.max(np.abs(total - f.coeffs)) < 1e-12

    def test_symbols_at_three(self):
        vals = {N: float(lp_symbol(3.0, N)) for N in (1, 2, 4, 8, 16)}
        assert vals[1] == 0 and vals[8] == 0 and vals[16] == 0
        assert vals[2] > 0 and vals[4] > 0
        # chosen bump: psi(1.5) = g(.5) / (g(.5) + g(.5)) = 1/2
        assert vals[2] == pytest.approx(0.5, abs=1e-15)
        assert vals[2] + vals[4] == pytest.approx(1.0, abs=1e-15)

    def test_non_dyadic_rejected(self):
        with pytest.raises(ValueError):
            lp_project(rand_field(2), 3)

    def test_dyadic_blocks_cover_lattice(self):
        lat = FrequencyLattice(5)
        total = sum(lp_symbol(lat.n_abs, N) for N in lat.dyadic_blocks())
        assert np.max(np.abs(total - 1.0)) < 1e-14


class TestMultipliers:
    def test_cube_identity_and_disjoint(self):
        f = rand_field(3)
        assert np.array_equal(cube_project(f, CubeSpec((0, 0, 0), 8)).coeffs, f.coeffs)
        assert not np.any(cube_project(f, CubeSpec((40, 0, 0), 4)).coeffs)

    def test_cube_idempotent_selfadjoint(self):
        f, g = rand_field(3, 1), rand_field(3, 2)
        C = CubeSpec((1, -1, 0), 2)
        pf = cube_project(f, C)
        assert np.array_equal(cube_project(pf, C).coeffs, pf.coeffs)
        lhs = np.vdot(g.coeffs, pf.coeffs)
        rhs = np.vdot(cube_project(g, C).coeffs, f.coeffs)
        assert abs(lhs - rhs) < 1e-12

    def test_cube_membership(self):
        C = CubeSpec((0, 0, 0), 2)
        assert C.contains(-1, 0, 0) and C.contains(0, 0, 0) and not C.contains(1, 0, 0)

    def test_bessel(self):
        f = rand_field(3)
        assert np.array_equal(bessel_multiplier(f, 0).coeffs, f.coeffs)
        e = TorusField.single_mode(f.lattice, (1, 0, 0))
        assert bessel_multiplier(e, 1).coeffs[f.lattice.index_of((1, 0, 0))] == pytest.approx(np.sqrt(2))
        back = bessel_multiplier(bessel_multiplier(f, 2), -2)
        assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-14 * np.max(np.abs(f.coeffs)) * 10

    def test_free_evolution(self):
        f = rand_field(4)
        assert np.array_equal(free_evolve(f, 0.0).coeffs, f.coeffs)
        back = free_evolve(free_evolve(f, 0.37), -0.37)
        assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-14 * 10
        for s in (0, 1, 2):
            assert abs(free_evolve(f, 1.3).hs_norm(s) - f.hs_norm(s)) < 1e-12 * f.hs_norm(s)

    def test_projectors_commute_with_free_evolution(self):
        f = rand_field(5, 7)
        C = CubeSpec((1, 2, 0), 4)
        for P in (lambda h: lp_project(h, 4), lambda h: cube_project(h, C), lambda h: bessel_multiplier(h, 1)):
            a = P(free_evolve(f, 0.81)).coeffs
            b = free_evolve(P(f), 0.81).coeffs
            assert np.max(np.abs(a - b)) < 1e-13


class TestQuintic:
    def test_constant(self):
        lat = FrequencyLattice(2)
        c = 0.7 - 0.4j
        out = quintic_nonlinearity(TorusField.constant(lat, c))
        expected = TorusField.constant(lat, abs(c) ** 4 * c)
        assert np.max(np.abs(out.coeffs - expected.coeffs)) < 1e-15

    def test_single_mode(self):
        lat = FrequencyLattice(3)
        a = 1.2 + 0.5j
        out = quintic_nonlinearity(TorusField.single_mode(lat, (1, -2, 3), a))
        expected = TorusField.single_mode(lat, (1, -2, 3), abs(a) ** 4 * a)
        assert np.max(np.abs(out.coeffs - expected.coeffs)) < 1e-12

    @pytest.mark.parametrize("K,seed", [(1, 0), (2, 1), (2, 2)])
    def test_matches_brute_force_convolution(self, K, seed):
        f = rand_field(K, seed)
        out = quintic_nonlinearity(f).coeffs
        ref = brute_quintic(f.coeffs)
        assert np.max(np.abs(out - ref)) / np.max(np.abs(ref)) < 1e-12

    def test_insufficient_padding(self):
        lat = FrequencyLattice(2, M_pad=12)
        with pytest.raises(ConfigError):
            quintic_nonlinearity(TorusField.constant(lat, 1.0))
