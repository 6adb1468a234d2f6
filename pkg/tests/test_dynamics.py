import math
import warnings

import numpy as np
import pytest

from snlslab.dynamics import (
    EnergyLedger,
    SimConfig,
    WindowPlan,
    energy,
    first_order_decompose,
    interval_partition,
    mass,
    mass_identity_mc,
    nls_solve,
    perturbation_term,
    snls2_residual,
    snls_solve,
    windowed_snls_solve,
    _window_diagnostics,
)
from snlslab.errors import ConfigError, LatticeMismatchError, NumericalAbort
from snlslab.noise import NoiseStream, build_noise_operator, sample_psi
from snlslab.spaces import SpaceTimePath
from snlslab.spectral import FrequencyLattice, TorusField


def small_data(lat, amp=0.1, seed=0, decay=2.0):
    f = TorusField.random(lat, np.random.default_rng(seed), decay=decay)
    return f * (amp / math.sqrt(mass(f)))


@pytest.fixture(scope="module")
def lat2():
    return FrequencyLattice(2)


class TestConfig:
    def test_collects_all_errors(self, lat2):
        with pytest.raises(ConfigError) as err:
            SimConfig(lat2, dt=-1.0, T=1.0, scheme="rk4", stride=0)
        msg = str(err.value)
        assert "dt" in msg and "scheme" in msg and "stride" in msg

    def test_rejects_undealiased_and_ragged(self, lat2):
        with pytest.raises(ConfigError):
            SimConfig(FrequencyLattice(2, M_pad=8), 0.1, 1.0)
        with pytest.raises(ConfigError):
            SimConfig(lat2, 0.3, 1.0)
        with pytest.raises(ConfigError):
            SimConfig(lat2, 2.0, 1.0)
        assert SimConfig(lat2, 0.1, 1.0).n_steps == 10


class TestFunctionals:
    def test_constant(self, lat2):
        c = 0.7 - 0.2j
        f = TorusField.constant(lat2, c)
        assert mass(f) == pytest.approx(abs(c) ** 2, rel=1e-14)
        assert energy(f) == pytest.approx(abs(c) ** 6 / 6, rel=1e-13)

    def test_single_mode(self, lat2):
        a, n = 0.9j, (1, -2, 1)
        f = TorusField.single_mode(lat2, n, a)
        assert energy(f) == pytest.approx(0.5 * 6 * 0.81 + 0.9**6 / 6, rel=1e-13)


class TestDeterministic:
    def test_zero_stays_zero(self, lat2):
        u, led = nls_solve(TorusField.zeros(lat2), SimConfig(lat2, 0.1, 1.0))
        assert not np.any(u.coeffs) and np.all(led.mass == 0)

    @pytest.mark.parametrize("scheme", ["strang", "lie"])
    def test_constant_exact_solution(self, lat2, scheme):
        c = 1.1 + 0.4j
        u, _ = nls_solve(TorusField.constant(lat2, c), SimConfig(lat2, 0.01, 1.0, scheme=scheme))
        exact = c * np.exp(-1j * abs(c) ** 4 * u.times)
        got = u.coeffs[:, 2, 2, 2]
        assert np.max(np.abs(got - exact)) < 1e-10
        assert np.max(np.abs(u.coeffs)) == pytest.approx(abs(c))

    def test_conservation_small_data(self):
        lat = FrequencyLattice(4)
        u, led = nls_solve(small_data(lat), SimConfig(lat, 1e-3, 0.2, stride=50))
        assert led.mass_drift() < 1e-10
        assert led.energy_drift() < 1e-6
        assert len(led) == len(u) and np.all(np.isfinite(list(led.rows())))
        assert EnergyLedger.COLUMNS == ("t", "mass", "energy", "h1")

    def test_richardson_order_two(self):
        lat = FrequencyLattice(3)
        u0 = small_data(lat, amp=0.1, seed=3)
        finals = []
        for dt in (0.02, 0.01, 0.005):
            u, _ = nls_solve(u0, SimConfig(lat, dt, 0.4, stride=int(round(0.4 / dt))))
            finals.append(u.coeffs[-1])
        e1 = np.linalg.norm(finals[0] - finals[1])
        e2 = np.linalg.norm(finals[1] - finals[2])
        assert math.log2(e1 / e2) == pytest.approx(2.0, abs=0.2)

    def test_blowup_abort(self, lat2):
        huge = TorusField.constant(lat2, 1e13)
        with pytest.raises(NumericalAbort) as err:
            nls_solve(huge, SimConfig(lat2, 0.1, 0.2))
        assert err.value.step == 0

    def test_lattice_mismatch(self, lat2):
        with pytest.raises(LatticeMismatchError):
            nls_solve(TorusField.zeros(FrequencyLattice(1)), SimConfig(lat2, 0.1, 0.2))


class TestStochastic:
    def test_zero_noise_is_bit_exact(self, lat2):
        u0 = small_data(lat2, 0.5)
        phi = build_noise_operator("power_law", lat2, c=0.0)
        a, _ = nls_solve(u0, SimConfig(lat2, 0.01, 0.3))
        b, psi, _ = snls_solve(u0, SimConfig(lat2, 0.01, 0.3, noise=phi), NoiseStream(1))
        assert np.array_equal(a.coeffs, b.coeffs) and not np.any(psi.coeffs)

    def test_linear_mode_equals_psi(self, lat2):
        phi = build_noise_operator("power_law", lat2, c=0.8, alpha=1.0)
        cfg = SimConfig(lat2, 0.02, 0.5, noise=phi, nonlinear=False)
        u, psi, _ = snls_solve(TorusField.zeros(lat2), cfg, NoiseStream(4))
        assert np.max(np.abs(u.coeffs - psi.coeffs)) < 1e-12
        ref = sample_psi(phi, u.times, NoiseStream(4))
        assert np.max(np.abs(ref.coeffs - psi.coeffs)) < 1e-12
        assert np.max(np.abs(first_order_decompose(u, psi).coeffs)) < 1e-12

    def test_reproducible(self, lat2):
        phi = build_noise_operator("power_law", lat2, c=0.5)
        cfg = SimConfig(lat2, 0.05, 0.5, noise=phi, seed=9)
        a = snls_solve(small_data(lat2), cfg)[0]
        b = snls_solve(small_data(lat2), cfg)[0]
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_needs_noise(self, lat2):
        with pytest.raises(ConfigError):
            snls_solve(TorusField.zeros(lat2), SimConfig(lat2, 0.1, 1.0))

    def test_linear_in_noise_amplitude(self, lat2):
        u0 = small_data(lat2, 0.1, seed=5)
        phi = build_noise_operator("power_law", lat2, c=0.05, alpha=2.0)
        base, _ = nls_solve(u0, SimConfig(lat2, 0.01, 0.5))
        gaps = []
        for c in (1.0, 0.5, 0.25):
            u, _, _ = snls_solve(u0, SimConfig(lat2, 0.01, 0.5, noise=phi.scaled(c)), NoiseStream(2))
            d = u - base
            gaps.append(float(np.max(np.sqrt(np.sum((1 + lat2.n_squared) * np.abs(d.coeffs) ** 2, axis=(1, 2, 3))))))
        assert gaps[0] / gaps[1] == pytest.approx(2.0, rel=0.02)
        assert gaps[1] / gaps[2] == pytest.approx(2.0, rel=0.02)


class TestPerturbation:
    def test_exact_cases(self, lat2):
        v = small_data(lat2, 0.8, seed=1)
        psi = small_data(lat2, 0.3, seed=2)
        assert not np.any(perturbation_term(v, TorusField.zeros(lat2)).coeffs)
        from snlslab.spectral import quintic_coeffs

        e = perturbation_term(TorusField.zeros(lat2), psi)
        assert np.max(np.abs(e.coeffs - quintic_coeffs(psi.coeffs, lat2.M_pad))) < 1e-15

    def test_first_order_ratio_bounded(self, lat2):
        v = small_data(lat2, 0.8, seed=1)
        psi = small_data(lat2, 1.0, seed=2)
        ratios = []
        for eps in 10.0 ** -np.arange(1, 6):
            e = perturbation_term(v, psi * eps)
            ratios.append(math.sqrt(mass(e)) / eps)
        assert max(ratios) / min(ratios) < 1.5
        assert ratios[-1] == pytest.approx(ratios[-2], rel=1e-3)

    def test_mismatch(self, lat2):
        with pytest.raises(LatticeMismatchError):
            perturbation_term(TorusField.zeros(lat2), TorusField.zeros(FrequencyLattice(1)))


class TestResidual:
    def _residuals(self, lat, u0, phi):
        out = []
        for dt in (0.02, 0.01, 0.005):
            cfg = SimConfig(lat, dt, 0.2, noise=phi)
            u, psi, _ = snls_solve(u0, cfg, NoiseStream(0))
            out.append(snls2_residual(first_order_decompose(u, psi), psi))
        return out

    def test_deterministic_order_two(self, lat2):
        # small data: the projected rotation is symmetric only up to terms of high degree in u
        u0 = small_data(lat2, 0.1, seed=7)
        r = self._residuals(lat2, u0, build_noise_operator("power_law", lat2, c=0.0))
        orders = [math.log2(a / b) for a, b in zip(r, r[1:])]
        assert all(abs(o - 2.0) < 0.1 for o in orders)

    def test_noisy_residual_decreases(self, lat2):
        u0 = small_data(lat2, 0.6, seed=7)
        r = self._residuals(lat2, u0, build_noise_operator("power_law", lat2, c=0.05))
        assert r[0] > r[1] > r[2]
        assert math.log2(r[0] / r[2]) / 2 > 0.3


class TestMassIdentity:
    def test_zero_noise_constant_mass(self, lat2):
        u0 = small_data(lat2, 0.1)
        res = mass_identity_mc(u0, build_noise_operator("power_law", lat2, c=0.0), 0.1, 100, dt=0.05)
        assert res.max_relative_error() < 1e-8 and res.blowup_fraction == 0.0

    @pytest.mark.parametrize("nonlinear", [False, True])
    def test_affine_law(self, lat2, nonlinear):
        u0 = small_data(lat2, 0.1)
        phi = build_noise_operator("power_law", lat2, c=0.5, alpha=1.0)
        res = mass_identity_mc(u0, phi, 0.1, 400, dt=0.025, nonlinear=nonlinear, seed=3)
        for rep, e in zip(res.mass_reports[1:], res.expected[1:]):
            assert abs(rep.mean - e) < 4 * rep.stderr
        assert math.isfinite(res.sup_mass_energy.mean)
        recs = res.to_records()
        assert len(recs) == len(res.times) + 1 and "blowup_fraction" in recs[-1]["params"]

    def test_small_ensemble_rejected(self, lat2):
        with pytest.raises(ConfigError):
            mass_identity_mc(TorusField.zeros(lat2), build_noise_operator("power_law", lat2), 0.1, 10)


@pytest.fixture(scope="module")
def setup():
    lat = FrequencyLattice(2)
    phi = build_noise_operator("power_law", lat, c=0.01, alpha=1.5)
    psi = sample_psi(phi, np.linspace(0, 1, 41), NoiseStream(6))
    w0 = small_data(lat, 0.02, seed=4)
    return psi, w0


class TestWindows:
    def test_trivial_single_window(self, lat2):
        psi = SpaceTimePath.constant(TorusField.zeros(lat2), np.linspace(0, 1, 11))
        plan = interval_partition(psi, TorusField.zeros(lat2), 1.0, eta=0.1)
        assert plan.J == 1 and plan.breakpoints == [0, 10]

    def test_threshold_monotone(self, setup):
        psi, w0 = setup
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            js = [interval_partition(psi, w0, 1.0, eta=eta).J for eta in (0.05, 0.1, 0.2, 0.4)]
        assert all(b <= a for a, b in zip(js, js[1:]))
        assert js[0] > js[-1]

    def test_post_hoc_diagnostics(self, setup):
        psi, w0 = setup
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            plan = interval_partition(psi, w0, 1.0, eta=0.1)
        times = psi.times
        assert plan.breakpoints[0] == 0 and plan.breakpoints[-1] == len(times) - 1

        def data_at(i):
            return TorusField(w0.lattice, w0.coeffs * np.exp(-1j * times[i] * w0.lattice.n_squared))

        assert any(not w.minimal for w in plan.windows)
        for w in plan.windows:
            z, x = _window_diagnostics(psi, data_at, w.i_start, w.i_end)
            assert (z <= plan.eta and x <= plan.eta) != w.minimal
        assert WindowPlan.from_json(plan.to_json()) == plan

    def test_minimal_window_warning(self, setup):
        psi, w0 = setup
        with pytest.warns(RuntimeWarning):
            plan = interval_partition(psi, w0 * 50, 1.0, eta=0.01)
        assert all(w.minimal for w in plan.windows) and plan.J == len(psi) - 1

    def test_bad_arguments(self, setup):
        psi, w0 = setup
        with pytest.raises(ConfigError):
            interval_partition(psi, w0, 1.0, eta=0.0)
        with pytest.raises(ConfigError):
            interval_partition(psi, w0, 0.5)

    def test_windowed_matches_single_shot(self, lat2):
        phi = build_noise_operator("power_law", lat2, c=0.3)
        cfg = SimConfig(lat2, 0.02, 0.6, noise=phi, seed=8)
        u0 = small_data(lat2, 0.5)
        u, psi, _ = snls_solve(u0, cfg)
        uw, psiw = windowed_snls_solve(u0, cfg, [0, 7, 12, 30])
        assert np.allclose(u.times, uw.times, atol=1e-14, rtol=0)
        assert np.max(np.abs(u.coeffs - uw.coeffs)) < 1e-10
        assert np.max(np.abs(psi.coeffs - psiw.coeffs)) < 1e-10
        det, _ = nls_solve(u0, SimConfig(lat2, 0.02, 0.6))
        dw, _ = windowed_snls_solve(u0, SimConfig(lat2, 0.02, 0.6), [0, 13, 30])
        assert np.max(np.abs(det.coeffs - dw.coeffs)) < 1e-10
