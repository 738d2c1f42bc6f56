import math

import numpy as np
import pytest

from ferroflow.algebra import GeneratorSet
from ferroflow.errors import (
    CharacteristicCrossingError,
    ExistenceError,
    ResolutionError,
)
from ferroflow.flow import flow_integrate, trajectory_norms
from ferroflow.majorant import (
    CharacteristicSolution,
    MajorantSpec,
    existence_check,
    hopflax_solve,
    invert_characteristic_log,
    invert_characteristic_quartic,
    majorant_coefficients,
    majorant_value,
    rescaled_time,
    rhs_coefficient_bound,
    _gamma_factor,
)
from ferroflow.norms import NormSeries
from ferroflow.psi4 import quartic_bare_action
from ferroflow.schedule import ScaleSchedule, simpson_refine

from conftest import synthetic_schedule


def cardano_roots(coeffs):
    """Independent closed-form cubic solver (trigonometric/Cardano)."""
    a, b, c, d = (float(x) for x in coeffs)
    if a == 0.0:
        raise ValueError("not a cubic")
    # depress: x = t - b / (3a)
    shift = b / (3.0 * a)
    p = c / a - shift * b / a + 3.0 * shift * shift
    p = (3.0 * a * c - b * b) / (3.0 * a * a)
    q = (2.0 * b ** 3 - 9.0 * a * b * c + 27.0 * a * a * d) / (27.0 * a ** 3)
    roots = []
    if p == 0.0:
        roots = [np.cbrt(-q)]
    else:
        disc = -4.0 * p ** 3 - 27.0 * q * q
        if p < 0.0 and disc >= 0.0:
            m = 2.0 * math.sqrt(-p / 3.0)
            arg = 3.0 * q / (p * m)
            arg = min(1.0, max(-1.0, arg))
            theta = math.acos(arg)
            roots = [m * math.cos((theta - 2.0 * math.pi * k) / 3.0)
                     for k in range(3)]
        else:
            half = -q / 2.0
            rad = math.sqrt(q * q / 4.0 + p ** 3 / 27.0)
            roots = [np.cbrt(half + rad) + np.cbrt(half - rad)]
    out = [r - shift for r in roots]
    for r in out:
        resid = abs(((a * r + b) * r + c) * r + d)
        scale = max(abs(a), abs(b), abs(c), abs(d))
        assert resid <= 1e-10 * max(scale, 1.0), "oracle root inaccurate"
    return out


class TestRescaledTime:
    def test_zero(self, rng):
        sched = synthetic_schedule(rng, 3)
        assert rescaled_time(sched, 0.0) == 0.0

    def test_constant_rate(self):
        sched = ScaleSchedule.from_cdot(lambda t: np.eye(2), T=3.0, pairs=2)
        assert rescaled_time(sched, 2.0) == pytest.approx(2.0, rel=1e-12)

    def test_additive(self, rng):
        sched = synthetic_schedule(rng, 3)
        total = rescaled_time(sched, 1.0)
        split = rescaled_time(sched, 0.4) + simpson_refine(
            lambda s: sched.adot_norm_at(s), 0.4, 1.0)
        assert abs(total - np.real(split)) < 1e-10


class TestCharacteristicInversion:
    def test_identity_at_zero_time(self):
        assert invert_characteristic_log(1.2, 0.0, 0.37) == 0.37
        assert invert_characteristic_quartic(0.3, 0.4, 0.0, 0.37) == 0.37

    def test_origin_fixed(self):
        assert invert_characteristic_log(1.2, 0.2, 0.0) == pytest.approx(0.0, abs=1e-14)
        assert invert_characteristic_quartic(0.3, 0.4, 0.2, 0.0) == pytest.approx(
            0.0, abs=1e-14)

    def test_forward_residual_random_admissible(self, rng):
        for _ in range(40):
            alpha = float(rng.uniform(0.05, 0.5))
            sigma = float(rng.uniform(0.0, 0.8))
            char = CharacteristicSolution.quartic(alpha, sigma, 0.0)
            tau_max = 0.9 / (12.0 * alpha * max(sigma ** 2, 1e-9))
            tau = float(rng.uniform(0.05, min(tau_max, 2.0)))
            char = CharacteristicSolution.quartic(alpha, sigma, tau)
            z0_true = float(rng.uniform(-0.9, 0.9)) * char.z0_window
            z = char.forward(z0_true)
            z0 = char.invert(z)
            assert abs(char.forward(z0) - z) <= 1e-12 * max(1.0, abs(z))
            assert z0 == pytest.approx(z0_true, abs=1e-9)

    def test_forward_residual_log(self, rng):
        for _ in range(40):
            lam = float(rng.uniform(0.5, 2.0))
            tau = float(rng.uniform(0.05, 0.9)) / lam ** 2
            char = CharacteristicSolution.logarithmic(lam, tau)
            z0_true = float(rng.uniform(-0.9, 0.9)) * char.z0_window
            z = char.forward(z0_true)
            z0 = char.invert(z)
            assert abs(char.forward(z0) - z) <= 1e-12 * max(1.0, abs(z))
            assert z0 == pytest.approx(z0_true, abs=1e-9)

    def test_cardano_oracle_agreement(self, rng):
        for _ in range(25):
            alpha = float(rng.uniform(0.05, 0.4))
            sigma = float(rng.uniform(0.1, 0.6))
            tau = float(rng.uniform(0.05, 0.8)) / (12.0 * alpha * sigma ** 2 + 1.0)
            char = CharacteristicSolution.quartic(alpha, sigma, tau)
            z = 0.7 * char.z_window
            z0 = char.invert(z)
            roots = cardano_roots(char._cubic_coeffs(tau, z))
            assert min(abs(z0 - r) for r in roots) <= 1e-11

    def test_crossing_detected_with_critical_point(self):
        char = CharacteristicSolution.quartic(0.3, 0.4, 0.5)
        with pytest.raises(CharacteristicCrossingError) as info:
            char.invert(char.z_window * 1.1)
        assert info.value.critical_z0 is not None

    def test_slope_condition_matches_window(self):
        char = CharacteristicSolution.quartic(0.25, 0.3, 0.6)
        w = char.z0_window
        assert char.slope(0.99 * w) > 0.0
        assert char.slope(1.01 * w) < 0.0
        charl = CharacteristicSolution.logarithmic(1.1, 0.4)
        wl = charl.z0_window
        assert charl.slope(0.99 * wl) > 0.0
        assert charl.slope(1.01 * wl) < 0.0

    def test_odd_symmetry_of_transported_derivative(self, rng):
        char = CharacteristicSolution.quartic(0.2, 0.3, 0.25)
        for z in (0.05, 0.2, 0.4):
            zp = char.invert(z)
            zm = char.invert(-z)
            assert zp == pytest.approx(-zm, abs=1e-12)
            assert char.u0(zp) == pytest.approx(-char.u0(zm), abs=1e-12)

    def test_nonnegative_alpha_required(self):
        with pytest.raises(ValueError):
            CharacteristicSolution.quartic(-0.1, 0.3, 0.1)


class TestMajorantValue:
    def _quartic_spec(self, rng, alpha=0.02):
        sched = synthetic_schedule(rng, 4)
        return MajorantSpec(schedule=sched, quartic_alpha=alpha)

    def test_bare_value_at_time_zero(self, rng):
        spec = self._quartic_spec(rng)
        for z in (0.0, 0.3, 0.9):
            assert majorant_value(spec, 0.0, z) == pytest.approx(
                spec.quartic_alpha * z ** 4, abs=1e-14)

    def test_even_in_z(self, rng):
        spec = self._quartic_spec(rng)
        for z in (0.1, 0.4, 0.8):
            assert majorant_value(spec, 0.7, z) == pytest.approx(
                majorant_value(spec, 0.7, -z), abs=1e-12)

    def test_value_at_origin_is_shifted_datum(self, rng):
        spec = self._quartic_spec(rng)
        sigma2 = spec.schedule.sigma_squared(0.0, 0.8)
        assert majorant_value(spec, 0.8, 0.0) == pytest.approx(
            spec.quartic_alpha * sigma2 ** 2, rel=1e-10)

    def test_monotone_in_time_empirically(self, rng):
        spec = self._quartic_spec(rng)
        times = np.linspace(0.0, 1.0, 6)
        vals = [majorant_value(spec, float(t), 0.5) for t in times]
        assert np.all(np.diff(vals) >= -1e-14)

    def test_matches_derivative_quadrature(self, rng):
        # the value is the datum constant plus the integral of the
        # transported derivative
        spec = self._quartic_spec(rng)
        char = spec.characteristic(0.9)
        v0 = majorant_value(spec, 0.9, 0.0)
        z = 0.45
        grid = np.linspace(0.0, z, 2001)
        u = np.array([np.real(char.u0(char.invert(float(x)))) for x in grid])
        integral = np.trapezoid(u, grid)
        assert majorant_value(spec, 0.9, z) == pytest.approx(v0 + integral,
                                                             abs=1e-8)

    def test_inadmissible_raises(self, rng):
        sched = synthetic_schedule(rng, 4, scale=2.0)
        spec = MajorantSpec(schedule=sched, quartic_alpha=5.0)
        if not existence_check(spec, sched.T).holds:
            with pytest.raises(ExistenceError):
                majorant_value(spec, sched.T, 0.1)


class TestMajorantCoefficients:
    def test_time_zero_recovers_bare_quartic(self, rng):
        sched = synthetic_schedule(rng, 4)
        spec = MajorantSpec(schedule=sched, quartic_alpha=0.05)
        phi = majorant_coefficients(spec, 0.0, m_max=4)
        assert phi.coeff(2) == pytest.approx(0.05, abs=1e-12)
        assert phi.coeff(1) <= 1e-10
        assert phi.coeff(3) <= 1e-10

    def test_node_doubling_self_convergence(self, rng):
        sched = synthetic_schedule(rng, 4)
        spec = MajorantSpec(schedule=sched, quartic_alpha=0.05)
        a = majorant_coefficients(spec, 0.8, m_max=4, nodes=128)
        b = majorant_coefficients(spec, 0.8, m_max=4, nodes=256)
        assert np.max(np.abs(a.coefficients - b.coefficients)) < 1e-10

    def test_log_datum_series(self, rng):
        sched = synthetic_schedule(rng, 4)
        spec = MajorantSpec(schedule=sched,
                            bare_series=NormSeries([0.0, 0.02, 0.005, 0.001]))
        assert existence_check(spec, 1.0).holds
        phi = majorant_coefficients(spec, 1.0, m_max=4)
        assert np.all(phi.coefficients >= 0.0)
        assert np.all(np.isfinite(phi.coefficients))

    def test_domination_of_flow(self, rng):
        sched = synthetic_schedule(rng, 4)
        alpha = 0.03
        bare = quartic_bare_action(GeneratorSet(8), alpha)
        traj = flow_integrate(sched, bare, steps=80, t_end=1.0)
        series = trajectory_norms(traj)
        spec = MajorantSpec(schedule=sched, quartic_alpha=alpha)
        for i in (20, 50, 80):
            phi = majorant_coefficients(spec, float(traj.grid[i]), m_max=4)
            for m in range(1, 5):
                assert phi.coeff(m) >= series[i].coeff(m) - 1e-8


class TestExistence:
    def test_zero_schedule_always_holds(self):
        sched = ScaleSchedule.from_cdot(lambda t: np.zeros((3, 3)), T=1.0, pairs=3)
        spec = MajorantSpec(schedule=sched, quartic_alpha=0.4)
        rep = existence_check(spec, 1.0)
        assert rep.holds and rep.tau == 0.0 and rep.sigma == 0.0

    def test_quartic_violation(self, rng):
        sched = synthetic_schedule(rng, 3, scale=1.2)
        s2 = sched.sigma_squared(0.0, sched.T)
        tau = sched.tau(sched.T)
        alpha_bad = 1.2 / (12.0 * s2 * tau)
        spec = MajorantSpec(schedule=sched, quartic_alpha=alpha_bad)
        assert not existence_check(spec, sched.T).holds

    def test_shrinking_alpha_opens_window(self, rng):
        sched = synthetic_schedule(rng, 3, scale=1.2)
        alpha = 1.0
        found = False
        for _ in range(40):
            spec = MajorantSpec(schedule=sched, quartic_alpha=alpha)
            if existence_check(spec, sched.T).holds:
                found = True
                break
            alpha *= 0.5
        assert found

    def test_report_text_fields(self, rng):
        sched = synthetic_schedule(rng, 3)
        spec = MajorantSpec(schedule=sched, quartic_alpha=0.02)
        text = existence_check(spec, 1.0).as_text()
        for token in ("R", "tau", "sigma", "holds"):
            assert token in text


class TestCoefficientBound:
    def test_time_zero_is_bare_coefficient(self, rng):
        sched = synthetic_schedule(rng, 4)
        bare = quartic_bare_action(GeneratorSet(8), 0.05)
        traj = flow_integrate(sched, bare, steps=10, t_end=0.5)
        assert rhs_coefficient_bound(traj, sched, 2, 0.0) == pytest.approx(0.05)
        assert rhs_coefficient_bound(traj, sched, 1, 0.0) == 0.0

    def test_gamma_at_zero_spread(self):
        # only the top binomials survive: 4 l m when l + m = k + 1
        assert _gamma_factor(1, 2, 2, 0.0) == pytest.approx(8.0)
        assert _gamma_factor(2, 2, 3, 0.0) == pytest.approx(16.0)
        assert _gamma_factor(2, 2, 2, 0.0) == 0.0
        assert _gamma_factor(1, 1, 3, 0.0) == 0.0

    def test_gamma_polynomial_case(self):
        # l = m = 2, k = 2: odd splittings of 4 are (1,3) and (3,1)
        xi = 0.7
        expect = 16.0 * 2.0 * (math.comb(3, 1) * xi ** 2 * math.comb(3, 3))
        assert _gamma_factor(2, 2, 2, xi) == pytest.approx(expect)

    def test_domination_along_flow(self, rng):
        sched = synthetic_schedule(rng, 4)
        bare = quartic_bare_action(GeneratorSet(8), 0.04)
        traj = flow_integrate(sched, bare, steps=150, t_end=1.0)
        series = trajectory_norms(traj)
        for i in (50, 100, 150):
            for k in range(1, 5):
                bound = rhs_coefficient_bound(traj, sched, k, float(traj.grid[i]))
                assert bound >= series[i].coeff(k) - 1e-8

    def test_resolution_error_on_tight_tolerance(self, rng):
        sched = synthetic_schedule(rng, 4)
        bare = quartic_bare_action(GeneratorSet(8), 0.04)
        traj = flow_integrate(sched, bare, steps=12, t_end=1.0)
        with pytest.raises(ResolutionError):
            rhs_coefficient_bound(traj, sched, 1, 1.0, check_tol=1e-15)

    def test_off_grid_time_rejected(self, rng):
        sched = synthetic_schedule(rng, 4)
        bare = quartic_bare_action(GeneratorSet(8), 0.04)
        traj = flow_integrate(sched, bare, steps=10, t_end=1.0)
        with pytest.raises(ValueError):
            rhs_coefficient_bound(traj, sched, 1, 0.123456)


class TestHopfLax:
    def test_zero_datum(self):
        ys = np.linspace(-2, 2, 501)
        assert hopflax_solve(ys, np.zeros_like(ys), 0.5, 0.3) == pytest.approx(
            0.0, abs=1e-12)

    def test_quadratic_closed_form(self):
        ys = np.linspace(-4, 4, 1001)
        c, t = 0.35, 1.2
        for z in (-0.8, 0.0, 0.6):
            val = hopflax_solve(ys, c * ys ** 2, t, z)
            assert val == pytest.approx(c * z * z / (1.0 - c * t), abs=1e-8)

    def test_monotone_comparison(self, rng):
        ys = np.linspace(-3, 3, 1001)
        for _ in range(10):
            w = rng.normal(size=3) * 0.3
            g1 = w[0] * np.sin(0.7 * ys) + w[1] * np.cos(0.4 * ys) \
                + 0.05 * w[2] * ys ** 2
            g2 = g1 + 0.05 + 0.1 * np.cos(0.5 * ys) ** 2
            for z in np.linspace(-1, 1, 9):
                assert hopflax_solve(ys, g2, 0.8, float(z)) >= \
                    hopflax_solve(ys, g1, 0.8, float(z)) - 1e-10

    def test_boundary_warning(self):
        ys = np.linspace(-0.5, 0.5, 51)
        gs = 2.0 * ys  # maximizer pushed to the boundary
        with pytest.warns(UserWarning, match="boundary"):
            hopflax_solve(ys, gs, 1.0, 3.0)

    def test_time_must_be_positive(self):
        ys = np.linspace(-1, 1, 11)
        with pytest.raises(ValueError):
            hopflax_solve(ys, np.zeros_like(ys), 0.0, 0.0)
