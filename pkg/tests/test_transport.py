import math
import warnings

import numpy as np
import pytest
from scipy.integrate import trapezoid

from conftest import make_spec
from nessflow import transport as tr
from nessflow.errors import DegenerateKernel, MissingKernel, StepTooLarge
from nessflow.model import PairFormFactor, RadialFormFactor, fermi


def brute_force_currents(spec, n=10**6):
    """Trapezoid rule on the d = 3 shell form, 10^6 energy points."""
    E = np.linspace(0.0, 60.0, n)
    u = spec.kernel1.diagonal(E)
    diff = fermi(E, spec.res_II) - fermi(E, spec.res_I)
    w = 2 * math.pi * 4 * math.pi**2 * E * u * diff * spec.g**2 * spec.xi**2
    return trapezoid(w, E), trapezoid(E * w, E)


def test_first_order_terms_vanish():
    assert tr.J11 == tr.J12 == tr.P11 == tr.P12 == tr.E11 == tr.E12 == 0.0


def test_identical_reservoirs_no_flow():
    r = tr.currents(make_spec(1.7, 0.9, 1.7, 0.9))
    assert r.J22 == 0.0 and r.P22 == 0.0 and r.E22 == 0.0


@pytest.mark.parametrize("mu", [0.0, -0.5])
def test_hotter_reservoir_feeds_colder(mu):
    # with mu <= 0 every band energy lies above mu, so rho_II > rho_I everywhere
    spec = make_spec(2.0, mu, 1.0, mu)
    assert tr.particle_current_J22(spec) > 0
    assert tr.energy_current_P22(spec) > 0


def test_heat_flows_hot_to_cold_even_when_particles_do_not():
    # above the peak of f the particle current at equal mu reverses
    spec = make_spec(2.0, 1.0, 1.0, 1.0)
    J, P = tr.particle_current_J22(spec), tr.energy_current_P22(spec)
    assert J < 0
    assert P - 1.0 * J > 0


def test_higher_mu_feeds_lower():
    spec = make_spec(1.0, 0.2, 1.0, 0.0)
    assert tr.particle_current_J22(spec) < 0
    assert tr.energy_current_P22(spec) < 0


def test_reference_currents_against_trapezoid():
    spec = make_spec(1.0, 0.0, 1.0, 0.5)
    J, P = brute_force_currents(spec)
    assert tr.particle_current_J22(spec) == pytest.approx(J, rel=1e-8)
    assert tr.energy_current_P22(spec) == pytest.approx(P, rel=1e-8)
    # higher mu in II: particles enter I
    assert J > 0


def test_entropy_reference_and_identity():
    spec = make_spec(2.0, 0.0, 1.0, 0.0)
    J, P = brute_force_currents(spec)
    ref = (2.0 - 1.0) * P - 0.0 * J
    r = tr.currents(spec)
    assert r.E22 == pytest.approx(ref, rel=1e-8)
    assert r.E22 > 0
    dbeta, dnu = tr.entropy_affinities(spec)
    assert r.E22 == pytest.approx(dbeta * r.P22 - dnu * r.J22, rel=1e-12)


def test_cold_to_hot_energy_flow_exists():
    # colder I with much higher mu pushes particles, and energy, into hotter II
    spec = make_spec(2.0, 2.0, 1.0, 0.0)
    assert tr.energy_current_P22(spec) < 0
    assert tr.entropy_rate_E22(spec) > 0


def test_swap_antisymmetry():
    rng = np.random.default_rng(3)
    for _ in range(8):
        bI, bII = rng.uniform(0.3, 5, 2)
        muI, muII = rng.uniform(-1, 2, 2)
        spec = make_spec(bI, muI, bII, muII)
        a, b = tr.currents(spec), tr.currents(spec.swapped())
        assert b.J22 == pytest.approx(-a.J22, rel=1e-12, abs=1e-300)
        assert b.P22 == pytest.approx(-a.P22, rel=1e-12, abs=1e-300)


def test_coupling_scaling():
    base = tr.currents(make_spec(2.0, 0.3, 1.0, 0.8, g=0.7, xi=1.1))
    big = tr.currents(make_spec(2.0, 0.3, 1.0, 0.8, g=1.4, xi=3.3))
    assert big.J22 == pytest.approx(36 * base.J22, rel=1e-13)
    assert big.P22 == pytest.approx(36 * base.P22, rel=1e-13)


def test_missing_kernel():
    with pytest.raises(MissingKernel):
        tr.particle_current_J22(make_spec(pair=True))


def test_f_of_r_gaussian_closed_form(gaussian):
    assert tr.f_of_r(0.0, gaussian) == 0.0
    r = np.array([0.3, 1.0, 2.5])
    np.testing.assert_allclose(tr.f_of_r(r, gaussian), 8 * math.pi**3 * r * np.exp(-2 * r), rtol=1e-14)
    np.testing.assert_allclose(
        tr.f_of_r(r, gaussian, deriv=2), 8 * math.pi**3 * np.exp(-2 * r) * (4 * r - 4), rtol=1e-13, atol=1e-13
    )
    assert tr.f_of_r(1.0, gaussian, deriv=2) == pytest.approx(0.0, abs=1e-13)


def test_resistance_zero_temperature(gaussian):
    R = tr.resistance(1.3, math.inf, gaussian)
    assert R == pytest.approx(1.0 / tr.f_of_r(1.3, gaussian), rel=1e-14)


def test_resistance_large_temperature_linear(gaussian):
    ratio = tr.resistance(1.0, 1 / 200.0, gaussian) / tr.resistance(1.0, 1 / 100.0, gaussian)
    assert ratio == pytest.approx(2.0, rel=0.05)


def test_resistance_degenerate_kernel():
    k = RadialFormFactor.poly_cutoff(cutoff=1.0)
    with pytest.warns(RuntimeWarning):
        assert tr.resistance(2.0, math.inf, k) == math.inf
    with pytest.raises(DegenerateKernel):
        tr.resistance(2.0, math.inf, k, strict=True)


def test_sommerfeld_limits(gaussian):
    assert tr.resistance_sommerfeld(1.0, math.inf, gaussian) == pytest.approx(1 / tr.f_of_r(1.0, gaussian))
    for beta in (20.0, 50.0, 200.0):
        assert tr.resistance_sommerfeld(1.0, beta, gaussian) == pytest.approx(1 / tr.f_of_r(1.0, gaussian), rel=1e-12)


def test_sommerfeld_direction_follows_curvature(gaussian):
    # f'' < 0 at mu = 0.5, f'' > 0 at mu = 1.5 for the Gaussian kernel
    assert tr.f_of_r(0.5, gaussian, 2) < 0 < tr.f_of_r(1.5, gaussian, 2)
    for mu, grows in ((0.5, True), (1.5, False)):
        R = [tr.resistance(mu, 1 / T, gaussian) for T in (0.02, 0.04, 0.06)]
        assert (R[0] < R[1] < R[2]) == grows
        assert (R[0] > R[1] > R[2]) == (not grows)


def test_sommerfeld_warns_and_fails_outside_range(gaussian):
    with pytest.warns(RuntimeWarning):
        tr.resistance_sommerfeld(1.0, 2.0, gaussian)
    with pytest.raises(DegenerateKernel), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tr.resistance_sommerfeld(0.5, 0.5, gaussian)


def test_ohm_check_examples():
    spec = make_spec(1.0, 1.0, 1.0, 1.0)
    rows = tr.ohm_check(spec, [0.0, 0.04, 0.02, 0.01])
    assert rows[0].J22 == 0.0 and rows[0].linear == 0.0
    assert rows[2].residual / rows[1].residual == pytest.approx(0.25, rel=0.2)
    assert rows[3].residual / rows[2].residual == pytest.approx(0.25, rel=0.2)
    assert abs(rows[3].residual / rows[3].J22) < 1e-2


def test_richardson_removes_linear_term():
    hs = [0.1, 0.05, 0.025]
    vals = [3.0 + 2 * h - 5 * h**2 for h in hs]
    assert tr.richardson(vals, hs, order=1) == pytest.approx(3.0, rel=1e-13)


def test_onsager_examples(gaussian):
    res = tr.onsager_check(1.0, 1.0, gaussian, h=1e-3)
    assert res.relative_gap < 1e-6
    ref = tr.onsager_reference(1.0, 1.0, gaussian)
    assert res.dP_dDnu == pytest.approx(ref, rel=1e-5)
    assert res.minus_dJ_dDbeta == pytest.approx(ref, rel=1e-5)


def test_onsager_gap_order(gaussian):
    hs = [1e-2, 5e-3, 2.5e-3]
    gaps = [tr.onsager_check(1.0, 1.0, gaussian, h).gap for h in hs]
    assert tr.convergence_order(hs, gaps) >= 1.8


def test_onsager_step_too_large(gaussian):
    with pytest.raises(StepTooLarge):
        tr.onsager_check(20.0, 20.0, gaussian, h=19.9)


def test_thermal_power_zero_kernel():
    spec = make_spec(1.0, 1.0, 20.0, 1.0, pair=True)
    spec = type(spec)(3, spec.res_I, spec.res_II, None, PairFormFactor("gaussian", {"amp": 0.0}))
    assert tr.thermal_power_P24(spec) == 0.0


def test_thermal_power_needs_d3():
    spec = make_spec(pair=True, d=4)
    with pytest.raises(ValueError):
        tr.thermal_power_P24(spec)


def test_thermal_integrand_swap_probe():
    """The integrand with identical reservoirs is odd under (E1, E2, F1) -> (E2, E1, S - F1)."""
    spec = make_spec(1.3, 0.7, 1.3, 0.7, pair=True)
    f, _, _ = tr._p24_parts(spec)
    rng = np.random.default_rng(5)
    E1, E2 = rng.uniform(0, 4, (2, 200))
    F1 = rng.uniform(0, 1, 200) * (E1 + E2)
    a = f(E1, E2, F1)
    b = f(E2, E1, E1 + E2 - F1)
    np.testing.assert_allclose(a, -b, rtol=1e-12, atol=1e-300)
