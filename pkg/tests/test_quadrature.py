import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import make_spec
from nessflow.errors import NonConvergent
from nessflow.model import RadialFormFactor
from nessflow.quadrature import (
    DEFAULT_CONFIG,
    QuadratureConfig,
    energy_cutoff,
    integrate_1d,
    integrate_3d_simplex,
    shell_integral,
    shell_weight,
)


def test_integrate_1d_closed_forms():
    assert integrate_1d(lambda x: np.ones_like(x), 0.0, 1.0)[0] == pytest.approx(1.0, abs=1e-15)
    val, err = integrate_1d(np.sin, 0.0, math.pi)
    assert abs(val - 2.0) < 1e-12
    assert err <= DEFAULT_CONFIG.rel_tol * abs(val) + DEFAULT_CONFIG.abs_tol
    val, _ = integrate_1d(lambda x: np.exp(-x), 0.0, 40.0)
    assert abs(val - (1 - math.exp(-40))) < 1e-12


def test_integrate_1d_kink_with_breakpoint():
    val, _ = integrate_1d(lambda x: np.abs(x - 0.3), 0.0, 1.0, points=[0.3])
    assert val == pytest.approx(0.5 * (0.3**2 + 0.7**2), rel=1e-14)


def test_integrate_1d_nonconvergent_reports_estimate():
    cfg = QuadratureConfig(rel_tol=1e-14, abs_tol=0.0, max_subdivisions=3)
    with pytest.raises(NonConvergent) as info:
        integrate_1d(lambda x: np.sin(1.0 / (x + 1e-3)), 0.0, 1.0, cfg)
    assert info.value.error_estimate is not None


def test_integrate_1d_deterministic():
    f = lambda x: np.exp(-x) * np.cos(7 * x)  # noqa: E731
    assert integrate_1d(f, 0.0, 30.0) == integrate_1d(f, 0.0, 30.0)


def test_energy_cutoff_policy():
    spec = make_spec(2.0, 1.0, 0.5, -1.0)
    assert energy_cutoff(spec) == pytest.approx(1.0 + 40.0 / 0.5)
    spec = make_spec(math.inf, 0.5, math.inf, 0.7)
    assert energy_cutoff(spec) == pytest.approx(0.7)


def test_shell_integral_zero_and_cutoff_square():
    spec = make_spec(kernel=RadialFormFactor.poly_cutoff())
    assert shell_integral(lambda E: np.zeros_like(E), spec) == 0.0
    # (S_2^2 / 4) * int_0^1 E dE with S_2 = 4 pi
    assert shell_integral(lambda E: np.ones_like(E), spec) == pytest.approx(2 * math.pi**2, rel=1e-13)


def test_shell_weight_general_d():
    assert shell_weight(3) == pytest.approx(4 * math.pi**2)
    assert shell_weight(4) == pytest.approx(math.pi**4)


@pytest.mark.parametrize("beta,mu", [(1.0, 1.0), (5.0, 0.5), (0.3, 2.0), (20.0, 1.5)])
def test_resistance_constant_cross_check(beta, mu):
    """2 pi * shell of the thermal weight against the d = 3 closed form, by scipy."""
    spec = make_spec(beta, mu, beta, mu)
    gauss = RadialFormFactor.gaussian()

    def weight(E):
        x = -abs(beta * (E - mu))
        return beta * math.exp(x) / (1 + math.exp(x)) ** 2

    ours = 2 * math.pi * shell_integral(lambda E: weight_vec(E, beta, mu), spec)
    ref, _ = quad(lambda r: r * float(gauss.diagonal(r)) * weight(r), 0, mu + 60 / beta, points=[mu], limit=500, epsabs=0, epsrel=1e-13)
    ref *= 8 * math.pi**3
    assert ours == pytest.approx(ref, rel=1e-9)


def weight_vec(E, beta, mu):
    x = -np.abs(beta * (E - mu))
    return beta * np.exp(x) / (1 + np.exp(x)) ** 2


def test_shell_linearity():
    rng = np.random.default_rng(11)
    spec = make_spec(1.5, 0.8, 0.7, 1.2)
    for _ in range(5):
        a, c1, c2 = rng.uniform(-2, 2, 3)
        F = lambda E: np.cos(c1 * E) * np.exp(-0.1 * E)  # noqa: E731
        G = lambda E: E * np.exp(-c2**2 * E)  # noqa: E731
        lhs = shell_integral(lambda E: a * F(E) + G(E), spec)
        rhs = a * shell_integral(F, spec) + shell_integral(G, spec)
        scale = abs(a * shell_integral(lambda E: np.abs(F(E)), spec)) + shell_integral(G, spec)
        assert abs(lhs - rhs) <= 1e-10 * scale


def test_cutoff_sufficiency():
    spec = make_spec(2.0, 1.0, 0.5, 0.3)
    F = lambda E: weight_vec(E, 0.5, 0.3) * E  # noqa: E731
    base = shell_integral(F, spec)
    doubled = shell_integral(F, spec, QuadratureConfig(tail_constant=80.0))
    assert abs(doubled - base) <= DEFAULT_CONFIG.rel_tol * abs(base)


def test_error_estimate_monotone_in_tolerance():
    spec = make_spec(3.0, 1.0, 1.0, 0.2)
    F = lambda E: E * np.sin(3 * E) * weight_vec(E, 1.0, 0.2)  # noqa: E731
    errs = []
    for tol in (1e-6, 5e-7, 2.5e-7, 1.25e-7, 1e-8, 5e-9):
        _, err = shell_integral(F, spec, QuadratureConfig(rel_tol=tol), with_error=True)
        errs.append(err)
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_simplex_zero_and_volume_monte_carlo():
    assert integrate_3d_simplex(lambda a, b, c: np.zeros_like(c), 1.0) == 0.0
    # the clip F1 <= E_max puts a kink along E1 + E2 = E_max, across the panels
    loose = QuadratureConfig(rel_tol=1e-5)
    vol = integrate_3d_simplex(lambda a, b, c: np.ones_like(c), 1.0, loose)
    assert vol == pytest.approx(5.0 / 6.0, rel=1e-5)
    # independent Monte Carlo estimate, 10^7 samples in chunks
    rng = np.random.default_rng(2024)
    hits = 0
    n = 10**7
    for _ in range(10):
        E1, E2, F1 = rng.uniform(0, 1, (3, n // 10))
        hits += np.count_nonzero(F1 <= np.minimum(E1 + E2, 1.0))
    assert float(f"{hits / n:.3g}") == float(f"{vol:.3g}")


def test_simplex_swap_symmetry_gives_zero():
    # (E1 - F1) weighted by a kernel symmetric under (E1, E2, F1) -> (E2, E1, S - F1)
    def f(E1, E2, F1):
        F2 = E1 + E2 - F1
        return (E1 - F1) * np.exp(-(E1 + E2 + F1 + F2)) * np.sqrt(np.abs(E1 * E2 * F1 * F2))

    val, err = integrate_3d_simplex(f, 30.0, with_error=True)
    scale = integrate_3d_simplex(lambda *a: np.abs(f(*a)), 30.0, QuadratureConfig(rel_tol=1e-6))
    assert abs(val) < 1e-13 * scale


def test_simplex_polynomial_exact():
    # int over the clipped region of E1 E2 with E_max = 2, by a symbolic split
    val = integrate_3d_simplex(lambda a, b, c: a * b, 2.0, QuadratureConfig(rel_tol=1e-5))
    # region: F1 <= min(E1 + E2, 2); for E1 + E2 <= 2 the height is E1 + E2
    inner = lambda e1: quad(lambda e2: e1 * e2 * min(e1 + e2, 2.0), 0, 2, points=[max(2 - e1, 0)])[0]  # noqa: E731
    ref = quad(inner, 0, 2, epsabs=0, epsrel=1e-13)[0]
    assert val == pytest.approx(ref, rel=1e-5)
