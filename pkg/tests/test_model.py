import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_spec
from nessflow.model import (
    JunctionSpec,
    PairFormFactor,
    RadialFormFactor,
    ReservoirState,
    fermi,
    fermi_diff,
    sphere_area,
)

betas = st.floats(min_value=1e-3, max_value=1e3)
mus = st.floats(min_value=-50, max_value=50)


def test_fermi_reference_points():
    assert fermi(2.0, ReservoirState(3.7, 2.0)) == 0.5
    r = ReservoirState(math.inf, 0.3)
    assert fermi(-0.7, r) == 1.0
    assert fermi(1.3, r) == 0.0
    assert fermi(0.3, r) == 0.5
    assert fermi(math.log(3.0), ReservoirState(1.0, 0.0)) == pytest.approx(0.25, abs=1e-15)


def test_fermi_no_overflow():
    r = ReservoirState(1e4, 0.0)
    vals = fermi(np.array([-1e3, 1e3]), r)
    assert np.all(np.isfinite(vals))
    assert vals[0] == 1.0 and vals[1] == 0.0


@given(betas, mus)
def test_fermi_decreasing(beta, mu):
    E = np.linspace(mu - 5 / beta, mu + 5 / beta, 101)
    assert np.all(np.diff(fermi(E, ReservoirState(beta, mu))) < 0)


def test_reservoir_validation():
    with pytest.raises(ValueError):
        ReservoirState(0.0, 1.0)
    with pytest.raises(ValueError):
        ReservoirState(-1.0, 1.0)
    with pytest.raises(ValueError):
        ReservoirState(1.0, math.nan)
    assert ReservoirState(math.inf).temperature == 0.0


def test_fermi_diff_examples():
    E = np.linspace(-3, 10, 50)
    assert np.all(fermi_diff(E, make_spec(2.0, 0.4, 2.0, 0.4)) == 0)
    # colder I at equal mu: II holds more particles above mu and fewer below
    diff = fermi_diff(E, make_spec(3.0, 0.5, 1.0, 0.5))
    np.testing.assert_array_equal(np.sign(diff), np.sign(E - 0.5))
    # with mu <= 0 the whole band E >= 0 lies above mu
    band = np.linspace(0, 10, 50)
    assert np.all(fermi_diff(band, make_spec(3.0, -0.2, 1.0, -0.2)) > 0)
    val = fermi_diff(0.0, make_spec(1.0, 0.0, 1.0, 0.1))
    assert val == pytest.approx(1 / (math.exp(-0.1) + 1) - 0.5, abs=1e-15)
    assert val == pytest.approx(0.024979, abs=1e-6)


@given(betas, mus, betas, mus)
def test_fermi_diff_matches_difference(bI, muI, bII, muII):
    spec = make_spec(bI, muI, bII, muII)
    lo = max(muI - 600 / bI, muII - 600 / bII)
    hi = min(muI + 600 / bI, muII + 600 / bII)
    if lo >= hi:
        return
    E = np.linspace(lo, hi, 64)
    naive = fermi(E, spec.res_II) - fermi(E, spec.res_I)
    np.testing.assert_allclose(fermi_diff(E, spec), naive, atol=1e-14, rtol=0)


def test_fermi_diff_zero_temperature():
    spec = make_spec(math.inf, 0.0, math.inf, 1.0)
    np.testing.assert_array_equal(fermi_diff(np.array([-1.0, 0.5, 2.0]), spec), [0.0, 1.0, 0.0])


def test_sphere_area():
    assert sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert sphere_area(2) == pytest.approx(2 * math.pi, rel=1e-15)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2, rel=1e-15)


KERNELS = [
    RadialFormFactor.gaussian(1.3, 0.8),
    RadialFormFactor.lorentzian(0.5, 2.0, 3.0),
    RadialFormFactor.poly_cutoff(1.0, 1.5, 2.0),
    RadialFormFactor.from_table([0, 0.5, 1.0, 1.5, 2.0, 3.0], [1.0, 0.9, 0.6, 0.3, 0.1, 0.0]),
]


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.family)
def test_kernel_symmetric_nonnegative(kernel):
    rng = np.random.default_rng(7)
    k, l = rng.uniform(0, 3, (2, 500))
    u = kernel(k, l)
    assert np.all(u >= 0)
    np.testing.assert_array_equal(u, kernel(l, k))


@pytest.mark.parametrize("kernel", KERNELS[:3], ids=lambda k: k.family)
def test_kernel_analytic_derivatives(kernel):
    E = np.linspace(0.1, 1.2, 9)
    h = 1e-5
    d1 = (kernel.diagonal(E + h) - kernel.diagonal(E - h)) / (2 * h)
    d2 = (kernel.diagonal(E + h) - 2 * kernel.diagonal(E) + kernel.diagonal(E - h)) / h**2
    np.testing.assert_allclose(kernel.diagonal(E, 1), d1, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(kernel.diagonal(E, 2), d2, rtol=1e-3, atol=1e-4)


def test_table_kernel_from_csv(tmp_path):
    path = tmp_path / "kernel.csv"
    k = np.linspace(0, 3, 31)
    rows = "\n".join(f"{a},{math.exp(-2 * a * a)}" for a in k)
    path.write_text("k,value\n" + rows + "\n")
    table = RadialFormFactor.from_csv(path)
    gauss = RadialFormFactor.gaussian()
    kk = np.array([0.3, 0.7, 1.1])
    np.testing.assert_allclose(table(kk, kk), gauss(kk, kk), rtol=2e-3)


def test_table_kernel_rejects_bad_samples():
    with pytest.raises(ValueError):
        RadialFormFactor.from_table([0, 1, 1, 2], [1, 1, 1, 1])
    with pytest.raises(ValueError):
        RadialFormFactor.from_table([0, 1, 2, 3], [1, -1, 1, 1])


def test_kernel_unknown_family_and_params():
    with pytest.raises(ValueError):
        RadialFormFactor("cosine")
    with pytest.raises(ValueError):
        RadialFormFactor("gaussian", {"widht": 1.0})


def test_pair_kernel_relabelling():
    b = PairFormFactor("lorentzian", {"width": 1.5})
    x = np.array([0.2, 0.9, 1.4, 0.5])
    assert b(*x) == pytest.approx(b(x[1], x[0], x[3], x[2]), rel=1e-15)
    assert b(*x) == pytest.approx(b(x[2], x[3], x[0], x[1]), rel=1e-15)


def test_junction_spec_rules():
    r = ReservoirState(1.0, 1.0)
    with pytest.raises(ValueError):
        JunctionSpec(3, r, r)
    with pytest.warns(RuntimeWarning):
        JunctionSpec(1, r, r, RadialFormFactor.gaussian())
    spec = make_spec(2.0, 0.1, 1.0, 0.3)
    assert spec.swapped().res_I == spec.res_II


def test_integrability_flag():
    with pytest.warns(RuntimeWarning):
        assert not RadialFormFactor.lorentzian(power=1.0).check_integrable(3)
    assert RadialFormFactor.gaussian().check_integrable(3)
