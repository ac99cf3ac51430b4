"""Perturbative steady-state currents of tunnelling and thermal junctions.

Sign convention: every current is the gain of reservoir I (``J = J^I = -J^II``,
likewise for the energy current ``P``).  Hence a hotter reservoir II at equal
chemical potentials gives ``J22 > 0`` and ``P22 > 0``.

Orders are labelled by powers of the couplings in ``W = g sum_N xi^N W_N``.
The first-order terms vanish identically for every kernel, because the
product initial state is invariant under the phase rotation generated by
``N^I``; they are exported as the constants below rather than computed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateKernel, MissingKernel, NonConvergent, StepTooLarge
from .model import JunctionSpec, RadialFormFactor, ReservoirState, fermi, fermi_diff
from .quadrature import (
    DEFAULT_CONFIG,
    QuadratureConfig,
    energy_cutoff,
    integrate_3d_simplex,
    shell_integral,
    shell_weight,
)

J11 = J12 = 0.0
P11 = P12 = 0.0
E11 = E12 = 0.0


@dataclass(frozen=True)
class TransportResult:
    J22: float
    P22: float
    E22: float
    order_tags: dict = field(default_factory=lambda: {"J22": (2, 2), "P22": (2, 2), "E22": (2, 2)})


def _require_kernel1(spec):
    if spec.kernel1 is None:
        raise MissingKernel("tunnelling currents need kernel1")


def _thermal_weight(E, r: ReservoirState):
    """``beta e^x / (e^x + 1)^2`` with ``x = beta (E - mu)``; equals ``-d rho/dE``."""
    x = -np.abs(r.beta * (np.asarray(E) - r.mu))
    ex = np.exp(x)
    return r.beta * ex / (1.0 + ex) ** 2


def particle_current_J22(spec: JunctionSpec, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Order ``g^2 xi^2`` particle current into reservoir I.

    ``2 pi int dk dl delta(|k|^2 - |l|^2) u(|k|, |l|) (rho_II - rho_I)(|k|^2)``.
    """
    _require_kernel1(spec)
    coupling = spec.g**2 * spec.xi**2
    return coupling * 2.0 * math.pi * shell_integral(lambda E: fermi_diff(E, spec), spec, cfg)


def energy_current_P22(spec: JunctionSpec, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Order ``g^2 xi^2`` energy current into reservoir I (extra factor ``E`` in the shell integral)."""
    _require_kernel1(spec)
    coupling = spec.g**2 * spec.xi**2
    return coupling * 2.0 * math.pi * shell_integral(lambda E: E * fermi_diff(E, spec), spec, cfg)


def entropy_affinities(spec: JunctionSpec):
    """``(beta_I - beta_II, beta_I mu_I - beta_II mu_II)``, the coefficients of P and J."""
    rI, rII = spec.res_I, spec.res_II
    return rI.beta - rII.beta, rI.beta * rI.mu - rII.beta * rII.mu


def _entropy_from_currents(spec, J, P):
    dbeta, dnu = entropy_affinities(spec)
    terms = []
    if dbeta != 0:
        terms.append(dbeta * P)
    if dnu != 0:
        terms.append(-dnu * J)
    return math.fsum(terms)


def entropy_rate_E22(spec: JunctionSpec, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """``(beta_I - beta_II) P22 - (beta_I mu_I - beta_II mu_II) J22``."""
    return _entropy_from_currents(spec, particle_current_J22(spec, cfg), energy_current_P22(spec, cfg))


def currents(spec: JunctionSpec, cfg: QuadratureConfig = DEFAULT_CONFIG) -> TransportResult:
    J = particle_current_J22(spec, cfg)
    P = energy_current_P22(spec, cfg)
    return TransportResult(J, P, _entropy_from_currents(spec, J, P))


def f_of_r(r, kernel: RadialFormFactor, deriv: int = 0, d: int = 3):
    """``f(r) = 8 pi^3 r u(sqrt r, sqrt r)`` (d = 3) and its first two derivatives.

    For general ``d`` the same role is played by
    ``2 pi S_{d-1}^2 / 4 * r^(d-2) u(sqrt r, sqrt r)``, which reduces to the
    expression above at ``d = 3``.
    """
    r = np.asarray(r, dtype=float)
    c = 2.0 * math.pi * shell_weight(d)
    p = d - 2
    U = [kernel.diagonal(r, k) for k in range(deriv + 1)]
    with np.errstate(divide="ignore", invalid="ignore"):
        powr = [
            math.perm(p, j) * r ** (p - j) if p - j >= 0 else np.zeros_like(r)
            for j in range(deriv + 1)
        ]
    # Leibniz rule for r^p U(r)
    out = sum(math.comb(deriv, j) * powr[j] * U[deriv - j] for j in range(deriv + 1))
    out = c * np.asarray(out)
    return out if out.ndim else float(out)


def _resistance_spec(mu, beta, kernel, d, g=1.0, xi=1.0):
    res = ReservoirState(beta, mu)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return JunctionSpec(d, res, res, kernel, None, g, xi)


def inverse_resistance(
    mu: float,
    beta: float,
    kernel: RadialFormFactor,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    d: int = 3,
    g: float = 1.0,
    xi: float = 1.0,
) -> float:
    """``1/R = 2 pi beta int dk dl delta(...) u e^x / (e^x + 1)^2`` with ``x = beta(|k|^2 - mu)``."""
    coupling = g**2 * xi**2
    if math.isinf(beta):
        return coupling * f_of_r(mu, kernel, d=d) if mu > 0 else 0.0
    spec = _resistance_spec(mu, beta, kernel, d, g, xi)
    res = spec.res_I
    return coupling * 2.0 * math.pi * shell_integral(lambda E: _thermal_weight(E, res), spec, cfg)


def resistance(
    mu: float,
    beta: float,
    kernel: RadialFormFactor,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    d: int = 3,
    g: float = 1.0,
    xi: float = 1.0,
    strict: bool = False,
) -> float:
    """Junction resistance ``R(mu, beta)``, so that ``J22 ~ delta_mu / R`` for small bias.

    At ``beta = inf`` this is ``1 / f(mu)``.  A vanishing conductance gives
    ``inf`` with a ``RuntimeWarning``, or :class:`DegenerateKernel` when
    ``strict`` is set.
    """
    inv = inverse_resistance(mu, beta, kernel, cfg, d, g, xi)
    if inv <= 0:
        msg = f"zero conductance at mu={mu}, beta={beta}: infinite resistance"
        if strict:
            raise DegenerateKernel(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        return math.inf
    return 1.0 / inv


def resistance_sommerfeld(mu: float, beta: float, kernel: RadialFormFactor, d: int = 3) -> float:
    """Low-temperature approximation ``1 / (f(mu) + pi^2 T^2 f''(mu) / 6)``."""
    T = 0.0 if math.isinf(beta) else 1.0 / beta
    if T > 0 and beta * mu < 5:
        warnings.warn(
            f"Sommerfeld expansion used outside its range: beta*mu = {beta * mu:.3g} < 5",
            RuntimeWarning,
            stacklevel=2,
        )
    denom = f_of_r(mu, kernel, 0, d)
    if T > 0:
        denom += math.pi**2 * T**2 * f_of_r(mu, kernel, 2, d) / 6.0
    if denom <= 0:
        raise DegenerateKernel(f"Sommerfeld denominator {denom:.3e} <= 0 at mu={mu}, T={T}")
    return 1.0 / denom


@dataclass(frozen=True)
class OhmRow:
    dmu: float
    J22: float
    linear: float

    @property
    def residual(self) -> float:
        return self.J22 - self.linear


def ohm_check(spec: JunctionSpec, dmu_list, cfg: QuadratureConfig = DEFAULT_CONFIG):
    """Compare ``J22`` at ``mu_II = mu_I + dmu`` with the linear law ``dmu / R``.

    ``spec`` must have equal inverse temperatures; ``res_II.mu`` is ignored.
    """
    rI, rII = spec.res_I, spec.res_II
    if rI.beta != rII.beta:
        raise ValueError("ohm_check needs beta_I == beta_II")
    R = resistance(rI.mu, rI.beta, spec.kernel1, cfg, spec.d, spec.g, spec.xi)
    rows = []
    for dmu in dmu_list:
        s = spec.with_reservoirs(res_II=ReservoirState(rI.beta, rI.mu + dmu))
        rows.append(OhmRow(float(dmu), particle_current_J22(s, cfg), dmu / R))
    return rows


def richardson(values, hs, order=1):
    """Polynomial extrapolation to ``h = 0`` of ``values`` sampled at step sizes ``hs``.

    Assumes ``value(h) = L + c_1 h^order + c_2 h^(2 order) + ...``; uses
    Neville's tableau.
    """
    vals = [float(v) for v in values]
    xs = [float(h) ** order for h in hs]
    n = len(vals)
    table = list(vals)
    for k in range(1, n):
        for i in range(n - 1, k - 1, -1):
            table[i] = (xs[i - k] * table[i] - xs[i] * table[i - 1]) / (xs[i - k] - xs[i])
    return table[-1]


def conductance_limit(
    spec: JunctionSpec,
    h: float = 1e-2,
    levels: int = 4,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> float:
    """Richardson extrapolation of ``J22(dmu) / dmu`` to ``dmu -> 0``.

    Samples ``dmu = h, h/2, ..., h/2^(levels-1)``; ``spec`` supplies
    ``beta`` and ``mu = mu_I``.
    """
    rI = spec.res_I
    hs = [h / 2**k for k in range(levels)]
    ratios = []
    for dmu in hs:
        s = spec.with_reservoirs(res_II=ReservoirState(rI.beta, rI.mu + dmu))
        ratios.append(particle_current_J22(s, cfg) / dmu)
    return richardson(ratios, hs, order=1)


def onsager_spec(beta, nu, kernel, dbeta=0.0, dnu=0.0, d=3) -> JunctionSpec:
    """Junction in the near-equilibrium parametrization.

    ``beta_I = beta``, ``beta_II = beta - dbeta``, ``nu = beta_I mu_I`` and
    ``dnu = beta_I mu_I - beta_II mu_II``.
    """
    bI = beta
    bII = beta - dbeta
    res_I = ReservoirState(bI, nu / bI)
    res_II = ReservoirState(bII, (nu - dnu) / bII)
    return _spec_quiet(d, res_I, res_II, kernel)


def _spec_quiet(d, res_I, res_II, kernel):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return JunctionSpec(d, res_I, res_II, kernel)


@dataclass(frozen=True)
class OnsagerResult:
    dP_dDnu: float
    minus_dJ_dDbeta: float
    h: float
    error_estimate: float

    @property
    def gap(self) -> float:
        return self.dP_dDnu - self.minus_dJ_dDbeta

    @property
    def relative_gap(self) -> float:
        return abs(self.gap) / max(abs(self.dP_dDnu), abs(self.minus_dJ_dDbeta))


def _central_pair(beta, nu, kernel, h, cfg, d):
    P = lambda dnu: energy_current_P22(onsager_spec(beta, nu, kernel, 0.0, dnu, d), cfg)  # noqa: E731
    J = lambda db: particle_current_J22(onsager_spec(beta, nu, kernel, db, 0.0, d), cfg)  # noqa: E731
    dP = (P(h) - P(-h)) / (2 * h)
    dJ = (J(h) - J(-h)) / (2 * h)
    return dP, -dJ


def onsager_check(
    beta: float,
    nu: float,
    kernel: RadialFormFactor,
    h: float = 1e-3,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    d: int = 3,
) -> OnsagerResult:
    """Central differences ``dP22/d(dnu)`` and ``-dJ22/d(dbeta)`` at equilibrium.

    A second evaluation at ``h/2`` estimates the O(h^2) truncation error;
    :class:`StepTooLarge` is raised if it exceeds half the derivative.
    """
    dP, mdJ = _central_pair(beta, nu, kernel, h, cfg, d)
    dP2, mdJ2 = _central_pair(beta, nu, kernel, h / 2, cfg, d)
    # Richardson: error of the step-h estimate is ~ 4/3 (D(h) - D(h/2))
    est = max(abs(dP - dP2), abs(mdJ - mdJ2)) * 4.0 / 3.0
    if est > 0.5 * max(abs(dP), abs(mdJ)):
        raise StepTooLarge(f"step h={h} dominated by O(h^2) error (estimate {est:.3e})")
    return OnsagerResult(dP, mdJ, h, est)


def onsager_reference(beta, nu, kernel, cfg=DEFAULT_CONFIG, d=3) -> float:
    """``-2 pi`` times the shell integral of ``E e^x/(e^x+1)^2``; both Onsager derivatives equal it."""
    spec = onsager_spec(beta, nu, kernel, d=d)
    res = spec.res_I
    return -2.0 * math.pi * shell_integral(lambda E: E * _thermal_weight(E, res) / res.beta, spec, cfg)


def convergence_order(hs, gaps) -> float:
    """Least-squares slope of ``log|gap|`` against ``log h``."""
    x = np.log(np.asarray(hs, dtype=float))
    y = np.log(np.abs(np.asarray(gaps, dtype=float)))
    return float(np.polyfit(x, y, 1)[0])


def _p24_parts(spec: JunctionSpec):
    if spec.kernel2 is None:
        raise MissingKernel("thermal_power_P24 needs kernel2")
    if spec.d != 3:
        raise ValueError("thermal_power_P24 is implemented for d = 3 only")
    b = spec.kernel2
    rI, rII = spec.res_I, spec.res_II

    def integrand(E1, E2, F1):
        F2 = np.maximum(E1 + E2 - F1, 0.0)
        occ = 1.0 - fermi(E1, rI) - fermi(E2, rII)
        return (
            np.sqrt(E1 * E2 * F1 * F2)
            * b.of_energies(E1, E2, F1, F2)
            * (E1 - F1)
            * fermi(F1, rI)
            * fermi(F2, rII)
            * occ
        )

    features = [(r.mu, r.temperature) for r in (rI, rII)]
    prefactor = spec.g**2 * spec.xi**4 * 2.0 * math.pi * (2.0 * math.pi) ** 4
    return integrand, features, prefactor


def thermal_power_P24(spec: JunctionSpec, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Order ``g^2 xi^4`` energy current into reservoir I through a thermal contact.

    Each ``d^3k`` is reduced to ``2 pi sqrt(E) dE`` and the energy delta
    removes ``F2 = E1 + E2 - F1``, leaving
    ``g^2 xi^4 2 pi (2 pi)^4 int dE1 dE2 dF1 sqrt(E1 E2 F1 F2) b (E1 - F1)
    rho_I(F1) rho_II(F2) (1 - rho_I(E1) - rho_II(E2))``.
    """
    integrand, features, prefactor = _p24_parts(spec)
    value = integrate_3d_simplex(integrand, energy_cutoff(spec, cfg), cfg, features)
    return prefactor * value


def thermal_power_scale(spec: JunctionSpec, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Same integral with the integrand replaced by its absolute value.

    Sets the scale against which a vanishing ``P24`` is judged, so only a
    few digits are needed: the rule is refined once and its last value is
    accepted even when the kinks of ``|.|`` keep it from converging.
    """
    integrand, features, prefactor = _p24_parts(spec)
    loose = QuadratureConfig(rel_tol=1e-3, abs_tol=cfg.abs_tol, tail_constant=cfg.tail_constant)
    try:
        value = integrate_3d_simplex(
            lambda *a: np.abs(integrand(*a)), energy_cutoff(spec, cfg), loose, features, max_levels=1
        )
    except NonConvergent as exc:
        value = exc.value
    return prefactor * value
