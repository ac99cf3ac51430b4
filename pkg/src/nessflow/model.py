"""Domain types: reservoirs, form factors, junction specs and the Fermi function.

Units are hbar = 1 and particle mass 1/2, so a mode of momentum ``k`` has
energy ``|k|**2``.  Fermions are spinless.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import expit

FAMILIES = ("gaussian", "lorentzian", "poly_cutoff", "table")
PAIR_FAMILIES = ("gaussian", "lorentzian")


@dataclass(frozen=True)
class ReservoirState:
    """Inverse temperature and chemical potential of one reservoir.

    ``beta = math.inf`` is the zero-temperature limit.
    """

    beta: float
    mu: float = 0.0

    def __post_init__(self):
        beta = float(self.beta)
        if not (beta > 0):
            raise ValueError(f"beta must be positive or inf, got {self.beta!r}")
        if not math.isfinite(float(self.mu)):
            raise ValueError(f"mu must be finite, got {self.mu!r}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    @property
    def temperature(self) -> float:
        return 0.0 if self.zero_temperature else 1.0 / self.beta


def fermi(E, r: ReservoirState):
    """Fermi-Dirac occupation ``1/(exp(beta (E - mu)) + 1)``, vectorized over ``E``.

    At ``beta = inf`` this is the step function with value 1/2 at ``E == mu``.
    """
    E = np.asarray(E, dtype=float)
    if r.zero_temperature:
        out = np.where(E < r.mu, 1.0, np.where(E > r.mu, 0.0, 0.5))
    else:
        out = expit(-r.beta * (E - r.mu))
    return out if out.ndim else float(out)


def fermi_diff(E, spec: "JunctionSpec"):
    """``rho_II(E) - rho_I(E)``.

    Uses the factored form of
    ``(e^{x_I} - e^{x_II}) / ((e^{x_I} + 1)(e^{x_II} + 1))`` with
    ``x_r = beta_r (E - mu_r)`` and ``d = x_I - x_II``:
    ``expm1(d) rho_I (1 - rho_II)`` for ``d <= 0`` and
    ``-expm1(-d) (1 - rho_I) rho_II`` for ``d > 0``.  Every factor lies in
    ``[-1, 1]``, so there is neither overflow nor cancellation.
    """
    rI, rII = spec.res_I, spec.res_II
    E = np.asarray(E, dtype=float)
    if rI.zero_temperature or rII.zero_temperature:
        out = np.asarray(fermi(E, rII) - fermi(E, rI))
        return out if out.ndim else float(out)
    xI = rI.beta * (E - rI.mu)
    xII = rII.beta * (E - rII.mu)
    d = xI - xII
    neg = np.expm1(np.minimum(d, 0.0)) * expit(-xI) * expit(xII)
    pos = -np.expm1(-np.maximum(d, 0.0)) * expit(xI) * expit(-xII)
    out = np.where(d > 0, pos, neg)
    return out if out.ndim else float(out)


def sphere_area(d: int) -> float:
    """Surface area ``2 pi^(d/2) / Gamma(d/2)`` of the unit sphere in R^d."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass(frozen=True, eq=False)
class RadialFormFactor:
    """Tunnelling kernel ``u(k, l) = |w1((-k, II), (l, I))|^2`` for radial momenta.

    Families (``amp`` multiplies the amplitude, so ``u`` scales as ``amp**2``):

    ``gaussian``     amp^2 exp(-(k^2 + l^2) / width^2)
    ``lorentzian``   amp^2 (1 + (k^2 + l^2) / width^2)^(-power)
    ``poly_cutoff``  amp^2 (1 - k^2/cutoff^2)^power (1 - l^2/cutoff^2)^power
                     inside the square ``k, l < cutoff``, zero outside
    ``table``        u(k, l) = sqrt(U(k^2) U(l^2)) with ``U`` a cubic spline
                     (in energy) through tabulated diagonal values ``u(k, k)``

    All families are symmetric in ``k <-> l`` by construction.
    """

    family: str
    params: dict = field(default_factory=dict)
    table_k: Optional[tuple] = None
    table_values: Optional[tuple] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        defaults = {
            "gaussian": {"amp": 1.0, "width": 1.0},
            "lorentzian": {"amp": 1.0, "width": 1.0, "power": 4.0},
            "poly_cutoff": {"amp": 1.0, "cutoff": 1.0, "power": 0.0},
            "table": {"amp": 1.0},
        }[self.family]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ValueError(f"unknown parameter(s) {sorted(unknown)} for family {self.family}")
        merged = {**defaults, **{k: float(v) for k, v in self.params.items()}}
        object.__setattr__(self, "params", merged)
        for key in ("width", "cutoff"):
            if key in merged and not merged[key] > 0:
                raise ValueError(f"{key} must be positive")
        if "power" in merged and merged["power"] < 0:
            raise ValueError("power must be >= 0")
        if self.family == "table":
            self._init_table()

    def _init_table(self):
        if self.table_k is None or self.table_values is None:
            raise ValueError("table kernel needs table_k and table_values")
        k = np.asarray(self.table_k, dtype=float)
        v = np.asarray(self.table_values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape or len(k) < 4:
            raise ValueError("table needs at least 4 (k, value) samples")
        if np.any(np.diff(k) <= 0) or k[0] < 0:
            raise ValueError("table k must be non-negative and strictly increasing")
        if np.any(v < 0):
            raise ValueError("table values must be >= 0")
        object.__setattr__(self, "table_k", tuple(k))
        object.__setattr__(self, "table_values", tuple(v))
        object.__setattr__(self, "_spline", CubicSpline(k**2, v, bc_type="natural"))

    @classmethod
    def gaussian(cls, amp=1.0, width=1.0):
        return cls("gaussian", {"amp": amp, "width": width})

    @classmethod
    def lorentzian(cls, amp=1.0, width=1.0, power=4.0):
        return cls("lorentzian", {"amp": amp, "width": width, "power": power})

    @classmethod
    def poly_cutoff(cls, amp=1.0, cutoff=1.0, power=0.0):
        return cls("poly_cutoff", {"amp": amp, "cutoff": cutoff, "power": power})

    @classmethod
    def from_table(cls, k: Sequence[float], values: Sequence[float], amp=1.0):
        return cls("table", {"amp": amp}, tuple(k), tuple(values))

    @classmethod
    def from_csv(cls, path, amp=1.0):
        """Load a two-column ``k,value`` CSV (a header row is allowed)."""
        ks, vs = [], []
        with open(Path(path), newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    k, v = float(row[0]), float(row[1])
                except ValueError:
                    if ks:
                        raise
                    continue  # header
                ks.append(k)
                vs.append(v)
        return cls.from_table(ks, vs, amp=amp)

    def scaled(self, factor: float) -> "RadialFormFactor":
        """Same shape with the amplitude multiplied by ``factor``."""
        params = dict(self.params)
        params["amp"] = params["amp"] * factor
        return RadialFormFactor(self.family, params, self.table_k, self.table_values)

    def to_dict(self) -> dict:
        out = {"family": self.family, **self.params}
        if self.family == "table":
            out["table_k"] = list(self.table_k)
            out["table_values"] = list(self.table_values)
        return out

    @property
    def amp2(self) -> float:
        return self.params["amp"] ** 2

    def diagonal(self, E, deriv: int = 0):
        """``d^n/dE^n u(sqrt(E), sqrt(E))`` for ``n = deriv`` in {0, 1, 2}."""
        if deriv not in (0, 1, 2):
            raise ValueError("deriv must be 0, 1 or 2")
        E = np.asarray(E, dtype=float)
        p = self.params
        A = self.amp2
        fam = self.family
        if fam == "gaussian":
            c = 2.0 / p["width"] ** 2
            out = A * (-c) ** deriv * np.exp(-c * E)
        elif fam == "lorentzian":
            c = 2.0 / p["width"] ** 2
            n = p["power"]
            coef = (1.0, -n, n * (n + 1))[deriv]
            out = A * coef * c**deriv * (1.0 + c * E) ** (-n - deriv)
        elif fam == "poly_cutoff":
            K2 = p["cutoff"] ** 2
            m = 2.0 * p["power"]
            s = 1.0 - E / K2
            inside = (E >= 0) & (s > 0)
            s = np.where(inside, s, 1.0)
            if deriv == 0:
                val = s**m
            elif deriv == 1:
                val = -m / K2 * s ** (m - 1) if m else np.zeros_like(s)
            else:
                val = m * (m - 1) / K2**2 * s ** (m - 2) if m not in (0.0, 1.0) else np.zeros_like(s)
            out = A * np.where(inside, val, 0.0)
        else:
            kmax2 = self.table_k[-1] ** 2
            inside = (E >= self.table_k[0] ** 2) & (E <= kmax2)
            val = self._spline(np.clip(E, self.table_k[0] ** 2, kmax2), deriv)
            if deriv == 0:
                val = np.maximum(val, 0.0)
            out = A * np.where(inside, val, 0.0)
        return out if out.ndim else float(out)

    def __call__(self, k, l):
        """``u(k, l)`` for radial momenta (broadcasting)."""
        k = np.asarray(k, dtype=float)
        l = np.asarray(l, dtype=float)
        p = self.params
        A = self.amp2
        if self.family == "gaussian":
            out = A * np.exp(-(k**2 + l**2) / p["width"] ** 2)
        elif self.family == "lorentzian":
            out = A * (1.0 + (k**2 + l**2) / p["width"] ** 2) ** (-p["power"])
        elif self.family == "poly_cutoff":
            out = np.sqrt(self.diagonal(k**2) * self.diagonal(l**2))
        else:
            out = np.sqrt(self.diagonal(k**2) * self.diagonal(l**2))
        return out if out.ndim else float(out)

    def breakpoints(self) -> tuple:
        """Energies where ``u(sqrt(E), sqrt(E))`` is not smooth."""
        if self.family == "poly_cutoff":
            return (self.params["cutoff"] ** 2,)
        if self.family == "table":
            return (self.table_k[0] ** 2, self.table_k[-1] ** 2)
        return ()

    def support_max(self) -> float:
        """Largest energy where the diagonal can be non-zero (``inf`` if unbounded)."""
        if self.family == "poly_cutoff":
            return self.params["cutoff"] ** 2
        if self.family == "table":
            return self.table_k[-1] ** 2
        return math.inf

    def check_integrable(self, d: int) -> bool:
        """Whether ``int k^(2d-3) u(k, k) dk`` converges; warns otherwise."""
        ok = True
        if self.family == "lorentzian":
            # E^(d-2) (1 + cE)^(-n) dE integrable at infinity iff n > d - 1
            ok = self.params["power"] > d - 1
        if d == 1 and self.diagonal(0.0) != 0:
            ok = False  # k^-1 at the origin
        if not ok:
            warnings.warn(
                f"{self.family} kernel {self.params} is not integrable against k^(2d-3) in d={d}",
                RuntimeWarning,
                stacklevel=2,
            )
        return ok

    def position_factor(self, d: int):
        """Closed-form position-space kernel, when separable.

        Returns ``(amplitude, g)`` such that the unitary Fourier inverse of
        ``w1`` is ``amplitude * prod_{i=1}^{2d} g(x_i)``.  Only the Gaussian
        family has one; other families raise ``NotImplementedError``.
        """
        if self.family != "gaussian":
            raise NotImplementedError(
                f"no closed-form position-space kernel for family {self.family!r}; "
                "pass a HermiteSeries or position-space function instead"
            )
        s = self.params["width"]
        # unitary FT of exp(-k^2/(2 s^2)) is s exp(-s^2 x^2 / 2)
        return self.params["amp"], (lambda x: s * np.exp(-0.5 * (s * np.asarray(x)) ** 2))


@dataclass(frozen=True, eq=False)
class PairFormFactor:
    """Thermal kernel ``b(k1, k2, l1, l2) = |w2(-k1, -k2, l1, l2)|^2`` on moduli.

    ``gaussian``    amp^2 exp(-(k1^2 + k2^2 + l1^2 + l2^2) / width^2)
    ``lorentzian``  amp^2 (1 + (k1^2 + k2^2 + l1^2 + l2^2) / width^2)^(-power)

    Both depend on the moduli only through the sum of squares, hence are
    invariant under every relabelling of the four momenta.
    """

    family: str = "gaussian"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in PAIR_FAMILIES:
            raise ValueError(f"unknown pair kernel family {self.family!r}")
        defaults = {"amp": 1.0, "width": 1.0}
        if self.family == "lorentzian":
            defaults["power"] = 4.0
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ValueError(f"unknown parameter(s) {sorted(unknown)} for pair family {self.family}")
        merged = {**defaults, **{k: float(v) for k, v in self.params.items()}}
        if not merged["width"] > 0:
            raise ValueError("width must be positive")
        object.__setattr__(self, "params", merged)

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params}

    def of_energies(self, E1, E2, F1, F2):
        """``b`` evaluated at moduli ``sqrt(E1), sqrt(E2), sqrt(F1), sqrt(F2)``."""
        total = np.asarray(E1) + np.asarray(E2) + np.asarray(F1) + np.asarray(F2)
        p = self.params
        A = p["amp"] ** 2
        if self.family == "gaussian":
            return A * np.exp(-total / p["width"] ** 2)
        return A * (1.0 + total / p["width"] ** 2) ** (-p["power"])

    def __call__(self, k1, k2, l1, l2):
        sq = lambda x: np.asarray(x, dtype=float) ** 2  # noqa: E731
        return self.of_energies(sq(k1), sq(k2), sq(l1), sq(l2))


@dataclass(frozen=True)
class JunctionSpec:
    """Two reservoirs plus coupling kernels and the constants ``g`` and ``xi``.

    The interaction is ``W = g * sum_N xi^N W_N``; ``kernel1`` describes the
    quadratic tunnelling term ``W_1`` and ``kernel2`` the quartic thermal term
    ``W_2``.
    """

    d: int
    res_I: ReservoirState
    res_II: ReservoirState
    kernel1: Optional[RadialFormFactor] = None
    kernel2: Optional[PairFormFactor] = None
    g: float = 1.0
    xi: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be an integer >= 1, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        if self.kernel1 is None and self.kernel2 is None:
            raise ValueError("a junction needs at least one kernel")
        if self.d < 3:
            warnings.warn(
                f"d={self.d}: transport integrals are evaluated but Dyson certificates need d >= 3",
                RuntimeWarning,
                stacklevel=3,
            )

    def with_reservoirs(self, res_I=None, res_II=None) -> "JunctionSpec":
        return JunctionSpec(
            self.d,
            res_I if res_I is not None else self.res_I,
            res_II if res_II is not None else self.res_II,
            self.kernel1,
            self.kernel2,
            self.g,
            self.xi,
        )

    def swapped(self) -> "JunctionSpec":
        """Exchange the thermodynamic states of the two reservoirs."""
        return self.with_reservoirs(self.res_II, self.res_I)
