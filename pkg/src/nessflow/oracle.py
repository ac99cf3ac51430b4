"""Exact one-particle dynamics of two lattice reservoirs joined by a hopping junction.

Both reservoirs are free-fermion lattices with Dirichlet boundaries; the
coupling ``g v`` is quadratic, so the state stays quasi-free and is fully
described by its correlation matrix ``Gamma_ij = <a*_j a_i>``.  Under the
Heisenberg dynamics

    Gamma(t) = exp(-i t h) Gamma_0 exp(i t h),

which makes ``Gamma(t)_ii`` the occupation of site ``i`` at time ``t``.
Currents are commutator traces, so the conservation identities hold to
rounding.

The default geometry is a pair of 1D chains.  The identities checked here
(conservation, entropy production, weak-coupling scaling) are finite-time,
finite-volume statements and hold in any dimension; the chains only make
exact diagonalization cheap.  A small 3D box geometry is also available.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .errors import BadGeometry, NoPlateau
from .model import ReservoirState, fermi

GEOMETRIES = ("chain", "box")


def _chain(n: int, hopping: float, onsite: float) -> np.ndarray:
    h = np.diag(np.full(n, float(onsite)))
    off = np.full(n - 1, -float(hopping))
    return h + np.diag(off, 1) + np.diag(off, -1)


def _box(L: int, hopping: float, onsite: float) -> np.ndarray:
    """Cubic ``L^3`` lattice, sites ordered ``(x, y, z)`` with ``x`` slowest."""
    lap = _chain(L, hopping, 0.0)
    eye = np.eye(L)
    h = (
        np.kron(np.kron(lap, eye), eye)
        + np.kron(np.kron(eye, lap), eye)
        + np.kron(np.kron(eye, eye), lap)
    )
    return h + float(onsite) * np.eye(L**3)


@dataclass(frozen=True, eq=False)
class LatticeJunction:
    """Two reservoir blocks and the coupling between them.

    ``h = [[h0_I, g v], [g v^dagger, h0_II]]``.
    """

    h0_I: np.ndarray
    h0_II: np.ndarray
    v: np.ndarray
    g: float
    geometry: str = "chain"

    def __post_init__(self):
        if self.v.shape != (self.n_I, self.n_II):
            raise BadGeometry(f"coupling block has shape {self.v.shape}, expected {(self.n_I, self.n_II)}")
        for name, blk in (("h0_I", self.h0_I), ("h0_II", self.h0_II)):
            if not np.allclose(blk, blk.conj().T, atol=1e-13, rtol=0):
                raise BadGeometry(f"{name} is not hermitian")

    @property
    def n_I(self) -> int:
        return self.h0_I.shape[0]

    @property
    def n_II(self) -> int:
        return self.h0_II.shape[0]

    @property
    def n(self) -> int:
        return self.n_I + self.n_II

    @cached_property
    def coupling(self) -> np.ndarray:
        """The full ``n x n`` coupling matrix ``W``."""
        W = np.zeros((self.n, self.n), dtype=self.v.dtype)
        W[: self.n_I, self.n_I :] = self.g * self.v
        W[self.n_I :, : self.n_I] = self.g * self.v.conj().T
        return W

    @cached_property
    def h0(self) -> np.ndarray:
        H = np.zeros((self.n, self.n), dtype=np.result_type(self.h0_I, self.h0_II))
        H[: self.n_I, : self.n_I] = self.h0_I
        H[self.n_I :, self.n_I :] = self.h0_II
        return H

    @cached_property
    def h(self) -> np.ndarray:
        return self.h0 + self.coupling

    @cached_property
    def spectrum(self):
        """Eigenvalues and eigenvectors of ``h``, computed once."""
        return np.linalg.eigh(self.h)

    @cached_property
    def _current_ops(self):
        nI = self.n_I
        P = np.zeros(self.n)
        P[:nI] = 1.0
        HI = np.zeros_like(self.h0)
        HI[:nI, :nI] = self.h0_I
        HII = np.zeros_like(self.h0)
        HII[nI:, nI:] = self.h0_II
        W, h = self.coupling, self.h
        # d/dt Tr(A Gamma) = -i Tr([A, h] Gamma)
        return {
            "J_I": -1j * (P[:, None] * h - h * P[None, :]),
            "J_II": -1j * ((1 - P)[:, None] * h - h * (1 - P)[None, :]),
            "P_I": -1j * (HI @ h - h @ HI),
            "P_II": -1j * (HII @ h - h @ HII),
            "dW_dt": -1j * (W @ h - h @ W),
        }


def build_junction(
    n_I: int,
    n_II: int | None = None,
    g: float = 0.05,
    hopping: float = 1.0,
    onsite: float = 2.0,
    width: int = 1,
    geometry: str = "chain",
) -> LatticeJunction:
    """Assemble the junction Hamiltonian.

    Parameters
    ----------
    n_I, n_II : int
        Sites per reservoir (``chain``) or side length of each cube (``box``).
    g : float
        Coupling strength.
    hopping, onsite : float
        Nearest-neighbour hopping ``t`` and diagonal energy.  With
        ``onsite = 2 t`` the 1D band is ``[0, 4 t]`` and its bottom behaves
        like ``t k^2``.
    width : int
        Number of site pairs coupled across the junction.  On chains pair
        ``i`` joins site ``n_I - 1 - i`` of I to site ``i`` of II; in a box
        every facing pair on the contact faces within ``width`` of the
        corner is joined.
    """
    n_II = n_I if n_II is None else n_II
    if geometry not in GEOMETRIES:
        raise BadGeometry(f"geometry must be one of {GEOMETRIES}, got {geometry!r}")
    if n_I < 2 or n_II < 2:
        raise BadGeometry("each reservoir needs at least 2 sites per side")
    if not isinstance(g, (int, float)) or not math.isfinite(g):
        raise BadGeometry(f"g must be a finite real number, got {g!r}")
    if width < 1:
        raise BadGeometry("width must be >= 1")

    if geometry == "chain":
        if width > min(n_I, n_II):
            raise BadGeometry("coupling width exceeds a reservoir")
        hI, hII = _chain(n_I, hopping, onsite), _chain(n_II, hopping, onsite)
        v = np.zeros((n_I, n_II))
        for i in range(width):
            v[n_I - 1 - i, i] = 1.0
    else:
        if n_I != n_II:
            raise BadGeometry("box reservoirs must share a side length")
        L = n_I
        if width > L:
            raise BadGeometry("coupling width exceeds the contact face")
        hI, hII = _box(L, hopping, onsite), _box(L, hopping, onsite)
        v = np.zeros((L**3, L**3))
        for y in range(width):
            for z in range(width):
                v[(L - 1) * L * L + y * L + z, y * L + z] = 1.0
    return LatticeJunction(hI, hII, v, float(g), geometry)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Hermitian one-particle matrix ``Gamma_ij = <a*_j a_i>``."""

    gamma: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.gamma)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError("correlation matrix must be square")
        if not np.allclose(G, G.conj().T, atol=1e-12, rtol=0):
            raise ValueError("correlation matrix must be hermitian")

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.gamma)

    def trace(self) -> float:
        return float(np.real(np.trace(self.gamma)))


def _fermi_of_block(h: np.ndarray, r: ReservoirState) -> np.ndarray:
    E, V = np.linalg.eigh(h)
    return (V * fermi(E, r)) @ V.conj().T


def initial_state(j: LatticeJunction, res_I: ReservoirState, res_II: ReservoirState) -> CorrelationMatrix:
    """Product of the two Gibbs states of the decoupled blocks."""
    G = np.zeros((j.n, j.n), dtype=complex)
    G[: j.n_I, : j.n_I] = _fermi_of_block(j.h0_I, res_I)
    G[j.n_I :, j.n_I :] = _fermi_of_block(j.h0_II, res_II)
    return CorrelationMatrix(G)


class Evolution:
    """``Gamma(t)`` for one initial state, reusing the eigendecomposition of ``h``.

    In the eigenbasis of ``h`` the dynamics is a phase,
    ``Gamma~(t)_kl = exp(-i (E_k - E_l) t) Gamma~_0,kl``, so expectations
    ``Tr(A Gamma(t))`` reduce to elementwise products once ``A`` has been
    rotated (see :meth:`rotate`).
    """

    def __init__(self, j: LatticeJunction, gamma0: CorrelationMatrix):
        self.junction = j
        self.E, self.V = j.spectrum
        self._g0 = self.V.conj().T @ gamma0.gamma @ self.V

    def rotate(self, A: np.ndarray) -> np.ndarray:
        """``V^dagger A V`` for use with :meth:`expectation`."""
        return self.V.conj().T @ A @ self.V

    def _inner(self, t: float) -> np.ndarray:
        phase = np.exp(-1j * self.E * t)
        return phase[:, None] * self._g0 * phase.conj()[None, :]

    def expectation(self, rotated: np.ndarray, t: float) -> float:
        return _trace_product(rotated, self._inner(t))

    def at(self, t: float) -> CorrelationMatrix:
        G = self.V @ self._inner(t) @ self.V.conj().T
        return CorrelationMatrix(0.5 * (G + G.conj().T))


def evolve(j: LatticeJunction, gamma0: CorrelationMatrix, t: float) -> CorrelationMatrix:
    """``exp(-i t h) Gamma_0 exp(i t h)``."""
    if t == 0:
        return gamma0
    return Evolution(j, gamma0).at(t)


@dataclass(frozen=True)
class Currents:
    J_I: float
    J_II: float
    P_I: float
    P_II: float
    dW_dt: float


def _trace_product(A: np.ndarray, G: np.ndarray) -> float:
    # Tr(A G) without forming the product
    return float(np.real(np.sum(A * G.T)))


def currents(j: LatticeJunction, gamma: CorrelationMatrix) -> Currents:
    """Rates of change of ``N_I, N_II, E_I, E_II`` and ``<W>``; positive means gain."""
    ops = j._current_ops
    G = gamma.gamma
    return Currents(**{k: _trace_product(A, G) for k, A in ops.items()})


def w_rate_finite_difference(j: LatticeJunction, gamma0: CorrelationMatrix, t: float, dt: float = 1e-3) -> float:
    """Central difference of ``Tr(W Gamma(t))``; cross-check for ``Currents.dW_dt``."""
    ev = Evolution(j, gamma0)
    W = j.coupling
    up = _trace_product(W, ev.at(t + dt).gamma)
    down = _trace_product(W, ev.at(t - dt).gamma)
    return (up - down) / (2 * dt)


def entropy_rate(c: Currents, res_I: ReservoirState, res_II: ReservoirState) -> float:
    """``sum_r beta_r (P_r - mu_r J_r)``."""
    return res_I.beta * (c.P_I - res_I.mu * c.J_I) + res_II.beta * (c.P_II - res_II.mu * c.J_II)


COLUMNS = ("t", "N_I", "E_I", "E_II", "W_expect", "J_I", "P_I", "entropy_rate")


@dataclass
class TraceRecord:
    """Observables sampled along one run, one array per column."""

    t: np.ndarray
    N_I: np.ndarray
    E_I: np.ndarray
    E_II: np.ndarray
    W_expect: np.ndarray
    J_I: np.ndarray
    P_I: np.ndarray
    entropy_rate: np.ndarray
    J_II: np.ndarray
    P_II: np.ndarray
    dW_dt: np.ndarray
    N_total: np.ndarray
    E_total: np.ndarray
    spectrum_min: np.ndarray
    spectrum_max: np.ndarray
    meta: dict = field(default_factory=dict)

    def rows(self):
        cols = [getattr(self, c) for c in COLUMNS]
        return [tuple(float(c[i]) for c in cols) for i in range(len(self.t))]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            for row in self.rows():
                w.writerow([f"{x:.17g}" for x in row])


def run(
    j: LatticeJunction,
    res_I: ReservoirState,
    res_II: ReservoirState,
    t_max: float,
    dt: float = 0.5,
    spectrum_every: int = 30,
) -> TraceRecord:
    """Sample observables on ``t = 0, dt, ..., t_max``.

    Every observable is a trace ``Tr(A Gamma(t))`` evaluated in the
    eigenbasis of ``h``.  The spectrum of the site-basis ``Gamma(t)`` is
    computed every ``spectrum_every`` samples (and at the last one); other
    samples carry ``nan`` in those columns.
    """
    if dt <= 0 or t_max < 0:
        raise ValueError("need dt > 0 and t_max >= 0")
    ts = np.arange(int(math.floor(t_max / dt + 1e-9)) + 1) * dt
    ev = Evolution(j, initial_state(j, res_I, res_II))
    nI = j.n_I
    P = np.zeros((j.n, j.n))
    P[:nI, :nI] = np.eye(nI)
    HI = np.zeros_like(j.h0)
    HI[:nI, :nI] = j.h0_I
    ops = {
        "N_I": P,
        "N_total": np.eye(j.n),
        "E_I": HI,
        "E_II": j.h0 - HI,
        "E_total": j.h,
        "W_expect": j.coupling,
        **j._current_ops,
    }
    rotated = {k: ev.rotate(A) for k, A in ops.items()}
    cols = {k: np.empty(len(ts)) for k in TraceRecord.__dataclass_fields__ if k != "meta"}
    cols["t"] = ts
    for i, t in enumerate(ts):
        inner = ev._inner(t)
        for k, A in rotated.items():
            cols[k][i] = _trace_product(A, inner)
        c = Currents(*(cols[k][i] for k in ("J_I", "J_II", "P_I", "P_II", "dW_dt")))
        cols["entropy_rate"][i] = entropy_rate(c, res_I, res_II)
        if i % spectrum_every == 0 or i == len(ts) - 1:
            spec = ev.at(t).eigenvalues()
            cols["spectrum_min"][i], cols["spectrum_max"][i] = spec[0], spec[-1]
        else:
            cols["spectrum_min"][i] = cols["spectrum_max"][i] = np.nan
    meta = {"res_I": res_I, "res_II": res_II, "g": j.g, "n_I": j.n_I, "n_II": j.n_II, "dt": dt}
    return TraceRecord(**cols, meta=meta)


@dataclass(frozen=True)
class Plateau:
    J: float
    P: float
    J_std: float
    P_std: float
    window: tuple


def _halves_drift(x: np.ndarray):
    a, b = np.array_split(x, 2)
    pooled = math.sqrt(0.5 * (a.var(ddof=1) + b.var(ddof=1)))
    return abs(a.mean() - b.mean()), pooled


def plateau_current(record: TraceRecord, window: tuple, rel_drift: float = 0.1) -> Plateau:
    """Window means of ``J_I`` and ``P_I``.

    The window is split in halves.  If the half means differ by more than
    three pooled standard deviations the plateau is suspect: a warning is
    issued, and :class:`NoPlateau` is raised when the difference also
    exceeds ``rel_drift`` times the mean.
    """
    lo, hi = window
    mask = (record.t >= lo) & (record.t <= hi)
    if mask.sum() < 4:
        raise NoPlateau(f"window {window} holds fewer than 4 samples")
    out = {}
    for name in ("J_I", "P_I"):
        x = getattr(record, name)[mask]
        drift, pooled = _halves_drift(x)
        mean = float(x.mean())
        if drift > 3 * pooled:
            if drift > rel_drift * abs(mean):
                raise NoPlateau(f"{name} drifts by {drift:.3g} over {window} (mean {mean:.3g})")
            warnings.warn(f"{name} drift {drift:.3g} exceeds 3 std ({pooled:.3g}) over {window}", stacklevel=2)
        out[name] = (mean, float(x.std(ddof=1)))
    return Plateau(out["J_I"][0], out["P_I"][0], out["J_I"][1], out["P_I"][1], (lo, hi))


@dataclass(frozen=True)
class EntropyVerdict:
    average: float
    tolerance: float
    nonnegative: bool


def entropy_check(record: TraceRecord, res_I: ReservoirState, res_II: ReservoirState) -> EntropyVerdict:
    """Time average of the entropy production rate by the trapezoid rule.

    The verdict allows ``-1e-8 * scale``, where ``scale`` is the largest
    single term ``beta_r |P_r|`` or ``beta_r |mu_r J_r|`` seen in the run.
    """
    if len(record.t) < 2:
        raise ValueError("record needs at least two samples")
    T = record.t[-1] - record.t[0]
    avg = float(trapezoid(record.entropy_rate, record.t) / T)
    terms = [
        res_I.beta * np.abs(record.P_I),
        res_I.beta * abs(res_I.mu) * np.abs(record.J_I),
        res_II.beta * np.abs(record.P_II),
        res_II.beta * abs(res_II.mu) * np.abs(record.J_II),
    ]
    scale = max(float(np.max(x)) for x in terms)
    tol = 1e-8 * scale
    return EntropyVerdict(avg, tol, avg >= -tol)


def entropy_integral_exact(
    j: LatticeJunction, gamma0: CorrelationMatrix, gamma_t: CorrelationMatrix, res_I: ReservoirState, res_II: ReservoirState
) -> float:
    """``Tr((Gamma_t - Gamma_0) K)`` with ``K = beta_r (h0_r - mu_r)`` blockwise.

    This is the time integral of the entropy production rate and equals the
    relative entropy of ``Gamma_t`` with respect to ``Gamma_0``, hence is
    nonnegative.
    """
    nI = j.n_I
    K = np.zeros((j.n, j.n))
    K[:nI, :nI] = res_I.beta * (j.h0_I - res_I.mu * np.eye(nI))
    K[nI:, nI:] = res_II.beta * (j.h0_II - res_II.mu * np.eye(j.n_II))
    return _trace_product(K, gamma_t.gamma - gamma0.gamma)


def random_correlation(rng: np.random.Generator, n: int) -> CorrelationMatrix:
    """A random admissible ``Gamma`` (eigenvalues uniform in ``[0, 1]``)."""
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, _ = np.linalg.qr(A)
    occ = rng.uniform(0.0, 1.0, n)
    G = (Q * occ) @ Q.conj().T
    return CorrelationMatrix(0.5 * (G + G.conj().T))
