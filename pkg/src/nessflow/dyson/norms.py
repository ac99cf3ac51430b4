"""Hermite expansions and the weighted norms that control the Dyson series.

For ``f`` on ``R^M`` with Hermite coefficients ``c_q``,

    ||f||'_M = 2^(-3M/2) <f, prod_k (-d_k^2 + x_k^2 + 1)^3 f>^(1/2)
             = 2^(-3M/2) (sum_q |c_q|^2 prod_k (2 q_k + 2)^3)^(1/2),

since each ``phi_q`` is an eigenfunction of ``-d^2 + x^2 + 1`` with
eigenvalue ``2q + 2``.  The translated form replaces ``x_k^2`` by
``(x_k - y_k)^2``; the seminorm ``||f||''`` is its infimum over ``y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import golden

from ..errors import TruncationInsufficient
from ..model import RadialFormFactor
from .hermite import hermite_table, scaled_gauss_hermite


@dataclass(frozen=True, eq=False)
class HermiteSeries:
    """Coefficients of ``sum_q c_q prod_k phi_{q_k}(x_k)`` on a box ``q_k <= truncation``.

    ``coeffs`` is a dense array of shape ``(truncation + 1,) * M``.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim < 1:
            raise ValueError("coefficients need at least one axis")
        if len(set(c.shape)) != 1:
            raise ValueError("all axes must share one truncation")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c = c.astype(complex if np.iscomplexobj(c) else float)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def M(self) -> int:
        return self.coeffs.ndim

    @property
    def truncation(self) -> int:
        return self.coeffs.shape[0] - 1

    @classmethod
    def from_dict(cls, entries: Mapping[tuple, complex], M: int, truncation: int | None = None):
        """Build from ``{multi_index: coefficient}``."""
        if truncation is None:
            truncation = max((max(q) for q in entries), default=0)
        iscomplex = any(isinstance(v, complex) for v in entries.values())
        c = np.zeros((truncation + 1,) * M, dtype=complex if iscomplex else float)
        for q, v in entries.items():
            if len(q) != M:
                raise ValueError(f"multi-index {q} does not have {M} entries")
            c[tuple(q)] = v
        return cls(c)

    @classmethod
    def ground_state(cls, M: int, amplitude: float = 1.0, truncation: int = 0):
        """``amplitude * prod_k phi_0(x_k)``."""
        c = np.zeros((truncation + 1,) * M)
        c[(0,) * M] = amplitude
        return cls(c)

    @classmethod
    def project(cls, f: Callable, M: int, truncation: int, nodes: int | None = None):
        """Project a vectorized ``f(x_1, ..., x_M)`` onto Hermite products.

        Uses a tensor Gauss-Hermite rule with ``nodes`` points per axis and
        contracts one axis at a time.
        """
        n = nodes or max(2 * truncation + 8, 24)
        x, lam = scaled_gauss_hermite(n)
        grid = np.meshgrid(*([x] * M), indexing="ij")
        vals = np.asarray(f(*grid))
        basis = hermite_table(truncation, x) * lam  # (Q+1, n)
        c = vals
        for axis in range(M):
            c = np.tensordot(basis, c, axes=([1], [axis]))
            c = np.moveaxis(c, 0, axis)
        return cls(c)

    @classmethod
    def project_1d(cls, f: Callable, truncation: int, nodes: int | None = None):
        return cls.project(f, 1, truncation, nodes)

    def scaled(self, factor) -> "HermiteSeries":
        return HermiteSeries(self.coeffs * factor)

    def padded(self, extra: int) -> "HermiteSeries":
        return HermiteSeries(np.pad(self.coeffs, [(0, extra)] * self.M))

    def evaluate(self, *xs):
        """Value of the series at points ``xs`` (one array per variable)."""
        xs = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in xs])
        tables = [hermite_table(self.truncation, x) for x in xs]
        out = self.coeffs
        # contract the leading axis against each variable's table in turn
        out = np.tensordot(out, tables[0], axes=([0], [0]))
        for t in tables[1:]:
            out = np.einsum("q...,q...->...", out, t)
        return out

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))


def _eigen_weights(series: HermiteSeries):
    q = np.arange(series.truncation + 1)
    w1 = (2.0 * q + 2.0) ** 3
    w = np.ones(series.coeffs.shape)
    for axis in range(series.M):
        shape = [1] * series.M
        shape[axis] = -1
        w = w * w1.reshape(shape)
    return w


def sobolev_norm(series: HermiteSeries) -> float:
    """``||f||'_M`` from the Hermite coefficients."""
    M = series.M
    total = np.sum(np.abs(series.coeffs) ** 2 * _eigen_weights(series))
    return float(2.0 ** (-1.5 * M) * math.sqrt(total))


def _shifted_operator(size: int, y: float) -> np.ndarray:
    """Matrix of ``-d^2 + (x - y)^2 + 1`` in ``phi_0 .. phi_{size-1}``.

    ``-d^2 + x^2 + 1`` is diagonal with entries ``2q + 2`` and ``x`` has
    off-diagonal entries ``sqrt((q+1)/2)``; the shift adds ``-2 y x + y^2``.
    """
    q = np.arange(size)
    A = np.diag(2.0 * q + 2.0 + y * y)
    off = -2.0 * y * np.sqrt((q[:-1] + 1) / 2.0)
    return A + np.diag(off, 1) + np.diag(off, -1)


def sobolev_norm_translated(series: HermiteSeries, shift: Sequence[float]) -> float:
    """``2^(-3M/2) <f, prod_k (-d_k^2 + (x_k - y_k)^2 + 1)^3 f>^(1/2)`` for ``y = shift``.

    Exact: the operator is tridiagonal in the Hermite basis, so after
    padding three extra levels per axis ``<f, A^3 f> = <A f, A (A f)>`` is
    evaluated without truncation error.
    """
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    if shift.shape != (series.M,):
        raise ValueError(f"shift must have {series.M} entries")
    c = series.padded(3).coeffs
    size = c.shape[0]
    G = c
    for axis, y in enumerate(shift):
        G = np.moveaxis(np.tensordot(_shifted_operator(size, y), G, axes=([1], [axis])), 0, axis)
    H = G
    for axis, y in enumerate(shift):
        H = np.moveaxis(np.tensordot(_shifted_operator(size, y), H, axes=([1], [axis])), 0, axis)
    form = float(np.real(np.vdot(G, H)))
    return float(2.0 ** (-1.5 * series.M) * math.sqrt(max(form, 0.0)))


def seminorm_translation_invariant(
    series: HermiteSeries,
    search_radius: float | None = None,
    grid_points: int = 41,
    sweeps: int = 3,
    xtol: float = 1e-6,
):
    """Approximate ``||f||''_M = inf_y`` of the translated form.

    Coordinate descent: for each axis, scan a coarse grid on
    ``[-search_radius, search_radius]`` and refine the best bracket by golden
    section; ``sweeps`` passes over all axes.  The origin is always a
    candidate, so the result never exceeds :func:`sobolev_norm`.

    Returns ``(value, shift)``.
    """
    M = series.M
    R = search_radius if search_radius is not None else 2.0 * math.sqrt(2 * series.truncation + 1) + 2.0
    y = np.zeros(M)
    best = sobolev_norm_translated(series, y)
    grid = np.linspace(-R, R, grid_points)
    for _ in range(sweeps):
        improved = False
        for k in range(M):
            def along(s, k=k):
                z = y.copy()
                z[k] = s
                return sobolev_norm_translated(series, z)

            vals = np.array([along(s) for s in grid])
            i = int(np.argmin(vals))
            lo = grid[max(i - 1, 0)]
            hi = grid[min(i + 1, len(grid) - 1)]
            if lo < grid[i] < hi:
                s = golden(along, brack=(lo, grid[i], hi), tol=xtol)
            else:
                s = grid[i]
            cand = along(s)
            if cand < best:
                best = cand
                y[k] = s
                improved = True
        if not improved:
            break
    return best, y


@dataclass(frozen=True)
class InteractionNorm:
    """``||W||' = sum_N N 2^((d+2)N) * (sum of kernel-block norms for N)``.

    ``contributions`` holds ``(N, weighted value)`` pairs.
    """

    contributions: tuple
    d: int

    @property
    def total(self) -> float:
        return math.fsum(v for _, v in self.contributions)

    def scaled(self, factor: float) -> "InteractionNorm":
        return InteractionNorm(tuple((N, abs(factor) * v) for N, v in self.contributions), self.d)


def nbody_weight(N: int, d: int) -> float:
    return N * 2.0 ** ((d + 2) * N)


def truncation_tail(series: HermiteSeries) -> float:
    """Share of ``||f||'^2`` carried by the outermost tenth of the index box."""
    w = np.abs(series.coeffs) ** 2 * _eigen_weights(series)
    total = w.sum()
    if total == 0:
        return 0.0
    Q = series.truncation
    edge = max(Q - max(Q // 10, 1) + 1, 1) if Q > 0 else 1
    inner = w[(slice(0, edge),) * series.M].sum()
    return float((total - inner) / total)


def _check_tail(series, tol, what):
    tail = truncation_tail(series)
    if tail > tol:
        raise TruncationInsufficient(
            f"{what}: {100 * tail:.2f}% of the weighted norm sits at the truncation edge "
            f"(Q={series.truncation}); increase the truncation",
            tail=tail,
        )


def kernel_norm(kernel, d: int, truncation: int = 40, tail_tol: float = 0.01) -> float:
    """``||w_1||'_{2d}`` of one reservoir block of a quadratic interaction.

    ``kernel`` may be a :class:`HermiteSeries` on ``R^{2d}``, a
    :class:`RadialFormFactor` with a separable position-space form, or a
    vectorized callable of ``2d`` position variables (projected on a tensor
    Gauss-Hermite grid; practical for small ``d`` only).
    """
    M = 2 * d
    if isinstance(kernel, HermiteSeries):
        if kernel.M != M:
            raise ValueError(f"series has {kernel.M} variables, expected {M}")
        _check_tail(kernel, tail_tol, "kernel series")
        return sobolev_norm(kernel)
    if isinstance(kernel, RadialFormFactor):
        amp, factor = kernel.position_factor(d)
        s1 = HermiteSeries.project_1d(factor, truncation)
        _check_tail(s1, tail_tol, "position-space factor")
        # the operator factorizes over variables, so the norm is a product
        return abs(amp) * sobolev_norm(s1) ** M
    if callable(kernel):
        series = HermiteSeries.project(kernel, M, truncation)
        _check_tail(series, tail_tol, "projected kernel")
        return sobolev_norm(series)
    raise TypeError(f"cannot take the norm of {type(kernel).__name__}")


def interaction_norm(
    kernel,
    d: int,
    truncation: int = 40,
    blocks: int = 1,
    higher: Sequence[tuple] = (),
    tail_tol: float = 0.01,
) -> InteractionNorm:
    """``||W||'`` for a quadratic term plus optional precomputed many-body norms.

    ``blocks`` counts the non-zero reservoir blocks ``(r, r')`` of ``w_1``
    sharing the same norm (2 for a tunnelling term and its hermitian
    conjugate).  ``higher`` lists ``(N, ||w_N||'_{2dN})`` pairs for ``N >= 2``,
    already summed over reservoir labels; they are weighted by
    ``N 2^((d+2)N)`` like the quadratic term.
    """
    contributions = []
    if kernel is not None:
        value = blocks * kernel_norm(kernel, d, truncation, tail_tol)
        contributions.append((1, nbody_weight(1, d) * value))
    for N, value in higher:
        if N < 1 or value < 0:
            raise ValueError(f"bad many-body norm entry ({N}, {value})")
        contributions.append((int(N), nbody_weight(int(N), d) * float(value)))
    return InteractionNorm(tuple(contributions), d)


def random_series(rng: np.random.Generator, M: int, truncation: int, decay: float = 1.0) -> HermiteSeries:
    """Random coefficients with a Gaussian envelope ``exp(-decay |q|)``; used by tests and probes."""
    shape = (truncation + 1,) * M
    idx = np.indices(shape).sum(axis=0)
    c = rng.standard_normal(shape) * np.exp(-decay * idx)
    return HermiteSeries(c)
