"""Adaptive Gauss-Legendre quadrature and energy-shell reductions.

Delta functions in the momentum integrals are always removed analytically:
``int d^dk d^dl delta(|k|^2 - |l|^2) u(|k|, |l|) F(|k|^2)`` becomes a single
energy integral with weight ``S_{d-1}^2 / 4 * E^(d-2)``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import MissingKernel, NonConvergent
from .model import JunctionSpec, sphere_area

__all__ = [
    "QuadratureConfig",
    "DEFAULT_CONFIG",
    "sphere_area",
    "gauss_legendre",
    "integrate_1d",
    "energy_cutoff",
    "shell_weight",
    "shell_integral",
    "integrate_3d_simplex",
]


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    tail_constant: float = 40.0
    max_subdivisions: int = 2000
    rule_order: int = 15

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.abs_tol < 0:
            raise ValueError("abs_tol must be non-negative")
        if self.rule_order < 2:
            raise ValueError("rule_order must be >= 2")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if not self.tail_constant > 0:
            raise ValueError("tail_constant must be positive")


DEFAULT_CONFIG = QuadratureConfig()


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _panel_sums(f, a, b, n):
    """GL_n integrals of ``f`` over each panel [a_i, b_i] with one call to ``f``."""
    x, w = gauss_legendre(n)
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[:, None]
    half = 0.5 * (b - a)
    nodes = a + half * (x + 1.0)
    vals = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
    return (vals * w).sum(axis=1) * half[:, 0]


def integrate_1d(
    f: Callable,
    a: float,
    b: float,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    points: Iterable[float] = (),
):
    """Adaptive Gauss-Legendre quadrature of a vectorized ``f`` over [a, b].

    Each panel is scored by the difference between the n-point rule on the
    whole panel and on its two halves; the worst panel is bisected next.
    Ties in the priority queue are broken by a creation counter, so the
    refinement sequence and the final sum are reproducible bit for bit.

    Parameters
    ----------
    f : callable
        Maps a 1-D array of abscissae to an array of the same shape.
    a, b : float
        Integration limits, ``a <= b``.
    cfg : QuadratureConfig
    points : iterable of float
        Interior points where the integrand has kinks or steps; panels are
        split there from the start.

    Returns
    -------
    value, error_estimate : float, float

    Raises
    ------
    NonConvergent
        If ``max_subdivisions`` bisections leave the estimate above
        ``rel_tol * |value| + abs_tol``.
    """
    a = float(a)
    b = float(b)
    if b < a:
        raise ValueError("integrate_1d needs a <= b")
    if a == b:
        return 0.0, 0.0
    n = cfg.rule_order
    edges = sorted({a, b, *(float(p) for p in points if a < p < b)})
    lo = np.array(edges[:-1])
    hi = np.array(edges[1:])

    def score(lo, hi):
        mid = 0.5 * (lo + hi)
        coarse, left, right = np.split(
            _panel_sums(f, np.concatenate([lo, lo, mid]), np.concatenate([hi, mid, hi]), n), 3
        )
        fine = left + right
        return fine, np.abs(fine - coarse)

    fine, err = score(lo, hi)
    heap = []
    counter = 0
    for i in range(len(lo)):
        heap.append((-err[i], counter, lo[i], hi[i], fine[i]))
        counter += 1
    heapq.heapify(heap)
    total_err = float(err.sum())
    subdivisions = 0

    def current_value():
        return math.fsum(item[4] for item in sorted(heap, key=lambda it: it[2]))

    value = current_value()
    while total_err > cfg.rel_tol * abs(value) + cfg.abs_tol:
        if subdivisions >= cfg.max_subdivisions:
            raise NonConvergent(
                f"integrate_1d: {subdivisions} subdivisions, error estimate {total_err:.3e} "
                f"for value {value:.6e}",
                value=value,
                error_estimate=total_err,
            )
        # bisect the worst panels; popping order is fixed by (error, counter)
        split = [heapq.heappop(heap) for _ in range(min(len(heap), 8))]
        los = np.array([it[2] for it in split])
        his = np.array([it[3] for it in split])
        mids = 0.5 * (los + his)
        fine, err = score(np.concatenate([los, mids]), np.concatenate([mids, his]))
        k = len(split)
        for j in range(2 * k):
            lo_j = los[j] if j < k else mids[j - k]
            hi_j = mids[j] if j < k else his[j - k]
            heapq.heappush(heap, (-err[j], counter, lo_j, hi_j, fine[j]))
            counter += 1
        subdivisions += k
        total_err = math.fsum(-it[0] for it in heap)
        value = current_value()
    return value, total_err


def energy_cutoff(spec: JunctionSpec, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """``max(mu_I, mu_II, 0) + C / min(beta_I, beta_II)``."""
    beta_min = min(spec.res_I.beta, spec.res_II.beta)
    top = max(spec.res_I.mu, spec.res_II.mu, 0.0)
    return top + cfg.tail_constant / beta_min


def shell_weight(d: int) -> float:
    """Prefactor ``S_{d-1}^2 / 4`` of the energy-shell reduction."""
    return sphere_area(d) ** 2 / 4.0


def _ladder(top, base=1.0 / 64):
    """Geometric breakpoints ``base * 2^j`` below ``top``.

    Without them a long tail panel can hide a narrow peak near the origin
    from both the coarse and the bisected rule.
    """
    pts = []
    x = base
    while x < top:
        pts.append(x)
        x *= 2.0
    return pts


def shell_integral(
    F: Callable,
    spec: JunctionSpec,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    e_max: float | None = None,
    with_error: bool = False,
):
    """``int d^dk d^dl delta(|k|^2 - |l|^2) u(|k|, |l|) F(|k|^2)`` for ``u = kernel1``.

    Radial reduction in both momenta followed by the delta function in
    ``l`` (Jacobian ``1/(2l)``) gives
    ``S_{d-1}^2 / 4 * int_0^E_max E^(d-2) u(sqrt E, sqrt E) F(E) dE``.
    The energy range is cut at :func:`energy_cutoff` unless ``e_max`` is given,
    and panels are split at both chemical potentials.
    """
    kernel = spec.kernel1
    if kernel is None:
        raise MissingKernel("shell_integral needs kernel1")
    d = spec.d
    top = energy_cutoff(spec, cfg) if e_max is None else float(e_max)
    top = min(top, kernel.support_max())
    points = [spec.res_I.mu, spec.res_II.mu, *kernel.breakpoints(), *_ladder(top)]

    def integrand(E):
        with np.errstate(divide="ignore", invalid="ignore"):
            w = E ** (d - 2) if d != 2 else np.ones_like(E)
        return w * kernel.diagonal(E) * np.asarray(F(E), dtype=float)

    value, err = integrate_1d(integrand, 0.0, top, cfg, points)
    scale = shell_weight(d)
    if with_error:
        return scale * value, scale * err
    return scale * value


def _graded_edges(lo, hi, features, grading=(0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)):
    """Breakpoints in [lo, hi] clustered around ``(center, width)`` features."""
    pts = {lo, hi}
    for center, width in features:
        if lo <= center <= hi:
            pts.add(center)
        if width > 0 and math.isfinite(width):
            for g in grading:
                for p in (center - g * width, center + g * width):
                    if lo < p < hi:
                        pts.add(p)
    return np.array(sorted(pts))


def _tensor_level(f, v_edges, F_candidates, e_max, n, inner_split=1):
    """One evaluation of the symmetric tensor rule at GL order ``n``."""
    x, w = gauss_legendre(n)
    a = v_edges[:-1, None]
    h = 0.5 * (v_edges[1:] - v_edges[:-1])[:, None]
    v = (a + h * (x + 1.0)).ravel()
    wv = (h * w).ravel()
    # E = v^2, dE = 2 v dv
    E = v**2
    wE = 2.0 * v * wv
    total = []
    m = len(E)
    for i in range(m):
        E1 = E[i]
        E2 = E
        S = E1 + E2
        upper = np.minimum(S, e_max)
        # F1 = S (1 - cos t) / 2 removes the sqrt endpoint behaviour at 0 and S
        theta_hi = np.arccos(np.clip(1.0 - 2.0 * upper / S, -1.0, 1.0))
        cand = np.concatenate(
            [np.zeros((m, 1)), theta_hi[:, None], F_candidates(S[:, None], upper[:, None])], axis=1
        )
        cand = np.sort(np.clip(cand, 0.0, theta_hi[:, None]), axis=1)
        step = (cand[:, 1:] - cand[:, :-1])[:, :, None] / inner_split
        ta = (cand[:, :-1, None] + step * np.arange(inner_split)).reshape(m, -1, 1)
        th = 0.5 * np.repeat(step, inner_split, axis=2).reshape(m, -1, 1)
        t = ta + th * (x + 1.0)
        F1 = 0.5 * S[:, None, None] * (1.0 - np.cos(t))
        jac = 0.5 * S[:, None, None] * np.sin(t) * th * w
        vals = f(np.full_like(F1, E1), E2[:, None, None], F1)
        inner = (vals * jac).sum(axis=(1, 2))
        total.append(wE[i] * math.fsum(wE * inner))
    return math.fsum(total)


def integrate_3d_simplex(
    f: Callable,
    E_max: float,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    features: Sequence[tuple] = (),
    max_levels: int = 3,
    with_error: bool = False,
):
    """Integrate ``f(E1, E2, F1)`` over ``E1, E2 in [0, E_max]``, ``0 <= F1 <= min(E1 + E2, E_max)``.

    The outer pair uses one shared graded partition for both axes (in the
    variable ``v = sqrt(E)``), so the rule is exactly symmetric under
    ``E1 <-> E2``.  The inner ``F1`` integral is done in the angle ``t`` with
    ``F1 = S (1 - cos t) / 2``, ``S = E1 + E2``; its breakpoints are closed
    under ``F1 -> S - F1``.  Together these make the discrete rule invariant
    under ``(E1, E2, F1) -> (E2, E1, S - F1)``.

    ``features`` is a list of ``(energy, width)`` pairs (e.g. chemical
    potentials with thermal widths ``1/beta``) around which panels are graded.
    Convergence is judged by comparing GL orders ``n`` and ``n - 5``; on
    failure every panel is bisected, up to ``max_levels`` times.
    """
    E_max = float(E_max)
    if E_max <= 0:
        return (0.0, 0.0) if with_error else 0.0
    feats = [(float(c), float(wd)) for c, wd in features if 0 <= c <= E_max]
    e_edges = _graded_edges(0.0, E_max, feats + [(0.0, 0.0)])
    v_edges = np.sqrt(e_edges)
    # always at least a few panels in v
    if len(v_edges) < 5:
        v_edges = np.linspace(0.0, math.sqrt(E_max), 5)

    offsets = []
    for c, wd in feats:
        offsets.append(c)
        if wd > 0:
            for g in (0.5, 1.0, 2.0, 4.0, 8.0, 16.0):
                offsets.extend((c - g * wd, c + g * wd))
    offsets = np.array(sorted(o for o in offsets if o > 0), dtype=float)

    def F_candidates(S, upper):
        if not len(offsets):
            return np.zeros(S.shape[:-1] + (0,))
        # breakpoints at F1 = c and at F1 = S - c (mirror)
        Fs = np.concatenate([np.broadcast_to(offsets, S.shape[:-1] + offsets.shape), S - offsets], axis=-1)
        Fs = np.clip(Fs, 0.0, upper)
        return np.arccos(np.clip(1.0 - 2.0 * Fs / S, -1.0, 1.0))

    n_hi = cfg.rule_order
    n_lo = max(2, n_hi - 5)
    value = err = None
    for level in range(max_levels + 1):
        hi_val = _tensor_level(f, v_edges, F_candidates, E_max, n_hi, 2**level)
        lo_val = _tensor_level(f, v_edges, F_candidates, E_max, n_lo, 2**level)
        value = hi_val
        err = abs(hi_val - lo_val)
        if err <= cfg.rel_tol * abs(value) + cfg.abs_tol:
            break
        mids = 0.5 * (v_edges[:-1] + v_edges[1:])
        v_edges = np.sort(np.concatenate([v_edges, mids]))
    else:
        raise NonConvergent(
            f"integrate_3d_simplex: error estimate {err:.3e} for value {value:.6e} "
            f"after {max_levels} refinements",
            value=value,
            error_estimate=err,
        )
    return (value, err) if with_error else value
