"""Hermite functions, their L1 norms and free-propagator overlaps."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermite

from ..errors import BoundViolated
from ..quadrature import QuadratureConfig, gauss_legendre, integrate_1d

PI_QUARTER = math.pi ** (-0.25)


def hermite_table(q_max: int, x, gaussian: bool = True):
    """Rows ``phi_0(x) .. phi_qmax(x)`` from the normalized three-term recurrence.

    ``phi_{q+1} = sqrt(2/(q+1)) x phi_q - sqrt(q/(q+1)) phi_{q-1}``.  With
    ``gaussian=False`` the factor ``exp(-x^2/2)`` is left out, which gives
    the polynomial parts used by Gauss-Hermite rules.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((q_max + 1,) + x.shape)
    out[0] = PI_QUARTER * (np.exp(-0.5 * x**2) if gaussian else np.ones_like(x))
    if q_max >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for q in range(1, q_max):
        out[q + 1] = math.sqrt(2.0 / (q + 1)) * x * out[q] - math.sqrt(q / (q + 1)) * out[q - 1]
    return out


def hermite_eval(q: int, x):
    """Normalized Hermite function ``phi_q(x)``."""
    if q < 0:
        raise ValueError("q must be >= 0")
    out = hermite_table(q, x)[q]
    return out if out.ndim else float(out)


@lru_cache(maxsize=64)
def scaled_gauss_hermite(n: int):
    """Nodes ``x_i`` and weights ``w_i exp(x_i^2)`` of the n-point Gauss-Hermite rule.

    With these, ``sum_i lam_i f(x_i)`` approximates ``int f(x) dx``; the rule
    is exact for ``f = polynomial * exp(-x^2)`` of degree ``< 2n``.  The
    scaled weights ``1 / (n phi_{n-1}(x_i)^2)`` avoid forming ``exp(x^2)``.
    """
    x, _ = roots_hermite(n)
    lam = 1.0 / (n * hermite_table(n - 1, x)[n - 1] ** 2)
    x.setflags(write=False)
    lam.setflags(write=False)
    return x, lam


def l1_norm(q: int, cfg: QuadratureConfig | None = None) -> float:
    """``int |phi_q(x)| dx``, with panels split at the zeros of ``phi_q``."""
    cfg = cfg or QuadratureConfig(rel_tol=1e-13, abs_tol=1e-15)
    zeros = roots_hermite(q)[0] if q > 0 else np.array([])
    L = math.sqrt(2 * q + 1) + 12.0
    value, _ = integrate_1d(lambda x: np.abs(hermite_eval(q, x)), -L, L, cfg, zeros)
    return value


def l1_bound(q: int) -> float:
    return math.sqrt(4.0 * math.pi * (q + 1))


def l1_norm_bound_check(q_max: int):
    """Rows ``(q, ||phi_q||_1, sqrt(4 pi (q+1)))`` for ``q <= q_max``.

    Raises :class:`BoundViolated` if any norm exceeds its bound.
    """
    rows = []
    for q in range(q_max + 1):
        norm = l1_norm(q)
        bound = l1_bound(q)
        if norm > bound:
            raise BoundViolated(f"||phi_{q}||_1 = {norm} exceeds {bound}")
        rows.append((q, norm, bound))
    return rows


def _translation_correlation(p: int, q: int, u):
    """``C(u) = int phi_q(x) phi_p(x - u) dx``, exact by Gauss-Hermite in ``s = x - u/2``."""
    u = np.asarray(u, dtype=float)
    n = (p + q) // 2 + 2
    s, lam = scaled_gauss_hermite(n)
    # phi_q(s + u/2) phi_p(s - u/2) = e^{-s^2} e^{-u^2/4} * poly
    hq = hermite_table(q, s[:, None] + 0.5 * u[None, :], gaussian=False)[q]
    hp = hermite_table(p, s[:, None] - 0.5 * u[None, :], gaussian=False)[p]
    # lam already carries e^{s^2}; the true GH weight is lam e^{-s^2}
    w = lam * np.exp(-(s**2))
    return np.exp(-0.25 * u**2) * (w[:, None] * hq * hp).sum(axis=0)


def _chirp_integral(alpha: float, G, half_width: float, n: int = 20) -> complex:
    """``int_{-L}^{L} exp(i alpha s^2) G(s) ds`` with panels sized to the local phase.

    The panel containing ``s`` has width at most ``pi / (|alpha| |s|)``,
    i.e. at most half an oscillation, and at most 0.5 overall.
    """
    edges = [0.0]
    while edges[-1] < half_width:
        s = edges[-1]
        h = 0.5 if alpha == 0 else min(0.5, math.pi / (abs(alpha) * max(s, 1e-3)))
        edges.append(min(s + h, half_width))
    edges = np.array(edges)
    x, w = gauss_legendre(n)
    a = edges[:-1, None]
    h = 0.5 * (edges[1:] - edges[:-1])[:, None]
    nodes = (a + h * (x + 1.0)).ravel()
    weights = (h * w).ravel()
    nodes = np.concatenate([-nodes[::-1], nodes])
    weights = np.concatenate([weights[::-1], weights])
    vals = np.exp(1j * alpha * nodes**2) * G(nodes)
    return complex(np.sum(weights * vals))


def propagator_overlap(p: int, q: int, t: float, route: str = "auto") -> complex:
    """``(e^{it Delta} phi_p, phi_q)``, inner product antilinear in the first slot.

    ``route="position"`` integrates the free kernel
    ``sqrt(i/(4 pi t)) int int exp(-i (x-y)^2/(4t)) phi_p(y) phi_q(x)``
    after reducing to the relative coordinate ``u = x - y``.
    ``route="momentum"`` uses that the Fourier transform of ``phi_p`` is
    ``(-i)^p phi_p``, giving ``i^p (-i)^q int exp(i t k^2) phi_p phi_q dk``.
    ``"auto"`` picks whichever has fewer oscillations.
    """
    if p < 0 or q < 0:
        raise ValueError("indices must be >= 0")
    if t == 0:
        return complex(p == q)
    qm = max(p, q)
    k_range = math.sqrt(2 * qm + 1) + 7.0
    u_range = 2.0 * (math.sqrt(2 * qm + 1) + 7.0)
    if route == "auto":
        route = "momentum" if abs(t) * k_range**2 < u_range**2 / (4 * abs(t)) else "position"
    if route == "momentum":
        G = lambda k: hermite_eval(p, k) * hermite_eval(q, k)  # noqa: E731
        phase = (1j) ** p * (-1j) ** q
        return phase * _chirp_integral(t, G, k_range)
    if route == "position":
        G = lambda u: _translation_correlation(p, q, u)  # noqa: E731
        pref = np.sqrt(1j / (4 * math.pi * t + 0j))
        return complex(pref * _chirp_integral(-1.0 / (4 * t), G, u_range))
    raise ValueError(f"unknown route {route!r}")


def overlap_bound(p: int, q: int, t: float) -> float:
    """Right side ``||phi_p||_1 ||phi_q||_1 / sqrt(4 pi |t|)`` of the dispersive estimate."""
    return l1_norm(p) * l1_norm(q) / math.sqrt(4 * math.pi * abs(t))


def overlap_bound_check(ps, qs, ts, route="auto"):
    """Rows ``(p, q, t, |overlap|, bound)``; raises :class:`BoundViolated` on failure."""
    rows = []
    for t in ts:
        for p in ps:
            for q in qs:
                val = abs(propagator_overlap(p, q, t, route))
                bound = overlap_bound(p, q, t)
                if val > bound or val > 1.0 + 1e-8:
                    raise BoundViolated(f"|(e^(it D) phi_{p}, phi_{q})| = {val} at t={t}, bound {bound}")
                rows.append((p, q, t, val, bound))
    return rows
