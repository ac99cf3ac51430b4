"""Convergence certificate for the Dyson series of the Møller endomorphism."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionTooLow
from ..quadrature import QuadratureConfig, integrate_1d
from .norms import InteractionNorm


def time_decay_constant(d: int) -> float:
    """``int_R (1 ^ 4 pi/|t|)^(d/2) dt = 8 pi d / (d - 2)`` for ``d >= 3``."""
    if d <= 2:
        raise DimensionTooLow(f"the time integral diverges for d = {d} <= 2")
    return 8.0 * math.pi * d / (d - 2)


def time_decay_quadrature(d: int, cfg: QuadratureConfig | None = None) -> float:
    """The same integral by quadrature.

    The core ``|t| <= 4 pi`` is integrated directly; the tail is mapped by
    ``t = 4 pi e^s`` onto an exponentially decaying integrand and cut where
    it falls below ``1e-18``.
    """
    if d <= 2:
        raise DimensionTooLow(f"the time integral diverges for d = {d} <= 2")
    cfg = cfg or QuadratureConfig(rel_tol=1e-14, abs_tol=0.0)
    c = 4.0 * math.pi
    core, _ = integrate_1d(lambda t: np.minimum(1.0, c / np.maximum(t, 1e-300)) ** (d / 2), 0.0, c, cfg)
    rate = d / 2 - 1
    s_max = math.log(1e18) / rate
    tail, _ = integrate_1d(
        lambda s: c * np.exp(s) * np.minimum(1.0, np.exp(-s)) ** (d / 2), 0.0, s_max, cfg
    )
    return 2.0 * (core + tail)


def theorem_bound(m: int, norm: InteractionNorm | float, a_norm: float = 1.0, d: int | None = None) -> float:
    """Bound ``(1/m) C^m ||a||' (||W||')^m`` on the m-th Dyson term, ``C = 8 pi d/(d-2)``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if isinstance(norm, InteractionNorm):
        d = norm.d
        w = norm.total
    else:
        w = float(norm)
        if d is None:
            raise ValueError("d is required with a bare norm value")
    C = time_decay_constant(d)
    return (C * w) ** m * a_norm / m


@dataclass(frozen=True)
class Certificate:
    x: float
    d: int
    norm: float

    @property
    def converges(self) -> bool:
        return self.x < 1.0

    def tail_bound(self, m0: int):
        """``sum_{m > m0} x^m / m = -ln(1 - x) - sum_{m <= m0} x^m / m``; ``None`` if ``x >= 1``."""
        if not self.converges:
            return None
        x = self.x
        if x == 0:
            return 0.0
        head = math.fsum(x**m / m for m in range(1, m0 + 1))
        return -math.log1p(-x) - head

    def term_bounds(self, m_max: int = 10, a_norm: float = 1.0):
        return [(m, theorem_bound(m, self.norm, a_norm, self.d)) for m in range(1, m_max + 1)]

    def to_record(self, m_max: int = 10, m0: int = 3) -> dict:
        return {
            "d": self.d,
            "norm": self.norm,
            "x": self.x,
            "converges": self.converges,
            "term_bounds": [{"m": m, "bound": b} for m, b in self.term_bounds(m_max)],
            "tail_m0": m0,
            "tail": self.tail_bound(m0),
        }

    def to_json(self, m_max: int = 10, m0: int = 3) -> str:
        return json.dumps(self.to_record(m_max, m0), indent=2, sort_keys=True)


def certify(norm: InteractionNorm) -> Certificate:
    """``x = (8 pi d/(d-2)) ||W||'``; the Møller limits exist when ``x < 1``."""
    C = time_decay_constant(norm.d)
    total = norm.total
    return Certificate(C * total, norm.d, total)
