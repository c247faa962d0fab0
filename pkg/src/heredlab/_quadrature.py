"""Half-line integration of exponentially decaying integrands.

The integrand ``f`` must be dominated by a known exponential sum
``|f(tau)| <= sum_j c_j exp(-r_j tau)`` with ``c_j >= 0`` and ``r_j > 0``; the
dominating sum gives an exact remainder bound for truncating the half line.
Panels are integrated with QUADPACK's adaptive Gauss-Kronrod rule.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

TAIL_RTOL = 1e-14
PANEL_RTOL = 1e-12


@dataclass(frozen=True)
class TailIntegral:
    value: float
    cutoff: float
    tail_bound: float
    abs_error: float


def tail_bound(coeffs: np.ndarray, decays: np.ndarray, tau: float) -> float:
    """``integral_tau^inf sum c_j exp(-r_j s) ds``."""
    if coeffs.size == 0:
        return 0.0
    return float(np.sum(coeffs * np.exp(-decays * tau) / decays))


def integrate_half_line(f, coeffs, decays, rtol: float = PANEL_RTOL) -> TailIntegral:
    """Integrate ``f`` over ``[0, inf)`` given its dominating exponential sum."""
    coeffs = np.asarray(coeffs, dtype=float)
    decays = np.asarray(decays, dtype=float)
    keep = coeffs > 0
    coeffs, decays = coeffs[keep], decays[keep]
    if coeffs.size == 0:
        return TailIntegral(0.0, 0.0, 0.0, 0.0)
    if np.any(decays <= 0):
        raise ValueError("dominating exponential sum must decay")

    # panel edges follow the time scales present, then extend geometrically
    fastest, slowest = decays.max(), decays.min()
    edges = [0.0]
    scale = 0.5 / fastest
    while scale < 1.0 / slowest:
        edges.append(scale)
        scale *= 2.0
    edges.append(1.0 / slowest)

    def panel(lo, hi):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            return integrate.quad(f, lo, hi, epsabs=1e-300, epsrel=rtol, limit=200)

    total = 0.0
    err = 0.0
    a = 0.0
    for b in edges[1:]:
        val, e = panel(a, b)
        total += val
        err += e
        a = b
    width = 1.0 / slowest
    while True:
        bound = tail_bound(coeffs, decays, a)
        if bound <= TAIL_RTOL * abs(total) or bound == 0.0:
            break
        b = a + width
        val, e = panel(a, b)
        total += val
        err += e
        a = b
        width *= 1.5
        if not math.isfinite(total):
            break
    return TailIntegral(total, a, bound, err)
