"""Fading-memory, contractivity and Hilbert-Schmidt certificates.

Given a kernel, its elastic moduli and an exponential weight, the contractivity
constant

    gamma = integral_0^inf ||K(tau)|| / w(tau) dtau

controls well-posedness of the stress-control problem (unique solution with
``||eps|| <= ||sigma|| / (1 - gamma)`` whenever ``gamma < 1``), and the
Hilbert-Schmidt constant

    (integral_0^inf ||K(tau)||^2 / w(tau) dtau)^(1/2)

bounds the Hilbert-Schmidt norm of the history operator on a horizon ``T`` by
``hs * sqrt(T)``. Prony kernels with exponential weights admit closed forms;
the quadrature path evaluates the defining integrals directly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from ._quadrature import integrate_half_line
from .errors import DivergenceError, DomainError, InvalidWeightError, NotContractiveError
from .material import (
    ElasticModuli,
    IsotropicKernel,
    IsotropicModuli,
    ScalarKernel,
    Weight,
)

Method = Literal["auto", "closed-form", "quadrature"]

BISECTION_RTOL = 1e-10


@dataclass(frozen=True)
class Certificate:
    gamma: float
    contractive: bool
    hs_constant: float
    a_priori_factor: float | None
    weight: Weight
    method: str
    scope: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weight"] = {"lambda0": self.weight.decay_rate}
        return d

    def require_contractive(self) -> "Certificate":
        if not self.contractive:
            raise NotContractiveError(
                f"gamma = {self.gamma:.17g} >= 1: the stress-control problem is not certified",
                certificate=self,
            )
        return self


def _parts(k, m):
    """``(name, kernel, instantaneous modulus)`` for each active law of the material."""
    if isinstance(k, ScalarKernel):
        if not isinstance(m, ElasticModuli):
            raise DomainError("scalar kernel needs scalar ElasticModuli")
        m.check(k)
        return [("scalar", k, m.instantaneous)]
    if isinstance(k, IsotropicKernel):
        if not isinstance(m, IsotropicModuli):
            raise DomainError("isotropic kernel needs IsotropicModuli")
        m.check(k)
        parts = [("shear", k.shear, m.shear.instantaneous)]
        if not k.incompressible:
            parts.insert(0, ("bulk", k.bulk, m.bulk.instantaneous))
        return parts
    raise TypeError(f"unsupported kernel type {type(k).__name__}")


def _check_rates(parts, lam0: float) -> None:
    for name, kern, _ in parts:
        bad = np.nonzero(kern.rates <= lam0)[0]
        if bad.size:
            i = int(bad[np.argmin(kern.rates[bad])])
            raise DivergenceError(
                f"{name} mode {i} has rate {float(kern.rates[i])!r} <= lambda0 = {lam0!r}; "
                "the weighted kernel integral diverges"
            )


def _check_pair_rates(parts, lam0: float) -> None:
    for name, kern, _ in parts:
        if kern.is_zero:
            continue
        i = int(np.argmin(kern.rates))
        if 2 * kern.rates[i] <= lam0:
            raise DivergenceError(
                f"{name} mode pair ({i}, {i}) has rate sum {float(2 * kern.rates[i])!r} <= "
                f"lambda0 = {lam0!r}; the Hilbert-Schmidt integral diverges"
            )


def _norm_terms(parts, lam0: float):
    """Dominating exponential sum of ``||K(tau)|| / w(tau)``."""
    coeffs = np.concatenate([kern.amplitudes / c for _, kern, c in parts] or [np.zeros(0)])
    decays = np.concatenate([kern.rates - lam0 for _, kern, _ in parts] or [np.zeros(0)])
    return coeffs, decays


def _pointwise_norm(parts, lam0: float, squared: bool):
    """``||K(tau)||^p / w(tau)`` evaluated without forming the growing weight."""
    def f(tau):
        best = 0.0
        for _, kern, c in parts:
            if squared:
                # exp(-(l_i + l_j - lam0) tau) stays bounded on the domain
                e = kern.amplitudes * np.exp(-(kern.rates - 0.5 * lam0) * tau)
                val = float(np.sum(e)) ** 2 / c**2
            else:
                val = float(np.sum(kern.amplitudes * np.exp(-(kern.rates - lam0) * tau))) / c
            best = max(best, val)
        return best
    return f


def _resolve_method(parts, k, method: Method) -> str:
    closed_ok = len(parts) == 1
    if method == "auto":
        return "closed-form" if closed_ok else "quadrature"
    if method == "closed-form" and not closed_ok:
        raise DomainError("no closed form for a compressible isotropic kernel; use quadrature")
    if method not in ("closed-form", "quadrature"):
        raise DomainError(f"unknown method {method!r}")
    return method


def gamma(k, m, w: Weight, method: Method = "auto") -> float:
    """Contractivity constant ``integral ||K|| / w`` of a scalar or isotropic kernel."""
    parts = _parts(k, m)
    lam0 = w.decay_rate
    _check_rates(parts, lam0)
    how = _resolve_method(parts, k, method)
    if how == "closed-form":
        _, kern, c = parts[0]
        return float(np.sum(kern.amplitudes / (kern.rates - lam0))) / c
    coeffs, decays = _norm_terms(parts, lam0)
    return integrate_half_line(_pointwise_norm(parts, lam0, False), coeffs, decays).value


def hs_constant(k, m, w: Weight, method: Method = "auto") -> float:
    """Hilbert-Schmidt constant ``(integral ||K||^2 / w)^(1/2)``."""
    parts = _parts(k, m)
    lam0 = w.decay_rate
    _check_pair_rates(parts, lam0)
    how = _resolve_method(parts, k, method)
    if how == "closed-form":
        _, kern, c = parts[0]
        a, r = kern.amplitudes, kern.rates
        s = np.sum(np.outer(a, a) / (r[:, None] + r[None, :] - lam0))
        return math.sqrt(max(float(s), 0.0)) / c
    coeffs, decays = [], []
    for _, kern, c in parts:
        a = kern.amplitudes / c
        coeffs.append(np.outer(a, a).ravel())
        decays.append((kern.rates[:, None] + kern.rates[None, :] - lam0).ravel())
    res = integrate_half_line(
        _pointwise_norm(parts, lam0, True), np.concatenate(coeffs), np.concatenate(decays)
    )
    return math.sqrt(max(res.value, 0.0))


def max_decay_rate(k, m, method: Method = "auto") -> float:
    """Supremum of the weight decay rates keeping ``gamma < 1``.

    A kernel with no modes imposes no restriction and yields ``inf``.
    """
    parts = _parts(k, m)
    edge = min(kern.min_rate for _, kern, _ in parts)
    g0 = gamma(k, m, Weight(0.0), method)
    if g0 >= 1.0:
        raise NotContractiveError(f"gamma = {g0!r} >= 1 already for a constant weight")
    if math.isinf(edge) or g0 == 0.0:
        return edge
    lo, hi = 0.0, edge
    while hi - lo > BISECTION_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if gamma(k, m, Weight(mid), method) < 1.0:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class SemigroupCheck:
    passed: bool
    worst_violation: float
    worst_pair: tuple[float, float] | None


def check_semigroup(tau, w, tol: float = 1e-12) -> SemigroupCheck:
    """Check ``w(s) >= w(s - t) w(t)`` over all grid pairs ``0 <= t <= s``.

    ``w(s - t)`` is linearly interpolated when ``s - t`` is not a grid node.
    """
    tau = np.asarray(tau, dtype=float)
    w = np.asarray(w, dtype=float)
    if tau.ndim != 1 or tau.shape != w.shape or tau.size < 2:
        raise InvalidWeightError("weight samples must be two matching 1-d arrays")
    if tau[0] != 0.0 or np.any(np.diff(tau) <= 0):
        raise InvalidWeightError("sample grid must start at 0 and increase strictly")
    if abs(w[0] - 1.0) > 1e-12:
        raise InvalidWeightError(f"weight must satisfy w(0) = 1, got {w[0]!r}")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise InvalidWeightError("weight must be positive")
    if np.any(np.diff(w) > 0):
        raise InvalidWeightError("weight must be non-increasing")

    s = tau[:, None]
    t = tau[None, :]
    valid = t <= s
    lag = np.where(valid, s - t, 0.0)
    prod = np.interp(lag, tau, w) * w[None, :]
    excess = prod - w[:, None]
    # equality up to rounding (the exponential family) is not a violation
    excess = np.where(np.abs(excess) <= 8 * np.finfo(float).eps * w[:, None], 0.0, excess)
    viol = np.where(valid, excess, -np.inf)
    idx = np.unravel_index(np.argmax(viol), viol.shape)
    worst = float(max(viol[idx], 0.0))
    pair = (float(tau[idx[0]]), float(tau[idx[1]])) if worst > 0 else None
    return SemigroupCheck(worst <= tol, worst, pair)


def certify(k, m, w: Weight, method: Method = "auto") -> Certificate:
    """Collect gamma, the Hilbert-Schmidt constant and the a-priori factor."""
    parts = _parts(k, m)
    how = _resolve_method(parts, k, method)
    g = gamma(k, m, w, how)
    hs = hs_constant(k, m, w, how)
    contractive = g < 1.0
    return Certificate(
        gamma=g,
        contractive=contractive,
        hs_constant=hs,
        a_priori_factor=1.0 / (1.0 - g) if contractive else None,
        weight=w,
        method=how,
        # a constant weight is not integrable: only finite-horizon statements hold
        scope="half-line" if w.integrable else "finite-horizon",
    )
