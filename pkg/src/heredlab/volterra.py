"""Local stress-control problem ``sigma = C (I - P) eps`` on a causal time grid.

Strain histories vanish before ``t_0 = 0`` and are reconstructed piecewise
linearly between nodes. Each exponential term of the kernel carries an
internal variable

    h_i(t) = integral_0^t lambda_i exp(-lambda_i (t - s)) eps(s) ds,

which is exactly the dashpot strain of the corresponding Maxwell arm. Over a
step of length ``dt`` it obeys the exact update

    h_i <- exp(-x) h_i + b(x) eps_j + a(x) eps_{j+1},    x = lambda_i dt,

so that ``P eps = (1/C) sum_i C_i h_i`` is exact for piecewise-linear strain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, NonConvergenceError, NotContractiveError
from .material import ElasticModuli, ScalarKernel, Weight

Kind = Literal["strain", "stress"]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200

_SERIES_CUTOFF = 1e-2


@dataclass(frozen=True, eq=False)
class TimeGrid:
    nodes: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise DomainError("a time grid needs at least two nodes")
        if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
            raise DomainError("time grid nodes must be finite and strictly increasing")
        t.flags.writeable = False
        object.__setattr__(self, "nodes", t)

    @classmethod
    def uniform(cls, horizon: float, steps: int, start: float = 0.0) -> "TimeGrid":
        if steps < 1 or not horizon > start:
            raise DomainError("uniform grid needs steps >= 1 and horizon > start")
        return cls(np.linspace(start, horizon, steps + 1))

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def is_uniform(self) -> bool:
        dt = self.steps
        return bool(np.all(np.abs(dt - dt[0]) <= 1e-12 * dt[0]))

    def __len__(self) -> int:
        return self.nodes.size


@dataclass(frozen=True, eq=False)
class Evolution:
    grid: TimeGrid
    values: np.ndarray
    kind: Kind

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise DomainError(
                f"evolution has {v.size} values for a grid of {len(self.grid)} nodes"
            )
        if not np.all(np.isfinite(v)):
            raise DomainError("evolution values must be finite")
        if self.kind not in ("strain", "stress"):
            raise DomainError(f"unknown evolution kind {self.kind!r}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    @classmethod
    def from_function(cls, grid: TimeGrid, f, kind: Kind) -> "Evolution":
        return cls(grid, f(grid.nodes), kind)

    def with_values(self, values, kind: Kind | None = None) -> "Evolution":
        return Evolution(self.grid, values, kind or self.kind)


@dataclass
class SolveReport:
    solution: Evolution
    iterations: int
    residuals: list[float]
    gamma_used: float
    bound_check: bool
    converged: bool = True
    weight: Weight = field(default_factory=Weight)
    strain_norm: float = float("nan")
    stress_norm: float = float("nan")

    @property
    def ratios(self) -> list[float]:
        r = self.residuals
        return [r[i] / r[i - 1] for i in range(1, len(r)) if r[i - 1] > 0]

    @property
    def contraction_ratio(self) -> float:
        """Largest observed ratio of successive update norms (0 if none)."""
        return max(self.ratios, default=0.0)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residuals": list(self.residuals),
            "gamma_used": self.gamma_used,
            "bound_check": self.bound_check,
            "converged": self.converged,
            "contraction_ratio": self.contraction_ratio,
            "lambda0": self.weight.decay_rate,
            "strain_norm": self.strain_norm,
            "stress_norm": self.stress_norm,
        }


def _step_coefficients(x: np.ndarray):
    """Return ``(exp(-x), b(x), a(x))`` of the exact piecewise-linear update.

    ``a = 1 - (1 - e^-x)/x`` weighs the end value, ``b = (1 - e^-x)/x - e^-x``
    the start value; ``a + b = 1 - e^-x``.
    """
    x = np.asarray(x, dtype=float)
    decay = np.exp(-x)
    one_minus = -np.expm1(-x)
    small = x < _SERIES_CUTOFF
    xs = np.where(small, x, 0.0)
    series = xs / 2 - xs**2 / 6 + xs**3 / 24 - xs**4 / 120 + xs**5 / 720 - xs**6 / 5040
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = 1.0 - one_minus / x
    a = np.where(small, series, direct)
    b = one_minus - a
    return decay, b, a


def _check_modulus(modulus: float) -> float:
    modulus = float(modulus)
    if not (math.isfinite(modulus) and modulus > 0):
        raise DomainError(f"instantaneous modulus must be > 0, got {modulus!r}")
    return modulus


def _internal_variables(k: ScalarKernel, grid: TimeGrid, eps: np.ndarray) -> np.ndarray:
    """Dashpot strains ``h_i(t_j)``, shape ``(nodes, terms)``."""
    rates = k.rates
    n = eps.size
    if rates.size == 0:
        return np.zeros((n, 0))
    if grid.is_uniform:
        dt = float(grid.steps[0])
        decay, b, a = _step_coefficients(rates * dt)
        out = np.empty((n, rates.size))
        for i in range(rates.size):
            # h_0 = 0 by zero pre-history; zi cancels the a*eps_0 term at j = 0
            out[:, i], _ = lfilter([a[i], b[i]], [1.0, -decay[i]], eps, zi=[-a[i] * eps[0]])
        return out
    out = np.zeros((n, rates.size))
    h = np.zeros(rates.size)
    for j, dt in enumerate(grid.steps):
        decay, b, a = _step_coefficients(rates * dt)
        h = decay * h + b * eps[j] + a * eps[j + 1]
        out[j + 1] = h
    return out


def apply_P(k: ScalarKernel, modulus: float, strain: Evolution) -> Evolution:
    """Plastic strain ``(P eps)(t_j) = (1/C) integral_0^t_j K(t_j - s) eps(s) ds``."""
    if strain.kind != "strain":
        raise TypeError(f"apply_P needs a strain evolution, got {strain.kind}")
    modulus = _check_modulus(modulus)
    h = _internal_variables(k, strain.grid, strain.values)
    return strain.with_values(h @ k.stiffnesses / modulus, "strain")


def stress_from_strain(k: ScalarKernel, modulus: float, strain: Evolution) -> Evolution:
    """Stress ``C (eps - P eps)`` of a strain evolution."""
    plastic = apply_P(k, modulus, strain)
    return strain.with_values(modulus * (strain.values - plastic.values), "stress")


def solve_direct(k: ScalarKernel, modulus: float, stress: Evolution) -> Evolution:
    """Causal march solving ``C (I - P) eps = sigma`` node by node.

    Each step is the exact inverse of the forward update, so composing with
    :func:`stress_from_strain` reproduces the input to rounding.
    """
    if stress.kind != "stress":
        raise TypeError(f"solve_direct needs a stress evolution, got {stress.kind}")
    modulus = _check_modulus(modulus)
    sig = stress.values
    c = k.stiffnesses
    rates = k.rates
    eps = np.empty_like(sig)
    eps[0] = sig[0] / modulus
    if rates.size == 0:
        return stress.with_values(sig / modulus, "strain")
    h = np.zeros(rates.size)
    steps = stress.grid.steps
    uniform = stress.grid.is_uniform
    if uniform:
        decay, b, a = _step_coefficients(rates * steps[0])
        lead = modulus - c @ a
    for j, dt in enumerate(steps):
        if not uniform:
            decay, b, a = _step_coefficients(rates * dt)
            lead = modulus - c @ a
        carry = decay * h + b * eps[j]
        eps[j + 1] = (sig[j + 1] + c @ carry) / lead
        h = carry + a * eps[j + 1]
    return stress.with_values(eps, "strain")


def weighted_norm(e: Evolution, w: Weight, modulus: float) -> float:
    """``(integral_0^T m(e)^2 w(T - t) dt)^(1/2)`` by the trapezoid rule.

    ``m`` is the elastic metric: ``|eps| sqrt(C)`` for strain and
    ``|sigma| / sqrt(C)`` for stress.
    """
    modulus = _check_modulus(modulus)
    t = e.grid.nodes
    scale = modulus if e.kind == "strain" else 1.0 / modulus
    f = scale * e.values**2 * w(t[-1] - t)
    return math.sqrt(max(float(np.trapezoid(f, t)), 0.0))


def solve_picard(
    k: ScalarKernel,
    modulus: float,
    stress: Evolution,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    weight: Weight | None = None,
    certificate=None,
) -> SolveReport:
    """Fixed-point iteration ``eps <- sigma/C + P eps`` from ``eps = sigma/C``.

    Stops once the weighted norm of the update falls below ``tol`` times the
    norm of the starting iterate. The contraction constant comes from
    ``certificate`` or is computed for ``weight``; non-contractive problems
    are refused.
    """
    from .wellposed import certify

    if stress.kind != "stress":
        raise TypeError(f"solve_picard needs a stress evolution, got {stress.kind}")
    modulus = _check_modulus(modulus)
    w = weight or (certificate.weight if certificate is not None else Weight(0.0))
    if certificate is None:
        moduli = ElasticModuli(modulus - k.total_stiffness, modulus)
        certificate = certify(k, moduli, w)
    if not certificate.contractive:
        raise NotContractiveError(
            f"gamma = {certificate.gamma!r} >= 1: Picard iteration is not a contraction",
            certificate=certificate,
        )

    start = stress.values / modulus
    eps = stress.with_values(start, "strain")
    scale = weighted_norm(eps, w, modulus)
    residuals: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        new = eps.with_values(start + apply_P(k, modulus, eps).values)
        update = weighted_norm(new.with_values(new.values - eps.values), w, modulus)
        residuals.append(update)
        eps = new
        if update <= tol * scale:
            converged = True
            break

    strain_norm = weighted_norm(eps, w, modulus)
    stress_norm = weighted_norm(stress, w, modulus)
    report = SolveReport(
        solution=eps,
        iterations=iterations,
        residuals=residuals,
        gamma_used=certificate.gamma,
        bound_check=a_priori_holds(strain_norm, stress_norm, certificate.gamma),
        converged=converged,
        weight=w,
        strain_norm=strain_norm,
        stress_norm=stress_norm,
    )
    if not converged:
        raise NonConvergenceError(
            f"Picard iteration did not reach tol={tol!r} in {max_iter} iterations "
            f"(last update {residuals[-1]!r})",
            report=report,
        )
    return report


def a_priori_holds(strain_norm: float, stress_norm: float, gamma: float, rtol: float = 0.01) -> bool:
    """``||eps|| <= ||sigma|| / (1 - gamma)`` up to a relative grid tolerance."""
    if gamma >= 1:
        return False
    return strain_norm <= (1.0 + rtol) * stress_norm / (1.0 - gamma)


def cycle_work(k: ScalarKernel, modulus: float, strain: Evolution) -> float:
    """Work ``integral sigma d(eps)`` done along the piecewise-linear strain path.

    The integral is exact for the interpolated strain: within a step the
    internal variables follow their closed-form exponential response.
    """
    if strain.kind != "strain":
        raise TypeError("cycle_work needs a strain evolution")
    modulus = _check_modulus(modulus)
    eps = strain.values
    deps = np.diff(eps)
    elastic = modulus * float(np.sum(0.5 * (eps[:-1] + eps[1:]) * deps))
    if k.is_zero:
        return elastic
    h = _internal_variables(k, strain.grid, eps)
    rates, c = k.rates, k.stiffnesses
    dt = strain.grid.steps[:, None]
    x = rates[None, :] * dt
    _, _, a = _step_coefficients(x)
    one_minus = -np.expm1(-x)
    small = x < _SERIES_CUTOFF
    xs = np.where(small, x, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = np.where(
            small,
            xs / 6 - xs**2 / 24 + xs**3 / 120 - xs**4 / 720 + xs**5 / 5040,
            0.5 - a / x,
        )
        # integral of h over the step, per term
        h_int = (
            h[:-1] * dt * np.where(small, 1 - xs / 2 + xs**2 / 6 - xs**3 / 24 + xs**4 / 120, one_minus / x)
            + eps[:-1, None] * dt * a
            + deps[:, None] * dt * quad
        )
    slope = deps[:, None] / dt
    plastic = float(np.sum(c[None, :] * slope * h_int))
    return elastic - plastic
