"""Relaxation kernels, elastic moduli and fading-memory weights.

Conventions
-----------
A scalar kernel is a finite exponential sum

    K(tau) = sum_i a_i exp(-lambda_i tau),   tau >= 0,

and vanishes for negative lags. For a Prony (Maxwell-Wiechert) kernel the
amplitude of mode ``i`` is ``a_i = C_i * lambda_i`` where ``C_i`` is the spring
stiffness of the Maxwell arm, so that the instantaneous modulus is
``C0 + sum_i C_i`` and the relaxation modulus is
``E(t) = C0 + sum_i C_i exp(-lambda_i t)``.

Isotropic materials are described by a bulk kernel ``L`` and a shear kernel
``M``, each an ordinary :class:`ScalarKernel` in the same convention, so the
instantaneous bulk and shear moduli are ``B = B0 + sum L_i`` and
``G = G0 + sum M_i`` with ``L_i``, ``M_i`` the arm stiffnesses.

Kernel values carry stress/time; every ratio normalized by the instantaneous
modulus is dimensionless. No unit system is enforced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Union

import numpy as np

from .errors import ConfigurationError, DomainError

if TYPE_CHECKING:  # pragma: no cover
    from .spectra import RelaxationMeasure

__all__ = [
    "PronyMode",
    "ScalarKernel",
    "IsotropicKernel",
    "ElasticModuli",
    "IsotropicModuli",
    "Weight",
    "ComplexModulus",
    "DecoupledLaw",
    "ScalarMaterial",
    "IsotropicMaterial",
    "eval_kernel",
    "relaxation_modulus",
    "complex_modulus",
    "kernel_operator_norm",
    "mode_decouple",
]

# relative tolerance for moduli/kernel consistency checks
_CONSISTENCY_RTOL = 1e-9

BULK_MULTIPLICITY = 1
SHEAR_MULTIPLICITY = 5


@dataclass(frozen=True)
class PronyMode:
    """One Maxwell arm: spring stiffness ``stiffness`` and rate ``rate = C/eta``."""

    stiffness: float
    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.stiffness) and self.stiffness > 0):
            raise DomainError(f"Prony stiffness must be finite and > 0, got {self.stiffness!r}")
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise DomainError(f"Prony rate must be finite and > 0, got {self.rate!r}")

    @property
    def viscosity(self) -> float:
        return self.stiffness / self.rate


@dataclass(frozen=True)
class ScalarKernel:
    """Relaxation kernel backed either by Prony modes or by a relaxation measure.

    Exactly one backing is used: a measure, when given, takes the place of the
    mode list (which must then be empty). An empty mode list with no measure
    is the zero kernel.
    """

    modes: tuple[PronyMode, ...] = ()
    measure: "RelaxationMeasure | None" = None

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.measure is not None and self.modes:
            raise ConfigurationError("a kernel is backed by Prony modes or by a measure, not both")

    @classmethod
    def prony(cls, pairs) -> "ScalarKernel":
        """Build from ``(stiffness, rate)`` pairs."""
        return cls(tuple(PronyMode(float(c), float(r)) for c, r in pairs))

    @classmethod
    def zero(cls) -> "ScalarKernel":
        return cls()

    @classmethod
    def from_measure(cls, measure: "RelaxationMeasure") -> "ScalarKernel":
        return cls(measure=measure)

    @cached_property
    def _terms(self) -> tuple[np.ndarray, np.ndarray]:
        if self.measure is not None:
            rates, amps = self.measure.exponential_terms()
            keep = amps != 0.0
            return np.asarray(rates[keep], float), np.asarray(amps[keep], float)
        rates = np.array([m.rate for m in self.modes], dtype=float)
        amps = np.array([m.stiffness * m.rate for m in self.modes], dtype=float)
        return rates, amps

    @property
    def rates(self) -> np.ndarray:
        """Decay rates of the exponential terms."""
        return self._terms[0]

    @property
    def amplitudes(self) -> np.ndarray:
        """Amplitudes ``a_i`` so that ``K(0) = sum a_i``."""
        return self._terms[1]

    @property
    def stiffnesses(self) -> np.ndarray:
        return self.amplitudes / self.rates

    @property
    def total_stiffness(self) -> float:
        """``integral_0^inf K`` = sum of arm stiffnesses = ``E(0) - E(inf)``."""
        return float(np.sum(self.stiffnesses))

    @property
    def is_zero(self) -> bool:
        return self.rates.size == 0

    @property
    def min_rate(self) -> float:
        return float(self.rates.min()) if self.rates.size else math.inf

    def __call__(self, tau):
        return eval_kernel(self, tau)

    def scaled(self, factor: float) -> "ScalarKernel":
        """Kernel multiplied by a positive factor."""
        if not factor > 0:
            raise DomainError("scale factor must be > 0")
        if self.measure is not None:
            return ScalarKernel(measure=self.measure.scaled(factor))
        return ScalarKernel(tuple(PronyMode(m.stiffness * factor, m.rate) for m in self.modes))


@dataclass(frozen=True)
class IsotropicKernel:
    """Bulk (``L``) and shear (``M``) relaxation kernels of an isotropic solid."""

    bulk: ScalarKernel
    shear: ScalarKernel
    incompressible: bool = False


@dataclass(frozen=True)
class ElasticModuli:
    """Equilibrium modulus ``C0`` and instantaneous modulus ``C = C0 + sum C_i``."""

    equilibrium: float
    instantaneous: float

    def __post_init__(self):
        if not (math.isfinite(self.equilibrium) and self.equilibrium > 0):
            raise DomainError(f"equilibrium modulus must be > 0, got {self.equilibrium!r}")
        if not (math.isfinite(self.instantaneous) and self.instantaneous >= self.equilibrium):
            raise DomainError(
                f"instantaneous modulus {self.instantaneous!r} must be >= equilibrium "
                f"modulus {self.equilibrium!r}"
            )

    @classmethod
    def for_kernel(cls, kernel: ScalarKernel, equilibrium: float) -> "ElasticModuli":
        return cls(float(equilibrium), float(equilibrium) + kernel.total_stiffness)

    def check(self, kernel: ScalarKernel) -> None:
        """Raise :class:`ConfigurationError` unless ``C - C0`` matches the kernel."""
        expected = self.equilibrium + kernel.total_stiffness
        if abs(expected - self.instantaneous) > _CONSISTENCY_RTOL * max(1.0, abs(expected)):
            raise ConfigurationError(
                f"moduli inconsistent with kernel: C0 + sum C_i = {expected!r} "
                f"but instantaneous modulus is {self.instantaneous!r}"
            )


@dataclass(frozen=True)
class IsotropicModuli:
    """Bulk and shear moduli; ``bulk`` is ``None`` for an incompressible solid."""

    bulk: ElasticModuli | None
    shear: ElasticModuli
    incompressible: bool = False

    def __post_init__(self):
        if self.bulk is None and not self.incompressible:
            raise ConfigurationError("compressible isotropic moduli need a bulk part")

    def check(self, kernel: IsotropicKernel) -> None:
        if kernel.incompressible != self.incompressible:
            raise ConfigurationError("kernel and moduli disagree on incompressibility")
        self.shear.check(kernel.shear)
        if not self.incompressible:
            self.bulk.check(kernel.bulk)


@dataclass(frozen=True)
class Weight:
    """Exponential fading-memory weight ``w(tau) = exp(-decay_rate * tau)``."""

    decay_rate: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.decay_rate) and self.decay_rate >= 0):
            raise DomainError(f"weight decay rate must be finite and >= 0, got {self.decay_rate!r}")

    def __call__(self, tau):
        return np.exp(-self.decay_rate * np.asarray(tau, dtype=float))

    def inverse(self, tau):
        return np.exp(self.decay_rate * np.asarray(tau, dtype=float))

    @property
    def integrable(self) -> bool:
        return self.decay_rate > 0


@dataclass(frozen=True)
class ComplexModulus:
    omega: float
    storage: float
    loss: float

    @property
    def magnitude(self) -> float:
        return math.hypot(self.storage, self.loss)

    @property
    def loss_tangent(self) -> float:
        return self.loss / self.storage


@dataclass(frozen=True)
class DecoupledLaw:
    """One scalar hereditary law from the volumetric/deviatoric split."""

    name: str
    kernel: ScalarKernel
    moduli: ElasticModuli
    multiplicity: int


@dataclass(frozen=True)
class ScalarMaterial:
    kernel: ScalarKernel
    moduli: ElasticModuli

    def __post_init__(self):
        self.moduli.check(self.kernel)

    @classmethod
    def from_prony(cls, equilibrium: float, pairs) -> "ScalarMaterial":
        kernel = ScalarKernel.prony(pairs)
        return cls(kernel, ElasticModuli.for_kernel(kernel, equilibrium))

    @property
    def modulus(self) -> float:
        return self.moduli.instantaneous

    def laws(self) -> list[DecoupledLaw]:
        return [DecoupledLaw("scalar", self.kernel, self.moduli, 1)]


@dataclass(frozen=True)
class IsotropicMaterial:
    kernel: IsotropicKernel
    moduli: IsotropicModuli

    def __post_init__(self):
        self.moduli.check(self.kernel)

    def laws(self) -> list[DecoupledLaw]:
        return mode_decouple(self.kernel, self.moduli)


Material = Union[ScalarMaterial, IsotropicMaterial]


def eval_kernel(k: ScalarKernel, tau):
    """Kernel value ``K(tau)``; exactly zero for ``tau < 0``.

    Accepts scalars or arrays and returns the same shape.
    """
    t = np.asarray(tau, dtype=float)
    rates, amps = k.rates, k.amplitudes
    if rates.size == 0:
        out = np.zeros_like(t)
    else:
        tc = np.maximum(t, 0.0)
        out = np.exp(-np.multiply.outer(tc, rates)) @ amps
        out = np.where(t >= 0, out, 0.0)
    return float(out) if out.ndim == 0 else out


def relaxation_modulus(k: ScalarKernel, C0: float, t):
    """``E(t) = C0 + sum C_i exp(-lambda_i t)``; ``E(0)`` is the instantaneous modulus."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0) or np.any(np.isnan(tt)):
        raise DomainError("relaxation modulus is defined for t >= 0 only")
    if k.is_zero:
        out = np.full_like(tt, float(C0))
    else:
        with np.errstate(over="ignore"):
            decay = np.exp(-np.multiply.outer(tt, k.rates))
        out = C0 + decay @ k.stiffnesses
    return float(out) if out.ndim == 0 else out


def complex_modulus(k: ScalarKernel, C0: float, omega: float) -> ComplexModulus:
    """Storage and loss moduli at angular frequency ``omega`` (``inf`` allowed)."""
    omega = float(omega)
    if not omega >= 0:
        raise DomainError(f"frequency must be >= 0, got {omega!r}")
    c = k.stiffnesses
    lam = k.rates
    if math.isinf(omega):
        return ComplexModulus(omega, float(C0 + c.sum()), 0.0)
    denom = lam**2 + omega**2
    storage = C0 + float(np.sum(c * omega**2 / denom))
    loss = float(np.sum(c * omega * lam / denom))
    return ComplexModulus(omega, storage, loss)


def kernel_operator_norm(k, m, tau):
    """Operator norm of ``K(tau)`` in the metric induced by the elastic moduli.

    For an isotropic kernel this is ``max(L/B, M/G)`` (``M/G`` when
    incompressible); for a scalar kernel it is ``K/C``.
    """
    if isinstance(k, ScalarKernel):
        if not isinstance(m, ElasticModuli):
            raise ConfigurationError("scalar kernel needs scalar ElasticModuli")
        m.check(k)
        return eval_kernel(k, tau) / m.instantaneous
    if not isinstance(m, IsotropicModuli):
        raise ConfigurationError("isotropic kernel needs IsotropicModuli")
    m.check(k)
    shear = eval_kernel(k.shear, tau) / m.shear.instantaneous
    if k.incompressible:
        return shear
    bulk = eval_kernel(k.bulk, tau) / m.bulk.instantaneous
    out = np.maximum(bulk, shear)
    return float(out) if np.ndim(out) == 0 else out


def mode_decouple(k: IsotropicKernel, m: IsotropicModuli) -> list[DecoupledLaw]:
    """Split an isotropic law into volumetric (x1) and deviatoric (x5) scalar laws."""
    m.check(k)
    laws = []
    if not k.incompressible:
        laws.append(DecoupledLaw("volumetric", k.bulk, m.bulk, BULK_MULTIPLICITY))
    laws.append(DecoupledLaw("deviatoric", k.shear, m.shear, SHEAR_MULTIPLICITY))
    return laws
