"""Relaxation measures, kernel distances, Prony atomization and bounding classes.

A relaxation measure ``nu`` on ``[lambda0, inf)`` generates the kernel

    K(tau) = integral (lambda - lambda0) exp(-lambda tau) dnu(lambda),

so a Dirac atom of mass ``m`` at ``lambda`` is a Prony mode with amplitude
``(lambda - lambda0) m``. Densities are tabulated on an equispaced grid,
interpolated linearly, and integrated with Gauss-Legendre panels between
tabulation points; kernels generated by measures are therefore always finite
exponential sums.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._quadrature import integrate_half_line
from .errors import ConfigurationError, DivergenceError, DomainError, InvalidMeasureError
from .history import HistoryGrid, SingularSystem, assemble_S
from .material import ScalarKernel, Weight, eval_kernel

# total Gauss-Legendre budget when integrating a tabulated density
DENSITY_NODES = 128
MIN_PANEL_ORDER = 16

MEMBERSHIP_TOL = 1e-10


@dataclass(frozen=True)
class TabulatedDensity:
    """Nonnegative density sampled at equispaced points of ``[lower, upper]``."""

    lower: float
    upper: float
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not (math.isfinite(self.lower) and math.isfinite(self.upper) and self.upper > self.lower):
            raise InvalidMeasureError(
                f"density support must be a finite interval with upper > lower, got [{self.lower!r}, {self.upper!r}]"
            )
        if len(self.values) < 2:
            raise InvalidMeasureError("a tabulated density needs at least two values")
        v = np.asarray(self.values)
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidMeasureError("density values must be finite and nonnegative")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, len(self.values))

    def __call__(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        inside = (lam >= self.lower) & (lam <= self.upper)
        return np.where(inside, np.interp(lam, self.nodes, self.values), 0.0)

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Composite Gauss-Legendre nodes and weights, one panel per tabulation cell."""
        edges = self.nodes
        panels = edges.size - 1
        order = min(max(MIN_PANEL_ORDER, math.ceil(DENSITY_NODES / panels)), DENSITY_NODES)
        x, wq = np.polynomial.legendre.leggauss(order)
        h = np.diff(edges)
        lam = (edges[:-1, None] + 0.5 * h[:, None] * (x[None, :] + 1)).ravel()
        wts = (0.5 * h[:, None] * wq[None, :]).ravel()
        return lam, wts

    @property
    def mass(self) -> float:
        return float(np.trapezoid(np.asarray(self.values), self.nodes))


@dataclass(frozen=True)
class RelaxationMeasure:
    """Cutoff rate ``lambda0``, Dirac atoms ``(lambda_j, m_j)`` and an optional density."""

    cutoff: float = 0.0
    atoms: tuple[tuple[float, float], ...] = ()
    density: TabulatedDensity | None = None

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple((float(l), float(m)) for l, m in self.atoms))
        if not (math.isfinite(self.cutoff) and self.cutoff >= 0):
            raise InvalidMeasureError(f"cutoff lambda0 must be finite and >= 0, got {self.cutoff!r}")
        problems = []
        for j, (lam, m) in enumerate(self.atoms):
            if not (math.isfinite(lam) and lam > self.cutoff):
                problems.append(f"atom {j} at lambda={lam!r} is not above the cutoff {self.cutoff!r}")
            if not (math.isfinite(m) and m >= 0):
                problems.append(f"atom {j} has mass {m!r}; masses must be finite and >= 0")
        if self.density is not None and self.density.lower < self.cutoff:
            problems.append(
                f"density support starts at {self.density.lower!r}, below the cutoff {self.cutoff!r}"
            )
        if problems:
            raise InvalidMeasureError("; ".join(problems))

    @classmethod
    def from_atoms(cls, atoms, cutoff: float = 0.0) -> "RelaxationMeasure":
        return cls(float(cutoff), tuple(atoms))

    @classmethod
    def uniform(cls, lower: float, upper: float, height: float = 1.0, cutoff: float = 0.0) -> "RelaxationMeasure":
        return cls(float(cutoff), (), TabulatedDensity(lower, upper, (height, height)))

    @classmethod
    def from_density(cls, fn, lower: float, upper: float, samples: int, cutoff: float = 0.0) -> "RelaxationMeasure":
        lam = np.linspace(lower, upper, samples)
        return cls(float(cutoff), (), TabulatedDensity(lower, upper, tuple(np.asarray(fn(lam), float))))

    @property
    def is_empty(self) -> bool:
        return not self.atoms and self.density is None

    @property
    def total_mass(self) -> float:
        atom_mass = sum(m for _, m in self.atoms)
        return atom_mass + (self.density.mass if self.density is not None else 0.0)

    @property
    def support(self) -> tuple[float, float] | None:
        """Smallest interval containing the atoms and density support."""
        pts = [lam for lam, m in self.atoms if m > 0]
        if self.density is not None:
            pts += [self.density.lower, self.density.upper]
        return (min(pts), max(pts)) if pts else None

    def exponential_terms(self) -> tuple[np.ndarray, np.ndarray]:
        """Rates and amplitudes of the generated kernel as one exponential sum."""
        lam0 = self.cutoff
        rates = [np.array([lam for lam, _ in self.atoms], dtype=float)]
        amps = [np.array([(lam - lam0) * m for lam, m in self.atoms], dtype=float)]
        if self.density is not None:
            lam, wts = self.density.quadrature()
            rates.append(lam)
            amps.append((lam - lam0) * self.density(lam) * wts)
        return np.concatenate(rates), np.concatenate(amps)

    def scaled(self, factor: float) -> "RelaxationMeasure":
        dens = None
        if self.density is not None:
            d = self.density
            dens = TabulatedDensity(d.lower, d.upper, tuple(factor * v for v in d.values))
        return RelaxationMeasure(self.cutoff, tuple((l, factor * m) for l, m in self.atoms), dens)

    def to_dict(self) -> dict:
        out: dict = {"lambda0": self.cutoff, "atoms": [[l, m] for l, m in self.atoms]}
        if self.density is not None:
            out["density"] = {
                "support": [self.density.lower, self.density.upper],
                "values": list(self.density.values),
            }
        return out


def admissibility_constant(nu: RelaxationMeasure, w: Weight) -> float:
    """``sup (lambda - lambda0) integral_0^inf exp(-lambda tau) / w(tau) dtau`` over the support.

    For an exponential weight with rate ``lw`` the integral is ``1/(lambda - lw)``;
    the supremum is ``inf`` when some support point does not exceed ``lw``.
    """
    supp = nu.support
    if supp is None:
        return 0.0
    lw, lam0 = w.decay_rate, nu.cutoff
    lo, hi = supp
    if lo <= lw:
        return math.inf
    # (l - lam0)/(l - lw) is monotone in l: its sup over [lo, hi] is at an end
    return max((lo - lam0) / (lo - lw), (hi - lam0) / (hi - lw))


def is_admissible(nu: RelaxationMeasure, w: Weight) -> bool:
    return math.isfinite(nu.total_mass) and math.isfinite(admissibility_constant(nu, w))


def kernel_from_measure(nu: RelaxationMeasure) -> ScalarKernel:
    """Measure-backed kernel; an empty measure gives the zero kernel."""
    if not isinstance(nu, RelaxationMeasure):
        raise TypeError("kernel_from_measure expects a RelaxationMeasure")
    if not math.isfinite(nu.total_mass):
        raise InvalidMeasureError("relaxation measure must have finite total mass")
    return ScalarKernel.from_measure(nu)


def kernel_distance(k1: ScalarKernel, k2: ScalarKernel, modulus: float, w: Weight) -> float:
    """``integral_0^inf |K1 - K2| / w dtau / C``.

    This bounds the operator distance between the two hereditary terms and
    hence the solution error of the stress-control problem.
    """
    if not modulus > 0:
        raise DomainError("instantaneous modulus must be > 0")
    lam0 = w.decay_rate
    rates = np.concatenate([k1.rates, k2.rates])
    amps = np.concatenate([k1.amplitudes, -k2.amplitudes])
    if rates.size == 0:
        return 0.0
    bad = rates[(rates <= lam0) & (amps != 0)]
    if bad.size:
        raise DivergenceError(
            f"kernel rate {float(bad.min())!r} <= lambda0 = {lam0!r}; the weighted distance diverges"
        )
    # merge coincident rates so identical kernels cancel exactly
    uniq, inv = np.unique(rates, return_inverse=True)
    net = np.zeros(uniq.size)
    np.add.at(net, inv, amps)
    keep = net != 0
    uniq, net = uniq[keep], net[keep]
    if uniq.size == 0:
        return 0.0
    decays = uniq - lam0

    def f(tau):
        return abs(float(np.sum(net * np.exp(-decays * tau))))

    return integrate_half_line(f, np.abs(net), decays).value / modulus


@dataclass(frozen=True)
class AtomizationReport:
    measure: RelaxationMeasure
    atoms: int
    distance: float
    tolerance: float
    converged: bool
    history: tuple[tuple[int, float], ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "atoms": self.atoms,
            "distance": self.distance,
            "tolerance": self.tolerance,
            "converged": self.converged,
            "history": [[n, d] for n, d in self.history],
            "measure": self.measure.to_dict(),
        }


def prony_from_density(nu: RelaxationMeasure, n: int) -> RelaxationMeasure:
    """Atomic measure with ``n`` atoms at Gauss-Legendre nodes of the density support.

    Masses are density values times quadrature weights; atoms of ``nu`` are
    carried over unchanged.
    """
    if nu.density is None:
        raise DomainError("prony_from_density needs a measure with a density")
    if n < 1:
        raise DomainError("atom count must be >= 1")
    d = nu.density
    if not d.lower > nu.cutoff:
        raise DomainError(
            f"density support must start strictly above the cutoff {nu.cutoff!r}, got {d.lower!r}"
        )
    x, wq = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (d.upper - d.lower)
    lam = d.lower + half * (x + 1)
    mass = d(lam) * wq * half
    atoms = nu.atoms + tuple((float(l), float(m)) for l, m in zip(lam, mass) if m > 0)
    return RelaxationMeasure(nu.cutoff, atoms)


def atomize(
    nu: RelaxationMeasure,
    tolerance: float,
    modulus: float,
    w: Weight | None = None,
    start: int = 4,
    max_atoms: int = 256,
) -> AtomizationReport:
    """Double the atom count until the kernel distance to ``nu`` is within ``tolerance``.

    If ``max_atoms`` is reached first, the best atomization found is returned
    with ``converged=False``.
    """
    if not tolerance > 0:
        raise DomainError("tolerance must be > 0")
    w = w or Weight(nu.cutoff)
    target = kernel_from_measure(nu)
    best = None
    history = []
    n = max(1, int(start))
    while True:
        candidate = prony_from_density(nu, n)
        dist = kernel_distance(kernel_from_measure(candidate), target, modulus, w)
        history.append((n, dist))
        if best is None or dist < best[1]:
            best = (candidate, dist, n)
        if dist <= tolerance or n >= max_atoms:
            break
        n = min(2 * n, max_atoms)
    measure, dist, n_best = best
    return AtomizationReport(measure, n_best, dist, tolerance, dist <= tolerance, tuple(history))


# --- bounding classes ------------------------------------------------------------------------


@dataclass(frozen=True)
class Membership:
    member: bool
    margins: np.ndarray
    candidate_norms: np.ndarray
    eigenvalues: np.ndarray

    @property
    def first_violation(self) -> int | None:
        bad = np.nonzero(self.margins < -MEMBERSHIP_TOL)[0]
        return int(bad[0]) + 1 if bad.size else None

    def to_dict(self) -> dict:
        return {
            "member": self.member,
            "first_violation": self.first_violation,
            "margins": self.margins.tolist(),
            "candidate_norms": self.candidate_norms.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }


def class_membership(candidate, bounding: SingularSystem, modulus: float | None = None) -> Membership:
    """Check ``(T phi_k, T phi_k)_w <= mu_k`` for every retained singular function.

    ``candidate`` is a :class:`ScalarKernel` or a discrete history operator.
    A kernel is assembled on the bounding grid; an operator on a different
    grid is reassembled there, with a warning.
    """
    grid = bounding.grid
    if modulus is None:
        if bounding.operator is None:
            raise DomainError("pass the instantaneous modulus for a bounding system without its operator")
        modulus = bounding.operator.modulus
    if isinstance(candidate, ScalarKernel):
        op = assemble_S(candidate, modulus, grid)
    else:
        op = candidate
        if not op.grid.same_as(grid):
            warnings.warn(
                "candidate operator lives on a different grid; reassembling on the bounding grid",
                RuntimeWarning,
                stacklevel=2,
            )
            op = assemble_S(op.kernel, op.modulus, grid)
    rank = bounding.rank
    phi = bounding.phi[:rank]
    images = phi @ op.matrix.T
    norms = grid.inner(images, images)
    mu = bounding.eigenvalues[:rank]
    margins = mu - norms
    return Membership(bool(np.all(margins >= -MEMBERSHIP_TOL)), margins, norms, mu)


def class_nwidth(bounding: SingularSystem, N: int) -> float:
    """N-width ``s_{N+1}`` of the class bounded by the operator; 0 beyond its rank."""
    if N < 0:
        raise DomainError("N must be >= 0")
    if N >= bounding.rank:
        return 0.0
    return float(bounding.values[N])


@dataclass(frozen=True)
class SLSClassIntegrals:
    k: int
    omega: float
    normalization: float
    A: float
    B: float
    inner: float
    inner_printed: float
    inner_direct: float | None

    @property
    def direct_rel_dev(self) -> float | None:
        if self.inner_direct is None:
            return None
        scale = max(abs(self.inner_direct), abs(self.inner))
        return abs(self.inner - self.inner_direct) / scale if scale else 0.0

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "omega": self.omega,
            "c_k": self.normalization,
            "A_k": self.A,
            "B_k": self.B,
            "inner": self.inner,
            "inner_printed_prefactor": self.inner_printed,
            "inner_direct": self.inner_direct,
            "rel_dev_direct": self.direct_rel_dev,
        }


def _gl_half_line(rate: float, panels_per_scale: int = 4, order: int = 32, depth: float = 46.0):
    """Gauss-Legendre nodes on ``[0, depth / rate]`` for integrands decaying like ``exp(-rate tau)``."""
    length = depth / rate
    count = int(math.ceil(panels_per_scale * depth))
    x, wq = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, length, count + 1)
    h = np.diff(edges)
    t = (edges[:-1, None] + 0.5 * h[:, None] * (x[None, :] + 1)).ravel()
    wts = (0.5 * h[:, None] * wq[None, :]).ravel()
    return t, wts


def sls_class_integrals(
    nu: RelaxationMeasure, C0: float, C1: float, lam1: float, T: float, k: int, direct: bool = True
) -> SLSClassIntegrals:
    """Spectral integrals ``A_k``, ``B_k`` and ``(T phi_k, T phi_k)_w`` against an SLS bound.

    The SLS functions are ``phi_k = c_k exp(-(lambda1 - lambda0) tau / 2) sin(omega_k tau)``
    with ``omega_k = k pi / T``, normalized on the half line under the weight
    ``exp(-lambda0 tau)``, and ``lambda0`` is the cutoff of ``nu``. Then
    ``T phi_k = (c_k / C) exp(-(lambda1 - lambda0) tau / 2) (A_k cos + B_k sin)`` and

        (T phi_k, T phi_k)_w = (c_k / C)^2 [2 w^2 (A^2 + B^2) + A^2 l1^2 + 2 A B l1 w]
                               / (l1 (l1^2 + 4 w^2)).

    ``inner_printed`` carries the prefactor ``c_k^2 / C`` instead of
    ``(c_k / C)^2``. With ``direct=True`` the inner product is also computed by
    applying the candidate kernel to sampled ``phi_k`` with Gauss-Legendre
    quadrature in both variables.
    """
    lam0 = nu.cutoff
    if not (C0 > 0 and C1 > 0 and lam1 > 0 and T > 0):
        raise DomainError("SLS bound needs C0, C1, lambda1, T > 0")
    if not lam0 < lam1:
        raise DomainError("SLS class integrals need lambda0 < lambda1")
    if k < 1:
        raise DomainError("k starts at 1")
    modulus = C0 + C1
    omega = k * math.pi / T
    c = (2 * omega**2 / (lam1 * (lam1**2 + 4 * omega**2))) ** -0.5
    rates, amps = nu.exponential_terms()
    keep = amps != 0
    rates, amps = rates[keep], amps[keep]
    if np.any(rates <= lam0):
        raise DivergenceError("measure charges rates at or below the cutoff")
    den = (2 * rates + lam1 - lam0) ** 2 + 4 * omega**2
    A = float(np.sum(4 * omega / den * amps))
    B = float(np.sum(2 * (2 * rates + lam1 - lam0) / den * amps))
    comb = (2 * omega**2 * (A * A + B * B) + A * A * lam1**2 + 2 * A * B * lam1 * omega) / (
        lam1 * (lam1**2 + 4 * omega**2)
    )
    inner = (c / modulus) ** 2 * comb
    printed = c**2 / modulus * comb

    inner_direct = None
    if direct:
        inner_direct = _direct_inner(rates, amps, lam0, lam1, omega, c, modulus)
    return SLSClassIntegrals(k, omega, c, A, B, inner, printed, inner_direct)


def _direct_inner(rates, amps, lam0, lam1, omega, c, modulus) -> float:
    """``(T phi, T phi)_w`` by product Gauss-Legendre quadrature of the defining integrals."""
    if rates.size == 0:
        return 0.0
    beta = 0.5 * (lam1 - lam0)
    # outer variable: integrand decays like exp(-lam1 tau)
    tau, wt = _gl_half_line(lam1)
    # inner variable s = rho - tau: decays like exp(-(min rate + beta) s)
    s, ws = _gl_half_line(float(rates.min()) + beta)
    kern = eval_kernel(ScalarKernel.prony(zip(amps / rates, rates)), s)
    rho = tau[:, None] + s[None, :]
    phi = c * np.exp(-beta * rho) * np.sin(omega * rho)
    image = (phi * (kern * ws)[None, :]).sum(axis=1) / modulus
    return float(np.sum(wt * np.exp(-lam0 * tau) * image**2))


# --- measure files --------------------------------------------------------------------------


def measure_from_dict(data) -> RelaxationMeasure:
    """Parse ``{"lambda0", "atoms": [[lambda, m], ...], "density": {"support", "values"}}``."""
    if not isinstance(data, dict):
        raise ConfigurationError("measure must be a JSON object")
    problems = []
    unknown = set(data) - {"lambda0", "atoms", "density"}
    if unknown:
        problems.append(f"unknown measure keys: {sorted(unknown)}")
    lam0 = data.get("lambda0", 0.0)
    if isinstance(lam0, bool) or not isinstance(lam0, (int, float)):
        problems.append("lambda0 must be a number")
        lam0 = 0.0
    atoms = []
    raw_atoms = data.get("atoms", [])
    if not isinstance(raw_atoms, list):
        problems.append("atoms must be a list of [lambda, mass] pairs")
        raw_atoms = []
    for j, a in enumerate(raw_atoms):
        if (
            not isinstance(a, (list, tuple))
            or len(a) != 2
            or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in a)
        ):
            problems.append(f"atoms[{j}] must be a [lambda, mass] pair of numbers")
        else:
            atoms.append((float(a[0]), float(a[1])))
    density = None
    if "density" in data and data["density"] is not None:
        d = data["density"]
        if not isinstance(d, dict) or set(d) != {"support", "values"}:
            problems.append('density must be {"support": [a, b], "values": [...]}')
        else:
            sup, vals = d["support"], d["values"]
            if not (isinstance(sup, list) and len(sup) == 2 and all(isinstance(x, (int, float)) for x in sup)):
                problems.append("density.support must be [a, b]")
            elif not (isinstance(vals, list) and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in vals)):
                problems.append("density.values must be a list of numbers")
            else:
                try:
                    density = TabulatedDensity(float(sup[0]), float(sup[1]), tuple(vals))
                except InvalidMeasureError as exc:
                    problems.append(str(exc))
    if problems:
        raise ConfigurationError("invalid measure", problems=problems)
    try:
        return RelaxationMeasure(float(lam0), tuple(atoms), density)
    except InvalidMeasureError as exc:
        raise ConfigurationError("invalid measure", problems=[str(exc)]) from exc


def load_measure(path) -> RelaxationMeasure:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read measure file {path}", problems=[str(exc)]) from exc
    return measure_from_dict(data)


def dump_measure(nu: RelaxationMeasure, path) -> None:
    Path(path).write_text(json.dumps(nu.to_dict(), indent=2, sort_keys=True) + "\n")
