"""Plastic-strain history operator, its singular system and rank-N reductions.

The history operator acts on backward-time strain histories on ``(0, T)``,

    (S e)(tau) = (1/C) integral_tau^T K(rho - tau) e(rho) drho,

in the weighted space ``L^2((0, T), w(tau) dtau)``. On a grid with quadrature
weights ``q_j`` and weight samples ``w_j`` the discrete inner product is
``(f, g)_w = sum_j w_j q_j f_j g_j``; conjugating the Nystrom matrix ``A`` with
``W^(1/2) = diag(sqrt(w_j q_j))`` turns weighted-space singular values into
ordinary Euclidean ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, HeredlabError
from .material import ScalarKernel, Weight, eval_kernel

Rule = Literal["trapezoid", "gauss"]

RANK_RTOL = 1e-13


@dataclass(frozen=True, eq=False)
class HistoryGrid:
    """Nodes on ``[0, T]`` with quadrature weights and weight samples."""

    nodes: np.ndarray
    weights: np.ndarray
    weight: Weight
    rule: Rule = "trapezoid"
    span: float | None = None

    def __post_init__(self):
        for name in ("nodes", "weights"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.nodes.ndim != 1 or self.nodes.shape != self.weights.shape:
            raise DomainError("grid nodes and quadrature weights must be matching 1-d arrays")
        if np.any(np.diff(self.nodes) <= 0) or np.any(self.weights <= 0):
            raise DomainError("grid nodes must increase and quadrature weights be positive")

    @classmethod
    def trapezoid(cls, horizon: float, intervals: int, weight: Weight | None = None) -> "HistoryGrid":
        """Uniform composite trapezoid grid with ``intervals + 1`` nodes."""
        if intervals < 1 or not horizon > 0:
            raise DomainError("trapezoid grid needs horizon > 0 and at least one interval")
        tau = np.linspace(0.0, horizon, intervals + 1)
        q = np.full(tau.size, horizon / intervals)
        q[0] = q[-1] = 0.5 * horizon / intervals
        return cls(tau, q, weight or Weight(0.0), "trapezoid")

    @classmethod
    def gauss_legendre(
        cls, horizon: float, panels: int, order: int = 8, weight: Weight | None = None
    ) -> "HistoryGrid":
        """Composite Gauss-Legendre panels.

        Interior nodes only; the causal triangle of the operator is then
        integrated to first order along the diagonal, so this rule suits
        smooth histories rather than operator spectra.
        """
        if panels < 1 or order < 1 or not horizon > 0:
            raise DomainError("Gauss grid needs horizon > 0, panels >= 1, order >= 1")
        x, wq = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(0.0, horizon, panels + 1)
        h = np.diff(edges)
        tau = (edges[:-1, None] + 0.5 * h[:, None] * (x[None, :] + 1)).ravel()
        q = (0.5 * h[:, None] * wq[None, :]).ravel()
        return cls(tau, q, weight or Weight(0.0), "gauss", float(horizon))

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1]) if self.span is None else self.span

    @cached_property
    def weight_samples(self) -> np.ndarray:
        return self.weight(self.nodes)

    @cached_property
    def measure(self) -> np.ndarray:
        """Diagonal of ``W = diag(w_j q_j)``."""
        return self.weight_samples * self.weights

    def inner(self, f, g) -> np.ndarray:
        """Discrete weighted inner product along the last axis."""
        return np.sum(np.asarray(f) * np.asarray(g) * self.measure, axis=-1)

    def norm(self, f) -> float:
        return math.sqrt(max(float(self.inner(f, f)), 0.0))

    def __len__(self) -> int:
        return self.nodes.size

    def same_as(self, other: "HistoryGrid") -> bool:
        return (
            self.nodes.shape == other.nodes.shape
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
            and self.weight == other.weight
        )


@dataclass(frozen=True, eq=False)
class DiscreteHistoryOperator:
    matrix: np.ndarray
    grid: HistoryGrid
    kernel: ScalarKernel
    modulus: float

    @cached_property
    def symmetrized(self) -> np.ndarray:
        """``B = W^(1/2) A W^(-1/2)``."""
        r = np.sqrt(self.grid.measure)
        return r[:, None] * self.matrix / r[None, :]

    def apply(self, values) -> np.ndarray:
        return np.asarray(values, dtype=float) @ self.matrix.T

    def operator_norm(self) -> float:
        return float(np.linalg.norm(self.symmetrized, 2))

    def hs_norm(self) -> float:
        """Hilbert-Schmidt norm by product quadrature of the weighted kernel.

        The causal triangle is integrated with the trapezoid rule restricted to
        ``rho >= tau`` in each row, so this is second-order accurate on
        trapezoid grids.
        """
        g = self.grid
        tau = g.nodes
        w = g.weight_samples
        lag = tau[None, :] - tau[:, None]
        k = np.where(lag >= 0, eval_kernel(self.kernel, np.maximum(lag, 0.0)), 0.0) / self.modulus
        inner = (k**2 / w[None, :]) * _row_weights(g)
        return math.sqrt(float(np.sum(g.measure * inner.sum(axis=1))))

    def frobenius(self) -> float:
        """Frobenius norm of the symmetrized matrix (sum of squared singular values)."""
        return float(np.linalg.norm(self.symmetrized))


def _row_weights(grid: HistoryGrid) -> np.ndarray:
    """Quadrature weights for ``integral_tau_i^T ... drho`` in row ``i``."""
    tau, q = grid.nodes, grid.weights
    n = tau.size
    upper = np.triu(np.ones((n, n), dtype=bool))
    rows = np.where(upper, q[None, :], 0.0)
    if grid.rule == "trapezoid":
        # local trapezoid on [tau_i, T]: the first node only gets half its right cell
        right = np.append(np.diff(tau), 0.0)
        rows[np.arange(n), np.arange(n)] = 0.5 * right
    return rows


def assemble_S(kernel: ScalarKernel, modulus: float, grid: HistoryGrid) -> DiscreteHistoryOperator:
    """Nystrom matrix ``A[i, j] = K(tau_j - tau_i) q_ij / C`` of the history operator.

    ``q_ij`` are the row quadrature weights of the causal interval
    ``[tau_i, T]``; entries with ``tau_j < tau_i`` vanish.
    """
    if not modulus > 0:
        raise DomainError("instantaneous modulus must be > 0")
    tau = grid.nodes
    lag = tau[None, :] - tau[:, None]
    k = np.where(lag >= 0, eval_kernel(kernel, np.maximum(lag, 0.0)), 0.0)
    a = k * _row_weights(grid) / modulus
    a.flags.writeable = False
    return DiscreteHistoryOperator(a, grid, kernel, float(modulus))


@dataclass(frozen=True, eq=False)
class SingularSystem:
    """Singular values with weighted-orthonormal right (``phi``) and left (``psi``) vectors.

    ``phi[k]`` and ``psi[k]`` are sampled on ``grid``; ``psi[k] = S phi[k] / s[k]``.
    """

    values: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    grid: HistoryGrid
    operator: DiscreteHistoryOperator | None = None

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues ``mu_k = s_k^2`` of ``S* S``."""
        return self.values**2

    @property
    def rank(self) -> int:
        if self.values.size == 0 or self.values[0] == 0:
            return 0
        return int(np.sum(self.values >= RANK_RTOL * self.values[0]))

    def __len__(self) -> int:
        return self.values.size


def _svd(op: DiscreteHistoryOperator):
    u, s, vt = np.linalg.svd(op.symmetrized)
    return u, s, vt


def singular_system(op: DiscreteHistoryOperator, count: int | None = None) -> SingularSystem:
    """Leading ``count`` singular triples of the discrete history operator."""
    n = len(op.grid)
    count = n if count is None else int(count)
    if count < 0 or count > n:
        raise DomainError(f"requested {count} singular values from a grid of {n} nodes")
    u, s, vt = _svd(op)
    r = np.sqrt(op.grid.measure)
    phi = vt[:count] / r[None, :]
    psi = u[:, :count].T / r[None, :]
    # fix the sign so each phi_k starts positive on its first significant sample
    for j in range(count):
        idx = np.argmax(np.abs(phi[j]) > 1e-8 * np.abs(phi[j]).max()) if np.any(phi[j]) else 0
        if phi[j, idx] < 0:
            phi[j] *= -1
            psi[j] *= -1
    return SingularSystem(s[:count].copy(), phi, psi, op.grid, op)


@dataclass(frozen=True, eq=False)
class RankNOperator:
    """Truncated operator ``S_N e = sum_k s_k (e, phi_k)_w psi_k``."""

    rank: int
    values: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    grid: HistoryGrid

    def history_variables(self, history) -> np.ndarray:
        return self.grid.inner(self.phi, np.asarray(history, dtype=float)[None, :])

    def apply(self, history) -> np.ndarray:
        q = self.history_variables(history)
        return (self.values * q) @ self.psi

    def matrix(self) -> np.ndarray:
        """Nystrom-style matrix of ``S_N`` acting on grid samples."""
        m = self.grid.measure
        return (self.psi.T * self.values) @ (self.phi * m[None, :])

    def error_norm(self, op: DiscreteHistoryOperator) -> float:
        """Weighted operator norm of ``S - S_N``."""
        r = np.sqrt(self.grid.measure)
        diff = op.matrix - self.matrix()
        return float(np.linalg.norm(r[:, None] * diff / r[None, :], 2))


def truncate(op: DiscreteHistoryOperator, N: int, system: SingularSystem | None = None) -> RankNOperator:
    """Best rank-``N`` approximation of the discrete history operator."""
    system = system or singular_system(op)
    if N < 0 or N > len(system):
        raise DomainError(f"rank {N} outside 0..{len(system)}")
    return RankNOperator(N, system.values[:N], system.phi[:N], system.psi[:N], op.grid)


def weighted_operator_norm(matrix: np.ndarray, grid: HistoryGrid) -> float:
    r = np.sqrt(grid.measure)
    return float(np.linalg.norm(r[:, None] * matrix / r[None, :], 2))


def random_rank_competitor(op: DiscreteHistoryOperator, N: int, rng: np.random.Generator, side: str = "range") -> np.ndarray:
    """Rank-``N`` competitor built from a random subspace.

    ``side="range"`` projects the output of ``S`` onto a random ``N``-dimensional
    subspace; ``side="domain"`` restricts ``S`` to one.
    """
    grid = op.grid
    n = len(grid)
    r = np.sqrt(grid.measure)
    x = rng.standard_normal((n, N))
    # weighted-orthonormal basis via QR in the symmetrized coordinates
    qmat, _ = np.linalg.qr(r[:, None] * x)
    basis = qmat / r[:, None]
    proj = basis @ (basis.T * grid.measure[None, :])
    if side == "range":
        return proj @ op.matrix
    if side == "domain":
        return op.matrix @ proj
    raise ValueError(f"unknown side {side!r}")


@dataclass(frozen=True)
class LaguerreBasis:
    """Renormalized Laguerre functions ``sqrt(l0) L_{k-1}(l0 tau)``, orthonormal under ``exp(-l0 tau)``."""

    decay_rate: float
    count: int

    def __post_init__(self):
        if not self.decay_rate > 0:
            raise DomainError("Laguerre basis needs a decay rate > 0")
        if self.count < 1:
            raise DomainError("Laguerre basis needs at least one function")

    @property
    def weight(self) -> Weight:
        return Weight(self.decay_rate)

    def __call__(self, tau) -> np.ndarray:
        """Basis functions at ``tau``; shape ``(count, len(tau))``."""
        x = self.decay_rate * np.asarray(tau, dtype=float)
        out = np.empty((self.count,) + x.shape)
        out[0] = 1.0
        if self.count > 1:
            out[1] = 1.0 - x
        for k in range(1, self.count - 1):
            out[k + 1] = ((2 * k + 1 - x) * out[k] - k * out[k - 1]) / (k + 1)
        return math.sqrt(self.decay_rate) * out

    def quadrature(self, nodes: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Laguerre nodes and weights for ``integral_0^inf f(tau) exp(-l0 tau) dtau``."""
        n = nodes or max(2 * self.count, 40)
        x, wq = np.polynomial.laguerre.laggauss(n)
        return x / self.decay_rate, wq / self.decay_rate

    def gram(self, nodes: int | None = None) -> np.ndarray:
        tau, wq = self.quadrature(nodes)
        f = self(tau)
        return (f * wq[None, :]) @ f.T


def project_history(history, basis, grid: HistoryGrid | None = None, nodes: int | None = None) -> np.ndarray:
    """History variables ``q_k = (e, phi_k)_w``.

    ``history`` is either a callable of ``tau`` or samples on ``grid``.
    With a :class:`LaguerreBasis`, a callable is integrated on the half line
    by Gauss-Laguerre quadrature and samples use the grid's inner product.
    With a :class:`SingularSystem`, samples on another grid are linearly
    interpolated onto the system's grid.
    """
    if isinstance(basis, LaguerreBasis):
        if callable(history):
            tau, wq = basis.quadrature(nodes)
            return (basis(tau) * wq[None, :]) @ np.asarray(history(tau), dtype=float)
        if grid is None:
            raise DomainError("sampled histories need their grid")
        return grid.inner(basis(grid.nodes), np.asarray(history, dtype=float)[None, :])
    if isinstance(basis, SingularSystem):
        target = basis.grid
        if callable(history):
            values = np.asarray(history(target.nodes), dtype=float)
        else:
            values = np.asarray(history, dtype=float)
            if grid is not None and not grid.same_as(target):
                values = np.interp(target.nodes, grid.nodes, values)
            elif values.shape != target.nodes.shape:
                raise DomainError("history samples do not match the singular-system grid")
        return target.inner(basis.phi, values[None, :])
    raise TypeError(f"unsupported basis {type(basis).__name__}")


def reconstruct(coefficients, basis, tau=None) -> np.ndarray:
    """``sum_k q_k phi_k`` on ``tau`` (or on the singular-system grid)."""
    q = np.asarray(coefficients, dtype=float)
    if isinstance(basis, LaguerreBasis):
        return q @ basis(tau)[: q.size]
    if tau is not None:
        raise DomainError("singular-system reconstructions live on their own grid")
    return q @ basis.phi[: q.size]


# --- standard linear solid references ---------------------------------------------------


@dataclass(frozen=True)
class SLSReference:
    """Eigenpair as printed for the standard linear solid example."""

    k: int
    mu: float
    omega: float
    normalization: float
    phi: np.ndarray | None


def _sls_checks(C0, C1, lam1, lam0, T):
    if not (C0 > 0 and C1 >= 0 and lam1 > 0 and lam0 >= 0 and T > 0):
        raise DomainError("SLS parameters need C0 > 0, C1 >= 0, lambda1 > 0, lambda0 >= 0, T > 0")


def sls_eigen_reference(C0, C1, lam1, lam0, T, k: int, nodes=None) -> SLSReference:
    """Eigenvalue and eigenfunction of ``S* S`` in the printed closed form.

    Reported for comparison only: ``omega_k = k pi / T``, envelope
    ``exp(-(lambda1 - lambda0) tau / 2)`` and eigenvalue
    ``(C1/C)^2 4 lambda1^2 / ((lambda1 - lambda0)^2 + omega_k^2)``.
    """
    _sls_checks(C0, C1, lam1, lam0, T)
    if lam0 >= lam1:
        raise DomainError("the reference eigenpairs need lambda0 < lambda1")
    if k < 1:
        raise DomainError("eigenpair index starts at 1")
    omega = k * math.pi / T
    c = (2 * omega**2 / (lam1 * (lam1**2 + 4 * omega**2))) ** -0.5
    mu = (C1 / (C0 + C1)) ** 2 * 4 * lam1**2 / ((lam1 - lam0) ** 2 + omega**2)
    phi = None
    if nodes is not None:
        tau = np.asarray(nodes, dtype=float)
        phi = c * np.exp(-0.5 * (lam1 - lam0) * tau) * np.sin(omega * tau)
    return SLSReference(k, mu, omega, c, phi)


@dataclass(frozen=True)
class EigenPair:
    k: int
    mu: float
    omega: float
    phi: np.ndarray | None


class ShootingError(HeredlabError):
    """Root bracketing failed in the eigenvalue shooting oracle."""


def sls_eigen_ode_oracle(C0, C1, lam1, lam0, T, count: int, nodes=None) -> list[EigenPair]:
    """Eigenpairs of ``S* S`` for the standard linear solid by shooting.

    With ``a = C1 lambda1 / C``, ``u = S phi`` and ``v = S* u = mu phi`` satisfy

        u' = lambda1 u - (a / mu) v,      u(T) = 0,
        v' = a u - (lambda1 - lambda0) v, v(0) = 0.

    The constant-coefficient system oscillates with frequency ``omega`` when
    ``a^2 / mu = (lambda1 - lambda0/2)^2 + omega^2``. For each trial frequency
    the initial value problem from ``tau = 0`` is integrated numerically and
    the eigenfrequencies are the roots of ``u(T; omega)``.
    """
    _sls_checks(C0, C1, lam1, lam0, T)
    if not lam0 < 2 * lam1:
        raise DomainError("the history operator is Hilbert-Schmidt only for lambda0 < 2 lambda1")
    if count < 1:
        raise DomainError("count must be >= 1")
    a = C1 * lam1 / (C0 + C1)
    if a == 0:
        z = None if nodes is None else np.zeros(np.shape(nodes))
        return [EigenPair(k + 1, 0.0, math.nan, z) for k in range(count)]
    beta = lam1 - 0.5 * lam0

    def mu_of(omega):
        return a * a / (beta * beta + omega * omega)

    def shoot(omega, dense=False):
        mu = mu_of(omega)
        rhs = lambda _, y: [lam1 * y[0] - (a / mu) * y[1], a * y[0] - (lam1 - lam0) * y[1]]
        sol = integrate.solve_ivp(
            rhs, (0.0, T), [1.0, 0.0], method="DOP853", rtol=1e-13, atol=1e-15, dense_output=dense
        )
        if not sol.success:
            raise ShootingError(f"initial value solve failed at omega={omega!r}: {sol.message}")
        return sol

    def end_value(omega):
        return shoot(omega).y[0, -1]

    # non-oscillatory branch: u(T) keeps its sign for real exponents
    step = math.pi / (8 * T)
    roots = []
    lo = 1e-9
    f_lo = end_value(lo)
    while len(roots) < count:
        hi = lo + step
        f_hi = end_value(hi)
        if f_lo == 0.0:
            roots.append(lo)
        elif f_lo * f_hi < 0:
            roots.append(optimize.brentq(end_value, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
        lo, f_lo = hi, f_hi
        if lo > (count + 2) * math.pi / T + 1.0:
            raise ShootingError(
                f"found {len(roots)} of {count} eigenfrequencies below omega={lo!r}; "
                f"brackets scanned with step {step!r}"
            )

    pairs = []
    gl_x, gl_w = np.polynomial.legendre.leggauss(64)
    for k, omega in enumerate(roots, start=1):
        mu = mu_of(omega)
        phi = None
        if nodes is not None:
            sol = shoot(omega, dense=True)
            edges = np.linspace(0.0, T, 4 * k + 8)
            h = np.diff(edges)
            tq = (edges[:-1, None] + 0.5 * h[:, None] * (gl_x[None, :] + 1)).ravel()
            wq = (0.5 * h[:, None] * gl_w[None, :]).ravel()
            vq = sol.sol(tq)[1]
            norm = math.sqrt(float(np.sum(wq * vq**2 * np.exp(-lam0 * tq))))
            phi = sol.sol(np.asarray(nodes, dtype=float))[1] / norm
        pairs.append(EigenPair(k, mu, omega, phi))
    return pairs


def extrapolated_eigenvalues(kernel: ScalarKernel, modulus: float, weight: Weight, horizon: float, intervals: int, count: int) -> np.ndarray:
    """Richardson extrapolation of ``s_k^2`` from trapezoid grids with ``intervals`` and ``intervals // 2``.

    The trapezoid discretization is second order, so ``(4 mu_fine - mu_coarse) / 3``
    cancels the leading error term.
    """
    if intervals % 2:
        raise DomainError("Richardson extrapolation needs an even interval count")
    fine = singular_system(assemble_S(kernel, modulus, HistoryGrid.trapezoid(horizon, intervals, weight)), count)
    coarse = singular_system(
        assemble_S(kernel, modulus, HistoryGrid.trapezoid(horizon, intervals // 2, weight)), count
    )
    return (4 * fine.eigenvalues - coarse.eigenvalues) / 3


@dataclass(frozen=True)
class EigenComparison:
    k: int
    svd: float
    extrapolated: float
    ode: float
    printed: float

    @property
    def svd_vs_ode(self) -> float:
        return abs(self.svd - self.ode) / self.ode if self.ode else abs(self.svd)

    @property
    def extrapolated_vs_ode(self) -> float:
        return abs(self.extrapolated - self.ode) / self.ode if self.ode else abs(self.extrapolated)

    @property
    def printed_vs_ode(self) -> float:
        return abs(self.printed - self.ode) / self.ode if self.ode else abs(self.printed)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "mu_svd": self.svd,
            "mu_svd_extrapolated": self.extrapolated,
            "mu_ode": self.ode,
            "mu_printed": self.printed,
            "rel_dev_svd": self.svd_vs_ode,
            "rel_dev_extrapolated": self.extrapolated_vs_ode,
            "rel_dev_printed": self.printed_vs_ode,
        }


def compare_sls_eigenvalues(C0, C1, lam1, lam0, T, intervals: int, count: int) -> list[EigenComparison]:
    """Cross-report discrete SVD, extrapolated SVD, shooting oracle and printed eigenvalues."""
    kernel = ScalarKernel.prony([(C1, lam1)]) if C1 > 0 else ScalarKernel.zero()
    modulus = C0 + C1
    w = Weight(lam0)
    system = singular_system(assemble_S(kernel, modulus, HistoryGrid.trapezoid(T, intervals, w)), count)
    extra = extrapolated_eigenvalues(kernel, modulus, w, T, intervals, count)
    ode = sls_eigen_ode_oracle(C0, C1, lam1, lam0, T, count)
    rows = []
    for k in range(count):
        printed = sls_eigen_reference(C0, C1, lam1, lam0, T, k + 1).mu if lam0 < lam1 else math.nan
        rows.append(EigenComparison(k + 1, float(system.eigenvalues[k]), float(extra[k]), ode[k].mu, printed))
    return rows
