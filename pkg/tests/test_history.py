import math

import numpy as np
import pytest

from heredlab import (
    DomainError,
    HistoryGrid,
    LaguerreBasis,
    ScalarKernel,
    Weight,
    assemble_S,
    project_history,
    reconstruct,
    singular_system,
    sls_eigen_ode_oracle,
    sls_eigen_reference,
    truncate,
)
from heredlab.history import (
    compare_sls_eigenvalues,
    extrapolated_eigenvalues,
    random_rank_competitor,
    weighted_operator_norm,
)

SLS = ScalarKernel.prony([(1.0, 1.0)])

# frozen from the closed-form double integral k1^2 [T - (1 - exp(-2 T)) / 2] / 2, k1 = 1/2, T = 1
HS_SLS_T1 = math.sqrt(0.25 * (1 - (1 - math.exp(-2)) / 2) / 2)
# frozen from the shooting oracle (C0 = C1 = 1, lambda1 = 1, lambda0 = 0, T = pi)
MU1_SLS_TPI = 0.1542855108287848


def sls_mu_exact(k, C0=1.0, C1=1.0, lam1=1.0, lam0=0.0, T=math.pi):
    """Eigenvalue from the transcendental equation b sin(wT) + w cos(wT) = 0."""
    from scipy.optimize import brentq

    a = C1 * lam1 / (C0 + C1)
    b = lam1 - lam0 / 2
    f = lambda w: b * math.sin(w * T) + w * math.cos(w * T)
    w = brentq(f, (k - 0.5) * math.pi / T + 1e-12, k * math.pi / T, xtol=1e-15)
    return a * a / (b * b + w * w)


def test_trapezoid_grid_weights_sum():
    g = HistoryGrid.trapezoid(2.5, 37)
    assert g.weights.sum() == pytest.approx(2.5, rel=1e-12)
    assert np.all((g.weight_samples > 0) & (g.weight_samples <= 1))


def test_gauss_grid():
    g = HistoryGrid.gauss_legendre(2.0, 5, 6, Weight(0.5))
    assert g.horizon == 2.0
    assert g.weights.sum() == pytest.approx(2.0, rel=1e-13)
    assert g.inner(np.exp(g.nodes), np.ones(len(g))) == pytest.approx((math.exp(1.0) - 1) / 0.5, rel=1e-12)


def test_zero_kernel_zero_operator():
    op = assemble_S(ScalarKernel.zero(), 1.0, HistoryGrid.trapezoid(1.0, 20))
    assert np.all(op.matrix == 0)
    s = singular_system(op, 5)
    assert np.all(s.values == 0) and s.rank == 0


def test_causal_structure():
    op = assemble_S(SLS, 2.0, HistoryGrid.trapezoid(1.0, 30, Weight(0.4)))
    assert np.all(np.tril(op.matrix, -1) == 0)
    assert np.all(np.triu(op.matrix) >= 0)


def test_hs_norm_closed_form():
    op = assemble_S(SLS, 2.0, HistoryGrid.trapezoid(1.0, 400))
    assert abs(op.hs_norm() - HS_SLS_T1) < 1e-4
    assert op.hs_norm() <= 0.5


def test_hs_norm_second_order():
    errs = [abs(assemble_S(SLS, 2.0, HistoryGrid.trapezoid(1.0, m)).hs_norm() - HS_SLS_T1) for m in (50, 100, 200)]
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((slopes > 1.8) & (slopes < 2.2))


def test_hs_norm_bounded_by_gamma_sqrt_T(rng):
    from heredlab import ElasticModuli, certify

    from conftest import random_prony

    for _ in range(5):
        k = random_prony(rng)
        m = ElasticModuli.for_kernel(k, 0.5)
        w = Weight(rng.uniform(0, 0.9) * k.min_rate)
        T = rng.uniform(0.5, 4)
        op = assemble_S(k, m.instantaneous, HistoryGrid.trapezoid(T, 300, w))
        assert op.hs_norm() <= certify(k, m, w).gamma * math.sqrt(T) * (1 + 1e-3)


def test_singular_system_invariants(rng):
    g = HistoryGrid.trapezoid(3.0, 300, Weight(0.4))
    op = assemble_S(ScalarKernel.prony([(1.0, 1.0), (0.3, 4.0)]), 2.3, g)
    s = singular_system(op, 10)
    assert np.all(np.diff(s.values) <= 0)
    gram = g.inner(s.phi[:, None, :], s.phi[None, :, :])
    assert np.max(np.abs(gram - np.eye(10))) < 1e-10
    psi_gram = g.inner(s.psi[:, None, :], s.psi[None, :, :])
    assert np.max(np.abs(psi_gram - np.eye(10))) < 1e-10
    assert np.allclose(s.phi @ op.matrix.T, s.values[:, None] * s.psi, atol=1e-12)
    with pytest.raises(DomainError):
        singular_system(op, 1000)


def test_singular_values_decay_like_inverse_k():
    op = assemble_S(SLS, 2.0, HistoryGrid.trapezoid(math.pi, 800))
    s = singular_system(op, 40).values
    k = np.arange(10, 41)
    slope = np.polyfit(np.log(k), np.log(s[9:40]), 1)[0]
    assert -1.15 < slope < -0.85


def test_s1_grid_stable():
    s400 = singular_system(assemble_S(SLS, 2.0, HistoryGrid.trapezoid(1.0, 400)), 1).values[0]
    s800 = singular_system(assemble_S(SLS, 2.0, HistoryGrid.trapezoid(1.0, 800)), 1).values[0]
    assert abs(s400 - s800) / s800 < 1e-4


def test_truncate_errors():
    op = assemble_S(SLS, 2.0, HistoryGrid.trapezoid(1.0, 120, Weight(0.3)))
    s = singular_system(op)
    assert truncate(op, 0, s).error_norm(op) == pytest.approx(s.values[0], rel=1e-12)
    for N in (1, 3, 7):
        assert truncate(op, N, s).error_norm(op) == pytest.approx(s.values[N], rel=1e-8)
    assert truncate(op, len(s), s).error_norm(op) < 1e-12 * s.values[0]


def test_rank_n_apply_matches_matrix(rng):
    op = assemble_S(SLS, 2.0, HistoryGrid.trapezoid(1.0, 80))
    r = truncate(op, 4)
    e = rng.standard_normal(len(op.grid))
    assert np.allclose(r.apply(e), r.matrix() @ e)
    q = r.history_variables(e)
    assert q.shape == (4,)


def test_random_competitors_lose(rng):
    op = assemble_S(SLS, 2.0, HistoryGrid.trapezoid(math.pi, 150))
    s = singular_system(op)
    for side in ("range", "domain"):
        for _ in range(5):
            comp = random_rank_competitor(op, 3, rng, side)
            assert np.linalg.matrix_rank(comp) <= 3
            assert weighted_operator_norm(op.matrix - comp, op.grid) > s.values[3]


def test_laguerre_gram_and_projection():
    L = LaguerreBasis(1.0, 20)
    assert np.max(np.abs(L.gram() - np.eye(20))) < 1e-10
    q = project_history(lambda t: L(t)[1], L)
    assert np.allclose(q, np.eye(20)[1], atol=1e-10)
    q = project_history(lambda t: np.ones_like(t), L)
    assert q[0] == pytest.approx(1.0, abs=1e-12) and q[1] == pytest.approx(0.0, abs=1e-12)


def test_laguerre_reconstruction_monotone():
    L = LaguerreBasis(1.0, 20)
    f = lambda t: np.exp(-t / 2)
    q = project_history(f, L)
    tau, wq = L.quadrature(80)
    errs = [math.sqrt(np.sum(wq * (f(tau) - reconstruct(q[:K], L, tau)) ** 2)) for K in range(1, 21)]
    assert np.all(np.diff(errs) <= 1e-15)
    assert errs[-1] <= 1e-6


def test_laguerre_validation():
    with pytest.raises(DomainError):
        LaguerreBasis(0.0, 5)
    with pytest.raises(DomainError):
        LaguerreBasis(1.0, 0)


def test_project_on_singular_system_with_resampling():
    g = HistoryGrid.trapezoid(1.0, 200)
    s = singular_system(assemble_S(SLS, 2.0, g), 6)
    q = project_history(s.phi[1], s, g)
    assert np.allclose(q, np.eye(6)[1], atol=1e-10)
    coarse = HistoryGrid.trapezoid(1.0, 100)
    q2 = project_history(np.interp(coarse.nodes, g.nodes, s.phi[1]), s, coarse)
    assert np.allclose(q2, np.eye(6)[1], atol=1e-3)


def test_sls_reference_example():
    ref = sls_eigen_reference(1.0, 1.0, 1.0, 0.0, math.pi, 1, nodes=np.linspace(0, math.pi, 5))
    assert ref.mu == pytest.approx(0.5, rel=1e-15)
    assert ref.phi[0] == 0.0
    assert sls_eigen_reference(1.0, 1.0, 1.0, 0.0, math.pi, 200).mu < 1e-4
    with pytest.raises(DomainError):
        sls_eigen_reference(1.0, 1.0, 1.0, 1.0, math.pi, 1)


def test_ode_oracle_matches_transcendental_roots():
    pairs = sls_eigen_ode_oracle(1.0, 1.0, 1.0, 0.0, math.pi, 5)
    assert pairs[0].mu == pytest.approx(MU1_SLS_TPI, rel=1e-12)
    for p in pairs:
        assert p.mu == pytest.approx(sls_mu_exact(p.k), rel=1e-10)


def test_ode_oracle_weighted_case():
    pairs = sls_eigen_ode_oracle(1.0, 2.0, 1.5, 0.8, 2.0, 3)
    for p in pairs:
        assert p.mu == pytest.approx(sls_mu_exact(p.k, 1.0, 2.0, 1.5, 0.8, 2.0), rel=1e-10)


def test_ode_oracle_zero_coupling():
    assert all(p.mu == 0.0 for p in sls_eigen_ode_oracle(1.0, 0.0, 1.0, 0.0, 1.0, 3))


def test_ode_oracle_eigenfunctions_match_svd():
    g = HistoryGrid.trapezoid(1.0, 800)
    s = singular_system(assemble_S(SLS, 2.0, g), 3)
    pairs = sls_eigen_ode_oracle(1.0, 1.0, 1.0, 0.0, 1.0, 3, nodes=g.nodes)
    assert pairs[0].mu == pytest.approx(s.eigenvalues[0], rel=1e-5)
    for p, phi in zip(pairs, s.phi):
        assert np.max(np.abs(abs(g.inner(p.phi, phi)) - 1.0)) < 1e-5


def test_extrapolation_triangulation():
    extra = extrapolated_eigenvalues(SLS, 2.0, Weight(0.0), 1.0, 800, 3)
    ode = [p.mu for p in sls_eigen_ode_oracle(1.0, 1.0, 1.0, 0.0, 1.0, 3)]
    assert np.allclose(extra, ode, rtol=1e-6)


def test_comparison_report_shape():
    rows = compare_sls_eigenvalues(1.0, 1.0, 1.0, 0.0, math.pi, 200, 2)
    d = rows[0].to_dict()
    assert set(d) >= {"mu_svd", "mu_ode", "mu_printed", "rel_dev_printed"}
    assert rows[0].printed == pytest.approx(0.5)
