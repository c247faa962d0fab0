import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heredlab import (
    DomainError,
    ElasticModuli,
    Evolution,
    NonConvergenceError,
    NotContractiveError,
    ScalarKernel,
    TimeGrid,
    Weight,
    apply_P,
    certify,
    cycle_work,
    solve_direct,
    solve_picard,
    stress_from_strain,
    weighted_norm,
)
from heredlab.volterra import a_priori_holds

from conftest import random_prony
from oracles import creep_rk4, dashpot_strains_rk4

SLS = ScalarKernel.prony([(1.0, 1.0)])


def smooth_strain(t):
    return np.sin(1.3 * t) + 0.4 * t - 0.2 * np.cos(3.1 * t) + 0.2


def test_time_grid_validation():
    with pytest.raises(DomainError):
        TimeGrid([0.0])
    with pytest.raises(DomainError):
        TimeGrid([0.0, 1.0, 1.0])
    g = TimeGrid.uniform(2.0, 4)
    assert g.horizon == 2.0 and g.is_uniform and len(g) == 5


def test_evolution_validation():
    g = TimeGrid.uniform(1.0, 3)
    with pytest.raises(DomainError):
        Evolution(g, [0, 1], "strain")
    with pytest.raises(DomainError):
        Evolution(g, [0, 1, np.nan, 2], "strain")
    with pytest.raises(DomainError):
        Evolution(g, [0, 1, 2, 3], "plastic")


def test_zero_kernel_is_elastic():
    g = TimeGrid.uniform(1.0, 10)
    eps = Evolution.from_function(g, smooth_strain, "strain")
    assert np.all(apply_P(ScalarKernel.zero(), 2.0, eps).values == 0)
    assert np.allclose(stress_from_strain(ScalarKernel.zero(), 2.0, eps).values, 2.0 * eps.values)
    sig = Evolution(g, 2.0 * eps.values, "stress")
    assert np.allclose(solve_direct(ScalarKernel.zero(), 2.0, sig).values, eps.values)


def test_step_strain_relaxation():
    # constant strain from t = 0 is linear on every step, so the update is exact
    g = TimeGrid.uniform(6.0, 37)
    eps = Evolution(g, np.full(len(g), 0.3), "strain")
    sig = stress_from_strain(SLS, 2.0, eps).values
    assert np.allclose(sig, (1.0 + np.exp(-g.nodes)) * 0.3, rtol=1e-13, atol=1e-15)
    P = apply_P(SLS, 2.0, eps).values
    assert np.allclose(P, 0.5 * (1 - np.exp(-g.nodes)) * 0.3, rtol=1e-13, atol=1e-16)


def test_ramp_has_no_instantaneous_viscosity():
    g = TimeGrid.uniform(1e-3, 10)
    eps = Evolution(g, 2.0 * g.nodes, "strain")
    sig = stress_from_strain(SLS, 2.0, eps).values
    # sigma = C beta t - O(t^2)
    assert np.allclose(sig, 2.0 * 2.0 * g.nodes, rtol=1e-3)


def test_apply_P_matches_dashpot_rk4(rng):
    # P eps = (1/C) sum C_i eps_i with eps_i the dashpot strains
    k = random_prony(rng)
    C = 1.0 + k.total_stiffness
    g = TimeGrid.uniform(4.0, 800)
    eps = Evolution.from_function(g, smooth_strain, "strain")
    dash = dashpot_strains_rk4(k.rates, smooth_strain, g.nodes, substeps=4)
    ref = dash @ k.stiffnesses / C
    assert np.max(np.abs(apply_P(k, C, eps).values - ref)) < 1e-5


def test_apply_P_second_order():
    T = 3.0
    fine = TimeGrid.uniform(T, 4096)
    ref_dash = dashpot_strains_rk4(SLS.rates, smooth_strain, fine.nodes, substeps=2)[:, 0] / 2.0
    errs = []
    for m in (64, 128, 256):
        g = TimeGrid.uniform(T, m)
        P = apply_P(SLS, 2.0, Evolution.from_function(g, smooth_strain, "strain")).values
        errs.append(abs(P[-1] - ref_dash[-1]))
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((slopes > 1.8) & (slopes < 2.2))


def test_apply_P_nonuniform_equals_uniform_on_same_nodes():
    t = np.linspace(0, 2, 41)
    uni = apply_P(SLS, 2.0, Evolution(TimeGrid(t), smooth_strain(t), "strain")).values
    tt = t.copy()
    tt[5] += 1e-12  # defeat the uniform fast path
    non = apply_P(SLS, 2.0, Evolution(TimeGrid(tt), smooth_strain(t), "strain")).values
    assert np.allclose(uni, non, atol=1e-11)


@given(st.integers(0, 2**32 - 1))
def test_round_trip(seed):
    rng = np.random.default_rng(seed)
    k = random_prony(rng)
    C = rng.uniform(0.1, 2.0) + k.total_stiffness
    t = np.cumsum(np.r_[0.0, rng.uniform(0.01, 0.1, 60)])
    g = TimeGrid(t)
    eps = Evolution(g, rng.standard_normal(t.size), "strain")
    back = solve_direct(k, C, stress_from_strain(k, C, eps))
    assert np.max(np.abs(back.values - eps.values)) <= 1e-10 * np.max(np.abs(eps.values))


def test_solve_direct_residual(rng):
    k = random_prony(rng)
    C = 1.0 + k.total_stiffness
    g = TimeGrid.uniform(5.0, 500)
    sig = Evolution.from_function(g, lambda t: np.cos(t) + t, "stress")
    eps = solve_direct(k, C, sig)
    res = stress_from_strain(k, C, eps).values - sig.values
    assert np.max(np.abs(res)) <= 1e-12 * np.max(np.abs(sig.values))


def test_creep_closed_form():
    g = TimeGrid.uniform(5.0, 1000)
    sig = Evolution(g, np.full(len(g), 1.0), "stress")
    eps = solve_direct(SLS, 2.0, sig).values
    exact = 1.0 - 0.5 * np.exp(-g.nodes / 2)
    assert np.max(np.abs(eps - exact) / exact) < 1e-6
    rk = creep_rk4(1.0, [1.0], [1.0], 1.0, g.nodes)
    assert np.max(np.abs(rk - exact) / exact) < 1e-12


def test_weighted_norm_examples():
    g = TimeGrid.uniform(1.0, 10)
    one = Evolution(g, np.ones(len(g)), "strain")
    assert weighted_norm(one, Weight(0.0), 4.0) == pytest.approx(2.0, rel=1e-14)
    assert weighted_norm(Evolution(g, np.zeros(len(g)), "strain"), Weight(0.3), 4.0) == 0.0
    e = Evolution.from_function(g, smooth_strain, "strain")
    s = Evolution(g, 4.0 * e.values, "stress")
    assert weighted_norm(e, Weight(0.7), 4.0) == pytest.approx(weighted_norm(s, Weight(0.7), 4.0), rel=1e-14)


def test_picard_zero_kernel_one_iteration():
    g = TimeGrid.uniform(1.0, 10)
    sig = Evolution(g, np.ones(len(g)), "stress")
    rep = solve_picard(ScalarKernel.zero(), 2.0, sig)
    assert rep.iterations == 1 and rep.converged and rep.gamma_used == 0.0


def test_picard_sls_contraction_and_bound():
    g = TimeGrid.uniform(5.0, 500)
    sig = Evolution.from_function(g, lambda t: 1 + np.sin(t), "stress")
    rep = solve_picard(SLS, 2.0, sig, tol=1e-12)
    assert rep.gamma_used == 0.5
    assert rep.contraction_ratio <= 0.5 + 1e-3
    assert rep.strain_norm <= 2 * rep.stress_norm
    assert rep.bound_check
    # update norms decrease after the first sweep
    assert np.all(np.diff(rep.residuals) < 0)
    direct = solve_direct(SLS, 2.0, sig).values
    assert np.max(np.abs(rep.solution.values - direct)) < 1e-10


def test_picard_refuses_non_contractive():
    k = ScalarKernel.prony([(1.0, 1.0)])
    g = TimeGrid.uniform(1.0, 10)
    sig = Evolution(g, np.ones(len(g)), "stress")
    cert = certify(k, ElasticModuli.for_kernel(k, 1.0), Weight(0.5))
    assert cert.gamma == pytest.approx(1.0)
    with pytest.raises(NotContractiveError) as info:
        solve_picard(k, 2.0, sig, certificate=cert)
    assert info.value.certificate is cert


def test_picard_non_convergence_report():
    g = TimeGrid.uniform(5.0, 100)
    sig = Evolution(g, np.ones(len(g)), "stress")
    with pytest.raises(NonConvergenceError) as info:
        solve_picard(SLS, 2.0, sig, tol=1e-14, max_iter=3)
    rep = info.value.report
    assert rep.iterations == 3 and len(rep.residuals) == 3 and not rep.converged


def test_kind_mismatch():
    g = TimeGrid.uniform(1.0, 4)
    e = Evolution(g, np.ones(5), "strain")
    with pytest.raises(TypeError):
        solve_picard(SLS, 2.0, e)
    with pytest.raises(TypeError):
        cycle_work(SLS, 2.0, e.with_values(np.ones(5), "stress"))


def test_a_priori_helper():
    assert a_priori_holds(1.99, 1.0, 0.5)
    assert a_priori_holds(2.01, 1.0, 0.5)  # within the 1% grid tolerance
    assert not a_priori_holds(2.1, 1.0, 0.5)
    assert not a_priori_holds(0.0, 1.0, 1.0)


def test_cycle_work_elastic_and_reference(rng):
    t = np.linspace(0, 2 * np.pi, 2001)
    g = TimeGrid(t)
    e = Evolution(g, np.sin(t) * (1 - np.cos(t)), "strain")
    assert abs(cycle_work(ScalarKernel.zero(), 3.0, e)) < 1e-12
    k = random_prony(rng)
    C = 1.0 + k.total_stiffness
    sig = stress_from_strain(k, C, e).values
    ref = np.trapezoid(sig * np.gradient(e.values, t), t)
    assert cycle_work(k, C, e) == pytest.approx(ref, rel=1e-4)
    assert cycle_work(k, C, e) > 0
