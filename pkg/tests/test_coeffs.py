from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
import pytest

import flock_coeffs.coeffs as coeffs_mod
from flock_coeffs.coeffs import (
    beta_quadratic_form,
    c_relation_residuals,
    compute_coefficients,
    compute_r1_coeffs,
    profile_moment_residuals,
    solve_profiles,
)
from flock_coeffs.errors import PreconditionError
from flock_coeffs.kernel import constant_kernel, registry_kernels, with_sigma_shift


def langevin(kappa):
    return 1.0 / np.tanh(kappa) - 1.0 / kappa


def all_values(h):
    return np.concatenate([[h.c1, h.c2, h.c3, h.beta, h.gamma], h.zeta])


D_SWEEP = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0)


@pytest.mark.parametrize("d", D_SWEEP)
def test_drift_constant_matches_langevin(d):
    hydro = compute_coefficients(constant_kernel(1.0, d=d), n=64)
    assert abs(hydro.c1 - langevin(1.0 / d)) < 1e-10


@pytest.mark.parametrize("d", (0.1, 1.0, 3.0))
def test_pressure_constant_for_constant_rate(d):
    # 1/nu is constant, so it pulls out of the bracket: c3 = d / nu
    hydro = compute_coefficients(constant_kernel(1.0, d=d), n=64)
    assert abs(hydro.c3 - d) < 1e-12
    hydro2 = compute_coefficients(constant_kernel(2.0, d=d), n=64)
    assert abs(hydro2.c3 - d / 2.0) < 1e-12


def test_c_relation_certificates(pipeline_const, pipeline_even):
    for p in (pipeline_const, pipeline_even):
        res = c_relation_residuals(p["kernel"], p["gci"], p["c"], p["eq"])
        assert max(res.values()) < 1e-9


def test_a_par_data_has_zero_mean(pipeline_even):
    # the conservative problem for a_par is solvable because c1 is defined by
    # exactly the vanishing first moment
    p = pipeline_even
    kernel, (c1, _, _) = p["kernel"], p["c"]
    rule = p["eq"].rule
    shift = kernel.log_weight(rule.nodes).max()
    f = np.exp(kernel.log_weight(rule.nodes) - shift) * (rule.nodes - c1) / kernel.d
    assert abs(float(rule.weights @ f)) < 1e-14


def test_profile_moment_relations(pipeline_const, pipeline_even):
    for p in (pipeline_const, pipeline_even):
        res = profile_moment_residuals(p["profiles"], p["eq"])
        assert max(res.values()) < 1e-9


def test_inconsistent_constants_rejected(pipeline_even):
    # corrupting c1 breaks the solvability of the conservative solve
    p = pipeline_even
    bad_c = (p["c"][0] + 0.05, p["c"][1], p["c"][2])
    with pytest.raises(PreconditionError):
        solve_profiles(p["kernel"], bad_c, p["n"], rule=p["eq"].rule, eq=p["eq"])


@pytest.mark.parametrize("d", D_SWEEP)
def test_mass_diffusion_positive_all_kernels(d):
    # positivity is structural and holds at every noise level; the c ordering
    # is a moderate-noise regime property, so it is not enforced here
    for kernel in registry_kernels(d=d):
        hydro = compute_coefficients(kernel, n=48, strict=False)
        assert hydro.beta > 1e-12


def test_beta_continuous_in_noise():
    # beta grows steeply (~d^2-ish) at small d: sample log-spaced and bound
    # the per-step change of log beta
    ds = np.geomspace(0.1, 2.0, 40)
    betas = np.array([compute_coefficients(constant_kernel(1.0, d=d), n=48).beta
                      for d in ds])
    assert np.all(betas > 0)
    assert np.abs(np.diff(np.log(betas))).max() < 0.5


def test_beta_dirichlet_route(pipeline_const, pipeline_even):
    for p in (pipeline_const, pipeline_even):
        beta, _ = compute_r1_coeffs(p["kernel"], p["profiles"], p["eq"])
        assert abs(beta_quadratic_form(p["kernel"], p["profiles"], p["eq"]) - beta) < 1e-8


def test_zeta_assembly_identity(pipeline_even):
    h = pipeline_even["hydro"]
    rebuilt = h.prefactor * (np.asarray(h.lam["double_prime"])
                             + np.asarray(h.eta["prime"])
                             + np.asarray(h.xi["slots"]))
    assert np.max(np.abs(h.zeta - rebuilt)) == 0.0


def test_nonlocal_slot_relations(pipeline_even):
    h = pipeline_even["hydro"]  # built with kappa = 0.1
    xs = np.asarray(h.xi["slots"])
    xi = h.xi["xi"]
    assert xi != 0.0
    assert xs[3] == pytest.approx(-xs[0], rel=1e-14)
    assert xs[1] == pytest.approx(0.5 * xs[0], rel=1e-14)
    assert xs[11] == pytest.approx(0.5 * xs[0], rel=1e-14)
    assert xs[12] == pytest.approx(0.5 * xs[0], rel=1e-14)
    assert xs[5] == pytest.approx(2.0 * xs[0], rel=1e-14)
    for j in (4, 6, 8, 9):  # slots with no nonlocal contribution
        assert xs[j] == 0.0


def test_local_interaction_kills_nonlocal_slots(even_kernel):
    hydro = compute_coefficients(even_kernel, n=48, kappa=0.0)
    assert np.max(np.abs(np.asarray(hydro.xi["slots"]))) == 0.0
    assert hydro.zeta[12] == 0.0  # the slot fed only by the nonlocal route


def test_time_route_table_consistency(pipeline_even):
    # lambda'_5 = -l1_12/2 and lambda''_10 = -lambda'_5 c2, rebuilt from the
    # raw bracket independently of the stored prime tables
    p = pipeline_even
    h, eq = p["hydro"], p["eq"]
    x = eq.rule.nodes
    l1_12 = eq.average(0.5 * (1 - x * x) * p["profiles"].b_par(x) * p["gci"].h(x))
    assert h.lam["l1_12"] == pytest.approx(l1_12, abs=1e-15)
    lp5 = -0.5 * l1_12
    assert h.lam["prime"][4] == pytest.approx(lp5, abs=1e-15)
    assert h.lam["double_prime"][9] == pytest.approx(-lp5 * h.c2, abs=1e-15)


def test_prefactor_uses_probability_average(pipeline_even):
    p = pipeline_even
    eq, h = p["eq"], p["hydro"]
    x = eq.rule.nodes
    bracket = eq.average((1 - x * x) * np.asarray(p["kernel"].nu(x)) * p["gci"].h(x))
    assert h.prefactor == pytest.approx(2.0 * p["kernel"].d / bracket, rel=1e-14)


def test_pipeline_determinism_bitwise(even_kernel):
    h1 = compute_coefficients(even_kernel, n=48, kappa=0.1)
    h2 = compute_coefficients(even_kernel, n=48, kappa=0.1)
    assert all_values(h1).tobytes() == all_values(h2).tobytes()


def test_self_convergence_degree_doubling(even_kernel):
    h64 = compute_coefficients(even_kernel, n=64, kappa=0.1)
    h128 = compute_coefficients(even_kernel, n=128, kappa=0.1)
    assert np.max(np.abs(all_values(h64) - all_values(h128))) < 1e-9


def test_sigma_shift_changes_nothing(even_kernel):
    h = compute_coefficients(even_kernel, n=48, kappa=0.1)
    h_shift = compute_coefficients(with_sigma_shift(even_kernel, 5.0), n=48, kappa=0.1)
    assert np.max(np.abs(all_values(h) - all_values(h_shift))) < 1e-12


def test_constant_ordering_invariants():
    for d in (0.2, 1.0, 2.0):
        for kernel in registry_kernels(d=d):
            h = compute_coefficients(kernel, n=48)
            assert 0.0 < h.c2 < h.c1 < 1.0
            assert h.c3 > 0.0


def test_theorem_coefficient_mapping(pipeline_even):
    h = pipeline_even["hydro"]
    z = h.zeta
    rho = 2.3
    q = h.q_coeffs(rho)
    dd = h.d_coeffs(rho)
    assert q == pytest.approx([z[6] / rho, z[0], z[2], z[3], z[5],
                               rho * z[7], rho * z[8], rho * z[9]], abs=0)
    assert dd == pytest.approx([z[4], rho * z[10], rho * z[1], rho * z[11],
                                rho * z[12]], abs=0)


def test_json_payload_schema(pipeline_even):
    payload = pipeline_even["hydro"].to_json_dict()
    assert set(payload) == {"kernel", "d", "kappa", "n", "c", "beta", "gamma",
                            "zeta", "intermediates", "residuals"}
    assert len(payload["zeta"]) == 13
    assert len(payload["c"]) == 3
    assert set(payload["intermediates"]) == {"lambda", "eta", "xi", "prefactor"}


def test_corruption_hook_changes_assembly(even_kernel):
    clean = compute_coefficients(even_kernel, n=48, kappa=0.1)
    try:
        coeffs_mod._corrupt_zeta_slot = 3
        bad = compute_coefficients(even_kernel, n=48, kappa=0.1)
    finally:
        coeffs_mod._corrupt_zeta_slot = None
    assert bad.zeta[2] != clean.zeta[2]
    rebuilt = bad.prefactor * (np.asarray(bad.lam["double_prime"])
                               + np.asarray(bad.eta["prime"])
                               + np.asarray(bad.xi["slots"]))
    assert np.max(np.abs(bad.zeta - rebuilt)) > 1e-6


def test_parallel_sweep_matches_serial(const_kernel):
    ds = [0.3, 0.7, 1.3, 2.1]
    serial = [compute_coefficients(replace(const_kernel, d=d), n=32) for d in ds]
    with ThreadPoolExecutor(max_workers=4) as pool:
        parallel = list(pool.map(
            lambda d: compute_coefficients(replace(const_kernel, d=d), n=32), ds))
    for a, b in zip(serial, parallel):
        assert all_values(a).tobytes() == all_values(b).tobytes()


def test_residuals_recorded(pipeline_even):
    res = pipeline_even["hydro"].residuals
    for key in ("c1_relation", "c2_relation", "c3_relation", "a_perp_moment",
                "b_par_moment", "gci_solve", "b2_solve", "h_max",
                "beta_dirichlet_diff"):
        assert key in res
    assert res["h_max"] <= 1e-10
