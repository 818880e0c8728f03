import math

import numpy as np
import pytest

import sinhpierce.corrector as corrector_mod
from sinhpierce.coeffs import BlowupConfig, choose_scales, coefficient_set, constant_potential
from sinhpierce.corrector import (
    construct_solution,
    continuation_sweep,
    farfield_target,
    fixed_point_correct,
)
from sinhpierce.errors import Diverged, SinhPierceError
from sinhpierce.geometry import PierceSpec, build_mesh, build_pierced_domain
from sinhpierce.bubbles import build_ansatz
from sinhpierce.operators import DIRICHLET_ZERO, Field


def test_construct_solution_report(coarse_solution):
    r = coarse_solution.report
    assert r.status == "converged"
    assert r.iterations <= 50
    assert r.max_contraction_factor < 1.0
    assert r.relative_residual <= 1e-6
    # the discrete defect of u = U + phi sits at the iteration tail, far
    # below ten times the update tolerance relative to the data scale
    assert r.relative_residual <= 10 * 1e-10
    assert r.phi_sup < 0.05
    # the measured solver amplification ties the first iterate to the defect:
    # phi_1 = T(-R), so the first update equals amplification * ||R||_p
    p_ref = min(r.r_norms)
    assert r.updates_h01[0] == pytest.approx(r.amplification_T * r.r_norms[p_ref],
                                             rel=1e-12)


def test_peak_height_matches_scale_arithmetic(coarse_solution):
    # annulus maximum of the near-field form, maximized over the radius:
    # -2 log(d^a (2a/(a+2))) + ((a-2)/a) log(d^a (a-2)/(a+2)) + 2 pi rho_i
    s = coarse_solution.scales
    alpha = 3.0
    da = s.delta_pow[0]
    want = -2 * math.log(da * 2 * alpha / (alpha + 2)) \
        + ((alpha - 2) / alpha) * math.log(da * (alpha - 2) / (alpha + 2)) \
        + 2 * math.pi * s.rho_i[0]
    assert coarse_solution.report.peaks[0] == pytest.approx(want, abs=0.1)
    # and agrees with the bubble-height scale log(2 a^2/delta^alpha) within ~25%
    bubble_peak = math.log(2 * alpha ** 2 / da)
    assert coarse_solution.report.peaks[0] == pytest.approx(bubble_peak, rel=0.25)


def test_farfield_value_single_bubble(coarse_solution, gp):
    from sinhpierce.corrector import farfield_error_at

    # u(0.5, 0) ~ 10 pi G((0.5,0), 0) = 5 log 2
    err = farfield_error_at(coarse_solution, gp, (0.5, 0.0))
    assert err <= 0.05
    target = farfield_target(coarse_solution.cfg, gp, np.array([[0.5, 0.0]]))[0]
    assert target == pytest.approx(5 * math.log(2), rel=1e-12)


def test_newton_agrees_with_fixed_point(single_cfg, gp, coarse_policy, coarse_solution):
    sol_n = construct_solution(single_cfg, 1e-3, policy=coarse_policy, gp=gp,
                               method="newton")
    assert sol_n.report.status == "converged"
    assert np.abs(sol_n.u.values - coarse_solution.u.values).max() <= 1e-8
    # quadratic tail: the last Newton step shrinks much faster than linearly
    upd = sol_n.report.updates_h01
    if len(upd) >= 2 and upd[-2] > 1e-13:
        assert upd[-1] <= max(10 * upd[-2] ** 2 / max(upd[0], 1e-300), 1e-12)


def test_zero_defect_gives_zero_correction(single_cfg, gp, coarse_policy, monkeypatch):
    # force R = 0: the map phi -> T(-(R + N(phi))) fixes phi = 0 in one sweep
    import sinhpierce.operators as op_mod

    real = op_mod.residual_R

    def zero_R(U, cfg, scales, path="semianalytic"):
        out = real(U, cfg, scales, path)
        out.values[:] = 0.0
        return out

    monkeypatch.setattr(corrector_mod, "residual_R", zero_R)
    sol = construct_solution(single_cfg, 1e-3, policy=coarse_policy, gp=gp,
                             kernel_coeffs=False)
    assert sol.report.iterations == 1
    assert np.abs(sol.phi.values).max() == 0.0


def test_divergence_guard(single_cfg, gp, coarse_policy):
    # a grossly wrong ansatz (scaled up threefold) breaks the contraction
    scales = choose_scales(single_cfg, 1e-2, gp)
    pd = build_pierced_domain(single_cfg.domain,
                              PierceSpec(single_cfg.centers, scales.eps))
    mesh = build_mesh(pd, coarse_policy)
    coeffs = coefficient_set(single_cfg, scales, gp)
    U = build_ansatz(single_cfg, scales, mesh, coeffs=coeffs, gp=gp)
    bad = Field(mesh, 3.0 * U.values, DIRICHLET_ZERO)
    with pytest.raises(Diverged):
        fixed_point_correct(bad, single_cfg, scales, maxiter=30)


def test_sweep_full_run(single_cfg, gp, coarse_policy):
    sw = continuation_sweep(single_cfg, [1e-2, 1e-3, 1e-4], policy=coarse_policy,
                            gp=gp, kernel_coeffs=False)
    assert all(r.status == "converged" for r in sw.reports)
    assert not sw.insufficient_data
    assert sw.sigma_fits[1.01] > 0.5
    sups = [r.phi_sup for r in sw.reports]
    assert sups[0] > sups[1] > sups[2]


def test_sweep_single_entry_flagged(single_cfg, gp, coarse_policy):
    sw = continuation_sweep(single_cfg, [1e-3], policy=coarse_policy, gp=gp,
                            kernel_coeffs=False)
    assert sw.insufficient_data
    assert sw.sigma_fits == {}
    assert len(sw.reports) == 1


def test_sweep_isolates_failures(single_cfg, gp, coarse_policy, monkeypatch):
    real = corrector_mod.construct_solution
    calls = []

    def flaky(cfg, rho, **kw):
        calls.append(rho)
        if rho == 1e-3:
            raise SinhPierceError("synthetic failure at the middle step")
        return real(cfg, rho, **kw)

    monkeypatch.setattr(corrector_mod, "construct_solution", flaky)
    sw = corrector_mod.continuation_sweep(single_cfg, [1e-2, 1e-3, 1e-4],
                                          policy=coarse_policy, gp=gp,
                                          kernel_coeffs=False)
    statuses = [r.status for r in sw.reports]
    assert statuses[0] == "converged"
    assert statuses[1] != "converged"
    assert statuses[2] == "converged"
    assert sw.reports[1].error != ""
    assert calls == [1e-2, 1e-3, 1e-4]


def test_sweep_rejects_unsorted(single_cfg, gp, coarse_policy):
    with pytest.raises(ValueError):
        continuation_sweep(single_cfg, [1e-4, 1e-2], policy=coarse_policy, gp=gp)


def test_negative_liouville_case(disk, gp, coarse_policy):
    # m1 = 0 with V1 absent: all bubbles blow down
    cfg = BlowupConfig(domain=disk, centers=[[0.0, 0.0]], alphas=[3.0], m1=0,
                       tau=1.0, V1=None, V2=constant_potential(1.0))
    sol = construct_solution(cfg, 1e-2, policy=coarse_policy, gp=gp,
                             kernel_coeffs=False)
    assert sol.report.status == "converged"
    d = sol.mesh.center_distance(0)
    inner = d <= math.sqrt(sol.scales.eps[0] * sol.pd.eta)
    assert sol.u.values[inner].min() < -5
    assert sol.report.peaks[0] > 5  # peak records the signed magnitude


def test_report_serialization(tmp_path, coarse_solution):
    prefix = tmp_path / "rep"
    coarse_solution.report.write(str(prefix))
    text = open(f"{prefix}.txt").read()
    assert "status converged" in text
    assert "phi_sup" in text
    lines = open(f"{prefix}_iterations.csv").read().strip().splitlines()
    assert lines[0] == "step,update_h01,contraction_factor"
    assert len(lines) == 1 + coarse_solution.report.iterations
