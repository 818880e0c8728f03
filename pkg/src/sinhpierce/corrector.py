"""Correction of the ansatz to a discrete solution u = U + phi.

The primary route iterates the contraction map phi -> T(-(R + N(phi))) from
phi = 0, where T inverts the linearized operator with zero boundary data.
A plain Newton iteration on the same discrete system provides an independent
second solver; both converge to the same discrete root, which is what the
agreement checks exploit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .bubbles import build_ansatz
from .coeffs import choose_scales, coefficient_set
from .errors import Diverged, NearSingular, SinhPierceError
from .geometry import FieldEvaluator, MeshPolicy, PierceSpec, build_mesh, build_pierced_domain
from .greens import GreenProvider
from .operators import (
    DIRICHLET_ZERO,
    Field,
    LinearOperator,
    get_ops,
    nonlinear_N,
    residual_R,
    semianalytic_laplacian_U,
    weight_W,
)

SUP_GUARD = 50.0
EIG_FLOOR = 1e-8


@dataclass
class SolveReport:
    """Everything measured during one correction run (plus sweep-level fits)."""

    rho: float = 0.0
    method: str = "fixed-point"
    status: str = "converged"
    iterations: int = 0
    contraction_factors: list = field(default_factory=list)
    updates_h01: list = field(default_factory=list)
    phi_sup: float = 0.0
    phi_h01: float = 0.0
    residual_l1: float = 0.0
    data_scale_l1: float = 0.0
    relative_residual: float = 0.0
    r_norms: dict = field(default_factory=dict)       # p -> ||R||_p before correction
    amplification_T: float = 0.0                      # ||phi_1|| / ||R||_p
    smallest_eigenvalue: float = float("nan")
    peaks: list = field(default_factory=list)         # signed peak height per annulus
    inner_sign_ok: bool = True
    farfield_error: float = float("nan")
    kernel_coefficients: list = field(default_factory=list)
    sigma_fits: dict = field(default_factory=dict)    # p -> fitted slope (sweep level)
    error: str = ""

    @property
    def max_contraction_factor(self):
        return max(self.contraction_factors) if self.contraction_factors else 0.0

    def records(self):
        ordered = [
            ("rho", self.rho), ("method", self.method), ("status", self.status),
            ("iterations", self.iterations),
            ("max_contraction_factor", self.max_contraction_factor),
            ("phi_sup", self.phi_sup), ("phi_h01", self.phi_h01),
            ("residual_l1", self.residual_l1), ("data_scale_l1", self.data_scale_l1),
            ("relative_residual", self.relative_residual),
            ("amplification_T", self.amplification_T),
            ("smallest_eigenvalue", self.smallest_eigenvalue),
            ("farfield_error", self.farfield_error),
            ("inner_sign_ok", self.inner_sign_ok),
            ("error", self.error),
        ]
        for p, v in sorted(self.r_norms.items()):
            ordered.append((f"r_norm_p{p}", v))
        for i, v in enumerate(self.peaks):
            ordered.append((f"peak_{i + 1}", v))
        for i, v in enumerate(self.kernel_coefficients):
            ordered.append((f"kernel_a_{i + 1}", v))
        for p, v in sorted(self.sigma_fits.items()):
            ordered.append((f"sigma_fit_p{p}", v))
        return ordered

    def write(self, path_prefix):
        with open(f"{path_prefix}.txt", "w") as f:
            for k, v in self.records():
                f.write(f"{k} {v}\n")
        with open(f"{path_prefix}_iterations.csv", "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["step", "update_h01", "contraction_factor"])
            for i, upd in enumerate(self.updates_h01):
                fac = self.contraction_factors[i - 1] if 0 < i <= len(self.contraction_factors) else ""
                wr.writerow([i + 1, f"{upd:.17g}", fac])


def _final_residual(phi, U, cfg, scales):
    """Discrete defect of u = U + phi relative to the data scale, both in L1."""
    mesh = U.mesh
    ops = get_ops(mesh)
    u = U.values + phi.values
    v1 = np.broadcast_to(np.asarray(cfg.V1(mesh.nodes[:, 0], mesh.nodes[:, 1]), float),
                         (mesh.n_nodes,))
    v2 = np.broadcast_to(np.asarray(cfg.V2(mesh.nodes[:, 0], mesh.nodes[:, 1]), float),
                         (mesh.n_nodes,))
    rho, tau = scales.rho, cfg.tau
    lap = semianalytic_laplacian_U(cfg, scales, mesh) + ops.laplacian(phi).values
    res = lap + rho * (v1 * np.exp(u) - v2 * np.exp(-tau * u))
    res[ops.boundary] = 0.0
    data = rho * (v1 * np.exp(u) + v2 * np.exp(-tau * u))
    res_l1 = ops.norm_lp(res, 1)
    data_l1 = ops.norm_lp(data, 1)
    return res_l1, data_l1


def fixed_point_correct(U: Field, cfg, scales, tol=1e-10, maxiter=50,
                        phi0=None, p_norms=(1.01, 1.1, 1.3)) -> tuple[Field, SolveReport]:
    """Iterate phi -> T(-(R + N(phi))) from phi = 0 until the update stalls."""
    mesh = U.mesh
    ops = get_ops(mesh)
    report = SolveReport(rho=scales.rho, method="fixed-point")
    L = LinearOperator(mesh, weight_W(U, cfg, scales))
    lam = L.smallest_eigenvalue()
    report.smallest_eigenvalue = lam
    if abs(lam) < EIG_FLOOR:
        report.status = "near-singular"
        raise NearSingular(f"linearized operator near resonance, |lambda| ~ {abs(lam):.3e}",
                           eigenvalue=lam)
    R = residual_R(U, cfg, scales)
    for p in p_norms:
        report.r_norms[p] = ops.norm_lp(R, p)

    phi = phi0.copy() if phi0 is not None else Field(mesh, np.zeros(mesh.n_nodes),
                                                     DIRICHLET_ZERO)
    prev_update = None
    for it in range(maxiter):
        rhs = Field(mesh, -(R.values + nonlinear_N(phi, U, cfg, scales).values))
        new = L.solve(rhs)
        upd = ops.norm_h01(Field(mesh, new.values - phi.values))
        report.updates_h01.append(upd)
        if it == 0 and phi0 is None:
            p_ref = min(report.r_norms)
            report.amplification_T = ops.norm_h01(new) / max(report.r_norms[p_ref], 1e-300)
        if prev_update is not None and prev_update > 0:
            report.contraction_factors.append(upd / prev_update)
        prev_update = upd
        phi = new
        report.iterations = it + 1
        if ops.norm_sup(phi) > SUP_GUARD:
            report.status = "diverged"
            report.error = f"sup norm {ops.norm_sup(phi):.3g} exceeded the guard"
            raise Diverged(report.error, report=report)
        if upd < tol * max(1.0, ops.norm_h01(phi)):
            break
    else:
        report.status = "diverged"
        report.error = f"no convergence in {maxiter} iterations " \
                       f"(last update {prev_update:.3e})"
        raise Diverged(report.error, report=report)

    report.status = "converged"
    report.phi_sup = ops.norm_sup(phi)
    report.phi_h01 = ops.norm_h01(phi)
    report.residual_l1, report.data_scale_l1 = _final_residual(phi, U, cfg, scales)
    report.relative_residual = report.residual_l1 / max(report.data_scale_l1, 1e-300)
    return phi, report


def newton_correct(U: Field, cfg, scales, tol=1e-10, maxiter=50,
                   phi0=None, p_norms=(1.01, 1.1, 1.3)) -> tuple[Field, SolveReport]:
    """Newton iteration on the same discrete system the fixed point solves."""
    mesh = U.mesh
    ops = get_ops(mesh)
    report = SolveReport(rho=scales.rho, method="newton")
    v1 = np.broadcast_to(np.asarray(cfg.V1(mesh.nodes[:, 0], mesh.nodes[:, 1]), float),
                         (mesh.n_nodes,))
    v2 = np.broadcast_to(np.asarray(cfg.V2(mesh.nodes[:, 0], mesh.nodes[:, 1]), float),
                         (mesh.n_nodes,))
    rho, tau = scales.rho, cfg.tau
    lapU = semianalytic_laplacian_U(cfg, scales, mesh)
    R = residual_R(U, cfg, scales)
    for p in p_norms:
        report.r_norms[p] = ops.norm_lp(R, p)

    phi = phi0.copy() if phi0 is not None else Field(mesh, np.zeros(mesh.n_nodes),
                                                     DIRICHLET_ZERO)
    prev_update = None
    for it in range(maxiter):
        if ops.norm_sup(phi) > SUP_GUARD:
            report.status = "diverged"
            report.error = f"sup norm {ops.norm_sup(phi):.3g} exceeded the guard"
            raise Diverged(report.error, report=report)
        u = U.values + phi.values
        res = lapU + ops.laplacian(phi).values \
            + rho * (v1 * np.exp(u) - v2 * np.exp(-tau * u))
        res[ops.boundary] = 0.0
        Wu = rho * v1 * np.exp(u) + rho * tau * v2 * np.exp(-tau * u)
        J = LinearOperator(mesh, Field(mesh, Wu))
        if it == 0:
            lam = J.smallest_eigenvalue()
            report.smallest_eigenvalue = lam
            if abs(lam) < EIG_FLOOR:
                report.status = "near-singular"
                raise NearSingular(
                    f"linearized operator near resonance, |lambda| ~ {abs(lam):.3e}",
                    eigenvalue=lam)
        delta = J.solve(Field(mesh, -res))
        upd = ops.norm_h01(delta)
        report.updates_h01.append(upd)
        if prev_update is not None and prev_update > 0:
            report.contraction_factors.append(upd / prev_update)
        prev_update = upd
        phi = Field(mesh, phi.values + delta.values, DIRICHLET_ZERO)
        report.iterations = it + 1
        if upd < tol * max(1.0, ops.norm_h01(phi)):
            break
    else:
        report.status = "diverged"
        report.error = f"no convergence in {maxiter} iterations"
        raise Diverged(report.error, report=report)

    report.status = "converged"
    report.phi_sup = ops.norm_sup(phi)
    report.phi_h01 = ops.norm_h01(phi)
    report.residual_l1, report.data_scale_l1 = _final_residual(phi, U, cfg, scales)
    report.relative_residual = report.residual_l1 / max(report.data_scale_l1, 1e-300)
    return phi, report


# ---------------------------------------------------------------------------
# end-to-end construction

@dataclass
class Solution:
    """Converged run: solution field plus every intermediate worth keeping."""

    u: Field
    phi: Field
    U: Field
    cfg: object
    scales: object
    coeffs: object
    pd: object
    mesh: object
    report: SolveReport


def farfield_target(cfg, gp, points):
    """Green combination the solution approaches away from the holes."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(pts.shape[0])
    for n, p in enumerate(pts):
        v = 0.0
        for i in range(cfg.m):
            g = gp.green(p, cfg.centers[i])
            coef = 2 * math.pi * (cfg.alphas[i] + 2)
            v += coef * g if i < cfg.m1 else -coef * g / cfg.tau
        out[n] = v
    return out


def _nearest_nodes(mesh, points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(pts.shape[0], dtype=int)
    for k, p in enumerate(pts):
        out[k] = int(np.argmin(np.hypot(mesh.nodes[:, 0] - p[0],
                                        mesh.nodes[:, 1] - p[1])))
    return out


def solution_value_at(sol, point) -> float:
    """Nearest-node sample of the solution (avoids interpolation error)."""
    node = _nearest_nodes(sol.mesh, np.asarray(point, dtype=float))[0]
    return float(sol.u.values[node])


def farfield_error_at(sol, gp, point) -> float:
    """|u - Green combination| at the mesh node nearest to the given point."""
    node = _nearest_nodes(sol.mesh, np.asarray(point, dtype=float))[0]
    target = farfield_target(sol.cfg, gp, sol.mesh.nodes[node])[0]
    return float(abs(sol.u.values[node] - target))


def farfield_sample_points(cfg, pd, n_per_ring=16, radii=(0.5, 0.7, 0.85)):
    """Deterministic sample points at distance > eta from every center."""
    pts = []
    for rad in radii:
        for k in range(n_per_ring):
            th = 2 * math.pi * (k + 0.5) / n_per_ring
            p = np.array([rad * math.cos(th), rad * math.sin(th)])
            d = np.hypot(p[0] - cfg.centers[:, 0], p[1] - cfg.centers[:, 1])
            if np.all(d > pd.eta * 1.05):
                pts.append(p)
    return np.asarray(pts)


def construct_solution(cfg, rho, policy: MeshPolicy | None = None, method="fixed-point",
                       gp: GreenProvider | None = None, tol=1e-10, maxiter=50,
                       phi0=None, p_norms=(1.01, 1.1, 1.3),
                       kernel_coeffs=True) -> Solution:
    """Full pipeline: scales -> coefficients -> projections -> correction."""
    policy = policy or MeshPolicy()
    gp = gp or GreenProvider(cfg.domain)
    scales = choose_scales(cfg, rho, gp)
    pd = build_pierced_domain(cfg.domain, PierceSpec(centers=cfg.centers, radii=scales.eps))
    mesh = build_mesh(pd, policy)
    coeffs = coefficient_set(cfg, scales, gp)
    U = build_ansatz(cfg, scales, mesh, coeffs=coeffs, gp=gp)

    start = None
    if phi0 is not None:
        start = Field(mesh, phi0, DIRICHLET_ZERO) if isinstance(phi0, np.ndarray) else phi0
    correct = fixed_point_correct if method == "fixed-point" else newton_correct
    phi, report = correct(U, cfg, scales, tol=tol, maxiter=maxiter, phi0=start,
                          p_norms=p_norms)
    u = Field(mesh, U.values + phi.values, DIRICHLET_ZERO)

    # annulus peaks and inner-region signs
    report.peaks = []
    report.inner_sign_ok = True
    for i in range(cfg.m):
        d = mesh.center_distance(i)
        ann = (d <= pd.eta) & (d >= scales.eps[i] * 0.999999)
        sign = cfg.sign(i)
        vals = sign * u.values[ann]
        report.peaks.append(float(vals.max()))
        inner = ann & (d <= math.sqrt(scales.eps[i] * pd.eta))
        if np.any(inner) and not (sign * u.values[inner]).max() > 0:
            report.inner_sign_ok = False

    pts = farfield_sample_points(cfg, pd)
    if len(pts):
        # compare field and target at the nearest nodes: same physical points,
        # so no interpolation error enters the measurement
        nodes = _nearest_nodes(mesh, pts)
        uh = u.values[nodes]
        report.farfield_error = float(
            np.abs(uh - farfield_target(cfg, gp, mesh.nodes[nodes])).max())

    if kernel_coeffs:
        from .verify import kernel_coefficient

        report.kernel_coefficients = [
            kernel_coefficient(phi, cfg, scales, pd, j) for j in range(cfg.m)
        ]
    return Solution(u=u, phi=phi, U=U, cfg=cfg, scales=scales, coeffs=coeffs,
                    pd=pd, mesh=mesh, report=report)


@dataclass
class SweepResult:
    rho_list: list
    solutions: list           # Solution or None per entry
    reports: list             # SolveReport per entry (failures get a stub)
    sigma_fits: dict          # p -> fitted residual slope, from converged entries
    insufficient_data: bool = False


def continuation_sweep(cfg, rho_list, policy: MeshPolicy | None = None,
                       method="fixed-point", gp: GreenProvider | None = None,
                       tol=1e-10, maxiter=50, p_norms=(1.01, 1.1, 1.3),
                       kernel_coeffs=True, warm_start=True) -> SweepResult:
    """Run the construction at each rho (descending), warm-starting phi."""
    rho_list = list(rho_list)
    if sorted(rho_list, reverse=True) != rho_list:
        raise ValueError("rho list must be sorted descending")
    gp = gp or GreenProvider(cfg.domain)
    policy = policy or MeshPolicy()
    solutions, reports = [], []
    prev = None
    for rho in rho_list:
        phi0 = None
        if warm_start and prev is not None:
            try:
                scales = choose_scales(cfg, rho, gp)
                pd = build_pierced_domain(cfg.domain,
                                          PierceSpec(centers=cfg.centers, radii=scales.eps))
                mesh = build_mesh(pd, policy)
                ev = FieldEvaluator(prev.mesh)
                vals = np.asarray(ev(prev.phi.values, mesh.nodes), dtype=float)
                vals[mesh.is_boundary] = 0.0
                # construct_solution rebuilds the same mesh deterministically,
                # so handing over plain nodal values is enough
                phi0 = vals
            except SinhPierceError:
                phi0 = None
        try:
            sol = construct_solution(cfg, rho, policy=policy, method=method, gp=gp,
                                     tol=tol, maxiter=maxiter, phi0=phi0,
                                     p_norms=p_norms, kernel_coeffs=kernel_coeffs)
            solutions.append(sol)
            reports.append(sol.report)
            prev = sol
        except SinhPierceError as exc:
            stub = getattr(exc, "report", None) or SolveReport(rho=rho, method=method)
            stub.status = stub.status if stub.status != "converged" else "diverged"
            stub.error = stub.error or str(exc)
            solutions.append(None)
            reports.append(stub)

    sigma_fits = {}
    good = [r for r in reports if r.status == "converged"]
    insufficient = len(good) < 3
    if not insufficient:
        logr = np.log([r.rho for r in good])
        for p in p_norms:
            vals = np.log([r.r_norms[p] for r in good])
            sigma_fits[p] = float(np.polyfit(logr, vals, 1)[0])
        for r in reports:
            r.sigma_fits = dict(sigma_fits)
    return SweepResult(rho_list=rho_list, solutions=solutions, reports=reports,
                       sigma_fits=sigma_fits, insufficient_data=insufficient)
