"""Scale selection and the small dense matching systems of the construction.

Everything here is exact linear algebra on Green-function values at the hole
centers: the interaction exponents rho_i, the scale parameters (d_i, r_i,
delta_i, eps_i) tied to one value of rho, the matching coefficients beta_ij,
and the kernel-side coefficients gamma_ij, gamma~_ij, gamma_j*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonpositivePotentialAtCenter, SingularSystem
from .geometry import DomainSpec
from .greens import GreenProvider, green_pair_table

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class BlowupConfig:
    """Full problem description.

    The first m1 holes carry positive bubbles fed by V1, the rest negative
    bubbles fed by V2 with exponent tau.  nu is folded into V2 up front.
    """

    domain: DomainSpec
    centers: np.ndarray          # (m, 2)
    alphas: np.ndarray           # (m,), each > 2 and not an even integer
    m1: int
    tau: float = 1.0
    V1: object = None            # callable (x, y) -> value; may be None when m1 == 0
    V2: object = None            # callable; may be None when m1 == m

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        a = np.atleast_1d(np.asarray(self.alphas, dtype=float))
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "alphas", a)
        m = c.shape[0]
        if a.shape[0] != m:
            raise ValueError("alphas and centers length mismatch")
        if not 0 <= self.m1 <= m:
            raise ValueError(f"m1={self.m1} outside 0..{m}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        for ai in a:
            if ai <= 2:
                raise ValueError(f"exponent alpha={ai} must exceed 2")
            near_even = round(ai / 2) * 2
            if near_even >= 4 and abs(ai - near_even) < 1e-9:
                raise ValueError(f"exponent alpha={ai} must not be an even integer")
        v1 = self.V1 if self.V1 is not None else _const(0.0)
        v2 = self.V2 if self.V2 is not None else _const(0.0)
        object.__setattr__(self, "V1", v1)
        object.__setattr__(self, "V2", v2)

    @property
    def m(self):
        return self.centers.shape[0]

    def sign(self, i):
        return 1.0 if i < self.m1 else -1.0


def _const(v):
    def f(x, y):
        return np.full(np.broadcast_shapes(np.shape(x), np.shape(y)), float(v))
    return f


def constant_potential(v):
    """Smooth constant potential, the common test case."""
    return _const(v)


@dataclass(frozen=True)
class ScaleParams:
    """Derived scale quantities tied to one rho.

    delta_pow holds d_i * rho, the exact value of delta_i^alpha_i; eps_pow
    holds r_i * rho = eps_i^((alpha_i - 2)/2).  delta and eps are the roots.
    """

    rho: float
    rho_i: np.ndarray
    d: np.ndarray
    r: np.ndarray
    delta: np.ndarray
    eps: np.ndarray
    delta_pow: np.ndarray
    eps_pow: np.ndarray
    log_delta: np.ndarray    # log(delta_i), exact in log space
    log_eps: np.ndarray      # log(eps_i); eps itself may underflow for alpha near 2


def compute_rho_i(cfg: BlowupConfig, gp: GreenProvider) -> np.ndarray:
    """Interaction exponents rho_i built from Green values at the centers."""
    H, G = green_pair_table(gp, cfg.centers)
    a = cfg.alphas
    m, m1, tau = cfg.m, cfg.m1, cfg.tau
    out = np.zeros(m)
    for i in range(m):
        v = (a[i] + 2) * H[i, i]
        for j in range(m):
            if j == i:
                continue
            w = (a[j] + 2) * G[i, j]
            if i < m1:
                v += w if j < m1 else -w / tau
            else:
                v += -tau * w if j < m1 else w
        out[i] = v
    return out


def choose_scales(cfg: BlowupConfig, rho: float, gp: GreenProvider) -> ScaleParams:
    """Scale parameters making the ansatz match the equation on each annulus."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    rho_i = compute_rho_i(cfg, gp)
    a = cfg.alphas
    m, m1, tau = cfg.m, cfg.m1, cfg.tau
    d = np.zeros(m)
    for i in range(m):
        if i < m1:
            v = float(cfg.V1(cfg.centers[i, 0], cfg.centers[i, 1]))
            if v <= 0:
                raise NonpositivePotentialAtCenter(
                    f"V1({tuple(cfg.centers[i])}) = {v:.3g} <= 0")
            d[i] = v * math.exp(2 * math.pi * rho_i[i]) / (2 * a[i] ** 2)
        else:
            v = float(cfg.V2(cfg.centers[i, 0], cfg.centers[i, 1]))
            if v <= 0:
                raise NonpositivePotentialAtCenter(
                    f"V2({tuple(cfg.centers[i])}) = {v:.3g} <= 0")
            d[i] = v * math.exp(2 * math.pi * rho_i[i]) / (2 * a[i] ** 2 * tau)
    r = d * np.exp(-math.pi * rho_i)
    delta_pow = d * rho
    eps_pow = r * rho
    log_delta = (np.log(d) + math.log(rho)) / a
    log_eps = 2.0 * (np.log(r) + math.log(rho)) / (a - 2.0)
    delta = np.exp(log_delta)
    with np.errstate(under="ignore"):
        eps = np.exp(log_eps)
    return ScaleParams(rho=float(rho), rho_i=rho_i, d=d, r=r, delta=delta, eps=eps,
                       delta_pow=delta_pow, eps_pow=eps_pow,
                       log_delta=log_delta, log_eps=log_eps)


# ---------------------------------------------------------------------------
# matching systems

def _beta_matrix(H, G, log_eps):
    m = len(log_eps)
    A = np.zeros((m, m))
    for j in range(m):
        A[j, j] = log_eps[j] / _TWO_PI - H[j, j]
        for k in range(m):
            if k != j:
                A[j, k] = -G[j, k]
    return A


def _check_solve(A, B, name):
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularSystem(f"{name} system ill conditioned (cond ~ {cond:.3g})",
                             condition=cond)
    X = np.linalg.solve(A, B)
    res = np.linalg.norm(A @ X - B) / max(np.linalg.norm(B), 1e-300)
    if res > 1e-10:
        raise SingularSystem(f"{name} system residual {res:.3e}", condition=cond)
    return X


def row_diagonally_dominant(A) -> bool:
    d = np.abs(np.diag(A))
    off = np.sum(np.abs(A), axis=1) - d
    return bool(np.all(d > off))


def solve_beta(cfg: BlowupConfig, scales: ScaleParams, gp: GreenProvider) -> np.ndarray:
    """Matching coefficients beta_ij; row i solves the shared m x m system."""
    H, G = green_pair_table(gp, cfg.centers)
    a = cfg.alphas
    m = cfg.m
    A = _beta_matrix(H, G, scales.log_eps)
    R = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            R[i, j] = -4 * math.pi * a[i] * H[i, j]
            if i == j:
                R[i, j] += 2 * a[i] * scales.log_delta[i]
            else:
                sep = math.hypot(cfg.centers[i, 0] - cfg.centers[j, 0],
                                 cfg.centers[i, 1] - cfg.centers[j, 1])
                R[i, j] += 2 * a[i] * math.log(sep)
    beta = _check_solve(A, R.T, "beta").T
    return beta


def beta_leading_term(cfg, scales) -> np.ndarray:
    """Kronecker-diagonal leading behaviour 4 pi alpha_i log(delta_i)/log(eps_j)."""
    m = cfg.m
    lead = np.zeros((m, m))
    for i in range(m):
        lead[i, i] = 4 * math.pi * cfg.alphas[i] * scales.log_delta[i] / scales.log_eps[i]
    return lead


def constraint_combination(cfg, beta) -> np.ndarray:
    """Weighted column sums that the scale choice drives to 2 pi (alpha_i - 2)."""
    m, m1, tau = cfg.m, cfg.m1, cfg.tau
    out = np.zeros(m)
    for i in range(m):
        pos = sum(beta[j, i] for j in range(m1))
        neg = sum(beta[j, i] for j in range(m1, m))
        out[i] = pos - neg / tau if i < m1 else -tau * pos + neg
    return out


def constraint_deviation(cfg, beta) -> np.ndarray:
    """Relative deviation of the combination from its target per hole."""
    target = _TWO_PI * (cfg.alphas - 2.0)
    return np.abs(constraint_combination(cfg, beta) - target) / target


@dataclass(frozen=True)
class CoefficientSet:
    beta: np.ndarray
    gamma: np.ndarray
    gamma_tilde: np.ndarray
    gamma_star: np.ndarray
    centers: np.ndarray = None
    alphas: np.ndarray = None
    diagonally_dominant: bool = True


def _gamma_matrix(H, G, log_eps):
    m = len(log_eps)
    A = np.zeros((m, m))
    for i in range(m):
        A[i, i] = -log_eps[i] / _TWO_PI + H[i, i]
        for k in range(m):
            if k != i:
                A[i, k] = G[k, i]
    return A


def solve_gamma(cfg: BlowupConfig, scales: ScaleParams, gp: GreenProvider):
    """Kernel-side coefficients (gamma_ij, gamma~_ij, gamma_j*)."""
    H, G = green_pair_table(gp, cfg.centers)
    a = cfg.alphas
    m = cfg.m
    A = _gamma_matrix(H, G, scales.log_eps)

    rhs_g = 2.0 * np.eye(m)
    gamma = _check_solve(A, rhs_g, "gamma")

    rhs_t = np.zeros((m, m))
    for j in range(m):
        for i in range(m):
            if i == j:
                rhs_t[i, j] = (4.0 / 3.0) * a[j] * scales.log_delta[j] + 8.0 / 3.0 \
                    + (8 * math.pi / 3.0) * a[j] * H[j, j]
            else:
                rhs_t[i, j] = (8 * math.pi / 3.0) * a[j] * G[i, j]
    gamma_tilde = _check_solve(A, rhs_t, "gamma-tilde")

    gamma_star = np.zeros(m)
    for j in range(m):
        num = gamma_tilde[j, j] * scales.log_delta[j] / _TWO_PI \
            + ((8 * math.pi / 3.0) * a[j] - gamma_tilde[j, j]) * H[j, j] \
            - sum(gamma_tilde[i, j] * G[i, j] for i in range(m) if i != j)
        den = 1.0 - gamma[j, j] * H[j, j] \
            - sum(gamma[i, j] * G[i, j] for i in range(m) if i != j) \
            + gamma[j, j] * scales.log_delta[j] / _TWO_PI
        gamma_star[j] = num / den
    return gamma, gamma_tilde, gamma_star


def coefficient_set(cfg: BlowupConfig, scales: ScaleParams, gp: GreenProvider) -> CoefficientSet:
    """Solve all matching systems for one rho and bundle the results."""
    H, G = green_pair_table(gp, cfg.centers)
    beta = solve_beta(cfg, scales, gp)
    gamma, gamma_tilde, gamma_star = solve_gamma(cfg, scales, gp)
    dom = row_diagonally_dominant(_beta_matrix(H, G, scales.log_eps)) \
        and row_diagonally_dominant(_gamma_matrix(H, G, scales.log_eps))
    return CoefficientSet(beta=beta, gamma=gamma, gamma_tilde=gamma_tilde,
                          gamma_star=gamma_star, centers=cfg.centers.copy(),
                          alphas=cfg.alphas.copy(), diagonally_dominant=dom)


def dominance_threshold(cfg: BlowupConfig, gp: GreenProvider,
                        lo=1e-12, hi=1.0, iters=60) -> float:
    """Largest rho (up to bisection tolerance) with row-dominant systems."""
    H, G = green_pair_table(gp, cfg.centers)

    def dominant(rho):
        s = choose_scales(cfg, rho, gp)
        return row_diagonally_dominant(_beta_matrix(H, G, s.log_eps)) \
            and row_diagonally_dominant(_gamma_matrix(H, G, s.log_eps))

    if dominant(hi):
        return hi
    if not dominant(lo):
        return 0.0
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if dominant(mid):
            lo = mid
        else:
            hi = mid
    return lo


def dump_csv(coeffs: CoefficientSet, path_prefix):
    """One CSV per matrix: rows (row, col, value)."""
    import csv

    names = {"beta": coeffs.beta, "gamma": coeffs.gamma,
             "gamma_tilde": coeffs.gamma_tilde,
             "gamma_star": coeffs.gamma_star.reshape(-1, 1)}
    paths = []
    for name, mat in names.items():
        path = f"{path_prefix}_{name}.csv"
        with open(path, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["row", "col", "value"])
            for i in range(mat.shape[0]):
                for j in range(mat.shape[1]):
                    wr.writerow([i + 1, j + 1, f"{mat[i, j]:.17g}"])
        paths.append(path)
    return paths
