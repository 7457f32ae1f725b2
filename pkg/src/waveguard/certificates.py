"""Closed-form decay certificates and feasibility checks.

Every constant entering the exponential-decay guarantees is computed
mechanically from the feedback sector data, the forcing Lipschitz bound
and the affine multiplier weight, so the proved bounds can be compared
against simulated trajectories.  All outputs are pure functions of their
inputs.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ContractError, HypothesisViolatedError, NumericError
from .state_space import energy_quadratic_matrix, state_norm_matrix


@dataclass(frozen=True)
class WeightRho:
    """Affine, positive, increasing multiplier weight on [0, L]."""

    rho0: float
    rho_l: float
    length_l: float

    def __post_init__(self):
        if not (self.rho0 > 0 and self.rho_l > self.rho0):
            raise ContractError("weight must satisfy 0 < rho(0) < rho(L)")
        if not self.length_l > 0:
            raise ContractError("weight needs a positive domain length")

    @property
    def slope(self):
        return (self.rho_l - self.rho0) / self.length_l

    @property
    def sup_abs(self):
        return self.rho_l

    def value(self, x):
        return self.rho0 + self.slope * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class MonotoneCertificate:
    """Constants of the decay estimate for nonincreasing forcing.

    Guarantee: {E(t) - e_s}^+ <= m * exp(-mu t) * {E(0) - e_s}^+.
    """

    rho: WeightRho
    alpha1: float
    alpha2: float
    s_threshold: float
    sup_g_sq_on_ball: float
    c1: float
    c2: float
    c3: float
    tau: float
    c1_step2: float
    c2_tau: float
    r: float
    p: float
    e_s: float
    alpha: float
    mu: float
    m: float

    def hypothesis_checklist(self):
        return [
            {"condition": "sector lower bound positive (alpha1 > 0)",
             "value": self.alpha1, "passed": self.alpha1 > 0},
            {"condition": "weight affine positive increasing",
             "value": [self.rho.rho0, self.rho.rho_l],
             "passed": self.rho.rho_l > self.rho.rho0 > 0},
            {"condition": "observability time tau*C1 >= 2*C2 + 1",
             "value": self.tau * self.c1 - (2 * self.c2 + 1),
             "passed": self.tau * self.c1 >= 2 * self.c2 + 1 - 1e-12},
            {"condition": "contraction factor r in (0, 1)",
             "value": self.r, "passed": 0 < self.r < 1},
        ]

    def to_dict(self):
        return {
            "kind": "monotone",
            "rho0": self.rho.rho0, "rho_l": self.rho.rho_l,
            "length_l": self.rho.length_l,
            "alpha1": self.alpha1, "alpha2": self.alpha2,
            "s_threshold": self.s_threshold,
            "sup_g_sq_on_ball": self.sup_g_sq_on_ball,
            "c1": self.c1, "c2": self.c2, "c3": self.c3, "tau": self.tau,
            "c1_step2": self.c1_step2, "c2_tau": self.c2_tau,
            "r": self.r, "p": self.p, "e_s": self.e_s,
            "alpha": self.alpha, "mu": self.mu, "m": self.m,
            "hypotheses": self.hypothesis_checklist(),
        }


@dataclass(frozen=True)
class AntiDampingCertificate:
    """Constants of the decay estimate with energy-injecting forcing.

    Guarantee: E(t) <= (m2/m1) * exp(-mu t) * E(0), via the equivalence
    m1 E <= Gamma_rho <= m2 E of the perturbed energy.
    """

    q: float
    alpha1: float
    alpha2: float
    epsilon: float
    rho: WeightRho
    m1: float
    m2: float
    mu: float
    m_prefactor: float

    def hypothesis_checklist(self):
        margin = self.alpha1 / (1.0 + self.alpha2 ** 2)
        return [
            {"condition": "forcing Lipschitz bound below one half (q < 1/2)",
             "value": self.q, "passed": self.q < 0.5},
            {"condition": "sector margin alpha1/(1 + alpha2^2) > q",
             "value": margin - self.q, "passed": margin > self.q},
            {"condition": "sector holds globally (S == 0)",
             "value": 0.0, "passed": True},
            {"condition": "(q + eps)(1 + alpha2^2) <= alpha1 - eps",
             "value": (self.alpha1 - self.epsilon
                       - (self.q + self.epsilon) * (1 + self.alpha2 ** 2)),
             "passed": (self.q + self.epsilon) * (1 + self.alpha2 ** 2)
                       <= self.alpha1 - self.epsilon + 1e-12},
            {"condition": "q + eps <= (1 - eps)/2",
             "value": (1 - self.epsilon) / 2 - (self.q + self.epsilon),
             "passed": self.q + self.epsilon <= (1 - self.epsilon) / 2 + 1e-12},
            {"condition": "sup|rho| <= 1 - eps",
             "value": 1 - self.epsilon - self.rho.sup_abs,
             "passed": self.rho.sup_abs <= 1 - self.epsilon + 1e-12},
        ]

    def to_dict(self):
        return {
            "kind": "antidamping",
            "q": self.q, "alpha1": self.alpha1, "alpha2": self.alpha2,
            "epsilon": self.epsilon,
            "rho0": self.rho.rho0, "rho_l": self.rho.rho_l,
            "length_l": self.rho.length_l,
            "m1": self.m1, "m2": self.m2, "mu": self.mu,
            "m_prefactor": self.m_prefactor,
            "hypotheses": self.hypothesis_checklist(),
        }


@dataclass(frozen=True)
class DistanceLemmaConstant:
    """Coercivity constant of the energy on the complement of constants."""

    m1_numeric: float
    k: float
    n_cells: int


def build_monotone_certificate(sector, rho):
    """Assemble the decay constants for nonincreasing forcing.

    The observability time is fixed at the smallest admissible value
    tau = (2 C2 + 1)/C1 since the rate alpha/tau degrades with tau.
    """
    if sector.alpha1 <= 0:
        raise HypothesisViolatedError("sector lower bound positive",
                                      "alpha1 must be positive")
    c1 = min(rho.rho0, rho.slope)
    c2 = 2.0 * rho.rho_l
    c3 = rho.rho_l
    tau = (2.0 * c2 + 1.0) / c1
    # aggregate of the boundary-dissipation step: bounds int |vL|^2 via
    # (1/alpha1) int g*vL + tau S^2 and int |g|^2 via alpha2 int g*vL + tau sup
    c1_step2 = c2 + c3 * (1.0 / sector.alpha1 + sector.alpha2)
    c2_tau = tau * c3 * max(sector.s_threshold ** 2, sector.sup_g_sq_on_ball)
    r = 1.0 / (1.0 + 1.0 / c1_step2)
    p = c2_tau / (1.0 + 1.0 / c1_step2)
    e_s = p / (1.0 - r)
    alpha = math.log(1.0 / r)
    mu = alpha / tau
    m = math.exp(alpha)
    cert = MonotoneCertificate(
        rho=rho, alpha1=sector.alpha1, alpha2=sector.alpha2,
        s_threshold=sector.s_threshold,
        sup_g_sq_on_ball=sector.sup_g_sq_on_ball,
        c1=c1, c2=c2, c3=c3, tau=tau, c1_step2=c1_step2, c2_tau=c2_tau,
        r=r, p=p, e_s=e_s, alpha=alpha, mu=mu, m=m)
    if not (0 < r < 1 and mu > 0 and m > 1 and e_s >= 0):
        raise NumericError("monotone certificate invariants violated")
    return cert


def search_monotone_rho(sector, length_l, rho0_candidates=(0.5, 1.0, 2.0),
                        ratio_candidates=(1.5, 2.0, 4.0)):
    """Grid search over affine weights, maximizing the decay rate.

    Ties are broken by the smaller residual level e_s.
    """
    best = None
    for rho0 in rho0_candidates:
        for ratio in ratio_candidates:
            cert = build_monotone_certificate(
                sector, WeightRho(rho0, rho0 * ratio, length_l))
            if best is None or (cert.mu, -cert.e_s) > (best.mu, -best.e_s):
                best = cert
    return best


def build_antidamping_certificate(q, sector, length_l):
    """Assemble the decay constants for Lipschitz forcing of either sign.

    The margin parameter is set to the largest feasible value, which
    maximizes the decay rate; q = 0 (no forcing) is admitted.
    """
    if q < 0:
        raise ContractError("Lipschitz bound q must be nonnegative")
    if q >= 0.5:
        raise HypothesisViolatedError(
            "forcing Lipschitz bound below one half",
            f"q = {q} is not < 1/2")
    if sector.s_threshold > 0:
        raise HypothesisViolatedError(
            "sector holds globally",
            f"sector only valid for |s| >= {sector.s_threshold}")
    margin = sector.alpha1 / (1.0 + sector.alpha2 ** 2)
    if margin <= q:
        raise HypothesisViolatedError(
            "sector margin alpha1/(1 + alpha2^2) > q",
            f"margin {margin} <= q = {q}")
    epsilon = min((sector.alpha1 - q * (1.0 + sector.alpha2 ** 2))
                  / (2.0 + sector.alpha2 ** 2),
                  (1.0 - 2.0 * q) / 3.0)
    rho = WeightRho(2.0 * q + epsilon, 2.0 * q + 2.0 * epsilon, length_l)
    m1 = 1.0 - rho.sup_abs
    m2 = 1.0 + rho.sup_abs
    mu = min(epsilon, epsilon / (2.0 * length_l))
    cert = AntiDampingCertificate(
        q=q, alpha1=sector.alpha1, alpha2=sector.alpha2, epsilon=epsilon,
        rho=rho, m1=m1, m2=m2, mu=mu, m_prefactor=m2 / m1)
    if m1 <= 0 or any(not item["passed"] for item in cert.hypothesis_checklist()):
        raise NumericError("anti-damping certificate invariants violated")
    return cert


def attractivity_constant(cert, lemma_constant):
    """Prefactor K*m making the invariant-set attraction bound checkable."""
    if isinstance(cert, MonotoneCertificate):
        return lemma_constant.k * cert.m
    if isinstance(cert, AntiDampingCertificate):
        return lemma_constant.k * cert.m_prefactor
    raise ContractError("unsupported certificate type")


def distance_lemma_constant(grid):
    """Smallest Rayleigh quotient E(X)/||X||^2 orthogonal to constants.

    Solved as a dense generalized symmetric eigenproblem on the subspace
    orthogonal (in the state norm) to the constant state [1, 0]; grids are
    capped at 256 cells.
    """
    if grid.n_cells > 256:
        raise ContractError("distance-lemma constant needs n_cells <= 256")
    a_mat = 0.5 * energy_quadratic_matrix(grid)
    b_mat = state_norm_matrix(grid)
    n = grid.n_nodes
    e_vec = np.zeros(2 * n)
    e_vec[:n] = 1.0
    basis = scipy.linalg.null_space((b_mat @ e_vec)[None, :])
    try:
        eigvals = scipy.linalg.eigh(basis.T @ a_mat @ basis,
                                    basis.T @ b_mat @ basis,
                                    eigvals_only=True)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericError(f"restricted eigenproblem failed: {exc}") from exc
    m1 = float(eigvals[0])
    if m1 <= 0:
        raise NumericError("restricted energy form is not coercive")
    return DistanceLemmaConstant(m1_numeric=m1, k=1.0 / m1,
                                 n_cells=grid.n_cells)
