"""Checks of the model identities and decay claims on computed trajectories.

Everything here consumes immutable trajectories and certificates and is
side-effect free: residuals of the energy and multiplier identities, the
perturbed-energy functional, decay-rate fits, bound verification,
stationary-limit detection and empirical basin probing.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .certificates import (AntiDampingCertificate, MonotoneCertificate,
                           build_antidamping_certificate)
from .errors import ContractError, FitUnavailableError, HypothesisViolatedError, \
    StepFailureError
from .nonlinearities import lipschitz_constant, sector_params
from .state_space import dist_to_stationary, energy, mean_functional

DEFAULT_SLACK = 1.05
ABSOLUTE_FLOOR = 1e-12


@dataclass(frozen=True)
class DecayFit:
    mu_obs: float
    m_obs: float
    r_squared: float
    window: tuple

    def __post_init__(self):
        if not self.window[0] < self.window[1]:
            raise ContractError("fit window must have t_start < t_end")


@dataclass(frozen=True)
class BoundReport:
    holds: bool
    worst_margin: float
    worst_time: float


@dataclass(frozen=True)
class BasinEstimate:
    amplitude: float
    status: str  # "bracketed" | "all_decay" | "none_decay"


def energy_identity_residual(traj, g, forcing):
    """Residual of the energy balance at every recorded step.

    residual(tau) = [E(tau) - E(0)] - int F(v0) v0 dt + int g(vL) vL dt,
    with trapezoid time quadrature over the per-step traces.  Vanishes in
    the continuum; what remains is discretization error.
    """
    tr = traj.traces
    work_in = cumulative_trapezoid(tr.F_of_v0 * tr.v0, tr.t, initial=0.0)
    work_out = cumulative_trapezoid(tr.g_of_vL * tr.vL, tr.t, initial=0.0)
    e_tot = traj.energies.total
    return (e_tot - e_tot[0]) - work_in + work_out


def _cross_term(state, rho_mid, dx):
    du = np.diff(state.u)
    v_mid = 0.5 * (state.v[:-1] + state.v[1:])
    return float((rho_mid * du) @ v_mid)


def multiplier_identity_residual(traj, rho):
    """Sum of the three terms of the space-time multiplier identity.

    Interior integrals use the stored state snapshots (stride-limited in
    time); the boundary integral uses the per-step traces.  The sum
    vanishes in the continuum.
    """
    if len(traj.states) < 2:
        raise ContractError("need at least two state snapshots")
    grid = traj.grid
    dx = grid.dx
    x_mid = 0.5 * (grid.nodes()[:-1] + grid.nodes()[1:])
    rho_mid = rho.value(x_mid)
    wt = grid.trapezoid_weights()

    # 2 * int rho u_t u_x dx, evaluated at the window ends
    t1 = 2.0 * (_cross_term(traj.states[-1], rho_mid, dx)
                - _cross_term(traj.states[0], rho_mid, dx))

    density = np.empty(len(traj.states))
    for i, st in enumerate(traj.states):
        du = np.diff(st.u)
        density[i] = rho.slope * (float(wt @ (st.v ** 2))
                                  + float(du @ du) / dx)
    t2 = float(np.trapezoid(density, traj.state_times))

    tau = traj.state_times[-1]
    tr = traj.traces
    mask = tr.t <= tau * (1.0 + 1e-12)
    boundary = (rho.rho_l * (tr.vL[mask] ** 2 + tr.dxuL[mask] ** 2)
                - rho.rho0 * (tr.v0[mask] ** 2 + tr.dxu0[mask] ** 2))
    t3 = float(np.trapezoid(boundary, tr.t[mask]))

    return t1 + t2 - t3


def lyapunov_gamma(state, rho, grid):
    """Energy perturbed by the weighted cross term int rho u_x v dx.

    Midpoint quadrature with rho at cell centers and v averaged to cell
    centers; the cross term is bounded by sup|rho| times the energy, so
    the functional stays equivalent to the energy when sup|rho| < 1.
    """
    if state.u.size != grid.n_nodes:
        raise ContractError("state does not conform to the grid")
    x_mid = 0.5 * (grid.nodes()[:-1] + grid.nodes()[1:])
    return (energy(state, grid).total
            + _cross_term(state, rho.value(x_mid), grid.dx))


def fit_decay_rate(times, energies, e_s, floor=None, t_start=0.0):
    """Least-squares exponential fit of the excess energy above e_s.

    Fits log({E(t) - e_s}^+) over the samples past t_start whose excess
    stays above the floor (default 1e-10 of the initial excess, below
    which discretization noise dominates).
    """
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    excess0 = max(energies[0] - e_s, 0.0)
    if excess0 <= 0:
        raise FitUnavailableError("initial excess energy is zero")
    if floor is None:
        floor = 1e-10 * excess0
    excess = energies - e_s
    mask = (times >= t_start) & (excess >= floor)
    if mask.sum() < 2:
        raise FitUnavailableError(
            "no usable window: series not above the floor past the transient")
    t_fit = times[mask]
    y = np.log(excess[mask])
    slope, intercept = np.polyfit(t_fit, y, 1)
    y_hat = slope * t_fit + intercept
    ss_res = float(np.sum((y - y_hat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DecayFit(mu_obs=-float(slope),
                    m_obs=float(np.exp(intercept) / excess0),
                    r_squared=r_squared,
                    window=(float(t_fit[0]), float(t_fit[-1])))


def check_decay_bound(times, energies, cert, slack=DEFAULT_SLACK):
    """Pointwise check of the certified exponential envelope.

    Applies the multiplicative slack (separating discretization error from
    a genuine violation) plus a small absolute floor, and reports the worst
    margin RHS - LHS over the sampled times.
    """
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if isinstance(cert, MonotoneCertificate):
        lhs = np.maximum(energies - cert.e_s, 0.0)
        envelope = cert.m * np.exp(-cert.mu * times) * max(energies[0] - cert.e_s, 0.0)
    elif isinstance(cert, AntiDampingCertificate):
        lhs = energies
        envelope = cert.m_prefactor * np.exp(-cert.mu * times) * energies[0]
    else:
        raise ContractError("unsupported certificate type")
    margins = slack * envelope + ABSOLUTE_FLOOR - lhs
    worst = int(np.argmin(margins))
    return BoundReport(holds=bool(margins[worst] >= 0.0),
                       worst_margin=float(margins[worst]),
                       worst_time=float(times[worst]))


def stationary_limit(traj, threshold=1e-6):
    """Constant level the displacement settles at, plus a convergence flag."""
    final = traj.states[-1]
    u_inf = mean_functional(final, traj.grid)
    dist = dist_to_stationary(final, traj.grid)
    sup_dev = float(np.max(np.abs(final.u - u_inf)))
    return u_inf, bool(dist <= threshold and sup_dev <= threshold)


def _decays_under(cert, traj, slack):
    return check_decay_bound(traj.times, traj.energies.total, cert,
                             slack=slack).holds


def probe_stability_basin(scenario, amplitude_range, n_bisect=8,
                          slack=DEFAULT_SLACK):
    """Empirical basin edge for forcing that is gentle near rest only.

    Bisects over the initial amplitude for the largest value whose
    trajectory still satisfies the exponential envelope built from the
    local Lipschitz slope.  Purely empirical: the guaranteed basin radius
    has no closed form here.
    """
    from .config import build_feedback, build_forcing, build_grid, \
        build_solver_config  # deferred: avoids an import cycle
    from .solver import make_initial, simulate

    grid = build_grid(scenario)
    g = build_feedback(scenario)
    forcing = build_forcing(scenario)
    lips = lipschitz_constant(forcing)
    if lips.q_local >= 0.5:
        raise HypothesisViolatedError(
            "forcing Lipschitz bound below one half",
            f"local slope {lips.q_local} is not < 1/2")
    cert = build_antidamping_certificate(lips.q_local, sector_params(g),
                                         grid.length_l)
    if "amplitude" not in scenario.init.params:
        raise ContractError("basin probing needs an amplitude-scaled initial kind")

    solver_config = build_solver_config(scenario)

    def decays(amplitude):
        init_params = dict(scenario.init.params, amplitude=amplitude)
        state = make_initial(scenario.init.kind, init_params, grid)
        try:
            traj = simulate(state, g, forcing, grid, solver_config)
        except StepFailureError:
            return False
        return _decays_under(cert, traj, slack)

    lo_amp, hi_amp = amplitude_range
    if not 0 < lo_amp < hi_amp:
        raise ContractError("amplitude range must satisfy 0 < lo < hi")
    if decays(hi_amp):
        return BasinEstimate(amplitude=float(hi_amp), status="all_decay")
    if not decays(lo_amp):
        return BasinEstimate(amplitude=0.0, status="none_decay")
    lo, hi = float(lo_amp), float(hi_amp)
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        if decays(mid):
            lo = mid
        else:
            hi = mid
    return BasinEstimate(amplitude=lo, status="bracketed")


def scaled_certificate(cert, mu_scale):
    """Copy of a certificate with an inflated rate; falsifiability hook."""
    return replace(cert, mu=cert.mu * mu_scale)
