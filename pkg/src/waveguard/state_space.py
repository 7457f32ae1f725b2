"""Discrete energy-space primitives for the boundary-coupled wave model.

A state pairs a displacement profile u with a velocity profile v on a
uniform node grid over (0, L).  The velocity at x = 0 is also the momentum
of the boundary mass, so the velocity norm carries an extra point term
v(0)^2 on top of the L2 integral, and likewise the displacement norm
carries the point evaluation u(0)^2.

Quadrature conventions: trapezoid rule for L2 inner products, cell
differences (midpoint rule on the derivative) for the stiffness form.
These match the finite-difference solver's natural discrete energy.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ContractError, NumericError

_SECULAR_MAX_ITER = 200


@dataclass(frozen=True)
class Grid:
    """Uniform grid with N cells (N+1 nodes) on (0, length_l)."""

    length_l: float
    n_cells: int

    def __post_init__(self):
        if not self.length_l > 0:
            raise ContractError("grid length must be positive")
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise ContractError("n_cells must be an integer >= 4")

    @property
    def dx(self):
        return self.length_l / self.n_cells

    @property
    def n_nodes(self):
        return self.n_cells + 1

    def nodes(self):
        return np.linspace(0.0, self.length_l, self.n_nodes)

    def trapezoid_weights(self):
        w = np.full(self.n_nodes, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


@dataclass(frozen=True)
class FieldState:
    """Snapshot [u, v]; v[0] doubles as the boundary velocity."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.ndim != 1 or u.shape != v.shape:
            raise ContractError("u and v must be 1-D arrays of identical length")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ContractError("state entries must be finite")
        if u.size < 5:
            raise ContractError("state needs at least 5 nodes (n_cells >= 4)")
        u = u.copy()
        v = v.copy()
        u.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def boundary_velocity(self):
        return self.v[0]


@dataclass(frozen=True)
class EnergyBreakdown:
    potential: float
    kinetic: float
    boundary_kinetic: float
    total: float

    @classmethod
    def from_parts(cls, potential, kinetic, boundary_kinetic):
        return cls(potential, kinetic, boundary_kinetic,
                   potential + kinetic + boundary_kinetic)


@dataclass(frozen=True)
class SublevelSetSpec:
    """Energy sublevel set {E(u, v) <= level_e}."""

    level_e: float

    def __post_init__(self):
        if self.level_e < 0:
            raise ContractError("sublevel energy must be nonnegative")


def _check_conforming(state, grid):
    if state.u.size != grid.n_nodes:
        raise ContractError(
            f"state has {state.u.size} nodes, grid expects {grid.n_nodes}")


def bilinear_a(u1, u2, grid):
    """Stiffness form: integral of u1' u2' by the cell-difference rule."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if u1.shape != (grid.n_nodes,) or u2.shape != (grid.n_nodes,):
        raise ContractError("displacement vectors must conform to the grid")
    return float(np.dot(np.diff(u1), np.diff(u2)) / grid.dx)


def h_inner(v1, v2, grid):
    """Velocity-space inner product: trapezoid L2 plus the v(0) point mass."""
    w = grid.trapezoid_weights()
    return float(np.dot(w * v1, v2) + v1[0] * v2[0])


def state_inner(state1, state2, grid):
    """Full state-space inner product (displacement part + velocity part)."""
    w = grid.trapezoid_weights()
    u_part = (float(np.dot(w * state1.u, state2.u))
              + state1.u[0] * state2.u[0]
              + bilinear_a(state1.u, state2.u, grid))
    return u_part + h_inner(state1.v, state2.v, grid)


def energy(state, grid):
    """Mechanical energy split into potential, kinetic and boundary parts.

    The velocity norm counts v[0] once inside the trapezoid term and once
    more as the separate boundary term, mirroring the point mass carried by
    the moving boundary.
    """
    _check_conforming(state, grid)
    w = grid.trapezoid_weights()
    potential = 0.5 * bilinear_a(state.u, state.u, grid)
    kinetic = 0.5 * float(np.dot(w, state.v ** 2))
    boundary = 0.5 * float(state.v[0] ** 2)
    return EnergyBreakdown.from_parts(potential, kinetic, boundary)


def mean_functional(state, grid):
    """Mean value of the displacement component."""
    _check_conforming(state, grid)
    return float(np.dot(grid.trapezoid_weights(), state.u)) / grid.length_l


def _constant_fit(state, grid):
    # Shared scalar for both the projection and the stationary distance:
    # c minimizing ||u - c||_L2^2 + |u(0) - c|^2, which is also the
    # coefficient of [1, 0] in the state-space inner product.
    w = grid.trapezoid_weights()
    return (float(np.dot(w, state.u)) + state.u[0]) / (grid.length_l + 1.0)


def project_orthogonal_to_constants(state, grid):
    """Remove the component along the constant state [1, 0].

    The result is orthogonal to constants in the discrete state-space inner
    product and has the same energy (only a constant is subtracted from u).
    """
    _check_conforming(state, grid)
    c = _constant_fit(state, grid)
    return FieldState(state.u - c, state.v)


def dist_to_stationary(state, grid):
    """Exact distance to the set of rest states [c, 0].

    The scalar minimum over c is solved in closed form (quadratic in c).
    """
    _check_conforming(state, grid)
    w = grid.trapezoid_weights()
    c = _constant_fit(state, grid)
    d2 = (h_inner(state.v, state.v, grid)
          + bilinear_a(state.u, state.u, grid)
          + float(np.dot(w, (state.u - c) ** 2))
          + (state.u[0] - c) ** 2)
    return float(np.sqrt(max(d2, 0.0)))


def dist_to_sublevel_bound(state, spec, grid, k_const):
    """Upper bound sqrt(K * {E(X) - E}^+) on the distance to {E <= level}."""
    if not k_const > 0:
        raise ContractError("distance-lemma constant K must be positive")
    excess = energy(state, grid).total - spec.level_e
    return float(np.sqrt(k_const * max(excess, 0.0)))


def energy_quadratic_matrix(grid):
    """Matrix A with E(X) = 0.5 * X^T A X for stacked X = [u, v]."""
    n = grid.n_nodes
    dx = grid.dx
    main = np.full(n, 2.0 / dx)
    main[0] = main[-1] = 1.0 / dx
    stiff = (np.diag(main)
             + np.diag(np.full(n - 1, -1.0 / dx), 1)
             + np.diag(np.full(n - 1, -1.0 / dx), -1))
    h_gram = np.diag(grid.trapezoid_weights())
    h_gram[0, 0] += 1.0
    a_mat = np.zeros((2 * n, 2 * n))
    a_mat[:n, :n] = stiff
    a_mat[n:, n:] = h_gram
    return a_mat


def state_norm_matrix(grid):
    """Gram matrix B of the state-space norm for stacked X = [u, v]."""
    n = grid.n_nodes
    a_mat = energy_quadratic_matrix(grid)
    b_mat = a_mat.copy()
    # displacement block additionally carries the L2 and u(0) terms
    b_mat[:n, :n] += np.diag(grid.trapezoid_weights())
    b_mat[0, 0] += 1.0
    return b_mat


def _secular_solve(gammas, coeffs_sq, level, e_of_x):
    """Root of 0.5*sum(g*c^2/(1+s*g)^2) = level for s >= 0 (monotone)."""

    def phi(s):
        return 0.5 * float(np.sum(gammas * coeffs_sq / (1.0 + s * gammas) ** 2)) - level

    def dphi(s):
        return -float(np.sum(gammas ** 2 * coeffs_sq / (1.0 + s * gammas) ** 3))

    # exclude the zero mode (constants) from the bracket estimate
    gamma_pos = gammas[gammas > 1e-12 * gammas.max()]
    g_min = float(gamma_pos.min())
    hi = (np.sqrt(e_of_x / level) - 1.0) / g_min
    while phi(hi) > 0.0:  # guard against roundoff in the analytic bracket
        hi *= 2.0
    lo = 0.0
    s = 0.5 * hi
    for _ in range(_SECULAR_MAX_ITER):
        val = phi(s)
        if abs(val) <= 1e-14 * max(level, 1.0):
            return s
        if val > 0.0:
            lo = s
        else:
            hi = s
        if hi - lo <= max(1e-12, 8e-16 * lo):
            return 0.5 * (lo + hi)
        step = val / dphi(s)
        s_newton = s - step
        if lo < s_newton < hi:
            s = s_newton
        else:
            s = 0.5 * (lo + hi)
    raise NumericError("secular equation did not converge in 200 iterations")


def dist_to_sublevel_exact(state, spec, grid):
    """Exact state-space distance to the energy sublevel set.

    Diagonalizes the energy form against the state-norm form (dense
    generalized symmetric eigenproblem, so grids are capped at 64 cells) and
    solves the scalar secular equation in the Lagrange multiplier.
    """
    _check_conforming(state, grid)
    if grid.n_cells > 64:
        raise ContractError("exact sublevel distance needs n_cells <= 64")
    e_of_x = energy(state, grid).total
    if e_of_x <= spec.level_e:
        return 0.0
    if spec.level_e == 0.0:
        # the zero sublevel set is exactly the rest states
        return dist_to_stationary(state, grid)

    a_mat = energy_quadratic_matrix(grid)
    b_mat = state_norm_matrix(grid)
    gammas, vecs = scipy.linalg.eigh(a_mat, b_mat)
    gammas = np.clip(gammas, 0.0, None)
    x = np.concatenate([state.u, state.v])
    coeffs = vecs.T @ (b_mat @ x)
    coeffs_sq = coeffs ** 2

    s_star = _secular_solve(gammas, coeffs_sq, spec.level_e, e_of_x)
    shrink = s_star * gammas / (1.0 + s_star * gammas)
    d2 = float(np.sum(coeffs_sq * shrink ** 2))
    return float(np.sqrt(max(d2, 0.0)))
