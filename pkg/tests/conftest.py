"""Shared scenario fixtures; heavy runs are session-scoped and reused."""

import time
from dataclasses import dataclass

import numpy as np
import pytest

from waveguard import (FeedbackLaw, ForcingLaw, Grid, SolverConfig,
                       build_antidamping_certificate,
                       build_monotone_certificate, make_initial,
                       sector_params, simulate)
from waveguard.certificates import WeightRho

PULSE_PARAMS = {"amplitude": 1.0, "x0": 0.5, "width": 0.05}


@dataclass
class ScenarioRun:
    grid: object
    traj: object
    cert: object = None
    elapsed: float = 0.0

    def __iter__(self):  # keep (grid, traj[, cert]) unpacking working
        yield self.grid
        yield self.traj
        if self.cert is not None:
            yield self.cert


def run_transparent(n_cells, t_final, stride=1):
    t0 = time.perf_counter()
    grid = Grid(1.0, n_cells)
    init = make_initial("right_moving_pulse", PULSE_PARAMS, grid)
    traj = simulate(init, FeedbackLaw.linear_gain(1.0), ForcingLaw.zero(),
                    grid, SolverConfig(cfl_lambda=0.9, t_final=t_final,
                                       sample_stride=stride))
    return ScenarioRun(grid, traj, elapsed=time.perf_counter() - t0)


@pytest.fixture(scope="session")
def transparent_400():
    """Acceptance scenario: transparent boundary, N=400, t_final=3."""
    return run_transparent(400, 3.0, stride=1)


@pytest.fixture(scope="session")
def transparent_refinement():
    """Stride-5 runs over N in {100, 200, 400, 800} for convergence studies."""
    return {n: run_transparent(n, 1.5, stride=5) for n in (100, 200, 400, 800)}


@pytest.fixture(scope="session")
def monotone_sine_run():
    """g = linear gain 1, F = monotone damping, sine mode, t_final = 50."""
    t0 = time.perf_counter()
    grid = Grid(1.0, 128)
    init = make_initial("sine_mode", {"amplitude": 1.0, "mode": 1}, grid)
    g_law = FeedbackLaw.linear_gain(1.0)
    cert = build_monotone_certificate(sector_params(g_law),
                                      WeightRho(1.0, 2.0, 1.0))
    traj = simulate(init, g_law, ForcingLaw.monotone_damping(1.0), grid,
                    SolverConfig(cfl_lambda=0.9, t_final=50.0,
                                 sample_stride=20), rho=cert.rho)
    return ScenarioRun(grid, traj, cert, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def antidamping_run():
    """g = identity, F = 0.4 tanh anti-damping, t_final = 200."""
    t0 = time.perf_counter()
    grid = Grid(1.0, 128)
    init = make_initial("sine_mode", {"amplitude": 1.0, "mode": 1}, grid)
    cert = build_antidamping_certificate(
        0.4, sector_params(FeedbackLaw.linear_gain(1.0)), 1.0)
    traj = simulate(init, FeedbackLaw.linear_gain(1.0),
                    ForcingLaw.tanh_antidamping(0.4), grid,
                    SolverConfig(cfl_lambda=0.9, t_final=200.0,
                                 sample_stride=50), rho=cert.rho)
    return ScenarioRun(grid, traj, cert, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
