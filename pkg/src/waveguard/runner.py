"""Experiment execution: simulate / certify / verify / sweep / oracle.

Commands return (report dict, exit code) and persist artifacts under the
output directory: delimited series (energy.csv, traces.csv, snapshots.csv,
summary.csv, comparison.csv), report.json / certificate.json, and rendered
figures.  Exit codes: 0 success, 1 bound violation, 2 hypothesis violation,
3 solver failure, 4 configuration error.

Numbers in CSVs are serialized with 17 significant digits, so identical
configurations reproduce byte-identical files.
"""

import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import figures
from .certificates import (WeightRho, attractivity_constant,
                           build_antidamping_certificate,
                           build_monotone_certificate,
                           distance_lemma_constant, search_monotone_rho)
from .config import (build_feedback, build_forcing, build_grid, build_initial,
                     build_solver_config, parse_config)
from .diagnostics import (DEFAULT_SLACK, check_decay_bound,
                          energy_identity_residual, fit_decay_rate,
                          multiplier_identity_residual, scaled_certificate,
                          stationary_limit)
from .errors import (ConfigError, ContractError, FitUnavailableError,
                     HypothesisViolatedError, NoValidSectorError,
                     StepFailureError)
from .nonlinearities import lipschitz_constant, sector_params
from .solver import PulseProfile, characteristics_oracle, simulate
from .state_space import SublevelSetSpec, dist_to_stationary, energy

EXIT_OK = 0
EXIT_BOUND_VIOLATION = 1
EXIT_HYPOTHESIS = 2
EXIT_SOLVER_FAILURE = 3
EXIT_CONFIG = 4


def _fmt(value):
    return format(float(value), ".17g")


def _write_csv(path, header, columns):
    rows = zip(*columns)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(cell if isinstance(cell, str) else _fmt(cell)
                              for cell in row) + "\n")


def _ensure_outdir(config, out_dir):
    directory = out_dir or config.output.directory
    os.makedirs(directory, exist_ok=True)
    return directory


def build_certificate(config, g_law, forcing_law, grid):
    """Certificate for the configured mode; raises on failed hypotheses."""
    mode = config.certificate.mode
    if mode == "none":
        return None
    try:
        sector = sector_params(g_law)
    except NoValidSectorError as exc:
        raise HypothesisViolatedError("feedback admits a linear sector",
                                      str(exc)) from exc
    if mode == "monotone":
        if not forcing_law.nonincreasing:
            raise HypothesisViolatedError(
                "forcing nonincreasing",
                f"forcing kind '{forcing_law.kind}' can inject energy")
        if config.certificate.grid_search:
            return search_monotone_rho(sector, grid.length_l)
        rho = WeightRho(config.certificate.rho0, config.certificate.rho_l,
                        grid.length_l)
        return build_monotone_certificate(sector, rho)
    q = lipschitz_constant(forcing_law).q_global
    return build_antidamping_certificate(q, sector, grid.length_l)


def _gamma_weight(config, cert, grid):
    if cert is not None:
        return cert.rho
    return WeightRho(config.certificate.rho0, config.certificate.rho_l,
                     grid.length_l)


@dataclass
class RunArtifacts:
    config: object
    grid: object
    traj: object
    cert: object
    rho: object


def run_scenario(config, cert=None):
    """Simulate the configured scenario; certificate must already be built."""
    grid = build_grid(config)
    g_law = build_feedback(config)
    forcing_law = build_forcing(config)
    initial = build_initial(config, grid)
    rho = _gamma_weight(config, cert, grid)
    traj = simulate(initial, g_law, forcing_law, grid,
                    build_solver_config(config), rho=rho)
    return RunArtifacts(config=config, grid=grid, traj=traj, cert=cert, rho=rho)


def _write_series(directory, art):
    traj = art.traj
    en = traj.energies
    tr = traj.traces
    _write_csv(os.path.join(directory, "energy.csv"),
               ["t", "E_total", "E_pot", "E_kin", "E_bnd", "Gamma_rho"],
               [traj.times, en.total, en.potential, en.kinetic,
                en.boundary_kinetic, traj.gamma])
    _write_csv(os.path.join(directory, "traces.csv"),
               ["t", "u0", "v0", "dxu0", "vL", "dxuL", "g_vL", "F_v0"],
               [tr.t, tr.u0, tr.v0, tr.dxu0, tr.vL, tr.dxuL, tr.g_of_vL,
                tr.F_of_v0])
    if art.config.output.emit_snapshots:
        stride = art.config.output.snapshot_stride
        x = art.grid.nodes()
        ts, xs, us, vs = [], [], [], []
        for idx in range(0, len(traj.states), stride):
            st = traj.states[idx]
            ts.append(np.full(x.size, traj.state_times[idx]))
            xs.append(x)
            us.append(st.u)
            vs.append(st.v)
        _write_csv(os.path.join(directory, "snapshots.csv"),
                   ["t", "x", "u", "v"],
                   [np.concatenate(ts), np.concatenate(xs),
                    np.concatenate(us), np.concatenate(vs)])


def _diagnostics_block(art):
    config, traj = art.config, art.traj
    g_law = build_feedback(config)
    forcing_law = build_forcing(config)
    residual = energy_identity_residual(traj, g_law, forcing_law)
    block = {"energy_identity_max": float(np.max(np.abs(residual)))}
    if len(traj.states) >= 2:
        block["multiplier_identity"] = multiplier_identity_residual(traj, art.rho)
    else:
        block["multiplier_identity"] = None
    return block


def _decay_fit_block(art):
    cert = art.cert
    e_s = cert.e_s if cert is not None and hasattr(cert, "e_s") else 0.0
    try:
        fit = fit_decay_rate(art.traj.times, art.traj.energies.total, e_s,
                             t_start=2.0 * art.grid.length_l)
    except FitUnavailableError:
        return None
    return {"mu_obs": fit.mu_obs, "m_obs": fit.m_obs,
            "r_squared": fit.r_squared, "window": list(fit.window)}


def _stationary_block(art):
    amp = abs(art.config.init.params.get("amplitude",
                                         art.config.init.params.get("offset", 1.0)))
    u_inf, converged = stationary_limit(art.traj,
                                        threshold=1e-6 * max(1.0, amp))
    return {"u_infinity": u_inf, "converged": converged}


def _attractivity_block(art, cert, slack):
    """Distance-to-invariant-set bound on the sampled states.

    Uses the closed-form rest-set distance when the residual level is
    zero; for a positive residual level the exact sublevel distance is
    only tractable on coarse grids, so large grids are skipped.
    """
    grid = art.grid
    if grid.n_cells > 256:
        return {"skipped": "grid too large for the distance-lemma constant"}
    lemma = distance_lemma_constant(grid)
    m_prime = attractivity_constant(cert, lemma)
    e_s = cert.e_s if hasattr(cert, "e_s") else 0.0
    traj = art.traj
    e0_excess = max(traj.energies.total[0] - e_s, 0.0)
    if e_s == 0.0:
        dist_sq = np.array([dist_to_stationary(st, grid) ** 2
                            for st in traj.states])
    elif grid.n_cells <= 64:
        from .state_space import dist_to_sublevel_exact
        spec = SublevelSetSpec(e_s)
        dist_sq = np.array([dist_to_sublevel_exact(st, spec, grid) ** 2
                            for st in traj.states])
    else:
        return {"skipped": "positive residual level needs n_cells <= 64"}
    envelope = slack * m_prime * np.exp(-cert.mu * traj.state_times) * e0_excess
    margins = envelope + 1e-12 - dist_sq
    worst = int(np.argmin(margins))
    return {"holds": bool(margins[worst] >= 0.0),
            "worst_margin": float(margins[worst]),
            "worst_time": float(traj.state_times[worst]),
            "m_prime": m_prime}


def _base_report(config, exit_status):
    return {"scenario_hash": config.scenario_hash(),
            "config": config.to_dict(),
            "exit_status": exit_status}


def _write_report(directory, report):
    with open(os.path.join(directory, "report.json"), "w",
              encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(config, out_dir=None):
    """Run one scenario and persist series, report and figures."""
    directory = _ensure_outdir(config, out_dir)
    cert = build_certificate(config, build_feedback(config),
                             build_forcing(config), build_grid(config))
    try:
        art = run_scenario(config, cert)
    except StepFailureError as exc:
        report = _base_report(config, EXIT_SOLVER_FAILURE)
        report["solver_failure"] = {"time": exc.time, "reason": exc.reason}
        _write_report(directory, report)
        return report, EXIT_SOLVER_FAILURE
    report = _base_report(config, EXIT_OK)
    report["certificate"] = cert.to_dict() if cert is not None else None
    report["identity_residuals"] = _diagnostics_block(art)
    report["decay_fit"] = _decay_fit_block(art)
    report["stationary_limit"] = _stationary_block(art)
    report["energy"] = {"initial": float(art.traj.energies.total[0]),
                        "final": float(art.traj.energies.total[-1])}
    _write_series(directory, art)
    _write_report(directory, report)
    if config.output.figures:
        figures.render_run_figures(directory, art.traj, cert,
                                   include_snapshots=config.output.emit_snapshots)
    return report, EXIT_OK


def cmd_certify(config, out_dir=None):
    """Build the configured certificate and write certificate.json."""
    directory = _ensure_outdir(config, out_dir)
    if config.certificate.mode == "none":
        raise ConfigError("certificate.mode", "certify needs a mode")
    path = os.path.join(directory, "certificate.json")
    try:
        cert = build_certificate(config, build_feedback(config),
                                 build_forcing(config), build_grid(config))
    except HypothesisViolatedError as exc:
        doc = {"feasible": False, "condition": exc.condition,
               "message": str(exc)}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return doc, EXIT_HYPOTHESIS
    doc = dict(cert.to_dict(), feasible=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc, EXIT_OK


def cmd_verify(config, out_dir=None, mu_scale=1.0, slack=DEFAULT_SLACK):
    """Simulate, certify and check every certified bound against the run."""
    directory = _ensure_outdir(config, out_dir)
    if config.certificate.mode == "none":
        raise ConfigError("certificate.mode", "verify needs a certificate mode")
    try:
        cert = build_certificate(config, build_feedback(config),
                                 build_forcing(config), build_grid(config))
    except HypothesisViolatedError as exc:
        report = _base_report(config, EXIT_HYPOTHESIS)
        report["certificate"] = {"feasible": False, "condition": exc.condition,
                                 "message": str(exc)}
        _write_report(directory, report)
        return report, EXIT_HYPOTHESIS
    checked_cert = scaled_certificate(cert, mu_scale) if mu_scale != 1.0 else cert
    try:
        art = run_scenario(config, checked_cert)
    except StepFailureError as exc:
        report = _base_report(config, EXIT_SOLVER_FAILURE)
        report["certificate"] = cert.to_dict()
        report["solver_failure"] = {"time": exc.time, "reason": exc.reason}
        _write_report(directory, report)
        return report, EXIT_SOLVER_FAILURE

    traj = art.traj
    bound = check_decay_bound(traj.times, traj.energies.total, checked_cert,
                              slack=slack)
    attract = _attractivity_block(art, checked_cert, slack)
    all_hold = bound.holds and attract.get("holds", True)
    code = EXIT_OK if all_hold else EXIT_BOUND_VIOLATION
    report = _base_report(config, code)
    report["certificate"] = cert.to_dict()
    report["mu_scale"] = mu_scale
    report["bound_report"] = {"holds": bound.holds,
                              "worst_margin": bound.worst_margin,
                              "worst_time": bound.worst_time}
    report["attractivity"] = attract
    report["identity_residuals"] = _diagnostics_block(art)
    report["decay_fit"] = _decay_fit_block(art)
    report["stationary_limit"] = _stationary_block(art)
    report["energy"] = {"initial": float(traj.energies.total[0]),
                        "final": float(traj.energies.total[-1])}
    _write_series(directory, art)
    _write_report(directory, report)
    if config.output.figures:
        figures.render_run_figures(directory, traj, checked_cert, slack,
                                   include_snapshots=config.output.emit_snapshots)
    return report, code


def _set_by_path(raw, dotted, value):
    keys = dotted.split(".")
    node = raw
    for key in keys[:-1]:
        if key not in node or not isinstance(node[key], dict):
            raise ConfigError(dotted, "sweep path does not exist in the config")
        node = node[key]
    node[keys[-1]] = value


def _local_fallback_certificate(config):
    """Local-slope certificate for the empirical sweep harness.

    When the global Lipschitz constant is inadmissible but the slope near
    rest is, the guaranteed envelope only holds on some basin; sweep rows
    checked against it are flagged as local so edges stay interpretable.
    """
    if config.certificate.mode != "antidamping":
        return None
    lips = lipschitz_constant(build_forcing(config))
    if not lips.q_local < lips.q_global:
        return None
    try:
        return build_antidamping_certificate(
            lips.q_local, sector_params(build_feedback(config)),
            config.domain.length_l)
    except (HypothesisViolatedError, NoValidSectorError):
        return None


def sweep_row(config_json, overrides):
    """One grid point of a sweep; safe to run in a worker process."""
    row = {name: value for name, value in overrides}
    raw = json.loads(config_json)
    for name, value in overrides:
        _set_by_path(raw, name, value)
    defaults = {"mu_cert": math.nan, "mu_obs": math.nan, "E_S": math.nan,
                "bound_holds": "", "final_dist_stationary": math.nan}
    status = "ok"
    try:
        config = parse_config(json.dumps(raw))
        try:
            cert = build_certificate(config, build_feedback(config),
                                     build_forcing(config), build_grid(config))
        except HypothesisViolatedError as exc:
            cert = _local_fallback_certificate(config)
            if cert is None:
                return dict(row, **defaults,
                            status=f"infeasible: {exc.condition}")
            status = "ok_local_certificate"
    except (ConfigError, ContractError) as exc:
        return dict(row, **defaults, status=f"config_error: {exc}")
    try:
        art = run_scenario(config, cert)
    except StepFailureError as exc:
        failed = dict(defaults, mu_cert=cert.mu if cert else math.nan)
        return dict(row, **failed, status=f"solver_failure: {exc.reason}")
    traj = art.traj
    fit = _decay_fit_block(art)
    bound_holds = ""
    if cert is not None:
        bound_holds = str(check_decay_bound(traj.times, traj.energies.total,
                                            cert).holds)
    return dict(row,
                mu_cert=cert.mu if cert is not None else math.nan,
                mu_obs=fit["mu_obs"] if fit else math.nan,
                E_S=getattr(cert, "e_s", 0.0) if cert is not None else math.nan,
                bound_holds=bound_holds,
                final_dist_stationary=dist_to_stationary(traj.states[-1],
                                                         art.grid),
                status=status)


def cmd_sweep(config, sweep_text, out_dir=None):
    """Cartesian parameter sweep; one summary row per grid point.

    Rows run in parallel (capped by WAVEGUARD_THREADS) but are written in
    deterministic grid order; individual failures are marked per row.
    """
    directory = _ensure_outdir(config, out_dir)
    try:
        sweep_spec = json.loads(sweep_text)
        grid_spec = sweep_spec["grid"]
        if not isinstance(grid_spec, dict) or not grid_spec:
            raise KeyError("grid")
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError("sweep.grid", f"malformed sweep spec: {exc}") from exc
    names = list(grid_spec)
    values = [grid_spec[name] for name in names]
    points = [list(zip(names, combo)) for combo in itertools.product(*values)]
    config_json = json.dumps(config.to_dict())

    workers = os.environ.get("WAVEGUARD_THREADS")
    workers = int(workers) if workers else (os.cpu_count() or 1)
    workers = max(1, min(workers, len(points)))
    if workers == 1:
        rows = [sweep_row(config_json, point) for point in points]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(sweep_row, [config_json] * len(points), points))

    header = names + ["mu_cert", "mu_obs", "E_S", "bound_holds",
                      "final_dist_stationary", "status"]
    columns = [[row[h] if isinstance(row[h], str) else row[h] for row in rows]
               for h in header]
    _write_csv(os.path.join(directory, "summary.csv"), header, columns)
    if config.output.figures:
        figures.render_sweep_figure(os.path.join(directory, "sweep.png"),
                                    rows, names)
    return rows, EXIT_OK


def cmd_oracle(config, out_dir=None, refine=None):
    """Compare a transparent-boundary run against the exact traveling pulse."""
    directory = _ensure_outdir(config, out_dir)
    if config.init.kind != "right_moving_pulse":
        raise ConfigError("init.kind", "oracle needs a right_moving_pulse")
    g_kind, g_params = config.g.kind, config.g.params
    transparent = g_kind == "identity" or (g_kind == "linear_gain"
                                           and g_params.get("k") == 1.0)
    if not transparent:
        raise ConfigError("g.kind", "oracle needs the identity feedback")
    if config.forcing.kind != "zero":
        raise ConfigError("F.kind", "oracle needs zero forcing")

    def run_comparison(n_cells):
        raw = config.to_dict()
        raw["domain"]["N"] = n_cells
        cfg = parse_config(json.dumps(raw))
        grid = build_grid(cfg)
        profile = PulseProfile(cfg.init.params.get("amplitude", 1.0),
                               cfg.init.params["x0"], cfg.init.params["width"])
        art = run_scenario(cfg, None)
        errs, e_num, e_oracle = [], [], []
        for state, t in zip(art.traj.states, art.traj.state_times):
            exact = characteristics_oracle(profile, grid, t)
            errs.append(float(np.max(np.abs(state.u - exact.u))))
            e_num.append(energy(state, grid).total)
            e_oracle.append(energy(exact, grid).total)
        return art.traj.state_times, np.array(errs), np.array(e_num), \
            np.array(e_oracle)

    times, errs, e_num, e_oracle = run_comparison(config.domain.n_cells)
    _write_csv(os.path.join(directory, "comparison.csv"),
               ["t", "max_err_u", "E_num", "E_oracle", "E_err"],
               [times, errs, e_num, e_oracle, np.abs(e_num - e_oracle)])

    convergence = None
    if refine:
        convergence = []
        prev_err = None
        for n_cells in refine:
            _, r_errs, _, _ = run_comparison(n_cells)
            max_err = float(r_errs.max())
            order = (math.log2(prev_err / max_err)
                     if prev_err is not None else math.nan)
            convergence.append({"n_cells": n_cells, "max_err": max_err,
                                "order": order})
            prev_err = max_err
        _write_csv(os.path.join(directory, "convergence.csv"),
                   ["n_cells", "max_err", "order"],
                   [[row["n_cells"] for row in convergence],
                    [row["max_err"] for row in convergence],
                    [row["order"] for row in convergence]])
    if config.output.figures:
        figures.render_oracle_figure(os.path.join(directory, "oracle.png"),
                                     times, errs, convergence)
    report = {"max_err_u": float(errs.max()),
              "final_energy_ratio": float(e_num[-1] / e_num[0]),
              "convergence": convergence}
    return report, EXIT_OK
