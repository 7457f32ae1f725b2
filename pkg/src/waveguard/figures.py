"""Figure rendering for run reports; all output goes to files."""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .certificates import MonotoneCertificate

_EPS_FLOOR = 1e-300


def _certified_envelope(cert, times, e0, slack):
    if isinstance(cert, MonotoneCertificate):
        excess = max(e0 - cert.e_s, 0.0)
        return cert.e_s + slack * cert.m * np.exp(-cert.mu * times) * excess
    return slack * cert.m_prefactor * np.exp(-cert.mu * times) * e0


def render_energy_figure(path, traj, cert=None, slack=1.05):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    t = traj.times
    en = traj.energies
    ax.semilogy(t, np.maximum(en.total, _EPS_FLOOR), label="E total", lw=1.5)
    ax.semilogy(t, np.maximum(en.potential, _EPS_FLOOR), label="potential",
                lw=0.8, alpha=0.7)
    ax.semilogy(t, np.maximum(en.kinetic + en.boundary_kinetic, _EPS_FLOOR),
                label="kinetic (incl. boundary)", lw=0.8, alpha=0.7)
    if traj.gamma is not None:
        ax.semilogy(t, np.maximum(traj.gamma, _EPS_FLOOR), label="Gamma_rho",
                    lw=0.8, ls="--", alpha=0.8)
    if cert is not None:
        env = _certified_envelope(cert, t, en.total[0], slack)
        ax.semilogy(t, np.maximum(env, _EPS_FLOOR),
                    label="certified envelope", color="k", ls=":")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_traces_figure(path, traj):
    tr = traj.traces
    fig, axes = plt.subplots(2, 2, figsize=(9, 5.5), sharex=True)
    axes[0, 0].plot(tr.t, tr.v0, lw=0.8)
    axes[0, 0].set_ylabel("v(0, t)")
    axes[0, 1].plot(tr.t, tr.vL, lw=0.8)
    axes[0, 1].set_ylabel("v(L, t)")
    axes[1, 0].plot(tr.t, tr.F_of_v0, lw=0.8)
    axes[1, 0].set_ylabel("F(v(0, t))")
    axes[1, 0].set_xlabel("t")
    axes[1, 1].plot(tr.t, tr.g_of_vL, lw=0.8)
    axes[1, 1].set_ylabel("g(v(L, t))")
    axes[1, 1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_snapshots_figure(path, traj):
    if len(traj.states) < 2:
        return
    x = traj.grid.nodes()
    u_mat = np.stack([st.u for st in traj.states])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    mesh = ax.pcolormesh(x, traj.state_times, u_mat, shading="auto",
                         cmap="RdBu_r")
    fig.colorbar(mesh, ax=ax, label="u(x, t)")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_run_figures(out_dir, traj, cert=None, slack=1.05,
                       include_snapshots=False):
    render_energy_figure(os.path.join(out_dir, "energy.png"), traj, cert, slack)
    render_traces_figure(os.path.join(out_dir, "traces.png"), traj)
    if include_snapshots:
        render_snapshots_figure(os.path.join(out_dir, "snapshots.png"), traj)


def render_sweep_figure(path, rows, param_names):
    """Observed vs certified rate over a one-parameter sweep."""
    if len(param_names) != 1:
        return
    name = param_names[0]
    ok = [r for r in rows if r["status"] == "ok"]
    if not ok:
        return
    x = [r[name] for r in ok]
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(x, [r["mu_cert"] for r in ok], "o-", label="mu certified")
    mu_obs = [r["mu_obs"] for r in ok]
    if any(np.isfinite(m) for m in mu_obs):
        ax.plot(x, mu_obs, "s--", label="mu observed")
        ax.set_yscale("log")
    ax.set_xlabel(name)
    ax.set_ylabel("decay rate")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_oracle_figure(path, times, max_err, convergence=None):
    n_panels = 2 if convergence else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(6.5 * n_panels, 4))
    axes = np.atleast_1d(axes)
    axes[0].semilogy(times, np.maximum(max_err, _EPS_FLOOR), lw=1.0)
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("max-norm error vs exact solution")
    if convergence:
        ns = [row["n_cells"] for row in convergence]
        errs = [row["max_err"] for row in convergence]
        axes[1].loglog(ns, errs, "o-")
        axes[1].set_xlabel("cells")
        axes[1].set_ylabel("max error")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
