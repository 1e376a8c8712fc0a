"""Figures written next to the CSV/JSON outputs of the command-line tool."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["font.family"] = "serif"
plt.rcParams["mathtext.fontset"] = "cm"
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3

fsize = 11.0


def figure_path(out_path, suffix=".png"):
    """``traj.csv`` -> ``traj.png``."""
    return Path(out_path).with_suffix(suffix)


def figsave(fig, name):
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(name, bbox_inches="tight", dpi=110, metadata={"Software": None})
    plt.close(fig)
    return Path(name)


def _positive(y):
    y = np.asarray(y, dtype=float)
    return np.where(y > 0, y, np.nan)


def plot_timeseries(columns, path, limit_energy=None):
    """Energy, residual and norm defect of a run against time."""
    t = columns["t"]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.4))
    energy = columns["energy"]
    if limit_energy is None:
        limit_energy = float(np.min(energy))
    axes[0].semilogy(t, _positive(energy - limit_energy), "k", lw=1.2)
    axes[0].set_title(r"$Y(u(t)) - Y_{\min}$", fontsize=fsize)
    axes[1].semilogy(t, _positive(columns["residual_M"]), "b", lw=1.2)
    axes[1].set_title(r"$\|M(u(t))\|_{L^2}$", fontsize=fsize)
    axes[2].plot(t, columns["energy"][0] - columns["energy"], "k", lw=1.2, label=r"$Y(u_0) - Y(u)$")
    axes[2].plot(t, columns["dissipation_integral"] - columns["dissipation_integral"][0], "r--",
                 lw=1.0, label=r"$\int \|u_t\|^2$")
    axes[2].legend(fontsize=fsize - 2)
    axes[2].set_title("energy identity", fontsize=fsize)
    for ax in axes:
        ax.set_xlabel(r"$t$", fontsize=fsize)
    return figsave(fig, path)


def plot_equilibrium(domain, modes, path, title=None):
    """Profile of an equilibrium on the closed interval and its mode spectrum."""
    x = np.concatenate(([0.0], domain.x, [domain.length]))
    u = np.concatenate(([0.0], domain.to_grid(modes), [0.0]))
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax0.plot(x, u, "k", lw=1.5)
    ax0.set_xlabel(r"$x$", fontsize=fsize)
    ax0.set_ylabel(r"$\varphi(x)$", fontsize=fsize)
    if title:
        ax0.set_title(title, fontsize=fsize)
    ax1.semilogy(domain.k, _positive(np.abs(modes)), "ko", ms=3)
    ax1.set_xlabel(r"mode $k$", fontsize=fsize)
    ax1.set_ylabel(r"$|c_k|$", fontsize=fsize)
    return figsave(fig, path)


def plot_spectrum(report, path):
    rates = np.asarray(report.tangent_rates)
    fig, ax = plt.subplots(figsize=(6, 3.4))
    idx = np.arange(1, len(rates) + 1)
    ax.semilogy(idx, np.abs(rates), "k.", ms=4)
    pos = rates > 0
    if np.any(pos):
        ax.semilogy(idx[pos], rates[pos], "r^", ms=6, label="unstable")
        ax.legend(fontsize=fsize - 2)
    ax.set_xlabel("index", fontsize=fsize)
    ax.set_ylabel("|tangent rate|", fontsize=fsize)
    ax.set_title(f"classification: {report.classification}", fontsize=fsize)
    return figsave(fig, path)


def plot_decay_fit(t, y, fit, path, label="data"):
    fig, ax = plt.subplots(figsize=(6, 3.4))
    ax.semilogy(t, _positive(y), "k", lw=1.2, label=label)
    lo, hi = fit.window
    tt = np.linspace(lo, hi, 200)
    if fit.model == "exponential":
        lab = rf"$\kappa_1 e^{{-\kappa_2 t}}$, $\kappa_2$={fit.kappa2:.5g}"
    else:
        lab = rf"$\kappa (1+t)^{{-p}}$, $p$={fit.exponent:.5g}"
    ax.semilogy(tt, fit.predict(tt), "r--", lw=1.2, label=lab)
    ax.set_xlabel(r"$t$", fontsize=fsize)
    ax.legend(fontsize=fsize - 2)
    return figsave(fig, path)


def plot_theta(gap, residual, est, path):
    gap = np.asarray(gap, dtype=float)
    residual = np.asarray(residual, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 4))
    ok = (gap > 0) & (residual > 0)
    ax.loglog(gap[ok], residual[ok], "k.", ms=3, label="records")
    lo, hi = est.window
    gg = np.geomspace(lo, hi, 50)
    ax.loglog(gg, np.exp(est.intercept) * gg**est.slope, "r--",
              label=rf"slope $1-\theta$ = {est.slope:.4f}")
    ax.axvspan(lo, hi, color="0.9", zorder=0)
    ax.set_xlabel(r"$|Y(u) - Y(\varphi)|$", fontsize=fsize)
    ax.set_ylabel(r"$\|M(u)\|$", fontsize=fsize)
    ax.legend(fontsize=fsize - 2)
    return figsave(fig, path)


def plot_sweep(report, path):
    y0 = np.array([r.initial_energy for r in report.seed_results])
    y1 = np.array([r.final_energy for r in report.seed_results])
    fig, ax = plt.subplots(figsize=(6, 3.4))
    idx = np.arange(len(y0))
    ax.semilogy(idx, y0, "ko", ms=4, label=r"$Y(u_0)$")
    ax.semilogy(idx, y1, "r^", ms=4, label=r"$Y(u(T))$")
    ax.set_xlabel("seed", fontsize=fsize)
    ax.set_title(f"{len(report.clusters)} cluster(s), {report.unconverged} unconverged", fontsize=fsize)
    ax.legend(fontsize=fsize - 2)
    return figsave(fig, path)
