"""Report figures rendered to files next to the delimited output.

All functions take data already computed by the pipeline and a target
path; nothing here recomputes physics.  The Agg backend keeps rendering
headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pulses import wrap_phase


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_trace(times, v_in, v_out, p_e, phase, path):
    """Input/output envelopes, population and phase profile vs time."""
    t_us = np.asarray(times) * 1e6
    fig, axes = plt.subplots(3, 1, figsize=(8, 8), sharex=True)
    axes[0].plot(t_us, np.abs(v_in) * 1e9, label=r"$|V_{\rm in}|$")
    axes[0].plot(t_us, np.abs(v_out) * 1e9, label=r"$|V_{\rm out}|$")
    axes[0].set_ylabel("envelope (nV)")
    axes[0].legend()
    axes[1].plot(t_us, p_e, color="tab:red")
    axes[1].set_ylabel(r"$P_e$")
    axes[2].plot(t_us, wrap_phase(phase), color="tab:green")
    axes[2].set_ylabel("phase (rad)")
    axes[2].set_xlabel(r"time ($\mu$s)")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_sweep(values, eta, axis_label, path):
    """Efficiency versus one sweep axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(values, eta, "o-", ms=3)
    ax.set_xlabel(axis_label)
    ax.set_ylabel(r"$\eta$")
    ax.set_ylim(bottom=0.0)
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_duty(balance, duties, eta, d_opt, path):
    """Signed drive areas and simulated efficiency versus duty cycle."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(balance.duties, balance.area_theta * 1e9, "b-", label="area (flipped phase)")
    ax.plot(balance.duties, balance.area_zero * 1e9, "r-", label="area (zero phase)")
    ax.plot(balance.duties, balance.area_total * 1e9, "k-", label="sum")
    ax.axvline(balance.d_star, color="k", ls=":", alpha=0.7,
               label=f"area balance d = {balance.d_star:.3f}")
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("duty cycle")
    ax.set_ylabel("signed area (ns per unit drive)")
    ax2 = ax.twinx()
    ax2.plot(duties, eta, "g-", label=r"simulated $\eta$")
    ax2.axvline(d_opt, color="g", ls=":", alpha=0.7,
                label=f"optimum d = {d_opt:.3f}")
    ax2.set_ylabel(r"$\eta$")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, fontsize="small")
    return _save(fig, path)


def plot_trace_grid(times, values, grid_abs, axis_label, path, title=""):
    """Color map of |V_out| (or P_e) over time and a sweep axis."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    t_us = np.asarray(times) * 1e6
    mesh = ax.pcolormesh(t_us, values, grid_abs, shading="auto", cmap="viridis")
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel(r"time ($\mu$s)")
    ax.set_ylabel(axis_label)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_calibration(r_samples, detunings, fit, power_p, power_r, k_src,
                     big_gamma, gamma, path):
    """Reflection circle in the IQ plane plus |r| versus source power."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.2))
    ax1.plot(r_samples.real, r_samples.imag, ".", ms=3, color="tab:red")
    phi = np.linspace(0.0, 2.0 * np.pi, 400)
    ax1.plot(fit.center.real + fit.radius * np.cos(phi),
             fit.center.imag + fit.radius * np.sin(phi), "k-", lw=1)
    ax1.plot([1.0], [0.0], "b+", ms=10)
    ax1.set_xlabel("Re r")
    ax1.set_ylabel("Im r")
    ax1.set_aspect("equal")
    ax1.grid(True, alpha=0.3)
    order = np.argsort(power_p)
    p_sorted = np.asarray(power_p)[order]
    ax2.semilogx(p_sorted, np.abs(np.asarray(power_r)[order]), ".",
                 ms=4, color="tab:red")
    sat = k_src**2 * p_sorted / (gamma * big_gamma)
    model = np.abs(1.0 - (big_gamma / gamma) / (1.0 + sat))
    ax2.semilogx(p_sorted, model, "k-", lw=1)
    ax2.set_xlabel("source power (W)")
    ax2.set_ylabel("|r|")
    ax2.grid(True, alpha=0.3, which="both")
    return _save(fig, path)


def plot_analytic(taus, eta, tau_opt, path):
    """Weak-probe efficiency versus pulse rise time."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(np.asarray(taus) * 1e9, eta)
    ax.axvline(tau_opt * 1e9, color="k", ls=":",
               label=f"optimum at {tau_opt * 1e9:.1f} ns")
    ax.set_xlabel("rise time (ns)")
    ax.set_ylabel(r"$\eta$")
    ax.legend()
    ax.grid(True, alpha=0.3, which="both")
    return _save(fig, path)
