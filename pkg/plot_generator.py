"""
Plot Generator
Renders scan curves, tau histograms, NLS trajectories and |u|^2 heatmaps
to image files. Plots are side outputs and never change CSV payloads.
"""
import os
import traceback

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from console_log import log_to_console
from spectrum_core import log_max1


def _save(fig, save_path: str) -> bool:
    directory = os.path.dirname(save_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    fig.savefig(save_path, dpi=120, bbox_inches='tight')
    plt.close(fig)
    log_to_console(f"Plot saved to {save_path}")
    return True


def plot_extremizer_scan(rows, save_path: str) -> bool:
    """R(N)^4 against log N for the box extremizers."""
    try:
        logs = [log_max1(r.N) for r in rows]
        r4 = [r.ratio ** 4 for r in rows]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(logs, r4, 'o-', label='R(N)^4')
        ax.set_xlabel('log N')
        ax.set_ylabel('R(N)^4')
        ax.grid(True, alpha=0.3)
        for r, x, y in zip(rows, logs, r4):
            ax.annotate(str(r.N), (x, y), textcoords='offset points', xytext=(4, 4), fontsize=8)
        ax.legend()
        return _save(fig, save_path)
    except Exception as e:
        log_to_console(f"Failed to render extremizer plot: {e}", 'ERROR')
        traceback.print_exc()
        return False


def plot_strichartz_scan(reports, save_path: str) -> bool:
    try:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot([r.support for r in reports], [r.ratio for r in reports], 's-')
        ax.set_xscale('log')
        ax.set_xlabel('#S')
        ax.set_ylabel('L4 / L2 ratio')
        ax.grid(True, alpha=0.3)
        return _save(fig, save_path)
    except Exception as e:
        log_to_console(f"Failed to render Strichartz plot: {e}", 'ERROR')
        traceback.print_exc()
        return False


def plot_tau_histogram(hist, save_path: str) -> bool:
    try:
        rows = hist.rows()
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.bar([str(tau) for tau, _, _ in rows], [count for _, count, _ in rows], color='steelblue')
        ax.set_xlabel('tau')
        ax.set_ylabel('parallelograms')
        if len(rows) > 20:
            ax.set_xticks(ax.get_xticks()[::max(1, len(rows) // 20)])
        return _save(fig, save_path)
    except Exception as e:
        log_to_console(f"Failed to render tau histogram: {e}", 'ERROR')
        traceback.print_exc()
        return False


def plot_trajectory(report, save_path: str) -> bool:
    """Mass, Hamiltonian and H^s norm at every window end."""
    try:
        t = [r.t for r in report.rows]
        fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)
        axes[0].plot(t, [r.mass for r in report.rows], '.-')
        axes[0].set_ylabel('mass')
        axes[1].plot(t, [r.hamiltonian for r in report.rows], '.-', color='darkorange')
        axes[1].set_ylabel('hamiltonian')
        axes[2].plot(t, [r.hs_norm for r in report.rows], '.-', color='seagreen')
        axes[2].set_ylabel(f'H^{report.s} norm')
        axes[2].set_xlabel('t')
        for ax in axes:
            ax.grid(True, alpha=0.3)
        return _save(fig, save_path)
    except Exception as e:
        log_to_console(f"Failed to render trajectory plot: {e}", 'ERROR')
        traceback.print_exc()
        return False


def plot_field_heatmap(field, save_path: str) -> bool:
    """|u(x)|^2 over the torus grid."""
    try:
        density = np.abs(field.samples) ** 2
        fig, ax = plt.subplots(figsize=(5, 4.5))
        image = ax.imshow(density.T, origin='lower', extent=(0, 2 * np.pi, 0, 2 * np.pi), cmap='jet')
        fig.colorbar(image, ax=ax, label='|u|^2')
        ax.set_title(f't = {field.t:.4g}')
        return _save(fig, save_path)
    except Exception as e:
        log_to_console(f"Failed to render field heatmap: {e}", 'ERROR')
        traceback.print_exc()
        return False
