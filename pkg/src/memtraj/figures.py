"""Figure rendering for the report path (PNG files next to the CSVs).

Figures are auxiliary diagnostics; the CSVs remain the primary,
byte-deterministic outputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)


def trajectory_figure(path, times, means, title):
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for name, series in means.items():
        ax.plot(times, np.real(series), lw=1.0, label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("conditional mean")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def compare_figure(path, times, means_a, means_b, labels, title):
    names = list(means_a)
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(8, 6), sharex=True,
                                   height_ratios=[2, 1])
    for name in names:
        line, = ax0.plot(times, np.real(means_a[name]), lw=1.0,
                         label=f"{name} ({labels[0]})")
        ax0.plot(times, np.real(means_b[name]), lw=1.0, ls="--",
                 color=line.get_color(), label=f"{name} ({labels[1]})")
    ax0.set_ylabel("conditional mean")
    ax0.set_title(title)
    ax0.legend(loc="best", fontsize=7, ncol=2)
    ax0.grid(alpha=0.3)
    for name in names:
        diff = np.abs(np.real(means_a[name]) - np.real(means_b[name]))
        ax1.semilogy(times, np.maximum(diff, 1e-16), lw=0.8, label=name)
    ax1.set_xlabel("t")
    ax1.set_ylabel("|difference|")
    ax1.grid(alpha=0.3)
    return _finish(fig, path)


def convergence_figure(path, truncations, accumulated, title):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(truncations, accumulated, "o-")
    ax.set_xlabel("mode truncation")
    ax.set_ylabel("accumulated difference")
    ax.set_title(title)
    ax.grid(alpha=0.3, which="both")
    return _finish(fig, path)


def ensemble_figure(path, times, deviation, bound, title):
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(times, deviation, lw=1.0, label="max |ensemble - reference|")
    ax.plot(times, bound, lw=1.0, ls="--", label="4 standard errors")
    ax.set_xlabel("t")
    ax.set_ylabel("element deviation")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def markovian_figure(path, times, pop_memory, pop_fixed, fitted_rate,
                     target_rate, title):
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.semilogy(times, np.maximum(pop_memory, 1e-16), lw=1.2,
                label="evolving memory function")
    ax.semilogy(times, np.maximum(pop_fixed, 1e-16), lw=1.2, ls="--",
                label="fixed short-memory value")
    ax.semilogy(times, pop_memory[0] * np.exp(-target_rate * times), lw=0.8,
                ls=":", label=f"target rate {target_rate:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("excited population")
    ax.set_title(f"{title} (fitted rate {fitted_rate:.4g})")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3, which="both")
    return _finish(fig, path)


def phonon_figure(path, times, coherence_re, coherence_im, oracle_re,
                  oracle_im, title):
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(times, coherence_re, lw=1.0, label="Re rho02 (stepper)")
    ax.plot(times, oracle_re, lw=0.8, ls="--", label="Re rho02 (element oracle)")
    ax.plot(times, coherence_im, lw=1.0, label="Im rho02 (stepper)")
    ax.plot(times, oracle_im, lw=0.8, ls="--", label="Im rho02 (element oracle)")
    ax.set_xlabel("t")
    ax.set_ylabel("coherence")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    return _finish(fig, path)
