"""Figures written next to the CSV tables.

Imported only when figures are requested; uses the non-interactive Agg
backend so it runs headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (6.0, 4.0)
DPI = 120


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_sweep(results, alpha0: float, path, margin: float | None = None) -> Path:
    """rho_k against k with the alpha0 line (and the decision band, if given)."""
    ks = [r.k for r in results if r.rho_k is not None]
    rho = [r.rho_k for r in results if r.rho_k is not None]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(ks, rho, "o-", color="C0", label=r"$\rho_k$")
    ax.axhline(alpha0, color="C3", ls="--", label=r"$\alpha_0$")
    if margin:
        ax.axhspan(alpha0, alpha0 + margin, color="C3", alpha=0.12, label="decision margin")
    ax.set_xscale("log")
    ax.set_xlabel("truncation level k")
    ax.set_ylabel("largest subunit |eigenvalue|")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_spectrum(result, alpha0: float, path) -> Path:
    """Eigenvalues of one truncation in the complex plane with the unit and alpha0 circles."""
    t = np.linspace(0, 2 * np.pi, 400)
    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    ax.plot(np.cos(t), np.sin(t), color="0.6", lw=0.8)
    ax.plot(alpha0 * np.cos(t), alpha0 * np.sin(t), color="C3", ls="--", lw=0.8,
            label=r"$|\lambda| = \alpha_0$")
    ev = np.asarray(result.spectrum)
    ax.plot(ev.real, ev.imag, ".", ms=3, color="C0", label=f"$\\sigma(P_{{{result.k}}})$")
    ax.set_aspect("equal")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.legend(frameon=False, loc="upper left", fontsize=8)
    return _save(fig, path)


def plot_stationary(pi, tau: float, path) -> Path:
    """Successive ratios pi(i+1)/pi(i) against the tail ratio tau."""
    p = np.asarray(pi.prefix)
    ok = p[:-1] > 0
    i = np.arange(len(p) - 1)[ok]
    ratio = p[1:][ok] / p[:-1][ok]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(i, ratio, color="C0", label=r"$\pi(i+1)/\pi(i)$")
    if tau > 0:
        ax.axhline(tau, color="C3", ls="--", label=r"$\tau$")
    ax.set_xlabel("i")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_decay(fits, rho_k: float, path) -> Path:
    """Norm decay of P^n f - Pi f for each test vector, with rho_k^n for reference."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for j, fit in enumerate(fits):
        norms = np.asarray(fit.norms)
        ax.semilogy(np.arange(len(norms)), norms, lw=0.9, label=f"f{j}: rate {fit.rate:.4f}")
    n = np.arange(max(len(f.norms) for f in fits))
    ax.semilogy(n, rho_k ** n, "k--", lw=0.8, label=r"$\rho_k^n$")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$\|P^n f - \Pi f\|_2$")
    ax.legend(frameon=False, fontsize=7)
    return _save(fig, path)
