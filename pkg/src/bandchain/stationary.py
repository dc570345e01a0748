"""Stationary prefix of a band kernel from its augmented truncation.

The left fixed vector of ``P_k`` is computed with the GTH (state reduction)
elimination.  GTH performs no subtractions, so every entry of the result has
small *relative* error, even where ``pi`` has decayed to 1e-100.  The
successive ratios ``pi(i+1)/pi(i)`` used to estimate the tail ratio tau are
only meaningful with that property.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularSystem, WindowTooWide, ZeroMass
from .kernel import BandKernel, truncate_augment

TAU_ZERO_CUTOFF = 1e-6
TINY = 1e-290


@dataclass
class StationaryDistribution:
    """Probability vector ``pi(0..k)`` with its tail-ratio estimate."""

    prefix: np.ndarray
    k: int
    tau_hat: float
    residual: float
    i0: int = 0
    N: int = 1
    tau_zero: bool = False

    def __len__(self):
        return len(self.prefix)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "tau_hat": self.tau_hat,
            "tau_zero": self.tau_zero,
            "residual": self.residual,
            "pi0": float(self.prefix[0]),
        }


def gth_stationary(P: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible row-stochastic matrix by GTH.

    Only the nonzero pattern of each eliminated row/column is touched, so a
    band matrix costs ``O(n N^2)``.
    """
    A = np.array(P, dtype=float)
    n = A.shape[0]
    for m in range(n - 1, 0, -1):
        s = A[m, :m].sum()
        if not s > 0.0:
            raise SingularSystem(f"state {m} cannot reach lower states: reducible truncation")
        A[:m, m] /= s
        rows = np.flatnonzero(A[:m, m])
        cols = np.flatnonzero(A[m, :m])
        if len(rows) and len(cols):
            A[np.ix_(rows, cols)] += np.outer(A[rows, m], A[m, cols])
    x = np.empty(n)
    x[0] = 1.0
    for m in range(1, n):
        x[m] = x[:m] @ A[:m, m]
    if not np.all(np.isfinite(x)) or x.sum() <= 0.0:
        raise SingularSystem("GTH back substitution produced a non-finite vector")
    return x / x.sum()


def _default_window(i0: int, N: int, k: int, prefix: np.ndarray) -> tuple[int, int]:
    lo = max(i0 + N, k // 4)
    hi = k - max(2 * N, k // 4)
    alive = np.flatnonzero(prefix > TINY)
    last = int(alive[-1]) if len(alive) else 0
    hi = min(hi, last - 1)
    return lo, hi


def stationary_prefix(kernel: BandKernel, k: int) -> StationaryDistribution:
    """Stationary vector of the last-column-augmented truncation ``P_k``."""
    P = truncate_augment(kernel, k)
    pi = gth_stationary(P)
    residual = float(np.abs(pi @ P - pi).sum())
    if residual > 1e-10:
        raise SingularSystem(f"invariance defect {residual:.3e} exceeds 1e-10")
    out = StationaryDistribution(prefix=pi, k=k, tau_hat=float("nan"), residual=residual,
                                 i0=kernel.i0, N=kernel.N)
    lo, hi = _default_window(kernel.i0, kernel.N, k, pi)
    if hi > lo:
        try:
            tau, _ = tail_ratio(out, (lo, hi))
        except ZeroMass:
            tau = 0.0
    else:
        # mass underflows right after the boundary: superexponential tail
        tau = 0.0
    out.tau_hat = tau
    out.tau_zero = tau < TAU_ZERO_CUTOFF
    return out


def tail_ratio(pi: StationaryDistribution, window: tuple[int, int]) -> tuple[float, float]:
    """Mean of ``pi(i+1)/pi(i)`` for ``lo <= i < hi`` and the max deviation from it.

    The window must avoid the boundary (``lo >= i0 + N``) and the truncation
    edge (``hi <= k - 2N``).
    """
    lo, hi = window
    if lo < pi.i0 + pi.N or hi > pi.k - 2 * pi.N or hi <= lo:
        raise WindowTooWide(
            f"window {lo}..{hi} must sit inside {pi.i0 + pi.N}..{pi.k - 2 * pi.N}"
        )
    seg = pi.prefix[lo: hi + 1]
    if np.any(seg <= 0.0):
        raise ZeroMass(f"pi vanishes inside window {lo}..{hi}")
    ratios = seg[1:] / seg[:-1]
    tau = float(ratios.mean())
    return tau, float(np.max(np.abs(ratios - tau)))


def weighted_norms(f, pi) -> tuple[float, float]:
    """``(sum |f| pi, sqrt(sum |f|^2 pi))``."""
    w = np.asarray(pi.prefix if hasattr(pi, "prefix") else pi, dtype=float)
    f = np.asarray(f)
    if f.shape[0] != w.shape[0]:
        raise ValueError(f"f has length {f.shape[0]}, pi has {w.shape[0]}")
    a = np.abs(f)
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return 0.0, 0.0
    # scale before squaring so tiny or huge entries neither underflow nor overflow
    s = a / top
    return float(a @ w), top * float(np.sqrt((s * s) @ w))
