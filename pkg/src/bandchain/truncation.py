"""Spectra of augmented truncations and the rate classification.

``rho_k`` is the largest modulus among the eigenvalues of ``P_k`` that stay
off the unit circle.  As ``k`` grows, ``rho_k`` either settles at the
geometric ergodicity rate of the chain (when that rate exceeds alpha0), or
its limsup stays below alpha0, in which case only the bound ``alpha0`` is
known for the l2(pi) rate.
"""

from __future__ import annotations

import enum
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BandChainError,
    EigNonConvergence,
    InsufficientSweep,
    NoSubunitEigenvalue,
    PeriodicitySuspected,
)
from .kernel import BandKernel, truncate_augment

__all__ = [
    "truncate_augment",
    "l2_scaling",
    "scaled",
    "spectrum",
    "eigen_decomposition",
    "rho_from_spectrum",
    "TruncationResult",
    "sweep",
    "Case",
    "RateEstimate",
    "classify",
]

UNIT_TOL = 1e-9
DECISION_MARGIN = 0.01
STALL_TOL = 1e-3
AUGMENTATION = "last-column"


def eigen_decomposition(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """All eigenvalues of a dense nonsymmetric matrix and a backward-error estimate.

    LAPACK ``geev`` (balancing, Hessenberg reduction, shifted QR).  The error
    is ``max_j ||A v_j - l_j v_j|| / (||A||_F ||v_j||)``.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    try:
        vals, vecs = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise EigNonConvergence(str(exc)) from exc
    if not np.all(np.isfinite(vals)):
        raise EigNonConvergence("non-finite eigenvalues")
    norm_a = np.linalg.norm(A) or 1.0
    resid = np.linalg.norm(A @ vecs - vecs * vals[None, :], axis=0)
    berr = float(np.max(resid / (norm_a * np.linalg.norm(vecs, axis=0)))) if len(vals) else 0.0
    return vals, berr


def spectrum(matrix: np.ndarray) -> np.ndarray:
    """Eigenvalues (with multiplicity) of a square stochastic matrix."""
    A = np.asarray(matrix, dtype=float)
    rows = A.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > 1e-9:
        raise ValueError("rows must sum to 1 within 1e-9")
    return eigen_decomposition(A)[0]


def rho_from_spectrum(eigs, unit_tol: float = UNIT_TOL) -> tuple[float, int]:
    """Largest modulus strictly inside ``1 - unit_tol``, and the count of unit eigenvalues.

    Warns with :class:`PeriodicitySuspected` when more than one eigenvalue
    sits on the unit circle.
    """
    mod = np.abs(np.asarray(eigs))
    if mod.size == 0:
        raise NoSubunitEigenvalue("empty spectrum")
    on_circle = mod >= 1.0 - unit_tol
    unit_count = int(on_circle.sum())
    inside = mod[~on_circle]
    if inside.size == 0:
        raise NoSubunitEigenvalue(f"all {mod.size} eigenvalues have modulus >= 1 - {unit_tol}")
    if unit_count > 1:
        warnings.warn(f"{unit_count} eigenvalues on the unit circle", PeriodicitySuspected,
                      stacklevel=2)
    return float(inside.max()), unit_count


@dataclass
class TruncationResult:
    k: int
    spectrum: np.ndarray | None
    rho_k: float | None
    unit_count: int | None
    backward_error: float | None
    wall_ms: float
    trace_defect: float | None = None
    warnings: list = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "rho_k": self.rho_k,
            "unit_count": self.unit_count,
            "backward_error": self.backward_error,
            "trace_defect": self.trace_defect,
            "warnings": list(self.warnings),
            "error": self.error,
        }


def l2_scaling(kernel: BandKernel) -> float | None:
    """Log of the per-index weight ``tau**(1/2)`` that maps P_k to its l2(pi) form.

    ``None`` when tau is unavailable (non-negative drift or tau = 0).
    """
    from .bounds import solve_tau

    try:
        tau = solve_tau(kernel.limit_law)
    except BandChainError:
        return None
    return 0.5 * math.log(tau) if tau > 0.0 else None


def scaled(P: np.ndarray, log_w: float | None) -> np.ndarray:
    """Diagonal similarity ``D P D^-1`` with ``D = diag(exp(log_w * i))``.

    Eigenvalues are unchanged.  Without it, geev loses the subunit spectrum
    of large truncations to nonnormality: the raw P_k is as far from normal
    as ``tau**(-k/2)``.
    """
    if log_w is None:
        return P
    B = np.zeros_like(P)
    i, j = np.nonzero(P)
    B[i, j] = P[i, j] * np.exp(log_w * (i - j))
    return B


def _one(kernel: BandKernel, k: int, unit_tol: float, log_w: float | None) -> TruncationResult:
    t0 = time.perf_counter()
    try:
        P = truncate_augment(kernel, k)
        vals, berr = eigen_decomposition(scaled(P, log_w))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            rho, units = rho_from_spectrum(vals, unit_tol)
        return TruncationResult(
            k=k, spectrum=vals, rho_k=rho, unit_count=units, backward_error=berr,
            wall_ms=(time.perf_counter() - t0) * 1e3,
            trace_defect=float(abs(vals.sum().real - np.trace(P))),
            warnings=[str(w.message) for w in caught],
        )
    except (BandChainError, ValueError) as exc:
        return TruncationResult(k=k, spectrum=None, rho_k=None, unit_count=None,
                                backward_error=None, wall_ms=(time.perf_counter() - t0) * 1e3,
                                error=f"{type(exc).__name__}: {exc}")


def _workers(n_jobs: int, workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("BANDCHAIN_THREADS", "1") or 1)
    return max(1, min(workers, n_jobs))


def sweep(kernel: BandKernel, k_grid, unit_tol: float = UNIT_TOL,
          workers: int | None = None) -> list[TruncationResult]:
    """One :class:`TruncationResult` per ``k``, ordered by ``k``.

    Failures at one ``k`` are recorded in that entry's ``error`` and do not
    abort the sweep.  Parallelism is capped by ``workers`` or the
    ``BANDCHAIN_THREADS`` environment variable.
    """
    ks = [int(k) for k in k_grid]
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError(f"k_grid must be strictly increasing: {ks}")
    if not ks:
        return []
    n = _workers(len(ks), workers)
    log_w = l2_scaling(kernel)
    if n == 1:
        return [_one(kernel, k, unit_tol, log_w) for k in ks]
    with ThreadPoolExecutor(max_workers=n) as pool:
        results = list(pool.map(lambda k: _one(kernel, k, unit_tol, log_w), ks))
    return sorted(results, key=lambda r: r.k)


class Case(str, enum.Enum):
    CASE_A = "CaseA_bound"
    CASE_B = "CaseB_value"
    INDETERMINATE = "Indeterminate"


@dataclass
class RateEstimate:
    """Outcome of the rate dichotomy.

    In case A ``rho2`` and ``rhoV`` are the upper bound ``alpha0`` (``bound``
    is True); in case B they are the extrapolated limit of ``rho_k``.
    """

    case: Case
    rho2: float | None
    rhoV: float | None
    bound: bool
    rho_limit: float
    cauchy_gap: float
    alpha0: float
    decision_margin: float
    stall_tol: float
    tail_ks: list
    fitted_C: float | None = None
    reversible: bool | None = None

    def to_dict(self) -> dict:
        return {
            "case": self.case.value,
            "rho2": self.rho2,
            "rho2_is_bound": self.bound,
            "rhoV": self.rhoV,
            "rhoV_is_bound": self.bound,
            "rho_limit": self.rho_limit,
            "cauchy_gap": self.cauchy_gap,
            "alpha0": self.alpha0,
            "decision_margin": self.decision_margin,
            "stall_tol": self.stall_tol,
            "tail_ks": list(self.tail_ks),
            "fitted_C": self.fitted_C,
            "fitted_C_certified": False,
            "reversible": self.reversible,
        }


def classify(results, alpha0: float, decision_margin: float = DECISION_MARGIN,
             stall_tol: float = STALL_TOL) -> RateEstimate:
    """Decide between the bounded case, the identified case, or neither.

    The tail is the upper half of the successful sweep entries.  The limit
    is the last ``rho_k``, with the last Cauchy gap as its uncertainty.

    * Case B: gap below ``stall_tol`` and limit above ``alpha0 + margin``.
    * Case A: every tail value at most ``alpha0 + margin`` and the limit at
      most ``alpha0 + stall_tol`` (alpha0 up to the limit's own resolution).
    * Otherwise the limit is too close to ``alpha0`` to separate the cases.
    """
    good = [r for r in results if r.ok and r.rho_k is not None]
    if len(good) < 4 or good[-1].k < 100:
        raise InsufficientSweep(
            f"need >= 4 successful truncations with largest k >= 100, "
            f"got {[r.k for r in good]}"
        )
    tail = good[len(good) // 2:]
    rhos = [r.rho_k for r in tail]
    limit = rhos[-1]
    gap = abs(rhos[-1] - rhos[-2])
    stalled = gap < stall_tol
    common = dict(rho_limit=limit, cauchy_gap=gap, alpha0=alpha0,
                  decision_margin=decision_margin, stall_tol=stall_tol,
                  tail_ks=[r.k for r in tail])
    if stalled and limit > alpha0 + decision_margin:
        return RateEstimate(case=Case.CASE_B, rho2=limit, rhoV=limit, bound=False, **common)
    if max(rhos) <= alpha0 + decision_margin and limit <= alpha0 + stall_tol:
        return RateEstimate(case=Case.CASE_A, rho2=alpha0, rhoV=alpha0, bound=True, **common)
    return RateEstimate(case=Case.INDETERMINATE, rho2=None, rhoV=None, bound=False, **common)


def spectrum_consistency(P: np.ndarray, eigs: np.ndarray) -> dict:
    """Trace/determinant identities and unit-disk containment for a spectrum."""
    det = np.linalg.det(P)
    return {
        "trace_defect": float(abs(eigs.sum() - np.trace(P))),
        "det_defect": float(abs(np.prod(eigs) - det)),
        "max_modulus": float(np.max(np.abs(eigs))),
        "unit_distance": float(np.min(np.abs(eigs - 1.0))),
    }
