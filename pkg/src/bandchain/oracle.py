"""Independent checks for the truncation spectra and the rate bounds.

None of these routines calls LAPACK's eigensolver:

* ``charpoly_spectrum`` expands ``det(lambda I - A)`` by cofactors over exact
  rationals and finds its roots with Aberth iteration;
* ``power_decay_rate`` measures how fast ``P^n f - Pi f`` shrinks in
  ``l2(pi)`` and fits a geometric rate;
* ``lemma1_check`` samples ``||P f||_2 - alpha ||f||_2 - L ||f||_1``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    DegenerateTestVector,
    NonConvergence,
    OrderTooLarge,
    UnderflowBeforeWindow,
)

MAX_ORACLE_ORDER = 8


# -- characteristic polynomial -------------------------------------------------

def _padd(p, q):
    n = max(len(p), len(q))
    p = [Fraction(0)] * (n - len(p)) + list(p)
    q = [Fraction(0)] * (n - len(q)) + list(q)
    return [a + b for a, b in zip(p, q)]


def _pmul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


def charpoly_coefficients(matrix) -> list[Fraction]:
    """Coefficients of ``det(lambda I - A)``, highest degree first, in exact arithmetic.

    Laplace expansion along successive rows; minors are memoized by their
    column set, so the cost is ``O(2^n n)`` polynomial products.
    """
    A = np.asarray(matrix, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if n > MAX_ORACLE_ORDER:
        raise OrderTooLarge(f"order {n} > {MAX_ORACLE_ORDER}")
    # entry (i, j) of lambda I - A as a polynomial in lambda
    M = [[([Fraction(1), -Fraction(A[i, j])] if i == j else [-Fraction(A[i, j])])
          for j in range(n)] for i in range(n)]

    @lru_cache(maxsize=None)
    def minor(cols: frozenset) -> tuple:
        row = n - len(cols)
        if not cols:
            return (Fraction(1),)
        total = [Fraction(0)]
        for pos, j in enumerate(sorted(cols)):
            entry = M[row][j]
            if not any(entry):
                continue
            term = _pmul(entry, minor(cols - {j}))
            if pos % 2:
                term = [-c for c in term]
            total = _padd(total, term)
        return tuple(total)

    coeffs = list(minor(frozenset(range(n))))
    coeffs = [Fraction(0)] * (n + 1 - len(coeffs)) + coeffs
    return coeffs


def _horner(coeffs, z):
    acc = 0j
    for c in coeffs:
        acc = acc * z + c
    return acc


def _trim(p):
    i = 0
    while i < len(p) - 1 and p[i] == 0:
        i += 1
    return list(p[i:])


def _pdivmod(a, b):
    a, b = _trim(a), _trim(b)
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    r = list(a)
    while len(r) >= len(b) and any(r):
        f = r[0] / b[0]
        q[len(q) - (len(r) - len(b)) - 1] = f
        r = _trim([x - f * y for x, y in zip(r, b + [Fraction(0)] * (len(r) - len(b)))][1:] or [Fraction(0)])
        if len(r) < len(b):
            break
    return _trim(q), _trim(r)


def _pgcd(a, b):
    a, b = _trim(a), _trim(b)
    while any(b):
        a, b = b, _pdivmod(a, b)[1]
    return [x / a[0] for x in a]


def _pderiv(p):
    deg = len(p) - 1
    return _trim([x * (deg - i) for i, x in enumerate(p[:-1])] or [Fraction(0)])


def _psub(p, q):
    return _trim(_padd(p, [-x for x in q]))


def squarefree_factors(coeffs) -> list[tuple[list, int]]:
    """Yun's decomposition over the rationals: ``p = prod f_i ** i`` with square-free ``f_i``."""
    p = _trim([Fraction(x) for x in coeffs])
    if len(p) < 2:
        return []
    p = [x / p[0] for x in p]
    dp = _pderiv(p)
    c = _pgcd(p, dp)
    w = _pdivmod(p, c)[0]
    y = _pdivmod(dp, c)[0]
    z = _psub(y, _pderiv(w))
    out = []
    i = 1
    while len(w) > 1:
        g = _pgcd(w, z)
        if len(g) > 1:
            out.append((g, i))
        w = _pdivmod(w, g)[0]
        y = _pdivmod(z, g)[0]
        z = _psub(y, _pderiv(w))
        i += 1
    return out


def polynomial_roots(coeffs, tol: float = 1e-10, max_iter: int = 500) -> np.ndarray:
    """All complex roots of a polynomial (highest degree first) by Aberth iteration."""
    c = [complex(x) for x in coeffs]
    while c and c[0] == 0:
        c.pop(0)
    deg = len(c) - 1
    if deg < 1:
        return np.array([], dtype=complex)
    c = [x / c[0] for x in c]
    dc = [x * (deg - i) for i, x in enumerate(c[:-1])]
    radius = 1.0 + max(abs(x) for x in c[1:])
    z = [radius * 0.5 * cmath.exp(1j * (2 * math.pi * k / deg + 0.4)) for k in range(deg)]
    for _ in range(max_iter):
        biggest = 0.0
        for k in range(deg):
            p = _horner(c, z[k])
            if p == 0:
                continue
            dp = _horner(dc, z[k])
            if dp == 0:
                z[k] += 1e-8 * radius
                biggest = max(biggest, 1e-8 * radius)
                continue
            ratio = p / dp
            repulse = sum(1.0 / (z[k] - z[j]) for j in range(deg) if j != k and z[k] != z[j])
            step = ratio / (1.0 - ratio * repulse)
            z[k] -= step
            biggest = max(biggest, abs(step))
        if biggest < 1e-15 * radius:
            break
    roots = np.array(z)
    scale = np.array([sum(abs(x) * abs(r) ** (deg - i) for i, x in enumerate(c)) for r in roots])
    resid = np.array([abs(_horner(c, r)) for r in roots])
    if np.any(resid > tol * np.maximum(scale, 1.0)):
        raise NonConvergence(f"root residual {resid.max():.3e} exceeds {tol}")
    return roots


def charpoly_spectrum(matrix) -> np.ndarray:
    """Eigenvalues of a matrix of order <= 8 via its exact characteristic polynomial."""
    A = np.asarray(matrix, dtype=float)
    if A.shape[0] > MAX_ORACLE_ORDER:
        raise OrderTooLarge(f"order {A.shape[0]} > {MAX_ORACLE_ORDER}")
    parts = [np.repeat(polynomial_roots(f), m)
             for f, m in squarefree_factors(charpoly_coefficients(A))]
    return np.concatenate(parts) if parts else np.array([], dtype=complex)


def match_distance(a, b) -> float:
    """Largest pairwise distance under the optimal one-to-one matching of two multisets."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"multisets of different sizes {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


# -- decay of P^n f - Pi f ----------------------------------------------------

@dataclass
class DecayFit:
    """Least-squares fit ``log ||P^n f - Pi f||_2 ~ log(C ||f||_2) + n log(rate)``."""

    rate: float
    prefactor: float
    window: tuple
    r_squared: float
    norms: np.ndarray = field(repr=False, default=None)

    @property
    def accepted(self) -> bool:
        return 0.0 < self.rate < 1.0 and self.r_squared >= 0.99

    def to_dict(self) -> dict:
        return {"rate": self.rate, "prefactor": self.prefactor,
                "window": list(self.window), "r_squared": self.r_squared}


def power_decay_rate(matrix, pi, f, window=None, max_iter: int = 1000,
                     floor: float = 1e-250) -> DecayFit:
    """Fit the geometric decay rate of ``g_n = P^n (f - pi(f) 1)`` in ``l2(pi)``.

    ``g`` is re-centred after every step so that rounding cannot feed the
    constant mode back in.  With ``window=None`` the fit uses iterations
    ``5..max_iter`` cut short where the norm first falls below ``floor``.
    An explicit window that the norms cannot reach before underflowing
    (``1e-300``) raises :class:`UnderflowBeforeWindow`.
    """
    P = np.asarray(matrix, dtype=float)
    w = np.asarray(pi.prefix if hasattr(pi, "prefix") else pi, dtype=float)
    f = np.asarray(f, dtype=float)
    g = f - (f @ w)
    f_norm = math.sqrt((f * f) @ w)
    g_norm = math.sqrt((g * g) @ w)
    if f_norm == 0.0 or g_norm <= 1e-14 * f_norm:
        raise DegenerateTestVector("f is constant: P^n f - Pi f vanishes identically")
    if window is None:
        lo, hi, auto = 5, max_iter, True
    else:
        lo, hi = int(window[0]), int(window[1])
        auto = False
    norms = [g_norm]
    for n in range(1, hi + 1):
        g = P @ g
        g -= g @ w
        nrm = math.sqrt((g * g) @ w)
        norms.append(nrm)
        if auto and nrm < floor:
            hi = n - 1
            break
        if not auto and nrm < 1e-300:
            raise UnderflowBeforeWindow(f"norm hit {nrm:.1e} at n={n} before window end {hi}")
    if hi - lo < 2:
        raise UnderflowBeforeWindow(f"window {lo}..{hi} too short before underflow")
    n_idx = np.arange(lo, hi + 1)
    y = np.log(np.asarray(norms)[lo: hi + 1])
    slope, intercept = np.polyfit(n_idx, y, 1)
    fitted = intercept + slope * n_idx
    ss_res = float(((y - fitted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(rate=float(math.exp(slope)), prefactor=float(math.exp(intercept) / f_norm),
                    window=(lo, hi), r_squared=r2, norms=np.asarray(norms))


# -- the l2 / l1 domination inequality ---------------------------------------

@dataclass
class Lemma1Report:
    alpha: float
    L: float
    sample_count: int
    seed: int
    max_violation: float
    violations: int
    min_feasible_L: float
    probe_max_violation: float | None = None
    probe_violations: int = 0

    @property
    def holds(self) -> bool:
        return self.violations == 0 and self.probe_violations == 0

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha, "L": self.L, "sample_count": self.sample_count,
            "seed": self.seed, "max_violation": self.max_violation,
            "violations": self.violations, "min_feasible_L": self.min_feasible_L,
            "probe_max_violation": self.probe_max_violation,
            "probe_violations": self.probe_violations,
        }


def _gaps(P, w, F, alpha):
    """Columns of F -> (||PF||_2 - alpha ||F||_2, ||F||_1)."""
    PF = P @ F
    n2 = np.sqrt((w[:, None] * PF * PF).sum(axis=0))
    f2 = np.sqrt((w[:, None] * F * F).sum(axis=0))
    f1 = (w[:, None] * np.abs(F)).sum(axis=0)
    return n2 - alpha * f2, f1


def lemma1_check(matrix, pi, alpha: float, L: float, sample_count: int = 1000,
                 seed: int = 0, probes=None) -> Lemma1Report:
    """Sample ``||P f||_2 - alpha ||f||_2 - L ||f||_1`` over standard normal ``f``.

    ``probes`` (columns are vectors) are evaluated separately and reported
    under ``probe_*``.  ``min_feasible_L`` is the smallest L that would make
    every sampled vector satisfy the inequality.
    """
    P = np.asarray(matrix, dtype=float)
    w = np.asarray(pi.prefix if hasattr(pi, "prefix") else pi, dtype=float)
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((P.shape[0], sample_count))
    excess, f1 = _gaps(P, w, F, alpha)
    gaps = excess - L * f1
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(f1 > 0, excess / f1, 0.0)
    report = Lemma1Report(
        alpha=alpha, L=L, sample_count=sample_count, seed=seed,
        max_violation=float(gaps.max()) if sample_count else 0.0,
        violations=int((gaps > 0).sum()),
        min_feasible_L=float(max(need.max(), 0.0)) if sample_count else 0.0,
    )
    if probes is not None:
        Q = np.asarray(probes, dtype=float)
        pe, p1 = _gaps(P, w, Q, alpha)
        pg = pe - L * p1
        report.probe_max_violation = float(pg.max())
        report.probe_violations = int((pg > 0).sum())
    return report


def tail_indicators(order: int, start: int = 0, pi=None) -> np.ndarray:
    """Indicator vectors of states ``start..order-1`` as columns.

    With ``pi`` each column is scaled to unit ``l2(pi)`` norm, so that a
    violation at a far state is not hidden by the size of ``pi`` there.
    """
    E = np.eye(order)[:, start:]
    if pi is not None:
        w = np.asarray(pi.prefix if hasattr(pi, "prefix") else pi, dtype=float)
        E = E / np.sqrt(w[start:])[None, :]
    return E


def grid_search_L(matrix, pi, alpha: float, sample_count: int = 1000, seed: int = 1,
                  probes=None, grid=None) -> float:
    """Smallest grid value of L clearing a calibration sample and the probes.

    The default grid is ``10**(j/4)`` for ``j = -40..60``; the value returned
    is the next grid point strictly above the calibration requirement.
    """
    if grid is None:
        grid = 10.0 ** (np.arange(-40, 61) / 4.0)
    P = np.asarray(matrix, dtype=float)
    w = np.asarray(pi.prefix if hasattr(pi, "prefix") else pi, dtype=float)
    need = lemma1_check(P, w, alpha, 0.0, sample_count, seed).min_feasible_L
    if probes is not None:
        pe, p1 = _gaps(P, w, np.asarray(probes, dtype=float), alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            need = max(need, float(np.nanmax(np.where(p1 > 0, pe / p1, 0.0))))
    above = [x for x in grid if x > need]
    if not above:
        raise NonConvergence(f"no grid value above the required L = {need:.3e}")
    return float(above[0])
