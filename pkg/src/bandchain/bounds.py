"""Explicit rate bounds for band kernels.

Everything here is driven by the limiting increment law ``a_m`` of the tail:

* ``psi(t) = sum_m a_m t**(-m)`` is convex on ``(0, inf)`` with ``psi(1) = 1``;
  under a negative mean increment it has a second root ``tau`` in ``(0, 1)``,
  which is the geometric decay ratio of the stationary distribution.
* ``alpha0 = psi(sqrt(tau))`` bounds the essential spectral radius of P on
  ``l2(pi)`` and is the limit of ``(PV)(i)/V(i)`` for ``V(n) = tau**(-n/2)``.
* The same quantity appears as ``sum_m limsup_i beta_m(i)`` with
  ``beta_m(i) = sqrt(P(i, i+m) P*(i+m, i))``, which is estimated directly from
  a stationary prefix as an independent route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import (
    AlphaTooSmall,
    BandChainError,
    NoSubunitRoot,
    NonStochasticRow,
    NegativeEntry,
    ZeroMass,
)

EPS_BRACKET = 1e-12


@dataclass(frozen=True, init=False)
class IncrementLaw:
    """Limit increments ``m -> a_m`` of a band tail."""

    terms: tuple

    def __init__(self, increments: Mapping[int, float]):
        terms = []
        for m, a in sorted((int(m), float(a)) for m, a in increments.items()):
            if a < 0.0:
                raise NegativeEntry(f"a[{m}] = {a!r} < 0")
            if a > 1.0:
                raise NonStochasticRow(f"a[{m}] = {a!r} > 1")
            terms.append((m, a))
        s = math.fsum(a for _, a in terms)
        if abs(s - 1.0) > 1e-12:
            raise NonStochasticRow(f"increments sum to {s!r}")
        object.__setattr__(self, "terms", tuple(terms))

    def items(self):
        return iter(self.terms)

    def get(self, m: int, default: float = 0.0) -> float:
        return dict(self.terms).get(m, default)

    def as_dict(self) -> dict[int, float]:
        return dict(self.terms)

    @property
    def g(self) -> int:
        """Largest downward jump carrying positive mass (0 if none)."""
        return max([-m for m, a in self.terms if m < 0 and a > 0], default=0)

    @property
    def d(self) -> int:
        """Largest upward jump carrying positive mass (0 if none)."""
        return max([m for m, a in self.terms if m > 0 and a > 0], default=0)


def psi_eval(law: IncrementLaw, t: float) -> float:
    """``sum_m a_m t**(-m)``."""
    if t <= 0:
        raise ValueError(f"psi is defined for t > 0, got {t}")
    return math.fsum(a * t ** (-m) for m, a in law.items() if a != 0.0)


def psi_prime(law: IncrementLaw, t: float) -> float:
    return math.fsum(-m * a * t ** (-m - 1) for m, a in law.items() if a != 0.0)


def mean_increment(law: IncrementLaw) -> float:
    """Mean jump ``sum_m m a_m``; negative means drift towards 0."""
    return math.fsum(m * a for m, a in law.items())


def solve_tau(law: IncrementLaw) -> float:
    """Root of ``psi(t) = 1`` in ``(0, 1)``.

    Returns ``0.0`` when the law has no upward jumps (the degenerate case in
    which the stationary tail decays faster than any geometric sequence).

    Raises
    ------
    NoSubunitRoot
        If the mean increment is not negative.
    """
    mu = mean_increment(law)
    if mu >= 0.0:
        raise NoSubunitRoot(f"mean increment {mu!r} >= 0: psi'(1) <= 0, no root in (0,1)")
    if law.d == 0:
        return 0.0

    # psi is convex, decreasing then increasing on (0, 1]: locate the minimum
    # through the sign change of psi', then bisect the decreasing branch.
    lo, hi = EPS_BRACKET, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if psi_prime(law, mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    tmin = 0.5 * (lo + hi)
    if psi_eval(law, tmin) >= 1.0:
        raise NoSubunitRoot("psi stays >= 1 on (0, 1)")

    lo, hi = EPS_BRACKET, tmin
    while hi - lo > 1e-8:
        mid = 0.5 * (lo + hi)
        if psi_eval(law, mid) > 1.0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    for _ in range(50):
        r = psi_eval(law, t) - 1.0
        if abs(r) <= 1e-15:
            break
        step = r / psi_prime(law, t)
        t_new = t - step
        if not (lo <= t_new <= hi):
            break
        if t_new == t:
            break
        t = t_new
    if abs(psi_eval(law, t) - 1.0) > 1e-12:
        raise BandChainError(f"tau polish failed: residual {psi_eval(law, t) - 1.0!r}")
    return t


def alpha0_closed_form(law: IncrementLaw, tau: float) -> float:
    """``psi(sqrt(tau))`` for ``tau`` in ``(0, 1)``, and ``a_0`` when ``tau == 0``."""
    if tau == 0.0:
        return law.get(0)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")
    return psi_eval(law, math.sqrt(tau))


def psi_shape_check(law: IncrementLaw, tau: float, n: int = 100) -> dict:
    """Sample psi on ``(0,tau)``, ``(tau,1)`` and ``(1,4)``; report where it sits vs 1."""
    inner = np.linspace(tau, 1.0, n + 2)[1:-1]
    below = np.linspace(0.0, tau, n + 2)[1:-1]
    above = np.linspace(1.0, 4.0, n + 2)[1:-1]
    return {
        "below_one_on_tau_1": all(psi_eval(law, t) < 1.0 for t in inner),
        "above_one_on_0_tau": all(psi_eval(law, t) > 1.0 for t in below),
        "above_one_beyond_1": all(psi_eval(law, t) > 1.0 for t in above),
    }


def _prefix(pi) -> np.ndarray:
    return np.asarray(pi.prefix if hasattr(pi, "prefix") else pi, dtype=float)


def beta(kernel, pi, i: int, m: int) -> float:
    """``sqrt(P(i,i+m) P*(i+m,i)) = P(i,i+m) sqrt(pi(i)/pi(i+m))``."""
    if i < kernel.i0:
        raise ValueError(f"beta is defined for i >= i0 = {kernel.i0}")
    if abs(m) > kernel.N:
        raise ValueError(f"|m| = {abs(m)} exceeds N = {kernel.N}")
    p = kernel.entry(i, i + m)
    if p == 0.0:
        return 0.0
    w = _prefix(pi)
    if i + m >= len(w):
        raise ValueError(f"pi does not cover index {i + m}")
    if w[i] <= 0.0 or w[i + m] <= 0.0:
        raise ZeroMass(f"pi({i}) = {w[i]!r}, pi({i + m}) = {w[i + m]!r}")
    return p * math.sqrt(w[i] / w[i + m])


def beta_sups(kernel, pi, ell: int, horizon: int) -> dict[int, float]:
    """``m -> max_{ell <= i <= horizon} beta_m(i)``."""
    sups = {m: 0.0 for m in range(-kernel.N, kernel.N + 1)}
    for i in range(ell, horizon + 1):
        for m in sups:
            b = beta(kernel, pi, i, m)
            if b > sups[m]:
                sups[m] = b
    return sups


def alpha0_empirical(kernel, pi, ell: int, horizon: int) -> float:
    """Finite-horizon surrogate ``sum_m max_{ell <= i <= horizon} beta_m(i)``.

    Nonincreasing in ``ell`` by construction.  ``pi`` must cover
    ``horizon + N``; indices close to its truncation edge should be avoided.
    """
    if ell < kernel.i0:
        raise ValueError(f"ell={ell} < i0={kernel.i0}")
    if horizon < ell + 10 * kernel.N:
        raise ValueError(f"horizon={horizon} < ell + 10N = {ell + 10 * kernel.N}")
    if len(_prefix(pi)) <= horizon + kernel.N:
        raise ValueError(f"pi must cover 0..{horizon + kernel.N}")
    return math.fsum(beta_sups(kernel, pi, ell, horizon).values())


@dataclass
class DriftCertificate:
    """``(PV)(i) <= alpha V(i) + L`` with ``V(n) = gamma**n``, checked up to ``horizon``."""

    gamma: float
    alpha: float
    L: float
    delta: float
    horizon: int
    alpha0: float
    worst_index: int = 0

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "alpha": self.alpha,
            "L": self.L,
            "delta": self.delta,
            "horizon": self.horizon,
            "alpha0": self.alpha0,
            "worst_index": self.worst_index,
        }


def drift_ratio(kernel, gamma: float, i: int) -> float:
    """``(PV)(i) / V(i) = sum_j P(i,j) gamma**(j-i)``."""
    return math.fsum(p * gamma ** (j - i) for j, p in kernel.row(i).items())


def drift_constants(kernel, tau: float, alpha: float | None = None,
                    horizon: int | None = None) -> DriftCertificate:
    """Drift constant L for ``V = pi**(-1/2)``, i.e. ``V(n) = tau**(-n/2)``.

    For a homogeneous tail ``(PV)(i)/V(i)`` equals ``alpha0`` for every
    ``i >= i0``, so only the boundary rows can contribute to L; ``horizon``
    then defaults to ``i0``.  Varying tails need an explicit horizon and the
    certificate only covers rows up to it.
    """
    law = kernel.limit_law
    if tau == 0.0:
        raise BandChainError("V = pi^(-1/2) is not geometric when tau = 0")
    a0 = alpha0_closed_form(law, tau)
    if alpha is None:
        alpha = a0 + (1.0 - a0) / 100.0
    if alpha <= a0:
        raise AlphaTooSmall(f"alpha={alpha!r} must exceed alpha0={a0!r}")
    if horizon is None:
        if not kernel.homogeneous:
            raise ValueError("a varying tail needs an explicit drift horizon")
        horizon = kernel.i0
    gamma = tau ** -0.5
    L, worst = 0.0, 0
    for i in range(horizon + 1):
        excess = drift_ratio(kernel, gamma, i) - alpha
        if excess > 0.0:
            val = excess * gamma ** i
            if val > L:
                L, worst = val, i
    return DriftCertificate(gamma=gamma, alpha=alpha, L=L, delta=alpha,
                            horizon=horizon, alpha0=a0, worst_index=worst)


def verify_drift(kernel, cert: DriftCertificate, upto: int, tol: float = 1e-12) -> tuple[bool, float]:
    """Check ``(PV)(i) <= alpha V(i) + L`` for ``i <= upto``.

    Homogeneous tail rows use the law-level ratio ``sum_m a_m gamma**m``
    once; other rows are evaluated individually.  Returns ``(ok, worst)``
    where ``worst`` is the largest ``ratio - alpha - L/V(i)``.
    """
    log_gamma = math.log(cert.gamma)
    log_L = math.log(cert.L) if cert.L > 0 else -math.inf
    tail_ratio = None
    if kernel.homogeneous:
        tail_ratio = math.fsum(a * cert.gamma ** m for m, a in kernel.limit_law.items())
    worst = -math.inf
    for i in range(upto + 1):
        if tail_ratio is not None and i >= kernel.i0:
            r = tail_ratio
        else:
            r = drift_ratio(kernel, cert.gamma, i)
        slack = math.exp(log_L - i * log_gamma) if cert.L > 0 else 0.0
        worst = max(worst, r - cert.alpha - slack)
    return worst <= tol, worst


@dataclass
class SpectralReport:
    """Closed-form and empirical rate bounds for one kernel."""

    tau: float
    tau_zero: bool
    psi_residual: float
    alpha0_closed: float
    alpha0_empirical: float | None
    ell: int | None
    horizon: int | None
    mean_increment: float
    drift: DriftCertificate | None
    ess_radius_bound: float
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "tau_zero": self.tau_zero,
            "psi_residual": self.psi_residual,
            "alpha0_closed": self.alpha0_closed,
            "alpha0_empirical": self.alpha0_empirical,
            "alpha0_empirical_provenance": {"ell": self.ell, "horizon": self.horizon},
            "mean_increment": self.mean_increment,
            "drift": self.drift.to_dict() if self.drift else None,
            "ess_radius_bound": self.ess_radius_bound,
            "notes": list(self.notes),
        }


def spectral_report(kernel, pi=None, ell: int | None = None, horizon: int = 200,
                    alpha: float | None = None) -> SpectralReport:
    """Assemble tau, both alpha0 routes, the mean increment and a drift certificate.

    ``pi`` is optional; without it the empirical alpha0 is skipped.
    """
    law = kernel.limit_law
    mu = mean_increment(law)
    tau = solve_tau(law)
    a0 = alpha0_closed_form(law, tau)
    notes = []
    emp = None
    if ell is None:
        ell = kernel.i0 + 10 * kernel.N
    horizon = max(horizon, ell + 10 * kernel.N)
    if pi is not None:
        if len(_prefix(pi)) > horizon + kernel.N:
            emp = alpha0_empirical(kernel, pi, ell, horizon)
        else:
            notes.append("stationary prefix too short for the empirical alpha0")
    drift = None
    if tau > 0.0:
        drift = drift_constants(kernel, tau, alpha=alpha,
                                horizon=None if kernel.homogeneous else horizon)
    else:
        notes.append("tau = 0: alpha0 = a_0, V = pi^(-1/2) not geometric, no drift certificate")
    if not kernel.homogeneous:
        notes.append("varying tail: empirical alpha0 is a finite-horizon surrogate")
    return SpectralReport(
        tau=tau,
        tau_zero=tau == 0.0,
        psi_residual=(psi_eval(law, tau) - 1.0) if tau > 0 else 0.0,
        alpha0_closed=a0,
        alpha0_empirical=emp,
        ell=ell if emp is not None else None,
        horizon=horizon if emp is not None else None,
        mean_increment=mu,
        drift=drift,
        ess_radius_bound=a0,
        notes=notes,
    )
