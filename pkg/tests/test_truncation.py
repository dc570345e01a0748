import warnings

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from bandchain import (
    Case,
    TruncationResult,
    classify,
    rho_from_spectrum,
    spectrum,
    sweep,
    truncate_augment,
)
from bandchain.errors import InsufficientSweep, NoSubunitEigenvalue, PeriodicitySuspected
from bandchain.truncation import l2_scaling, scaled, spectrum_consistency

from conftest import E1_ALPHA0, E1_TAU, E2_ALPHA0

ROOT = np.sqrt(0.1875)


def fake(ks, rhos):
    return [TruncationResult(k=k, spectrum=None, rho_k=r, unit_count=1, backward_error=0.0,
                             wall_ms=0.0) for k, r in zip(ks, rhos)]


def test_spectrum_p2(e1):
    ev = np.sort_complex(spectrum(truncate_augment(e1, 2)))
    np.testing.assert_allclose(ev, [-ROOT, ROOT, 1.0], atol=1e-12)


def test_spectrum_small():
    np.testing.assert_allclose(spectrum(np.eye(2)), [1.0, 1.0])
    np.testing.assert_allclose(np.sort(spectrum([[0.0, 1.0], [1.0, 0.0]]).real), [-1.0, 1.0])
    with pytest.raises(ValueError):
        spectrum([[0.5, 0.4], [0.5, 0.5]])


def test_rho_from_spectrum():
    rho, units = rho_from_spectrum([1.0, ROOT, -ROOT], 1e-9)
    assert rho == pytest.approx(0.4330127, abs=1e-7)
    assert units == 1
    with pytest.raises(NoSubunitEigenvalue):
        rho_from_spectrum([1.0], 1e-3)
    with pytest.warns(PeriodicitySuspected):
        rho, units = rho_from_spectrum([1.0, -1.0, 0.5], 1e-9)
    assert rho == 0.5 and units == 2


def test_period_two_matrix_warns():
    # bipartite chain 0 <-> 1 <-> 2
    P = np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [0.0, 1.0, 0.0]])
    with pytest.warns(PeriodicitySuspected):
        rho_from_spectrum(spectrum(P))


def test_e1_sweep_values(e1_sweep):
    rho = [r.rho_k for r in e1_sweep]
    assert all(r.ok for r in e1_sweep)
    assert [r.unit_count for r in e1_sweep] == [1, 1, 1, 1]
    assert all(b < a for a, b in zip(rho[1:], rho)), "rho_k increases toward alpha0 for E1"
    assert abs(rho[-1] - rho[-2]) < 1e-2
    assert max(rho) <= E1_ALPHA0 + 0.01


@pytest.mark.parametrize("k", [25, 100, 200])
def test_e1_against_symmetric_solver(e1, k):
    # a tridiagonal stochastic matrix is similar to a symmetric one
    P = truncate_augment(e1, k)
    d = np.diag(P)
    off = np.sqrt(np.diag(P, 1) * np.diag(P, -1))
    ref = np.sort(np.abs(eigh_tridiagonal(d, off, eigvals_only=True)))[-2]
    got = sweep(e1, [k])[0].rho_k
    assert got == pytest.approx(ref, abs=1e-10)


def test_e2_against_multiprecision(e2):
    mpmath = pytest.importorskip("mpmath")
    P = truncate_augment(e2, 40)
    with mpmath.workdps(40):
        ev = mpmath.eig(mpmath.matrix(P.tolist()), left=False, right=False)
        mods = sorted(float(abs(e)) for e in ev)
    assert mods[-1] == pytest.approx(1.0, abs=1e-30)
    assert sweep(e2, [40])[0].rho_k == pytest.approx(mods[-2], abs=1e-10)


def test_e2_sweep_stays_below_bound(e2):
    res = sweep(e2, [25, 50, 100, 200])
    assert max(r.rho_k for r in res) <= E2_ALPHA0 + 0.01


def test_empty_grid(e1):
    assert sweep(e1, []) == []


def test_grid_must_increase(e1):
    with pytest.raises(ValueError):
        sweep(e1, [50, 25])


def test_per_k_failure_captured(e2):
    res = sweep(e2, [2, 10])
    assert not res[0].ok and "ValueError" in res[0].error
    assert res[1].ok


def test_threads_match_sequential(e2, monkeypatch):
    a = sweep(e2, [20, 30, 40, 60], workers=1)
    b = sweep(e2, [20, 30, 40, 60], workers=3)
    assert [r.rho_k for r in a] == [r.rho_k for r in b]
    monkeypatch.setenv("BANDCHAIN_THREADS", "2")
    c = sweep(e2, [20, 30, 40, 60])
    assert [r.rho_k for r in c] == [r.rho_k for r in a]


def test_scaling_keeps_spectrum(e2):
    P = truncate_augment(e2, 30)
    a = np.sort(np.abs(np.linalg.eigvals(P)))
    b = np.sort(np.abs(np.linalg.eigvals(scaled(P, l2_scaling(e2)))))
    np.testing.assert_allclose(a, b, atol=1e-8)
    assert l2_scaling(e2) < 0.0
    assert scaled(P, None) is P


@pytest.mark.parametrize("k", [10, 50, 150])
def test_spectrum_invariants(e1, e2, k):
    for kern in (e1, e2):
        P = truncate_augment(kern, k)
        ev = sweep(kern, [k])[0].spectrum
        assert np.min(np.abs(ev - 1.0)) <= 1e-10
        assert np.max(np.abs(ev)) <= 1.0 + 1e-9
        c = spectrum_consistency(P, ev)
        assert c["trace_defect"] <= 1e-8
        assert c["det_defect"] <= 1e-8


def test_classify_case_b():
    est = classify(fake([25, 50, 100, 200], [0.93, 0.945, 0.9499, 0.95]), 0.866)
    assert est.case is Case.CASE_B
    assert est.rho2 == est.rhoV == pytest.approx(0.95)
    assert not est.bound


def test_classify_case_a():
    est = classify(fake([25, 50, 100, 200], [0.85, 0.86, 0.8655, 0.866]), E1_ALPHA0, 0.01)
    assert est.case is Case.CASE_A
    assert est.bound
    assert est.rho2 <= E1_ALPHA0


def test_classify_e1(e1_sweep):
    est = classify(e1_sweep, E1_ALPHA0, 0.01)
    assert est.case is Case.CASE_A
    assert est.rho2 == E1_ALPHA0
    assert est.to_dict()["case"] == "CaseA_bound"


def test_classify_indeterminate_above():
    a0, m = 0.866, 0.01
    est = classify(fake([25, 50, 100, 200], [0.85, 0.86, a0 + m / 2, a0 + m / 2]), a0, m)
    assert est.case is Case.INDETERMINATE
    assert est.rho2 is None


def test_classify_indeterminate_unstalled():
    est = classify(fake([25, 50, 100, 200], [0.80, 0.85, 0.90, 0.95]), 0.866)
    assert est.case is Case.INDETERMINATE


def test_classify_needs_enough():
    with pytest.raises(InsufficientSweep):
        classify(fake([25, 50, 100], [0.8, 0.85, 0.86]), 0.866)
    with pytest.raises(InsufficientSweep):
        classify(fake([10, 20, 40, 80], [0.8, 0.85, 0.86, 0.86]), 0.866)


def test_tau_used_for_scaling(e1):
    assert l2_scaling(e1) == pytest.approx(0.5 * np.log(E1_TAU))


def test_warnings_recorded_not_raised():
    from bandchain.truncation import _one
    from bandchain import HomogeneousTail, IncrementLaw, band_kernel

    # boundary {0 -> 1, 1 -> 0}; the pair {0, 1} is closed and periodic
    k = band_kernel(2, 1, [{1: 1.0}, {0: 1.0}], HomogeneousTail(IncrementLaw({-1: 0.75, 1: 0.25})))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        r = _one(k, 10, 1e-9, None)
    assert r.unit_count >= 2
    assert r.warnings
