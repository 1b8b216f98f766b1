import pytest

from percolab.errors import InsufficientData
from percolab.estimators import (
    P_C_SURROGATE,
    calibrate_pc_surrogate,
    chi_f_hat,
    kappa_derivative_check,
    kappa_hat,
    origin_cluster_statistics,
    tau_f_decay,
    tau_hat,
    theta_hat,
)
from percolab.lattice import LatticeWindow


@pytest.fixture(scope="module")
def w():
    return LatticeWindow(2, 5, 3)


def test_theta_extremes(w):
    assert theta_hat(1.0, w, 300, seed=1).estimate == 1.0
    assert theta_hat(0.0, w, 300, seed=1).estimate == 0.0


def test_theta_decreases_with_window_below_threshold():
    small = theta_hat(0.4, LatticeWindow(2, 5, 3), 3000, seed=3)
    big = theta_hat(0.4, LatticeWindow(2, 5, 7), 3000, seed=3)
    assert big.estimate < small.estimate


def test_theta_monotone_on_grid(w):
    reports = [theta_hat(p, w, 3000, seed=4) for p in (0.5, 0.6, 0.7, 0.8, 0.9)]
    for a, b in zip(reports, reports[1:]):
        # point-estimate monotonicity with an overlapping-CI exemption
        assert b.estimate >= a.estimate or b.ci_high >= a.ci_low


def test_tau_examples(w):
    assert tau_hat([(0, 0), (0, 0)], 0.3, w, 300, seed=1).estimate == 1.0
    assert tau_hat([(0, 0), (1, 0)], 1.0, w, 300, seed=1).estimate == 1.0
    assert tau_hat([(0, 0), (1, 0)], 1.0, w, 300, seed=1, truncated=True).estimate == 0.0
    assert tau_hat([(0, 0), (1, 0)], 0.0, w, 300, seed=1).estimate == 0.0
    with pytest.raises(ValueError):
        tau_hat([(0, 0), (w.margin, 0)], 0.5, w, 100)


def test_chi_f_and_kappa_extremes(w):
    assert chi_f_hat(1, 0.0, w, 300, seed=1).estimate == 1.0
    assert chi_f_hat(1, 1.0, w, 300, seed=1).estimate == 0.0
    assert chi_f_hat(2, 0.0, w, 300, seed=1).estimate == 1.0
    assert kappa_hat(0.0, w, 300, seed=1).estimate == 1.0
    rep = kappa_hat(1.0, w, 300, seed=1)
    assert abs(rep.estimate - 1.0 / w.n_vertices) < 1e-15
    assert rep.extra["infinite_volume_value"] == 0.0
    with pytest.raises(ValueError):
        chi_f_hat(0, 0.5, w, 100)


def test_normalization_identities(w):
    stats = origin_cluster_statistics(0.7, w, 5000, seed=6)
    hist = stats.histogram()
    assert stats.theta + sum(hist.values()) == 1.0
    assert abs(stats.chi_f(1) - sum(n * v for n, v in hist.items())) < 1e-12
    # mean reciprocal size is bounded by the finite fraction plus rim bias
    assert stats.kappa() <= 1 - stats.theta + 1.0 / min(
        s for s, t in zip(stats.sizes, stats.touch) if t
    ) + 1e-12


def test_report_determinism_and_workers(w):
    a = theta_hat(0.63, w, 1200, seed=9).to_json()
    b = theta_hat(0.63, w, 1200, seed=9).to_json()
    c = theta_hat(0.63, w, 1200, seed=9, workers=3).to_json()
    assert a == b == c
    d = theta_hat(0.63, w, 1200, seed=10).to_json()
    assert d != a


def test_kappa_derivative_identity(w):
    rep = kappa_derivative_check(0.7, 0.02, w, 40_000, seed=2)
    assert rep.central_difference < 0 < rep.f_hat
    assert rep.se_units <= 3.0
    with pytest.raises(ValueError):
        kappa_derivative_check(0.7, 0.005, w, 1000)
    with pytest.raises(ValueError):
        kappa_derivative_check(0.99, 0.02, w, 1000)


def test_tau_f_decay_smoke(w):
    rep = tau_f_decay(0.62, w, (1, 0), 6, 60_000, seed=8)
    assert abs(rep.estimates[0] - (1.0 - theta_hat(0.62, w, 60_000, seed=8).estimate)) < 1e-12
    assert rep.c2_hat is not None and rep.c2_hat > 0
    logs = [e for e in rep.estimates[1:] if e > 0]
    assert all(a >= b for a, b in zip(logs, logs[1:]))
    with pytest.raises(ValueError):
        tau_f_decay(0.3, w, (1, 0), 4, 1000)


def test_tau_f_decay_insufficient(w):
    with pytest.raises(InsufficientData):
        tau_f_decay(0.95, w, (1, 0), 8, 2000, seed=1)


def test_pc_surrogate_calibration_smoke():
    assert P_C_SURROGATE[2] == 0.5
    out = calibrate_pc_surrogate(3, sizes=(8, 12), n_samples=60, seed=7)
    assert 0.15 < out["surrogate"] < 0.35
