"""Acceptance gate: every criterion at its stated operating point and
tolerance, one printed pass/fail line each.

Fit ranges, thresholds and seeds are frozen from pilot runs; nothing is
calibrated at test time.  The whole module takes roughly 45 minutes.
Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines
as they complete.
"""

import json

import numpy as np
import pytest

from percolab.counting import count_animals, disjoint_packing, exp_dec_bound, partitions
from percolab.estimators import (
    chi_f_hat,
    kappa_derivative_check,
    kappa_hat,
    origin_cluster_statistics,
    tau_f_ball_sum,
    tau_f_decay,
    theta_hat,
)
from percolab.expansion import disk_bound_sweep, empirical_expansion
from percolab.lattice import DIAGONAL, LatticeWindow, box_overlap
from percolab.renorm import good_probability
from percolab.separating import tail_experiments
from percolab.stats import Z95
from percolab.verify import (
    bfs_animal_counts,
    moat_mutator,
    partition_count_by_enumeration,
    run_structure_suite,
)


def emit(criterion, ok, detail):
    print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


# ---------------------------------------------------------------------- #
# shared structure-suite runs (criteria 1, 2 and the identity half of 4)


@pytest.fixture(scope="module")
def structure_runs():
    runs = {
        "pinned_d2": run_structure_suite(LatticeWindow(2, 10, 12), 0.65, 1000, seed=101),
        "pinned_d3": run_structure_suite(LatticeWindow(3, 6, 7), 0.35, 300, seed=102),
        "conditioned_d2": run_structure_suite(
            LatticeWindow(2, 10, 7), 0.85, 400, seed=103, conditioned=True),
        "conditioned_d3": run_structure_suite(
            LatticeWindow(3, 6, 6), 0.8, 60, seed=104, conditioned=True),
    }
    return runs


def test_criterion_1_structure_suite(structure_runs):
    d2 = structure_runs["pinned_d2"]
    d3 = structure_runs["pinned_d3"]
    zero_violations = d2.ok and d3.ok
    margins_ok = d2.margin_rate < 0.01 and d3.margin_rate < 0.01
    emit(
        "1 structure-suite",
        zero_violations and margins_ok,
        f"violations d2={dict(d2.violations)} d3={dict(d3.violations)}; "
        f"margin rates d2={d2.margin_rate:.3f} d3={d3.margin_rate:.3f} (need < 0.01)",
    )
    assert zero_violations
    assert margins_ok


def test_criterion_2_cut_contains_touching(structure_runs):
    checked = sum(r.n_phi_checked for r in structure_runs.values())
    bad = sum(r.violations.get("touching_bounded_by_cut", 0) for r in structure_runs.values())
    ok = bad == 0 and checked >= 100
    emit("2 touching<=cut", ok, f"{checked} applicable samples, {bad} violations")
    assert ok


def test_criterion_3_tail_signature():
    # pilot-frozen fit range for the touching statistic: n >= 8 (head
    # curvature below that), survival bins with at least 20 samples
    w = LatticeWindow(3, 6, 4)
    res = tail_experiments(0.35, 6, w, 10_000, seed=21,
                           statistics=("cut_size", "touching"),
                           fit_ranges={"touching": (8, None), "cut_size": (8, None)})
    touch = res["touching"].fit
    cut = res["cut_size"].fit
    touch_ok = touch is not None and touch.t_hat > 0 and touch.r2 >= 0.98
    cut_ok = cut is not None and cut.t_hat > 0 and cut.r2 >= 0.98
    emit(
        "3 tail-signature",
        touch_ok and cut_ok,
        "touching: " + (f"t={touch.t_hat:.3f} r2={touch.r2:.4f}" if touch else "no fit")
        + "; cut_size: " + (f"t={cut.t_hat:.3f} r2={cut.r2:.4f}" if cut else
                            f"no applicable samples ({res['cut_size'].n_excluded_margin} margin-excluded)"),
    )
    assert touch_ok
    assert cut_ok


def test_criterion_4_inclusion_exclusion(structure_runs):
    identity_bad = sum(
        r.violations.get("inclusion_exclusion_identity", 0)
        + r.violations.get("case_split_identity", 0)
        for r in structure_runs.values()
    )
    agg = empirical_expansion(0.85, 10, LatticeWindow(2, 10, 7), n_max=40,
                              n_samples=1500, seed=105, mutator=moat_mutator())
    consistent = abs(agg.total - agg.direct) <= max(3 * agg.diff_se, 1e-12)
    decay_ok = agg.decay is not None and agg.decay.passes and agg.decay.complexity_ok
    ok = identity_bad == 0 and consistent and decay_ok
    decay_txt = f"{agg.decay.c_upper95:.3f}" if agg.decay else "none"
    emit(
        "4 inclusion-exclusion",
        ok,
        f"identity violations={identity_bad}; |sum-direct|={abs(agg.total - agg.direct):.4f} "
        f"vs 3se={3 * agg.diff_se:.4f}; decay upper95={decay_txt}",
    )
    assert identity_bad == 0
    assert consistent
    assert decay_ok


def test_criterion_5_disk_bound():
    res = disk_bound_sweep(1_000_000, seed=55)
    ok = res.violations == 0 and res.p1_checked > 200_000
    emit("5 disk-bound", ok,
         f"{res.violations} violations in {res.checked} tuples "
         f"({res.p1_checked} at the p=1 variant)")
    assert ok


def test_criterion_6_good_box_trend():
    ests = {}
    for N in (5, 10, 20):
        w = LatticeWindow(2, N, 3)
        ests[N] = good_probability(0.6, N, w, 10_000, seed=106)
    increasing = ests[5].estimate < ests[10].estimate < ests[20].estimate
    threshold = ests[20].estimate >= 0.05  # pilot-frozen floor at N=20
    emit("6 good-box-trend", increasing and threshold,
         f"estimates {[round(ests[N].estimate, 4) for N in (5, 10, 20)]} "
         f"(strictly increasing: {increasing}, N=20 >= 0.05: {threshold})")
    assert increasing and threshold


def test_criterion_7_counting_oracles():
    table = partitions(100)
    partitions_ok = all(
        table[n] == partition_count_by_enumeration(n) for n in range(21)
    ) and table[4] == 5 and table[10] == 42
    animals_ok = (
        count_animals(2, "axis", 8).counts == bfs_animal_counts(2, "axis", 8)
        and count_animals(2, DIAGONAL, 6).counts == bfs_animal_counts(2, DIAGONAL, 6)
        and count_animals(3, "axis", 6).counts == bfs_animal_counts(3, "axis", 6)
        and count_animals(3, DIAGONAL, 4).counts == bfs_animal_counts(3, DIAGONAL, 4)
    )
    rng = np.random.Generator(np.random.Philox(key=np.array([57, 0], dtype=np.uint64)))
    w = LatticeWindow(2, 10, 12)
    offsets = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if (dx, dy) != (0, 0)]
    packing_ok = True
    for _ in range(25):
        cells = {(0, 0)}
        while len(cells) < 50:
            base = sorted(cells)[int(rng.integers(0, len(cells)))]
            off = offsets[int(rng.integers(0, 8))]
            cells.add((base[0] + off[0], base[1] + off[1]))
        boxes = np.array(sorted(cells), dtype=np.int64)
        sub = disjoint_packing(boxes)
        if sub.shape[0] < int(np.ceil(boxes.shape[0] / 4)):
            packing_ok = False
        for i in range(sub.shape[0]):
            for j in range(i + 1, sub.shape[0]):
                if box_overlap(sub[i], sub[j], w).shape[0]:
                    packing_ok = False
    # composite bound at the stated operating point: reported either way
    wd = LatticeWindow(2, 10, 3)
    good = good_probability(0.65, 10, wd, 4000, seed=107)
    c_hat = 1.0 - good.estimate
    mu = count_animals(2, DIAGONAL, 7).mu_extrapolated
    value = 2 * mu * c_hat ** 0.25
    bound = exp_dec_bound(10, c_hat, 4, 2 * mu, 13.0)
    report_ok = bound.decays == (value < 1.0)
    ok = partitions_ok and animals_ok and packing_ok and report_ok
    emit("7 counting-oracles", ok,
         f"partitions ok={partitions_ok}, animals ok={animals_ok}, packing ok={packing_ok}; "
         f"composite M*c^(1/k)={value:.2f} at (d=2, N=10, p=0.65) -> decays={bound.decays} "
         f"(explicitly reported)")
    assert ok


def test_criterion_8_estimator_identities():
    w = LatticeWindow(2, 5, 3)
    exact_ok = (theta_hat(1.0, w, 2000, seed=108).estimate == 1.0
                and theta_hat(0.0, w, 2000, seed=108).estimate == 0.0)
    stats = origin_cluster_statistics(0.7, w, 50_000, seed=109)
    hist = stats.histogram()
    norm_ok = stats.theta + sum(hist.values()) == 1.0
    moment_ok = abs(stats.chi_f(1) - sum(n * v for n, v in hist.items())) < 1e-12
    # chi^f vs the summed finite-pair function, independent seeds
    chi = chi_f_hat(1, 0.7, w, 200_000, seed=31)
    se_chi = (chi.ci_high - chi.estimate) / Z95
    ball_sum, se_sum = tau_f_ball_sum(0.7, w, 6, 200_000, seed=32)
    cross_ok = abs(chi.estimate - ball_sum) <= 3 * np.hypot(se_chi, se_sum)
    # mean reciprocal size below the finite fraction, combined one-sided CI
    kap = kappa_hat(0.7, w, 50_000, seed=109)
    th = theta_hat(0.7, w, 50_000, seed=109)
    se_k = (kap.ci_high - kap.estimate) / Z95
    se_t = (th.ci_high - th.estimate) / Z95
    kappa_ok = kap.estimate - (1 - th.estimate) <= Z95 * np.hypot(se_k, se_t)
    # derivative identity at the stated point
    kd = kappa_derivative_check(0.7, 0.02, w, 1_000_000, seed=34)
    deriv_ok = kd.se_units <= 3.0
    dec = tau_f_decay(0.7, w, (1, 0), 4, 500_000, seed=33)
    decay_ok = dec.c2_hat is not None and dec.c2_hat > 0
    ok = exact_ok and norm_ok and moment_ok and cross_ok and kappa_ok and deriv_ok and decay_ok
    emit("8 estimator-identities", ok,
         f"exact={exact_ok} norm={norm_ok} moment={moment_ok} "
         f"chi-cross |diff|={abs(chi.estimate - ball_sum):.5f}<=3se={3 * np.hypot(se_chi, se_sum):.5f} "
         f"kappa<=1-theta={kappa_ok} derivative {kd.se_units:.2f}se "
         f"tau_f c2={dec.c2_hat:.3f}")
    assert ok


def test_criterion_9_determinism(tmp_path):
    from percolab.runner import main

    manifest = tmp_path / "exp.manifest"
    manifest.write_text("""
schema_version = 1
kind = expansion
d = 2
N = 10
R = 7
p = 0.85
n_samples = 120
n_max = 40
seed = 5
conditioned = true
""")
    digests = []
    for tag, workers in (("w1", None), ("w4", 4)):
        out = tmp_path / tag
        argv = ["--manifest", str(manifest), "--out", str(out)]
        if workers:
            argv += ["--workers", str(workers)]
        assert main(argv) == 0
        blob = b"".join(
            (out / name).read_bytes()
            for name in ("expansion.csv", "expansion_summary.json", "run_summary.json")
        )
        digests.append(blob)
    ok = digests[0] == digests[1]
    emit("9 determinism", ok,
         "byte-identical result files at worker counts 1 and 4" if ok
         else "outputs differ across worker counts")
    assert ok
