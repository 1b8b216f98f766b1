import math

import numpy as np
import pytest

from percolab.errors import InsufficientData
from percolab.expansion import (
    DecayCheck,
    ExponentPolynomial,
    disk_bound_check,
    disk_bound_sweep,
    empirical_expansion,
    exact_event_polynomial,
    geometric_decay_check,
    per_config_inclusion_exclusion,
)
from percolab.lattice import LatticeWindow
from percolab.percolation import sample
from percolab.verify import close_region_surface, moat_mutator


def test_eval_examples():
    poly = ExponentPolynomial([(1, 2, 3)])
    assert abs(poly.eval(0.5) - 0.03125) < 1e-15
    poly_b = ExponentPolynomial([(2, 1, 1), (3, 0, 2)])
    assert poly_b.eval(1.0) == 0.0   # every term carries a (1-z) factor
    mag = abs(ExponentPolynomial([(1, 1, 1)]).eval(1j))
    assert abs(mag - math.sqrt(2)) < 1e-12


def test_eval_log_domain_matches_direct():
    z = complex(0.62, 0.2)
    for m, b in [(40, 30), (80, 60), (150, 120)]:
        direct = z ** m * (1 - z) ** b
        via = ExponentPolynomial([(3, m, b)]).eval(z)
        assert abs(via - 3 * direct) <= 1e-9 * max(abs(direct), 1e-300)


def test_canonicalization_and_json():
    poly = ExponentPolynomial([(1, 2, 3), (2, 2, 3), (-3, 2, 3), (5, 0, 0)])
    assert poly.terms == [(5, 0, 0)]
    again = ExponentPolynomial.from_json(poly.to_json())
    assert again == poly
    with pytest.raises(ValueError):
        ExponentPolynomial([(1, -1, 0)])


def test_exact_event_polynomial_closed_forms():
    single = exact_event_polynomial(1, lambda bits: bits[:, 0])
    assert single.terms == [(1, 1, 0)]
    both = exact_event_polynomial(2, lambda bits: bits[:, 0] & bits[:, 1])
    assert both.terms == [(1, 2, 0)]
    any_of_two = exact_event_polynomial(2, lambda bits: bits[:, 0] | bits[:, 1])
    for p in (0.0, 0.2, 0.7, 1.0):
        expect = 1 - (1 - p) ** 2
        assert abs(any_of_two.eval_real(p) - expect) < 1e-12
        assert 0.0 <= any_of_two.eval_real(p) <= 1.0
    with pytest.raises(ValueError):
        exact_event_polynomial(26, lambda bits: bits[:, 0])


def test_disk_bound_examples():
    assert disk_bound_check(0, 0, 0.3, 0.2, 0.3 + 0.1j)
    assert disk_bound_check(7, 5, 0.3, 0.2, 0.3)       # real center
    assert disk_bound_check(3, 4, 1.0, 0.5, 1.0 - 0.25)
    with pytest.raises(ValueError):
        disk_bound_check(1, 1, 0.9, 0.2, 0.9)           # p + delta >= 1
    with pytest.raises(ValueError):
        disk_bound_check(1, 1, 0.3, 0.2, 0.9)           # z outside the disk


def test_disk_bound_sweep_clean():
    res = disk_bound_sweep(100_000, seed=12)
    assert res.violations == 0
    assert res.p1_checked > 0


def test_geometric_decay_check():
    dec = geometric_decay_check(np.exp(-0.1 * np.arange(1, 25)))
    assert isinstance(dec, DecayCheck)
    assert dec.passes and abs(dec.c_hat - math.exp(-0.1)) < 1e-9
    flat = geometric_decay_check(np.ones(12))
    assert not flat.passes
    with pytest.raises(InsufficientData):
        geometric_decay_check([1.0, 0.0, 1.0, 0.0, 1.0])


def test_geometric_decay_complexity_hook():
    sizes = np.array([3, 5, 8])
    counts = np.array([30, 50, 80])
    dec = geometric_decay_check(np.exp(-0.2 * np.arange(1, 9)),
                                complexity=(sizes, counts, 5.0, 20.0))
    assert dec.complexity_ok is True
    dec2 = geometric_decay_check(np.exp(-0.2 * np.arange(1, 9)),
                                 complexity=(sizes, counts, 5.0, 9.0))
    assert dec2.complexity_ok is False


def square_region(radius, d):
    grid = np.stack(np.meshgrid(*[np.arange(-radius, radius + 1)] * d, indexing="ij"),
                    axis=-1).reshape(-1, d)
    return [np.array(b, dtype=np.int64) for b in grid]


def test_per_config_identity_cases():
    w = LatticeWindow(2, 10, 7)
    # no component at full openness
    assert per_config_inclusion_exclusion(sample(w, 1.0, 0, 0)) == (0, 0)
    # single moat: one occurring component
    cfg1 = close_region_surface(sample(w, 1.0, 0, 0), square_region(1, 2))
    assert per_config_inclusion_exclusion(cfg1) == (1, 1)
    # nested moats: two occurring components, signed subsets still sum to 1
    cfg2 = close_region_surface(cfg1, square_region(4, 2))
    assert per_config_inclusion_exclusion(cfg2) == (1, 1)
    # tiny origin cluster: diameter gate zeroes both sides
    assert per_config_inclusion_exclusion(sample(w, 0.0, 0, 0)) == (0, 0)


def test_empirical_expansion_p1():
    w = LatticeWindow(2, 10, 5)
    agg = empirical_expansion(1.0, 10, w, n_max=20, n_samples=150, seed=3)
    assert agg.direct == 0.0
    assert not agg.a_hat.any()
    assert agg.total == 0.0


def test_empirical_expansion_conditioned_consistency():
    w = LatticeWindow(2, 10, 7)
    agg = empirical_expansion(0.85, 10, w, n_max=40, n_samples=250, seed=5,
                              mutator=moat_mutator())
    assert agg.n_used >= 200
    assert abs(agg.total - agg.direct) <= max(3 * agg.diff_se, 1e-12)
    # every conditioned sample yields at least one occurring component
    assert agg.direct > 0.9
    assert agg.component_sizes.size > 0
    e_box = w.edges_per_box
    assert (agg.component_edge_counts <= (3 ** 2 + 1) * e_box * agg.component_sizes).all()
    assert (agg.component_edge_counts >= e_box / 8 * agg.component_sizes).all()
