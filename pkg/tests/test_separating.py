import numpy as np
import pytest

from percolab.errors import InsufficientData, MarginViolation
from percolab.lattice import LatticeWindow
from percolab.percolation import (
    clusters,
    cut_separates_from_rim,
    sample,
    touching_edge_count,
)
from percolab.renorm import BoxClassifier
from percolab.separating import (
    build_separating_component,
    enumerate_occurring,
    extract_cut,
    occurs,
    tail_experiment,
    tail_experiments,
)
from percolab.stats import exponential_tail_fit
from percolab.verify import close_region_surface


def square_region(radius, d):
    grid = np.stack(np.meshgrid(*[np.arange(-radius, radius + 1)] * d, indexing="ij"),
                    axis=-1).reshape(-1, d)
    return [np.array(b, dtype=np.int64) for b in grid]


def moated(w, radii):
    cfg = sample(w, 1.0, 0, 0)
    for r in radii:
        cfg = close_region_surface(cfg, square_region(r, w.d))
    return cfg


@pytest.fixture(scope="module", params=[(2, 10, 7), (3, 6, 5)], ids=["d2", "d3"])
def moat_case(request):
    d, N, R = request.param
    w = LatticeWindow(d, N, R)
    cfg = moated(w, [1])
    lab = clusters(cfg)
    cl = BoxClassifier(cfg, lab)
    return w, cfg, lab, cl


def test_single_moat_pipeline(moat_case):
    w, cfg, lab, cl = moat_case
    o = lab.origin_label
    assert not lab.touches[o]
    assert 5 * lab.diameter(o) >= w.N
    S = build_separating_component(cfg, lab, cl)
    assert S is not None and S.surrounds_origin
    assert occurs(S, cfg, cl)
    cut = extract_cut(S, cfg, cl)
    assert cut.cut_edges.size > 0
    assert not cfg.open_[cut.cut_edges].any()
    assert cut_separates_from_rim([w.origin_index], cut.cut_edges, w)
    phi = touching_edge_count(cfg, lab)
    assert phi <= cut.cut_edges.size
    occ = enumerate_occurring(cfg, lab, cl)
    assert len(occ) == 1
    assert np.array_equal(occ[0].boxes, S.boxes)


def test_component_boundary_disjoint(moat_case):
    _, cfg, lab, cl = moat_case
    S = build_separating_component(cfg, lab, cl)
    assert np.intersect1d(S.boxes, S.boundary).size == 0


def test_two_nested_moats_give_two_components():
    for d, N, R, radii in [(2, 10, 7, (1, 4)), (3, 6, 7, (1, 4))]:
        w = LatticeWindow(d, N, R)
        cfg = moated(w, radii)
        lab = clusters(cfg)
        occ = enumerate_occurring(cfg, lab)
        assert len(occ) == 2
        all_boxes = np.concatenate([s.boxes for s in occ])
        assert np.unique(all_boxes).size == all_boxes.size


def test_build_absent_cases():
    w = LatticeWindow(2, 10, 5)
    assert build_separating_component(sample(w, 0.0, 1, 0)) is None   # diameter 0
    assert build_separating_component(sample(w, 1.0, 1, 0)) is None   # rim-touching


def test_enumerate_empty_at_p1():
    w = LatticeWindow(2, 10, 5)
    assert enumerate_occurring(sample(w, 1.0, 1, 0)) == []


def test_occurs_false_with_good_boxes():
    # a component built from a moat does not occur in the fully open
    # configuration: condition (i) fails since every box is good there
    w = LatticeWindow(2, 10, 7)
    cfg = moated(w, [1])
    S = build_separating_component(cfg)
    open_cfg = sample(w, 1.0, 0, 0)
    assert not occurs(S, open_cfg)


def test_extract_cut_requires_occurrence():
    w = LatticeWindow(2, 10, 7)
    cfg = moated(w, [1])
    S = build_separating_component(cfg)
    with pytest.raises(ValueError):
        extract_cut(S, sample(w, 1.0, 0, 0))


def test_margin_violation_near_rim():
    # moat shell adjacent to the outermost interior layer: undecidable extent
    w = LatticeWindow(2, 10, 5)
    cfg = moated(w, [3])
    with pytest.raises(MarginViolation):
        build_separating_component(cfg)


def test_open_extension_keeps_region_bits():
    from percolab.separating import open_extension

    w = LatticeWindow(2, 10, 7)
    cfg = moated(w, [1])
    S = build_separating_component(cfg)
    ext, edge_mask = open_extension(S, cfg)
    assert np.array_equal(ext.open_[edge_mask], cfg.open_[edge_mask])
    assert ext.open_[~edge_mask].all()


def test_tail_experiment_validation():
    w = LatticeWindow(2, 5, 3)
    with pytest.raises(ValueError):
        tail_experiment(0.6, 5, w, 500, 0, "touching")
    with pytest.raises(ValueError):
        tail_experiments(0.6, 5, w, 10_000, 0, statistics=("bogus",))


def test_tail_experiment_degenerate_p1():
    w = LatticeWindow(2, 5, 3)
    with pytest.raises(InsufficientData):
        tail_experiment(1.0, 5, w, 10_000, 3, "touching")


def test_exponential_tail_fit_recovers_rate():
    rng = np.random.Generator(np.random.Philox(key=np.array([7, 0], dtype=np.uint64)))
    values = rng.geometric(0.25, size=20_000)  # survival ratio 0.75 per step
    fit = exponential_tail_fit(values, min_count=20)
    assert abs(fit.t_hat - (-np.log(0.75))) < 0.02
    assert fit.r2 > 0.99


def test_exponential_tail_fit_insufficient():
    with pytest.raises(InsufficientData):
        exponential_tail_fit(np.array([1, 1, 2]), min_count=20)
