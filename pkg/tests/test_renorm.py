import numpy as np
import pytest

from percolab.errors import MarginViolation
from percolab.lattice import LatticeWindow, l1_diameter
from percolab.percolation import clusters, sample
from percolab.renorm import (
    BoxClassifier,
    boundary_diagonally_connected,
    check_star,
    classification_table,
    good_probability,
    is_good,
    is_substantial,
    substantial_set,
)
from percolab.verify import close_region_surface


@pytest.fixture(scope="module")
def w():
    return LatticeWindow(2, 8, 3)


def open_config(w):
    return sample(w, 1.0, 1, 0)


def closed_config(w):
    return sample(w, 0.0, 1, 0)


def test_is_good_extremes(w):
    assert is_good((0, 0), open_config(w))
    assert not is_good((0, 0), closed_config(w))


def test_is_good_split_plane(w):
    # all open except every edge crossing the hyperplane between -1 and 0
    bits = open_config(w).open_.copy()
    lows = w.vertex_coords(w.edge_lower)
    cut = (w.edge_axis == 0) & (lows[:, 0] == -1)
    bits[cut] = False
    assert not is_good((0, 0), open_config(w).replace_bits(bits))


def test_is_good_robust_to_one_deep_closed_edge(w):
    bits = open_config(w).open_.copy()
    bits[w.encode_edge((1, 1), 0)] = False
    assert is_good((0, 0), open_config(w).replace_bits(bits))


def test_is_good_requires_interior_box(w):
    with pytest.raises(MarginViolation):
        is_good((3, 0), open_config(w))


def test_is_substantial_extremes(w):
    cfg1 = open_config(w)
    lab1 = clusters(cfg1)
    root = int(lab1.root[lab1.origin_label])
    assert is_substantial((0, 0), root, cfg1, lab1)
    cfg0 = closed_config(w)
    lab0 = clusters(cfg0)
    assert not is_substantial((0, 0), int(lab0.root[lab0.origin_label]), cfg0, lab0)


def test_is_substantial_straight_path(w):
    # a single open straight path of ceil(N/5) = 2 edges inside the box
    bits = np.zeros(w.n_edges, dtype=bool)
    bits[w.encode_edge((0, 0), 0)] = True
    bits[w.encode_edge((1, 0), 0)] = True
    cfg = closed_config(w).replace_bits(bits)
    lab = clusters(cfg)
    root = int(lab.root[lab.origin_label])
    assert lab.diameter(lab.origin_label) == 2
    assert is_substantial((0, 0), root, cfg, lab)


def test_substantial_set_extremes(w):
    cfg1 = open_config(w)
    lab1 = clusters(cfg1)
    root = int(lab1.root[lab1.origin_label])
    ss = substantial_set(root, cfg1, lab1, enforce_margin=False)
    assert ss.boxes.size == w.n_boxes
    assert ss.boundary.size == 0
    with pytest.raises(MarginViolation):
        substantial_set(root, cfg1, lab1)
    cfg0 = closed_config(w)
    lab0 = clusters(cfg0)
    ss0 = substantial_set(int(lab0.root[lab0.origin_label]), cfg0, lab0)
    assert ss0.boxes.size == 0 and ss0.boundary.size == 0


def test_substantial_set_cube_cluster_oracle():
    # hand-built open cube of side 2N at the origin inside a closed window;
    # per-box oracle recomputes substantiality from scratch
    w = LatticeWindow(2, 10, 5)
    cfg0 = sample(w, 0.0, 1, 0)
    bits = cfg0.open_.copy()
    lows = w.vertex_coords(w.edge_lower)
    ups = lows.copy()
    ups[np.arange(w.n_edges), w.edge_axis] += 1
    inside = (np.abs(lows).max(axis=1) <= w.N) & (np.abs(ups).max(axis=1) <= w.N)
    bits[inside] = True
    cfg = cfg0.replace_bits(bits)
    lab = clusters(cfg)
    root = int(lab.root[lab.origin_label])
    ss = substantial_set(root, cfg, lab)
    member = set(int(b) for b in ss.boxes)
    cluster_ids = set(lab.vertices_of(lab.origin_label).tolist())
    for flat in range(w.n_boxes):
        coords = w.box_coords(flat)[0]
        box_ids = w.box_vertex_ids(coords)
        cells = [v for v in box_ids.tolist() if v in cluster_ids]
        # oracle: components of the open subgraph induced on cluster & box
        best = 0
        remaining = set(cells)
        cell_set = set(cells)
        while remaining:
            start = remaining.pop()
            comp = [start]
            stack = [start]
            seen = {start}
            while stack:
                v = stack.pop()
                for a in range(w.d):
                    e_up = w.edge_index[v, a]
                    if e_up >= 0 and cfg.open_[e_up]:
                        u = v + int(w.strides[a])
                        if u in cell_set and u not in seen:
                            seen.add(u); comp.append(u); stack.append(u)
                    u = v - int(w.strides[a])
                    if u in cell_set and u not in seen:
                        e_dn = w.edge_index[u, a]
                        if e_dn >= 0 and cfg.open_[e_dn]:
                            seen.add(u); comp.append(u); stack.append(u)
            remaining -= seen
            if len(comp) > 1:
                best = max(best, l1_diameter(w.vertex_coords(np.array(comp))))
        assert (5 * best >= w.N) == (flat in member)


def test_boundary_never_good_and_diagonally_connected():
    w = LatticeWindow(2, 10, 5)
    cfg = sample(w, 1.0, 1, 0)
    region = [np.array(b) for b in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1), (1, -1), (1, 0), (1, 1)]]
    moated = close_region_surface(cfg, region)
    lab = clusters(moated)
    root = int(lab.root[lab.origin_label])
    cl = BoxClassifier(moated, lab)
    ss = substantial_set(root, moated, lab, cl)
    assert ss.boundary.size > 0
    for b in ss.boundary:
        assert not cl.is_good(int(b))
    assert boundary_diagonally_connected(root, moated, lab, cl)


def test_boundary_connectivity_simulation_sweep():
    # the diagonal connectivity of the substantial boundary is a fact about
    # every finite cluster, whatever the parameter; near-critical sampling
    # produces many applicable spread-out finite clusters
    w = LatticeWindow(2, 10, 5)
    checked = 0
    for i in range(300):
        cfg = sample(w, 0.52, 91, i)
        lab = clusters(cfg)
        o = lab.origin_label
        if lab.touches[o] or 5 * lab.diameter(o) < w.N:
            continue
        try:
            assert boundary_diagonally_connected(int(lab.root[o]), cfg, lab)
        except MarginViolation:
            continue
        checked += 1
    assert checked >= 30


def test_check_star_all_open(w):
    cfg = open_config(w)
    lab = clusters(cfg)
    cl = BoxClassifier(cfg, lab)
    comp = [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert check_star(comp, cfg, lab, cl)
    assert check_star([(0, 0)], cfg, lab, cl)


def test_check_star_rejects_bad_box(w):
    cfg = closed_config(w)
    lab = clusters(cfg)
    with pytest.raises(ValueError):
        check_star([(0, 0)], cfg, lab)


def test_good_probability_extremes():
    w = LatticeWindow(2, 5, 3)
    assert good_probability(1.0, 5, w, 40, seed=1).estimate == 1.0
    assert good_probability(0.0, 5, w, 40, seed=1).estimate == 0.0
    est = good_probability(0.8, 5, w, 40, seed=1)
    assert est.ci_low <= est.estimate <= est.ci_high
    assert est.exact_feasible is False
    with pytest.raises(ValueError):
        good_probability(0.5, 7, w, 10)


def test_classification_table(w):
    rows = classification_table(open_config(w))
    assert len(rows) == (2 * (w.R - 1) + 1) ** 2
    assert all(r[2] == "good" and r[3] == "ok" for r in rows)
