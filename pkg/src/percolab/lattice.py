"""Geometry of a finite hypercubic-lattice window and its renormalized boxes.

The window covers the vertex cube [-m, m]^d with m = N*R + floor(3N/4), which
is exactly large enough to contain every box B(x) = {y : |y - N*x|_inf <=
floor(3N/4)} for box coordinates x in [-R, R]^d.  Canonical vertex order is
lexicographic over coordinates; canonical edge order is (lower endpoint, axis
index).  All geometry is immutable after construction, so a window can be
shared freely across threads.
"""

from __future__ import annotations

import itertools
from functools import cached_property

import numpy as np

AXIS = "axis"
DIAGONAL = "diagonal"

_MODES = (AXIS, DIAGONAL)


def _as_coords(vertices):
    a = np.asarray(vertices, dtype=np.int64)
    if a.ndim == 1:
        a = a[None, :]
    return a


class LatticeWindow:
    """Finite d-dimensional window carrying vertex, edge and box indexing.

    Parameters: dimension d >= 2 (2 and 3 supported), box scale N >= 5, box
    radius R >= 3.  Boxes are indexed by integer vectors in [-R, R]^d.
    """

    def __init__(self, d: int, N: int, R: int):
        if d not in (2, 3):
            raise ValueError(f"dimension d={d} unsupported (need 2 or 3)")
        if N < 5:
            raise ValueError(f"box scale N={N} too small (need N >= 5)")
        if R < 3:
            raise ValueError(f"box radius R={R} too small (need R >= 3)")
        self.d = int(d)
        self.N = int(N)
        self.R = int(R)
        self.half_width = (3 * self.N) // 4          # box half-width
        self.margin = self.N * self.R + self.half_width
        self.side = 2 * self.margin + 1
        self.n_vertices = self.side ** self.d
        # C-order strides: advancing coordinate a by +1 moves by side^(d-1-a)
        self.strides = np.array(
            [self.side ** (self.d - 1 - a) for a in range(self.d)], dtype=np.int64
        )
        self._build_edges()
        self._build_boxes()

    # ------------------------------------------------------------------ #
    # vertices

    def vertex_index(self, vertices) -> np.ndarray:
        """Flat canonical index of vertices given as (k, d) coordinate rows."""
        c = _as_coords(vertices)
        if np.any(np.abs(c) > self.margin):
            raise ValueError("vertex outside window")
        return (c + self.margin) @ self.strides

    def vertex_coords(self, index) -> np.ndarray:
        """Inverse of vertex_index; returns (k, d) coordinates."""
        idx = np.atleast_1d(np.asarray(index, dtype=np.int64))
        out = np.empty((idx.size, self.d), dtype=np.int64)
        rem = idx.copy()
        for a in range(self.d):
            out[:, a], rem = np.divmod(rem, self.strides[a])
        return out - self.margin

    @cached_property
    def origin_index(self) -> int:
        return int(self.vertex_index(np.zeros(self.d, dtype=np.int64))[0])

    @cached_property
    def rim_mask(self) -> np.ndarray:
        """Boolean mask of the outermost vertex layer (the 'infinity' surrogate)."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        ar = np.arange(self.n_vertices, dtype=np.int64)
        for a in range(self.d):
            coord = (ar // self.strides[a]) % self.side
            mask |= (coord == 0) | (coord == self.side - 1)
        return mask

    @cached_property
    def rim_indices(self) -> np.ndarray:
        return np.flatnonzero(self.rim_mask)

    @cached_property
    def l1_functionals(self) -> np.ndarray:
        """Sign patterns eps in {+-1}^d with eps[0] = +1, shape (2^(d-1), d).

        max_{x,y in S} |x-y|_1 = max over patterns of (max - min of eps.x).
        """
        pats = []
        for rest in itertools.product((1, -1), repeat=self.d - 1):
            pats.append((1,) + rest)
        return np.array(pats, dtype=np.int64)

    @cached_property
    def all_coords(self) -> np.ndarray:
        """Coordinates of every vertex in canonical order, shape (n_vertices, d)."""
        ar = np.arange(self.n_vertices, dtype=np.int64)
        coords = np.empty((self.n_vertices, self.d), dtype=np.int64)
        rem = ar
        for a in range(self.d):
            coords[:, a], rem = np.divmod(rem, self.strides[a])
        coords -= self.margin
        return coords.astype(np.int32)

    @cached_property
    def functional_values(self) -> np.ndarray:
        """Per-vertex values of the L1 diameter functionals, shape (n_vertices, 2^(d-1))."""
        return (self.all_coords.astype(np.int64) @ self.l1_functionals.T).astype(np.int32)

    # ------------------------------------------------------------------ #
    # edges

    def _build_edges(self):
        ar = np.arange(self.n_vertices, dtype=np.int64)
        valid = np.empty((self.n_vertices, self.d), dtype=bool)
        for a in range(self.d):
            coord = (ar // self.strides[a]) % self.side
            valid[:, a] = coord < self.side - 1
        flat_valid = valid.ravel()
        ids = np.cumsum(flat_valid, dtype=np.int64) - 1
        edge_index = np.where(flat_valid, ids, -1).reshape(self.n_vertices, self.d)
        self.edge_index = edge_index.astype(np.int64)
        self.n_edges = int(flat_valid.sum())
        pos = np.flatnonzero(flat_valid)
        self.edge_lower = (pos // self.d).astype(np.int64)
        self.edge_axis = (pos % self.d).astype(np.int8)
        self.edge_upper = self.edge_lower + self.strides[self.edge_axis]

    def encode_edge(self, lower, axis: int) -> int:
        """Canonical edge id of (lower endpoint coords, axis index)."""
        v = int(self.vertex_index(lower)[0])
        eid = int(self.edge_index[v, axis])
        if eid < 0:
            raise ValueError("edge leaves the window")
        return eid

    def decode_edge(self, edge_id: int):
        """Inverse of encode_edge: (lower endpoint coords, axis index)."""
        if not 0 <= edge_id < self.n_edges:
            raise ValueError("edge id out of range")
        lower = self.vertex_coords(self.edge_lower[edge_id])[0]
        return lower, int(self.edge_axis[edge_id])

    # ------------------------------------------------------------------ #
    # boxes

    def _build_boxes(self):
        d, R = self.d, self.R
        self.box_side = 2 * self.half_width + 1
        self.boxes_per_axis = 2 * R + 1
        self.n_boxes = self.boxes_per_axis ** d
        self.box_strides = np.array(
            [self.boxes_per_axis ** (d - 1 - a) for a in range(d)], dtype=np.int64
        )
        s = self.box_side
        # local vertex offsets of one box, C-order over the s^d cube
        local = np.arange(s ** d, dtype=np.int64)
        offs = np.empty((s ** d, d), dtype=np.int64)
        rem = local
        box_strides_local = [s ** (d - 1 - a) for a in range(d)]
        for a in range(d):
            offs[:, a], rem = np.divmod(rem, box_strides_local[a])
        self._box_local_coords = offs
        self._box_vertex_template = offs @ self.strides
        # internal edges of a box: lower offset with local coord < s-1 on the axis
        lows, axes = [], []
        for a in range(d):
            keep = offs[:, a] < s - 1
            lows.append(np.flatnonzero(keep))
            axes.append(np.full(keep.sum(), a, dtype=np.int8))
        self._box_edge_local_lower = np.concatenate(lows)
        self._box_edge_axis = np.concatenate(axes)
        self.edges_per_box = int(self._box_edge_local_lower.size)
        # (local vertex, axis) -> position in the box edge template
        tmpl_idx = np.full((s ** d, d), -1, dtype=np.int64)
        tmpl_idx[self._box_edge_local_lower, self._box_edge_axis] = np.arange(self.edges_per_box)
        self._box_edge_template_idx = tmpl_idx
        self._box_local_strides = np.array(box_strides_local, dtype=np.int64)
        # 2d faces: for each axis, the two extreme layers (local vertex ids)
        self._box_face_local = []
        for a in range(d):
            self._box_face_local.append(np.flatnonzero(offs[:, a] == 0))
            self._box_face_local.append(np.flatnonzero(offs[:, a] == s - 1))
        self._build_overlap_templates()

    def _build_overlap_templates(self):
        """Per diagonal direction: local geometry of B(0) ∩ B(dir) inside B(0)."""
        d, s, N = self.d, self.box_side, self.N
        offs = self._box_local_coords
        self.box_directions = [
            np.array(v, dtype=np.int64)
            for v in itertools.product((-1, 0, 1), repeat=d)
            if any(v)
        ]
        self._overlaps = []
        for dir_vec in self.box_directions:
            lo = np.where(dir_vec > 0, N, 0)
            hi = np.where(dir_vec < 0, s - 1 - N, s - 1)
            inside = np.all((offs >= lo) & (offs <= hi), axis=1)
            vids = np.flatnonzero(inside)
            pos_of = np.full(s ** d, -1, dtype=np.int64)
            pos_of[vids] = np.arange(vids.size)
            lows, axes = [], []
            for a in range(d):
                keep = np.zeros(s ** d, dtype=bool)
                keep[vids] = offs[vids, a] < hi[a]
                lows.append(np.flatnonzero(keep))
                axes.append(np.full(int(keep.sum()), a, dtype=np.int8))
            e_low = np.concatenate(lows)
            e_axis = np.concatenate(axes)
            e_up = e_low + self._box_local_strides[e_axis]
            faces = []
            for a in range(d):
                faces.append(pos_of[vids[offs[vids, a] == lo[a]]])
                faces.append(pos_of[vids[offs[vids, a] == hi[a]]])
            self._overlaps.append(
                {
                    "dir": dir_vec,
                    "local_vertices": vids,          # box-local vertex ids
                    "faces": faces,                  # overlap positions per face
                    # edges inside the overlap, as positions into the box edge
                    # template and overlap positions of their endpoints
                    "edge_template_idx": self._box_edge_template_idx[e_low, e_axis],
                    "e_low_pos": pos_of[e_low],
                    "e_up_pos": pos_of[e_up],
                }
            )

    def box_in_range(self, box) -> bool:
        b = np.asarray(box, dtype=np.int64)
        return bool(np.all(np.abs(b) <= self.R))

    def box_flat(self, box) -> int:
        b = np.asarray(box, dtype=np.int64)
        if not self.box_in_range(b):
            raise ValueError(f"box {tuple(b)} outside radius {self.R}")
        return int((b + self.R) @ self.box_strides)

    def box_coords(self, flat) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(flat, dtype=np.int64))
        out = np.empty((idx.size, self.d), dtype=np.int64)
        rem = idx.copy()
        for a in range(self.d):
            out[:, a], rem = np.divmod(rem, self.box_strides[a])
        return out - self.R

    def box_base_vertex(self, box) -> int:
        """Flat id of the lexicographically-least vertex of B(box)."""
        b = np.asarray(box, dtype=np.int64)
        corner = self.N * b - self.half_width
        return int(self.vertex_index(corner)[0])

    def box_vertex_ids(self, box) -> np.ndarray:
        """Flat vertex ids of B(box) in canonical (lexicographic) order."""
        if not self.box_in_range(box):
            raise ValueError(f"box {tuple(np.asarray(box))} outside radius {self.R}")
        return self.box_base_vertex(box) + self._box_vertex_template

    def box_on_rim(self, box) -> bool:
        b = np.asarray(box, dtype=np.int64)
        return bool(np.max(np.abs(b)) == self.R)

    def box_interior(self, box) -> bool:
        """True when every diagonal neighbor of the box is still in range."""
        b = np.asarray(box, dtype=np.int64)
        return bool(np.max(np.abs(b)) <= self.R - 1)

    def spec(self) -> dict:
        return {"d": self.d, "N": self.N, "R": self.R}

    def __repr__(self):
        return f"LatticeWindow(d={self.d}, N={self.N}, R={self.R})"


# ---------------------------------------------------------------------- #
# box-level operations


def box_vertices(box, window: LatticeWindow) -> np.ndarray:
    """Coordinates of {y : |y - N*box|_inf <= floor(3N/4)}, shape (k, d)."""
    return window.vertex_coords(window.box_vertex_ids(box))


def box_overlap(x, y, window: LatticeWindow) -> np.ndarray:
    """Coordinates of B(x) ∩ B(y); empty (0, d) array when |x-y|_inf >= 2."""
    bx = np.asarray(x, dtype=np.int64)
    by = np.asarray(y, dtype=np.int64)
    if np.array_equal(bx, by):
        raise ValueError("box_overlap needs two distinct boxes")
    h, N = window.half_width, window.N
    lo = np.maximum(N * bx - h, N * by - h)
    hi = np.minimum(N * bx + h, N * by + h)
    if np.any(lo > hi):
        return np.empty((0, window.d), dtype=np.int64)
    axes = [np.arange(l, u + 1) for l, u in zip(lo, hi)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def box_neighbors(box, mode: str, window: LatticeWindow) -> list:
    """Neighbor box ids under axis (2d) or diagonal (3^d - 1) adjacency, window-clipped."""
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}")
    b = np.asarray(box, dtype=np.int64)
    if not window.box_in_range(b):
        raise ValueError(f"box {tuple(b)} outside radius {window.R}")
    out = []
    if mode == AXIS:
        deltas = []
        for a in range(window.d):
            for s in (-1, 1):
                v = np.zeros(window.d, dtype=np.int64)
                v[a] = s
                deltas.append(v)
    else:
        deltas = window.box_directions
    for v in deltas:
        nb = b + v
        if window.box_in_range(nb):
            out.append(tuple(int(c) for c in nb))
    return out


def l1_diameter(vertices) -> int:
    """Exact max pairwise L1 distance via the 2^(d-1) signed coordinate functionals."""
    c = _as_coords(vertices)
    if c.shape[0] == 0:
        raise ValueError("l1_diameter of empty vertex set")
    d = c.shape[1]
    pats = []
    for rest in itertools.product((1, -1), repeat=d - 1):
        pats.append((1,) + rest)
    funcs = c @ np.array(pats, dtype=np.int64).T
    return int(np.max(funcs.max(axis=0) - funcs.min(axis=0)))


def box_faces(vertices):
    """The 2d extreme-coordinate faces of an axis-aligned box of vertices.

    Returns (faces, degenerate_axes): faces is a list of coordinate arrays in
    order (axis0 low, axis0 high, axis1 low, ...); degenerate_axes lists axes
    whose extent is a single layer, for which both faces coincide.
    """
    c = _as_coords(vertices)
    if c.shape[0] == 0:
        raise ValueError("box_faces of empty vertex set")
    lo = c.min(axis=0)
    hi = c.max(axis=0)
    expected = int(np.prod(hi - lo + 1))
    if expected != c.shape[0] or np.unique(c, axis=0).shape[0] != c.shape[0]:
        raise ValueError("vertex set is not a full axis-aligned box")
    faces = []
    degenerate = []
    for a in range(c.shape[1]):
        faces.append(c[c[:, a] == lo[a]])
        faces.append(c[c[:, a] == hi[a]])
        if lo[a] == hi[a]:
            degenerate.append(a)
    return faces, tuple(degenerate)
