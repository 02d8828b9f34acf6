"""The pruned multi-level packing graph traversed by the tournament estimator.

Level 1 is the root. Level 2 is a maximal ``d/c``-packing of ``B(root, d) & K``.
For ``k >= 3`` every node ``u`` of level ``k-1`` receives a maximal
``d/(2^{k-1} c)``-packing of ``B(u, d/2^{k-2}) & K`` as offspring; the union is
then pruned in lexicographic order, and each pruned node hands its parents to
the surviving node that removed it. A node can therefore have several parents,
so the structure is a DAG with deduplicated edges.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from ._kernels import covered_within, offspring_checks, packed_offspring
from .entropy import greedy_packing
from .geometry import StarSet, _in_ball, as_point, lattice_index, lex_order

DEFAULT_MAX_DEPTH = 12


@dataclass
class TreeNode:
    id: int
    point: np.ndarray
    level: int
    parents: list[int]
    offspring: list[int]


@dataclass
class PackingTree:
    """Levels stored as point arrays plus parent/child edge lists between them.

    ``levels[j]`` holds the points of level ``j + 1``. ``edges[j]`` (for
    ``j >= 1``) is an ``(E, 2)`` array of ``(parent_index, child_index)`` pairs
    linking level ``j`` to level ``j + 1``, with indices local to each level.
    Global node ids number the levels consecutively from the root (id 0).
    """

    levels: list[np.ndarray]
    edges: list[np.ndarray]
    d: float
    c: float
    pitch: float
    root: np.ndarray
    localized: bool = False
    K: StarSet | None = None
    meta: dict = field(default_factory=dict)
    _csr: dict = field(default_factory=dict, repr=False)

    @property
    def depth(self) -> int:
        return len(self.levels)

    def level_sizes(self) -> list[int]:
        return [int(p.shape[0]) for p in self.levels]

    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.level_sizes())]).astype(np.int64)

    def global_id(self, level: int, index: int) -> int:
        return int(self.offsets()[level - 1] + index)

    def locate(self, node_id: int) -> tuple[int, int]:
        off = self.offsets()
        lvl = int(np.searchsorted(off, node_id, side="right"))
        if lvl < 1 or lvl > self.depth:
            raise KeyError(node_id)
        return lvl, int(node_id - off[lvl - 1])

    def separation(self, level: int) -> float:
        """Packing radius ``d/(2^{J-1} c)`` of level ``J >= 2``."""
        return self.d / (2 ** (level - 1) * self.c)

    def offspring_radius(self, level: int) -> float:
        """Ball radius ``d/2^{J-2}`` whose packing gives the level-``J`` offspring."""
        return self.d / 2 ** (level - 2)

    def _children_csr(self, level: int) -> sp.csr_matrix:
        """Sparse incidence from level ``level`` nodes to their offspring."""
        if level not in self._csr:
            e = self.edges[level]
            shape = (self.levels[level - 1].shape[0], self.levels[level].shape[0])
            self._csr[level] = sp.csr_matrix((np.ones(e.shape[0], np.int8), (e[:, 0], e[:, 1])), shape=shape)
        return self._csr[level]

    def offspring_indices(self, level: int, index: int) -> np.ndarray:
        """Local indices (at ``level + 1``) of the offspring of a level-``level`` node."""
        if level >= self.depth:
            return np.zeros(0, np.int64)
        m = self._children_csr(level)
        return np.sort(m.indices[m.indptr[index]:m.indptr[index + 1]]).astype(np.int64)

    def parent_indices(self, level: int, index: int) -> np.ndarray:
        if level <= 1:
            return np.zeros(0, np.int64)
        e = self.edges[level - 1]
        return np.sort(e[e[:, 1] == index, 0]).astype(np.int64)

    def node(self, node_id: int) -> TreeNode:
        lvl, idx = self.locate(node_id)
        off = self.offsets()
        parents = [int(off[lvl - 2] + p) for p in self.parent_indices(lvl, idx)] if lvl > 1 else []
        kids = [int(off[lvl] + k) for k in self.offspring_indices(lvl, idx)] if lvl < self.depth else []
        return TreeNode(int(node_id), self.levels[lvl - 1][idx].copy(), lvl, parents, kids)

    def to_json(self) -> str:
        """Nodes and edges as JSON, for inspection."""
        off = self.offsets()
        nodes = []
        for lvl, pts in enumerate(self.levels, start=1):
            for i, p in enumerate(pts):
                nodes.append({"id": int(off[lvl - 1] + i), "level": lvl, "point": p.tolist()})
        edges = []
        for lvl in range(1, self.depth):
            for a, b in self.edges[lvl]:
                edges.append([int(off[lvl - 1] + a), int(off[lvl] + b)])
        return json.dumps(
            {"d": self.d, "c": self.c, "pitch": self.pitch, "root": self.root.tolist(),
             "level_sizes": self.level_sizes(), "nodes": nodes, "edges": edges}
        )


def prune_level(points: np.ndarray, owners: np.ndarray, sep: float) -> tuple[np.ndarray, np.ndarray]:
    """Lexicographic pruning with edge re-wiring.

    ``points[i]`` is a candidate offspring of parent ``owners[i]``. Repeatedly
    the first remaining point keeps itself and removes every remaining point
    within ``sep``, inheriting their parents. Returns the surviving points (in
    lex order) and the deduplicated ``(parent, child)`` edge array.
    """
    order = lex_order(points)
    pts = points[order]
    own = owners[order]
    keep, rep = greedy_packing(pts, sep)
    new_index = np.full(pts.shape[0], -1, np.int64)
    new_index[keep] = np.arange(keep.shape[0])
    child = new_index[rep]
    width = np.int64(max(keep.shape[0], 1))
    code = np.unique(own.astype(np.int64) * width + child)
    edges = np.stack([code // width, code % width], axis=1)
    return pts[keep], edges


def prune_indexed(points: np.ndarray, child: np.ndarray, owners: np.ndarray, sep: float) -> tuple[np.ndarray, np.ndarray]:
    """:func:`prune_level` for candidates given as rows of a lex-sorted point array.

    Duplicated rows collapse before the greedy pass, which matches the
    general routine because a duplicate always falls to its first copy.
    """
    uniq, inverse = np.unique(child, return_inverse=True)
    keep, rep = greedy_packing(points[uniq], sep)
    new_index = np.full(uniq.shape[0], -1, np.int64)
    new_index[keep] = np.arange(keep.shape[0])
    child_new = new_index[rep][inverse]
    width = np.int64(max(keep.shape[0], 1))
    code = np.unique(owners.astype(np.int64) * width + child_new)
    return points[uniq[keep]], np.stack([code // width, code % width], axis=1)


def build_tree(
    K: StarSet,
    root,
    depth: int,
    c: float,
    pitch: float,
    d_override: float | None = None,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> PackingTree:
    """Materialize levels ``1..depth`` of the pruned packing graph.

    With ``d_override`` (the unbounded variant) every packing is additionally
    intersected with ``B(root, d_override)``.
    """
    if not c > 6:
        raise ValueError("the tree needs c > 6 so that C = c/2 - 1 > 2")
    if depth < 2:
        raise ValueError("depth must be at least 2")
    if depth > max_depth:
        raise ValueError(f"depth {depth} exceeds the configured cap {max_depth}")
    root = as_point(root, K.dimension)
    if not K.contains(root):
        raise ValueError("root must belong to the set")
    localized = d_override is not None
    if localized:
        d = float(d_override)
    elif K.bounded:
        d = float(K.diameter)
    else:
        raise ValueError("unbounded sets need d_override")
    levels = [root[None, :].copy()]
    edges: list[np.ndarray] = [np.zeros((0, 2), np.int64)]
    if d == 0:
        for _ in range(1, depth):
            levels.append(root[None, :].copy())
            edges.append(np.zeros((1, 2), np.int64))
        return PackingTree(levels, edges, d, float(c), float(pitch), root, localized, K)
    finest = d / (2 ** (depth - 1) * c)
    if not finest > 2 * pitch:
        raise ValueError(f"pitch {pitch} too coarse for depth {depth}: need pitch < {finest / 2}")
    within = (root, d) if localized else None
    index = lattice_index(K, root, d, pitch)

    def offspring(u: np.ndarray, radius: float, sep: float) -> np.ndarray:
        cand = K.candidates(u, radius, pitch)
        if within is not None and cand.shape[0]:
            cand = cand[_in_ball(cand, root, d)]
        if cand.shape[0] == 0:
            cand = u[None, :]
        keep, _ = greedy_packing(cand, sep)
        return cand[keep]

    def next_level(parents: np.ndarray, radius: float, sep: float) -> tuple[np.ndarray, np.ndarray] | None:
        """Indexed fast path: per-parent packings as global member indices."""
        if index is None:
            return None
        child, owner = packed_offspring(
            index.grid, index.dims, index.kbase, index.anchor, index.spacing,
            index.points, np.ascontiguousarray(parents), float(radius), float(sep))
        if np.any(child < 0):
            return None
        return child.astype(np.int64), owner.astype(np.int64)

    def slow_level(parents: np.ndarray, radius: float, sep: float) -> tuple[np.ndarray, np.ndarray]:
        chunks, owners = [], []
        for j, u in enumerate(parents):
            kids = offspring(u, radius, sep)
            chunks.append(kids)
            owners.append(np.full(kids.shape[0], j, np.int64))
        return np.concatenate(chunks), np.concatenate(owners)

    fast = next_level(root[None, :], d, d / c)
    level2 = index.points[fast[0]] if fast is not None else slow_level(root[None, :], d, d / c)[0]
    levels.append(level2)
    edges.append(np.stack([np.zeros(level2.shape[0], np.int64), np.arange(level2.shape[0])], axis=1))
    for k in range(3, depth + 1):
        radius = d / 2 ** (k - 2)
        sep = d / (2 ** (k - 1) * c)
        fast = next_level(levels[-1], radius, sep)
        if fast is not None:
            pts, e = prune_indexed(index.points, fast[0], fast[1], sep)
        else:
            pts, e = prune_level(*slow_level(levels[-1], radius, sep), sep)
        levels.append(pts)
        edges.append(e)
    return PackingTree(levels, edges, d, float(c), float(pitch), root, localized, K)


_TREE_CACHE: dict[tuple, PackingTree] = {}
_TREE_CACHE_LIMIT = 16


def cached_tree(
    K: StarSet,
    root,
    depth: int,
    c: float,
    pitch: float,
    d_override: float | None = None,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> PackingTree:
    """:func:`build_tree` memoized on its arguments (trees are immutable once built)."""
    root = as_point(root, K.dimension)
    key = (K.key(), tuple(root.tolist()), int(depth), float(c), float(pitch),
           None if d_override is None else float(d_override))
    tree = _TREE_CACHE.get(key)
    if tree is None:
        tree = build_tree(K, root, depth, c, pitch, d_override, max_depth)
        if len(_TREE_CACHE) >= _TREE_CACHE_LIMIT:
            _TREE_CACHE.pop(next(iter(_TREE_CACHE)))
        _TREE_CACHE[key] = tree
    return tree


@dataclass
class Violation:
    check: str
    level: int
    node_ids: list[int]
    value: float
    bound: float


@dataclass
class VerificationReport:
    violations: list[Violation]
    checked: dict[str, int]

    @property
    def ok(self) -> bool:
        return not self.violations

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for v in self.violations:
            out[v.check] = out.get(v.check, 0) + 1
        return out

    def summary(self) -> dict:
        return {"ok": self.ok, "violations": self.counts(), "checked": self.checked,
                "examples": [v.__dict__ for v in self.violations[:20]]}


def _pairs_within(points: np.ndarray, sep: float) -> np.ndarray:
    """Pairs at distance <= sep, using the same squared-distance arithmetic as packing."""
    if points.shape[0] < 2:
        return np.zeros((0, 2), np.int64)
    pairs = cKDTree(points).query_pairs(sep * (1 + 1e-9) + 1e-15, output_type="ndarray")
    if pairs.shape[0] == 0:
        return pairs
    d2 = ((points[pairs[:, 0]] - points[pairs[:, 1]]) ** 2).sum(axis=1)
    return pairs[d2 <= sep * sep]


def verify_tree(tree: PackingTree, K: StarSet | None = None, max_reported: int = 1000) -> VerificationReport:
    """Check the packing, covering, cardinality and path-length invariants.

    For every level ``J >= 2``: pairwise separation above ``d/(2^{J-1} c)``;
    every lattice member of the set within ``d/(2^{J-2} c) + pitch`` of the
    level; for ``J >= 3``, each parent's offspring cover ``B(parent, d/2^{J-2}) & K``
    at that radius and number no more than the greedy packing count at the
    parent; and every path obeys ``|Y_J - Y_J'| <= d(2 + 4c)/(c 2^{J'})`` for
    ``J > J'`` together with the one-step increment bound.
    """
    K = K if K is not None else tree.K
    if K is None:
        raise ValueError("verify_tree needs the set")
    d, c, pitch = tree.d, tree.c, tree.pitch
    off = tree.offsets()
    violations: list[Violation] = []
    checked = {"packing": 0, "covering": 0, "offspring_cover": 0, "cardinality": 0, "increment": 0, "path": 0}

    def add(v: Violation) -> None:
        if len(violations) < max_reported:
            violations.append(v)

    if d == 0:
        for lvl, pts in enumerate(tree.levels, start=1):
            if pts.shape[0] != 1 or np.any(np.abs(pts[0] - tree.root) > 0):
                add(Violation("singleton", lvl, [int(off[lvl - 1])], float(pts.shape[0]), 1.0))
        return VerificationReport(violations, checked)

    within = (tree.root, d) if tree.localized else None

    def members(center, radius):
        pts = K.candidates(center, radius, pitch)
        if within is not None and pts.shape[0]:
            pts = pts[_in_ball(pts, within[0], within[1])]
        return pts

    index = lattice_index(K, tree.root, d, pitch)
    all_members = index.points if index is not None else members(tree.root, d)
    for J in range(2, tree.depth + 1):
        pts = tree.levels[J - 1]
        sep = tree.separation(J)
        checked["packing"] += 1
        for a, b in _pairs_within(pts, sep):
            dist = float(np.linalg.norm(pts[a] - pts[b]))
            add(Violation("packing", J, [int(off[J - 1] + a), int(off[J - 1] + b)], dist, sep))
        cover = d / (2 ** (J - 2) * c)
        checked["covering"] += 1
        dist, idx = cKDTree(pts).query(all_members)
        for i in np.flatnonzero(dist > cover + pitch):
            add(Violation("covering", J, [int(off[J - 1] + idx[i])], float(dist[i]), cover + pitch))
        if J >= 3:
            radius = tree.offspring_radius(J)
            parents = tree.levels[J - 2]
            csr = tree._children_csr(J - 1)
            kid_ptr = csr.indptr.astype(np.int64)
            kid_pts = np.ascontiguousarray(pts[csr.indices])
            checked["offspring_cover"] += parents.shape[0]
            checked["cardinality"] += parents.shape[0]
            if index is not None:
                bound, worst = offspring_checks(
                    index.grid, index.dims, index.kbase, index.anchor, index.spacing, index.points,
                    np.ascontiguousarray(parents), float(radius), float(sep), kid_ptr, kid_pts, float(cover + pitch))
            else:
                bound = np.ones(parents.shape[0], np.int64)
                worst = np.zeros(parents.shape[0])
                for p_idx, u in enumerate(parents):
                    kids = kid_pts[kid_ptr[p_idx]:kid_ptr[p_idx + 1]]
                    ball = members(u, radius)
                    if kids.shape[0] == 0:
                        worst[p_idx] = np.inf
                    elif ball.shape[0]:
                        near = covered_within(ball, kids, cover + pitch)
                        if np.isinf(near).any():
                            worst[p_idx] = float(cKDTree(kids).query(ball)[0].max())
                    if ball.shape[0]:
                        bound[p_idx] = max(int(greedy_packing(ball, sep)[0].shape[0]), 1)
            nkids = np.diff(kid_ptr)
            for p_idx in np.flatnonzero(worst > 0):
                add(Violation("offspring_cover", J, [int(off[J - 2] + p_idx)], float(worst[p_idx]), cover + pitch))
            for p_idx in np.flatnonzero(nkids > bound):
                add(Violation("cardinality", J, [int(off[J - 2] + p_idx)], float(nkids[p_idx]), float(bound[p_idx])))
        # Increment bound on every edge.
        e = tree.edges[J - 1]
        step = np.linalg.norm(tree.levels[J - 1][e[:, 1]] - tree.levels[J - 2][e[:, 0]], axis=1)
        inc_bound = d / (2 ** (J - 1) * c) + d / 2 ** (J - 2)
        checked["increment"] += int(e.shape[0])
        for i in np.flatnonzero(step > inc_bound * (1 + 1e-12)):
            add(Violation("increment", J, [int(off[J - 2] + e[i, 0]), int(off[J - 1] + e[i, 1])], float(step[i]), inc_bound))
    # Path bound: compose incidences to get every ancestor at every coarser level.
    for J in range(2, tree.depth + 1):
        anc = sp.identity(tree.levels[J - 1].shape[0], dtype=np.int8, format="csr")
        for Jp in range(J - 1, 0, -1):
            anc = (anc @ tree._children_csr(Jp).T).tocsr()
            anc.data[:] = 1
            rows, cols = anc.nonzero()
            gap = np.linalg.norm(tree.levels[J - 1][rows] - tree.levels[Jp - 1][cols], axis=1)
            bound = d * (2 + 4 * c) / (c * 2 ** Jp)
            checked["path"] += int(rows.shape[0])
            for i in np.flatnonzero(gap > bound * (1 + 1e-12)):
                add(Violation("path", J, [int(off[J - 1] + rows[i]), int(off[Jp - 1] + cols[i])], float(gap[i]), bound))
    return VerificationReport(violations, checked)
