"""Coarse-graining devices and the combinatorial bounds they rest on.

Two block maps turn fine configurations into coarse percolation processes
with a declared dependence range:

* block-reach sites: coarse site (a,b) is open when some vertex of the
  s-block [sa,s(a+1)] x [sb,s(b+1)] has an open fine path to L-infinity
  distance 2s from the block.  A path first reaching that shell never left
  the closed 2s-ball (unit steps change the distance by at most 1), so the
  event depends only on edges within distance 2s of the block.
* corridor bonds: coarse edge (a,b)-(a+1,b) is open when the 6n x 2n fine
  rectangle with bottom-left corner (2an, 2bn) has a long-way crossing and
  both its 2n x 2n end squares have short-way crossings.  Open coarse paths
  then admit fine open paths through the union of their rectangles, because
  perpendicular crossings of a shared square must meet.

The module also carries the counting side: greedy well-separated subsets,
exhaustive counts of origin lattice trees against the (4e)^n envelope, and
an exact-rational evaluator for the alternating-shell cycle series whose
convergence certifies a dependence threshold.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .crossing import has_crossing
from .lattice import LatticeKind, Rect, neighbor_offsets, rect
from .sample import Configuration


# ---------------------------------------------------------------------------
# coarse configurations


@dataclass
class CoarseConfig:
    """A coarse process on Z^2 produced by a block map.

    kind 'site' carries a boolean site array over the coarse window; kind
    'bond' carries east/north coarse edge arrays in the same layout the fine
    bond grids use.  Every coarse state is a function of the fine cells
    inside defining_region(...) only, and declared_k records the dependence
    range claimed for the construction.
    """

    kind: str
    scale: int
    window: tuple  # coarse vertex bounds (a0, b0, a1, b1)
    declared_k: int
    event: str
    fine: Configuration
    site: Optional[np.ndarray] = None
    open_e: Optional[np.ndarray] = None
    open_n: Optional[np.ndarray] = None

    def site_open(self, cell) -> bool:
        a0, b0, _, _ = self.window
        return bool(self.site[cell[1] - b0, cell[0] - a0])

    def edge_open(self, d: str, a: int, b: int) -> bool:
        a0, b0, _, _ = self.window
        g = self.open_e if d == "E" else self.open_n
        return bool(g[b - b0, a - a0])

    def defining_region(self, *key) -> Rect:
        """Fine-lattice rectangle that determines one coarse state.

        site kind: key = (cell,); bond kind: key = (d, a, b).
        """
        s = self.scale
        if self.kind == "site":
            (a, b) = key[0]
            return rect(s * (a - 2), s * (b - 2), s * (a + 3), s * (b + 3))
        d, a, b = key
        if d == "E":
            return rect(2 * a * s, 2 * b * s, 2 * a * s + 6 * s, 2 * b * s + 2 * s)
        return rect(2 * a * s, 2 * b * s, 2 * a * s + 2 * s, 2 * b * s + 6 * s)


def _box4(b) -> tuple[int, int, int, int]:
    """Coarse vertex boxes may arrive as Rect or as a plain (a0, b0, a1, b1)
    tuple; the tuple form also covers degenerate single-row/column boxes."""
    if isinstance(b, Rect):
        return b.int_bounds()
    a0, b0, a1, b1 = map(int, b)
    return a0, b0, a1, b1


def _bond_components(cfg: Configuration) -> np.ndarray:
    """Connected-component labels of the open subgraph, one per window vertex."""
    oe, on = cfg.bonds.open_e, cfg.bonds.open_n
    hs, ws = oe.shape[0], on.shape[1]  # vertex grid is hs x ws
    ids = np.arange(hs * ws).reshape(hs, ws)
    r1, c1 = ids[:, :-1][oe].ravel(), ids[:, 1:][oe].ravel()
    r2, c2 = ids[:-1, :][on].ravel(), ids[1:, :][on].ravel()
    rows = np.concatenate([r1, r2])
    cols = np.concatenate([c1, c2])
    m = coo_matrix((np.ones(rows.size, bool), (rows, cols)), shape=(hs * ws, hs * ws))
    _, labels = connected_components(m, directed=False)
    return labels.reshape(hs, ws)


def renorm_B(fine: Configuration, s: int, coarse_window: Optional[Rect] = None) -> CoarseConfig:
    """Block-reach coarse site process at block side s (declared 9-dependent).

    Every coarse cell's defining region (block plus the 2s-ball around it)
    must lie inside the fine window; cells are never silently clamped.  With
    no explicit coarse_window the maximal admissible coarse rectangle is
    used.
    """
    if fine.model not in ("bond", "depbond"):
        raise ValueError("block-reach coarsening needs a bond-type fine configuration")
    if s < 1:
        raise ValueError("block side must be >= 1")
    wx0, wy0, wx1, wy1 = fine.window.int_bounds()
    a0 = math.ceil(Fraction(wx0, s)) + 2
    a1 = math.floor(Fraction(wx1, s)) - 3
    b0 = math.ceil(Fraction(wy0, s)) + 2
    b1 = math.floor(Fraction(wy1, s)) - 3
    if coarse_window is not None:
        ca0, cb0, ca1, cb1 = _box4(coarse_window)
        if not (a0 <= ca0 <= ca1 <= a1 and b0 <= cb0 <= cb1 <= b1):
            raise ValueError(
                f"fine window {fine.window} cannot support coarse cells {coarse_window} "
                f"with locality radius {2 * s}"
            )
        a0, b0, a1, b1 = ca0, cb0, ca1, cb1
    elif a0 > a1 or b0 > b1:
        raise ValueError(f"fine window {fine.window} too small for any block of side {s}")

    labels = _bond_components(fine)
    states = np.zeros((b1 - b0 + 1, a1 - a0 + 1), bool)
    for b in range(b0, b1 + 1):
        for a in range(a0, a1 + 1):
            # label sets of the block and of the shell at distance exactly 2s
            bx, by = s * a - wx0, s * b - wy0
            block = labels[by : by + s + 1, bx : bx + s + 1].ravel()
            ring = labels[by - 2 * s : by + 3 * s + 1, bx - 2 * s : bx + 3 * s + 1]
            shell = np.concatenate(
                [ring[0], ring[-1], ring[1:-1, 0], ring[1:-1, -1]]
            )
            states[b - b0, a - a0] = bool(np.isin(shell, block).any())
    return CoarseConfig(
        kind="site",
        scale=s,
        window=(a0, b0, a1, b1),
        declared_k=9,
        event="block-boundary-reach",
        fine=fine,
        site=states,
    )


def block_reach_event(fine: Configuration, s: int, cell) -> bool:
    """Single-cell evaluation of the block-reach event by BFS inside the
    closed 2s-ball around the block — an evaluator independent of renorm_B's
    component labelling, usable on perturbed copies."""
    a, b = cell
    wx0, wy0, wx1, wy1 = fine.window.int_bounds()
    lo_x, lo_y = s * a - 2 * s, s * b - 2 * s
    hi_x, hi_y = s * a + 3 * s, s * b + 3 * s
    if not (wx0 <= lo_x and hi_x <= wx1 and wy0 <= lo_y and hi_y <= wy1):
        raise ValueError(f"fine window {fine.window} too small for block {cell} at side {s}")
    oe, on = fine.bonds.open_e, fine.bonds.open_n

    def dist(x, y):
        dx = max(s * a - x, x - s * (a + 1), 0)
        dy = max(s * b - y, y - s * (b + 1), 0)
        return max(dx, dy)

    seen = set()
    q = deque()
    for x in range(s * a, s * (a + 1) + 1):
        for y in range(s * b, s * (b + 1) + 1):
            seen.add((x, y))
            q.append((x, y))
    while q:
        x, y = q.popleft()
        if dist(x, y) == 2 * s:
            return True
        for nx, ny, open_ in (
            (x + 1, y, oe[y - wy0, x - wx0]),
            (x - 1, y, oe[y - wy0, x - 1 - wx0] if x - 1 >= wx0 else False),
            (x, y + 1, on[y - wy0, x - wx0]),
            (x, y - 1, on[y - 1 - wy0, x - wx0] if y - 1 >= wy0 else False),
        ):
            if open_ and (nx, ny) not in seen and dist(nx, ny) <= 2 * s:
                seen.add((nx, ny))
                q.append((nx, ny))
    return False


def renorm_G(fine: Configuration, n: int, coarse_window: Optional[Rect] = None) -> CoarseConfig:
    """Corridor coarse bond process at scale n (declared 1-dependent).

    A horizontal coarse edge (a,b)-(a+1,b) reads the 6n x 2n fine rectangle
    with bottom-left corner (2an, 2bn): open iff the rectangle has a
    horizontal open crossing and both 2n x 2n end squares have vertical
    open crossings.  Vertical edges transposed.  Coarse vertices (a,b) range
    over the maximal box whose incident edges all fit in the fine window.
    """
    if fine.model not in ("site-sq", "site-star"):
        raise ValueError("corridor coarsening needs a site-type fine configuration")
    if n < 1:
        raise ValueError("scale must be >= 1")
    wx0, wy0, wx1, wy1 = fine.window.int_bounds()

    def fits(a0, b0, a1, b1):
        # every edge of the requested coarse vertex box needs its rectangle
        # inside the fine window; a degenerate row/column has no edges of
        # the perpendicular orientation and so no such requirement
        if a0 > a1 or b0 > b1 or (a0 == a1 and b0 == b1):
            return False
        ok = wx0 <= 2 * a0 * n and wy0 <= 2 * b0 * n
        if a1 > a0:  # horizontal edges exist
            ok &= 2 * (a1 - 1) * n + 6 * n <= wx1 and 2 * b1 * n + 2 * n <= wy1
        if b1 > b0:  # vertical edges exist
            ok &= 2 * a1 * n + 2 * n <= wx1 and 2 * (b1 - 1) * n + 6 * n <= wy1
        return ok

    if coarse_window is not None:
        a0, b0, a1, b1 = _box4(coarse_window)
        if not fits(a0, b0, a1, b1):
            raise ValueError(
                f"fine window {fine.window} cannot support coarse vertices {coarse_window} at scale {n}"
            )
    else:
        a0 = math.ceil(Fraction(wx0, 2 * n))
        b0 = math.ceil(Fraction(wy0, 2 * n))
        a1 = min(
            math.floor(Fraction(wx1 - 6 * n, 2 * n)) + 1, math.floor(Fraction(wx1 - 2 * n, 2 * n))
        )
        b1 = min(
            math.floor(Fraction(wy1 - 6 * n, 2 * n)) + 1, math.floor(Fraction(wy1 - 2 * n, 2 * n))
        )
        if not fits(a0, b0, a1, b1):
            raise ValueError(f"fine window {fine.window} too small for scale {n}")

    A, B = a1 - a0, b1 - b0
    open_e = np.zeros((B + 1, A), bool)
    open_n = np.zeros((B, A + 1), bool)
    for b in range(b0, b1 + 1):
        for a in range(a0, a1):
            open_e[b - b0, a - a0] = corridor_event(fine, n, ("E", a, b))
    for b in range(b0, b1):
        for a in range(a0, a1 + 1):
            open_n[b - b0, a - a0] = corridor_event(fine, n, ("N", a, b))
    return CoarseConfig(
        kind="bond",
        scale=n,
        window=(a0, b0, a1, b1),
        declared_k=1,
        event="corridor-crossings",
        fine=fine,
        open_e=open_e,
        open_n=open_n,
    )


def corridor_event(fine: Configuration, n: int, edge) -> bool:
    """The three-crossing conjunction defining one coarse edge."""
    d, a, b = edge
    x, y = 2 * a * n, 2 * b * n
    if d == "E":
        R = rect(x, y, x + 6 * n, y + 2 * n)
        s1 = rect(x, y, x + 2 * n, y + 2 * n)
        s2 = rect(x + 4 * n, y, x + 6 * n, y + 2 * n)
        long_dir, short_dir = "h", "v"
    else:
        R = rect(x, y, x + 2 * n, y + 6 * n)
        s1 = rect(x, y, x + 2 * n, y + 2 * n)
        s2 = rect(x, y + 4 * n, x + 2 * n, y + 6 * n)
        long_dir, short_dir = "v", "h"
    return (
        has_crossing(fine, R, long_dir).crosses
        and has_crossing(fine, s1, short_dir).crosses
        and has_crossing(fine, s2, short_dir).crosses
    )


def fine_witness_path(fine: Configuration, coarse: CoarseConfig, coarse_vertices):
    """Fine open path certifying a coarse open path.

    coarse_vertices is a lattice path v_0..v_L whose coarse edges must all be
    open; returns a fine open path joining the 2n-square of v_0 to the
    2n-square of v_L inside the union of the defining rectangles, or None if
    no such path exists (which would falsify the construction).
    """
    if coarse.kind != "bond":
        raise ValueError("witness paths are defined for the corridor coarse process")
    n = coarse.scale
    vs = [tuple(v) for v in coarse_vertices]
    if len(vs) < 2:
        raise ValueError("need at least one coarse edge")
    regions = []
    for u, v in zip(vs, vs[1:]):
        dx, dy = v[0] - u[0], v[1] - u[1]
        if abs(dx) + abs(dy) != 1:
            raise ValueError(f"{u}->{v} is not a coarse lattice step")
        a, b = min(u[0], v[0]), min(u[1], v[1])
        d = "E" if dx != 0 else "N"
        if not coarse.edge_open(d, a, b):
            raise ValueError(f"coarse edge {d} at {(a, b)} is not open")
        regions.append(coarse.defining_region(d, a, b))

    wx0, wy0, wx1, wy1 = fine.window.int_bounds()

    def in_union(x, y):
        for r in regions:
            rx0, ry0, rx1, ry1 = r.int_bounds()
            if rx0 <= x <= rx1 and ry0 <= y <= ry1:
                return True
        return False

    def square_sites(v):
        a, b = v
        return [
            (x, y)
            for x in range(2 * a * n, 2 * a * n + 2 * n + 1)
            for y in range(2 * b * n, 2 * b * n + 2 * n + 1)
        ]

    kind = LatticeKind.SITE_STAR if fine.model == "site-star" else LatticeKind.SITE_SQUARE
    offs = neighbor_offsets(kind)
    target = {v for v in square_sites(vs[-1]) if fine.site_state(v)}
    if not target:
        return None
    parent = {}
    q = deque()
    for v in square_sites(vs[0]):
        if fine.site_state(v):
            parent[v] = None
            q.append(v)
    while q:
        v = q.popleft()
        if v in target:
            path = [v]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        for dx, dy in offs:
            u = (v[0] + dx, v[1] + dy)
            if u in parent or not in_union(*u):
                continue
            if not (wx0 <= u[0] <= wx1 and wy0 <= u[1] <= wy1):
                continue
            if fine.site_state(u):
                parent[u] = v
                q.append(u)
    return None


def coarse_origin_cluster(coarse: CoarseConfig) -> tuple[int, bool]:
    """Size of the coarse open cluster of coarse cell (0,0), 4-neighbour,
    with a flag marking contact with the coarse window boundary."""
    if coarse.kind != "site":
        raise ValueError("origin clusters implemented for coarse site processes")
    a0, b0, a1, b1 = coarse.window
    if not (a0 <= 0 <= a1 and b0 <= 0 <= b1):
        raise ValueError("coarse window does not contain the origin cell")
    if not coarse.site_open((0, 0)):
        return 0, False
    seen = {(0, 0)}
    q = deque([(0, 0)])
    truncated = False
    while q:
        a, b = q.popleft()
        if a in (a0, a1) or b in (b0, b1):
            truncated = True
        for u in ((a + 1, b), (a - 1, b), (a, b + 1), (a, b - 1)):
            if u in seen or not (a0 <= u[0] <= a1 and b0 <= u[1] <= b1):
                continue
            if coarse.site_open(u):
                seen.add(u)
                q.append(u)
    return len(seen), truncated


# ---------------------------------------------------------------------------
# separated sets


def exclusion_ball_size(k: int) -> int:
    """Number of lattice points at graph distance 1..k-1 from a fixed point:
    sum of 4d over d < k, i.e. 2k^2 - 2k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return 2 * k * k - 2 * k


def greedy_separated_set(vertices, k: int) -> list:
    """Greedy subset with pairwise graph (L1) distance >= k.

    Scanning vertices in sorted order and discarding everything within
    distance k-1 of a chosen vertex removes at most 2k^2-2k+1 candidates per
    choice, so the result has at least ceil(n / (2k^2-2k+1)) elements.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    chosen = []
    for v in sorted(set(map(tuple, vertices))):
        if all(abs(v[0] - u[0]) + abs(v[1] - u[1]) >= k for u in chosen):
            chosen.append(v)
    return chosen


# ---------------------------------------------------------------------------
# origin lattice trees


def _fixed_polyominoes(n: int):
    """Translation-distinct edge-connected n-cell shapes, each anchored so
    its (y, x)-minimal cell is the origin.

    Untried-set growth: cells are confined to the half-plane where the
    origin stays minimal; popping a cell and recursing enumerates the shapes
    containing it, after which it is retired for the sibling branches, so
    every shape appears exactly once.  `reached` holds everything that has
    ever entered an untried list on the current path.
    """

    def admissible(c):
        return c[1] > 0 or (c[1] == 0 and c[0] >= 0)

    out = []

    def rec(shape, untried, reached):
        while untried:
            c = untried.pop()
            new_shape = shape | {c}
            if len(new_shape) == n:
                out.append(frozenset(new_shape))
                continue
            fresh = [
                u
                for u in ((c[0] + 1, c[1]), (c[0] - 1, c[1]), (c[0], c[1] + 1), (c[0], c[1] - 1))
                if admissible(u) and u not in reached
            ]
            rec(new_shape, untried + fresh, reached | set(fresh))

    rec(frozenset(), [(0, 0)], {(0, 0)})
    return out


def _spanning_tree_count(cells: frozenset) -> int:
    """Number of spanning trees of the 4-adjacency graph on cells, by an
    integer-exact Bareiss determinant of the reduced Laplacian."""
    cl = sorted(cells)
    idx = {c: i for i, c in enumerate(cl)}
    m = len(cl)
    if m == 1:
        return 1
    L = [[0] * m for _ in range(m)]
    for c in cl:
        i = idx[c]
        for d in ((1, 0), (0, 1)):
            u = (c[0] + d[0], c[1] + d[1])
            j = idx.get(u)
            if j is not None:
                L[i][i] += 1
                L[j][j] += 1
                L[i][j] -= 1
                L[j][i] -= 1
    # Bareiss on the (m-1) x (m-1) minor
    a = [row[: m - 1] for row in L[: m - 1]]
    prev = 1
    for k in range(m - 2):
        if a[k][k] == 0:
            swap = next((r for r in range(k + 1, m - 1) if a[r][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            a[k] = [-v for v in a[k]]
        for i in range(k + 1, m - 1):
            for j in range(k + 1, m - 1):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return a[m - 2][m - 2]


def count_lattice_trees(n: int) -> int:
    """Number of n-vertex trees that are subgraphs of Z^2 and contain the
    origin: every placement of every connected n-cell shape, weighted by its
    spanning-tree count.  Exhaustive, so capped at n <= 10."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > 10:
        raise ValueError("exhaustive tree enumeration capped at n = 10")
    total = 0
    for shape in _fixed_polyominoes(n):
        total += _spanning_tree_count(shape)
    return n * total


# ---------------------------------------------------------------------------
# cycle counting and the shell series


def cycle_count_bound(length: int) -> int:
    """Upper bound (length-2)/2 * 3^(length-2) on the number of
    origin-surrounding cycles of the given even length >= 4 in the shifted
    grid: such a cycle crosses the positive x-axis at a bounded abscissa and
    each further step has at most 3 continuations."""
    if length % 2 != 0:
        raise ValueError("cycle lengths on a bipartite grid are even")
    if length < 4:
        raise ValueError("no cycles shorter than 4")
    return (length - 2) // 2 * 3 ** (length - 2)


def count_surrounding_dual_cycles(length: int) -> int:
    """Exact number of cycles of the given length in the half-integer grid
    that surround the origin, by exhaustive canonical search (<= 12).

    Coordinates are doubled so vertices are odd integer pairs.  Each cycle
    is generated once, anchored at its minimal positive-x-axis crossing.
    """
    if length % 2 != 0:
        raise ValueError("cycle lengths on a bipartite grid are even")
    if length < 4:
        raise ValueError("no cycles shorter than 4")
    if length > 12:
        raise ValueError("exhaustive cycle enumeration capped at length 12")

    steps = ((2, 0), (-2, 0), (0, 2), (0, -2))
    total = 0
    # the anchor crossing abscissa is bounded: the cycle must still wrap
    # around the origin and close up, which costs at least x0 + 3 steps
    for x0 in range(1, length - 2, 2):
        start, goal = (x0, 1), (x0, -1)
        count = 0

        def dfs(v, remaining, crossings, visited):
            nonlocal count
            if remaining == 0:
                if v == goal and crossings % 2 == 1:
                    count += 1
                return
            if (abs(v[0] - goal[0]) + abs(v[1] - goal[1])) // 2 > remaining:
                return
            for dx, dy in steps:
                u = (v[0] + dx, v[1] + dy)
                if u == goal and remaining > 1:
                    continue
                if u != goal and u in visited:
                    continue
                cross = dy != 0 and {v[1], u[1]} == {1, -1} and v[0] > 0
                if cross and v[0] < x0:
                    continue  # anchored at the minimal crossing
                dfs(u, remaining - 1, crossings + (1 if cross else 0), visited | {u})

        # the anchor edge goal->start counts as one positive-axis crossing
        dfs(start, length - 1, 1, {start})
        total += count
    return total


@dataclass(frozen=True)
class SeriesEnclosure:
    """Certified enclosure of a series value: the true sum lies in
    [value, value + tail_bound].  divergent=True carries no numbers."""

    divergent: bool
    value: Optional[float] = None
    tail_bound: Optional[float] = None
    terms: int = 0

    def as_dict(self):
        if self.divergent:
            return {"divergent": True}
        return {"value": self.value, "tail_bound": self.tail_bound, "terms": self.terms}


def _sqrt_brackets(q: Fraction, scale: int) -> tuple[Fraction, Fraction]:
    v = (q.numerator * scale * scale) // q.denominator
    r = math.isqrt(v)
    return Fraction(r, scale), Fraction(r + 1, scale)


def dual_cycle_series(p0, tail_tol: float = 1e-9) -> SeriesEnclosure:
    """Sum over even lengths l >= 4 of (l-2)/2 * 3^(l-2) * (1-p0)^(l/4).

    Exact-rational evaluation: the half-power of (1-p0) is bracketed by
    integer square roots, divergence (ratio 3(1-p0)^{1/4} >= 1, i.e.
    81(1-p0) >= 1) is decided exactly, and the reported tail bound covers
    both the truncation and the bracket width.
    """
    p = Fraction(p0)
    if not 0 < p < 1:
        raise ValueError("p0 must be strictly between 0 and 1")
    if tail_tol <= 0:
        raise ValueError("tail_tol must be positive")
    q = 1 - p
    if 81 * q >= 1:
        return SeriesEnclosure(divergent=True)
    tol = Fraction(tail_tol)
    # bracket width propagates into the sum with factor <= sum j x^j, so pick
    # the sqrt resolution from the tolerance up front
    x_f = 9.0 * math.sqrt(float(q))
    envelope = x_f / (1.0 - x_f) ** 2 + 1.0
    scale = 10 ** max(12, int(math.log10(envelope / tail_tol)) + 2)
    y_lo, y_hi = _sqrt_brackets(q, scale)
    while 9 * y_hi >= 1:  # brackets too loose near the boundary
        scale *= 10**6
        y_lo, y_hi = _sqrt_brackets(q, scale)
    x_hi = 9 * y_hi

    # substituting l = 2j+2: term_j = j * 9^j * q^((j+1)/2)
    s_lo = Fraction(0)
    s_hi = Fraction(0)
    j = 0
    nine_j = 1
    while True:
        j += 1
        nine_j *= 9
        if j % 2 == 1:
            t = j * nine_j * q ** ((j + 1) // 2)
            s_lo += t
            s_hi += t
        else:
            base = j * nine_j * q ** (j // 2)
            s_lo += base * y_lo
            s_hi += base * y_hi
        # sum_{i > j} i x^i = x^(j+1) ((j+1)(1-x) + x) / (1-x)^2, x = 9 sqrt(q)
        tail = y_hi * x_hi ** (j + 1) * ((j + 1) * (1 - x_hi) + x_hi) / (1 - x_hi) ** 2
        if tail + (s_hi - s_lo) < tol:
            return SeriesEnclosure(
                divergent=False,
                value=float(s_lo),
                tail_bound=float(tail + (s_hi - s_lo)),
                terms=j,
            )
        if j > 10**6:
            raise RuntimeError("series did not meet the tolerance in 10^6 terms")
