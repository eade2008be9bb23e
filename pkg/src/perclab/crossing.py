"""Crossing events: exact single-instance queries and batched estimators.

Two independent routes are kept deliberately.  Reference queries
(has_crossing, dual_closed_crossing, tri_crossing, the interface walk) are
plain breadth-first searches and a deterministic interface walk, with witness
paths; they are slow but transparent and are validated exhaustively in the
tests.  The batched engines stack many samples into one labelled array
(scipy.ndimage.label with a batch-blind structuring element) and are checked
against the reference route.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np
from scipy import ndimage

from .lattice import (
    Annulus,
    Coord,
    Edge,
    LatticeKind,
    Rect,
    frac_ceil,
    frac_floor,
    neighbors,
)
from .sample import (
    CH_EDGE_E,
    CH_EDGE_N,
    CH_SITE,
    CH_TRI,
    Configuration,
    ModelParams,
    key_u53_vec,
    p_threshold,
    tri_window_layout,
)

S4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], np.uint8)
S8 = np.ones((3, 3), np.uint8)
# sheared triangular adjacency: axial (i, j) -> (i, j + ceil(i/2)) makes the
# six neighbour offsets uniform: (0,+-1), (1,0), (1,1), (-1,0), (-1,-1)
STRI = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], np.uint8)


@dataclass
class CrossingResult:
    crosses: bool
    path: Optional[list] = None

    def __bool__(self):
        return self.crosses


# ---------------------------------------------------------------------------
# reference BFS queries


def _bfs(sources: list, is_target, neighbor_fn) -> Optional[list]:
    """Deterministic BFS; returns a shortest witness path or None."""
    parent = {}
    q = deque()
    for s in sources:
        if s not in parent:
            parent[s] = None
            q.append(s)
    while q:
        v = q.popleft()
        if is_target(v):
            path = [v]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            path.reverse()
            return path
        for u in neighbor_fn(v):
            if u not in parent:
                parent[u] = v
                q.append(u)
    return None


def _site_kind(config: Configuration) -> LatticeKind:
    return LatticeKind.SITE_STAR if config.model == "site-star" else LatticeKind.SITE_SQUARE


def has_crossing(config: Configuration, r: Rect, direction: str = "h") -> CrossingResult:
    """Open crossing of r in the configuration's own lattice.

    direction 'h' joins the left and right sides, 'v' top and bottom.  Sites:
    a path of open vertices of r; bonds: a path over vertices of r through
    open edges of r.  The witness is a shortest crossing (BFS), so with all
    cells open it is a straight row/column.
    """
    if config.model == "tri":
        return tri_crossing(config, r, direction, closed=False)
    x0, y0, x1, y1 = r.int_bounds()
    if direction == "h":
        target = lambda v: v[0] == x1
    else:
        target = lambda v: v[1] == y1
    inside = lambda v: x0 <= v[0] <= x1 and y0 <= v[1] <= y1

    if config.model in ("bond", "depbond"):
        def nbr(v):
            out = []
            for u in neighbors(LatticeKind.SITE_SQUARE, v):
                if not inside(u):
                    continue
                e = Edge(min(v[0], u[0]), min(v[1], u[1]), "E" if v[1] == u[1] else "N")
                if config.edge_state(e):
                    out.append(u)
            return out

        if direction == "h":
            sources = [(x0, y) for y in range(y0, y1 + 1)]
        else:
            sources = [(x, y0) for x in range(x0, x1 + 1)]
        path = _bfs(sources, target, nbr)
        return CrossingResult(path is not None, path)

    kind = _site_kind(config)
    opens = lambda v: inside(v) and config.site_state(v)
    if direction == "h":
        sources = [(x0, y) for y in range(y0, y1 + 1) if opens((x0, y))]
    else:
        sources = [(x, y0) for x in range(x0, x1 + 1) if opens((x, y0))]
    path = _bfs(sources, target, lambda v: [u for u in neighbors(kind, v) if opens(u)])
    return CrossingResult(path is not None, path)


def closed_site_crossing(config: Configuration, r: Rect, direction: str, kind: LatticeKind) -> CrossingResult:
    """Crossing of r by CLOSED vertices under the given adjacency (the
    blocking paths of site duality live in the matching lattice)."""
    x0, y0, x1, y1 = r.int_bounds()
    inside = lambda v: x0 <= v[0] <= x1 and y0 <= v[1] <= y1
    closed = lambda v: inside(v) and not config.site_state(v)
    if direction == "h":
        sources = [(x0, y) for y in range(y0, y1 + 1) if closed((x0, y))]
        target = lambda v: v[0] == x1
    else:
        sources = [(x, y0) for x in range(x0, x1 + 1) if closed((x, y0))]
        target = lambda v: v[1] == y1
    path = _bfs(sources, target, lambda v: [u for u in neighbors(kind, v) if closed(u)])
    return CrossingResult(path is not None, path)


def dual_closed_crossing(config: Configuration, r: Rect, direction: str = "v") -> CrossingResult:
    """Crossing of r by closed DUAL edges (bond model).

    r bounds dual vertices (a+1/2, b+1/2); a dual step is usable iff the
    primal edge it crosses lies inside the configuration window and is
    closed.  With r = dual_rect(R) and the window equal to R this is exactly
    the blocking event of horizontal open crossings of R.
    """
    assert config.model in ("bond", "depbond")
    wx0, wy0, wx1, wy1 = config.window.int_bounds()
    a0 = frac_ceil(r.x0.as_fraction() - Fraction(1, 2))
    a1 = frac_floor(r.x1.as_fraction() - Fraction(1, 2))
    b0 = frac_ceil(r.y0 - Fraction(1, 2))
    b1 = frac_floor(r.y1 - Fraction(1, 2))
    oe, on = config.bonds.open_e, config.bonds.open_n

    def step_ok(v, u):
        # v, u adjacent dual vertices (a, b) <-> (a+1/2, b+1/2)
        if v[1] == u[1]:  # horizontal dual step crosses the N edge between them
            ex, ey = max(v[0], u[0]), v[1]
            if not (wx0 <= ex <= wx1 and wy0 <= ey <= wy1 - 1):
                return False
            return not on[ey - wy0, ex - wx0]
        ex, ey = v[0], max(v[1], u[1])  # vertical dual step crosses an E edge
        if not (wx0 <= ex <= wx1 - 1 and wy0 <= ey <= wy1):
            return False
        return not oe[ey - wy0, ex - wx0]

    inside = lambda v: a0 <= v[0] <= a1 and b0 <= v[1] <= b1

    def nbr(v):
        return [
            u
            for u in ((v[0] + 1, v[1]), (v[0], v[1] + 1), (v[0] - 1, v[1]), (v[0], v[1] - 1))
            if inside(u) and step_ok(v, u)
        ]

    if direction == "v":
        sources = [(a, b0) for a in range(a0, a1 + 1)]
        target = lambda v: v[1] == b1
    else:
        sources = [(a0, b) for b in range(b0, b1 + 1)]
        target = lambda v: v[0] == a1
    path = _bfs(sources, target, nbr)
    if path is not None:
        path = [(Fraction(a) + Fraction(1, 2), Fraction(b) + Fraction(1, 2)) for a, b in path]
    return CrossingResult(path is not None, path)


# ---------------------------------------------------------------------------
# triangular crossings (exact touch conventions)


def _tri_touch(v, r: Rect, side: str, i0: int, i1: int) -> bool:
    """Does vertex v count as reaching the given side of r?

    Left/right: the vertex lies in the extreme column of the window.
    Top/bottom: the vertex is within vertical distance < 1 of the side (its
    vertical neighbour on that side falls outside r).  For windows whose
    vertical sides carry lattice columns and whose height is an integer,
    these conventions make open long crossings and closed short crossings
    exactly complementary.
    """
    i, j = v
    y = Fraction(2 * j + (i & 1), 2)
    if side == "top":
        return y > r.y1 - 1
    if side == "bottom":
        return y < r.y0 + 1
    return i == i0 if side == "left" else i == i1


def tri_crossing(config: Configuration, r: Rect, direction: str, closed: bool = False) -> CrossingResult:
    """Open (or closed) crossing of r on the triangular lattice.

    A crossing's end vertices must have incident lattice edges meeting the two
    sides; 'h' joins left-right, 'v' top-bottom.
    """
    from .lattice import tri_column_range, vertices_in

    i0, i1 = tri_column_range(r)
    verts = vertices_in(LatticeKind.SITE_TRIANGULAR, r)
    vset = set(verts)
    state = lambda v: config.tri.state(v) != closed  # closed=True searches closed cells
    sides = ("left", "right") if direction == "h" else ("bottom", "top")
    sources = [v for v in verts if state(v) and _tri_touch(v, r, sides[0], i0, i1)]
    target = lambda v: _tri_touch(v, r, sides[1], i0, i1)
    ok = lambda v: v in vset and state(v)
    path = _bfs(sources, target, lambda v: [u for u in neighbors(LatticeKind.SITE_TRIANGULAR, v) if ok(u)])
    return CrossingResult(path is not None, path)


def tri_long_direction(r: Rect) -> str:
    """'h' if the rectangle is at least as wide as tall (ties go horizontal)."""
    return "h" if r.width >= Coord.of(r.height) else "v"


# ---------------------------------------------------------------------------
# interface walk on the octagon-and-square picture
#
# Each vertex of the rectangle becomes an octagon (black=open, white=closed);
# an extra black column of octagons is added left and right, an extra white
# row below and above.  Squares between octagons are white when the primal
# lattice is the 4-neighbour one and black when it is the 8-neighbour one.
# Interface edges separate a black region from a bounded white one; every
# tiling vertex has interface degree 0 or 2 except four corner vertices of
# degree <= 1.  Walking from the bottom-left degree-1 vertex therefore
# terminates either at the bottom-right corner (an open horizontal crossing
# exists, hugging the bottom) or at the top-left corner (a closed blocking
# crossing in the matching lattice exists, hugging the left).

_BLACK, _WHITE, _ABSENT = 1, 0, -1


@dataclass
class WalkResult:
    outcome: str  # "open" or "closed-dual"
    path: list  # witness: open primal crossing, or closed matching-lattice crossing
    walk_length: int
    read_cells: set


def _octagon_walk(grid: np.ndarray, star_primal: bool):
    """Run the interface walk on a local (H+1, W+1) boolean vertex grid for a
    horizontal crossing query.  Returns (outcome, black_set, white_set,
    walk_len, read_cells) where the sets hold in-rectangle octagons adjacent
    to the walk."""
    H = grid.shape[0] - 1
    W = grid.shape[1] - 1
    read: set = set()

    def color(i, j):
        if 0 <= i <= W and 0 <= j <= H:
            read.add((i, j))
            return _BLACK if grid[j, i] else _WHITE
        if i in (-1, W + 1) and 0 <= j <= H:
            return _BLACK
        if j in (-1, H + 1) and 0 <= i <= W:
            return _WHITE
        return _ABSENT

    def bounded(i, j):  # diamond (i, j) sits between four octagons
        return (
            color(i, j) != _ABSENT
            and color(i + 1, j) != _ABSENT
            and color(i, j + 1) != _ABSENT
            and color(i + 1, j + 1) != _ABSENT
        )

    dia_rule = _WHITE if star_primal else _BLACK

    def in_g(e):
        t, i, j = e
        if t == "V":
            c1, c2 = color(i, j), color(i + 1, j)
            return c1 != _ABSENT and c2 != _ABSENT and c1 != c2
        if t == "H":
            c1, c2 = color(i, j), color(i, j + 1)
            return c1 != _ABSENT and c2 != _ABSENT and c1 != c2
        oi, oj = _dia_oct(t, i, j)
        return bounded(i, j) and color(oi, oj) == dia_rule

    def _dia_oct(t, i, j):
        return {"NW": (i, j + 1), "NE": (i + 1, j + 1), "SW": (i, j), "SE": (i + 1, j)}[t]

    def vertex_edges(i, j, k):
        if k == "N":
            return (("V", i, j + 1), ("NW", i, j), ("NE", i, j))
        if k == "S":
            return (("V", i, j), ("SW", i, j), ("SE", i, j))
        if k == "E":
            return (("H", i + 1, j), ("NE", i, j), ("SE", i, j))
        return (("H", i, j), ("NW", i, j), ("SW", i, j))

    def endpoints(e):
        t, i, j = e
        if t == "V":
            return ((i, j, "S"), (i, j - 1, "N"))
        if t == "H":
            return ((i, j, "W"), (i - 1, j, "E"))
        a = {"NW": ("N", "W"), "NE": ("N", "E"), "SW": ("S", "W"), "SE": ("S", "E")}[t]
        return ((i, j, a[0]), (i, j, a[1]))

    # start at the bottom-left corner diamond (-1, -1)
    start = None
    for v in ((-1, -1, "N"), (-1, -1, "E")):
        es = [e for e in vertex_edges(*v) if in_g(e)]
        if len(es) == 1:
            start = (v, es[0])
        else:
            assert not es, f"corner degree {len(es)}"
    assert start is not None, "no degree-1 start vertex"

    black: set = set()
    white: set = set()

    def collect(e):
        t, i, j = e
        if t in ("V", "H"):
            c1 = (i, j)
            c2 = (i + 1, j) if t == "V" else (i, j + 1)
            for c in (c1, c2):
                if 0 <= c[0] <= W and 0 <= c[1] <= H:
                    (black if grid[c[1], c[0]] else white).add(c)
        else:
            c = _dia_oct(t, i, j)
            if 0 <= c[0] <= W and 0 <= c[1] <= H:
                (black if grid[c[1], c[0]] else white).add(c)

    v, e = start
    collect(e)
    cur = endpoints(e)[0] if endpoints(e)[0] != v else endpoints(e)[1]
    steps = 1
    limit = 8 * (W + 3) * (H + 3)
    while True:
        es = [x for x in vertex_edges(*cur) if in_g(x)]
        assert len(es) in (1, 2), f"interface degree {len(es)} at {cur}"
        if len(es) == 1:
            assert es[0] == e, "dead end not the arrival edge"
            break
        nxt = es[0] if es[1] == e else es[1]
        assert nxt != e
        collect(nxt)
        a, b = endpoints(nxt)
        cur = a if a != cur else b
        e = nxt
        steps += 1
        assert steps <= limit, "walk failed to terminate"

    ti, tj, _ = cur
    if (ti, tj) == (W, -1):
        outcome = "open"
    elif (ti, tj) == (-1, H):
        outcome = "closed-dual"
    else:  # the top-right corner is unreachable from the bottom-left start
        raise AssertionError(f"walk ended at unexpected corner {cur}")
    return outcome, black, white, steps, read


def _path_in_set(cells: set, kind: LatticeKind, sources, targets) -> list:
    src = sorted(c for c in cells if sources(c))
    path = _bfs(src, targets, lambda v: [u for u in neighbors(kind, v) if u in cells])
    assert path is not None, "walk witness extraction failed"
    return path


def interface_walk_grid(grid: np.ndarray, star_primal: bool) -> WalkResult:
    """Interface walk on a local boolean grid (horizontal crossing query)."""
    H = grid.shape[0] - 1
    W = grid.shape[1] - 1
    outcome, black, white, steps, read = _octagon_walk(grid, star_primal)
    if outcome == "open":
        kind = LatticeKind.SITE_STAR if star_primal else LatticeKind.SITE_SQUARE
        path = _path_in_set(black, kind, lambda c: c[0] == 0, lambda c: c[0] == W)
    else:
        kind = LatticeKind.SITE_SQUARE if star_primal else LatticeKind.SITE_STAR
        path = _path_in_set(white, kind, lambda c: c[1] == H, lambda c: c[1] == 0)
    return WalkResult(outcome, path, steps, read)


def interface_walk(config: Configuration, r: Rect, primal: LatticeKind) -> WalkResult:
    """Decide the horizontal-open / vertical-closed dichotomy constructively.

    primal selects which of the two square site lattices carries the open
    crossing; the blocking closed crossing lives in the other.  Exactly one
    outcome occurs, and the witness path is returned in absolute coordinates.
    """
    if primal not in (LatticeKind.SITE_SQUARE, LatticeKind.SITE_STAR):
        raise ValueError("interface walk is defined for the square site lattices")
    x0, y0, x1, y1 = r.int_bounds()
    grid = _site_subgrid(config, x0, y0, x1, y1)
    res = interface_walk_grid(grid, primal is LatticeKind.SITE_STAR)
    res.path = [(x0 + i, y0 + j) for i, j in res.path]
    res.read_cells = {(x0 + i, y0 + j) for i, j in res.read_cells}
    return res


def _site_subgrid(config: Configuration, x0, y0, x1, y1) -> np.ndarray:
    wx0, wy0, wx1, wy1 = config.window.int_bounds()
    if not (wx0 <= x0 and x1 <= wx1 and wy0 <= y0 and y1 <= wy1):
        raise ValueError("rectangle leaves the configuration window")
    return config.site[y0 - wy0 : y1 - wy0 + 1, x0 - wx0 : x1 - wx0 + 1]


def expand_bond(open_e: np.ndarray, open_n: np.ndarray) -> np.ndarray:
    """Site picture of a bond window: vertices open, faces closed, edge cells
    carry the edge states; 4-connectivity reproduces bond connectivity."""
    h1, w = open_e.shape
    h = h1 - 1
    g = np.zeros((2 * h + 1, 2 * w + 1), bool)
    g[0::2, 0::2] = True
    g[0::2, 1::2] = open_e
    g[1::2, 0::2] = open_n
    return g


def _bond_subgrids(config: Configuration, x0, y0, x1, y1):
    wx0, wy0, wx1, wy1 = config.window.int_bounds()
    if not (wx0 <= x0 and x1 <= wx1 and wy0 <= y0 and y1 <= wy1):
        raise ValueError("rectangle leaves the configuration window")
    oe = config.bonds.open_e[y0 - wy0 : y1 - wy0 + 1, x0 - wx0 : x1 - wx0]
    on = config.bonds.open_n[y0 - wy0 : y1 - wy0, x0 - wx0 : x1 - wx0 + 1]
    return oe, on


def leftmost_vertical_crossing(config: Configuration, r: Rect) -> Optional[list]:
    """The left-most open top-bottom crossing of r, or None.

    Realized by the interface walk rotated a quarter turn, so the returned
    path depends only on its own cells and cells to its left; re-randomizing
    everything strictly to its right reproduces it bit for bit.  With all
    cells open this is the left boundary column.
    """
    if config.model == "tri":
        return _tri_leftmost_vertical(config, r)
    x0, y0, x1, y1 = r.int_bounds()
    if config.model in ("site-sq", "site-star"):
        grid = _site_subgrid(config, x0, y0, x1, y1)
        res = interface_walk_grid(grid.T.copy(), config.model == "site-star")
        if res.outcome != "open":
            return None
        return [(x0 + j, y0 + i) for i, j in res.path]  # un-transpose
    if config.model in ("bond", "depbond"):
        oe, on = _bond_subgrids(config, x0, y0, x1, y1)
        ex = expand_bond(oe, on)
        res = interface_walk_grid(ex.T.copy(), star_primal=False)
        if res.outcome != "open":
            return None
        # walk cell (i, j) is expanded cell ex[i, j]; the path alternates
        # vertex cells (even, even) and edge cells -- keep the vertices
        out = []
        for i, j in res.path:
            if i % 2 == 0 and j % 2 == 0:
                v = (x0 + j // 2, y0 + i // 2)
                if not out or out[-1] != v:
                    out.append(v)
        return out
    raise ValueError(f"leftmost crossing undefined for model {config.model}")


def _tri_leftmost_vertical(config: Configuration, r: Rect) -> Optional[list]:
    """Left-most vertical crossing on the triangular lattice.

    The triangular lattice is self-matching, so the region left of the
    crossing is bounded by the closed cluster attached to the left side; the
    crossing is recovered as the open frontier of that cluster, which depends
    only on cells on or left of the result.
    """
    from .lattice import tri_column_range, vertices_in

    i0, i1 = tri_column_range(r)
    verts = vertices_in(LatticeKind.SITE_TRIANGULAR, r)
    vset = set(verts)
    opens = lambda v: config.tri.state(v)
    # closed cluster attached to the left side
    closed_seed = sorted(v for v in verts if not opens(v) and _tri_touch(v, r, "left", i0, i1))
    blocked = set(closed_seed)
    q = deque(closed_seed)
    while q:
        v = q.popleft()
        for u in neighbors(LatticeKind.SITE_TRIANGULAR, v):
            if u in vset and not opens(u) and u not in blocked:
                blocked.add(u)
                q.append(u)
    frontier = {
        v
        for v in verts
        if opens(v)
        and (
            _tri_touch(v, r, "left", i0, i1)
            or any(u in blocked for u in neighbors(LatticeKind.SITE_TRIANGULAR, v))
        )
    }
    src = sorted(v for v in frontier if _tri_touch(v, r, "top", i0, i1))
    path = _bfs(
        src,
        lambda v: _tri_touch(v, r, "bottom", i0, i1),
        lambda v: [u for u in neighbors(LatticeKind.SITE_TRIANGULAR, v) if u in frontier],
    )
    return path


# ---------------------------------------------------------------------------
# annulus circuits


@dataclass
class CircuitWitness:
    mode: str
    paths: list  # four long-crossing witnesses: bottom, right, top, left


def annulus_circuit(config: Configuration, ann: Annulus, mode: str = "closed-dual") -> Optional[CircuitWitness]:
    """Long crossings of the four ring rectangles, spliced into a circuit.

    mode 'open': open primal crossings (bond).  mode 'closed-dual': crossings
    by closed dual edges.  Returns None as soon as one rectangle fails.
    Consecutive witnesses intersect inside the shared corner squares, so the
    union contains a circuit around the inner square.
    """
    dirs = ann.long_directions()
    paths = []
    for rct, d in zip(ann.rects(), dirs):
        if mode == "open":
            res = has_crossing(config, rct, d)
        else:
            res = dual_closed_crossing(config, rct, d)
        if not res.crosses:
            return None
        paths.append(res.path)
    w = CircuitWitness(mode, paths)
    for k in range(4):
        a, b = set(paths[k]), set(paths[(k + 1) % 4])
        assert a & b, "consecutive ring crossings fail to intersect"
    return w


def annulus_blocks_escape(config: Configuration, ann: Annulus) -> bool:
    """True iff no open primal path joins the inner square to the ring's
    outer boundary (the meaning of a closed-dual circuit)."""
    x0, y0, x1, y1 = ann.inner.int_bounds()
    ox0, oy0, ox1, oy1 = ann.left.int_bounds()[0], ann.bottom.int_bounds()[1], ann.right.int_bounds()[2], ann.top.int_bounds()[3]
    wx0, wy0, wx1, wy1 = config.window.int_bounds()
    inside = lambda v: wx0 <= v[0] <= wx1 and wy0 <= v[1] <= wy1

    def nbr(v):
        out = []
        for u in neighbors(LatticeKind.SITE_SQUARE, v):
            if not inside(u):
                continue
            e = Edge(min(v[0], u[0]), min(v[1], u[1]), "E" if v[1] == u[1] else "N")
            if config.edge_state(e):
                out.append(u)
        return out

    sources = [(x, y) for x in range(x0, x1 + 1) for y in range(y0, y1 + 1)]
    hit = _bfs(sources, lambda v: v[0] in (ox0, ox1) or v[1] in (oy0, oy1), nbr)
    return hit is None


# ---------------------------------------------------------------------------
# torus quotients


@dataclass(frozen=True)
class TorusWindow:
    """Quotient of a lattice by two axis-aligned integer periods."""

    kind: LatticeKind
    w1: tuple[int, int]
    w2: tuple[int, int]

    def __post_init__(self):
        (p, a), (b, q) = self.w1, self.w2
        if a != 0 or b != 0 or p <= 0 or q <= 0:
            raise ValueError("periods must be positive axis-aligned vectors (P,0), (0,Q)")
        if self.kind is LatticeKind.SITE_TRIANGULAR and p % 2:
            raise ValueError("triangular torus needs an even column period")

    @property
    def px(self) -> int:
        return self.w1[0]

    @property
    def py(self) -> int:
        return self.w2[1]


def torus_site_grid(t: TorusWindow, params: ModelParams, seed: int, index: int) -> np.ndarray:
    ch = CH_TRI if t.kind is LatticeKind.SITE_TRIANGULAR else CH_SITE
    ys, xs = np.mgrid[0 : t.py, 0 : t.px]
    return key_u53_vec(seed, index, ch, xs, ys) < np.uint64(p_threshold(params.p))


def torus_bond_grids(t: TorusWindow, params: ModelParams, seed: int, index: int):
    th = np.uint64(p_threshold(params.p))
    ys, xs = np.mgrid[0 : t.py, 0 : t.px]
    oe = key_u53_vec(seed, index, CH_EDGE_E, xs, ys) < th
    on = key_u53_vec(seed, index, CH_EDGE_N, xs, ys) < th
    return oe, on


def torus_crossing(t: TorusWindow, params: ModelParams, r: Rect, seed: int, index: int) -> CrossingResult:
    """H(r) evaluated on the torus.  r must not wrap; its vertex states are
    looked up at canonical representatives, so for r inside the fundamental
    domain the states coincide with the planar sample keyed the same way."""
    x0, y0, x1, y1 = r.int_bounds()
    if x1 - x0 + 1 > t.px or y1 - y0 + 1 > t.py:
        raise ValueError("rectangle wraps the torus")
    cfg = torus_window_config(t, params, r, seed, index)
    return has_crossing(cfg, r, "h")


def torus_window_config(t: TorusWindow, params: ModelParams, r: Rect, seed: int, index: int) -> Configuration:
    """Planar window whose states are pulled back from the torus."""
    x0, y0, x1, y1 = r.int_bounds()
    if t.kind is LatticeKind.BOND_SQUARE:
        th = np.uint64(p_threshold(params.p))
        ye, xe = np.mgrid[y0 : y1 + 1, x0:x1]
        yn, xn = np.mgrid[y0:y1, x0 : x1 + 1]
        oe = key_u53_vec(seed, index, CH_EDGE_E, xe % t.px, ye % t.py) < th
        on = key_u53_vec(seed, index, CH_EDGE_N, xn % t.px, yn % t.py) < th
        from .sample import BondGrid

        return Configuration("bond", r, seed, index, params, bonds=BondGrid(oe, on))
    if t.kind in (LatticeKind.SITE_SQUARE, LatticeKind.SITE_STAR):
        th = np.uint64(p_threshold(params.p))
        ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
        st = key_u53_vec(seed, index, CH_SITE, xs % t.px, ys % t.py) < th
        model = "site-sq" if t.kind is LatticeKind.SITE_SQUARE else "site-star"
        return Configuration(model, r, seed, index, params, site=st)
    raise ValueError("torus windows support the square-grid kinds")


def torus_tri_config(t: TorusWindow, params: ModelParams, window: Rect, seed: int, index: int) -> Configuration:
    """Triangular window pulled back from the torus (axial periods; the
    column period is even so vertical offsets are preserved)."""
    from .sample import TriGrid

    i0, i1, jlo, counts = tri_window_layout(window)
    ncols = i1 - i0 + 1
    nrows = int(counts.max()) if ncols else 0
    cols = np.arange(i0, i1 + 1, dtype=np.int64)[:, None]
    rows = jlo[:, None] + np.arange(nrows, dtype=np.int64)[None, :]
    th = np.uint64(p_threshold(params.p))
    st = key_u53_vec(seed, index, CH_TRI, cols % t.px, rows % t.py) < th
    st &= np.arange(nrows)[None, :] < counts[:, None]
    return Configuration("tri", window, seed, index, params, tri=TriGrid(i0, jlo, counts, st))


def torus_some_crossing_grids(t: TorusWindow, grids, dims: tuple[int, int]) -> bool:
    """The translation-symmetric event: some w-by-h rectangle on the torus
    has a horizontal open crossing.  `grids` are canonical torus states."""
    w, h = dims
    if w + 1 > t.px or h + 1 > t.py:
        raise ValueError("rectangle wraps the torus")
    P, Q = t.px, t.py
    tx = np.arange(P)
    ty = np.arange(Q)
    if t.kind is LatticeKind.BOND_SQUARE:
        oe, on = grids
        xs = (tx[:, None, None, None] + np.arange(w)[None, None, None, :]) % P
        ys = (ty[None, :, None, None] + np.arange(h + 1)[None, None, :, None]) % Q
        E = oe[ys, xs]  # (P, Q, h+1, w)
        xs2 = (tx[:, None, None, None] + np.arange(w + 1)[None, None, None, :]) % P
        ys2 = (ty[None, :, None, None] + np.arange(h)[None, None, :, None]) % Q
        N = on[ys2, xs2]
        B = P * Q
        ex = expand_bond_batch(E.reshape(B, h + 1, w), N.reshape(B, h, w + 1))
        m = stack_crossing_mask(ex, S4, ex & _col_mask(ex, 0), ex & _col_mask(ex, -1))
        return bool(m.any())
    st = grids
    xs = (tx[:, None, None, None] + np.arange(w + 1)[None, None, None, :]) % P
    ys = (ty[None, :, None, None] + np.arange(h + 1)[None, None, :, None]) % Q
    S = st[ys, xs].reshape(P * Q, h + 1, w + 1)
    sub = S8 if t.kind is LatticeKind.SITE_STAR else S4
    m = stack_crossing_mask(S, sub, S & _col_mask(S, 0), S & _col_mask(S, -1))
    return bool(m.any())


def torus_some_crossing(t: TorusWindow, params: ModelParams, dims: tuple[int, int], seed: int, index: int) -> bool:
    if t.kind is LatticeKind.BOND_SQUARE:
        grids = torus_bond_grids(t, params, seed, index)
    else:
        grids = torus_site_grid(t, params, seed, index)
    return torus_some_crossing_grids(t, grids, dims)


# ---------------------------------------------------------------------------
# batched engines


def _batch_structure(sub: np.ndarray) -> np.ndarray:
    s = np.zeros((3, 3, 3), np.uint8)
    s[1] = sub
    return s


def stack_label(stack: np.ndarray, sub: np.ndarray) -> np.ndarray:
    """Label each plane of a (B, H, W) boolean stack independently."""
    lab, _ = ndimage.label(stack, structure=_batch_structure(sub))
    return lab


def stack_crossing_mask(stack: np.ndarray, sub: np.ndarray, touch_a: np.ndarray, touch_b: np.ndarray) -> np.ndarray:
    """Per-plane indicator that a cluster meets both touch masks.

    touch_a/touch_b may be (B, H, W) masks or (B, H) slices of labels; here
    they are boolean masks aligned with `stack`."""
    lab = stack_label(stack, sub)
    top = int(lab.max())
    if top == 0:
        return np.zeros(stack.shape[0], bool)
    in_a = np.zeros(top + 1, bool)
    in_b = np.zeros(top + 1, bool)
    in_a[lab[touch_a]] = True
    in_b[lab[touch_b]] = True
    in_a[0] = in_b[0] = False
    both = in_a & in_b
    if not both.any():
        return np.zeros(stack.shape[0], bool)
    plane = np.zeros(top + 1, np.int64)
    b_idx = np.arange(stack.shape[0], dtype=np.int64)[:, None, None]
    plane[lab] = np.broadcast_to(b_idx, lab.shape)
    out = np.zeros(stack.shape[0], bool)
    out[plane[np.nonzero(both)[0]]] = True
    return out


def _col_mask(stack: np.ndarray, col: int) -> np.ndarray:
    m = np.zeros(stack.shape, bool)
    m[:, :, col] = True
    return m


def _row_mask(stack: np.ndarray, row: int) -> np.ndarray:
    m = np.zeros(stack.shape, bool)
    m[:, row, :] = True
    return m


def expand_bond_batch(open_e: np.ndarray, open_n: np.ndarray) -> np.ndarray:
    B, h1, w = open_e.shape
    h = h1 - 1
    g = np.zeros((B, 2 * h + 1, 2 * w + 1), bool)
    g[:, 0::2, 0::2] = True
    g[:, 0::2, 1::2] = open_e
    g[:, 1::2, 0::2] = open_n
    return g


def bond_crossing_batch(p: float, r: Rect, seed: int, indices, direction: str = "h") -> np.ndarray:
    """Indicators of an open crossing of r for many sample indices."""
    oe, on = _bond_stacks(p, r, seed, indices)
    ex = expand_bond_batch(oe, on)
    if direction == "v":
        ex = ex.transpose(0, 2, 1)
    return stack_crossing_mask(ex, S4, ex & _col_mask(ex, 0), ex & _col_mask(ex, -1))


def _bond_stacks(p: float, r: Rect, seed: int, indices):
    x0, y0, x1, y1 = r.int_bounds()
    th = np.uint64(p_threshold(p))
    idx = np.asarray(indices, np.int64)[:, None, None]
    ye, xe = np.mgrid[y0 : y1 + 1, x0:x1]
    yn, xn = np.mgrid[y0:y1, x0 : x1 + 1]
    oe = key_u53_vec(seed, idx, CH_EDGE_E, xe[None, :, :], ye[None, :, :]) < th
    on = key_u53_vec(seed, idx, CH_EDGE_N, xn[None, :, :], yn[None, :, :]) < th
    return oe, on


def site_crossing_batch(
    kind: LatticeKind, p: float, r: Rect, seed: int, indices, direction: str = "h", closed: bool = False
) -> np.ndarray:
    """Indicators of a site crossing of r (open cells, or closed cells when
    closed=True) under the adjacency of `kind`."""
    x0, y0, x1, y1 = r.int_bounds()
    th = np.uint64(p_threshold(p))
    idx = np.asarray(indices, np.int64)[:, None, None]
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    st = key_u53_vec(seed, idx, CH_SITE, xs[None], ys[None]) < th
    if closed:
        st = ~st
    if direction == "v":
        st = st.transpose(0, 2, 1)
    sub = S8 if kind is LatticeKind.SITE_STAR else S4
    return stack_crossing_mask(st, sub, st & _col_mask(st, 0), st & _col_mask(st, -1))


def tri_stacks(p: float, r: Rect, seed: int, indices):
    """Sheared boolean stacks for triangular windows plus touch masks.

    Returns (stack, masks) where stack is (B, ncols, nk) in sheared
    coordinates k = j + ceil(i/2) and masks is a dict of boolean (ncols, nk)
    touch masks for left/right/top/bottom plus the validity mask."""
    i0, i1, jlo, counts = tri_window_layout(r)
    ncols = i1 - i0 + 1
    cols = np.arange(i0, i1 + 1, dtype=np.int64)
    ceilhalf = (cols + 1) // 2
    klo = jlo + ceilhalf
    khi = jlo + counts - 1 + ceilhalf
    kmin, kmax = int(klo.min()), int(khi.max())
    nk = kmax - kmin + 1
    ks = kmin + np.arange(nk, dtype=np.int64)
    jj = ks[None, :] - ceilhalf[:, None]  # axial j per (col, k)
    valid = (jj >= jlo[:, None]) & (jj <= (jlo + counts - 1)[:, None])
    th = np.uint64(p_threshold(p))
    idx = np.asarray(indices, np.int64)[:, None, None]
    ii = np.broadcast_to(cols[:, None], (ncols, nk))
    st = key_u53_vec(seed, idx, CH_TRI, ii[None], jj[None]) < th
    st &= valid[None]
    masks = _tri_touch_masks(r, i0, i1, jlo, counts, jj, valid)
    return st, masks, valid


def _tri_touch_masks(r: Rect, i0, i1, jlo, counts, jj, valid):
    ncols, nk = jj.shape
    half = Fraction(1, 2)
    left = np.zeros((ncols, nk), bool)
    right = np.zeros((ncols, nk), bool)
    top = np.zeros((ncols, nk), bool)
    bottom = np.zeros((ncols, nk), bool)
    for ci in range(ncols):
        i = i0 + ci
        off = half if (i & 1) else Fraction(0)
        js = jj[ci]
        v = valid[ci]
        # top: y > y1 - 1; bottom: y < y0 + 1 (strict, exact rationals)
        jt = r.y1 - 1 - off
        top[ci] = v & ((js > int(jt)) if jt.denominator == 1 else (js >= frac_ceil(jt)))
        jb = r.y0 + 1 - off
        bottom[ci] = v & ((js < int(jb)) if jb.denominator == 1 else (js <= frac_floor(jb)))
        if i == i0:
            left[ci] = v
        if i == i1:
            right[ci] = v
    return {"left": left, "right": right, "top": top, "bottom": bottom}


def tri_crossing_batch(p: float, r: Rect, seed: int, indices, direction: str, closed: bool = False) -> np.ndarray:
    st, masks, valid = tri_stacks(p, r, seed, indices)
    if closed:
        st = (~st) & valid[None]
    if direction == "h":
        ma, mb = masks["left"], masks["right"]
    else:
        ma, mb = masks["bottom"], masks["top"]
    return stack_crossing_mask(st, STRI, st & ma[None], st & mb[None])


# ---------------------------------------------------------------------------
# shortest crossings


def shortest_crossing_length(config: Configuration, r: Rect, direction: str = "h") -> Optional[int]:
    """Length in edges of a shortest open crossing of r, or None."""
    res = has_crossing(config, r, direction)
    if not res.crosses:
        return None
    return len(res.path) - 1


def bond_shortest_batch(p: float, r: Rect, seed: int, indices) -> np.ndarray:
    """Shortest horizontal crossing length (edges) per sample; -1 if none."""
    oe, on = _bond_stacks(p, r, seed, indices)
    ex = expand_bond_batch(oe, on)
    B, H, W = ex.shape
    dist = np.full(ex.shape, -1, np.int32)
    frontier = np.zeros(ex.shape, bool)
    frontier[:, 0::2, 0] = True  # vertex cells on the left side
    dist[frontier] = 0
    d = 0
    while frontier.any():
        d += 1
        grown = np.zeros_like(frontier)
        grown[:, 1:, :] |= frontier[:, :-1, :]
        grown[:, :-1, :] |= frontier[:, 1:, :]
        grown[:, :, 1:] |= frontier[:, :, :-1]
        grown[:, :, :-1] |= frontier[:, :, 1:]
        frontier = grown & ex & (dist < 0)
        dist[frontier] = d
    right = dist[:, 0::2, -1]  # vertex cells on the right side
    right = np.where(right >= 0, right, np.iinfo(np.int32).max)
    best = right.min(axis=1)
    return np.where(best < np.iinfo(np.int32).max, best // 2, -1).astype(np.int64)


# ---------------------------------------------------------------------------
# the strip event of the k-strip lemma


def strip_joined_right_events(config: Configuration, rr: int, s: int, t: int, k: int) -> np.ndarray:
    """For strips R_i = [0,rr] x [(i-1)s, is] inside R = [0,t] x [0,ks]:
    indicator per i that some open vertical crossing of R_i lies in a cluster
    of R touching the right side of R.  Site models only."""
    kind = _site_kind(config)
    sub = S8 if kind is LatticeKind.SITE_STAR else S4
    grid = _site_subgrid(config, 0, 0, t, k * s)
    lab, _ = ndimage.label(grid, structure=sub.astype(bool))
    right_labels = set(np.unique(lab[:, t][lab[:, t] > 0]))
    out = np.zeros(k, bool)
    for i in range(1, k + 1):
        sub_grid = grid[(i - 1) * s : i * s + 1, 0 : rr + 1]
        slab, _ = ndimage.label(sub_grid, structure=sub.astype(bool))
        touch_b = set(np.unique(slab[0][slab[0] > 0]))
        touch_t = set(np.unique(slab[-1][slab[-1] > 0]))
        for lbl in touch_b & touch_t:
            cells = np.nonzero(slab == lbl)
            parents = set(lab[(i - 1) * s + cells[0], cells[1]].tolist())
            if parents & right_labels:
                out[i - 1] = True
                break
    return out
