"""Brute-force reference implementations the tests check the package against.

Everything here is deliberately slow and obvious: hand-rolled BFS on explicit
adjacency, exhaustive enumeration where feasible, exact Fraction arithmetic.
Nothing imports from perclab, so a package bug cannot hide inside its own
oracle.
"""

from collections import deque
from itertools import combinations

import numpy as np

_SQ4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
_SQ8 = _SQ4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))


def site_component(grid, start, star=False):
    """Connected open-cell component of `start` on a boolean (h, w) grid;
    cells addressed (y, x), 4- or 8-neighbour adjacency."""
    g = np.asarray(grid, bool)
    h, w = g.shape
    y0, x0 = start
    if not g[y0, x0]:
        return set()
    steps = _SQ8 if star else _SQ4
    seen = {(y0, x0)}
    q = deque(seen)
    while q:
        y, x = q.popleft()
        for dy, dx in steps:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and g[ny, nx] and (ny, nx) not in seen:
                seen.add((ny, nx))
                q.append((ny, nx))
    return seen


def site_crosses(grid, star=False, direction="h"):
    """Open path of cells from one side of the grid to the opposite side."""
    g = np.asarray(grid, bool)
    if direction == "v":
        g = g.T
    h, w = g.shape
    if h == 0 or w == 0:
        return False
    done = set()
    for y in range(h):
        if g[y, 0] and (y, 0) not in done:
            comp = site_component(g, (y, 0), star)
            if any(x == w - 1 for _, x in comp):
                return True
            done |= comp
    return False


def bond_component(open_e, open_n, start):
    """Vertices (y, x) reachable from start through open edges.  open_e has
    shape (H+1, W) (east edges), open_n shape (H, W+1) (north edges)."""
    oe = np.asarray(open_e, bool)
    on = np.asarray(open_n, bool)
    H1, W = oe.shape
    H, W1 = on.shape
    assert H1 == H + 1 and W1 == W + 1
    seen = {tuple(start)}
    q = deque(seen)
    while q:
        y, x = q.popleft()
        if x + 1 <= W and oe[y, x] and (y, x + 1) not in seen:
            seen.add((y, x + 1))
            q.append((y, x + 1))
        if x - 1 >= 0 and oe[y, x - 1] and (y, x - 1) not in seen:
            seen.add((y, x - 1))
            q.append((y, x - 1))
        if y + 1 <= H and on[y, x] and (y + 1, x) not in seen:
            seen.add((y + 1, x))
            q.append((y + 1, x))
        if y - 1 >= 0 and on[y - 1, x] and (y - 1, x) not in seen:
            seen.add((y - 1, x))
            q.append((y - 1, x))
    return seen


def bond_crosses(open_e, open_n, direction="h"):
    oe = np.asarray(open_e, bool)
    on = np.asarray(open_n, bool)
    if direction == "v":
        oe, on = on.T.copy(), oe.T.copy()
    H1, W = oe.shape
    for y in range(H1):
        if any(x == W for _, x in bond_component(oe, on, (y, 0))):
            return True
    return False


def bond_shortest(open_e, open_n):
    """Edge count of a shortest left-right open path, or -1."""
    oe = np.asarray(open_e, bool)
    on = np.asarray(open_n, bool)
    H1, W = oe.shape
    H = H1 - 1
    dist = {(y, 0): 0 for y in range(H1)}
    q = deque(dist)
    best = -1
    while q:
        y, x = q.popleft()
        d = dist[(y, x)]
        if x == W:
            best = d
            break
        nbrs = []
        if x + 1 <= W and oe[y, x]:
            nbrs.append((y, x + 1))
        if x - 1 >= 0 and oe[y, x - 1]:
            nbrs.append((y, x - 1))
        if y + 1 <= H and on[y, x]:
            nbrs.append((y + 1, x))
        if y - 1 >= 0 and on[y - 1, x]:
            nbrs.append((y - 1, x))
        for v in nbrs:
            if v not in dist:
                dist[v] = d + 1
                q.append(v)
    return best


def count_origin_trees(n):
    """Trees with n vertices embedded in Z^2 containing the origin, counted
    as (vertex set, edge set) pairs: enumerate connected origin sets by
    repeated neighbour growth, then count their tree subgraphs by trying
    every (n-1)-subset of induced edges."""
    shapes = {frozenset([(0, 0)])}
    for _ in range(n - 1):
        grown = set()
        for s in shapes:
            for x, y in s:
                for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                    if nb not in s:
                        grown.add(s | {nb})
        shapes = grown
    total = 0
    for s in shapes:
        verts = sorted(s)
        edges = [
            (a, b)
            for a, b in combinations(verts, 2)
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1
        ]
        for tree in combinations(edges, n - 1):
            adj = {v: [] for v in verts}
            for a, b in tree:
                adj[a].append(b)
                adj[b].append(a)
            seen = {verts[0]}
            stack = [verts[0]]
            while stack:
                for u in adj[stack.pop()]:
                    if u not in seen:
                        seen.add(u)
                        stack.append(u)
            if len(seen) == n:
                total += 1
    return total


def count_origin_cycles(length):
    """Cycles of the given length on the half-integer grid surrounding the
    origin.  Doubled coordinates (vertices are odd pairs); a cycle is listed
    once by anchoring at its minimal vertex and fixing the orientation so the
    second vertex precedes the last.  Winding is read off signed crossings of
    the positive x-axis.  Practical for length <= 8."""
    assert length % 2 == 0 and length >= 4
    half = length  # doubled-coordinate radius bound for the search box
    odd = range(-half + 1, half + 1, 2)
    box = [(a, b) for a in odd for b in odd]
    steps = ((2, 0), (-2, 0), (0, 2), (0, -2))
    total = 0

    def winds(cycle):
        w = 0
        for (x0, y0), (x1, y1) in zip(cycle, cycle[1:] + cycle[:1]):
            if x0 == x1 and x0 > 0 and {y0, y1} == {-1, 1}:
                w += 1 if y1 > y0 else -1
        return w

    for s in box:
        stack = [[s]]
        while stack:
            path = stack.pop()
            v = path[-1]
            if len(path) == length:
                if (
                    abs(v[0] - s[0]) + abs(v[1] - s[1]) == 2
                    and path[1] < path[-1]
                    and winds(path) != 0
                ):
                    total += 1
                continue
            for dx, dy in steps:
                u = (v[0] + dx, v[1] + dy)
                if u >= s and u not in path and abs(u[0]) <= half and abs(u[1]) <= half:
                    stack.append(path + [u])
    return total


def max_l1_separated(vertices, k):
    """Size of a largest subset with pairwise L1 distance >= k (brute force,
    fine for a dozen vertices)."""
    vs = sorted(set(map(tuple, vertices)))
    for r in range(len(vs), 0, -1):
        for sub in combinations(vs, r):
            if all(
                abs(a[0] - b[0]) + abs(a[1] - b[1]) >= k
                for a, b in combinations(sub, 2)
            ):
                return r
    return 0
