"""Discrete Voronoi percolation on a thinned integer lattice.

Each lattice point carries a ternary value: 0 (not a site), +1 (site, open
cell), -1 (site, closed cell).  The sites induce a Voronoi tiling; cells are
weakly adjacent when they share at least one point and strongly adjacent when
they share a one-dimensional edge -- the two notions differ exactly where four
or more cells meet at a vertex, which is common on the integer lattice.

All geometric decisions are exact.  The primitive is one-dimensional: along
the perpendicular bisector of a site pair (or along a query segment) the
comparison "closer to s than to z" is affine in the parameter, so adjacency
and ownership reduce to feasibility of systems of rational half-lines, done
in int64 with magnitudes audited to stay well inside the exact range.  The
tiling is clipped to the sampled (padded) box, which keeps every feasibility
interval bounded.  A squared-distance transform of the site mask yields
certified locality radii: candidate pairs beyond the local reach are pruned,
small constraint stencils are attempted first, and a per-pair certificate
(the feasible segment fits in a ball that the stencil fully covers) triggers
escalation to a globally sufficient stencil only where needed.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .lattice import Rect
from .sample import Configuration, ModelParams, sample_voronoi_field


@dataclass
class VoronoiTiling:
    """Voronoi tiling of the selected sites in a padded box.

    Cells are the Voronoi regions of the finite site set, intersected with
    the box.  `complete` certifies that every point of the inner window is
    strictly within `guard` of a site, which makes ownership decisions in
    the window agree with the tiling of the full infinite lattice field.
    """

    box: Rect
    inner: Rect
    guard: int
    sites: np.ndarray  # (n, 2) int64, row-major by (y, x)
    states: np.ndarray  # (n,) int8, +1 open / -1 closed
    complete: bool
    strong_pairs: np.ndarray  # (m, 2) int32 site ids, i < j, lexicographic
    weak_pairs: np.ndarray
    d2_grid: np.ndarray = field(repr=False, default=None)  # squared nearest-site distance
    _adj: dict = field(repr=False, default_factory=dict)

    def n_sites(self) -> int:
        return len(self.sites)

    def adjacency(self, mode: str) -> dict:
        """site id -> sorted neighbor ids."""
        if mode not in self._adj:
            pairs = self.strong_pairs if mode == "strong" else self.weak_pairs
            adj = {i: [] for i in range(self.n_sites())}
            for a, b in pairs.tolist():
                adj[a].append(b)
                adj[b].append(a)
            self._adj[mode] = {k: sorted(v) for k, v in adj.items()}
        return self._adj[mode]


@dataclass
class CellPath:
    sites: list  # site ids
    mode: str  # "strong" | "weak"


# ---------------------------------------------------------------------------
# exact scalar reference (arbitrary precision; the oracle in tests and the
# fallback for degenerate scales)


def _pair_constraints_all(sites, z1, z2, box_bounds):
    """Constraints for the bisector of (z1, z2) against every other site,
    parameterized as x(t) = (M + 2 t d) / 2 with M = z1 + z2, d = perp(z2-z1).
    Each constraint is (A, B) meaning A + tB (>|>=) 0."""
    z1x, z1y = z1
    z2x, z2y = z2
    Mx, My = z1x + z2x, z1y + z2y
    dx, dy = -(z2y - z1y), z2x - z1x
    cons = []
    for sx, sy in sites:
        if (sx, sy) == (z1x, z1y) or (sx, sy) == (z2x, z2y):
            continue
        A = Mx * (z1x - sx) + My * (z1y - sy) + sx * sx + sy * sy - z1x * z1x - z1y * z1y
        B = 2 * (dx * (z1x - sx) + dy * (z1y - sy))
        cons.append((A, B))
    X0, Y0, X1, Y1 = box_bounds
    cons_box = [
        (Mx - 2 * X0, 2 * dx),
        (2 * X1 - Mx, -2 * dx),
        (My - 2 * Y0, 2 * dy),
        (2 * Y1 - My, -2 * dy),
    ]
    return cons, cons_box


def _feasible_mixed(cons_sites, cons_box, strict_sites: bool) -> bool:
    lo = hi = None
    lo_strict = hi_strict = False
    pool = [(c, strict_sites) for c in cons_sites] + [(c, False) for c in cons_box]
    for (A, B), strict in pool:
        if B == 0:
            if A < 0 or (strict and A == 0):
                return False
            continue
        t = Fraction(-A, B)
        if B > 0:
            if lo is None or t > lo or (t == lo and strict):
                lo, lo_strict = t, strict
        else:
            if hi is None or t < hi or (t == hi and strict):
                hi, hi_strict = t, strict
    if lo is None or hi is None:
        return True
    if lo < hi:
        return True
    return lo == hi and not lo_strict and not hi_strict


def pair_adjacency_exact(sites, z1, z2, box_bounds) -> tuple[bool, bool]:
    """(strong, weak) adjacency of two sites against the full site list."""
    cons, cons_box = _pair_constraints_all(sites, z1, z2, box_bounds)
    strong = _feasible_mixed(cons, cons_box, strict_sites=True)
    weak = _feasible_mixed(cons, cons_box, strict_sites=False)
    return strong, weak


# ---------------------------------------------------------------------------
# vectorized exact feasibility


def _tournament_max(num, den, strict):
    """Row-wise max of fractions num/den (den >= 0; den = 0 encodes an
    infinity of the sign of num).  Strict flags follow the winner; on value
    ties a strict candidate wins, so strictness survives exactly when the
    bound is attained only by strict constraints ... which is what feasibility
    of the closed/open interval needs."""
    while num.shape[1] > 1:
        if num.shape[1] % 2:
            pad_n = np.full((num.shape[0], 1), -1, np.int64)
            pad_d = np.zeros((den.shape[0], 1), np.int64)
            pad_s = np.zeros((strict.shape[0], 1), bool)
            num = np.concatenate([num, pad_n], axis=1)
            den = np.concatenate([den, pad_d], axis=1)
            strict = np.concatenate([strict, pad_s], axis=1)
        n1, n2 = num[:, 0::2], num[:, 1::2]
        d1, d2 = den[:, 0::2], den[:, 1::2]
        s1, s2 = strict[:, 0::2], strict[:, 1::2]
        c1 = n1 * d2
        c2 = n2 * d1
        take2 = (c2 > c1) | ((c2 == c1) & s2)
        num = np.where(take2, n2, n1)
        den = np.where(take2, d2, d1)
        strict = np.where(take2, s2, s1)
    return num[:, 0], den[:, 0], strict[:, 0]


def _tournament_min(num, den, strict):
    n, d, s = _tournament_max(-num, den, strict)
    return -n, d, s


def _interval_strong_weak(A, B, site_mask):
    """Joint strict (strong) and closed (weak) feasibility of
    {A + tB (>|>=) 0} per row; site constraints are strict in strong mode,
    the rest always closed.  Also returns the interval endpoints as
    fractions (shared by both modes) for locality certification."""
    pos = B > 0
    neg = B < 0
    zer = ~pos & ~neg
    dead_w = (zer & (A < 0)).any(axis=1)
    dead_s = (zer & ((A < 0) | (site_mask & (A == 0)))).any(axis=1)

    lon = np.where(pos, -A, np.int64(-1))
    lod = np.where(pos, B, np.int64(0))
    lon, lod, lst = _tournament_max(lon, lod, site_mask & pos)
    hin = np.where(neg, A, np.int64(1))  # -A/B with B < 0 == A / (-B)
    hid = np.where(neg, -B, np.int64(0))
    hin, hid, hst = _tournament_min(hin, hid, site_mask & neg)

    lt = lon * hid < hin * lod
    lt |= (lod == 0) & (hid == 0) & (lon < 0) & (hin > 0)
    eq = (lon * hid == hin * lod) & (lod > 0) & (hid > 0)
    feas_w = ~dead_w & (lt | eq)
    feas_s = ~dead_s & (lt | (eq & ~lst & ~hst))
    return feas_s, feas_w, lon, lod, hin, hid


def _stencil_offsets(c: int) -> np.ndarray:
    """Offsets of the closed Euclidean disc of radius c, origin excluded.
    All locality arguments are in the Euclidean metric, so the square's
    corners would be dead weight."""
    dy, dx = np.mgrid[-c : c + 1, -c : c + 1]
    off = np.stack([dx.ravel(), dy.ravel()], axis=1).astype(np.int64)
    keep = (off[:, 0] != 0) | (off[:, 1] != 0)
    keep &= off[:, 0] ** 2 + off[:, 1] ** 2 <= c * c
    return off[keep]


def _box_fracs(z1s, z2s, box_bounds):
    """Box-clipping bounds on the bisector parameter as float (exact: the
    numerators/denominators are modest integers, and only 4 per pair)."""
    X0, Y0, X1, Y1 = box_bounds
    Mx = (z1s[:, 0] + z2s[:, 0]).astype(np.float64)
    My = (z1s[:, 1] + z2s[:, 1]).astype(np.float64)
    dx = -(z2s[:, 1] - z1s[:, 1]).astype(np.float64)
    dy = (z2s[:, 0] - z1s[:, 0]).astype(np.float64)
    lo = np.full(len(z1s), -np.inf)
    hi = np.full(len(z1s), np.inf)
    for bA, bB in (
        (Mx - 2 * X0, 2 * dx),
        (2 * X1 - Mx, -2 * dx),
        (My - 2 * Y0, 2 * dy),
        (2 * Y1 - My, -2 * dy),
    ):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -bA / bB
        lo = np.where(bB > 0, np.maximum(lo, t), lo)
        hi = np.where(bB < 0, np.minimum(hi, t), hi)
    return lo, hi


def _exact_rows(A, B, present, z1s, z2s, box_bounds, c):
    """Integer-exact strong/weak feasibility plus locality certificate for a
    (small) block of rows; appends the box constraints explicitly."""
    X0, Y0, X1, Y1 = box_bounds
    n = len(z1s)
    M = z1s + z2s
    d = np.stack([-(z2s[:, 1] - z1s[:, 1]), z2s[:, 0] - z1s[:, 0]], axis=1)
    bA = np.stack([M[:, 0] - 2 * X0, 2 * X1 - M[:, 0], M[:, 1] - 2 * Y0, 2 * Y1 - M[:, 1]], axis=1)
    bB = np.stack([2 * d[:, 0], -2 * d[:, 0], 2 * d[:, 1], -2 * d[:, 1]], axis=1)
    Aa = np.concatenate([A, bA], axis=1)
    Ba = np.concatenate([B, bB], axis=1)
    # a site slot with A = B = 0 is the partner z2 itself (no genuine third
    # site is equidistant along the whole bisector); keep it non-strict
    site_mask = np.concatenate(
        [present & ((A != 0) | (B != 0)), np.zeros((n, 4), bool)], axis=1
    )
    strong, weak, lon, lod, hin, hid = _interval_strong_weak(Aa, Ba, site_mask)
    cert = ~weak  # nothing feasible: final at any stencil size
    f = np.nonzero(weak)[0]
    if f.size:
        ok = np.ones(f.size, bool)
        for nn, dd in ((lon[f], lod[f]), (hin[f], hid[f])):
            # endpoint x(t), t = nn/dd, doubled: 2x = M + 2td; any site still
            # able to cut the segment lies within 2 max|x - z1| of z1, so
            # require |x - z1| <= c/2, i.e. |2x dd - 2 z1 dd|^2 <= c^2 dd^2
            ex = M[f, 0] * dd + 2 * nn * d[f, 0] - 2 * z1s[f, 0] * dd
            ey = M[f, 1] * dd + 2 * nn * d[f, 1] - 2 * z1s[f, 1] * dd
            ok &= (dd > 0) & (ex * ex + ey * ey <= (c * c) * (dd * dd))
        cert[f] = ok
    return strong, weak, cert


def _pairs_kernel(padded_id, pad, box_bounds, z1s, z2s, c: int):
    """Exact strong/weak feasibility for site pairs using a constraint
    stencil of radius c around z1.  padded_id is the site-id grid padded by
    `pad` >= c cells of -1 so stencil gathers need no bounds checks.
    Returns (strong, weak, cert): infeasible answers are final (more
    constraints only shrink intervals); feasible ones are certified when
    the whole feasible segment fits in the ball around z1 whose potential
    competitors the stencil fully covers.

    Constraint coefficients in the s-relative form: with a = z1 - s and
    b = z2 - s, A = a.b and B = 2 (ay bx - ax by); the partner's own slot
    lands on A = B = 0, which is neutral (a genuine third site cannot be
    equidistant along the entire bisector), so no exclusion mask is needed.
    |A|, |B| stay far below 2^31 on any box this path admits, so float64
    keys carry ~1e-10 absolute error at most; the 1e-6 ambiguity band that
    routes near-ties to the integer tournament is orders of magnitude wider.
    """
    X0, Y0 = box_bounds[0], box_bounds[1]
    off = _stencil_offsets(c)
    sx = z1s[:, 0][:, None] + off[None, :, 0]
    sy = z1s[:, 1][:, None] + off[None, :, 1]
    present = padded_id[sy - Y0 + pad, sx - X0 + pad] >= 0
    np.subtract(z1s[:, 0][:, None], sx, out=sx)
    ax = sx
    np.subtract(z1s[:, 1][:, None], sy, out=sy)
    ay = sy
    bx = ax + (z2s[:, 0] - z1s[:, 0])[:, None]
    by = ay + (z2s[:, 1] - z1s[:, 1])[:, None]
    A = ax * bx
    A += ay * by
    B = ay * bx
    B -= ax * by
    B += B
    absent = ~present
    A[absent] = 1
    B[absent] = 0

    # lower bounds are -A/B over B > 0: compute q = A/B once and flip signs
    # after the row reductions instead of materialising -A
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.divide(A, B)
    pos = B > 0
    lo_f = -np.where(pos, q, np.inf).min(axis=1)
    np.less(B, 0, out=pos)
    hi_f = -np.where(pos, q, -np.inf).max(axis=1)
    blo, bhi = _box_fracs(z1s, z2s, box_bounds)
    lo_f = np.maximum(lo_f, blo)
    hi_f = np.minimum(hi_f, bhi)
    dead = ((B == 0) & (A < 0)).any(axis=1)

    with np.errstate(invalid="ignore"):
        gap = hi_f - lo_f
    clear_feas = gap > 1e-6
    clear_infe = (gap < -1e-6) | dead
    amb = ~clear_feas & ~clear_infe

    strong = clear_feas & ~dead
    weak = strong.copy()
    cert = ~weak
    f = np.nonzero(weak & ~amb)[0]
    if f.size:
        # conservative float endpoint check; margin absorbs key error, and a
        # false negative only escalates the pair to a wider exact stencil
        mx = (z1s[f, 0] + z2s[f, 0]) / 2.0 - z1s[f, 0]
        my = (z1s[f, 1] + z2s[f, 1]) / 2.0 - z1s[f, 1]
        ddx = -(z2s[f, 1] - z1s[f, 1]).astype(np.float64)
        ddy = (z2s[f, 0] - z1s[f, 0]).astype(np.float64)
        ok = np.isfinite(lo_f[f]) & np.isfinite(hi_f[f])
        lim = (c / 2.0 - 1e-3) ** 2
        for tt in (lo_f[f], hi_f[f]):
            ex = mx + tt * ddx
            ey = my + tt * ddy
            ok &= ex * ex + ey * ey <= lim
        cert[f] = ok
    if amb.any():
        a = np.nonzero(amb)[0]
        s_a, w_a, c_a = _exact_rows(A[a], B[a], present[a], z1s[a], z2s[a], box_bounds, c)
        strong[a] = s_a
        weak[a] = w_a
        cert[a] = c_a
    return strong, weak, cert


def _reach_threshold(d2: np.ndarray) -> np.ndarray:
    """Grid T with: any two cells sharing a point inside the box satisfy
    |z1 - z2|^2 <= T at both sites.  A shared point x has
    |z1 - z2| <= 2 dist(x, S) <= 2 sqrt(d2(q)) + sqrt(2) for the integer
    point q nearest x, and both sites lie within sqrt(d2(q)) + sqrt(2) of
    q; so each point q broadcasts t(q) = 4 d2 + 2 + 4 ceil(sqrt(2 d2)) to
    a ball of its own radius, done level by level with max filters."""
    cs = np.ceil(np.sqrt(2.0 * d2)).astype(np.int64)
    cs = np.where(cs * cs < 2 * d2, cs + 1, cs)  # exact ceil(sqrt(2 d2))
    t = 4 * d2 + 2 + 4 * cs
    fl = np.sqrt(d2.astype(np.float64)).astype(np.int64)
    fl = np.where((fl + 1) * (fl + 1) <= d2, fl + 1, fl)
    fl = np.where(fl * fl > d2, fl - 1, fl)  # exact floor(sqrt(d2))
    rad = fl + 3  # integer > sqrt(d2) + sqrt(2)
    out = np.full(d2.shape, 2, np.int64)
    for r in np.unique(rad):
        contrib = np.where(rad == r, t, 0)
        out = np.maximum(
            out, ndimage.maximum_filter(contrib, size=2 * int(r) + 1, mode="constant", cval=0)
        )
    return out


def _offsets_lex_positive(max_r2: int) -> np.ndarray:
    r = int(math.isqrt(max(0, max_r2)))
    out = [
        (dx, dy)
        for dy in range(0, r + 1)
        for dx in range(-r, r + 1)
        if dx * dx + dy * dy <= max_r2 and (dy > 0 or (dy == 0 and dx > 0))
    ]
    return np.array(out, np.int64).reshape(-1, 2)


def _candidate_pairs(site_id: np.ndarray, box_bounds, reach: np.ndarray):
    """Site pairs admissible by the local reach bound (lexicographic)."""
    X0, Y0, X1, Y1 = box_bounds
    H, W = site_id.shape
    present = site_id >= 0
    z1_list, z2_list = [], []
    for dx, dy in _offsets_lex_positive(int(reach.max())).tolist():
        r2 = dx * dx + dy * dy
        x0s, x1s = max(0, -dx), min(W, W - dx)
        y0s, y1s = max(0, -dy), min(H, H - dy)
        if x0s >= x1s or y0s >= y1s:
            continue
        a = present[y0s:y1s, x0s:x1s] & (reach[y0s:y1s, x0s:x1s] >= r2)
        b = present[y0s + dy : y1s + dy, x0s + dx : x1s + dx]
        b = b & (reach[y0s + dy : y1s + dy, x0s + dx : x1s + dx] >= r2)
        yy, xx = np.nonzero(a & b)
        if yy.size:
            z1_list.append(np.stack([xx + x0s + X0, yy + y0s + Y0], axis=1))
            z2_list.append(np.stack([xx + x0s + dx + X0, yy + y0s + dy + Y0], axis=1))
    if not z1_list:
        z = np.zeros((0, 2), np.int64)
        return z, z.copy()
    return np.concatenate(z1_list), np.concatenate(z2_list)


def _decide_pairs(site_id, box_bounds, z1s, z2s, r_ceil: int):
    """Strong/weak adjacency of candidate pairs via the stencil ladder."""
    n = len(z1s)
    strong = np.zeros(n, bool)
    weak = np.zeros(n, bool)
    c_full = 2 * r_ceil + 2  # covers every possible competitor ball
    ladder = sorted({min(3, c_full), min(r_ceil + 2, c_full), c_full})
    pad = ladder[-1]
    H, W = site_id.shape
    padded = np.full((H + 2 * pad, W + 2 * pad), -1, np.int64)
    padded[pad : pad + H, pad : pad + W] = site_id
    todo = np.arange(n)
    for c in ladder:
        if todo.size == 0:
            break
        chunk = max(1, 8_000_000 // max(1, (2 * c + 1) ** 2))
        st = np.zeros(todo.size, bool)
        wk = np.zeros(todo.size, bool)
        ce = np.zeros(todo.size, bool)
        for k0 in range(0, todo.size, chunk):
            sl = todo[k0 : k0 + chunk]
            s_, w_, c_ = _pairs_kernel(padded, pad, box_bounds, z1s[sl], z2s[sl], c)
            st[k0 : k0 + chunk] = s_
            wk[k0 : k0 + chunk] = w_
            ce[k0 : k0 + chunk] = c_
        if c == c_full:
            ce[:] = True
        strong[todo[ce]] = st[ce]
        weak[todo[ce]] = wk[ce]
        todo = todo[~ce]
    return strong, weak


def build_tiling(
    field_cfg: Configuration, window: Rect, guard: int, same_state_pairs: bool = False
) -> VoronoiTiling:
    """Voronoi tiling of the sites recorded in a ternary field configuration.

    The field must cover `window` padded by `guard` on all sides.  The
    tiling is complete when every integer point of the window has a site
    within guard - 1, which puts every real point strictly within guard of
    a site; incompleteness is reported, not raised.

    With same_state_pairs=True the adjacency lists are restricted to pairs
    of equal state (open-open / closed-closed), which is all that same-state
    path queries consult; crossing sweeps use this to skip mixed pairs.
    """
    if guard < 2:
        raise ValueError("guard must be >= 2")
    if field_cfg.model != "voronoi":
        raise ValueError("field configuration must come from sample_voronoi_field")
    wx0, wy0, wx1, wy1 = window.int_bounds()
    fx0, fy0, fx1, fy1 = field_cfg.window.int_bounds()
    if not (fx0 <= wx0 - guard and fx1 >= wx1 + guard and fy0 <= wy0 - guard and fy1 >= wy1 + guard):
        raise ValueError("field window does not cover the padded box")
    bx0, by0, bx1, by1 = wx0 - guard, wy0 - guard, wx1 + guard, wy1 + guard
    box = Rect(bx0, by0, bx1, by1)
    f = field_cfg.field[by0 - fy0 : by1 - fy0 + 1, bx0 - fx0 : bx1 - fx0 + 1]
    mask = f != 0
    ys, xs = np.nonzero(mask)
    sites = np.stack([xs + bx0, ys + by0], axis=1).astype(np.int64)
    states = f[ys, xs].astype(np.int8)
    site_id = np.full(mask.shape, -1, np.int64)
    site_id[ys, xs] = np.arange(len(sites))
    empty_pairs = np.zeros((0, 2), np.int32)

    if len(sites) == 0:
        return VoronoiTiling(box, window, guard, sites, states, False, empty_pairs, empty_pairs, None)

    ind = ndimage.distance_transform_edt(~mask, return_distances=False, return_indices=True)
    gy, gx = np.mgrid[0 : mask.shape[0], 0 : mask.shape[1]]
    d2 = (ind[0] - gy).astype(np.int64) ** 2 + (ind[1] - gx).astype(np.int64) ** 2
    inner = d2[wy0 - by0 : wy1 - by0 + 1, wx0 - bx0 : wx1 - bx0 + 1]
    complete = bool(inner.max() <= (guard - 1) ** 2) if inner.size else False
    max_d2 = int(d2.max())
    r_ceil = math.isqrt(max_d2)
    if r_ceil * r_ceil < max_d2:
        r_ceil += 1

    box_bounds = (bx0, by0, bx1, by1)
    reach = _reach_threshold(d2)
    z1s, z2s = _candidate_pairs(site_id, box_bounds, reach)
    if same_state_pairs and len(z1s):
        keep = f[z1s[:, 1] - by0, z1s[:, 0] - bx0] == f[z2s[:, 1] - by0, z2s[:, 0] - bx0]
        z1s, z2s = z1s[keep], z2s[keep]

    maxabs = max(abs(bx0), abs(by0), abs(bx1), abs(by1))
    if 2 * r_ceil + 2 <= 256 and maxabs <= 2**15 and max(bx1 - bx0, by1 - by0) <= 1024:
        strong, weak = _decide_pairs(site_id, box_bounds, z1s, z2s, r_ceil)
    else:
        # degenerate scale: arbitrary-precision path, quadratic but exact
        slist = [tuple(map(int, s)) for s in sites]
        strong = np.zeros(len(z1s), bool)
        weak = np.zeros(len(z1s), bool)
        for k in range(len(z1s)):
            strong[k], weak[k] = pair_adjacency_exact(
                slist, tuple(map(int, z1s[k])), tuple(map(int, z2s[k])), box_bounds
            )

    sid1 = site_id[z1s[:, 1] - by0, z1s[:, 0] - bx0]
    sid2 = site_id[z2s[:, 1] - by0, z2s[:, 0] - bx0]
    lo = np.minimum(sid1, sid2)
    hi = np.maximum(sid1, sid2)
    weak |= strong

    def _pairs(maskv):
        p = np.stack([lo[maskv], hi[maskv]], axis=1).astype(np.int32)
        return p[np.lexsort((p[:, 1], p[:, 0]))]

    return VoronoiTiling(
        box, window, guard, sites, states, complete, _pairs(strong), _pairs(weak), d2
    )


def sample_tiling(
    params: ModelParams, window: Rect, guard: int, seed: int, index: int,
    same_state_pairs: bool = False,
) -> VoronoiTiling:
    """Sample the ternary field on the padded box and build the tiling."""
    wx0, wy0, wx1, wy1 = window.int_bounds()
    fw = Rect(wx0 - guard, wy0 - guard, wx1 + guard, wy1 + guard)
    return build_tiling(sample_voronoi_field(params, fw, seed, index), window, guard, same_state_pairs)


def sample_tiling_complete(
    params: ModelParams, window: Rect, guard: int, seed: int, index: int,
    max_guard: int = 48, same_state_pairs: bool = False,
) -> VoronoiTiling:
    """Like sample_tiling, doubling the guard until the tiling is complete.
    The field values at a given point do not depend on the window, so the
    escalated tiling is a consistent extension of the smaller one."""
    g = guard
    while True:
        t = sample_tiling(params, window, g, seed, index, same_state_pairs)
        if t.complete:
            return t
        if g >= max_guard:
            raise RuntimeError(f"no complete tiling up to guard {max_guard}")
        g = min(2 * g, max_guard)


def disjunction_sweep(
    params: ModelParams, window: Rect, guard: int, seed: int, indices
) -> np.ndarray:
    """Crossing disjunction over many sampled tilings (one bool per index).
    At full site density the unit-square shortcut is used; otherwise each
    tiling is built exactly, escalating the guard if completeness fails."""
    if params.pi == 1.0:
        return full_grid_disjunction_batch(params, window, seed, indices)
    out = np.zeros(len(indices), bool)
    for k, i in enumerate(indices):
        t = sample_tiling_complete(params, window, guard, seed, int(i), same_state_pairs=True)
        out[k] = crossing_disjunction(t, window)
    return out


# ---------------------------------------------------------------------------
# ownership and point states


def owners(t: VoronoiTiling, x) -> list:
    """Site ids of all nearest sites of the rational point x = (px, py)."""
    if t.n_sites() == 0:
        return []
    px, py = Fraction(x[0]), Fraction(x[1])
    q = math.lcm(px.denominator, py.denominator)
    ax, ay = int(px * q), int(py * q)
    maxc = int(np.abs(t.sites).max())
    if q * maxc + max(abs(ax), abs(ay)) < 2**30:
        dx = t.sites[:, 0] * q - ax
        dy = t.sites[:, 1] * q - ay
        d2 = dx * dx + dy * dy
        return np.nonzero(d2 == d2.min())[0].tolist()
    d2 = [(int(vx) * q - ax) ** 2 + (int(vy) * q - ay) ** 2 for vx, vy in t.sites.tolist()]
    best = min(d2)
    return [i for i, v in enumerate(d2) if v == best]


def point_open(t: VoronoiTiling, x) -> str:
    """'open' | 'closed' | 'both' for a rational point in the window."""
    if not t.complete:
        raise ValueError("tiling is incomplete")
    st = {int(t.states[i]) for i in owners(t, x)}
    if st == {1}:
        return "open"
    if st == {-1}:
        return "closed"
    return "both"


def point_open_scan(t: VoronoiTiling, x) -> str:
    """Restated criterion: open iff some open site has no strictly closer
    closed site, and symmetrically.  Cross-validates point_open."""
    px, py = Fraction(x[0]), Fraction(x[1])
    d2 = [(Fraction(int(sx)) - px) ** 2 + (Fraction(int(sy)) - py) ** 2 for sx, sy in t.sites]
    op = cl = False
    for i, dd in enumerate(d2):
        if t.states[i] == 1 and not any(
            d2[j] < dd and t.states[j] == -1 for j in range(len(d2))
        ):
            op = True
        if t.states[i] == -1 and not any(
            d2[j] < dd and t.states[j] == 1 for j in range(len(d2))
        ):
            cl = True
    if op and cl:
        return "both"
    return "open" if op else "closed"


# ---------------------------------------------------------------------------
# cell / rectangle incidence (exact)


def _segment_owner_feasible(t: VoronoiTiling, z_idx: np.ndarray, p0, p1) -> np.ndarray:
    """Per site id in z_idx: does V(z) meet the closed segment p0-p1?
    q(u) = p0 + u (p1 - p0), u in [0, 1]; |q-s|^2 - |q-z|^2 is affine in u.
    Valid competitors all lie within sqrt(max d2) + sqrt(2) of the segment's
    bounding box, since any point of the box is that close to its nearest
    site; sites outside that band cannot own segment points either."""
    if z_idx.size == 0:
        return np.zeros(0, bool)
    (x0, y0), (x1, y1) = p0, p1
    rad = math.isqrt(int(t.d2_grid.max())) + 2
    sx, sy = t.sites[:, 0], t.sites[:, 1]
    band = (
        (sx >= min(x0, x1) - rad)
        & (sx <= max(x0, x1) + rad)
        & (sy >= min(y0, y1) - rad)
        & (sy <= max(y0, y1) + rad)
    )
    cx = sx[np.nonzero(band)[0]][None, :]
    cy = sy[np.nonzero(band)[0]][None, :]
    zx = sx[z_idx][:, None]
    zy = sy[z_idx][:, None]
    dx, dy = x1 - x0, y1 - y0
    # z's own column gives A = B = 0, f == 0 >= 0: neutral, so no self mask
    A = (x0 - cx) ** 2 + (y0 - cy) ** 2 - (x0 - zx) ** 2 - (y0 - zy) ** 2
    B = 2 * (dx * (zx - cx) + dy * (zy - cy))

    # float screen with a relative ambiguity band: a clear verdict needs a
    # gap far above the roundoff of the participating keys, everything else
    # re-runs through the integer tournament
    with np.errstate(divide="ignore", invalid="ignore"):
        kf = np.divide(-A.astype(np.float64), B.astype(np.float64))
    lo_f = np.maximum(np.where(B > 0, kf, -np.inf).max(axis=1), 0.0)
    hi_f = np.minimum(np.where(B < 0, kf, np.inf).min(axis=1), 1.0)
    dead = ((B == 0) & (A < 0)).any(axis=1)
    gap = hi_f - lo_f
    thr = 1e-9 * (1.0 + np.abs(lo_f) + np.abs(hi_f))
    weak = (gap > thr) & ~dead
    amb = ~weak & ~((gap < -thr) | dead)
    if amb.any():
        a = np.nonzero(amb)[0]
        nrow = a.size
        Aa = np.concatenate(
            [A[a], np.zeros((nrow, 1), np.int64), np.ones((nrow, 1), np.int64)], axis=1
        )
        Ba = np.concatenate(
            [B[a], np.ones((nrow, 1), np.int64), np.full((nrow, 1), -1, np.int64)], axis=1
        )
        _, w_a, _, _, _, _ = _interval_strong_weak(Aa, Ba, np.zeros(Aa.shape, bool))
        weak[a] = w_a
    return weak


def cells_meeting_segment(t: VoronoiTiling, p0, p1) -> np.ndarray:
    """Boolean per site: cell meets the closed segment p0-p1 (integer ends)."""
    sx, sy = t.sites[:, 0], t.sites[:, 1]
    rad = math.isqrt(int(t.d2_grid.max())) + 2
    near = (
        (sx >= min(p0[0], p1[0]) - rad)
        & (sx <= max(p0[0], p1[0]) + rad)
        & (sy >= min(p0[1], p1[1]) - rad)
        & (sy <= max(p0[1], p1[1]) + rad)
    )
    out = np.zeros(t.n_sites(), bool)
    cand = np.nonzero(near)[0]
    if cand.size:
        out[cand[_segment_owner_feasible(t, cand, p0, p1)]] = True
    return out


def cells_meeting_rect(t: VoronoiTiling, r: Rect) -> np.ndarray:
    """Boolean per site: does the (convex) cell intersect r?  True iff the
    site is in r or the cell meets one of the four boundary segments."""
    x0, y0, x1, y1 = r.int_bounds()
    sx, sy = t.sites[:, 0], t.sites[:, 1]
    out = (sx >= x0) & (sx <= x1) & (sy >= y0) & (sy <= y1)
    rad = math.isqrt(int(t.d2_grid.max())) + 2
    for p0, p1 in (
        ((x0, y0), (x1, y0)),
        ((x1, y0), (x1, y1)),
        ((x1, y1), (x0, y1)),
        ((x0, y1), (x0, y0)),
    ):
        near = (
            (sx >= min(p0[0], p1[0]) - rad)
            & (sx <= max(p0[0], p1[0]) + rad)
            & (sy >= min(p0[1], p1[1]) - rad)
            & (sy <= max(p0[1], p1[1]) + rad)
        )
        cand = np.nonzero(near & ~out)[0]
        if cand.size:
            out[cand[_segment_owner_feasible(t, cand, p0, p1)]] = True
    return out


# ---------------------------------------------------------------------------
# crossings and clusters on the cell graph


def cell_crossing(
    t: VoronoiTiling,
    r: Rect,
    direction: str = "h",
    state: int = 1,
    mode: str = "weak",
    witness: bool = True,
):
    """Crossing of r by a path of same-state cells in the given adjacency.

    End cells must meet the two relevant sides of r and every cell of the
    path must intersect r.  r must lie inside the tiling window (the band
    arguments above certify incidence tests only there).  Returns
    (crosses, CellPath | None); pass witness=False to skip path recovery.
    """
    if t.n_sites() == 0:
        return False, None
    x0, y0, x1, y1 = r.int_bounds()
    ix0, iy0, ix1, iy1 = t.inner.int_bounds()
    if not (ix0 <= x0 and iy0 <= y0 and x1 <= ix1 and y1 <= iy1):
        raise ValueError("query rectangle must lie inside the tiling window")
    good = cells_meeting_rect(t, r) & (t.states == state)
    if direction == "h":
        a = cells_meeting_segment(t, (x0, y0), (x0, y1)) & good
        b = cells_meeting_segment(t, (x1, y0), (x1, y1)) & good
    else:
        a = cells_meeting_segment(t, (x0, y0), (x1, y0)) & good
        b = cells_meeting_segment(t, (x0, y1), (x1, y1)) & good
    if not a.any() or not b.any():
        return False, None
    pairs = t.strong_pairs if mode == "strong" else t.weak_pairs
    ok = good[pairs[:, 0]] & good[pairs[:, 1]]
    e = pairs[ok]
    if not witness:
        n = t.n_sites()
        g = coo_matrix((np.ones(len(e), np.int8), (e[:, 0], e[:, 1])), shape=(n, n))
        _, lab = connected_components(g, directed=False)
        return bool(np.intersect1d(lab[a], lab[b]).size), None
    adj = {}
    for u, v in e.tolist():
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    parent = {}
    queue = deque()
    for s in sorted(np.nonzero(a)[0].tolist()):
        parent[s] = None
        queue.append(s)
    while queue:
        u = queue.popleft()
        if b[u]:
            path = [u]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            path.reverse()
            return True, CellPath(path, mode)
        for v in adj.get(u, ()):
            if v not in parent:
                parent[v] = u
                queue.append(v)
    return False, None


def weak_open_crossing(t: VoronoiTiling, r: Rect, direction: str = "h", witness: bool = True):
    return cell_crossing(t, r, direction, state=1, mode="weak", witness=witness)


def strong_closed_crossing(t: VoronoiTiling, r: Rect, direction: str = "v", witness: bool = True):
    return cell_crossing(t, r, direction, state=-1, mode="strong", witness=witness)


def _labels_touch(pairs, good, a, b, n) -> bool:
    """Do the `good` components of the pair graph join a to b?"""
    if not a.any() or not b.any():
        return False
    ok = good[pairs[:, 0]] & good[pairs[:, 1]]
    e = pairs[ok]
    g = coo_matrix((np.ones(len(e), np.int8), (e[:, 0], e[:, 1])), shape=(n, n))
    _, lab = connected_components(g, directed=False)
    return bool(np.intersect1d(lab[a], lab[b]).size)


def crossing_disjunction(t: VoronoiTiling, r: Rect) -> bool:
    """Weak open horizontal crossing OR strong closed vertical crossing."""
    if t.n_sites() == 0:
        return False
    x0, y0, x1, y1 = r.int_bounds()
    meets = cells_meeting_rect(t, r)
    n = t.n_sites()
    op = meets & (t.states == 1)
    west = cells_meeting_segment(t, (x0, y0), (x0, y1)) & op
    east = cells_meeting_segment(t, (x1, y0), (x1, y1)) & op
    if _labels_touch(t.weak_pairs, op, west, east, n):
        return True
    cl = meets & (t.states == -1)
    south = cells_meeting_segment(t, (x0, y0), (x1, y0)) & cl
    north = cells_meeting_segment(t, (x0, y1), (x1, y1)) & cl
    return _labels_touch(t.strong_pairs, cl, south, north, n)


def cluster_of_origin(t: VoronoiTiling, mode: str = "strong", state: int = 1) -> set:
    """Site ids of the mode/state component of the cell(s) containing the
    origin.  If the origin lies on a cell boundary every owner whose state
    matches seeds the search."""
    seeds = [i for i in owners(t, (0, 0)) if int(t.states[i]) == state]
    adj = t.adjacency(mode)
    seen = set(seeds)
    queue = deque(seeds)
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen and int(t.states[v]) == state:
                seen.add(v)
                queue.append(v)
    return seen


def strong_cluster_of_origin(t: VoronoiTiling) -> set:
    return cluster_of_origin(t, "strong", 1)


# ---------------------------------------------------------------------------
# full-density shortcut: with every lattice point a site the cells are unit
# squares, strong adjacency is the 4-neighbour and weak the 8-neighbour grid
# relation (proved against the exact kernel in the test suite), so crossing
# sweeps reduce to batched label runs on the ternary field


def full_grid_disjunction_batch(params: ModelParams, window: Rect, seed: int, indices) -> np.ndarray:
    from .crossing import S4, S8, stack_crossing_mask

    if params.pi != 1.0:
        raise ValueError("full-grid shortcut requires pi = 1")
    x0, y0, x1, y1 = window.int_bounds()
    indices = np.asarray(indices)
    out = np.zeros(indices.shape, bool)
    for k0 in range(0, len(indices), 256):
        idx = indices[k0 : k0 + 256]
        fields = np.stack(
            [sample_voronoi_field(params, window, seed, int(i)).field for i in idx]
        )
        op = fields == 1
        cl = fields == -1
        west = np.zeros_like(op)
        west[:, :, 0] = True
        east = np.zeros_like(op)
        east[:, :, -1] = True
        south = np.zeros_like(op)
        south[:, 0, :] = True
        north = np.zeros_like(op)
        north[:, -1, :] = True
        h_open = stack_crossing_mask(op, S8, op & west, op & east)
        v_closed = stack_crossing_mask(cl, S4, cl & south, cl & north)
        out[k0 : k0 + 256] = h_open | v_closed
    return out


# ---------------------------------------------------------------------------
# serialization


def tiling_to_json(t: VoronoiTiling) -> str:
    wx0, wy0, wx1, wy1 = t.inner.int_bounds()
    obj = {
        "window": [wx0, wy0, wx1, wy1],
        "guard": t.guard,
        "complete": t.complete,
        "sites": [[int(x), int(y), int(s)] for (x, y), s in zip(t.sites.tolist(), t.states.tolist())],
        "strong": [[int(a), int(b)] for a, b in t.strong_pairs.tolist()],
        "weak": [[int(a), int(b)] for a, b in t.weak_pairs.tolist()],
    }
    return json.dumps(obj, separators=(",", ":"), sort_keys=True)


def tiling_from_json(s: str) -> dict:
    return json.loads(s)
