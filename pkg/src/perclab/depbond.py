"""Dependent bond states driven by a signed field on the half-integer grid.

A weight function assigns odd weight to the origin and even weights to
finitely many half-integer offsets, symmetric under the dihedral group of the
square.  An edge is open iff the weighted sum of +-1 signs around its
midpoint is positive; the total weight being odd rules out ties, and the
symmetry makes the model self-dual at sign bias 1/2 in the same way the
independent model is at p = 1/2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .lattice import Edge, Rect
from .sample import (
    CH_SIGN,
    BondGrid,
    Configuration,
    ModelParams,
    key_u53_vec,
    p_threshold,
)


@dataclass(frozen=True)
class WeightFunction:
    """Finite symmetric weight on half-integer offsets.

    offsets/weights are kept in doubled coordinates (2dx, 2dy are ints) to
    stay exact.  The origin weight is odd, all others even, the support is
    dihedrally symmetric with equal weights along each orbit, and the total
    is therefore odd -- so the weighted sign sum is never zero.
    """

    doubled_offsets: tuple  # ((2dx, 2dy), ...)
    weights: tuple  # ints, aligned with doubled_offsets

    def __post_init__(self):
        seen = {}
        for (a, b), w in zip(self.doubled_offsets, self.weights):
            if not (isinstance(a, int) and isinstance(b, int) and isinstance(w, int)):
                raise ValueError("offsets and weights must be integers")
            if (a, b) in seen:
                raise ValueError(f"duplicate offset {(a, b)}")
            seen[(a, b)] = w
        if seen.get((0, 0), 0) % 2 == 0:
            raise ValueError("origin weight must be odd")
        for (a, b), w in seen.items():
            if (a, b) != (0, 0) and w % 2:
                raise ValueError(f"off-origin weight at {(a, b)} must be even")
            for sym in _dihedral(a, b):
                if seen.get(sym) != w:
                    raise ValueError(f"weights not symmetric at {(a, b)} vs {sym}")
        if sum(self.weights) % 2 == 0:
            raise ValueError("total weight must be odd")

    @property
    def radius(self) -> Fraction:
        """sup-norm radius of the support, in lattice units."""
        return Fraction(max(max(abs(a), abs(b)) for a, b in self.doubled_offsets), 2)

    def dependence_range(self) -> Fraction:
        """Edges with midpoints farther apart than this are independent."""
        return 2 * self.radius

    def to_json(self) -> str:
        items = sorted(zip(self.doubled_offsets, self.weights))
        return json.dumps([[a, b, w] for (a, b), w in items])

    @classmethod
    def from_json(cls, s: str) -> "WeightFunction":
        items = json.loads(s)
        return cls(tuple((int(a), int(b)) for a, b, _ in items), tuple(int(w) for _, _, w in items))

    @classmethod
    def from_quotient(cls, quotient: dict) -> "WeightFunction":
        """Build from one representative per dihedral orbit:
        {(2dx, 2dy): weight}."""
        full = {}
        for (a, b), w in quotient.items():
            for sym in _dihedral(a, b):
                full[sym] = w
        offs = tuple(sorted(full))
        return cls(offs, tuple(full[o] for o in offs))


def _dihedral(a: int, b: int):
    return {
        (a, b), (-a, b), (a, -b), (-a, -b),
        (b, a), (-b, a), (b, -a), (-b, -a),
    }


def plus_weight() -> WeightFunction:
    """The small test weight: 1 at the origin, 2 on the four offsets at
    distance 1/2.  Total 9, dependence range 2."""
    return WeightFunction.from_quotient({(0, 0): 1, (1, 0): 2})


def independent_weight() -> WeightFunction:
    """Weight supported on the origin only: the edge copies its own sign, so
    the model degenerates to independent bonds at p = sign bias."""
    return WeightFunction.from_quotient({(0, 0): 1})


def edge_midpoint_doubled(e: Edge) -> tuple[int, int]:
    """Edge midpoint in doubled coordinates (always integers)."""
    x2, y2 = int(2 * Fraction(e.x)), int(2 * Fraction(e.y))
    return (x2 + 1, y2) if e.d == "E" else (x2, y2 + 1)


def edge_state_from_signs(w: WeightFunction, signs: dict, e: Edge) -> bool:
    """Scalar reference: open iff the weighted sign sum at the midpoint is
    positive.  `signs` maps doubled coordinates to +-1."""
    mx, my = edge_midpoint_doubled(e)
    tot = 0
    for (a, b), wt in zip(w.doubled_offsets, w.weights):
        tot += wt * signs[(mx + a, my + b)]
    assert tot % 2 != 0
    return tot > 0


def sample_dependent_bond(
    params: ModelParams, window: Rect, seed: int, index: int, w: WeightFunction | None = None
) -> Configuration:
    """Dependent bond configuration on `window`.

    The underlying signs live on the half-integer grid (doubled coordinates),
    are +1 with probability params.p, and are shared between nearby edges;
    each edge applies the weight around its midpoint.  Edge states are
    produced by accumulating shifted views of one sign array.
    """
    if w is None:
        w = plus_weight()
    x0, y0, x1, y1 = window.int_bounds()
    rad2 = int(2 * w.radius)
    # doubled-coordinate bounding box of all sign cells any window edge reads
    dx0, dy0 = 2 * x0 - rad2, 2 * y0 - rad2
    dx1, dy1 = 2 * x1 + rad2, 2 * y1 + rad2
    th = np.uint64(p_threshold(params.p))
    ys, xs = np.mgrid[dy0 : dy1 + 1, dx0 : dx1 + 1]
    signs = np.where(key_u53_vec(seed, index, CH_SIGN, xs, ys) < th, np.int64(1), np.int64(-1))

    def edge_sums(mx0: int, my0: int, nx: int, ny: int) -> np.ndarray:
        """Weighted sums at midpoints (mx0+2i, my0+2j), i<nx, j<ny."""
        acc = np.zeros((ny, nx), np.int64)
        for (a, b), wt in zip(w.doubled_offsets, w.weights):
            cx = mx0 + a - dx0
            cy = my0 + b - dy0
            acc += wt * signs[cy : cy + 2 * ny : 2, cx : cx + 2 * nx : 2]
        return acc

    we, he = (x1 - x0), (y1 - y0) + 1
    sums_e = edge_sums(2 * x0 + 1, 2 * y0, we, he) if we else np.zeros((he, 0), np.int64)
    wn, hn = (x1 - x0) + 1, (y1 - y0)
    sums_n = edge_sums(2 * x0, 2 * y0 + 1, wn, hn) if hn else np.zeros((0, wn), np.int64)
    assert not (sums_e % 2 == 0).any() and not (sums_n % 2 == 0).any()
    params = replace(params, weight_json=w.to_json())
    return Configuration(
        "depbond",
        window,
        seed,
        index,
        params,
        bonds=BondGrid(sums_e > 0, sums_n > 0),
        dependence_range=w.dependence_range(),
    )


def depbond_crossing_batch(
    params: ModelParams, r: Rect, seed: int, indices, direction: str = "h", w: WeightFunction | None = None
) -> np.ndarray:
    """Crossing indicators for many dependent-bond samples of r."""
    from .crossing import S4, _col_mask, expand_bond_batch, stack_crossing_mask

    if w is None:
        w = plus_weight()
    x0, y0, x1, y1 = r.int_bounds()
    rad2 = int(2 * w.radius)
    dx0, dy0 = 2 * x0 - rad2, 2 * y0 - rad2
    dx1, dy1 = 2 * x1 + rad2, 2 * y1 + rad2
    th = np.uint64(p_threshold(params.p))
    idx = np.asarray(indices, np.int64)[:, None, None]
    ys, xs = np.mgrid[dy0 : dy1 + 1, dx0 : dx1 + 1]
    signs = np.where(key_u53_vec(seed, idx, CH_SIGN, xs[None], ys[None]) < th, np.int64(1), np.int64(-1))

    def edge_sums(mx0, my0, nx, ny):
        acc = np.zeros((signs.shape[0], ny, nx), np.int64)
        for (a, b), wt in zip(w.doubled_offsets, w.weights):
            cx = mx0 + a - dx0
            cy = my0 + b - dy0
            acc += wt * signs[:, cy : cy + 2 * ny : 2, cx : cx + 2 * nx : 2]
        return acc

    oe = edge_sums(2 * x0 + 1, 2 * y0, x1 - x0, y1 - y0 + 1) > 0
    on = edge_sums(2 * x0, 2 * y0 + 1, x1 - x0 + 1, y1 - y0) > 0
    ex = expand_bond_batch(oe, on)
    if direction == "v":
        ex = ex.transpose(0, 2, 1)
    return stack_crossing_mask(ex, S4, ex & _col_mask(ex, 0), ex & _col_mask(ex, -1))
