"""Planar lattices: exact coordinates, rectangles, adjacency, duality.

Four lattices are supported: bond percolation on the integer grid, site
percolation on the integer grid with 4- or 8-neighbour adjacency, and site
percolation on the triangular lattice.  Triangular vertices are addressed by
axial indices (i, j) and embedded at x = i*sqrt(3)/2, y = j + (i mod 2)/2, so
x-coordinates live in the ring of numbers a + b*sqrt(3)/2 with rational a, b.
All geometry here is exact: no floats are compared, ever.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, NamedTuple, Union

Rational = Union[int, Fraction]


class LatticeKind(Enum):
    BOND_SQUARE = "bond"
    SITE_SQUARE = "site-sq"
    SITE_STAR = "site-star"
    SITE_TRIANGULAR = "tri"


SITE_KINDS = (LatticeKind.SITE_SQUARE, LatticeKind.SITE_STAR, LatticeKind.SITE_TRIANGULAR)
SQUARE_KINDS = (LatticeKind.BOND_SQUARE, LatticeKind.SITE_SQUARE, LatticeKind.SITE_STAR)


class Coord:
    """Exact number a + b*sqrt(3)/2 with rational a, b.

    Supports ordering, arithmetic and hashing.  The representation is unique
    (sqrt(3) is irrational), so equality of the (a, b) pairs is equality of
    values.
    """

    __slots__ = ("a", "b")

    def __init__(self, a: Rational = 0, b: Rational = 0):
        self.a = Fraction(a)
        self.b = Fraction(b)

    @staticmethod
    def of(v: "Coord | Rational") -> "Coord":
        if isinstance(v, Coord):
            return v
        return Coord(v)

    def __add__(self, other):
        other = Coord.of(other)
        return Coord(self.a + other.a, self.b + other.b)

    __radd__ = __add__

    def __sub__(self, other):
        other = Coord.of(other)
        return Coord(self.a - other.a, self.b - other.b)

    def __rsub__(self, other):
        return Coord.of(other) - self

    def __neg__(self):
        return Coord(-self.a, -self.b)

    def __mul__(self, k: Rational):
        k = Fraction(k)
        return Coord(self.a * k, self.b * k)

    __rmul__ = __mul__

    def sign(self) -> int:
        a, b = self.a, self.b
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return (b > 0) - (b < 0)
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # mixed signs: compare a^2 against 3 b^2 / 4; never equal for a, b != 0
        if a > 0:  # b < 0
            return 1 if 4 * a * a > 3 * b * b else -1
        return 1 if 3 * b * b > 4 * a * a else -1

    def __eq__(self, other):
        other = Coord.of(other)
        return self.a == other.a and self.b == other.b

    def __lt__(self, other):
        return (self - Coord.of(other)).sign() < 0

    def __le__(self, other):
        return (self - Coord.of(other)).sign() <= 0

    def __gt__(self, other):
        return (self - Coord.of(other)).sign() > 0

    def __ge__(self, other):
        return (self - Coord.of(other)).sign() >= 0

    def __hash__(self):
        return hash((self.a, self.b))

    def __float__(self):
        return float(self.a) + float(self.b) * (math.sqrt(3.0) / 2.0)

    def is_rational(self) -> bool:
        return self.b == 0

    def as_fraction(self) -> Fraction:
        if self.b != 0:
            raise ValueError(f"{self!r} is irrational")
        return self.a

    def __repr__(self):
        if self.b == 0:
            return f"Coord({self.a})"
        return f"Coord({self.a}, {self.b})"


def _frac(v) -> Fraction:
    if isinstance(v, Coord):
        return v.as_fraction()
    return Fraction(v)


def frac_ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def frac_floor(x: Fraction) -> int:
    return x.numerator // x.denominator


class Edge(NamedTuple):
    """Lattice edge named by its lower-left endpoint and direction.

    'E' joins (x, y)-(x+1, y); 'N' joins (x, y)-(x, y+1).  Coordinates are
    integers on the primal grid and half-integers on the dual grid.
    """

    x: Rational
    y: Rational
    d: str

    def endpoints(self):
        if self.d == "E":
            return (self.x, self.y), (self.x + 1, self.y)
        return (self.x, self.y), (self.x, self.y + 1)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0, x1] x [y0, y1] with exact coordinates.

    x-coordinates may involve sqrt(3)/2 (triangular work); y-coordinates must
    be rational.  Degenerate and inverted rectangles are rejected.
    """

    x0: Coord
    y0: Fraction
    x1: Coord
    y1: Fraction

    def __init__(self, x0, y0, x1, y1):
        object.__setattr__(self, "x0", Coord.of(x0))
        object.__setattr__(self, "y0", _frac(y0))
        object.__setattr__(self, "x1", Coord.of(x1))
        object.__setattr__(self, "y1", _frac(y1))
        if not self.x0 < self.x1 or not self.y0 < self.y1:
            raise ValueError(f"empty or inverted rectangle {self}")

    @property
    def width(self) -> Coord:
        return self.x1 - self.x0

    @property
    def height(self) -> Fraction:
        return self.y1 - self.y0

    def is_integer(self) -> bool:
        return (
            self.x0.is_rational()
            and self.x1.is_rational()
            and self.x0.a.denominator == 1
            and self.x1.a.denominator == 1
            and self.y0.denominator == 1
            and self.y1.denominator == 1
        )

    def int_bounds(self) -> tuple[int, int, int, int]:
        """(x0, y0, x1, y1) as ints; only valid for integer-corner rectangles."""
        if not self.is_integer():
            raise ValueError(f"{self} does not have integer corners")
        return (int(self.x0.a), int(self.y0), int(self.x1.a), int(self.y1))

    def contains_point(self, x, y) -> bool:
        return self.x0 <= Coord.of(x) <= self.x1 and self.y0 <= _frac(y) <= self.y1

    def shifted(self, dx, dy) -> "Rect":
        return Rect(self.x0 + Coord.of(dx), self.y0 + _frac(dy), self.x1 + Coord.of(dx), self.y1 + _frac(dy))

    def transposed(self) -> "Rect":
        """Swap the axes; requires rational x-coordinates."""
        return Rect(self.y0, self.x0.as_fraction(), self.y1, self.x1.as_fraction())

    def __repr__(self):
        def fmt(v):
            if isinstance(v, Coord) and v.b != 0:
                return f"({v.a}+{v.b}*s3/2)"
            return str(v.a if isinstance(v, Coord) else v)

        return f"Rect[{fmt(self.x0)},{fmt(self.x1)}]x[{fmt(self.y0)},{fmt(self.y1)}]"


def rect(x0, y0, x1, y1) -> Rect:
    return Rect(x0, y0, x1, y1)


def tri_rect(cols0: int, y0, cols1: int, y1) -> Rect:
    """Rectangle whose x-sides sit on triangular columns cols0, cols1."""
    return Rect(Coord(0, cols0), y0, Coord(0, cols1), y1)


# ---------------------------------------------------------------------------
# embeddings and adjacency


def embed(kind: LatticeKind, v) -> tuple[Coord, Fraction]:
    """Exact planar position of a vertex id."""
    if kind is LatticeKind.SITE_TRIANGULAR:
        i, j = v
        return Coord(0, i), Fraction(2 * j + (i & 1), 2)
    x, y = v
    return Coord(x), Fraction(y)


# neighbour offsets ordered counterclockwise starting from the east
_SQ4 = ((1, 0), (0, 1), (-1, 0), (0, -1))
_SQ8 = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
_TRI_EVEN = ((1, 0), (0, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
_TRI_ODD = ((1, 1), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, 0))


def neighbor_offsets(kind: LatticeKind, v=None):
    if kind is LatticeKind.SITE_STAR:
        return _SQ8
    if kind is LatticeKind.SITE_TRIANGULAR:
        if v is None:
            raise ValueError("triangular offsets depend on column parity")
        return _TRI_ODD if (v[0] & 1) else _TRI_EVEN
    return _SQ4


def neighbors(kind: LatticeKind, v) -> list:
    """Adjacent vertex ids, in a fixed counterclockwise order from the east."""
    offs = neighbor_offsets(kind, v)
    return [(v[0] + dx, v[1] + dy) for dx, dy in offs]


def vertices_in(kind: LatticeKind, r: Rect) -> list:
    """Vertex ids inside r, sorted row-major by embedded (y, x)."""
    if kind is LatticeKind.SITE_TRIANGULAR:
        out = []
        i0, i1 = _tri_column_range(r)
        for i in range(i0, i1 + 1):
            if i & 1:
                jlo = frac_ceil(r.y0 - Fraction(1, 2))
                jhi = frac_floor(r.y1 - Fraction(1, 2))
            else:
                jlo = frac_ceil(r.y0)
                jhi = frac_floor(r.y1)
            for j in range(jlo, jhi + 1):
                out.append((i, j))
        out.sort(key=lambda v: (embed(kind, v)[1], v[0]))
        return out
    x0, x1 = r.x0.as_fraction(), r.x1.as_fraction()
    xs = range(frac_ceil(x0), frac_floor(x1) + 1)
    ys = range(frac_ceil(r.y0), frac_floor(r.y1) + 1)
    return [(x, y) for y in ys for x in xs]


def _tri_column_range(r: Rect) -> tuple[int, int]:
    """Smallest/largest column index i with i*sqrt(3)/2 inside [x0, x1]."""
    s3h = math.sqrt(3.0) / 2.0
    i0 = math.ceil(float(r.x0) / s3h - 1e-9)
    while Coord(0, i0) < r.x0:
        i0 += 1
    while Coord(0, i0 - 1) >= r.x0:
        i0 -= 1
    i1 = math.floor(float(r.x1) / s3h + 1e-9)
    while Coord(0, i1) > r.x1:
        i1 -= 1
    while Coord(0, i1 + 1) <= r.x1:
        i1 += 1
    return i0, i1


def tri_column_range(r: Rect) -> tuple[int, int]:
    return _tri_column_range(r)


def edges_in(r: Rect) -> list[Edge]:
    """Bond-lattice edges with both endpoints in r: all E-edges row-major,
    then all N-edges row-major."""
    x0, y0, x1, y1 = r.int_bounds()
    out = [Edge(x, y, "E") for y in range(y0, y1 + 1) for x in range(x0, x1)]
    out += [Edge(x, y, "N") for y in range(y0, y1) for x in range(x0, x1 + 1)]
    return out


# ---------------------------------------------------------------------------
# planar duality

HALF = Fraction(1, 2)


def dual_edge(e: Edge) -> Edge:
    """The unique dual edge crossing e.  An involution on edges.

    The dual lattice lives on the half-integer grid: the dual vertex sitting
    in the face above-right of (a, b) is (a+1/2, b+1/2).
    """
    x, y = Fraction(e.x), Fraction(e.y)
    if e.d == "E":
        return Edge(x + HALF, y - HALF, "N")
    if e.d == "N":
        return Edge(x - HALF, y + HALF, "E")
    raise ValueError(f"bad edge direction {e.d!r}")


def dual_rect(r: Rect) -> Rect:
    """Dual-lattice rectangle whose crossings block crossings of r.

    For integer-corner r = [x0,x1]x[y0,y1] this is
    [x0+1/2, x1-1/2] x [y0-1/2, y1+1/2]; horizontal open crossings of r and
    vertical closed dual crossings of the result are mutually exclusive and
    exhaustive.  Rectangles narrower than 2 are rejected (the dual rectangle
    would be empty or degenerate).
    """
    x0, y0, x1, y1 = r.int_bounds()
    if x1 - x0 < 2:
        raise ValueError(f"dual_rect needs width >= 2, got {x1 - x0}")
    return Rect(Fraction(x0) + HALF, Fraction(y0) - HALF, Fraction(x1) - HALF, Fraction(y1) + HALF)


@dataclass(frozen=True)
class Annulus:
    """Square ring of four 3m-by-m rectangles around a centered square hole.

    The rectangles overlap in the four m-by-m corners, so long crossings of
    all four concatenate into a circuit surrounding the inner square (side
    m-1, centered in the m-by-m hole up to the integer grid).
    """

    m: int
    bottom: Rect
    right: Rect
    top: Rect
    left: Rect
    inner: Rect

    @property
    def s(self) -> int:
        return self.m - 1

    def rects(self) -> tuple[Rect, Rect, Rect, Rect]:
        return (self.bottom, self.right, self.top, self.left)

    def long_directions(self) -> tuple[str, str, str, str]:
        return ("h", "v", "h", "v")


def make_annulus(m: int, origin: tuple[int, int] = (0, 0)) -> Annulus:
    if m < 2:
        raise ValueError("annulus needs m >= 2")
    ox, oy = origin
    r = lambda a, b, c, d: Rect(a + ox, b + oy, c + ox, d + oy)
    return Annulus(
        m=m,
        bottom=r(0, 0, 3 * m, m),
        right=r(2 * m, 0, 3 * m, 3 * m),
        top=r(0, 2 * m, 3 * m, 3 * m),
        left=r(0, 0, m, 3 * m),
        inner=r(m, m, 2 * m - 1, 2 * m - 1),
    )


def vertex_count(kind: LatticeKind, r: Rect) -> int:
    return len(vertices_in(kind, r))


def iter_unit_edges(vertices: Iterable, kind: LatticeKind):
    """Yield each adjacent pair among `vertices` once (u < v lexicographically)."""
    vs = set(vertices)
    for v in vs:
        for u in neighbors(kind, v):
            if u in vs and u > v:
                yield v, u
