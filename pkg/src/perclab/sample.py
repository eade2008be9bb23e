"""Counter-based sampling of percolation configurations.

Every random cell (site, edge, sign, ternary Voronoi mark) gets its variate
from a stateless hash of (seed, sample_index, channel, absolute cell
coordinates).  Consequences, all tested: regeneration is bit-identical,
samples are independent of evaluation order and worker count, and extending a
window leaves the states of shared cells unchanged.  A cell is open iff
u < p where u = (hash >> 11) / 2**53; internally the comparison is done on
integers, which is exactly equivalent.

The mixer is the splitmix64 finalizer applied after absorbing each key word;
it is a published, well-tested 64-bit avalanche function.  Statistical
adequacy for this package's Monte Carlo (binomial confidence bands, stream
cross-correlation) is checked in the test suite.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .lattice import Coord, Edge, LatticeKind, Rect, frac_ceil, frac_floor

MASK64 = (1 << 64) - 1
_PHI = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# key channels: which family of cells a variate belongs to
CH_SITE = 0  # integer-grid site states (shared by 4- and 8-neighbour models)
CH_TRI = 1  # triangular site states, keyed by axial (i, j)
CH_EDGE_E = 2  # east edge at (x, y)
CH_EDGE_N = 3  # north edge at (x, y)
CH_SIGN = 4  # +-1 sign field on the half-integer grid, keyed by doubled coords
CH_VOR = 5  # ternary Voronoi field on the integer grid


def mix64(z: int) -> int:
    """splitmix64 finalizer (scalar)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def key_hash(seed: int, index: int, channel: int, x: int, y: int) -> int:
    """Stateless 64-bit hash of one cell key (scalar reference)."""
    h = seed & MASK64
    for w in (index, channel, x, y):
        h = mix64((h + _PHI * (w & MASK64)) & MASK64)
    return h


def key_u53(seed: int, index: int, channel: int, x: int, y: int) -> int:
    return key_hash(seed, index, channel, x, y) >> 11


def cell_open(seed: int, index: int, channel: int, x: int, y: int, p: float) -> bool:
    """open iff u < p, decided exactly on integers."""
    return key_u53(seed, index, channel, x, y) < p_threshold(p)


def p_threshold(p: float) -> int:
    """Exact integer threshold for u < p: u53 < p * 2**53."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    return int(p * 2.0**53)


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def key_hash_vec(seed: int, index, channel: int, xs, ys) -> np.ndarray:
    """Vectorized key_hash; index may be scalar or an array broadcastable
    against xs/ys.  Coordinates are treated as two's-complement 64-bit."""
    xs = np.asarray(xs, dtype=np.int64).astype(np.uint64)
    ys = np.asarray(ys, dtype=np.int64).astype(np.uint64)
    phi = np.uint64(_PHI)
    # uint64 wraparound is the point here; silence numpy's overflow warnings
    with np.errstate(over="ignore"):
        if np.ndim(index) == 0:
            h0 = mix64(seed + _PHI * (int(index) & MASK64))
            h0 = mix64(h0 + _PHI * channel)
            h = np.uint64(h0)
        else:
            idx = np.asarray(index, dtype=np.int64).astype(np.uint64)
            h = _mix64_vec(np.uint64(seed & MASK64) + phi * idx)
            h = _mix64_vec(h + phi * np.uint64(channel))
        h = _mix64_vec(h + phi * xs)
        h = _mix64_vec(h + phi * ys)
    return h


def key_u53_vec(seed, index, channel, xs, ys) -> np.ndarray:
    return key_hash_vec(seed, index, channel, xs, ys) >> np.uint64(11)


def open_mask(seed, index, channel, xs, ys, p: float) -> np.ndarray:
    return key_u53_vec(seed, index, channel, xs, ys) < np.uint64(p_threshold(p))


# ---------------------------------------------------------------------------
# model parameters


@dataclass(frozen=True)
class ModelParams:
    """Parameters of a percolation measure.

    p is the open-cell density (the phase transition lives in 0 < p < 1, but
    the degenerate endpoints are accepted and produce all-closed/all-open
    configurations).  pi is the Voronoi site-selection density; weight_json
    carries the dependent-bond weight function in its canonical JSON form.
    """

    p: float
    pi: float = 1.0
    weight_json: Optional[str] = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")
        if not 0.0 <= self.pi <= 1.0:
            raise ValueError(f"pi={self.pi} outside [0, 1]")


# ---------------------------------------------------------------------------
# configurations


@dataclass
class BondGrid:
    """Edge states of a rectangular bond window.

    open_e[y, x] is the east edge (x0+x, y0+y)-(x0+x+1, y0+y); shape (H+1, W).
    open_n[y, x] is the north edge (x0+x, y0+y)-(x0+x, y0+y+1); shape (H, W+1).
    """

    open_e: np.ndarray
    open_n: np.ndarray


@dataclass
class TriGrid:
    """Triangular site states stored per column.

    Column ci holds axial column i0+ci; row jj holds j = jlo[ci]+jj.  Slots
    with jj >= counts[ci] are padding and always False.
    """

    i0: int
    jlo: np.ndarray
    counts: np.ndarray
    states: np.ndarray  # bool (ncols, max_rows)

    def state(self, v) -> bool:
        i, j = v
        ci = i - self.i0
        jj = j - int(self.jlo[ci])
        if not (0 <= ci < self.states.shape[0] and 0 <= jj < int(self.counts[ci])):
            raise KeyError(f"vertex {v} outside window")
        return bool(self.states[ci, jj])


_MODEL_TAGS = {"bond": 1, "site-sq": 2, "site-star": 3, "tri": 4, "depbond": 5, "voronoi": 6}
_TAG_MODELS = {v: k for k, v in _MODEL_TAGS.items()}


@dataclass
class Configuration:
    """One sampled configuration: model tag, window, key, and cell states.

    Fully determined by (model, params, window, seed, index); regenerating
    with the same key yields bit-identical states.  Exactly one of the state
    payloads is populated, matching the model.
    """

    model: str
    window: Rect
    seed: int
    index: int
    params: ModelParams
    site: Optional[np.ndarray] = None  # bool [H+1, W+1], row-major (y, x)
    bonds: Optional[BondGrid] = None
    tri: Optional[TriGrid] = None
    field: Optional[np.ndarray] = None  # int8 in {-1,0,+1}, [H+1, W+1]
    dependence_range: Optional[Fraction] = None  # depbond only

    def site_state(self, v) -> bool:
        if self.tri is not None:
            return self.tri.state(v)
        x0, y0, _, _ = self.window.int_bounds()
        return bool(self.site[v[1] - y0, v[0] - x0])

    def edge_state(self, e: Edge) -> bool:
        x0, y0, _, _ = self.window.int_bounds()
        x, y = int(e.x) - x0, int(e.y) - y0
        g = self.bonds.open_e if e.d == "E" else self.bonds.open_n
        return bool(g[y, x])

    # -- canonical flat cell order ------------------------------------------

    def cells_flat(self) -> np.ndarray:
        """States in the documented serialization order.

        bond/depbond: E edges row-major then N edges row-major.
        site models: vertices row-major by (y, x).
        tri: columns ascending, j ascending within a column.
        voronoi: field points row-major, values shifted to {0,1,2}.
        """
        if self.bonds is not None:
            return np.concatenate([self.bonds.open_e.ravel(), self.bonds.open_n.ravel()]).astype(np.uint8)
        if self.site is not None:
            return self.site.ravel().astype(np.uint8)
        if self.tri is not None:
            parts = [
                self.tri.states[ci, : int(self.tri.counts[ci])]
                for ci in range(self.tri.states.shape[0])
            ]
            return np.concatenate(parts).astype(np.uint8) if parts else np.zeros(0, np.uint8)
        if self.field is not None:
            return (self.field.ravel() + 1).astype(np.uint8)
        raise ValueError("configuration has no states")

    def packed_states(self) -> bytes:
        flat = self.cells_flat()
        if self.model == "voronoi":  # 2 bits per cell
            bits = np.zeros(flat.size * 2, np.uint8)
            bits[0::2] = flat >> 1
            bits[1::2] = flat & 1
            return np.packbits(bits).tobytes()
        return np.packbits(flat).tobytes()

    def state_digest(self) -> str:
        import hashlib

        return hashlib.sha256(self.packed_states()).hexdigest()


# ---------------------------------------------------------------------------
# samplers


def _window_dims(window: Rect) -> tuple[int, int, int, int]:
    x0, y0, x1, y1 = window.int_bounds()
    return x0, y0, x1 - x0, y1 - y0


def sample_bond(params: ModelParams, window: Rect, seed: int, index: int) -> Configuration:
    """Independent bond configuration on the edges inside `window`."""
    x0, y0, w, h = _window_dims(window)
    t = np.uint64(p_threshold(params.p))
    ye, xe = np.mgrid[y0 : y0 + h + 1, x0 : x0 + w]
    yn, xn = np.mgrid[y0 : y0 + h, x0 : x0 + w + 1]
    open_e = key_u53_vec(seed, index, CH_EDGE_E, xe, ye) < t
    open_n = key_u53_vec(seed, index, CH_EDGE_N, xn, yn) < t
    return Configuration("bond", window, seed, index, params, bonds=BondGrid(open_e, open_n))


def sample_site(kind: LatticeKind, params: ModelParams, window: Rect, seed: int, index: int) -> Configuration:
    """Site configuration on the vertices inside `window`."""
    if kind is LatticeKind.SITE_TRIANGULAR:
        return _sample_tri(params, window, seed, index)
    if kind is LatticeKind.BOND_SQUARE:
        raise ValueError("use sample_bond for the bond model")
    x0, y0, w, h = _window_dims(window)
    t = np.uint64(p_threshold(params.p))
    ys, xs = np.mgrid[y0 : y0 + h + 1, x0 : x0 + w + 1]
    states = key_u53_vec(seed, index, CH_SITE, xs, ys) < t
    model = "site-sq" if kind is LatticeKind.SITE_SQUARE else "site-star"
    return Configuration(model, window, seed, index, params, site=states)


def tri_window_layout(window: Rect):
    """(i0, i1, jlo array, counts array) of the triangular window."""
    from .lattice import tri_column_range

    i0, i1 = tri_column_range(window)
    if i1 < i0:
        raise ValueError(f"window {window} contains no triangular columns")
    jlo, counts = [], []
    for i in range(i0, i1 + 1):
        if i & 1:
            lo = frac_ceil(window.y0 - Fraction(1, 2))
            hi = frac_floor(window.y1 - Fraction(1, 2))
        else:
            lo = frac_ceil(window.y0)
            hi = frac_floor(window.y1)
        jlo.append(lo)
        counts.append(max(0, hi - lo + 1))
    return i0, i1, np.array(jlo, np.int64), np.array(counts, np.int64)


def _sample_tri(params: ModelParams, window: Rect, seed: int, index: int) -> Configuration:
    i0, i1, jlo, counts = tri_window_layout(window)
    ncols = i1 - i0 + 1
    nrows = int(counts.max()) if ncols else 0
    cols = np.arange(i0, i1 + 1, dtype=np.int64)[:, None]
    rows = jlo[:, None] + np.arange(nrows, dtype=np.int64)[None, :]
    t = np.uint64(p_threshold(params.p))
    states = key_u53_vec(seed, index, CH_TRI, np.broadcast_to(cols, (ncols, nrows)), rows) < t
    states &= np.arange(nrows)[None, :] < counts[:, None]
    return Configuration("tri", window, seed, index, params, tri=TriGrid(i0, jlo, counts, states))


def sample_voronoi_field(params: ModelParams, window: Rect, seed: int, index: int) -> Configuration:
    """Ternary field on the integer points of `window` (a padded window):
    +1 with pi*p, -1 with pi*(1-p), 0 with 1-pi.

    Convention: one uniform per point; +1 iff u < pi*p (64-bit product,
    rounded once), -1 iff pi*p <= u < pi, else 0.
    """
    x0, y0, w, h = _window_dims(window)
    ys, xs = np.mgrid[y0 : y0 + h + 1, x0 : x0 + w + 1]
    u = key_u53_vec(seed, index, CH_VOR, xs, ys)
    t1 = np.uint64(p_threshold(params.pi * params.p))
    t2 = np.uint64(p_threshold(params.pi))
    field = np.zeros(u.shape, np.int8)
    field[u < t2] = -1
    field[u < t1] = 1
    return Configuration("voronoi", window, seed, index, params, field=field)


def sample_sign_field(p: float, dx0: int, dy0: int, dx1: int, dy1: int, seed: int, index: int) -> np.ndarray:
    """+-1 field on the half-integer grid, addressed by doubled coordinates.

    Returns int8 array of shape (dy1-dy0+1, dx1-dx0+1); entry [b, a] is the
    sign at point ((dx0+a)/2, (dy0+b)/2).  +1 iff u < p.
    """
    ys, xs = np.mgrid[dy0 : dy1 + 1, dx0 : dx1 + 1]
    m = key_u53_vec(seed, index, CH_SIGN, xs, ys) < np.uint64(p_threshold(p))
    return np.where(m, np.int8(1), np.int8(-1))


# ---------------------------------------------------------------------------
# serialization

_MAGIC = b"PLAB"
_VERSION = 1


def _coord_doubled(c: Coord) -> tuple[int, int]:
    a2, b2 = 2 * c.a, 2 * c.b
    if a2.denominator != 1 or b2.denominator != 1:
        raise ValueError(f"coordinate {c!r} is not on the half grid")
    return int(a2), int(b2)


def config_to_bytes(cfg: Configuration) -> bytes:
    """Binary layout: magic, version, model tag, window (doubled coords),
    seed, index, p, pi, optional weight JSON, cell count, packed states."""
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<BB", _VERSION, _MODEL_TAGS[cfg.model]))
    ax0, bx0 = _coord_doubled(cfg.window.x0)
    ax1, bx1 = _coord_doubled(cfg.window.x1)
    y0d, y1d = Fraction(cfg.window.y0) * 2, Fraction(cfg.window.y1) * 2
    buf.write(struct.pack("<6q", ax0, bx0, int(y0d), ax1, bx1, int(y1d)))
    buf.write(struct.pack("<qq", cfg.seed, cfg.index))
    buf.write(struct.pack("<dd", cfg.params.p, cfg.params.pi))
    wj = (cfg.params.weight_json or "").encode()
    buf.write(struct.pack("<I", len(wj)))
    buf.write(wj)
    flat = cfg.cells_flat()
    buf.write(struct.pack("<I", flat.size))
    buf.write(cfg.packed_states())
    return buf.getvalue()


def config_from_bytes(data: bytes) -> Configuration:
    """Inverse of config_to_bytes (regenerates structure, restores states)."""
    buf = io.BytesIO(data)
    if buf.read(4) != _MAGIC:
        raise ValueError("bad magic")
    version, tag = struct.unpack("<BB", buf.read(2))
    if version != _VERSION:
        raise ValueError(f"unsupported version {version}")
    model = _TAG_MODELS[tag]
    ax0, bx0, y0d, ax1, bx1, y1d = struct.unpack("<6q", buf.read(48))
    window = Rect(
        Coord(Fraction(ax0, 2), Fraction(bx0, 2)),
        Fraction(y0d, 2),
        Coord(Fraction(ax1, 2), Fraction(bx1, 2)),
        Fraction(y1d, 2),
    )
    seed, index = struct.unpack("<qq", buf.read(16))
    p, pi = struct.unpack("<dd", buf.read(16))
    (wlen,) = struct.unpack("<I", buf.read(4))
    wj = buf.read(wlen).decode() or None
    (ncells,) = struct.unpack("<I", buf.read(4))
    params = ModelParams(p=p, pi=pi, weight_json=wj)
    nbits = 2 * ncells if model == "voronoi" else ncells
    raw = np.frombuffer(buf.read((nbits + 7) // 8), np.uint8)
    bits = np.unpackbits(raw)[:nbits]
    if model == "voronoi":
        flat = (bits[0::2] * 2 + bits[1::2]).astype(np.int8) - 1
    else:
        flat = bits.astype(bool)
    return _rebuild(model, window, seed, index, params, flat)


def _rebuild(model, window, seed, index, params, flat) -> Configuration:
    cfg = Configuration(model, window, seed, index, params)
    x0, y0, x1, y1 = (None,) * 4
    if model in ("bond", "depbond"):
        x0, y0, x1, y1 = window.int_bounds()
        w, h = x1 - x0, y1 - y0
        ne = (h + 1) * w
        cfg.bonds = BondGrid(
            flat[:ne].reshape(h + 1, w).copy(), flat[ne:].reshape(h, w + 1).copy()
        )
        if model == "depbond" and params.weight_json:
            from .depbond import WeightFunction

            cfg.dependence_range = WeightFunction.from_json(params.weight_json).dependence_range()
    elif model in ("site-sq", "site-star"):
        x0, y0, x1, y1 = window.int_bounds()
        cfg.site = flat.reshape(y1 - y0 + 1, x1 - x0 + 1).copy()
    elif model == "voronoi":
        x0, y0, x1, y1 = window.int_bounds()
        cfg.field = flat.reshape(y1 - y0 + 1, x1 - x0 + 1).copy()
    elif model == "tri":
        i0, i1, jlo, counts = tri_window_layout(window)
        ncols = i1 - i0 + 1
        nrows = int(counts.max()) if ncols else 0
        states = np.zeros((ncols, nrows), bool)
        pos = 0
        for ci in range(ncols):
            c = int(counts[ci])
            states[ci, :c] = flat[pos : pos + c]
            pos += c
        cfg.tri = TriGrid(i0, jlo, counts, states)
    else:
        raise ValueError(model)
    return cfg
