"""Origin-cluster observables: size histograms, boundary-reach and mean-size
estimators, and exponential tail fits.

The Monte Carlo estimators never materialize whole configurations.  Because
every cell state is a pure function of (seed, sample_index, channel, coords),
clusters are grown lazily from the origin and only the states actually
touched are evaluated; subcritically that is O(cluster size) work per sample.
All samples advance through one level-synchronized breadth-first search, so
the per-level work is vectorized across the whole batch.  A neighbour of a
level-l vertex has BFS distance l-1, l or l+1, so deduplication only ever
needs the previous and current levels.

Shared variates give exact per-sample monotonicity: the cluster grown at p is
a subset of the cluster grown at p' > p with the same seed, which the
estimator tests use instead of statistical comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Edge, LatticeKind, neighbors
from .sample import (
    CH_EDGE_E,
    CH_EDGE_N,
    CH_SITE,
    Configuration,
    key_u53_vec,
    p_threshold,
)

_OFFS4 = np.array([(1, 0), (-1, 0), (0, 1), (0, -1)], np.int64)
_OFFS8 = np.concatenate([_OFFS4, np.array([(1, 1), (1, -1), (-1, 1), (-1, -1)], np.int64)])


# ---------------------------------------------------------------------------
# direct cluster of a materialized configuration


def _config_kind(config: Configuration) -> LatticeKind:
    return {
        "bond": LatticeKind.BOND_SQUARE,
        "depbond": LatticeKind.BOND_SQUARE,
        "site-sq": LatticeKind.SITE_SQUARE,
        "site-star": LatticeKind.SITE_STAR,
        "tri": LatticeKind.SITE_TRIANGULAR,
    }[config.model]


def _on_window_boundary(config: Configuration, v) -> bool:
    """True when some lattice neighbour of v falls outside the window (the
    cluster might continue there, so its size is only a lower bound)."""
    kind = _config_kind(config)
    for u in neighbors(kind, v):
        if not _in_window(config, kind, u):
            return True
    return False


def _in_window(config: Configuration, kind: LatticeKind, v) -> bool:
    x0, y0, x1, y1 = config.window.int_bounds()
    if kind is LatticeKind.SITE_TRIANGULAR:
        tri = config.tri
        ci = v[0] - tri.i0
        if not 0 <= ci < tri.states.shape[0]:
            return False
        jj = v[1] - int(tri.jlo[ci])
        return 0 <= jj < int(tri.counts[ci])
    return x0 <= v[0] <= x1 and y0 <= v[1] <= y1


def cluster_of_origin(config: Configuration, origin=(0, 0)) -> tuple[set, bool]:
    """Open cluster of `origin` inside the configuration window.

    Bond models connect vertices through open edges (an all-closed sample
    still yields {origin}); site models require the vertices themselves to
    be open, and a closed origin yields the empty set.  The returned flag
    is True when the cluster touches the window boundary, i.e. the true
    cluster may extend beyond what the window shows.
    """
    kind = _config_kind(config)
    if not _in_window(config, kind, origin):
        raise ValueError(f"origin {origin} outside window {config.window}")
    bond_like = config.bonds is not None
    if not bond_like and not config.site_state(origin):
        return set(), False
    seen = {tuple(origin)}
    stack = [tuple(origin)]
    truncated = _on_window_boundary(config, origin)
    while stack:
        v = stack.pop()
        for u in neighbors(kind, v):
            if u in seen or not _in_window(config, kind, u):
                continue
            if bond_like:
                if u[0] != v[0]:
                    e = Edge(min(u[0], v[0]), v[1], "E")
                else:
                    e = Edge(v[0], min(u[1], v[1]), "N")
                if not config.edge_state(e):
                    continue
            elif not config.site_state(u):
                continue
            seen.add(u)
            stack.append(u)
            if _on_window_boundary(config, u):
                truncated = True
    return seen, truncated


# ---------------------------------------------------------------------------
# lazy batched exploration


def _edge_open_mask(seed, idx, x, y, nx, ny, thresh):
    """States of the edges (x,y)-(nx,ny), canonical east/north keying."""
    horiz = nx != x
    ex = np.minimum(x, nx)
    ey = np.minimum(y, ny)
    u_e = key_u53_vec(seed, idx, CH_EDGE_E, ex, y)
    u_n = key_u53_vec(seed, idx, CH_EDGE_N, x, ey)
    return np.where(horiz, u_e, u_n) < thresh


def origin_cluster_sizes(
    model: str,
    p: float,
    window_radius: int,
    n_samples: int,
    seed: int,
    index0: int = 0,
):
    """Sizes and truncation flags of the origin clusters of n_samples
    independent configurations, grown lazily inside [-r, r]^2.

    Returns (sizes int64[n], truncated bool[n]).  truncated marks samples
    whose cluster contains a vertex on the boundary ring of the box; such
    sizes are lower bounds.
    """
    if window_radius < 1:
        raise ValueError("window_radius must be >= 1")
    if model == "bond":
        offs, site_model = _OFFS4, False
    elif model == "site-sq":
        offs, site_model = _OFFS4, True
    elif model == "site-star":
        offs, site_model = _OFFS8, True
    else:
        raise ValueError(f"lazy cluster exploration not implemented for model {model!r}")
    thresh = np.uint64(p_threshold(p))
    r = int(window_radius)
    n = int(n_samples)
    sizes = np.zeros(n, np.int64)
    truncated = np.zeros(n, bool)

    sid = np.arange(n, dtype=np.int64)
    if site_model:
        z = np.zeros(n, np.int64)
        alive = key_u53_vec(seed, index0 + sid, CH_SITE, z, z) < thresh
        sid = sid[alive]
    sizes[sid] = 1
    x = np.zeros(sid.size, np.int64)
    y = np.zeros(sid.size, np.int64)

    # packed visit keys; only the previous and current level are needed
    K = np.int64(2 * r + 2)
    pack = lambda s, xx, yy: (s * K + (xx + r)) * K + (yy + r)
    prev_keys = np.zeros(0, np.int64)
    cur_keys = pack(sid, x, y)

    while sid.size:
        m = offs.shape[0]
        nsid = np.repeat(sid, m)
        nx = np.repeat(x, m) + np.tile(offs[:, 0], sid.size)
        ny = np.repeat(y, m) + np.tile(offs[:, 1], sid.size)
        inside = (np.abs(nx) <= r) & (np.abs(ny) <= r)
        nsid, nx, ny = nsid[inside], nx[inside], ny[inside]
        if site_model:
            ok = key_u53_vec(seed, index0 + nsid, CH_SITE, nx, ny) < thresh
        else:
            ox = np.repeat(x, m)[inside]
            oy = np.repeat(y, m)[inside]
            ok = _edge_open_mask(seed, index0 + nsid, ox, oy, nx, ny, thresh)
        nsid, nx, ny = nsid[ok], nx[ok], ny[ok]
        keys = pack(nsid, nx, ny)
        keys, first = np.unique(keys, return_index=True)
        nsid, nx, ny = nsid[first], nx[first], ny[first]
        old = np.isin(keys, prev_keys, assume_unique=True) | np.isin(
            keys, cur_keys, assume_unique=True
        )
        keep = ~old
        nsid, nx, ny, keys = nsid[keep], nx[keep], ny[keep], keys[keep]
        sizes += np.bincount(nsid, minlength=n)
        on_edge = (np.abs(nx) == r) | (np.abs(ny) == r)
        truncated[nsid[on_edge]] = True
        prev_keys, cur_keys = cur_keys, keys
        sid, x, y = nsid, nx, ny
    return sizes, truncated


# ---------------------------------------------------------------------------
# observables


@dataclass
class ClusterStats:
    """Origin-cluster size census over a batch of samples.

    size_histogram counts only clusters fully contained in the window;
    reached_boundary counts the truncated rest, so the two always add up
    to the number of samples.
    """

    size_histogram: dict
    reached_boundary: int
    samples: int
    window_radius: int

    def check(self):
        assert sum(self.size_histogram.values()) + self.reached_boundary == self.samples
        assert all(s >= 0 for s in self.size_histogram)


def cluster_stats(model, p, window_radius, n_samples, seed, index0=0) -> ClusterStats:
    sizes, trunc = origin_cluster_sizes(model, p, window_radius, n_samples, seed, index0)
    vals, counts = np.unique(sizes[~trunc], return_counts=True)
    hist = {int(v): int(c) for v, c in zip(vals, counts)}
    return ClusterStats(hist, int(trunc.sum()), int(n_samples), int(window_radius))


def estimate_theta(model, p, window_radius, n_samples, seed, index0=0):
    """Fraction of samples whose origin cluster reaches the boundary of the
    radius-r box: a finite-window upper-bound proxy for the percolation
    probability, decreasing in r."""
    from .stats import proportion_estimate

    _, trunc = origin_cluster_sizes(model, p, window_radius, n_samples, seed, index0)
    return proportion_estimate(
        int(trunc.sum()), int(n_samples), p=p, window_radius=int(window_radius), model=model
    )


def estimate_chi(model, p, window_radius, n_samples, seed, index0=0):
    """Mean origin-cluster size, truncated at the window; the truncation
    fraction rides along in the estimate's extra fields."""
    from .stats import mean_estimate

    sizes, trunc = origin_cluster_sizes(model, p, window_radius, n_samples, seed, index0)
    return mean_estimate(
        sizes,
        p=p,
        window_radius=int(window_radius),
        model=model,
        truncated_fraction=float(trunc.mean()),
    )


@dataclass
class DecayFit:
    """Least-squares line through log tail probabilities.

    a_hat > 0 means the tail Pr(|C0| >= n) decays like exp(-a_hat n) over
    fit_range.  Samples hitting the window boundary are excluded from tail
    numerators (their size is censored); flagged_truncation notes when more
    than 1% of samples were censored.
    """

    a_hat: float
    r2: float
    fit_range: tuple
    n_values: np.ndarray
    tail: np.ndarray
    truncated_fraction: float
    flagged_truncation: bool


def fit_decay(model, p, window_radius, n_samples, fit_range, seed, index0=0) -> DecayFit:
    sizes, trunc = origin_cluster_sizes(model, p, window_radius, n_samples, seed, index0)
    return fit_tail(sizes, trunc, fit_range)


def fit_tail(sizes, trunc, fit_range) -> DecayFit:
    """Tail-decay fit from already-collected cluster sizes (see fit_decay)."""
    n0, n1 = int(fit_range[0]), int(fit_range[1])
    if not 1 <= n0 < n1:
        raise ValueError(f"bad fit range {fit_range}")
    sizes = np.asarray(sizes)
    trunc = np.asarray(trunc, bool)
    good = sizes[~trunc]
    total = int(sizes.size)
    ns = np.arange(n0, n1 + 1, dtype=np.int64)
    # tail counts via one sorted pass rather than len(ns) comparisons
    tail_counts = good.size - np.searchsorted(np.sort(good), ns, side="left")
    tail = tail_counts / total
    pos = tail > 0
    if pos.sum() < 3 or np.unique(good[good >= n0]).size < 2:
        raise ValueError("degenerate tail: not enough distinct mass in the fit range")
    xs = ns[pos].astype(np.float64)
    ys = np.log(tail[pos])
    slope, intercept = np.polyfit(xs, ys, 1)
    fitted = slope * xs + intercept
    ss_res = float(((ys - fitted) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    tf = float(trunc.mean())
    return DecayFit(
        a_hat=float(-slope),
        r2=r2,
        fit_range=(n0, n1),
        n_values=ns,
        tail=tail,
        truncated_fraction=tf,
        flagged_truncation=tf > 0.01,
    )
