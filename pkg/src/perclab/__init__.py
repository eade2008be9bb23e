"""perclab: a planar-percolation laboratory.

Exact duality/crossing algorithms and coupled Monte Carlo experiments for
bond, site (4- and 8-neighbour), triangular-site, dependent-bond and
discrete-Voronoi percolation on desk-scale windows.  Everything is driven
by a counter-based RNG, so any quantity is a pure function of
(seed, sample index) and experiments replay exactly.

Modules
-------
lattice   rectangles, edges, adjacencies, dual lattice geometry
sample    counter-based sampling of configurations
crossing  crossing events, interface walk, dual crossings, batch engines
depbond   the sign-field dependent bond model
voronoi   discrete Voronoi tilings with exact integer predicates
cluster   origin-cluster statistics (theta/chi estimates, tail fits)
renorm    block renormalization maps and the counting bounds behind them
cli       experiment driver and the `perclab` command
"""

__version__ = "0.1.0"

from .lattice import Edge, LatticeKind, Rect, rect, tri_rect  # noqa: F401
from .sample import ModelParams  # noqa: F401
