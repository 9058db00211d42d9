"""Nodal-measure extraction and the centered, rescaled cumulative field.

d=1: zero counting with linear-interpolant root location.
d=2: per-cell marching squares with the center-average saddle rule.
Every zero/segment is assigned to exactly one half-open partition cell,
so cell sums are conserved exactly and Bickel-Wichura adjacency holds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampler import FieldSample

DEGENERATE_ATOL = 1e-9

# marching-squares case table: corner bits (bit0=(i,j), bit1=(i+1,j),
# bit2=(i+1,j+1), bit3=(i,j+1)), segments as pairs of edge ids
# 0=bottom, 1=right, 2=top, 3=left; cases 5 and 10 are saddles.
_CASE_EDGES = {
    1: (0, 3), 2: (0, 1), 3: (1, 3), 4: (1, 2), 6: (0, 2), 7: (2, 3),
    8: (2, 3), 9: (0, 2), 11: (1, 2), 12: (1, 3), 13: (0, 1), 14: (0, 3),
}


@dataclass(frozen=True)
class IncrementGrid:
    """Per-cell nodal measure over the m^d half-open partition of [0, R]^d."""

    m: int
    d: int
    cell_measure: np.ndarray
    R: float
    model_name: str
    seed: int
    degenerate_nodes: int = 0

    def __post_init__(self):
        if self.cell_measure.shape != (self.m,) * self.d:
            raise ValueError("cell_measure shape does not match m^d")

    @property
    def total(self) -> float:
        return float(self.cell_measure.sum())


@dataclass(frozen=True)
class XiField:
    """Centered, rescaled cumulative nodal measure on the unit-cube lattice."""

    m: int
    d: int
    values: np.ndarray            # (m+1)^d lattice, zero on the 0-faces
    rho1: float
    gamma2: float
    R: float

    def value_at(self, t) -> float:
        idx = _lattice_index(np.atleast_1d(np.asarray(t, float)), self.m, self.d)
        return float(self.values[idx])

    def corner(self) -> float:
        return float(self.values[(-1,) * self.d])

    def boundary_sup(self) -> float:
        """Max over the lattice points of the boundary of [0,1]^2."""
        if self.d != 2:
            raise ValueError("boundary_sup is a d=2 operation")
        # the sup over the two zero faces is 0, included via the edges' first entries
        return float(max(self.values[-1, :].max(), self.values[:, -1].max(),
                         self.values[0, :].max(), self.values[:, 0].max()))


def _lattice_index(t: np.ndarray, m: int, d: int):
    if t.shape != (d,):
        raise ValueError(f"lattice point must have {d} coordinates")
    idx = t * m
    j = np.rint(idx).astype(int)
    if np.max(np.abs(idx - j)) > 1e-9 or (j < 0).any() or (j > m).any():
        raise ValueError(f"point {t} is not on the (m={m}) lattice of [0,1]^d")
    return tuple(j)


def zeros_1d(sample: FieldSample, *, atol: float = DEGENERATE_ATOL):
    """Locations of the zeros of the linear interpolant on [0, R).

    Returns (locations, degenerate_count).  Zeros sitting exactly on a grid
    node are counted at that node (half-open convention, right endpoint
    excluded); sign-change roots are placed by the exact linear-interpolant
    formula, which is within any bisection tolerance of that interpolant.
    """
    if sample.grid.d != 1:
        raise ValueError("zeros_1d requires a 1-d sample")
    f = sample.values
    x = sample.grid.axis()
    degenerate = int(np.count_nonzero(np.abs(f) < atol))
    node_zero = f[:-1] == 0.0
    f0, f1 = f[:-1], f[1:]
    crossing = (f0 * f1 < 0.0)
    locs = []
    if node_zero.any():
        locs.append(x[:-1][node_zero])
    if crossing.any():
        t = f0[crossing] / (f0[crossing] - f1[crossing])
        locs.append(x[:-1][crossing] + t * sample.grid.h)
    if locs:
        out = np.sort(np.concatenate(locs))
    else:
        out = np.empty(0)
    return out, degenerate


def zero_count_1d(sample: FieldSample, interval=None) -> int:
    """Number of zeros in the half-open interval [lo, hi) (default [0, R))."""
    locs, _ = zeros_1d(sample)
    if interval is None:
        return int(locs.size)
    lo, hi = float(interval[0]), float(interval[1])
    return int(np.count_nonzero((locs >= lo) & (locs < hi)))


def zero_cells_1d(sample: FieldSample, m: int) -> IncrementGrid:
    """Histogram the zeros into the m half-open cells of [0, R)."""
    locs, degenerate = zeros_1d(sample)
    R = sample.grid.R
    idx = np.floor(locs * (m / R)).astype(int)
    idx = np.clip(idx, 0, m - 1)  # guards float roundoff at the last cell edge
    cells = np.bincount(idx, minlength=m).astype(float)
    return IncrementGrid(m=m, d=1, cell_measure=cells, R=R,
                         model_name=sample.model_name, seed=sample.seed,
                         degenerate_nodes=degenerate)


def _marching_segments(f: np.ndarray):
    """Compressed marching squares over all (n-1)^2 cells.

    Returns (flat cell indices, per-segment lengths in cell units); saddle
    cells contribute two entries.  Sign convention f >= 0 keeps nodal lines
    through grid nodes assigned to exactly one adjacent cell.
    """
    f00 = f[:-1, :-1]
    f10 = f[1:, :-1]
    f11 = f[1:, 1:]
    f01 = f[:-1, 1:]
    case = (
        (f00 >= 0).astype(np.uint8)
        | ((f10 >= 0).astype(np.uint8) << 1)
        | ((f11 >= 0).astype(np.uint8) << 2)
        | ((f01 >= 0).astype(np.uint8) << 3)
    )
    flat = case.ravel()
    hit = np.flatnonzero((flat != 0) & (flat != 15))
    if hit.size == 0:
        return hit, np.empty(0)
    c = flat[hit]
    a00 = f00.ravel()[hit]
    a10 = f10.ravel()[hit]
    a11 = f11.ravel()[hit]
    a01 = f01.ravel()[hit]

    def frac(u, v):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = u / (u - v)
        return t

    # edge crossing points in local cell coordinates
    ex = np.empty((4, hit.size))
    ey = np.empty((4, hit.size))
    ex[0], ey[0] = frac(a00, a10), 0.0            # bottom
    ex[1], ey[1] = 1.0, frac(a10, a11)            # right
    ex[2], ey[2] = frac(a01, a11), 1.0            # top
    ex[3], ey[3] = 0.0, frac(a00, a01)            # left

    idx_out = []
    len_out = []

    def emit(mask, e1, e2):
        if not mask.any():
            return
        dl = np.hypot(ex[e1, mask] - ex[e2, mask], ey[e1, mask] - ey[e2, mask])
        idx_out.append(hit[mask])
        len_out.append(dl)

    for case_id, (e1, e2) in _CASE_EDGES.items():
        emit(c == case_id, e1, e2)

    saddle = (c == 5) | (c == 10)
    if saddle.any():
        center_pos = (a00 + a10 + a11 + a01) >= 0.0
        five = c == 5
        # case 5 (+ corners on the main diagonal): positive center joins them
        emit(saddle & five & center_pos, 0, 1)
        emit(saddle & five & center_pos, 2, 3)
        emit(saddle & five & ~center_pos, 0, 3)
        emit(saddle & five & ~center_pos, 1, 2)
        # case 10 is the mirrored saddle
        emit(saddle & ~five & center_pos, 0, 3)
        emit(saddle & ~five & center_pos, 1, 2)
        emit(saddle & ~five & ~center_pos, 0, 1)
        emit(saddle & ~five & ~center_pos, 2, 3)

    return np.concatenate(idx_out), np.concatenate(len_out)


def nodal_length_cells(sample: FieldSample, m: int) -> IncrementGrid:
    """Nodal length per partition cell via marching squares.

    m must divide n-1 so that partition boundaries align with grid nodes;
    each extracted segment is accumulated into the partition cell that
    contains its fine cell.
    """
    if sample.grid.d != 2:
        raise ValueError("nodal_length_cells requires a 2-d sample")
    n1 = sample.grid.n - 1
    if n1 % m != 0:
        raise ValueError(f"partition resolution m={m} must divide n-1={n1}")
    w = n1 // m
    f = sample.values
    degenerate = int(np.count_nonzero(np.abs(f) < DEGENERATE_ATOL))
    cell_idx, lengths = _marching_segments(f)
    cells = np.zeros(m * m)
    if cell_idx.size:
        ci, cj = np.divmod(cell_idx, n1)
        block = (ci // w) * m + (cj // w)
        cells = np.bincount(block, weights=lengths, minlength=m * m).astype(float)
    cells *= sample.grid.h
    return IncrementGrid(m=m, d=2, cell_measure=cells.reshape(m, m),
                         R=sample.grid.R, model_name=sample.model_name,
                         seed=sample.seed, degenerate_nodes=degenerate)


def nodal_cells(sample: FieldSample, m: int) -> IncrementGrid:
    """Dimension dispatch: zero counts (d=1) or nodal length (d=2) per cell."""
    if sample.grid.d == 1:
        return zero_cells_1d(sample, m)
    return nodal_length_cells(sample, m)


def _cumulative_lattice(cells: np.ndarray) -> np.ndarray:
    d = cells.ndim
    padded = np.zeros(tuple(s + 1 for s in cells.shape))
    padded[(slice(1, None),) * d] = cells
    for axis in range(d):
        padded = np.cumsum(padded, axis=axis)
    return padded


def cumulative(inc: IncrementGrid) -> np.ndarray:
    """Partition-function lattice: value at t = measure of [0, t] (cell sums)."""
    return _cumulative_lattice(inc.cell_measure)


def rectangle_increment(lattice: np.ndarray, lo, hi) -> float:
    """Inclusion-exclusion increment of a lattice-aligned rectangle [lo, hi]."""
    d = lattice.ndim
    m = lattice.shape[0] - 1
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    a = _lattice_index(lo, m, d)
    b = _lattice_index(hi, m, d)
    if any(bb < aa for aa, bb in zip(a, b)):
        raise ValueError("rectangle must have lo <= hi per coordinate")
    if d == 1:
        return float(lattice[b[0]] - lattice[a[0]])
    return float(
        lattice[b[0], b[1]] - lattice[a[0], b[1]]
        - lattice[b[0], a[1]] + lattice[a[0], a[1]]
    )


def center_and_rescale(inc: IncrementGrid, rho1: float, gamma2: float, R: float) -> XiField:
    """Center each cell by its exact mean and rescale by sqrt(gamma2) R^(d/2)."""
    if gamma2 <= 0:
        raise ValueError("gamma2 must be positive")
    cell_vol = (R / inc.m) ** inc.d
    centered = (inc.cell_measure - rho1 * cell_vol) / (np.sqrt(gamma2) * R ** (inc.d / 2.0))
    return XiField(m=inc.m, d=inc.d, values=_cumulative_lattice(centered),
                   rho1=rho1, gamma2=gamma2, R=R)


def pair_with_test_function(inc: IncrementGrid, phi, rho1: float, gamma2: float, R: float) -> float:
    """Riemann pairing of the centered rescaled measure with phi at cell centers."""
    if gamma2 <= 0:
        raise ValueError("gamma2 must be positive")
    centers = (np.arange(inc.m) + 0.5) / inc.m
    if callable(phi):
        if inc.d == 1:
            phi_vals = np.asarray(phi(centers), dtype=float)
        else:
            cx, cy = np.meshgrid(centers, centers, indexing="ij")
            phi_vals = np.asarray(phi(cx, cy), dtype=float)
    else:
        phi_vals = np.asarray(phi, dtype=float)
    if phi_vals.shape != inc.cell_measure.shape:
        raise ValueError("phi samples must match the cell grid shape")
    cell_vol = (R / inc.m) ** inc.d
    centered = inc.cell_measure - rho1 * cell_vol
    return float((phi_vals * centered).sum() / (np.sqrt(gamma2) * R ** (inc.d / 2.0)))
