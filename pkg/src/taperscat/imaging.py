"""Direct imaging of the boundary from tapered-wave near-field data.

For one incident direction d with bandwidth lambda, the indicator

    I(z; d) = (1/lambda) | sum_i u^s(x_i; d) conj(exp(i(k|x_i - z| + pi/4))) w |

back-propagates the measured field to the sampling point z; w is the
receiver arc-length spacing.  Because a narrow beam only lights a small
patch of the boundary, the data look like a monopole/dipole source sitting
on that patch and I peaks there.  The reconstruction evaluates I on a strip
of the sampling grid around the beam axis, keeps its M strongest separated
maxima, and collects them over all directions.
"""

from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .geometry import BoundaryCurve, distance_to_curve
from .specfun import hankel1_01
from .synthesis import ScatteringDataset, worker_count

logger = logging.getLogger(__name__)

DEFAULT_SEPARATION_CELLS = 3
_CHUNK = 2048


class ImagingError(ValueError):
    """Invalid imaging configuration or input."""


class ImagingWarning(UserWarning):
    """Non-fatal imaging condition such as a short list of maxima."""


@dataclass(frozen=True)
class SamplingGrid:
    """Cell-centred nx by ny lattice over [x_min, x_max] x [y_min, y_max].

    Flat index ``iy * nx + ix`` addresses the point
    (x_min + (ix + 1/2) hx, y_min + (iy + 1/2) hy).
    """

    x_min: float = -2.0
    x_max: float = 2.0
    y_min: float = -2.0
    y_max: float = 2.0
    nx: int = 150
    ny: int = 150

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ImagingError("grid bounds must satisfy min < max")
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 2 or self.ny < 2:
            raise ImagingError("grid needs at least 2 points per axis")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def hy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def xs(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.hx

    @property
    def ys(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 0.5) * self.hy

    @property
    def points(self) -> np.ndarray:
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.stack([gx.ravel(), gy.ravel()], -1)

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return ((p[..., 0] >= self.x_min) & (p[..., 0] <= self.x_max)
                & (p[..., 1] >= self.y_min) & (p[..., 1] <= self.y_max))


@dataclass(frozen=True)
class ElongatedMesh:
    """Grid points within ``half_width`` of the beam axis through the origin."""

    parent: SamplingGrid
    direction: tuple[float, float]
    half_width: float
    member_indices: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return self.parent.points[self.member_indices]


@dataclass
class IndicatorMap:
    mesh: ElongatedMesh
    values: np.ndarray
    direction_index: int


@dataclass
class Maxima:
    """Result of greedy non-maximum suppression."""

    positions: np.ndarray
    values: np.ndarray
    member_indices: np.ndarray
    short: bool


@dataclass
class Reconstruction:
    """Recovered boundary points tagged with the direction that produced them."""

    points: np.ndarray
    direction_index: np.ndarray
    indicator_value: np.ndarray
    metrics: dict | None = None
    skipped: list[int] = field(default_factory=list)
    short_directions: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, mask) -> "Reconstruction":
        mask = np.asarray(mask, dtype=bool)
        return Reconstruction(self.points[mask], self.direction_index[mask], self.indicator_value[mask])


@dataclass
class PointSourceFit:
    """Least-squares monopole plus dipole source explaining one data row."""

    y_d: np.ndarray
    c1: complex
    p: np.ndarray
    residual: float
    candidate_index: int


# --------------------------------------------------------------------------
# indicator
# --------------------------------------------------------------------------

def indicator(z, data_row, receivers, k: float, lam: float, arc_weight: float):
    """Indicator value(s) at sampling point(s) z of shape (..., 2)."""
    data = np.asarray(data_row, dtype=complex).ravel()
    rec = np.asarray(receivers, dtype=float).reshape(-1, 2)
    if rec.shape[0] == 0:
        raise ImagingError("empty receiver list")
    if rec.shape[0] != data.size:
        raise ImagingError("data row and receiver list differ in length")
    if not lam > 0:
        raise ImagingError("lambda must be positive")
    z = np.asarray(z, dtype=float)
    pts = z.reshape(-1, 2)
    weighted = data * arc_weight
    out = np.empty(pts.shape[0])
    for lo in range(0, pts.shape[0], _CHUNK):
        q = pts[lo:lo + _CHUNK]
        r = np.hypot(rec[None, :, 0] - q[:, None, 0], rec[None, :, 1] - q[:, None, 1])
        kern = np.exp(-1j * (k * r + math.pi / 4.0))
        out[lo:lo + _CHUNK] = np.abs((kern * weighted[None, :]).sum(axis=1)) / lam
    return float(out[0]) if z.ndim == 1 else out.reshape(z.shape[:-1])


def build_elongated_mesh(grid: SamplingGrid, d, lam: float, direction_index: int | None = None) -> ElongatedMesh:
    """Strip |z . d_perp| <= max(5 lambda, 3h) of the sampling grid."""
    d = (float(d[0]), float(d[1]))
    half = max(5.0 * lam, 3.0 * grid.h)
    pts = grid.points
    across = pts[:, 0] * -d[1] + pts[:, 1] * d[0]
    members = np.flatnonzero(np.abs(across) <= half)
    if members.size == 0:
        tag = f" {direction_index}" if direction_index is not None else f" {d}"
        raise ImagingError(f"elongated mesh for direction{tag} does not meet the sampling grid")
    return ElongatedMesh(grid, d, half, members)


def local_maxima(values, positions, M: int, min_separation: float) -> Maxima:
    """Greedy non-maximum suppression.

    Candidates are visited by decreasing value (ties by index); a candidate
    is taken unless it lies within ``min_separation`` of one already taken.
    """
    if int(M) != M or M < 1:
        raise ImagingError("M must be a positive integer")
    values = np.asarray(values, dtype=float)
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    order = np.lexsort((np.arange(values.size), -values))
    # slack so that neighbours exactly one spacing away are treated consistently
    radius = min_separation * (1.0 + 1e-9)
    chosen: list[int] = []
    for i in order:
        if chosen:
            sel = positions[chosen]
            if np.any(np.hypot(sel[:, 0] - positions[i, 0], sel[:, 1] - positions[i, 1]) <= radius):
                continue
        chosen.append(int(i))
        if len(chosen) == M:
            break
    idx = np.array(chosen, dtype=int)
    return Maxima(positions[idx], values[idx], idx, len(chosen) < M)


def indicator_map(dataset: ScatteringDataset, grid: SamplingGrid, j: int, clean: bool = False) -> IndicatorMap:
    """Indicator of direction j on its elongated mesh."""
    cfg = dataset.config
    lam = float(dataset.per_direction_lambda[j])
    mesh = build_elongated_mesh(grid, dataset.directions[j], lam, j)
    vals = indicator(mesh.points, dataset.data(clean)[j], dataset.receivers, cfg.k, lam, cfg.arc_weight)
    return IndicatorMap(mesh, np.atleast_1d(vals), j)


def _fan_out(func, items: Sequence[int], threads: int | None):
    n = threads if threads is not None else worker_count(len(items))
    if n <= 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))


def reconstruct(dataset: ScatteringDataset, grid: SamplingGrid, M: int = 2,
                min_separation: float | None = None, directions: Iterable[int] | None = None,
                clean: bool = False, threads: int | None = None) -> Reconstruction:
    """Per-direction strongest separated maxima, collected over directions.

    ``directions`` restricts the run to a subset of direction indices and
    ``clean`` images the noiseless matrix.  Directions whose strip misses
    the grid are skipped with an :class:`ImagingWarning`.
    """
    sep = DEFAULT_SEPARATION_CELLS * grid.h if min_separation is None else float(min_separation)
    idx = list(range(dataset.config.N_d)) if directions is None else sorted(set(int(j) for j in directions))
    for j in idx:
        if not 0 <= j < dataset.config.N_d:
            raise ImagingError(f"direction index {j} out of range")

    def one(j):
        try:
            imap = indicator_map(dataset, grid, j, clean)
        except ImagingError as exc:
            return j, None, str(exc)
        return j, local_maxima(imap.values, imap.mesh.points, M, sep), None

    pts, tags, vals, skipped, short = [], [], [], [], []
    for j, mx, err in _fan_out(one, idx, threads):
        if mx is None:
            logger.debug("direction %d skipped: %s", j, err)
            skipped.append(j)
            continue
        if mx.short:
            short.append(j)
        pts.append(mx.positions)
        tags.append(np.full(len(mx.values), j, dtype=int))
        vals.append(mx.values)
    if skipped:
        warnings.warn(f"{len(skipped)} directions skipped, their strips miss the sampling grid: {skipped}",
                      ImagingWarning, stacklevel=2)
    if short:
        warnings.warn(f"{len(short)} directions yielded fewer than {M} separated maxima", ImagingWarning,
                      stacklevel=2)
    return _assemble(pts, tags, vals, skipped, short)


def _assemble(pts, tags, vals, skipped=(), short=()) -> Reconstruction:
    if pts:
        return Reconstruction(np.concatenate(pts), np.concatenate(tags), np.concatenate(vals),
                              skipped=list(skipped), short_directions=list(short))
    return Reconstruction(np.zeros((0, 2)), np.zeros(0, dtype=int), np.zeros(0),
                          skipped=list(skipped), short_directions=list(short))


@dataclass(frozen=True)
class Rectangle:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return ((p[..., 0] >= self.x_min) & (p[..., 0] <= self.x_max)
                & (p[..., 1] >= self.y_min) & (p[..., 1] <= self.y_max))


def split_at_y(grid: SamplingGrid, y: float) -> list[Rectangle]:
    """Lower and upper halves of the sampling domain."""
    return [Rectangle(grid.x_min, grid.x_max, grid.y_min, y), Rectangle(grid.x_min, grid.x_max, y, grid.y_max)]


def aggregate_indicator(dataset: ScatteringDataset, grid: SamplingGrid, clean: bool = False,
                        threads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """A(z) = max_j I(z; d_j) on the whole grid, and the maximising direction."""
    pts = grid.points
    cfg = dataset.config
    data = dataset.data(clean)

    def one(j):
        lam = float(dataset.per_direction_lambda[j])
        return indicator(pts, data[j], dataset.receivers, cfg.k, lam, cfg.arc_weight)

    agg = np.full(grid.size, -np.inf)
    arg = np.zeros(grid.size, dtype=int)
    for j, vals in enumerate(_fan_out(one, list(range(cfg.N_d)), threads)):
        better = vals > agg
        agg[better] = vals[better]
        arg[better] = j
    return agg, arg


def default_per_domain(n_d: int) -> int:
    """Points per subdomain: 512 for 1024 directions, scaled with N_d."""
    return max(1, n_d // 2)


def separated_domain_reconstruct(dataset: ScatteringDataset, grid: SamplingGrid, subdomains,
                                 per_domain_count: int | None = None, min_separation: float | None = None,
                                 clean: bool = False, threads: int | None = None) -> Reconstruction:
    """Strongest maxima of the aggregate indicator inside each subdomain.

    Each grid point is assigned to the first subdomain containing it.  A
    point's direction tag is the direction attaining the aggregate maximum.
    The count defaults to N_d / 2 and the suppression radius to one grid
    cell; the aggregate ridge along the boundary is only a few cells wide,
    so a wider radius pushes the later picks off it.
    """
    if per_domain_count is None:
        per_domain_count = default_per_domain(dataset.config.N_d)
    if min_separation is None:
        min_separation = grid.h
    agg, arg = aggregate_indicator(dataset, grid, clean, threads)
    pts = grid.points
    taken = np.zeros(grid.size, dtype=bool)
    out_p, out_t, out_v, short = [], [], [], []
    for s, rect in enumerate(subdomains):
        member = np.flatnonzero(rect.contains(pts) & ~taken)
        taken[member] = True
        if member.size == 0:
            short.append(s)
            continue
        mx = local_maxima(agg[member], pts[member], per_domain_count, min_separation)
        if mx.short:
            short.append(s)
        chosen = member[mx.member_indices]
        out_p.append(pts[chosen])
        out_t.append(arg[chosen])
        out_v.append(agg[chosen])
    if short:
        warnings.warn(f"subdomains {short} yielded fewer than {per_domain_count} maxima", ImagingWarning,
                      stacklevel=2)
    return _assemble(out_p, out_t, out_v, short=short)


# --------------------------------------------------------------------------
# monopole + dipole fit
# --------------------------------------------------------------------------

def _design(receivers: np.ndarray, k: float, y: np.ndarray) -> np.ndarray:
    diff = receivers - y[None, :]
    r = np.hypot(diff[:, 0], diff[:, 1])
    h0, h1 = hankel1_01(k * r)
    grad = (0.25j * k * h1 / r)[:, None] * diff
    return np.column_stack([0.25j * h0, grad[:, 0], grad[:, 1]])


def point_source_fit(data_row, receivers, k: float, candidates) -> PointSourceFit:
    """Best monopole/dipole source among the candidate locations.

    For each candidate y the data are fitted by c1 Phi(x, y) + p . grad_y
    Phi(x, y) in least squares; candidates with a numerically rank-deficient
    design are skipped.
    """
    data = np.asarray(data_row, dtype=complex).ravel()
    rec = np.asarray(receivers, dtype=float).reshape(-1, 2)
    cand = np.asarray(candidates, dtype=float).reshape(-1, 2)
    if cand.shape[0] == 0:
        raise ImagingError("no candidate source locations")
    if rec.shape[0] < 4 or rec.shape[0] != data.size:
        raise ImagingError("need at least 4 receivers matching the data length")
    norm = np.linalg.norm(data)
    best = None
    for i, y in enumerate(cand):
        a = _design(rec, k, y)
        sv = np.linalg.svd(a, compute_uv=False)
        if sv[-1] <= 1e-12 * sv[0]:
            logger.debug("candidate %d skipped: rank-deficient design", i)
            continue
        coef = np.linalg.lstsq(a, data, rcond=None)[0]
        res = float(np.linalg.norm(a @ coef - data) / norm) if norm > 0 else 0.0
        if best is None or res < best.residual:
            best = PointSourceFit(y.copy(), complex(coef[0]), coef[1:].copy(), min(res, 1.0), i)
    if best is None:
        raise ImagingError("every candidate gave a rank-deficient design")
    return best


# --------------------------------------------------------------------------
# metrics and output
# --------------------------------------------------------------------------

def point_distances(points, truth) -> np.ndarray:
    """Distance from each point to the nearest truth component."""
    if isinstance(truth, BoundaryCurve):
        truth = [truth]
    truth = list(truth)
    if not truth:
        raise ImagingError("no ground-truth curves")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return np.min([np.atleast_1d(distance_to_curve(c, pts)) for c in truth], axis=0)


def reconstruction_metrics(rec: Reconstruction, truth, tol: float) -> dict:
    if len(rec) == 0:
        raise ImagingError("empty reconstruction")
    dist = point_distances(rec.points, truth)
    return {
        "mean_distance": float(dist.mean()),
        "max_distance": float(dist.max()),
        "fraction_within_tol": float(np.mean(dist <= tol)),
        "tol": float(tol),
        "count": int(dist.size),
    }


POINTS_HEADER = "# x y direction_index indicator_value"


def points_to_text(rec: Reconstruction) -> str:
    rows = [POINTS_HEADER]
    for (x, y), j, v in zip(rec.points, rec.direction_index, rec.indicator_value):
        rows.append("%.17g %.17g %d %.17g" % (x, y, j, v))
    return "\n".join(rows) + "\n"


def save_points(rec: Reconstruction, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(points_to_text(rec))


def load_points(path) -> Reconstruction:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != POINTS_HEADER:
        raise ImagingError(f"{path}: not a points table")
    rows = [ln.split() for ln in lines[1:] if ln.strip()]
    if not rows:
        return _assemble([], [], [])
    pts = np.array([[float(r[0]), float(r[1])] for r in rows])
    return Reconstruction(pts, np.array([int(r[2]) for r in rows]), np.array([float(r[3]) for r in rows]))


PGM_MAXVAL = 65535


def heatmap_pgm(imap: IndicatorMap) -> tuple[str, dict]:
    """Plain PGM of one direction's indicator on the parent grid.

    Strip members are min-max scaled to [0, 65535]; grid points outside the
    strip are written as 0.  The first image row is the top (largest y)
    row of the grid.  Returns the PGM text and the sidecar record.
    """
    grid = imap.mesh.parent
    vmin, vmax = float(imap.values.min()), float(imap.values.max())
    span = vmax - vmin
    scaled = np.zeros(grid.size, dtype=np.int64)
    if span > 0:
        scaled[imap.mesh.member_indices] = np.rint((imap.values - vmin) / span * PGM_MAXVAL).astype(np.int64)
    image = scaled.reshape(grid.ny, grid.nx)[::-1]
    lines = ["P2", f"{grid.nx} {grid.ny}", str(PGM_MAXVAL)]
    lines += [" ".join(str(v) for v in row) for row in image]
    side = {
        "direction_index": imap.direction_index,
        "value_min": vmin,
        "value_max": vmax,
        "x_min": grid.x_min, "x_max": grid.x_max, "y_min": grid.y_min, "y_max": grid.y_max,
        "nx": grid.nx, "ny": grid.ny,
        "half_width": imap.mesh.half_width,
        "outside_strip": 0,
    }
    return "\n".join(lines) + "\n", side


def write_heatmap(imap: IndicatorMap, directory) -> str:
    os.makedirs(directory, exist_ok=True)
    stem = os.path.join(directory, f"indicator_d{imap.direction_index:05d}")
    text, side = heatmap_pgm(imap)
    with open(stem + ".pgm", "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    with open(stem + ".txt", "w", encoding="ascii", newline="\n") as fh:
        for key, val in side.items():
            fh.write(f"{key} {'%.17g' % val if isinstance(val, float) else val}\n")
    return stem + ".pgm"
