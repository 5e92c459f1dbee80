"""Closed parametric boundary curves used as obstacles.

Every curve is parametrised over t in [0, 2*pi) with hand-differentiated first
and second derivatives; the Nystrom solver needs exact jacobians and the
curvature term of the double-layer kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * math.pi
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_DISTANCE_GRID = 4096
_GOLDEN_ITERATIONS = 60

KINDS = ("circle", "kite", "l_leaf", "peanut", "pear")


class GeometryError(ValueError):
    """Invalid curve description or sampling request."""


@dataclass(frozen=True)
class BoundaryCurve:
    """A smooth simple closed curve.

    ``params`` depends on ``kind``:

    - circle: ``(radius,)``
    - kite: ``()``
    - l_leaf: ``(L,)``, the number of leaves
    - peanut: ``()``
    - pear: ``()``

    ``center_offset`` translates and ``rotation`` (radians, about the curve's
    own origin) rotates the base shape.
    """

    kind: str
    params: tuple[float, ...] = ()
    center_offset: tuple[float, float] = (0.0, 0.0)
    rotation: float = 0.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeometryError(f"unknown shape kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "center_offset", tuple(float(c) for c in self.center_offset))
        if self.kind == "circle" and (len(self.params) != 1 or self.params[0] <= 0):
            raise GeometryError("circle needs one positive radius")
        if self.kind == "l_leaf" and (len(self.params) != 1 or self.params[0] < 1):
            raise GeometryError("l_leaf needs the leaf count L >= 1")

    def base(self, t: np.ndarray):
        """Un-rotated, un-shifted position and its first two t-derivatives."""
        c, s = np.cos(t), np.sin(t)
        if self.kind == "circle":
            r = self.params[0]
            return (np.stack([r * c, r * s], -1), np.stack([-r * s, r * c], -1),
                    np.stack([-r * c, -r * s], -1))
        if self.kind == "kite":
            c2, s2 = np.cos(2 * t), np.sin(2 * t)
            x = np.stack([c + 0.65 * c2 - 0.65, 1.5 * s], -1)
            dx = np.stack([-s - 1.3 * s2, 1.5 * c], -1)
            ddx = np.stack([-c - 2.6 * c2, -1.5 * s], -1)
            return x, dx, ddx
        if self.kind == "l_leaf":
            n_leaf = self.params[0]
            r = 1.0 + 0.2 * np.cos(n_leaf * t)
            dr = -0.2 * n_leaf * np.sin(n_leaf * t)
            ddr = -0.2 * n_leaf**2 * np.cos(n_leaf * t)
            return _polar(r, dr, ddr, c, s)
        if self.kind == "pear":
            r = 1.0 + 0.15 * np.cos(3 * t)
            dr = -0.45 * np.sin(3 * t)
            ddr = -1.35 * np.cos(3 * t)
            return _polar(r, dr, ddr, c, s)
        # peanut: sqrt(3 cos^2 t + 1) (cos(t + pi/4), sin(t + pi/4))
        q = 3.0 * c * c + 1.0
        r = np.sqrt(q)
        dq = -6.0 * c * s
        ddq = -6.0 * (c * c - s * s)
        dr = dq / (2.0 * r)
        ddr = ddq / (2.0 * r) - dq * dq / (4.0 * r * q)
        phase = t + math.pi / 4.0
        return _polar(r, dr, ddr, np.cos(phase), np.sin(phase))

    def derivatives(self, t):
        """Position, first and second derivative arrays of shape (..., 2)."""
        t = np.asarray(t, dtype=float)
        x, dx, ddx = self.base(t)
        if self.rotation:
            rot = _rotation_matrix(self.rotation)
            x, dx, ddx = x @ rot.T, dx @ rot.T, ddx @ rot.T
        return x + np.asarray(self.center_offset), dx, ddx

    @cached_property
    def orientation(self) -> float:
        """+1 for counter-clockwise parametrisation, -1 otherwise."""
        t = np.linspace(0.0, TWO_PI, 512, endpoint=False)
        x, dx, _ = self.derivatives(t)
        area = 0.5 * np.mean(x[:, 0] * dx[:, 1] - x[:, 1] * dx[:, 0]) * TWO_PI
        return 1.0 if area > 0 else -1.0

    @cached_property
    def polygon(self) -> np.ndarray:
        """Dense polygon used by distance and containment queries."""
        t = np.linspace(0.0, TWO_PI, _DISTANCE_GRID, endpoint=False)
        return self.derivatives(t)[0]

    @property
    def circumradius(self) -> float:
        """Largest distance from the origin to the curve."""
        return float(np.max(np.hypot(self.polygon[:, 0], self.polygon[:, 1])))

    @property
    def centroid(self) -> np.ndarray:
        return self.polygon.mean(axis=0)


def _polar(r, dr, ddr, c, s):
    x = np.stack([r * c, r * s], -1)
    dx = np.stack([dr * c - r * s, dr * s + r * c], -1)
    ddx = np.stack([(ddr - r) * c - 2 * dr * s, (ddr - r) * s + 2 * dr * c], -1)
    return x, dx, ddx


def _rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class CurveSample:
    """Curve data at one or many parameter values.

    Fields are arrays; with a scalar ``t`` they have shape (2,) or (), with
    an array of n parameters a leading axis of length n.  Indexing an
    array-valued sample returns the single sample.
    """

    t: np.ndarray
    position: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    jacobian: np.ndarray
    second_derivative: np.ndarray

    def __len__(self) -> int:
        return 1 if np.ndim(self.t) == 0 else len(self.t)

    def __getitem__(self, i):
        if np.ndim(self.t) == 0:
            raise TypeError("scalar CurveSample is not indexable")
        return CurveSample(self.t[i], self.position[i], self.tangent[i], self.normal[i],
                           self.jacobian[i], self.second_derivative[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def curvature_numerator(self) -> np.ndarray:
        """x1' x2'' - x2' x1'' (signed curvature times jacobian cubed)."""
        d, dd = self.tangent, self.second_derivative
        return d[..., 0] * dd[..., 1] - d[..., 1] * dd[..., 0]


def evaluate(curve: BoundaryCurve, t) -> CurveSample:
    """Position, tangent, outward unit normal and jacobian at ``t``."""
    if not isinstance(curve, BoundaryCurve):
        raise GeometryError(f"not a BoundaryCurve: {curve!r}")
    t = np.mod(np.asarray(t, dtype=float), TWO_PI)
    x, dx, ddx = curve.derivatives(t)
    jac = np.hypot(dx[..., 0], dx[..., 1])
    normal = curve.orientation * np.stack([dx[..., 1], -dx[..., 0]], -1) / jac[..., None]
    return CurveSample(t, x, dx, normal, jac, ddx)


def sample_nodes(curve: BoundaryCurve, n: int) -> CurveSample:
    """Evaluate the curve at the equispaced nodes t_j = 2 pi j / n."""
    if int(n) != n or n < 4 or n % 2:
        raise GeometryError(f"node count must be an even integer >= 4, got {n}")
    return evaluate(curve, TWO_PI * np.arange(int(n)) / n)


def closest_point(curve: BoundaryCurve, p):
    """Parameter of the nearest curve point and the distance to it.

    A 4096-node grid picks the bracketing parameter interval, which a
    60-step golden-section search then refines.
    """
    pts = np.asarray(p, dtype=float)
    flat = pts.reshape(-1, 2)
    poly = curve.polygon
    h = TWO_PI / _DISTANCE_GRID
    best = np.empty(flat.shape[0], dtype=int)
    for lo in range(0, flat.shape[0], 256):
        chunk = flat[lo:lo + 256]
        d2 = ((chunk[:, None, :] - poly[None, :, :]) ** 2).sum(-1)
        best[lo:lo + 256] = d2.argmin(axis=1)

    def dist(t):
        x = curve.derivatives(t)[0]
        return np.hypot(x[:, 0] - flat[:, 0], x[:, 1] - flat[:, 1])

    a = (best - 1) * h
    b = (best + 1) * h
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = dist(c), dist(d)
    for _ in range(_GOLDEN_ITERATIONS):
        left = fc < fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        c_new = np.where(left, b - _GOLDEN * (b - a), d)
        d_new = np.where(left, c, a + _GOLDEN * (b - a))
        fc, fd = np.where(left, dist(c_new), fd), np.where(left, fc, dist(d_new))
        c, d = c_new, d_new
    mid = 0.5 * (a + b)
    cand_t = np.stack([c, d, mid])
    cand_f = np.stack([fc, fd, dist(mid)])
    pick = cand_f.argmin(axis=0)
    cols = np.arange(flat.shape[0])
    t_best = np.mod(cand_t[pick, cols], TWO_PI)
    f_best = cand_f[pick, cols]
    if pts.ndim == 1:
        return float(t_best[0]), float(f_best[0])
    return t_best.reshape(pts.shape[:-1]), f_best.reshape(pts.shape[:-1])


def distance_to_curve(curve: BoundaryCurve, p) -> np.ndarray | float:
    """Euclidean distance from point(s) ``p`` to the curve."""
    return closest_point(curve, p)[1]


def contains(curve: BoundaryCurve, p) -> np.ndarray | bool:
    """True for points strictly inside the curve (winding number test)."""
    pts = np.asarray(p, dtype=float)
    flat = pts.reshape(-1, 2)
    poly = curve.polygon
    nxt = np.roll(poly, -1, axis=0)
    inside = np.zeros(flat.shape[0], dtype=bool)
    for lo in range(0, flat.shape[0], 256):
        q = flat[lo:lo + 256, None, :]
        a = poly[None] - q
        b = nxt[None] - q
        ang = np.arctan2(a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0], (a * b).sum(-1))
        inside[lo:lo + 256] = np.abs(ang.sum(axis=1)) > math.pi
    return bool(inside[0]) if pts.ndim == 1 else inside.reshape(pts.shape[:-1])


def _make(kind, params=(), offset=(0.0, 0.0), name=""):
    return BoundaryCurve(kind, tuple(params), tuple(offset), 0.0, name or kind)


def shape_registry(name: str) -> list[BoundaryCurve]:
    """Obstacle components addressed by name.

    Single shapes are centred at the origin; ``"multi"`` is the three-body
    composite (peanut, shifted kite, pear) at its published positions.
    """
    table = {
        "circle": lambda: [_make("circle", (1.0,))],
        "kite": lambda: [_make("kite")],
        "leaf3": lambda: [_make("l_leaf", (3,), name="leaf3")],
        "leaf4": lambda: [_make("l_leaf", (4,), name="leaf4")],
        "leaf5": lambda: [_make("l_leaf", (5,), name="leaf5")],
        "peanut": lambda: [_make("peanut")],
        "pear": lambda: [_make("pear")],
        "multi": lambda: [
            _make("peanut", offset=(-2.0, 2.0)),
            _make("kite", offset=(0.0, -3.0)),
            _make("pear", offset=(3.0, 2.0)),
        ],
    }
    try:
        return table[name]()
    except KeyError:
        raise GeometryError(f"unknown shape name {name!r}; choose from {sorted(table)}") from None


SHAPE_NAMES = ("circle", "kite", "leaf3", "leaf4", "leaf5", "peanut", "pear", "multi")
