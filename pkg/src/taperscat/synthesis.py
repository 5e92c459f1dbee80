"""Synthetic near-field measurements for tapered-wave incidence.

Receivers sit on (an arc of) the circle of radius R.  For every incident
direction the forward problem is solved and the scattered field recorded;
multiplicative noise u + delta r1 |u| exp(i pi r2) is then added with a
counter-based generator, so each entry's noise depends only on
(seed, direction, receiver) and never on evaluation order.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .forward import DEFAULT_NYSTROM, NystromSolver
from .geometry import BoundaryCurve, GeometryError
from .incident import FORMS, TaperedWave

FORMAT_VERSION = "taperscat-ds-1"
THREADS_ENV = "TAPERSCAT_THREADS"
_SEED_MASK = (1 << 64) - 1
TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Invalid measurement configuration."""


class SynthesisError(RuntimeError):
    """The forward solve failed for some incident direction."""


class DatasetFormatError(ValueError):
    """A dataset file is malformed or of an unsupported version."""


@dataclass(frozen=True)
class MeasurementConfig:
    """Receiver layout, incident beams, and noise of one experiment."""

    R: float = 5.0
    N_R: int = 512
    aperture_start: float = 0.0
    aperture_extent: float = 2.0 * math.pi
    N_d: int = 2048
    k: float = 25.0
    g: float = 0.01
    noise_delta: float = 0.05
    seed: int = 0
    taper_form: str = "product"

    def __post_init__(self):
        if not self.R > 0:
            raise ConfigError("measurement radius must be positive")
        if int(self.N_R) != self.N_R or self.N_R < 2:
            raise ConfigError("N_R must be an integer >= 2")
        if int(self.N_d) != self.N_d or self.N_d < 1:
            raise ConfigError("N_d must be an integer >= 1")
        if not 0 < self.aperture_extent <= 2.0 * math.pi:
            raise ConfigError("aperture extent must lie in (0, 2*pi]")
        if not (self.k > 0 and self.g > 0):
            raise ConfigError("k and g must be positive")
        if not 0 <= self.noise_delta < 1:
            raise ConfigError("noise level must lie in [0, 1)")
        if int(self.seed) != self.seed or not 0 <= self.seed <= _SEED_MASK:
            raise ConfigError("seed must be an integer in [0, 2**64)")
        if self.taper_form not in FORMS:
            raise ConfigError(f"taper form must be one of {FORMS}")
        for name in ("N_R", "N_d", "seed"):
            object.__setattr__(self, name, int(getattr(self, name)))
        for name in ("R", "aperture_start", "aperture_extent", "k", "g", "noise_delta"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def full_aperture(self) -> bool:
        return self.aperture_extent == 2.0 * math.pi

    @property
    def arc_weight(self) -> float:
        """Receiver spacing R * extent / N_R (trapezoidal arc-length weight)."""
        return self.R * self.aperture_extent / self.N_R

    def check_obstacles(self, obstacles) -> None:
        for c in obstacles:
            if not self.R > c.circumradius:
                raise ConfigError(
                    f"R={self.R} must exceed the circumscribed radius {c.circumradius:.4g} of {c.name or c.kind}")


@dataclass
class ScatteringDataset:
    """Measured scattered fields, one row per direction, one column per receiver."""

    config: MeasurementConfig
    directions: np.ndarray
    receivers: np.ndarray
    clean: np.ndarray
    noisy: np.ndarray
    per_direction_lambda: np.ndarray
    obstacles: tuple[BoundaryCurve, ...] = ()
    n_nystrom: int = DEFAULT_NYSTROM
    shape: str = field(default="")

    def data(self, clean: bool = False) -> np.ndarray:
        return self.clean if clean else self.noisy


def build_receivers(config: MeasurementConfig) -> np.ndarray:
    """N_R points at radius R, equispaced over [start, start + extent)."""
    ang = config.aperture_start + config.aperture_extent * np.arange(config.N_R) / config.N_R
    return config.R * np.stack([np.cos(ang), np.sin(ang)], -1)


def direction_angles(n_d: int) -> np.ndarray:
    if int(n_d) != n_d or n_d < 1:
        raise ConfigError("N_d must be an integer >= 1")
    return TWO_PI * np.arange(n_d) / n_d + math.pi / n_d


def build_directions(n_d: int) -> np.ndarray:
    """Unit vectors at angles 2 pi j / N_d + pi / N_d.

    The half-step offset keeps every direction off the coordinate axes, where
    the taper bandwidth g |d_2| or the transverse factor would degenerate.
    """
    ang = direction_angles(n_d)
    return np.stack([np.cos(ang), np.sin(ang)], -1)


def noise_draws(seed: int, row: int, count: int) -> np.ndarray:
    """2 * count uniform numbers in [-1, 1) for one row of the data matrix.

    Philox is keyed by the seed and started at counter (0, 0, row, 0), so a
    row's draws are independent of every other row.  Receiver i uses the
    draws 2i and 2i + 1.
    """
    bitgen = np.random.Philox(key=int(seed) & _SEED_MASK, counter=[0, 0, int(row), 0])
    return 2.0 * np.random.Generator(bitgen).random(2 * count) - 1.0


def add_noise(clean, delta: float, seed: int) -> np.ndarray:
    """u + delta r1 |u| exp(i pi r2), entrywise."""
    clean = np.asarray(clean, dtype=complex)
    if not 0 <= delta < 1:
        raise ConfigError("noise level must lie in [0, 1)")
    if delta == 0:
        return clean.copy()
    matrix = np.atleast_2d(clean)
    out = np.empty_like(matrix)
    for j, row in enumerate(matrix):
        r = noise_draws(seed, j, row.size)
        r1, r2 = r[0::2], r[1::2]
        out[j] = row + delta * r1 * np.abs(row) * np.exp(1j * math.pi * r2)
    return out.reshape(clean.shape)


def worker_count(limit: int | None = None) -> int:
    """Thread-pool size: TAPERSCAT_THREADS if set, else the CPU count."""
    env = os.environ.get(THREADS_ENV)
    n = int(env) if env else (os.cpu_count() or 1)
    if limit is not None:
        n = min(n, limit)
    return max(1, n)


def synthesize(obstacles, config: MeasurementConfig, n_nystrom: int = DEFAULT_NYSTROM,
               shape: str = "", threads: int | None = None) -> ScatteringDataset:
    """Solve the forward problem for every direction and record the data.

    The Nystrom matrix is factorised once; directions are then solved on a
    thread pool and written back by index, so the result does not depend on
    the pool size or completion order.
    """
    if isinstance(obstacles, BoundaryCurve):
        obstacles = [obstacles]
    obstacles = tuple(obstacles)
    config.check_obstacles(obstacles)
    if int(n_nystrom) != n_nystrom or n_nystrom < 32 or n_nystrom % 2:
        raise ConfigError(f"Nystrom node count must be even and >= 32, got {n_nystrom}")
    if config.N_d % 4:
        # (2j + 1) pi / N_d hits a multiple of pi/2 unless 4 divides N_d
        raise ConfigError(f"N_d={config.N_d} puts an incident direction on a coordinate axis; "
                          "use a multiple of 4")
    receivers = build_receivers(config)
    directions = build_directions(config.N_d)
    try:
        solver = NystromSolver(obstacles, config.k, n_nystrom)
    except (GeometryError, ValueError, RuntimeError) as exc:
        raise SynthesisError(f"forward solver setup failed: {exc}") from exc
    emat = solver.field_matrix(receivers)

    def one(j: int) -> np.ndarray:
        try:
            wave = TaperedWave(config.k, config.g, tuple(directions[j]), config.taper_form)
            phi = solver.solve(wave).density
        except Exception as exc:
            raise SynthesisError(f"forward solve failed for direction {j}: {exc}") from exc
        return (emat * phi[None, :]).sum(axis=1)

    clean = np.empty((config.N_d, config.N_R), complex)
    pool_size = threads if threads is not None else worker_count(config.N_d)
    if pool_size <= 1:
        for j in range(config.N_d):
            clean[j] = one(j)
    else:
        with ThreadPoolExecutor(max_workers=pool_size) as pool:
            for j, row in enumerate(pool.map(one, range(config.N_d))):
                clean[j] = row
    noisy = add_noise(clean, config.noise_delta, config.seed)
    lam = config.g * np.abs(directions[:, 1])
    return ScatteringDataset(config, directions, receivers, clean, noisy, lam, obstacles,
                             int(n_nystrom), shape)


# --------------------------------------------------------------------------
# dataset file
# --------------------------------------------------------------------------

def _f(x: float) -> str:
    return "%.17g" % x


def _parse_float(text: str) -> float:
    return float(text)


def dataset_to_text(ds: ScatteringDataset) -> str:
    buf = io.StringIO()
    w = buf.write
    w(f"format {FORMAT_VERSION}\n")
    for fl in fields(MeasurementConfig):
        val = getattr(ds.config, fl.name)
        w(f"{fl.name} {_f(val) if isinstance(val, float) else val}\n")
    w(f"n_nystrom {ds.n_nystrom}\n")
    w(f"shape {ds.shape or '-'}\n")
    w(f"obstacles {len(ds.obstacles)}\n")
    for c in ds.obstacles:
        vals = [c.name or c.kind, c.kind, str(len(c.params))]
        vals += [_f(p) for p in c.params]
        vals += [_f(c.center_offset[0]), _f(c.center_offset[1]), _f(c.rotation)]
        w("obstacle " + " ".join(vals) + "\n")
    w(f"receivers {len(ds.receivers)}\n")
    for x, y in ds.receivers:
        w(f"{_f(x)} {_f(y)}\n")
    w(f"directions {len(ds.directions)}\n")
    for (x, y), lam in zip(ds.directions, ds.per_direction_lambda):
        w(f"{_f(x)} {_f(y)} {_f(lam)}\n")
    for name in ("clean", "noisy"):
        mat = getattr(ds, name)
        w(f"{name} {mat.shape[0]} {mat.shape[1]}\n")
        for row in mat:
            w(" ".join(f"{_f(v.real)} {_f(v.imag)}" for v in row) + "\n")
    w("end\n")
    return buf.getvalue()


def save_dataset(ds: ScatteringDataset, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dataset_to_text(ds))


def _expect(lines, key: str) -> list[str]:
    try:
        parts = next(lines).split()
    except StopIteration:
        raise DatasetFormatError(f"unexpected end of file, wanted {key!r}") from None
    if not parts or parts[0] != key:
        raise DatasetFormatError(f"expected {key!r}, found {' '.join(parts)[:40]!r}")
    return parts[1:]


def dataset_from_text(text: str) -> ScatteringDataset:
    lines = iter(text.splitlines())
    version = _expect(lines, "format")
    if version != [FORMAT_VERSION]:
        raise DatasetFormatError(f"unsupported dataset version {' '.join(version)!r}")
    try:
        kwargs = {}
        for fl in fields(MeasurementConfig):
            (raw,) = _expect(lines, fl.name)
            kwargs[fl.name] = raw if fl.type == "str" else (int(raw) if fl.type == "int" else float(raw))
        config = MeasurementConfig(**kwargs)
        (n_nystrom,) = _expect(lines, "n_nystrom")
        (shape,) = _expect(lines, "shape")
        (n_obs,) = _expect(lines, "obstacles")
        obstacles = []
        for _ in range(int(n_obs)):
            parts = _expect(lines, "obstacle")
            name, kind, n_par = parts[0], parts[1], int(parts[2])
            params = tuple(_parse_float(p) for p in parts[3:3 + n_par])
            ox, oy, rot = (_parse_float(p) for p in parts[3 + n_par:6 + n_par])
            obstacles.append(BoundaryCurve(kind, params, (ox, oy), rot, name))
        (n_r,) = _expect(lines, "receivers")
        receivers = np.array([[_parse_float(v) for v in next(lines).split()] for _ in range(int(n_r))])
        (n_d,) = _expect(lines, "directions")
        rows = np.array([[_parse_float(v) for v in next(lines).split()] for _ in range(int(n_d))])
        mats = {}
        for name in ("clean", "noisy"):
            nrow, ncol = (int(v) for v in _expect(lines, name))
            mat = np.empty((nrow, ncol), complex)
            for j in range(nrow):
                vals = np.array([_parse_float(v) for v in next(lines).split()])
                if vals.size != 2 * ncol:
                    raise DatasetFormatError(f"{name} row {j} has {vals.size // 2} entries, expected {ncol}")
                mat[j].real = vals[0::2]
                mat[j].imag = vals[1::2]
            mats[name] = mat
        _expect(lines, "end")
    except (StopIteration, ValueError, GeometryError) as exc:
        if isinstance(exc, DatasetFormatError):
            raise
        raise DatasetFormatError(f"malformed dataset: {exc}") from exc
    if receivers.shape != (config.N_R, 2) or rows.shape != (config.N_d, 3):
        raise DatasetFormatError("receiver/direction counts disagree with the header")
    for mat in mats.values():
        if mat.shape != (config.N_d, config.N_R):
            raise DatasetFormatError("data matrix shape disagrees with the header")
    return ScatteringDataset(config, rows[:, :2].copy(), receivers, mats["clean"], mats["noisy"],
                             rows[:, 2].copy(), tuple(obstacles), int(n_nystrom),
                             "" if shape == "-" else shape)


def load_dataset(path) -> ScatteringDataset:
    with open(path, "r", encoding="ascii") as fh:
        return dataset_from_text(fh.read())


def config_dict(config: MeasurementConfig) -> dict:
    return asdict(config)
