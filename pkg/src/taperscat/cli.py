"""Command-line front end: ``taperscat simulate | reconstruct | validate``.

Exit codes: 0 success, 1 validation-suite failure, 2 bad arguments,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, fields, replace

from . import __version__
from .forward import DEFAULT_NYSTROM, ForwardSolverError
from .geometry import SHAPE_NAMES, GeometryError, shape_registry
from .imaging import (DEFAULT_SEPARATION_CELLS, ImagingError, SamplingGrid, indicator_map,
                      reconstruct, reconstruction_metrics, save_points, separated_domain_reconstruct,
                      split_at_y, write_heatmap)
from .incident import FORMS
from .synthesis import (ConfigError, DatasetFormatError, MeasurementConfig, SynthesisError,
                        load_dataset, save_dataset, synthesize)
from .validation import run_checks

logger = logging.getLogger("taperscat")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3

TWO_PI = 2.0 * math.pi


class UsageError(ValueError):
    """Bad command-line input (exit code 2)."""


@dataclass
class RunConfig:
    """Everything needed to repeat a simulate or reconstruct run."""

    shape: str = "circle"
    k: float = 25.0
    g: float = 0.01
    nd: int = 128
    nr: int = 256
    radius: float = 5.0
    aperture_start: float = 0.0
    aperture_extent: float = TWO_PI
    noise: float = 0.05
    seed: int = 0
    nystrom: int = DEFAULT_NYSTROM
    taper_form: str = "product"
    grid: tuple = (-2.0, 2.0, -2.0, 2.0, 150, 150)
    M: int = 2
    separation_cells: float = DEFAULT_SEPARATION_CELLS
    mode: str = "standard"
    split_y: float = 0.0
    per_domain: int | None = None
    tol: float = 0.06
    clean: bool = False
    directions: list | None = None
    out: str = ""
    dataset: str = ""
    heatmap_dir: str = ""

    def measurement(self) -> MeasurementConfig:
        return MeasurementConfig(R=self.radius, N_R=self.nr, aperture_start=self.aperture_start,
                                 aperture_extent=self.aperture_extent, N_d=self.nd, k=self.k, g=self.g,
                                 noise_delta=self.noise, seed=self.seed, taper_form=self.taper_form)

    def sampling_grid(self) -> SamplingGrid:
        x0, x1, y0, y1, nx, ny = self.grid
        return SamplingGrid(x0, x1, y0, y1, int(nx), int(ny))


# Desk-scale versions of the published experiments.
PRESETS = {
    "example1": dict(shape="circle", k=25.0, g=0.01, nd=128, nr=256, noise=0.05, M=2, tol=0.06),
    "example2": dict(shape="kite", k=20.0, g=5e-4, nd=256, nr=256, noise=0.05, M=2, tol=0.08),
    "example3": dict(shape="leaf3", k=25.0, g=0.005, nd=128, nr=128, noise=0.05, mode="separated",
                     split_y=0.0, tol=0.08),
    "example4": dict(shape="multi", k=25.0, g=0.05, nd=128, nr=256, radius=10.0, noise=0.05, M=2,
                     grid=(-5.0, 5.0, -5.0, 5.0, 150, 150), tol=0.1),
}


def _parse_grid(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 6:
        raise argparse.ArgumentTypeError("grid must be xmin,xmax,ymin,ymax,nx,ny")
    try:
        return (float(parts[0]), float(parts[1]), float(parts[2]), float(parts[3]), int(parts[4]), int(parts[5]))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid spec {text!r}") from None


def _parse_aperture(text: str) -> tuple:
    """``EXTENT`` or ``START,EXTENT`` in radians; ``pi`` is accepted."""
    def num(s):
        s = s.strip().lower()
        scale = 1.0
        if "pi" in s:
            head = s.replace("*", "").replace("pi", "")
            if "/" in head:
                a, b = head.split("/")
                scale = (float(a) if a else 1.0) / float(b)
                head = ""
            return math.pi * scale * (float(head) if head else 1.0)
        return float(s)
    try:
        parts = [num(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad aperture {text!r}") from None
    if len(parts) == 1:
        return 0.0, parts[0]
    if len(parts) == 2:
        return parts[0], parts[1]
    raise argparse.ArgumentTypeError("aperture must be EXTENT or START,EXTENT")


def _parse_directions(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad direction list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taperscat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--shape", choices=SHAPE_NAMES)
    common.add_argument("--k", type=float)
    common.add_argument("--g", type=float)
    common.add_argument("--nd", type=int)
    common.add_argument("--nr", type=int)
    common.add_argument("--radius", type=float)
    common.add_argument("--aperture", type=_parse_aperture, help="EXTENT or START,EXTENT (radians, 'pi' allowed)")
    common.add_argument("--noise", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--nystrom", type=int)
    common.add_argument("--taper-form", choices=FORMS)
    common.add_argument("--threads", type=int, help="worker pool size (default: TAPERSCAT_THREADS or CPU count)")

    sim = sub.add_parser("simulate", parents=[common], help="synthesise a dataset")
    sim.add_argument("--out", required=True)

    rec = sub.add_parser("reconstruct", parents=[common], help="image a dataset")
    rec.add_argument("--data", "--dataset", dest="dataset", required=True)
    rec.add_argument("--out", required=True)
    rec.add_argument("--grid", type=_parse_grid)
    rec.add_argument("--M", type=int)
    rec.add_argument("--separation", type=float, dest="separation_cells",
                     help="NMS radius in grid cells (standard mode)")
    rec.add_argument("--mode", choices=("standard", "separated"))
    rec.add_argument("--split-y", type=float)
    rec.add_argument("--per-domain", type=int, help="points per subdomain in separated mode (default N_d/2)")
    rec.add_argument("--tol", type=float, help="distance tolerance for the printed metrics")
    rec.add_argument("--clean", action="store_true", default=None, help="image the noiseless matrix")
    rec.add_argument("--heatmap-dir")
    rec.add_argument("--directions", type=_parse_directions, help="comma-separated direction indices")

    val = sub.add_parser("validate", help="run the numerical self-checks")
    val.add_argument("--eta-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "preset", None):
        cfg = replace(cfg, **PRESETS[args.preset])
    names = {f.name for f in fields(RunConfig)}
    for name in names:
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(args, "aperture", None) is not None:
        cfg.aperture_start, cfg.aperture_extent = args.aperture
    return cfg


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path: str, command: str, cfg: RunConfig, outputs: list[str], extra: dict | None = None) -> str:
    doc = {
        "tool": "taperscat",
        "version": __version__,
        "command": command,
        "config": asdict(cfg),
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
    }
    if extra:
        doc.update(extra)
    mpath = path + ".manifest.json"
    with open(mpath, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return mpath


def config_from_manifest(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    data = doc["config"]
    data["grid"] = tuple(data["grid"])
    return RunConfig(**data)


def run_simulate(cfg: RunConfig, threads: int | None = None) -> str:
    meas = cfg.measurement()
    obstacles = shape_registry(cfg.shape)
    ds = synthesize(obstacles, meas, cfg.nystrom, shape=cfg.shape, threads=threads)
    save_dataset(ds, cfg.out)
    write_manifest(cfg.out, "simulate", cfg, [cfg.out])
    return cfg.out


def run_reconstruct(cfg: RunConfig, threads: int | None = None) -> dict:
    ds = load_dataset(cfg.dataset)
    grid = cfg.sampling_grid()
    if cfg.mode == "separated":
        rec = separated_domain_reconstruct(ds, grid, split_at_y(grid, cfg.split_y), cfg.per_domain,
                                           clean=cfg.clean, threads=threads)
    elif cfg.mode == "standard":
        rec = reconstruct(ds, grid, cfg.M, min_separation=cfg.separation_cells * grid.h,
                          directions=cfg.directions, clean=cfg.clean, threads=threads)
    else:
        raise UsageError(f"unknown mode {cfg.mode!r}")
    if len(rec) == 0:
        raise ImagingError("no direction produced any point")
    save_points(rec, cfg.out)
    outputs = [cfg.out]
    if cfg.heatmap_dir:
        wanted = cfg.directions if cfg.directions is not None else range(ds.config.N_d)
        for j in wanted:
            if not 0 <= j < ds.config.N_d:
                raise UsageError(f"direction index {j} out of range")
            outputs.append(write_heatmap(indicator_map(ds, grid, j, cfg.clean), cfg.heatmap_dir))
    metrics = None
    truth_name = ds.shape or cfg.shape
    if truth_name:
        truth = ds.obstacles or tuple(shape_registry(truth_name))
        metrics = reconstruction_metrics(rec, truth, cfg.tol)
    write_manifest(cfg.out, "reconstruct", cfg, outputs,
                   {"dataset_sha256": _sha256(cfg.dataset), "metrics": metrics})
    return {"points": len(rec), "metrics": metrics, "outputs": outputs}


def run_validate(eta_scale: float = 1.0, stream=None) -> tuple[bool, list]:
    stream = stream or sys.stdout
    results = run_checks(eta_scale)
    for r in results:
        print(r.line(), file=stream)
    ok = all(r.passed for r in results)
    failed = [r.name for r in results if not r.passed]
    print("all checks passed" if ok else f"FAILED: {'; '.join(failed)}", file=stream)
    return ok, results


def _attach_list_values(argv):
    # "--grid -2,2,..." would otherwise be read as an unknown option
    out, rest = [], list(argv)
    while rest:
        tok = rest.pop(0)
        if tok in ("--grid", "--aperture") and rest and rest[0].startswith("-"):
            tok = f"{tok}={rest.pop(0)}"
        out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _attach_list_values(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate":
        ok, _ = run_validate(args.eta_scale)
        return EXIT_OK if ok else EXIT_VALIDATION

    stage = "configuration"
    try:
        cfg = config_from_args(args)
        if args.command == "simulate":
            if cfg.shape not in SHAPE_NAMES:
                raise UsageError(f"unknown shape {cfg.shape!r}")
            cfg.measurement()
            stage = "simulate"
            path = run_simulate(cfg, args.threads)
            print(f"wrote {path} ({cfg.nd} x {cfg.nr} entries)")
        else:
            cfg.sampling_grid()
            if cfg.M < 1 or (cfg.per_domain is not None and cfg.per_domain < 1):
                raise UsageError("M and --per-domain must be positive")
            stage = "reconstruct"
            with warnings.catch_warnings():
                warnings.simplefilter("default")
                summary = run_reconstruct(cfg, args.threads)
            print(f"wrote {cfg.out} ({summary['points']} points)")
            m = summary["metrics"]
            if m:
                print(f"mean distance {m['mean_distance']:.4g}, max {m['max_distance']:.4g}, "
                      f"fraction within {m['tol']:g}: {m['fraction_within_tol']:.4f}")
    except (UsageError, ConfigError, GeometryError) as exc:
        print(f"taperscat {args.command}: {stage}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ImagingError as exc:
        code = EXIT_USAGE if stage == "configuration" else EXIT_RUNTIME
        print(f"taperscat {args.command}: {stage}: {exc}", file=sys.stderr)
        return code
    except (SynthesisError, ForwardSolverError, DatasetFormatError, OSError) as exc:
        print(f"taperscat {args.command}: {stage}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
