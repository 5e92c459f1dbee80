"""Self-checks of the numerical core against independent references.

Each check returns a :class:`CheckResult` carrying the measured error and
its tolerance, so a report shows magnitudes and not just verdicts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import specfun
from .forward import NystromSolver, boundary_traces, eval_scattered, greens_rep_eval, mie_series_reference
from .geometry import shape_registry
from .incident import PlaneWave, TaperedWave, pde_residual

# k = j_{1,1}: an interior Neumann eigenvalue of the unit disk, where the
# pure double-layer equation (eta = 0) is singular.
RESONANT_K = 3.8317059702075123

# Zeros of J_n and Y_n, n = 0, 1, 2, from 30-digit arithmetic.
BESSEL_ZEROS = {
    ("J", 0): (2.4048255576957728, 5.5200781102863106, 8.6537279129110122),
    ("J", 1): (3.8317059702075123, 7.0155866698156188, 10.173468135062722),
    ("J", 2): (5.1356223018406826, 8.4172441403998649, 11.619841172149059),
    ("Y", 0): (0.89357696627916752, 3.9576784193148579, 7.0860510603017727),
    ("Y", 1): (2.197141326031017, 5.4296810407941351, 8.5960058683311689),
    ("Y", 2): (3.3842417671495935, 6.7938075132682675, 10.023477979360038),
}

PDE_THETA = 0.9 * math.pi
PDE_SEED = 20240
PDE_POINTS = 50


@dataclass
class CheckResult:
    name: str
    error: float
    tolerance: float
    seconds: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error)) and self.error <= self.tolerance

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{verdict}  {self.name}: error {self.error:.3e} <= {self.tolerance:.1e}, {self.seconds:.2f}s{extra}"


def _timed(name, tol, func) -> CheckResult:
    t0 = time.perf_counter()
    try:
        err, detail = func()
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        err, detail = math.inf, f"{type(exc).__name__}: {exc}"
    return CheckResult(name, float(err), tol, time.perf_counter() - t0, detail)


def receivers_on_circle(radius: float, count: int) -> np.ndarray:
    ang = 2.0 * math.pi * np.arange(count) / count
    return radius * np.stack([np.cos(ang), np.sin(ang)], -1)


def mie_error(k: float, n: int = 256, eta_scale: float = 1.0, direction=(1.0, 0.0)) -> float:
    """Relative l2 error of the Nystrom field against the series, 64 points on |x| = 5."""
    circle = shape_registry("circle")
    x = receivers_on_circle(5.0, 64)
    solver = NystromSolver(circle, k, n, eta=eta_scale * k)
    u = eval_scattered(solver.solve(PlaneWave(k, direction)), x)
    ref = mie_series_reference(1.0, k, direction, x)
    return float(np.linalg.norm(u - ref) / np.linalg.norm(ref))


def pde_sample_points(wave: TaperedWave, count: int = PDE_POINTS, seed: int = PDE_SEED) -> np.ndarray:
    """Seeded points in the unit disk where the Gaussian factor is >= 1e-12."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p = rng.uniform(-1.0, 1.0, 2)
        if p @ p <= 1.0 and wave.gaussian(p) >= 1e-12:
            out.append(p)
    return np.array(out)


def pde_residuals(k: float = 25.0, g: float = 0.1, theta: float = PDE_THETA):
    """Max normalised residual at h = 1e-3 and h = 1e-4 for the exponent form."""
    wave = TaperedWave.from_angle(k, g, theta, form="exponent")
    pts = pde_sample_points(wave)
    coarse = float(np.max(pde_residual(wave, pts, 1e-3)))
    fine = float(np.max(pde_residual(wave, pts, 1e-4)))
    return coarse, fine


def greens_error(k: float = 25.0, g: float = 0.01, theta: float = PDE_THETA, n: int = 512,
                 illuminated: bool = False) -> float:
    """Green representation vs the layer potential at 16 points on |x| = 5.

    With ``illuminated`` the boundary integral is restricted to the arc
    where |u^i| >= 1e-3 max |u^i|.
    """
    circle = shape_registry("circle")
    wave = TaperedWave.from_angle(k, g, theta)
    sol = NystromSolver(circle, k, n).solve(wave)
    x = receivers_on_circle(5.0, 16)
    direct = eval_scattered(sol, x)
    traces = boundary_traces(sol)
    mask = None
    if illuminated:
        amp = np.abs(wave(traces.nodes.position))
        mask = amp >= 1e-3 * amp.max()
    rep = greens_rep_eval(sol, x, traces=traces, mask=mask)
    return float(np.linalg.norm(rep - direct) / np.linalg.norm(direct))


def specfun_errors() -> dict[str, float]:
    """Wronskian, recurrence and zero-location errors over a fixed sample."""
    x = np.concatenate([np.geomspace(1e-3, 1.0, 40), np.linspace(1.0, 60.0, 200)])
    nmax = 30
    jn = specfun.bessel_j_orders(nmax + 1, x)
    yn = specfun.bessel_y_orders(nmax + 1, x)
    wr = jn[1:] * yn[:-1] - jn[:-1] * yn[1:]
    target = 2.0 / (math.pi * x)
    scale = np.abs(jn[1:] * yn[:-1]) + np.abs(jn[:-1] * yn[1:])
    wronskian = float(np.max(np.abs(wr - target) / np.maximum(target, scale)))
    n = np.arange(1, nmax + 1)[:, None]
    rec = jn[:-2] + jn[2:] - (2.0 * n / x) * jn[1:-1]
    rec_scale = np.abs(jn[:-2]) + np.abs(jn[2:]) + np.abs(2.0 * n / x * jn[1:-1])
    recurrence = float(np.max(np.abs(rec) / rec_scale))
    zero_err = 0.0
    for (kind, order), zeros in BESSEL_ZEROS.items():
        f = (lambda t, o=order: specfun.bessel_j(o, t)) if kind == "J" else (lambda t, o=order: specfun.bessel_y(o, t))
        for z in zeros:
            root = brentq(f, z - 0.05, z + 0.05, xtol=1e-15)
            zero_err = max(zero_err, abs(root - z))
    return {"wronskian": wronskian, "recurrence": recurrence, "zeros": zero_err}


def run_checks(eta_scale: float = 1.0) -> list[CheckResult]:
    """The oracle suite; ``eta_scale`` scales the coupling for fault injection."""
    results = []
    for k in (5.0, 25.0, RESONANT_K):
        results.append(_timed(f"Nystrom vs Mie series, circle, k={k:.6g}", 1e-6,
                              lambda k=k: (mie_error(k, eta_scale=eta_scale), "n=256, 64 points on |x|=5")))

    def pde():
        coarse, fine = pde_residuals()
        order = math.log10(coarse / fine) if fine > 0 else math.inf
        ok_order = 1.5 <= order <= 2.5
        return (fine if ok_order else math.inf), f"h=1e-3: {coarse:.2e}, observed order {order:.2f}"

    results.append(_timed("tapered-wave PDE residual, h=1e-4", 1e-3, pde))
    results.append(_timed("Green representation, full boundary", 1e-6,
                          lambda: (greens_error(), "circle, k=25, g=0.01, n=512")))
    errs = specfun_errors()
    results.append(CheckResult("Bessel Wronskian", errs["wronskian"], 1e-12, 0.0))
    results.append(CheckResult("Bessel three-term recurrence", errs["recurrence"], 1e-12, 0.0))
    results.append(CheckResult("Bessel zero locations", errs["zeros"], 1e-9, 0.0))
    return results
