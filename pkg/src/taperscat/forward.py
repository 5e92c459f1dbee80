"""Exterior sound-soft Helmholtz solver.

The scattered field is sought as a combined single/double layer potential

    u^s(x) = int_{dD} ( dPhi(x,y)/dnu(y) - i eta Phi(x,y) ) phi(y) ds(y)

whose density solves (I/2 + K - i eta S) phi = -u^i on dD.  The equation is
discretised with Kress' Nystrom method: each kernel is split into
``K1(t,tau) ln(4 sin^2((t - tau)/2)) + K2(t,tau)``, the logarithmic part is
integrated with trigonometric product weights and the rest with the
trapezoidal rule.  Several disjoint components are coupled in one block
system.

The module also carries two independent checks: the separation-of-variables
series for the circle and the Green representation built from the jump
relations of the layer potentials.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from numpy.polynomial.legendre import leggauss

from .geometry import BoundaryCurve, CurveSample, GeometryError, contains, distance_to_curve, evaluate, sample_nodes
from .incident import TaperedWave
from .specfun import EULER_GAMMA, hankel1_01, hankel1_orders, bessel_j_orders

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
MAX_CONDITION = 1e12
DEFAULT_NYSTROM = 512
_GL_ORDER = 10
# the Gaussian envelope is below 1e-35 beyond 9 beam widths
_BEAM_REACH = 9.0
# points this close to a boundary count as lying on it
_ON_BOUNDARY = 1e-10
# Some OpenBLAS builds corrupt the heap when LAPACK is entered from several
# threads at once; the triangular solves are cheap, so they are serialised.
_LAPACK_LOCK = threading.Lock()


class ForwardSolverError(RuntimeError):
    """The discretised boundary integral equation could not be solved."""


class ExteriorDomainError(ValueError):
    """Evaluation point is inside or on an obstacle."""


def _as_curves(curves) -> tuple[BoundaryCurve, ...]:
    if isinstance(curves, BoundaryCurve):
        return (curves,)
    out = tuple(curves)
    if not out or not all(isinstance(c, BoundaryCurve) for c in out):
        raise GeometryError("expected a BoundaryCurve or a non-empty list of them")
    return out


def log_weights(n: int) -> np.ndarray:
    """Product weights R_j for int_0^{2pi} ln(4 sin^2((t - tau)/2)) f(tau) dtau.

    Returns R as a function of the node offset i - j (length n, n = 2m).
    """
    m = n // 2
    offset = TWO_PI * np.arange(n) / n
    ell = np.arange(1, m)
    r = -(TWO_PI / m) * (np.cos(np.outer(offset, ell)) / ell).sum(axis=1)
    return r - (math.pi / m**2) * np.cos(m * offset)


def _circulant(vec: np.ndarray) -> np.ndarray:
    n = vec.size
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return vec[idx]


def _log_sin2(n: int) -> np.ndarray:
    """ln(4 sin^2((t_i - t_j)/2)) with zero on the diagonal."""
    diff = TWO_PI * ((np.arange(n)[:, None] - np.arange(n)[None, :]) % n) / n
    with np.errstate(divide="ignore"):
        out = np.log(4.0 * np.sin(diff / 2.0) ** 2)
    np.fill_diagonal(out, 0.0)
    return out


def fundamental_matrix(nodes: CurveSample, k: float) -> np.ndarray:
    """Phi(z_i, z_j) between distinct nodes; the diagonal is left at zero."""
    x = nodes.position
    r = np.hypot(x[:, None, 0] - x[None, :, 0], x[:, None, 1] - x[None, :, 1])
    off = ~np.eye(len(nodes), dtype=bool)
    out = np.zeros(r.shape, complex)
    out[off] = 0.25j * hankel1_01(k * r[off])[0]
    return out


@dataclass
class _Blocks:
    """Kernel pieces of one self-interaction block (all n x n)."""

    dbl1: np.ndarray
    dbl2: np.ndarray
    sgl1: np.ndarray
    sgl2: np.ndarray


def _self_blocks(nodes: CurveSample, k: float, adjoint: bool = False) -> _Blocks:
    """Log-split double-layer (or adjoint) and single-layer kernels, times 2.

    Single layer: 2 Phi(z_i, z_j) |z'_j|.  Double layer: 2 dPhi/dnu(z_j) |z'_j|;
    with ``adjoint`` the normal derivative is taken at the target z_i.
    """
    n = len(nodes)
    x = nodes.position
    jac = nodes.jacobian
    diff = x[:, None, :] - x[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    off = ~np.eye(n, dtype=bool)
    h0 = np.zeros((n, n), complex)
    h1 = np.zeros((n, n), complex)
    h0[off], h1[off] = hankel1_01(k * r[off])
    r_safe = np.where(off, r, 1.0)
    lg = _log_sin2(n)

    if adjoint:
        proj = -(nodes.normal[:, None, :] * diff).sum(-1) * jac[None, :]
    else:
        proj = (nodes.normal[None, :, :] * diff).sum(-1) * jac[None, :]
    dbl = 0.5j * k * proj * h1 / r_safe
    dbl1 = -(k / TWO_PI) * proj * h1.real / r_safe
    dbl2 = dbl - dbl1 * lg
    orient = np.sign(nodes.normal[:, 0] * nodes.tangent[:, 1] - nodes.normal[:, 1] * nodes.tangent[:, 0])
    diag = -orient * nodes.curvature_numerator / (TWO_PI * jac**2)
    np.fill_diagonal(dbl1, 0.0)
    np.fill_diagonal(dbl2, diag)

    sgl = 0.5j * h0 * jac[None, :]
    sgl1 = -(1.0 / TWO_PI) * h0.real * jac[None, :]
    sgl2 = sgl - sgl1 * lg
    sgl_diag = (0.5j - EULER_GAMMA / math.pi - np.log(k * jac / 2.0) / math.pi) * jac
    np.fill_diagonal(sgl1, -(1.0 / TWO_PI) * jac)
    np.fill_diagonal(sgl2, sgl_diag)
    return _Blocks(dbl1, dbl2, sgl1, sgl2)


def _cross_kernels(target: CurveSample, source: CurveSample, k: float):
    """Smooth 2 dPhi/dnu(y)|y'| and 2 Phi |y'| between disjoint components."""
    diff = target.position[:, None, :] - source.position[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    h0, h1 = hankel1_01(k * r)
    proj = (source.normal[None, :, :] * diff).sum(-1) * source.jacobian[None, :]
    dbl = 0.5j * k * proj * h1 / r
    sgl = 0.5j * h0 * source.jacobian[None, :]
    return dbl, sgl


@dataclass
class DensitySolution:
    """Boundary density of the combined-field equation on the Nystrom nodes."""

    curves: tuple[BoundaryCurve, ...]
    k: float
    eta: float
    nodes: list[CurveSample]
    density: np.ndarray

    @property
    def n(self) -> int:
        return len(self.nodes[0])

    @property
    def curve(self) -> BoundaryCurve:
        return self.curves[0]

    def component_density(self, c: int) -> np.ndarray:
        return self.density[c * self.n:(c + 1) * self.n]


class NystromSolver:
    """Assembled and factorised Nystrom system for fixed obstacles and k.

    One factorisation serves every incident field, which is how datasets with
    many incident directions are generated.
    """

    def __init__(self, curves, k: float, n: int, eta: float | None = None):
        self.curves = _as_curves(curves)
        if not k > 0:
            raise ValueError("wavenumber must be positive")
        if int(n) != n or n < 32 or n % 2:
            raise GeometryError(f"Nystrom node count must be even and >= 32, got {n}")
        self.k = float(k)
        self.n = int(n)
        self.eta = float(k if eta is None else eta)
        self.nodes = [sample_nodes(c, self.n) for c in self.curves]
        self.matrix = self._assemble()
        self._factorise()

    def _assemble(self) -> np.ndarray:
        n, k, eta = self.n, self.k, self.eta
        nc = len(self.curves)
        weight = TWO_PI / n
        rmat = _circulant(log_weights(n))
        a = np.zeros((nc * n, nc * n), complex)
        for i, tgt in enumerate(self.nodes):
            for j, src in enumerate(self.nodes):
                blk = slice(i * n, (i + 1) * n), slice(j * n, (j + 1) * n)
                if i == j:
                    b = _self_blocks(tgt, k)
                    a[blk] = (rmat * (b.dbl1 - 1j * eta * b.sgl1)
                              + weight * (b.dbl2 - 1j * eta * b.sgl2))
                    a[blk] += np.eye(n)
                else:
                    dbl, sgl = _cross_kernels(tgt, src, k)
                    a[blk] = weight * (dbl - 1j * eta * sgl)
        return a

    def _factorise(self):
        a = self.matrix
        anorm = np.abs(a).sum(axis=0).max()
        with _LAPACK_LOCK:
            self.lu, self.piv = scipy.linalg.lu_factor(a, check_finite=True)
            gecon = scipy.linalg.get_lapack_funcs("gecon", (self.lu,))
            rcond, info = gecon(self.lu, anorm, norm="1")
        self.condition = math.inf if rcond == 0 else 1.0 / rcond
        if info != 0 or not self.condition < MAX_CONDITION:
            raise ForwardSolverError(
                f"Nystrom matrix is singular or ill-conditioned (cond ~ {self.condition:.3e}, k={self.k})")

    def boundary_data(self, incident: Callable, rhs: str = "auto") -> np.ndarray:
        """Incident trace on the nodes of every component, concatenated.

        ``rhs="sample"`` evaluates the field at the nodes, ``"project"``
        uses its trigonometric projection (see :func:`project_trace`), and
        ``"auto"`` projects tapered waves and samples everything else.
        """
        if rhs == "auto":
            rhs = "project" if isinstance(incident, TaperedWave) else "sample"
        if rhs == "sample":
            return np.concatenate([np.asarray(incident(nd.position), complex) for nd in self.nodes])
        if rhs == "project":
            return np.concatenate([project_trace(c, incident, self.n) for c in self.curves])
        raise ValueError(f"unknown rhs mode {rhs!r}")

    def solve(self, incident: Callable, rhs: str = "auto") -> DensitySolution:
        f = self.boundary_data(incident, rhs)
        with _LAPACK_LOCK:
            phi = scipy.linalg.lu_solve((self.lu, self.piv), -2.0 * f)
        return DensitySolution(self.curves, self.k, self.eta, self.nodes, phi)

    def field_matrix(self, points) -> np.ndarray:
        """Matrix E with u^s(points) = E @ density."""
        return field_matrix(self.nodes, self.k, self.eta, points)


def solve_density(curve, incident: Callable, k: float, n: int, eta: float | None = None,
                  rhs: str = "auto") -> DensitySolution:
    """Solve the combined-field equation for one incident field."""
    return NystromSolver(curve, k, n, eta).solve(incident, rhs)


def field_matrix(nodes: Sequence[CurveSample], k: float, eta: float, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(nodes[0])
    cols = []
    for nd in nodes:
        diff = pts[:, None, :] - nd.position[None, :, :]
        r = np.hypot(diff[..., 0], diff[..., 1])
        h0, h1 = hankel1_01(k * r)
        proj = (nd.normal[None, :, :] * diff).sum(-1)
        kern = 0.25j * k * h1 * proj / r + 0.25 * eta * h0
        cols.append(kern * (TWO_PI / n) * nd.jacobian[None, :])
    return np.concatenate(cols, axis=1)


def check_exterior(curves, points) -> np.ndarray:
    """Raise :class:`ExteriorDomainError` unless every point is outside."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    for c in _as_curves(curves):
        if np.any(contains(c, pts)) or np.any(distance_to_curve(c, pts) <= _ON_BOUNDARY):
            raise ExteriorDomainError("evaluation point inside or on the obstacle boundary")
    return pts


def _sum_rows(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    # elementwise product + pairwise sum keeps results independent of BLAS threading
    return (mat * vec[None, :]).sum(axis=1)


def eval_scattered(sol: DensitySolution, x):
    """Scattered field at exterior point(s) x of shape (..., 2)."""
    x = np.asarray(x, dtype=float)
    pts = check_exterior(sol.curves, x)
    vals = _sum_rows(field_matrix(sol.nodes, sol.k, sol.eta, pts), sol.density)
    return vals[0] if x.ndim == 1 else vals.reshape(x.shape[:-1])


def mie_series_reference(a: float, k: float, d, x, N: int | None = None):
    """Scattered field of a plane wave by the sound-soft circle |x| = a.

    u^s = -sum_{m=-N}^{N} i^m J_m(ka)/H_m(ka) H_m(k|x|) e^{im(theta_x - theta_d)}
    """
    x = np.asarray(x, dtype=float)
    pts = x.reshape(-1, 2)
    rad = np.hypot(pts[:, 0], pts[:, 1])
    if np.any(rad <= a):
        raise ExteriorDomainError("Mie series needs |x| > a")
    if N is None:
        N = int(math.ceil(k * a + 12 + 4 * (k * a) ** (1 / 3)))
    if N < k * a + 12:
        raise ValueError("truncation order must satisfy N >= ka + 12")
    ratio = bessel_j_orders(N, k * a) / hankel1_orders(N, k * a)
    h = hankel1_orders(N, k * rad)
    dphi = np.arctan2(pts[:, 1], pts[:, 0]) - math.atan2(d[1], d[0])
    m = np.arange(N + 1)
    coef = (1j ** m) * ratio
    coef[1:] *= 2.0
    terms = coef[:, None] * h * np.cos(np.outer(m, dphi))
    out = -terms.sum(axis=0)
    return out[0] if x.ndim == 1 else out.reshape(x.shape[:-1])


def project_trace(curve: BoundaryCurve, field: Callable, n: int) -> np.ndarray:
    """Node values of the degree < n/2 trigonometric projection of a trace.

    The Fourier coefficients of t -> field(x(t)) are integrated with
    Gauss-Legendre panels.  For a tapered wave only the parameter cells
    where the curve comes within nine beam widths of the axis are
    integrated, refined down to half the beam width; elsewhere the
    Gaussian envelope has underflowed.
    A beam narrower than the node spacing thus enters the system through
    its low-order Fourier content instead of through aliased point values.
    """
    cells = max(4 * n, 4096)
    edges = TWO_PI * np.arange(cells + 1) / cells
    width = TWO_PI / cells
    xe, dxe, _ = curve.derivatives(edges)
    speed = np.hypot(dxe[:, 0], dxe[:, 1])
    if isinstance(field, TaperedWave):
        lam = field.lam
        p = field.across(xe)
        reach = _BEAM_REACH * lam + width * np.maximum(speed[:-1], speed[1:])
        active = (np.minimum(np.abs(p[:-1]), np.abs(p[1:])) <= reach) | (p[:-1] * p[1:] <= 0)
        subdiv = np.ceil(width * 1.2 * np.maximum(speed[:-1], speed[1:]) / (0.5 * lam))
        subdiv = np.clip(subdiv, 1, 1 << 14).astype(int)
    else:
        active = np.ones(cells, dtype=bool)
        subdiv = np.ones(cells, dtype=int)
    cell = np.flatnonzero(active)
    coeff = np.zeros(n, complex)
    if cell.size:
        counts = subdiv[cell]
        owner = np.repeat(cell, counts)
        first = np.repeat(np.cumsum(counts) - counts, counts)
        rank = np.arange(owner.size) - first
        step = width / np.repeat(counts, counts)
        lo = edges[owner] + step * rank
        gx, gw = leggauss(_GL_ORDER)
        tq = (lo[:, None] + 0.5 * step[:, None] * (gx[None, :] + 1.0)).ravel()
        wq = (0.5 * step[:, None] * gw[None, :]).ravel()
        fq = np.asarray(field(curve.derivatives(tq)[0]), complex) * wq / TWO_PI
        modes = np.arange(-(n // 2) + 1, n // 2)
        acc = np.zeros(modes.size, complex)
        for lo in range(0, tq.size, 4096):
            sl = slice(lo, lo + 4096)
            acc += (np.exp(-1j * np.outer(modes, tq[sl])) * fq[sl][None, :]).sum(axis=1)
        coeff[modes % n] = acc
    return np.fft.ifft(coeff) * n


# --------------------------------------------------------------------------
# Green representation from the jump relations
# --------------------------------------------------------------------------

def _spectral_upsample(values: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return np.asarray(values, complex)
    n = values.size
    c = np.fft.fft(values)
    big = np.zeros(n * factor, complex)
    half = n // 2
    big[:half] = c[:half]
    big[-half + 1:] = c[-half + 1:]
    big[half] = 0.5 * c[half]
    big[-half] = 0.5 * c[half]
    return np.fft.ifft(big) * factor


def _spectral_derivative(values: np.ndarray) -> np.ndarray:
    n = values.size
    freq = np.fft.fftfreq(n, 1.0 / n)
    freq[n // 2] = 0.0
    return np.fft.ifft(1j * freq * np.fft.fft(values))


@dataclass
class BoundaryTraces:
    """Exterior Cauchy data of a layer potential on a refined node set."""

    nodes: CurveSample
    dirichlet: np.ndarray
    neumann: np.ndarray


def boundary_traces(sol: DensitySolution, upsample: int = 2, neumann: bool = True) -> BoundaryTraces:
    """u^s and du^s/dnu on the boundary from the jump relations.

    The density is interpolated trigonometrically onto ``upsample * n``
    nodes, where

        u^s_+      = (I/2 + K - i eta S) phi
        du^s_+/dnu = T phi - i eta (K' - I/2) phi

    with the hypersingular T evaluated by Maue's formula
    T phi = d/ds S(dphi/ds) + k^2 nu . S(nu phi).  With ``neumann=False``
    only the Dirichlet trace is formed (the Neumann field is then None).
    """
    if len(sol.curves) != 1:
        raise NotImplementedError("boundary traces are implemented for a single component")
    k, eta = sol.k, sol.eta
    nf = sol.n * upsample
    nodes = sample_nodes(sol.curve, nf)
    psi = _spectral_upsample(sol.density, upsample)
    rmat = _circulant(log_weights(nf))
    w = TWO_PI / nf
    b = _self_blocks(nodes, k)
    dbl = rmat * b.dbl1 + w * b.dbl2
    sgl = rmat * b.sgl1 + w * b.sgl2
    # operators above carry a factor 2
    dirichlet = 0.5 * psi + 0.5 * (dbl @ psi) - 0.5j * eta * (sgl @ psi)
    if not neumann:
        return BoundaryTraces(nodes, dirichlet, None)
    ba = _self_blocks(nodes, k, adjoint=True)
    adj = rmat * ba.dbl1 + w * ba.dbl2
    jac = nodes.jacobian
    sgl_param = sgl / jac[None, :]
    t_psi = _spectral_derivative(0.5 * (sgl_param @ _spectral_derivative(psi))) / jac
    for comp in range(2):
        nu = nodes.normal[:, comp]
        t_psi = t_psi + k**2 * nu * 0.5 * (sgl @ (nu * psi))
    neumann = t_psi - 1j * eta * (0.5 * (adj @ psi) - 0.5 * psi)
    return BoundaryTraces(nodes, dirichlet, neumann)


def greens_rep_eval(sol: DensitySolution, x, traces: BoundaryTraces | None = None,
                    mask: np.ndarray | None = None, upsample: int = 2):
    """Green's representation int { u^s dPhi/dnu(y) - du^s/dnu Phi } ds(y).

    ``mask`` (boolean over the refined nodes) restricts the integral to part
    of the boundary, e.g. the illuminated arc.
    """
    x = np.asarray(x, dtype=float)
    pts = check_exterior(sol.curves, x)
    if traces is None:
        traces = boundary_traces(sol, upsample)
    nd = traces.nodes
    nf = len(nd)
    diff = pts[:, None, :] - nd.position[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    h0, h1 = hankel1_01(sol.k * r)
    dphi = 0.25j * sol.k * h1 * (nd.normal[None, :, :] * diff).sum(-1) / r
    phi = 0.25j * h0
    integrand = (dphi * traces.dirichlet[None, :] - phi * traces.neumann[None, :])
    integrand = integrand * (TWO_PI / nf) * nd.jacobian[None, :]
    if mask is not None:
        integrand = integrand * np.asarray(mask, dtype=bool)[None, :]
    vals = integrand.sum(axis=1)
    return vals[0] if x.ndim == 1 else vals.reshape(x.shape[:-1])
