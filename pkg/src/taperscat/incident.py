"""Incident fields: the Gaussian-tapered wave, plane waves and point sources.

Two readings of the tapered wave are supported:

``"product"``   u = exp(ik x.d) (1 + w) exp(-(x.d_perp)^2 / lambda^2)
``"exponent"``  u = exp(ik x.d (1 + w)) exp(-(x.d_perp)^2 / lambda^2)

The product form is the default incident field.  The source term ``F``
returned by :func:`eval_F` is the exact Helmholtz residual of the exponent
form, ``(Delta + k^2) u = k^2 F``; for the product form the identity does
not hold, which :func:`pde_residual` makes measurable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .specfun import hankel1_01

FORMS = ("product", "exponent")
MIN_D1D2 = 1e-6
UNDERFLOW_GAUSSIAN = 1e-30


class IncidentError(ValueError):
    """Invalid incident-field parameters."""


class TaperDomainWarning(UserWarning):
    """Point lies where the Gaussian envelope has underflowed."""


@dataclass(frozen=True)
class TaperedWave:
    """One tapered beam with axis through the origin.

    The incidence angle satisfies sin(theta_i) = d1 and cos(theta_i) = -d2,
    and the bandwidth is lambda = g |cos(theta_i)| = g |d2|.
    """

    k: float
    g: float
    d: tuple[float, float]
    form: str = "product"

    def __post_init__(self):
        d = tuple(float(c) for c in self.d)
        object.__setattr__(self, "d", d)
        if not self.k > 0 or not self.g > 0:
            raise IncidentError("wavenumber and taper parameter must be positive")
        if abs(math.hypot(*d) - 1.0) > 1e-12:
            raise IncidentError(f"direction {d} is not a unit vector")
        if abs(d[0] * d[1]) < MIN_D1D2:
            raise IncidentError(f"direction {d} violates d1*d2 != 0")
        if self.form not in FORMS:
            raise IncidentError(f"unknown tapered-wave form {self.form!r}")

    @classmethod
    def from_angle(cls, k: float, g: float, theta_i: float, form: str = "product"):
        return cls(k, g, (math.sin(theta_i), -math.cos(theta_i)), form)

    @cached_property
    def theta_i(self) -> float:
        return math.atan2(self.d[0], -self.d[1])

    @cached_property
    def lam(self) -> float:
        return self.g * abs(self.d[1])

    @cached_property
    def d_perp(self) -> tuple[float, float]:
        return (-self.d[1], self.d[0])

    def along(self, x) -> np.ndarray:
        """x . d"""
        x = np.asarray(x, dtype=float)
        return x[..., 0] * self.d[0] + x[..., 1] * self.d[1]

    def across(self, x) -> np.ndarray:
        """x . d_perp"""
        x = np.asarray(x, dtype=float)
        return x[..., 0] * self.d_perp[0] + x[..., 1] * self.d_perp[1]

    def gaussian(self, x) -> np.ndarray:
        return np.exp(-(self.across(x) / self.lam) ** 2)

    def __call__(self, x):
        return eval_tapered(self, x)


def eval_w(wave: TaperedWave, x):
    """Modulation w(x) = (2 (x.d_perp)^2 / lambda^2 - 1) / (k lambda)^2."""
    lam = wave.lam
    return (2.0 * (wave.across(x) / lam) ** 2 - 1.0) / (wave.k * lam) ** 2


def eval_tapered(wave: TaperedWave, x):
    """Tapered incident field at point(s) x of shape (..., 2)."""
    s = wave.along(x)
    w = eval_w(wave, x)
    env = wave.gaussian(x)
    if wave.form == "product":
        return np.exp(1j * wave.k * s) * (1.0 + w) * env
    return np.exp(1j * wave.k * s * (1.0 + w)) * env


def eval_F(wave: TaperedWave, x):
    """Source term F with (Delta + k^2) u = k^2 F for the exponent form."""
    k, lam = wave.k, wave.lam
    s = wave.along(x)
    p = wave.across(x)
    w = eval_w(wave, x)
    bracket = (-w**2 - 16.0 * s**2 * p**2 / (k**4 * lam**8)
               + (4j * k * s / (k**4 * lam**4)) * (1.0 - 4.0 * p**2 / lam**2))
    return eval_tapered(wave, x) * bracket


def eval_plane(k: float, d, x):
    """Plane wave exp(ik x.d)."""
    x = np.asarray(x, dtype=float)
    return np.exp(1j * k * (x[..., 0] * d[0] + x[..., 1] * d[1]))


def eval_point_source(k: float, y, x):
    """Fundamental solution Phi(x, y) = (i/4) H0(k |x - y|)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x[..., 0] - y[..., 0], x[..., 1] - y[..., 1])
    if np.any(r == 0):
        raise IncidentError("point source evaluated at its own location")
    return 0.25j * hankel1_01(k * r)[0]


@dataclass(frozen=True)
class PlaneWave:
    """Callable plane-wave incident field."""

    k: float
    d: tuple[float, float]

    def __call__(self, x):
        return eval_plane(self.k, self.d, x)


def _laplacian(u, x, h):
    x = np.asarray(x, dtype=float)
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    return (u(x + ex) + u(x - ex) + u(x + ey) + u(x - ey) - 4.0 * u(x)) / h**2


def pde_residual(wave: TaperedWave, x, h: float, field=None, source=None):
    """Normalised 5-point residual of (Delta + k^2) u = k^2 F at ``x``.

    ``field``/``source`` override the tapered wave and its F, e.g. a plane
    wave with zero source.  Points where the Gaussian envelope is below
    1e-30 are rejected with a :class:`TaperDomainWarning` and yield NaN.
    """
    if not h > 0:
        raise IncidentError("step length must be positive")
    x = np.asarray(x, dtype=float)
    k = wave.k
    u = field if field is not None else (lambda z: eval_tapered(wave, z))
    f = source if source is not None else (lambda z: eval_F(wave, z))
    out = np.abs(_laplacian(u, x, h) + k**2 * u(x) - k**2 * f(x))
    out = out / (k**2 * (np.abs(u(x)) + np.abs(f(x))) + 1e-300)
    if field is None:
        bad = wave.gaussian(x) < UNDERFLOW_GAUSSIAN
        if np.any(bad):
            warnings.warn("tapered wave evaluated in its underflow region", TaperDomainWarning,
                          stacklevel=2)
            out = np.where(bad, np.nan, out)
    return out[()] if np.ndim(out) == 0 else out
