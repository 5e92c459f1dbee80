"""Bessel and Hankel functions of integer order and real positive argument.

J_n comes from Miller's downward recurrence normalised with the sum rule
``J_0 + 2 * sum_m J_2m = 1``.  The same sweep accumulates the Neumann series

    Y_0 = 2/pi (ln(x/2) + gamma) J_0 - 4/pi  sum_k (-1)^k J_2k / k
    Y_1 = 2/pi (ln(x/2) + gamma) J_1 - 2/(pi x) J_0
          + 2/pi  sum_k (-1)^k (J_2k-1 - J_2k+1) / k

so Y_0 and Y_1 are available for small and moderate arguments at no extra
cost.  Above ``ASYMPTOTIC_CROSSOVER`` the orders 0 and 1 switch to Hankel's
asymptotic expansion, whose smallest term there is below 1e-18.  Y_n for
n >= 2 follows from the (stable) upward recurrence.

All functions accept scalars or numpy arrays and are pure.
"""

from __future__ import annotations

import numpy as np

EULER_GAMMA = 0.57721566490153286061
ASYMPTOTIC_CROSSOVER = 20.0

_RESCALE_AT = 1e250
_RESCALE_BY = 1e-250
_CHUNK = 1 << 16


class BesselDomainError(ValueError):
    """Argument outside the domain of the requested function."""


def _as_positive(x, allow_zero: bool) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise BesselDomainError("non-finite argument")
    if allow_zero:
        if np.any(arr < 0):
            raise BesselDomainError("negative argument")
    elif np.any(arr <= 0):
        raise BesselDomainError("Y_n and H_n are singular for x <= 0")
    return arr


def _check_order(n: int) -> int:
    if int(n) != n or n < 0:
        raise BesselDomainError(f"order must be a non-negative integer, got {n!r}")
    return int(n)


def _start_order(nmax: int, xmax: float) -> int:
    top = max(float(nmax), xmax)
    m = int(top + 30.0 + 10.0 * top ** (1.0 / 3.0))
    return m + (m % 2)


def _miller_block(nmax: int, x: np.ndarray):
    """Downward sweep for a 1-D block of positive arguments.

    Returns ``(J, y0_sum, y1_sum)`` with J of shape (nmax + 1, len(x)) and
    the two Neumann-series sums already divided by the normalisation.
    """
    big_m = _start_order(nmax, float(x.max()))
    two_over_x = 2.0 / x
    f_up = np.zeros_like(x)
    f = np.full_like(x, 1e-300)
    out = np.zeros((nmax + 1, x.size))
    norm = np.zeros_like(x)
    s0 = np.zeros_like(x)
    s1 = np.zeros_like(x)

    m = big_m
    while m > 0:
        if m <= nmax:
            out[m] = f
        if m % 2 == 0:
            k = m // 2
            norm += 2.0 * f
            s0 += (-1.0 if k % 2 else 1.0) * f / k
        else:
            k = (m + 1) // 2
            coef = (-1.0 if k % 2 else 1.0) / k
            if m >= 3:
                k2 = (m - 1) // 2
                coef -= (-1.0 if k2 % 2 else 1.0) / k2
            s1 += coef * f
        f_down = m * two_over_x * f - f_up
        big = np.abs(f_down) > _RESCALE_AT
        if big.any():
            scale = np.where(big, _RESCALE_BY, 1.0)
            f_down *= scale
            f *= scale
            norm *= scale
            s0 *= scale
            s1 *= scale
            out *= scale
        f_up, f = f, f_down
        m -= 1
    out[0] = f
    norm += f
    return out / norm, s0 / norm, s1 / norm


def _miller(nmax: int, x: np.ndarray):
    """Miller sweep over an arbitrary 1-D array, chunked by magnitude."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    jj = np.empty((nmax + 1, x.size))
    s0 = np.empty(x.size)
    s1 = np.empty(x.size)
    for lo in range(0, x.size, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        jb, a, b = _miller_block(nmax, xs[sl])
        idx = order[sl]
        jj[:, idx] = jb
        s0[idx] = a
        s1[idx] = b
    return jj, s0, s1


def _neumann_y01(x, j0, j1, s0, s1):
    lg = np.log(x / 2.0) + EULER_GAMMA
    y0 = (2.0 / np.pi) * lg * j0 - (4.0 / np.pi) * s0
    y1 = (2.0 / np.pi) * lg * j1 - (2.0 / np.pi) * j0 / x + (2.0 / np.pi) * s1
    return y0, y1


def _hankel_asymptotic(nu: int, x: np.ndarray):
    """(J_nu, Y_nu) from Hankel's expansion; only used for x > 20."""
    mu = 4.0 * nu * nu
    term = np.ones_like(x)
    p = np.ones_like(x)
    q = np.zeros_like(x)
    for k in range(1, 80):
        term = term * (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2:
            q += sign * term
        else:
            p += sign * term
        if np.max(np.abs(term)) < 1e-18:
            break
    c, s = np.cos(x), np.sin(x)
    r = np.sqrt(1.0 / np.pi / x)  # sqrt(2/(pi x)) / sqrt(2)
    if nu == 0:
        cos_chi, sin_chi = c + s, s - c
    else:
        cos_chi, sin_chi = s - c, -s - c
    return r * (p * cos_chi - q * sin_chi), r * (p * sin_chi + q * cos_chi)


def _j01_y01(x: np.ndarray):
    """J0, J1, Y0, Y1 for a flat array of positive arguments."""
    j0 = np.empty_like(x)
    j1 = np.empty_like(x)
    y0 = np.empty_like(x)
    y1 = np.empty_like(x)
    small = x <= ASYMPTOTIC_CROSSOVER
    if small.any():
        xs = x[small]
        jj, s0, s1 = _miller(1, xs)
        j0[small], j1[small] = jj[0], jj[1]
        y0[small], y1[small] = _neumann_y01(xs, jj[0], jj[1], s0, s1)
    large = ~small
    if large.any():
        xl = x[large]
        j0[large], y0[large] = _hankel_asymptotic(0, xl)
        j1[large], y1[large] = _hankel_asymptotic(1, xl)
    return j0, j1, y0, y1


def _finish(values: np.ndarray, shape, scalar: bool):
    values = values.reshape(shape)
    return values[()] if scalar else values


def bessel_j_orders(nmax: int, x) -> np.ndarray:
    """J_0..J_nmax at ``x``; result has shape ``(nmax + 1,) + x.shape``."""
    nmax = _check_order(nmax)
    arr = _as_positive(x, allow_zero=True)
    flat = arr.ravel()
    out = np.zeros((nmax + 1, flat.size))
    pos = flat > 0
    out[0, ~pos] = 1.0
    if pos.any():
        out[:, pos] = _miller(nmax, flat[pos])[0]
    return out.reshape((nmax + 1,) + arr.shape)


def bessel_y_orders(nmax: int, x) -> np.ndarray:
    """Y_0..Y_nmax at ``x`` > 0 by upward recurrence from Y_0 and Y_1."""
    nmax = _check_order(nmax)
    arr = _as_positive(x, allow_zero=False)
    flat = arr.ravel()
    _, _, y0, y1 = _j01_y01(flat)
    out = np.empty((nmax + 1, flat.size))
    out[0] = y0
    if nmax >= 1:
        out[1] = y1
    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(1, nmax):
            nxt = (2.0 * m / flat) * out[m] - out[m - 1]
            # once the recurrence overflows, Y_n stays at -inf instead of inf - inf
            out[m + 1] = np.where(np.isinf(out[m]), out[m], nxt)
    return out.reshape((nmax + 1,) + arr.shape)


def hankel1_orders(nmax: int, x) -> np.ndarray:
    """H^(1)_0..H^(1)_nmax at ``x`` > 0."""
    arr = _as_positive(x, allow_zero=False)
    return bessel_j_orders(nmax, arr) + 1j * bessel_y_orders(nmax, arr)


def bessel_j(n: int, x):
    """Bessel function of the first kind J_n(x), n >= 0, x >= 0."""
    n = _check_order(n)
    arr = _as_positive(x, allow_zero=True)
    flat = arr.ravel()
    if n <= 1:
        out = np.zeros(flat.size)
        pos = flat > 0
        if n == 0:
            out[~pos] = 1.0
        if pos.any():
            j0, j1, _, _ = _j01_y01(flat[pos])
            out[pos] = j0 if n == 0 else j1
    else:
        out = bessel_j_orders(n, flat)[n]
    return _finish(out, arr.shape, np.ndim(x) == 0)


def bessel_y(n: int, x):
    """Bessel function of the second kind Y_n(x), n >= 0, x > 0."""
    n = _check_order(n)
    arr = _as_positive(x, allow_zero=False)
    out = bessel_y_orders(n, arr.ravel())[n]
    return _finish(out, arr.shape, np.ndim(x) == 0)


def hankel1(n: int, x):
    """Hankel function of the first kind H^(1)_n(x) = J_n(x) + i Y_n(x)."""
    n = _check_order(n)
    return bessel_j(n, _as_positive(x, allow_zero=False)) + 1j * bessel_y(n, x)


def hankel1_01(x) -> tuple[np.ndarray, np.ndarray]:
    """(H^(1)_0(x), H^(1)_1(x)) in one pass; the kernel-assembly fast path."""
    arr = _as_positive(x, allow_zero=False)
    j0, j1, y0, y1 = _j01_y01(arr.ravel())
    return (j0 + 1j * y0).reshape(arr.shape), (j1 + 1j * y1).reshape(arr.shape)
