"""Cylinder functions of integer order.

First-kind Bessel functions are computed from the ascending power series for
small arguments and by Miller's backward recurrence otherwise.  The backward
sweep also accumulates the Neumann sums that give Y_0 and Y_1, so the whole
module stands on its own without an external special-function library.

All public functions accept scalars or numpy arrays for ``t`` and return the
same shape (a Python float/complex for scalar input).
"""

from __future__ import annotations

import math

import numpy as np

ORDER_CAP = 64
SERIES_LIMIT = 2.0  # power series for 0 <= t <= SERIES_LIMIT
_EULER_GAMMA = 0.57721566490153286061
_BIG = 1e250
_SMALL = 1e-250


class DomainError(ValueError):
    """Raised for arguments outside the domain of a cylinder function."""


def _as_args(order, t, *, positive: bool):
    m = int(order)
    if m != order:
        raise DomainError(f"integer order required, got {order!r}")
    if abs(m) > ORDER_CAP:
        raise DomainError(f"|order| = {abs(m)} exceeds the cap {ORDER_CAP}")
    scalar = np.ndim(t) == 0
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if not np.all(np.isfinite(arr)):
        raise DomainError("argument must be finite")
    if positive and np.any(arr <= 0.0):
        raise DomainError("argument must be strictly positive (logarithmic singularity at 0)")
    if not positive and np.any(arr < 0.0):
        raise DomainError("argument must be nonnegative")
    return m, arr, scalar


def _series_table(nmax: int, t: np.ndarray) -> np.ndarray:
    """J_0..J_nmax by direct summation of the ascending series."""
    out = np.empty((nmax + 1,) + t.shape)
    half = 0.5 * t
    q = -half * half
    for n in range(nmax + 1):
        term = np.power(half, n) / math.factorial(n)
        total = term.copy()
        for k in range(1, 80):
            term = term * q / (k * (n + k))
            total += term
            if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
        out[n] = total
    return out


def _miller_weights(top: int):
    """Per-index weights of the normalisation and Neumann sums."""
    idx = np.arange(top + 1)
    w_norm = np.zeros(top + 1)
    w_norm[0] = 1.0
    w_norm[2::2] = 2.0
    # S0 = sum_{k>=1} (-1)^{k+1} J_{2k} / k
    w_s0 = np.zeros(top + 1)
    k = idx[2::2] // 2
    w_s0[2::2] = np.where(k % 2 == 1, 1.0, -1.0) / k
    # S1 = sum_{k>=1} (-1)^{k+1} (J_{2k-1} - J_{2k+1}) / (2k)
    w_s1 = np.zeros(top + 1)
    for k in range(1, top // 2 + 1):
        sgn = 1.0 if k % 2 == 1 else -1.0
        if 2 * k - 1 <= top:
            w_s1[2 * k - 1] += sgn / (2 * k)
        if 2 * k + 1 <= top:
            w_s1[2 * k + 1] -= sgn / (2 * k)
    return w_norm, w_s0, w_s1


def _miller(nmax: int, t: np.ndarray, want_neumann: bool = False):
    """Backward recurrence for J_0..J_nmax at t > 0.

    Returns the table and, if requested, the Neumann sums (S0, S1) used for
    Y_0 and Y_1.
    """
    n_ref = max(nmax, float(np.max(t)))
    top = int(n_ref + 30 + math.sqrt(80.0 * n_ref))
    top += top % 2
    w_norm, w_s0, w_s1 = _miller_weights(top)

    store = np.zeros((nmax + 1,) + t.shape)
    j_next = np.zeros_like(t)
    j_cur = np.full_like(t, 1e-30)
    norm = w_norm[top] * j_cur
    s0 = w_s0[top] * j_cur
    s1 = w_s1[top] * j_cur
    if top <= nmax:
        store[top] = j_cur
    inv_t = 1.0 / t
    for k in range(top, 0, -1):
        j_prev = (2.0 * k) * inv_t * j_cur - j_next
        big = np.abs(j_prev) > _BIG
        if big.any():
            f = np.where(big, _SMALL, 1.0)
            j_prev *= f
            j_cur *= f
            norm *= f
            s0 *= f
            s1 *= f
            store *= f
        kk = k - 1
        if kk <= nmax:
            store[kk] = j_prev
        if w_norm[kk]:
            norm += w_norm[kk] * j_prev
        if want_neumann:
            if w_s0[kk]:
                s0 += w_s0[kk] * j_prev
            if w_s1[kk]:
                s1 += w_s1[kk] * j_prev
        j_next, j_cur = j_cur, j_prev
    scale = 1.0 / norm
    store *= scale
    if want_neumann:
        return store, s0 * scale, s1 * scale
    return store


def bessel_j_table(nmax: int, t) -> np.ndarray:
    """J_0(t), ..., J_nmax(t) stacked along a new leading axis.

    ``t`` must be finite and nonnegative.  This is the vectorised workhorse
    used by the field evaluators; ``nmax`` is not subject to the public order
    cap so that callers may carry a few guard orders.
    """
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError("argument must be finite and nonnegative")
    out = np.empty((nmax + 1,) + arr.shape)
    small = arr <= SERIES_LIMIT
    if small.any():
        out[:, small] = _series_table(nmax, arr[small])
    if (~small).any():
        out[:, ~small] = _miller(nmax, arr[~small])
    return out


def _signed(m: int, table: np.ndarray) -> np.ndarray:
    v = table[abs(m)]
    return -v if (m < 0 and m % 2) else v


def bessel_j(order: int, t):
    """First-kind Bessel function J_m(t) for integer m and t >= 0.

    Negative orders use J_{-m} = (-1)^m J_m on the same code path.
    """
    m, arr, scalar = _as_args(order, t, positive=False)
    val = _signed(m, bessel_j_table(abs(m), arr))
    return float(val[0]) if scalar else val.reshape(np.shape(t))


def bessel_j_prime(order: int, t):
    """Derivative J_m'(t) = (J_{m-1}(t) - J_{m+1}(t)) / 2."""
    m, arr, scalar = _as_args(order, t, positive=False)
    table = bessel_j_table(abs(m) + 1, arr)
    val = 0.5 * (_signed(m - 1, table) - _signed(m + 1, table))
    return float(val[0]) if scalar else val.reshape(np.shape(t))


def _y_table(nmax: int, t: np.ndarray):
    """(J table, Y table) for orders 0..max(nmax, 1) at t > 0."""
    top = max(nmax, 1)
    jt, s0, s1 = _miller(top, t, want_neumann=True)
    small = t <= SERIES_LIMIT
    if small.any():
        jt[:, small] = _series_table(top, t[small])
    log_term = np.log(0.5 * t) + _EULER_GAMMA
    y = np.empty_like(jt)
    y[0] = (2.0 / math.pi) * (log_term * jt[0] + 2.0 * s0)
    y[1] = -(2.0 / math.pi) * (jt[0] / t - log_term * jt[1]) - (4.0 / math.pi) * s1
    for n in range(1, top):
        y[n + 1] = (2.0 * n / t) * y[n] - y[n - 1]
    return jt, y


def bessel_y(order: int, t):
    """Second-kind Bessel function Y_m(t) for integer m and t > 0."""
    m, arr, scalar = _as_args(order, t, positive=True)
    _, y = _y_table(abs(m), arr)
    val = _signed(m, y)
    return float(val[0]) if scalar else val.reshape(np.shape(t))


def hankel1_table(nmax: int, t) -> np.ndarray:
    """H^(1)_0(t), ..., H^(1)_nmax(t) stacked along a new leading axis."""
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("argument must be finite and strictly positive")
    flat = arr.reshape(-1)
    jt, y = _y_table(nmax, flat)
    h = (jt + 1j * y)[: nmax + 1]
    return h.reshape((nmax + 1,) + arr.shape)


def hankel1(order: int, t):
    """Hankel function of the first kind H^(1)_m(t) = J_m(t) + i Y_m(t), t > 0."""
    m, arr, scalar = _as_args(order, t, positive=True)
    val = _signed(m, hankel1_table(abs(m), arr))
    return complex(val[0]) if scalar else val.reshape(np.shape(t))
