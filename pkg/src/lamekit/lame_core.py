"""Lame eigenfunctions near a vertex: parameters, Fourier-Bessel evaluation,
gradients, tractions, and the boundary series on the two sector arms.

Conventions
-----------
* A field ``u`` solves ``-L u = kappa u`` with
  ``L u = mu Lap u + (lambda + mu) grad div u``.
* Coefficients ``a_m, b_m`` (m = 0..M) weight the compressional and shear
  cylinder waves; ``u`` is written in the complex basis ``e1 = (1, i)``,
  ``e2 = (1, -i)``.
* Gradients are returned as ``G[..., i, j] = d_j u_i`` so that the normal
  derivative is ``G @ nu``.
* The arm ``minus`` lies along phi = 0 with normal (0, -1); the arm ``plus``
  lies along phi = phi0 with normal (-sin phi0, cos phi0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import ParameterError, SchemaError
from .specfun import bessel_j_table

E1 = np.array([1.0, 1.0j])
E2 = np.array([1.0, -1.0j])
DEFAULT_ORDER = 12


@dataclass(frozen=True)
class LameParams:
    lam: float
    mu: float
    kappa: float

    @property
    def kp(self) -> float:
        return math.sqrt(self.kappa / (self.lam + 2.0 * self.mu))

    @property
    def ks(self) -> float:
        return math.sqrt(self.kappa / self.mu)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "mu": self.mu, "kappa": self.kappa}


def make_params(lam: float, mu: float, kappa: float) -> LameParams:
    """Validate strong convexity (mu > 0, lambda + mu > 0) and kappa > 0."""
    if not mu > 0:
        raise ParameterError(f"strong convexity violated: mu = {mu} must be > 0")
    if not lam + mu > 0:
        raise ParameterError(f"strong convexity violated: lambda + mu = {lam + mu} must be > 0")
    if not kappa > 0:
        raise ParameterError(f"eigenvalue kappa = {kappa} must be > 0")
    return LameParams(float(lam), float(mu), float(kappa))


def params_from_dict(d: dict, pointer: str = "/params") -> LameParams:
    try:
        return make_params(float(d["lambda"]), float(d["mu"]), float(d["kappa"]))
    except KeyError as exc:
        raise SchemaError(f"missing key {exc.args[0]!r}", f"{pointer}/{exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc), pointer) from None


@dataclass(frozen=True)
class CoeffSeq:
    """Truncated coefficients a_m, b_m for m = 0..M."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex).ravel()
        b = np.asarray(self.b, dtype=complex).ravel()
        if a.shape != b.shape or a.size == 0:
            raise ValueError("a and b must be nonempty and of equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def M(self) -> int:
        return self.a.size - 1

    @classmethod
    def zeros(cls, M: int) -> "CoeffSeq":
        return cls(np.zeros(M + 1, complex), np.zeros(M + 1, complex))

    @classmethod
    def single(cls, M: int, which: str, m: int, value: complex = 1.0) -> "CoeffSeq":
        """A sequence with one nonzero entry, ``which`` in {'a', 'b'}."""
        a = np.zeros(M + 1, complex)
        b = np.zeros(M + 1, complex)
        (a if which == "a" else b)[m] = value
        return cls(a, b)

    @classmethod
    def random(cls, M: int, rng: np.random.Generator, scale: float = 1.0) -> "CoeffSeq":
        def draw():
            return scale * (rng.standard_normal(M + 1) + 1j * rng.standard_normal(M + 1))

        return cls(draw(), draw())

    def __add__(self, other: "CoeffSeq") -> "CoeffSeq":
        return CoeffSeq(self.a + other.a, self.b + other.b)

    def __mul__(self, s: complex) -> "CoeffSeq":
        return CoeffSeq(s * self.a, s * self.b)

    __rmul__ = __mul__

    def to_json(self) -> str:
        pairs = lambda z: [[float(v.real), float(v.imag)] for v in z]  # noqa: E731
        return json.dumps({"M": self.M, "a": pairs(self.a), "b": pairs(self.b)})

    @classmethod
    def from_dict(cls, d: dict, pointer: str = "") -> "CoeffSeq":
        if not isinstance(d, dict):
            raise SchemaError("expected an object", pointer)
        for key in ("M", "a", "b"):
            if key not in d:
                raise SchemaError("missing key", f"{pointer}/{key}")
        M = d["M"]
        if not isinstance(M, int) or M < 0:
            raise SchemaError("M must be a nonnegative integer", f"{pointer}/M")
        out = {}
        for key in ("a", "b"):
            seq = d[key]
            if not isinstance(seq, list) or len(seq) != M + 1:
                raise SchemaError(f"expected {M + 1} [re, im] pairs", f"{pointer}/{key}")
            vals = []
            for i, pair in enumerate(seq):
                if (not isinstance(pair, list) or len(pair) != 2
                        or not all(isinstance(x, (int, float)) for x in pair)):
                    raise SchemaError("expected [re, im]", f"{pointer}/{key}/{i}")
                vals.append(complex(pair[0], pair[1]))
            out[key] = np.array(vals)
        return cls(out["a"], out["b"])

    @classmethod
    def from_json(cls, text: str) -> "CoeffSeq":
        return cls.from_dict(json.loads(text))


class PolarPoint(NamedTuple):
    r: float
    phi: float


# ---------------------------------------------------------------------------
# cylinder waves w_n = J_n(k r) exp(i n phi)


class _Waves:
    """Cached J_n(k r) for n in [-nmax, nmax] at fixed k and radii."""

    def __init__(self, k: float, r: np.ndarray, nmax: int):
        self.table = bessel_j_table(nmax, k * r)
        self.nmax = nmax

    def j(self, n: int) -> np.ndarray:
        v = self.table[abs(n)]
        return -v if (n < 0 and n % 2) else v


def _broadcast(r, phi):
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    r, phi = np.broadcast_arrays(r, phi)
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise ValueError("radii must be finite and nonnegative")
    return r, phi


def _wave_sum(coef, shift: int, k: float, waves: _Waves, phi, order: int = 0):
    """Sum_m coef[m] * D w_{m+shift} for the derivative pattern ``order``.

    order 0 returns the field; order 1 returns (d1, d2) using
    (d1 - i d2) w_n = k w_{n-1} and (d1 + i d2) w_n = -k w_{n+1}.
    """
    if order == 0:
        out = 0.0
        for m, cm in enumerate(coef):
            if cm != 0:
                n = m + shift
                out = out + cm * waves.j(n) * np.exp(1j * n * phi)
        return out
    d1 = 0.0
    d2 = 0.0
    for m, cm in enumerate(coef):
        if cm != 0:
            n = m + shift
            lo = waves.j(n - 1) * np.exp(1j * (n - 1) * phi)
            hi = waves.j(n + 1) * np.exp(1j * (n + 1) * phi)
            d1 = d1 + cm * 0.5 * k * (lo - hi)
            d2 = d2 + cm * 0.5j * k * (lo + hi)
    return d1, d2


def _parts(c: CoeffSeq, p: LameParams):
    """Scaled coefficients of the e1/e2 decomposition."""
    A = 0.5 * p.kp * c.a
    B = 0.5j * p.ks * c.b
    return A, B


def eval_u(c: CoeffSeq, p: LameParams, r, phi) -> np.ndarray:
    """Cartesian components of the truncated expansion; shape (..., 2)."""
    r, phi = _broadcast(r, phi)
    A, B = _parts(c, p)
    wp = _Waves(p.kp, r, c.M + 2)
    ws = _Waves(p.ks, r, c.M + 2)
    c1 = _wave_sum(A, -1, p.kp, wp, phi) + _wave_sum(B, -1, p.ks, ws, phi)
    c2 = -_wave_sum(A, 1, p.kp, wp, phi) + _wave_sum(B, 1, p.ks, ws, phi)
    c1 = np.broadcast_to(c1, r.shape)
    c2 = np.broadcast_to(c2, r.shape)
    return np.stack([c1 + c2, 1j * (c1 - c2)], axis=-1)


def eval_grad_u(c: CoeffSeq, p: LameParams, r, phi) -> np.ndarray:
    """Gradient matrix G[..., i, j] = d_j u_i, exact at r = 0 as well."""
    r, phi = _broadcast(r, phi)
    A, B = _parts(c, p)
    wp = _Waves(p.kp, r, c.M + 3)
    ws = _Waves(p.ks, r, c.M + 3)
    a1, a2 = _wave_sum(A, -1, p.kp, wp, phi, 1)
    b1, b2 = _wave_sum(B, -1, p.ks, ws, phi, 1)
    c1_d1, c1_d2 = a1 + b1, a2 + b2
    a1, a2 = _wave_sum(A, 1, p.kp, wp, phi, 1)
    b1, b2 = _wave_sum(B, 1, p.ks, ws, phi, 1)
    c2_d1, c2_d2 = -a1 + b1, -a2 + b2
    G = np.empty(r.shape + (2, 2), complex)
    G[..., 0, 0] = c1_d1 + c2_d1
    G[..., 0, 1] = c1_d2 + c2_d2
    G[..., 1, 0] = 1j * (c1_d1 - c2_d1)
    G[..., 1, 1] = 1j * (c1_d2 - c2_d2)
    return G


def _check_normal(normal) -> np.ndarray:
    nu = np.asarray(normal, dtype=float)
    norm = np.linalg.norm(nu, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-12):
        raise ValueError("normal must have unit length")
    return nu


def traction_from_grad(G: np.ndarray, p: LameParams, normal) -> np.ndarray:
    """2 mu G nu + lambda nu div u + mu tau (d2 u1 - d1 u2), tau = (-nu2, nu1)."""
    nu = _check_normal(normal)
    tau = np.stack([-nu[..., 1], nu[..., 0]], axis=-1)
    dnu = np.einsum("...ij,...j->...i", G, nu)
    div = G[..., 0, 0] + G[..., 1, 1]
    curl = G[..., 0, 1] - G[..., 1, 0]
    return 2 * p.mu * dnu + p.lam * nu * div[..., None] + p.mu * tau * curl[..., None]


def traction_direct(c: CoeffSeq, p: LameParams, r, phi, normal) -> np.ndarray:
    """Traction T_nu u by direct differentiation of the expansion."""
    return traction_from_grad(eval_grad_u(c, p, r, phi), p, normal)


def arm_normal(side: str, phi0: float | None = None) -> np.ndarray:
    if side == "minus":
        return np.array([0.0, -1.0])
    if side == "plus":
        return np.array([-math.sin(phi0), math.cos(phi0)])
    raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")


def _arm_angle(side: str, phi0: float | None) -> float:
    if side == "minus":
        return 0.0
    if side == "plus":
        if phi0 is None or not 0.0 < phi0 <= math.pi:
            raise ValueError("side 'plus' needs phi0 in (0, pi]")
        return float(phi0)
    raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")


def _from_basis(c1, c2) -> np.ndarray:
    return np.stack([c1 + c2, 1j * (c1 - c2)], axis=-1)


def _traction_basis(c: CoeffSeq, p: LameParams, side: str, r, phi0):
    """e1 and e2 coefficients of the traction series on an arm.

    On the plus arm every term carries the phase of its cylinder wave and the
    normal rotates by phi0; the minus arm is the phi0 = 0 case with the
    opposite normal, which flips the overall sign.
    """
    ang = _arm_angle(side, phi0)
    r = np.asarray(r, dtype=float)
    kp, ks, lam, mu = p.kp, p.ks, p.lam, p.mu
    jp = _Waves(kp, r, c.M + 2)
    js = _Waves(ks, r, c.M + 2)
    c1 = np.zeros(r.shape, complex)
    c2 = np.zeros(r.shape, complex)
    for m in range(c.M + 1):
        am, bm = c.a[m], c.b[m]
        lo = np.exp(1j * (m - 1) * ang)
        hi = np.exp(1j * (m + 1) * ang)
        c1 += lo * (0.5j * kp**2 * am * (mu * jp.j(m - 2) + (lam + mu) * jp.j(m))
                    - 0.5 * ks**2 * bm * mu * js.j(m - 2))
        c2 += hi * (-0.5j * kp**2 * am * (mu * jp.j(m + 2) + (lam + mu) * jp.j(m))
                    - 0.5 * ks**2 * bm * mu * js.j(m + 2))
    if side == "minus":
        c1, c2 = -c1, -c2
    return c1, c2


def _u_basis(c: CoeffSeq, p: LameParams, r, ang: float):
    r = np.asarray(r, dtype=float)
    A, B = _parts(c, p)
    jp = _Waves(p.kp, r, c.M + 2)
    js = _Waves(p.ks, r, c.M + 2)
    c1 = _wave_sum(A, -1, p.kp, jp, ang) + _wave_sum(B, -1, p.ks, js, ang)
    c2 = -_wave_sum(A, 1, p.kp, jp, ang) + _wave_sum(B, 1, p.ks, js, ang)
    return np.broadcast_to(c1, r.shape), np.broadcast_to(c2, r.shape)


def traction_series(c: CoeffSeq, p: LameParams, side: str, r, phi0: float | None = None) -> np.ndarray:
    """Traction on an arm from its closed Fourier-Bessel series (Cartesian)."""
    return _from_basis(*_traction_basis(c, p, side, r, phi0))


def impedance_series(c: CoeffSeq, p: LameParams, side: str, eta: complex, r,
                     phi0: float | None = None) -> np.ndarray:
    """T_nu u + eta u on an arm from the fused series (Cartesian)."""
    t1, t2 = _traction_basis(c, p, side, r, phi0)
    if eta != 0:
        u1, u2 = _u_basis(c, p, r, _arm_angle(side, phi0))
        t1 = t1 + eta * u1
        t2 = t2 + eta * u2
    return _from_basis(t1, t2)


def d2u1_on_axis_series(c: CoeffSeq, p: LameParams, r) -> np.ndarray:
    """d_2 u_1 along phi = 0 from the polar-derivative series.

    Uses (1/r) d_phi u_1 = d_2 u_1 on the positive x1-axis.
    """
    r = np.asarray(r, dtype=float)
    kp, ks = p.kp, p.ks
    jp = _Waves(kp, r, c.M + 2)
    js = _Waves(ks, r, c.M + 2)
    out = np.zeros(r.shape, complex)
    for m in range(c.M + 1):
        out += (1j * kp**2 * c.a[m] * (jp.j(m - 2) - jp.j(m + 2))
                - ks**2 * c.b[m] * (js.j(m - 2) + 2 * js.j(m) + js.j(m + 2)))
    return 0.25 * out


def vertex_value(c: CoeffSeq, p: LameParams) -> np.ndarray:
    """u(0) = (kp a_1 + i ks b_1)/2 * e1."""
    if c.M < 1:
        return np.zeros(2, complex)
    return 0.5 * (p.kp * c.a[1] + 1j * p.ks * c.b[1]) * E1


# ---------------------------------------------------------------------------
# finite-difference Navier residual (shared oracle)

_D2 = (np.array([-2, -1, 0, 1, 2]), np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0)
_D1 = (np.array([-2, -1, 1, 2]), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0)


def navier_residual_fd(field: Callable[[np.ndarray, np.ndarray], np.ndarray], p: LameParams,
                       x1, x2, step: float = 1e-3, kappa: float | None = None) -> np.ndarray:
    """-L u - kappa u by fourth-order central differences.

    ``field(x1, x2)`` returns Cartesian values with a trailing axis of size 2.
    ``kappa`` defaults to the eigenvalue in ``p``.
    """
    kap = p.kappa if kappa is None else kappa
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)

    def at(i, j):
        return field(x1 + i * step, x2 + j * step)

    u = at(0, 0)
    u11 = sum(w * at(o, 0) for o, w in zip(*_D2)) / step**2
    u22 = sum(w * at(0, o) for o, w in zip(*_D2)) / step**2
    u12 = sum(wi * wj * at(oi, oj) for oi, wi in zip(*_D1) for oj, wj in zip(*_D1)) / step**2
    lap = u11 + u22
    # grad div u = (d11 u1 + d12 u2, d12 u1 + d22 u2)
    gdiv = np.stack([u11[..., 0] + u12[..., 1], u12[..., 0] + u22[..., 1]], axis=-1)
    Lu = p.mu * lap + (p.lam + p.mu) * gdiv
    return -Lu - kap * u


def cartesian_field(c: CoeffSeq, p: LameParams) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Adapter evaluating ``u`` at Cartesian points."""

    def f(x1, x2):
        return eval_u(c, p, np.hypot(x1, x2), np.arctan2(x2, x1))

    return f
