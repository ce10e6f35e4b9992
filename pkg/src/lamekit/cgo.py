"""Complex geometrical optics (CGO) test field and the sector identities.

The field is ``v = exp(s sqrt(r) zeta(phi)) e1`` with ``zeta = -exp(i phi/2)``.
In complex notation ``v = exp(-s sqrt(z)) e1`` with ``z = x1 + i x2``, a
holomorphic profile, so ``v`` is divergence- and curl-free and ``L v = 0`` off
the branch cut along the negative real axis.

Products of vectors use the bilinear (unconjugated) dot product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NumericalError
from .lame_core import (
    E1,
    CoeffSeq,
    LameParams,
    arm_normal,
    eval_u,
    traction_direct,
)

GAUSS_ORDER = 16
TAIL_TOL = 1e-15


@dataclass(frozen=True)
class CgoField:
    s: float

    def __post_init__(self):
        if not (math.isfinite(self.s) and self.s > 0):
            raise ValueError(f"CGO parameter s must be finite and positive, got {self.s}")


@dataclass(frozen=True)
class SectorGeom:
    phi0: float
    h: float

    def __post_init__(self):
        if not 0.0 < self.phi0 <= math.pi:
            raise ValueError("opening angle must lie in (0, pi]")
        if not self.h > 0:
            raise ValueError("segment length must be positive")

    @property
    def delta(self) -> float:
        """min over the sector of cos(phi/2)."""
        return math.cos(self.phi0 / 2.0)


def zeta(phi):
    return -np.exp(0.5j * np.asarray(phi, dtype=float))


def eval_v(f: CgoField, r, phi) -> np.ndarray:
    """v at polar points; trailing axis holds the two Cartesian components."""
    r = np.asarray(r, dtype=float)
    phase = np.exp(f.s * np.sqrt(r) * zeta(phi))
    return phase[..., None] * E1


def traction_v(f: CgoField, p: LameParams, r, phi, normal) -> np.ndarray:
    """T_nu v = mu (nu1 + i nu2) s exp(s sqrt(r) zeta) / (sqrt(r) zeta) e1, r > 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("traction of v is singular at the vertex; need r > 0")
    nu = np.asarray(normal, dtype=float)
    z = zeta(phi)
    rt = np.sqrt(r)
    scal = np.asarray(p.mu * (nu[..., 0] + 1j * nu[..., 1]) * f.s * np.exp(f.s * rt * z) / (rt * z))
    return scal[..., None] * E1


def traction_v_on_arm(f: CgoField, p: LameParams, side: str, r, phi0: float | None = None) -> np.ndarray:
    """Closed forms on the two arms.

    plus:  i s mu zeta(phi0) exp(s sqrt(r) zeta(phi0)) r^(-1/2) e1
    minus: i s mu exp(-s sqrt(r)) r^(-1/2) e1
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("traction of v is singular at the vertex; need r > 0")
    if side == "minus":
        z, pref = -1.0, 1.0
    elif side == "plus":
        z = complex(zeta(phi0))
        pref = z
    else:
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")
    scal = np.asarray(1j * f.s * p.mu * pref * np.exp(f.s * np.sqrt(r) * z) / np.sqrt(r))
    return scal[..., None] * E1


# ---------------------------------------------------------------------------
# weighted radial integrals


def _half_integer(ell) -> int:
    n = 2.0 * ell + 1.0
    if ell < 0 or abs(n - round(n)) > 1e-12:
        raise ValueError(f"ell must be a nonnegative half-integer, got {ell}")
    return int(round(n))


def weighted_r_integral(ell: float, f: CgoField, zeta_val: complex, h: float) -> complex:
    """Closed form of int_0^h r^ell exp(s sqrt(r) zeta) dr.

    With t = sqrt(r) and n = 2 ell + 1 the integral is 2 int_0^sqrt(h) t^n e^{c t} dt,
    c = s zeta, which integrates by parts into a finite sum.
    """
    if not np.real(zeta_val) < 0:
        raise ValueError("Re zeta must be negative")
    n = _half_integer(ell)
    c = f.s * complex(zeta_val)
    T = math.sqrt(h)
    fact_n = math.factorial(n)
    acc = 0.0j
    for j in range(n + 1):
        acc += (-1) ** j * fact_n / math.factorial(n - j) * T ** (n - j) / c ** (j + 1)
    return 2.0 * (np.exp(c * T) * acc - (-1) ** n * fact_n / c ** (n + 1))


def weighted_r_integral_leading(ell: float, f: CgoField, zeta_val: complex) -> complex:
    """Large-s limit 2 (-1)^(2 ell) (2 ell + 1)! / (s zeta)^(2 ell + 2)."""
    n = _half_integer(ell)
    return 2.0 * (-1) ** (n - 1) * math.factorial(n) / (f.s * complex(zeta_val)) ** (n + 1)


def composite_gauss(a: float, b: float, n: int, order: int = GAUSS_ORDER):
    """Nodes and weights of composite Gauss-Legendre with about n nodes."""
    panels = max(1, -(-n // order))
    x, w = leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


# ---------------------------------------------------------------------------
# boundary identity


def _dot(x, y):
    return x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1]


def arm_integrals(c: CoeffSeq, p: LameParams, f: CgoField, side: str, phi0: float,
                  upper: float, n: int) -> dict:
    """Integrals over the arm segment (0, upper) of Tu.v, Tv.u and u.v.

    Uses r = t^2 so that the r^(-1/2) factor of T_nu v becomes smooth.
    """
    ang = 0.0 if side == "minus" else phi0
    t, w = composite_gauss(0.0, math.sqrt(upper), n)
    r = t * t
    jac = 2.0 * t * w
    nu = arm_normal(side, phi0)
    u = eval_u(c, p, r, ang)
    v = eval_v(f, r, ang)
    tu = traction_direct(c, p, r, ang, nu)
    tv = traction_v_on_arm(f, p, side, r, phi0)
    return {
        "tu_v": np.sum(jac * _dot(tu, v)),
        "tv_u": np.sum(jac * _dot(tv, u)),
        "u_v": np.sum(jac * _dot(u, v)),
    }


def _arc_integral(c, p, g: SectorGeom, f, n):
    phi, w = composite_gauss(0.0, g.phi0, n)
    nu = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    u = eval_u(c, p, g.h, phi)
    v = eval_v(f, g.h, phi)
    tu = traction_direct(c, p, g.h, phi, nu)
    tv = traction_v(f, p, g.h, phi, nu)
    return g.h * np.sum(w * (_dot(tu, v) - _dot(tv, u)))


def _sector_integral(c, p, g: SectorGeom, f, n):
    t, wt = composite_gauss(0.0, math.sqrt(g.h), n)
    phi, wp = composite_gauss(0.0, g.phi0, n)
    T, P = np.meshgrid(t, phi, indexing="ij")
    R = T * T
    uv = _dot(eval_u(c, p, R, P), eval_v(f, R, P))
    jac = 2.0 * T**3
    return -p.kappa * np.sum(wt[:, None] * wp[None, :] * jac * uv)


@dataclass(frozen=True)
class BoundaryIntegrals:
    I1_plus: complex
    I1_minus: complex
    I2: complex
    I3: complex
    identity_residual: float
    error_estimate: float


def _all_integrals(c, p, g, f, n):
    plus = arm_integrals(c, p, f, "plus", g.phi0, g.h, n)
    minus = arm_integrals(c, p, f, "minus", g.phi0, g.h, n)
    return np.array([
        plus["tu_v"] - plus["tv_u"],
        minus["tu_v"] - minus["tv_u"],
        _arc_integral(c, p, g, f, n),
        _sector_integral(c, p, g, f, n),
    ])


def boundary_integrals(c: CoeffSeq, p: LameParams, g: SectorGeom, f: CgoField,
                       quad_n: int = 128) -> BoundaryIntegrals:
    """I1+, I1-, I2 (arc) and I3 = -kappa int_S u.v with the identity residual.

    The quadrature error is estimated by repeating the computation at half
    resolution; a NumericalError is raised when it exceeds 1e-8 of the scale.
    """
    if quad_n < 64:
        raise ValueError("quad_n must be at least 64")
    fine = _all_integrals(c, p, g, f, quad_n)
    coarse = _all_integrals(c, p, g, f, quad_n // 2)
    scale = 1.0 + float(np.max(np.abs(fine)))
    err = float(np.max(np.abs(fine - coarse)))
    if err > 1e-8 * scale:
        raise NumericalError(f"quadrature not converged: estimated error {err:.3e} at scale {scale:.3e}")
    i1p, i1m, i2, i3 = (complex(z) for z in fine)
    return BoundaryIntegrals(i1p, i1m, i2, i3, abs(i3 - i1p - i1m - i2), err)


def i3_bound(c: CoeffSeq, p: LameParams, g: SectorGeom, f: CgoField) -> float:
    """Upper bound for |I3| from the near-vertex growth of u.v."""
    lead = abs(p.kp**2 * c.a[0] - 1j * p.ks**2 * c.b[0])
    d = g.delta
    s1 = remainder_bounds(c, p, g.phi0, g.h, 0).S1
    return (lead * p.kappa * g.phi0 * math.gamma(6) / d**6 * f.s**-6
            + 2 * p.kappa * g.phi0 * math.gamma(8) * s1 / d**8 * f.s**-8)


def volume_bound(alpha: float, f: CgoField, phi0: float) -> float:
    """Bound for int_K |v_j| r^alpha dx over the infinite sector."""
    d = math.cos(phi0 / 2)
    return 2 * phi0 * math.gamma(2 * alpha + 4) / d ** (2 * alpha + 4) * f.s ** (-2 * alpha - 4)


def sector_tail_bound(f: CgoField, phi0: float, radius: float) -> float:
    """Bound for int_{K outside B_radius} |v_j| dx."""
    d = math.cos(phi0 / 2)
    return 6 * phi0 / d**4 * f.s**-4 * math.exp(-d * f.s * math.sqrt(radius) / 2)


def sector_v1_integral_closed(f: CgoField, phi0: float) -> complex:
    """int_K v_1 dx over the infinite sector = 6i (e^{-2 i phi0} - 1) s^-4."""
    return 6j * (np.exp(-2j * phi0) - 1.0) * f.s**-4


def sector_v1_integral_numeric(f: CgoField, phi0: float, tail_tol: float = 1e-10,
                               n: int = 256) -> tuple[complex, float]:
    """Quadrature of v_1 over the sector truncated where the tail bound is small.

    The truncation radius makes the tail bound smaller than ``tail_tol * s^-4``,
    the natural size of the integral.  Returns (value, truncation radius).
    """
    d = math.cos(phi0 / 2)
    ratio = 6 * phi0 / d**4 / tail_tol
    radius = (2.0 * math.log(ratio) / (d * f.s)) ** 2 if ratio > 1 else 1.0
    t, wt = composite_gauss(0.0, math.sqrt(radius), n)
    phi, wp = composite_gauss(0.0, phi0, n)
    T, P = np.meshgrid(t, phi, indexing="ij")
    vals = np.exp(f.s * T * zeta(P)) * 2.0 * T**3
    return complex(np.sum(wt[:, None] * wp[None, :] * vals)), radius


# ---------------------------------------------------------------------------
# expansions of the arm products and their remainders


def _arm_angle(side, phi0):
    return 0.0 if side == "minus" else float(phi0)


def arm_brackets(c: CoeffSeq, p: LameParams, side: str, r, phi0: float | None = None) -> dict:
    """The s-independent factors of the three arm products.

    tu_v: T_nu u . v = sign * exp(s sqrt(r) zeta0) * tu_v, with sign -1 on plus
    tv_u: T_nu v . u = i s mu zeta0 exp(...) * tv_u  (zeta0 = -1 on minus)
    u_v : u . v      = exp(...) * u_v
    """
    r = np.asarray(r, dtype=float)
    ang = _arm_angle(side, phi0)
    u = eval_u(c, p, r, ang)
    tu = traction_direct(c, p, r, ang, arm_normal(side, phi0))
    e1u = u[..., 0] + 1j * u[..., 1]
    tue1 = tu[..., 0] + 1j * tu[..., 1]
    sign = 1.0 if side == "minus" else -1.0
    return {"tu_v": sign * tue1, "tv_u": e1u / np.sqrt(r), "u_v": e1u}


def leading_terms(c: CoeffSeq, p: LameParams, side: str, r, phi0: float | None = None,
                  ell: int = 0) -> dict:
    """Displayed leading terms of the arm products.

    For ell > 0 the coefficients below order ell are assumed to vanish; the
    tu_v entry is only defined for ell = 0.
    """
    r = np.asarray(r, dtype=float)
    ang = _arm_angle(side, phi0)
    kp, ks, lam, mu = p.kp, p.ks, p.lam, p.mu
    a = np.concatenate([c.a, np.zeros(4, complex)])
    b = np.concatenate([c.b, np.zeros(4, complex)])
    ph = lambda q: np.exp(1j * q * ang)  # noqa: E731
    out = {}
    if ell == 0:
        out["tu_v"] = (1j * kp**2 * (lam + mu) * ph(1) * a[0]
                       + 0.5j * kp**3 * (lam + mu) * ph(2) * a[1] * r
                       + (1j * kp**4 * (lam + mu) * ph(3) * a[2]
                          - 1j * kp**4 * (2 * lam + mu) * ph(1) * a[0]
                          + ks**4 * mu * ph(1) * b[0]) * r**2 / 8)

    def mode(m, q):
        return -kp ** (m + 2 + q) * a[m] + 1j * ks ** (m + 2 + q) * b[m]

    L = ell
    tv = np.zeros(r.shape, complex)
    for j in range(3):
        m = L + j
        tv = tv + ph(m + 1) * mode(m, 0) / (2 ** (m + 1) * math.factorial(m + 1)) * r ** (m + 0.5)
    tv = tv - ph(L + 1) * mode(L, 2) / (2 ** (L + 3) * math.factorial(L + 2)) * r ** (L + 2.5)
    out["tv_u"] = tv
    out["u_v"] = ph(L + 1) * mode(L, 0) / (2 ** (L + 1) * math.factorial(L + 1)) * r ** (L + 1)
    return out


def numerical_remainders(c: CoeffSeq, p: LameParams, side: str, r, phi0: float | None = None,
                         ell: int = 0) -> dict:
    """Full arm products minus their displayed leading terms.

    Keys R1, R2, R0 for ell = 0; R2_hat, R0_hat for the ell-shifted versions.
    """
    br = arm_brackets(c, p, side, r, phi0)
    lead = leading_terms(c, p, side, r, phi0, ell)
    if ell == 0:
        return {"R1": br["tu_v"] - lead["tu_v"], "R2": br["tv_u"] - lead["tv_u"],
                "R0": br["u_v"] - lead["u_v"]}
    return {"R2_hat": br["tv_u"] - lead["tv_u"], "R0_hat": br["u_v"] - lead["u_v"]}


def _bessel_coef(k: int, m: int, wave: float) -> float:
    """wave^(2k+m) / (2^(2k+m) k! (k+m)!), the r^(2k+m) coefficient of |J_m(wave r)|."""
    return wave ** (2 * k + m) / (2.0 ** (2 * k + m) * math.factorial(k) * math.factorial(k + m))


def _series(term, k0: int, signed: bool = False) -> float | complex:
    """Sum term(k) for k >= k0 until terms fall below TAIL_TOL relative."""
    total = 0.0
    for k in range(k0, k0 + 150):
        t = term(k) * ((-1) ** k if signed else 1.0)
        total += t
        if abs(t) <= TAIL_TOL * max(abs(total), 1e-300) and k > k0 + 2:
            break
    return total


@dataclass(frozen=True)
class RemainderBounds:
    S0: float
    S1: float
    S2: float
    S3: float
    S0_hat: float
    S3_hat: float
    S1_ell: float


def remainder_bounds(c: CoeffSeq, p: LameParams, phi0: float, h: float, ell: int = 0) -> RemainderBounds:
    """Bound constants S0..S3 and their ell-shifted versions.

    The arm phases have unit modulus, so the constants do not depend on phi0;
    the argument is kept for symmetry with the arm-product routines.
    """
    kp, ks, lam, mu = p.kp, p.ks, p.lam, p.mu
    M = c.M
    a, b = c.a, c.b
    A = np.abs(a)
    B = np.abs(b)
    bc = _bessel_coef

    # S1 and S1(ell): u.v bracket beyond its leading term
    def s1_of(L):
        if L > M:
            return 0.0
        first = abs(_series(lambda k: (-kp * a[L] * bc(k, L + 1, kp) + 1j * ks * b[L] * bc(k, L + 1, ks))
                            * h ** (2 * k - 1), 1, signed=True))
        rest = sum(abs(_series(lambda k, m=m: (-kp * a[m] * bc(k, m + 1, kp) + 1j * ks * b[m] * bc(k, m + 1, ks))
                               * h ** (2 * k + m - L - 1), 0, signed=True))
                   for m in range(L + 1, M + 1))
        return first + rest

    S1 = s1_of(0)
    S1_ell = s1_of(ell)

    # S2: T_nu u . v
    S2 = kp**2 * (lam + mu) * (
        A[0] * _series(lambda k: bc(k, 0, kp) * h ** (2 * k - 3), 2)
        + sum(A[m] * _series(lambda k, m=m: bc(k, m, kp) * h ** (2 * k + m - 3), 1) for m in (1, 2) if m <= M))
    S2 += kp**2 * mu * A[0] * _series(lambda k: bc(k, 2, kp) * h ** (2 * k - 1), 1)
    S2 += ks**2 * mu * B[0] * _series(lambda k: bc(k, 2, ks) * h ** (2 * k - 1), 1)
    for m in (1, 2):
        if m <= M:
            S2 += kp**2 * mu * A[m] * _series(lambda k, m=m: bc(k, m + 2, kp) * h ** (2 * k + m - 1), 0)
            S2 += ks**2 * mu * B[m] * _series(lambda k, m=m: bc(k, m + 2, ks) * h ** (2 * k + m - 1), 0)
    for m in range(3, M + 1):
        S2 += abs(_series(lambda k, m=m: (1j * kp**2 * (lam + mu) * a[m] * bc(k, m, kp) * h ** (2 * k + m - 3)
                                          + 1j * kp**2 * mu * a[m] * bc(k, m + 2, kp) * h ** (2 * k + m - 1)
                                          + ks**2 * mu * b[m] * bc(k, m + 2, ks) * h ** (2 * k + m - 1)),
                          0, signed=True))

    # S3 / S3_hat: T_nu v . u ; S0 / S0_hat: u . v
    def s3_of(L):
        if L > M:
            return 0.0
        val = (A[L] * _series(lambda k: kp * bc(k, L + 1, kp) * h ** (2 * k - 3), 2)
               + B[L] * _series(lambda k: ks * bc(k, L + 1, ks) * h ** (2 * k - 3), 2))
        for m in (L + 1, L + 2):
            if m <= M:
                val += A[m] * _series(lambda k, m=m: kp * bc(k, m + 1, kp) * h ** (2 * k + m - L - 3), 1)
                val += B[m] * _series(lambda k, m=m: ks * bc(k, m + 1, ks) * h ** (2 * k + m - L - 3), 1)
        for m in range(L + 3, M + 1):
            val += abs(_series(lambda k, m=m: (-kp * a[m] * bc(k, m + 1, kp) + 1j * ks * b[m] * bc(k, m + 1, ks))
                               * h ** (2 * k + m - L - 3), 0, signed=True))
        return val

    def s0_of(L):
        if L > M:
            return 0.0
        val = (A[L] * _series(lambda k: kp * bc(k, L + 1, kp) * h ** (2 * k - 1), 1)
               + B[L] * _series(lambda k: ks * bc(k, L + 1, ks) * h ** (2 * k - 1), 1))
        for m in range(L + 1, M + 1):
            val += abs(_series(lambda k, m=m: (-kp * a[m] * bc(k, m + 1, kp) + 1j * ks * b[m] * bc(k, m + 1, ks))
                               * h ** (2 * k + m - L - 1), 0, signed=True))
        return val

    return RemainderBounds(
        S0=float(s0_of(0)), S1=float(S1), S2=float(S2), S3=float(s3_of(0)),
        S0_hat=float(s0_of(ell)), S3_hat=float(s3_of(ell)), S1_ell=float(S1_ell),
    )
