"""Coefficient systems behind the generalized Holmgren principle.

Boundary conditions on the sector arms, point conditions at the vertex and the
relations obtained from the CGO identity are all linear in the coefficients
``(a_0..a_M, b_0..b_M)``.  This module assembles them into one matrix and
decides by a rank test whether the only solution is zero.

Two routes produce the arm rows:

* explicit rows (``condition_rows_*``) restate the coefficient comparisons of
  the induction step, where all modes below ``m`` are already known to vanish;
* ``series_rows`` expands every boundary trace into powers of ``r`` directly
  from the cylinder-wave terms and keeps each power whose coefficient involves
  only modes ``<= M``.  These rows hold without any induction hypothesis and
  are what ``certify_vanishing`` uses.

Unknowns are ordered ``[a_0, ..., a_M, b_0, ..., b_M]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ParameterError, SchemaError
from .lame_core import (
    CoeffSeq,
    LameParams,
    arm_normal,
    eval_grad_u,
    eval_u,
    params_from_dict,
    traction_direct,
)

RIGID = "rigid"
TRACTION_FREE = "traction_free"
IMPEDANCE = "impedance"
KINDS = (RIGID, TRACTION_FREE, IMPEDANCE)

DEFAULT_TOL = 1e-9
COLLOCATION_TOL = 1e-6
MIN_ORDER = 4

ALL_VANISH = "AllCoefficientsVanish"
NONTRIVIAL = "NontrivialNullSpace"


# ---------------------------------------------------------------------------
# configuration types


@dataclass(frozen=True)
class LineCondition:
    kind: str
    eta: complex = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown line condition {self.kind!r}")
        if self.kind == IMPEDANCE:
            if not np.isfinite(complex(self.eta)):
                raise ParameterError("impedance parameter must be finite")
            if complex(self.eta) == 0:
                raise ParameterError("impedance parameter must be nonzero")
        object.__setattr__(self, "eta", complex(self.eta) if self.kind == IMPEDANCE else 0j)

    @classmethod
    def rigid(cls) -> "LineCondition":
        return cls(RIGID)

    @classmethod
    def traction_free(cls) -> "LineCondition":
        return cls(TRACTION_FREE)

    @classmethod
    def impedance(cls, eta: complex) -> "LineCondition":
        return cls(IMPEDANCE, eta)

    def to_dict(self) -> dict:
        out = {"type": self.kind}
        if self.kind == IMPEDANCE:
            out["eta"] = [self.eta.real, self.eta.imag]
        return out

    @classmethod
    def from_dict(cls, d, pointer: str) -> "LineCondition":
        if not isinstance(d, dict):
            raise SchemaError("expected an object", pointer)
        kind = d.get("type")
        if kind not in KINDS:
            raise SchemaError(f"type must be one of {list(KINDS)}", f"{pointer}/type")
        if kind != IMPEDANCE:
            return cls(kind)
        eta = d.get("eta")
        if (not isinstance(eta, list) or len(eta) != 2
                or not all(isinstance(x, (int, float)) for x in eta)):
            raise SchemaError("expected [re, im]", f"{pointer}/eta")
        try:
            return cls(kind, complex(eta[0], eta[1]))
        except ParameterError as exc:
            raise SchemaError(str(exc), f"{pointer}/eta") from None


@dataclass(frozen=True)
class VertexConditions:
    """Point conditions at the vertex: u(0) = 0 and d_2 u_1(0) = 0."""

    u_vanishes: bool = False
    tau_dnu_vanishes: bool = False


@dataclass(frozen=True)
class HolmgrenConfig:
    """A sector (or single line) problem; ``arm_minus=None`` imposes no arm condition."""

    arm_minus: LineCondition | None
    params: LameParams
    M: int = 10
    arm_plus: LineCondition | None = None
    phi0: float | None = None
    vertex: VertexConditions = field(default_factory=VertexConditions)

    def __post_init__(self):
        if self.arm_minus is None and self.arm_plus is not None:
            raise ParameterError("a plus arm requires a minus arm")
        if self.arm_plus is not None:
            if self.phi0 is None:
                raise ParameterError("phi0 is required when the plus arm is present")
            if not 0.0 < self.phi0 <= math.pi:
                raise ParameterError("phi0 must lie in (0, pi]")
        elif self.phi0 is not None:
            raise ParameterError("phi0 is only meaningful with a plus arm")
        if int(self.M) != self.M or self.M < 0:
            raise ParameterError("order M must be a nonnegative integer")

    @property
    def unknowns(self) -> int:
        return 2 * (self.M + 1)

    def with_order(self, M: int) -> "HolmgrenConfig":
        return HolmgrenConfig(self.arm_minus, self.params, M, self.arm_plus, self.phi0, self.vertex)

    def to_dict(self) -> dict:
        return {
            "arm_minus": None if self.arm_minus is None else self.arm_minus.to_dict(),
            "arm_plus": None if self.arm_plus is None else self.arm_plus.to_dict(),
            "phi0": self.phi0,
            "vertex": {"u0": self.vertex.u_vanishes, "du0": self.vertex.tau_dnu_vanishes},
            "params": self.params.to_dict(),
            "M": self.M,
        }

    @classmethod
    def from_dict(cls, d, pointer: str = "") -> "HolmgrenConfig":
        if not isinstance(d, dict):
            raise SchemaError("expected an object", pointer)
        for key in ("arm_minus", "params", "M"):
            if key not in d:
                raise SchemaError("missing key", f"{pointer}/{key}")
        minus_raw = d["arm_minus"]
        minus = None if minus_raw is None else LineCondition.from_dict(minus_raw, f"{pointer}/arm_minus")
        plus_raw = d.get("arm_plus")
        plus = None if plus_raw is None else LineCondition.from_dict(plus_raw, f"{pointer}/arm_plus")
        if plus is not None and minus is None:
            raise SchemaError("a plus arm requires a minus arm", f"{pointer}/arm_minus")
        phi0 = d.get("phi0")
        if plus is not None:
            if not isinstance(phi0, (int, float)) or not 0.0 < phi0 <= math.pi:
                raise SchemaError("phi0 in (0, pi] required with a plus arm", f"{pointer}/phi0")
            phi0 = float(phi0)
        else:
            phi0 = None
        vert = d.get("vertex", {})
        if not isinstance(vert, dict):
            raise SchemaError("expected an object", f"{pointer}/vertex")
        flags = {}
        for key in ("u0", "du0"):
            val = vert.get(key, False)
            if not isinstance(val, bool):
                raise SchemaError("expected a boolean", f"{pointer}/vertex/{key}")
            flags[key] = val
        M = d["M"]
        if not isinstance(M, int) or isinstance(M, bool) or M < 0:
            raise SchemaError("M must be a nonnegative integer", f"{pointer}/M")
        if not isinstance(d["params"], dict):
            raise SchemaError("expected an object", f"{pointer}/params")
        try:
            params = params_from_dict(d["params"], f"{pointer}/params")
        except ParameterError as exc:
            raise SchemaError(str(exc), f"{pointer}/params") from None
        return cls(minus, params, M, plus, phi0, VertexConditions(flags["u0"], flags["du0"]))


@dataclass(frozen=True)
class VanishingCertificate:
    system_rows: int
    unknowns: int
    numerical_rank: int
    smallest_kept_singular_value: float
    smallest_singular_value: float
    null_space_dim: int
    verdict: str
    marginal: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# rows


@dataclass(frozen=True)
class ConditionRow:
    """A linear condition sum coeffs[(var, m)] * var_m = 0 with var in {'a', 'b'}."""

    coeffs: dict
    label: str = ""

    def dense(self, M: int) -> np.ndarray:
        row = np.zeros(2 * (M + 1), complex)
        for (var, m), val in self.coeffs.items():
            if m > M:
                raise ValueError(f"row {self.label!r} involves mode {m} > M = {M}")
            row[m if var == "a" else M + 1 + m] += val
        return row

    def max_mode(self) -> int:
        return max((m for (_, m), v in self.coeffs.items() if v != 0), default=-1)


def _row(label: str, **terms) -> ConditionRow:
    """Build a row from keywords like a2=..., b0=...."""
    coeffs = {}
    for key, val in terms.items():
        coeffs[(key[0], int(key[1:]))] = complex(val)
    return ConditionRow(coeffs, label)


def _pair(label: str, pairs) -> ConditionRow:
    coeffs = {}
    for key, val in pairs:
        coeffs[key] = coeffs.get(key, 0j) + complex(val)
    return ConditionRow(coeffs, label)


def condition_rows_rigid(m: int, p: LameParams) -> list[ConditionRow]:
    """Rigid-arm rows at step m, assuming all modes below m vanish.

    The r^(m-1) coefficient of the e1 part (absent for m = 0) and the
    r^(m+1) coefficients of the e1 and e2 parts.
    """
    kp, ks = p.kp, p.ks
    rows = []
    if m >= 1:
        rows.append(_pair(f"rigid e1 r^{m - 1}", [(("a", m), kp**m), (("b", m), 1j * ks**m)]))
    rows.append(_pair(f"rigid e1 r^{m + 1}", [
        (("a", m), -(m + 1) * kp ** (m + 2)), (("b", m), -1j * (m + 1) * ks ** (m + 2)),
        (("a", m + 2), kp ** (m + 2)), (("b", m + 2), 1j * ks ** (m + 2))]))
    rows.append(_pair(f"rigid e2 r^{m + 1}", [(("a", m), kp ** (m + 2)), (("b", m), -1j * ks ** (m + 2))]))
    return rows


def condition_rows_traction(m: int, p: LameParams) -> list[ConditionRow]:
    """Traction-free rows at step m, assuming all modes below m vanish."""
    kp, ks, lam, mu = p.kp, p.ks, p.lam, p.mu
    rows = []
    if m >= 2:
        rows.append(_pair(f"traction e1 r^{m - 2}", [(("a", m), 1j * kp**m), (("b", m), -ks**m)]))
    rows.append(_pair(f"traction e1 r^{m}", [
        (("a", m), 1j * kp ** (m + 2) * (lam - (m - 1) * mu)), (("b", m), m * ks ** (m + 2) * mu),
        (("a", m + 2), 1j * kp ** (m + 2) * mu), (("b", m + 2), -ks ** (m + 2) * mu)]))
    rows.append(_pair(f"traction e2 r^{m}", [(("a", m), 1.0)]))
    return rows


def condition_rows_impedance(m: int, p: LameParams, eta: complex) -> list[ConditionRow]:
    """Impedance rows at step m (T u + eta u = 0), assuming modes below m vanish."""
    if complex(eta) == 0:
        raise ParameterError("impedance parameter must be nonzero")
    kp, ks, lam, mu = p.kp, p.ks, p.lam, p.mu
    rows = []
    if m >= 2:
        rows.append(_pair(f"impedance e1 r^{m - 2}", [(("a", m), 1j * kp**m), (("b", m), -ks**m)]))
    rows.append(_pair(f"impedance e1 r^{m}", [
        (("a", m), -1j * kp ** (m + 2) * (lam + (1 - m) * mu)), (("b", m), -m * ks ** (m + 2) * mu),
        (("a", m + 1), eta * kp ** (m + 1)), (("b", m + 1), 1j * eta * ks ** (m + 1)),
        (("a", m + 2), -1j * kp ** (m + 2) * mu), (("b", m + 2), ks ** (m + 2) * mu)]))
    rows.append(_pair(f"impedance e2 r^{m}", [(("a", m), 1.0)]))
    return rows


def explicit_rows(cond: LineCondition, m: int, p: LameParams) -> list[ConditionRow]:
    if cond.kind == RIGID:
        return condition_rows_rigid(m, p)
    if cond.kind == TRACTION_FREE:
        return condition_rows_traction(m, p)
    return condition_rows_impedance(m, p, cond.eta)


def vertex_rows(v: VertexConditions, p: LameParams) -> list[ConditionRow]:
    """u(0) = 0 gives kp a_1 + i ks b_1 = 0; d_2 u_1(0) = 0 gives -2 ks^2 b_0 + i kp^2 a_2 - ks^2 b_2 = 0."""
    kp, ks = p.kp, p.ks
    rows = []
    if v.u_vanishes:
        rows.append(_row("vertex u(0)", a1=kp, b1=1j * ks))
    if v.tau_dnu_vanishes:
        rows.append(_row("vertex d2u1(0)", b0=-2 * ks**2, a2=1j * kp**2, b2=-(ks**2)))
    return rows


# ---------------------------------------------------------------------------
# power-series extraction of boundary traces


def bessel_power_coef(order: int, k: float, power: int) -> float:
    """Coefficient of r^power in the Taylor expansion of J_order(k r)."""
    n = abs(order)
    if power < n or (power - n) % 2:
        return 0.0
    q = (power - n) // 2
    val = (-1) ** q * (k / 2.0) ** power / (math.factorial(q) * math.factorial(q + n))
    if order < 0 and n % 2:
        val = -val
    return val


def _trace_terms(cond: LineCondition, side: str, phi0: float | None, p: LameParams, m: int):
    """Cylinder-wave terms of the boundary trace contributed by mode m.

    Returns tuples (component, var, coefficient, wavenumber, bessel order) with
    component 0 for e1 and 1 for e2.
    """
    kp, ks, lam, mu = p.kp, p.ks, p.lam, p.mu
    ang = 0.0 if side == "minus" else float(phi0)
    lo = np.exp(1j * (m - 1) * ang)
    hi = np.exp(1j * (m + 1) * ang)
    terms = []
    u_terms = [
        (0, "a", lo * kp / 2, kp, m - 1), (0, "b", lo * 1j * ks / 2, ks, m - 1),
        (1, "a", -hi * kp / 2, kp, m + 1), (1, "b", hi * 1j * ks / 2, ks, m + 1),
    ]
    if cond.kind == RIGID:
        return u_terms
    sign = -1.0 if side == "minus" else 1.0
    terms += [
        (0, "a", sign * lo * 0.5j * kp**2 * mu, kp, m - 2),
        (0, "a", sign * lo * 0.5j * kp**2 * (lam + mu), kp, m),
        (0, "b", -sign * lo * 0.5 * ks**2 * mu, ks, m - 2),
        (1, "a", -sign * hi * 0.5j * kp**2 * mu, kp, m + 2),
        (1, "a", -sign * hi * 0.5j * kp**2 * (lam + mu), kp, m),
        (1, "b", -sign * hi * 0.5 * ks**2 * mu, ks, m + 2),
    ]
    if cond.kind == IMPEDANCE:
        terms += [(c, var, cond.eta * coef, k, order) for c, var, coef, k, order in u_terms]
    return terms


def series_rows(cond: LineCondition, side: str, phi0: float | None, p: LameParams, M: int,
                complete_only: bool = True, max_power: int | None = None) -> list[ConditionRow]:
    """Rows from the r-power coefficients of the e1 and e2 parts of a boundary trace.

    With ``complete_only`` a power is kept only when no mode above M could
    contribute to it, so each kept row is an exact condition on the true
    coefficients regardless of truncation.
    """
    per_mode = {m: _trace_terms(cond, side, phi0, p, m) for m in range(M + 1)}
    # smallest (bessel order - mode) per component: the highest mode that
    # reaches power n is n - shift
    probe = _trace_terms(cond, side, phi0, p, 0)
    shift = {c: min(order for cc, _, _, _, order in probe if cc == c) for c in (0, 1)}
    top = max_power if max_power is not None else M + 3
    rows = []
    for comp in (0, 1):
        for n in range(top + 1):
            if complete_only and n - shift[comp] > M:
                continue
            coeffs = {}
            for m, terms in per_mode.items():
                for c, var, coef, k, order in terms:
                    if c != comp:
                        continue
                    val = coef * bessel_power_coef(order, k, n)
                    if val != 0:
                        coeffs[(var, m)] = coeffs.get((var, m), 0j) + val
            if any(abs(v) > 0 for v in coeffs.values()):
                rows.append(ConditionRow(coeffs, f"{side} {cond.kind} e{comp + 1} r^{n}"))
    return rows


# ---------------------------------------------------------------------------
# intersecting arms


def phi_root_function(phi):
    """g(phi) = (4/3) phi / cos^6(phi/2) - 1."""
    return (4.0 / 3.0) * np.asarray(phi) / np.cos(np.asarray(phi) / 2.0) ** 6 - 1.0


def _phi_root_derivative(phi: float) -> float:
    c = math.cos(phi / 2.0)
    return (4.0 / 3.0) * (1.0 / c**6 + 3.0 * phi * math.sin(phi / 2.0) / c**7)


def phi_root(tol: float = 1e-15) -> float:
    """Root of g on (0, pi): bisection to 1e-6 then Newton."""
    if tol < 1e-15:
        raise ValueError("tol must be at least 1e-15")
    lo, hi = 1e-12, math.pi - 1e-6
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if phi_root_function(mid) < 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(50):
        step = float(phi_root_function(x)) / _phi_root_derivative(x)
        x -= step
        if abs(step) <= tol * max(1.0, abs(x)):
            break
    return x


PHI_ROOT = phi_root()


def pair_kind(config: HolmgrenConfig) -> tuple[str, str] | None:
    if config.arm_plus is None:
        return None
    return config.arm_minus.kind, config.arm_plus.kind


def _check_pair(config: HolmgrenConfig) -> tuple[str, str]:
    pair = pair_kind(config)
    if pair is None:
        raise ParameterError("intersection rows need two arms")
    if abs(config.phi0 - math.pi) < 1e-12:
        raise ParameterError("degenerate straight intersection: phi0 = pi")
    order = {RIGID: 0, TRACTION_FREE: 1, IMPEDANCE: 2}
    if order[pair[0]] > order[pair[1]]:
        raise ParameterError(
            "mixed pairs carry the rigid (or else traction-free) condition on the minus arm; "
            "swap the arms")
    return pair


def intersection_rows(config: HolmgrenConfig) -> list[ConditionRow]:
    """Relations on the low modes implied by the CGO identity for two arms."""
    pair = _check_pair(config)
    p = config.params
    kp, ks, lam, mu = p.kp, p.ks, p.lam, p.mu
    if pair == (RIGID, RIGID):
        return [_row("cgo rigid/rigid", a0=-1j * kp**4 * (2 * lam + mu), b0=mu * ks**4)]
    if pair == (TRACTION_FREE, TRACTION_FREE):
        if not config.phi0 < PHI_ROOT:
            raise ParameterError(
                f"outside proven regime: two traction-free arms need phi0 < {PHI_ROOT:.15f}")
        return [_row("cgo traction/traction", b0=1.0)]
    if pair in ((RIGID, TRACTION_FREE), (RIGID, IMPEDANCE)):
        return [_row(f"cgo {pair[0]}/{pair[1]}", a0=1j * lam * kp**2, b0=-mu * ks**2)]
    if pair == (TRACTION_FREE, IMPEDANCE):
        return [_row("cgo traction/impedance", a0=kp**2, b0=-1j * ks**2)]
    # impedance/impedance: eta_1 on the minus arm, eta_2 on the plus arm
    eta1, eta2 = config.arm_minus.eta, config.arm_plus.eta
    if abs(eta2 * np.exp(-1j * config.phi0) + eta1) <= 1e-12 * (abs(eta1) + abs(eta2)):
        raise ParameterError("impedance pair violates eta2 exp(-i phi0) + eta1 != 0")
    return [_pair(f"cgo impedance/impedance l={ell}",
                  [(("a", ell), kp ** (ell + 2)), (("b", ell), -1j * ks ** (ell + 2))])
            for ell in range(config.M + 1)]


# ---------------------------------------------------------------------------
# certificates


def assemble_rows(config: HolmgrenConfig) -> list[ConditionRow]:
    """All rows applicable to ``config`` up to order M."""
    p, M = config.params, config.M
    rows = []
    if config.arm_minus is not None:
        rows += series_rows(config.arm_minus, "minus", None, p, M)
    if config.arm_plus is not None:
        rows += series_rows(config.arm_plus, "plus", config.phi0, p, M)
        rows += intersection_rows(config)
    rows += vertex_rows(config.vertex, p)
    return [r for r in rows if r.max_mode() <= M]


def normalized_matrix(rows: list[ConditionRow], M: int) -> np.ndarray:
    """Rows scaled to unit max entry, then columns to unit 2-norm."""
    if not rows:
        return np.zeros((0, 2 * (M + 1)), complex)
    A = np.array([r.dense(M) for r in rows])
    A /= np.max(np.abs(A), axis=1, keepdims=True)
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    return A / norms


def _rank_verdict(sv: np.ndarray, n: int, tol: float):
    """Numerical rank, null dimension and marginal flag from singular values."""
    full = np.zeros(n)
    full[: sv.size] = sv[:n]
    smax = full[0] if full.size and full[0] > 0 else 0.0
    if smax == 0:
        return 0, n, False, 0.0, 0.0
    thresh = tol * smax
    rank = int(np.sum(full > thresh))
    smallest = float(full[-1] / smax)
    kept = float(full[rank - 1] / smax) if rank else 0.0
    # within half a decade of the threshold the decision is not trustworthy
    marginal = bool(np.any((full > thresh / 3.0) & (full < thresh * 3.0)))
    if marginal:
        rank = int(np.sum(full >= thresh * 3.0))
    return rank, n - rank, marginal, kept, smallest


def certify_vanishing(config: HolmgrenConfig, tol: float = DEFAULT_TOL) -> VanishingCertificate:
    """Rank test of all assembled rows over the 2(M+1) unknowns."""
    if config.M < MIN_ORDER:
        raise ParameterError(f"order too small to express the coupled rows (need M >= {MIN_ORDER})")
    rows = assemble_rows(config)
    A = normalized_matrix(rows, config.M)
    n = config.unknowns
    sv = np.linalg.svd(A, compute_uv=False) if A.size else np.zeros(0)
    rank, null, marginal, kept, smallest = _rank_verdict(sv, n, tol)
    verdict = ALL_VANISH if null == 0 else NONTRIVIAL
    return VanishingCertificate(len(rows), n, rank, kept, smallest, null, verdict, marginal)


# ---------------------------------------------------------------------------
# collocation oracle


def _field_columns(p: LameParams, modes: range, evaluate):
    cols = []
    for m in modes:
        for var in ("a", "b"):
            c = CoeffSeq.single(m, var, m)
            cols.append(evaluate(c))
    if not cols:
        return np.zeros((evaluate(CoeffSeq.zeros(0)).size, 0), complex)
    return np.stack(cols, axis=-1)


def _arm_operator(cond: LineCondition, side: str, phi0, p: LameParams, r: np.ndarray):
    ang = 0.0 if side == "minus" else float(phi0)

    def evaluate(c: CoeffSeq) -> np.ndarray:
        u = eval_u(c, p, r, ang)
        if cond.kind == RIGID:
            return u.reshape(-1)
        t = traction_direct(c, p, r, ang, arm_normal(side, phi0))
        if cond.kind == IMPEDANCE:
            t = t + cond.eta * u
        return t.reshape(-1)

    return evaluate


def collocation_null_test(config: HolmgrenConfig, n_points: int, seed: int = 0,
                          h: float = 0.05, slack: int = 0) -> float:
    """Smallest relative singular value of a collocation system.

    The boundary conditions are imposed pointwise at ``n_points`` seeded radii
    per arm through the direct field evaluators; vertex conditions use the
    field and gradient at the origin, and intersection relations enter as
    algebraic rows.  Modes M+1..M+slack may absorb the truncation tail: their
    column space is projected out before the singular values of the low-mode
    block are taken.

    Unique continuation from a line is exponentially ill-posed, so the test is
    only discriminating for small orders (M around 4) on a short arm segment
    ``(0, h]``.  Columns are measured in the field norm on the disc of radius
    ``h`` and rows are equilibrated, which makes the returned ratio
    independent of the arbitrary scale of each condition.
    """
    M = config.M
    if n_points < 4 * (M + 1):
        raise ValueError(f"n_points must be at least 4(M+1) = {4 * (M + 1)}")
    p = config.params
    rng = np.random.default_rng(seed)
    # Chebyshev-like radii with seeded jitter, bounded away from the vertex
    base = 0.5 * (1 - np.cos(np.pi * (np.arange(n_points) + 0.5) / n_points))
    radii = h * np.clip(base + 0.1 * rng.uniform(-1, 1, n_points) / n_points, 0.02, 1.0)

    arms = [] if config.arm_minus is None else [(config.arm_minus, "minus", None)]
    if config.arm_plus is not None:
        arms.append((config.arm_plus, "plus", config.phi0))
    low_modes = range(M + 1)
    high_modes = range(M + 1, M + 1 + slack)

    blocks_low, blocks_high = [], []
    for cond, side, phi0 in arms:
        ev = _arm_operator(cond, side, phi0, p, radii)
        blocks_low.append(_field_columns(p, low_modes, ev))
        blocks_high.append(_field_columns(p, high_modes, ev))

    def vertex_eval(c: CoeffSeq) -> np.ndarray:
        vals = []
        if config.vertex.u_vanishes:
            vals.extend(eval_u(c, p, 0.0, 0.0))
        if config.vertex.tau_dnu_vanishes:
            vals.append(eval_grad_u(c, p, 0.0, 0.0)[0, 1])
        return np.array(vals, complex)

    if config.vertex.u_vanishes or config.vertex.tau_dnu_vanishes:
        blocks_low.append(_field_columns(p, low_modes, vertex_eval))
        blocks_high.append(_field_columns(p, high_modes, vertex_eval))
    if config.arm_plus is not None:
        inter = intersection_rows(config)
        low = np.array([r.dense(M) for r in inter])
        # reorder from [a..., b...] to the interleaved column layout used here
        blocks_low.append(np.stack([low[:, m + (M + 1) * j] for m in low_modes for j in (0, 1)], axis=-1))
        blocks_high.append(np.zeros((len(inter), 2 * slack), complex))

    if not blocks_low or sum(b.shape[0] for b in blocks_low) == 0:
        return 0.0
    C_low = np.concatenate(blocks_low, axis=0)
    C_high = np.concatenate(blocks_high, axis=0)
    P = C_low
    if C_high.shape[1]:
        scale = np.linalg.norm(C_high, axis=0)
        scale[scale == 0] = 1.0
        U, s, _ = np.linalg.svd(C_high / scale, full_matrices=False)
        Q = U[:, s > 1e-13 * (s[0] if s.size else 1.0)]
        P = C_low - Q @ (Q.conj().T @ C_low)
    # measure residuals against the size of the field itself: min |C x| over
    # fields with unit norm on a polar grid of the disc of radius h
    rr, pp = np.meshgrid(h * np.linspace(0.1, 1.0, 12), np.linspace(-np.pi, np.pi, 24, endpoint=False),
                         indexing="ij")
    F = _field_columns(p, low_modes, lambda c: eval_u(c, p, rr, pp).reshape(-1))
    Rf = np.linalg.qr(F, mode="r")
    W = np.linalg.solve(Rf.T, P.T).T
    # equilibrate rows: algebraic intersection rows carry arbitrary scale
    norms = np.linalg.norm(W, axis=1)
    W = W[norms > 1e-14 * max(norms.max(initial=0.0), 1e-300)]
    W = W / np.linalg.norm(W, axis=1)[:, None]
    sv = np.linalg.svd(W, compute_uv=False)
    full = np.zeros(C_low.shape[1])
    full[: min(sv.size, full.size)] = sv[: full.size]
    return float(full[-1] / max(full[0], 1e-300))


def collocation_verdict(sigma: float, tol: float = COLLOCATION_TOL) -> str:
    return ALL_VANISH if sigma > tol else NONTRIVIAL


# ---------------------------------------------------------------------------
# determinant cores


def _core(rows: list[ConditionRow], columns: list[tuple[str, int]]) -> np.ndarray:
    return np.array([[r.coeffs.get(col, 0j) for col in columns] for r in rows])


def core_step_rigid(m: int, p: LameParams) -> np.ndarray:
    """2x2 core of the rigid step: rows e1 r^(m-1), e2 r^(m+1) over (a_m, b_m)."""
    rows = condition_rows_rigid(m, p)
    return _core([rows[0], rows[2]], [("a", m), ("b", m)])


def core_singular_rigid(p: LameParams) -> np.ndarray:
    """4x4 core over (a_0, b_0, a_2, b_2): rigid r^1 rows, the d_2u_1 row and e2 r^3."""
    r0 = condition_rows_rigid(0, p)
    r2 = condition_rows_rigid(2, p)
    # e2 r^3 with mode 0 present: 3 (kp^4 a0 - i ks^4 b0) - (kp^4 a2 - i ks^4 b2)
    e2_r3 = _pair("rigid e2 r^3", [(("a", 0), 3 * p.kp**4), (("b", 0), -3j * p.ks**4)]
                  + [(k, -v) for k, v in r2[2].coeffs.items()])
    du0 = vertex_rows(VertexConditions(False, True), p)[0]
    cols = [("a", 0), ("b", 0), ("a", 2), ("b", 2)]
    return _core([r0[0], r0[1], du0, e2_r3], cols)


def core_rigid_rigid(p: LameParams) -> np.ndarray:
    cfg = HolmgrenConfig(LineCondition.rigid(), p, MIN_ORDER, LineCondition.rigid(), math.pi / 3)
    return _core([intersection_rows(cfg)[0], condition_rows_rigid(0, p)[1]], [("a", 0), ("b", 0)])


def core_rigid_traction(p: LameParams) -> np.ndarray:
    cfg = HolmgrenConfig(LineCondition.rigid(), p, MIN_ORDER, LineCondition.traction_free(), math.pi / 3)
    return _core([condition_rows_rigid(0, p)[1], intersection_rows(cfg)[0]], [("a", 0), ("b", 0)])


def core_impedance_pair(p: LameParams, eta=1.0 + 1.0j) -> np.ndarray:
    """Rows k_p^3 a_1 - i k_s^3 b_1 (CGO relation at l = 1) and the u(0) row."""
    imp = LineCondition.impedance(eta)
    cfg = HolmgrenConfig(imp, p, MIN_ORDER, imp, math.pi / 2)
    rows = [intersection_rows(cfg)[1], vertex_rows(VertexConditions(True, False), p)[0]]
    return _core(rows, [("a", 1), ("b", 1)])


def closed_form_determinants(p: LameParams, m: int = 1) -> dict:
    kp, ks, lam, mu = p.kp, p.ks, p.lam, p.mu
    return {
        "step_rigid": -1j * kp**m * ks**m * (kp**2 + ks**2),
        "singular_rigid": -4j * kp**4 * ks**4 * (kp**2 + ks**2),
        "rigid_rigid": -(kp**2) * ks**2 * ((2 * lam + mu) * kp**2 + mu * ks**2),
        "rigid_traction": -(lam + mu) * kp**2 * ks**2,
        "impedance_pair": 1j * kp * ks * (kp**2 + ks**2),
    }


def assembled_determinants(p: LameParams, m: int = 1) -> dict:
    return {
        "step_rigid": np.linalg.det(core_step_rigid(m, p)),
        "singular_rigid": np.linalg.det(core_singular_rigid(p)),
        "rigid_rigid": np.linalg.det(core_rigid_rigid(p)),
        "rigid_traction": np.linalg.det(core_rigid_traction(p)),
        "impedance_pair": np.linalg.det(core_impedance_pair(p)),
    }
