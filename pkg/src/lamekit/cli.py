"""Command-line entry point: verification suites and scattering experiments.

Every command writes a flat JSON report ``{suite, seed, cases, wall_time, ...}``
where each case carries ``name``, ``status``, ``metric`` and ``tolerance``.
The exit status is 0 when every non-skipped case passes, 1 when a case fails
or a numerical error aborts the run, and 2 when the configuration violates
its schema (the failing JSON pointer is printed).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import cgo, holmgren, scattering
from .errors import NumericalError, ParameterError, SchemaError
from .lame_core import (
    CoeffSeq,
    LameParams,
    cartesian_field,
    eval_u,
    impedance_series,
    navier_residual_fd,
    params_from_dict,
    traction_direct,
    traction_series,
    arm_normal,
)
from .specfun import bessel_j

DEFAULT_SEED = 0x4C414D45
PHI_ROOT_REFERENCE = 0.58043041944310849341

PASS, FAIL, SKIP = "pass", "fail", "skip"
COMMANDS = ("verify-expansions", "verify-cgo", "certify", "phi-root", "scatter", "uniqueness-demo")

_DEFAULT_PARAMS = {"lambda": 1.0, "mu": 1.0, "kappa": 3.0}

DEFAULT_CONFIGS: dict[str, dict] = {
    "verify-expansions": {"params": _DEFAULT_PARAMS, "M": 8, "samples": 10, "points": 20},
    "verify-cgo": {"params": _DEFAULT_PARAMS, "M": 6, "samples": 5, "phi0": math.pi / 3, "h": 0.4,
                   "s_values": [10, 20, 40], "decay_s_values": [10, 20, 40, 80], "quad_n": 128},
    "certify": {"arm_minus": {"type": "rigid"}, "arm_plus": None, "vertex": {"u0": True, "du0": True},
                "params": _DEFAULT_PARAMS, "M": 10},
    "phi-root": {"tol": 1e-15},
    "scatter": {
        "params": _DEFAULT_PARAMS,
        "obstacle": {"vertices": [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]],
                     "edges": [{"type": "rigid"}] * 4},
        "incidents": [{"alpha_p": [1.0, 0.0], "alpha_s": [0.0, 0.0], "angle": 0.0}],
        "n_dirs": 64,
    },
    "uniqueness-demo": {"params": _DEFAULT_PARAMS, "n_dirs": 64, "baseline": 1e-2,
                        "impedance_eta": [1.0, 1.0], "impedance_baseline": 1e-3,
                        "identity_tolerance": 1e-8, "gram_tolerance": 1e-8},
}


# ---------------------------------------------------------------------------
# reports


class Report:
    """Accumulates cases and free-form result tables for one suite."""

    def __init__(self, suite: str, seed: int):
        self.suite = suite
        self.seed = seed
        self.cases: list[dict] = []
        self.results: dict = {}

    def case(self, name: str, metric: float, tolerance: float, passed: bool | None) -> None:
        status = SKIP if passed is None else (PASS if passed else FAIL)
        self.cases.append({"name": name, "status": status, "metric": _json_float(metric),
                           "tolerance": _json_float(tolerance)})

    def below(self, name: str, metric: float, tolerance: float) -> None:
        self.case(name, metric, tolerance, bool(metric < tolerance))

    def above(self, name: str, metric: float, tolerance: float) -> None:
        self.case(name, metric, tolerance, bool(metric > tolerance))

    @property
    def ok(self) -> bool:
        return all(c["status"] != FAIL for c in self.cases)

    def failing(self) -> list[str]:
        return [c["name"] for c in self.cases if c["status"] == FAIL]

    def to_dict(self, wall_time: float) -> dict:
        out = {"suite": self.suite, "seed": self.seed, "cases": self.cases, "wall_time": wall_time}
        if self.results:
            out["results"] = self.results
        return out


def _json_float(x: float) -> float | str:
    """JSON has no infinities or NaN; encode them as strings."""
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def render(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# config helpers


def load_config(command: str, path: str | None) -> dict:
    if path is None or path == "default":
        return json.loads(json.dumps(DEFAULT_CONFIGS[command]))
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read config: {exc.strerror}", "") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg} at line {exc.lineno}", "") from None
    if not isinstance(cfg, dict):
        raise SchemaError("expected an object", "")
    return cfg


def _get(cfg: dict, key: str, kind: type | tuple, default=None, check: Callable | None = None):
    if key not in cfg:
        if default is None:
            raise SchemaError("missing key", f"/{key}")
        return default
    val = cfg[key]
    ok = isinstance(val, kind) and not isinstance(val, bool)
    if ok and check is not None:
        ok = check(val)
    if not ok:
        raise SchemaError(f"invalid value {val!r}", f"/{key}")
    return val


def _params(cfg: dict) -> LameParams:
    raw = cfg.get("params", _DEFAULT_PARAMS)
    if not isinstance(raw, dict):
        raise SchemaError("expected an object", "/params")
    return params_from_dict(raw, "/params")


def _positive_int(v) -> bool:
    return v > 0


# ---------------------------------------------------------------------------
# suites


def run_verify_expansions(cfg: dict, rng: np.random.Generator, rep: Report) -> None:
    p = _params(cfg)
    M = _get(cfg, "M", int, 8, _positive_int)
    samples = _get(cfg, "samples", int, 10, _positive_int)
    points = _get(cfg, "points", int, 20, _positive_int)

    grid_t = np.linspace(0.2, 20.0, 100)
    worst = 0.0
    for m in range(1, 21):
        lhs = bessel_j(m, grid_t)
        rhs = grid_t * (bessel_j(m - 1, grid_t) + bessel_j(m + 1, grid_t)) / (2 * m)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(lhs), 1e-300))))
    rep.below("bessel_recurrence", worst, 1e-12)

    navier = series_gap = imp_gap = 0.0
    angles = [math.pi / 6, math.pi / 3, math.pi / 2, 2 * math.pi / 3]
    radii = np.linspace(0.01, 0.3, 30)
    for _ in range(samples):
        c = CoeffSeq.random(M, rng)
        r = rng.uniform(0.05, 0.5, points)
        phi = rng.uniform(-math.pi, math.pi, points)
        x1, x2 = r * np.cos(phi), r * np.sin(phi)
        field = cartesian_field(c, p)
        res = np.linalg.norm(navier_residual_fd(field, p, x1, x2), axis=-1)
        navier = max(navier, float(np.max(res / (1.0 + np.linalg.norm(field(x1, x2), axis=-1)))))
        direct = traction_direct(c, p, radii, 0.0, arm_normal("minus"))
        series_gap = max(series_gap, float(np.max(np.abs(direct - traction_series(c, p, "minus", radii)))))
        for phi0 in angles:
            direct = traction_direct(c, p, radii, phi0, arm_normal("plus", phi0))
            ser = traction_series(c, p, "plus", radii, phi0)
            series_gap = max(series_gap, float(np.max(np.abs(direct - ser))))
        eta = 1.0 + 1.0j
        fused = impedance_series(c, p, "minus", eta, radii)
        summed = traction_series(c, p, "minus", radii) + eta * eval_u(c, p, radii, 0.0)
        imp_gap = max(imp_gap, float(np.max(np.abs(fused - summed))))
    rep.below("navier_residual", navier, 1e-5)
    rep.below("traction_series_vs_direct", series_gap, 1e-10)
    rep.below("impedance_additivity", imp_gap, 1e-11)


def run_verify_cgo(cfg: dict, rng: np.random.Generator, rep: Report) -> None:
    p = _params(cfg)
    M = _get(cfg, "M", int, 6, _positive_int)
    samples = _get(cfg, "samples", int, 5, _positive_int)
    phi0 = _get(cfg, "phi0", (int, float), math.pi / 3, lambda v: 0 < v < math.pi)
    h = _get(cfg, "h", (int, float), 0.4, lambda v: v > 0)
    s_values = _get(cfg, "s_values", list, [10, 20, 40])
    decay_s = _get(cfg, "decay_s_values", list, [10, 20, 40, 80])
    quad_n = _get(cfg, "quad_n", int, 128, lambda v: v >= 64)
    for key, vals in (("s_values", s_values), ("decay_s_values", decay_s)):
        if not vals or not all(isinstance(v, (int, float)) and v > 0 for v in vals):
            raise SchemaError("expected a nonempty list of positive numbers", f"/{key}")
    g = cgo.SectorGeom(float(phi0), float(h))

    coeffs = [CoeffSeq.random(M, rng) for _ in range(samples)]
    for i, c in enumerate(coeffs):
        for s in s_values:
            bi = cgo.boundary_integrals(c, p, g, cgo.CgoField(float(s)), quad_n)
            scale = 1.0 + max(abs(bi.I1_plus), abs(bi.I1_minus), abs(bi.I2), abs(bi.I3))
            rep.below(f"identity_residual[c{i},s={s:g}]", bi.identity_residual / scale, 1e-8)

    f = cgo.CgoField(50.0)
    zeta_val = -np.exp(1j * math.pi / 6)
    worst = 0.0
    for twice in range(7):
        ell = twice / 2
        closed = cgo.weighted_r_integral(ell, f, zeta_val, 0.5)
        t, w = cgo.composite_gauss(0.0, math.sqrt(0.5), 400)
        quad = np.sum(w * 2 * t ** (2 * ell + 1) * np.exp(f.s * t * zeta_val))
        worst = max(worst, abs(closed - quad) / max(abs(closed), 1e-300))
    rep.below("weighted_integral_closed_vs_quadrature", worst, 1e-10)

    c = coeffs[0]
    logs = [math.log(abs(cgo.boundary_integrals(c, p, g, cgo.CgoField(float(s)), quad_n).I2))
            for s in decay_s]
    slope = float(np.polyfit(np.asarray(decay_s, float), logs, 1)[0])
    rep.below("arc_integral_decay_slope", slope, -0.9 * g.delta * math.sqrt(h) + 1e-300)

    ratio = 0.0
    radii = np.linspace(h / 10, h, 10)
    for c in coeffs:
        S = cgo.remainder_bounds(c, p, phi0, h)
        for side in ("minus", "plus"):
            R = cgo.numerical_remainders(c, p, side, radii, phi0)
            ratio = max(ratio,
                        float(np.max(np.abs(R["R1"]) / (radii**3 * S.S2))),
                        float(np.max(np.abs(R["R2"]) / (radii**3.5 * S.S3))),
                        float(np.max(np.abs(R["R0"]) / (radii**2 * S.S0))))
    rep.case("remainder_domination", ratio, 1.0, ratio <= 1.0)


def run_certify(cfg: dict, rng: np.random.Generator, rep: Report, echo: Callable[[str], None]) -> None:
    config = holmgren.HolmgrenConfig.from_dict(cfg)
    cert = holmgren.certify_vanishing(config)
    echo(json.dumps(cert.to_dict(), sort_keys=True, indent=2))
    rep.results["certificate"] = cert.to_dict()
    rep.results["config"] = config.to_dict()
    expected = cfg.get("expect")
    if expected is not None:
        if expected not in (holmgren.ALL_VANISH, holmgren.NONTRIVIAL):
            raise SchemaError("expect must name a verdict", "/expect")
        rep.case("verdict", float(cert.null_space_dim), 0.0, cert.verdict == expected)
    else:
        rep.case("verdict", float(cert.null_space_dim), 0.0, not cert.marginal)
    # the collocation oracle only discriminates at the smallest order
    low = config.with_order(holmgren.MIN_ORDER)
    low_cert = holmgren.certify_vanishing(low)
    sigma = holmgren.collocation_null_test(low, 16 * (low.M + 1), seed=int(rng.integers(2**31)))
    rep.case("collocation_agreement", sigma, holmgren.COLLOCATION_TOL,
             holmgren.collocation_verdict(sigma) == low_cert.verdict)


def run_phi_root(cfg: dict, rng: np.random.Generator, rep: Report) -> None:
    tol = _get(cfg, "tol", float, 1e-15, lambda v: v >= 1e-15)
    root = holmgren.phi_root(tol)
    rep.results["phi_root"] = root
    rep.below("phi_root_reference", abs(root - PHI_ROOT_REFERENCE), 1e-12)
    grid = np.linspace(1e-6, math.pi - 1e-6, 1000)
    steps = np.diff(holmgren.phi_root_function(grid))
    rep.case("g_strictly_increasing", float(steps.min()), 0.0, bool(np.all(steps > 0)))


def _incidents(cfg: dict) -> list[scattering.IncidentWave]:
    raw = cfg.get("incidents")
    if not isinstance(raw, list) or not raw:
        raise SchemaError("expected a nonempty list of incident waves", "/incidents")
    return [scattering.IncidentWave.from_dict(w, f"/incidents/{i}") for i, w in enumerate(raw)]


def run_scatter(cfg: dict, rng: np.random.Generator, rep: Report) -> list[scattering.FarField]:
    p = _params(cfg)
    if "obstacle" not in cfg:
        raise SchemaError("missing key", "/obstacle")
    obstacle = scattering.Obstacle.from_dict(cfg["obstacle"], "/obstacle")
    waves = _incidents(cfg)
    n_dirs = _get(cfg, "n_dirs", int, 64, lambda v: v >= 1)
    dirs = scattering.uniform_directions(n_dirs)
    fields = []
    for i, w in enumerate(waves):
        try:
            sol = scattering.solve_forward(obstacle, w, p)
        except scattering.SolverError as exc:
            rep.case(f"boundary_residual[{i}]", exc.residual, scattering.FAILURE_RESIDUAL, False)
            raise
        rep.below(f"boundary_residual[{i}]", sol.residual, scattering.FAILURE_RESIDUAL)
        fields.append(scattering.far_field(sol, p, dirs))
    rep.results["class_c_violations"] = scattering.class_c_violations(obstacle)
    return fields


class _SolveCache:
    """Far fields keyed by (obstacle label, incident angle); failures are remembered."""

    def __init__(self, p: LameParams, dirs: np.ndarray):
        self.p, self.dirs = p, dirs
        self.store: dict = {}

    def get(self, label: str, obstacle: scattering.Obstacle, angle: float):
        key = (label, round(angle, 12))
        if key not in self.store:
            w = scattering.IncidentWave.from_angle(angle)
            try:
                sol = scattering.solve_forward(obstacle, w, self.p)
                self.store[key] = scattering.far_field(sol, self.p, self.dirs)
            except scattering.SolverError as exc:
                self.store[key] = exc
        return self.store[key]


def _discrepancy(cache: _SolveCache, a: tuple, b: tuple, angles: list[float]):
    """Per-direction distances; a SolverError is returned instead of raised."""
    rows = []
    for ang in angles:
        fa, fb = cache.get(*a, ang), cache.get(*b, ang)
        for ff in (fa, fb):
            if isinstance(ff, scattering.SolverError):
                return ff, rows
        rows.append({"angle": ang, "distance": scattering.l2_distance(fa, fb)})
    return None, rows


def run_uniqueness_demo(cfg: dict, rng: np.random.Generator, rep: Report) -> None:
    p = _params(cfg)
    n_dirs = _get(cfg, "n_dirs", int, 64, lambda v: v >= 32)
    baseline = _get(cfg, "baseline", (int, float), 1e-2)
    imp_baseline = _get(cfg, "impedance_baseline", (int, float), 1e-3)
    ident_tol = _get(cfg, "identity_tolerance", (int, float), 1e-8)
    gram_tol = _get(cfg, "gram_tolerance", (int, float), 1e-8)
    eta_raw = cfg.get("impedance_eta", [1.0, 1.0])
    eta = scattering._complex_from_json(eta_raw, "/impedance_eta")

    rigid = scattering.EdgeCondition.rigid()
    square = ("square", scattering.unit_square(rigid))
    triangle = ("triangle", scattering.equilateral_triangle(rigid))
    square_imp = ("square_impedance", scattering.unit_square(scattering.EdgeCondition.impedance(eta)))
    cache = _SolveCache(p, scattering.uniform_directions(n_dirs))
    four = [0.0, math.pi / 2, math.pi, 3 * math.pi / 2]
    three = [0.0, 2 * math.pi / 3, 4 * math.pi / 3]
    tables = {}

    def record(name: str, a, b, angles, tol, larger: bool):
        err, rows = _discrepancy(cache, a, b, angles)
        tables[name] = rows
        if err is not None:
            tables[name] = {"solver_error": str(err)}
            rep.case(name, err.residual, tol, False)
            return
        worst = max(r["distance"] for r in rows)
        (rep.above if larger else rep.below)(name, worst, tol)

    record("identical_square_4dirs", square, square, four, ident_tol, larger=False)
    record("square_vs_triangle_4dirs", square, triangle, four, baseline, larger=True)
    record("square_vs_triangle_3dirs", square, triangle, three, baseline, larger=True)
    record("rigid_vs_impedance_square_4dirs", square, square_imp, four, imp_baseline, larger=True)

    incidents = [scattering.IncidentWave.from_angle(a) for a in four]
    gram = scattering.gram_min_eigenvalue(square[1], p, incidents, 200, seed=int(rng.integers(2**31)))
    rep.above("gram_min_eigenvalue_4dirs", gram, gram_tol)

    rep.results["discrepancy_tables"] = tables
    rep.results["class_c"] = {label: scattering.class_c_violations(o)
                              for label, o in (square, triangle, square_imp)}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lamekit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="JSON config file ('default' or omitted: built-in)")
        sp.add_argument("--out", default=None, help="report path (stdout when omitted)")
        sp.add_argument("--seed", default=None, type=lambda s: int(s, 0), help="64-bit seed")
        sp.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def _seed(args, cfg: dict) -> int:
    if args.seed is not None:
        seed = args.seed
    else:
        seed = cfg.get("seed", DEFAULT_SEED)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise SchemaError("seed must be an integer", "/seed")
    if not 0 <= seed < 2**64:
        raise SchemaError("seed must fit in 64 bits", "/seed")
    return seed


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = sys.stdout if args.out is None else None

    def echo(msg: str) -> None:
        if not args.quiet:
            print(msg, file=sys.stderr)

    start = time.perf_counter()
    try:
        cfg = load_config(args.command, args.config)
        seed = _seed(args, cfg)
    except SchemaError as exc:
        print(f"schema error at {exc.pointer or '/'}: {exc}", file=sys.stderr)
        return 2
    rng = np.random.default_rng(seed)
    rep = Report(args.command, seed)
    fields: list[scattering.FarField] = []
    status = 0
    try:
        if args.command == "verify-expansions":
            run_verify_expansions(cfg, rng, rep)
        elif args.command == "verify-cgo":
            run_verify_cgo(cfg, rng, rep)
        elif args.command == "certify":
            run_certify(cfg, rng, rep, lambda m: print(m))
        elif args.command == "phi-root":
            run_phi_root(cfg, rng, rep)
        elif args.command == "scatter":
            fields = run_scatter(cfg, rng, rep)
        else:
            run_uniqueness_demo(cfg, rng, rep)
    except SchemaError as exc:
        print(f"schema error at {exc.pointer or '/'}: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ParameterError) as exc:
        failing = rep.failing()
        where = failing[-1] if failing else args.command
        print(f"numerical failure in {where}: {exc}", file=sys.stderr)
        status = 1

    report = rep.to_dict(round(time.perf_counter() - start, 3))
    text = render(report)
    if out is not None:
        out.write(text)
    else:
        Path(args.out).write_text(text)
        if fields:
            Path(args.out).with_suffix(".csv").write_text(scattering.farfield_csv(fields))
    if args.command == "scatter" and fields and out is not None:
        sys.stdout.write(scattering.farfield_csv(fields))
    for case in rep.cases:
        echo(f"{case['status']:4s}  {case['name']}  metric={case['metric']}  tol={case['tolerance']}")
    if status == 0 and not rep.ok:
        echo("failing cases: " + ", ".join(rep.failing()))
        status = 1
    return status


if __name__ == "__main__":
    sys.exit(main())
