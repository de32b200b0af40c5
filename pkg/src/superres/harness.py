"""Command line, configuration and deterministic report writing for every experiment."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__

log = logging.getLogger("superres")

KINDS = ("schur", "phase", "superres", "lambda", "ball", "demo")

EXIT_OK, EXIT_CONFIG, EXIT_MATH, EXIT_ACCEPT = 0, 1, 2, 3

DEFAULT_SOURCES = {
    "schur": {"taylor": [0.5, 0.75]},
    "phase": {"p": {"dim": 1, "terms": [{"alpha": [0], "re": 1.0, "im": 0.0}]}, "m": [1]},
    "superres": {"p": {"dim": 2, "terms": [{"alpha": [0, 0], "re": 2.0, "im": 0.0},
                                           {"alpha": [1, 0], "re": -1.0, "im": 0.0},
                                           {"alpha": [0, 1], "re": -1.0, "im": 0.0}]}, "m": [0, 0]},
}
DEFAULT_SOURCES["lambda"] = DEFAULT_SOURCES["superres"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    source: dict | list | None = None
    grid: int | None = None
    radius: float = 0.5
    schedule: list[float] | None = None
    seed: int = 0
    threads: int = 1
    out: str = "out"
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("out")
        d.pop("threads")  # parallelism does not change results
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _is_pow2(n) -> bool:
    return isinstance(n, int) and not isinstance(n, bool) and n > 0 and n & (n - 1) == 0


def validate(config: ExperimentConfig) -> list[str]:
    """Violations as ``field: message``; empty means the run may proceed."""
    errs = []
    if config.kind not in KINDS:
        errs.append(f"kind: must be one of {', '.join(KINDS)}")
    if config.grid is not None and not _is_pow2(config.grid):
        errs.append(f"grid: {config.grid} is not a power of two")
    if not isinstance(config.radius, (int, float)) or not 0 < config.radius < 1:
        errs.append(f"radius: {config.radius} must lie in (0, 1)")
    if not isinstance(config.seed, int) or config.seed < 0 or config.seed >= 2**64:
        errs.append("seed: must be an unsigned 64-bit integer")
    if not isinstance(config.threads, int) or config.threads < 1:
        errs.append("threads: must be a positive integer")
    if config.schedule is not None:
        for i, t in enumerate(config.schedule):
            if not isinstance(t, (int, float)) or not 0 <= t <= 1:
                errs.append(f"schedule[{i}]: {t} must lie in [0, 1]")
    if not isinstance(config.params, dict):
        errs.append("params: must be an object")
    return errs


# --------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _round(obj, nd: int = 12):
    if isinstance(obj, dict):
        return {k: _round(v, nd) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v, nd) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return round(x, nd) if np.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


@dataclass
class Result:
    columns: tuple[str, ...]
    rows: list[tuple]
    summary: dict
    provenance: dict
    violations: list[str] = field(default_factory=list)
    row_status: list[str] | None = None
    extra_files: dict[str, bytes] = field(default_factory=dict)


@dataclass
class RunManifest:
    config_hash: str
    version: str
    started: str
    finished: str
    kind: str
    files: dict[str, str]
    rows: list[dict]
    violations: list[str]

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


# --------------------------------------------------------------------------
# experiment drivers


def _source(config: ExperimentConfig):
    return config.source if config.source is not None else DEFAULT_SOURCES.get(config.kind)


def _load_rif(src):
    from .polydisk import RationalInner
    return RationalInner.from_json(src)


def _taylor_from(src) -> np.ndarray:
    vals = src["taylor"]
    return np.array([complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v) for v in vals])


def run_schur(config: ExperimentConfig) -> Result:
    from .schur1d import random_perturbations, superres_bound_1d, verify_superres_1d
    c = _taylor_from(_source(config))
    count = int(config.params.get("count", 50))
    size = float(config.params.get("eps", 1e-3))
    perts = random_perturbations(c, count, size, seed=config.seed)
    rows = verify_superres_1d(c, perts, seed=config.seed, threads=config.threads)
    cert = superres_bound_1d(c, max(r.eps for r in rows), seed=config.seed)
    worst = max(r.violation for r in rows)
    out_rows = [(r.perturbation, r.eps, r.z_radius, r.max_distance, r.certified_bound) for r in rows]
    viol = [f"bound exceeded by {worst:.3g}"] if worst > 0 else []
    return Result(("perturbation", "eps", "z_radius", "max_distance", "certified_bound"), out_rows,
                  {"L": cert.L, "M": cert.M, "max_violation": worst, "max_eps": max(r.eps for r in rows)},
                  {"op": "schur1d.verify_superres_1d", "n_theta": 512, "lipschitz_points": 64}, viol)


def run_phase(config: ExperimentConfig) -> Result:
    from .phase import fourier_coeffs, near_half_fraction, phase_function, universal_L
    from .polydisk import CayleyInner, pluriharmonic_check
    rif = _load_rif(_source(config))
    R = CayleyInner(rif)
    d = R.dim
    N = config.grid or (2**12 if d == 1 else 2**9)
    grid = phase_function(R, N, d, threads=config.threads)
    n = R.degree
    table = fourier_coeffs(grid, n)
    univ = universal_L(R.taylor_section(n))
    rows = []
    for alpha in sorted(univ.keys()):
        a, b = table[alpha], univ[alpha]
        rows.append((" ".join(map(str, alpha)), a.real, a.imag, b.real, b.imag, abs(a - b)))
    ph = pluriharmonic_check(table, tol=float(config.params.get("pluri_tol", 5e-3)))
    summary = {"N": N, "d": d, "max_diff": max(r[-1] for r in rows), "near_half_fraction": near_half_fraction(grid),
               "max_mixed": ph.max_mixed, "radial_points": grid.n_radial, "radial_converged": grid.converged}
    viol = [f"mixed coefficient {a}: {abs(c):.3g}" for a, c in ph.violations]
    res = Result(("alpha", "fft_re", "fft_im", "universal_re", "universal_im", "abs_diff"), rows, summary,
                 {"op": "phase.fourier_coeffs vs phase.universal_L", "cauchy_tol": 1e-6, "pluri_tol": ph.tol}, viol)
    res.extra_files["fourier.json"] = json.dumps(table.to_json(), sort_keys=True).encode()
    res.extra_files["phase.phg"] = grid.to_bytes()
    return res


def run_superres(config: ExperimentConfig) -> Result:
    from .polydisk import CayleyInner
    from .semialg import CSV_COLUMNS, superres_sweep
    R = CayleyInner(_load_rif(_source(config)))
    rep = superres_sweep(R, ts=config.schedule, K_radius=config.radius, N=config.grid, threads=config.threads)
    viol = []
    if not rep.monotone:
        viol.append("sup distance is not monotone in delta")
    if not rep.form_b_holds:
        viol.append("proof-chain bound exceeded")
    status = ["ok" if r.converged else "radial-unconverged" for r in rep.rows]
    return Result(CSV_COLUMNS, [r.as_tuple() for r in rep.rows], rep.summary(),
                  {"op": "semialg.superres_sweep", "K_radius": config.radius, "N": rep.extras["N"],
                   "ratio_tol": 1e-9}, viol, status)


def run_lambda(config: ExperimentConfig) -> Result:
    from .multipoly import CPoly
    from .phase import rif_indicator_poly
    from .semialg import (LambdaProfile, NoAdmissibleIndex, PushforwardPoly, admissible_index, charts,
                          lambda_decay_check, pushforward_Q)
    src = _source(config)
    log2 = int(config.params.get("log2_samples", 20))
    eps = np.asarray(config.params.get("eps", np.geomspace(1e-3, 0.25, 12).tolist()), dtype=float)
    if "Q" in src:
        Qs = [((0,), PushforwardPoly(np.asarray(src["Q"], dtype=float), (1,), 0))]
    else:
        p = CPoly.from_json(src["p"])
        m = src.get("m", [0] * p.dim)
        P = rif_indicator_poly(p, m).P
        nabs = sum(a + b for a, b in zip(m, p.degree()))
        Qs = [(j, pushforward_Q(P, j, nabs)) for j in charts(p.dim)]
    rows, summary = [], {"charts": []}
    for j, Q in Qs:
        prof = LambdaProfile(Q, log2_samples=log2, seed=config.seed)
        try:
            adm = admissible_index(Q)
            order = adm.order
        except NoAdmissibleIndex:
            adm, order = None, 0
        fit = lambda_decay_check(Q, order, eps, profile=prof)
        for e, v in zip(fit.eps, fit.values):
            rows.append(("".join(map(str, j)), e, v))
        summary["charts"].append({"chart": list(j), "m": None if adm is None else list(adm.m),
                                  "c_fit": fit.c_fit, "slope": fit.slope})
    return Result(("chart", "eps", "lambda"), rows, summary,
                  {"op": "semialg.lambda_decay_check", "sampler": "scrambled Sobol", "log2_samples": log2})


def run_ball(config: ExperimentConfig) -> Result:
    from .ballres import BallMap, random_automorphism, random_perturbation, verify_ball_bound
    rng = np.random.default_rng(config.seed)
    src = config.source
    pairs = []
    if src:
        for item in src:
            pairs.append((BallMap.from_json(item["F"]), BallMap.from_json(item["f"])))
    else:
        count = int(config.params.get("count", 100))
        strength = float(config.params.get("strength", 0.1))
        dims = config.params.get("dims", [2, 3])
        for i in range(count):
            F = random_automorphism(dims[i % len(dims)], rng)
            pairs.append((F, random_perturbation(F, rng, strength)))
    rows, viol = [], []
    for i, (F, f) in enumerate(pairs):
        r = verify_ball_bound(F, f, seed=config.seed + i)
        rows.append(r.as_tuple() + (r.rhs_sq, r.slack_sq, r.rho_l2, r.tail2, r.degree))
        if r.slack < -1e-6:
            viol.append(f"row {i}: slack {r.slack:.3g}")
    summary = {"count": len(rows), "min_slack": min(r[4] for r in rows), "min_slack_sq": min(r[6] for r in rows)}
    return Result(("d", "rho", "lhs", "rhs", "slack", "rhs_sq", "slack_sq", "rho_l2", "tail2", "degree"), rows,
                  summary, {"op": "ballres.verify_ball_bound", "tail_tol": 1e-10, "slack_tol": 1e-6}, viol)


def run_demo(config: ExperimentConfig) -> Result:
    from .polydisk import nonuniqueness_demo
    lams = config.schedule if config.schedule is not None else np.linspace(0, 0.25, 11).tolist()
    rows = nonuniqueness_demo(lams)
    tol = float(config.params.get("tol", 1e-4))
    aff_f = {r.lam: r.affine_f for r in rows}
    aff_g = {r.lam: r.affine_g for r in rows}
    fixed = len({tuple(sorted(a.items())) for a in aff_f.values()}) == 1 and \
        len({tuple(sorted(a.items())) for a in aff_g.values()}) == 1
    viol = []
    for r in rows:
        if abs(r.sup_f - 1) > tol:
            viol.append(f"lambda={r.lam}: sup_f = {r.sup_f:.12g}")
        if abs(r.sup_g - 1) > tol:
            viol.append(f"lambda={r.lam}: sup_g = {r.sup_g:.12g}")
    if not fixed:
        viol.append("affine sections vary with lambda")
    summary = {"max_dev_f": max(abs(r.sup_f - 1) for r in rows), "max_dev_g": max(abs(r.sup_g - 1) for r in rows),
               "affine_fixed": fixed}
    return Result(("lambda", "sup_f", "sup_g"), [(r.lam, r.sup_f, r.sup_g) for r in rows], summary,
                  {"op": "polydisk.nonuniqueness_demo", "refine_levels": 2, "tol": tol}, viol)


RUNNERS: dict[str, Callable[[ExperimentConfig], Result]] = {
    "schur": run_schur, "phase": run_phase, "superres": run_superres,
    "lambda": run_lambda, "ball": run_ball, "demo": run_demo,
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run(config: ExperimentConfig) -> tuple[RunManifest, Result]:
    errs = validate(config)
    if errs:
        raise ConfigError("; ".join(errs))
    started = _now()
    t0 = time.perf_counter()
    result = RUNNERS[config.kind](config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    csv_path = out / f"{config.kind}.csv"
    csv_path.write_text(csv_text(result.columns, result.rows), encoding="utf-8")
    files["csv"] = csv_path.name
    summ_path = out / f"{config.kind}_summary.json"
    summ_path.write_text(json.dumps(_round(result.summary), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    files["summary"] = summ_path.name
    for name, data in result.extra_files.items():
        (out / name).write_bytes(data)
        files[name] = name
    status = result.row_status or ["ok"] * len(result.rows)
    manifest = RunManifest(config.digest(), __version__, started, _now(), config.kind, files,
                           [{"row": i, "status": s, **result.provenance} for i, s in enumerate(status)],
                           result.violations)
    (out / "manifest.json").write_text(json.dumps(manifest.to_json(), indent=2) + "\n", encoding="utf-8")
    log.info("%s finished in %.2fs", config.kind, time.perf_counter() - t0)
    return manifest, result


# --------------------------------------------------------------------------
# CLI


def _flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--grid-log2", type=int, dest="grid_log2")
    p.add_argument("--threads", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="superres", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    flags = _flags()
    for kind in KINDS:
        sub.add_parser(kind, parents=[flags], help=f"run the {kind} experiment")
    sub.add_parser("validate", parents=[flags], help="check a config file without running it")
    return parser


def load_config(args, kind: str | None) -> ExperimentConfig:
    data: dict[str, Any] = {}
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: {exc}") from exc
    if kind is not None:
        if data.get("kind", kind) != kind:
            raise ConfigError(f"kind: config says {data['kind']!r} but subcommand is {kind!r}")
        data["kind"] = kind
    elif "kind" not in data:
        raise ConfigError("kind: missing")
    if args.out is not None:
        data["out"] = args.out
    if args.seed is not None:
        data["seed"] = args.seed
    if args.grid_log2 is not None:
        data["grid"] = 2**args.grid_log2
    if args.threads is not None:
        data["threads"] = args.threads
    try:
        return ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = load_config(args, None if args.command == "validate" else args.command)
        errs = validate(config)
        if args.command == "validate":
            for e in errs:
                print(e)
            return EXIT_CONFIG if errs else EXIT_OK
        if errs:
            for e in errs:
                print(e, file=sys.stderr)
            return EXIT_CONFIG
        manifest, result = run(config)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ZeroDivisionError, ArithmeticError) as exc:
        print(f"math domain error: {exc}", file=sys.stderr)
        return EXIT_MATH
    print(json.dumps(_round(result.summary), sort_keys=True))
    if manifest.violations:
        for v in manifest.violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_ACCEPT
    return EXIT_OK
