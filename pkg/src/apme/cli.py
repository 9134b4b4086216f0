"""Command-line experiment runner.

    apme info --m 2 3
    apme run configs/iso_evolve.ini
    apme profile --m 2 3 --M 1 --cells 128 --out out/profile
    apme verify --m 2 2 --out out/verify

Exit codes: 0 success, 2 a check failed, 1 error (bad config, hypothesis violation).
"""
from __future__ import annotations

import argparse
import configparser
import json
import sys
import time
import warnings
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Callable

import numpy as np

from .diagnostics import (
    ConvergenceTrace,
    EvolutionRecord,
    Summary,
    log_checkpoints,
    record_evolution,
    smoothing_fit,
    support_growth_fit,
    track_asymptotics,
)
from .exponents import HypothesisError, MediumParams, check_scaling_identity, derive_exponents, exponent_table
from .experiments import (
    barenblatt_data,
    barenblatt_profile_error,
    plateau_data,
    structural_suite,
)
from .grid import Field, Grid, read_field_csv, total_mass, write_field_csv
from .profile import ProfileOptions, compute_profile, make_admissible, save_profile
from .solver import SolverConfig, evolve

EXIT_OK, EXIT_ERROR, EXIT_CHECK = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        self.key = key
        super().__init__(f"config error at {key}: {msg}")


def version() -> str:
    try:
        return metadata.version("apme")
    except metadata.PackageNotFoundError:
        return "unknown"


# -- config -------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    name: str
    kind: str
    params: MediumParams
    grid: Grid | None
    solver: SolverConfig
    initial: dict
    options: dict
    output_dir: Path
    seed: int = 0
    echo: dict = field(default_factory=dict)


KINDS = ("evolve", "profile", "verify", "asymptotics")


def _floats(text: str, key: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(key, f"expected numbers, got {text!r}") from exc


def _get(cp: configparser.ConfigParser, section: str, key: str, default=None, required=False) -> str | None:
    if cp.has_option(section, key):
        return cp.get(section, key)
    if required:
        raise ConfigError(f"[{section}] {key}", "missing")
    return default


def _number(cp, section, key, default=None, required=False, kind=float):
    raw = _get(cp, section, key, None, required)
    if raw is None:
        return default
    try:
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}", f"expected {kind.__name__}, got {raw!r}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with path.open() as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError("file", str(exc)) from exc
    except configparser.Error as exc:
        raise ConfigError("syntax", str(exc).splitlines()[0]) from exc

    name = _get(cp, "experiment", "name", path.stem)
    kind = _get(cp, "experiment", "kind", required=True)
    if kind not in KINDS:
        raise ConfigError("[experiment] kind", f"must be one of {', '.join(KINDS)}")
    m = _floats(_get(cp, "medium", "m", required=True), "[medium] m")
    params = MediumParams(m).validate()
    N = params.N

    grid = None
    if cp.has_section("grid"):
        hw = _floats(_get(cp, "grid", "half_width", required=True), "[grid] half_width")
        cells = [int(x) for x in _floats(_get(cp, "grid", "cells", required=True), "[grid] cells")]
        try:
            grid = Grid(hw, cells, N=N)
        except ValueError as exc:
            raise ConfigError("[grid]", str(exc)) from exc
    elif kind in ("evolve", "asymptotics"):
        raise ConfigError("[grid]", "missing section")

    try:
        solver = SolverConfig(
            m=tuple(params.m),
            epsilon=_number(cp, "solver", "epsilon", 0.0),
            cfl_safety=_number(cp, "solver", "cfl_safety", 0.4),
            boundary=_get(cp, "solver", "boundary", "zero"),
        )
    except ValueError as exc:
        raise ConfigError("[solver]", str(exc)) from exc

    initial = dict(cp.items("initial")) if cp.has_section("initial") else {}
    if initial:
        itype = initial.get("type")
        if itype not in ("plateau", "barenblatt", "file"):
            raise ConfigError("[initial] type", "must be plateau, barenblatt or file")
        if itype == "file":
            p = initial.get("path")
            if not p:
                raise ConfigError("[initial] path", "missing")
            full = (path.parent / p) if not Path(p).is_absolute() else Path(p)
            if not full.exists():
                raise ConfigError("[initial] path", f"file {full} does not exist")
            initial["path"] = str(full)
    options = dict(cp.items(kind)) if cp.has_section(kind) else {}
    out = Path(_get(cp, "experiment", "output_dir", f"out/{name}"))
    if not out.is_absolute():
        out = path.parent / out
    seed = _number(cp, "experiment", "seed", 0, kind=int)
    echo = {s: dict(cp.items(s)) for s in cp.sections()}
    return ExperimentConfig(name, kind, params, grid, solver, initial, options, out, seed, echo)


def build_initial(opts: dict, g: Grid, params: MediumParams) -> Field:
    itype = opts.get("type", "plateau")
    key = "[initial]"
    try:
        if itype == "plateau":
            M = float(opts.get("mass", 1.0))
            L = float(opts.get("height", 1.0))
            R = float(opts.get("radius", min(g.half_width)))
            return make_admissible(M, L, R, g)
        if itype == "barenblatt":
            m = float(opts.get("exponent", params.m[0]))
            if any(mi != m for mi in params.m):
                raise ConfigError(f"{key} exponent", "barenblatt data need isotropic exponents equal to it")
            return barenblatt_data(m, g, float(opts.get("mass", 1.0)), float(opts.get("t", 1.0)))
        f = read_field_csv(opts["path"])
        if f.grid != g:
            raise ConfigError(f"{key} path", "field grid differs from [grid]")
        return Field(g, f.values, 0.0)
    except ConfigError:
        raise
    except (KeyError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from exc


# -- outputs --------------------------------------------------------------------

def gnuplot_script(csv: Path, title: str, ylabel: str, xlabel: str = "t", logscale: str = "") -> Path:
    gp = csv.with_suffix(".gp")
    lines = [
        "set datafile separator ','",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
    ]
    if logscale:
        lines.append(f"set logscale {logscale}")
    lines.append("set terminal pngcairo size 800,600")
    lines.append(f"set output '{csv.with_suffix('.png').name}'")
    lines.append(f"plot '{csv.name}' using 1:2 skip 1 with linespoints title '{ylabel}'")
    gp.write_text("\n".join(lines) + "\n")
    return gp


def write_manifest(out: Path, cfg: ExperimentConfig | None, command: list[str], results: dict) -> Path:
    manifest = {
        "name": cfg.name if cfg else results.get("name"),
        "kind": cfg.kind if cfg else results.get("kind"),
        "version": version(),
        "command": command,
        "config": cfg.echo if cfg else {},
        "seed": cfg.seed if cfg else 0,
        "results": results,
    }
    p = out / "manifest.json"
    p.write_text(json.dumps(manifest, indent=2, default=_jsonable) + "\n")
    return p


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not serialisable: {type(x)}")


# -- experiments -------------------------------------------------------------------

def _checkpoint_list(text: str | None, t_end: float) -> list[float]:
    if not text:
        return list(np.linspace(0.0, t_end, 11))
    parts = text.split()
    if parts[0] == "log":
        t0, t1, k = float(parts[1]), float(parts[2]), int(parts[3]) if len(parts) > 3 else 10
        return [0.0, *log_checkpoints(t0, t1, k)]
    return _floats(text, "[evolve] checkpoints")


def run_evolve(cfg: ExperimentConfig) -> tuple[dict, bool]:
    g = cfg.grid
    u0 = build_initial(cfg.initial, g, cfg.params)
    t_end = float(cfg.options.get("t_end", 1.0))
    cps = sorted(set(_checkpoint_list(cfg.options.get("checkpoints"), t_end)) | {t_end})
    save = cfg.options.get("save_fields", "no").lower() in ("1", "yes", "true")
    out = cfg.output_dir
    rec = EvolutionRecord(m=cfg.solver.m)

    def cb(f: Field) -> None:
        rec.add(f)
        if save:
            write_field_csv(f, out / f"u_{len(rec.times) - 1:04d}.csv")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        evolve(u0, cfg.solver, t_end, checkpoints=cps, callback=cb)
    csv = rec.to_csv(out / "trace.csv")
    gnuplot_script(csv, cfg.name, "peak", logscale="xy")
    results = {
        "t_end": t_end,
        "mass": rec.masses[-1],
        "peak": rec.peaks[-1],
        "front": rec.fronts[-1].tolist(),
        "edge": rec.subcell[-1].tolist(),
        "warnings": [str(w.message) for w in caught],
    }
    window = cfg.options.get("fit_window")
    if window:
        w = _floats(window, "[evolve] fit_window")
        e = derive_exponents(cfg.params)
        fa = smoothing_fit(rec, (w[0], w[1]))
        fg = [support_growth_fit(rec, i, (w[0], w[1])) for i in range(g.N)]
        results["fits"] = {
            "alpha_hat": fa.exponent,
            "alpha": e.alpha,
            "a_hat": [f.exponent for f in fg],
            "a": list(e.a),
        }
    return results, True


def run_profile(cfg: ExperimentConfig) -> tuple[dict, bool]:
    o = cfg.options
    M = float(o.get("mass", o.get("m_mass", 1.0)))
    cells = int(o.get("cells", cfg.grid.cells[0] if cfg.grid else 128))
    hw = cfg.grid.half_width if cfg.grid else None
    opts = ProfileOptions(
        cells=cells,
        half_width=hw,
        tol=float(o.get("tol", 1e-6)),
        tau_max=float(o.get("tau_max", 40.0)),
        cfl=cfg.solver.cfl_safety,
    )
    return profile_outputs(cfg.params, M, opts, cfg.output_dir)


def profile_outputs(params: MediumParams, M: float, opts: ProfileOptions, out: Path) -> tuple[dict, bool]:
    P = compute_profile(params, M, opts)
    save_profile(P, out)
    hist = ConvergenceTrace("residual")
    for tau, r in P.history:
        hist.append(tau, r)
    csv = hist.to_csv(out / "residual.csv")
    gnuplot_script(csv, "stationarity residual", "residual", xlabel="tau", logscale="y")
    results = {
        "mass": P.mass,
        "residual": P.residual,
        "tol": P.tol,
        "tau": P.tau,
        "half_widths": P.half_widths().tolist(),
        "peak": P.peak,
        "stationary_residual": P.stationary,
    }
    return results, P.residual < P.tol


@dataclass
class Check:
    name: str
    run: Callable[[MediumParams, dict], tuple[bool, dict]]


def _check_exponents(p: MediumParams, o: dict):
    e = derive_exponents(p)
    ok = check_scaling_identity(e) and abs(sum(e.sigma) - 1.0) < 1e-12
    return ok, {"alpha": e.alpha, "sigma": list(e.sigma), "beta": e.beta}


def _check_barenblatt(p: MediumParams, o: dict):
    if len(set(p.m)) != 1:
        return True, {"skipped": "anisotropic exponents"}
    n = int(o.get("cells", 128))
    r = barenblatt_profile_error(n, 3.0, p.m[0], p.N)
    # first-order scheme: the 2% bound at 256 cells scales with h
    bound = 0.02 * 256 / n
    return r["l1_rel"] <= bound, {"l1_rel": r["l1_rel"], "bound": bound}


def _check_structural(name):
    def run(p: MediumParams, o: dict):
        res = structural_suite(int(o.get("seed", 0)), int(o.get("cases", 20)), [name])
        cases = res.cases[name]
        return res.passed(name), {"cases": len(cases), "worst": max(c.worst for c in cases)}

    return run


def _check_rates(p: MediumParams, o: dict):
    e = derive_exponents(p)
    n = int(o.get("cells", 128))
    # box from a coarse profile: support half-widths c_i grow like c_i (1 + t)^{a_i}
    c = compute_profile(p, 1.0, ProfileOptions(cells=48, tol=1e-4)).half_widths()
    g = Grid([1.3 * c[i] * 101.0 ** e.a[i] for i in range(p.N)], n, N=p.N)
    cps = [0.0, *log_checkpoints(1.0, 100.0, 10)]
    rec = record_evolution(plateau_data(g), SolverConfig(m=p.m), cps)
    fa = smoothing_fit(rec, (1, 100))
    fg = [support_growth_fit(rec, i, (1, 100)) for i in range(p.N)]
    ok = fa.within(e.alpha, 0.10) and all(f.within(a, 0.15) for f, a in zip(fg, e.a))
    return ok, {"alpha_hat": fa.exponent, "alpha": e.alpha, "a_hat": [f.exponent for f in fg], "a": list(e.a)}


def _check_asymptotics(p: MediumParams, o: dict):
    n = int(o.get("cells", 128))
    P = compute_profile(p, 1.0, ProfileOptions(cells=n))
    taus = np.arange(0.0, 6.0 + 1e-9, 0.5)
    rep = track_asymptotics(plateau_data(P.grid), P, taus, supports=True, symmetric=True)
    l1 = rep.traces["L1"].at(6.0)
    dh = rep.traces["dH_support"].at(6.0) / rep.cell
    ok = l1 <= 0.05 and dh <= 3 and rep.tau_eps is not None
    return ok, {"L1_tau6": l1, "dH_cells_tau6": dh, "tau_eps": rep.tau_eps}


CHECKS: dict[str, Check] = {
    "exponents": Check("exponents", _check_exponents),
    "barenblatt": Check("barenblatt", _check_barenblatt),
    "comparison": Check("comparison", _check_structural("comparison")),
    "contraction": Check("contraction", _check_structural("contraction")),
    "lp_decay": Check("lp_decay", _check_structural("lp_decay")),
    "mass": Check("mass", _check_structural("mass")),
    "ssni": Check("ssni", _check_structural("ssni")),
    "energy": Check("energy", _check_structural("energy")),
    "barrier": Check("barrier", _check_structural("barrier")),
    "rates": Check("rates", _check_rates),
    "asymptotics": Check("asymptotics", _check_asymptotics),
}


def run_checks(params: MediumParams, names: list[str], options: dict, out: Path) -> tuple[dict, bool]:
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ConfigError("checks", f"unknown check(s) {', '.join(unknown)}; known: {', '.join(CHECKS)}")
    summary = Summary(name="verify", params={"m": list(params.m)})
    details = {}
    for name in names:
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ok, info = CHECKS[name].run(params, options)
        info["seconds"] = round(time.perf_counter() - t0, 3)
        summary.checks[name] = bool(ok)
        details[name] = info
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {json.dumps(info, default=_jsonable)}")
        if name == "rates" and "alpha_hat" in info:
            summary.fits = {"alpha_hat": info["alpha_hat"], "a_hat": info["a_hat"]}
    summary.write(out / "summary.json")
    return {"checks": summary.checks, "details": details}, summary.passed


def run_verify(cfg: ExperimentConfig) -> tuple[dict, bool]:
    names = cfg.options.get("checks", " ".join(CHECKS)).replace(",", " ").split()
    opts = dict(cfg.options)
    opts.setdefault("seed", str(cfg.seed))
    return run_checks(cfg.params, names, opts, cfg.output_dir)


def run_asymptotics(cfg: ExperimentConfig) -> tuple[dict, bool]:
    o = cfg.options
    n = int(o.get("cells", cfg.grid.cells[0]))
    P = compute_profile(cfg.params, 1.0, ProfileOptions(cells=n))
    u0 = build_initial(cfg.initial, cfg.grid, cfg.params) if cfg.initial else plateau_data(P.grid)
    u0 = Field(u0.grid, u0.values * (P.mass / total_mass(u0)), 0.0)
    tau_end = float(o.get("tau_end", 6.0))
    taus = np.arange(0.0, tau_end + 1e-9, float(o.get("dtau", 0.5)))
    rep = track_asymptotics(u0, P, taus, supports=True)
    out = cfg.output_dir
    for name, tr in rep.traces.items():
        csv = tr.to_csv(out / f"{name}.csv")
        gnuplot_script(csv, name, name, xlabel="tau", logscale="y")
    results = {k: tr.final for k, tr in rep.traces.items()}
    results["tau_eps"] = rep.tau_eps
    results["cell"] = rep.cell
    ok = rep.traces["L1"].nonincreasing_after(0.2, slack=1e-9) and rep.tau_eps is not None
    return results, ok


RUNNERS = {"evolve": run_evolve, "profile": run_profile, "verify": run_verify, "asymptotics": run_asymptotics}


# -- entry point -----------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="apme", description="Anisotropic porous medium experiments")
    ap.add_argument("--version", action="version", version=f"%(prog)s {version()}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="print the exponent table and the hypothesis verdict")
    p.add_argument("--m", type=float, nargs="+", required=True, help="exponents m_1 .. m_N")

    p = sub.add_parser("run", help="run an experiment described by a config file")
    p.add_argument("config", type=Path)

    p = sub.add_parser("profile", help="compute a self-similar profile")
    p.add_argument("--m", type=float, nargs="+", required=True)
    p.add_argument("--M", type=float, default=1.0, help="mass")
    p.add_argument("--cells", type=int, default=128)
    p.add_argument("--half-width", type=float, nargs="+", default=None)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--tau-max", type=float, default=40.0)
    p.add_argument("--out", type=Path, default=Path("out/profile"))

    p = sub.add_parser("verify", help="run the verification checks")
    p.add_argument("--m", type=float, nargs="+", default=[2.0, 2.0])
    p.add_argument("--checks", nargs="+", default=list(CHECKS), help=f"subset of: {' '.join(CHECKS)}")
    p.add_argument("--cells", type=int, default=128)
    p.add_argument("--cases", type=int, default=20, help="randomized cases per structural check")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("out/verify"))
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = _parser().parse_args(argv)
    try:
        if args.command == "info":
            p = MediumParams(args.m)
            print(exponent_table(p))
            return EXIT_ERROR if p.violations() else EXIT_OK
        if args.command == "run":
            cfg = load_config(args.config)
            cfg.output_dir.mkdir(parents=True, exist_ok=True)
            results, ok = RUNNERS[cfg.kind](cfg)
            results["passed"] = ok
            write_manifest(cfg.output_dir, cfg, ["run", str(args.config)], results)
            print(f"{cfg.name}: {'ok' if ok else 'check failed'} -> {cfg.output_dir}")
            return EXIT_OK if ok else EXIT_CHECK
        if args.command == "profile":
            p = MediumParams(args.m).validate()
            args.out.mkdir(parents=True, exist_ok=True)
            opts = ProfileOptions(cells=args.cells, half_width=args.half_width, tol=args.tol, tau_max=args.tau_max)
            results, ok = profile_outputs(p, args.M, opts, args.out)
            results.update(name="profile", kind="profile", passed=ok)
            write_manifest(args.out, None, ["profile", *argv[1:]], results)
            print(f"profile: residual {results['residual']:.3e} (tol {results['tol']:.1e}), tau {results['tau']:g} -> {args.out}")
            return EXIT_OK if ok else EXIT_CHECK
        if args.command == "verify":
            p = MediumParams(args.m).validate()
            args.out.mkdir(parents=True, exist_ok=True)
            opts = {"cells": args.cells, "cases": args.cases, "seed": args.seed}
            results, ok = run_checks(p, args.checks, opts, args.out)
            results.update(name="verify", kind="verify", passed=ok)
            write_manifest(args.out, None, ["verify", *argv[1:]], results)
            return EXIT_OK if ok else EXIT_CHECK
    except HypothesisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001 - report any failure as an error exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
