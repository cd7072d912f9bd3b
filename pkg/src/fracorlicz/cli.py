"""Command line front end: ``fracorlicz {young,check,solve,lab} --config FILE``.

Exit codes: 0 when everything passes or converges, 2 on a failed property
or a non-converged solve (reports are still written), 1 on configuration
errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__

EXIT_OK, EXIT_CONFIG, EXIT_FAIL = 0, 1, 2
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if path.suffix == ".toml":
        try:
            import tomli
        except ImportError:
            raise ConfigError("TOML configs need the 'tomli' package") from None
        try:
            return tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"malformed TOML: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else repr(x)
    return obj


def write_report(out: Path, name: str, report: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(json.dumps(_clean(report), sort_keys=True, indent=2) + "\n")
    return path


def write_csv(out: Path, name: str, header, rows) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return path


def _young_and_window(cfg):
    """Resolve the Young function and reject undefined Sobolev windows."""
    from . import young

    if "young" not in cfg:
        raise ConfigError("missing 'young' block")
    Y = young.from_spec(cfg["young"])
    idx = young.indices(Y)
    N = int(cfg.get("N", cfg.get("grid", {}).get("N", 3)))
    s = float(cfg.get("s", cfg.get("grid", {}).get("s", 0.5)))
    pstar = young.sobolev_exponent(idx.p_minus, N, s)
    return Y, idx, N, s, pstar


# ------------------------------------------------------------- subcommands


def cmd_young(cfg, out: Path, seed: int):
    import numpy as np

    from . import young

    Y, idx, N, s, pstar = _young_and_window(cfg)
    t_lo, t_hi = cfg.get("window", [1e-6, 1e6])
    d2 = young.check_delta2(Y, t_lo, t_hi)
    g2 = young.check_G2(Y, t_lo, t_hi)
    Gs = young.sobolev_conjugate(Y, N, s)
    ts = np.geomspace(1e-3, 1e3, 13)
    Yc = young.complement(Y)
    rows = [(float(t), float(Y.G(t)), float(Y.g(t)), float(Yc.G(t)), float(Gs.G(t)))
            for t in ts]
    write_csv(out, "young_table.csv", ["t", "G", "g", "G_complement", "G_star"], rows)
    report = {
        "indices": {"p_minus": idx.p_minus, "p_plus": idx.p_plus},
        "p_minus_star": pstar,
        "delta2": d2._asdict(),
        "G2": g2._asdict(),
        "G_star_slopes": list(Gs.meta["extrapolation_slopes"]),
        "files": ["young_table.csv"],
    }
    return report, EXIT_OK


def cmd_check(cfg, out: Path, seed: int):
    from . import checks
    from .problem import problem_from_config

    Y, idx, N, s, _ = _young_and_window(cfg)
    opts = cfg.get("check", {})
    suites = {"young": checks.young_suite(Y, int(opts.get("draws", 1000)), seed)}
    if "grid" in cfg:
        prob = problem_from_config(cfg)
        suites["space"] = checks.sandwich_suite(Y, prob.grid, int(opts.get("functions", 100)),
                                                seed)
        if opts.get("gateaux", True):
            suites["variational"] = checks.gateaux_suite(prob, int(opts.get("gateaux_draws", 50)),
                                                         seed)
    rows = [(suite, name, res["ok"], res["worst"])
            for suite, block in suites.items() for name, res in block.items()]
    write_csv(out, "checks.csv", ["suite", "property", "ok", "worst_margin"], rows)
    ok = all(r[2] for r in rows)
    return {"suites": suites, "all_pass": ok, "files": ["checks.csv"]}, EXIT_OK if ok else EXIT_FAIL


def cmd_solve(cfg, out: Path, seed: int):
    from . import variational as V
    from .problem import problem_from_config

    _young_and_window(cfg)
    cfg = dict(cfg)
    cfg["solver"] = {**cfg.get("solver", {}), "seed": seed}
    prob = problem_from_config(cfg)
    require = bool(cfg.get("require_conditions", True))
    conds = V.check_f_conditions(prob.nl, prob.Y, prob.grid)
    report = {"conditions": conds.to_dict()}
    if require and not conds.ok:
        report["error"] = f"conditions on f failed: {', '.join(conds.failures())}"
        return report, EXIT_FAIL
    try:
        rep = V.solve_mountain_pass(prob, enforce_conditions=False)
    except (V.GeometryError, V.DegeneratePathError) as exc:
        report["error"] = f"{type(exc).__name__}: {exc}"
        return report, EXIT_FAIL
    report["solve"] = rep.to_dict()
    tol = float(cfg.get("residual_tol", 1e-3))
    out.mkdir(parents=True, exist_ok=True)
    rep.u_star.to_csv(out / "u_star.csv")
    write_csv(out, "trace.csv", ["iter", "phase", "max_energy", "grad_norm", "node"],
              [(r["iter"], r["phase"], r["max_energy"], r["grad_norm"], r["node"])
               for r in rep.trace])
    report["files"] = ["u_star.csv", "trace.csv"]
    ok = rep.converged and rep.residual < tol and rep.nontrivial
    report["pass"] = ok
    return report, EXIT_OK if ok else EXIT_FAIL


def cmd_lab(cfg, out: Path, seed: int):
    from . import diagnostics as D
    from . import space
    from .young import PreconditionError

    Y, idx, N, s, _ = _young_and_window(cfg)
    lab = dict(cfg.get("lab", {}))
    lab.setdefault("N", N)
    report = {}
    try:
        res = D.lions_lieb_lab(lab, Y, s)
    except PreconditionError as exc:
        report["error"] = f"precondition: {exc}"
        return report, EXIT_FAIL
    rows = res.pop("rows")
    header = ["n", "Q_r", "Phi_G", "Phi_Gstar", "Phi_Psi", "recenter_offset", "cube_mass"]
    write_csv(out, "lab.csv", header,
              [[r["n"], r["Q_r"], r["Phi_G"], r["Phi_Gstar"], r["Phi_Psi"],
                "" if r.get("recenter_offset") is None
                else " ".join(str(v) for v in r["recenter_offset"]),
                "" if r.get("cube_mass") is None else r["cube_mass"]] for r in rows])
    report["lions"] = res
    ok = bool(res["holds"])
    if "strauss" in cfg:
        st = cfg["strauss"]
        grid = space.radial_grid(max(N, 3), s, int(st.get("M", 4000)), float(st.get("R_max", 1e4)),
                                 st.get("grading", "geometric:1.002"))
        power = float(st.get("decay", 2.0))
        u = grid.sample(lambda r: (1.0 + r) ** (-power))
        sd = D.strauss_decay_test(u, float(st.get("r", 1.0)), Y,
                                  tuple(st.get("radii", (2.0, 4.0, 8.0, 16.0))))
        report["strauss"] = sd
        ok = ok and sd["ok"]
    report["files"] = ["lab.csv"]
    report["pass"] = ok
    return report, EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"young": cmd_young, "check": cmd_check, "solve": cmd_solve, "lab": cmd_lab}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracorlicz", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON (or TOML) run configuration")
    ap.add_argument("--out", default="out", help="directory for the report and CSV files")
    ap.add_argument("--seed", type=int, default=None, help="seed for all random draws")
    ap.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread cap")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        resolved = {**cfg, "seed": seed, "command": args.command}
        from .young import PreconditionError, SpecError

        try:
            report, code = COMMANDS[args.command](cfg, out, seed)
        except (PreconditionError, SpecError, KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, KeyError):
                exc = ConfigError(f"missing config key {exc}")
            raise ConfigError(str(exc)) from None
    except ConfigError as exc:
        print(f"fracorlicz: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = {"version": __version__, "config": resolved, "exit_code": code, **report}
    path = write_report(out, f"{args.command}_report.json", report)
    print(f"{args.command}: {'pass' if code == EXIT_OK else 'FAIL'} -> {path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
