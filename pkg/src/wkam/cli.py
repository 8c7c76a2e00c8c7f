"""Command-line front end: ``wkam {verify,solve,scan,continue} --config PATH``.

Each command writes its data files, the materialized configuration and
figures into ``--out`` and prints a short ``key=value`` report on stdout.

Exit codes: 0 ok, 1 configuration error, 2 verification failure, 3 solver
failure, 4 continuation stopped early.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from . import persistence as io
from .cohomology import DiophantineData
from .errors import ConfigError, KamError, WkamError
from .kam import seed_solution, solve_torus
from .lindstedt import DomainScanSpec, continuation_run, domain_scan, resonance_centers
from .models import conformal_residuals, default_family, numeric_jacobian_check, sample_points

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_SOLVE, EXIT_CONTINUE = 0, 1, 2, 3, 4

log = logging.getLogger("wkam")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (JSON)")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for scans")
    common.add_argument("--out", default="wkam-out", help="output directory")
    common.add_argument("--resume", help="state file to start from")
    common.add_argument("--verbose", action="store_true")
    common.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    parser = _Parser(prog="wkam", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wkam {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (("verify", "check conformality and hand-coded derivatives"),
                       ("solve", "Newton solve for the whiskered torus"),
                       ("scan", "scan the analyticity domain in complex eps"),
                       ("continue", "continuation in eps with Lindstedt predictors")):
        sub.add_parser(name, parents=[common], help=text)
    return parser


def report(**items):
    for key, val in items.items():
        print(f"{key}={io.fmt(val) if isinstance(val, (int, float, np.floating, np.integer)) else val}")


def family_from(cfg, eps=None):
    params = {k: cfg[k] for k in ("lam", "c", "eps_c", "eps", "alpha", "a")}
    if eps is not None:
        params["eps"] = eps
    return default_family(params)


def _check_solvable(f):
    lam = f.lam(f.eps)
    if not 0.0 < float(np.real(lam)) < 1.0:
        raise ConfigError(f"Newton solves need a conformal factor in (0, 1), got {lam}")


def _resolve_seed(cfg, resume):
    if resume:
        return resume
    path = cfg["seed"]
    if path is None:
        return None
    seed_dir = os.environ.get("WKAM_SEED_DIR")
    if seed_dir and not os.path.isabs(path):
        return os.path.join(seed_dir, path)
    return path


def _load_seed(cfg, f, resume):
    path = _resolve_seed(cfg, resume)
    if path is None:
        return seed_solution(f, cfg["omega"], cfg["K_max"], cfg["N_g"]), "built-in"
    if not os.path.exists(path):
        raise ConfigError(f"seed state {path} not found")
    try:
        sol, h = io.read_state(path)
    except (ValueError, KeyError) as err:
        raise ConfigError(f"cannot read seed state {path}: {err}") from err
    if sol.K_max != cfg["K_max"]:
        raise ConfigError(f"seed state has K_max={sol.K_max}, config asks for {cfg['K_max']}")
    if h != io.config_hash(cfg):
        log.info("seed state was written under a different configuration")
    return sol, path


def _write_provenance(out, cfg):
    os.makedirs(out, exist_ok=True)
    io.write_json(os.path.join(out, "config.json"), io.materialized(cfg))


def cmd_verify(cfg, args):
    f = family_from(cfg)
    v = cfg["verify"]
    rng = np.random.default_rng(v["rng_seed"])
    pts = sample_points(f, v["samples"], rng)
    mu = np.array([0.1])
    lam = cfg["lam_declared"] if cfg["lam_declared"] is not None else f.lam(f.eps)
    res = conformal_residuals(f, mu, f.eps, pts, lam)
    worst = int(np.argmax(res))
    jac = max(numeric_jacobian_check(f, mu, f.eps, p, v["h"]) for p in pts[: min(10, len(pts))])
    ok = res[worst] <= v["conformal_tol"] and jac <= v["jacobian_tol"]
    out = {
        "conformal_residual": float(res[worst]),
        "worst_sample": pts[worst].tolist(),
        "jacobian_deviation": jac,
        "lambda_used": float(np.real(lam)),
        "ok": bool(ok),
    }
    _write_provenance(args.out, cfg)
    io.write_json(os.path.join(args.out, "verify.json"), out)
    report(command="verify", conformal_residual=out["conformal_residual"], jacobian_deviation=jac,
           status="ok" if ok else "violation")
    if not ok:
        print(f"worst_sample={','.join(io.fmt(x) for x in pts[worst])}")
        return EXIT_VERIFY
    return EXIT_OK


def cmd_solve(cfg, args):
    f = family_from(cfg)
    _check_solvable(f)
    seed, origin = _load_seed(cfg, f, args.resume)
    h = io.config_hash(cfg)
    _write_provenance(args.out, cfg)
    csv_path = os.path.join(args.out, "convergence.csv")
    last = [seed]

    def on_step(sol):
        last[0] = sol
        log.info("step %d residual %.3e", len(sol.history), sol.residual_norm)
        io.atomic_write(csv_path, io.csv_text(io.SOLVE_COLUMNS, io.solve_rows(sol)))

    try:
        sol = solve_torus(f, seed, tol=cfg["tol"], max_iter=cfg["max_iter"], L0=cfg["L0"],
                          dd=DiophantineData((cfg["omega"],), cfg["tau"]), callback=on_step)
    except KamError as err:
        io.atomic_write(csv_path, io.csv_text(io.SOLVE_COLUMNS, io.solve_rows(last[0])))
        report(command="solve", status="failed", step=err.step or "unknown", error=str(err))
        return EXIT_SOLVE
    stem = os.path.join(args.out, "state")
    io.write_state(stem, sol, h)
    io.atomic_write(csv_path, io.csv_text(io.SOLVE_COLUMNS, io.solve_rows(sol)))
    if not args.no_figures and sol.history:
        from .plotting import convergence_figure
        convergence_figure(sol.history, os.path.join(args.out, "convergence.png"))
    ver = sol.verification
    report(command="solve", status="ok", seed=origin, steps=len(sol.history), residual=ver["residual"],
           mu=float(sol.mu[0]), pairing_defect=ver["pairing_defect"], isotropy=ver["isotropy"],
           U_residual=ver["U_residual"], state=stem + ".json")
    return EXIT_OK


def scan_spec(cfg):
    s = cfg["scan"]
    return DomainScanSpec(A=s["A"], N=s["N"], r0=s["r0"], omega=(cfg["omega"],), tau=cfg["tau"],
                          alpha=s["alpha"], a=s["a"], resolution=s["resolution"], K_probe=s["K_probe"])


def cmd_scan(cfg, args):
    try:
        spec = scan_spec(cfg)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    result = domain_scan(spec, jobs=max(1, args.jobs))
    _write_provenance(args.out, cfg)
    io.atomic_write(os.path.join(args.out, "scan.csv"), io.csv_text(io.SCAN_COLUMNS, io.scan_rows(result)))
    io.write_json(os.path.join(args.out, "scan.json"), io.scan_header(result))
    io.atomic_write(os.path.join(args.out, "scan.bin"), io.scan_to_bytes(result))
    if not args.no_figures and result.member.size:
        from .plotting import scan_figure
        scan_figure(result, os.path.join(args.out, "scan.png"), resonance_centers(spec))
    report(command="scan", status="ok", cells=int(result.member.size), members=int(result.member.sum()),
           csv=os.path.join(args.out, "scan.csv"))
    return EXIT_OK


def cmd_continue(cfg, args):
    path = io.eps_path(cfg)
    if path[0] != 0.0:
        raise ConfigError("continuation path must start at eps = 0")
    f = family_from(cfg, eps=0.0)
    _check_solvable(f)
    base, origin = _load_seed(cfg, f, args.resume)
    h = io.config_hash(cfg)
    _write_provenance(args.out, cfg)
    rows = []
    summary = os.path.join(args.out, "summary.csv")

    def on_leg(eps, sol):
        io.write_state(os.path.join(args.out, f"leg_{len(rows):03d}"), sol, h)
        r = sol.rates
        sys_cond = sol.history[-1]["sys_condition"] if sol.history else float("nan")
        rows.append([eps, float(sol.mu[0]), sol.residual_norm, r.lambda_minus, r.lambda_c_minus, r.lambda_c_plus,
                     r.lambda_plus, sys_cond, len(sol.history)])
        io.atomic_write(summary, io.csv_text(io.SUMMARY_COLUMNS, rows))

    result = continuation_run(f, base, path, tol=cfg["tol"], order=cfg["continuation"]["order"],
                              max_iter=cfg["max_iter"], L0=cfg["L0"], callback=on_leg)
    if not args.no_figures and len(rows) > 1:
        from .plotting import continuation_figure
        continuation_figure([r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows],
                            os.path.join(args.out, "continuation.png"))
    if not result.ok:
        report(command="continue", status="stopped", legs=len(rows), last_good_eps=result.last_good_eps,
               failed_eps=result.failed_eps, error=result.error)
        return EXIT_CONTINUE
    report(command="continue", status="ok", legs=len(rows), last_good_eps=result.last_good_eps, summary=summary)
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "solve": cmd_solve, "scan": cmd_scan, "continue": cmd_continue}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as stop:
        return stop.code if isinstance(stop.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = io.load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except WkamError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SOLVE


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
