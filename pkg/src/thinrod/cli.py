"""
Command-line entry point.

    thinrod solve1d | solve3d | sweep | verify [--config FILE] [overrides]

Exit codes: 0 success, 1 configuration or validation error, 2 sweep with
failed eps columns, 3 verification assertion failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig
from .fem import BC, write_coo
from .geometry import GeometryError
from .harness import (RodProblem, ResolutionPolicy, exact_geometry, fmt, longitudinal_fraction,
                      sweep, verify_C1, verify_C3)
from .limit1d import limit_modes, solve_limit_spectrum
from .mesh3d import MeshError, write_mesh
from .reduction import ReductionError, section_average

log = logging.getLogger("thinrod")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_VERIFY = 0, 1, 2, 3
COARSE_C1_RESOLUTIONS = ((8, 4), (16, 4))
COARSE_C1_TOL = 1e-2
COARSE_POLICY = ResolutionPolicy(n1=16, n_sec=4, n_cells=2000)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_modes(path, modes) -> None:
    grid = modes[0].grid
    rows = [[fmt(x)] + [fmt(m.values[j]) for m in modes] for j, x in enumerate(grid)]
    _write_rows(path, ["y1"] + [f"u{i + 1}" for i in range(len(modes))], rows)


def cmd_solve1d(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    spec = solve_limit_spectrum(cfg.profile_obj, cfg.bc, cfg.k, cfg.n_cells, tol=cfg.tol, seed=cfg.seed)
    modes = limit_modes(spec)
    if "csv" in cfg.formats:
        _write_rows(out / "eigenvalues_1d.csv", ["n", "lambda"],
                    [[i + 1, fmt(v)] for i, v in enumerate(spec.eigenvalues)])
        _write_modes(out / "modes_1d.csv", modes)
    if "svg" in cfg.formats:
        from .plots import plot_modes
        plot_modes(modes, out / "modes_1d.svg", title=f"{cfg.profile_id} limit modes ({cfg.bc})")
    return EXIT_OK


def cmd_solve3d(cfg: RunConfig) -> int:
    if len(cfg.eps) != 1:
        raise ConfigError(f"solve3d needs exactly one eps value, got {list(cfg.eps)}")
    eps = cfg.eps[0]
    out = _outdir(cfg)
    prob = RodProblem(cfg.profile_obj, cfg.bc, cfg.resolution.mesh_n1, cfg.n_sec)
    rs = prob.solve(eps, cfg.k, tol=cfg.tol, seed=cfg.seed)
    averages = [section_average(u) for u in rs.fields]
    if "csv" in cfg.formats:
        rows = [[i + 1, fmt(eps), fmt(lam), fmt(rs.residuals[i]),
                 fmt(longitudinal_fraction(rs.fields[i], prob.M))]
                for i, lam in enumerate(rs.eigenvalues)]
        _write_rows(out / "spectrum_3d.csv",
                    ["n", "epsilon", "lambda", "residual", "longitudinal_fraction"], rows)
        _write_modes(out / "section_modes_3d.csv", averages)
    if "svg" in cfg.formats:
        from .plots import plot_modes
        plot_modes(averages, out / "section_modes_3d.svg",
                   title=f"{cfg.profile_id}, eps={eps:g} ({cfg.bc})")
    if "mesh" in cfg.formats:
        write_mesh(prob.mesh, out / "mesh.txt")
    if "coo" in cfg.formats:
        K, M = prob.pencil(eps)
        write_coo(K, out / "K.coo")
        write_coo(M, out / "M.coo")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    report = sweep(cfg.profile_obj, cfg.bc, cfg.eps, cfg.k, cfg.resolution, tol=cfg.tol,
                   seed=cfg.seed, profile_id=cfg.profile_id)
    if "json" in cfg.formats:
        # timings go to their own file so the report stays reproducible
        report.write_json(out / "report.json", runtimes=False)
        with open(out / "runtimes.json", "w") as fh:
            json.dump({"eps": report.eps, "seconds": report.runtimes}, fh, indent=2)
            fh.write("\n")
    if "csv" in cfg.formats:
        report.write_csv(out / "report.csv")
    if "svg" in cfg.formats:
        from .plots import plot_eigenvalues, plot_errors
        plot_eigenvalues(report, out / "eigenvalues.svg")
        plot_errors(report, out / "errors.svg")
    for e, msg in report.failed.items():
        print(f"eps={e:g} failed: {msg}", file=sys.stderr)
    return EXIT_PARTIAL if report.failed else EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    profile = cfg.profile_obj
    if cfg.coarse:
        c1 = verify_C1(profile, COARSE_C1_RESOLUTIONS,
                       tol=None if exact_geometry(profile) else COARSE_C1_TOL)
        policy = COARSE_POLICY
    else:
        c1 = verify_C1(profile)
        policy = cfg.resolution
    tables = [c1, verify_C3(profile, cfg.bc, cfg.eps, resolution_policy=policy)]
    for t in tables:
        if "csv" in cfg.formats:
            t.write_csv(out / f"{t.name}.csv")
    if "json" in cfg.formats:
        with open(out / "verify.json", "w") as fh:
            json.dump({"profile": cfg.profile_id, "bc": cfg.bc, "coarse": cfg.coarse,
                       "tables": [t.to_dict() for t in tables]}, fh, indent=2)
            fh.write("\n")
    ok = True
    for t in tables:
        print(f"{t.name}: {'PASS' if t.passed else 'FAIL'}")
        for msg in t.failures:
            print(f"  {t.name} failing row: {msg}", file=sys.stderr)
        ok &= t.passed
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {"solve1d": cmd_solve1d, "solve3d": cmd_solve3d, "sweep": cmd_sweep, "verify": cmd_verify}
HELP = {
    "solve1d": "limit-problem eigenpairs",
    "solve3d": "rod eigenpairs at a single eps",
    "sweep": "convergence report over an eps ladder",
    "verify": "numerical checks of C1 and C3",
}


def _eps_list(s: str):
    try:
        return tuple(float(v) for v in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {s!r}")


def _profile_arg(s: str):
    s = s.strip()
    return json.loads(s) if s.startswith("{") else s


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thinrod", description="Spectra of thin rods and their 1D limit.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=HELP[name])
        s.add_argument("--config", help="JSON run configuration")
        s.add_argument("--profile", type=_profile_arg, help="preset name or inline JSON profile")
        s.add_argument("--bc", choices=[b.value for b in BC] + ["dirichlet"])
        s.add_argument("--eps", type=_eps_list, help="comma-separated, strictly decreasing")
        s.add_argument("--k", type=int)
        s.add_argument("--n1", type=int)
        s.add_argument("--n-sec", dest="n_sec", type=int)
        s.add_argument("--n-cells", dest="n_cells", type=int)
        s.add_argument("--tol", type=float)
        s.add_argument("--seed", type=int)
        s.add_argument("--output", "-o")
        s.add_argument("--formats", type=lambda v: tuple(v.split(",")))
        s.add_argument("--policy", choices=["fixed", "refine"])
        s.add_argument("--coarse", action="store_true", default=None,
                       help="verify on small meshes with the coarse C1 tolerance")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {k: getattr(args, k) for k in
                 ("profile", "bc", "eps", "k", "n1", "n_sec", "n_cells", "tol", "seed",
                  "output", "formats", "policy", "coarse")}
    return cfg.override(**overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, GeometryError, MeshError, ReductionError, ValueError) as exc:
        print(f"thinrod {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
