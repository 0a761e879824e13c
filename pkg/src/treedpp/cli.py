"""Command-line interface: ``treedpp <command> [options]``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numeric failure.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__, io
from .basis import TruncatedBasis
from .config import ENV_VAR, resolve
from .dpp import DiscreteDPP
from .errors import ConfigError, IndexSetError, TreeDPPError
from .kernels import make_kernel
from .partition import Cell, DyadicPartition
from .projection import project_kernel, spectrum_report

log = logging.getLogger("treedpp")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _common(p):
    g = p.add_argument_group("run configuration (overrides config files)")
    g.add_argument("--config", help=f"TOML config file (default from ${ENV_VAR})")
    g.add_argument("--kernel", choices=["sine", "airy", "bessel", "ginibre"])
    g.add_argument("--alpha", type=float, help="Bessel order")
    g.add_argument("--window", help="integer window a..b (square [a,b)^2 for ginibre)")
    g.add_argument("--level", type=int)
    g.add_argument("--rank-max", type=int)
    g.add_argument("--order", type=int, help="Gauss-Legendre order per axis")
    g.add_argument("--tol", type=float, help="cell-pair quadrature tolerance")
    g.add_argument("--seed", type=int)
    g.add_argument("--n", type=int, help="number of draws")
    g.add_argument("--threads", type=int, help="worker threads (0 = all available)")
    g.add_argument("--out", help="output directory")


def _verify_opts(p, cells=False, mult=False, fine=False, configs=False, tol_help=None):
    if cells:
        p.add_argument("--cell", action="append", dest="cells",
                       help="level-l cell as root|bits (repeatable), e.g. 0| or 0|1")
    if tol_help:
        p.add_argument("--verify-tol", type=float, help=tol_help)
    if mult:
        p.add_argument("--mult", action="append", type=int, dest="multiplicities",
                       help="multiplicity per --cell (repeatable)")
    if fine:
        p.add_argument("--level-fine", type=int, help="finer level l'")
    if configs:
        p.add_argument("--configs", type=int, help="number of random configurations")
        p.add_argument("--points", type=int, help="points per configuration")


def build_parser():
    parser = _Parser(prog="treedpp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"treedpp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in [
        ("partition", "list the cells of one level"),
        ("basis", "list the truncated basis"),
        ("project", "assemble the projected kernel matrix"),
        ("spectrum", "eigenvalues of the projected kernel, with containment check"),
        ("sample", "draw index configurations from the discrete DPP"),
        ("lift-sample", "draw lifted (index, point) configurations"),
        ("plot", "draw lifted samples and render them to SVG"),
    ]:
        _common(sub.add_parser(name, help=text))
    verify = sub.add_parser("verify", help="numerical identity checks")
    vsub = verify.add_subparsers(dest="check", required=True, parser_class=_Parser)
    p = vsub.add_parser("corr", help="correlation identity on level-l cells")
    _common(p)
    _verify_opts(p, cells=True, tol_help="tolerance on |lhs - rhs|")
    p = vsub.add_parser("ortho", help="restricted orthogonality over all (i, j, A)")
    _common(p)
    p = vsub.add_parser("moments", help="factorial moments of lifted counts")
    _common(p)
    _verify_opts(p, cells=True, mult=True, tol_help="extra tolerance on |lhs - rhs|")
    p = vsub.add_parser("refine", help="coarse counts from fine counts")
    _common(p)
    _verify_opts(p, fine=True, configs=True)
    p = vsub.add_parser("consistency", help="count laws of two lifted representations")
    _common(p)
    _verify_opts(p, fine=True, tol_help="significance level of the chi-square test (default 1e-3)")
    return parser


def _config(args):
    overrides = {
        "kernel.name": args.kernel,
        "kernel.alpha": args.alpha,
        "domain.window": args.window,
        "tree.level": args.level,
        "tree.rank_max": args.rank_max,
        "quadrature.order": args.order,
        "quadrature.tol": args.tol,
        "sampling.seed": args.seed,
        "sampling.n": args.n,
        "sampling.threads": args.threads,
        "output.dir": args.out,
        "verify.cells": getattr(args, "cells", None),
        "verify.multiplicities": getattr(args, "multiplicities", None),
        "verify.level_fine": getattr(args, "level_fine", None),
        "verify.tol": getattr(args, "verify_tol", None),
        "verify.configs": getattr(args, "configs", None),
        "verify.points": getattr(args, "points", None),
    }
    return resolve(args.config, overrides)


class Run:
    """Objects shared by the subcommands, built lazily from a RunConfig."""

    def __init__(self, cfg, command, out_given):
        self.cfg = cfg
        self.command = command
        self.out_given = out_given
        self.kernel = make_kernel(cfg.kernel.name, cfg.kernel.alpha)
        self.partition = DyadicPartition(self.kernel.measure, cfg.window)
        self._basis = None
        self._projected = None

    @property
    def provenance(self):
        return {"command": self.command, **self.cfg.provenance()}

    def path(self, name):
        return os.path.join(self.cfg.output.dir, name)

    @property
    def basis(self):
        if self._basis is None:
            self._basis = TruncatedBasis(self.partition, self.cfg.tree.level, self.cfg.tree.rank_max)
        return self._basis

    @property
    def projected(self):
        if self._projected is None:
            q = self.cfg.quadrature
            self._projected = project_kernel(self.kernel, self.basis, q.order, q.tol)
        return self._projected

    def cells(self, default_count=1):
        level = self.cfg.tree.level
        labels = self.cfg.verify.cells
        if not labels:
            return self.partition.level_cells(level)[:default_count]
        try:
            cells = [Cell.parse(s) for s in labels]
        except IndexSetError as exc:
            raise ConfigError(f"verify.cells: {exc}") from exc
        for c in cells:
            if c.level != level or not self.partition.in_window(c):
                raise ConfigError(f"verify.cells: {c} is not a level-{level} cell of the window")
        return cells


def _point_cols(dim, prefix=""):
    return [f"{prefix}x"] if dim == 1 else [f"{prefix}x", f"{prefix}y"]


def _point_vals(p):
    return [float(p)] if np.ndim(p) == 0 else [float(v) for v in p]


def cmd_partition(run):
    level = run.cfg.tree.level
    part = run.partition
    lo, hi = part.level_bounds(level)
    masses = part.level_masses(level)
    cells = part.level_cells(level)
    if part.dim == 1:
        header = ["level", "root", "bits", "left", "right", "mass"]
        rows = [[level, c.root, "".join(map(str, c.bits)), a, b, m] for c, a, b, m in zip(cells, lo, hi, masses)]
    else:
        header = ["level", "root", "bits", "left_x", "left_y", "right_x", "right_y", "mass"]
        rows = [[level, f"{c.root[0]};{c.root[1]}", "".join(map(str, c.bits)), a[0], a[1], b[0], b[1], m]
                for c, a, b, m in zip(cells, lo, hi, masses)]
    text = io.csv_text("partition", run.provenance, header, rows)
    sys.stdout.write(text)
    if run.out_given:
        io.write_csv(run.path("partition.csv"), "partition", run.provenance, header, rows)
    return EXIT_OK


def cmd_basis(run):
    b = run.basis
    rows = []
    for k, f in enumerate(b.functions):
        lo, hi = run.partition.bounds(f.support)
        coefs = [p.coef for p in f.pieces] + [""] * (2 - len(f.pieces))
        rows.append([k, f.index.label(), f.index.level, f.index.rank, str(f.support),
                     *_point_vals(lo), *_point_vals(hi), *coefs])
    dim = run.partition.dim
    header = ["position", "index", "level", "rank", "support", *_point_cols(dim, "left_"),
              *_point_cols(dim, "right_"), "coef_left_child", "coef_right_child"]
    text = io.csv_text("basis", run.provenance, header, rows)
    sys.stdout.write(text)
    if run.out_given:
        io.write_csv(run.path("basis.csv"), "basis", run.provenance, header, rows)
    return EXIT_OK


def cmd_project(run):
    P = run.projected
    io.write_json(run.path("projected.json"), "projected-kernel", run.provenance, io.projected_body(P))
    lam = P.eigenvalues
    print(f"projected {run.kernel.name} kernel: {len(P)} indices, eigenvalues in "
          f"[{lam.min():.3e}, {lam.max():.3e}], quadrature estimate "
          f"{P.metadata['quadrature']['error_estimate']:.2e} -> {run.path('projected.json')}")
    return EXIT_OK


def cmd_spectrum(run):
    from .plotting import plot_spectrum

    P = run.projected
    rep = spectrum_report(P)
    io.write_json(run.path("spectrum.json"), "spectrum", run.provenance, rep)
    plot_spectrum(P.eigenvalues, run.path("spectrum.svg"))
    print(f"spectrum: n={rep['n']} min={rep['min']:.3e} max={rep['max']:.3e} "
          f"trace={rep['trace']:.6f} contained={rep['contained']} -> {run.path('spectrum.json')}")
    return EXIT_OK


def cmd_sample(run):
    P = run.projected
    s = run.cfg.sampling
    dpp = DiscreteDPP.from_projected(P)
    configs = dpp.sample_many(s.n, s.seed, run.cfg.threads)
    labels = [i.label() for i in P.indices]
    rows = [[d, len(c), " ".join(labels[j] for j in c)] for d, c in enumerate(configs)]
    io.write_csv(run.path("samples.csv"), "samples", run.provenance, ["draw", "size", "indices"], rows)
    sizes = configs.sizes
    print(f"{s.n} draws, mean size {sizes.mean():.4f} (trace {np.trace(P.matrix).real:.4f}) "
          f"-> {run.path('samples.csv')}")
    return EXIT_OK


def _lift(run):
    from .lift import TreeLift

    s = run.cfg.sampling
    return TreeLift(run.projected).sample(s.n, s.seed, run.cfg.threads)


def _write_lift(run, batch):
    dim = run.partition.dim
    labels = [i.label() for i in run.projected.indices]
    pairs, configs = [], []
    for d in range(len(batch)):
        a, b = batch.configs.offsets[d], batch.configs.offsets[d + 1]
        for j, p in zip(batch.configs.flat[a:b], batch.points[a:b]):
            pairs.append([d, labels[j], *_point_vals(p)])
        pts = batch.points[a:b]
        order = np.lexsort(pts.T[::-1]) if dim == 2 else np.argsort(pts, kind="stable")
        for p in pts[order]:
            configs.append([d, *_point_vals(p)])
    io.write_csv(run.path("lifted.csv"), "lifted", run.provenance, ["draw", "index", *_point_cols(dim)], pairs)
    io.write_csv(run.path("configurations.csv"), "configurations", run.provenance,
                 ["draw", *_point_cols(dim)], configs)


def cmd_lift_sample(run):
    batch = _lift(run)
    _write_lift(run, batch)
    print(f"{len(batch)} lifted draws, {len(batch.points)} points -> {run.path('lifted.csv')}, "
          f"{run.path('configurations.csv')}")
    return EXIT_OK


def cmd_plot(run):
    from .plotting import plot_points_1d, plot_points_2d

    batch = _lift(run)
    _write_lift(run, batch)
    name = f"{run.kernel.name}-lift.svg"
    if run.partition.dim == 2:
        plot_points_2d(batch.points, run.cfg.window, run.path(name),
                       title=f"{run.kernel.name} lift, {len(batch)} draws pooled")
    else:
        first = batch[0].points if len(batch) else None
        plot_points_1d(batch.points, run.cfg.window, run.path(name), first=first,
                       title=f"{run.kernel.name} lift: {len(batch)} draws (rug: first draw)")
    print(f"wrote {run.path(name)}")
    return EXIT_OK


def _finish(run, report, name):
    io.write_json(run.path(name), "report", run.provenance, report.to_dict())
    print(report.summary())
    for key, val in sorted(report.budget.items()):
        print(f"  budget {key}: {val:.3g}")
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_verify_corr(run):
    from .verify import correlation_identity

    tol = run.cfg.verify.tol or 1e-3
    report = correlation_identity(run.kernel, run.projected, run.cells(), tol, run.cfg.quadrature.order)
    return _finish(run, report, "verify-corr.json")


def cmd_verify_ortho(run):
    from .verify import orthogonality_check

    report = orthogonality_check(run.partition, run.cfg.tree.level, run.cfg.tree.rank_max,
                                 run.cfg.verify.tol or 1e-12)
    return _finish(run, report, "verify-ortho.json")


def cmd_verify_moments(run):
    from .verify import factorial_moment_check

    cells = run.cells()
    mults = run.cfg.verify.multiplicities or [1] * len(cells)
    s = run.cfg.sampling
    report = factorial_moment_check(run.kernel, run.projected, cells, mults, s.n, s.seed,
                                    run.cfg.threads, run.cfg.quadrature.order, run.cfg.verify.tol)
    return _finish(run, report, "verify-moments.json")


def cmd_verify_refine(run):
    from .verify import refinement_check

    v = run.cfg.verify
    level = run.cfg.tree.level
    report = refinement_check(run.partition, level, v.level_fine or level + 1, v.configs, v.points,
                              run.cfg.sampling.seed)
    return _finish(run, report, "verify-refine.json")


def cmd_verify_consistency(run):
    from .lift import consistency_experiment
    from .plotting import plot_count_laws
    from .verify import VerificationReport

    cfg = run.cfg
    level = cfg.tree.level
    fine = cfg.verify.level_fine or level + 2
    res = consistency_experiment(run.kernel, run.partition, level, fine, cfg.tree.rank_max, cfg.sampling.n,
                                 cfg.sampling.seed, cfg.threads, cfg.quadrature.order, cfg.quadrature.tol)
    comp = res["comparison"]
    alpha = cfg.verify.tol or 1e-3
    rows = [[str(r["outcome"]).replace(" ", ""), r["freq_a"], r["freq_b"], r["sigma"], r["z"]] for r in comp["rows"]]
    io.write_csv(run.path("consistency.csv"), "count-law", run.provenance,
                 ["outcome", "freq_level", "freq_level_fine", "sigma", "z"], rows)
    plot_count_laws([r["outcome"] for r in comp["rows"]], [r["freq_a"] for r in comp["rows"]],
                    [r["freq_b"] for r in comp["rows"]], run.path("consistency.svg"),
                    labels=(f"level {level}", f"level {fine}"))
    report = VerificationReport(
        identity="consistency", lhs=comp["chi2"], lhs_error=0.0, rhs=float(comp["dof"]), rhs_error=0.0,
        tolerance=alpha, passed=bool(comp["p_value"] > alpha),
        budget={"p_value": comp["p_value"], "max_z": comp["max_z"], "alpha": alpha},
        metadata={"kernel": run.kernel.params(), "level": level, "level_fine": fine,
                  "rank_max": cfg.tree.rank_max, "draws": cfg.sampling.n, "seed": cfg.sampling.seed,
                  "window": list(cfg.window)},
        details={"outcomes": len(comp["rows"]), "chi2": comp["chi2"], "dof": comp["dof"]},
    )
    print(f"{'PASS' if report.passed else 'FAIL'} consistency: chi2={comp['chi2']:.4g} dof={comp['dof']} "
          f"p={comp['p_value']:.4g} (alpha {alpha:g}), max |z|={comp['max_z']:.3f}")
    io.write_json(run.path("verify-consistency.json"), "report", run.provenance, report.to_dict())
    return EXIT_OK if report.passed else EXIT_VERIFY


COMMANDS = {
    "partition": cmd_partition,
    "basis": cmd_basis,
    "project": cmd_project,
    "spectrum": cmd_spectrum,
    "sample": cmd_sample,
    "lift-sample": cmd_lift_sample,
    "plot": cmd_plot,
    ("verify", "corr"): cmd_verify_corr,
    ("verify", "ortho"): cmd_verify_ortho,
    ("verify", "moments"): cmd_verify_moments,
    ("verify", "refine"): cmd_verify_refine,
    ("verify", "consistency"): cmd_verify_consistency,
}


def _glue_values(argv):
    """Attach values such as ``-1..1`` to their flag so argparse does not read them as options."""
    out = []
    it = iter(argv)
    for a in it:
        if a in ("--window", "--cell"):
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(_glue_values(argv))
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _config(args)
        key = (args.command, args.check) if args.command == "verify" else args.command
        name = args.command if args.command != "verify" else f"verify {args.check}"
        run = Run(cfg, name, args.out is not None or cfg.output.dir != ".")
        return COMMANDS[key](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TreeDPPError, IndexSetError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
