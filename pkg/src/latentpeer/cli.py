"""Command-line front end: simulate, pipeline, montecarlo."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import plotting, report
from .data import FORMAT_VERSION, PanelFormatError, load_panel, save_panel
from .dgp import DgpConfig, generate_panel
from .equilibrium import EquilibriumError
from .npl import NplConfig
from .pipeline import PipelineError, PipelineOptions, pipeline_report, report_text, run_pipeline
from .simulation import run_monte_carlo, run_oracle_study, run_pooled_study

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4

log = logging.getLogger("latentpeer")


class ValidationError(ValueError):
    pass


def _positive(name: str, value) -> None:
    if value is not None and not value > 0:
        raise ValidationError(f"--{name} must be positive (got {value})")


def _add_estimation_flags(p: argparse.ArgumentParser, boot_default) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="worker processes (never changes results)")
    p.add_argument("--k-max", type=int, default=4)
    p.add_argument("--rho", type=float, default=None, help="C-Lasso tuning (default: data driven)")
    p.add_argument("--rho-scale", type=float, default=0.5)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="IC penalty weight (default: data driven)")
    p.add_argument("--ccp-tol", type=float, default=1e-5)
    p.add_argument("--eq-tol", type=float, default=1e-10)
    p.add_argument("--max-outer", type=int, default=500)
    p.add_argument("--boot-reps", type=int, default=boot_default)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--mu-bound", type=float, default=10.0)
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentpeer",
        description="Peer-effects logit with latent group heterogeneity: estimation, clustering, inference.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw a panel from the clustered design")
    s.add_argument("--G", type=int, default=100)
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--n-max", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--eq-tol", type=float, default=1e-10)
    s.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("pipeline", help="estimate, select K and bootstrap on a data set")
    p.add_argument("--nodes", type=Path, required=True)
    p.add_argument("--edges", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    _add_estimation_flags(p, 500)

    m = sub.add_parser("montecarlo", help="replication study on the clustered design")
    m.add_argument("--preset", choices=["table1", "table2-oracle", "table3"], required=True)
    m.add_argument("--reps", type=int, default=100)
    m.add_argument("--G", type=int, default=100)
    m.add_argument("--n", type=int, default=100)
    m.add_argument("--out", type=Path, required=True, help="output directory")
    _add_estimation_flags(m, 200)
    return parser


def _npl_config(a) -> NplConfig:
    for name in ("ccp_tol", "eq_tol", "mu_bound"):
        _positive(name.replace("_", "-"), getattr(a, name))
    if a.max_outer < 1:
        raise ValidationError("--max-outer must be at least 1")
    return NplConfig(ccp_tol=a.ccp_tol, max_outer=a.max_outer, mu_bound=a.mu_bound, eq_tol=a.eq_tol)


def _options(a, bootstrap: bool = True) -> PipelineOptions:
    if a.threads < 1:
        raise ValidationError("--threads must be at least 1")
    if a.k_max < 1:
        raise ValidationError("--k-max must be at least 1")
    if not 0 < a.alpha < 1:
        raise ValidationError("--alpha must lie in (0, 1)")
    if a.boot_reps < 1:
        raise ValidationError("--boot-reps must be positive")
    for name, v in (("rho", a.rho), ("lambda", a.lam), ("rho-scale", a.rho_scale)):
        if v is not None and v < 0:
            raise ValidationError(f"--{name} must be nonnegative")
    return PipelineOptions(
        k_max=a.k_max,
        rho=a.rho,
        rho_scale=a.rho_scale,
        lam=a.lam,
        boot_reps=a.boot_reps,
        alpha=a.alpha,
        bootstrap=bootstrap,
        npl=_npl_config(a),
    )


def _outdir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc}") from exc
    return path


def cmd_simulate(a) -> int:
    if a.G < 1 or a.n < 1 or a.n_max < 0:
        raise ValidationError("--G and --n must be positive and --n-max nonnegative")
    _positive("eq-tol", a.eq_tol)
    cfg = DgpConfig(G=a.G, n=a.n, n_max=a.n_max, seed=a.seed, eq_tol=a.eq_tol)
    panel, truth = generate_panel(cfg)
    out = _outdir(a.out)
    save_panel(panel, out / "nodes.csv", out / "edges.csv")
    report.write_json(out / "truth.json", truth.to_json())
    log.info("wrote %s", out)
    return EXIT_OK


def cmd_pipeline(a) -> int:
    opts = _options(a)
    panel = load_panel(a.nodes, a.edges)
    out = _outdir(a.out)
    try:
        result = run_pipeline(panel, opts, a.seed, a.threads)
    except PipelineError as exc:
        partial = {"format_version": FORMAT_VERSION, "kind": "pipeline_report", "error": {"stage": exc.stage, "message": str(exc)}}
        partial.update(exc.partial)
        report.write_json(out / "report.json", partial)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION if exc.kind == "validation" else EXIT_CONVERGENCE
    rep = pipeline_report(result)
    report.write_json(out / "report.json", rep)
    report.write_text(out / "report.txt", report_text(rep))
    report.write_text(out / "ic.csv", report.ic_csv(rep))
    report.write_text(out / "membership.csv", report.membership_csv(rep))
    report.write_text(out / "estimates.csv", report.estimates_csv(rep))
    if not a.no_figures:
        plotting.plot_ic(rep, out / "ic.png")
        plotting.plot_slopes(rep, out / "slopes.png")
    sys.stdout.write(report_text(rep))
    return EXIT_OK


def cmd_montecarlo(a) -> int:
    if a.reps < 1 or a.G < 1 or a.n < 1:
        raise ValidationError("--reps, --G and --n must be positive")
    _positive("eq-tol", a.eq_tol)
    cfg = DgpConfig(G=a.G, n=a.n, seed=a.seed, mc_reps=a.reps, boot_reps=a.boot_reps, eq_tol=a.eq_tol)
    if a.preset == "table1":
        summary = run_monte_carlo(cfg, _options(a, bootstrap=False), a.threads)
        name = "table1"
    elif a.preset == "table2-oracle":
        summary = run_oracle_study(cfg, _options(a, bootstrap=True), a.threads)
        name = "table2"
    else:
        summary = run_pooled_study(cfg, _options(a, bootstrap=False), a.threads)
        name = "table3"
    out = _outdir(a.out)
    js = summary.to_json()
    report.write_json(out / "summary.json", js)
    report.write_text(out / f"{name}.csv", summary.table_csv())
    text = report.mc_text(js)
    report.write_text(out / "summary.txt", text)
    if not a.no_figures:
        if name == "table1":
            plotting.plot_k_frequencies(js, out / "k_frequencies.png")
        else:
            plotting.plot_bias(js, out / "bias.png")
    sys.stdout.write(text)
    return EXIT_OK if summary.ok_records else EXIT_CONVERGENCE


COMMANDS = {"simulate": cmd_simulate, "pipeline": cmd_pipeline, "montecarlo": cmd_montecarlo}


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[a.command](a)
    except (ValidationError, PanelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (EquilibriumError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
