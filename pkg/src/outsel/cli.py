"""Command-line interface: ``simulate``, ``fit``, and ``report``.

Every command writes a ``manifest.json`` holding the full resolved
configuration and seed, with no timestamps, so re-running the manifest's
configuration regenerates the same outputs byte for byte.  Exit codes:
0 success, 1 user or data error (bad flags, malformed files, sampler
diagnostics), 2 unexpected internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import traceback

import numpy as np

from . import __version__
from .data import log1p_exposure, stack_long, standardize, standardize_covariates
from .errors import OutselError, SchemaError, ValidationError
from .io import (prior_to_dict, read_dataset, read_fit_summary,
                 read_grid_results, sampler_config_to_dict, write_chain,
                 write_fit_summary, write_grid_results, write_manifest)
from .metrics import render_tables, fit_summary
from .model import REGIMES, SPIKE_MODES, application_priors
from .sampler import SamplerConfig, run_chain
from .simulate import GRID_REGIMES, run_replication_grid

__all__ = ["RunConfig", "parse_args", "main", "entry", "OUT_DIR_ENV"]

OUT_DIR_ENV = "OUTSEL_OUT"
_DEFAULT_OUT = "outsel_out"

LAYOUTS = ("table1", "table2", "table3", "table4", "table5", "table6")
_GRID_LAYOUTS = ("table1", "table2", "table3", "table4")


def _default_out_dir() -> str:
    return os.environ.get(OUT_DIR_ENV, _DEFAULT_OUT)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Validated bundle of everything one command run needs."""

    command: str
    out_dir: str
    seed: int = 0
    sampler: SamplerConfig = dataclasses.field(default_factory=SamplerConfig)
    # simulate
    study: int | None = None
    effects: tuple[float, ...] | None = None
    k1_values: tuple[int, ...] | None = None
    reps: int | None = None
    regimes: tuple[str, ...] | None = None
    n: int | None = None
    n_outcomes: int | None = None
    inclusion: float | None = None
    # fit
    data_path: str | None = None
    regime: str | None = None
    inclusion_prior: float | tuple[float, ...] | None = None
    subset_names: tuple[str, ...] | None = None
    spike_mode: str | None = None
    spike_ratio: float | None = None
    spike_variance: float | None = None
    mu_prior_sd: float | None = None
    laplace_scale: float | None = None
    log1p: bool = False
    standardize_outcomes: bool = True
    standardize_exposure: bool = False
    standardize_confounder: bool = False
    label: str | None = None
    # report
    in_dir: str | None = None
    layout: str | None = None

    def __post_init__(self) -> None:
        if self.command not in ("simulate", "fit", "report"):
            raise ValidationError(f"unknown command {self.command!r}")
        if not isinstance(self.seed, int):
            raise ValidationError("seed must be an integer")
        if self.command == "simulate":
            if self.study not in (1, 2):
                raise ValidationError("--study must be 1 or 2")
            if self.reps is None or self.reps < 1:
                raise ValidationError("--reps must be at least 1")
            bad = [r for r in (self.regimes or ()) if r not in GRID_REGIMES]
            if bad:
                raise ValidationError(f"unknown regimes {bad}; "
                                      f"choose from {list(GRID_REGIMES)}")
            if not self.regimes:
                raise ValidationError("--regimes must name at least one regime")
            if any(k < 1 for k in (self.k1_values or ())):
                raise ValidationError("--k1 values must be positive")
            if self.n_outcomes is not None and self.k1_values is not None:
                high = [k for k in self.k1_values if k > self.n_outcomes]
                if high:
                    raise ValidationError(
                        f"--k1 values {high} exceed the number of outcomes "
                        f"{self.n_outcomes}")
            if self.inclusion is not None and not 0.0 < self.inclusion <= 1.0:
                raise ValidationError("--inclusion must be in (0, 1]")
        if self.command == "fit":
            if self.data_path is None or not os.path.isfile(self.data_path):
                raise ValidationError(f"data file not found: {self.data_path!r}")
            if self.regime not in REGIMES:
                raise ValidationError(f"--prior must be one of {list(REGIMES)}")
            if self.regime == "subset" and self.subset_names is None:
                raise ValidationError("--prior subset requires --subset-mask FILE "
                                      "(one outcome name per line)")
            if self.regime != "subset" and self.subset_names is not None:
                raise ValidationError("--subset-mask only applies to --prior subset")
        if self.command == "report":
            if self.in_dir is None or not os.path.isdir(self.in_dir):
                raise ValidationError(f"results directory not found: {self.in_dir!r}")
            if self.layout not in LAYOUTS:
                raise ValidationError(f"--layout must be one of {list(LAYOUTS)}")

    def to_dict(self) -> dict:
        raw = dataclasses.asdict(self)
        raw["sampler"] = sampler_config_to_dict(self.sampler)
        return raw


# ----- argument parsing -----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1 (user error)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_sampler_flags(cmd: argparse.ArgumentParser) -> None:
    group = cmd.add_argument_group("sampler")
    group.add_argument("--chains", type=int, default=4,
                       help="number of independent chains (default 4)")
    group.add_argument("--burnin", type=int, default=5000,
                       help="discarded sweeps per chain (default 5000)")
    group.add_argument("--samples", type=int, default=5000,
                       help="post-burn-in sweeps per chain (default 5000)")
    group.add_argument("--thin", type=int, default=5,
                       help="keep every thin-th sweep (default 5)")
    group.add_argument("--slice-width", type=float, default=1.0,
                       help="initial slice bracket width for scale updates")
    group.add_argument("--max-slice-steps", type=int, default=100,
                       help="stepping-out cap per side in slice updates")


def _sampler_from(args: argparse.Namespace, seed: int) -> SamplerConfig:
    return SamplerConfig(n_chains=args.chains, n_burnin=args.burnin,
                         n_samples=args.samples, thinning=args.thin,
                         seed=seed, slice_width=args.slice_width,
                         max_slice_steps=args.max_slice_steps)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="outsel",
        description="Bayesian selection of exposure-relevant outcomes with a "
                    "shared-effect spike-and-slab prior.",
        epilog=f"The default output directory is ${OUT_DIR_ENV} when set, "
               f"else ./{_DEFAULT_OUT}.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run a synthetic replication grid")
    sim.add_argument("--study", type=int, choices=(1, 2), required=True,
                     help="1: independent outcomes; 2: latent-factor outcomes")
    sim.add_argument("--k1", type=int, nargs="+", default=None, metavar="K1",
                     help="number(s) of truly affected outcomes "
                          "(default 5 10 15)")
    sim.add_argument("--effect", type=float, nargs="+", default=None,
                     metavar="EFFECT",
                     help="true shared effect size(s); study-specific default")
    sim.add_argument("--reps", type=int, default=100,
                     help="replications per grid cell (default 100)")
    sim.add_argument("--regimes", type=str, default=",".join(GRID_REGIMES),
                     help="comma-separated list from "
                          f"{{{','.join(GRID_REGIMES)}}} (default all)")
    sim.add_argument("--seed", type=int, default=0,
                     help="master seed for the whole grid (default 0)")
    sim.add_argument("--n", type=int, default=100,
                     help="individuals per synthetic dataset (default 100)")
    sim.add_argument("--outcomes", type=int, default=20, dest="n_outcomes",
                     help="outcomes per synthetic dataset (default 20)")
    sim.add_argument("--inclusion", type=float, default=0.5,
                     help="prior inclusion probability per outcome (default 0.5)")
    sim.add_argument("--out", type=str, default=None,
                     help="output directory (created if needed)")
    _add_sampler_flags(sim)

    fit = sub.add_parser("fit", help="fit one dataset from a CSV file")
    fit.add_argument("--data", type=str, required=True,
                     help="CSV with columns id, exposure, z, then one column "
                          "per outcome; empty outcome cells are missing")
    fit.add_argument("--prior", type=str, choices=REGIMES, default="ssvs_mu",
                     help="effect-prior regime (default ssvs_mu)")
    fit.add_argument("--inclusion-prior", type=str, default="0.5",
                     help="prior inclusion probability: a number, or a file "
                          "with one probability per outcome line (default 0.5)")
    fit.add_argument("--subset-mask", type=str, default=None,
                     help="for --prior subset: file listing the outcome names "
                          "allowed a nonzero effect, one per line")
    fit.add_argument("--spike-mode", type=str, choices=SPIKE_MODES,
                     default="ratio", help="spike variance tied to the slab "
                                           "(ratio) or fixed (default ratio)")
    fit.add_argument("--spike-ratio", type=float, default=100.0,
                     help="slab-to-spike variance ratio (default 100)")
    fit.add_argument("--spike-variance", type=float, default=0.04,
                     help="spike variance when --spike-mode fixed")
    fit.add_argument("--mu-prior-sd", type=float, default=1.0,
                     help="prior sd of the shared effect mean (default 1)")
    fit.add_argument("--laplace-scale", type=float, default=1.0,
                     help="scale of the Laplace effect prior (default 1)")
    fit.add_argument("--log1p-exposure", action="store_true",
                     help="replace exposure with log(1 + exposure) first")
    fit.add_argument("--standardize-outcomes",
                     action=argparse.BooleanOptionalAction, default=True,
                     help="center/scale each outcome before fitting "
                          "(default on)")
    fit.add_argument("--standardize-exposure",
                     action=argparse.BooleanOptionalAction, default=False,
                     help="center/scale the exposure (default off)")
    fit.add_argument("--standardize-z",
                     action=argparse.BooleanOptionalAction, default=False,
                     help="center/scale the confounder (default off)")
    fit.add_argument("--label", type=str, default=None,
                     help="name for this fit in reports (default: data file name)")
    fit.add_argument("--seed", type=int, default=0,
                     help="sampler seed (default 0)")
    fit.add_argument("--out", type=str, default=None,
                     help="output directory (created if needed)")
    _add_sampler_flags(fit)

    rep = sub.add_parser("report", help="render a results table from a run directory")
    rep.add_argument("--in", dest="in_dir", type=str, default=None,
                     help="directory written by simulate or fit "
                          "(default: the default output directory)")
    rep.add_argument("--layout", type=str, required=True, choices=LAYOUTS,
                     help="table1/2: detection and error averages; table3/4: "
                          "shared-effect estimates; table5/6: one fit's "
                          "inclusion probabilities / estimates")
    return parser


def _read_inclusion_prior(text: str):
    """A number, or a path to a file with one probability per line."""
    try:
        return float(text)
    except ValueError:
        pass
    if not os.path.isfile(text):
        raise ValidationError(f"--inclusion-prior {text!r} is neither a number "
                              f"nor an existing file")
    with open(text, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    try:
        values = tuple(float(ln) for ln in lines)
    except ValueError as err:
        raise ValidationError(f"bad probability in {text!r}: {err}") from None
    if not values:
        raise ValidationError(f"inclusion-prior file {text!r} is empty")
    return values


def _read_subset_names(path: str) -> tuple[str, ...]:
    if not os.path.isfile(path):
        raise ValidationError(f"subset mask file not found: {path!r}")
    with open(path, "r", encoding="utf-8") as fh:
        names = tuple(ln.strip() for ln in fh if ln.strip())
    if not names:
        raise ValidationError(f"subset mask file {path!r} names no outcomes")
    return names


def parse_args(argv=None) -> RunConfig:
    args = _build_parser().parse_args(argv)
    out_dir = getattr(args, "out", None) or _default_out_dir()
    if args.command == "simulate":
        return RunConfig(
            command="simulate", out_dir=out_dir, seed=args.seed,
            sampler=_sampler_from(args, args.seed),
            study=args.study,
            effects=None if args.effect is None else tuple(args.effect),
            k1_values=None if args.k1 is None else tuple(args.k1),
            reps=args.reps,
            regimes=tuple(r.strip() for r in args.regimes.split(",") if r.strip()),
            n=args.n, n_outcomes=args.n_outcomes, inclusion=args.inclusion,
        )
    if args.command == "fit":
        subset = (None if args.subset_mask is None
                  else _read_subset_names(args.subset_mask))
        return RunConfig(
            command="fit", out_dir=out_dir, seed=args.seed,
            sampler=_sampler_from(args, args.seed),
            data_path=args.data, regime=args.prior,
            inclusion_prior=_read_inclusion_prior(args.inclusion_prior),
            subset_names=subset, spike_mode=args.spike_mode,
            spike_ratio=args.spike_ratio, spike_variance=args.spike_variance,
            mu_prior_sd=args.mu_prior_sd, laplace_scale=args.laplace_scale,
            log1p=args.log1p_exposure,
            standardize_outcomes=args.standardize_outcomes,
            standardize_exposure=args.standardize_exposure,
            standardize_confounder=args.standardize_z,
            label=args.label,
        )
    return RunConfig(command="report",
                     out_dir=args.in_dir or _default_out_dir(),
                     in_dir=args.in_dir or _default_out_dir(),
                     layout=args.layout)


# ----- commands ----------------------------------------------------------------------


def _prepare_out_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write_probe.tmp")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as err:
        raise ValidationError(f"output directory {path!r} is not writable: "
                              f"{err}") from None


def _write_rendered(rendered, out_dir: str, layout: str) -> list[str]:
    text_path = os.path.join(out_dir, f"{layout}.txt")
    csv_path = os.path.join(out_dir, f"{layout}.csv")
    from .io import atomic_write_text
    atomic_write_text(text_path, rendered.text + "\n")
    atomic_write_text(csv_path, rendered.csv)
    return [f"{layout}.txt", f"{layout}.csv"]


def cmd_simulate(cfg: RunConfig) -> int:
    _prepare_out_dir(cfg.out_dir)
    grid = run_replication_grid(
        cfg.study, cfg.regimes, cfg.reps, cfg.sampler,
        effects=cfg.effects, k1_values=cfg.k1_values,
        n=cfg.n, K=cfg.n_outcomes, master_seed=cfg.seed,
        inclusion=cfg.inclusion,
    )
    outputs = ["results.csv"]
    write_grid_results(grid, os.path.join(cfg.out_dir, "results.csv"))
    wanted = ("table1", "table2", "table3" if cfg.study == 1 else "table4")
    for layout in wanted:
        try:
            rendered = render_tables(grid, layout)
        except OutselError as err:
            print(f"note: skipping {layout}: {err}", file=sys.stderr)
            continue
        outputs += _write_rendered(rendered, cfg.out_dir, layout)
    failures = sum(1 for cell in grid.cells for r in cell.reps if not r.ok)
    write_manifest(os.path.join(cfg.out_dir, "manifest.json"), {
        "command": "simulate", "package_version": __version__,
        "config": cfg.to_dict(), "outputs": sorted(outputs + ["manifest.json"]),
        "failed_replications": failures,
    })
    total = sum(len(cell.reps) for cell in grid.cells)
    print(f"simulate: {len(grid.cells)} cells, {total} fits "
          f"({failures} failed) -> {cfg.out_dir}")
    for name in outputs:
        print(f"  wrote {os.path.join(cfg.out_dir, name)}")
    return 0


def _fit_prior(cfg: RunConfig, outcome_names: tuple[str, ...]):
    K = len(outcome_names)
    inclusion = cfg.inclusion_prior
    if isinstance(inclusion, tuple):
        if len(inclusion) != K:
            raise ValidationError(
                f"inclusion-prior file has {len(inclusion)} probabilities "
                f"but the dataset has {K} outcomes")
        inclusion = np.array(inclusion)
    subset_include = None
    if cfg.subset_names is not None:
        unknown = [nm for nm in cfg.subset_names if nm not in outcome_names]
        if unknown:
            raise ValidationError(f"subset mask names unknown outcomes: {unknown}")
        subset_include = np.array([nm in cfg.subset_names for nm in outcome_names])
    return application_priors(
        K, regime=cfg.regime, inclusion=inclusion,
        subset_include=subset_include, spike_mode=cfg.spike_mode,
        spike_ratio=cfg.spike_ratio, spike_variance=cfg.spike_variance,
        mu_prior_sd=cfg.mu_prior_sd, laplace_scale=cfg.laplace_scale,
    )


def cmd_fit(cfg: RunConfig) -> int:
    _prepare_out_dir(cfg.out_dir)
    data = read_dataset(cfg.data_path)
    transforms: dict = {}
    if cfg.log1p:
        data = log1p_exposure(data)
        transforms["log1p_exposure"] = True
    if cfg.standardize_exposure or cfg.standardize_confounder:
        data, scaling = standardize_covariates(
            data, exposure=cfg.standardize_exposure,
            confounder=cfg.standardize_confounder)
        transforms["covariate_scaling"] = scaling.to_dict()
    if cfg.standardize_outcomes:
        data, record = standardize(data)
        transforms["outcome_standardization"] = record.to_dict()
    prior = _fit_prior(cfg, data.outcome_names)
    out = run_chain(stack_long(data), prior, cfg.sampler)
    label = cfg.label or os.path.splitext(os.path.basename(cfg.data_path))[0]
    summary = fit_summary(out, label=label)

    outputs = ["chains.csv", "fit_summary.json"]
    write_chain(out, os.path.join(cfg.out_dir, "chains.csv"))
    write_fit_summary(summary, os.path.join(cfg.out_dir, "fit_summary.json"))
    for layout in ("table5", "table6"):
        outputs += _write_rendered(render_tables(summary, layout),
                                   cfg.out_dir, layout)
    write_manifest(os.path.join(cfg.out_dir, "manifest.json"), {
        "command": "fit", "package_version": __version__,
        "config": cfg.to_dict(), "prior": prior_to_dict(prior),
        "transforms": transforms, "n": out.n, "K": out.K,
        "outcome_names": list(out.outcome_names),
        "outputs": sorted(outputs + ["manifest.json"]),
    })
    flagged = [nm for nm, d in summary.diagnostics.items() if d.flagged]
    print(f"fit: {out.n} individuals, {out.K} outcomes, regime {prior.regime} "
          f"-> {cfg.out_dir}")
    if flagged:
        print(f"warning: convergence flagged (split R-hat > 1.05) for: "
              f"{', '.join(flagged)}", file=sys.stderr)
    for name in outputs:
        print(f"  wrote {os.path.join(cfg.out_dir, name)}")
    return 0


def cmd_report(cfg: RunConfig) -> int:
    if cfg.layout in _GRID_LAYOUTS:
        path = os.path.join(cfg.in_dir, "results.csv")
        if not os.path.isfile(path):
            raise SchemaError(
                f"no simulation results in {cfg.in_dir!r}: expected "
                f"results.csv (written by 'outsel simulate')")
        rendered = render_tables(read_grid_results(path), cfg.layout)
    else:
        path = os.path.join(cfg.in_dir, "fit_summary.json")
        if not os.path.isfile(path):
            raise SchemaError(
                f"no fit results in {cfg.in_dir!r}: expected "
                f"fit_summary.json (written by 'outsel fit')")
        rendered = render_tables(read_fit_summary(path), cfg.layout)
    print(rendered.text)
    return 0


def main(argv=None) -> int:
    cfg = parse_args(argv)
    if cfg.command == "simulate":
        return cmd_simulate(cfg)
    if cfg.command == "fit":
        return cmd_fit(cfg)
    return cmd_report(cfg)


def entry(argv=None) -> int:
    """Console-script entry point with the documented exit-code contract."""
    try:
        return main(argv)
    except OutselError as err:
        print(f"outsel: error: {err}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("outsel: interrupted", file=sys.stderr)
        return 1
    except SystemExit:
        raise
    except Exception:  # pragma: no cover - internal failure path
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(entry())
