"""Command-line entry point. Every command is a thin adapter over the library."""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from . import io
from .config import PROFILES, CampaignConfig, load_config
from .errors import ConfigError, DataError, NumericalError, SlicError
from .harness import field_consistency, run_campaign_full, score, sweep
from .networks import BUILTIN
from .placement import rqm_placement
from .swslic import sw_slic
from .synth import synthesize_campaign, synthesize_field_dataset


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SlicError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(DataError.exit_code)
    return wrapper


def _config_options(fn):
    opts = [
        click.option("-c", "--config", "config_path", type=click.Path(dir_okay=False), help="Campaign JSON file."),
        click.option("--tree", help="Tree JSON path or builtin:<name>."),
        click.option("--n", type=int, help="Samples per run."),
        click.option("--runs", type=int, help="Monte-Carlo runs M."),
        click.option("--sigma", type=float, help="Noise std as a fraction, e.g. 0.0003."),
        click.option("--it-class", type=float, help="Accuracy class of regular ITs."),
        click.option("--rqm-class", type=float, help="Accuracy class of the RQM."),
        click.option("--seed", type=int),
        click.option("-o", "--output-dir", type=click.Path(file_okay=False)),
        click.option("--jobs", type=int, help="Worker processes."),
        click.option("--profile", type=click.Choice(sorted(PROFILES)), help="Trajectory profile preset."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _load(config_path, **overrides) -> CampaignConfig:
    return load_config(config_path, **overrides)


def _out(cfg: CampaignConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_report(out: Path, est, report, plot: bool) -> None:
    io.write_json(out / "estimate.json", io.estimate_to_dict(est))
    if report is not None:
        io.write_json(out / "report.json", io.report_to_dict(report))
        io.write_table_csv(out / "report.csv", report.table())
        if plot:
            from .plots import branch_bars
            branch_bars(report, out / "mare_by_branch.png")


@click.group()
@click.version_option(package_name="artifact")
def cli():
    """Line-parameter estimation and IT calibration over PMU-monitored trees."""


@cli.command()
@_config_options
@click.option("--field", "field_like", is_flag=True, help="Single run stamped over calendar days.")
@click.option("--days", type=int, default=10, show_default=True)
@_handle_errors
def synth(config_path, field_like, days, **overrides):
    """Write a synthetic campaign: per-branch CSVs and truth.json."""
    cfg = _load(config_path, **overrides)
    tree = cfg.load_tree()
    if field_like:
        if cfg.profile == PROFILES["default"]:
            cfg = cfg.with_(profile=PROFILES["field"])
        camp = synthesize_field_dataset(tree, cfg.synth(), days=days)
    else:
        camp = synthesize_campaign(tree, cfg.synth(), runs=cfg.runs)
    paths = io.write_dataset(cfg.output_dir, camp, {"config": cfg.to_dict()})
    click.echo(f"wrote {len(paths)} CSV file(s) to {cfg.output_dir}")


@cli.command()
@_config_options
@click.option("-d", "--data", "data_dir", required=True, type=click.Path(file_okay=False))
@click.option("--plot", is_flag=True, help="Also write PNG figures.")
@_handle_errors
def run(config_path, data_dir, plot, **overrides):
    """Estimate a dataset; score it when truth.json is present."""
    cfg = _load(config_path, **overrides)
    tree = cfg.load_tree()
    runs, truths = io.read_dataset(data_dir, tree)
    est = sw_slic(tree, runs, cfg.quantization)
    report = score(est, truths) if truths is not None else None
    out = _out(cfg)
    _write_report(out, est, report, plot)
    _summary(est, report)
    _check_failed(est)


@cli.command()
@_config_options
@click.option("--plot", is_flag=True)
@_handle_errors
def campaign(config_path, plot, **overrides):
    """Synthesize and estimate a Monte-Carlo campaign in memory."""
    cfg = _load(config_path, **overrides)
    res = run_campaign_full(cfg.load_tree(), cfg.synth(), cfg.runs, jobs=cfg.jobs)
    out = _out(cfg)
    _write_report(out, res.estimate, res.report, plot)
    _summary(res.estimate, res.report)
    _check_failed(res.estimate)


@cli.command()
@_config_options
@_handle_errors
def place(config_path, **overrides):
    """Rank every candidate RQM location by mu_MARE."""
    cfg = _load(config_path, **overrides)
    res = rqm_placement(cfg.load_tree(), cfg.synth(), cfg.runs, jobs=cfg.jobs)
    rows = [{"branch": r.branch, "end": r.end, "mu_mare": r.mu_mare, "rank": r.rank} for r in res.rows]
    out = _out(cfg)
    io.write_table_csv(out / "placement.csv", rows, ["branch", "end", "mu_mare", "rank"])
    best = res.opt_loc
    click.echo(f"OptLoc: {best.end} end of {best.branch} (bus {best.bus}), mu_MARE = {100 * best.mu_mare:.4f}%")


@cli.command("sweep")
@_config_options
@click.option("--axis", required=True, type=click.Choice(["noise_sigma", "it_class", "rqm_class", "n"]))
@click.option("--values", required=True, help="Comma-separated values.")
@click.option("--plot", is_flag=True)
@_handle_errors
def sweep_cmd(config_path, axis, values, plot, **overrides):
    """One campaign per value of a single parameter."""
    cfg = _load(config_path, **overrides)
    try:
        vals = [int(v) if axis == "n" else float(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values: cannot parse {values!r}") from None
    points = sweep(cfg.load_tree(), axis, vals, cfg.synth(), cfg.runs, jobs=cfg.jobs)
    rows = []
    for p in points:
        for row in p.report.table():
            rows.append({"axis": axis, "value": p.value, **row})
    out = _out(cfg)
    io.write_table_csv(out / "sweep.csv", rows)
    io.write_json(out / "sweep.json", [{"value": p.value, "report": io.report_to_dict(p.report)} for p in points])
    if plot:
        from .plots import sweep_lines
        sweep_lines(points, out / f"sweep_{axis}.png")
    for p in points:
        click.echo(f"{axis}={p.value}: mu_MARE = {100 * p.report.mu_mare:.4f}%")


@cli.command("validate-field")
@_config_options
@click.option("-d", "--data", "data_dir", type=click.Path(file_okay=False), help="Directory of <branch>.csv files.")
@click.option("--csv", "csv_specs", multiple=True, metavar="BRANCH=PATH", help="Per-branch CSV, repeatable.")
@click.option("--split", default="weekday", show_default=True,
              type=click.Choice(["weekday", "halves", "alternate", "identical"]))
@_handle_errors
def validate_field(config_path, data_dir, csv_specs, split, **overrides):
    """Estimate on two partitions of one dataset and compare."""
    cfg = _load(config_path, **overrides)
    tree = cfg.load_tree()
    if csv_specs:
        meas = {}
        for spec in csv_specs:
            branch, sep, path = spec.partition("=")
            if not sep:
                raise ConfigError(f"--csv expects BRANCH=PATH, got {spec!r}")
            tree.branch(branch)
            meas[branch] = io.read_measurements_csv(path, branch)
        missing = [b.id for b in tree.branches if b.id not in meas]
        if missing:
            raise DataError(f"no measurements for branch(es) {', '.join(missing)}")
    elif data_dir:
        runs, _ = io.read_dataset(data_dir, tree)
        if len(runs) != 1:
            raise DataError(f"{data_dir} holds {len(runs)} runs; field validation takes one")
        meas = runs[0]
    else:
        raise ConfigError("give --data or --csv")
    rep = field_consistency(tree, meas, split, cfg.quantization)
    doc = {
        "split": split, "samples": {"S1": rep.n1, "S2": rep.n2},
        "all_bins_equal": rep.all_bins_equal,
        "branches": {b: {"m_star": list(rep.m_star[b]), "bins_equal": rep.bins_equal[b],
                         "tau_delta": rep.tau_delta[b]} for b in rep.bins_equal},
        "max_vt_delta": rep.max_vt_delta(), "max_ct_delta": rep.max_ct_delta(),
        "S1": io.estimate_to_dict(rep.s1), "S2": io.estimate_to_dict(rep.s2),
    }
    out = _out(cfg)
    io.write_json(out / "consistency.json", doc)
    click.echo(f"S1={rep.n1} S2={rep.n2} samples; bins equal on all branches: {rep.all_bins_equal}; "
               f"max |dtau_V| = {rep.max_vt_delta():.2e}")


@cli.command()
@click.option("--builtin", "name", required=True, type=click.Choice(sorted(BUILTIN)))
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Write here instead of stdout.")
@_handle_errors
def tree(name, output):
    """Export a built-in tree description as JSON."""
    t = BUILTIN[name]()
    if output:
        io.save_tree(t, output)
    else:
        import json
        click.echo(json.dumps(io.tree_to_dict(t), indent=2))


def _summary(est, report) -> None:
    for bid, be in est.branches.items():
        line = f"{bid:>10}  m*={be.m_star}"
        if report is not None:
            line += f"  line MARE {100 * report.line_mare(bid):.3f}%"
        if be.errors:
            line += f"  ({len(be.errors)} error(s))"
        click.echo(line)
    if report is not None:
        click.echo(f"mu_MARE = {100 * report.mu_mare:.4f}%")


def _check_failed(est) -> None:
    # Reports are already on disk; a branch with no usable run is still a failure.
    dead = [bid for bid, be in est.branches.items() if not be.ok_runs]
    if dead:
        raise NumericalError(f"no successful run for branch(es) {', '.join(dead)}")


def main():
    cli()


if __name__ == "__main__":
    main()
