"""Command-line interface: estimate, forecast, simulate, prior-diagnose, dma."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from .config import ConfigError, load_config
from .data import load_dataset, write_dataset_csv
from .dgp import DgpScenario, generate_dgp, run_sim_study, study_to_csv
from .diagnostics import (
    induced_prior_experiment,
    marginal_density,
    prior_hoyer_study,
)
from .dma import dma_run
from .forecast import ModelDef, ScorePanel, recursive_exercise
from .model import VarSpec
from .sampler import PriorConfig, run_mcmc, save_draws, write_summary_csv


def _fail(exc):
    record = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        record["field"] = exc.field_path
    click.echo(json.dumps(record), err=True)
    sys.exit(1)


def _load_data(cfg):
    path, variables, transforms, default = cfg.data_section()
    return load_dataset(path, variables=variables, transforms=transforms,
                        default_transform=default)


def _resolve_window(value, dataset, field):
    """Window ends are observation counts or date labels of the last
    estimation-sample observation."""
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        if value not in dataset.dates:
            raise ConfigError(field, f"date {value!r} not in the sample")
        return dataset.dates.index(value) + 1
    raise ConfigError(field, "expected an integer or a YYYY:Qn date label")


@click.group()
def main():
    """Bayesian VARs with stochastic volatility under shrinkage priors."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
def estimate(config_path, seed):
    """Fit one model and persist draws plus posterior summaries."""
    try:
        cfg = load_config(config_path)
        dataset = _load_data(cfg)
        spec = cfg.var_spec(dataset.M)
        draws = run_mcmc(
            dataset, spec,
            phi_prior=cfg.phi_prior(), l_prior=cfg.l_prior(),
            mcmc=cfg.mcmc(seed_override=seed),
        )
        out = cfg.output_dir
        (out / "draws").mkdir(parents=True, exist_ok=True)
        (out / "summaries").mkdir(parents=True, exist_ok=True)
        save_draws(draws, out / "draws" / "draws.bin")
        write_summary_csv(draws, out / "summaries" / "coefficients.csv", names=dataset.names)
        _write_hyper_summary(draws, out / "summaries" / "hyperparameters.csv")
        cfg.write_lock()
        click.echo(f"estimate: {draws.n_retained} retained draws -> {out}")
    except Exception as exc:
        _fail(exc)


def _write_hyper_summary(draws, path):
    names = list(draws.hyper_phi_names) + list(draws.hyper_l_names)
    if not names:
        Path(path).write_text("hyperparameter,mean,median\n")
        return
    values = np.hstack([draws.hyper_phi, draws.hyper_l])
    with open(path, "w") as fh:
        fh.write("hyperparameter,mean,median\n")
        for j, name in enumerate(names):
            fh.write(
                f"{name},{values[:, j].mean():.17g},{np.median(values[:, j]):.17g}\n"
            )


def _model_defs(node, default_p, default_intercept):
    models = []
    for i, m in enumerate(node):
        name = m.get("name")
        if not name:
            raise ConfigError(f"forecast.models[{i}].name", "missing model name")
        p = int(m.get("p", default_p))
        intercept = bool(m.get("intercept", default_intercept))
        variables = tuple(m.get("variables", ()))
        n_series = len(variables) if variables else None
        phi = m.get("prior_phi", {})
        lpr = m.get("prior_l", {})
        models.append(
            {
                "name": name,
                "p": p,
                "intercept": intercept,
                "variables": variables,
                "phi": PriorConfig(
                    family=phi.get("family", "R2D2"),
                    grouping=phi.get("grouping", "global"),
                    options=phi.get("options", {}),
                ),
                "l": PriorConfig(
                    family=lpr.get("family", "R2D2"),
                    grouping="global",
                    options=lpr.get("options", {}),
                ),
                "homoskedastic": bool(m.get("homoskedastic", False)),
                "n_series": n_series,
            }
        )
    return models


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=0)
def forecast(config_path, seed, workers):
    """Recursive out-of-sample evaluation; writes score panels."""
    try:
        cfg = load_config(config_path)
        dataset = _load_data(cfg)
        node = cfg.forecast_section()
        w0 = _resolve_window(node.get("window_start"), dataset, "forecast.window_start")
        w1 = _resolve_window(node.get("window_end"), dataset, "forecast.window_end")
        horizons = tuple(node.get("horizons", [1]))
        subsets = [("all", None)]
        for sub_name, vars_ in (node.get("subsets") or {}).items():
            if vars_ is None:
                continue
            idx = [dataset.names.index(v) for v in vars_]
            subsets.append((sub_name, idx))
        raw_models = node.get("models")
        if not raw_models:
            raise ConfigError("forecast.models", "need at least one model")
        defaults = cfg.raw.get("model", {})
        defs = []
        for m in _model_defs(raw_models, defaults.get("p", 1), defaults.get("intercept", True)):
            n_series = m["n_series"] or dataset.M
            defs.append(
                ModelDef(
                    name=m["name"],
                    spec=VarSpec(M=n_series, p=m["p"], intercept=m["intercept"]),
                    phi_prior=m["phi"],
                    l_prior=m["l"],
                    variables=m["variables"],
                    homoskedastic=m["homoskedastic"],
                )
            )
        panels = recursive_exercise(
            dataset, defs, w0, w1, horizons=horizons, subsets=subsets,
            mcmc=cfg.mcmc(seed_override=seed), workers=workers,
        )
        out = cfg.output_dir / "scores"
        out.mkdir(parents=True, exist_ok=True)
        for (h, sub_name), panel in panels.items():
            panel.to_csv(out / f"h{h}_{sub_name}.csv")
            panel.cumulative_to_csv(out / f"h{h}_{sub_name}_cumulative.csv")
            if panel.errors:
                with open(out / f"h{h}_{sub_name}_errors.json", "w") as fh:
                    json.dump({f"{k[0]}|{k[1]}": v for k, v in panel.errors.items()}, fh)
        cfg.write_lock()
        click.echo(f"forecast: {len(panels)} panels -> {out}")
    except Exception as exc:
        _fail(exc)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=0)
def simulate(config_path, seed, workers):
    """Generate study datasets and run the estimation-accuracy table."""
    try:
        cfg = load_config(config_path)
        node = cfg.raw.get("simulate")
        if not node:
            raise ConfigError("simulate", "missing section")
        scenarios = []
        for i, s in enumerate(node.get("scenarios", [])):
            kind = s.get("kind")
            if kind == "sparse":
                scenarios.append(DgpScenario.sparse(M=s["M"], T=s["T"], p=s.get("p", 1)))
            elif kind == "dense":
                scenarios.append(DgpScenario.dense(M=s["M"], T=s["T"], p=s.get("p", 1)))
            else:
                raise ConfigError(f"simulate.scenarios[{i}].kind", "must be sparse or dense")
        priors = []
        for m in node.get("priors", []):
            priors.append(
                (
                    m["name"],
                    PriorConfig(
                        family=m.get("family", "R2D2"),
                        grouping=m.get("grouping", "global"),
                        options=m.get("options", {}),
                    ),
                )
            )
        if not scenarios or not priors:
            raise ConfigError("simulate", "need at least one scenario and one prior")
        mcmc = cfg.mcmc(seed_override=seed)
        out = cfg.output_dir
        (out / "simulate").mkdir(parents=True, exist_ok=True)
        if node.get("emit_datasets", True):
            rng = np.random.default_rng(mcmc.seed)
            for si, sc in enumerate(scenarios):
                truth, data = generate_dgp(sc, rng)
                write_dataset_csv(data, out / "simulate" / f"scenario{si}_{sc.kind}_data.csv")
                with open(out / "simulate" / f"scenario{si}_{sc.kind}_truth.csv", "w") as fh:
                    w = csv.writer(fh)
                    w.writerow(["coefficient", "value"])
                    for j, v in enumerate(truth.Phi.flatten(order="F")):
                        w.writerow([f"phi_{j}", f"{v:.17g}"])
                    for j, v in enumerate(truth.l):
                        w.writerow([f"l_{j}", f"{v:.17g}"])
        rows = run_sim_study(
            scenarios, priors, replications=int(node.get("replications", 1)),
            mcmc=mcmc, workers=workers,
        )
        study_to_csv(rows, out / "simulate" / "study_summary.csv")
        cfg.write_lock()
        click.echo(f"simulate: {len(rows)} cells -> {out / 'simulate'}")
    except Exception as exc:
        _fail(exc)


@main.command(name="prior-diagnose")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
def prior_diagnose(config_path, seed):
    """Emit marginal-density grids, Hoyer summaries, induced-prior tables."""
    try:
        cfg = load_config(config_path)
        node = cfg.raw.get("prior_diagnose")
        if not node:
            raise ConfigError("prior_diagnose", "missing section")
        out = cfg.output_dir / "diagnostics"
        out.mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(cfg.seed if seed is None else seed)

        families = node.get("families", {})
        grid_cfg = node.get("grid", {"min": 1e-3, "max": 10.0, "points": 200})
        grid = np.geomspace(grid_cfg["min"], grid_cfg["max"], int(grid_cfg["points"]))
        with open(out / "density_grid.csv", "w") as fh:
            fh.write("family,phi,density\n")
            for fam, hyper in families.items():
                for x in grid:
                    fh.write(f"{fam},{x:.17g},{marginal_density(fam, hyper, x):.17g}\n")

        hoyer_cfg = node.get("hoyer", {})
        if hoyer_cfg:
            n = int(hoyer_cfg.get("n", 1000))
            draws = int(hoyer_cfg.get("draws", 10_000))
            with open(out / "hoyer_summary.csv", "w") as fh:
                fh.write("family,mean_hoyer,draws,excluded\n")
                for fam, hyper in families.items():
                    s = prior_hoyer_study(fam, hyper, n, draws, rng)
                    fh.write(
                        f"{fam},{s.means()[fam]:.17g},{len(s.values[fam])},{s.excluded[fam]}\n"
                    )

        ind = node.get("induced")
        if ind:
            res = induced_prior_experiment(
                int(ind.get("M", 3)), float(ind.get("variance", 10.0)),
                int(ind.get("draws", 100_000)), rng,
            )
            with open(out / "induced_kurtosis.csv", "w") as fh:
                fh.write("column,excess_kurtosis\n")
                for j, kv in enumerate(res["excess_kurtosis"], start=1):
                    fh.write(f"{j},{kv:.17g}\n")
            with open(out / "induced_qq.csv", "w") as fh:
                fh.write("column,theoretical,empirical\n")
                for j, qq in res["qq"].items():
                    for th, em in zip(qq["theoretical"], qq["empirical"]):
                        fh.write(f"{j + 1},{th:.17g},{em:.17g}\n")
        cfg.write_lock()
        click.echo(f"prior-diagnose -> {out}")
    except Exception as exc:
        _fail(exc)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def dma(config_path):
    """Run dynamic model averaging over a stored score panel."""
    try:
        cfg = load_config(config_path)
        node = cfg.raw.get("dma")
        if not node:
            raise ConfigError("dma", "missing section")
        panel_path = cfg.base_dir / node.get("panel", "")
        if not panel_path.is_file():
            raise ConfigError("dma.panel", f"panel file {panel_path} not found")
        alpha = float(node.get("alpha", 0.99))
        init = node.get("init")
        panel = ScorePanel.from_csv(panel_path)
        state = dma_run(panel, alpha, init=np.asarray(init, float) if init else None)
        out = cfg.output_dir / "dma"
        out.mkdir(parents=True, exist_ok=True)
        state.weights_to_csv(out / "weights.csv")
        state.scores_to_csv(out / "scores.csv")
        cfg.write_lock()
        click.echo(f"dma: alpha={alpha} -> {out}")
    except Exception as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
