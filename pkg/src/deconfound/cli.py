"""Command-line front end.

Runs are driven by an INI config file plus mirrored flags (flags win).
Every command writes its artifacts plus ``manifest.ini``, an INI capture of
the fully resolved configuration.  Re-running ``replay`` on a manifest
reproduces every artifact byte for byte: input paths are stored absolute,
the output directory is stored as ``.``, and no output embeds wall-clock
state.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys

import numpy as np

from . import data, diagnostics, dml, network, plots, reporting, simulation
from .errors import (
    ConfigError,
    ConvergenceError,
    DeconfoundError,
    DegenerateDataError,
    FormatError,
    GenerationError,
    InsufficientDataError,
    JoinError,
    OverlapError,
    ShapeError,
    ValidationError,
    WeakInstrumentError,
)
from .propensity import predict_propensity
from .seeds import subseed

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VALIDATION = 4
EXIT_DEGENERATE = 5
EXIT_CONVERGENCE = 6
EXIT_IDENTIFICATION = 7
EXIT_GENERATION = 8

_EXIT_BY_TYPE = (
    (ConfigError, EXIT_CONFIG),
    ((FormatError, JoinError), EXIT_IO),
    ((DegenerateDataError, InsufficientDataError), EXIT_DEGENERATE),
    (ConvergenceError, EXIT_CONVERGENCE),
    ((OverlapError, WeakInstrumentError), EXIT_IDENTIFICATION),
    (GenerationError, EXIT_GENERATION),
    ((ValidationError, ShapeError), EXIT_VALIDATION),
)

# section.key -> (type, default, flag). Bool options get --flag/--no-flag.
_SCHEMA = {
    "run.seed": (int, 0, "--seed"),
    "run.out": (str, ".", "--out"),
    "run.ci_level": (float, 0.95, "--ci-level"),
    "data.representations": (str, "", "--representations"),
    "data.labels": (str, "", "--labels"),
    "folds.k": (int, 2, "--folds"),
    "folds.inner_split_fraction": (float, 0.5, "--inner-split-fraction"),
    "network.d_q": (int, 0, "--d-q"),        # 0 = half the input width
    "network.head_hidden": (int, 500, "--head-hidden"),
    "network.dropout_rate": (float, 0.15, "--dropout-rate"),
    "network.learning_rate": (float, 1e-3, "--learning-rate"),
    "network.batch_size": (int, 32, "--batch-size"),
    "network.max_epochs": (int, 500, "--max-epochs"),
    "network.patience": (int, 15, "--patience"),
    "network.n_nets": (int, 1, "--n-nets"),
    "propensity.kind": (str, "logistic_l2", "--propensity-kind"),
    "propensity.regularization": (float, 1.0, "--propensity-regularization"),
    "propensity.clip_eps": (float, 0.0, "--clip-eps"),
    "simulate.preset": (str, "weak-separable", "--preset"),
    "simulate.trials": (int, 200, "--trials"),
    "simulate.n": (int, 2000, "--n"),
    "simulate.d_r": (int, 64, "--d-r"),
    "simulate.method": (str, "gpi", "--method"),
    "simulate.estimand": (str, "ate", "--estimand"),
    "simulate.redraw_design": (bool, False, "--redraw-design"),
    "simulate.latent_corr": (float, 0.5, "--latent-corr"),
    "simulate.noise_sd": (float, 1.0, "--noise-sd"),
    "simulate.compliance_rate": (float, -1.0, "--compliance-rate"),  # -1 = off
    "simulate.confounded_perception": (bool, False, "--confounded-perception"),
}

COMMANDS = ("estimate-ate", "estimate-late", "baseline", "diagnose",
            "simulate", "replay")


def _flag_dest(flag: str) -> str:
    return flag.lstrip("-").replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deconfound",
        description="Causal effect estimation from generative-model "
                    "internal representations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "replay":
            p.add_argument("manifest")
            p.add_argument("--out", default=None)
            continue
        p.add_argument("--config", default=None, help="INI config file")
        for key, (typ, _default, flag) in _SCHEMA.items():
            if typ is bool:
                p.add_argument(flag, dest=_flag_dest(flag), default=None,
                               action=argparse.BooleanOptionalAction)
            else:
                p.add_argument(flag, dest=_flag_dest(flag), default=None,
                               type=typ)
    return parser


def _read_config_file(path: str) -> dict:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            full = f"{section}.{key}"
            if full not in _SCHEMA:
                raise ConfigError(f"unknown config key [{section}] {key}")
            typ = _SCHEMA[full][0]
            try:
                if typ is bool:
                    values[full] = cp.getboolean(section, key)
                else:
                    values[full] = typ(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc
    return values


def resolve_config(args: argparse.Namespace) -> dict:
    """defaults <- config file <- flags."""
    cfg = {key: default for key, (_t, default, _f) in _SCHEMA.items()}
    if getattr(args, "config", None):
        cfg.update(_read_config_file(args.config))
    for key, (_typ, _default, flag) in _SCHEMA.items():
        val = getattr(args, _flag_dest(flag), None)
        if val is not None:
            cfg[key] = val
    return cfg


def write_manifest(cfg: dict, command: str, out_dir: str) -> str:
    cp = configparser.ConfigParser()
    cp["command"] = {"name": command}
    for full, value in sorted(cfg.items()):
        section, key = full.split(".", 1)
        if full in ("data.representations", "data.labels") and value:
            value = os.path.abspath(value)
        if full == "run.out":
            value = "."
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, reporting._fmt(value))
    import io as _io

    buf = _io.StringIO()
    cp.write(buf)
    path = os.path.join(out_dir, "manifest.ini")
    reporting.atomic_write_text(path, buf.getvalue())
    return path


def _net_config(cfg: dict, d_R: int, seed: int, iv_mode: bool) -> network.NetworkConfig:
    return network.NetworkConfig(
        d_R=d_R,
        d_Q=cfg["network.d_q"] or None,
        head_hidden=cfg["network.head_hidden"],
        dropout_rate=cfg["network.dropout_rate"],
        learning_rate=cfg["network.learning_rate"],
        batch_size=cfg["network.batch_size"],
        max_epochs=cfg["network.max_epochs"],
        patience=cfg["network.patience"],
        n_nets=cfg["network.n_nets"],
        seed=seed,
        iv_mode=iv_mode,
    )


def _load_inputs(cfg: dict) -> data.Dataset:
    rep, lab = cfg["data.representations"], cfg["data.labels"]
    if not rep or not lab:
        raise ConfigError("estimation commands need --representations and --labels")
    return data.load_dataset(rep, lab)


def _out_dir(cfg: dict) -> str:
    out = cfg["run.out"]
    os.makedirs(out, exist_ok=True)
    return out


def _write_estimate_outputs(result, out: str) -> None:
    reporting.atomic_write_text(os.path.join(out, "estimate.txt"),
                                reporting.estimate_block(result))
    reporting.atomic_write_text(os.path.join(out, "scores.csv"),
                                reporting.scores_csv(result))
    plots.estimate_figure(result, os.path.join(out, "estimate.png"))


def cmd_estimate(cfg: dict, estimand: str) -> None:
    ds = _load_inputs(cfg)
    seed = cfg["run.seed"]
    plan = dml.make_folds(ds.n, cfg["folds.k"],
                          cfg["folds.inner_split_fraction"],
                          seed=subseed(seed, "folds"))
    net = _net_config(cfg, ds.d_R, subseed(seed, "net"),
                      iv_mode=estimand == "late")
    run = dml.estimate_late if estimand == "late" else dml.estimate_ate
    result = run(ds, plan, net, cfg["propensity.kind"],
                 cfg["propensity.regularization"],
                 cfg["propensity.clip_eps"], cfg["run.ci_level"])
    _write_estimate_outputs(result, _out_dir(cfg))


def cmd_baseline(cfg: dict) -> None:
    ds = _load_inputs(cfg)
    result = dml.difference_in_means(ds, cfg["run.ci_level"])
    _write_estimate_outputs(result, _out_dir(cfg))


def cmd_diagnose(cfg: dict) -> None:
    ds = _load_inputs(cfg)
    seed = cfg["run.seed"]
    plan = dml.make_folds(ds.n, cfg["folds.k"],
                          cfg["folds.inner_split_fraction"],
                          seed=subseed(seed, "folds"))
    net = _net_config(cfg, ds.d_R, subseed(seed, "net"), iv_mode=False)
    pi = np.empty(ds.n)
    q = np.empty((ds.n, net.d_Q))
    for fold in range(plan.k_folds):
        nuis = dml.fit_fold_nuisances(
            ds, plan, fold, net, cfg["propensity.kind"],
            cfg["propensity.regularization"], cfg["propensity.clip_eps"])
        hold = plan.fold_indices(fold)
        q[hold] = network.deconfounder_outputs(nuis.model, ds.R[hold])
        pi[hold] = predict_propensity(nuis.propensity, q[hold])
    report = diagnostics.diagnostics_report(pi, ds.t, q,
                                            seed=subseed(seed, "diagnostics"))
    out = _out_dir(cfg)
    reporting.atomic_write_text(os.path.join(out, "diagnostics.txt"),
                                reporting.diagnostics_block(report))
    reporting.atomic_write_text(os.path.join(out, "propensity_hist.csv"),
                                reporting.propensity_histogram_csv(report))
    plots.propensity_histogram_figure(report, os.path.join(out, "overlap.png"))


def _scenario_from_config(cfg: dict) -> simulation.SimulationScenario:
    preset = cfg["simulate.preset"]
    try:
        strength, kind = preset.split("-", 1)
    except ValueError:
        raise ConfigError(f"preset must look like weak-separable, got {preset!r}")
    if kind not in ("separable", "nonseparable"):
        raise ConfigError(f"unknown preset variant {kind!r}")
    compliance = cfg["simulate.compliance_rate"]
    return simulation.scenario_preset(
        strength, separable=kind == "separable",
        n=cfg["simulate.n"], d_R=cfg["simulate.d_r"],
        latent_corr=cfg["simulate.latent_corr"],
        noise_sd=cfg["simulate.noise_sd"],
        compliance_rate=None if compliance < 0 else compliance,
        confounded_perception=cfg["simulate.confounded_perception"],
        seed=cfg["run.seed"],
    )


def cmd_simulate(cfg: dict) -> None:
    scenario = _scenario_from_config(cfg)
    spec = simulation.EstimatorSpec(
        method=cfg["simulate.method"], estimand=cfg["simulate.estimand"],
        k_folds=cfg["folds.k"],
        inner_split_fraction=cfg["folds.inner_split_fraction"],
        d_Q=cfg["network.d_q"] or None,
        head_hidden=cfg["network.head_hidden"],
        dropout_rate=cfg["network.dropout_rate"],
        learning_rate=cfg["network.learning_rate"],
        batch_size=cfg["network.batch_size"],
        max_epochs=cfg["network.max_epochs"],
        patience=cfg["network.patience"],
        n_nets=cfg["network.n_nets"],
        prop_kind=cfg["propensity.kind"],
        prop_regularization=cfg["propensity.regularization"],
        prop_clip_eps=cfg["propensity.clip_eps"],
        ci_level=cfg["run.ci_level"],
    )
    report = simulation.run_monte_carlo(scenario, spec, cfg["simulate.trials"],
                                        redraw_design=cfg["simulate.redraw_design"])
    out = _out_dir(cfg)
    reporting.atomic_write_text(os.path.join(out, "summary.txt"),
                                reporting.mc_summary_block(report))
    reporting.atomic_write_text(os.path.join(out, "trials.csv"),
                                reporting.mc_trials_csv(report))
    plots.mc_figure(report, os.path.join(out, "sampling.png"))


def _run_command(command: str, cfg: dict) -> None:
    out = _out_dir(cfg)
    if command == "estimate-ate":
        cmd_estimate(cfg, "ate")
    elif command == "estimate-late":
        cmd_estimate(cfg, "late")
    elif command == "baseline":
        cmd_baseline(cfg)
    elif command == "diagnose":
        cmd_diagnose(cfg)
    elif command == "simulate":
        cmd_simulate(cfg)
    else:
        raise ConfigError(f"unknown command {command!r}")
    write_manifest(cfg, command, out)


def cmd_replay(manifest_path: str, out_override: str | None) -> None:
    cp = configparser.ConfigParser()
    if not cp.read(manifest_path):
        raise ConfigError(f"manifest not found: {manifest_path}")
    if not cp.has_option("command", "name"):
        raise ConfigError("manifest lacks a [command] name entry")
    command = cp.get("command", "name")
    cfg = {key: default for key, (_t, default, _f) in _SCHEMA.items()}
    for section in cp.sections():
        if section == "command":
            continue
        for key, raw in cp.items(section):
            full = f"{section}.{key}"
            if full not in _SCHEMA:
                raise ConfigError(f"manifest has unknown key [{section}] {key}")
            typ = _SCHEMA[full][0]
            cfg[full] = (raw.strip().lower() in ("true", "1", "yes")
                         if typ is bool else typ(raw))
    base = out_override or os.path.dirname(os.path.abspath(manifest_path))
    cfg["run.out"] = base
    _run_command(command, cfg)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            cmd_replay(args.manifest, args.out)
        else:
            _run_command(args.command, resolve_config(args))
    except DeconfoundError as exc:
        code = EXIT_UNEXPECTED
        for types, c in _EXIT_BY_TYPE:
            if isinstance(exc, types):
                code = c
                break
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return code
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
