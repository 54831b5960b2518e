"""Command-line interface.

Exit codes: 0 success, 1 user or data error, 2 convergence failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path

from . import reports
from .dataio import (RunConfig, dataset_to_csv, load_csv, load_rosters, load_yaml,
                     simulation_config, theta_from_dict)
from .errors import ConfigurationError, ConvergenceError, JointModelError
from .estimator import estimate
from .inference import marginal_effects
from .model import ModelSpec
from .simulate import (evacuation_config, recovery_experiment, representative_travel_hours,
                       simulate_dataset)

log = logging.getLogger("jointdc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _add_output(p, formats=True):
    p.add_argument("--out", help="write the report here instead of stdout")
    if formats:
        p.add_argument("--format", choices=("text", "json"), help="report format (default text)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jointdc", description=(
        "Joint lognormal duration / ordered probit model: estimation, simulation "
        "and post-estimation reports."))
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="fit the joint model to a CSV file")
    p.add_argument("--data", help="observation CSV (overrides 'data' in the config)")
    p.add_argument("--config", required=True, help="YAML run configuration with a 'model' section")
    p.add_argument("--seed", type=int, help="multi-start seed (overrides the config)")
    _add_output(p)

    p = sub.add_parser("simulate", help="draw a synthetic dataset as CSV")
    p.add_argument("--config", help="YAML with 'model' and 'simulation' sections "
                                    "(default: evacuation calibration)")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="number of observations")
    _add_output(p, formats=False)

    p = sub.add_parser("effects", help="average marginal effects from a saved JSON estimate")
    p.add_argument("--result", required=True, help="JSON report written by 'estimate'")
    p.add_argument("--data", required=True, help="observation CSV to average over")
    p.add_argument("--duration-method", choices=("mean", "median"), default="mean")
    p.add_argument("--departure-origin", type=float)
    _add_output(p)

    p = sub.add_parser("gof", help="likelihood-ratio test and adjusted rho^2")
    p.add_argument("--llb", type=float, required=True, help="log-likelihood at convergence")
    p.add_argument("--llr", type=float, required=True, help="restricted log-likelihood")
    p.add_argument("--k", type=int, required=True, help="number of restricted parameters")
    p.add_argument("--n", type=int, help="number of observations (reported only)")
    p.add_argument("--levels", type=float, nargs="+", default=[0.95, 0.99, 0.9999],
                   help="confidence levels for chi-square critical values")
    _add_output(p)

    p = sub.add_parser("netmetrics", help="ego-network size, heterogeneity and IQV")
    p.add_argument("--rosters", required=True,
                   help="long-format CSV: ego_id, alter_index, attribute, value")
    p.add_argument("--continuous", nargs="*", help="attributes summarized by population std-dev")
    p.add_argument("--categorical", nargs="*", help="attributes summarized by IQV")
    p.add_argument("--categories", nargs="*", default=[], metavar="ATTR=C",
                   help="declared category count for an IQV attribute")
    _add_output(p)

    p = sub.add_parser("recover", help="simulate-and-re-estimate experiment")
    p.add_argument("--config", help="YAML with 'model' and 'simulation' sections "
                                    "(default: evacuation calibration)")
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    _add_output(p)
    return parser


def _run_config(path) -> RunConfig:
    return RunConfig.from_dict(load_yaml(path)) if path else RunConfig()


def _emit(text: str, out, stdout):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)


def _format(args, run: RunConfig) -> str:
    return args.format or run.output_format


def cmd_estimate(args, stdout):
    run = _run_config(args.config)
    if run.spec is None:
        raise ConfigurationError(f"{args.config}: no 'model' section")
    data_path = args.data or run.data_path
    if not data_path:
        raise ConfigurationError("no data file given (--data or 'data' in the config)")
    spec = run.spec
    settings = spec.estimation
    seed = args.seed if args.seed is not None else run.seed
    if seed is not None:
        settings = dataclasses.replace(settings, seed=seed)
    data = load_csv(data_path, spec, run.departure_origin)
    log.info("loaded %d observations (%d dropped)", data.n_obs, data.n_dropped)
    result = estimate(data, spec, settings)
    report = reports.estimation_report(result, data, spec, run.confidence_levels)
    _emit(reports.render(report, _format(args, run)), args.out or run.output_path, stdout)


def _simulation(args):
    if args.config:
        cfg = simulation_config(_run_config(args.config), n_obs=args.n, seed=args.seed)
    else:
        cfg = evacuation_config(n_obs=args.n or 196, seed=args.seed or 0)
    return cfg


def cmd_simulate(args, stdout):
    cfg = _simulation(args)
    data = simulate_dataset(cfg)
    hours = (representative_travel_hours(data.travel_category, cfg.spec.category_bounds)
             if cfg.emit_travel_hours else None)
    buf = io.StringIO()
    dataset_to_csv(data, buf, travel_hours=hours)
    _emit(buf.getvalue(), args.out, stdout)


def cmd_effects(args, stdout):
    try:
        saved = json.loads(Path(args.result).read_text(encoding="utf-8"))
        spec = ModelSpec.from_dict(saved["model"])
        theta = theta_from_dict(saved["theta"], spec)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigurationError(f"{args.result}: not an estimation report ({exc})") from None
    data = load_csv(args.data, spec, args.departure_origin)
    report = reports.effects_to_dict(marginal_effects(data, theta, args.duration_method))
    _emit(reports.render(report, args.format or "text"), args.out, stdout)


def cmd_gof(args, stdout):
    report = reports.gof_report(args.llb, args.llr, args.k, args.n, args.levels)
    _emit(reports.render(report, args.format or "text"), args.out, stdout)


def cmd_netmetrics(args, stdout):
    networks = load_rosters(args.rosters)
    declared = {}
    for item in args.categories:
        attr, sep, c = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--categories expects ATTR=C, got {item!r}")
        try:
            declared[attr] = int(c)
        except ValueError:
            raise ConfigurationError(f"--categories count must be an integer: {item!r}") from None
    attrs = sorted({a for net in networks.values() for alter in net.alters for a in alter})
    continuous = list(args.continuous) if args.continuous is not None else None
    categorical = list(args.categorical) if args.categorical is not None else None
    if continuous is None or categorical is None:
        # attributes whose values all parse as numbers are continuous
        auto_cont, auto_cat = [], []
        for a in attrs:
            if a in (continuous or []) or a in (categorical or []):
                continue
            vals = [alter[a] for net in networks.values() for alter in net.alters
                    if alter.get(a) is not None]
            try:
                [float(v) for v in vals]
                auto_cont.append(a)
            except ValueError:
                auto_cat.append(a)
        continuous = auto_cont if continuous is None else continuous
        categorical = auto_cat if categorical is None else categorical
    for net in networks.values():
        for alter in net.alters:
            for a in continuous:
                if alter.get(a) is not None:
                    try:
                        alter[a] = float(alter[a])
                    except ValueError:
                        raise ConfigurationError(
                            f"ego {net.ego_id}: attribute {a!r} is not numeric: "
                            f"{alter[a]!r}") from None
    report = reports.netmetrics_report(networks, continuous, categorical, declared)
    _emit(reports.render(report, args.format or "text"), args.out, stdout)


def cmd_recover(args, stdout):
    run = _run_config(args.config)
    if args.reps < 1:
        raise ConfigurationError("--reps must be at least 1")
    cfg = _simulation(args)
    rep = recovery_experiment(cfg, args.reps)
    _emit(reports.render(reports.recovery_to_dict(rep), _format(args, run)), args.out, stdout)


COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "effects": cmd_effects,
            "gof": cmd_gof, "netmetrics": cmd_netmetrics, "recover": cmd_recover}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=stderr)
    try:
        COMMANDS[args.command](args, stdout)
    except ConvergenceError as exc:
        stderr.write(f"error: {exc}\n")
        for tr in exc.traces:
            stderr.write(f"  start {tr.index}: {tr.reason} (log-likelihood {tr.log_likelihood}, "
                         f"gradient norm {tr.grad_norm})\n")
        return 2
    except (JointModelError, OSError, UnicodeDecodeError) as exc:
        stderr.write(f"error: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
