"""Report dictionaries and their text-table rendering.

Each report is built once as a plain dict; JSON output serializes it and
text output renders it, so both carry the same numbers.
"""

from __future__ import annotations

import json
import math
from typing import Any, Mapping, Sequence

from .dataio import theta_to_dict
from .estimator import EstimationResult
from .inference import FitReport, MarginalEffectsReport, fit_report, marginal_effects
from .model import Dataset, ModelSpec
from .network import (EgoNetwork, attribute_values, continuous_heterogeneity, iqv,
                      network_size)
from .simulate import RecoveryReport

ANCILLARY_LABELS = {
    "sigma": "Standard deviation of duration error (sigma)",
    "mu1": "Threshold of ordinal equation (mu1)",
    "rho": "Correlation coefficient (rho)",
}


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def fit_to_dict(fit: FitReport) -> dict:
    lr = fit.lr_test
    return {
        "ll_converged": fit.ll_converged,
        "ll_restricted": fit.ll_restricted,
        "K": fit.K,
        "n_obs": fit.n_obs,
        "chi2": fit.chi2,
        "chi2_dof": fit.chi2_dof,
        "p_value": lr.p_value,
        "critical_values": [{"level": c, "value": v, "exceeded": bool(r)}
                            for c, v, r in zip(lr.confidence_levels, lr.critical_values,
                                               lr.rejects)],
        "adjusted_rho2": fit.adjusted_rho2,
        "note": fit.note,
    }


def effects_to_dict(me: MarginalEffectsReport) -> dict:
    return {
        "report": "effects",
        "duration_method": me.duration_method,
        "duration": [{"variable": k, "method": me.methods.get(("duration", k)),
                      "effect_hours": v} for k, v in me.duration_effects.items()],
        "ordinal": [{"variable": k, "method": me.methods.get(("ordinal", k)),
                     "tt1": v[0], "tt2": v[1], "tt3": v[2]}
                    for k, v in me.ordinal_effects.items()],
    }


def estimation_report(result: EstimationResult, data: Dataset, spec: ModelSpec,
                      confidence_levels: Sequence[float] = (0.95, 0.99, 0.9999)) -> dict:
    """Coefficient tables for both equations, ancillary parameters, fit
    statistics and convergence details."""
    theta = result.theta_hat
    coef = theta.to_array()
    se = result.std_errors
    t = result.t_stats
    me = marginal_effects(data, theta)

    def stat(arr, i):
        return None if arr is None else _num(arr[i])

    p, q = theta.gamma.size, theta.beta.size
    duration = []
    for i, name in enumerate(result.duration_columns):
        duration.append({"variable": name, "coefficient": coef[i], "std_error": stat(se, i),
                         "t_stat": stat(t, i),
                         "average_marginal_effect": me.duration_effects.get(name)})
    ordinal = []
    for j, name in enumerate(result.ordinal_columns):
        i = p + j
        eff = me.ordinal_effects.get(name)
        ordinal.append({"variable": name, "coefficient": coef[i], "std_error": stat(se, i),
                        "t_stat": stat(t, i),
                        "ame_tt1": None if eff is None else eff[0],
                        "ame_tt2": None if eff is None else eff[1],
                        "ame_tt3": None if eff is None else eff[2]})
    ancillary = []
    for k, name in enumerate(("sigma", "mu1", "rho")):
        i = p + q + k
        ancillary.append({"variable": name, "coefficient": coef[i], "std_error": stat(se, i),
                          "t_stat": stat(t, i)})
    fit = fit_report(result.ll_converged, result.ll_restricted, result.n_params_adjustment,
                     result.n_obs, confidence_levels)
    conv = result.convergence
    return {
        "report": "estimation",
        "model": spec.to_dict(),
        "n_obs": result.n_obs,
        "n_dropped": data.n_dropped,
        "dropped_rows": list(data.dropped_rows),
        "duration_equation": duration,
        "ordinal_equation": ordinal,
        "ancillary": ancillary,
        "fit": fit_to_dict(fit),
        "convergence": {
            "converged": conv.converged, "iterations": conv.iterations,
            "grad_norm": conv.grad_norm, "best_start": conv.best_start, "reason": conv.reason,
            "starts": [{"index": tr.index, "converged": tr.converged,
                        "log_likelihood": _num(tr.log_likelihood), "iterations": tr.iterations,
                        "grad_norm": _num(tr.grad_norm), "reason": tr.reason}
                       for tr in conv.traces],
        },
        "diagnostics": {k: (_num(v) if isinstance(v, float) else v)
                        for k, v in result.diagnostics.items()},
        "theta": theta_to_dict(theta, result.duration_columns, result.ordinal_columns),
        "effects_duration_method": me.duration_method,
    }


def gof_report(ll_converged, ll_restricted, K, n_obs=None,
               confidence_levels=(0.95, 0.99, 0.9999)) -> dict:
    out = {"report": "gof"}
    out.update(fit_to_dict(fit_report(ll_converged, ll_restricted, K, n_obs, confidence_levels)))
    return out


def netmetrics_report(networks: Mapping[str, EgoNetwork], continuous: Sequence[str],
                      categorical: Sequence[str],
                      n_categories: Mapping[str, int] | None = None) -> dict:
    n_categories = dict(n_categories or {})
    rows = []
    for ego_id, net in networks.items():
        row: dict[str, Any] = {"ego_id": ego_id, "size": network_size(net)}
        for attr in continuous:
            _, missing = attribute_values(net, attr)
            row[f"{attr}_heterogeneity"] = _num(continuous_heterogeneity(net, attr))
            row[f"{attr}_missing"] = missing
        for attr in categorical:
            _, missing = attribute_values(net, attr)
            row[f"{attr}_iqv"] = _num(iqv(net, attr, n_categories.get(attr)))
            row[f"{attr}_missing"] = missing
        rows.append(row)
    return {"report": "netmetrics", "continuous": list(continuous),
            "categorical": list(categorical), "egos": rows}


def recovery_to_dict(rep: RecoveryReport) -> dict:
    return {
        "report": "recovery",
        "replications": rep.replications, "n_obs": rep.n_obs, "seed": rep.seed,
        "failures": rep.failures,
        "parameters": [{"parameter": p.name, "truth": p.truth, "mean_estimate": p.mean_estimate,
                        "bias": p.bias, "rmse": p.rmse, "empirical_sd": _num(p.empirical_sd),
                        "mean_se": p.mean_se, "se_ratio": _num(p.se_ratio),
                        "coverage": p.coverage, "n_used": p.n_used,
                        "coverage_rate": _num(p.coverage_rate)}
                       for p in rep.parameters],
    }


def to_json(report: Mapping) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.6g}" if math.isfinite(x) else "NA"
    return str(x)


def table(title: str, headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    cells = [[fmt(c) for c in r] for r in rows]
    widths = [max([len(h)] + [len(r[i]) for r in cells]) for i, h in enumerate(headers)]
    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    lines = [title, rule, "  ".join(h.ljust(w) for h, w in zip(headers, widths)), rule]
    for r in cells:
        lines.append("  ".join(c.rjust(w) if i else c.ljust(w)
                               for i, (c, w) in enumerate(zip(r, widths))))
    lines.append(rule)
    return "\n".join(lines)


def _fit_text(fit: Mapping) -> str:
    rows = [("Log-likelihood at convergence LL(beta)", fit["ll_converged"]),
            ("Restricted log-likelihood LL(r)", fit["ll_restricted"]),
            ("Number of parameters for adjustment (K)", fit["K"])]
    if fit.get("n_obs") is not None:
        rows.append(("Number of observations", fit["n_obs"]))
    rows += [("Likelihood ratio test statistic (chi2)", fit["chi2"]),
             ("Degrees of freedom", fit["chi2_dof"]),
             ("p-value", fit["p_value"])]
    rows += [(f"Critical value at {c['level']:.6g} (exceeded: {fmt(c['exceeded'])})", c["value"])
             for c in fit["critical_values"]]
    rows.append(("Adjusted rho^2 [1]", fit["adjusted_rho2"]))
    return table("Goodness of fit", ["Measure", "Value"], rows) + f"\n[1] {fit['note']}"


def render_text(report: Mapping) -> str:
    kind = report["report"]
    if kind == "gof":
        return _fit_text(report) + "\n"
    if kind == "estimation":
        parts = [
            f"Observations: {report['n_obs']} (dropped: {report['n_dropped']})",
            table("Departure time (duration) equation",
                  ["Variable", "Coefficient", "t-stat", "Average marginal effect (hours)"],
                  [(r["variable"], r["coefficient"], r["t_stat"], r["average_marginal_effect"])
                   for r in report["duration_equation"]]),
            table("Travel time (ordinal) equation",
                  ["Variable", "Coefficient", "t-stat", "AME (tt=1)", "AME (1<tt<=3)",
                   "AME (tt>3)"],
                  [(r["variable"], r["coefficient"], r["t_stat"], r["ame_tt1"], r["ame_tt2"],
                    r["ame_tt3"]) for r in report["ordinal_equation"]]),
            table("Ancillary parameters", ["Variable", "Coefficient", "t-stat"],
                  [(ANCILLARY_LABELS[r["variable"]], r["coefficient"], r["t_stat"])
                   for r in report["ancillary"]]),
            _fit_text(report["fit"]),
        ]
        conv = report["convergence"]
        parts.append(f"Converged: {fmt(conv['converged'])} ({conv['reason']}); "
                     f"best start {conv['best_start']}, {conv['iterations']} iterations, "
                     f"gradient norm {fmt(conv['grad_norm'])}")
        diag = report["diagnostics"]
        parts.append(f"Underflow count: {diag['underflow_count']}; Hessian condition number: "
                     f"{fmt(diag['hessian_condition_number'])}")
        return "\n\n".join(parts) + "\n"
    if kind == "effects":
        return "\n\n".join([
            table(f"Duration average marginal effects (hours, {report['duration_method']})",
                  ["Variable", "Method", "Effect"],
                  [(r["variable"], r["method"], r["effect_hours"]) for r in report["duration"]]),
            table("Ordinal average marginal effects",
                  ["Variable", "Method", "tt=1", "1<tt<=3", "tt>3"],
                  [(r["variable"], r["method"], r["tt1"], r["tt2"], r["tt3"])
                   for r in report["ordinal"]]),
        ]) + "\n"
    if kind == "netmetrics":
        egos = report["egos"]
        headers = list(egos[0]) if egos else ["ego_id", "size"]
        return table("Ego-network metrics", headers,
                     [[e.get(h) for h in headers] for e in egos]) + "\n"
    if kind == "recovery":
        head = (f"Replications: {report['replications']}  n_obs: {report['n_obs']}  "
                f"seed: {report['seed']}  failures: {report['failures']}")
        return head + "\n\n" + table(
            "Parameter recovery",
            ["Parameter", "Truth", "Mean", "Bias", "RMSE", "Emp. SD", "Mean SE", "SD/SE",
             "Coverage"],
            [(r["parameter"], r["truth"], r["mean_estimate"], r["bias"], r["rmse"],
              r["empirical_sd"], r["mean_se"], r["se_ratio"],
              f"{r['coverage']}/{r['n_used']}") for r in report["parameters"]]) + "\n"
    raise ValueError(f"unknown report kind {kind!r}")


def render(report: Mapping, output_format: str) -> str:
    return to_json(report) if output_format == "json" else render_text(report)
