"""Analysis orchestration and report rendering (text and JSON)."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .counts import CombinedCounts, ModelKind
from .errors import InvalidParameterError
from .gee import gee_score_test, stack
from .homogeneity import (TestKind, TestResult, aic_compare, lr_test, score_test,
                          wald_test)
from .mle import FitResult, fit_constrained, fit_unconstrained
from .model import corr_convert

__all__ = ["AnalysisReport", "analyze", "report_json", "render_report",
           "sim_summary_json", "render_sim_table"]

SCHEMA = "pairtest/1"

ALL_TEST_KINDS = (TestKind.LR, TestKind.WALD, TestKind.SCORE, TestKind.GEE_SCORE)


@dataclass(frozen=True)
class AnalysisReport:
    """Everything one analysis run produced."""

    data: CombinedCounts
    requested_model: str
    model: ModelKind
    delta_aic: float
    aic: dict
    constrained: FitResult
    unconstrained: FitResult
    tests: tuple[TestResult, ...]
    alpha: float

    def rho_of(self, fit: FitResult) -> list[float]:
        """Correlation-scale nuisance value per group for a fit."""
        if self.model is ModelKind.DONNER:
            return [fit.params.kappa] * fit.params.g
        return [corr_convert(p, fit.params.kappa, ModelKind.ROSNER)
                for p in fit.params.pis]


def _parse_tests(tests) -> tuple[TestKind, ...]:
    if tests is None:
        return ALL_TEST_KINDS
    parsed = []
    for t in tests:
        if isinstance(t, TestKind):
            parsed.append(t)
            continue
        try:
            parsed.append(TestKind(str(t).strip().lower()))
        except ValueError:
            raise InvalidParameterError(
                f"unknown test {t!r}; expected lr, wald, score or gee") from None
    if not parsed:
        raise InvalidParameterError("at least one test must be requested")
    return tuple(dict.fromkeys(parsed))


def analyze(data: CombinedCounts, model: str | ModelKind = "auto",
            tests=None, alpha: float = 0.05) -> AnalysisReport:
    """Fit the requested (or AIC-selected) model and run the tests."""
    if not (0.0 < alpha <= 1.0):
        raise InvalidParameterError(f"alpha={alpha} must lie in (0, 1]")
    test_kinds = _parse_tests(tests)
    requested = model.value if isinstance(model, ModelKind) else str(model).strip().lower()
    comparison = aic_compare(data)
    if requested == "auto":
        kind = comparison.preferred
    else:
        kind = ModelKind.parse(requested)
    unconstrained = comparison.fits[kind]
    constrained = fit_constrained(data, kind)

    results = []
    for tk in test_kinds:
        if tk is TestKind.LR:
            results.append(lr_test(data, kind, fits=(constrained, unconstrained)))
        elif tk is TestKind.WALD:
            results.append(wald_test(data, kind, fit=unconstrained))
        elif tk is TestKind.SCORE:
            results.append(score_test(data, kind, fit=constrained))
        else:
            results.append(gee_score_test(stack(data)))
    return AnalysisReport(
        data=data, requested_model=requested, model=kind,
        delta_aic=comparison.delta_aic,
        aic={k.value: v for k, v in comparison.aic.items()},
        constrained=constrained, unconstrained=unconstrained,
        tests=tuple(results), alpha=alpha)


def _fit_dict(report: AnalysisReport, fit: FitResult, constrained: bool) -> dict:
    kappa_key = "R" if report.model is ModelKind.ROSNER else "rho"
    d = {
        "pi": [fit.params.pis[0]] if constrained else list(fit.params.pis),
        kappa_key: fit.params.kappa,
        "rho": report.rho_of(fit)[0] if constrained else report.rho_of(fit),
        "loglik": fit.loglik,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "gradient_norm": fit.gradient_norm,
        "at_boundary": fit.at_boundary,
    }
    return d


def report_json(report: AnalysisReport) -> dict:
    """JSON-ready dict with the versioned schema field."""
    return {
        "schema": SCHEMA,
        "command": "analyze",
        "alpha": report.alpha,
        "groups": list(report.data.labels),
        "counts": {
            "bilateral": [[gc.m0, gc.m1, gc.m2] for gc in report.data.groups],
            "unilateral": [[gc.n0, gc.n1] for gc in report.data.groups],
        },
        "model": {
            "requested": report.requested_model,
            "used": report.model.value,
            "delta_aic": report.delta_aic,
            "aic": report.aic,
        },
        "fits": {
            "constrained": _fit_dict(report, report.constrained, True),
            "unconstrained": _fit_dict(report, report.unconstrained, False),
        },
        "tests": [
            {
                "kind": t.kind.value,
                "statistic": t.statistic,
                "df": t.df,
                "p_value": t.p_value,
                "reject": t.p_value <= report.alpha,
            }
            for t in report.tests
        ],
    }


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def render_report(report: AnalysisReport) -> str:
    """Aligned text report; numbers shown at 4 decimals."""
    lines = []
    kind = report.model
    kappa_name = "R" if kind is ModelKind.ROSNER else "rho"
    lines.append(f"Model: {kind.label} (requested: {report.requested_model})")
    lines.append(f"AIC: Rosner {_fmt(report.aic['rosner'])}, "
                 f"Donner {_fmt(report.aic['donner'])}, "
                 f"delta {_fmt(report.delta_aic)} "
                 f"(prefers {'Rosner' if report.delta_aic <= 0 else 'Donner'})")
    lines.append("")

    width = max(len(l) for l in report.data.labels)
    width = max(width, len("group"))
    con, unc = report.constrained, report.unconstrained
    lines.append("Constrained MLEs (common proportion)")
    lines.append(f"  pi0   {_fmt(con.params.pis[0])}")
    lines.append(f"  {kappa_name + '0':<5} {_fmt(con.params.kappa)}")
    if kind is ModelKind.ROSNER:
        lines.append(f"  rho0  {_fmt(report.rho_of(con)[0])}")
    lines.append("")
    lines.append("Unconstrained MLEs")
    lines.append(f"  {'group':<{width}}  {'pi_hat':>8}  {'rho_hat':>8}")
    for label, pi, rho in zip(report.data.labels, unc.params.pis, report.rho_of(unc)):
        lines.append(f"  {label:<{width}}  {_fmt(pi):>8}  {_fmt(rho):>8}")
    lines.append(f"  {kappa_name} = {_fmt(unc.params.kappa)}")
    lines.append("")

    df = report.data.g - 1
    lines.append(f"Tests (alpha = {report.alpha:g}, df = {df})")
    lines.append(f"  {'test':<10}  {'statistic':>10}  {'p-value':>8}  decision")
    for t in report.tests:
        decision = "reject H0" if t.p_value <= report.alpha else "fail to reject H0"
        lines.append(f"  {t.kind.label:<10}  {_fmt(t.statistic):>10}  "
                     f"{_fmt(t.p_value):>8}  {decision}")
    return "\n".join(lines) + "\n"


def sim_summary_json(summary, mode: str | None = None) -> dict:
    """JSON-ready dict for a simulation summary (deterministic layout)."""
    config = summary.config
    cfg = {
        "kind": config.kind.value,
        "m_plus": list(config.m_plus),
        "n_plus": list(config.n_plus),
        "pis": list(config.pis),
        "rho0": config.rho0,
        "kappa0": config.kappa0,
        "replicates": config.replicates,
        "alpha": config.alpha,
        "seed": config.seed,
        "tests": [t.value for t in config.tests],
    }
    results = {
        t.value: {
            "rejection_rate": r.rejection_rate,
            "rejection_count": r.rejection_count,
            "replicates_used": r.replicates_used,
            "failures": r.failures,
            "mc_std_err": r.mc_std_err,
        }
        for t, r in summary.results.items()
    }
    out = {
        "schema": SCHEMA,
        "command": "simulate",
        "config": cfg,
        "critical_value": summary.critical_value,
        "results": results,
    }
    if mode is not None:
        out["mode"] = mode
    return out


def dumps_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def render_sim_table(summary, design_label: str = "", pi_label: str = "",
                     kappa_label: str = "") -> str:
    """One-row rate table mirroring the simulation result layout (rates in %)."""
    config = summary.config
    if not design_label:
        design_label = "x".join(str(v) for v in config.m_plus)
    if not pi_label:
        unique = sorted(set(config.pis))
        pi_label = f"{unique[0]:g}" if len(unique) == 1 else "mixed"
    if not kappa_label:
        kappa_label = (f"rho={config.rho0:g}" if config.rho0 is not None
                       else f"{config.kind.kappa_name}={config.kappa0:g}")
    headers = ["design", "pi", "corr"]
    values = [design_label, pi_label, kappa_label]
    for t, r in summary.results.items():
        headers.append(f"Q_{t.label.replace(' ', '_')}(%)")
        values.append(f"{100.0 * r.rejection_rate:.2f}")
    headers += ["replicates", "failures"]
    any_result = next(iter(summary.results.values()))
    values += [str(config.replicates),
               str(max(r.failures for r in summary.results.values()))]
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    head = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    body = "  ".join(v.ljust(w) for v, w in zip(values, widths))
    return head + "\n" + body + "\n"
