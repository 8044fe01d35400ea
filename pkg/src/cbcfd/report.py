"""Grid-refinement studies: run, rate, and emit tables / plot data.

A study runs one solver per (scheme, grid) pair, collects final-time errors,
and computes observed orders from consecutive rows:
``rate = ln(err_prev / err_cur) / ln(h_prev / h_cur)``, first row empty.
Emitters write a CSV (exact round-trip floats), a markdown table, a
plain-text log-log file with reference slopes for any plotting tool, and a
rendered figure.  Per-grid runs are independent and execute on a thread
pool; assembly order is by grid, so output is deterministic regardless of
completion order.
"""

from __future__ import annotations

import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import solver1d, solver2d
from .mms import CATALOG, FORCING_DERIVED, FORCING_PRINTED, MmsProblem

CSV_HEADER = "scheme,n,h,dt,err_p,rate_p,err_u,rate_u,seconds"


class ConfigError(ValueError):
    """Invalid run configuration; carries the offending field's name."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass(frozen=True)
class RunConfig:
    """Study configuration.  Defaults (also the CLI defaults):

    problem   example1        catalog id or path to a .py file defining build(forcing)
    scheme    both            cbcfd | bcfd | both
    grids     (20, 40, 80)    strictly increasing cell counts (2D: per axis)
    dt_coeff  1.0             dt = dt_coeff * h**dt_power, snapped so T/dt is whole
    dt_power  2.0
    T         1.0             final time
    forcing   derived         derived | printed
    out_dir   .               where emitters write
    """

    problem: str = "example1"
    scheme: str = "both"
    grids: tuple = (20, 40, 80)
    dt_coeff: float = 1.0
    dt_power: float = 2.0
    T: float = 1.0
    forcing: str = FORCING_DERIVED
    out_dir: str = "."

    def validate(self):
        if self.scheme not in ("cbcfd", "bcfd", "both"):
            raise ConfigError("scheme", f"must be cbcfd, bcfd or both, got {self.scheme!r}")
        if not self.grids:
            raise ConfigError("grids", "at least one grid is required")
        if any(int(g) != g or g < 4 for g in self.grids):
            raise ConfigError("grids", "grid sizes must be integers >= 4")
        if any(b <= a for a, b in zip(self.grids, self.grids[1:])):
            raise ConfigError("grids", f"grid list must be strictly increasing, got {self.grids}")
        if self.dt_power <= 0:
            raise ConfigError("dt_power", "the exponent in dt = c*h^q must be positive")
        if self.dt_coeff <= 0:
            raise ConfigError("dt_coeff", "the coefficient in dt = c*h^q must be positive")
        if self.T <= 0:
            raise ConfigError("T", "final time must be positive")
        if self.forcing not in (FORCING_DERIVED, FORCING_PRINTED):
            raise ConfigError("forcing", f"must be derived or printed, got {self.forcing!r}")

    @property
    def schemes(self):
        return ("cbcfd", "bcfd") if self.scheme == "both" else (self.scheme,)


_DT_RULE = re.compile(r"^(?:([0-9.eE+-]+)\s*\*\s*)?h(?:\^([0-9.eE+-]+))?$")


def parse_dt_rule(text):
    """Parse a time-step rule like ``h^2``, ``0.5*h``, ``0.25*h^1.5`` into
    (coefficient, exponent)."""
    m = _DT_RULE.match(text.strip())
    if not m:
        raise ConfigError("dt_rule", f"cannot parse {text!r}; expected the form [c*]h[^q]")
    c = float(m.group(1)) if m.group(1) else 1.0
    q = float(m.group(2)) if m.group(2) else 1.0
    return c, q


@dataclass(frozen=True)
class ReportRow:
    n: int
    h: float
    dt: float
    err_p: float
    rate_p: float  # None on the first (or post-failure) row
    err_u: float
    rate_u: float
    seconds: float


@dataclass
class ConvergenceReport:
    scheme: str
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # (grid, message)


def resolve_problem(problem_id, forcing=FORCING_DERIVED) -> MmsProblem:
    """Catalog id, or path to a .py file defining ``build(forcing) -> MmsProblem``."""
    if problem_id in CATALOG:
        return CATALOG[problem_id](forcing=forcing)
    if problem_id.endswith(".py") and os.path.exists(problem_id):
        namespace = {}
        with open(problem_id, encoding="utf-8") as fh:
            code = fh.read()
        exec(compile(code, problem_id, "exec"), namespace)
        builder = namespace.get("build")
        if builder is None:
            raise ConfigError("problem", f"{problem_id} does not define build(forcing)")
        problem = builder(forcing)
        if not isinstance(problem, MmsProblem):
            raise ConfigError("problem", f"build(forcing) in {problem_id} did not return a problem")
        return problem
    raise ConfigError(
        "problem", f"unknown problem {problem_id!r}; expected one of {sorted(CATALOG)} or a .py path"
    )


def _snapped_dt(config, h):
    """dt = c*h^q, snapped so the horizon is a whole number of steps."""
    raw = config.dt_coeff * h**config.dt_power
    n_steps = max(1, round(config.T / raw))
    return config.T / n_steps


def _run_single(problem, config, scheme, n):
    spec = replace(problem.spec, T=config.T)
    if problem.ndim == 1:
        h = spec.L / n
        dt = _snapped_dt(config, h)
        t0 = time.perf_counter()
        _, rep = solver1d.run(spec, n, dt, scheme=scheme)
        seconds = time.perf_counter() - t0
    else:
        h = spec.L1 / n
        dt = _snapped_dt(config, h)
        t0 = time.perf_counter()
        _, rep = solver2d.run_2d(spec, n, n, dt, scheme=scheme)
        seconds = time.perf_counter() - t0
    return h, dt, rep, seconds


def run_study(config: RunConfig):
    """Execute the study; one report per scheme, rows ordered by grid.

    A failing grid is recorded on its report and the study continues; rates
    are only formed between consecutively successful rows.
    """
    config.validate()
    problem = resolve_problem(config.problem, config.forcing)
    tasks = [(scheme, n) for scheme in config.schemes for n in config.grids]
    workers = max(1, min(len(tasks), os.cpu_count() or 1))
    results = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {
            key: pool.submit(_run_single, problem, config, key[0], key[1]) for key in tasks
        }
        for key, fut in futures.items():
            try:
                results[key] = fut.result()
            except Exception as exc:
                results[key] = exc
    reports = []
    for scheme in config.schemes:
        report = ConvergenceReport(scheme=scheme)
        prev = None  # (h, err_p, err_u) of the last successful grid
        for n in config.grids:
            outcome = results[(scheme, n)]
            if isinstance(outcome, Exception):
                report.failures.append((n, f"{type(outcome).__name__}: {outcome}"))
                prev = None
                continue
            h, dt, rep, seconds = outcome
            rate_p = rate_u = None
            if prev is not None:
                h_prev, ep_prev, eu_prev = prev
                denom = math.log(h_prev / h)
                if ep_prev > 0 and rep.err_p > 0:
                    rate_p = math.log(ep_prev / rep.err_p) / denom
                if eu_prev > 0 and rep.err_u > 0:
                    rate_u = math.log(eu_prev / rep.err_u) / denom
            report.rows.append(
                ReportRow(n=n, h=h, dt=dt, err_p=rep.err_p, rate_p=rate_p,
                          err_u=rep.err_u, rate_u=rate_u, seconds=seconds)
            )
            prev = (h, rep.err_p, rep.err_u)
        reports.append(report)
    return reports


def _as_report_list(report_or_reports):
    if isinstance(report_or_reports, ConvergenceReport):
        return [report_or_reports]
    return list(report_or_reports)


def _fmt(x):
    return "" if x is None else format(x, ".17e")


def emit_csv(report_or_reports, path):
    """Exact-round-trip CSV; columns fixed, rates empty on first rows."""
    reports = _as_report_list(report_or_reports)
    lines = [CSV_HEADER]
    for report in reports:
        for r in report.rows:
            lines.append(
                ",".join(
                    [report.scheme, str(r.n), _fmt(r.h), _fmt(r.dt), _fmt(r.err_p),
                     _fmt(r.rate_p), _fmt(r.err_u), _fmt(r.rate_u), _fmt(r.seconds)]
                )
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_csv(path):
    """Read back an emitted CSV into per-scheme reports (exact floats)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path} is not a study CSV (bad header)")
    reports = {}
    for ln in lines[1:]:
        parts = ln.split(",")
        scheme = parts[0]
        opt = lambda scalar: None if scalar == "" else float(scalar)
        row = ReportRow(
            n=int(parts[1]), h=float(parts[2]), dt=float(parts[3]),
            err_p=float(parts[4]), rate_p=opt(parts[5]),
            err_u=float(parts[6]), rate_u=opt(parts[7]), seconds=float(parts[8]),
        )
        reports.setdefault(scheme, ConvergenceReport(scheme=scheme)).rows.append(row)
    return list(reports.values())


def emit_markdown(report_or_reports, path):
    """Human-readable tables, one per scheme, mirroring the classic
    error/rate layout."""
    reports = _as_report_list(report_or_reports)
    lines = []
    for report in reports:
        lines.append(f"## {report.scheme}")
        lines.append("")
        lines.append("| n | h | dt | err_p | rate_p | err_u | rate_u |")
        lines.append("|---|---|----|-------|--------|-------|--------|")
        for r in report.rows:
            rp = "" if r.rate_p is None else f"{r.rate_p:.4f}"
            ru = "" if r.rate_u is None else f"{r.rate_u:.4f}"
            lines.append(
                f"| {r.n} | {r.h:.6e} | {r.dt:.6e} | {r.err_p:.6e} | {rp} | {r.err_u:.6e} | {ru} |"
            )
        for n, message in report.failures:
            lines.append(f"| {n} | — | — | failed: {message} | | | |")
        lines.append("")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _least_squares_slope(points):
    if len(points) < 2:
        return None
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    return float(np.polyfit(xs, ys, 1)[0])


def _loglog_points(report, which):
    pts = []
    for r in report.rows:
        err = r.err_p if which == "err_p" else r.err_u
        if err > 0:
            pts.append((math.log10(r.h), math.log10(err)))
    return pts


def _reference_anchor(reports, preferred_scheme):
    """Finest pressure point of the preferred scheme, else of any scheme."""
    for want_preferred in (True, False):
        for report in reports:
            if want_preferred and report.scheme != preferred_scheme:
                continue
            pts = _loglog_points(report, "err_p")
            if pts:
                return min(pts, key=lambda p: p[0])  # smallest h
    return None


def emit_loglog_data(report_or_reports, path):
    """Plot-ready blocks of (log10 h, log10 err) per scheme and field, plus
    order-2 and order-4 reference lines; anchors and least-squares slopes
    are stated in the header."""
    reports = _as_report_list(report_or_reports)
    lines = [
        "# log-log convergence data",
        "# columns: log10(h)  log10(err)",
        "# reference lines: slope 4 anchored at the finest-grid cbcfd pressure point,",
        "#   slope 2 at the finest-grid bcfd pressure point (falling back to whichever",
        "#   scheme is present when one of them is absent)",
    ]
    for report in reports:
        for which in ("err_p", "err_u"):
            slope = _least_squares_slope(_loglog_points(report, which))
            if slope is not None:
                lines.append(f"# least-squares slope {report.scheme} {which}: {slope:.4f}")
    all_logh = [
        p[0] for report in reports for which in ("err_p", "err_u")
        for p in _loglog_points(report, which)
    ]
    for report in reports:
        for which in ("err_p", "err_u"):
            pts = _loglog_points(report, which)
            if not pts:
                continue
            lines.append("")
            lines.append(f"# block: scheme={report.scheme} field={which}")
            for lh, le in pts:
                lines.append(f"{lh:.10f} {le:.10f}")
    if all_logh:
        span = (min(all_logh), max(all_logh))
        for order, preferred in ((4, "cbcfd"), (2, "bcfd")):
            anchor = _reference_anchor(reports, preferred)
            if anchor is None:
                continue
            lines.append("")
            lines.append(f"# block: reference slope={order}")
            for lh in span:
                lines.append(f"{lh:.10f} {anchor[1] + order * (lh - anchor[0]):.10f}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def render_figure(report_or_reports, path):
    """Log-log error plot (pressure solid, velocity dashed) with reference
    slopes, rendered to an image file."""
    reports = _as_report_list(report_or_reports)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    colors = {"cbcfd": "tab:blue", "bcfd": "tab:orange"}
    for report in reports:
        hs = [r.h for r in report.rows]
        if not hs:
            continue
        color = colors.get(report.scheme, "tab:green")
        ax.loglog(hs, [r.err_p for r in report.rows], "o-", color=color,
                  label=f"{report.scheme} pressure")
        ax.loglog(hs, [r.err_u for r in report.rows], "s--", color=color, alpha=0.7,
                  label=f"{report.scheme} velocity")
    all_h = [r.h for report in reports for r in report.rows]
    if all_h:
        h_lo, h_hi = min(all_h), max(all_h)
        for order, preferred, style in ((4, "cbcfd", ":"), (2, "bcfd", "-.")):
            anchor = _reference_anchor(reports, preferred)
            if anchor is None:
                continue
            h_anchor, e_anchor = 10 ** anchor[0], 10 ** anchor[1]
            ax.loglog([h_lo, h_hi],
                      [e_anchor * (h_lo / h_anchor) ** order, e_anchor * (h_hi / h_anchor) ** order],
                      style, color="gray", label=f"order {order}")
    ax.set_xlabel("h")
    ax.set_ylabel("discrete L2 error")
    ax.grid(True, which="both", alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def emit_all(reports, out_dir):
    """Write the four standard artifacts into out_dir; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "csv": os.path.join(out_dir, "results.csv"),
        "markdown": os.path.join(out_dir, "results.md"),
        "loglog": os.path.join(out_dir, "loglog.dat"),
        "figure": os.path.join(out_dir, "convergence.png"),
    }
    emit_csv(reports, paths["csv"])
    emit_markdown(reports, paths["markdown"])
    emit_loglog_data(reports, paths["loglog"])
    render_figure(reports, paths["figure"])
    return paths
