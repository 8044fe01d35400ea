"""Convergence-study driver, rate bookkeeping, and the four emitters."""

import math
import os

import pytest

from cbcfd import report as rpt
from cbcfd import solver1d
from cbcfd.linalg import SolverError
from cbcfd.report import (
    ConfigError,
    ConvergenceReport,
    ReportRow,
    RunConfig,
    emit_all,
    emit_csv,
    emit_loglog_data,
    emit_markdown,
    parse_csv,
    parse_dt_rule,
    render_figure,
    resolve_problem,
    run_study,
)


def _tiny_config(**kw):
    base = dict(problem="example1", scheme="cbcfd", grids=(8, 16), T=1.0)
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def tiny_study():
    return run_study(_tiny_config())


# ----------------------------------------------------------------- dt rule


def test_parse_dt_rule_forms():
    assert parse_dt_rule("h^2") == (1.0, 2.0)
    assert parse_dt_rule("0.5*h") == (0.5, 1.0)
    assert parse_dt_rule("h") == (1.0, 1.0)
    assert parse_dt_rule("0.25*h^1.5") == (0.25, 1.5)
    assert parse_dt_rule("  h^2 ") == (1.0, 2.0)


def test_parse_dt_rule_rejects_garbage():
    for bad in ("", "2h", "h2", "h^", "dt=h", "c*h^q"):
        with pytest.raises(ConfigError) as exc:
            parse_dt_rule(bad)
        assert exc.value.field_name == "dt_rule"


def test_snapped_dt_is_integer_steps():
    config = _tiny_config(grids=(7, 14), T=1.0)
    h = 1.0 / 7
    dt = rpt._snapped_dt(config, h)
    n = config.T / dt
    assert abs(n - round(n)) < 1e-12
    assert dt == pytest.approx(1.0 / 49, rel=1e-12)


# ------------------------------------------------------------- validation


def test_config_errors_name_fields():
    cases = [
        (dict(scheme="upwind"), "scheme"),
        (dict(grids=(16, 8)), "grids"),
        (dict(grids=()), "grids"),
        (dict(grids=(3, 8)), "grids"),
        (dict(dt_power=0.0), "dt_power"),
        (dict(dt_coeff=-1.0), "dt_coeff"),
        (dict(T=0.0), "T"),
        (dict(forcing="imagined"), "forcing"),
    ]
    for kw, field in cases:
        with pytest.raises(ConfigError) as exc:
            _tiny_config(**kw).validate()
        assert exc.value.field_name == field, f"{kw} should blame {field}"


def test_resolve_unknown_problem():
    with pytest.raises(ConfigError) as exc:
        resolve_problem("example99")
    assert exc.value.field_name == "problem"


def test_resolve_custom_problem_file(tmp_path):
    path = tmp_path / "myprob.py"
    path.write_text(
        "from cbcfd.mms import example1\n"
        "def build(forcing):\n"
        "    return example1(forcing)\n"
    )
    prob = resolve_problem(str(path))
    assert prob.name == "example1"


# ------------------------------------------------------------------ rates


def test_rate_formula_frozen():
    # the published pair 4.52e-4 -> 2.82e-5 over one halving gives ~4.0026
    r = math.log(4.52e-4 / 2.82e-5) / math.log(2.0)
    assert abs(r - 4.0026) < 1e-3


def test_study_rates_match_hand_formula(tiny_study):
    (report,) = tiny_study
    assert report.scheme == "cbcfd"
    assert len(report.rows) == 2
    first, second = report.rows
    assert first.rate_p is None and first.rate_u is None
    want = math.log(first.err_p / second.err_p) / math.log(first.h / second.h)
    assert second.rate_p == pytest.approx(want, rel=1e-12)


def test_single_grid_has_no_rate():
    (report,) = run_study(_tiny_config(grids=(8,)))
    assert len(report.rows) == 1
    assert report.rows[0].rate_p is None


# --------------------------------------------------------------- emitters


def test_csv_round_trip_exact(tiny_study, tmp_path):
    path = tmp_path / "results.csv"
    emit_csv(tiny_study, path)
    back = parse_csv(path)
    assert len(back) == 1
    for orig, parsed in zip(tiny_study[0].rows, back[0].rows):
        assert parsed.n == orig.n
        assert parsed.h == orig.h  # exact float round trip via repr-precision
        assert parsed.err_p == orig.err_p
        assert parsed.err_u == orig.err_u
        assert parsed.rate_p == orig.rate_p


def test_csv_empty_report_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv(ConvergenceReport(scheme="cbcfd"), path)
    assert path.read_text().strip() == rpt.CSV_HEADER


def test_parse_csv_rejects_foreign_file(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        parse_csv(path)


def test_emitted_csv_deterministic_modulo_timing(tmp_path):
    config = _tiny_config()
    a = run_study(config)
    b = run_study(config)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(a, pa)
    emit_csv(b, pb)

    def strip_seconds(text):
        return "\n".join(",".join(ln.split(",")[:-1]) for ln in text.splitlines())

    assert strip_seconds(pa.read_text()) == strip_seconds(pb.read_text())


def test_markdown_contains_rows(tiny_study, tmp_path):
    path = tmp_path / "results.md"
    emit_markdown(tiny_study, path)
    text = path.read_text()
    assert "cbcfd" in text
    assert "| 8" in text or "| 8 " in text.replace("|8", "| 8")
    assert format(tiny_study[0].rows[0].err_p, ".6e") in text


def test_loglog_structure_and_anchor(tiny_study, tmp_path):
    path = tmp_path / "loglog.dat"
    emit_loglog_data(tiny_study, path)
    text = path.read_text()
    assert "# block: scheme=cbcfd field=err_p" in text
    assert "# block: scheme=cbcfd field=err_u" in text
    assert "# block: reference slope=4" in text
    assert "# least-squares slope cbcfd err_p:" in text

    # the slope-4 reference must pass through the finest pressure point
    blocks = {}
    current = None
    for ln in text.splitlines():
        if ln.startswith("# block:"):
            current = ln[len("# block: "):]
            blocks[current] = []
        elif ln and not ln.startswith("#") and current:
            lh, le = map(float, ln.split())
            blocks[current].append((lh, le))
    press = blocks["scheme=cbcfd field=err_p"]
    finest = min(press, key=lambda p: p[0])
    ref = blocks["reference slope=4"]
    # interpolate the reference line at the anchor abscissa
    (x0, y0), (x1, y1) = ref
    y_at = y0 + (y1 - y0) * (finest[0] - x0) / (x1 - x0)
    assert abs(y_at - finest[1]) < 1e-8
    # and its slope is exactly 4
    assert abs((y1 - y0) / (x1 - x0) - 4.0) < 1e-9


def test_figure_is_valid_png(tiny_study, tmp_path):
    path = tmp_path / "convergence.png"
    render_figure(tiny_study, path)
    data = path.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(data) > 5000


def test_emit_all_writes_four_artifacts(tiny_study, tmp_path):
    out = tmp_path / "out"
    paths = emit_all(tiny_study, str(out))
    assert sorted(paths) == ["csv", "figure", "loglog", "markdown"]
    for p in paths.values():
        assert os.path.exists(p)
        assert os.path.getsize(p) > 0


# --------------------------------------------------------------- failures


def test_failures_recorded_and_rates_reset(monkeypatch):
    real_run = solver1d.run

    def flaky(spec, M, dt, scheme="cbcfd", debug_history=False):
        if M == 16:
            raise SolverError("singular pivot at index 5")
        return real_run(spec, M, dt, scheme=scheme, debug_history=debug_history)

    monkeypatch.setattr(solver1d, "run", flaky)
    (report,) = run_study(_tiny_config(grids=(8, 16, 32)))
    assert [r.n for r in report.rows] == [8, 32]
    assert len(report.failures) == 1
    assert report.failures[0][0] == 16
    assert "singular pivot" in report.failures[0][1]
    # the 32 row follows a failure, so it must not claim a rate vs n=8
    assert report.rows[1].rate_p is None


def test_markdown_reports_failures(monkeypatch, tmp_path):
    def always_fail(spec, M, dt, scheme="cbcfd", debug_history=False):
        raise SolverError("singular pivot at index 0")

    monkeypatch.setattr(solver1d, "run", always_fail)
    (report,) = run_study(_tiny_config(grids=(8,)))
    path = tmp_path / "failed.md"
    emit_markdown(report, path)
    assert "singular pivot" in path.read_text()
