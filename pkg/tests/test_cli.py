"""CLI and study harness: CSV schema, determinism, SVG structure, exit codes."""

import filecmp

import numpy as np
import pytest

from gdfem.cli import (ERROR_COLUMNS, NORM_COLUMNS, StudyReport,
                       default_convergence_levels, default_geom_order,
                       emit_study_csv, fit_slope, main, read_config,
                       read_study_csv, run_convergence, run_diagnostics,
                       run_gradrob, run_locking, run_solve, write_svg)


# -- defaults -----------------------------------------------------------------

def test_default_geometry_orders():
    assert [default_geom_order(p) for p in (1, 2, 3, 4)] == [2, 2, 2, 3]


def test_default_level_ranges():
    assert default_convergence_levels(1) == (1, 2, 3, 4)
    assert default_convergence_levels(2) == (1, 2, 3, 4)
    assert default_convergence_levels(3) == (1, 2, 3)
    assert default_convergence_levels(4) == (1, 2, 3)


def test_fit_slope():
    hs = [0.4, 0.2, 0.1, 0.05]
    errs = [3.0 * h ** 2.5 for h in hs]
    assert abs(fit_slope(hs, errs) - 2.5) <= 1e-12
    # only the last three levels enter the fit
    errs[0] = 100.0
    assert abs(fit_slope(hs, errs) - 2.5) <= 1e-12


def test_report_rejects_nonfinite():
    report = StudyReport("locking")
    with pytest.raises(ValueError):
        report.add(0.5, 2, 1.0, "M3", "errorHdiv", float("nan"))


# -- CSV schema and round trip ------------------------------------------------

@pytest.fixture(scope="module")
def tiny_reports():
    conv, w1 = run_convergence(p_list=(1,), levels=(0, 1), methods=("M3",))
    lock, w2 = run_locking(cs2_list=(1.0, 1000.0), levels=(0, 1),
                           methods=("M3", "M4"))
    rob, w3 = run_gradrob(cs2_list=(1.0, 10.0), levels=(0, 1),
                          methods=("M3",))
    assert not (w1 or w2 or w3)
    return {"convergence": conv, "locking": lock, "gradrob": rob}


def test_csv_headers_and_roundtrip(tmp_path, tiny_reports):
    headers = {
        "convergence": "h,p,errorH1,errorH1pp,errorHdiv,errorDG",
        "locking": "h,cs,errorH1,errorH1pp,errorHdiv,errorDG",
        "gradrob": "h,cs,normH1,normH1pp,normHdiv,normDG",
    }
    for study, report in tiny_reports.items():
        path = tmp_path / f"{study}.csv"
        emit_study_csv(report, path)
        text = path.read_text()
        assert text.splitlines()[0] == headers[study]
        assert "\r" not in text
        parsed = read_study_csv(path)
        assert parsed.rows == StudyReport(study, report.csv_rows()).sort().rows


def test_rows_sorted_and_finite(tiny_reports):
    for report in tiny_reports.values():
        keys = [(r.p, r.cs2, -r.h, r.method, r.metric_name)
                for r in report.rows]
        assert keys == sorted(keys)
        assert all(np.isfinite(r.value) for r in report.rows)


def test_skipped_method_leaves_empty_cell(tmp_path):
    report, warnings = run_convergence(p_list=(1,), levels=(0,),
                                       methods=("M2", "M3"))
    assert not warnings
    emit_study_csv(report, tmp_path / "conv.csv")
    line = (tmp_path / "conv.csv").read_text().splitlines()[1]
    cells = line.split(",")
    assert cells[3] == ""      # errorH1pp: M2 is undefined at p = 1
    assert cells[4] != ""      # errorHdiv present


def test_duplicate_cs2_rows_identical(tmp_path):
    report, _ = run_locking(cs2_list=(1.0, 1.0), levels=(0,),
                            methods=("M3",))
    rows = report.csv_rows()
    assert len(rows) == 2
    assert rows[0].value == rows[1].value


def test_determinism_byte_identical(tmp_path):
    for i in (1, 2):
        d = tmp_path / str(i)
        d.mkdir()
        run_locking(cs2_list=(1.0,), levels=(0, 1), methods=("M3", "M4"),
                    out_path=str(d))
    assert filecmp.cmp(tmp_path / "1" / "locking.csv",
                       tmp_path / "2" / "locking.csv", shallow=False)
    assert filecmp.cmp(tmp_path / "1" / "locking_M3.svg",
                       tmp_path / "2" / "locking_M3.svg", shallow=False)


# -- SVG ----------------------------------------------------------------------

def test_svg_polyline_counts(tmp_path):
    path = tmp_path / "plot.svg"
    series = [("a", [0.5, 0.25, 0.125], [1.0, 0.25, 0.0625]),
              ("b", [0.5, 0.25, 0.125], [2.0, 0.5, 0.125]),
              ("c", [0.5, 0.25], [0.3, 0.1])]
    write_svg(path, series, 2.0, "test", "error")
    text = path.read_text()
    assert text.count("<polyline") == len(series) + 1
    assert text.count("stroke-dasharray") == 2  # reference line + legend key
    assert text.startswith("<svg")
    with pytest.raises(ValueError):
        write_svg(tmp_path / "empty.svg", [("a", [0.5], [0.0])], 1.0, "t", "e")


def test_study_svgs_one_polyline_per_series(tmp_path):
    run_gradrob(cs2_list=(1.0, 10.0), levels=(0, 1), methods=("M3",),
                out_path=str(tmp_path))
    text = (tmp_path / "rob_M3.svg").read_text()
    assert text.count("<polyline") == 2 + 1


# -- config files -------------------------------------------------------------

def test_read_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("p=2\nlevels=1-3  # with comment\nmethods=M3,M4\n\n")
    parsed = read_config(cfg)
    assert parsed == {"p": "2", "levels": "1-3", "methods": "M3,M4"}
    bad = tmp_path / "bad.cfg"
    bad.write_text("just some text\n")
    with pytest.raises(ValueError):
        read_config(bad)


def test_config_flags_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"methods=M1\nlevels=0\nout={tmp_path}\n")
    # flag --methods overrides the config file value
    code = main(["locking", "--config", str(cfg), "--methods", "M3",
                 "--cs2", "1", "--levels", "0"])
    assert code == 0
    text = (tmp_path / "locking.csv").read_text()
    line = text.splitlines()[1].split(",")
    assert line[2] == ""       # M1 column empty: config was overridden
    assert line[4] != ""       # M3 column filled


# -- exit codes ---------------------------------------------------------------

def test_invalid_flags_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["locking", "--methods", "M7", "--levels", "0"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--level", "0"])  # missing --method
    assert exc.value.code == 2


def test_degenerate_flow_rejected():
    """b = 0 makes the streamline form lose definiteness: flag error."""
    with pytest.raises(SystemExit) as exc:
        main(["diagnostics", "--method", "M3", "--level", "0", "--p", "1",
              "--b-scale", "0"])
    assert exc.value.code == 2


def test_solve_subcommand(tmp_path, capsys):
    code = main(["solve", "--method", "M3", "--p", "1", "--level", "1",
                 "--out", str(tmp_path), "--dump-mesh", "--dump-system"])
    assert code == 0
    out = capsys.readouterr().out
    assert "l2_error=" in out
    report = dict(ln.split("=", 1) for ln in
                  (tmp_path / "solve.txt").read_text().splitlines())
    assert report["method"] == "M3"
    assert float(report["l2_error"]) > 0
    assert (tmp_path / "mesh.txt").exists()
    assert (tmp_path / "matrix.txt").exists()


def test_diagnostics_subcommand(capsys):
    code = main(["diagnostics", "--method", "M3", "--level", "1", "--p", "1"])
    assert code == 0
    out = dict(ln.split("=", 1) for ln in
               capsys.readouterr().out.strip().splitlines())
    assert float(out["c_bh"]) > 1.0
    assert 0.0 < float(out["c_hat"]) < 1.0


def test_diagnostics_strong_flow_still_runs():
    """Scaling the flow by 100 violates the smallness assumption; the
    estimate still runs and simply reports the (possibly <= 1) constant."""
    res = run_diagnostics("M3", 0, 1, b_scale=100.0)
    assert np.isfinite(res["c_bh"])


def test_diagnostics_rejects_m2():
    with pytest.raises(ValueError):
        run_diagnostics("M2", 0, 2)


def test_zero_forcing_scaling(tmp_path):
    """Scaling f by zero zeroes every reported norm (linearity)."""
    from gdfem.problems import gradrob_problem
    from gdfem.forms import assemble_method, error_norms
    from gdfem.linalg import solve as lsolve
    from gdfem.mesh import make_unit_disc_mesh
    prob = gradrob_problem(10.0)
    mesh = make_unit_disc_mesh(1, geom_order=2)
    ms = assemble_method("M4", mesh, 3, prob.coeffs,
                         lambda q: 0.0 * prob.f(q))
    u = ms.split(lsolve(ms.system))
    assert error_norms(u, None, prob.coeffs, method="M4")["l2_norm"] <= 1e-12
