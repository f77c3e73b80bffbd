import csv
import json
import xml.etree.ElementTree as ET

import pytest

from ksquad import cli


def _run(tmp_path, *extra, name="out"):
    out = tmp_path / name
    status = cli.main(["run", "--suite", "quad", "--out", str(out), *extra])
    return status, out


def test_quad_suite_report(tmp_path, capsys):
    status, out = _run(tmp_path)
    assert status == 0
    report = json.loads((out / "report.json").read_text())
    assert report["suite"] == "quad" and report["seed"] == 42 and report["pass"] is True
    ids = [c["id"] for c in report["checks"]]
    assert ids == sorted(ids)
    for c in report["checks"]:
        assert set(c) == {"id", "paper_tag", "residual", "tolerance", "pass"}
    assert [r["alpha"] for r in report["alpha_sweep"]] == [0.04, 0.02, 0.01]
    assert "expansion_order" in " ".join(ids)
    adj = report["adjudications"]
    assert adj["chart_discrepancy"]["supported"] == "delaunay_form"
    assert adj["ps_normalization"]["constant"] == pytest.approx(0.25)
    printed = capsys.readouterr().out
    assert "PASS  quad.expansion_order" in printed


def test_csv_rows(tmp_path):
    _, out = _run(tmp_path)
    with open(out / "residuals.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["check_id", "point", "parameters", "residual"]
    sweep = [r for r in rows if r["check_id"] == "quad.expansion_remainder"]
    assert [r["point"] for r in sweep] == ["0", "1", "2"]
    assert all("alpha=" in r["parameters"] for r in sweep)
    for r in rows:
        float(r["residual"])


def test_reports_are_deterministic(tmp_path):
    _, a = _run(tmp_path, name="a")
    _, b = _run(tmp_path, name="b")
    for name in ("report.json", "residuals.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_alpha_sweep_option(tmp_path):
    status, out = _run(tmp_path, "--alpha-sweep", "0.08,0.04,0.02")
    report = json.loads((out / "report.json").read_text())
    assert [r["alpha"] for r in report["alpha_sweep"]] == [0.08, 0.04, 0.02]
    assert report["timing"]["alpha_sweep"] == [0.08, 0.04, 0.02]
    assert status in (0, 1)


def test_failing_checks_exit_one(tmp_path):
    status, out = _run(tmp_path, "--tol-scale", "1e-30")
    assert status == 1
    assert json.loads((out / "report.json").read_text())["pass"] is False


@pytest.mark.parametrize("argv", [
    ["run", "--suite", "quad", "--tol-scale", "2"],
    ["run", "--suite", "nope"],
    ["run"],
    ["run", "--suite", "quad", "--alpha-sweep", "a,b"],
    ["run", "--portrait", "--l1", "1"],
    ["portrait", "--l1", "1", "--g2", "1"],
])
def test_usage_errors(tmp_path, argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv + ["--out", str(tmp_path / "x")])
    assert exc.value.code == 2


def test_relax_allows_loosening(tmp_path):
    status, out = _run(tmp_path, "--tol-scale", "2", "--relax")
    assert status == 0
    timing = json.loads((out / "report.json").read_text())["timing"]
    assert timing["tol_scale"] == 2 and timing["relax"] is True


def _assert_svg_with_contours(path):
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")
    paths = [e for e in root.iter() if e.tag.endswith("path")]
    assert len(paths) > 10


def test_portrait_command(tmp_path):
    path = tmp_path / "portrait.svg"
    assert cli.main(["portrait", "--l1", "1.0", "--g2", "1.0", "--c", "1.2",
                     "--out", str(path)]) == 0
    _assert_svg_with_contours(path)
    again = tmp_path / "again.svg"
    cli.main(["portrait", "--l1", "1.0", "--g2", "1.0", "--c", "1.2", "--out", str(again)])
    assert path.read_bytes() == again.read_bytes()


def test_run_portrait_only(tmp_path):
    path = tmp_path / "p.svg"
    assert cli.main(["run", "--portrait", "--l1", "1.0", "--g2", "1.0", "--c", "1.2",
                     "--out", str(path)]) == 0
    _assert_svg_with_contours(path)


def test_portrait_has_interior_extremum():
    # Closed level curves surround a strict local extremum inside the admissible region.
    import numpy as np

    from ksquad.quadrupolar import portrait_grid
    from ksquad.threebody import ThreeBodyMasses

    _, _, vals = portrait_grid(1.0, 1.0, 1.2, ThreeBodyMasses(1, 1, 1), n_g=91, n_x=61)
    found = False
    for i in range(1, vals.shape[0] - 1):
        for j in range(1, vals.shape[1] - 1):
            block = vals[i - 1:i + 2, j - 1:j + 2]
            if not np.isfinite(block).all():
                continue
            others = np.delete(block.ravel(), 4)
            if (block[1, 1] > others).all() or (block[1, 1] < others).all():
                found = True
    assert found


def test_portrait_empty_region_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["portrait", "--l1", "0.1", "--g2", "1.0", "--c", "3.0",
                  "--out", str(tmp_path / "e.svg")])
    assert exc.value.code == 2
