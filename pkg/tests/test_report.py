"""Report generation: aggregate CSV schema and SVG chart output."""

import xml.etree.ElementTree as ET

import pytest

from aha.harness import Row, write_results_csv
from aha.report import write_report


def _demo_rows():
    rows = []
    for task in ("classification", "instance"):
        for kind in ("occlusion", "noise"):
            for level in (0.0, 0.49, 0.98):
                for seed in range(3):
                    for signal, acc in (("ltm", 0.7), ("aha_pr", 0.85),
                                        ("aha_pc", 0.6), ("fastnn", 0.8)):
                        loss = None if signal == "ltm" else 0.01 * (seed + 1)
                        rows.append(Row(task, kind, level, seed, 0, signal,
                                        max(0.0, acc - level / 2), loss))
    return rows


@pytest.fixture()
def results_csv(tmp_path):
    path = tmp_path / "results.csv"
    write_results_csv(_demo_rows(), path)
    return path


class TestWriteReport:
    def test_produces_four_charts_and_aggregates(self, results_csv, tmp_path):
        out = tmp_path / "report"
        written = write_report(results_csv, out)
        names = sorted(p.name for p in written)
        assert "aggregates.csv" in names
        svgs = [n for n in names if n.endswith(".svg")]
        assert len(svgs) == 4
        for task in ("classification", "instance"):
            for kind in ("occlusion", "noise"):
                assert f"accuracy_{task}_{kind}.svg" in svgs

    def test_svgs_are_well_formed_xml(self, results_csv, tmp_path):
        out = tmp_path / "report"
        for path in write_report(results_csv, out):
            if path.suffix == ".svg":
                root = ET.parse(path).getroot()
                assert root.tag.endswith("svg")

    def test_aggregate_row_count(self, results_csv, tmp_path):
        out = tmp_path / "report"
        agg = write_report(results_csv, out)[0]
        lines = agg.read_text().strip().splitlines()
        assert lines[0] == "task,kind,level,signal,mean,std,min,max"
        # 2 tasks x 2 kinds x 3 levels x 4 signals
        assert len(lines) - 1 == 2 * 2 * 3 * 4

    def test_aggregate_values_match_raw_mean(self, results_csv, tmp_path):
        from aha.harness import read_results_csv

        out = tmp_path / "report"
        agg_path = write_report(results_csv, out)[0]
        raw = read_results_csv(results_csv)
        line = [l for l in agg_path.read_text().splitlines()[1:]
                if l.startswith("classification,occlusion,0.0,ltm")][0]
        mean = float(line.split(",")[4])
        vals = [r.accuracy for r in raw
                if (r.task, r.kind, r.level, r.signal)
                == ("classification", "occlusion", 0.0, "ltm")]
        assert mean == pytest.approx(sum(vals) / len(vals), abs=1e-12)

    def test_empty_results_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("task,kind,level,seed,run,signal,accuracy,recall_loss\n")
        with pytest.raises(ValueError, match="no results"):
            write_report(path, tmp_path / "r")
