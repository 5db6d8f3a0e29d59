import numpy as np
import pytest

from stancekit.corpus import LabeledExample
from stancekit.errors import (
    EmptyDataset,
    ExampleUniverseMismatch,
    UnknownLabel,
    UnlabeledGold,
    UnwritablePath,
)
from stancekit.evaluate import (
    MetricsReport,
    ReportEntry,
    confusion_figure,
    load_report,
    read_confusion_annotations,
    report_table,
    score,
    write_report,
)
from stancekit.predictions import PredictionRow, PredictionSet
from stancekit.tasks import TASK_A, TaskSpec

from oracles import metrics_oracle


def gold_of(labels, split="eval"):
    return [
        LabeledExample(f"x{i}", f"text {i}", l, split) for i, l in enumerate(labels)
    ]


def pred_of(labels, model_key="m", task_id="A", split="eval"):
    rows = [PredictionRow(f"x{i}", l) for i, l in enumerate(labels)]
    return PredictionSet(model_key, task_id, split, rows, {})


class TestScore:
    def test_perfect_predictions(self, task_a):
        labels = ["HATE", "NON-HATE", "HATE", "NON-HATE"]
        report = score(gold_of(labels), pred_of(labels), task_a)
        assert report.macro_f1 == 1.0
        assert np.array_equal(report.confusion, np.array([[2, 0], [0, 2]]))

    def test_hand_worked_fixture(self, task_a):
        gold = gold_of(["HATE", "HATE", "NON-HATE", "NON-HATE"])
        pred = pred_of(["HATE", "NON-HATE", "NON-HATE", "NON-HATE"])
        report = score(gold, pred, task_a)
        assert report.per_class["HATE"]["f1"] == pytest.approx(0.6667, abs=1e-4)
        assert report.per_class["NON-HATE"]["f1"] == pytest.approx(0.8000, abs=1e-4)
        assert report.macro_f1 == pytest.approx(0.7333, abs=1e-4)

    def test_zero_division_convention(self, task_a):
        gold = gold_of(["HATE", "NON-HATE", "NON-HATE"])
        pred = pred_of(["NON-HATE"] * 3)
        report = score(gold, pred, task_a)
        assert report.per_class["NON-HATE"]["f1"] > 0
        assert report.per_class["HATE"]["f1"] == 0.0
        assert "zero_division" in report.metadata

    def test_confusion_counts_and_support(self, task_a):
        gold = gold_of(["HATE", "HATE", "NON-HATE", "NON-HATE", "NON-HATE"])
        pred = pred_of(["HATE", "NON-HATE", "NON-HATE", "HATE", "NON-HATE"])
        report = score(gold, pred, task_a)
        assert report.confusion.sum() == 5
        assert report.confusion.sum(axis=1).tolist() == [3, 2]  # gold rows
        assert report.support == {"NON-HATE": 3, "HATE": 2}

    def test_unlabeled_gold_refused(self, task_a):
        gold = [LabeledExample("x0", "text", None, "test")]
        with pytest.raises(UnlabeledGold):
            score(gold, pred_of(["HATE"]), task_a)

    def test_universe_mismatch_lists_ids(self, task_a):
        gold = gold_of(["HATE", "NON-HATE"])
        pred = PredictionSet(
            "m", "A", "eval",
            [PredictionRow("x0", "HATE"), PredictionRow("zz", "HATE")], {},
        )
        with pytest.raises(ExampleUniverseMismatch) as err:
            score(gold, pred, task_a)
        assert err.value.missing == ["x1"]
        assert err.value.extra == ["zz"]

    def test_empty_gold_refused(self, task_a):
        with pytest.raises(EmptyDataset):
            score([], pred_of([]), task_a)

    def test_foreign_pred_label_rejected(self, task_a):
        with pytest.raises(UnknownLabel):
            score(gold_of(["HATE"]), pred_of(["SUPPORT"]), task_a)

    def test_thousand_randomized_instances_match_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            n_labels = int(rng.integers(2, 6))
            labels = tuple(f"L{i}" for i in range(n_labels))
            task = TaskSpec("A", "synthetic", labels, labels[0])
            n = int(rng.integers(1, 51))
            gold_labels = [labels[i] for i in rng.integers(0, n_labels, n)]
            pred_labels = [labels[i] for i in rng.integers(0, n_labels, n)]
            report = score(gold_of(gold_labels), pred_of(pred_labels), task)
            expected_per_class, expected_macro = metrics_oracle(
                gold_labels, pred_labels, labels
            )
            assert abs(report.macro_f1 - expected_macro) <= 1e-12
            for label in labels:
                p, r, f = expected_per_class[label]
                got = report.per_class[label]
                assert abs(got["precision"] - p) <= 1e-12
                assert abs(got["recall"] - r) <= 1e-12
                assert abs(got["f1"] - f) <= 1e-12

    def test_label_renaming_symmetry(self):
        rng = np.random.default_rng(7)
        labels = ("SUPPORT", "OPPOSE", "NEUTRAL")
        renamed = ("Z9", "Q1", "M5")
        mapping = dict(zip(labels, renamed))
        task = TaskSpec("C", "stance detection", labels, labels[0])
        task2 = TaskSpec("C", "stance detection", renamed, renamed[0])
        for _ in range(50):
            n = int(rng.integers(1, 40))
            gold_labels = [labels[i] for i in rng.integers(0, 3, n)]
            pred_labels = [labels[i] for i in rng.integers(0, 3, n)]
            r1 = score(gold_of(gold_labels), pred_of(pred_labels), task)
            r2 = score(
                gold_of([mapping[l] for l in gold_labels]),
                pred_of([mapping[l] for l in pred_labels]),
                task2,
            )
            assert r1.macro_f1 == r2.macro_f1
            assert sorted(c["f1"] for c in r1.per_class.values()) == sorted(
                c["f1"] for c in r2.per_class.values()
            )

    def test_macro_bounds_and_diagonal_iff_perfect(self):
        rng = np.random.default_rng(8)
        labels = ("A1", "B2")
        task = TaskSpec("A", "synthetic", labels, labels[0])
        for _ in range(100):
            n = int(rng.integers(1, 30))
            gold_labels = [labels[i] for i in rng.integers(0, 2, n)]
            pred_labels = [labels[i] for i in rng.integers(0, 2, n)]
            report = score(gold_of(gold_labels), pred_of(pred_labels), task)
            assert 0.0 <= report.macro_f1 <= 1.0
            diagonal = report.confusion.sum() == np.trace(report.confusion)
            present = {l for l in gold_labels}
            # macro hits 1 exactly when the confusion is diagonal and every
            # label has support (absent labels score f1=0 by convention)
            assert (report.macro_f1 == 1.0) == (diagonal and present == set(labels))

    def test_report_json_round_trip(self, tmp_path, task_a):
        gold = gold_of(["HATE", "HATE", "NON-HATE", "NON-HATE"])
        pred = pred_of(["HATE", "NON-HATE", "NON-HATE", "NON-HATE"])
        report = score(gold, pred, task_a)
        write_report(report, tmp_path / "m.json")
        loaded = load_report(tmp_path / "m.json")
        assert loaded.macro_f1 == report.macro_f1
        assert loaded.per_class == report.per_class
        assert np.array_equal(loaded.confusion, report.confusion)
        assert report.to_dict()["macro_f1_4dp"] == "0.7333"


class TestReportTable:
    def _report(self, macro):
        return MetricsReport(
            task_id="A", labels=TASK_A.label_set, per_class={},
            macro_f1=macro, weighted_f1=macro,
            confusion=np.eye(2, dtype=np.int64), support={},
        )

    def test_two_decimal_rounding(self):
        table = report_table(
            [ReportEntry("model-x", self._report(0.887), self._report(0.853))]
        )
        line = table.splitlines()[1]
        cells = [c.strip() for c in line.split("|")]
        assert cells == ["model-x", "0.89", "0.85"]

    def test_augmented_flag_and_missing_column(self):
        table = report_table(
            [ReportEntry("e2", None, self._report(0.89), augmented=True)]
        )
        assert "e2 (AUG.)" in table
        assert "--" in table

    def test_empty_refused(self):
        with pytest.raises(EmptyDataset):
            report_table([])

    def test_markdown_variant(self):
        table = report_table(
            [ReportEntry("m", self._report(0.5), self._report(0.5))], fmt="markdown"
        )
        assert table.startswith("| Model")
        assert "| ------- |" in table

    def test_half_up_at_boundary(self):
        # 0.885 rounds up to 0.89 under half-up
        table = report_table([ReportEntry("m", self._report(0.885), None)])
        assert "0.89" in table


class TestConfusionFigure:
    def _report(self, matrix, labels=("NON-HATE", "HATE")):
        matrix = np.asarray(matrix, dtype=np.int64)
        return MetricsReport(
            task_id="A", labels=tuple(labels), per_class={},
            macro_f1=0.5, weighted_f1=0.5, confusion=matrix,
            support={l: int(matrix[i].sum()) for i, l in enumerate(labels)},
        )

    def test_render_then_parse_round_trip(self, tmp_path, task_a):
        path = confusion_figure(self._report([[8, 2], [1, 9]]), task_a, tmp_path / "cm.png")
        assert path.is_file()
        matrix, labels = read_confusion_annotations(path)
        assert matrix.tolist() == [[8, 2], [1, 9]]
        assert labels == ["NON-HATE", "HATE"]

    def test_zero_matrix_rejected(self, tmp_path, task_a):
        with pytest.raises(EmptyDataset):
            confusion_figure(self._report([[0, 0], [0, 0]]), task_a, tmp_path / "z.png")

    def test_pixel_stable(self, tmp_path, task_a):
        report = self._report([[5, 1], [2, 7]])
        confusion_figure(report, task_a, tmp_path / "a.png")
        confusion_figure(report, task_a, tmp_path / "b.png")
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()

    def test_relabeling_leaves_cells_unchanged(self, tmp_path, task_a):
        matrix = [[8, 2], [1, 9]]
        confusion_figure(self._report(matrix), task_a, tmp_path / "a.png")
        confusion_figure(
            self._report(matrix, labels=("SAFE", "FLAGGED")), task_a, tmp_path / "b.png"
        )
        cells_a, _ = read_confusion_annotations(tmp_path / "a.png")
        cells_b, _ = read_confusion_annotations(tmp_path / "b.png")
        assert np.array_equal(cells_a, cells_b)

    def test_unwritable_path(self, tmp_path, task_a):
        target = tmp_path / "missing-dir" / "cm.png"
        with pytest.raises(UnwritablePath):
            confusion_figure(self._report([[1, 0], [0, 1]]), task_a, target)
