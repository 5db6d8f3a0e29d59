import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stancekit.corpus import (
    LabeledExample,
    distribution,
    format_distribution_table,
    load_dataset,
    minority_labels,
    write_dataset,
)
from stancekit.errors import (
    DuplicateExampleId,
    EmptyDataset,
    MalformedRow,
    MissingFile,
    UnknownLabel,
    UnlabeledGold,
)
from stancekit.tasks import TASK_A, TASK_B, TASK_C, get_task
from stancekit.errors import UsageError

from conftest import make_examples, write_corpus


class TestTaskSpecs:
    def test_builtin_label_sets(self):
        assert TASK_A.label_set == ("NON-HATE", "HATE")
        assert TASK_B.label_set == ("INDIVIDUAL", "ORGANIZATION", "COMMUNITY")
        assert TASK_C.label_set == ("SUPPORT", "OPPOSE", "NEUTRAL")

    def test_builtin_majorities(self):
        assert TASK_A.majority_label == "NON-HATE"
        assert TASK_B.majority_label == "INDIVIDUAL"
        assert TASK_C.majority_label == "SUPPORT"

    def test_get_task_is_case_insensitive(self):
        assert get_task("a") is TASK_A

    def test_get_task_unknown(self):
        with pytest.raises(UsageError):
            get_task("D")


class TestLabeledExample:
    def test_chain_id_requires_augmented(self):
        with pytest.raises(ValueError):
            LabeledExample("1", "text", "HATE", "train", "original", "xh-tw")
        with pytest.raises(ValueError):
            LabeledExample("1", "text", "HATE", "train", "augmented", None)

    def test_blank_text_rejected(self):
        with pytest.raises(ValueError):
            LabeledExample("1", "   \t ", "HATE", "train")


class TestLoadDataset:
    def test_three_row_readback(self, tmp_path, task_a):
        path = write_corpus(
            tmp_path / "t.csv",
            [("1", "a b", "HATE"), ("2", "c d", "NON-HATE"), ("3", "e f", "NON-HATE")],
        )
        examples = load_dataset(path, task_a, "train")
        assert len(examples) == 3
        counts = {l: sum(e.label == l for e in examples) for l in task_a.label_set}
        assert counts == {"HATE": 1, "NON-HATE": 2}
        assert all(e.origin == "original" for e in examples)

    def test_unknown_label_names_row(self, tmp_path, task_a):
        path = write_corpus(
            tmp_path / "t.csv", [("1", "a", "HATE"), ("2", "b", "MAYBE")]
        )
        with pytest.raises(UnknownLabel) as err:
            load_dataset(path, task_a, "train")
        assert err.value.label == "MAYBE"
        assert err.value.row == 3

    def test_missing_file(self, tmp_path, task_a):
        with pytest.raises(MissingFile):
            load_dataset(tmp_path / "absent.csv", task_a, "train")

    def test_tab_delimiter_autodetected(self, tmp_path, task_a):
        path = write_corpus(
            tmp_path / "t.tsv", [("1", "a, b", "HATE")], delimiter="\t"
        )
        (example,) = load_dataset(path, task_a, "train")
        assert example.text == "a, b"

    def test_duplicate_ids_rejected(self, tmp_path, task_a):
        path = write_corpus(
            tmp_path / "t.csv", [("1", "a", "HATE"), ("1", "b", "HATE")]
        )
        with pytest.raises(DuplicateExampleId):
            load_dataset(path, task_a, "train")

    def test_short_row_rejected_with_row_number(self, tmp_path, task_a):
        (tmp_path / "t.csv").write_text("index,tweet,label\n1,a,HATE\n2,b\n")
        with pytest.raises(MalformedRow) as err:
            load_dataset(tmp_path / "t.csv", task_a, "train")
        assert err.value.row == 3

    def test_blank_text_rejected(self, tmp_path, task_a):
        path = write_corpus(tmp_path / "t.csv", [("1", "  ", "HATE")])
        with pytest.raises(MalformedRow):
            load_dataset(path, task_a, "train")

    def test_label_column_required_outside_test(self, tmp_path, task_a):
        path = write_corpus(tmp_path / "t.csv", [("1", "a")], header=("index", "tweet"))
        with pytest.raises(MalformedRow):
            load_dataset(path, task_a, "train")

    def test_unlabeled_test_split(self, tmp_path, task_a):
        path = write_corpus(tmp_path / "t.csv", [("1", "a")], header=("index", "tweet"))
        (example,) = load_dataset(path, task_a, "test")
        assert example.label is None

    def test_unlabeled_examples_refuse_distribution(self, tmp_path, task_a):
        path = write_corpus(tmp_path / "t.csv", [("1", "a")], header=("index", "tweet"))
        examples = load_dataset(path, task_a, "test")
        with pytest.raises(UnlabeledGold):
            distribution(examples, task_a)

    def test_augmented_columns_round_trip(self, tmp_path, task_a):
        examples = [
            LabeledExample("1", "orig", "HATE", "train"),
            LabeledExample("1~xh-tw", "copy", "HATE", "train", "augmented", "xh-tw"),
        ]
        write_dataset(examples, tmp_path / "aug.csv")
        loaded = load_dataset(tmp_path / "aug.csv", task_a, "train")
        assert loaded == examples


# Text strategy for round-trip checks: unicode including the delimiter,
# quotes and newlines, non-blank after strip. NUL is excluded (a delimited
# text file cannot carry it); \r alone is excluded because the csv layer
# normalizes bare carriage returns.
_texts = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\r\x00"),
    min_size=1,
    max_size=60,
).filter(lambda s: s.strip())


class TestRoundTrip:
    @settings(max_examples=60, deadline=None)
    @given(rows=st.lists(st.tuples(_texts, st.sampled_from(TASK_A.label_set)),
                         min_size=1, max_size=8))
    def test_write_load_byte_identical_fields(self, rows, tmp_path_factory):
        tmp = tmp_path_factory.mktemp("rt")
        examples = [
            LabeledExample(str(i), text, label, "train")
            for i, (text, label) in enumerate(rows)
        ]
        write_dataset(examples, tmp / "x.csv")
        loaded = load_dataset(tmp / "x.csv", TASK_A, "train")
        assert [(e.text, e.label) for e in loaded] == [
            (e.text, e.label) for e in examples
        ]


class TestDistribution:
    def test_simple_80_20(self, task_a):
        examples = make_examples(["NON-HATE"] * 8 + ["HATE"] * 2)
        report = distribution(examples, task_a)
        assert report.percentages["train"] == {"NON-HATE": 80.0, "HATE": 20.0}
        assert report.counts["train"] == {"NON-HATE": 8, "HATE": 2}
        assert report.totals["train"] == 10

    def test_degenerate_single_label(self, task_a):
        report = distribution(make_examples(["HATE"] * 5), task_a)
        assert report.percentages["train"] == {"NON-HATE": 0.0, "HATE": 100.0}

    def test_empty_rejected(self, task_a):
        with pytest.raises(EmptyDataset):
            distribution([], task_a)

    def test_hand_arithmetic_877_123(self, task_a):
        # 877/1000 = 87.7%, 123/1000 = 12.3%
        examples = make_examples(["NON-HATE"] * 877 + ["HATE"] * 123)
        report = distribution(examples, task_a)
        assert report.percentages["train"] == {"NON-HATE": 87.70, "HATE": 12.30}

    def test_half_up_rounding(self, task_a):
        # 5/800 = 0.625% -> 0.63 under half-up (banker's would give 0.62)
        examples = make_examples(["NON-HATE"] * 795 + ["HATE"] * 5)
        report = distribution(examples, task_a)
        assert report.percentages["train"]["HATE"] == 0.63

    def test_multiple_splits(self, task_a):
        examples = make_examples(["HATE", "NON-HATE"], split="train") + make_examples(
            ["NON-HATE"], split="eval", prefix="d"
        )
        report = distribution(examples, task_a)
        assert set(report.totals) == {"train", "eval"}

    @settings(max_examples=100, deadline=None)
    @given(
        counts=st.lists(st.integers(0, 400), min_size=3, max_size=3).filter(
            lambda c: sum(c) > 0
        )
    )
    def test_percentages_sum_to_100(self, counts):
        labels = []
        for label, n in zip(TASK_C.label_set, counts):
            labels.extend([label] * n)
        report = distribution(make_examples(labels), TASK_C)
        assert abs(sum(report.percentages["train"].values()) - 100.0) <= 0.05


class TestMinorityLabels:
    def test_task_a_imbalance(self, task_a):
        examples = make_examples(["NON-HATE"] * 8766 + ["HATE"] * 1234)
        report = distribution(examples, task_a)
        assert report.percentages["train"] == {"NON-HATE": 87.66, "HATE": 12.34}
        assert minority_labels(report, task_a) == ["HATE"]

    def test_task_c_two_minorities(self, task_c):
        examples = make_examples(
            ["SUPPORT"] * 5942 + ["OPPOSE"] * 961 + ["NEUTRAL"] * 3097
        )
        report = distribution(examples, task_c)
        assert report.percentages["train"] == {
            "SUPPORT": 59.42,
            "OPPOSE": 9.61,
            "NEUTRAL": 30.97,
        }
        assert minority_labels(report, task_c) == ["OPPOSE", "NEUTRAL"]

    def test_exact_tie_yields_no_minority(self, task_a):
        examples = make_examples(["NON-HATE"] * 5 + ["HATE"] * 5)
        assert minority_labels(distribution(examples, task_a), task_a) == []

    def test_requires_train_split(self, task_a):
        report = distribution(make_examples(["HATE"], split="eval"), task_a)
        with pytest.raises(ValueError):
            minority_labels(report, task_a)

    @settings(max_examples=100, deadline=None)
    @given(
        counts=st.lists(st.integers(1, 50), min_size=3, max_size=3)
    )
    def test_never_contains_argmax_never_everything(self, counts):
        labels = []
        for label, n in zip(TASK_C.label_set, counts):
            labels.extend([label] * n)
        report = distribution(make_examples(labels), TASK_C)
        minority = minority_labels(report, TASK_C)
        argmax = max(TASK_C.label_set, key=lambda l: report.counts["train"][l])
        assert argmax not in minority
        if len(set(counts)) > 1:
            assert set(minority) != set(TASK_C.label_set)


class TestDistributionTable:
    def test_label_rows_by_split_columns(self, task_a):
        examples = make_examples(["NON-HATE"] * 8 + ["HATE"] * 2) + make_examples(
            ["NON-HATE", "HATE"], split="eval", prefix="d"
        )
        table = format_distribution_table(distribution(examples, task_a), task_a)
        lines = table.strip().splitlines()
        assert lines[0] == "label,train,eval"
        assert lines[1] == "NON-HATE,80.00,50.00"
        assert lines[2] == "HATE,20.00,50.00"
