import pytest
from hypothesis import given, strategies as st

from pprl.records import (
    Dataset,
    FieldGroupSpec,
    Record,
    dedup_key,
    deduplicate,
    load_csv,
    normalize_text,
    preprocess,
    preprocess_dataset,
    save_csv,
)


class TestNormalizeText:
    def test_lowercases_and_strips_punctuation(self):
        assert normalize_text("O'Brien, JR.") == "obrien jr"

    def test_collapses_whitespace_runs(self):
        assert normalize_text("  123   Main\t St  ") == "123 main st"

    def test_keeps_digits(self):
        assert normalize_text("Apt #4-B") == "apt 4b"

    def test_empty(self):
        assert normalize_text("") == ""
        assert normalize_text("  ,,, !!") == ""

    @given(st.text(max_size=80))
    def test_idempotent(self, s):
        once = normalize_text(s)
        assert normalize_text(once) == once

    @given(st.text(max_size=80))
    def test_output_alphabet(self, s):
        out = normalize_text(s)
        assert all(ch.isalnum() or ch == " " for ch in out)
        assert "  " not in out
        assert out == out.strip()


class TestPreprocess:
    def test_drops_unused_and_fills_missing(self, small_specs):
        rec = Record(id="x", fields={"first": "Ann", "ssn": "123-45-6789"})
        out = preprocess(rec, small_specs)
        assert set(out.fields) == {"first", "last", "city"}
        assert out.fields["first"] == "ann"
        assert out.fields["last"] == ""
        assert "ssn" not in out.fields

    def test_preserves_id(self, small_specs):
        rec = Record(id="keep-me", fields={})
        assert preprocess(rec, small_specs).id == "keep-me"


class TestDeduplicate:
    def test_first_survivor_wins(self, small_specs):
        ds = Dataset(
            [
                Record(id="a", fields={"first": "Ann", "last": "Lee", "city": "x"}),
                Record(id="b", fields={"first": "ANN", "last": "lee!", "city": "X"}),
                Record(id="c", fields={"first": "Bob", "last": "Lee", "city": "x"}),
            ]
        )
        out = deduplicate(ds, small_specs)
        assert [r.id for r in out] == ["a", "c"]

    def test_key_is_concatenation_in_spec_order(self, small_specs):
        rec = Record(id="a", fields={"first": "An n", "last": "Lee", "city": "Rome"})
        assert dedup_key(rec, small_specs) == "an nleerome"

    def test_differing_unused_fields_still_collapse(self, small_specs):
        ds = Dataset(
            [
                Record(id="a", fields={"first": "A", "last": "L", "city": "c", "note": "1"}),
                Record(id="b", fields={"first": "a", "last": "l", "city": "C", "note": "2"}),
            ]
        )
        assert len(deduplicate(ds, small_specs)) == 1

    def test_idempotent_after_preprocess(self, small_specs):
        raw = Dataset(
            [Record(id=str(i), fields={"first": f"n{i}", "last": "x", "city": "y"}) for i in range(5)]
        )
        ds = preprocess_dataset(raw, small_specs)
        assert len(deduplicate(ds, small_specs)) == 5


class TestDataset:
    def test_rejects_duplicate_ids(self):
        with pytest.raises(ValueError, match="duplicate record id"):
            Dataset([Record(id="a", fields={}), Record(id="a", fields={})])

    def test_csv_round_trip(self, tmp_path):
        ds = Dataset(
            [
                Record(id="r1", fields={"first": "Ann, M.", "city": "Springfield"}),
                Record(id="r2", fields={"first": "Bob", "city": ""}),
            ]
        )
        path = tmp_path / "ds.csv"
        save_csv(ds, str(path))
        back = load_csv(str(path))
        assert [r.id for r in back] == ["r1", "r2"]
        assert back[0].fields["first"] == "Ann, M."

    def test_csv_without_id_column_uses_row_index(self, tmp_path):
        path = tmp_path / "noid.csv"
        path.write_text("first,city\nann,rome\nbob,pisa\n")
        ds = load_csv(str(path))
        assert [r.id for r in ds] == ["0", "1"]


class TestFieldGroupSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            FieldGroupSpec(name="g", members=(), shingle_len=2)
        with pytest.raises(ValueError):
            FieldGroupSpec(name="g", members=("a",), shingle_len=0)
        with pytest.raises(ValueError):
            FieldGroupSpec(name="g", members=("a",), shingle_len=2, weight=0)
