import json

import pytest

from procrew.dataset import (
    Dataset,
    DatasetRecord,
    DuplicateIdError,
    QualityScores,
    RecordParseError,
    UndatedRecordError,
    load_jsonl,
    quality_gate,
    time_split,
    write_jsonl,
)


def record(i, date, **kwargs):
    return {
        "id": f"r{i}",
        "reaction": "A>>B",
        "procedure_text": "wait(time_period=1 h);",
        "date": date,
        **kwargs,
    }


def write_lines(path, rows):
    path.write_text("\n".join(json.dumps(r) if isinstance(r, dict) else r for r in rows) + "\n")


def test_load_three_valid(tmp_path):
    path = tmp_path / "data.jsonl"
    write_lines(path, [record(i, f"2024-01-0{i + 1}") for i in range(3)])
    ds = load_jsonl(str(path))
    assert len(ds) == 3
    assert ds.sidecar == []
    assert ds.records[0].date.isoformat() == "2024-01-01"


def test_lenient_sidecar(tmp_path):
    path = tmp_path / "data.jsonl"
    write_lines(path, [record(0, "2024-01-01"), "{not json", record(1, "2024-01-02")])
    ds = load_jsonl(str(path))
    assert len(ds) == 2
    assert len(ds.sidecar) == 1
    assert ds.sidecar[0][0] == 2


def test_strict_mode_raises(tmp_path):
    path = tmp_path / "data.jsonl"
    write_lines(path, [record(0, "2024-01-01"), "{not json"])
    with pytest.raises(RecordParseError):
        load_jsonl(str(path), strict=True)


def test_missing_field_is_malformed(tmp_path):
    path = tmp_path / "data.jsonl"
    row = record(0, "2024-01-01")
    del row["reaction"]
    write_lines(path, [row])
    ds = load_jsonl(str(path))
    assert len(ds) == 0 and len(ds.sidecar) == 1


def test_duplicate_ids_always_fatal(tmp_path):
    path = tmp_path / "data.jsonl"
    write_lines(path, [record(0, "2024-01-01"), record(0, "2024-01-02")])
    with pytest.raises(DuplicateIdError):
        load_jsonl(str(path))


def test_unknown_fields_preserved(tmp_path):
    path = tmp_path / "data.jsonl"
    write_lines(path, [record(0, "2024-01-01", reaction_name="aldol", lab="north")])
    ds = load_jsonl(str(path))
    assert ds.records[0].extra == {"reaction_name": "aldol", "lab": "north"}
    out = tmp_path / "out.jsonl"
    write_jsonl(ds, str(out))
    reloaded = json.loads(out.read_text().splitlines()[0])
    assert reloaded["reaction_name"] == "aldol"
    assert reloaded["lab"] == "north"


# --- time_split ------------------------------------------------------------------


def make_ds(dates):
    return Dataset(
        records=[
            DatasetRecord(id=f"r{i}", reaction="A>>B", procedure_text="x;", date=None if d is None else __import__("datetime").date.fromisoformat(d))
            for i, d in enumerate(dates)
        ]
    )


def test_time_split_newest_ten_percent():
    ds = make_ds([f"2024-01-{d:02d}" for d in range(1, 11)])
    train, test = time_split(ds, 0.10)
    assert len(test) == 1
    assert test.records[0].date.isoformat() == "2024-01-10"
    assert len(train) == 9


def test_time_split_all_same_date_goes_to_test():
    ds = make_ds(["2024-01-01"] * 6)
    train, test = time_split(ds, 0.10)
    assert len(train) == 0
    assert len(test) == 6


def test_time_split_fraction_zero():
    ds = make_ds(["2024-01-01", "2024-02-01"])
    train, test = time_split(ds, 0.0)
    assert len(test) == 0
    assert len(train) == 2


def test_time_split_no_date_straddle():
    ds = make_ds(["2024-01-01", "2024-01-02", "2024-01-02", "2024-01-02"])
    train, test = time_split(ds, 0.25)  # nominal cut would split the 01-02 block
    dates_train = {r.date for r in train.records}
    dates_test = {r.date for r in test.records}
    assert not dates_train & dates_test
    assert len(test) == 3


def test_time_split_is_partition():
    ds = make_ds(["2024-03-01", "2024-01-01", "2024-02-01", "2024-04-01", "2024-05-01"])
    train, test = time_split(ds, 0.4)
    ids = sorted(r.id for r in train.records) + sorted(r.id for r in test.records)
    assert sorted(ids) == sorted(r.id for r in ds.records)
    assert max(r.date for r in train.records) < min(r.date for r in test.records)


def test_time_split_undated_rejected():
    ds = make_ds(["2024-01-01", None])
    with pytest.raises(UndatedRecordError):
        time_split(ds, 0.5)


def test_time_split_deterministic():
    ds = make_ds(["2024-01-01", "2024-01-03", "2024-01-02"])
    a = time_split(ds, 0.34)
    b = time_split(ds, 0.34)
    assert [r.id for r in a[1].records] == [r.id for r in b[1].records]


# --- quality gate -----------------------------------------------------------------


def test_quality_gate_examples():
    assert quality_gate(QualityScores(6, 6, 6, 6)) is True
    assert quality_gate(QualityScores(9, 9, 9, 2)) is False
    assert quality_gate(QualityScores(5, 5, 5, 5)) is True


def test_quality_gate_average_floor():
    assert quality_gate(QualityScores(3, 3, 3, 3)) is False  # avg 3 < 5
    assert quality_gate(QualityScores(10, 3, 3, 4)) is True  # avg 5.0, min 3.0


def test_quality_gate_monotone(rng):
    for _ in range(100):
        axes = [rng.uniform(0, 9) for _ in range(4)]
        base = quality_gate(QualityScores(*axes))
        bumped = list(axes)
        bumped[rng.randrange(4)] += rng.uniform(0, 10 - max(bumped))
        bumped = [min(b, 10.0) for b in bumped]
        raised = quality_gate(QualityScores(*bumped))
        assert not (base and not raised)


def test_scores_out_of_range_rejected():
    with pytest.raises(ValueError):
        QualityScores(11, 5, 5, 5)
